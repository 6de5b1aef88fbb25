use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kinlog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinlog"))
        .args(args)
        .env_remove("KINLOG_RULES")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "generate",
        "--levels",
        "2:150,4:150",
        "--test-levels",
        "2-5:20",
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    kinlog(&args)
}

/// Echoes the gold continuation after `<PROOF>` for every flat line.
fn gold_generations(flat: &Path, out: &Path) {
    let text = fs::read_to_string(flat).unwrap();
    let mut lines = String::new();
    for line in text.lines() {
        let (id, body) = line.split_once('\t').unwrap();
        let at = body.find("<PROOF>").unwrap() + "<PROOF>".len();
        lines.push_str(&format!("{id}\t{}\n", body[at..].trim()));
    }
    fs::write(out, lines).unwrap();
}

#[test]
fn rules_check_reports_the_shipped_rulebase() {
    let o = kinlog(&["rules-check"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "OK: 20 relations, 100 compose entries, inversion total");
}

#[test]
fn rules_check_names_violations_and_honours_the_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.rules");
    fs::write(&path, "brother . father -> aunt\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kinlog"))
        .arg("rules-check")
        .env("KINLOG_RULES", &path)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("gender violation: `brother . father -> aunt`"), "{err}");
    assert!(err.contains("incomplete inversion table"), "{err}");
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing_seed = kinlog(&["generate", "--levels", "2:5", "--test-total", "9", "--out", out]);
    assert_eq!(missing_seed.status.code(), Some(1));
    assert!(stderr(&missing_seed).contains("--seed"));
    let bad_level = kinlog(&["generate", "--levels", "1:5", "--test-total", "9", "--seed", "1", "--out", out]);
    assert_eq!(bad_level.status.code(), Some(1));
    assert!(stderr(&bad_level).contains("--levels"));
    let no_test = kinlog(&["generate", "--levels", "2:5", "--seed", "1", "--out", out]);
    assert_eq!(no_test.status.code(), Some(1));
    assert_eq!(kinlog(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(kinlog(&["--help"]).status.code(), Some(0));
}

#[test]
fn generation_is_byte_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = generate(&a, &["--jobs", "1", "--naming", "named"]);
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(stdout(&oa).starts_with("generated 300 train and 80 test examples"));
    assert!(generate(&b, &["--jobs", "4", "--naming", "named"]).status.success());
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 13);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
    let np = fs::read_to_string(a.join("test.np.txt")).unwrap();
    assert!(np.lines().all(|l| l.contains("<PROOF> none . <ANSWER>")));
}

#[test]
fn evaluate_scores_gold_generations_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("corpus");
    assert!(generate(&c, &["--strategy", "spr,lp"]).status.success());
    let gens = dir.path().join("gold.txt");
    gold_generations(&c.join("test.lp.txt"), &gens);
    let csv = dir.path().join("metrics.csv");
    let o = kinlog(&[
        "evaluate",
        "--test",
        c.join("test.jsonl").to_str().unwrap(),
        "--gen",
        gens.to_str().unwrap(),
        "--train",
        c.join("train.jsonl").to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("level,n,answer_acc,proof_validity,mfr_acc"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for (row, level) in rows.iter().zip(2..) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[..4], [level.to_string().as_str(), "20", "1.0000", "1.0000"]);
        let mfr: f64 = cells[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&mfr));
    }

    let verdicts = kinlog(&[
        "verify",
        "--test",
        c.join("test.jsonl").to_str().unwrap(),
        "--gen",
        gens.to_str().unwrap(),
    ]);
    assert!(verdicts.status.success());
    assert_eq!(stdout(&verdicts).lines().count(), 80);
    assert!(stderr(&verdicts).contains("answer accuracy 1.0000, proof validity 1.0000"));
}

#[test]
fn orphan_generations_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("corpus");
    assert!(generate(&c, &["--strategy", "spr"]).status.success());
    let gens = dir.path().join("gen.txt");
    fs::write(&gens, "nope\t<ANSWER> x\n").unwrap();
    let o = kinlog(&["evaluate", "--test", c.join("test.jsonl").to_str().unwrap(), "--gen", gens.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("generation nope has no record"), "{}", stderr(&o));

    let missing = kinlog(&["evaluate", "--test", "/no/such.jsonl", "--gen", gens.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("--test"));
}

#[test]
fn overlap_and_baseline_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("corpus");
    assert!(generate(&c, &["--strategy", "spr"]).status.success());
    let train = c.join("train.jsonl");
    let test = c.join("test.jsonl");
    let o = kinlog(&["overlap", "--train", train.to_str().unwrap(), "--test", test.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert!(csv.starts_with("block,2,3,4,5\nproofs,"), "{csv}");
    assert!(csv.contains("\nentities,100.00,100.00,100.00,100.00\n"), "{csv}");

    let b = kinlog(&["baseline", "--train", train.to_str().unwrap(), "--test", test.to_str().unwrap()]);
    assert!(b.status.success());
    let csv = stdout(&b);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().skip(1).all(|l| l.contains(",NA,NA,")), "{csv}");
    assert_eq!(csv, stdout(&kinlog(&["baseline", "--train", train.to_str().unwrap(), "--test", test.to_str().unwrap()])));
}

#[test]
fn story_templates_change_only_the_story() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("corpus");
    let o = generate(&c, &["--strategy", "spr", "--story-templates", "sample"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(c.join("train.spr.txt")).unwrap();
    assert!(text.lines().all(|l| l.contains("<PROOF> since ")));
    assert!(fs::read_to_string(c.join("manifest.json")).unwrap().contains("\"story_templates\": \"sample\""));
}
