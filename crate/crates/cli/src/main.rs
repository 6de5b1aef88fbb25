use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinlog_core::corpus::{emit_corpus, overlap_report, read_records, CorpusManifest};
use kinlog_core::eval::{baseline_table, evaluate, grade, read_generations, GenMode, GradeOptions, Grounding, MfrBaseline};
use kinlog_core::rules::{validate_rulebase, RuleTable};
use kinlog_core::{Error, Generator, NamePool, Naming, Record, RuleBase, SplitOptions, SplitPlan, Strategy, StoryTemplates, TemplateSet};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "kinlog", version, about = "Kinship-logic corpus generation, proof grading and overlap analysis")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a rulebase file.
    RulesCheck(RulesArgs),
    /// Generate train/test splits and write corpora for the chosen strategies.
    Generate(GenerateArgs),
    /// Train/test building-block coverage per test level, as CSV.
    Overlap(OverlapArgs),
    /// Grade a generations file and write one verdict per example.
    Verify(GradeArgs),
    /// Per-level answer accuracy, proof validity and MFR accuracy, as CSV.
    Evaluate(EvaluateArgs),
    /// Most-frequent-relation baseline accuracy per test level, as CSV.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct RulesArgs {
    /// Rulebase file (default: the shipped rules).
    #[arg(long, env = "KINLOG_RULES")]
    rules: Option<PathBuf>,
}

#[derive(Args)]
struct TemplateArgs {
    /// Sentence template file (default: the shipped templates).
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    rules: RulesArgs,
    #[command(flatten)]
    templates: TemplateArgs,
    /// Master seed; required so every run is reproducible.
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Train counts per level, e.g. `2:1000,4:1000,6:1000` or `2-6:500`.
    #[arg(long, value_parser = parse_counts)]
    levels: BTreeMap<usize, usize>,
    /// Test counts per level, e.g. `2-10:200`.
    #[arg(long, value_parser = parse_counts, conflicts_with = "test_total")]
    test_levels: Option<BTreeMap<usize, usize>>,
    /// Total test examples spread evenly over `--test-range`.
    #[arg(long)]
    test_total: Option<usize>,
    /// Levels for `--test-total`, e.g. `2-10`.
    #[arg(long, default_value = "2-10", value_parser = parse_range)]
    test_range: std::vec::Vec<usize>,
    /// Comma-separated strategies or `all`.
    #[arg(long, default_value = "all", value_parser = parse_strategies)]
    strategy: std::vec::Vec<Strategy>,
    /// `named` or `anon`.
    #[arg(long, default_value = "anon")]
    naming: Naming,
    /// Name pool file with `name,gender` lines (default: the shipped pool).
    #[arg(long)]
    names: Option<PathBuf>,
    /// Size of the anonymization token pool.
    #[arg(long, default_value_t = 20)]
    pool_size: usize,
    /// Keep stories in chain order instead of shuffling them.
    #[arg(long)]
    no_shuffle: bool,
    /// Named mode: draws per test example before giving up.
    #[arg(long, default_value_t = 1000)]
    max_attempts: usize,
    /// Render stories with external sentence templates (`relation<TAB>sentence`);
    /// `sample` selects the shipped sample set.
    #[arg(long)]
    story_templates: Option<String>,
}

#[derive(Args)]
struct OverlapArgs {
    #[command(flatten)]
    templates: TemplateArgs,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Strategy whose proofs are compared.
    #[arg(long, default_value = "spr")]
    strategy: Strategy,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradeArgs {
    #[command(flatten)]
    rules: RulesArgs,
    #[command(flatten)]
    templates: TemplateArgs,
    /// Test sidecar (`.jsonl`).
    #[arg(long)]
    test: PathBuf,
    /// Generations file: `id<TAB>text` per line.
    #[arg(long)]
    gen: PathBuf,
    /// proof-generated, proof-given or no-proof.
    #[arg(long, default_value = "proof-generated")]
    mode: GenMode,
    /// Only accept answers in the queried direction.
    #[arg(long)]
    strict_direction: bool,
    /// `ordered` (forwards or backwards) or `set` (any order).
    #[arg(long, default_value = "ordered")]
    grounding: Grounding,
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    grade: GradeArgs,
    /// Train sidecar for the MFR column; `NA` without it.
    #[arg(long)]
    train: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("`{x}` is not a level"));
    let levels: Vec<usize> = match s.split_once('-') {
        Some((a, b)) => (num(a)?..=num(b)?).collect(),
        None => vec![num(s)?],
    };
    if levels.is_empty() {
        return Err(format!("empty level range `{s}`"));
    }
    if let Some(l) = levels.iter().find(|&&l| l < 2) {
        return Err(format!("level {l} is below the minimum of 2"));
    }
    Ok(levels)
}

fn parse_counts(s: &str) -> Result<BTreeMap<usize, usize>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',') {
        let (levels, count) = part
            .split_once(':')
            .ok_or_else(|| format!("`{part}` should look like LEVEL:COUNT or LOW-HIGH:COUNT"))?;
        let count: usize = count.trim().parse().map_err(|_| format!("`{count}` is not a count"))?;
        for l in parse_range(levels)? {
            if out.insert(l, count).is_some() {
                return Err(format!("level {l} given twice"));
            }
        }
    }
    Ok(out)
}

fn parse_strategies(s: &str) -> Result<Vec<Strategy>, String> {
    if s == "all" {
        return Ok(Strategy::ALL.to_vec());
    }
    let mut out: Vec<Strategy> = s.split(',').map(|p| p.trim().parse()).collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// Exit status 1 for bad invocations, 2 for bad data or configuration.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Argument(_)) { 1 } else { 2 };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 1, message }
}

fn require_file(flag: &str, path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: format!("--{flag}: no such file {}", path.display()),
        })
    }
}

fn load_rules(args: &RulesArgs) -> Result<RuleBase, Failure> {
    match &args.rules {
        Some(p) => {
            require_file("rules", p)?;
            Ok(RuleBase::load(p)?)
        }
        None => Ok(RuleBase::default_rules()),
    }
}

fn load_templates(args: &TemplateArgs) -> Result<TemplateSet, Failure> {
    match &args.templates {
        Some(p) => {
            require_file("templates", p)?;
            Ok(TemplateSet::load(p)?)
        }
        None => Ok(TemplateSet::default_set()),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn rules_check(args: RulesArgs) -> Result<String, Failure> {
    let table = match &args.rules {
        Some(p) => {
            require_file("rules", p)?;
            RuleTable::load(p)?
        }
        None => RuleTable::parse(kinlog_core::rules::DEFAULT_RULES, "default.rules")?,
    };
    let violations = validate_rulebase(&table);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(Failure {
            code: 2,
            message: format!("{} rulebase violation(s):\n{}", violations.len(), list.join("\n")),
        });
    }
    let rb = RuleBase::from_table(table)?;
    Ok(format!(
        "OK: {} relations, {} compose entries, inversion total",
        kinlog_core::RelationKind::COUNT,
        rb.compose_count()
    ))
}

fn generate(args: GenerateArgs) -> Result<String, Failure> {
    let test_plan = match (&args.test_levels, args.test_total) {
        (Some(t), None) => t.clone(),
        (None, Some(n)) => SplitPlan::spread_test(n, args.test_range.iter().copied()),
        (None, None) => return Err(usage("--test-levels or --test-total is required".into())),
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    };
    if args.strategy.is_empty() {
        return Err(usage("--strategy: no strategy given".into()));
    }
    let rules = load_rules(&args.rules)?;
    let tpl = load_templates(&args.templates)?;
    let names = match &args.names {
        Some(p) => {
            require_file("names", p)?;
            NamePool::load(p)?
        }
        None => NamePool::default_pool(),
    };
    let story_templates = match args.story_templates.as_deref() {
        None => None,
        Some("sample") => Some(StoryTemplates::sample()),
        Some(p) => {
            require_file("story-templates", Path::new(p))?;
            Some(StoryTemplates::load(Path::new(p))?)
        }
    };
    fs::create_dir_all(&args.out)
        .map_err(|e| Failure { code: 2, message: format!("--out: cannot create {}: {e}", args.out.display()) })?;

    let mut gen = Generator::new(&rules, &names)?;
    gen.shuffle = !args.no_shuffle;
    gen.pool_size = args.pool_size;
    let plan = SplitPlan {
        train: args.levels.clone(),
        test: test_plan,
    };
    let splits = gen.build_splits(
        &plan,
        SplitOptions {
            naming: args.naming,
            seed: args.seed,
            max_attempts: args.max_attempts,
        },
    )?;

    let train: Vec<Record> = splits
        .train
        .par_iter()
        .enumerate()
        .map(|(i, ex)| Record::build(format!("train-{i}"), ex, &rules))
        .collect::<kinlog_core::Result<_>>()?;
    let test: Vec<Record> = splits
        .test
        .iter()
        .flat_map(|(level, exs)| exs.iter().enumerate().map(move |(i, ex)| (*level, i, ex)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(level, i, ex)| Record::build(format!("test-{level}-{i}"), ex, &rules))
        .collect::<kinlog_core::Result<_>>()?;

    let mut files = emit_corpus(&args.out, "train", &train, &args.strategy, &tpl, story_templates.as_ref())?;
    files.extend(emit_corpus(&args.out, "test", &test, &args.strategy, &tpl, story_templates.as_ref())?);
    let manifest = CorpusManifest {
        split: splits.manifest.clone(),
        strategies: args.strategy.clone(),
        story_templates: args.story_templates.clone(),
        files: files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect(),
    };
    manifest.write(&args.out.join("manifest.json"))?;
    let rejected: usize = splits.manifest.test_stats.values().map(|s| s.rejected).sum();
    Ok(format!(
        "generated {} train and {} test examples ({} strategies, {} test draws rejected) in {}",
        train.len(),
        test.len(),
        args.strategy.len(),
        rejected,
        args.out.display()
    ))
}

fn overlap(args: OverlapArgs) -> Result<String, Failure> {
    require_file("train", &args.train)?;
    require_file("test", &args.test)?;
    let tpl = load_templates(&args.templates)?;
    let train = read_records(&args.train)?;
    let test = read_records(&args.test)?;
    let report = overlap_report(&train, &test, args.strategy, &tpl);
    write_output(args.out.as_deref(), &report.to_csv())?;
    Ok(format!(
        "overlap of {} test against {} train examples over {} levels",
        test.len(),
        train.len(),
        report.levels.len()
    ))
}

struct Graded {
    records: Vec<Record>,
    gens: Vec<kinlog_core::Generation>,
    rules: RuleBase,
    tpl: TemplateSet,
    opts: GradeOptions,
}

fn load_grading(args: &GradeArgs) -> Result<Graded, Failure> {
    require_file("test", &args.test)?;
    require_file("gen", &args.gen)?;
    Ok(Graded {
        rules: load_rules(&args.rules)?,
        tpl: load_templates(&args.templates)?,
        records: read_records(&args.test)?,
        gens: read_generations(&args.gen, args.mode)?,
        opts: GradeOptions {
            strict_direction: args.strict_direction,
            grounding: args.grounding,
        },
    })
}

fn verify(args: GradeArgs) -> Result<String, Failure> {
    let g = load_grading(&args)?;
    let pairs = kinlog_core::eval::align(&g.records, &g.gens)?;
    let lines: Vec<(bool, bool, String)> = pairs
        .par_iter()
        .map(|(rec, gen)| {
            let v = grade(rec, gen, &g.rules, &g.tpl, g.opts);
            let line = serde_json::json!({ "id": rec.id, "level": rec.level, "verdict": v }).to_string();
            (v.answer_correct, v.proof_valid, line)
        })
        .collect();
    let mut text = String::new();
    for (_, _, l) in &lines {
        text.push_str(l);
        text.push('\n');
    }
    write_output(args.out.as_deref(), &text)?;
    let n = lines.len().max(1) as f64;
    let correct = lines.iter().filter(|l| l.0).count() as f64;
    let valid = lines.iter().filter(|l| l.1).count() as f64;
    Ok(format!(
        "verified {} generations: answer accuracy {:.4}, proof validity {:.4}",
        lines.len(),
        correct / n,
        valid / n
    ))
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<String, Failure> {
    let mfr = match &args.train {
        Some(p) => {
            require_file("train", p)?;
            Some(MfrBaseline::fit(&read_records(p)?)?)
        }
        None => None,
    };
    let g = load_grading(&args.grade)?;
    let table = evaluate(&g.records, &g.gens, &g.rules, &g.tpl, g.opts, mfr.as_ref())?;
    write_output(args.grade.out.as_deref(), &table.to_csv())?;
    Ok(format!("evaluated {} generations over {} levels", g.gens.len(), table.rows.len()))
}

fn baseline(args: BaselineArgs) -> Result<String, Failure> {
    require_file("train", &args.train)?;
    require_file("test", &args.test)?;
    let mfr = MfrBaseline::fit(&read_records(&args.train)?)?;
    let test = read_records(&args.test)?;
    let table = baseline_table(&test, &mfr);
    write_output(args.out.as_deref(), &table.to_csv())?;
    Ok(format!(
        "mfr baseline over {} test examples (global mode: {})",
        test.len(),
        mfr.global_mode()
    ))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    // Results go to stdout; keep the summary on stderr when stdout carries data.
    let (result, summary_to_stderr) = match cli.command {
        Command::RulesCheck(a) => (rules_check(a), false),
        Command::Generate(a) => (generate(a), false),
        Command::Overlap(a) => {
            let piped = a.out.is_none();
            (overlap(a), piped)
        }
        Command::Verify(a) => {
            let piped = a.out.is_none();
            (verify(a), piped)
        }
        Command::Evaluate(a) => {
            let piped = a.grade.out.is_none();
            (evaluate_cmd(a), piped)
        }
        Command::Baseline(a) => {
            let piped = a.out.is_none();
            (baseline(a), piped)
        }
    };
    match result {
        Ok(summary) => {
            if summary_to_stderr {
                eprintln!("{summary}");
            } else {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
