//! Grading of model generations: answer extraction, proof validity, the
//! most-frequent-relation baseline and per-level metric tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Record, ANSWER_TAG, PROOF_TAG};
use crate::error::{Error, Result};
use crate::kinship::{Gender, RelationKind, SurfaceFact, SurfaceStep};
use crate::rules::RuleBase;
use crate::templates::{split_sentences, tokenize, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenMode {
    /// Prompt ends at `<PROOF>`; the model writes proof and answer.
    ProofGenerated,
    /// Prompt carries the gold proof and ends at `<ANSWER>`.
    ProofGiven,
    /// The model was trained on `none .` proofs.
    NoProof,
}

impl FromStr for GenMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "proof-generated" | "proof_generated" => Ok(GenMode::ProofGenerated),
            "proof-given" | "proof_given" => Ok(GenMode::ProofGiven),
            "no-proof" | "no_proof" => Ok(GenMode::NoProof),
            other => Err(format!(
                "unknown mode `{other}` (expected proof-generated, proof-given or no-proof)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub id: String,
    /// Everything the model emitted after its prompt.
    pub raw_text: String,
    pub mode: GenMode,
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

pub fn escape(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('\n', "\\n")
        .replace('\t', "\\t")
        .replace('\r', "\\r")
}

/// Reads `id<TAB>raw_text` lines; newlines inside raw_text are escaped.
pub fn parse_generations(text: &str, mode: GenMode, source_name: &str) -> Result<Vec<Generation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, raw) = line
            .split_once('\t')
            .ok_or_else(|| Error::Input(format!("{source_name}:{}: expected `id<TAB>text`", i + 1)))?;
        out.push(Generation {
            id: id.to_string(),
            raw_text: unescape(raw),
            mode,
        });
    }
    Ok(out)
}

pub fn read_generations(path: &Path, mode: GenMode) -> Result<Vec<Generation>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read generations {}: {e}", path.display())))?;
    parse_generations(&text, mode, &path.display().to_string())
}

pub fn write_generations(path: &Path, gens: &[Generation]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for g in gens {
        writeln!(w, "{}\t{}", g.id, escape(&g.raw_text))?;
    }
    w.flush()?;
    Ok(())
}

/// The first sentence after the first `<ANSWER>` tag, read back into a
/// triple. Proof-given generations start right after the tag, so the whole
/// text is used when the tag is absent.
pub fn extract_answer(gen: &Generation, tpl: &TemplateSet) -> Option<SurfaceFact> {
    let tail = match gen.raw_text.find(ANSWER_TAG) {
        Some(at) => &gen.raw_text[at + ANSWER_TAG.len()..],
        None if gen.mode == GenMode::ProofGiven => gen.raw_text.as_str(),
        None => return None,
    };
    let toks = tokenize(tail);
    let end = toks.iter().position(|t| *t == "." || t.starts_with('<'));
    let sentence = match end {
        Some(i) if toks[i] == "." => &toks[..=i],
        Some(i) => &toks[..i],
        None => &toks[..],
    };
    if sentence.is_empty() {
        return None;
    }
    tpl.parse_answer(&sentence.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    AnswerParseFail,
    AnswerWrong,
    StepParseFail,
    RuleViolation,
    UngroundedPremise,
    NoProofSection,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureReason::None => "none",
            FailureReason::AnswerParseFail => "answer_parse_fail",
            FailureReason::AnswerWrong => "answer_wrong",
            FailureReason::StepParseFail => "step_parse_fail",
            FailureReason::RuleViolation => "rule_violation",
            FailureReason::UngroundedPremise => "ungrounded_premise",
            FailureReason::NoProofSection => "no_proof_section",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    ParseFail,
    RuleViolation,
    Ungrounded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDiagnostic {
    pub index: usize,
    pub status: StepStatus,
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub answer_correct: bool,
    pub proof_valid: bool,
    pub failure_reason: FailureReason,
    pub per_step: Vec<StepDiagnostic>,
}

/// How proof premises must be supported by earlier material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grounding {
    /// Every premise is a story fact or the conclusion of an earlier step,
    /// reading the steps either forwards or backwards.
    #[default]
    Ordered,
    /// Steps may be accepted in any order.
    Unordered,
}

impl FromStr for Grounding {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ordered" => Ok(Grounding::Ordered),
            "unordered" | "set" => Ok(Grounding::Unordered),
            other => Err(format!("unknown grounding `{other}` (expected ordered or set)")),
        }
    }
}

/// Story facts plus what is needed to invert them.
#[derive(Debug, Clone)]
pub struct StoryContext<'a> {
    pub story: &'a [SurfaceFact],
    pub genders: HashMap<String, Gender>,
}

impl<'a> StoryContext<'a> {
    pub fn from_record(record: &'a Record) -> Self {
        StoryContext {
            story: &record.story,
            genders: record.genders(),
        }
    }

    fn inverse(&self, rules: &RuleBase, f: &SurfaceFact) -> Option<SurfaceFact> {
        let g = *self.genders.get(f.object())?;
        Some(SurfaceFact::new(f.object(), rules.invert(f.relation(), g), f.subject()))
    }
}

/// The text between `<PROOF>` (or the start) and the first `<ANSWER>`.
fn proof_region(text: &str) -> Option<&str> {
    let start = text.find(PROOF_TAG).map_or(0, |i| i + PROOF_TAG.len());
    let rest = &text[start..];
    let end = rest.find(ANSWER_TAG)?;
    Some(rest[..end].trim())
}

fn step_licensed(step: &SurfaceStep, rules: &RuleBase) -> bool {
    let SurfaceStep(p1, p2, c) = step;
    p1.object() == p2.subject()
        && c.subject() == p1.subject()
        && c.object() == p2.object()
        && p1.subject() != p2.object()
        && rules.compose(p1.relation(), p2.relation()) == Some(c.relation())
}

fn grounded_in_order<'s>(
    steps: impl Iterator<Item = &'s SurfaceStep>,
    base: &HashSet<SurfaceFact>,
    ctx: &StoryContext,
    rules: &RuleBase,
) -> bool {
    let mut known = base.clone();
    for SurfaceStep(p1, p2, c) in steps {
        if !known.contains(p1) || !known.contains(p2) {
            return false;
        }
        if let Some(inv) = ctx.inverse(rules, c) {
            known.insert(inv);
        }
        known.insert(c.clone());
    }
    true
}

/// Returns which steps end up supported under `Unordered` grounding.
fn grounded_any_order(steps: &[SurfaceStep], base: &HashSet<SurfaceFact>, ctx: &StoryContext, rules: &RuleBase) -> Vec<bool> {
    let mut known = base.clone();
    let mut done = vec![false; steps.len()];
    loop {
        let mut progressed = false;
        for (k, SurfaceStep(p1, p2, c)) in steps.iter().enumerate() {
            if !done[k] && known.contains(p1) && known.contains(p2) {
                done[k] = true;
                progressed = true;
                if let Some(inv) = ctx.inverse(rules, c) {
                    known.insert(inv);
                }
                known.insert(c.clone());
            }
        }
        if !progressed {
            return done;
        }
    }
}

/// Checks the proof region of `text`: every sentence must parse as a step,
/// be licensed by a composition rule, and have grounded premises.
pub fn verify_proof(ctx: &StoryContext, text: &str, rules: &RuleBase, tpl: &TemplateSet, grounding: Grounding) -> Verdict {
    let invalid = |reason, per_step| Verdict {
        answer_correct: false,
        proof_valid: false,
        failure_reason: reason,
        per_step,
    };
    let Some(region) = proof_region(text) else {
        return invalid(FailureReason::NoProofSection, Vec::new());
    };
    let toks = tokenize(region);
    if toks.is_empty() || toks == ["none", "."] {
        return invalid(FailureReason::NoProofSection, Vec::new());
    }

    let sentences = split_sentences(&toks);
    let parsed: Vec<Option<SurfaceStep>> = sentences.iter().map(|s| tpl.parse_step_tokens(s)).collect();
    let mut per_step: Vec<StepDiagnostic> = sentences
        .iter()
        .zip(&parsed)
        .enumerate()
        .map(|(index, (s, p))| StepDiagnostic {
            index,
            status: match p {
                None => StepStatus::ParseFail,
                Some(step) if !step_licensed(step, rules) => StepStatus::RuleViolation,
                Some(_) => StepStatus::Ok,
            },
            sentence: s.join(" "),
        })
        .collect();
    if per_step.iter().any(|d| d.status == StepStatus::ParseFail) {
        return invalid(FailureReason::StepParseFail, per_step);
    }
    if per_step.iter().any(|d| d.status == StepStatus::RuleViolation) {
        return invalid(FailureReason::RuleViolation, per_step);
    }

    let steps: Vec<SurfaceStep> = parsed.into_iter().flatten().collect();
    let mut base: HashSet<SurfaceFact> = HashSet::new();
    for f in ctx.story {
        base.insert(f.clone());
        if let Some(inv) = ctx.inverse(rules, f) {
            base.insert(inv);
        }
    }
    let ok = match grounding {
        Grounding::Ordered => {
            grounded_in_order(steps.iter(), &base, ctx, rules) || grounded_in_order(steps.iter().rev(), &base, ctx, rules)
        }
        Grounding::Unordered => {
            let done = grounded_any_order(&steps, &base, ctx, rules);
            for (d, ok) in per_step.iter_mut().zip(&done) {
                if !ok {
                    d.status = StepStatus::Ungrounded;
                }
            }
            done.iter().all(|&x| x)
        }
    };
    if !ok {
        if grounding == Grounding::Ordered {
            // Flag steps whose premises are unsupported reading forwards.
            let mut known = base.clone();
            for (d, SurfaceStep(p1, p2, c)) in per_step.iter_mut().zip(&steps) {
                if !known.contains(p1) || !known.contains(p2) {
                    d.status = StepStatus::Ungrounded;
                }
                if let Some(inv) = ctx.inverse(rules, c) {
                    known.insert(inv);
                }
                known.insert(c.clone());
            }
        }
        return invalid(FailureReason::UngroundedPremise, per_step);
    }
    Verdict {
        answer_correct: false,
        proof_valid: true,
        failure_reason: FailureReason::None,
        per_step,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradeOptions {
    /// Require the answer triple in the exact query direction.
    pub strict_direction: bool,
    pub grounding: Grounding,
}

pub fn answer_matches(
    predicted: &SurfaceFact,
    gold: &SurfaceFact,
    genders: &HashMap<String, Gender>,
    rules: &RuleBase,
    strict: bool,
) -> bool {
    if predicted == gold {
        return true;
    }
    if strict {
        return false;
    }
    genders.get(gold.object()).is_some_and(|&g| {
        let inverse = SurfaceFact::new(gold.object(), rules.invert(gold.relation(), g), gold.subject());
        *predicted == inverse
    })
}

/// Grades a generation against its gold record.
pub fn grade(record: &Record, gen: &Generation, rules: &RuleBase, tpl: &TemplateSet, opts: GradeOptions) -> Verdict {
    let ctx = StoryContext::from_record(record);
    let mut verdict = match gen.mode {
        GenMode::ProofGiven => Verdict {
            answer_correct: false,
            proof_valid: false,
            failure_reason: FailureReason::None,
            per_step: Vec::new(),
        },
        GenMode::ProofGenerated | GenMode::NoProof => verify_proof(&ctx, &gen.raw_text, rules, tpl, opts.grounding),
    };
    let answer = extract_answer(gen, tpl);
    verdict.answer_correct = answer
        .as_ref()
        .is_some_and(|a| answer_matches(a, &record.answer, &ctx.genders, rules, opts.strict_direction));
    if verdict.failure_reason == FailureReason::None && !verdict.answer_correct {
        verdict.failure_reason = if answer.is_none() {
            FailureReason::AnswerParseFail
        } else {
            FailureReason::AnswerWrong
        };
    }
    verdict
}

/// Predicts the train-set modal answer relation for an ordered entity pair,
/// falling back to the global mode for unseen pairs. Ties go to the
/// alphabetically first relation name.
#[derive(Debug, Clone)]
pub struct MfrBaseline {
    by_pair: HashMap<(String, String), [usize; RelationKind::COUNT]>,
    global: [usize; RelationKind::COUNT],
}

fn argmax(counts: &[usize; RelationKind::COUNT]) -> RelationKind {
    RelationKind::ALL
        .into_iter()
        .max_by(|a, b| {
            counts[a.index()]
                .cmp(&counts[b.index()])
                .then_with(|| b.as_str().cmp(a.as_str()))
        })
        .expect("nonempty")
}

impl MfrBaseline {
    pub fn fit(train: &[Record]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Argument("most-frequent-relation baseline needs a nonempty train corpus".into()));
        }
        let mut by_pair: HashMap<(String, String), [usize; RelationKind::COUNT]> = HashMap::new();
        let mut global = [0usize; RelationKind::COUNT];
        for r in train {
            let k = r.answer.relation().index();
            by_pair.entry(r.query.clone()).or_insert([0; RelationKind::COUNT])[k] += 1;
            global[k] += 1;
        }
        Ok(MfrBaseline { by_pair, global })
    }

    pub fn predict(&self, source: &str, target: &str) -> RelationKind {
        match self.by_pair.get(&(source.to_string(), target.to_string())) {
            Some(counts) => argmax(counts),
            None => self.global_mode(),
        }
    }

    pub fn global_mode(&self) -> RelationKind {
        argmax(&self.global)
    }

    pub fn correct(&self, record: &Record) -> bool {
        self.predict(&record.query.0, &record.query.1) == record.answer.relation()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelMetrics {
    pub level: usize,
    pub n: usize,
    pub answer_acc: Option<f64>,
    pub proof_validity: Option<f64>,
    pub mfr_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<LevelMetrics>,
}

pub const METRICS_HEADER: &str = "level,n,answer_acc,proof_validity,mfr_acc";

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

impl MetricsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.level,
                r.n,
                cell(r.answer_acc),
                cell(r.proof_validity),
                cell(r.mfr_acc)
            );
        }
        out
    }

    pub fn row(&self, level: usize) -> Option<&LevelMetrics> {
        self.rows.iter().find(|r| r.level == level)
    }
}

/// Pairs generations with records by id; any orphan on either side is an
/// input error.
pub fn align<'r, 'g>(records: &'r [Record], gens: &'g [Generation]) -> Result<Vec<(&'r Record, &'g Generation)>> {
    let by_id: HashMap<&str, &Record> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut seen = HashSet::new();
    let mut orphans = Vec::new();
    let mut pairs = Vec::with_capacity(gens.len());
    for g in gens {
        if !seen.insert(g.id.as_str()) {
            orphans.push(format!("duplicate generation {}", g.id));
            continue;
        }
        match by_id.get(g.id.as_str()) {
            Some(r) => pairs.push((*r, g)),
            None => orphans.push(format!("generation {} has no record", g.id)),
        }
    }
    for r in records {
        if !seen.contains(r.id.as_str()) {
            orphans.push(format!("record {} has no generation", r.id));
        }
    }
    if !orphans.is_empty() {
        let shown: Vec<_> = orphans.iter().take(20).cloned().collect();
        return Err(Error::Input(format!(
            "{} id mismatch(es): {}{}",
            orphans.len(),
            shown.join("; "),
            if orphans.len() > 20 { "; ..." } else { "" }
        )));
    }
    Ok(pairs)
}

pub fn evaluate(
    records: &[Record],
    gens: &[Generation],
    rules: &RuleBase,
    tpl: &TemplateSet,
    opts: GradeOptions,
    mfr: Option<&MfrBaseline>,
) -> Result<MetricsTable> {
    let pairs = align(records, gens)?;
    let graded: Vec<(usize, Verdict, GenMode)> = pairs
        .par_iter()
        .map(|(r, g)| (r.level, grade(r, g, rules, tpl, opts), g.mode))
        .collect();
    // level -> (n, correct, valid, proof-graded)
    let mut acc: BTreeMap<usize, (usize, usize, usize, usize)> = BTreeMap::new();
    for (level, v, mode) in &graded {
        let e = acc.entry(*level).or_default();
        e.0 += 1;
        e.1 += usize::from(v.answer_correct);
        if *mode != GenMode::ProofGiven {
            e.3 += 1;
            e.2 += usize::from(v.proof_valid);
        }
    }
    let mut mfr_hits: BTreeMap<usize, usize> = BTreeMap::new();
    if let Some(m) = mfr {
        for r in records {
            *mfr_hits.entry(r.level).or_default() += usize::from(m.correct(r));
        }
    }
    let rows = acc
        .into_iter()
        .map(|(level, (n, correct, valid, graded))| LevelMetrics {
            level,
            n,
            answer_acc: Some(correct as f64 / n as f64),
            proof_validity: (graded > 0).then(|| valid as f64 / graded as f64),
            mfr_acc: mfr.map(|_| mfr_hits.get(&level).copied().unwrap_or(0) as f64 / n as f64),
        })
        .collect();
    Ok(MetricsTable { rows })
}

/// MFR accuracy alone, per test level.
pub fn baseline_table(test: &[Record], mfr: &MfrBaseline) -> MetricsTable {
    let mut acc: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in test {
        let e = acc.entry(r.level).or_default();
        e.0 += 1;
        e.1 += usize::from(mfr.correct(r));
    }
    MetricsTable {
        rows: acc
            .into_iter()
            .map(|(level, (n, hits))| LevelMetrics {
                level,
                n,
                answer_acc: None,
                proof_validity: None,
                mfr_acc: Some(hits as f64 / n as f64),
            })
            .collect(),
    }
}

/// The generation a perfect model would produce for `record`.
pub fn gold_generation(record: &Record, strategy: crate::proof::Strategy, mode: GenMode, tpl: &TemplateSet) -> Generation {
    let flat = crate::corpus::flat_record(record, strategy, tpl, None);
    let text = match mode {
        GenMode::ProofGiven => {
            let at = flat.text.find(ANSWER_TAG).expect("rendered text has an answer tag");
            flat.text[at + ANSWER_TAG.len()..].trim().to_string()
        }
        _ => {
            let at = flat.text.find(PROOF_TAG).expect("rendered text has a proof tag");
            flat.text[at + PROOF_TAG.len()..].trim().to_string()
        }
    };
    Generation {
        id: record.id.clone(),
        raw_text: text,
        mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example;
    use crate::proof::Strategy;

    const SPR_PROOF: &str = "since Florence is a sister of Gregorio , and Gregorio is a grandson to Betty , then Florence is a granddaughter to Betty . since Gregorio is a brother of Natasha , and Natasha is the granddaughter of Betty , then Gregorio is a grandson of Betty .";
    const SP_PROOF_CORRUPT: &str = "since Gregorio is a brother of Natasha , and Natasha is the granddaughter of Betty , then Gregorio is a grandson of Betty . since Florence is a sister of Gregorio , and Gregorio is a grandson to Betty , then Florence is a niece to Betty .";

    fn setup() -> (Record, RuleBase, TemplateSet) {
        let rb = RuleBase::default_rules();
        (Record::build("ex", &worked_example(), &rb).unwrap(), rb, TemplateSet::default_set())
    }

    fn gen(text: &str, mode: GenMode) -> Generation {
        Generation {
            id: "ex".into(),
            raw_text: text.into(),
            mode,
        }
    }

    #[test]
    fn extracts_first_answer_sentence() {
        let tpl = TemplateSet::default_set();
        let g = gen("since x . <ANSWER> Florence is the granddaughter of Betty", GenMode::ProofGenerated);
        assert_eq!(
            extract_answer(&g, &tpl),
            Some(SurfaceFact::new("Florence", RelationKind::Granddaughter, "Betty"))
        );
        assert_eq!(extract_answer(&gen("Florence is the granddaughter of Betty .", GenMode::ProofGenerated), &tpl), None);
        assert_eq!(extract_answer(&gen("<ANSWER> Florence granddaughter", GenMode::ProofGenerated), &tpl), None);
        assert_eq!(extract_answer(&gen("<ANSWER>", GenMode::ProofGenerated), &tpl), None);
        let two = gen("<ANSWER> Florence is the aunt of Betty . Florence is the granddaughter of Betty .", GenMode::ProofGenerated);
        assert_eq!(extract_answer(&two, &tpl).unwrap().relation(), RelationKind::Aunt);
        let given = gen("Florence is the granddaughter of Betty .", GenMode::ProofGiven);
        assert!(extract_answer(&given, &tpl).is_some());
    }

    #[test]
    fn backward_proof_is_valid() {
        let (rec, rb, tpl) = setup();
        let text = format!("{SPR_PROOF} <ANSWER> Florence is the granddaughter of Betty .");
        let v = grade(&rec, &gen(&text, GenMode::ProofGenerated), &rb, &tpl, GradeOptions::default());
        assert!(v.proof_valid, "{v:?}");
        assert!(v.answer_correct);
        assert_eq!(v.failure_reason, FailureReason::None);
    }

    #[test]
    fn corrupted_relation_is_a_rule_violation() {
        let (rec, rb, tpl) = setup();
        let text = format!("{SP_PROOF_CORRUPT} <ANSWER> Florence is the granddaughter of Betty .");
        let v = grade(&rec, &gen(&text, GenMode::ProofGenerated), &rb, &tpl, GradeOptions::default());
        assert!(!v.proof_valid);
        assert_eq!(v.failure_reason, FailureReason::RuleViolation);
        assert_eq!(v.per_step[1].status, StepStatus::RuleViolation);
        assert!(v.answer_correct);
    }

    #[test]
    fn missing_answer_tag_and_none_proofs() {
        let (rec, rb, tpl) = setup();
        let v = grade(&rec, &gen(SPR_PROOF, GenMode::ProofGenerated), &rb, &tpl, GradeOptions::default());
        assert_eq!(v.failure_reason, FailureReason::NoProofSection);
        let np = gen("none . <ANSWER> Florence is the granddaughter of Betty .", GenMode::NoProof);
        let v = grade(&rec, &np, &rb, &tpl, GradeOptions::default());
        assert!(!v.proof_valid && v.answer_correct);
        let garbage = gen("since blah , and blah , then blah . <ANSWER> x", GenMode::ProofGenerated);
        let v = grade(&rec, &garbage, &rb, &tpl, GradeOptions::default());
        assert_eq!(v.failure_reason, FailureReason::StepParseFail);
    }

    #[test]
    fn ungrounded_premise_is_detected() {
        let (rec, rb, tpl) = setup();
        // Licensed by the rules but Gregorio's grandson fact is never derived.
        let text = "since Florence is a sister of Gregorio , and Gregorio is a grandson to Betty , then Florence is a granddaughter to Betty . <ANSWER> Florence is the granddaughter of Betty .";
        let v = grade(&rec, &gen(text, GenMode::ProofGenerated), &rb, &tpl, GradeOptions::default());
        assert_eq!(v.failure_reason, FailureReason::UngroundedPremise);
        assert_eq!(v.per_step[0].status, StepStatus::Ungrounded);
    }

    #[test]
    fn inverse_answers_match_unless_strict() {
        let (rec, rb, tpl) = setup();
        let g = gen("<ANSWER> Betty is the grandmother of Florence .", GenMode::ProofGiven);
        assert!(grade(&rec, &g, &rb, &tpl, GradeOptions::default()).answer_correct);
        let strict = GradeOptions {
            strict_direction: true,
            ..Default::default()
        };
        assert!(!grade(&rec, &g, &rb, &tpl, strict).answer_correct);
    }

    #[test]
    fn escapes_round_trip() {
        let s = "a\tb\nc\\d";
        let line = format!("id1\t{}", escape(s));
        let g = parse_generations(&line, GenMode::ProofGenerated, "x").unwrap();
        assert_eq!(g[0].raw_text, s);
        assert!(parse_generations("no-tab-here", GenMode::ProofGenerated, "x").is_err());
    }

    #[test]
    fn orphans_are_listed() {
        let (rec, rb, tpl) = setup();
        let g = Generation {
            id: "other".into(),
            raw_text: String::new(),
            mode: GenMode::ProofGenerated,
        };
        let err = evaluate(&[rec], &[g], &rb, &tpl, GradeOptions::default(), None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("other") && msg.contains("record ex"), "{msg}");
    }

    #[test]
    fn gold_generations_score_perfectly() {
        let (rec, rb, tpl) = setup();
        for s in [Strategy::Sp, Strategy::Spr, Strategy::Lp, Strategy::Lpr] {
            let g = gold_generation(&rec, s, GenMode::ProofGenerated, &tpl);
            let t = evaluate(&[rec.clone()], &[g], &rb, &tpl, GradeOptions::default(), None).unwrap();
            assert_eq!(t.to_csv(), "level,n,answer_acc,proof_validity,mfr_acc\n3,1,1.0000,1.0000,NA\n");
        }
    }

    #[test]
    fn mfr_needs_train_data() {
        assert!(matches!(MfrBaseline::fit(&[]), Err(Error::Argument(_))));
        let (rec, ..) = setup();
        let m = MfrBaseline::fit(&[rec.clone()]).unwrap();
        assert_eq!(m.predict("Florence", "Betty"), RelationKind::Granddaughter);
        assert!(m.correct(&rec));
    }

    #[test]
    fn mfr_ties_break_alphabetically() {
        let mut counts = [0usize; RelationKind::COUNT];
        counts[RelationKind::Uncle.index()] = 2;
        counts[RelationKind::Aunt.index()] = 2;
        assert_eq!(argmax(&counts), RelationKind::Aunt);
    }
}
