//! Corpus records: the JSONL sidecar, the flat `<STORY> … <ANSWER> …` text
//! used for language-model training, and train/test overlap statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinship::{check_surface, Gender, RelationKind, SurfaceFact, SurfaceStep};
use crate::proof::{ProofSet, Strategy};
use crate::rules::RuleBase;
use crate::story::{derive_seed, Example, Naming, SplitManifest};
use crate::templates::{split_sentences, tokenize, StoryTemplates, TemplateSet};

pub const STORY_TAG: &str = "<STORY>";
pub const QUERY_TAG: &str = "<QUERY>";
pub const PROOF_TAG: &str = "<PROOF>";
pub const ANSWER_TAG: &str = "<ANSWER>";
pub const NO_PROOF_TEXT: &str = "none .";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordEntity {
    pub surface: String,
    pub gender: Gender,
}

/// Structured ground truth for one example: one JSON object per sidecar line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub level: usize,
    pub seed: u64,
    pub naming: Naming,
    pub entities: Vec<RecordEntity>,
    pub story: Vec<SurfaceFact>,
    pub query: (String, String),
    pub answer: SurfaceFact,
    /// Steps per reasoning strategy (sp, spr, lp, lpr).
    pub proofs: BTreeMap<Strategy, Vec<SurfaceStep>>,
}

impl Record {
    pub fn from_example(id: impl Into<String>, ex: &Example, proofs: &ProofSet) -> Self {
        let steps = |s: Strategy| {
            proofs
                .get(s)
                .steps
                .iter()
                .map(|st| {
                    SurfaceStep(
                        ex.surface_fact(&st.premise1),
                        ex.surface_fact(&st.premise2),
                        ex.surface_fact(&st.conclusion),
                    )
                })
                .collect::<Vec<_>>()
        };
        Record {
            id: id.into(),
            level: ex.level,
            seed: ex.seed,
            naming: ex.naming,
            entities: ex
                .entities
                .iter()
                .map(|e| RecordEntity {
                    surface: e.surface.clone(),
                    gender: e.gender,
                })
                .collect(),
            story: ex.story.iter().map(|f| ex.surface_fact(f)).collect(),
            query: (ex.surface(ex.query.source).to_string(), ex.surface(ex.query.target).to_string()),
            answer: ex.surface_fact(&ex.answer),
            proofs: [Strategy::Sp, Strategy::Spr, Strategy::Lp, Strategy::Lpr]
                .into_iter()
                .map(|s| (s, steps(s)))
                .collect(),
        }
    }

    /// Builds the record with all four proofs computed from `rules`.
    pub fn build(id: impl Into<String>, ex: &Example, rules: &RuleBase) -> Result<Self> {
        let proofs = ProofSet::build(ex, rules)?;
        Ok(Record::from_example(id, ex, &proofs))
    }

    pub fn genders(&self) -> HashMap<String, Gender> {
        self.entities.iter().map(|e| (e.surface.clone(), e.gender)).collect()
    }

    pub fn proof(&self, strategy: Strategy) -> &[SurfaceStep] {
        self.proofs.get(&strategy).map_or(&[], Vec::as_slice)
    }

    /// Rejects surfaces that would collide with template delimiters.
    pub fn check_surfaces(&self, tpl: &TemplateSet) -> Result<()> {
        let reserved = tpl.reserved_words();
        for e in &self.entities {
            check_surface(&e.surface)
                .map_err(|m| Error::Generation(format!("record {}: {m}", self.id)))?;
            if reserved.contains(&e.surface.as_str()) {
                return Err(Error::Generation(format!(
                    "record {}: entity surface `{}` is a template word",
                    self.id, e.surface
                )));
            }
        }
        Ok(())
    }
}

/// Fact-pattern choices for one rendering of a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderPlan {
    pub story: Vec<usize>,
    /// Per step, in the order the steps are rendered.
    pub steps: Vec<[usize; 3]>,
}

const STORY_STREAM: u64 = 0x5707;
const SHORT_STREAM: u64 = 0x5407;
const LONG_STREAM: u64 = 0x1047;

impl RenderPlan {
    /// Story choices depend only on the record seed, so every strategy file
    /// shows the same story text. Step choices are keyed by the step's
    /// position in the forward (sp / lp) order, so a reversed proof renders
    /// the same sentences in reverse.
    pub fn seeded(record: &Record, strategy: Strategy, variants: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(record.seed, &[STORY_STREAM]));
        let story = (0..record.story.len()).map(|_| rng.gen_range(0..variants)).collect();
        let n = record.proof(strategy).len();
        let stream = match strategy {
            Strategy::Sp | Strategy::Spr => SHORT_STREAM,
            _ => LONG_STREAM,
        };
        let mut steps: Vec<[usize; 3]> = (0..n)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(record.seed, &[stream, k as u64]));
                [(); 3].map(|_| rng.gen_range(0..variants))
            })
            .collect();
        if strategy.is_reversed() {
            steps.reverse();
        }
        RenderPlan { story, steps }
    }
}

/// One line of a flat corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatRecord {
    pub id: String,
    pub text: String,
    pub level: usize,
    pub strategy: Strategy,
}

pub fn render_text(
    record: &Record,
    strategy: Strategy,
    tpl: &TemplateSet,
    plan: &RenderPlan,
    story_templates: Option<&StoryTemplates>,
) -> String {
    let mut out = String::with_capacity(512);
    out.push_str(STORY_TAG);
    for (k, fact) in record.story.iter().enumerate() {
        let v = plan.story.get(k).copied().unwrap_or(0);
        let sentence = story_templates
            .and_then(|st| st.render(fact, v))
            .unwrap_or_else(|| tpl.render_fact(fact, v));
        out.push(' ');
        out.push_str(&sentence);
    }
    let _ = write!(out, " {QUERY_TAG} {}", tpl.render_query(&record.query.0, &record.query.1));
    let _ = write!(out, " {PROOF_TAG}");
    let steps = record.proof(strategy);
    if strategy == Strategy::Np || steps.is_empty() {
        let _ = write!(out, " {NO_PROOF_TEXT}");
    } else {
        for (k, step) in steps.iter().enumerate() {
            let v = plan.steps.get(k).copied().unwrap_or([0; 3]);
            out.push(' ');
            out.push_str(&tpl.render_step(step, v));
        }
    }
    let _ = write!(out, " {ANSWER_TAG} {}", tpl.render_answer(&record.answer));
    out
}

pub fn flat_record(
    record: &Record,
    strategy: Strategy,
    tpl: &TemplateSet,
    story_templates: Option<&StoryTemplates>,
) -> FlatRecord {
    let plan = RenderPlan::seeded(record, strategy, tpl.variants());
    FlatRecord {
        id: record.id.clone(),
        text: render_text(record, strategy, tpl, &plan, story_templates),
        level: record.level,
        strategy,
    }
}

/// The structure recovered from a flat text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedText {
    pub story: Vec<SurfaceFact>,
    pub query: (String, String),
    pub proof: Vec<SurfaceStep>,
    pub answer: SurfaceFact,
}

fn sections(text: &str) -> Option<[&str; 4]> {
    let tags = [STORY_TAG, QUERY_TAG, PROOF_TAG, ANSWER_TAG];
    let mut starts = [0usize; 4];
    for (k, tag) in tags.iter().enumerate() {
        if text.matches(tag).count() != 1 {
            return None;
        }
        starts[k] = text.find(tag)?;
    }
    if starts.windows(2).any(|w| w[0] >= w[1]) {
        return None;
    }
    let body = |k: usize| {
        let from = starts[k] + tags[k].len();
        let to = if k + 1 < 4 { starts[k + 1] } else { text.len() };
        text[from..to].trim()
    };
    Some([body(0), body(1), body(2), body(3)])
}

/// Inverts [`render_text`] for facts-template stories.
pub fn parse_text(text: &str, tpl: &TemplateSet) -> Result<ParsedText> {
    let bad = |what: &str| Error::Input(format!("cannot parse {what} in `{text}`"));
    let [story, query, proof, answer] = sections(text).ok_or_else(|| bad("delimiters"))?;
    let story = split_sentences(&tokenize(story))
        .iter()
        .map(|s| tpl.parse_fact_tokens(s).ok_or_else(|| bad("story sentence")))
        .collect::<Result<Vec<_>>>()?;
    let query = tpl.parse_query(query).ok_or_else(|| bad("query"))?;
    let proof = if proof == NO_PROOF_TEXT {
        Vec::new()
    } else {
        split_sentences(&tokenize(proof))
            .iter()
            .map(|s| tpl.parse_step_tokens(s).ok_or_else(|| bad("proof step")))
            .collect::<Result<Vec<_>>>()?
    };
    let answer = tpl.parse_answer(answer).ok_or_else(|| bad("answer"))?;
    Ok(ParsedText {
        story,
        query,
        proof,
        answer,
    })
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let file = File::open(path).map_err(|e| Error::Input(format!("cannot open sidecar {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("{}:{}: bad record: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes `<stem>.jsonl` plus one `<stem>.<strategy>.txt` per strategy; flat
/// lines are `id<TAB>text`. Returns the written paths.
pub fn emit_corpus(
    dir: &Path,
    stem: &str,
    records: &[Record],
    strategies: &[Strategy],
    tpl: &TemplateSet,
    story_templates: Option<&StoryTemplates>,
) -> Result<Vec<PathBuf>> {
    for r in records {
        r.check_surfaces(tpl)?;
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let sidecar = dir.join(format!("{stem}.jsonl"));
    write_records(&sidecar, records)?;
    written.push(sidecar);
    for &strategy in strategies {
        let lines: Vec<String> = records
            .par_iter()
            .map(|r| {
                let flat = flat_record(r, strategy, tpl, story_templates);
                format!("{}\t{}\n", flat.id, flat.text)
            })
            .collect();
        let path = dir.join(format!("{stem}.{strategy}.txt"));
        let mut w = BufWriter::new(File::create(&path)?);
        for l in &lines {
            w.write_all(l.as_bytes())?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Written as `manifest.json` next to an emitted corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub split: SplitManifest,
    pub strategies: Vec<Strategy>,
    pub story_templates: Option<String>,
    pub files: Vec<String>,
}

impl CorpusManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Proofs,
    ProofSteps,
    Facts,
    Entities,
    Relations,
}

impl Block {
    pub const ALL: [Block; 5] = [Block::Proofs, Block::ProofSteps, Block::Facts, Block::Entities, Block::Relations];

    pub fn as_str(self) -> &'static str {
        match self {
            Block::Proofs => "proofs",
            Block::ProofSteps => "proof_steps",
            Block::Facts => "facts",
            Block::Entities => "entities",
            Block::Relations => "relations",
        }
    }
}

/// Per test level, the percentage of building-block occurrences also present
/// in the train split.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub levels: Vec<usize>,
    pub coverage: BTreeMap<Block, Vec<f64>>,
}

impl OverlapReport {
    pub fn get(&self, block: Block, level: usize) -> Option<f64> {
        let i = self.levels.iter().position(|&l| l == level)?;
        self.coverage.get(&block).map(|v| v[i])
    }

    /// Rows are blocks, columns are levels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block");
        for l in &self.levels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for block in Block::ALL {
            out.push_str(block.as_str());
            for v in &self.coverage[&block] {
                let _ = write!(out, ",{v:.2}");
            }
            out.push('\n');
        }
        out
    }
}

/// Building blocks of one record. Facts cover the story and every fact used
/// in the proof; relations and entities are counted per fact occurrence so a
/// covered fact always implies a covered relation.
struct Blocks {
    proof: String,
    steps: Vec<String>,
    facts: Vec<SurfaceFact>,
}

fn blocks(record: &Record, strategy: Strategy, tpl: &TemplateSet) -> Blocks {
    let proof = record.proof(strategy);
    let steps: Vec<String> = proof.iter().map(|s| tpl.render_step(s, [0; 3])).collect();
    let mut facts: Vec<SurfaceFact> = record.story.clone();
    for s in proof {
        facts.extend([s.0.clone(), s.1.clone(), s.2.clone()]);
    }
    facts.sort();
    facts.dedup();
    let mut steps_dedup = steps.clone();
    steps_dedup.sort();
    steps_dedup.dedup();
    Blocks {
        proof: steps.join(" "),
        steps: steps_dedup,
        facts,
    }
}

#[derive(Default)]
struct Index {
    proofs: HashSet<String>,
    steps: HashSet<String>,
    facts: HashSet<SurfaceFact>,
    entities: HashSet<String>,
    relations: HashSet<RelationKind>,
}

/// Coverage of test building blocks by the train split, per test level,
/// measured on the proofs of `strategy` rendered with the first fact pattern.
pub fn overlap_report(
    train: &[Record],
    test: &[Record],
    strategy: Strategy,
    tpl: &TemplateSet,
) -> OverlapReport {
    let index = train
        .par_iter()
        .map(|r| blocks(r, strategy, tpl))
        .fold(Index::default, |mut idx, b| {
            for f in &b.facts {
                idx.entities.insert(f.0.clone());
                idx.entities.insert(f.2.clone());
                idx.relations.insert(f.1);
            }
            idx.proofs.insert(b.proof);
            idx.steps.extend(b.steps);
            idx.facts.extend(b.facts);
            idx
        })
        .reduce(Index::default, |mut a, b| {
            a.proofs.extend(b.proofs);
            a.steps.extend(b.steps);
            a.facts.extend(b.facts);
            a.entities.extend(b.entities);
            a.relations.extend(b.relations);
            a
        });

    // (hits, total) per block per level
    let mut tallies: BTreeMap<usize, [(usize, usize); 5]> = BTreeMap::new();
    let per_record: Vec<(usize, [(usize, usize); 5])> = test
        .par_iter()
        .map(|r| {
            let b = blocks(r, strategy, tpl);
            let mut t = [(0, 0); 5];
            t[0] = (usize::from(index.proofs.contains(&b.proof)), 1);
            t[1] = (b.steps.iter().filter(|s| index.steps.contains(*s)).count(), b.steps.len());
            t[2] = (b.facts.iter().filter(|f| index.facts.contains(*f)).count(), b.facts.len());
            let ents: Vec<&String> = b.facts.iter().flat_map(|f| [&f.0, &f.2]).collect();
            t[3] = (ents.iter().filter(|e| index.entities.contains(**e)).count(), ents.len());
            t[4] = (b.facts.iter().filter(|f| index.relations.contains(&f.1)).count(), b.facts.len());
            (r.level, t)
        })
        .collect();
    for (level, t) in per_record {
        let acc = tallies.entry(level).or_insert([(0, 0); 5]);
        for k in 0..5 {
            acc[k].0 += t[k].0;
            acc[k].1 += t[k].1;
        }
    }

    let levels: Vec<usize> = tallies.keys().copied().collect();
    let mut coverage = BTreeMap::new();
    for (k, block) in Block::ALL.into_iter().enumerate() {
        let row = tallies
            .values()
            .map(|t| if t[k].1 == 0 { 0.0 } else { 100.0 * t[k].0 as f64 / t[k].1 as f64 })
            .collect();
        coverage.insert(block, row);
    }
    OverlapReport { levels, coverage }
}
