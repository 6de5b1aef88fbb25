//! Invertible sentence templates for facts, proof steps, queries and answers,
//! plus the optional external story-sentence hook.
//!
//! Sentences are space-tokenized: punctuation and the possessive `'s` are
//! tokens of their own, so rendering is a join and parsing is a token match.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kinship::{check_surface, RelationKind, SurfaceFact, SurfaceStep};

pub const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.cfg");
pub const SAMPLE_STORY_TEMPLATES: &str = include_str!("../data/amt_sample.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Lit(String),
    Subject,
    Object,
    Relation,
    /// Embedded fact clause of a step, numbered 0..3.
    Clause(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    tokens: Vec<Token>,
}

impl Pattern {
    fn parse(text: &str, allowed: &[&str]) -> std::result::Result<Self, String> {
        let mut tokens = Vec::new();
        for tok in text.split_whitespace() {
            let t = match tok {
                "{A}" => Token::Subject,
                "{B}" => Token::Object,
                "{r}" => Token::Relation,
                "{F1}" => Token::Clause(0),
                "{F2}" => Token::Clause(1),
                "{F3}" => Token::Clause(2),
                other if other.starts_with('{') && other.ends_with('}') => {
                    return Err(format!("unknown slot `{other}`"))
                }
                other => Token::Lit(other.to_string()),
            };
            if !matches!(t, Token::Lit(_)) && !allowed.contains(&tok) {
                return Err(format!("slot `{tok}` is not allowed here (allowed: {})", allowed.join(" ")));
            }
            tokens.push(t);
        }
        for slot in allowed {
            let n = text.split_whitespace().filter(|t| t == slot).count();
            if n != 1 {
                return Err(format!("slot `{slot}` must appear exactly once, found {n}"));
            }
        }
        Ok(Pattern { tokens })
    }

    /// The pattern without a terminal `.` token, for use inside a step.
    fn clause(&self) -> Pattern {
        let mut tokens = self.tokens.clone();
        if matches!(tokens.last(), Some(Token::Lit(l)) if l == ".") {
            tokens.pop();
        }
        Pattern { tokens }
    }

    fn literals(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Lit(l) => Some(l.as_str()),
            _ => None,
        })
    }

    fn render_with(&self, slot: impl Fn(&Token) -> String) -> String {
        self.tokens
            .iter()
            .map(|t| match t {
                Token::Lit(l) => l.clone(),
                other => slot(other),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn render_fact(&self, fact: &SurfaceFact) -> String {
        self.render_with(|t| match t {
            Token::Subject => fact.subject().to_string(),
            Token::Object => fact.object().to_string(),
            Token::Relation => fact.relation().to_string(),
            _ => String::new(),
        })
    }

    /// Matches a fact-shaped pattern against exactly `toks`, tolerating a
    /// missing terminal period.
    fn match_fact(&self, toks: &[&str]) -> Option<SurfaceFact> {
        let pat = strip_optional_period(&self.tokens, toks);
        if pat.len() != toks.len() {
            return None;
        }
        let (mut a, mut b, mut r) = (None, None, None);
        for (p, t) in pat.iter().zip(toks) {
            match p {
                Token::Lit(l) if l == t => {}
                Token::Lit(_) | Token::Clause(_) => return None,
                Token::Subject => a = Some(*t),
                Token::Object => b = Some(*t),
                Token::Relation => r = Some(t.parse::<RelationKind>().ok()?),
            }
        }
        let (a, b, r) = (a?, b?, r?);
        if check_surface(a).is_err() || check_surface(b).is_err() {
            return None;
        }
        Some(SurfaceFact::new(a, r, b))
    }
}

fn strip_optional_period<'p>(pat: &'p [Token], toks: &[&str]) -> &'p [Token] {
    match (pat.last(), toks.last()) {
        (Some(Token::Lit(l)), last) if l == "." && last != Some(&".") => &pat[..pat.len() - 1],
        _ => pat,
    }
}

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Splits a token stream into sentences ending at `.` or `?`. A trailing
/// fragment without terminator is kept as its own sentence.
pub fn split_sentences<'a>(toks: &[&'a str]) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for &t in toks {
        cur.push(t);
        if t == "." || t == "?" {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Story sentences for the external (crowd-written style) template hook:
/// `relation<TAB>sentence with {A} and {B}` per line.
#[derive(Debug, Clone, Default)]
pub struct StoryTemplates {
    by_relation: BTreeMap<RelationKind, Vec<Pattern>>,
}

impl StoryTemplates {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut by_relation: BTreeMap<RelationKind, Vec<Pattern>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (rel, sentence) = raw
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `relation<TAB>sentence`"))?;
            let rel: RelationKind = rel.trim().parse().map_err(|e| Error::parse(source_name, i + 1, e))?;
            let pat = Pattern::parse(sentence, &["{A}", "{B}"]).map_err(|e| Error::parse(source_name, i + 1, e))?;
            by_relation.entry(rel).or_default().push(pat);
        }
        Ok(StoryTemplates { by_relation })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read story templates {}: {e}", path.display())))?;
        StoryTemplates::parse(&text, &path.display().to_string())
    }

    pub fn sample() -> Self {
        StoryTemplates::parse(SAMPLE_STORY_TEMPLATES, "amt_sample.tsv").expect("shipped sample is valid")
    }

    pub fn variants(&self, relation: RelationKind) -> usize {
        self.by_relation.get(&relation).map_or(0, Vec::len)
    }

    /// Renders with sentence `choice % variants`; `None` when the relation has
    /// no sentences.
    pub fn render(&self, fact: &SurfaceFact, choice: usize) -> Option<String> {
        let list = self.by_relation.get(&fact.relation())?;
        if list.is_empty() {
            return None;
        }
        Some(list[choice % list.len()].render_fact(fact))
    }
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    fact_patterns: Vec<Pattern>,
    query: Pattern,
    step: Pattern,
    answer: Pattern,
    clauses: Vec<Pattern>,
}

impl TemplateSet {
    /// Parses `key = pattern` lines (keys: fact, query, step, answer).
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut facts = Vec::new();
        let (mut query, mut step, mut answer) = (None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, pat) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `key = pattern`"))?;
            let err = |e: String| Error::parse(source_name, i + 1, e);
            let pat = pat.trim();
            match key.trim() {
                "fact" => facts.push(Pattern::parse(pat, &["{A}", "{r}", "{B}"]).map_err(err)?),
                "answer" => answer = Some(Pattern::parse(pat, &["{A}", "{r}", "{B}"]).map_err(err)?),
                "query" => query = Some(Pattern::parse(pat, &["{A}", "{B}"]).map_err(err)?),
                "step" => step = Some(Pattern::parse(pat, &["{F1}", "{F2}", "{F3}"]).map_err(err)?),
                other => return Err(err(format!("unknown template key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Config(format!("{source_name}: no `{what}` template"));
        if facts.is_empty() {
            return Err(missing("fact"));
        }
        let set = TemplateSet {
            clauses: facts.iter().map(Pattern::clause).collect(),
            fact_patterns: facts,
            query: query.ok_or_else(|| missing("query"))?,
            step: step.ok_or_else(|| missing("step"))?,
            answer: answer.ok_or_else(|| missing("answer"))?,
        };
        set.check_invertible(source_name)?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read templates {}: {e}", path.display())))?;
        TemplateSet::parse(&text, &path.display().to_string())
    }

    pub fn default_set() -> Self {
        TemplateSet::parse(DEFAULT_TEMPLATES, "templates.cfg").expect("shipped templates are valid")
    }

    /// Every fact pattern must parse back to itself and no other pattern may
    /// claim its output.
    fn check_invertible(&self, source_name: &str) -> Result<()> {
        let probe = SurfaceFact::new("Xa", RelationKind::Niece, "Xb");
        for (v, pat) in self.fact_patterns.iter().enumerate() {
            let text = pat.render_fact(&probe);
            let toks = tokenize(&text);
            for (w, other) in self.fact_patterns.iter().enumerate() {
                let hit = other.match_fact(&toks);
                if w == v && hit.as_ref() != Some(&probe) {
                    return Err(Error::Config(format!("{source_name}: fact pattern {v} does not invert")));
                }
                if w != v && hit.is_some() {
                    return Err(Error::Config(format!(
                        "{source_name}: fact patterns {v} and {w} are ambiguous"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn variants(&self) -> usize {
        self.fact_patterns.len()
    }

    /// Literal words used by any template; entity surfaces must avoid them.
    pub fn reserved_words(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .fact_patterns
            .iter()
            .chain([&self.query, &self.step, &self.answer])
            .flat_map(|p| p.literals())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn render_fact(&self, fact: &SurfaceFact, variant: usize) -> String {
        self.fact_patterns[variant % self.variants()].render_fact(fact)
    }

    pub fn parse_fact(&self, sentence: &str) -> Option<SurfaceFact> {
        self.parse_fact_tokens(&tokenize(sentence))
    }

    pub fn parse_fact_tokens(&self, toks: &[&str]) -> Option<SurfaceFact> {
        self.fact_patterns.iter().find_map(|p| p.match_fact(toks))
    }

    fn parse_clause(&self, toks: &[&str]) -> Option<SurfaceFact> {
        self.clauses.iter().find_map(|p| p.match_fact(toks))
    }

    /// `variants` picks the fact pattern for premise 1, premise 2 and the
    /// conclusion.
    pub fn render_step(&self, step: &SurfaceStep, variants: [usize; 3]) -> String {
        let facts = [&step.0, &step.1, &step.2];
        self.step.render_with(|t| match t {
            Token::Clause(k) => self.clauses[variants[*k] % self.variants()].render_fact(facts[*k]),
            _ => String::new(),
        })
    }

    pub fn parse_step(&self, sentence: &str) -> Option<SurfaceStep> {
        self.parse_step_tokens(&tokenize(sentence))
    }

    pub fn parse_step_tokens(&self, toks: &[&str]) -> Option<SurfaceStep> {
        let pat = strip_optional_period(&self.step.tokens, toks);
        let mut slots: [Option<SurfaceFact>; 3] = [None, None, None];
        if self.match_step(pat, toks, &mut slots) {
            let [a, b, c] = slots;
            Some(SurfaceStep(a?, b?, c?))
        } else {
            None
        }
    }

    fn match_step(&self, pat: &[Token], toks: &[&str], slots: &mut [Option<SurfaceFact>; 3]) -> bool {
        match pat.split_first() {
            None => toks.is_empty(),
            Some((Token::Lit(l), rest)) => toks.first() == Some(&l.as_str()) && self.match_step(rest, &toks[1..], slots),
            Some((Token::Clause(k), rest)) => {
                for end in 1..=toks.len() {
                    if let Some(fact) = self.parse_clause(&toks[..end]) {
                        if self.match_step(rest, &toks[end..], slots) {
                            slots[*k] = Some(fact);
                            return true;
                        }
                    }
                }
                false
            }
            Some(_) => false,
        }
    }

    pub fn render_query(&self, source: &str, target: &str) -> String {
        self.query.render_with(|t| match t {
            Token::Subject => source.to_string(),
            Token::Object => target.to_string(),
            _ => String::new(),
        })
    }

    pub fn parse_query(&self, sentence: &str) -> Option<(String, String)> {
        self.parse_query_tokens(&tokenize(sentence))
    }

    pub fn parse_query_tokens(&self, toks: &[&str]) -> Option<(String, String)> {
        if self.query.tokens.len() != toks.len() {
            return None;
        }
        let (mut a, mut b) = (None, None);
        for (p, t) in self.query.tokens.iter().zip(toks) {
            match p {
                Token::Lit(l) if l == t => {}
                Token::Subject => a = Some(t.to_string()),
                Token::Object => b = Some(t.to_string()),
                _ => return None,
            }
        }
        Some((a?, b?))
    }

    pub fn render_answer(&self, fact: &SurfaceFact) -> String {
        self.answer.render_fact(fact)
    }

    /// Answers are read with every fact pattern, not just the answer one.
    pub fn parse_answer(&self, sentence: &str) -> Option<SurfaceFact> {
        let toks = tokenize(sentence);
        self.answer.match_fact(&toks).or_else(|| self.parse_fact_tokens(&toks))
    }
}
