//! Independent reference implementations used to cross-check the library.
//! Everything here works on plain strings and reads the shipped data files
//! directly. Only `lib_glue` touches library types, to feed the oracles.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

pub type Triple = (String, String, String);

const RULES_TEXT: &str = include_str!("../../data/default.rules");

const MALE: [&str; 10] = [
    "father",
    "son",
    "brother",
    "grandfather",
    "grandson",
    "uncle",
    "nephew",
    "husband",
    "father-in-law",
    "son-in-law",
];

const FACT_PATTERNS: [&str; 5] = [
    "{A} is the {r} of {B}",
    "{A} is a {r} of {B}",
    "{A} is a {r} to {B}",
    "{A} is {B} 's {r}",
    "{A} is the {r} to {B}",
];

pub fn relation_is_male(r: &str) -> bool {
    MALE.contains(&r)
}

/// The shipped rules, read line by line.
pub struct OracleRules {
    compose: HashMap<(String, String), String>,
    inverse: HashMap<(String, String), String>,
}

impl OracleRules {
    pub fn shipped() -> Self {
        let mut compose = HashMap::new();
        let mut inverse = HashMap::new();
        for line in RULES_TEXT.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["inv", r, g, "->", out] => {
                    inverse.insert((r.to_string(), g.to_string()), out.to_string());
                }
                [r1, ".", r2, "->", r3] => {
                    compose.insert((r1.to_string(), r2.to_string()), r3.to_string());
                }
                _ => panic!("unexpected rule line: {line}"),
            }
        }
        OracleRules { compose, inverse }
    }

    pub fn compose(&self, r1: &str, r2: &str) -> Option<&str> {
        self.compose.get(&(r1.to_string(), r2.to_string())).map(String::as_str)
    }

    pub fn compose_entries(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.compose.iter().map(|((a, b), c)| (a.as_str(), b.as_str(), c.as_str()))
    }

    pub fn invert(&self, f: &Triple, genders: &HashMap<String, String>) -> Option<Triple> {
        let g = genders.get(&f.2)?;
        let r = self.inverse.get(&(f.1.clone(), g.clone()))?;
        Some((f.2.clone(), r.clone(), f.0.clone()))
    }
}

pub fn triple(a: &str, r: &str, b: &str) -> Triple {
    (a.to_string(), r.to_string(), b.to_string())
}

/// Matches one fact clause (no terminal period) against the five patterns.
pub fn parse_clause(toks: &[&str]) -> Option<Triple> {
    for pattern in FACT_PATTERNS {
        let pat: Vec<&str> = pattern.split(' ').collect();
        if pat.len() != toks.len() {
            continue;
        }
        let (mut a, mut r, mut b) = (None, None, None);
        let ok = pat.iter().zip(toks).all(|(p, t)| match *p {
            "{A}" => {
                a = Some(*t);
                true
            }
            "{B}" => {
                b = Some(*t);
                true
            }
            "{r}" => {
                r = Some(*t);
                true
            }
            lit => lit == *t,
        });
        if ok {
            return Some(triple(a?, r?, b?));
        }
    }
    None
}

/// `since F1 , and F2 , then F3` (period already removed).
pub fn parse_step(toks: &[&str]) -> Option<[Triple; 3]> {
    if toks.first() != Some(&"since") {
        return None;
    }
    let and_at = (1..toks.len().saturating_sub(1)).find(|&i| toks[i] == "," && toks[i + 1] == "and")?;
    let then_at = (and_at + 2..toks.len().saturating_sub(1)).find(|&i| toks[i] == "," && toks[i + 1] == "then")?;
    Some([
        parse_clause(&toks[1..and_at])?,
        parse_clause(&toks[and_at + 2..then_at])?,
        parse_clause(&toks[then_at + 2..])?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleVerdict {
    Valid,
    NoProof,
    ParseFail,
    RuleViolation,
    Ungrounded,
}

pub struct GroundingOutcome {
    pub ordered: OracleVerdict,
    pub any_order: OracleVerdict,
}

/// Checks a generation's proof region. `ordered` accepts the steps read
/// forwards or backwards; `any_order` searches every ordering.
pub fn oracle_verify(
    story: &[Triple],
    genders: &HashMap<String, String>,
    text: &str,
    rules: &OracleRules,
) -> GroundingOutcome {
    let same = |v| GroundingOutcome { ordered: v, any_order: v };
    let start = text.find("<PROOF>").map_or(0, |i| i + "<PROOF>".len());
    let Some(end) = text[start..].find("<ANSWER>") else {
        return same(OracleVerdict::NoProof);
    };
    let toks: Vec<&str> = text[start..start + end].split_whitespace().collect();
    if toks.is_empty() || toks == ["none", "."] {
        return same(OracleVerdict::NoProof);
    }
    let mut steps = Vec::new();
    for sentence in toks.split(|t| *t == "." || *t == "?") {
        if sentence.is_empty() {
            continue;
        }
        match parse_step(sentence) {
            Some(s) => steps.push(s),
            None => return same(OracleVerdict::ParseFail),
        }
    }
    let licensed = |[p1, p2, c]: &[Triple; 3]| {
        p1.2 == p2.0 && c.0 == p1.0 && c.2 == p2.2 && p1.0 != p2.2 && rules.compose(&p1.1, &p2.1) == Some(c.1.as_str())
    };
    if !steps.iter().all(licensed) {
        return same(OracleVerdict::RuleViolation);
    }

    let mut ground: HashSet<Triple> = HashSet::new();
    for f in story {
        ground.insert(f.clone());
        if let Some(inv) = rules.invert(f, genders) {
            ground.insert(inv);
        }
    }
    let run = |order: &[usize]| {
        let mut known = ground.clone();
        for &k in order {
            let [p1, p2, c] = &steps[k];
            if !known.contains(p1) || !known.contains(p2) {
                return false;
            }
            if let Some(inv) = rules.invert(c, genders) {
                known.insert(inv);
            }
            known.insert(c.clone());
        }
        true
    };
    let forward: Vec<usize> = (0..steps.len()).collect();
    let backward: Vec<usize> = forward.iter().rev().copied().collect();
    let verdict = |ok| if ok { OracleVerdict::Valid } else { OracleVerdict::Ungrounded };
    let ordered = verdict(run(&forward) || run(&backward));

    // Depth-first search over every ordering of the steps.
    fn search(
        steps: &[[Triple; 3]],
        used: &mut Vec<bool>,
        known: &HashSet<Triple>,
        rules: &OracleRules,
        genders: &HashMap<String, String>,
        visited: &mut HashSet<Vec<bool>>,
    ) -> bool {
        if used.iter().all(|&u| u) {
            return true;
        }
        if !visited.insert(used.clone()) {
            return false;
        }
        for k in 0..steps.len() {
            let [p1, p2, c] = &steps[k];
            if used[k] || !known.contains(p1) || !known.contains(p2) {
                continue;
            }
            let mut next = known.clone();
            next.insert(c.clone());
            if let Some(inv) = rules.invert(c, genders) {
                next.insert(inv);
            }
            used[k] = true;
            let found = search(steps, used, &next, rules, genders, visited);
            used[k] = false;
            if found {
                return true;
            }
        }
        false
    }
    let any = search(
        &steps,
        &mut vec![false; steps.len()],
        &ground,
        rules,
        genders,
        &mut HashSet::new(),
    );
    GroundingOutcome {
        ordered,
        any_order: verdict(any),
    }
}

/// The long proof computed the slow way: after every new fact, rescan all
/// pairs from the beginning of the fact list.
pub fn naive_long_proof(
    story: &[Triple],
    genders: &HashMap<String, String>,
    query: (&str, &str),
    rules: &OracleRules,
) -> Option<Vec<[Triple; 3]>> {
    let mut all: Vec<Triple> = Vec::new();
    for f in story {
        all.push(f.clone());
        all.push(rules.invert(f, genders)?);
    }
    let mut proof = Vec::new();
    'outer: loop {
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let (f1, f2) = (&all[i], &all[j]);
                let (ab, bc) = if f1.0 == f2.0 && f1.2 != f1.0 && f1.2 != f2.2 {
                    (rules.invert(f1, genders)?, f2.clone())
                } else if f1.0 == f2.2 && f1.2 != f1.0 && f1.2 != f2.0 {
                    (f2.clone(), f1.clone())
                } else if f1.2 == f2.0 && f1.0 != f1.2 && f1.0 != f2.2 {
                    (f1.clone(), f2.clone())
                } else if f1.2 == f2.2 && f1.0 != f1.2 && f1.0 != f2.0 {
                    (f1.clone(), rules.invert(f2, genders)?)
                } else {
                    continue;
                };
                let step = if let Some(r3) = rules.compose(&ab.1, &bc.1) {
                    let c = triple(&ab.0, r3, &bc.2);
                    [ab, bc, c]
                } else {
                    let cb = rules.invert(&bc, genders)?;
                    let ba = rules.invert(&ab, genders)?;
                    let Some(r3) = rules.compose(&cb.1, &ba.1) else {
                        continue;
                    };
                    let c = triple(&cb.0, r3, &ba.2);
                    [cb, ba, c]
                };
                let c = step[2].clone();
                if all.contains(&c) {
                    continue;
                }
                let inv = rules.invert(&c, genders)?;
                all.push(c.clone());
                all.push(inv);
                proof.push(step);
                if (c.0 == query.0 && c.2 == query.1) || (c.0 == query.1 && c.2 == query.0) {
                    return Some(proof);
                }
                continue 'outer;
            }
        }
        return None;
    }
}

/// Collapses a story by undoing the split trace from the last split to the
/// first; returns the single remaining fact if every step is an adjacent,
/// rule-licensed merge.
pub fn fold_trace(story: &[Triple], trace: &[[Triple; 3]], rules: &OracleRules) -> Option<Triple> {
    let mut facts: Vec<Triple> = story.to_vec();
    for [p1, p2, c] in trace.iter().rev() {
        if p1.2 != p2.0 || c.0 != p1.0 || c.2 != p2.2 || rules.compose(&p1.1, &p2.1) != Some(c.1.as_str()) {
            return None;
        }
        let i = facts.iter().position(|f| f == p1)?;
        facts.remove(i);
        let j = facts.iter().position(|f| f == p2)?;
        facts.remove(j);
        facts.push(c.clone());
    }
    (facts.len() == 1).then(|| facts.pop().unwrap())
}

pub mod lib_glue {
    //! Conversions from library records into the oracle's string form, and
    //! proof-text mutation for verifier cross-checks.

    use super::*;
    use kinlog_core::corpus::Record;
    use kinlog_core::{RelationKind, Strategy, SurfaceFact, SurfaceStep, TemplateSet};
    use rand::seq::SliceRandom;
    use rand::Rng;

    pub fn to_triple(f: &SurfaceFact) -> Triple {
        triple(f.subject(), f.relation().as_str(), f.object())
    }

    pub fn story(r: &Record) -> Vec<Triple> {
        r.story.iter().map(to_triple).collect()
    }

    pub fn genders(r: &Record) -> HashMap<String, String> {
        r.entities
            .iter()
            .map(|e| (e.surface.clone(), e.gender.as_str().to_string()))
            .collect()
    }

    pub fn steps(steps: &[SurfaceStep]) -> Vec<[Triple; 3]> {
        steps
            .iter()
            .map(|SurfaceStep(a, b, c)| [to_triple(a), to_triple(b), to_triple(c)])
            .collect()
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub enum Mutation {
        None,
        DeleteStep,
        SwapEntity,
        SubstituteRelation,
    }

    /// Renders `strategy`'s proof for `record` after applying one random
    /// mutation, as the text a model would emit after `<PROOF>`.
    pub fn mutated_text(record: &Record, strategy: Strategy, tpl: &TemplateSet, rng: &mut impl Rng) -> (String, Mutation) {
        let mut steps: Vec<SurfaceStep> = record.proof(strategy).to_vec();
        let kind = *[Mutation::None, Mutation::DeleteStep, Mutation::SwapEntity, Mutation::SubstituteRelation]
            .choose(rng)
            .unwrap();
        let k = rng.gen_range(0..steps.len());
        match kind {
            Mutation::None => {}
            Mutation::DeleteStep => {
                steps.remove(k);
            }
            Mutation::SwapEntity => {
                let others: Vec<&str> = record.entities.iter().map(|e| e.surface.as_str()).collect();
                let step = &mut steps[k];
                let fact = if rng.gen_bool(0.5) { &mut step.0 } else { &mut step.1 };
                let slot = if rng.gen_bool(0.5) { &mut fact.0 } else { &mut fact.2 };
                let choices: Vec<&&str> = others.iter().filter(|s| **s != slot.as_str()).collect();
                *slot = choices.choose(rng).unwrap().to_string();
            }
            Mutation::SubstituteRelation => {
                let step = &mut steps[k];
                let fact = match rng.gen_range(0..3) {
                    0 => &mut step.0,
                    1 => &mut step.1,
                    _ => &mut step.2,
                };
                let choices: Vec<RelationKind> = RelationKind::ALL.into_iter().filter(|r| *r != fact.1).collect();
                fact.1 = *choices.choose(rng).unwrap();
            }
        }
        let n = tpl.variants();
        let body: Vec<String> = steps
            .iter()
            .map(|s| tpl.render_step(s, [rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)]))
            .collect();
        let text = format!(
            "{} <ANSWER> {}",
            if body.is_empty() { "none .".to_string() } else { body.join(" ") },
            tpl.render_answer(&record.answer)
        );
        (text, kind)
    }
}
