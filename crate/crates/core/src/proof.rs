//! The proof strategies: short proofs replay the generator's splits, long
//! proofs enumerate inferable facts by forward chaining until the query
//! entities are linked. Reversed variants list the answer step first.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinship::{Fact, ProofStep};
use crate::rules::RuleBase;
use crate::story::Example;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Sp,
    Spr,
    Lp,
    Lpr,
    Np,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Sp, Strategy::Spr, Strategy::Lp, Strategy::Lpr, Strategy::Np];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Sp => "sp",
            Strategy::Spr => "spr",
            Strategy::Lp => "lp",
            Strategy::Lpr => "lpr",
            Strategy::Np => "np",
        }
    }

    /// Backward chaining strategies put the answer step first.
    pub fn is_reversed(self) -> bool {
        matches!(self, Strategy::Spr | Strategy::Lpr)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected sp, spr, lp, lpr or np)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub strategy: Strategy,
    pub steps: Vec<ProofStep>,
}

impl Proof {
    pub fn no_proof() -> Self {
        Proof {
            strategy: Strategy::Np,
            steps: Vec::new(),
        }
    }

    /// The step whose conclusion answers the query.
    pub fn answer_step(&self) -> Option<&ProofStep> {
        if self.strategy.is_reversed() {
            self.steps.first()
        } else {
            self.steps.last()
        }
    }
}

/// The generation-order split trace: answer step first.
pub fn short_proof_rev(ex: &Example) -> Result<Proof> {
    if ex.split_trace.is_empty() {
        return Err(Error::Internal(format!(
            "example of level {} (seed {}) has an empty split trace",
            ex.level, ex.seed
        )));
    }
    Ok(Proof {
        strategy: Strategy::Spr,
        steps: ex.split_trace.clone(),
    })
}

pub fn short_proof(ex: &Example) -> Result<Proof> {
    let mut steps = short_proof_rev(ex)?.steps;
    steps.reverse();
    Ok(Proof {
        strategy: Strategy::Sp,
        steps,
    })
}

pub fn long_proof(ex: &Example, rules: &RuleBase) -> Result<Proof> {
    let steps = forward_chain(ex, rules)?;
    Ok(Proof {
        strategy: Strategy::Lp,
        steps,
    })
}

pub fn long_proof_rev(ex: &Example, rules: &RuleBase) -> Result<Proof> {
    let mut steps = forward_chain(ex, rules)?;
    steps.reverse();
    Ok(Proof {
        strategy: Strategy::Lpr,
        steps,
    })
}

pub fn build_proof(ex: &Example, rules: &RuleBase, strategy: Strategy) -> Result<Proof> {
    match strategy {
        Strategy::Sp => short_proof(ex),
        Strategy::Spr => short_proof_rev(ex),
        Strategy::Lp => long_proof(ex, rules),
        Strategy::Lpr => long_proof_rev(ex, rules),
        Strategy::Np => Ok(Proof::no_proof()),
    }
}

/// All four reasoning strategies for one example; the long proof is
/// enumerated once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofSet {
    pub sp: Proof,
    pub spr: Proof,
    pub lp: Proof,
    pub lpr: Proof,
}

impl ProofSet {
    pub fn build(ex: &Example, rules: &RuleBase) -> Result<Self> {
        let spr = short_proof_rev(ex)?;
        let sp = short_proof(ex)?;
        let lp = long_proof(ex, rules)?;
        let mut lpr_steps = lp.steps.clone();
        lpr_steps.reverse();
        Ok(ProofSet {
            sp,
            spr,
            lp,
            lpr: Proof {
                strategy: Strategy::Lpr,
                steps: lpr_steps,
            },
        })
    }

    pub fn get(&self, strategy: Strategy) -> Proof {
        match strategy {
            Strategy::Sp => self.sp.clone(),
            Strategy::Spr => self.spr.clone(),
            Strategy::Lp => self.lp.clone(),
            Strategy::Lpr => self.lpr.clone(),
            Strategy::Np => Proof::no_proof(),
        }
    }
}

/// Aligns two facts sharing exactly one entity into an A-B, B-C chain, trying
/// the four orientations in a fixed order.
fn align(f1: &Fact, f2: &Fact, ex: &Example, rules: &RuleBase) -> Option<(Fact, Fact)> {
    let (e11, e12) = (f1.subject, f1.object);
    let (e21, e22) = (f2.subject, f2.object);
    if e11 == e21 && e12 != e11 && e12 != e22 {
        Some((ex.invert(rules, f1), *f2))
    } else if e11 == e22 && e12 != e11 && e12 != e21 {
        Some((*f2, *f1))
    } else if e12 == e21 && e11 != e12 && e11 != e22 {
        Some((*f1, *f2))
    } else if e12 == e22 && e11 != e12 && e11 != e21 {
        Some((*f1, ex.invert(rules, f2)))
    } else {
        None
    }
}

/// Tries A-B + B-C, then the mirrored C-B + B-A.
fn combine(f1: &Fact, f2: &Fact, ex: &Example, rules: &RuleBase) -> Option<ProofStep> {
    let (ab, bc) = align(f1, f2, ex, rules)?;
    if let Some(r3) = rules.compose(ab.relation, bc.relation) {
        return Some(ProofStep {
            premise1: ab,
            premise2: bc,
            conclusion: Fact::new(ab.subject, r3, bc.object),
        });
    }
    let cb = ex.invert(rules, &bc);
    let ba = ex.invert(rules, &ab);
    rules.compose(cb.relation, ba.relation).map(|r3| ProofStep {
        premise1: cb,
        premise2: ba,
        conclusion: Fact::new(cb.subject, r3, ba.object),
    })
}

/// Fixed-point enumeration over a growing fact list seeded with each story
/// fact followed by its inverse. Pairs (i, j), i < j, are scanned in
/// ascending order; after every new fact the scan restarts from the first
/// pair. A pair whose result is already known never produces anything later,
/// so each row remembers how far it has been scanned.
fn forward_chain(ex: &Example, rules: &RuleBase) -> Result<Vec<ProofStep>> {
    let mut known: Vec<Fact> = Vec::with_capacity(ex.story.len() * 8);
    let mut seen: HashSet<Fact> = HashSet::new();
    for f in &ex.story {
        for g in [*f, ex.invert(rules, f)] {
            if seen.insert(g) {
                known.push(g);
            }
        }
    }
    let (source, target) = (ex.query.source, ex.query.target);
    let mut next_j: Vec<usize> = Vec::new();
    let mut steps = Vec::new();

    'restart: loop {
        let mut i = 0;
        while i < known.len() {
            if next_j.len() <= i {
                next_j.push(i + 1);
            }
            while next_j[i] < known.len() {
                let j = next_j[i];
                next_j[i] += 1;
                let Some(step) = combine(&known[i], &known[j], ex, rules) else {
                    continue;
                };
                if seen.contains(&step.conclusion) {
                    continue;
                }
                let inverse = ex.invert(rules, &step.conclusion);
                seen.insert(step.conclusion);
                seen.insert(inverse);
                known.push(step.conclusion);
                known.push(inverse);
                steps.push(step);
                if step.conclusion.links(source, target) {
                    return Ok(steps);
                }
                continue 'restart;
            }
            i += 1;
        }
        break;
    }

    let missing = ex
        .story
        .iter()
        .map(|f| ex.surface_fact(f).to_string())
        .collect::<Vec<_>>()
        .join(", ");
    Err(Error::InferenceIncomplete(format!(
        "no chain of composition rules links {} and {} from story [{missing}] after {} steps; \
         the rulebase lacks a composition needed for this story",
        ex.surface(source),
        ex.surface(target),
        steps.len()
    )))
}
