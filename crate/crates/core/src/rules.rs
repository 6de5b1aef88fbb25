//! The composition / inversion rulebase and its plain-text config format.
//!
//! ```text
//! # comment
//! brother . granddaughter -> grandson
//! inv granddaughter female -> grandmother
//! ```
//!
//! A composition line `r1 . r2 -> r3` licenses: A is the r1 of B, B is the r2
//! of C, therefore A is the r3 of C. An inversion line `inv r g -> r'` says
//! that when A is the r of B and B has gender g, B is the r' of A.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kinship::{Fact, Gender, RelationKind};

pub const DEFAULT_RULES: &str = include_str!("../data/default.rules");

const N: usize = RelationKind::COUNT;

/// Rule tables as read from a config file. May be incomplete or inconsistent;
/// see [`validate_rulebase`] and [`RuleBase`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    compose: [[Option<RelationKind>; N]; N],
    invert: [[Option<RelationKind>; 2]; N],
}

impl Default for RuleTable {
    fn default() -> Self {
        RuleTable {
            compose: [[None; N]; N],
            invert: [[None; 2]; N],
        }
    }
}

impl RuleTable {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut table = RuleTable::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| Error::parse(source_name, line_no, format!("missing `->` in `{line}`")))?;
            let output = parse_relation(rhs.trim(), source_name, line_no)?;
            let lhs: Vec<&str> = lhs.split_whitespace().collect();
            match lhs.as_slice() {
                ["inv", r, g] => {
                    let r = parse_relation(r, source_name, line_no)?;
                    let g: Gender = g.parse().map_err(|e| Error::parse(source_name, line_no, e))?;
                    let slot = &mut table.invert[r.index()][g.index()];
                    match slot {
                        Some(prev) if *prev != output => {
                            return Err(Error::parse(
                                source_name,
                                line_no,
                                format!("conflicting inversion for `inv {r} {g}`: {prev} vs {output}"),
                            ))
                        }
                        _ => *slot = Some(output),
                    }
                }
                [r1, ".", r2] => {
                    let r1 = parse_relation(r1, source_name, line_no)?;
                    let r2 = parse_relation(r2, source_name, line_no)?;
                    let slot = &mut table.compose[r1.index()][r2.index()];
                    match slot {
                        Some(prev) if *prev != output => {
                            return Err(Error::parse(
                                source_name,
                                line_no,
                                format!("conflicting composition for `{r1} . {r2}`: {prev} vs {output}"),
                            ))
                        }
                        _ => *slot = Some(output),
                    }
                }
                _ => {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("expected `r1 . r2 -> r3` or `inv r g -> r'`, got `{line}`"),
                    ))
                }
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read rulebase {}: {e}", path.display())))?;
        RuleTable::parse(&text, &path.display().to_string())
    }

    pub fn compose(&self, r1: RelationKind, r2: RelationKind) -> Option<RelationKind> {
        self.compose[r1.index()][r2.index()]
    }

    pub fn inversion(&self, relation: RelationKind, object_gender: Gender) -> Option<RelationKind> {
        self.invert[relation.index()][object_gender.index()]
    }

    pub fn set_compose(&mut self, r1: RelationKind, r2: RelationKind, r3: Option<RelationKind>) {
        self.compose[r1.index()][r2.index()] = r3;
    }

    pub fn set_inversion(&mut self, relation: RelationKind, object_gender: Gender, out: Option<RelationKind>) {
        self.invert[relation.index()][object_gender.index()] = out;
    }

    /// All composition entries in (r1, r2) declaration order.
    pub fn compose_entries(&self) -> impl Iterator<Item = (RelationKind, RelationKind, RelationKind)> + '_ {
        RelationKind::ALL.into_iter().flat_map(move |r1| {
            RelationKind::ALL
                .into_iter()
                .filter_map(move |r2| self.compose(r1, r2).map(|r3| (r1, r2, r3)))
        })
    }
}

fn parse_relation(token: &str, source_name: &str, line: usize) -> Result<RelationKind> {
    token.parse().map_err(|e| Error::parse(source_name, line, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `r1 . r2 -> r3` where r3 is not gendered like r1.
    ComposeGender {
        r1: RelationKind,
        r2: RelationKind,
        r3: RelationKind,
    },
    MissingInversion {
        relation: RelationKind,
        gender: Gender,
    },
    /// `inv r g -> r'` where r' is not gendered g.
    InversionGender {
        relation: RelationKind,
        gender: Gender,
        output: RelationKind,
    },
    NotInvolutive {
        relation: RelationKind,
        gender: Gender,
        output: RelationKind,
        back: RelationKind,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ComposeGender { r1, r2, r3 } => write!(
                f,
                "gender violation: `{r1} . {r2} -> {r3}` ({r3} is {} but {r1} is {})",
                r3.gender(),
                r1.gender()
            ),
            Violation::MissingInversion { relation, gender } => {
                write!(f, "incomplete inversion table: no entry for `inv {relation} {gender}`")
            }
            Violation::InversionGender { relation, gender, output } => write!(
                f,
                "inversion gender violation: `inv {relation} {gender} -> {output}` ({output} is {})",
                output.gender()
            ),
            Violation::NotInvolutive { relation, gender, output, back } => write!(
                f,
                "inversion not involutive: `inv {relation} {gender} -> {output}` maps back to {back}"
            ),
        }
    }
}

/// Lists every broken rulebase invariant; empty means the table is usable.
pub fn validate_rulebase(table: &RuleTable) -> Vec<Violation> {
    let mut out = Vec::new();
    for (r1, r2, r3) in table.compose_entries() {
        if r3.gender() != r1.gender() {
            out.push(Violation::ComposeGender { r1, r2, r3 });
        }
    }
    for relation in RelationKind::ALL {
        for gender in Gender::ALL {
            match table.inversion(relation, gender) {
                None => out.push(Violation::MissingInversion { relation, gender }),
                Some(output) if output.gender() != gender => {
                    out.push(Violation::InversionGender { relation, gender, output })
                }
                Some(output) => {
                    // Missing back entries are reported on their own.
                    if let Some(back) = table.inversion(output, relation.gender()) {
                        if back != relation {
                            out.push(Violation::NotInvolutive { relation, gender, output, back });
                        }
                    }
                }
            }
        }
    }
    out
}

/// A validated, immutable rulebase.
#[derive(Debug, Clone)]
pub struct RuleBase {
    table: RuleTable,
    invert: [[RelationKind; 2]; N],
    splits: Vec<Vec<(RelationKind, RelationKind)>>,
    compose_count: usize,
}

impl RuleBase {
    pub fn from_table(table: RuleTable) -> Result<Self> {
        let violations = validate_rulebase(&table);
        if !violations.is_empty() {
            let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Config(format!(
                "rulebase has {} violation(s): {}",
                violations.len(),
                listed.join("; ")
            )));
        }
        let mut invert = [[RelationKind::Father; 2]; N];
        for r in RelationKind::ALL {
            for g in Gender::ALL {
                invert[r.index()][g.index()] = table.inversion(r, g).expect("validated");
            }
        }
        let mut splits = vec![Vec::new(); N];
        let mut compose_count = 0;
        for (r1, r2, r3) in table.compose_entries() {
            splits[r3.index()].push((r1, r2));
            compose_count += 1;
        }
        Ok(RuleBase {
            table,
            invert,
            splits,
            compose_count,
        })
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        RuleBase::from_table(RuleTable::parse(text, source_name)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RuleBase::from_table(RuleTable::load(path)?)
    }

    /// The shipped rulebase (`data/default.rules`).
    pub fn default_rules() -> Self {
        RuleBase::parse(DEFAULT_RULES, "default.rules").expect("shipped rulebase is valid")
    }

    pub fn table(&self) -> &RuleTable {
        &self.table
    }

    pub fn compose(&self, r1: RelationKind, r2: RelationKind) -> Option<RelationKind> {
        self.table.compose(r1, r2)
    }

    pub fn invert(&self, relation: RelationKind, object_gender: Gender) -> RelationKind {
        self.invert[relation.index()][object_gender.index()]
    }

    /// (subject, r, object) becomes (object, r', subject); `object_gender` is
    /// the gender of the fact's object.
    pub fn invert_fact(&self, fact: &Fact, object_gender: Gender) -> Fact {
        Fact::new(fact.object, self.invert(fact.relation, object_gender), fact.subject)
    }

    /// Composition entries producing `r3`, in declaration order.
    pub fn splits_of(&self, r3: RelationKind) -> &[(RelationKind, RelationKind)] {
        &self.splits[r3.index()]
    }

    pub fn splittable(&self) -> Vec<RelationKind> {
        RelationKind::ALL
            .into_iter()
            .filter(|r| !self.splits_of(*r).is_empty())
            .collect()
    }

    pub fn compose_count(&self) -> usize {
        self.compose_count
    }
}
