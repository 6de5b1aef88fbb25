//! Entities, gendered kinship relations and facts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

/// One of the 20 kinship labels. The label fixes the gender of the subject of
/// any fact carrying it: `granddaughter` is always said of a female.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    Father,
    Mother,
    Son,
    Daughter,
    Brother,
    Sister,
    Grandfather,
    Grandmother,
    Grandson,
    Granddaughter,
    Uncle,
    Aunt,
    Nephew,
    Niece,
    Husband,
    Wife,
    FatherInLaw,
    MotherInLaw,
    SonInLaw,
    DaughterInLaw,
}

impl RelationKind {
    pub const COUNT: usize = 20;

    /// Declaration order; male/female mirrors are adjacent.
    pub const ALL: [RelationKind; 20] = [
        RelationKind::Father,
        RelationKind::Mother,
        RelationKind::Son,
        RelationKind::Daughter,
        RelationKind::Brother,
        RelationKind::Sister,
        RelationKind::Grandfather,
        RelationKind::Grandmother,
        RelationKind::Grandson,
        RelationKind::Granddaughter,
        RelationKind::Uncle,
        RelationKind::Aunt,
        RelationKind::Nephew,
        RelationKind::Niece,
        RelationKind::Husband,
        RelationKind::Wife,
        RelationKind::FatherInLaw,
        RelationKind::MotherInLaw,
        RelationKind::SonInLaw,
        RelationKind::DaughterInLaw,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn gender(self) -> Gender {
        if self.index().is_multiple_of(2) {
            Gender::Male
        } else {
            Gender::Female
        }
    }

    /// The same relation said of the other gender (son <-> daughter).
    pub fn mirror(self) -> RelationKind {
        RelationKind::ALL[self.index() ^ 1]
    }

    pub fn with_gender(self, gender: Gender) -> RelationKind {
        if self.gender() == gender {
            self
        } else {
            self.mirror()
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Father => "father",
            RelationKind::Mother => "mother",
            RelationKind::Son => "son",
            RelationKind::Daughter => "daughter",
            RelationKind::Brother => "brother",
            RelationKind::Sister => "sister",
            RelationKind::Grandfather => "grandfather",
            RelationKind::Grandmother => "grandmother",
            RelationKind::Grandson => "grandson",
            RelationKind::Granddaughter => "granddaughter",
            RelationKind::Uncle => "uncle",
            RelationKind::Aunt => "aunt",
            RelationKind::Nephew => "nephew",
            RelationKind::Niece => "niece",
            RelationKind::Husband => "husband",
            RelationKind::Wife => "wife",
            RelationKind::FatherInLaw => "father-in-law",
            RelationKind::MotherInLaw => "mother-in-law",
            RelationKind::SonInLaw => "son-in-law",
            RelationKind::DaughterInLaw => "daughter-in-law",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown relation `{s}`"))
    }
}

/// Index of an entity inside its example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u16);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub surface: String,
    pub gender: Gender,
}

/// Literal tokens that may never be used as an entity surface, since the
/// templates rely on them as delimiters.
pub const RESERVED_TOKENS: &[&str] = &[
    "<STORY>", "<QUERY>", "<PROOF>", "<ANSWER>", "is", "the", "a", "of", "to", "'s", "since",
    "and", "then", "Who", "for", "none", ".", ",", "?",
];

/// Checks that a surface is usable as a single template token.
pub fn check_surface(surface: &str) -> Result<(), String> {
    if surface.is_empty() {
        return Err("empty entity surface".to_string());
    }
    if surface.chars().any(|c| c.is_whitespace() || c == '<' || c == '>' || c == '\t') {
        return Err(format!("entity surface `{surface}` contains a delimiter character"));
    }
    if RESERVED_TOKENS.contains(&surface) || surface.parse::<RelationKind>().is_ok() {
        return Err(format!("entity surface `{surface}` collides with a template token"));
    }
    Ok(())
}

/// `subject` is the `relation` of `object`, e.g. (Natasha, granddaughter, Betty).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact {
    pub subject: EntityId,
    pub relation: RelationKind,
    pub object: EntityId,
}

impl Fact {
    pub fn new(subject: EntityId, relation: RelationKind, object: EntityId) -> Self {
        Fact { subject, relation, object }
    }

    /// True when the fact connects `a` and `b` in either direction.
    pub fn links(&self, a: EntityId, b: EntityId) -> bool {
        (self.subject == a && self.object == b) || (self.subject == b && self.object == a)
    }
}

/// A fact spelled with entity surfaces; the shape recovered from text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SurfaceFact(pub String, pub RelationKind, pub String);

impl SurfaceFact {
    pub fn new(subject: impl Into<String>, relation: RelationKind, object: impl Into<String>) -> Self {
        SurfaceFact(subject.into(), relation, object.into())
    }

    pub fn subject(&self) -> &str {
        &self.0
    }

    pub fn relation(&self) -> RelationKind {
        self.1
    }

    pub fn object(&self) -> &str {
        &self.2
    }
}

impl fmt::Display for SurfaceFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0, self.1, self.2)
    }
}

/// One inference: `premise1` and `premise2` share a middle entity, and the
/// conclusion spans their outer entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProofStep {
    pub premise1: Fact,
    pub premise2: Fact,
    pub conclusion: Fact,
}

/// Surface-level proof step: what a sidecar stores and what the parser yields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceStep(pub SurfaceFact, pub SurfaceFact, pub SurfaceFact);
