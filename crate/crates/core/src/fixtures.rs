//! Hand-built examples shared by tests, benches and docs.

use crate::kinship::{Entity, EntityId, Fact, Gender, ProofStep, RelationKind::*};
use crate::story::{Example, Naming, Query};

/// The level-3 worked example: Florence is the sister of Gregorio, who is the
/// brother of Natasha, who is the granddaughter of Betty. The query asks how
/// Florence relates to Betty (granddaughter).
pub fn worked_example() -> Example {
    let e = |i: u16, s: &str, g| Entity {
        id: EntityId(i),
        surface: s.to_string(),
        gender: g,
    };
    let (florence, betty, gregorio, natasha) = (EntityId(0), EntityId(1), EntityId(2), EntityId(3));
    let answer = Fact::new(florence, Granddaughter, betty);
    let first_split = ProofStep {
        premise1: Fact::new(florence, Sister, gregorio),
        premise2: Fact::new(gregorio, Grandson, betty),
        conclusion: answer,
    };
    let second_split = ProofStep {
        premise1: Fact::new(gregorio, Brother, natasha),
        premise2: Fact::new(natasha, Granddaughter, betty),
        conclusion: Fact::new(gregorio, Grandson, betty),
    };
    Example {
        level: 3,
        entities: vec![
            e(0, "Florence", Gender::Female),
            e(1, "Betty", Gender::Female),
            e(2, "Gregorio", Gender::Male),
            e(3, "Natasha", Gender::Female),
        ],
        story: vec![
            Fact::new(natasha, Granddaughter, betty),
            Fact::new(florence, Sister, gregorio),
            Fact::new(gregorio, Brother, natasha),
        ],
        query: Query {
            source: florence,
            target: betty,
        },
        answer,
        split_trace: vec![first_split, second_split],
        seed: 0,
        naming: Naming::Named,
    }
}
