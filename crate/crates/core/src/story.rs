//! Level-k example generation by recursive rule splitting, entity naming and
//! anonymization, and seeded train/test split construction.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinship::{check_surface, Entity, EntityId, Fact, Gender, ProofStep, RelationKind, SurfaceFact};
use crate::rules::RuleBase;

pub const DEFAULT_NAMES: &str = include_str!("../data/names.txt");
pub const DEFAULT_POOL_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Naming {
    Named,
    Anonymized,
}

impl std::str::FromStr for Naming {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "named" => Ok(Naming::Named),
            "anon" | "anonymized" => Ok(Naming::Anonymized),
            other => Err(format!("unknown naming mode `{other}` (expected named or anon)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub source: EntityId,
    pub target: EntityId,
}

/// One generated task: a chain story, its query, the answer fact and the
/// splits that produced the story (first split concludes the answer).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub level: usize,
    pub entities: Vec<Entity>,
    pub story: Vec<Fact>,
    pub query: Query,
    pub answer: Fact,
    pub split_trace: Vec<ProofStep>,
    pub seed: u64,
    pub naming: Naming,
}

impl Example {
    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.index()]
    }

    pub fn gender(&self, id: EntityId) -> Gender {
        self.entity(id).gender
    }

    pub fn surface(&self, id: EntityId) -> &str {
        &self.entity(id).surface
    }

    pub fn surface_fact(&self, fact: &Fact) -> SurfaceFact {
        SurfaceFact::new(self.surface(fact.subject), fact.relation, self.surface(fact.object))
    }

    pub fn invert(&self, rules: &RuleBase, fact: &Fact) -> Fact {
        rules.invert_fact(fact, self.gender(fact.object))
    }
}

/// First names with genders, one `name,gender` pair per line.
#[derive(Debug, Clone)]
pub struct NamePool {
    male: Vec<String>,
    female: Vec<String>,
}

impl NamePool {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut male = Vec::new();
        let mut female = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, gender) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(source_name, i + 1, format!("expected `name,gender`, got `{line}`")))?;
            let name = name.trim();
            check_surface(name).map_err(|e| Error::parse(source_name, i + 1, e))?;
            let gender: Gender = gender.trim().parse().map_err(|e| Error::parse(source_name, i + 1, e))?;
            if !seen.insert(name.to_string()) {
                return Err(Error::parse(source_name, i + 1, format!("duplicate name `{name}`")));
            }
            match gender {
                Gender::Male => male.push(name.to_string()),
                Gender::Female => female.push(name.to_string()),
            }
        }
        Ok(NamePool { male, female })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read name pool {}: {e}", path.display())))?;
        NamePool::parse(&text, &path.display().to_string())
    }

    pub fn default_pool() -> Self {
        NamePool::parse(DEFAULT_NAMES, "names.txt").expect("shipped name pool is valid")
    }

    pub fn names(&self, gender: Gender) -> &[String] {
        match gender {
            Gender::Male => &self.male,
            Gender::Female => &self.female,
        }
    }

    pub fn len(&self) -> usize {
        self.male.len() + self.female.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a master seed and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

const ANON_STREAM: u64 = 0xa11a;

#[derive(Debug, Clone)]
pub struct Generator<'a> {
    rules: &'a RuleBase,
    names: &'a NamePool,
    splittable: Vec<RelationKind>,
    /// Shuffle story presentation order.
    pub shuffle: bool,
    pub pool_size: usize,
}

impl<'a> Generator<'a> {
    /// Fails when some relation reachable by splitting has no split of its own.
    pub fn new(rules: &'a RuleBase, names: &'a NamePool) -> Result<Self> {
        let splittable = rules.splittable();
        if splittable.is_empty() {
            return Err(Error::Config("no relation in the rulebase admits a split".into()));
        }
        let mut reachable: BTreeSet<RelationKind> = splittable.iter().copied().collect();
        let mut frontier: Vec<RelationKind> = splittable.clone();
        while let Some(r) = frontier.pop() {
            for &(r1, r2) in rules.splits_of(r) {
                for x in [r1, r2] {
                    if reachable.insert(x) {
                        frontier.push(x);
                    }
                }
            }
        }
        if let Some(dead) = reachable.iter().find(|r| rules.splits_of(**r).is_empty()) {
            return Err(Error::Config(format!(
                "relation `{dead}` is reachable by splitting but no composition entry produces it"
            )));
        }
        Ok(Generator {
            rules,
            names,
            splittable,
            shuffle: true,
            pool_size: DEFAULT_POOL_SIZE,
        })
    }

    pub fn rules(&self) -> &RuleBase {
        self.rules
    }

    pub fn generate_example(&self, level: usize, naming: Naming, seed: u64) -> Result<Example> {
        if level < 2 {
            return Err(Error::Argument(format!("level must be at least 2, got {level}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let answer_rel = *self.splittable.choose(&mut rng).expect("nonempty");
        let mut genders = vec![answer_rel.gender(), if rng.gen_bool(0.5) { Gender::Male } else { Gender::Female }];
        let (source, target) = (EntityId(0), EntityId(1));
        let answer = Fact::new(source, answer_rel, target);

        let mut chain = vec![answer];
        let mut trace = Vec::with_capacity(level - 1);
        for _ in 1..level {
            let candidates: Vec<usize> = (0..chain.len())
                .filter(|&i| !self.rules.splits_of(chain[i].relation).is_empty())
                .collect();
            if candidates.is_empty() {
                return Err(Error::Generation("no splittable fact left in the story".into()));
            }
            let total: usize = candidates.iter().map(|&i| self.rules.splits_of(chain[i].relation).len()).sum();
            let mut tried = HashSet::new();
            // Redraw until the split keeps every derivable relation unambiguous.
            loop {
                if tried.len() == total {
                    return Err(Error::Generation(format!(
                        "every split of the level-{} story contradicts a derived fact (seed {seed})",
                        chain.len()
                    )));
                }
                let at = *candidates.choose(&mut rng).expect("nonempty");
                let splits = self.rules.splits_of(chain[at].relation);
                let k = rng.gen_range(0..splits.len());
                if !tried.insert((at, k)) {
                    continue;
                }
                let whole = chain[at];
                let (r1, r2) = splits[k];
                let middle = EntityId(genders.len() as u16);
                let left = Fact::new(whole.subject, r1, middle);
                let right = Fact::new(middle, r2, whole.object);
                let mut next = chain.clone();
                next[at] = left;
                next.insert(at + 1, right);
                genders.push(r2.gender());
                if derived_conflict(self.rules, &genders, &next).is_some() {
                    genders.pop();
                    continue;
                }
                chain = next;
                trace.push(ProofStep {
                    premise1: left,
                    premise2: right,
                    conclusion: whole,
                });
                break;
            }
        }
        if self.shuffle {
            chain.shuffle(&mut rng);
        }

        let surfaces = self.pick_names(&genders, &mut rng)?;
        let entities = genders
            .iter()
            .zip(surfaces)
            .enumerate()
            .map(|(i, (&gender, surface))| Entity {
                id: EntityId(i as u16),
                surface,
                gender,
            })
            .collect();
        let example = Example {
            level,
            entities,
            story: chain,
            query: Query { source, target },
            answer,
            split_trace: trace,
            seed,
            naming: Naming::Named,
        };
        match naming {
            Naming::Named => Ok(example),
            Naming::Anonymized => anonymize(&example, self.pool_size, derive_seed(seed, &[ANON_STREAM])),
        }
    }

    fn pick_names(&self, genders: &[Gender], rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
        let mut out = vec![String::new(); genders.len()];
        for g in Gender::ALL {
            let slots: Vec<usize> = (0..genders.len()).filter(|&i| genders[i] == g).collect();
            let pool = self.names.names(g);
            if pool.len() < slots.len() {
                return Err(Error::Argument(format!(
                    "name pool has {} {g} names but the story needs {}",
                    pool.len(),
                    slots.len()
                )));
            }
            let picks = index::sample(rng, pool.len(), slots.len());
            for (slot, pick) in slots.into_iter().zip(picks) {
                out[slot] = pool[pick].clone();
            }
        }
        Ok(out)
    }
}

/// Closes `story` under composition and inversion and returns two derived
/// facts that give the same ordered entity pair different relations, if any.
/// Stories with such a conflict describe no consistent family.
pub fn derived_conflict(rules: &RuleBase, genders: &[Gender], story: &[Fact]) -> Option<(Fact, Fact)> {
    let n = genders.len();
    let mut rel: Vec<Option<RelationKind>> = vec![None; n * n];
    let mut out: Vec<Vec<EntityId>> = vec![Vec::new(); n];
    let mut queue: Vec<Fact> = Vec::new();
    let invert = |f: &Fact| rules.invert_fact(f, genders[f.object.index()]);

    let add = |f: Fact, rel: &mut Vec<Option<RelationKind>>, out: &mut Vec<Vec<EntityId>>, queue: &mut Vec<Fact>| {
        for g in [f, invert(&f)] {
            let slot = &mut rel[g.subject.index() * n + g.object.index()];
            match *slot {
                Some(r) if r == g.relation => {}
                Some(r) => return Some((Fact::new(g.subject, r, g.object), g)),
                None => {
                    *slot = Some(g.relation);
                    out[g.subject.index()].push(g.object);
                    queue.push(g);
                }
            }
        }
        None
    };

    for f in story {
        if let Some(c) = add(*f, &mut rel, &mut out, &mut queue) {
            return Some(c);
        }
    }
    while let Some(f) = queue.pop() {
        let (a, b) = (f.subject, f.object);
        let mut derived = Vec::new();
        // (a, r, b) followed by (b, r2, c)
        for &c in &out[b.index()] {
            if c != a {
                let r2 = rel[b.index() * n + c.index()].expect("indexed");
                if let Some(r3) = rules.compose(f.relation, r2) {
                    derived.push(Fact::new(a, r3, c));
                }
            }
        }
        // (x, r0, a) followed by (a, r, b)
        for &x in &out[a.index()] {
            if x != b {
                let r0 = rel[x.index() * n + a.index()].expect("closed under inversion");
                if let Some(r3) = rules.compose(r0, f.relation) {
                    derived.push(Fact::new(x, r3, b));
                }
            }
        }
        for g in derived {
            if let Some(c) = add(g, &mut rel, &mut out, &mut queue) {
                return Some(c);
            }
        }
    }
    None
}

/// Replaces every entity surface with a distinct `ENT_i` token drawn without
/// replacement from a pool of `pool_size` tokens. Genders are kept.
pub fn anonymize(example: &Example, pool_size: usize, seed: u64) -> Result<Example> {
    let n = example.entities.len();
    if pool_size < n {
        return Err(Error::Argument(format!(
            "anonymization pool of {pool_size} tokens cannot cover {n} entities"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, pool_size, n);
    let mut out = example.clone();
    for (entity, token) in out.entities.iter_mut().zip(picks) {
        entity.surface = format!("ENT_{token}");
    }
    out.naming = Naming::Anonymized;
    Ok(out)
}

/// Requested example counts per level for both splits.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: BTreeMap<usize, usize>,
    pub test: BTreeMap<usize, usize>,
}

impl SplitPlan {
    /// Spreads `total` test examples evenly over `levels`; the lowest levels
    /// absorb the remainder.
    pub fn spread_test(total: usize, levels: impl IntoIterator<Item = usize>) -> BTreeMap<usize, usize> {
        let levels: Vec<usize> = levels.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if levels.is_empty() {
            return BTreeMap::new();
        }
        let base = total / levels.len();
        let extra = total % levels.len();
        levels
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, base + usize::from(i < extra)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Seeds, counts and rejection statistics; written next to the corpora.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub naming: Naming,
    pub shuffle: bool,
    pub pool_size: usize,
    pub plan: SplitPlan,
    pub test_stats: BTreeMap<usize, LevelStats>,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<Example>,
    pub test: BTreeMap<usize, Vec<Example>>,
    pub manifest: SplitManifest,
}

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy)]
pub struct SplitOptions {
    pub naming: Naming,
    pub seed: u64,
    /// Attempts per test example before named-mode rejection sampling gives up.
    pub max_attempts: usize,
}

impl<'a> Generator<'a> {
    /// Generates train and test splits. In named mode every test example is
    /// rejection-sampled so none of its story facts, in either direction,
    /// occurs among the train story facts.
    pub fn build_splits(&self, plan: &SplitPlan, opts: SplitOptions) -> Result<Splits> {
        let train_jobs: Vec<(usize, usize)> = plan
            .train
            .iter()
            .flat_map(|(&level, &count)| std::iter::repeat_n(level, count))
            .enumerate()
            .collect();
        let train = train_jobs
            .par_iter()
            .map(|&(i, level)| self.generate_example(level, opts.naming, derive_seed(opts.seed, &[TRAIN_STREAM, i as u64])))
            .collect::<Result<Vec<_>>>()?;

        let banned: HashSet<SurfaceFact> = if opts.naming == Naming::Named {
            train
                .par_iter()
                .flat_map_iter(|ex| {
                    ex.story
                        .iter()
                        .flat_map(|f| [ex.surface_fact(f), ex.surface_fact(&ex.invert(self.rules, f))])
                        .collect::<Vec<_>>()
                })
                .collect()
        } else {
            HashSet::new()
        };

        let mut test = BTreeMap::new();
        let mut test_stats = BTreeMap::new();
        for (&level, &count) in &plan.test {
            let drawn = (0..count)
                .into_par_iter()
                .map(|i| self.draw_test(level, i, &banned, opts))
                .collect::<Result<Vec<_>>>()?;
            let rejected = drawn.iter().map(|(_, r)| r).sum();
            test_stats.insert(level, LevelStats { accepted: count, rejected });
            test.insert(level, drawn.into_iter().map(|(ex, _)| ex).collect());
        }

        Ok(Splits {
            train,
            test,
            manifest: SplitManifest {
                seed: opts.seed,
                naming: opts.naming,
                shuffle: self.shuffle,
                pool_size: self.pool_size,
                plan: plan.clone(),
                test_stats,
            },
        })
    }

    fn draw_test(
        &self,
        level: usize,
        i: usize,
        banned: &HashSet<SurfaceFact>,
        opts: SplitOptions,
    ) -> Result<(Example, usize)> {
        for attempt in 0..opts.max_attempts.max(1) {
            let seed = derive_seed(opts.seed, &[TEST_STREAM, level as u64, i as u64, attempt as u64]);
            let ex = self.generate_example(level, opts.naming, seed)?;
            let collides = !banned.is_empty()
                && ex.story.iter().any(|f| {
                    banned.contains(&ex.surface_fact(f)) || banned.contains(&ex.surface_fact(&ex.invert(self.rules, f)))
                });
            if !collides {
                return Ok((ex, attempt));
            }
        }
        Err(Error::Generation(format!(
            "test example {i} of level {level}: every one of {} attempts reused a train fact; \
             enlarge the name pool, shrink the train split or raise the attempt budget",
            opts.max_attempts
        )))
    }
}
