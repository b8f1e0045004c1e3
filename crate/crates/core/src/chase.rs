//! Materializing chase: bounded oblivious, parsimonious and isomorphic
//! variants, plus their resumption forms.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{ControlFlow, Range};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ChaseError;
use crate::firing::HeadCheck;
use crate::homomorphism::{apply, find_homomorphism, for_each_match, is_isomorphic_facts, Mapping, MatchMode};
use crate::instance::Instance;
use crate::model::{Atom, Fact, Program, Provenance, Term, Tgd};
use crate::nulls::NullFactory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Oblivious,
    Parsimonious,
    Isomorphic,
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ochase" => Ok(Variant::Oblivious),
            "pchase" => Ok(Variant::Parsimonious),
            "ichase" => Ok(Variant::Isomorphic),
            other => Err(format!(
                "unknown chase variant `{other}` (expected ochase, pchase or ichase)"
            )),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Oblivious => "ochase",
            Variant::Parsimonious => "pchase",
            Variant::Isomorphic => "ichase",
        })
    }
}

/// Activation order policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Routing {
    /// Rules in program order; each rule drains its pending triggers in
    /// insertion order before the next rule runs.
    #[default]
    RoundRobin,
    /// A single trigger stack: the most recently discovered trigger fires first.
    DepthFirst,
    /// A single trigger pool sampled by a seeded generator.
    Random(u64),
}

impl FromStr for Routing {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rr" => Ok(Routing::RoundRobin),
            "dfs" => Ok(Routing::DepthFirst),
            "rand" => Ok(Routing::Random(0)),
            _ => match s.strip_prefix("rand:") {
                Some(seed) => seed
                    .parse()
                    .map(Routing::Random)
                    .map_err(|_| format!("invalid seed in routing `{s}`")),
                None => Err(format!("unknown routing `{s}` (expected rr, dfs or rand:SEED)")),
            },
        }
    }
}

impl fmt::Display for Routing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Routing::RoundRobin => f.write_str("rr"),
            Routing::DepthFirst => f.write_str("dfs"),
            Routing::Random(seed) => write!(f, "rand:{seed}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChaseConfig {
    pub variant: Variant,
    /// Maximum number of fired triggers (oblivious chase only).
    pub budget: Option<u64>,
    /// `None` runs the plain chase; `Some(i)` runs the resumption form with
    /// `i` rounds.
    pub resumptions: Option<u32>,
    pub routing: Routing,
    pub head_check: HeadCheck,
}

impl ChaseConfig {
    pub fn new(variant: Variant) -> Self {
        ChaseConfig {
            variant,
            budget: None,
            resumptions: None,
            routing: Routing::default(),
            head_check: HeadCheck::default(),
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn with_resumptions(mut self, rounds: u32) -> Self {
        self.resumptions = Some(rounds);
        self
    }

    pub fn with_routing(mut self, routing: Routing) -> Self {
        self.routing = routing;
        self
    }

    pub fn with_head_check(mut self, head_check: HeadCheck) -> Self {
        self.head_check = head_check;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChaseStats {
    /// Applicable homomorphisms that were fired.
    pub triggers: u64,
    /// Head facts submitted to the firing condition.
    pub attempted: u64,
    pub admitted: u64,
    pub blocked: u64,
    /// Instance size after each round (a single entry for the plain chase).
    pub round_sizes: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ChaseResult {
    pub instance: Instance,
    pub truncated: bool,
    pub stats: ChaseStats,
}

#[derive(Clone, Debug)]
struct Trigger {
    rule: usize,
    facts: Vec<usize>,
    mapping: Mapping,
}

/// Discovers every trigger of `rule` that uses at least one fact with index in
/// `delta`, each exactly once: the atom at position `pin` ranges over the
/// delta, earlier atoms over older facts, later atoms over everything.
fn discover(rule_idx: usize, rule: &Tgd, instance: &Instance, delta: Range<usize>, out: &mut Vec<Trigger>) {
    let n = rule.body.len();
    let mut found = Vec::new();
    for pin in 0..n {
        let window = |j: usize| {
            if j < pin {
                0..delta.start
            } else if j == pin {
                delta.clone()
            } else {
                0..delta.end
            }
        };
        let _ = for_each_match(
            &rule.body,
            instance,
            &Mapping::new(),
            &window,
            MatchMode::Homomorphism,
            &mut |m, idx| {
                found.push(Trigger {
                    rule: rule_idx,
                    facts: idx.to_vec(),
                    mapping: m.variables_only(),
                });
                ControlFlow::Continue(())
            },
        );
    }
    found.sort_by(|a, b| a.facts.cmp(&b.facts));
    out.extend(found);
}

struct Round<'a> {
    program: &'a Program,
    cfg: &'a ChaseConfig,
    instance: Instance,
    nulls: &'a mut NullFactory,
    stats: ChaseStats,
    rng: Option<ChaCha8Rng>,
}

impl Round<'_> {
    /// Instantiates the head of `t` with frontier-keyed nulls.
    fn head_of(&mut self, t: &Trigger) -> Vec<Atom> {
        let rule = &self.program.rules[t.rule];
        let frontier: Vec<Term> = rule
            .frontier
            .iter()
            .map(|v| t.mapping.image(&Term::Variable(v.clone())))
            .collect();
        let mut m = t.mapping.clone();
        for z in &rule.existential {
            let null = self.nulls.fresh(&rule.id, z, &frontier);
            m.bind(Term::Variable(z.clone()), null);
        }
        apply(&m, &rule.head, true).expect("head variables are bound")
    }

    fn blocked(&self, atom: &Atom) -> bool {
        if self.instance.contains(atom) {
            return true;
        }
        match self.cfg.variant {
            Variant::Oblivious => false,
            Variant::Parsimonious => {
                find_homomorphism(std::slice::from_ref(atom), &self.instance, &Mapping::new()).is_some()
            }
            Variant::Isomorphic => self
                .instance
                .indices_of(&atom.predicate)
                .iter()
                .any(|&i| is_isomorphic_facts(atom, &self.instance.get(i).atom)),
        }
    }

    fn fire(&mut self, t: &Trigger) {
        self.stats.triggers += 1;
        let head = self.head_of(t);
        let rule = &self.program.rules[t.rule];
        let parents: Vec<Atom> = t.facts.iter().map(|&i| self.instance.get(i).atom.clone()).collect();
        let res_it = t.facts.iter().map(|&i| self.instance.get(i).res_it).max().unwrap_or(0);
        let provenance = Provenance {
            rule: rule.id.clone(),
            parents,
            freezes: 0,
        };
        self.stats.attempted += head.len() as u64;
        let conjunction_blocked = self.cfg.variant == Variant::Parsimonious
            && self.cfg.head_check == HeadCheck::Conjunction
            && find_homomorphism(&head, &self.instance, &Mapping::new()).is_some();
        for atom in head {
            let blocked = if self.cfg.head_check == HeadCheck::Conjunction && self.cfg.variant == Variant::Parsimonious
            {
                conjunction_blocked || self.instance.contains(&atom)
            } else {
                self.blocked(&atom)
            };
            if blocked {
                self.stats.blocked += 1;
            } else {
                self.stats.admitted += 1;
                self.instance.insert(Fact::derived(atom, res_it, provenance.clone()));
            }
        }
    }

    fn budget_hit(&self) -> bool {
        self.cfg.variant == Variant::Oblivious && self.cfg.budget.is_some_and(|b| self.stats.triggers >= b)
    }

    /// Saturates the instance. Returns true when stopped by the budget with
    /// triggers still pending.
    fn run(&mut self) -> bool {
        let rules = self.program.rules.len();
        let mut watermark = vec![0usize; rules];
        match self.cfg.routing {
            Routing::RoundRobin => loop {
                let mut progress = false;
                for r in 0..rules {
                    let hi = self.instance.len();
                    if watermark[r] == hi {
                        continue;
                    }
                    let mut queue = Vec::new();
                    discover(r, &self.program.rules[r], &self.instance, watermark[r]..hi, &mut queue);
                    watermark[r] = hi;
                    let mut queue: VecDeque<Trigger> = queue.into();
                    progress |= !queue.is_empty();
                    while let Some(t) = queue.pop_front() {
                        if self.budget_hit() {
                            return true;
                        }
                        self.fire(&t);
                    }
                }
                if !progress {
                    return false;
                }
            },
            Routing::DepthFirst | Routing::Random(_) => {
                let mut pool: Vec<Trigger> = Vec::new();
                loop {
                    let hi = self.instance.len();
                    for r in 0..rules {
                        if watermark[r] < hi {
                            discover(r, &self.program.rules[r], &self.instance, watermark[r]..hi, &mut pool);
                            watermark[r] = hi;
                        }
                    }
                    if pool.is_empty() {
                        return false;
                    }
                    if self.budget_hit() {
                        return true;
                    }
                    let t = match self.rng.as_mut() {
                        Some(rng) => {
                            let k = rng.gen_range(0..pool.len());
                            pool.swap_remove(k)
                        }
                        None => pool.pop().expect("pool is nonempty"),
                    };
                    self.fire(&t);
                }
            }
        }
    }
}

fn check_config(program: &Program, cfg: &ChaseConfig) -> Result<(), ChaseError> {
    if cfg.variant == Variant::Oblivious && cfg.budget.is_none() && program.has_existentials() {
        return Err(ChaseError::MissingBudget);
    }
    Ok(())
}

fn rng_for(routing: Routing) -> Option<ChaCha8Rng> {
    match routing {
        Routing::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    }
}

fn round(
    instance: Instance,
    program: &Program,
    cfg: &ChaseConfig,
    nulls: &mut NullFactory,
    rng: &mut Option<ChaCha8Rng>,
) -> (Instance, bool, ChaseStats) {
    let mut r = Round {
        program,
        cfg,
        instance,
        nulls,
        stats: ChaseStats::default(),
        rng: rng.take(),
    };
    let truncated = r.run();
    *rng = r.rng.take();
    r.stats.round_sizes.push(r.instance.len());
    (r.instance, truncated, r.stats)
}

/// Runs the chase selected by `cfg` once over `d`.
pub fn chase_batch(d: &Instance, program: &Program, cfg: &ChaseConfig) -> Result<ChaseResult, ChaseError> {
    check_config(program, cfg)?;
    let mut nulls = NullFactory::new();
    let mut rng = rng_for(cfg.routing);
    let (instance, truncated, stats) = round(d.clone(), program, cfg, &mut nulls, &mut rng);
    Ok(ChaseResult {
        instance,
        truncated,
        stats,
    })
}

/// Freezes the instance between resumption rounds. Facts whose nulls get
/// frozen move to the next resumption iteration.
fn freeze_for_round(instance: &Instance) -> Instance {
    instance
        .iter()
        .map(|f| Fact {
            atom: f.atom.freeze(),
            res_it: f.res_it + u32::from(f.atom.has_unfrozen_nulls()),
            provenance: f.provenance.clone(),
        })
        .collect()
}

/// `chase_r(D, 0) = D` and `chase_r(D, i) = chase(freeze(chase_r(D, i - 1)))`.
pub fn chase_resumed(
    d: &Instance,
    program: &Program,
    rounds: u32,
    cfg: &ChaseConfig,
) -> Result<ChaseResult, ChaseError> {
    if cfg.variant == Variant::Oblivious {
        return Err(ChaseError::ResumptionNeedsFiringCondition);
    }
    let mut nulls = NullFactory::new();
    let mut rng = rng_for(cfg.routing);
    let mut instance = d.clone();
    let mut stats = ChaseStats {
        round_sizes: vec![instance.len()],
        ..ChaseStats::default()
    };
    for r in 1..=rounds {
        if r > 1 {
            instance = freeze_for_round(&instance);
        }
        let (next, _, s) = round(instance, program, cfg, &mut nulls, &mut rng);
        instance = next;
        stats.triggers += s.triggers;
        stats.attempted += s.attempted;
        stats.admitted += s.admitted;
        stats.blocked += s.blocked;
        stats.round_sizes.extend(s.round_sizes);
    }
    Ok(ChaseResult {
        instance,
        truncated: false,
        stats,
    })
}

/// Dispatches on `cfg.resumptions`.
pub fn run(d: &Instance, program: &Program, cfg: &ChaseConfig) -> Result<ChaseResult, ChaseError> {
    match cfg.resumptions {
        None => chase_batch(d, program, cfg),
        Some(i) => chase_resumed(d, program, i, cfg),
    }
}
