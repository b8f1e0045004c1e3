//! Boolean conjunctive queries and the answering facade over both engines.

use std::collections::BTreeSet;
use std::fmt;

use crate::chase::{run, ChaseConfig};
use crate::error::ChaseError;
use crate::homomorphism::{find_homomorphism, Mapping};
use crate::instance::Instance;
use crate::model::{Atom, Program, Symbol};
use crate::stream::{chase_s, StreamConfig, StreamOutcome};

/// A Boolean conjunctive query `? :- a1, ..., an.`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bcq {
    pub atoms: Vec<Atom>,
    pub vars: BTreeSet<Symbol>,
}

impl Bcq {
    /// `None` for the empty conjunction.
    pub fn new(atoms: Vec<Atom>) -> Option<Self> {
        if atoms.is_empty() {
            return None;
        }
        let vars = atoms.iter().flat_map(Atom::variables).cloned().collect();
        Some(Bcq { atoms, vars })
    }

    /// Resumption bound: one more than the number of query variables.
    pub fn max_res(&self) -> u32 {
        self.vars.len() as u32 + 1
    }
}

impl fmt::Display for Bcq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("? :- ")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(".")
    }
}

/// A homomorphism from the query into the instance, if one exists.
pub fn bcq_witness(instance: &Instance, q: &Bcq) -> Option<Mapping> {
    find_homomorphism(&q.atoms, instance, &Mapping::new())
}

pub fn bcq_entails(instance: &Instance, q: &Bcq) -> bool {
    bcq_witness(instance, q).is_some()
}

#[derive(Clone, Debug)]
pub enum Engine {
    /// Materialize with the batch chase, then evaluate the query.
    Batch(ChaseConfig),
    Stream(StreamConfig),
}

#[derive(Clone, Debug)]
pub struct Answer {
    pub holds: bool,
    /// The materialized facts (batch) or every admitted fact (stream).
    pub facts: Instance,
    /// The batch run stopped at its budget, so a negative answer is not final.
    pub truncated: bool,
    pub stream: Option<StreamOutcome>,
}

pub fn answer(d: &Instance, program: &Program, q: &Bcq, engine: &Engine) -> Result<Answer, ChaseError> {
    match engine {
        Engine::Batch(cfg) => {
            let res = run(d, program, cfg)?;
            Ok(Answer {
                holds: bcq_entails(&res.instance, q),
                facts: res.instance,
                truncated: res.truncated,
                stream: None,
            })
        }
        Engine::Stream(cfg) => {
            let out = chase_s(d, program, Some(q), cfg);
            Ok(Answer {
                holds: out.answer,
                facts: out.facts.clone(),
                truncated: false,
                stream: Some(out),
            })
        }
    }
}
