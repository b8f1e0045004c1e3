//! Deduplicated fact store with insertion-order iteration and per-predicate indexes.

use std::collections::HashMap;
use std::ops::Range;

use crate::model::{Atom, Fact, Symbol};

#[derive(Clone, Debug, Default)]
pub struct Instance {
    facts: Vec<Fact>,
    position: HashMap<Atom, usize>,
    by_predicate: HashMap<Symbol, Vec<usize>>,
}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Self {
        let mut instance = Instance::new();
        for atom in atoms {
            instance.insert(Fact::new(atom));
        }
        instance
    }

    /// Inserts `fact` unless a term-identical fact is present. On a duplicate the
    /// smaller resumption iteration is kept. Returns the new fact's index.
    pub fn insert(&mut self, fact: Fact) -> Option<usize> {
        if let Some(&idx) = self.position.get(&fact.atom) {
            let existing = &mut self.facts[idx];
            if fact.res_it < existing.res_it {
                existing.res_it = fact.res_it;
            }
            return None;
        }
        let idx = self.facts.len();
        self.position.insert(fact.atom.clone(), idx);
        self.by_predicate
            .entry(fact.atom.predicate.clone())
            .or_default()
            .push(idx);
        self.facts.push(fact);
        Some(idx)
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.position.contains_key(atom)
    }

    pub fn index_of(&self, atom: &Atom) -> Option<usize> {
        self.position.get(atom).copied()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Fact {
        &self.facts[idx]
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter().map(|f| &f.atom)
    }

    /// Indices of the facts of `predicate`, ascending.
    pub fn indices_of(&self, predicate: &Symbol) -> &[usize] {
        self.by_predicate.get(predicate).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Indices of the facts of `predicate` whose insertion index falls in `window`.
    pub fn indices_in(&self, predicate: &Symbol, window: Range<usize>) -> &[usize] {
        let all = self.indices_of(predicate);
        let lo = all.partition_point(|&i| i < window.start);
        let hi = all.partition_point(|&i| i < window.end);
        &all[lo..hi.max(lo)]
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Symbol> {
        let mut seen: Vec<&Symbol> = Vec::new();
        for f in &self.facts {
            if !seen.contains(&&f.atom.predicate) {
                seen.push(&f.atom.predicate);
            }
        }
        seen.into_iter()
    }

    /// True when every atom of `self` is term-identical to an atom of `other`.
    pub fn is_subset_of(&self, other: &Instance) -> bool {
        self.atoms().all(|a| other.contains(a))
    }
}

impl FromIterator<Fact> for Instance {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        let mut instance = Instance::new();
        for fact in iter {
            instance.insert(fact);
        }
        instance
    }
}

impl Extend<Fact> for Instance {
    fn extend<I: IntoIterator<Item = Fact>>(&mut self, iter: I) {
        for fact in iter {
            self.insert(fact);
        }
    }
}

/// Freezes every null of every fact. Order, resumption iteration and
/// provenance are kept.
pub fn freeze_instance(instance: &Instance) -> Instance {
    instance
        .iter()
        .map(|f| Fact {
            atom: f.atom.freeze(),
            res_it: f.res_it,
            provenance: f.provenance.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Term;

    fn atom(p: &str, args: Vec<Term>) -> Atom {
        Atom::new(p, args)
    }

    #[test]
    fn duplicates_collapse_and_keep_min_res_it() {
        let mut i = Instance::new();
        let a = atom("p", vec![Term::constant("a")]);
        let mut f = Fact::new(a.clone());
        f.res_it = 2;
        assert_eq!(i.insert(f), Some(0));
        assert_eq!(i.insert(Fact::new(a.clone())), None);
        assert_eq!(i.len(), 1);
        assert_eq!(i.get(0).res_it, 0);
    }

    #[test]
    fn window_lookup() {
        let mut i = Instance::new();
        for c in ["a", "b", "c", "d"] {
            i.insert(Fact::new(atom("p", vec![Term::constant(c)])));
            i.insert(Fact::new(atom("q", vec![Term::constant(c)])));
        }
        let p = Symbol::new("p");
        assert_eq!(i.indices_of(&p), &[0, 2, 4, 6]);
        assert_eq!(i.indices_in(&p, 1..5), &[2, 4]);
        assert_eq!(i.indices_in(&p, 7..7), &[] as &[usize]);
    }

    #[test]
    fn freezing_keeps_identity_and_order() {
        let i = Instance::from_atoms([
            atom("p", vec![Term::null(1)]),
            atom("q", vec![Term::null(1), Term::constant("c")]),
        ]);
        let frozen = freeze_instance(&i);
        assert_eq!(frozen.get(0).atom, atom("p", vec![Term::frozen_null(1)]));
        assert_eq!(
            frozen.get(1).atom,
            atom("q", vec![Term::frozen_null(1), Term::constant("c")])
        );
        let twice = freeze_instance(&frozen);
        assert_eq!(twice.atoms().collect::<Vec<_>>(), frozen.atoms().collect::<Vec<_>>());
    }

    #[test]
    fn freezing_null_free_instance_is_identity() {
        let i = Instance::from_atoms([atom("p", vec![Term::constant("a")])]);
        let frozen = freeze_instance(&i);
        assert_eq!(frozen.atoms().collect::<Vec<_>>(), i.atoms().collect::<Vec<_>>());
    }
}
