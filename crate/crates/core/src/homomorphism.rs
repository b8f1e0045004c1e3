//! Substitutions, homomorphism search and isomorphism tests.
//!
//! Constants and frozen nulls are rigid: every mapping fixes them. Variables and
//! unfrozen nulls are the only terms a mapping may move.

use std::collections::HashMap;
use std::ops::{ControlFlow, Range};

use crate::error::ModelError;
use crate::instance::Instance;
use crate::model::{Atom, Term};

/// A partial substitution with an undo trail, so that backtracking search
/// can bind and unbind in LIFO order without cloning.
#[derive(Clone, Debug, Default)]
pub struct Mapping {
    map: HashMap<Term, Term>,
    trail: Vec<Term>,
    /// Reverse map of null images, maintained only by injective searches.
    used: HashMap<Term, Term>,
    used_trail: Vec<Term>,
}

impl PartialEq for Mapping {
    fn eq(&self, other: &Self) -> bool {
        self.map == other.map
    }
}

impl Mapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Term, Term)>) -> Self {
        let mut m = Mapping::new();
        for (k, v) in pairs {
            m.bind(k, v);
        }
        m
    }

    pub fn get(&self, term: &Term) -> Option<&Term> {
        self.map.get(term)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Term)> {
        self.map.iter()
    }

    /// Binds `from` to `to`. Rigid terms are never bound; the caller checks
    /// consistency beforehand.
    pub fn bind(&mut self, from: Term, to: Term) {
        debug_assert!(!from.is_rigid(), "rigid terms are fixpoints");
        self.trail.push(from.clone());
        self.map.insert(from, to);
    }

    pub fn mark(&self) -> (usize, usize) {
        (self.trail.len(), self.used_trail.len())
    }

    pub fn undo_to(&mut self, mark: (usize, usize)) {
        while self.trail.len() > mark.0 {
            let t = self.trail.pop().expect("trail length checked");
            self.map.remove(&t);
        }
        while self.used_trail.len() > mark.1 {
            let t = self.used_trail.pop().expect("trail length checked");
            self.used.remove(&t);
        }
    }

    /// The image of `term`: rigid terms and unbound terms map to themselves.
    pub fn image(&self, term: &Term) -> Term {
        if term.is_rigid() {
            return term.clone();
        }
        self.map.get(term).cloned().unwrap_or_else(|| term.clone())
    }

    /// Restricts the mapping to variables, dropping null bindings.
    pub fn variables_only(&self) -> Mapping {
        Mapping::from_pairs(
            self.map
                .iter()
                .filter(|(k, _)| k.is_variable())
                .map(|(k, v)| (k.clone(), v.clone())),
        )
    }
}

/// Applies `m` position by position. With `require_ground`, an unmapped
/// variable is an error; otherwise it is left in place.
pub fn apply(m: &Mapping, conj: &[Atom], require_ground: bool) -> Result<Vec<Atom>, ModelError> {
    conj.iter()
        .map(|atom| {
            let args = atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Variable(v) if require_ground && m.get(t).is_none() => {
                        Err(ModelError::UnmappedVariable(v.to_string()))
                    }
                    _ => Ok(m.image(t)),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Atom::new(atom.predicate.clone(), args))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchMode {
    /// Any consistent mapping.
    Homomorphism,
    /// Movable terms map injectively onto unfrozen nulls.
    Injective,
}

/// Extends `m` so that `pattern` maps onto `target`. On failure `m` is
/// restored and `false` is returned.
pub fn match_atom(pattern: &Atom, target: &Atom, m: &mut Mapping, mode: MatchMode) -> bool {
    if pattern.predicate != target.predicate || pattern.args.len() != target.args.len() {
        return false;
    }
    let mark = m.mark();
    for (p, t) in pattern.args.iter().zip(&target.args) {
        if !match_term(p, t, m, mode) {
            m.undo_to(mark);
            return false;
        }
    }
    true
}

fn match_term(p: &Term, t: &Term, m: &mut Mapping, mode: MatchMode) -> bool {
    if p.is_rigid() {
        return p == t;
    }
    if let Some(img) = m.get(p) {
        return img == t;
    }
    if mode == MatchMode::Injective {
        if !t.is_unfrozen_null() || m.used.contains_key(t) {
            return false;
        }
        m.used.insert(t.clone(), p.clone());
        m.used_trail.push(t.clone());
    }
    m.bind(p.clone(), t.clone());
    true
}

/// Enumerates every extension of `seed` mapping `src` into `dst`.
///
/// Atoms are matched left to right; the candidates of atom `j` are the facts of
/// its predicate whose insertion index lies in `window(j)`, tried in
/// insertion order. `visit` receives the mapping and the chosen fact indices
/// and may stop the enumeration by returning `Break`.
pub fn for_each_match(
    src: &[Atom],
    dst: &Instance,
    seed: &Mapping,
    window: &dyn Fn(usize) -> Range<usize>,
    mode: MatchMode,
    visit: &mut dyn FnMut(&Mapping, &[usize]) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let mut m = seed.clone();
    let mut chosen = Vec::with_capacity(src.len());
    search(src, dst, 0, &mut m, &mut chosen, window, mode, visit)
}

#[allow(clippy::too_many_arguments)]
fn search(
    src: &[Atom],
    dst: &Instance,
    depth: usize,
    m: &mut Mapping,
    chosen: &mut Vec<usize>,
    window: &dyn Fn(usize) -> Range<usize>,
    mode: MatchMode,
    visit: &mut dyn FnMut(&Mapping, &[usize]) -> ControlFlow<()>,
) -> ControlFlow<()> {
    if depth == src.len() {
        return visit(m, chosen);
    }
    let pattern = &src[depth];
    let range = window(depth);
    if range.start >= range.end {
        return ControlFlow::Continue(());
    }
    for &idx in dst.indices_in(&pattern.predicate, range) {
        let mark = m.mark();
        if match_atom(pattern, &dst.get(idx).atom, m, mode) {
            chosen.push(idx);
            let flow = search(src, dst, depth + 1, m, chosen, window, mode, visit);
            chosen.pop();
            m.undo_to(mark);
            flow?;
        }
    }
    ControlFlow::Continue(())
}

/// The first extension of `seed` with `apply(m, src) ⊆ dst` under the
/// documented candidate order, or `None`.
pub fn find_homomorphism(src: &[Atom], dst: &Instance, seed: &Mapping) -> Option<Mapping> {
    find_with_mode(src, dst, seed, MatchMode::Homomorphism)
}

fn find_with_mode(src: &[Atom], dst: &Instance, seed: &Mapping, mode: MatchMode) -> Option<Mapping> {
    let all = 0..dst.len();
    let mut found = None;
    let _ = for_each_match(src, dst, seed, &|_| all.clone(), mode, &mut |m, _| {
        found = Some(m.clone());
        ControlFlow::Break(())
    });
    found
}

/// Fact isomorphism: equal predicate, equal rigid terms per position and a
/// position-consistent bijection between unfrozen nulls.
pub fn is_isomorphic_facts(a: &Atom, b: &Atom) -> bool {
    if a.predicate != b.predicate || a.args.len() != b.args.len() {
        return false;
    }
    let mut forward: HashMap<&Term, &Term> = HashMap::new();
    let mut backward: HashMap<&Term, &Term> = HashMap::new();
    for (x, y) in a.args.iter().zip(&b.args) {
        match (x.is_unfrozen_null(), y.is_unfrozen_null()) {
            (true, true) => {
                if *forward.entry(x).or_insert(y) != y || *backward.entry(y).or_insert(x) != x {
                    return false;
                }
            }
            (false, false) => {
                if x != y {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Groups facts into components connected through shared unfrozen nulls,
/// ordering each component so every atom after the first shares a null with
/// an earlier one.
fn null_components(atoms: &[Atom]) -> Vec<Vec<Atom>> {
    let mut owner: HashMap<&Term, Vec<usize>> = HashMap::new();
    for (i, a) in atoms.iter().enumerate() {
        for t in a.args.iter().filter(|t| t.is_unfrozen_null()) {
            owner.entry(t).or_default().push(i);
        }
    }
    let mut seen = vec![false; atoms.len()];
    let mut out = Vec::new();
    for start in 0..atoms.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut order = vec![start];
        let mut k = 0;
        while k < order.len() {
            let a = &atoms[order[k]];
            for t in a.args.iter().filter(|t| t.is_unfrozen_null()) {
                for &j in &owner[t] {
                    if !seen[j] {
                        seen[j] = true;
                        order.push(j);
                    }
                }
            }
            k += 1;
        }
        out.push(order.into_iter().map(|i| atoms[i].clone()).collect());
    }
    out
}

fn thawed(instance: &Instance) -> Vec<Atom> {
    instance.atoms().map(Atom::thaw).collect()
}

fn thawed_instance(instance: &Instance) -> Instance {
    Instance::from_atoms(instance.atoms().map(Atom::thaw))
}

/// True when `src` maps homomorphically into `dst` after thawing the frozen
/// nulls of both sides, that is, containment modulo null renaming.
pub fn embeds(src: &Instance, dst: &Instance) -> bool {
    let dst = thawed_instance(dst);
    null_components(&thawed(src))
        .iter()
        .all(|comp| find_homomorphism(comp, &dst, &Mapping::new()).is_some())
}

/// Mutual embedding of two instances.
pub fn homomorphically_equivalent(a: &Instance, b: &Instance) -> bool {
    embeds(a, b) && embeds(b, a)
}

/// True when the two instances coincide up to a bijective renaming of nulls
/// (frozen nulls are thawed first).
pub fn isomorphic_instances(a: &Instance, b: &Instance) -> bool {
    let a_atoms = thawed(a);
    let b = thawed_instance(b);
    if a_atoms.len() != b.len() {
        return false;
    }
    // Components are concatenated so the search stays connected; injectivity
    // across components is enforced by the shared reverse map.
    let ordered: Vec<Atom> = null_components(&a_atoms).into_iter().flatten().collect();
    find_with_mode(&ordered, &b, &Mapping::new(), MatchMode::Injective).is_some()
}
