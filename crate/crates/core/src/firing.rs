//! Streaming firing conditions.
//!
//! The homomorphism condition keeps one aggregate fact tree per predicate: a
//! trie whose root-to-leaf paths are exactly the stored facts, so deciding
//! whether a candidate maps into the store is a depth-first walk that
//! backtracks only on the candidate's unmapped nulls. The isomorphism
//! condition canonicalizes the candidate and tests a digest set.

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use crate::error::ModelError;
use crate::model::{Atom, Null, NullId, Symbol, Term};

/// How a multi-atom head is submitted to the homomorphism condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeadCheck {
    /// Each head fact is checked and admitted on its own.
    #[default]
    PerAtom,
    /// The head is checked as one conjunction with shared null images.
    Conjunction,
}

impl std::str::FromStr for HeadCheck {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-atom" => Ok(HeadCheck::PerAtom),
            "conjunction" => Ok(HeadCheck::Conjunction),
            other => Err(format!(
                "unknown head check `{other}` (expected per-atom or conjunction)"
            )),
        }
    }
}

impl fmt::Display for HeadCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadCheck::PerAtom => "per-atom",
            HeadCheck::Conjunction => "conjunction",
        })
    }
}

#[derive(Clone, Debug, Default)]
struct Node {
    children: IndexMap<Term, usize>,
}

/// Aggregate fact tree of one predicate. Every root-to-leaf path has exactly
/// `arity` edges.
#[derive(Clone, Debug)]
pub struct AfTree {
    predicate: Symbol,
    arity: usize,
    nodes: Vec<Node>,
    facts: usize,
}

/// Bindings from candidate nulls to edge labels built during a tree walk.
pub type NullMap = HashMap<Term, Term>;

impl AfTree {
    pub fn new(predicate: Symbol, arity: usize) -> Self {
        AfTree {
            predicate,
            arity,
            nodes: vec![Node::default()],
            facts: 0,
        }
    }

    pub fn predicate(&self) -> &Symbol {
        &self.predicate
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Number of stored facts (leaves).
    pub fn len(&self) -> usize {
        self.facts
    }

    pub fn is_empty(&self) -> bool {
        self.facts == 0
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds the path of `atom`, reusing shared prefixes. Returns whether the
    /// fact was new.
    pub fn insert(&mut self, atom: &Atom) -> Result<bool, ModelError> {
        if atom.predicate != self.predicate || atom.arity() != self.arity {
            return Err(ModelError::ArityMismatch {
                predicate: atom.predicate.to_string(),
                expected: self.arity,
                found: atom.arity(),
            });
        }
        let mut node = 0;
        let mut fresh = false;
        for t in &atom.args {
            node = match self.nodes[node].children.get(t) {
                Some(&child) => child,
                None => {
                    let child = self.nodes.len();
                    self.nodes.push(Node::default());
                    self.nodes[node].children.insert(t.clone(), child);
                    fresh = true;
                    child
                }
            };
        }
        if fresh || (self.arity == 0 && self.facts == 0) {
            self.facts += 1;
            return Ok(true);
        }
        Ok(false)
    }

    /// Every stored fact, reconstructed from its root-to-leaf path.
    pub fn paths(&self) -> Vec<Vec<Term>> {
        let mut out = Vec::new();
        if self.facts == 0 {
            return out;
        }
        let mut prefix = Vec::new();
        self.collect(0, &mut prefix, &mut out);
        out
    }

    fn collect(&self, node: usize, prefix: &mut Vec<Term>, out: &mut Vec<Vec<Term>>) {
        if prefix.len() == self.arity {
            out.push(prefix.clone());
            return;
        }
        for (label, &child) in &self.nodes[node].children {
            prefix.push(label.clone());
            self.collect(child, prefix, out);
            prefix.pop();
        }
    }

    /// Single-fact check: does `atom` map into a stored fact extending `nm`?
    pub fn hom_exists(&self, atom: &Atom, nm: &mut NullMap) -> bool {
        let mut done = |_: &mut NullMap| true;
        !self.is_empty() && self.visit(0, 0, atom, nm, &mut done)
    }

    /// Depth-first path matching. At a leaf, `next` decides whether the
    /// match as a whole succeeds, which lets conjunctions chain trees while
    /// sharing one null map.
    fn visit(
        &self,
        node: usize,
        depth: usize,
        atom: &Atom,
        nm: &mut NullMap,
        next: &mut dyn FnMut(&mut NullMap) -> bool,
    ) -> bool {
        if depth == self.arity {
            return next(nm);
        }
        let a = &atom.args[depth];
        let children = &self.nodes[node].children;
        if !a.is_unfrozen_null() {
            return match children.get(a) {
                Some(&child) => self.visit(child, depth + 1, atom, nm, next),
                None => false,
            };
        }
        if let Some(img) = nm.get(a).cloned() {
            return match children.get(&img) {
                Some(&child) => self.visit(child, depth + 1, atom, nm, next),
                None => false,
            };
        }
        for (label, &child) in children {
            nm.insert(a.clone(), label.clone());
            if self.visit(child, depth + 1, atom, nm, next) {
                return true;
            }
            nm.remove(a);
        }
        false
    }
}

/// One aggregate fact tree per predicate.
#[derive(Clone, Debug, Default)]
pub struct AfForest {
    trees: HashMap<Symbol, AfTree>,
}

impl AfForest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, atom: &Atom) -> Result<bool, ModelError> {
        self.trees
            .entry(atom.predicate.clone())
            .or_insert_with(|| AfTree::new(atom.predicate.clone(), atom.arity()))
            .insert(atom)
    }

    pub fn tree(&self, predicate: &Symbol) -> Option<&AfTree> {
        self.trees.get(predicate)
    }

    pub fn len(&self) -> usize {
        self.trees.values().map(AfTree::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True iff there is a homomorphism from the whole of `conj` into the
    /// stored facts, with nulls mapped consistently across atoms.
    pub fn hom_exists(&self, conj: &[Atom], nm: &mut NullMap) -> bool {
        self.chain(conj, nm)
    }

    fn chain(&self, conj: &[Atom], nm: &mut NullMap) -> bool {
        let Some((first, rest)) = conj.split_first() else {
            return true;
        };
        let Some(tree) = self.trees.get(&first.predicate) else {
            return false;
        };
        if tree.is_empty() || tree.arity != first.arity() {
            return false;
        }
        let mut next = |nm: &mut NullMap| self.chain(rest, nm);
        tree.visit(0, 0, first, nm, &mut next)
    }
}

/// Streaming homomorphism firing condition.
#[derive(Clone, Debug, Default)]
pub struct HomomorphismCheckS {
    forest: AfForest,
}

impl HomomorphismCheckS {
    pub fn new() -> Self {
        Self::default()
    }

    /// True when `atom` should fire, i.e. it has no image in the store.
    pub fn check(&self, atom: &Atom) -> bool {
        !self.check_conjunction_blocked(std::slice::from_ref(atom))
    }

    /// True when the conjunction should fire.
    pub fn check_conjunction(&self, head: &[Atom]) -> bool {
        !self.check_conjunction_blocked(head)
    }

    fn check_conjunction_blocked(&self, head: &[Atom]) -> bool {
        self.forest.hom_exists(head, &mut NullMap::new())
    }

    pub fn admit(&mut self, atom: &Atom) {
        // Arities are validated when the program and data are loaded.
        let _ = self.forest.insert(atom);
    }

    pub fn forest(&self) -> &AfForest {
        &self.forest
    }
}

/// Replaces every unfrozen null by the canonical null indexed by the
/// 1-based position of its first occurrence.
pub fn canonicalize(atom: &Atom) -> Atom {
    let mut first: Vec<(&Term, u32)> = Vec::new();
    let args = atom
        .args
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if !t.is_unfrozen_null() {
                return t.clone();
            }
            let j = match first.iter().find(|(seen, _)| *seen == t) {
                Some(&(_, j)) => j,
                None => {
                    let j = i as u32 + 1;
                    first.push((t, j));
                    j
                }
            };
            Term::Null(Null::canonical(j))
        })
        .collect();
    Atom::new(atom.predicate.clone(), args)
}

pub type DigestBytes = [u8; 32];

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

/// Length-prefixed byte encoding of an atom: predicate, arity, then one tagged
/// record per argument.
pub fn serialize(atom: &Atom) -> Vec<u8> {
    let mut buf = Vec::new();
    put_str(&mut buf, atom.predicate.as_str());
    buf.extend_from_slice(&(atom.args.len() as u64).to_le_bytes());
    for t in &atom.args {
        match t {
            Term::Constant(c) => {
                buf.push(0);
                put_str(&mut buf, c.as_str());
            }
            Term::Null(Null {
                id: NullId::Labelled(id),
                frozen: true,
            }) => {
                buf.push(1);
                buf.extend_from_slice(&id.to_le_bytes());
            }
            Term::Null(Null {
                id: NullId::Canonical(j),
                frozen: false,
            }) => {
                buf.push(2);
                buf.extend_from_slice(&j.to_le_bytes());
            }
            Term::Null(Null {
                id: NullId::Canonical(j),
                frozen: true,
            }) => {
                buf.push(3);
                buf.extend_from_slice(&j.to_le_bytes());
            }
            Term::Null(Null {
                id: NullId::Labelled(id),
                frozen: false,
            }) => {
                buf.push(4);
                buf.extend_from_slice(&id.to_le_bytes());
            }
            Term::Variable(v) => {
                buf.push(5);
                put_str(&mut buf, v.as_str());
            }
        }
    }
    buf
}

pub fn sha256_digest(atom: &Atom) -> DigestBytes {
    Sha256::digest(serialize(atom)).into()
}

/// Streaming isomorphism firing condition: a set of digests of canonical facts.
#[derive(Clone)]
pub struct CanonicalHashState {
    digests: HashSet<DigestBytes>,
    /// Canonical facts per digest, kept only in paranoid mode.
    verified: Option<HashMap<DigestBytes, Vec<Atom>>>,
    hasher: fn(&Atom) -> DigestBytes,
    collisions: u64,
}

impl fmt::Debug for CanonicalHashState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CanonicalHashState")
            .field("digests", &self.digests.len())
            .field("paranoid", &self.verified.is_some())
            .field("collisions", &self.collisions)
            .finish()
    }
}

impl Default for CanonicalHashState {
    fn default() -> Self {
        CanonicalHashState::new(false)
    }
}

impl CanonicalHashState {
    pub fn new(paranoid: bool) -> Self {
        CanonicalHashState::with_hasher(paranoid, sha256_digest)
    }

    /// Uses `hasher` in place of SHA-256; meant for exercising collisions.
    pub fn with_hasher(paranoid: bool, hasher: fn(&Atom) -> DigestBytes) -> Self {
        CanonicalHashState {
            digests: HashSet::new(),
            verified: paranoid.then(HashMap::new),
            hasher,
            collisions: 0,
        }
    }

    /// Returns false when an isomorphic fact was seen before; otherwise records
    /// `atom` and returns true.
    pub fn check(&mut self, atom: &Atom) -> bool {
        let canonical = canonicalize(atom);
        let digest = (self.hasher)(&canonical);
        let fresh_digest = self.digests.insert(digest);
        match &mut self.verified {
            None => fresh_digest,
            Some(store) => {
                let bucket = store.entry(digest).or_default();
                if bucket.contains(&canonical) {
                    return false;
                }
                if !fresh_digest {
                    self.collisions += 1;
                }
                bucket.push(canonical);
                true
            }
        }
    }

    /// Membership test without recording.
    pub fn contains(&self, atom: &Atom) -> bool {
        let canonical = canonicalize(atom);
        let digest = (self.hasher)(&canonical);
        match &self.verified {
            None => self.digests.contains(&digest),
            Some(store) => store.get(&digest).is_some_and(|b| b.contains(&canonical)),
        }
    }

    pub fn len(&self) -> usize {
        self.digests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digests.is_empty()
    }

    /// Digest hits whose canonical facts differed (paranoid mode only).
    pub fn collisions(&self) -> u64 {
        self.collisions
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FiringKind {
    #[default]
    Hom,
    Iso,
}

impl std::str::FromStr for FiringKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hom" => Ok(FiringKind::Hom),
            "iso" => Ok(FiringKind::Iso),
            other => Err(format!("unknown firing condition `{other}` (expected hom or iso)")),
        }
    }
}

impl fmt::Display for FiringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FiringKind::Hom => "hom",
            FiringKind::Iso => "iso",
        })
    }
}

/// The selected streaming condition behind one interface.
#[derive(Clone, Debug)]
pub enum FiringState {
    Hom(HomomorphismCheckS),
    Iso(CanonicalHashState),
}

impl FiringState {
    pub fn new(kind: FiringKind, paranoid: bool) -> Self {
        match kind {
            FiringKind::Hom => FiringState::Hom(HomomorphismCheckS::new()),
            FiringKind::Iso => FiringState::Iso(CanonicalHashState::new(paranoid)),
        }
    }

    /// Checks one atom; when it fires it is recorded in the state.
    pub fn check_and_admit(&mut self, atom: &Atom) -> bool {
        match self {
            FiringState::Hom(h) => {
                let fire = h.check(atom);
                if fire {
                    h.admit(atom);
                }
                fire
            }
            FiringState::Iso(s) => s.check(atom),
        }
    }

    /// Records `atom` unconditionally (database facts).
    pub fn preload(&mut self, atom: &Atom) {
        match self {
            FiringState::Hom(h) => h.admit(atom),
            FiringState::Iso(s) => {
                s.check(atom);
            }
        }
    }
}
