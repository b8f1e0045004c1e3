//! Logical vocabulary: terms, atoms, facts, rules and programs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::ModelError;

/// An interned-by-sharing name for predicates, constants, variables and rule ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl From<String> for Symbol {
    fn from(s: String) -> Self {
        Symbol(Arc::from(s))
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identity of a labelled null.
///
/// `Labelled` nulls are invented by the chase. `Canonical` nulls are the
/// position-indexed placeholders produced by canonicalization; they never
/// occur in an instance.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum NullId {
    Labelled(u64),
    Canonical(u32),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Null {
    pub id: NullId,
    /// A frozen null behaves as a constant everywhere.
    pub frozen: bool,
}

impl Null {
    pub fn labelled(id: u64) -> Self {
        Null {
            id: NullId::Labelled(id),
            frozen: false,
        }
    }

    pub fn canonical(index: u32) -> Self {
        Null {
            id: NullId::Canonical(index),
            frozen: false,
        }
    }

    pub fn frozen(self) -> Self {
        Null { frozen: true, ..self }
    }

    pub fn thawed(self) -> Self {
        Null { frozen: false, ..self }
    }
}

impl fmt::Display for Null {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.id, self.frozen) {
            (NullId::Labelled(id), false) => write!(f, "_:n{id}"),
            (NullId::Labelled(id), true) => write!(f, "_:f{id}"),
            (NullId::Canonical(j), false) => write!(f, "_:c{j}"),
            (NullId::Canonical(j), true) => write!(f, "_:fc{j}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Constant(Symbol),
    Null(Null),
    Variable(Symbol),
}

impl Term {
    pub fn constant(name: &str) -> Self {
        Term::Constant(Symbol::new(name))
    }

    pub fn variable(name: &str) -> Self {
        Term::Variable(Symbol::new(name))
    }

    pub fn null(id: u64) -> Self {
        Term::Null(Null::labelled(id))
    }

    pub fn frozen_null(id: u64) -> Self {
        Term::Null(Null::labelled(id).frozen())
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    /// Constants and frozen nulls: terms every mapping must fix.
    pub fn is_rigid(&self) -> bool {
        match self {
            Term::Constant(_) => true,
            Term::Null(n) => n.frozen,
            Term::Variable(_) => false,
        }
    }

    pub fn is_unfrozen_null(&self) -> bool {
        matches!(self, Term::Null(n) if !n.frozen)
    }

    pub fn freeze(&self) -> Term {
        match self {
            Term::Null(n) => Term::Null(n.frozen()),
            t => t.clone(),
        }
    }

    pub fn thaw(&self) -> Term {
        match self {
            Term::Null(n) => Term::Null(n.thawed()),
            t => t.clone(),
        }
    }
}

fn is_plain_constant(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        Some(c) if c.is_ascii_digit() => s.chars().all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(s) if is_plain_constant(s.as_str()) => write!(f, "{s}"),
            Term::Constant(s) => {
                f.write_str("\"")?;
                for c in s.as_str().chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Term::Null(n) => write!(f, "{n}"),
            Term::Variable(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<Symbol>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(Term::is_variable)
    }

    pub fn has_unfrozen_nulls(&self) -> bool {
        self.args.iter().any(Term::is_unfrozen_null)
    }

    pub fn variables(&self) -> impl Iterator<Item = &Symbol> {
        self.args.iter().filter_map(|t| match t {
            Term::Variable(v) => Some(v),
            _ => None,
        })
    }

    /// Freezes every null of the atom, keeping ids.
    pub fn freeze(&self) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(Term::freeze).collect(),
        }
    }

    pub fn thaw(&self) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(Term::thaw).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Where a derived fact came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub rule: Symbol,
    pub parents: Vec<Atom>,
    /// Number of freeze steps applied after the fire.
    pub freezes: u32,
}

/// A ground atom annotated with the resumption iteration it belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fact {
    pub atom: Atom,
    pub res_it: u32,
    pub provenance: Option<Provenance>,
}

impl Fact {
    pub fn new(atom: Atom) -> Self {
        Fact {
            atom,
            res_it: 0,
            provenance: None,
        }
    }

    pub fn derived(atom: Atom, res_it: u32, provenance: Provenance) -> Self {
        Fact {
            atom,
            res_it,
            provenance: Some(provenance),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom)
    }
}

/// Predicate arities, fixed at first use.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    arities: BTreeMap<Symbol, usize>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn arity(&self, predicate: &Symbol) -> Option<usize> {
        self.arities.get(predicate).copied()
    }

    /// Records the arity of `atom` on first sight; rejects later mismatches.
    pub fn declare(&mut self, atom: &Atom) -> Result<(), ModelError> {
        self.declare_arity(&atom.predicate, atom.arity())
    }

    pub fn declare_arity(&mut self, predicate: &Symbol, arity: usize) -> Result<(), ModelError> {
        match self.arities.get(predicate) {
            Some(&expected) if expected != arity => Err(ModelError::ArityMismatch {
                predicate: predicate.to_string(),
                expected,
                found: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(predicate.clone(), arity);
                Ok(())
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, usize)> {
        self.arities.iter().map(|(p, a)| (p, *a))
    }

    pub fn merge(&mut self, other: &Signature) -> Result<(), ModelError> {
        for (p, a) in other.iter() {
            self.declare_arity(p, a)?;
        }
        Ok(())
    }
}

/// A tuple-generating dependency `body -> exists z. head`.
#[derive(Clone, PartialEq, Eq)]
pub struct Tgd {
    pub id: Symbol,
    pub body: Vec<Atom>,
    pub head: Vec<Atom>,
    /// Head variables absent from the body, in order of first head occurrence.
    pub existential: Vec<Symbol>,
    /// Head variables present in the body, in order of first head occurrence.
    pub frontier: Vec<Symbol>,
}

impl Tgd {
    pub fn new(id: impl Into<Symbol>, body: Vec<Atom>, head: Vec<Atom>) -> Result<Self, ModelError> {
        let id = id.into();
        if body.is_empty() {
            return Err(ModelError::EmptyBody(id.to_string()));
        }
        if head.is_empty() {
            return Err(ModelError::EmptyHead(id.to_string()));
        }
        for atom in body.iter().chain(head.iter()) {
            if atom.args.iter().any(|t| matches!(t, Term::Null(_))) {
                return Err(ModelError::NullInRule(id.to_string()));
            }
        }
        let body_vars: Vec<&Symbol> = body.iter().flat_map(Atom::variables).collect();
        let mut existential = Vec::new();
        let mut frontier = Vec::new();
        for v in head.iter().flat_map(Atom::variables) {
            let bucket = if body_vars.contains(&v) {
                &mut frontier
            } else {
                &mut existential
            };
            if !bucket.contains(v) {
                bucket.push(v.clone());
            }
        }
        Ok(Tgd {
            id,
            body,
            head,
            existential,
            frontier,
        })
    }

    pub fn is_existential(&self, var: &Symbol) -> bool {
        self.existential.contains(var)
    }

    /// Variables occurring in the body, in first-occurrence order.
    pub fn body_variables(&self) -> Vec<Symbol> {
        let mut out: Vec<Symbol> = Vec::new();
        for v in self.body.iter().flat_map(Atom::variables) {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }
}

fn write_conj(f: &mut fmt::Formatter<'_>, atoms: &[Atom]) -> fmt::Result {
    for (i, a) in atoms.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.id)?;
        write_conj(f, &self.head)?;
        f.write_str(" :- ")?;
        write_conj(f, &self.body)?;
        f.write_str(".")
    }
}

impl fmt::Debug for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub rules: Vec<Tgd>,
    pub signature: Signature,
}

impl Program {
    pub fn new(rules: Vec<Tgd>) -> Result<Self, ModelError> {
        let mut signature = Signature::new();
        for (i, rule) in rules.iter().enumerate() {
            if rules[..i].iter().any(|r| r.id == rule.id) {
                return Err(ModelError::DuplicateRuleId(rule.id.to_string()));
            }
            for atom in rule.body.iter().chain(rule.head.iter()) {
                signature.declare(atom)?;
            }
        }
        Ok(Program { rules, signature })
    }

    pub fn rule(&self, id: &str) -> Option<&Tgd> {
        self.rules.iter().find(|r| r.id.as_str() == id)
    }

    pub fn has_existentials(&self) -> bool {
        self.rules.iter().any(|r| !r.existential.is_empty())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
