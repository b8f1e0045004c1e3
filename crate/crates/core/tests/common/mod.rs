//! Random generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamlog::analysis::is_shy;
use streamlog::analysis::{InvasionMap, Origin};
use streamlog::{Atom, Bcq, Fact, Instance, Position, Program, Symbol, Term, Tgd};

pub const RUNNING_PROGRAM: &str = "\
alpha: worksFor(X,S) :- employee(X).
beta:  worksFor(Y,S) :- hasBoss(X,Y), worksFor(X,S).
gamma: knows(X,Y) :- worksFor(X,S), worksFor(Y,S).
delta: worksFor(X,S), worksFor(Y,S) :- knows(X,Y).
";

pub const RUNNING_FACTS: &str = "employee(alice).\nemployee(bob).\nhasBoss(alice,bob).\n";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Shape {
    pub predicates: usize,
    pub max_arity: usize,
    pub constants: usize,
    pub max_rules: usize,
    pub max_facts: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            predicates: 4,
            max_arity: 2,
            constants: 3,
            max_rules: 6,
            max_facts: 12,
        }
    }
}

const VARS: [&str; 4] = ["X", "Y", "Z", "W"];
const EXISTENTIALS: [&str; 2] = ["E", "F"];

fn constant(i: usize) -> Term {
    Term::constant(&format!("c{i}"))
}

/// A random program with a fixed arity per predicate. Not filtered.
pub fn random_program(rng: &mut impl Rng, shape: &Shape) -> Program {
    let arities: Vec<usize> = (0..shape.predicates)
        .map(|_| rng.gen_range(1..=shape.max_arity))
        .collect();
    let n_rules = rng.gen_range(1..=shape.max_rules);
    let mut rules = Vec::new();
    for r in 0..n_rules {
        let body_len = if rng.gen_bool(0.55) { 1 } else { 2 };
        let mut body = Vec::new();
        for _ in 0..body_len {
            let p = rng.gen_range(0..shape.predicates);
            let args = (0..arities[p])
                .map(|_| {
                    if rng.gen_bool(0.08) {
                        constant(rng.gen_range(0..shape.constants))
                    } else {
                        Term::variable(VARS[rng.gen_range(0..3)])
                    }
                })
                .collect();
            body.push(Atom::new(format!("p{p}"), args));
        }
        let body_vars: Vec<Symbol> = {
            let mut seen: Vec<Symbol> = Vec::new();
            for a in &body {
                for v in a.variables() {
                    if !seen.contains(v) {
                        seen.push(v.clone());
                    }
                }
            }
            seen
        };
        let head_len = if rng.gen_bool(0.8) { 1 } else { 2 };
        let mut head = Vec::new();
        for _ in 0..head_len {
            let p = rng.gen_range(0..shape.predicates);
            let args = (0..arities[p])
                .map(|_| {
                    let roll: f64 = rng.gen();
                    if roll < 0.25 || body_vars.is_empty() {
                        Term::variable(EXISTENTIALS[rng.gen_range(0..EXISTENTIALS.len())])
                    } else if roll < 0.3 {
                        constant(rng.gen_range(0..shape.constants))
                    } else {
                        Term::variable(body_vars[rng.gen_range(0..body_vars.len())].as_str())
                    }
                })
                .collect();
            head.push(Atom::new(format!("p{p}"), args));
        }
        rules.push(Tgd::new(format!("r{r}"), body, head).expect("generated rule is well formed"));
    }
    Program::new(rules).expect("generated program is well formed")
}

/// Rejection-samples programs until one is Shy.
pub fn random_shy_program(rng: &mut impl Rng, shape: &Shape) -> Program {
    loop {
        let p = random_program(rng, shape);
        if is_shy(&p) {
            return p;
        }
    }
}

/// Random ground facts over the program's predicates.
pub fn random_database(rng: &mut impl Rng, program: &Program, shape: &Shape) -> Instance {
    let preds: Vec<(Symbol, usize)> = program.signature.iter().map(|(p, a)| (p.clone(), a)).collect();
    let n = rng.gen_range(1..=shape.max_facts);
    let mut d = Instance::new();
    for _ in 0..n {
        let (p, arity) = &preds[rng.gen_range(0..preds.len())];
        let args = (0..*arity)
            .map(|_| constant(rng.gen_range(0..shape.constants)))
            .collect();
        d.insert(Fact::new(Atom::new(p.clone(), args)));
    }
    d
}

/// A random BCQ with up to three atoms and two variables. With a `source`
/// instance most atoms are abstractions of its facts, so positive answers are
/// common.
pub fn random_bcq(rng: &mut impl Rng, program: &Program, source: Option<&Instance>, shape: &Shape) -> Bcq {
    const QVARS: [&str; 2] = ["X", "Y"];
    let preds: Vec<(Symbol, usize)> = program.signature.iter().map(|(p, a)| (p.clone(), a)).collect();
    let mut abstraction: HashMap<Term, Term> = HashMap::new();
    let mut used = 0usize;
    let mut atoms = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let from_source = source.filter(|s| !s.is_empty() && rng.gen_bool(0.7));
        let atom = match from_source {
            Some(s) => {
                let f = &s.facts()[rng.gen_range(0..s.len())];
                let mut args = Vec::new();
                for t in &f.atom.args {
                    let t = t.thaw();
                    let is_const = matches!(t, Term::Constant(_));
                    if is_const && !rng.gen_bool(0.3) {
                        args.push(t);
                    } else if let Some(v) = abstraction.get(&t) {
                        args.push(v.clone());
                    } else if used < QVARS.len() {
                        let v = Term::variable(QVARS[used]);
                        used += 1;
                        abstraction.insert(t, v.clone());
                        args.push(v);
                    } else if is_const {
                        args.push(t);
                    } else {
                        args.push(Term::variable(QVARS[rng.gen_range(0..used)]));
                    }
                }
                Atom::new(f.atom.predicate.clone(), args)
            }
            None => {
                let (p, arity) = &preds[rng.gen_range(0..preds.len())];
                let mut args = Vec::new();
                for _ in 0..*arity {
                    if used < QVARS.len() && rng.gen_bool(0.5) {
                        args.push(Term::variable(QVARS[used]));
                        used += 1;
                    } else if used > 0 && rng.gen_bool(0.5) {
                        args.push(Term::variable(QVARS[rng.gen_range(0..used)]));
                    } else {
                        args.push(constant(rng.gen_range(0..shape.constants)));
                    }
                }
                Atom::new(p.clone(), args)
            }
        };
        atoms.push(atom);
    }
    Bcq::new(atoms).expect("nonempty")
}

/// Random atom over the given terms.
pub fn random_atom(rng: &mut impl Rng, predicate: &str, arity: usize, terms: &[Term]) -> Atom {
    Atom::new(
        predicate,
        (0..arity).map(|_| terms.choose(rng).expect("terms").clone()).collect(),
    )
}

/// A pool of constants, frozen nulls and unfrozen nulls.
pub fn term_pool(constants: usize, nulls: u64, frozen: u64) -> Vec<Term> {
    let mut out: Vec<Term> = (0..constants).map(constant).collect();
    out.extend((1..=nulls).map(Term::null));
    out.extend((100..100 + frozen).map(Term::frozen_null));
    out
}

/// Renames the unfrozen nulls of `atom` with a random injective map.
pub fn rename_nulls(rng: &mut impl Rng, atom: &Atom, fresh_base: u64) -> Atom {
    let mut order: Vec<Term> = Vec::new();
    for t in &atom.args {
        if t.is_unfrozen_null() && !order.contains(t) {
            order.push(t.clone());
        }
    }
    let mut targets: Vec<u64> = (0..order.len() as u64).map(|i| fresh_base + i).collect();
    targets.shuffle(rng);
    let map: HashMap<Term, Term> = order.into_iter().zip(targets.into_iter().map(Term::null)).collect();
    Atom::new(
        atom.predicate.clone(),
        atom.args
            .iter()
            .map(|t| map.get(t).cloned().unwrap_or_else(|| t.clone()))
            .collect(),
    )
}

fn unfrozen_nulls(atoms: &[&Atom]) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    for a in atoms {
        for t in &a.args {
            if t.is_unfrozen_null() && !out.contains(t) {
                out.push(t.clone());
            }
        }
    }
    out
}

fn substitute(atom: &Atom, map: &HashMap<&Term, &Term>) -> Atom {
    Atom::new(
        atom.predicate.clone(),
        atom.args
            .iter()
            .map(|t| map.get(t).map_or_else(|| t.clone(), |x| (*x).clone()))
            .collect(),
    )
}

/// Exhaustive homomorphism test for one atom into a set of atoms: tries every
/// assignment of the atom's unfrozen nulls to terms of the target set.
pub fn brute_hom_into(atom: &Atom, targets: &[Atom]) -> bool {
    let nulls = unfrozen_nulls(&[atom]);
    let mut universe: Vec<Term> = Vec::new();
    for a in targets {
        for t in &a.args {
            if !universe.contains(t) {
                universe.push(t.clone());
            }
        }
    }
    if nulls.is_empty() {
        return targets.contains(atom);
    }
    if universe.is_empty() {
        return false;
    }
    let k = nulls.len();
    let mut choice = vec![0usize; k];
    loop {
        let map: HashMap<&Term, &Term> = nulls.iter().zip(choice.iter().map(|&i| &universe[i])).collect();
        if targets.contains(&substitute(atom, &map)) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == k {
                return false;
            }
            choice[i] += 1;
            if choice[i] < universe.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Exhaustive isomorphism test for two atoms: tries every bijection between
/// their unfrozen nulls.
pub fn brute_iso_atoms(a: &Atom, b: &Atom) -> bool {
    if a.predicate != b.predicate || a.arity() != b.arity() {
        return false;
    }
    let na = unfrozen_nulls(&[a]);
    let nb = unfrozen_nulls(&[b]);
    if na.len() != nb.len() {
        return false;
    }
    permutations(na.len()).into_iter().any(|perm| {
        let map: HashMap<&Term, &Term> = na.iter().zip(perm.iter().map(|&i| &nb[i])).collect();
        substitute(a, &map) == *b
    })
}

/// Exhaustive homomorphism test between small instances, nulls thawed first.
pub fn brute_embeds(src: &Instance, dst: &Instance) -> bool {
    let src: Vec<Atom> = src.atoms().map(Atom::thaw).collect();
    let dst: Vec<Atom> = dst.atoms().map(Atom::thaw).collect();
    let refs: Vec<&Atom> = src.iter().collect();
    let nulls = unfrozen_nulls(&refs);
    let mut universe: Vec<Term> = Vec::new();
    for a in &dst {
        for t in &a.args {
            if !universe.contains(t) {
                universe.push(t.clone());
            }
        }
    }
    let check = |map: &HashMap<&Term, &Term>| src.iter().all(|a| dst.contains(&substitute(a, map)));
    if nulls.is_empty() {
        return check(&HashMap::new());
    }
    if universe.is_empty() {
        return false;
    }
    let k = nulls.len();
    let mut choice = vec![0usize; k];
    loop {
        let map: HashMap<&Term, &Term> = nulls.iter().zip(choice.iter().map(|&i| &universe[i])).collect();
        if check(&map) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == k {
                return false;
            }
            choice[i] += 1;
            if choice[i] < universe.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Exhaustive BCQ evaluation: tries every assignment of query variables to
/// terms of the instance.
pub fn brute_entails(instance: &Instance, q: &Bcq) -> bool {
    let vars: Vec<Term> = q.vars.iter().map(|v| Term::variable(v.as_str())).collect();
    let atoms: Vec<Atom> = instance.atoms().cloned().collect();
    let mut universe: Vec<Term> = Vec::new();
    for a in &atoms {
        for t in &a.args {
            if !universe.contains(t) {
                universe.push(t.clone());
            }
        }
    }
    let holds = |map: &HashMap<&Term, &Term>| q.atoms.iter().all(|a| atoms.contains(&substitute(a, map)));
    if vars.is_empty() {
        return holds(&HashMap::new());
    }
    if universe.is_empty() {
        return false;
    }
    let mut choice = vec![0usize; vars.len()];
    loop {
        let map: HashMap<&Term, &Term> = vars.iter().zip(choice.iter().map(|&i| &universe[i])).collect();
        if holds(&map) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == vars.len() {
                return false;
            }
            choice[i] += 1;
            if choice[i] < universe.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn body_positions(rule: &Tgd, var: &Symbol) -> Vec<Position> {
    let mut out = Vec::new();
    for a in &rule.body {
        for (i, t) in a.args.iter().enumerate() {
            if matches!(t, Term::Variable(v) if v == var) {
                out.push(Position::new(a.predicate.clone(), i + 1));
            }
        }
    }
    out
}

/// Naive fixpoint for affected positions: recompute every head position from
/// scratch until nothing changes.
pub fn oracle_affected(program: &Program) -> BTreeSet<Position> {
    let mut affected: BTreeSet<Position> = BTreeSet::new();
    loop {
        let mut next = affected.clone();
        for rule in &program.rules {
            for h in &rule.head {
                for (i, t) in h.args.iter().enumerate() {
                    let Term::Variable(v) = t else { continue };
                    let hit = if rule.is_existential(v) {
                        true
                    } else {
                        let occ = body_positions(rule, v);
                        !occ.is_empty() && occ.iter().all(|p| affected.contains(p))
                    };
                    if hit {
                        next.insert(Position::new(h.predicate.clone(), i + 1));
                    }
                }
            }
        }
        if next == affected {
            return affected;
        }
        affected = next;
    }
}

/// Invasion computed one existential origin at a time, each with its own
/// naive fixpoint, then merged per position.
pub fn oracle_invasion(program: &Program) -> InvasionMap {
    let mut merged: InvasionMap = BTreeMap::new();
    for origin_rule in &program.rules {
        for z in &origin_rule.existential {
            let origin = Origin {
                rule: origin_rule.id.clone(),
                var: z.clone(),
            };
            let mut invaded: BTreeSet<Position> = BTreeSet::new();
            loop {
                let mut next = invaded.clone();
                for rule in &program.rules {
                    for h in &rule.head {
                        for (i, t) in h.args.iter().enumerate() {
                            let Term::Variable(v) = t else { continue };
                            let hit = if rule.id == origin_rule.id && v == z {
                                true
                            } else if rule.is_existential(v) {
                                false
                            } else {
                                let occ = body_positions(rule, v);
                                !occ.is_empty() && occ.iter().all(|p| invaded.contains(p))
                            };
                            if hit {
                                next.insert(Position::new(h.predicate.clone(), i + 1));
                            }
                        }
                    }
                }
                if next == invaded {
                    break;
                }
                invaded = next;
            }
            for p in invaded {
                merged.entry(p).or_default().insert(origin.clone());
            }
        }
    }
    merged
}

/// Parses a single fact.
pub fn fact(text: &str) -> Atom {
    let inst = streamlog::parse_facts(text).expect("valid fact");
    let atom = inst.atoms().next().expect("one fact").clone();
    atom
}
