//! Static fragment analysis: affected and invaded positions, variable
//! classification, and Shy / Warded / Protected membership.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::model::{Program, Symbol, Term, Tgd};

/// The `index`-th argument (1-based) of `predicate`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub predicate: Symbol,
    pub index: usize,
}

impl Position {
    pub fn new(predicate: impl Into<Symbol>, index: usize) -> Self {
        Position {
            predicate: predicate.into(),
            index,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.predicate, self.index)
    }
}

/// An existential variable of a specific rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Origin {
    pub rule: Symbol,
    pub var: Symbol,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.rule, self.var)
    }
}

pub type InvasionMap = BTreeMap<Position, BTreeSet<Origin>>;

/// Body positions of every variable of `rule`, in body order.
fn body_positions(rule: &Tgd) -> BTreeMap<Symbol, Vec<(usize, Position)>> {
    let mut out: BTreeMap<Symbol, Vec<(usize, Position)>> = BTreeMap::new();
    for (ai, atom) in rule.body.iter().enumerate() {
        for (i, t) in atom.args.iter().enumerate() {
            if let Term::Variable(v) = t {
                out.entry(v.clone())
                    .or_default()
                    .push((ai, Position::new(atom.predicate.clone(), i + 1)));
            }
        }
    }
    out
}

fn head_positions<'r>(rule: &'r Tgd) -> impl Iterator<Item = (&'r Symbol, Position)> + 'r {
    rule.head.iter().flat_map(|atom| {
        atom.args.iter().enumerate().filter_map(move |(i, t)| match t {
            Term::Variable(v) => Some((v, Position::new(atom.predicate.clone(), i + 1))),
            _ => None,
        })
    })
}

/// Least fixpoint of: existential head positions are affected, and a head
/// position of a frontier variable occurring only in affected body positions
/// is affected.
pub fn affected_positions(program: &Program) -> BTreeSet<Position> {
    let mut affected = BTreeSet::new();
    for rule in &program.rules {
        for (v, pos) in head_positions(rule) {
            if rule.is_existential(v) {
                affected.insert(pos);
            }
        }
    }
    let bodies: Vec<_> = program.rules.iter().map(body_positions).collect();
    loop {
        let mut changed = false;
        for (rule, body) in program.rules.iter().zip(&bodies) {
            for (v, pos) in head_positions(rule) {
                let Some(occ) = body.get(v) else { continue };
                if occ.iter().all(|(_, p)| affected.contains(p)) && affected.insert(pos) {
                    changed = true;
                }
            }
        }
        if !changed {
            return affected;
        }
    }
}

/// Least fixpoint of: a position holding existential `y` in a head is invaded
/// by `y`, and a head position of a frontier variable whose body positions are
/// all invaded by `y` is invaded by `y`.
pub fn invasion_map(program: &Program) -> InvasionMap {
    let mut map: InvasionMap = BTreeMap::new();
    for rule in &program.rules {
        for (v, pos) in head_positions(rule) {
            if rule.is_existential(v) {
                map.entry(pos).or_default().insert(Origin {
                    rule: rule.id.clone(),
                    var: v.clone(),
                });
            }
        }
    }
    let bodies: Vec<_> = program.rules.iter().map(body_positions).collect();
    loop {
        let mut changed = false;
        for (rule, body) in program.rules.iter().zip(&bodies) {
            for (v, pos) in head_positions(rule) {
                let Some(occ) = body.get(v) else { continue };
                let common = common_origins(&map, occ.iter().map(|(_, p)| p));
                if common.is_empty() {
                    continue;
                }
                let entry = map.entry(pos).or_default();
                for o in common {
                    changed |= entry.insert(o);
                }
            }
        }
        if !changed {
            return map;
        }
    }
}

/// Origins invading every one of `positions`.
fn common_origins<'p>(map: &InvasionMap, positions: impl Iterator<Item = &'p Position>) -> BTreeSet<Origin> {
    let mut acc: Option<BTreeSet<Origin>> = None;
    for p in positions {
        let here = map.get(p).cloned().unwrap_or_default();
        acc = Some(match acc {
            None => here,
            Some(prev) => prev.intersection(&here).cloned().collect(),
        });
        if acc.as_ref().is_some_and(BTreeSet::is_empty) {
            break;
        }
    }
    acc.unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableReport {
    pub name: Symbol,
    pub harmful: bool,
    pub dangerous: bool,
    /// Existential variables attacking this variable; empty means protected.
    pub attacked_by: BTreeSet<Origin>,
    /// Indices of the body atoms the variable occurs in.
    pub atoms: BTreeSet<usize>,
}

impl VariableReport {
    pub fn is_protected(&self) -> bool {
        self.attacked_by.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleReport {
    pub rule: Symbol,
    pub variables: Vec<VariableReport>,
    /// Index of the ward among the body atoms; `None` when the rule has no
    /// dangerous variable or no ward exists.
    pub ward: Option<usize>,
    pub warded: bool,
    pub shy: bool,
    /// Join variables forming an attacked harmful join.
    pub ahj: Vec<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentReport {
    pub affected: BTreeSet<Position>,
    pub invaded: InvasionMap,
    pub rules: Vec<RuleReport>,
    pub is_shy: bool,
    pub is_warded: bool,
    pub is_protected: bool,
    /// (rule, join variable) pairs, in program order.
    pub ahj_rules: Vec<(Symbol, Symbol)>,
}

fn classify_rule(rule: &Tgd, affected: &BTreeSet<Position>, invaded: &InvasionMap) -> RuleReport {
    let body = body_positions(rule);
    let head_vars: BTreeSet<&Symbol> = rule.head.iter().flat_map(|a| a.variables()).collect();
    let mut variables = Vec::new();
    for v in rule.body_variables() {
        let occ = &body[&v];
        let harmful = occ.iter().all(|(_, p)| affected.contains(p));
        variables.push(VariableReport {
            harmful,
            dangerous: harmful && head_vars.contains(&v),
            attacked_by: common_origins(invaded, occ.iter().map(|(_, p)| p)),
            atoms: occ.iter().map(|(a, _)| *a).collect(),
            name: v,
        });
    }

    let dangerous: Vec<&VariableReport> = variables.iter().filter(|v| v.dangerous).collect();
    let (ward, warded) = if dangerous.is_empty() {
        (None, true)
    } else {
        let ward = (0..rule.body.len()).find(|&ai| {
            dangerous.iter().all(|d| d.atoms.contains(&ai))
                && variables
                    .iter()
                    .filter(|v| v.atoms.contains(&ai) && v.atoms.len() > 1)
                    .all(|v| !v.harmful)
        });
        (ward, ward.is_some())
    };

    let joins_protected = variables
        .iter()
        .filter(|v| v.atoms.len() > 1)
        .all(VariableReport::is_protected);
    let exposed: Vec<&VariableReport> = variables
        .iter()
        .filter(|v| !v.is_protected() && head_vars.contains(&v.name))
        .collect();
    let mut pairs_ok = true;
    for (i, x) in exposed.iter().enumerate() {
        for y in &exposed[i + 1..] {
            let separate = x.atoms.iter().any(|a| y.atoms.iter().any(|b| a != b));
            if separate && !x.attacked_by.is_disjoint(&y.attacked_by) {
                pairs_ok = false;
            }
        }
    }

    let mut ahj = Vec::new();
    for v in variables.iter().filter(|v| v.harmful && v.atoms.len() > 1) {
        let occ = &body[&v.name];
        let flagged = occ.iter().enumerate().any(|(i, (a1, p1))| {
            occ[i + 1..].iter().any(|(a2, p2)| {
                a1 != a2 && {
                    let s1 = invaded.get(p1);
                    let s2 = invaded.get(p2);
                    matches!((s1, s2), (Some(s1), Some(s2)) if !s1.is_disjoint(s2))
                }
            })
        });
        if flagged {
            ahj.push(v.name.clone());
        }
    }

    RuleReport {
        rule: rule.id.clone(),
        variables,
        ward,
        warded,
        shy: joins_protected && pairs_ok,
        ahj,
    }
}

pub fn classify_program(program: &Program) -> FragmentReport {
    let affected = affected_positions(program);
    let invaded = invasion_map(program);
    let rules: Vec<RuleReport> = program
        .rules
        .iter()
        .map(|r| classify_rule(r, &affected, &invaded))
        .collect();
    let is_shy = rules.iter().all(|r| r.shy);
    let is_warded = rules.iter().all(|r| r.warded);
    let ahj_rules: Vec<(Symbol, Symbol)> = rules
        .iter()
        .flat_map(|r| r.ahj.iter().map(move |v| (r.rule.clone(), v.clone())))
        .collect();
    FragmentReport {
        is_protected: is_warded && ahj_rules.is_empty(),
        affected,
        invaded,
        rules,
        is_shy,
        is_warded,
        ahj_rules,
    }
}

pub fn is_shy(program: &Program) -> bool {
    classify_program(program).is_shy
}

fn list<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let parts: Vec<String> = items.into_iter().map(|t| t.to_string()).collect();
    format!("[{}]", parts.join(","))
}

impl FragmentReport {
    /// Rules with an attacked harmful join, deduplicated, in program order.
    pub fn ahj_rule_ids(&self) -> Vec<Symbol> {
        let mut out: Vec<Symbol> = Vec::new();
        for (r, _) in &self.ahj_rules {
            if !out.contains(r) {
                out.push(r.clone());
            }
        }
        out
    }

    pub fn summary_line(&self) -> String {
        format!(
            "warded={} shy={} protected={} ahj={}",
            self.is_warded,
            self.is_shy,
            self.is_protected,
            list(self.ahj_rule_ids())
        )
    }

    /// Line-oriented `key=value` rendering with a stable key order.
    pub fn to_machine(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "warded={}", self.is_warded);
        let _ = writeln!(s, "shy={}", self.is_shy);
        let _ = writeln!(s, "protected={}", self.is_protected);
        let _ = writeln!(s, "ahj={}", list(self.ahj_rule_ids()));
        let _ = writeln!(
            s,
            "ahj.joins={}",
            list(self.ahj_rules.iter().map(|(r, v)| format!("{r}:{v}")))
        );
        let _ = writeln!(s, "affected={}", list(&self.affected));
        for (pos, origins) in &self.invaded {
            let _ = writeln!(s, "invaded.{pos}={}", list(origins));
        }
        for r in &self.rules {
            let ward = r.ward.map_or_else(|| "none".to_string(), |w| (w + 1).to_string());
            let _ = writeln!(s, "rule.{}.warded={}", r.rule, r.warded);
            let _ = writeln!(s, "rule.{}.shy={}", r.rule, r.shy);
            let _ = writeln!(s, "rule.{}.ward={ward}", r.rule);
            for v in &r.variables {
                let _ = writeln!(
                    s,
                    "rule.{}.var.{}={},dangerous={},attacked_by={}",
                    r.rule,
                    v.name,
                    if v.harmful { "harmful" } else { "harmless" },
                    v.dangerous,
                    list(&v.attacked_by)
                );
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.summary_line());
        let _ = writeln!(s, "affected positions: {}", list(&self.affected));
        if self.invaded.is_empty() {
            let _ = writeln!(s, "invaded positions: none");
        } else {
            let _ = writeln!(s, "invaded positions:");
            for (pos, origins) in &self.invaded {
                let _ = writeln!(s, "  {pos} by {}", list(origins));
            }
        }
        for r in &self.rules {
            let mut tags = Vec::new();
            if !r.warded {
                tags.push("not warded".to_string());
            }
            if !r.shy {
                tags.push("not shy".to_string());
            }
            if let Some(w) = r.ward {
                tags.push(format!("ward=atom {}", w + 1));
            }
            if !r.ahj.is_empty() {
                tags.push(format!("attacked harmful join on {}", list(&r.ahj)));
            }
            let _ = writeln!(
                s,
                "rule {}: {}",
                r.rule,
                if tags.is_empty() { "ok".into() } else { tags.join("; ") }
            );
            for v in r.variables.iter().filter(|v| v.harmful) {
                let _ = writeln!(
                    s,
                    "  {} harmful{}{}",
                    v.name,
                    if v.dangerous { ", dangerous" } else { "" },
                    if v.is_protected() {
                        String::new()
                    } else {
                        format!(", attacked by {}", list(&v.attacked_by))
                    }
                );
            }
        }
        s
    }
}
