//! The streaming chase: a pull-based pipeline of rule scans wrapped by a
//! termination wrapper (firing condition plus fact-level freezing) and fed to
//! a query processor.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::classify_program;
use crate::chase::Routing;
use crate::firing::{FiringKind, FiringState, HeadCheck};
use crate::homomorphism::{apply, for_each_match, Mapping, MatchMode};
use crate::instance::Instance;
use crate::model::{Atom, Fact, Program, Provenance, Symbol, Term};
use crate::nulls::NullFactory;
use crate::query::Bcq;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScanKind {
    /// Reads database facts of one predicate.
    Source(Symbol),
    /// Evaluates the rule at this index of the program.
    Rule(usize),
    /// Feeds the query processor.
    Query,
}

#[derive(Clone, Debug)]
pub struct ScanInfo {
    pub kind: ScanKind,
    pub label: String,
    pub parents: Vec<usize>,
}

/// The compiled scan graph. Scan order: sources, rules in program order, the
/// query scan last.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub scans: Vec<ScanInfo>,
}

impl Pipeline {
    pub fn query_scan(&self) -> usize {
        self.scans.len() - 1
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.scans.iter().position(|s| s.label == label)
    }

    /// `(producer, consumer)` label pairs.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for s in &self.scans {
            for &p in &s.parents {
                out.push((self.scans[p].label.clone(), s.label.clone()));
            }
        }
        out
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index_of(from), self.index_of(to)) {
            (Some(f), Some(t)) => self.scans[t].parents.contains(&f),
            _ => false,
        }
    }

    /// Scans from which the query scan can pull, itself included.
    pub fn reachable_from_query(&self) -> Vec<bool> {
        let mut seen = vec![false; self.scans.len()];
        let mut stack = vec![self.query_scan()];
        while let Some(s) = stack.pop() {
            if std::mem::replace(&mut seen[s], true) {
                continue;
            }
            stack.extend(self.scans[s].parents.iter().copied());
        }
        seen
    }
}

/// Side tags keep the variables of the two atoms apart during unification.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum UTerm {
    Const(Term),
    Var(u8, Symbol),
}

/// Whether a fact produced by `head` can match `body`. Existential head
/// variables become fresh nulls, so they never equal a constant and two
/// distinct ones never coincide.
pub fn head_unifies(head: &Atom, existential: &[Symbol], body: &Atom) -> bool {
    if head.predicate != body.predicate || head.arity() != body.arity() {
        return false;
    }
    let lift = |side: u8, t: &Term| match t {
        Term::Variable(v) => UTerm::Var(side, v.clone()),
        other => UTerm::Const(other.clone()),
    };
    let nodes: Vec<(UTerm, UTerm)> = head
        .args
        .iter()
        .zip(&body.args)
        .map(|(h, b)| (lift(0, h), lift(1, b)))
        .collect();
    let mut ids: Vec<UTerm> = Vec::new();
    let id_of = |t: &UTerm, ids: &mut Vec<UTerm>| match ids.iter().position(|x| x == t) {
        Some(i) => i,
        None => {
            ids.push(t.clone());
            ids.len() - 1
        }
    };
    let pairs: Vec<(usize, usize)> = nodes
        .iter()
        .map(|(a, b)| (id_of(a, &mut ids), id_of(b, &mut ids)))
        .collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    for (a, b) in pairs {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let mut classes: BTreeMap<usize, (Option<&Term>, Option<&Symbol>)> = BTreeMap::new();
    for (i, t) in ids.iter().enumerate() {
        let root = find(&mut parent, i);
        let entry = classes.entry(root).or_default();
        match t {
            UTerm::Const(c) => match entry.0 {
                Some(prev) if prev != c => return false,
                _ => entry.0 = Some(c),
            },
            UTerm::Var(0, v) if existential.contains(v) => match entry.1 {
                Some(prev) if prev != v => return false,
                _ => entry.1 = Some(v),
            },
            UTerm::Var(..) => {}
        }
    }
    classes.values().all(|(c, e)| !(c.is_some() && e.is_some()))
}

/// Builds the scan graph for `program` over `d`. Without a query the query
/// scan consumes nothing and merely roots every rule scan, which turns the
/// run into a full materialization.
pub fn compile_pipeline(d: &Instance, program: &Program, q: Option<&Bcq>) -> Pipeline {
    let mut scans = Vec::new();
    let mut source_preds: Vec<(Symbol, usize)> = Vec::new();
    for f in d.iter() {
        if !source_preds.iter().any(|(p, _)| *p == f.atom.predicate) {
            source_preds.push((f.atom.predicate.clone(), f.atom.arity()));
        }
    }
    for (p, _) in &source_preds {
        scans.push(ScanInfo {
            kind: ScanKind::Source(p.clone()),
            label: format!("src:{p}"),
            parents: Vec::new(),
        });
    }
    let rule_base = scans.len();
    let consumers = |atoms: &[Atom]| -> Vec<usize> {
        let mut parents = Vec::new();
        for (si, (p, arity)) in source_preds.iter().enumerate() {
            if atoms.iter().any(|a| a.predicate == *p && a.arity() == *arity) {
                parents.push(si);
            }
        }
        for (ri, rule) in program.rules.iter().enumerate() {
            let feeds = rule
                .head
                .iter()
                .any(|h| atoms.iter().any(|b| head_unifies(h, &rule.existential, b)));
            if feeds {
                parents.push(rule_base + ri);
            }
        }
        parents
    };
    for rule in &program.rules {
        scans.push(ScanInfo {
            kind: ScanKind::Rule(scans.len() - rule_base),
            label: rule.id.to_string(),
            parents: consumers(&rule.body),
        });
    }
    let query_parents = match q {
        Some(q) => consumers(&q.atoms),
        None => (rule_base..rule_base + program.rules.len()).collect(),
    };
    scans.push(ScanInfo {
        kind: ScanKind::Query,
        label: "q".to_string(),
        parents: query_parents,
    });
    Pipeline { scans }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamConfig {
    pub firing: FiringKind,
    pub head_check: HeadCheck,
    pub routing: StreamRouting,
    /// Overrides the resumption bound derived from the query.
    pub max_res: Option<u32>,
    /// Also freeze and resubmit facts that were admitted, not only blocked
    /// ones.
    pub freeze_admitted: bool,
    pub paranoid_hash: bool,
    pub trace: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            firing: FiringKind::Iso,
            head_check: HeadCheck::PerAtom,
            routing: StreamRouting::DepthFirst,
            max_res: None,
            freeze_admitted: true,
            paranoid_hash: false,
            trace: false,
        }
    }
}

impl StreamConfig {
    pub fn new(firing: FiringKind) -> Self {
        StreamConfig {
            firing,
            ..StreamConfig::default()
        }
    }
}

/// Which scan performs the next read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StreamRouting {
    /// Demand travels from the query scan towards the sources and the
    /// deepest scan with unread input reads first; parents are visited in
    /// FIFO rotation.
    #[default]
    DepthFirst,
    /// Scans take turns in pipeline order.
    RoundRobin,
    /// A seeded choice among the scans with unread input.
    Random(u64),
}

impl From<Routing> for StreamRouting {
    fn from(r: Routing) -> Self {
        match r {
            Routing::RoundRobin => StreamRouting::RoundRobin,
            Routing::DepthFirst => StreamRouting::DepthFirst,
            Routing::Random(seed) => StreamRouting::Random(seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Fire,
    Admit,
    Block,
    Freeze,
    Answer,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Fire => "FIRE",
            EventKind::Admit => "ADMIT",
            EventKind::Block => "BLOCK",
            EventKind::Freeze => "FREEZE",
            EventKind::Answer => "ANSWER",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub rule: String,
    pub fact: String,
    pub res_it: u32,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} rule={} fact={} resIt={}",
            self.kind, self.rule, self.fact, self.res_it
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub next_calls: u64,
    pub get_calls: u64,
    /// Applicable homomorphisms fired.
    pub fires: u64,
    /// Wrapper evaluations: the initial check plus one per freeze retry.
    pub candidates: u64,
    pub admissions: u64,
    pub blocks: u64,
    pub freezes: u64,
    /// Admitted facts per resumption iteration.
    pub res_histogram: BTreeMap<u32, u64>,
    pub answered_early: bool,
}

#[derive(Clone, Debug)]
pub struct StreamOutcome {
    pub answer: bool,
    pub max_res: u32,
    pub stats: StreamStats,
    pub trace: Vec<TraceEvent>,
    /// Facts matched by the query when the answer is positive.
    pub witness: Vec<Fact>,
    /// Database facts followed by every admitted fact, in admission order.
    pub facts: Instance,
    pub warnings: Vec<String>,
    pub pipeline: Pipeline,
}

struct ScanState {
    cursors: Vec<usize>,
    rotation: usize,
    seen: Instance,
    output: Vec<usize>,
}

struct Session<'a> {
    program: &'a Program,
    query: Option<&'a Bcq>,
    cfg: &'a StreamConfig,
    pipeline: Pipeline,
    reachable: Vec<bool>,
    states: Vec<ScanState>,
    arena: Instance,
    firing: FiringState,
    nulls: NullFactory,
    max_res: u32,
    stats: StreamStats,
    trace: Vec<TraceEvent>,
    witness: Option<Vec<Fact>>,
    rr_cursor: usize,
    rng: Option<ChaCha8Rng>,
}

impl Session<'_> {
    fn event(&mut self, kind: EventKind, rule: &str, fact: String, res_it: u32) {
        if self.cfg.trace {
            self.trace.push(TraceEvent {
                kind,
                rule: rule.to_string(),
                fact,
                res_it,
            });
        }
    }

    /// The first parent slot (in rotation order) with a fact unread by `s`.
    fn unread_slot(&self, s: usize) -> Option<usize> {
        let info = &self.pipeline.scans[s];
        if matches!(info.kind, ScanKind::Source(_)) || (info.kind == ScanKind::Query && self.query.is_none()) {
            return None;
        }
        let n = info.parents.len();
        let st = &self.states[s];
        (0..n)
            .map(|k| (st.rotation + k) % n)
            .find(|&slot| st.cursors[slot] < self.states[info.parents[slot]].output.len())
    }

    /// Post-order demand propagation: parents first, then `s` itself.
    fn visit(&mut self, s: usize, visited: &mut [bool]) -> bool {
        visited[s] = true;
        self.stats.next_calls += 1;
        let parents = self.pipeline.scans[s].parents.clone();
        let n = parents.len();
        let rot = self.states[s].rotation;
        for k in 0..n {
            let p = parents[(rot + k) % n];
            if !visited[p] && self.visit(p, visited) {
                return true;
            }
        }
        match self.unread_slot(s) {
            Some(slot) => {
                self.read(s, slot);
                true
            }
            None => false,
        }
    }

    /// One `next`/`get` round trip. Returns false when no scan can read.
    fn step(&mut self) -> bool {
        match self.cfg.routing {
            StreamRouting::DepthFirst => {
                let mut visited = vec![false; self.pipeline.scans.len()];
                let root = self.pipeline.query_scan();
                self.visit(root, &mut visited)
            }
            StreamRouting::RoundRobin => {
                let n = self.pipeline.scans.len();
                for k in 0..n {
                    let s = (self.rr_cursor + k) % n;
                    self.stats.next_calls += 1;
                    if !self.reachable[s] {
                        continue;
                    }
                    if let Some(slot) = self.unread_slot(s) {
                        self.rr_cursor = (s + 1) % n;
                        self.read(s, slot);
                        return true;
                    }
                }
                false
            }
            StreamRouting::Random(_) => {
                let ready: Vec<(usize, usize)> = (0..self.pipeline.scans.len())
                    .filter(|&s| self.reachable[s])
                    .filter_map(|s| self.unread_slot(s).map(|slot| (s, slot)))
                    .collect();
                self.stats.next_calls += ready.len() as u64;
                if ready.is_empty() {
                    return false;
                }
                let rng = self.rng.as_mut().expect("random routing has a generator");
                let (s, slot) = ready[rng.gen_range(0..ready.len())];
                self.read(s, slot);
                true
            }
        }
    }

    fn read(&mut self, s: usize, slot: usize) {
        self.stats.get_calls += 1;
        let parent = self.pipeline.scans[s].parents[slot];
        let n = self.pipeline.scans[s].parents.len();
        let fid = self.states[parent].output[self.states[s].cursors[slot]];
        let st = &mut self.states[s];
        st.cursors[slot] += 1;
        st.rotation = (slot + 1) % n;
        let fact = self.arena.get(fid).clone();
        let Some(idx) = st.seen.insert(fact) else { return };
        match self.pipeline.scans[s].kind.clone() {
            ScanKind::Rule(r) => self.fire_all(s, r, idx),
            ScanKind::Query => self.evaluate_query(s, idx),
            ScanKind::Source(_) => {}
        }
    }

    /// Every body match of rule `r` that uses the fact just read at `idx`.
    fn matches_with(&self, seen: &Instance, body: &[Atom], idx: usize) -> Vec<(Mapping, Vec<usize>)> {
        let mut out = Vec::new();
        let pred = &seen.get(idx).atom.predicate;
        for pin in 0..body.len() {
            if body[pin].predicate != *pred {
                continue;
            }
            let window = |j: usize| {
                if j < pin {
                    0..idx
                } else if j == pin {
                    idx..idx + 1
                } else {
                    0..idx + 1
                }
            };
            let _ = for_each_match(
                body,
                seen,
                &Mapping::new(),
                &window,
                MatchMode::Homomorphism,
                &mut |m, chosen| {
                    out.push((m.variables_only(), chosen.to_vec()));
                    ControlFlow::Continue(())
                },
            );
        }
        out
    }

    fn fire_all(&mut self, s: usize, r: usize, idx: usize) {
        let rule = &self.program.rules[r];
        let triggers = self.matches_with(&self.states[s].seen, &rule.body, idx);
        for (mut m, chosen) in triggers {
            let rule = &self.program.rules[r];
            self.stats.fires += 1;
            let seen = &self.states[s].seen;
            let parents: Vec<Atom> = chosen.iter().map(|&i| seen.get(i).atom.clone()).collect();
            let res_it = chosen.iter().map(|&i| seen.get(i).res_it).max().unwrap_or(0);
            let frontier: Vec<Term> = rule
                .frontier
                .iter()
                .map(|v| m.image(&Term::Variable(v.clone())))
                .collect();
            for z in &rule.existential {
                let null = self.nulls.fresh(&rule.id, z, &frontier);
                m.bind(Term::Variable(z.clone()), null);
            }
            let head = apply(&m, &rule.head, true).expect("head variables are bound");
            let label = rule.id.to_string();
            for a in &head {
                self.event(EventKind::Fire, &label, a.to_string(), res_it);
            }
            let provenance = Provenance {
                rule: rule.id.clone(),
                parents,
                freezes: 0,
            };
            if self.cfg.head_check == HeadCheck::Conjunction && self.cfg.firing == FiringKind::Hom {
                self.wrap_conjunction(s, &label, head, res_it, provenance);
            } else {
                for a in head {
                    self.wrap_atom(s, &label, a, res_it, provenance.clone());
                }
            }
        }
    }

    fn may_freeze(&self, atoms: &[Atom], res_it: u32, admitted: bool) -> bool {
        (self.cfg.freeze_admitted || !admitted)
            && atoms.iter().any(Atom::has_unfrozen_nulls)
            && res_it + 1 < self.max_res
    }

    fn admit(&mut self, s: usize, label: &str, fact: Fact) {
        let text = fact.atom.to_string();
        let res_it = fact.res_it;
        if let Some(fid) = self.arena.insert(fact) {
            self.states[s].output.push(fid);
            self.stats.admissions += 1;
            *self.stats.res_histogram.entry(res_it).or_default() += 1;
            self.event(EventKind::Admit, label, text, res_it);
        }
    }

    /// The termination wrapper for one head fact.
    fn wrap_atom(&mut self, s: usize, label: &str, mut atom: Atom, mut res_it: u32, mut prov: Provenance) {
        loop {
            self.stats.candidates += 1;
            let pass = self.firing.check_and_admit(&atom);
            if pass {
                self.admit(s, label, Fact::derived(atom.clone(), res_it, prov.clone()));
            } else {
                self.stats.blocks += 1;
                self.event(EventKind::Block, label, atom.to_string(), res_it);
            }
            if !self.may_freeze(std::slice::from_ref(&atom), res_it, pass) {
                return;
            }
            self.stats.freezes += 1;
            self.event(EventKind::Freeze, label, atom.to_string(), res_it + 1);
            atom = atom.freeze();
            res_it += 1;
            prov.freezes += 1;
        }
    }

    fn wrap_conjunction(&mut self, s: usize, label: &str, mut head: Vec<Atom>, mut res_it: u32, mut prov: Provenance) {
        loop {
            self.stats.candidates += 1;
            let FiringState::Hom(h) = &mut self.firing else {
                unreachable!("conjunction checks use the homomorphism condition")
            };
            let pass = h.check_conjunction(&head);
            if pass {
                for a in &head {
                    h.admit(a);
                }
                for a in &head {
                    self.admit(s, label, Fact::derived(a.clone(), res_it, prov.clone()));
                }
            } else {
                self.stats.blocks += 1;
                let text: Vec<String> = head.iter().map(Atom::to_string).collect();
                self.event(EventKind::Block, label, text.join(";"), res_it);
            }
            if !self.may_freeze(&head, res_it, pass) {
                return;
            }
            self.stats.freezes += 1;
            let text: Vec<String> = head.iter().map(Atom::to_string).collect();
            self.event(EventKind::Freeze, label, text.join(";"), res_it + 1);
            head = head.iter().map(Atom::freeze).collect();
            res_it += 1;
            prov.freezes += 1;
        }
    }

    fn evaluate_query(&mut self, s: usize, idx: usize) {
        let Some(q) = self.query else { return };
        let seen = &self.states[s].seen;
        let found = self.matches_with(seen, &q.atoms, idx).into_iter().next();
        if let Some((_, chosen)) = found {
            let witness: Vec<Fact> = chosen.iter().map(|&i| seen.get(i).clone()).collect();
            let text: Vec<String> = witness.iter().map(|f| f.atom.to_string()).collect();
            let res_it = witness.iter().map(|f| f.res_it).max().unwrap_or(0);
            self.event(EventKind::Answer, "q", text.join(";"), res_it);
            self.witness = Some(witness);
        }
    }
}

/// Runs the streaming chase. With `q = None` the pipeline is drained
/// completely and the answer is false.
pub fn chase_s(d: &Instance, program: &Program, q: Option<&Bcq>, cfg: &StreamConfig) -> StreamOutcome {
    let mut warnings = Vec::new();
    let report = classify_program(program);
    if !report.is_protected {
        let mut msg = String::from(
            "program is not Protected; streaming answers are only guaranteed for Shy or Protected programs",
        );
        let ahj = report.ahj_rule_ids();
        if !ahj.is_empty() {
            let ids: Vec<String> = ahj.iter().map(ToString::to_string).collect();
            msg.push_str(&format!(" (attacked harmful joins in {})", ids.join(", ")));
        }
        warnings.push(msg);
    }
    let max_res = cfg.max_res.unwrap_or_else(|| q.map_or(1, Bcq::max_res));
    let pipeline = compile_pipeline(d, program, q);
    let reachable = pipeline.reachable_from_query();

    let mut arena = Instance::new();
    let mut firing = FiringState::new(cfg.firing, cfg.paranoid_hash);
    let mut states: Vec<ScanState> = pipeline
        .scans
        .iter()
        .map(|s| ScanState {
            cursors: vec![0; s.parents.len()],
            rotation: 0,
            seen: Instance::new(),
            output: Vec::new(),
        })
        .collect();
    for f in d.iter() {
        firing.preload(&f.atom);
        if let Some(fid) = arena.insert(f.clone()) {
            let src = pipeline
                .scans
                .iter()
                .position(|s| s.kind == ScanKind::Source(f.atom.predicate.clone()))
                .expect("a source scan exists for every database predicate");
            states[src].output.push(fid);
        }
    }

    let mut session = Session {
        program,
        query: q,
        cfg,
        pipeline,
        reachable,
        states,
        arena,
        firing,
        nulls: NullFactory::new(),
        max_res,
        stats: StreamStats::default(),
        trace: Vec::new(),
        witness: None,
        rr_cursor: 0,
        rng: match cfg.routing {
            StreamRouting::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        },
    };
    while session.witness.is_none() && session.step() {}
    let answer = session.witness.is_some();
    session.stats.answered_early = answer;
    StreamOutcome {
        answer,
        max_res,
        stats: session.stats,
        trace: session.trace,
        witness: session.witness.unwrap_or_default(),
        facts: session.arena,
        warnings,
        pipeline: session.pipeline,
    }
}
