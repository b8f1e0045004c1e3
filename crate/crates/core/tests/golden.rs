//! Frozen expected values on the running example. These pin observable
//! behavior so regressions in ordering, stats or report formatting show up.

mod common;

use common::*;
use streamlog::stream::{compile_pipeline, EventKind};
use streamlog::{
    bcq_entails, chase_batch, chase_resumed, chase_s, classify_program, parse_facts, parse_program, parse_query,
    ChaseConfig, FiringKind, Instance, Program, StreamConfig, Variant,
};

fn running() -> (Program, Instance) {
    (
        parse_program(RUNNING_PROGRAM).unwrap(),
        parse_facts(RUNNING_FACTS).unwrap(),
    )
}

#[test]
fn batch_sizes_and_stats() {
    let (p, d) = running();
    for v in [Variant::Parsimonious, Variant::Isomorphic] {
        let res = chase_batch(&d, &p, &ChaseConfig::new(v)).unwrap();
        assert_eq!(res.instance.len(), 7, "{v}");
        assert_eq!(
            (res.stats.triggers, res.stats.admitted, res.stats.blocked),
            (7, 4, 5),
            "{v}"
        );
    }
    let sizes = |v, r| {
        chase_resumed(&d, &p, r, &ChaseConfig::new(v))
            .unwrap()
            .stats
            .round_sizes
    };
    assert_eq!(sizes(Variant::Parsimonious, 2), vec![3, 7, 10]);
    assert_eq!(sizes(Variant::Parsimonious, 3), vec![3, 7, 10, 10]);
    assert_eq!(sizes(Variant::Isomorphic, 2), vec![3, 7, 12]);
    assert_eq!(sizes(Variant::Isomorphic, 3), vec![3, 7, 12, 12]);
}

#[test]
fn oblivious_chase_saturates_with_functional_nulls() {
    let (p, d) = running();
    let res = chase_batch(&d, &p, &ChaseConfig::new(Variant::Oblivious).with_budget(1000)).unwrap();
    assert!(!res.truncated);
    assert_eq!((res.instance.len(), res.stats.triggers), (17, 28));
    let cut = chase_batch(&d, &p, &ChaseConfig::new(Variant::Oblivious).with_budget(20)).unwrap();
    assert!(cut.truncated);
    assert_eq!(cut.stats.triggers, 20);
}

#[test]
fn resumption_two_rounds_regains_completeness() {
    let (p, d) = running();
    let conj = parse_query("knows(alice,X), knows(bob,X)").unwrap();
    for v in [Variant::Parsimonious, Variant::Isomorphic] {
        let two = chase_resumed(&d, &p, 2, &ChaseConfig::new(v)).unwrap();
        assert!(bcq_entails(&two.instance, &conj), "{v}");
        assert!(
            bcq_entails(&two.instance, &parse_query("knows(alice,bob)").unwrap()),
            "{v}"
        );
    }
}

#[test]
fn stream_stats_are_pinned() {
    let (p, d) = running();
    let q = parse_query("? :- knows(alice,X), knows(bob,X).").unwrap();
    for firing in [FiringKind::Hom, FiringKind::Iso] {
        let lit = chase_s(&d, &p, Some(&q), &StreamConfig::new(firing));
        let s = &lit.stats;
        assert!(lit.answer);
        assert_eq!(
            (s.get_calls, s.fires, s.candidates, s.admissions, s.blocks, s.freezes),
            (24, 20, 29, 11, 18, 5),
            "{firing}"
        );
        assert_eq!(
            s.res_histogram.iter().map(|(k, v)| (*k, *v)).collect::<Vec<_>>(),
            vec![(0, 3), (1, 8)]
        );

        let blocked_only = chase_s(
            &d,
            &p,
            Some(&q),
            &StreamConfig {
                freeze_admitted: false,
                ..StreamConfig::new(firing)
            },
        );
        let s = &blocked_only.stats;
        assert!(blocked_only.answer);
        assert_eq!(
            (s.get_calls, s.fires, s.candidates, s.admissions, s.blocks, s.freezes),
            (20, 15, 22, 9, 13, 3),
            "{firing}"
        );
    }
}

#[test]
fn running_example_event_order() {
    let (p, d) = running();
    let q = parse_query("? :- knows(alice,X), knows(bob,X).").unwrap();
    let cfg = StreamConfig {
        trace: true,
        ..StreamConfig::new(FiringKind::Iso)
    };
    let out = chase_s(&d, &p, Some(&q), &cfg);
    let lines: Vec<String> = out
        .trace
        .iter()
        .filter(|e| e.kind != EventKind::Fire)
        .map(ToString::to_string)
        .collect();
    assert_eq!(
        &lines[..8],
        [
            "ADMIT rule=alpha fact=worksFor(alice,_:n1) resIt=0",
            "FREEZE rule=alpha fact=worksFor(alice,_:n1) resIt=1",
            "ADMIT rule=alpha fact=worksFor(alice,_:f1) resIt=1",
            "ADMIT rule=alpha fact=worksFor(bob,_:n2) resIt=0",
            "FREEZE rule=alpha fact=worksFor(bob,_:n2) resIt=1",
            "ADMIT rule=alpha fact=worksFor(bob,_:f2) resIt=1",
            "BLOCK rule=beta fact=worksFor(bob,_:n1) resIt=0",
            "FREEZE rule=beta fact=worksFor(bob,_:n1) resIt=1",
        ]
    );
    assert_eq!(
        lines.last().unwrap(),
        "ANSWER rule=q fact=knows(alice,bob);knows(bob,bob) resIt=1"
    );
}

#[test]
fn classification_machine_output() {
    let (p, _) = running();
    let expected = "\
warded=true
shy=false
protected=false
ahj=[gamma]
ahj.joins=[gamma:S]
affected=[worksFor[2]]
invaded.worksFor[2]=[(alpha,S),(delta,S)]
rule.alpha.warded=true
rule.alpha.shy=true
rule.alpha.ward=none
rule.alpha.var.X=harmless,dangerous=false,attacked_by=[]
rule.beta.warded=true
rule.beta.shy=true
rule.beta.ward=2
rule.beta.var.X=harmless,dangerous=false,attacked_by=[]
rule.beta.var.Y=harmless,dangerous=false,attacked_by=[]
rule.beta.var.S=harmful,dangerous=true,attacked_by=[(alpha,S),(delta,S)]
rule.gamma.warded=true
rule.gamma.shy=false
rule.gamma.ward=none
rule.gamma.var.X=harmless,dangerous=false,attacked_by=[]
rule.gamma.var.S=harmful,dangerous=false,attacked_by=[(alpha,S),(delta,S)]
rule.gamma.var.Y=harmless,dangerous=false,attacked_by=[]
rule.delta.warded=true
rule.delta.shy=true
rule.delta.ward=none
rule.delta.var.X=harmless,dangerous=false,attacked_by=[]
rule.delta.var.Y=harmless,dangerous=false,attacked_by=[]
";
    assert_eq!(classify_program(&p).to_machine(), expected);
}

#[test]
fn pipeline_edges() {
    let (p, d) = running();
    let q = parse_query("? :- knows(alice,X), knows(bob,X).").unwrap();
    let edges: Vec<String> = compile_pipeline(&d, &p, Some(&q))
        .edges()
        .into_iter()
        .map(|(a, b)| format!("{a}->{b}"))
        .collect();
    assert_eq!(
        edges,
        [
            "src:employee->alpha",
            "src:hasBoss->beta",
            "alpha->beta",
            "beta->beta",
            "delta->beta",
            "alpha->gamma",
            "beta->gamma",
            "delta->gamma",
            "gamma->delta",
            "gamma->q",
        ]
    );
}
