//! Engine primitives checked against exhaustive brute-force oracles.

mod common;

use proptest::prelude::*;

use common::*;
use streamlog::analysis::{affected_positions, invasion_map};
use streamlog::firing::{canonicalize, AfForest, CanonicalHashState, HomomorphismCheckS, NullMap};
use streamlog::homomorphism::{embeds, is_isomorphic_facts};
use streamlog::{bcq_entails, parse_program, Atom, Fact, Instance, Term};

fn pool() -> Vec<Term> {
    let mut t = term_pool(2, 3, 1);
    t.extend([Term::null(8), Term::null(9)]);
    t
}

fn atom_strategy(arity: usize) -> impl Strategy<Value = Atom> {
    prop::collection::vec(0..pool().len(), arity).prop_map(|idx| {
        let p = pool();
        Atom::new("p", idx.into_iter().map(|i| p[i].clone()).collect())
    })
}

fn instance_strategy(max: usize) -> impl Strategy<Value = Instance> {
    (1usize..=3)
        .prop_flat_map(move |arity| prop::collection::vec(atom_strategy(arity), 0..=max).prop_map(Instance::from_atoms))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tree_matches_brute_force(
        (stored, probe) in (1usize..=4).prop_flat_map(|a| (prop::collection::vec(atom_strategy(a), 1..8), atom_strategy(a)))
    ) {
        let mut forest = AfForest::new();
        let mut check = HomomorphismCheckS::new();
        for a in &stored {
            forest.insert(a).unwrap();
            check.admit(a);
        }
        let want = brute_hom_into(&probe, &stored);
        prop_assert_eq!(forest.hom_exists(std::slice::from_ref(&probe), &mut NullMap::new()), want);
        prop_assert_eq!(check.check(&probe), !want);
    }

    #[test]
    fn canonical_form_decides_isomorphism(
        (a, b) in (1usize..=4).prop_flat_map(|n| (atom_strategy(n), atom_strategy(n)))
    ) {
        let want = brute_iso_atoms(&a, &b);
        prop_assert_eq!(canonicalize(&a) == canonicalize(&b), want);
        prop_assert_eq!(is_isomorphic_facts(&a, &b), want);
        prop_assert_eq!(is_isomorphic_facts(&b, &a), want);
        let ca = canonicalize(&a);
        prop_assert!(brute_iso_atoms(&ca, &a));
        prop_assert_eq!(canonicalize(&ca), ca);
    }

    #[test]
    fn hash_state_blocks_exactly_isomorphic_copies(
        atoms in (1usize..=3).prop_flat_map(|n| prop::collection::vec(atom_strategy(n), 1..10)),
        paranoid in any::<bool>(),
    ) {
        let mut state = CanonicalHashState::new(paranoid);
        let mut kept: Vec<Atom> = Vec::new();
        for a in &atoms {
            let fresh = !kept.iter().any(|k| brute_iso_atoms(k, a));
            prop_assert_eq!(state.check(a), fresh);
            if fresh {
                kept.push(a.clone());
            }
        }
        prop_assert_eq!(state.len(), kept.len());
    }

    #[test]
    fn embedding_matches_brute_force(src in instance_strategy(3), dst in instance_strategy(4)) {
        prop_assert_eq!(embeds(&src, &dst), brute_embeds(&src, &dst));
    }

    #[test]
    fn embedding_is_reflexive(i in instance_strategy(5)) {
        prop_assert!(embeds(&i, &i));
    }

    #[test]
    fn query_evaluation_matches_brute_force(seed in any::<u64>()) {
        let shape = Shape::default();
        let mut rng = rng(seed);
        let p = random_program(&mut rng, &shape);
        let mut d = random_database(&mut rng, &p, &shape);
        let nulls = [Term::null(1), Term::null(2), Term::frozen_null(3)];
        let extra: Vec<Fact> = d.iter().take(4).map(|f| {
            let mut a = f.atom.clone();
            a.args[0] = nulls[(seed % 3) as usize].clone();
            Fact::new(a)
        }).collect();
        d.extend(extra);
        let q = random_bcq(&mut rng, &p, Some(&d), &shape);
        prop_assert_eq!(bcq_entails(&d, &q), brute_entails(&d, &q));
    }

    #[test]
    fn fixpoints_match_naive_oracle(seed in any::<u64>()) {
        let shape = Shape { max_arity: 3, ..Shape::default() };
        let p = random_program(&mut rng(seed), &shape);
        prop_assert_eq!(affected_positions(&p), oracle_affected(&p));
        prop_assert_eq!(invasion_map(&p), oracle_invasion(&p));
    }

    #[test]
    fn invaded_positions_are_affected(seed in any::<u64>()) {
        let p = random_program(&mut rng(seed), &Shape::default());
        let affected = affected_positions(&p);
        for pos in invasion_map(&p).keys() {
            prop_assert!(affected.contains(pos), "{} invaded but not affected", pos);
        }
    }

    #[test]
    fn printed_programs_parse_back(seed in any::<u64>()) {
        let p = random_program(&mut rng(seed), &Shape::default());
        let text: String = p.rules.iter().map(|r| format!("{r}\n")).collect();
        let back = parse_program(&text).unwrap();
        prop_assert_eq!(back, p);
    }
}
