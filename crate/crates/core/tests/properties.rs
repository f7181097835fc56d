mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use precedence_logic::engine::{expand_first_daughter, is_normal, replay};
use precedence_logic::oracle::{brute_force_consistent, OracleBudget};
use precedence_logic::semantics::{
    canonical_model, evaluate, satisfies_all, valid_interpretation, Assignment, Interpretation,
};
use precedence_logic::{
    normalize, parse_program, print_store, ClosureKind, Constraint, ConstraintStore, Signature,
    Sort, Var, Verdict,
};
use proptest::prelude::*;

fn sig_fgp() -> Signature {
    signature(&["f", "g"], &["p"])
}

fn sig_fp() -> Signature {
    signature(&["f"], &["p"])
}

/// Constraint lists over up to `max_vars` variables drawn from every form.
fn constraint_list(
    sig: Signature,
    max_vars: usize,
    max_len: usize,
    forms: Forms,
) -> impl Strategy<Value = Vec<Constraint>> {
    (1..=max_vars).prop_flat_map(move |n| {
        let features: Vec<_> = sig.features().cloned().collect();
        let precs: Vec<_> = sig.precedences().cloned().collect();
        let pool = atoms(&var_names(n), &features, &precs, forms);
        prop::collection::vec(prop::sample::select(pool), 0..=max_len)
    })
}

fn arb_store(max_vars: usize, max_len: usize) -> impl Strategy<Value = ConstraintStore> {
    constraint_list(sig_fgp(), max_vars, max_len, ALL_FORMS).prop_map(|cs| store(&sig_fgp(), cs))
}

fn small_budget() -> OracleBudget {
    OracleBudget { max_universe: 3, max_relation_bits: 32 }
}

fn normal_form(st: &ConstraintStore) -> Option<ConstraintStore> {
    match normalize(st).verdict {
        Verdict::Consistent(nf) => Some(nf),
        Verdict::Clash(_) => None,
    }
}

fn closure_kind(st: &ConstraintStore, x: &Var, y: &Var) -> Option<ClosureKind> {
    let p = s("p");
    [ClosureKind::Plus, ClosureKind::Star]
        .into_iter()
        .find(|k| st.contains(&Constraint::Closure(x.clone(), p.clone(), *k, y.clone())))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn adding_again_changes_nothing(st in arb_store(4, 10)) {
        let mut again = st.clone();
        let cs: Vec<Constraint> = st.constraints().cloned().collect();
        for c in cs {
            again.add_constraint(c).unwrap();
        }
        prop_assert_eq!(again, st);
    }

    #[test]
    fn representatives_are_coherent(st in arb_store(5, 10)) {
        for v in st.all_variables() {
            let r = st.representative(&v);
            prop_assert_eq!(st.representative(&r), r.clone());
            prop_assert!(r <= v);
        }
        for c in st.constraints() {
            for v in c.vars() {
                prop_assert_eq!(&st.representative(v), v);
            }
        }
    }

    #[test]
    fn printing_round_trips(st in arb_store(5, 10)) {
        let text = print_store(&st);
        let back = parse_program(&text).unwrap();
        prop_assert_eq!(print_store(&back), text);
        prop_assert_eq!(back, st);
    }

    #[test]
    fn result_ignores_input_order(
        (cs, shuffled) in constraint_list(sig_fgp(), 5, 10, ALL_FORMS)
            .prop_flat_map(|cs| (Just(cs.clone()), Just(cs).prop_shuffle()))
    ) {
        let render = |cs: &[Constraint]| match normalize(&store(&sig_fgp(), cs.iter().cloned())).verdict {
            Verdict::Consistent(nf) => print_store(&nf),
            Verdict::Clash(w) => format!("clash {w:?}"),
        };
        prop_assert_eq!(render(&cs), render(&shuffled));
    }

    #[test]
    fn plus_is_never_weakened(st in arb_store(4, 10)) {
        let run = normalize(&st);
        let states = replay(&run).unwrap();
        for pair in states.windows(2) {
            for c in pair[0].constraints() {
                if let Constraint::Closure(x, p, ClosureKind::Plus, y) = c {
                    let weaker = Constraint::Closure(x.clone(), p.clone(), ClosureKind::Star, y.clone());
                    prop_assert!(!pair[1].contains(&weaker));
                }
            }
        }
    }

    #[test]
    fn replay_reproduces_the_result(st in arb_store(4, 10)) {
        let run = normalize(&st);
        let states = replay(&run).unwrap();
        prop_assert_eq!(states.len(), run.trace.len() + 1);
        if let Verdict::Consistent(nf) = &run.verdict {
            prop_assert_eq!(states.last().unwrap(), nf);
            prop_assert!(is_normal(nf));
            prop_assert!(normalize(nf).trace.is_empty());
        }
    }

    #[test]
    fn normal_forms_are_saturated(st in arb_store(5, 12)) {
        let Some(nf) = normal_form(&st) else { return Ok(()) };
        // the Plus graph is acyclic
        let mut edges: BTreeMap<Var, Vec<Var>> = BTreeMap::new();
        for c in nf.constraints() {
            if let Constraint::Closure(x, _, ClosureKind::Plus, y) = c {
                edges.entry(x.clone()).or_default().push(y.clone());
            }
        }
        for start in edges.keys() {
            let mut seen = BTreeSet::new();
            let mut stack = edges[start].clone();
            while let Some(v) = stack.pop() {
                prop_assert!(&v != start, "Plus cycle through {}", start);
                if seen.insert(v.clone()) {
                    stack.extend(edges.get(&v).cloned().unwrap_or_default());
                }
            }
        }
        for c in nf.constraints() {
            match c {
                Constraint::Subset(x, f, g, y) => {
                    let have = nf.succ_feature(x, f);
                    for z in nf.succ_feature(y, g) {
                        prop_assert!(have.contains(&z));
                    }
                }
                Constraint::DomPrec(f, x, _, k, g, y) => {
                    for x1 in nf.succ_feature(x, f) {
                        for y1 in nf.succ_feature(y, g) {
                            let ok = match (k, closure_kind(&nf, &x1, &y1)) {
                                (_, Some(ClosureKind::Plus)) => true,
                                (ClosureKind::Star, Some(ClosureKind::Star)) => true,
                                (ClosureKind::Star, None) => x1 == y1,
                                _ => false,
                            };
                            prop_assert!(ok, "{:?} not propagated to ({}, {})", c, x1, y1);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    #[test]
    fn reduced_successors_span_the_closure(st in arb_store(5, 12)) {
        let Some(nf) = normal_form(&st) else { return Ok(()) };
        let p = s("p");
        for (x, targets) in nf.closure_edges(&p) {
            let mut reach = BTreeSet::new();
            let mut stack = vec![x.clone()];
            while let Some(v) = stack.pop() {
                for w in nf.succ_reduced(&v, &p) {
                    if reach.insert(w.clone()) {
                        stack.push(w);
                    }
                }
            }
            for y in targets {
                prop_assert!(reach.contains(&y), "{} -> {} not spanned", x, y);
            }
        }
    }

    #[test]
    fn canonical_model_is_valid(st in arb_store(5, 12)) {
        let Some(nf) = normal_form(&st) else { return Ok(()) };
        let (interp, assign) = canonical_model(&nf).unwrap();
        prop_assert!(valid_interpretation(&interp));
        prop_assert!(satisfies_all(&interp, &assign, &nf));
        prop_assert!(satisfies_all(&interp, &assign, &st));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn star_is_plus_or_equal(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 0..8),
        a in 0usize..4,
        b in 0usize..4,
    ) {
        let mut interp = Interpretation::new(["0", "1", "2", "3"]);
        interp.set_relation(&s("p"), Sort::Precedence, pairs);
        let assign: Assignment = [(v("x"), a), (v("y"), b)].into_iter().collect();
        let star = Constraint::Closure(v("x"), s("p"), ClosureKind::Star, v("y"));
        let plus = Constraint::Closure(v("x"), s("p"), ClosureKind::Plus, v("y"));
        prop_assert_eq!(
            evaluate(&interp, &assign, &star),
            evaluate(&interp, &assign, &plus) || a == b
        );
    }

    #[test]
    fn oracle_is_monotone(
        (cs, extra) in constraint_list(sig_fp(), 3, 4, ALL_FORMS)
            .prop_flat_map(|cs| {
                let pool = atoms(&var_names(3), &[s("f")], &[s("p")], ALL_FORMS);
                (Just(cs), prop::sample::select(pool))
            })
    ) {
        let st = store(&sig_fp(), cs.clone());
        let bigger = store(&sig_fp(), cs.into_iter().chain([extra]));
        let before = brute_force_consistent(&st, small_budget()).unwrap();
        let after = brute_force_consistent(&bigger, small_budget()).unwrap();
        prop_assert!(before || !after);
    }

    #[test]
    fn first_daughter_translation_preserves_satisfiability(
        cs in constraint_list(sig_fp(), 3, 5, ALL_FORMS)
    ) {
        let st = store(&sig_fp(), cs);
        let expanded = expand_first_daughter(&st);
        prop_assert_eq!(
            brute_force_consistent(&st, small_budget()).unwrap(),
            brute_force_consistent(&expanded, small_budget()).unwrap()
        );
    }

    #[test]
    fn base_logic_verdict_matches_oracle(
        cs in constraint_list(sig_fp(), 3, 7, Forms { immediate: false, first_daughter: true })
    ) {
        let st = store(&sig_fp(), cs);
        prop_assert_eq!(
            normalize(&st).verdict.is_consistent(),
            brute_force_consistent(&st, small_budget()).unwrap(),
            "{}", print_store(&st)
        );
    }
}
