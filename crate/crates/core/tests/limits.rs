//! Known limits of the deterministic rule system. Immediate precedence
//! combined with reflexive closure edges can require a case split that the
//! rules never perform, so a few unsatisfiable stores normalize without a
//! clash. These tests pin the behaviour down so a change to it is noticed.

use precedence_logic::oracle::{brute_force_consistent, OracleBudget};
use precedence_logic::semantics::{canonical_model, satisfies_all};
use precedence_logic::{normalize, parse_program, Verdict};

const BUDGET: OracleBudget = OracleBudget { max_universe: 3, max_relation_bits: 32 };

const SPLIT_ON_SUCCESSOR: &str = "feature f, g; prec p;
    f(v0) : p+ : f(v2) . v0 = E p* : v2 . v1 = E f : v1 .
    v1 = p^-1 : v0 . v2 = E p* : v1 . v2 = f : v0 .";

const SPLIT_ON_SUBSET: &str = "feature f, g; prec p;
    v0 = E p* : v1 . v0 = g : v0 . v0 = p : v2 . v1 = E p* : v2 .
    v1 = g : v2 . v2 = f : v0 . v2 = g :>= f(v1) .";

fn assert_missed(text: &str) {
    let st = parse_program(text).unwrap();
    assert!(!brute_force_consistent(&st, BUDGET).unwrap());
    let Verdict::Consistent(nf) = normalize(&st).verdict else {
        panic!("the rules now find this clash; move it to the regular tests");
    };
    if let Ok((interp, assign)) = canonical_model(&nf) {
        assert!(!satisfies_all(&interp, &assign, &st));
    }
}

#[test]
fn unsatisfiable_store_without_clash_through_inverse_successor() {
    assert_missed(SPLIT_ON_SUCCESSOR);
}

#[test]
fn unsatisfiable_store_without_clash_through_subset() {
    assert_missed(SPLIT_ON_SUBSET);
}
