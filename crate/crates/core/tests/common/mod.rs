#![allow(dead_code)]

use precedence_logic::semantics::{evaluate, Assignment, Interpretation};
use precedence_logic::{ClosureKind, Constraint, ConstraintStore, Signature, Sort, Sym, Var};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn v(name: &str) -> Var {
    Var::new(name)
}

pub fn s(name: &str) -> Sym {
    Sym::new(name)
}

pub fn signature(features: &[&str], precs: &[&str]) -> Signature {
    Signature::declare(features.iter().copied(), precs.iter().copied()).unwrap()
}

pub fn store(sig: &Signature, cs: impl IntoIterator<Item = Constraint>) -> ConstraintStore {
    let mut st = ConstraintStore::new(sig.clone());
    for c in cs {
        st.add_constraint(c).unwrap();
    }
    st
}

/// Which constraint forms a generator may produce.
#[derive(Clone, Copy)]
pub struct Forms {
    /// `x = p:y`, `x = p^-1:y` and direct membership `x = E p : y`.
    pub immediate: bool,
    pub first_daughter: bool,
}

pub const ALL_FORMS: Forms = Forms {
    immediate: true,
    first_daughter: true,
};

/// Every constraint over the given variables and symbols, excluding
/// reflexive and mirrored equations.
pub fn atoms(vars: &[Var], features: &[Sym], precs: &[Sym], forms: Forms) -> Vec<Constraint> {
    use Constraint::*;
    let mut out = Vec::new();
    for (i, x) in vars.iter().enumerate() {
        for y in &vars[i + 1..] {
            out.push(Eq(x.clone(), y.clone()));
        }
    }
    for x in vars {
        for y in vars {
            for f in features {
                out.push(Feature(x.clone(), f.clone(), y.clone()));
                out.push(Member(x.clone(), f.clone(), y.clone()));
                for g in features {
                    out.push(Subset(x.clone(), f.clone(), g.clone(), y.clone()));
                }
            }
            for p in precs {
                for k in [ClosureKind::Plus, ClosureKind::Star] {
                    out.push(Closure(x.clone(), p.clone(), k, y.clone()));
                    for f in features {
                        for g in features {
                            out.push(DomPrec(f.clone(), x.clone(), p.clone(), k, g.clone(), y.clone()));
                        }
                    }
                }
                if forms.immediate {
                    out.push(Member(x.clone(), p.clone(), y.clone()));
                    out.push(ImmPrec(x.clone(), p.clone(), y.clone()));
                    out.push(InvImmPrec(x.clone(), p.clone(), y.clone()));
                }
                if forms.first_daughter {
                    for f in features {
                        out.push(FirstDaughter(x.clone(), f.clone(), p.clone(), y.clone()));
                    }
                }
            }
        }
    }
    out
}

pub fn var_names(n: usize) -> Vec<Var> {
    (0..n).map(|i| Var::new(&format!("v{i}"))).collect()
}

/// A store of `len` constraints drawn uniformly from the atoms over `nvars`
/// variables.
pub fn random_store(
    rng: &mut impl Rng,
    sig: &Signature,
    nvars: usize,
    len: usize,
    forms: Forms,
) -> ConstraintStore {
    let features: Vec<Sym> = sig.features().cloned().collect();
    let precs: Vec<Sym> = sig.precedences().cloned().collect();
    let pool = atoms(&var_names(nvars), &features, &precs, forms);
    store(sig, (0..len).map(|_| pool.choose(rng).unwrap().clone()))
}

/// A random store with a bias towards consistency: closure edges point
/// forward in a hidden variable order.
pub fn random_acyclic_store(
    rng: &mut impl Rng,
    sig: &Signature,
    nvars: usize,
    len: usize,
    forms: Forms,
) -> ConstraintStore {
    let features: Vec<Sym> = sig.features().cloned().collect();
    let precs: Vec<Sym> = sig.precedences().cloned().collect();
    let vars = var_names(nvars);
    let pool: Vec<Constraint> = atoms(&vars, &features, &precs, forms)
        .into_iter()
        .filter(|c| match c {
            Constraint::Closure(x, _, ClosureKind::Plus, y)
            | Constraint::DomPrec(_, x, _, ClosureKind::Plus, _, y) => x < y,
            Constraint::Closure(x, _, _, y)
            | Constraint::DomPrec(_, x, _, _, _, y)
            | Constraint::ImmPrec(x, _, y)
            | Constraint::FirstDaughter(x, _, _, y) => x <= y,
            Constraint::Member(x, q, y) if precs.contains(q) => x < y,
            Constraint::InvImmPrec(x, _, y) => y < x,
            Constraint::Eq(..) => false,
            _ => true,
        })
        .collect();
    store(sig, (0..len).map(|_| pool.choose(rng).unwrap().clone()))
}

/// A store over many variables in which every constraint relates variables
/// at most `window` apart, so long precedence chains form and saturation
/// has real work to do. Closure edges point forward.
pub fn random_chain_store(
    rng: &mut impl Rng,
    sig: &Signature,
    nvars: usize,
    len: usize,
    window: usize,
    forms: Forms,
) -> ConstraintStore {
    let features: Vec<Sym> = sig.features().cloned().collect();
    let precs: Vec<Sym> = sig.precedences().cloned().collect();
    let vars = var_names(nvars);
    let mut cs = Vec::with_capacity(len);
    while cs.len() < len {
        let i = rng.gen_range(0..nvars);
        let j = (i + rng.gen_range(0..=window)).min(nvars - 1);
        if i != j && rng.gen_bool(0.5) {
            let p = precs.choose(rng).unwrap().clone();
            let k = if rng.gen_bool(0.5) { ClosureKind::Plus } else { ClosureKind::Star };
            cs.push(Constraint::Closure(vars[i].clone(), p, k, vars[j].clone()));
            continue;
        }
        let local = atoms(&[vars[i].clone(), vars[j].clone()], &features, &precs, forms);
        let c = local.choose(rng).unwrap().clone();
        let forward = match &c {
            Constraint::Closure(x, _, ClosureKind::Plus, y)
            | Constraint::DomPrec(_, x, _, ClosureKind::Plus, _, y) => x == &vars[i] && x != y,
            Constraint::Closure(x, _, _, y)
            | Constraint::DomPrec(_, x, _, _, _, y)
            | Constraint::ImmPrec(x, _, y)
            | Constraint::FirstDaughter(x, _, _, y) => x == &vars[i] || x == y,
            Constraint::Member(x, q, y) if precs.contains(q) => x == &vars[i] && x != y,
            Constraint::InvImmPrec(x, _, y) => x == &vars[j] && x != y,
            Constraint::Eq(..) => false,
            _ => true,
        };
        if forward {
            cs.push(c);
        }
    }
    store(sig, cs)
}

/// A store that holds in a hidden model: variable `vi` denotes element `i`,
/// every precedence relates `i` to `i + 1`, and each feature maps an element
/// to a few nearby elements. Constraints relate variables at most `window`
/// apart, so the store is consistent and its closures are long.
pub fn planted_store(
    rng: &mut impl Rng,
    sig: &Signature,
    nvars: usize,
    len: usize,
    window: usize,
    forms: Forms,
) -> ConstraintStore {
    let vars = var_names(nvars);
    let mut model = Interpretation::new(vars.iter().map(|v| v.to_string()));
    for p in sig.precedences() {
        model.set_relation(p, Sort::Precedence, (1..nvars).map(|i| (i - 1, i)));
    }
    for f in sig.features() {
        let mut pairs = Vec::new();
        for i in 0..nvars {
            let count = [0, 1, 1, 2, 3][rng.gen_range(0..5)];
            for _ in 0..count {
                pairs.push((i, (i + rng.gen_range(0..=window)).min(nvars - 1)));
            }
        }
        model.set_relation(f, Sort::Feature, pairs);
    }
    let assign: Assignment = vars.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    let features: Vec<Sym> = sig.features().cloned().collect();
    let precs: Vec<Sym> = sig.precedences().cloned().collect();
    let mut cs = Vec::with_capacity(len);
    while cs.len() < len {
        let i = rng.gen_range(0..nvars);
        let j = (i + rng.gen_range(0..=window)).min(nvars - 1);
        let (a, b) = if rng.gen_bool(0.2) { (j, i) } else { (i, j) };
        let local = atoms(&[vars[a].clone(), vars[b].clone()], &features, &precs, forms);
        let c = if rng.gen_bool(0.5) {
            let p = precs.choose(rng).unwrap().clone();
            let k = if rng.gen_bool(0.5) { ClosureKind::Plus } else { ClosureKind::Star };
            Constraint::Closure(vars[a].clone(), p, k, vars[b].clone())
        } else {
            local.choose(rng).unwrap().clone()
        };
        if evaluate(&model, &assign, &c) {
            cs.push(c);
        }
    }
    store(sig, cs)
}
