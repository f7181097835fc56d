//! Deterministic rewriting of a constraint store to normal form.
//!
//! Rules fire one instance at a time. The instance chosen at each step is
//! the smallest applicable one (premises compared structurally) of the
//! highest-priority applicable rule, priority being the declaration order of
//! [`RuleId`]. [`normalize`] maintains candidate instances incrementally; the
//! result is the same as repeatedly calling [`applicable_rule`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::model::{ClosureKind, Constraint, ConstraintStore, Sort, Sym, Var};
use crate::syntax::format_constraint;

/// Rewrite rules, in scheduling priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    /// Merge a pending equation into the binding map.
    Equals,
    /// Two functional values of the same feature (or immediate precedence) are equal.
    Feat,
    /// A member of a functional relation equals its value.
    FeatExists,
    /// The predecessor of an inverse-functional node is unique.
    InvExists,
    /// `x p* y` and `y p* x` force `x = y`.
    Cycle,
    /// Drop `x p* y` when `x p+ y` holds.
    TransConj,
    /// `x = p:y` gives `x = ∃p:y`.
    IPExists,
    /// `x = p⁻¹:y` gives `y = ∃p:x`.
    InvIntro,
    /// `x = ∃p:y` gives `x = ∃p+:y`.
    ExistsTrans,
    Subset,
    TransClos,
    /// Successors of a node with a unique immediate successor `y` are reached through `y`.
    ImmSucc,
    /// Predecessors of a node with a unique immediate predecessor `y` reach it through `y`.
    ImmPred,
    /// `x = p:y`, `x p* w` and `w p+ y` force `x = w`.
    ImmCollapse,
    /// `x = p⁻¹:y`, `w p* x` and `y p+ w` force `w = x`.
    InvImmCollapse,
    DomPrec,
}

impl RuleId {
    pub const ALL: [RuleId; 16] = [
        RuleId::Equals,
        RuleId::Feat,
        RuleId::FeatExists,
        RuleId::InvExists,
        RuleId::Cycle,
        RuleId::TransConj,
        RuleId::IPExists,
        RuleId::InvIntro,
        RuleId::ExistsTrans,
        RuleId::Subset,
        RuleId::TransClos,
        RuleId::ImmSucc,
        RuleId::ImmPred,
        RuleId::ImmCollapse,
        RuleId::InvImmCollapse,
        RuleId::DomPrec,
    ];
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// `R₁ × R₂` for closure composition.
pub fn compose_closure(k1: ClosureKind, k2: ClosureKind) -> ClosureKind {
    match (k1, k2) {
        (ClosureKind::Star, ClosureKind::Star) => ClosureKind::Star,
        _ => ClosureKind::Plus,
    }
}

/// One rule instance: the rule and its matched premises.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    pub rule: RuleId,
    pub premises: Vec<Constraint>,
}

/// What firing an instance does to the store.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Effect {
    remove: Vec<Constraint>,
    add: Vec<Constraint>,
    equate: Option<(Var, Var)>,
    merge: Option<(Var, Var)>,
}

/// A fired rule instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub rule: RuleId,
    pub consumed: Vec<Constraint>,
    /// Constraints that were added, including pending equations.
    pub produced: Vec<Constraint>,
    /// Premises dropped by the rule.
    pub removed: Vec<Constraint>,
    /// `(kept, eliminated)` for (Equals).
    pub merged: Option<(Var, Var)>,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |cs: &[Constraint]| {
            cs.iter()
                .map(format_constraint)
                .collect::<Vec<_>>()
                .join(", ")
        };
        write!(f, "RULE {}: {} ==> ", self.rule, join(&self.consumed))?;
        let mut parts = Vec::new();
        if let Some((kept, gone)) = &self.merged {
            parts.push(format!("[{gone}/{kept}]"));
        }
        if !self.produced.is_empty() {
            parts.push(join(&self.produced));
        }
        if !self.removed.is_empty() {
            parts.push(format!("drop {}", join(&self.removed)));
        }
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Consistent(ConstraintStore),
    /// Witness has the shape `x = ∃p+:x`.
    Clash(Constraint),
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Verdict::Consistent(_))
    }
}

#[derive(Debug, Clone)]
pub struct Normalization {
    pub verdict: Verdict,
    /// The store after first-daughter expansion, where the trace starts.
    pub expanded: ConstraintStore,
    pub trace: Vec<TraceStep>,
}

/// Replaces each first-daughter constraint by its translation into a fresh
/// functional feature, a membership and a reflexive domain precedence.
pub fn expand_first_daughter(store: &ConstraintStore) -> ConstraintStore {
    let firsts: Vec<Constraint> = store
        .constraints()
        .filter(|c| matches!(c, Constraint::FirstDaughter(..)))
        .cloned()
        .collect();
    if firsts.is_empty() {
        return store.clone();
    }
    let mut out = store.clone();
    for c in firsts {
        let Constraint::FirstDaughter(x, f, p, y) = &c else {
            unreachable!()
        };
        out.remove(&c);
        let first = out.signature_mut().first_daughter_feature(f, p);
        out.insert(Constraint::Feature(x.clone(), first.clone(), y.clone()));
        out.insert(Constraint::Member(x.clone(), f.clone(), y.clone()));
        out.insert(Constraint::DomPrec(
            first,
            x.clone(),
            p.clone(),
            ClosureKind::Star,
            f.clone(),
            x.clone(),
        ));
    }
    out
}

fn closure(x: &Var, p: &Sym, k: ClosureKind, y: &Var) -> Constraint {
    Constraint::Closure(x.clone(), p.clone(), k, y.clone())
}

fn has_plus(st: &ConstraintStore, x: &Var, p: &Sym, y: &Var) -> bool {
    st.contains(&closure(x, p, ClosureKind::Plus, y))
}

fn has_closure(st: &ConstraintStore, x: &Var, p: &Sym, y: &Var) -> bool {
    has_plus(st, x, p, y) || st.contains(&closure(x, p, ClosureKind::Star, y))
}

fn in_succ(st: &ConstraintStore, x: &Var, f: &Sym, y: &Var) -> bool {
    st.contains(&Constraint::Member(x.clone(), f.clone(), y.clone()))
        || st.contains(&Constraint::Feature(x.clone(), f.clone(), y.clone()))
}

/// A `Feature`/`Member` premise `x = G:y`, returning `(x, g, y)`.
fn value_edge(c: &Constraint) -> Option<(&Var, &Sym, &Var)> {
    match c {
        Constraint::Feature(x, g, y) | Constraint::Member(x, g, y) => Some((x, g, y)),
        _ => None,
    }
}

fn is_prec(st: &ConstraintStore, p: &Sym) -> bool {
    st.signature().sort_of(p) == Some(Sort::Precedence)
}

/// Validates an instance against the store and computes its effect.
fn plan(st: &ConstraintStore, inst: &Instance) -> Option<Effect> {
    use Constraint::*;
    if !inst.premises.iter().all(|c| st.contains(c)) {
        return None;
    }
    let mut effect = Effect::default();
    match (inst.rule, inst.premises.as_slice()) {
        (RuleId::Equals, [Eq(x, y)]) => {
            effect.remove.push(Eq(x.clone(), y.clone()));
            effect.merge = Some((x.clone(), y.clone()));
        }
        (RuleId::Feat, [a @ Feature(x, f, y), b @ Feature(x2, f2, z)])
        | (RuleId::Feat, [a @ ImmPrec(x, f, y), b @ ImmPrec(x2, f2, z)]) => {
            if x != x2 || f != f2 || y == z || a >= b {
                return None;
            }
            effect.remove.push(b.clone());
            effect.equate = Some((y.clone(), z.clone()));
        }
        (RuleId::FeatExists, [Feature(x, f, y), Member(x2, f2, z)])
        | (RuleId::FeatExists, [ImmPrec(x, f, y), Member(x2, f2, z)]) => {
            if x != x2 || f != f2 || y == z {
                return None;
            }
            effect.equate = Some((y.clone(), z.clone()));
        }
        (RuleId::InvExists, [InvImmPrec(x, p, y), Member(z, p2, x2)]) => {
            if x != x2 || p != p2 || y == z {
                return None;
            }
            effect.equate = Some((y.clone(), z.clone()));
        }
        (
            RuleId::Cycle,
            [a @ Closure(x, p, ClosureKind::Star, y), b @ Closure(y2, p2, ClosureKind::Star, x2)],
        ) => {
            if x != x2 || y != y2 || p != p2 || a >= b {
                return None;
            }
            effect.remove.extend([a.clone(), b.clone()]);
            effect.equate = Some((x.clone(), y.clone()));
        }
        (
            RuleId::TransConj,
            [a @ Closure(x, p, ClosureKind::Star, y), Closure(x2, p2, ClosureKind::Plus, y2)],
        ) => {
            if x != x2 || y != y2 || p != p2 {
                return None;
            }
            effect.remove.push(a.clone());
        }
        (RuleId::IPExists, [ImmPrec(x, p, y)]) => {
            let m = Member(x.clone(), p.clone(), y.clone());
            if st.contains(&m) {
                return None;
            }
            effect.add.push(m);
        }
        (RuleId::InvIntro, [InvImmPrec(x, p, y)]) => {
            let m = Member(y.clone(), p.clone(), x.clone());
            if st.contains(&m) {
                return None;
            }
            effect.add.push(m);
        }
        (RuleId::ExistsTrans, [Member(x, p, y)]) => {
            if !is_prec(st, p) || has_plus(st, x, p, y) {
                return None;
            }
            effect.add.push(closure(x, p, ClosureKind::Plus, y));
        }
        (RuleId::Subset, [Subset(x, f, g, y), value]) => {
            let (y2, g2, z) = value_edge(value)?;
            if y != y2 || g != g2 || in_succ(st, x, f, z) {
                return None;
            }
            effect.add.push(Member(x.clone(), f.clone(), z.clone()));
        }
        (RuleId::TransClos, [Closure(x, p, k1, y), Closure(y2, p2, k2, z)]) => {
            if y != y2 || p != p2 {
                return None;
            }
            let k = compose_closure(*k1, *k2);
            let composed = closure(x, p, k, z);
            if composed.is_tautology() || has_plus(st, x, p, z) || st.contains(&composed) {
                return None;
            }
            effect.add.push(composed);
        }
        (RuleId::ImmSucc, [ImmPrec(x, p, y), Closure(x2, p2, ClosureKind::Plus, w)]) => {
            if x != x2 || p != p2 || y == w || has_closure(st, y, p, w) {
                return None;
            }
            effect.add.push(closure(y, p, ClosureKind::Star, w));
        }
        (RuleId::ImmPred, [InvImmPrec(x, p, y), Closure(w, p2, ClosureKind::Plus, x2)]) => {
            if x != x2 || p != p2 || y == w || has_closure(st, w, p, y) {
                return None;
            }
            effect.add.push(closure(w, p, ClosureKind::Star, y));
        }
        (
            RuleId::ImmCollapse,
            [ImmPrec(x, p, y), Closure(x2, p2, ClosureKind::Star, w), Closure(w2, p3, ClosureKind::Plus, y2)],
        ) => {
            if x != x2 || w != w2 || y != y2 || p != p2 || p != p3 {
                return None;
            }
            effect.equate = Some((x.clone(), w.clone()));
        }
        (
            RuleId::InvImmCollapse,
            [InvImmPrec(x, p, y), Closure(w, p2, ClosureKind::Star, x2), Closure(y2, p3, ClosureKind::Plus, w2)],
        ) => {
            if x != x2 || w != w2 || y != y2 || p != p2 || p != p3 {
                return None;
            }
            effect.equate = Some((w.clone(), x.clone()));
        }
        (RuleId::DomPrec, [DomPrec(f, x, p, k, g, y), left, right]) => {
            let (x2, f2, x1) = value_edge(left)?;
            let (y2, g2, y1) = value_edge(right)?;
            if x != x2 || f != f2 || y != y2 || g != g2 {
                return None;
            }
            let derived = closure(x1, p, *k, y1);
            if derived.is_tautology() || has_plus(st, x1, p, y1) || st.contains(&derived) {
                return None;
            }
            effect.add.push(derived);
        }
        _ => return None,
    }
    Some(effect)
}

/// Constraints indexed by each variable they mention.
#[derive(Debug, Default, Clone)]
struct Index {
    by_src: HashMap<Var, BTreeSet<Constraint>>,
    by_dst: HashMap<Var, BTreeSet<Constraint>>,
}

impl Index {
    fn build(st: &ConstraintStore) -> Self {
        let mut ix = Index::default();
        for c in st.constraints() {
            ix.insert(c);
        }
        ix
    }

    fn insert(&mut self, c: &Constraint) {
        let vs = c.vars();
        self.by_src.entry(vs[0].clone()).or_default().insert(c.clone());
        self.by_dst.entry(vs[1].clone()).or_default().insert(c.clone());
    }

    fn remove(&mut self, c: &Constraint) {
        let vs = c.vars();
        if let Some(set) = self.by_src.get_mut(vs[0]) {
            set.remove(c);
        }
        if let Some(set) = self.by_dst.get_mut(vs[1]) {
            set.remove(c);
        }
    }

    fn src(&self, x: &Var) -> impl Iterator<Item = &Constraint> {
        self.by_src.get(x).into_iter().flatten()
    }

    fn dst(&self, x: &Var) -> impl Iterator<Item = &Constraint> {
        self.by_dst.get(x).into_iter().flatten()
    }

    /// `Feature`/`Member` constraints `x = G:_` over `g`.
    fn values<'a>(&'a self, x: &Var, g: &'a Sym) -> impl Iterator<Item = &'a Constraint> {
        self.src(x)
            .filter(move |c| value_edge(c).is_some_and(|(_, g2, _)| g2 == g))
    }

    /// Every instance in which `c` is one of the premises.
    fn candidates(&self, c: &Constraint, prec: impl Fn(&Sym) -> bool, out: &mut Vec<Instance>) {
        use Constraint::*;
        let mut push = |rule, premises: Vec<Constraint>| out.push(Instance { rule, premises });
        match c {
            Eq(..) => push(RuleId::Equals, vec![c.clone()]),
            Feature(x, f, _) | Member(x, f, _) if !prec(f) => {
                for d in self.src(x) {
                    match (c, d) {
                        (Feature(_, _, y), Feature(_, f2, z)) if f2 == f && y != z => {
                            let (a, b) = if c < d { (c, d) } else { (d, c) };
                            push(RuleId::Feat, vec![a.clone(), b.clone()]);
                        }
                        (Feature(..), Member(_, f2, _)) if f2 == f => {
                            push(RuleId::FeatExists, vec![c.clone(), d.clone()]);
                        }
                        (Member(..), Feature(_, f2, _)) if f2 == f => {
                            push(RuleId::FeatExists, vec![d.clone(), c.clone()]);
                        }
                        _ => {}
                    }
                }
                for d in self.dst(x) {
                    match d {
                        Subset(_, _, g, _) if g == f => {
                            push(RuleId::Subset, vec![d.clone(), c.clone()]);
                        }
                        DomPrec(_, w, _, _, g, _) if g == f => {
                            let h = match d {
                                DomPrec(h, ..) => h,
                                _ => unreachable!(),
                            };
                            for left in self.values(w, h) {
                                push(RuleId::DomPrec, vec![d.clone(), left.clone(), c.clone()]);
                            }
                        }
                        _ => {}
                    }
                }
                for d in self.src(x) {
                    if let DomPrec(h, _, _, _, g, y) = d {
                        if h == f {
                            for right in self.values(y, g) {
                                push(RuleId::DomPrec, vec![d.clone(), c.clone(), right.clone()]);
                            }
                        }
                    }
                }
            }
            Feature(..) => {}
            Member(x, p, y) => {
                push(RuleId::ExistsTrans, vec![c.clone()]);
                for d in self.src(x) {
                    if let ImmPrec(_, p2, _) = d {
                        if p2 == p {
                            push(RuleId::FeatExists, vec![d.clone(), c.clone()]);
                        }
                    }
                }
                for d in self.src(y) {
                    if let InvImmPrec(_, p2, _) = d {
                        if p2 == p {
                            push(RuleId::InvExists, vec![d.clone(), c.clone()]);
                        }
                    }
                }
            }
            Closure(x, p, k, y) => {
                let other = match k {
                    ClosureKind::Star => closure(x, p, ClosureKind::Plus, y),
                    ClosureKind::Plus => closure(x, p, ClosureKind::Star, y),
                };
                if self.src(x).any(|d| *d == other) {
                    let (star, plus) = match k {
                        ClosureKind::Star => (c.clone(), other),
                        ClosureKind::Plus => (other, c.clone()),
                    };
                    push(RuleId::TransConj, vec![star, plus]);
                }
                if *k == ClosureKind::Star {
                    let back = closure(y, p, ClosureKind::Star, x);
                    if self.src(y).any(|d| *d == back) {
                        let (a, b) = if *c < back { (c.clone(), back) } else { (back, c.clone()) };
                        push(RuleId::Cycle, vec![a, b]);
                    }
                }
                for d in self.src(y) {
                    if matches!(d, Closure(_, p2, _, _) if p2 == p) {
                        push(RuleId::TransClos, vec![c.clone(), d.clone()]);
                    }
                }
                for d in self.dst(x) {
                    if matches!(d, Closure(_, p2, _, _) if p2 == p) {
                        push(RuleId::TransClos, vec![d.clone(), c.clone()]);
                    }
                }
                if *k == ClosureKind::Star {
                    for d in self.src(x) {
                        if let ImmPrec(_, p2, z) = d {
                            let back = closure(y, p, ClosureKind::Plus, z);
                            if p2 == p && self.src(y).any(|e| *e == back) {
                                push(RuleId::ImmCollapse, vec![d.clone(), c.clone(), back]);
                            }
                        }
                    }
                    for d in self.src(y) {
                        if let InvImmPrec(_, p2, z) = d {
                            let back = closure(z, p, ClosureKind::Plus, x);
                            if p2 == p && self.src(z).any(|e| *e == back) {
                                push(RuleId::InvImmCollapse, vec![d.clone(), c.clone(), back]);
                            }
                        }
                    }
                }
                if *k == ClosureKind::Plus {
                    for d in self.dst(x) {
                        if let Closure(u, p2, ClosureKind::Star, _) = d {
                            if p2 != p {
                                continue;
                            }
                            for e in self.src(u) {
                                if matches!(e, ImmPrec(_, p3, z) if p3 == p && z == y) {
                                    push(RuleId::ImmCollapse, vec![e.clone(), d.clone(), c.clone()]);
                                }
                            }
                        }
                    }
                    for d in self.src(y) {
                        if let Closure(_, p2, ClosureKind::Star, u) = d {
                            if p2 != p {
                                continue;
                            }
                            for e in self.src(u) {
                                if matches!(e, InvImmPrec(_, p3, z) if p3 == p && z == x) {
                                    push(RuleId::InvImmCollapse, vec![e.clone(), d.clone(), c.clone()]);
                                }
                            }
                        }
                    }
                    for d in self.src(x) {
                        if matches!(d, ImmPrec(_, p2, _) if p2 == p) {
                            push(RuleId::ImmSucc, vec![d.clone(), c.clone()]);
                        }
                    }
                    for d in self.src(y) {
                        if matches!(d, InvImmPrec(_, p2, _) if p2 == p) {
                            push(RuleId::ImmPred, vec![d.clone(), c.clone()]);
                        }
                    }
                }
            }
            Subset(_, _, g, y) => {
                for d in self.values(y, g) {
                    push(RuleId::Subset, vec![c.clone(), d.clone()]);
                }
            }
            DomPrec(f, x, _, _, g, y) => {
                for left in self.values(x, f) {
                    for right in self.values(y, g) {
                        push(RuleId::DomPrec, vec![c.clone(), left.clone(), right.clone()]);
                    }
                }
            }
            ImmPrec(x, p, y) => {
                push(RuleId::IPExists, vec![c.clone()]);
                for d in self.src(x) {
                    match d {
                        ImmPrec(_, p2, z) if p2 == p && z != y => {
                            let (a, b) = if c < d { (c, d) } else { (d, c) };
                            push(RuleId::Feat, vec![a.clone(), b.clone()]);
                        }
                        Member(_, p2, _) if p2 == p => {
                            push(RuleId::FeatExists, vec![c.clone(), d.clone()]);
                        }
                        Closure(_, p2, ClosureKind::Plus, _) if p2 == p => {
                            push(RuleId::ImmSucc, vec![c.clone(), d.clone()]);
                        }
                        Closure(_, p2, ClosureKind::Star, w) if p2 == p => {
                            let back = closure(w, p, ClosureKind::Plus, y);
                            if self.src(w).any(|e| *e == back) {
                                push(RuleId::ImmCollapse, vec![c.clone(), d.clone(), back]);
                            }
                        }
                        _ => {}
                    }
                }
            }
            InvImmPrec(x, p, y) => {
                push(RuleId::InvIntro, vec![c.clone()]);
                for d in self.dst(x) {
                    if let Closure(w, p2, ClosureKind::Star, _) = d {
                        let back = closure(y, p, ClosureKind::Plus, w);
                        if p2 == p && self.src(y).any(|e| *e == back) {
                            push(RuleId::InvImmCollapse, vec![c.clone(), d.clone(), back]);
                        }
                    }
                }
                for d in self.dst(x) {
                    match d {
                        Member(_, p2, _) if p2 == p => {
                            push(RuleId::InvExists, vec![c.clone(), d.clone()]);
                        }
                        Closure(_, p2, ClosureKind::Plus, _) if p2 == p => {
                            push(RuleId::ImmPred, vec![c.clone(), d.clone()]);
                        }
                        _ => {}
                    }
                }
            }
            FirstDaughter(..) => {}
        }
    }
}

fn precedence_test(st: &ConstraintStore) -> impl Fn(&Sym) -> bool + '_ {
    move |s| is_prec(st, s)
}

/// Every applicable instance of the store, smallest first.
fn all_instances(st: &ConstraintStore) -> BTreeSet<Instance> {
    let index = Index::build(st);
    let mut out = Vec::new();
    for c in st.constraints() {
        index.candidates(c, precedence_test(st), &mut out);
    }
    out.into_iter().filter(|i| plan(st, i).is_some()).collect()
}

/// The instance the schedule fires next, or `None` on a normal form.
pub fn applicable_rule(store: &ConstraintStore) -> Option<Instance> {
    all_instances(store).into_iter().next()
}

/// True iff no rule applies.
pub fn is_normal(store: &ConstraintStore) -> bool {
    applicable_rule(store).is_none()
}

/// Upper bound on the number of rule firings for a store, derived from the
/// number of constraint forms, variables and symbols.
pub fn firing_ceiling(store: &ConstraintStore) -> usize {
    const FORMS: usize = 10;
    let vars = store.all_variables().len().max(1);
    let symbols = store.signature().symbol_count().max(1);
    FORMS * vars * vars * symbols + store.len()
}

struct Engine {
    store: ConstraintStore,
    index: Index,
    queue: BTreeSet<Instance>,
    clash: Option<Constraint>,
}

impl Engine {
    fn new(store: ConstraintStore) -> Self {
        let index = Index::build(&store);
        let mut out = Vec::new();
        for c in store.constraints() {
            index.candidates(c, precedence_test(&store), &mut out);
        }
        let clash = store.clash().cloned();
        Engine {
            store,
            index,
            queue: out.into_iter().collect(),
            clash,
        }
    }

    fn added(&mut self, c: Constraint) {
        if c.is_clash() && self.clash.as_ref().is_none_or(|w| c < *w) {
            self.clash = Some(c.clone());
        }
        self.index.insert(&c);
        let mut out = Vec::new();
        self.index.candidates(&c, precedence_test(&self.store), &mut out);
        self.queue.extend(out);
    }

    fn insert(&mut self, c: Constraint) -> Option<Constraint> {
        let stored = self.store.insert(c)?;
        self.added(stored.clone());
        Some(stored)
    }

    fn remove(&mut self, c: &Constraint) {
        if self.store.remove(c) {
            self.index.remove(c);
        }
    }

    fn fire(&mut self, inst: Instance, effect: Effect) -> TraceStep {
        let mut step = TraceStep {
            rule: inst.rule,
            consumed: inst.premises,
            produced: Vec::new(),
            removed: Vec::new(),
            merged: None,
        };
        for c in &effect.remove {
            self.remove(c);
            if inst.rule != RuleId::Equals {
                step.removed.push(c.clone());
            }
        }
        for c in effect.add {
            if let Some(stored) = self.insert(c) {
                step.produced.push(stored);
            }
        }
        if let Some((y, z)) = effect.equate {
            let (y, z) = (self.store.representative(&y), self.store.representative(&z));
            if self.store.defer_equation(&y, &z) {
                let eq = if y < z {
                    Constraint::Eq(y, z)
                } else {
                    Constraint::Eq(z, y)
                };
                self.added(eq.clone());
                step.produced.push(eq);
            }
        }
        if let Some((x, y)) = effect.merge {
            if let Some(merge) = self.store.merge(&x, &y) {
                for c in &merge.removed {
                    self.index.remove(c);
                }
                for c in merge.rewritten {
                    self.added(c);
                }
                step.merged = Some((merge.kept, merge.eliminated));
            }
        }
        step
    }
}

/// Applies the rules to a fixpoint and reports consistency.
pub fn normalize(store: &ConstraintStore) -> Normalization {
    let expanded = expand_first_daughter(store);
    let mut engine = Engine::new(expanded.clone());
    let mut trace = Vec::new();
    while engine.clash.is_none() {
        let Some(inst) = engine.queue.pop_first() else {
            break;
        };
        let Some(effect) = plan(&engine.store, &inst) else {
            continue;
        };
        trace.push(engine.fire(inst, effect));
    }
    let verdict = match engine.clash {
        Some(witness) => Verdict::Clash(witness),
        None => Verdict::Consistent(engine.store),
    };
    Normalization {
        verdict,
        expanded,
        trace,
    }
}

/// Re-applies one traced step. Returns `None` when the step does not match
/// the store.
pub fn apply_step(store: &ConstraintStore, step: &TraceStep) -> Option<ConstraintStore> {
    let inst = Instance {
        rule: step.rule,
        premises: step.consumed.clone(),
    };
    let effect = plan(store, &inst)?;
    let mut engine = Engine {
        store: store.clone(),
        index: Index::default(),
        queue: BTreeSet::new(),
        clash: None,
    };
    let replayed = engine.fire(inst, effect);
    (replayed == *step).then_some(engine.store)
}

/// Every intermediate store of a normalization, starting with the expanded
/// input. Returns `None` if a step fails to replay.
pub fn replay(run: &Normalization) -> Option<Vec<ConstraintStore>> {
    let mut states = vec![run.expanded.clone()];
    for step in &run.trace {
        let next = apply_step(states.last()?, step)?;
        states.push(next);
    }
    Some(states)
}
