//! Interpretations, satisfaction, canonical models and linearization.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::engine::{is_normal, normalize, Verdict};
use crate::model::{ClosureKind, Constraint, ConstraintStore, ModelError, Signature, Sort, Sym, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("store is not in normal form")]
    NotNormalForm,
    #[error("store contains a clash")]
    ClashPresent,
    #[error("no linear order satisfies the immediate precedence constraints")]
    NotLinearizable,
}

/// A finite structure: elements `0..size`, one binary relation per symbol.
/// Symbols without a relation are interpreted as empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interpretation {
    labels: Vec<String>,
    relations: BTreeMap<Sym, (Sort, Matrix)>,
    closures: BTreeMap<Sym, Matrix>,
}

type Matrix = Vec<Vec<bool>>;

fn transitive_closure(rel: &Matrix) -> Matrix {
    let mut m = rel.clone();
    let n = m.len();
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    m
}

impl Interpretation {
    /// A universe with one element per label and no relations.
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        assert!(!labels.is_empty(), "universe must be nonempty");
        Interpretation {
            labels,
            relations: BTreeMap::new(),
            closures: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, e: usize) -> &str {
        &self.labels[e]
    }

    /// Sets the relation of `sym` to exactly `pairs`.
    pub fn set_relation(
        &mut self,
        sym: &Sym,
        sort: Sort,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) {
        let n = self.size();
        let mut m = vec![vec![false; n]; n];
        for (a, b) in pairs {
            m[a][b] = true;
        }
        if sort == Sort::Precedence {
            self.closures.insert(sym.clone(), transitive_closure(&m));
        } else {
            self.closures.remove(sym);
        }
        self.relations.insert(sym.clone(), (sort, m));
    }

    /// Pairs of a relation, in order.
    pub fn pairs(&self, sym: &Sym) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if let Some((_, m)) = self.relations.get(sym) {
            for (a, row) in m.iter().enumerate() {
                for (b, &set) in row.iter().enumerate() {
                    if set {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }

    pub fn symbols(&self) -> impl Iterator<Item = (&Sym, Sort)> {
        self.relations.iter().map(|(s, (sort, _))| (s, *sort))
    }

    fn holds(&self, sym: &Sym, a: usize, b: usize) -> bool {
        self.relations.get(sym).is_some_and(|(_, m)| m[a][b])
    }

    fn values(&self, sym: &Sym, a: usize) -> Vec<usize> {
        (0..self.size()).filter(|&b| self.holds(sym, a, b)).collect()
    }

    fn plus(&self, p: &Sym, a: usize, b: usize) -> bool {
        match self.closures.get(p) {
            Some(m) => m[a][b],
            None => transitive_closure(&self.matrix(p))[a][b],
        }
    }

    fn matrix(&self, sym: &Sym) -> Matrix {
        match self.relations.get(sym) {
            Some((_, m)) => m.clone(),
            None => vec![vec![false; self.size()]; self.size()],
        }
    }

    fn related(&self, p: &Sym, k: ClosureKind, a: usize, b: usize) -> bool {
        (k == ClosureKind::Star && a == b) || self.plus(p, a, b)
    }
}

/// Variable assignment into the elements of an interpretation.
pub type Assignment = BTreeMap<Var, usize>;

/// Every precedence relation has an irreflexive transitive closure.
pub fn valid_interpretation(interp: &Interpretation) -> bool {
    interp
        .closures
        .values()
        .all(|m| (0..m.len()).all(|i| !m[i][i]))
}

/// Truth of one constraint. Unassigned variables make it false.
pub fn evaluate(interp: &Interpretation, assign: &Assignment, c: &Constraint) -> bool {
    use Constraint::*;
    let vs = c.vars();
    let (Some(&ax), Some(&ay)) = (assign.get(vs[0]), assign.get(vs[1])) else {
        return false;
    };
    match c {
        Eq(..) => ax == ay,
        Feature(_, f, _) | ImmPrec(_, f, _) => interp.values(f, ax) == [ay],
        Member(_, r, _) => interp.holds(r, ax, ay),
        Closure(_, p, k, _) => interp.related(p, *k, ax, ay),
        Subset(_, f, g, _) => interp
            .values(g, ay)
            .into_iter()
            .all(|e| interp.holds(f, ax, e)),
        FirstDaughter(_, f, p, _) => {
            interp.holds(f, ax, ay)
                && interp
                    .values(f, ax)
                    .into_iter()
                    .all(|e| interp.related(p, ClosureKind::Star, ay, e))
        }
        DomPrec(f, _, p, k, g, _) => {
            let right = interp.values(g, ay);
            interp
                .values(f, ax)
                .into_iter()
                .all(|e1| right.iter().all(|&e2| interp.related(p, *k, e1, e2)))
        }
        InvImmPrec(_, p, _) => {
            let preds: Vec<usize> = (0..interp.size())
                .filter(|&e| interp.holds(p, e, ax))
                .collect();
            preds == [ay]
        }
    }
}

/// Conjunction of every constraint and every binding of the store.
pub fn satisfies_all(interp: &Interpretation, assign: &Assignment, store: &ConstraintStore) -> bool {
    store
        .bindings()
        .iter()
        .all(|(x, rep)| evaluate(interp, assign, &Constraint::Eq(x.clone(), rep.clone())))
        && store.constraints().all(|c| evaluate(interp, assign, c))
}

fn check_normal(store: &ConstraintStore) -> Result<(), SemanticsError> {
    if store.clash().is_some() {
        return Err(SemanticsError::ClashPresent);
    }
    if !is_normal(store) {
        return Err(SemanticsError::NotNormalForm);
    }
    Ok(())
}

/// The model read off a clash-free normal form: one element per
/// representative, features from their value sets, precedences from the
/// transitive reduction of the closure constraints plus direct memberships.
pub fn canonical_model(
    normal: &ConstraintStore,
) -> Result<(Interpretation, Assignment), SemanticsError> {
    check_normal(normal)?;
    Ok(refine(normal).unwrap_or_else(|| build_model(normal)))
}

/// Immediate precedence combined with `x p* w` is disjunctive: either the
/// two nodes coincide or `w` lies at or beyond the immediate neighbour.
/// Normal forms leave such choices open, so when the direct construction
/// fails each open choice is decided in turn and the store renormalized.
fn refine(store: &ConstraintStore) -> Option<(Interpretation, Assignment)> {
    let model = build_model(store);
    if satisfies_all(&model.0, &model.1, store) {
        return Some(model);
    }
    let choices = open_choice(store)?;
    for choice in choices {
        let mut next = store.clone();
        if next.add_constraint(choice).is_err() {
            continue;
        }
        if let Verdict::Consistent(nf) = normalize(&next).verdict {
            if let Some(m) = refine(&nf) {
                return Some(m);
            }
        }
    }
    None
}

fn open_choice(store: &ConstraintStore) -> Option<[Constraint; 2]> {
    let ordered = |a: &Var, p: &Sym, b: &Var| {
        [ClosureKind::Plus, ClosureKind::Star]
            .iter()
            .any(|k| store.contains(&Constraint::Closure(a.clone(), p.clone(), *k, b.clone())))
    };
    let star = |a: &Var, p: &Sym, b: &Var| {
        Constraint::Closure(a.clone(), p.clone(), ClosureKind::Star, b.clone())
    };
    for c in store.constraints() {
        for d in store.constraints() {
            match (c, d) {
                (Constraint::ImmPrec(x, p, y), Constraint::Closure(x2, q, ClosureKind::Star, w))
                    if x == x2 && p == q && w != y && !ordered(y, p, w) =>
                {
                    return Some([Constraint::Eq(x.clone(), w.clone()), star(y, p, w)]);
                }
                (Constraint::InvImmPrec(x, p, y), Constraint::Closure(w, q, ClosureKind::Star, x2))
                    if x == x2 && p == q && w != y && !ordered(w, p, y) =>
                {
                    return Some([Constraint::Eq(w.clone(), x.clone()), star(w, p, y)]);
                }
                _ => {}
            }
        }
    }
    None
}

fn build_model(normal: &ConstraintStore) -> (Interpretation, Assignment) {
    let mut reps = normal.variables();
    reps.extend(normal.bindings().values().cloned());
    let names: Vec<Var> = reps.into_iter().collect();
    let mut interp = if names.is_empty() {
        Interpretation::new(["_"])
    } else {
        Interpretation::new(names.iter().map(|v| v.to_string()))
    };
    let index: BTreeMap<&Var, usize> = names.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut assign = Assignment::new();
    for v in normal.all_variables() {
        assign.insert(v.clone(), index[&normal.representative(&v)]);
    }

    let sig = normal.signature();
    for f in sig.features() {
        let mut pairs = Vec::new();
        for c in normal.constraints() {
            if let Constraint::Feature(x, g, y) | Constraint::Member(x, g, y) = c {
                if g == f {
                    pairs.push((index[x], index[y]));
                }
            }
        }
        interp.set_relation(f, Sort::Feature, pairs);
    }
    for p in sig.precedences() {
        if let Some(pairs) = immediate_order(normal, p, &index) {
            interp.set_relation(p, Sort::Precedence, pairs);
            continue;
        }
        let mut pairs = BTreeSet::new();
        for x in &names {
            for y in normal.succ_reduced(x, p) {
                pairs.insert((index[x], index[&y]));
            }
        }
        for c in normal.constraints() {
            if let Constraint::Member(x, q, y) = c {
                if q == p {
                    pairs.insert((index[x], index[y]));
                }
            }
        }
        interp.set_relation(p, Sort::Precedence, pairs);
    }
    (interp, assign)
}

/// With immediate precedence over `p`, the transitive reduction of the
/// closure constraints may give a node several immediate neighbours. The
/// order is then extended until every `x = p:y` node has all its successors
/// at or above `y` (and dually for `x = p⁻¹:y`), and the cover relation of
/// the extension is used. Returns `None` when `p` has no immediate
/// precedence constraints or the extension runs into a cycle.
fn immediate_order(
    normal: &ConstraintStore,
    p: &Sym,
    index: &BTreeMap<&Var, usize>,
) -> Option<BTreeSet<(usize, usize)>> {
    let n = index.len();
    let mut order = vec![vec![false; n]; n];
    let mut members = BTreeSet::new();
    let mut succ_of = Vec::new();
    let mut pred_of = Vec::new();
    for c in normal.constraints() {
        match c {
            Constraint::Closure(x, q, _, y) if q == p => order[index[x]][index[y]] = true,
            Constraint::Member(x, q, y) if q == p => {
                order[index[x]][index[y]] = true;
                members.insert((index[x], index[y]));
            }
            Constraint::ImmPrec(x, q, y) if q == p => succ_of.push((index[x], index[y])),
            Constraint::InvImmPrec(x, q, y) if q == p => pred_of.push((index[x], index[y])),
            _ => {}
        }
    }
    if succ_of.is_empty() && pred_of.is_empty() {
        return None;
    }
    let mut order = transitive_closure(&order);
    let add = |order: &mut Matrix, a: usize, b: usize| {
        let below: Vec<usize> = (0..n).filter(|&u| u == a || order[u][a]).collect();
        let above: Vec<usize> = (0..n).filter(|&u| u == b || order[b][u]).collect();
        for &u in &below {
            for &w in &above {
                order[u][w] = true;
            }
        }
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &(x, y) in &succ_of {
            for w in 0..n {
                if order[x][w] && w != y && !order[y][w] {
                    if order[w][y] {
                        return None;
                    }
                    add(&mut order, y, w);
                    changed = true;
                }
            }
        }
        for &(x, y) in &pred_of {
            for w in 0..n {
                if order[w][x] && w != y && !order[w][y] {
                    if order[y][w] {
                        return None;
                    }
                    add(&mut order, w, y);
                    changed = true;
                }
            }
        }
    }
    if (0..n).any(|a| order[a][a]) {
        return None;
    }
    let mut pairs = members;
    for a in 0..n {
        for b in 0..n {
            if order[a][b] && !(0..n).any(|m| order[a][m] && order[m][b]) {
                pairs.insert((a, b));
            }
        }
    }
    Some(pairs)
}

fn mentions(c: &Constraint, p: &Sym) -> bool {
    c.symbols().into_iter().any(|s| s == p)
}

/// A total order of the variables constrained by closures over `p` such
/// that reading `p` as "immediately followed by" in that order satisfies
/// every constraint over `p`. Ties are broken by variable name.
pub fn linearize(normal: &ConstraintStore, p: &Sym) -> Result<Vec<Var>, SemanticsError> {
    check_normal(normal)?;
    let mut nodes: BTreeSet<Var> = BTreeSet::new();
    let mut preds: BTreeMap<Var, BTreeSet<Var>> = BTreeMap::new();
    let mut next: BTreeMap<Var, Var> = BTreeMap::new();
    let mut prev: BTreeMap<Var, Var> = BTreeMap::new();
    for c in normal.constraints() {
        match c {
            Constraint::Closure(x, q, _, y) if q == p => {
                nodes.insert(x.clone());
                nodes.insert(y.clone());
                preds.entry(y.clone()).or_default().insert(x.clone());
            }
            Constraint::Member(x, q, y) if q == p => {
                // a direct p-edge must be a pair of neighbours
                if next.insert(x.clone(), y.clone()).is_some_and(|old| old != *y)
                    || prev.insert(y.clone(), x.clone()).is_some_and(|old| old != *x)
                {
                    return Err(SemanticsError::NotLinearizable);
                }
            }
            _ => {}
        }
    }

    // Chains of forced neighbours are placed as blocks.
    let heads: Vec<Var> = nodes.iter().filter(|v| !prev.contains_key(*v)).cloned().collect();
    let mut block_of: BTreeMap<Var, usize> = BTreeMap::new();
    let mut blocks: Vec<Vec<Var>> = Vec::new();
    for head in heads {
        let mut block = vec![head.clone()];
        let mut cur = head;
        while let Some(n) = next.get(&cur) {
            block.push(n.clone());
            cur = n.clone();
        }
        for v in &block {
            block_of.insert(v.clone(), blocks.len());
        }
        blocks.push(block);
    }
    if block_of.len() != nodes.len() {
        // some neighbour chain is a cycle
        return Err(SemanticsError::NotLinearizable);
    }

    let mut waiting: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks.len()];
    let mut successors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks.len()];
    for (y, xs) in &preds {
        let by = block_of[y];
        for x in xs {
            let bx = block_of[x];
            if bx != by {
                waiting[by].insert(bx);
                successors[bx].insert(by);
            }
        }
    }
    let mut ready: BTreeSet<(Var, usize)> = (0..blocks.len())
        .filter(|&b| waiting[b].is_empty())
        .map(|b| (blocks[b][0].clone(), b))
        .collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some((_, b)) = ready.pop_first() {
        order.extend(blocks[b].iter().cloned());
        for &s in &successors[b] {
            waiting[s].remove(&b);
            if waiting[s].is_empty() {
                ready.insert((blocks[s][0].clone(), s));
            }
        }
    }
    if order.len() != nodes.len() {
        return Err(SemanticsError::NotLinearizable);
    }
    if !order_satisfies(normal, p, &order) {
        return Err(SemanticsError::NotLinearizable);
    }
    Ok(order)
}

/// Evaluates every constraint over `p` in the canonical model with `p`
/// replaced by the consecutive pairs of `order`.
pub fn order_satisfies(normal: &ConstraintStore, p: &Sym, order: &[Var]) -> bool {
    let (mut interp, assign) = build_model(normal);
    let mut pairs = Vec::new();
    for w in order.windows(2) {
        match (assign.get(&w[0]), assign.get(&w[1])) {
            (Some(&a), Some(&b)) => pairs.push((a, b)),
            _ => return false,
        }
    }
    interp.set_relation(p, Sort::Precedence, pairs);
    valid_interpretation(&interp)
        && normal
            .constraints()
            .filter(|c| mentions(c, p))
            .all(|c| evaluate(&interp, &assign, c))
}

/// `v₀ p+ v₁, v₁ p+ v₂, …` for a sequence of distinct variables.
pub fn order_to_constraints(
    sig: &Signature,
    order: &[Var],
    p: &Sym,
) -> Result<Vec<Constraint>, ModelError> {
    sig.expect(p, Sort::Precedence)?;
    let mut seen = BTreeSet::new();
    for v in order {
        if !seen.insert(v) {
            return Err(ModelError::DuplicateVariable(v.to_string()));
        }
    }
    Ok(order
        .windows(2)
        .map(|w| Constraint::Closure(w[0].clone(), p.clone(), ClosureKind::Plus, w[1].clone()))
        .collect())
}
