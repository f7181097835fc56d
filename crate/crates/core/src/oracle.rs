//! Exhaustive search for a finite model of a constraint store.
//!
//! Variables are mapped onto a universe of at most `max_universe` elements
//! (one representative per partition of the variables), after which every
//! relation used by the store is enumerated. A precedence symbol that only
//! ever occurs under a closure is enumerated as a strict partial order,
//! because any relation and its transitive closure satisfy the same such
//! constraints. Other precedence symbols range over acyclic relations. For
//! features only the rows of elements that some constraint actually reads
//! are enumerated; the remaining rows are left empty.
//!
//! Constraints are checked as soon as every relation row they read is fixed,
//! which prunes most of the search.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::model::{ClosureKind, Constraint, ConstraintStore, Sort, Sym, Var};

/// Largest universe the bit-packed representation supports.
pub const UNIVERSE_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_universe: usize,
    /// Upper bound on the sum of `n²` over the enumerated symbols.
    pub max_relation_bits: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_universe: 4,
            max_relation_bits: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search space too large: {needed} relation bits needed, budget is {allowed}")]
    BudgetExceeded { needed: usize, allowed: usize },
}

/// Whether some interpretation with at most `budget.max_universe` elements
/// satisfies the store.
pub fn brute_force_consistent(
    store: &ConstraintStore,
    budget: OracleBudget,
) -> Result<bool, OracleError> {
    Problem::compile(store, budget).map(|p| p.solve())
}

/// Both stores are satisfiable, or neither is, within the budget.
pub fn rule_soundness_check(
    before: &ConstraintStore,
    after: &ConstraintStore,
    budget: OracleBudget,
) -> Result<bool, OracleError> {
    Ok(brute_force_consistent(before, budget)? == brute_force_consistent(after, budget)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Order,
    Acyclic,
    Rows,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Eq,
    Feature(usize),
    Member(usize),
    Closure(usize, bool),
    Subset(usize, usize),
    FirstDaughter(usize, usize),
    DomPrec(usize, usize, bool, usize),
    ImmPrec(usize),
    InvImmPrec(usize),
}

#[derive(Debug, Clone, Copy)]
struct Compiled {
    op: Op,
    x: usize,
    y: usize,
}

struct Problem {
    n: usize,
    vars: usize,
    modes: Vec<Mode>,
    constraints: Vec<Compiled>,
}

type Row = u8;

fn bit(row: Row, j: usize) -> bool {
    row >> j & 1 == 1
}

/// A relation over at most eight elements: row `i` holds the successors of `i`.
#[derive(Clone, Copy, Default)]
struct Rel {
    rows: [Row; UNIVERSE_LIMIT],
    plus: [Row; UNIVERSE_LIMIT],
}

impl Problem {
    fn compile(store: &ConstraintStore, budget: OracleBudget) -> Result<Problem, OracleError> {
        let all_vars: BTreeSet<Var> = store.all_variables();
        let var_index: BTreeMap<&Var, usize> =
            all_vars.iter().enumerate().map(|(i, v)| (v, i)).collect();

        let mut cs: Vec<Constraint> = store
            .bindings()
            .iter()
            .map(|(x, r)| Constraint::Eq(x.clone(), r.clone()))
            .collect();
        cs.extend(store.constraints().cloned());

        let sig = store.signature();
        let mut used: BTreeMap<Sym, Mode> = BTreeMap::new();
        for c in &cs {
            for s in c.symbols() {
                let mode = match sig.sort_of(s) {
                    Some(Sort::Feature) => Mode::Rows,
                    _ => Mode::Order,
                };
                used.entry(s.clone()).or_insert(mode);
            }
            match c {
                Constraint::Member(_, p, _)
                | Constraint::ImmPrec(_, p, _)
                | Constraint::InvImmPrec(_, p, _) => {
                    if let Some(m) = used.get_mut(p) {
                        if *m == Mode::Order {
                            *m = Mode::Acyclic;
                        }
                    }
                }
                _ => {}
            }
        }
        // precedences first, so their closures are known when feature rows are tried
        let mut order: Vec<(Sym, Mode)> = used.into_iter().collect();
        order.sort_by_key(|(s, m)| (*m == Mode::Rows, s.clone()));
        let sym_index: HashMap<Sym, usize> = order
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.clone(), i))
            .collect();

        let n = budget.max_universe.min(all_vars.len()).max(1);
        let needed = order.len() * n * n;
        if n > UNIVERSE_LIMIT || needed > budget.max_relation_bits {
            return Err(OracleError::BudgetExceeded {
                needed,
                allowed: budget.max_relation_bits,
            });
        }

        let si = |s: &Sym| sym_index[s];
        let star = |k: &ClosureKind| *k == ClosureKind::Star;
        let constraints = cs
            .iter()
            .map(|c| {
                let v = c.vars();
                let op = match c {
                    Constraint::Eq(..) => Op::Eq,
                    Constraint::Feature(_, f, _) => Op::Feature(si(f)),
                    Constraint::Member(_, r, _) => Op::Member(si(r)),
                    Constraint::Closure(_, p, k, _) => Op::Closure(si(p), star(k)),
                    Constraint::Subset(_, f, g, _) => Op::Subset(si(f), si(g)),
                    Constraint::FirstDaughter(_, f, p, _) => Op::FirstDaughter(si(f), si(p)),
                    Constraint::DomPrec(f, _, p, k, g, _) => {
                        Op::DomPrec(si(f), si(p), star(k), si(g))
                    }
                    Constraint::ImmPrec(_, p, _) => Op::ImmPrec(si(p)),
                    Constraint::InvImmPrec(_, p, _) => Op::InvImmPrec(si(p)),
                };
                Compiled {
                    op,
                    x: var_index[v[0]],
                    y: var_index[v[1]],
                }
            })
            .collect();

        Ok(Problem {
            n,
            vars: all_vars.len(),
            modes: order.into_iter().map(|(_, m)| m).collect(),
            constraints,
        })
    }

    fn solve(&self) -> bool {
        let mut assign = vec![0usize; self.vars];
        self.assignments(0, 0, &mut assign)
    }

    /// Restricted growth strings: each partition of the variables into at
    /// most `n` blocks is visited once.
    fn assignments(&self, i: usize, blocks: usize, assign: &mut Vec<usize>) -> bool {
        if i == self.vars {
            return self.search_relations(assign);
        }
        for b in 0..=blocks.min(self.n - 1) {
            assign[i] = b;
            if self.assignments(i + 1, blocks.max(b + 1), assign) {
                return true;
            }
        }
        false
    }

    fn search_relations(&self, assign: &[usize]) -> bool {
        // A level fixes one whole precedence relation or one feature row.
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
        enum Level {
            Whole(usize),
            Row(usize, usize),
        }
        let mut reads: Vec<Vec<Level>> = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let (ax, ay) = (assign[c.x], assign[c.y]);
            let r = match c.op {
                Op::Eq => vec![],
                Op::Feature(f) | Op::Member(f) if self.modes[f] == Mode::Rows => {
                    vec![Level::Row(f, ax)]
                }
                Op::Feature(p) | Op::Member(p) | Op::ImmPrec(p) | Op::InvImmPrec(p) => {
                    vec![Level::Whole(p)]
                }
                Op::Closure(p, _) => vec![Level::Whole(p)],
                Op::Subset(f, g) => vec![Level::Row(f, ax), Level::Row(g, ay)],
                Op::FirstDaughter(f, p) => vec![Level::Whole(p), Level::Row(f, ax)],
                Op::DomPrec(f, p, _, g) => {
                    vec![Level::Whole(p), Level::Row(f, ax), Level::Row(g, ay)]
                }
            };
            reads.push(r);
        }
        let mut levels: Vec<Level> = reads.iter().flatten().copied().collect();
        levels.sort();
        levels.dedup();
        let mut checks: Vec<Vec<usize>> = vec![Vec::new(); levels.len()];
        for (ci, r) in reads.iter().enumerate() {
            match r.iter().max() {
                None => {
                    if !self.holds(&self.constraints[ci], assign, &[]) {
                        return false;
                    }
                }
                Some(last) => {
                    let li = levels.binary_search(last).unwrap();
                    checks[li].push(ci);
                }
            }
        }
        let plan: Vec<(Level, Vec<usize>)> = levels.into_iter().zip(checks).collect();
        let mut rels = vec![Rel::default(); self.modes.len()];
        self.descend(&plan, 0, assign, &mut rels, &|lv| match lv {
            Level::Whole(s) => (s, None),
            Level::Row(s, e) => (s, Some(e)),
        })
    }

    fn descend<L: Copy>(
        &self,
        plan: &[(L, Vec<usize>)],
        depth: usize,
        assign: &[usize],
        rels: &mut Vec<Rel>,
        decode: &dyn Fn(L) -> (usize, Option<usize>),
    ) -> bool {
        let Some((level, checks)) = plan.get(depth) else {
            return true;
        };
        let (s, row) = decode(*level);
        let ok = |rels: &Vec<Rel>| checks.iter().all(|&ci| self.holds(&self.constraints[ci], assign, rels));
        match row {
            Some(e) => {
                let full: usize = 1 << self.n;
                for r in 0..full {
                    rels[s].rows[e] = r as Row;
                    if ok(rels) && self.descend(plan, depth + 1, assign, rels, decode) {
                        return true;
                    }
                }
                rels[s].rows[e] = 0;
                false
            }
            None => {
                let candidates = relations(self.n, self.modes[s]);
                for cand in candidates.iter() {
                    rels[s] = *cand;
                    if ok(rels) && self.descend(plan, depth + 1, assign, rels, decode) {
                        return true;
                    }
                }
                rels[s] = Rel::default();
                false
            }
        }
    }

    fn holds(&self, c: &Compiled, assign: &[usize], rels: &[Rel]) -> bool {
        let (ax, ay) = (assign[c.x], assign[c.y]);
        let n = self.n;
        let related = |p: usize, star: bool, a: usize, b: usize| (star && a == b) || bit(rels[p].plus[a], b);
        match c.op {
            Op::Eq => ax == ay,
            Op::Feature(f) | Op::ImmPrec(f) => rels[f].rows[ax] == 1 << ay,
            Op::Member(r) => bit(rels[r].rows[ax], ay),
            Op::Closure(p, star) => related(p, star, ax, ay),
            Op::Subset(f, g) => rels[g].rows[ay] & !rels[f].rows[ax] == 0,
            Op::FirstDaughter(f, p) => {
                let vals = rels[f].rows[ax];
                bit(vals, ay) && (0..n).all(|e| !bit(vals, e) || related(p, true, ay, e))
            }
            Op::DomPrec(f, p, star, g) => {
                let (l, r) = (rels[f].rows[ax], rels[g].rows[ay]);
                (0..n).all(|e1| {
                    !bit(l, e1) || (0..n).all(|e2| !bit(r, e2) || related(p, star, e1, e2))
                })
            }
            Op::InvImmPrec(p) => (0..n).all(|e| bit(rels[p].rows[e], ax) == (e == ay)),
        }
    }
}

fn closure_rows(rows: &[Row; UNIVERSE_LIMIT], n: usize) -> [Row; UNIVERSE_LIMIT] {
    let mut m = *rows;
    for k in 0..n {
        for i in 0..n {
            if bit(m[i], k) {
                m[i] |= m[k];
            }
        }
    }
    m
}

/// Strict partial orders on `0..n`, each listed once.
fn partial_orders(n: usize) -> Vec<[Row; UNIVERSE_LIMIT]> {
    let mut orders = vec![[0 as Row; UNIVERSE_LIMIT]];
    for k in 0..n {
        let mut next = Vec::new();
        for t in &orders {
            let below = |d: usize| -> Row { (0..k).filter(|&e| bit(t[e], d)).fold(0, |a, e| a | 1 << e) };
            for down in 0..(1usize << k) {
                let down = down as Row;
                if (0..k).any(|d| bit(down, d) && below(d) & !down != 0) {
                    continue;
                }
                for up in 0..(1usize << k) {
                    let up = up as Row;
                    if up & down != 0 || (0..k).any(|u| bit(up, u) && t[u] & !up != 0) {
                        continue;
                    }
                    if (0..k).any(|d| bit(down, d) && t[d] & up != up) {
                        continue;
                    }
                    let mut r = *t;
                    for d in 0..k {
                        if bit(down, d) {
                            r[d] |= 1 << k;
                        }
                    }
                    r[k] = up;
                    next.push(r);
                }
            }
        }
        orders = next;
    }
    orders
}

/// Acyclic relations on `0..n`: for each partial order, its covering
/// relation plus any subset of the remaining pairs.
fn acyclic_relations(n: usize) -> Vec<Rel> {
    let mut out = Vec::new();
    for t in partial_orders(n) {
        let mut cover = t;
        let mut extra = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if bit(t[a], b) && (0..n).any(|m| bit(t[a], m) && bit(t[m], b)) {
                    cover[a] &= !(1 << b);
                    extra.push((a, b));
                }
            }
        }
        for mask in 0..(1usize << extra.len()) {
            let mut rows = cover;
            for (i, &(a, b)) in extra.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    rows[a] |= 1 << b;
                }
            }
            out.push(Rel { rows, plus: t });
        }
    }
    out
}

type Cache = Mutex<HashMap<(usize, bool), Arc<Vec<Rel>>>>;

fn relations(n: usize, mode: Mode) -> Arc<Vec<Rel>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let key = (n, mode == Mode::Order);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return v.clone();
    }
    let list = if mode == Mode::Order {
        partial_orders(n)
            .into_iter()
            .map(|t| Rel { rows: t, plus: closure_rows(&t, n) })
            .collect()
    } else {
        acyclic_relations(n)
    };
    let list = Arc::new(list);
    cache.lock().unwrap().insert(key, list.clone());
    list
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{evaluate, Assignment, Interpretation};
    use crate::syntax::parse_program;

    fn sat(text: &str) -> bool {
        brute_force_consistent(&parse_program(text).unwrap(), OracleBudget::default()).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        let counts: Vec<usize> = (0..=4).map(|n| partial_orders(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 3, 19, 219]);
        let dags: Vec<usize> = (1..=4).map(|n| acyclic_relations(n).len()).collect();
        assert_eq!(dags, vec![1, 3, 25, 543]);
    }

    #[test]
    fn small_examples() {
        assert!(!sat("prec p; x = E p+ : x ."));
        assert!(sat(""));
        assert!(sat("feature f; x = f : y . x = f : z ."));
        assert!(sat("prec p; x = E p+ : y ."));
        assert!(!sat("prec p; x = p : y . x = E p+ : w . w = E p+ : y ."));
        assert!(!sat("prec p; x = p : y . x = E p : z . y = E p+ : z ."));
        assert!(sat("prec p; x = p : y . w = p : y ."));
        assert!(!sat("prec p; x = p^-1 : y . x = p^-1 : z . y = E p+ : z ."));
        assert!(!sat("feature f; prec p; x = [f p 1] y . x = f :>= f(x) . f(x) : p+ : f(x) ."));
    }

    #[test]
    fn budget_is_enforced() {
        let st = parse_program("feature f, g, h; prec p; x = f : y . y = g : z . z = h : w . w = E p+ : x .").unwrap();
        let err = brute_force_consistent(&st, OracleBudget { max_universe: 4, max_relation_bits: 32 });
        assert_eq!(err, Err(OracleError::BudgetExceeded { needed: 64, allowed: 32 }));
    }

    #[test]
    fn soundness_check_flags_a_bad_rewrite() {
        let before = parse_program("prec p; x = E p+ : y .").unwrap();
        let bad = parse_program("prec p; x = E p+ : x .").unwrap();
        let good = parse_program("prec p; x = E p+ : y . x = E p* : y .").unwrap();
        let budget = OracleBudget::default();
        assert_eq!(rule_soundness_check(&before, &bad, budget), Ok(false));
        assert_eq!(rule_soundness_check(&before, &good, budget), Ok(true));
    }

    /// The packed checker and the reference evaluator agree on random
    /// structures.
    #[test]
    fn compiled_matches_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let text = "feature f, g; prec p;
            a = f : b . a = E f : c . a = E p : b . a = E p+ : c . b = E p* : a .
            a = f :>= g(b) . a = [f p 1] b . f(a) : p+ : g(c) . g(b) : p* : f(c) .
            a = p : c . b = p^-1 : a .";
        let store = parse_program(text).unwrap();
        let budget = OracleBudget { max_universe: 3, max_relation_bits: 64 };
        let problem = Problem::compile(&store, budget).unwrap();
        let syms = ["p", "f", "g"];
        for _ in 0..3000 {
            let mut rels = vec![Rel::default(); 3];
            let mut interp = Interpretation::new(["0", "1", "2"]);
            for (i, name) in syms.iter().enumerate() {
                let mut pairs = Vec::new();
                for a in 0..3 {
                    for b in 0..3 {
                        if rng.gen_bool(0.3) {
                            rels[i].rows[a] |= 1 << b;
                            pairs.push((a, b));
                        }
                    }
                }
                rels[i].plus = closure_rows(&rels[i].rows, 3);
                let sort = if i == 0 { Sort::Precedence } else { Sort::Feature };
                interp.set_relation(&Sym::new(name), sort, pairs);
            }
            let vals: Vec<usize> = (0..3).map(|_| rng.gen_range(0..3)).collect();
            let assign: Assignment = ["a", "b", "c"]
                .iter()
                .zip(&vals)
                .map(|(v, &e)| (Var::new(v), e))
                .collect();
            for (c, compiled) in store.constraints().zip(&problem.constraints) {
                assert_eq!(
                    problem.holds(compiled, &vals, &rels),
                    evaluate(&interp, &assign, c),
                    "{c:?}"
                );
            }
        }
    }
}
