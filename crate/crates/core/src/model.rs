//! Signatures, variables, constraints and the constraint store.
//!
//! A [`ConstraintStore`] is a deduplicated set of constraints over
//! representative variables together with the binding map produced by
//! equations. The lexicographically smallest variable of a class is always
//! its representative.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Prefix of the feature symbols generated by first-daughter expansion.
pub const RESERVED_PREFIX: &str = "fd$";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("symbol `{0}` is declared both as a feature and as a precedence")]
    SortClash(String),
    #[error("symbol `{0}` uses the reserved prefix `fd$`")]
    ReservedName(String),
    #[error("symbol `{0}` is declared twice")]
    DuplicateName(String),
    #[error("`{0}` is not a valid identifier")]
    InvalidName(String),
    #[error("symbol `{0}` is not declared")]
    UndeclaredSymbol(String),
    #[error("symbol `{symbol}` is a {found}, expected a {expected}")]
    SortMismatch {
        symbol: String,
        expected: Sort,
        found: Sort,
    },
    #[error("variable `{0}` occurs twice in the order")]
    DuplicateVariable(String),
}

/// Relation symbol name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym(Arc<str>);

impl Sym {
    pub fn new(name: &str) -> Self {
        Sym(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Variable name. Variables are not declared; any identifier is one.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Feature,
    Precedence,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Feature => f.write_str("feature"),
            Sort::Precedence => f.write_str("precedence"),
        }
    }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Declared relation symbols, split into features and precedences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    features: BTreeSet<Sym>,
    precedences: BTreeSet<Sym>,
}

impl Signature {
    /// Builds a signature from user declarations.
    pub fn declare<F, P>(features: F, precedences: P) -> Result<Self, ModelError>
    where
        F: IntoIterator,
        F::Item: AsRef<str>,
        P: IntoIterator,
        P::Item: AsRef<str>,
    {
        let mut sig = Signature::default();
        for name in features {
            sig.declare_symbol(name.as_ref(), Sort::Feature)?;
        }
        for name in precedences {
            sig.declare_symbol(name.as_ref(), Sort::Precedence)?;
        }
        Ok(sig)
    }

    /// Adds one user symbol. Redeclaring with the same sort is an error, as
    /// is redeclaring with the other sort.
    pub fn declare_symbol(&mut self, name: &str, sort: Sort) -> Result<Sym, ModelError> {
        if name.starts_with(RESERVED_PREFIX) {
            return Err(ModelError::ReservedName(name.to_string()));
        }
        if !is_identifier(name) {
            return Err(ModelError::InvalidName(name.to_string()));
        }
        let sym = Sym::new(name);
        match self.sort_of(&sym) {
            Some(s) if s == sort => Err(ModelError::DuplicateName(name.to_string())),
            Some(_) => Err(ModelError::SortClash(name.to_string())),
            None => {
                match sort {
                    Sort::Feature => self.features.insert(sym.clone()),
                    Sort::Precedence => self.precedences.insert(sym.clone()),
                };
                Ok(sym)
            }
        }
    }

    /// Registers the reserved feature used by the first-daughter expansion
    /// of the pair `(f, p)`.
    pub(crate) fn first_daughter_feature(&mut self, f: &Sym, p: &Sym) -> Sym {
        let sym = Sym::new(&format!("{RESERVED_PREFIX}{f}${p}"));
        self.features.insert(sym.clone());
        sym
    }

    pub fn sort_of(&self, sym: &Sym) -> Option<Sort> {
        if self.features.contains(sym) {
            Some(Sort::Feature)
        } else if self.precedences.contains(sym) {
            Some(Sort::Precedence)
        } else {
            None
        }
    }

    pub fn features(&self) -> impl Iterator<Item = &Sym> {
        self.features.iter()
    }

    pub fn precedences(&self) -> impl Iterator<Item = &Sym> {
        self.precedences.iter()
    }

    pub fn symbol_count(&self) -> usize {
        self.features.len() + self.precedences.len()
    }

    pub fn expect(&self, sym: &Sym, sort: Sort) -> Result<(), ModelError> {
        match self.sort_of(sym) {
            None => Err(ModelError::UndeclaredSymbol(sym.to_string())),
            Some(found) if found != sort => Err(ModelError::SortMismatch {
                symbol: sym.to_string(),
                expected: sort,
                found,
            }),
            Some(_) => Ok(()),
        }
    }

    pub fn expect_declared(&self, sym: &Sym) -> Result<Sort, ModelError> {
        self.sort_of(sym)
            .ok_or_else(|| ModelError::UndeclaredSymbol(sym.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClosureKind {
    /// Reflexive-transitive closure `p*`.
    Star,
    /// Transitive closure `p+`.
    Plus,
}

impl ClosureKind {
    pub fn suffix(self) -> &'static str {
        match self {
            ClosureKind::Star => "*",
            ClosureKind::Plus => "+",
        }
    }
}

/// One atomic constraint. Conjunction is the store itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    /// `x = y`
    Eq(Var, Var),
    /// `x = f:y`, `y` is the only f-value of `x`.
    Feature(Var, Sym, Var),
    /// `x = ∃r:y`, `y` is one of the r-values of `x`; `r` may be of either sort.
    Member(Var, Sym, Var),
    /// `x = ∃p+:y` / `x = ∃p*:y`
    Closure(Var, Sym, ClosureKind, Var),
    /// `x = f:⊇g(y)`
    Subset(Var, Sym, Sym, Var),
    /// `x = [f p 1] y`
    FirstDaughter(Var, Sym, Sym, Var),
    /// `f(x):p+:g(y)` / `f(x):p*:g(y)`
    DomPrec(Sym, Var, Sym, ClosureKind, Sym, Var),
    /// `x = p:y`, functional precedence.
    ImmPrec(Var, Sym, Var),
    /// `x = p⁻¹:y`, `y` is the only p-predecessor of `x`.
    InvImmPrec(Var, Sym, Var),
}

impl Constraint {
    /// Variables in order of occurrence.
    pub fn vars(&self) -> Vec<&Var> {
        use Constraint::*;
        match self {
            Eq(x, y)
            | Feature(x, _, y)
            | Member(x, _, y)
            | Closure(x, _, _, y)
            | Subset(x, _, _, y)
            | FirstDaughter(x, _, _, y)
            | DomPrec(_, x, _, _, _, y)
            | ImmPrec(x, _, y)
            | InvImmPrec(x, _, y) => vec![x, y],
        }
    }

    /// Symbols in order of occurrence.
    pub fn symbols(&self) -> Vec<&Sym> {
        use Constraint::*;
        match self {
            Eq(..) => vec![],
            Feature(_, f, _) | Member(_, f, _) | Closure(_, f, _, _) => vec![f],
            ImmPrec(_, p, _) | InvImmPrec(_, p, _) => vec![p],
            Subset(_, f, g, _) | FirstDaughter(_, f, g, _) => vec![f, g],
            DomPrec(f, _, p, _, g, _) => vec![f, p, g],
        }
    }

    /// Applies `map` to every variable.
    pub fn map_vars(&self, mut map: impl FnMut(&Var) -> Var) -> Constraint {
        use Constraint::*;
        match self {
            Eq(x, y) => Eq(map(x), map(y)),
            Feature(x, f, y) => Feature(map(x), f.clone(), map(y)),
            Member(x, f, y) => Member(map(x), f.clone(), map(y)),
            Closure(x, p, k, y) => Closure(map(x), p.clone(), *k, map(y)),
            Subset(x, f, g, y) => Subset(map(x), f.clone(), g.clone(), map(y)),
            FirstDaughter(x, f, p, y) => FirstDaughter(map(x), f.clone(), p.clone(), map(y)),
            DomPrec(f, x, p, k, g, y) => {
                DomPrec(f.clone(), map(x), p.clone(), *k, g.clone(), map(y))
            }
            ImmPrec(x, p, y) => ImmPrec(map(x), p.clone(), map(y)),
            InvImmPrec(x, p, y) => InvImmPrec(map(x), p.clone(), map(y)),
        }
    }

    /// Sort discipline check against a signature.
    pub fn check(&self, sig: &Signature) -> Result<(), ModelError> {
        use Constraint::*;
        match self {
            Eq(..) => Ok(()),
            Feature(_, f, _) => sig.expect(f, Sort::Feature),
            Member(_, r, _) => sig.expect_declared(r).map(|_| ()),
            Closure(_, p, _, _) | ImmPrec(_, p, _) | InvImmPrec(_, p, _) => {
                sig.expect(p, Sort::Precedence)
            }
            Subset(_, f, g, _) => {
                sig.expect(f, Sort::Feature)?;
                sig.expect(g, Sort::Feature)
            }
            FirstDaughter(_, f, p, _) => {
                sig.expect(f, Sort::Feature)?;
                sig.expect(p, Sort::Precedence)
            }
            DomPrec(f, _, p, _, g, _) => {
                sig.expect(f, Sort::Feature)?;
                sig.expect(p, Sort::Precedence)?;
                sig.expect(g, Sort::Feature)
            }
        }
    }

    /// Constraints that hold in every interpretation and are never stored.
    pub fn is_tautology(&self) -> bool {
        match self {
            Constraint::Eq(x, y) => x == y,
            Constraint::Closure(x, _, ClosureKind::Star, y) => x == y,
            _ => false,
        }
    }

    /// `x = ∃p+:x`, the only inconsistency marker.
    pub fn is_clash(&self) -> bool {
        matches!(self, Constraint::Closure(x, _, ClosureKind::Plus, y) if x == y)
    }
}

/// Deduplicated conjunction of constraints plus the equivalence bindings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintStore {
    signature: Signature,
    constraints: BTreeSet<Constraint>,
    bindings: BTreeMap<Var, Var>,
}

impl ConstraintStore {
    pub fn new(signature: Signature) -> Self {
        ConstraintStore {
            signature,
            constraints: BTreeSet::new(),
            bindings: BTreeMap::new(),
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub(crate) fn signature_mut(&mut self) -> &mut Signature {
        &mut self.signature
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter()
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.constraints.contains(c)
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Non-representative variables mapped to their representatives.
    pub fn bindings(&self) -> &BTreeMap<Var, Var> {
        &self.bindings
    }

    /// Adds a constraint after sort-checking it. An equation is recorded in
    /// the binding map immediately; every other constraint is rewritten
    /// through the bindings and inserted once.
    pub fn add_constraint(&mut self, c: Constraint) -> Result<(), ModelError> {
        c.check(&self.signature)?;
        match c {
            Constraint::Eq(x, y) => {
                self.merge(&x, &y);
            }
            other => {
                self.insert(other);
            }
        }
        Ok(())
    }

    /// Records `x = y` as a pending equation instead of merging it. Pending
    /// equations are consumed by the (Equals) rule.
    pub fn defer_equation(&mut self, x: &Var, y: &Var) -> bool {
        let (x, y) = (self.representative(x), self.representative(y));
        if x == y {
            return false;
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        self.constraints.insert(Constraint::Eq(a, b))
    }

    /// Canonical member of the class of `x`.
    pub fn representative(&self, x: &Var) -> Var {
        self.bindings.get(x).unwrap_or(x).clone()
    }

    /// Rewrites through the binding map and inserts; tautologies are dropped.
    /// Returns the stored form when the set changed.
    pub(crate) fn insert(&mut self, c: Constraint) -> Option<Constraint> {
        let c = if self.bindings.is_empty() {
            c
        } else {
            c.map_vars(|v| self.representative(v))
        };
        if let Constraint::Eq(x, y) = &c {
            if x == y {
                return None;
            }
            if x > y {
                let flipped = Constraint::Eq(y.clone(), x.clone());
                return self.constraints.insert(flipped.clone()).then_some(flipped);
            }
        }
        if c.is_tautology() {
            return None;
        }
        self.constraints.insert(c.clone()).then_some(c)
    }

    pub(crate) fn remove(&mut self, c: &Constraint) -> bool {
        self.constraints.remove(c)
    }

    /// Merges the classes of `x` and `y`. Returns `(kept, eliminated)` when
    /// two distinct classes were joined, together with the constraints whose
    /// rewritten forms were newly inserted.
    pub(crate) fn merge(&mut self, x: &Var, y: &Var) -> Option<Merge> {
        let (x, y) = (self.representative(x), self.representative(y));
        if x == y {
            return None;
        }
        let (kept, gone) = if x < y { (x, y) } else { (y, x) };
        for rep in self.bindings.values_mut() {
            if *rep == gone {
                *rep = kept.clone();
            }
        }
        self.bindings.insert(gone.clone(), kept.clone());

        let touched: Vec<Constraint> = self
            .constraints
            .iter()
            .filter(|c| c.vars().into_iter().any(|v| *v == gone))
            .cloned()
            .collect();
        let mut rewritten = Vec::new();
        for c in &touched {
            self.constraints.remove(c);
            let moved = c.map_vars(|v| if *v == gone { kept.clone() } else { v.clone() });
            if let Some(stored) = self.insert(moved) {
                rewritten.push(stored);
            }
        }
        Some(Merge {
            kept,
            eliminated: gone,
            removed: touched,
            rewritten,
        })
    }

    /// Representative variables occurring in some constraint.
    pub fn variables(&self) -> BTreeSet<Var> {
        self.constraints
            .iter()
            .flat_map(|c| c.vars().into_iter().cloned())
            .collect()
    }

    /// Every variable mentioned, including bound ones.
    pub fn all_variables(&self) -> BTreeSet<Var> {
        let mut vars = self.variables();
        for (k, v) in &self.bindings {
            vars.insert(k.clone());
            vars.insert(v.clone());
        }
        vars
    }

    /// `{ y | x = ∃f:y ∈ C ∨ x = f:y ∈ C }`
    pub fn succ_feature(&self, x: &Var, f: &Sym) -> BTreeSet<Var> {
        let x = self.representative(x);
        self.constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::Feature(a, g, b) | Constraint::Member(a, g, b)
                    if *a == x && g == f =>
                {
                    Some(b.clone())
                }
                _ => None,
            })
            .collect()
    }

    /// Closure successors of `x` over `p` that are not reachable through an
    /// intermediate closure successor (the transitive reduction).
    pub fn succ_reduced(&self, x: &Var, p: &Sym) -> BTreeSet<Var> {
        let x = self.representative(x);
        let edges = self.closure_edges(p);
        let empty = BTreeSet::new();
        let out = edges.get(&x).unwrap_or(&empty);
        out.iter()
            .filter(|y| {
                !out.iter()
                    .any(|z| edges.get(z).is_some_and(|next| next.contains(*y)))
            })
            .cloned()
            .collect()
    }

    /// Adjacency of all closure constraints (either kind) over `p`.
    pub fn closure_edges(&self, p: &Sym) -> BTreeMap<Var, BTreeSet<Var>> {
        let mut edges: BTreeMap<Var, BTreeSet<Var>> = BTreeMap::new();
        for c in &self.constraints {
            if let Constraint::Closure(a, q, _, b) = c {
                if q == p {
                    edges.entry(a.clone()).or_default().insert(b.clone());
                }
            }
        }
        edges
    }

    /// Smallest clash constraint present, if any.
    pub fn clash(&self) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.is_clash())
    }
}

/// Result of joining two variable classes.
#[derive(Debug, Clone)]
pub(crate) struct Merge {
    pub kept: Var,
    pub eliminated: Var,
    /// Constraints that mentioned the eliminated variable.
    pub removed: Vec<Constraint>,
    /// Their rewritten forms that were not already present.
    pub rewritten: Vec<Constraint>,
}
