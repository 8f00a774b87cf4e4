//! Exterior algebra on Euclidean d-space over the jet ring.
//!
//! A [`DifferentialForm`] is a degree-k form stored as a map from strictly
//! increasing multi-indices to coefficients. The algebraic operations
//! (wedge, Hodge star, interior product) are generic over the coefficient
//! scalar, so the same code serves exact symbolic forms and evaluated
//! numeric ones; differentiation is specific to the symbolic scalar ring.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::poly::{Coeff, Monomial};
use crate::symbol::{Symbol, SymbolError, SymbolTable};
use crate::{Rat, ScalarExpr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("ambient dimension mismatch: {0} vs {1}")]
    DimensionMismatch(u32, u32),
    #[error("interior product of a degree-0 form is undefined")]
    InteriorOfScalar,
    #[error("vector field has {found} components, dimension is {dim}")]
    VectorLength { dim: u32, found: usize },
    #[error("unbound symbol {0} in evaluation")]
    UnboundSymbol(String),
    #[error("form of degree {0} is not a 2-form")]
    NotTwoForm(u32),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Strictly increasing tuple of axis labels from `1..=d`; the basis label of
/// `dx_{i1} ∧ … ∧ dx_{ik}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(axes: Vec<u32>) -> Self {
        assert!(
            axes.windows(2).all(|w| w[0] < w[1]) && axes.first().is_none_or(|&a| a >= 1),
            "multi-index must be strictly increasing and 1-based"
        );
        MultiIndex(axes)
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn degree(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn axes(&self) -> &[u32] {
        &self.0
    }

    pub fn contains(&self, axis: u32) -> bool {
        self.0.binary_search(&axis).is_ok()
    }

    /// Sorted complement within `1..=d`.
    pub fn complement(&self, dim: u32) -> MultiIndex {
        MultiIndex((1..=dim).filter(|a| !self.contains(*a)).collect())
    }

    /// Merge with a disjoint index, returning the permutation sign, or
    /// `None` when an axis repeats.
    pub fn merge(&self, other: &MultiIndex) -> Option<(i32, MultiIndex)> {
        // sign = parity of the number of (i in self, j in other) pairs with j < i
        let mut inversions = 0usize;
        for &i in &self.0 {
            for &j in &other.0 {
                if j == i {
                    return None;
                }
                if j < i {
                    inversions += 1;
                }
            }
        }
        let mut merged: Vec<u32> = self.0.iter().chain(other.0.iter()).copied().collect();
        merged.sort_unstable();
        let sign = if inversions.is_multiple_of(2) { 1 } else { -1 };
        Some((sign, MultiIndex(merged)))
    }

    /// Axis at position `t` removed, with the alternating sign `(-1)^t`.
    pub fn remove_at(&self, t: usize) -> (i32, u32, MultiIndex) {
        let mut axes = self.0.clone();
        let axis = axes.remove(t);
        let sign = if t.is_multiple_of(2) { 1 } else { -1 };
        (sign, axis, MultiIndex(axes))
    }

    /// Sign of the permutation taking `(1..=d)` to `(self, complement)`.
    pub fn hodge_sign(&self, dim: u32) -> i32 {
        let comp = self.complement(dim);
        // parity of inversions in the concatenation (self, comp)
        let seq: Vec<u32> = self.0.iter().chain(comp.0.iter()).copied().collect();
        let mut inversions = 0usize;
        for a in 0..seq.len() {
            for b in (a + 1)..seq.len() {
                if seq[a] > seq[b] {
                    inversions += 1;
                }
            }
        }
        if inversions.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        write!(f, "dx")?;
        for a in &self.0 {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Degree-k differential form in ambient dimension d with coefficients `C`.
///
/// Invariants: every key has the stated degree, no key maps to a zero
/// coefficient, and a degree above the dimension forces the empty (zero)
/// map. Values are immutable after construction in the sense that all
/// operations return fresh forms.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DifferentialForm<C> {
    dim: u32,
    degree: u32,
    terms: BTreeMap<MultiIndex, C>,
}

pub type SymbolicForm = DifferentialForm<ScalarExpr>;
pub type NumericForm = DifferentialForm<f64>;

impl<C: Coeff> DifferentialForm<C> {
    pub fn zero(dim: u32, degree: u32) -> Self {
        DifferentialForm { dim, degree, terms: BTreeMap::new() }
    }

    /// Basis form `dx_I` with coefficient one.
    pub fn basis(dim: u32, index: MultiIndex) -> Self {
        let mut f = DifferentialForm::zero(dim, index.degree());
        f.add_term(index, C::one());
        f
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &C)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, index: &MultiIndex) -> C {
        self.terms.get(index).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, index: MultiIndex, c: C) {
        assert_eq!(index.degree(), self.degree, "multi-index degree mismatch");
        assert!(
            index.axes().last().is_none_or(|&a| a <= self.dim),
            "axis out of range"
        );
        if c.is_zero() {
            return;
        }
        match self.terms.entry(index) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, FormError> {
        if self.dim != other.dim {
            return Err(FormError::DimensionMismatch(self.dim, other.dim));
        }
        assert_eq!(self.degree, other.degree, "cannot add forms of mixed degree");
        let mut out = self.clone();
        for (i, c) in &other.terms {
            out.add_term(i.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FormError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        DifferentialForm {
            dim: self.dim,
            degree: self.degree,
            terms: self
                .terms
                .iter()
                .map(|(i, c)| (i.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = DifferentialForm::zero(self.dim, self.degree);
        for (i, k) in &self.terms {
            out.add_term(i.clone(), k.clone() * c.clone());
        }
        out
    }

    /// Wedge product. Degrees add; the result is the zero form when the
    /// degrees exceed the dimension or all index merges collide.
    pub fn wedge(&self, other: &Self) -> Result<Self, FormError> {
        if self.dim != other.dim {
            return Err(FormError::DimensionMismatch(self.dim, other.dim));
        }
        let mut out = DifferentialForm::zero(self.dim, self.degree + other.degree);
        if self.degree + other.degree > self.dim {
            return Ok(out);
        }
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                if let Some((sign, merged)) = ia.merge(ib) {
                    let mut c = ca.clone() * cb.clone();
                    if sign < 0 {
                        c = -c;
                    }
                    out.add_term(merged, c);
                }
            }
        }
        Ok(out)
    }

    /// k-fold wedge power.
    pub fn wedge_pow(&self, k: u32) -> Result<Self, FormError> {
        let mut out = DifferentialForm::basis(self.dim, MultiIndex::empty());
        for _ in 0..k {
            out = out.wedge(self)?;
        }
        Ok(out)
    }

    /// Euclidean Hodge dual with the orientation `dx_1 ∧ … ∧ dx_d`:
    /// `⋆dx_I = sign(I, I^c) dx_{I^c}`.
    pub fn hodge_star(&self) -> Self {
        let mut out = DifferentialForm::zero(self.dim, self.dim.saturating_sub(self.degree));
        for (i, c) in &self.terms {
            let sign = i.hodge_sign(self.dim);
            let comp = i.complement(self.dim);
            out.add_term(comp, if sign < 0 { -c.clone() } else { c.clone() });
        }
        out
    }

    /// Interior product (contraction on the first slot) with a vector field
    /// whose components live in the same coefficient ring.
    pub fn interior_product(&self, v: &[C]) -> Result<Self, FormError> {
        if v.len() != self.dim as usize {
            return Err(FormError::VectorLength { dim: self.dim, found: v.len() });
        }
        if self.degree == 0 {
            return Err(FormError::InteriorOfScalar);
        }
        let mut out = DifferentialForm::zero(self.dim, self.degree - 1);
        for (i, c) in &self.terms {
            for t in 0..i.degree() as usize {
                let (sign, axis, rest) = i.remove_at(t);
                let comp = &v[(axis - 1) as usize];
                if comp.is_zero() {
                    continue;
                }
                let mut term = comp.clone() * c.clone();
                if sign < 0 {
                    term = -term;
                }
                out.add_term(rest, term);
            }
        }
        Ok(out)
    }
}

/// Symbolic velocity field `u = Σ u_i ∂_i` (components are scalar
/// expressions).
pub fn velocity_vector(dim: u32) -> Vec<ScalarExpr> {
    (1..=dim).map(|i| ScalarExpr::var(Symbol::jet0(i))).collect()
}

/// Velocity 1-form `U = Σ u_i dx_i`.
pub fn velocity_one_form(dim: u32) -> SymbolicForm {
    let mut f = DifferentialForm::zero(dim, 1);
    for i in 1..=dim {
        f.add_term(MultiIndex::new(vec![i]), ScalarExpr::var(Symbol::jet0(i)));
    }
    f
}

/// Position 1-form `X = Σ x_i dx_i`.
pub fn position_one_form(dim: u32) -> SymbolicForm {
    let mut f = DifferentialForm::zero(dim, 1);
    for i in 1..=dim {
        f.add_term(MultiIndex::new(vec![i]), ScalarExpr::var(Symbol::coord(i)));
    }
    f
}

impl SymbolicForm {
    /// Exterior derivative under the jet chain rule:
    /// `d x_i = dx_i`, `d u_i = Σ_j u_{i,j} dx_j`, `d u_{i,j} = Σ_k u_{i,jk} dx_k`,
    /// `d λ_i = 0`. Fails with a jet-overflow error when a coefficient
    /// contains a maximum-order jet that would need differentiating.
    pub fn exterior_derivative(&self, table: &SymbolTable) -> Result<Self, FormError> {
        debug_assert_eq!(table.dim(), self.dim);
        let mut out = DifferentialForm::zero(self.dim, self.degree + 1);
        if self.degree + 1 > self.dim {
            // degree-d coefficients may still overflow the jet budget, but
            // their derivative cannot produce a (d+1)-form
            return Ok(out);
        }
        for (index, coeff) in &self.terms {
            for axis in 1..=self.dim {
                if index.contains(axis) {
                    // dx_axis ∧ dx_index = 0; skip without differentiating
                    continue;
                }
                let dc = partial_derivative(coeff, axis, table)?;
                if dc.is_zero() {
                    continue;
                }
                let axis_index = MultiIndex::new(vec![axis]);
                let (sign, merged) = axis_index
                    .merge(index)
                    .expect("axis known to be absent from the index");
                let term = if sign < 0 { -dc } else { dc };
                out.add_term(merged, term);
            }
        }
        Ok(out)
    }

    /// Lie derivative along `v` by the Cartan formula
    /// `L_v = ι_v ∘ d + d ∘ ι_v`.
    pub fn lie_derivative(
        &self,
        v: &[ScalarExpr],
        table: &SymbolTable,
    ) -> Result<Self, FormError> {
        let term1 = self.exterior_derivative(table)?.interior_product(v)?;
        if self.degree == 0 {
            // ι_v of a scalar is zero; only ι_v(df) remains
            return Ok(term1);
        }
        let term2 = self.interior_product(v)?.exterior_derivative(table)?;
        term1.add(&term2)
    }

    /// (min, max) total degree in jet symbols across all terms, counted with
    /// multiplicity; `None` for the zero form.
    pub fn jet_degree_range(&self) -> Option<(u32, u32)> {
        let mut range: Option<(u32, u32)> = None;
        for coeff in self.terms.values() {
            if let Some((lo, hi)) = coeff.degree_range_where(Symbol::is_jet) {
                range = Some(match range {
                    None => (lo, hi),
                    Some((l, h)) => (l.min(lo), h.max(hi)),
                });
            }
        }
        range
    }

    /// Exact substitution of every symbol, then conversion to floating
    /// point.
    pub fn evaluate(&self, bindings: &Bindings) -> Result<NumericForm, FormError> {
        let mut out = DifferentialForm::zero(self.dim, self.degree);
        for (index, coeff) in &self.terms {
            let exact = coeff
                .eval_with(&|s| bindings.get(s))
                .map_err(|s| FormError::UnboundSymbol(s.to_string()))?;
            let val = exact.to_f64().expect("rational fits in f64");
            out.add_term(index.clone(), val);
        }
        Ok(out)
    }
}

impl Serialize for SymbolicForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Term<'a> {
            index: &'a [u32],
            coeff: String,
        }
        let mut state = serde::Serializer::serialize_struct(s, "DifferentialForm", 3)?;
        use serde::ser::SerializeStruct;
        state.serialize_field("d", &self.dim)?;
        state.serialize_field("k", &self.degree)?;
        let terms: Vec<Term> = self
            .terms
            .iter()
            .map(|(i, c)| Term { index: i.axes(), coeff: c.to_string() })
            .collect();
        state.serialize_field("terms", &terms)?;
        state.end()
    }
}

impl fmt::Display for SymbolicForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (i, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            if i.degree() == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "({c}) {i}")?;
            }
        }
        Ok(())
    }
}

/// Exact values bound to symbols for evaluation.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    map: BTreeMap<Symbol, Rat>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn set(&mut self, s: Symbol, v: Rat) -> &mut Self {
        self.map.insert(s, v);
        self
    }

    /// Bind all coordinates from a point (converted exactly from `f64`).
    pub fn set_point(&mut self, point: &[f64]) -> &mut Self {
        for (i, x) in point.iter().enumerate() {
            self.map
                .insert(Symbol::coord(i as u32 + 1), Rat::from_float(*x).expect("finite"));
        }
        self
    }

    pub fn set_rate(&mut self, plane: u32, v: Rat) -> &mut Self {
        self.map.insert(Symbol::rate(plane), v);
        self
    }

    pub fn set_jet0(&mut self, comp: u32, v: Rat) -> &mut Self {
        self.map.insert(Symbol::jet0(comp), v);
        self
    }

    pub fn set_jet1(&mut self, comp: u32, axis: u32, v: Rat) -> &mut Self {
        self.map.insert(Symbol::jet1(comp, axis), v);
        self
    }

    fn get(&self, s: &Symbol) -> Option<Rat> {
        if let Some(v) = self.map.get(s) {
            return Some(v.clone());
        }
        // trig atoms derive from the bound coordinate when absent
        match s {
            Symbol::Cos(i) => self
                .map
                .get(&Symbol::Coord(*i))
                .and_then(|x| Rat::from_float(x.to_f64()?.cos())),
            Symbol::Sin(i) => self
                .map
                .get(&Symbol::Coord(*i))
                .and_then(|x| Rat::from_float(x.to_f64()?.sin())),
            _ => None,
        }
    }
}

/// Nullspace of the skew matrix built from a 2-form at a point.
#[derive(Clone, Debug, Serialize)]
pub struct KernelResult {
    pub dimension: usize,
    pub rank: usize,
    /// Orthonormal kernel basis vectors, each of length d.
    pub basis: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

/// Kernel of a 2-form evaluated at a point: vectors `v` with `ι_v a = 0`.
///
/// The 2-form coefficients give the skew matrix `A_{ij} = a_{ij}` (i < j);
/// rank is decided by singular values with a relative threshold of
/// `1e-10 × σ_max`, which is scale-free for the paired spectra of skew
/// matrices.
pub fn kernel_of_two_form(
    form: &SymbolicForm,
    bindings: &Bindings,
) -> Result<KernelResult, FormError> {
    if form.degree() != 2 {
        return Err(FormError::NotTwoForm(form.degree()));
    }
    let d = form.dim() as usize;
    let numeric = form.evaluate(bindings)?;
    let mut a = DMatrix::<f64>::zeros(d, d);
    for (index, c) in numeric.terms() {
        let (i, j) = (index.axes()[0] as usize - 1, index.axes()[1] as usize - 1);
        a[(i, j)] = *c;
        a[(j, i)] = -*c;
    }
    let svd = a.svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let v_t = svd.v_t.expect("requested");
    let mut basis = Vec::new();
    for (r, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol {
            basis.push(v_t.row(r).iter().cloned().collect::<Vec<f64>>());
        }
    }
    // zero rows of V^T are not produced for zero matrices; fall back to the
    // full identity basis
    if smax == 0.0 {
        basis = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    let rank = d - basis.len();
    Ok(KernelResult {
        dimension: basis.len(),
        rank,
        basis,
        singular_values: svd.singular_values.iter().cloned().collect(),
    })
}

// Partial derivative of a scalar expression with respect to `x_axis`.
pub(crate) fn partial_derivative(
    expr: &ScalarExpr,
    axis: u32,
    table: &SymbolTable,
) -> Result<ScalarExpr, FormError> {
    let mut out = ScalarExpr::zero();
    for (mono, coeff) in expr.terms() {
        // product rule over factors of the monomial
        for (pos, (sym, exp)) in mono.powers().iter().enumerate() {
            let Some((sign, dsym)) = table.derivative(*sym, axis)? else {
                continue;
            };
            // e * s^(e-1) * ds * (other factors)
            let mut powers: Vec<(Symbol, u32)> = Vec::with_capacity(mono.powers().len() + 1);
            for (q, (s2, e2)) in mono.powers().iter().enumerate() {
                let e = if q == pos { e2 - 1 } else { *e2 };
                if e > 0 {
                    powers.push((*s2, e));
                }
            }
            if let Some(ds) = dsym {
                powers.push((ds, 1));
            }
            let mut c = coeff.clone() * Rat::from_integer((*exp).into());
            if sign < 0 {
                c = -c;
            }
            out.add_term(c, Monomial::from_powers(powers));
        }
    }
    Ok(out)
}
