//! Decomposition of skew-symmetric rotation generators into orthogonal
//! rotation planes and rates, construction of the rotation 2-form and the
//! rotating-velocity 1-form, and asymptotic fastness classification.

use nalgebra::DMatrix;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::form::{position_one_form, velocity_vector, DifferentialForm, MultiIndex, SymbolicForm};
use crate::symbol::{Symbol, SymbolTable};
use crate::{Rat, ScalarExpr};

/// Ingest tolerance: |A_ij + A_ji| must stay below this, per entry.
pub const SKEW_TOLERANCE: f64 = 1e-12;

/// Rates below `SNAP_RATIO × max rate` are treated as exact zero axes.
pub const SNAP_RATIO: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not skew-symmetric: max |A + Aᵀ| entry = {max_violation:.3e}")]
    NotSkew { max_violation: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("Schur iteration failed to converge within {iterations} iterations")]
    ConvergenceFailed { iterations: usize },
    #[error("fastness classification needs at least one nonzero rate")]
    AllZeroRates,
    #[error("rates must be nonnegative, got {0}")]
    NegativeRate(f64),
    #[error("ratio threshold must exceed 1, got {0}")]
    BadThreshold(f64),
    #[error("invalid rotation plane ({0}, {1}) for dimension {2}")]
    BadPlane(u32, u32, u32),
    #[error("matrix parse error: {0}")]
    Parse(String),
}

/// A validated d×d skew-symmetric matrix (symmetrized on ingest).
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix {
    inner: DMatrix<f64>,
}

impl SkewMatrix {
    /// Validate skewness to [`SKEW_TOLERANCE`] per entry, then store the
    /// exactly skew part `(A - Aᵀ)/2`.
    pub fn new(a: DMatrix<f64>) -> Result<Self, SpectralError> {
        if a.nrows() != a.ncols() {
            return Err(SpectralError::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        let sym = (&a + a.transpose()) * 0.5;
        let max_violation = sym.iter().fold(0.0f64, |m, v| m.max(v.abs() * 2.0));
        if max_violation > SKEW_TOLERANCE {
            return Err(SpectralError::NotSkew { max_violation });
        }
        let skew = (&a - a.transpose()) * 0.5;
        Ok(SkewMatrix { inner: skew })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectralError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(SpectralError::NotSquare {
                rows: n,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        SkewMatrix::new(m)
    }

    /// Plain-text ingest: one row per line, whitespace-separated entries.
    pub fn from_text(text: &str) -> Result<Self, SpectralError> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            rows.push(row.map_err(|e| SpectralError::Parse(format!("{e}: '{line}'")))?);
        }
        if rows.is_empty() {
            return Err(SpectralError::Parse("empty matrix".into()));
        }
        SkewMatrix::from_rows(&rows)
    }

    /// JSON ingest: an array of row arrays.
    pub fn from_json(text: &str) -> Result<Self, SpectralError> {
        let rows: Vec<Vec<f64>> =
            serde_json::from_str(text).map_err(|e| SpectralError::Parse(e.to_string()))?;
        SkewMatrix::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }
}

/// Result of block-diagonalizing a skew matrix: `A = Q Λ Qᵀ` with Λ in
/// 2×2-block canonical form.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Orthogonal change of basis; planes occupy leading column pairs.
    pub q: DMatrix<f64>,
    /// Column index pairs `(p, q)` of Q carrying each rotation plane,
    /// 0-based, ordered by descending rate.
    pub planes: Vec<(usize, usize)>,
    /// Rotation rates, positive, sorted descending.
    pub rates: Vec<f64>,
    /// Columns of Q spanning the fixed (zero-rate) axes.
    pub zero_axes: Vec<usize>,
    /// max-abs entry of `A − QΛQᵀ`.
    pub residual: f64,
}

impl SpectralDecomposition {
    /// Rebuild the canonical block matrix Λ.
    pub fn lambda(&self) -> DMatrix<f64> {
        let d = self.q.nrows();
        let mut m = DMatrix::zeros(d, d);
        for (plane, rate) in self.planes.iter().zip(&self.rates) {
            m[(plane.0, plane.1)] = *rate;
            m[(plane.1, plane.0)] = -*rate;
        }
        m
    }

    pub fn to_json(&self) -> serde_json::Value {
        let q_rows: Vec<Vec<f64>> = (0..self.q.nrows())
            .map(|i| self.q.row(i).iter().cloned().collect())
            .collect();
        serde_json::json!({
            "Q": q_rows,
            "planes": self.planes,
            "rates": self.rates,
            "zero_axes": self.zero_axes,
            "residual": self.residual,
        })
    }
}

/// Block-diagonalize a skew matrix via its real Schur form.
///
/// Skew matrices are normal, so the quasi-triangular Schur factor is block
/// diagonal up to roundoff; each 2×2 block is normalized to
/// `[[0, λ], [-λ, 0]]` with `λ > 0` by column swaps folded into Q, planes
/// are sorted by descending rate, and rates below `SNAP_RATIO × max rate`
/// snap to zero axes. When a zero axis exists, `det Q = +1` is enforced by
/// flipping one zero-axis column.
pub fn block_diagonalize(a: &SkewMatrix) -> Result<SpectralDecomposition, SpectralError> {
    let d = a.dim();
    let m = a.matrix().clone();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let (mut q, t) = if scale == 0.0 {
        (DMatrix::identity(d, d), DMatrix::zeros(d, d))
    } else {
        const MAX_ITER: usize = 30_000;
        match nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, MAX_ITER) {
            Some(schur) => schur.unpack(),
            None => {
                // the QR iteration can stall on the perfectly paired ±iλ
                // spectrum of a skew matrix; rebuild the invariant planes
                // from the symmetric eigenproblem of −A² instead
                let q = pair_planes_from_squared(&m, scale)?;
                let t = q.transpose() * &m * &q;
                (q, t)
            }
        }
    };

    // walk the quasi-diagonal: 2x2 blocks have a nonzero subdiagonal entry
    let block_tol = 64.0 * f64::EPSILON * scale;
    let mut raw_planes: Vec<(usize, f64)> = Vec::new(); // (first column, rate)
    let mut raw_zeros: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < d {
        if i + 1 < d && t[(i + 1, i)].abs() > block_tol {
            let b = (t[(i, i + 1)] - t[(i + 1, i)]) * 0.5;
            if b < 0.0 {
                q.swap_columns(i, i + 1);
            }
            raw_planes.push((i, b.abs()));
            i += 2;
        } else {
            raw_zeros.push(i);
            i += 1;
        }
    }

    // snap sub-threshold rates to zero axes
    let max_rate = raw_planes.iter().map(|p| p.1).fold(0.0f64, f64::max);
    let snap = SNAP_RATIO * max_rate;
    let (planes_kept, demoted): (Vec<_>, Vec<_>) =
        raw_planes.into_iter().partition(|(_, r)| *r > snap);
    for (col, _) in demoted {
        raw_zeros.push(col);
        raw_zeros.push(col + 1);
    }
    raw_zeros.sort_unstable();

    // order planes by descending rate and pack their columns first
    let mut order: Vec<usize> = (0..planes_kept.len()).collect();
    order.sort_by(|&x, &y| planes_kept[y].1.partial_cmp(&planes_kept[x].1).unwrap());
    let mut col_order: Vec<usize> = Vec::with_capacity(d);
    let mut rates = Vec::with_capacity(planes_kept.len());
    let mut planes = Vec::with_capacity(planes_kept.len());
    for &pi in &order {
        let (col, rate) = planes_kept[pi];
        planes.push((col_order.len(), col_order.len() + 1));
        col_order.push(col);
        col_order.push(col + 1);
        rates.push(rate);
    }
    let zero_axes: Vec<usize> = (0..raw_zeros.len()).map(|n| col_order.len() + n).collect();
    col_order.extend(raw_zeros.iter().copied());

    let mut q_sorted = DMatrix::zeros(d, d);
    for (new_col, &old_col) in col_order.iter().enumerate() {
        q_sorted.set_column(new_col, &q.column(old_col));
    }

    if q_sorted.determinant() < 0.0 {
        if let Some(&zc) = zero_axes.last() {
            let flipped = -q_sorted.column(zc);
            q_sorted.set_column(zc, &flipped);
        }
        // with all planes active and det = -1 there is no rate-preserving
        // fix; Q stays orthogonal but not special
    }

    let mut dec = SpectralDecomposition {
        q: q_sorted,
        planes,
        rates,
        zero_axes,
        residual: 0.0,
    };
    let rebuilt = &dec.q * dec.lambda() * dec.q.transpose();
    dec.residual = (a.matrix() - rebuilt)
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));

    debug_assert!(
        (dec.q.transpose() * &dec.q - DMatrix::<f64>::identity(d, d))
            .iter()
            .all(|v| v.abs() < 1e-10),
        "Q lost orthogonality"
    );
    Ok(dec)
}

// Orthogonal basis ordered as (u_1, Au_1/|Au_1|, u_2, …, zero axes) built
// from eigenvectors of the symmetric matrix −A²; A maps each rotation
// eigenplane to itself, so u and Au/λ span it.
fn pair_planes_from_squared(
    m: &DMatrix<f64>,
    scale: f64,
) -> Result<DMatrix<f64>, SpectralError> {
    let d = m.nrows();
    let se = (-(m * m)).symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap()
    });

    let mut plane_cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut zero_cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    let orthogonalize = |v: &mut nalgebra::DVector<f64>,
                         used: &[nalgebra::DVector<f64>],
                         also: &[nalgebra::DVector<f64>]| {
        for basis in used.iter().chain(also) {
            let dot = basis.dot(v);
            *v -= basis * dot;
        }
    };
    for &idx in &order {
        let mut u = se.eigenvectors.column(idx).clone_owned();
        orthogonalize(&mut u, &plane_cols, &zero_cols);
        let norm = u.norm();
        if norm < 0.5 {
            continue; // partner of an already-extracted plane vector
        }
        u /= norm;
        let w = m * &u;
        let rho = w.norm();
        if rho <= 1e-13 * scale {
            zero_cols.push(u);
        } else {
            let mut v = w / rho;
            orthogonalize(&mut v, &plane_cols, &zero_cols);
            let vn = v.norm();
            if vn < 0.5 {
                return Err(SpectralError::ConvergenceFailed { iterations: 0 });
            }
            v /= vn;
            plane_cols.push(u);
            plane_cols.push(v);
        }
    }
    if plane_cols.len() + zero_cols.len() != d {
        return Err(SpectralError::ConvergenceFailed { iterations: 0 });
    }
    let mut q = DMatrix::zeros(d, d);
    for (i, col) in plane_cols.iter().chain(&zero_cols).enumerate() {
        q.set_column(i, col);
    }
    Ok(q)
}

/// Per-plane rotation rate: a formal symbol `λ_i` or an exact value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Rate {
    Symbolic,
    Value(#[serde(serialize_with = "serialize_rat")] Rat),
}

fn serialize_rat<S: serde::Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(r)
}

impl Rate {
    pub fn value(&self) -> Option<&Rat> {
        match self {
            Rate::Symbolic => None,
            Rate::Value(r) => Some(r),
        }
    }
}

/// One rotation plane: an ordered axis pair, its rate, and its asymptotic
/// order class (0 = not fast; larger = faster, `λ ~ ε^{-order}`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlaneRotation {
    pub axes: (u32, u32),
    pub rate: Rate,
    pub order: u32,
}

/// A rotation generator in canonical coordinates: pairwise-disjoint planes
/// with rates and fastness classes. Equal positive orders mean
/// "simultaneously fast", distinct positive orders "independently fast".
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RotationSpec {
    pub dim: u32,
    pub planes: Vec<PlaneRotation>,
}

impl RotationSpec {
    pub fn new(dim: u32, planes: Vec<PlaneRotation>) -> Result<Self, SpectralError> {
        let mut seen = vec![false; dim as usize + 1];
        for p in &planes {
            let (a, b) = p.axes;
            if a == 0 || b == 0 || a > dim || b > dim || a >= b {
                return Err(SpectralError::BadPlane(a, b, dim));
            }
            for axis in [a, b] {
                if seen[axis as usize] {
                    return Err(SpectralError::BadPlane(a, b, dim));
                }
                seen[axis as usize] = true;
            }
        }
        Ok(RotationSpec { dim, planes })
    }

    /// Canonical plane layout `(1,2), (3,4), …` with symbolic rates, all
    /// simultaneously fast (order 1).
    pub fn canonical_symbolic(dim: u32, n_planes: u32) -> Self {
        let planes = (0..n_planes)
            .map(|i| PlaneRotation {
                axes: (2 * i + 1, 2 * i + 2),
                rate: Rate::Symbolic,
                order: 1,
            })
            .collect();
        RotationSpec::new(dim, planes).expect("canonical layout is valid")
    }

    /// Canonical layout with explicit order classes per plane.
    pub fn canonical_symbolic_with_orders(dim: u32, orders: &[u32]) -> Self {
        let planes = orders
            .iter()
            .enumerate()
            .map(|(i, &o)| PlaneRotation {
                axes: (2 * i as u32 + 1, 2 * i as u32 + 2),
                rate: Rate::Symbolic,
                order: o,
            })
            .collect();
        RotationSpec::new(dim, planes).expect("canonical layout is valid")
    }

    /// Canonical layout with numeric rates; orders via [`classify_fastness`]
    /// at the default threshold of 10. Zero rates become zero-order planes.
    pub fn canonical_values(dim: u32, rates: &[Rat]) -> Result<Self, SpectralError> {
        let f64_rates: Vec<f64> = rates.iter().map(|r| r.to_f64().unwrap()).collect();
        let orders = classify_fastness(&f64_rates, 10.0)?;
        Self::canonical_values_with_orders(dim, rates, &orders)
    }

    pub fn canonical_values_with_orders(
        dim: u32,
        rates: &[Rat],
        orders: &[u32],
    ) -> Result<Self, SpectralError> {
        assert_eq!(rates.len(), orders.len());
        let planes = rates
            .iter()
            .zip(orders)
            .enumerate()
            .map(|(i, (r, &o))| PlaneRotation {
                axes: (2 * i as u32 + 1, 2 * i as u32 + 2),
                rate: Rate::Value(r.clone()),
                order: if r.is_zero() { 0 } else { o },
            })
            .collect();
        RotationSpec::new(dim, planes)
    }

    /// The rate of plane `i` as a scalar expression (symbol `λ_{i+1}` or
    /// the exact value).
    pub fn rate_expr(&self, i: usize) -> ScalarExpr {
        match &self.planes[i].rate {
            Rate::Symbolic => ScalarExpr::var(Symbol::rate(i as u32 + 1)),
            Rate::Value(r) => ScalarExpr::constant(r.clone()),
        }
    }

    /// Numeric rates; symbolic planes have no value here.
    pub fn rate_values(&self) -> Option<Vec<Rat>> {
        self.planes.iter().map(|p| p.rate.value().cloned()).collect()
    }

    pub fn orders(&self) -> Vec<u32> {
        self.planes.iter().map(|p| p.order).collect()
    }

    pub fn has_fast_plane(&self) -> bool {
        self.planes.iter().any(|p| p.order > 0 && !p.rate_is_zero())
    }

    /// Axes not covered by any plane.
    pub fn zero_axes(&self) -> Vec<u32> {
        let mut covered = vec![false; self.dim as usize + 1];
        for p in &self.planes {
            covered[p.axes.0 as usize] = true;
            covered[p.axes.1 as usize] = true;
        }
        (1..=self.dim).filter(|&a| !covered[a as usize]).collect()
    }

    pub fn table(&self) -> SymbolTable {
        SymbolTable::new(self.dim)
    }
}

impl PlaneRotation {
    pub fn rate_is_zero(&self) -> bool {
        matches!(&self.rate, Rate::Value(r) if r.is_zero())
    }
}

/// `Ω_R = Σ λ_i dx_{a_i} ∧ dx_{b_i}` in the canonical (post-Q) coordinates.
/// Planes with an exactly zero numeric rate contribute nothing.
pub fn rotation_two_form(spec: &RotationSpec) -> SymbolicForm {
    let mut f = DifferentialForm::zero(spec.dim, 2);
    for (i, p) in spec.planes.iter().enumerate() {
        if p.rate_is_zero() {
            continue;
        }
        f.add_term(MultiIndex::new(vec![p.axes.0, p.axes.1]), spec.rate_expr(i));
    }
    f
}

/// The frame rotating-velocity 1-form `U_R = ⋆(⋆Ω_R ∧ X)`; equals
/// `Σ λ_i (x_{a_i} dx_{b_i} − x_{b_i} dx_{a_i})`.
///
/// `dU_R = 2 Ω_R` is asserted after construction: a failure means the Hodge
/// sign convention broke.
pub fn rotating_velocity_form(spec: &RotationSpec) -> SymbolicForm {
    let om = rotation_two_form(spec);
    if om.is_zero() {
        return DifferentialForm::zero(spec.dim, 1);
    }
    let x = position_one_form(spec.dim);
    let ur = om
        .hodge_star()
        .wedge(&x)
        .expect("same ambient dimension")
        .hodge_star();
    let table = spec.table();
    let dur = ur.exterior_derivative(&table).expect("polynomial coefficients");
    let two_om = om.scale(&ScalarExpr::constant(Rat::from_integer(2.into())));
    assert!(
        dur.sub(&two_om).expect("same degree").is_zero(),
        "dU_R != 2Ω_R: Hodge sign convention violated"
    );
    ur
}

/// Split `L_u U_R` into its exact and interior parts
/// `(d ι_u U_R, ι_u d U_R)`; the first feeds the centrifugal force, the
/// second is the Coriolis term `2 ι_u Ω_R`.
pub fn centrifugal_coriolis_split(spec: &RotationSpec) -> (SymbolicForm, SymbolicForm) {
    let table = spec.table();
    let u = velocity_vector(spec.dim);
    let ur = rotating_velocity_form(spec);
    let exact = ur
        .interior_product(&u)
        .expect("degree 1")
        .exterior_derivative(&table)
        .expect("jet budget");
    let interior = ur
        .exterior_derivative(&table)
        .expect("jet budget")
        .interior_product(&u)
        .expect("degree 2");
    (exact, interior)
}

/// Cluster nonzero rates into asymptotic order classes by successive ratio
/// gaps of at least `ratio_threshold`; zero rates get class 0, the slowest
/// fast cluster class 1, faster clusters higher classes.
pub fn classify_fastness(rates: &[f64], ratio_threshold: f64) -> Result<Vec<u32>, SpectralError> {
    if ratio_threshold <= 1.0 {
        return Err(SpectralError::BadThreshold(ratio_threshold));
    }
    if let Some(&neg) = rates.iter().find(|r| **r < 0.0) {
        return Err(SpectralError::NegativeRate(neg));
    }
    if rates.iter().all(|r| *r == 0.0) {
        return Err(SpectralError::AllZeroRates);
    }
    let mut idx: Vec<usize> = (0..rates.len()).filter(|&i| rates[i] > 0.0).collect();
    idx.sort_by(|&a, &b| rates[b].partial_cmp(&rates[a]).unwrap());

    // cluster ids in descending-rate order, 0 = fastest cluster
    let mut cluster_of = vec![0usize; idx.len()];
    let mut n_clusters = 1usize;
    for w in 1..idx.len() {
        if rates[idx[w - 1]] / rates[idx[w]] >= ratio_threshold {
            n_clusters += 1;
        }
        cluster_of[w] = n_clusters - 1;
    }
    let mut classes = vec![0u32; rates.len()];
    for (w, &i) in idx.iter().enumerate() {
        classes[i] = (n_clusters - cluster_of[w]) as u32;
    }
    Ok(classes)
}
