//! Linearized rotating-frame normal modes: exact dispersion polynomials,
//! root branches, and consistency of the vortical modes with the
//! constraint sets.
//!
//! The normal-mode system couples `iϖ û + 2 ι_û Ω_R + i k Π̂ = 0` with
//! incompressibility `k·û = 0`. Its determinant is computed exactly over
//! polynomials in ϖ with Gaussian-rational coefficients; a unit imaginary
//! phase is factored out, leaving a real polynomial whose roots are the
//! wave frequencies. Branch labels use an exact test with the wavevector
//! kept symbolic, so "natural" versus "imposed" vortical modes are decided
//! by k-dependence rather than numerics.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::poly::{determinant, Poly, UniPoly};
use crate::spectral::RotationSpec;
use crate::symbol::Symbol;
use crate::tpt::ConstraintSet;
use crate::{CRat, Rat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("wavevector must be nonzero")]
    ZeroWavevector,
    #[error("wavevector has {found} components, dimension is {dim}")]
    WavevectorLength { dim: u32, found: usize },
    #[error("exact determinant supports dimensions up to 10, got {0}")]
    DimensionTooLarge(u32),
    #[error("normal-mode analysis needs numeric rates")]
    SymbolicRates,
    #[error("determinant has no global unit-imaginary phase (coefficient {0})")]
    PhaseStructure(String),
    #[error("nullspace at root {root} is ill-conditioned: σ gap ratio {ratio:.3e}")]
    IllConditionedNullspace { root: f64, ratio: f64 },
    #[error("no vortical root in the dispersion result")]
    NoVorticalRoot,
    #[error("companion-matrix eigensolve failed to converge")]
    RootSolveFailed,
    #[error("deflated dispersion polynomial is not even in ϖ")]
    ParityStructure,
    #[error(transparent)]
    Tpt(#[from] crate::tpt::TptError),
}

/// The (d+1)×(d+1) normal-mode system for one wavevector.
///
/// Rows `1..d` carry `iϖ` on the diagonal, the `∓2λ` plane couplings and
/// `i k_j` in the last column; the last row is `(k_1, …, k_d, 0)`.
#[derive(Clone, Debug)]
pub struct NormalModeMatrix {
    pub dim: u32,
    pub spec: RotationSpec,
    pub rates: Vec<Rat>,
    pub wavevector: Vec<Rat>,
    entries: Vec<Vec<UniPoly<CRat>>>,
}

fn c_real(r: Rat) -> CRat {
    CRat::new(r, Rat::zero())
}

fn c_imag(r: Rat) -> CRat {
    CRat::new(Rat::zero(), r)
}

/// Build the normal-mode matrix for numeric rates and a nonzero wavevector.
pub fn build_matrix(spec: &RotationSpec, k: &[Rat]) -> Result<NormalModeMatrix, WaveError> {
    let d = spec.dim;
    if d > 10 {
        return Err(WaveError::DimensionTooLarge(d));
    }
    if k.len() != d as usize {
        return Err(WaveError::WavevectorLength { dim: d, found: k.len() });
    }
    if k.iter().all(Rat::is_zero) {
        return Err(WaveError::ZeroWavevector);
    }
    let rates = spec.rate_values().ok_or(WaveError::SymbolicRates)?;

    let n = d as usize + 1;
    let zero = UniPoly::zero;
    let mut entries = vec![vec![zero(); n]; n];
    for row in 0..d as usize {
        // iϖ on the diagonal
        entries[row][row] = UniPoly::linear(CRat::zero(), c_imag(Rat::one()));
        // i k_j in the pressure column
        entries[row][n - 1] = UniPoly::constant(c_imag(k[row].clone()));
        // k_j in the incompressibility row
        entries[n - 1][row] = UniPoly::constant(c_real(k[row].clone()));
    }
    for (p, plane) in spec.planes.iter().enumerate() {
        let (a, b) = (plane.axes.0 as usize - 1, plane.axes.1 as usize - 1);
        let two_lam = Rat::from_integer(2.into()) * rates[p].clone();
        entries[a][b] = UniPoly::constant(c_real(-two_lam.clone()));
        entries[b][a] = UniPoly::constant(c_real(two_lam));
    }

    let m = NormalModeMatrix { dim: d, spec: spec.clone(), rates, wavevector: k.to_vec(), entries };
    m.check_pattern();
    Ok(m)
}

impl NormalModeMatrix {
    // the coupling pattern is an invariant of the construction
    fn check_pattern(&self) {
        let n = self.dim as usize + 1;
        assert!(self.entries[n - 1][n - 1].is_zero(), "last diagonal entry must be 0");
        for (p, plane) in self.spec.planes.iter().enumerate() {
            let (a, b) = (plane.axes.0 as usize - 1, plane.axes.1 as usize - 1);
            let want = c_real(Rat::from_integer(2.into()) * self.rates[p].clone());
            assert_eq!(self.entries[b][a].coefficient(0), want);
            assert_eq!(self.entries[a][b].coefficient(0), -want);
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &UniPoly<CRat> {
        &self.entries[i][j]
    }

    /// Numeric matrix at a fixed frequency.
    pub fn at_frequency(&self, w: f64) -> DMatrix<Complex64> {
        let n = self.dim as usize + 1;
        DMatrix::from_fn(n, n, |i, j| {
            let p = &self.entries[i][j];
            let c0 = p.coefficient(0);
            let c1 = p.coefficient(1);
            let base = Complex64::new(c0.re.to_f64().unwrap(), c0.im.to_f64().unwrap());
            let lin = Complex64::new(c1.re.to_f64().unwrap(), c1.im.to_f64().unwrap());
            base + lin * Complex64::new(w, 0.0)
        })
    }
}

/// Real dispersion polynomial in ϖ (ascending coefficients, exact).
#[derive(Clone, Debug, PartialEq)]
pub struct DispersionPoly {
    pub coeffs: Vec<Rat>,
}

impl DispersionPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn order_at_zero(&self) -> usize {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .unwrap_or(self.coeffs.len())
    }

    pub fn coeff_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap())
    }
}

// Factor a global unit-imaginary phase out of an exact complex polynomial.
fn strip_phase(det: UniPoly<CRat>) -> Result<DispersionPoly, WaveError> {
    if det.is_zero() {
        return Ok(DispersionPoly { coeffs: vec![] });
    }
    let lead = det.coeffs().last().expect("nonzero").clone();
    let real_lead = !lead.re.is_zero();
    let mut coeffs = Vec::with_capacity(det.coeffs().len());
    for c in det.coeffs() {
        let v = if real_lead { c.re.clone() } else { c.im.clone() };
        let other = if real_lead { c.im.clone() } else { c.re.clone() };
        if !other.is_zero() {
            return Err(WaveError::PhaseStructure(format!("{}+{}i", c.re, c.im)));
        }
        coeffs.push(v);
    }
    // leading coefficient positive
    if coeffs.last().unwrap() < &Rat::zero() {
        for c in &mut coeffs {
            *c = -c.clone();
        }
    }
    Ok(DispersionPoly { coeffs })
}

/// Exact determinant of the normal-mode matrix, reduced to a real
/// polynomial in ϖ. For d = 4 the degree is 3; in general it is d − 1.
pub fn dispersion_polynomial(m: &NormalModeMatrix) -> Result<DispersionPoly, WaveError> {
    let det = determinant(&m.entries);
    strip_phase(det)
}

// ϖ-adic order of the determinant with the wavevector symbolic: the number
// of leading ϖ coefficients that vanish identically as polynomials in k.
#[allow(clippy::needless_range_loop)]
fn structural_zero_order(spec: &RotationSpec, rates: &[Rat]) -> usize {
    type KPoly = Poly<u32, CRat>;
    let d = spec.dim as usize;
    let n = d + 1;
    let mut entries = vec![vec![UniPoly::<KPoly>::zero(); n]; n];
    for row in 0..d {
        entries[row][row] = UniPoly::linear(KPoly::zero(), KPoly::constant(c_imag(Rat::one())));
        entries[row][n - 1] = UniPoly::constant(
            KPoly::var(row as u32 + 1).scale(&c_imag(Rat::one())),
        );
        entries[n - 1][row] = UniPoly::constant(KPoly::var(row as u32 + 1));
    }
    for (p, plane) in spec.planes.iter().enumerate() {
        let (a, b) = (plane.axes.0 as usize - 1, plane.axes.1 as usize - 1);
        let two_lam = Rat::from_integer(2.into()) * rates[p].clone();
        entries[a][b] = UniPoly::constant(KPoly::constant(c_real(-two_lam.clone())));
        entries[b][a] = UniPoly::constant(KPoly::constant(c_real(two_lam)));
    }
    let det = determinant(&entries);
    det.coeffs()
        .iter()
        .position(|c| !c.is_zero())
        .unwrap_or(det.coeffs().len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// ϖ = 0 for every wavevector.
    NaturalVortical,
    /// ϖ = 0 only for this particular wavevector.
    ImposedVortical,
    Wave,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::NaturalVortical => "natural_vortical",
            Branch::ImposedVortical => "imposed_vortical",
            Branch::Wave => "wave",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DispersionRoot {
    pub value: f64,
    pub multiplicity: u32,
    pub branch: Branch,
    /// Nullspace basis of M(ϖ) at this root (length d+1 vectors, the last
    /// entry is the pressure amplitude).
    pub nullspace: Vec<Vec<Complex64>>,
    /// max |M v| over the basis.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct DispersionResult {
    pub poly: DispersionPoly,
    pub roots: Vec<DispersionRoot>,
    /// ϖ-adic order of the determinant with symbolic k.
    pub structural_zero_order: usize,
}

impl DispersionResult {
    pub fn vortical_roots(&self) -> impl Iterator<Item = &DispersionRoot> {
        self.roots.iter().filter(|r| r.branch != Branch::Wave)
    }
}

/// All real roots with multiplicity, branch labels, and nullspace bases.
///
/// Zero roots are deflated exactly from the rational polynomial; the
/// remaining roots come from companion-matrix eigenvalues. A zero root is
/// natural up to the structural order (k-independent) and imposed beyond
/// it.
pub fn dispersion_roots(m: &NormalModeMatrix) -> Result<DispersionResult, WaveError> {
    let poly = dispersion_polynomial(m)?;
    let z_num = poly.order_at_zero();
    let z_struct = structural_zero_order(&m.spec, &m.rates);
    debug_assert!(z_struct <= z_num, "structural zeros are zeros for every k");

    let mut values: Vec<(f64, u32, Branch)> = Vec::new();
    if z_num > 0 {
        let natural = z_struct.min(z_num);
        if natural > 0 {
            values.push((0.0, natural as u32, Branch::NaturalVortical));
        }
        if z_num > natural {
            values.push((0.0, (z_num - natural) as u32, Branch::ImposedVortical));
        }
    }

    // deflate exact zeros; the remainder is even in ϖ (the spectrum comes
    // in ± pairs), so substitute μ = ϖ² before the companion eigensolve —
    // this also sidesteps QR-iteration stalls on ±-symmetric spectra
    let deflated = &poly.coeffs[z_num..];
    if deflated.len() > 1 {
        if deflated.iter().skip(1).step_by(2).any(|c| !c.is_zero()) {
            return Err(WaveError::ParityStructure);
        }
        let mu_coeffs: Vec<f64> = deflated
            .iter()
            .step_by(2)
            .map(|c| c.to_f64().unwrap())
            .collect();
        let mut mu_roots = companion_real_roots(&mu_coeffs)?;
        mu_roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = mu_roots.iter().fold(0.0f64, |a, m| a.max(m.abs()));
        let mut i = 0;
        while i < mu_roots.len() {
            let mut j = i + 1;
            while j < mu_roots.len()
                && (mu_roots[j] - mu_roots[i]).abs() <= 1e-10 * scale.max(1.0)
            {
                j += 1;
            }
            let mu = mu_roots[i..j].iter().sum::<f64>() / (j - i) as f64;
            let w = mu.max(0.0).sqrt();
            values.push((-w, (j - i) as u32, Branch::Wave));
            values.push((w, (j - i) as u32, Branch::Wave));
            i = j;
        }
    }

    // nullspace per root value
    let mut roots = Vec::with_capacity(values.len());
    for (value, multiplicity, branch) in values {
        let (nullspace, residual) = nullspace_at(m, value)?;
        roots.push(DispersionRoot { value, multiplicity, branch, nullspace, residual });
    }
    roots.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(DispersionResult { poly, roots, structural_zero_order: z_struct })
}

// Real roots of a real polynomial (ascending coefficients) via
// companion-matrix eigenvalues, with a bounded Schur iteration.
fn companion_real_roots(coeffs: &[f64]) -> Result<Vec<f64>, WaveError> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(vec![]);
    }
    let lead = *coeffs.last().unwrap();
    if n == 1 {
        return Ok(vec![-coeffs[0] / lead]);
    }
    let companion = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if j == n - 1 {
            -coeffs[i] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let schur = nalgebra::linalg::Schur::try_new(companion, f64::EPSILON, 100_000)
        .ok_or(WaveError::RootSolveFailed)?;
    let eig = schur.complex_eigenvalues();
    let scale = eig.iter().fold(0.0f64, |a, e| a.max(e.norm()));
    Ok(eig
        .iter()
        .map(|e| {
            debug_assert!(
                e.im.abs() <= 1e-7 * scale.max(1.0),
                "dispersion roots must be real, got {e}"
            );
            e.re
        })
        .collect())
}

// SVD nullspace of M(ϖ) with the relative threshold 1e-10·σ_max.
//
// The complex system is lifted to its real 2n×2n representation
// [[Re, -Im], [Im, Re]]; its singular values are those of M doubled in
// multiplicity, and real null vectors (x; y) map to complex ones x + iy.
// A complex Gram-Schmidt pass then drops the iv duplicates.
fn nullspace_at(
    m: &NormalModeMatrix,
    w: f64,
) -> Result<(Vec<Vec<Complex64>>, f64), WaveError> {
    let mat = m.at_frequency(w);
    let n = mat.nrows();
    let real = DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
        let e = mat[(i % n, j % n)];
        match (i / n, j / n) {
            (0, 0) | (1, 1) => e.re,
            (0, 1) => -e.im,
            _ => e.im,
        }
    });
    let svd = real.svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-10 * smax.max(f64::MIN_POSITIVE);
    // ambiguous spectrum: values sitting right at the threshold band
    if let Some(sv) = svd
        .singular_values
        .iter()
        .find(|s| **s > tol && **s < 100.0 * tol)
    {
        return Err(WaveError::IllConditionedNullspace { root: w, ratio: sv / smax });
    }
    let v_t = svd.v_t.expect("requested");
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut residual = 0.0f64;
    for (r, s) in svd.singular_values.iter().enumerate() {
        if *s > tol {
            continue;
        }
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(v_t[(r, i)], v_t[(r, n + i)]))
            .collect();
        // project out the directions already kept (iv pairs collapse here)
        for b in &basis {
            let dot: Complex64 = b.iter().zip(&v).map(|(bi, vi)| bi.conj() * vi).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        for vi in &mut v {
            *vi /= Complex64::new(norm, 0.0);
        }
        let mv = &mat * DMatrix::from_column_slice(v.len(), 1, &v);
        residual = residual.max(mv.iter().fold(0.0f64, |a, c| a.max(c.norm())));
        basis.push(v);
    }
    Ok((basis, residual))
}

/// Report of substituting vortical nullspace vectors into a constraint set
/// via `u_{i,j} → i k_j û_i`.
#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub max_residual: f64,
    pub n_vectors: usize,
    pub n_constraints: usize,
}

/// Check the vortical modes of `result` against a constraint set.
///
/// Every constraint coefficient is evaluated at the matrix's numeric
/// rates; the residual is the largest modulus over (constraint ×
/// nullspace vector) pairs.
pub fn check_tpt_consistency(
    m: &NormalModeMatrix,
    result: &DispersionResult,
    cs: &ConstraintSet,
) -> Result<ConsistencyReport, WaveError> {
    let k: Vec<f64> = m.wavevector.iter().map(|r| r.to_f64().unwrap()).collect();
    let vectors: Vec<&Vec<Complex64>> = result
        .vortical_roots()
        .flat_map(|r| r.nullspace.iter())
        .collect();
    if vectors.is_empty() {
        return Err(WaveError::NoVorticalRoot);
    }

    let bind = |s: &Symbol| -> Option<Rat> {
        match s {
            Symbol::Rate(i) => m.rates.get(*i as usize - 1).cloned(),
            _ => None,
        }
    };
    let mut max_residual = 0.0f64;
    for c in &cs.constraints {
        for v in &vectors {
            let mut acc = Complex64::new(0.0, 0.0);
            for (jet, coeff) in c.terms() {
                let Symbol::Jet { comp, d1: axis, d2: 0 } = jet else {
                    continue; // first-order sets only carry u_{i,j}
                };
                let cval = coeff
                    .eval_with(&bind)
                    .expect("constraint coefficients involve only rates")
                    .to_f64()
                    .unwrap();
                let u_hat = v[*comp as usize - 1];
                let ikj = Complex64::new(0.0, k[*axis as usize - 1]);
                acc += ikj * u_hat * cval;
            }
            max_residual = max_residual.max(acc.norm());
        }
    }
    Ok(ConsistencyReport {
        max_residual,
        n_vectors: vectors.len(),
        n_constraints: cs.constraints.len(),
    })
}

/// The published closed form for one of the E⁵ double-rotation dispersion
/// branches, implemented term by term as displayed; used as a reference
/// oracle against the exact solver, never as the solver.
pub fn e5_dispersion_reference(l1: f64, l2: f64, k: &[f64; 5]) -> f64 {
    let (k1, k2, k3, k4, k5) = (k[0], k[1], k[2], k[3], k[4]);
    let (l1_2, l2_2) = (l1 * l1, l2 * l2);
    let (l1_4, l2_4) = (l1_2 * l1_2, l2_2 * l2_2);
    let (k1_2, k2_2, k3_2, k4_2, k5_2) = (k1 * k1, k2 * k2, k3 * k3, k4 * k4, k5 * k5);

    let inner = l2_4 * k1_2 * k1_2
        + l2_4 * k2_2 * k2_2
        + l2_4 * k5_2 * k5_2
        + l1_4 * k3_2 * k3_2
        + l1_4 * k4_2 * k4_2
        + l1_4 * k5_2 * k5_2
        + 2.0 * l2_4 * k2_2 * k5_2
        + 2.0 * l2_4 * k2_2 * k1_2
        + 2.0 * l2_4 * k5_2 * k1_2
        + 2.0 * l1_4 * k4_2 * k3_2
        + 2.0 * l1_4 * k4_2 * k5_2
        + 2.0 * l1_4 * k3_2 * k5_2
        + 2.0 * l2_2 * k2_2 * l1_2 * k4_2
        + 2.0 * l2_2 * k2_2 * l1_2 * k3_2
        + 2.0 * l1_2 * k4_2 * l2_2 * k1_2
        + 2.0 * l1_2 * k3_2 * l2_2 * k1_2
        - 2.0 * k5_2 * l1_2 * l2_2 * k1_2
        - 2.0 * k5_2 * l1_2 * l2_2 * k2_2
        - 2.0 * k5_2 * l1_2 * l2_2 * k3_2
        - 2.0 * k5_2 * l1_2 * l2_2 * k4_2
        - 2.0 * k5_2 * k5_2 * l1_2 * l2_2;
    let linear = l2_2 * k1_2 + l2_2 * k2_2 + l2_2 * k5_2 + l1_2 * k3_2 + l1_2 * k4_2 + l1_2 * k5_2;
    let k_norm = (k1_2 + k2_2 + k3_2 + k4_2 + k5_2).sqrt();
    2.0_f64.sqrt() * (inner.max(0.0).sqrt() + linear).sqrt() / k_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat_from_f64_snapped;
    use num_traits::FromPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64) -> Rat {
        Rat::from_i64(n).unwrap()
    }

    fn rv(xs: &[i64]) -> Vec<Rat> {
        xs.iter().map(|&n| r(n)).collect()
    }

    fn spec4(l1: i64, l2: i64) -> RotationSpec {
        RotationSpec::canonical_values(4, &rv(&[l1, l2])).unwrap()
    }

    #[test]
    fn matrix_pattern_matches_display() {
        // the 5×5 E⁴ system: plane couplings ∓2λ, ik column, k row
        let m = build_matrix(&spec4(1, 2), &rv(&[1, 2, 3, 4])).unwrap();
        assert_eq!(m.entry(0, 1).coefficient(0), c_real(r(-2)));
        assert_eq!(m.entry(1, 0).coefficient(0), c_real(r(2)));
        assert_eq!(m.entry(2, 3).coefficient(0), c_real(r(-4)));
        assert_eq!(m.entry(3, 2).coefficient(0), c_real(r(4)));
        assert_eq!(m.entry(0, 0).coefficient(1), c_imag(r(1)));
        assert_eq!(m.entry(0, 4).coefficient(0), c_imag(r(1)));
        assert_eq!(m.entry(4, 2).coefficient(0), c_real(r(3)));
        assert!(m.entry(4, 4).is_zero());
        // zero-axis rows in d=3 carry only iϖ and ik
        let spec3 = RotationSpec::canonical_values(3, &[r(1)]).unwrap();
        let m3 = build_matrix(&spec3, &rv(&[1, 1, 1])).unwrap();
        assert!(m3.entry(2, 0).is_zero() && m3.entry(2, 1).is_zero());
        assert_eq!(m3.entry(2, 2).coefficient(1), c_imag(r(1)));
    }

    #[test]
    fn zero_wavevector_rejected() {
        assert!(matches!(
            build_matrix(&spec4(1, 1), &rv(&[0, 0, 0, 0])),
            Err(WaveError::ZeroWavevector)
        ));
    }

    #[test]
    fn dimension_limit_enforced() {
        let spec = RotationSpec::canonical_values(11, &rv(&[1])).unwrap();
        let k: Vec<Rat> = (0..11).map(|i| r(i + 1)).collect();
        assert!(matches!(
            build_matrix(&spec, &k),
            Err(WaveError::DimensionTooLarge(11))
        ));
    }

    #[test]
    fn e4_polynomial_pinned_case() {
        // λ=(1,1), k=(1,0,0,0): ϖ³ − 4ϖ, roots {0, ±2}
        let m = build_matrix(&spec4(1, 1), &rv(&[1, 0, 0, 0])).unwrap();
        let p = dispersion_polynomial(&m).unwrap();
        assert_eq!(p.coeffs, vec![r(0), r(-4), r(0), r(1)]);
        let roots = dispersion_roots(&m).unwrap();
        let values: Vec<f64> = roots.roots.iter().map(|x| x.value).collect();
        assert_eq!(values.len(), 3);
        assert!((values[0] + 2.0).abs() < 1e-12);
        assert!(values[1] == 0.0);
        assert!((values[2] - 2.0).abs() < 1e-12);
        assert_eq!(
            roots.roots.iter().filter(|x| x.branch == Branch::NaturalVortical).count(),
            1
        );
    }

    fn e4_closed_form(l1: f64, l2: f64, k: &[f64; 4]) -> f64 {
        let s = l2 * l2 * (k[0] * k[0] + k[1] * k[1]) + l1 * l1 * (k[2] * k[2] + k[3] * k[3]);
        let kn = k.iter().map(|x| x * x).sum::<f64>().sqrt();
        2.0 * s.sqrt() / kn
    }

    #[test]
    fn e4_roots_match_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..50 {
            let l1 = rng.gen_range(1..50);
            let l2 = rng.gen_range(1..50);
            let kk: Vec<i64> = (0..4).map(|_| rng.gen_range(-20..=20)).collect();
            if kk.iter().all(|x| *x == 0) {
                continue;
            }
            let m = build_matrix(&spec4(l1, l2), &rv(&kk)).unwrap();
            let res = dispersion_roots(&m).unwrap();
            let kf: Vec<f64> = kk.iter().map(|&x| x as f64).collect();
            let want = e4_closed_form(l1 as f64, l2 as f64, &kf.try_into().unwrap());
            let pos = res.roots.iter().map(|x| x.value).fold(f64::MIN, f64::max);
            assert!(
                (pos - want).abs() <= 1e-12 * want.max(1.0),
                "λ=({l1},{l2}) k={kk:?}: {pos} vs {want}"
            );
            // natural vortical root present for even d
            assert!(res
                .roots
                .iter()
                .any(|x| x.value == 0.0 && x.branch == Branch::NaturalVortical));
        }
    }

    #[test]
    fn e3_reduction_matches_classical_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let lam = rng.gen_range(1..20);
            let kk: Vec<i64> = (0..3).map(|_| rng.gen_range(-9..=9)).collect();
            if kk.iter().all(|x| *x == 0) || kk[2] == 0 {
                continue;
            }
            let spec = RotationSpec::canonical_values(3, &[r(lam)]).unwrap();
            let m = build_matrix(&spec, &rv(&kk)).unwrap();
            let res = dispersion_roots(&m).unwrap();
            let kn = (kk.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt();
            let want = 2.0 * lam as f64 * (kk[2] as f64).abs() / kn;
            let pos = res.roots.iter().map(|x| x.value).fold(f64::MIN, f64::max);
            assert!((pos - want).abs() <= 1e-12 * want.max(1.0));
            // odd dimension: no natural vortical branch
            assert_eq!(res.structural_zero_order, 0);
        }
    }

    #[test]
    fn no_rotation_gives_pure_zero_polynomial() {
        let spec = RotationSpec::canonical_values_with_orders(4, &rv(&[0, 0]), &[0, 0]).unwrap();
        let m = build_matrix(&spec, &rv(&[1, 2, 0, 1])).unwrap();
        let p = dispersion_polynomial(&m).unwrap();
        // ϖ^{d-1} up to the |k|² scale
        assert_eq!(p.order_at_zero(), 3);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn imposed_vortical_in_simple_rotation() {
        // λ2 = 0, k3 = k4 = 0: the wave pair collapses onto ϖ = 0
        let m = build_matrix(&spec4(1, 0), &rv(&[2, 1, 0, 0])).unwrap();
        let res = dispersion_roots(&m).unwrap();
        assert_eq!(res.structural_zero_order, 1);
        let natural: u32 = res
            .roots
            .iter()
            .filter(|x| x.branch == Branch::NaturalVortical)
            .map(|x| x.multiplicity)
            .sum();
        let imposed: u32 = res
            .roots
            .iter()
            .filter(|x| x.branch == Branch::ImposedVortical)
            .map(|x| x.multiplicity)
            .sum();
        assert_eq!(natural, 1);
        assert_eq!(imposed, 2);
    }

    #[test]
    fn e5_no_natural_mode_and_imposed_at_k5_zero() {
        let spec = RotationSpec::canonical_values(5, &rv(&[2, 1])).unwrap();
        let m = build_matrix(&spec, &rv(&[1, 2, 1, 1, 0])).unwrap();
        let res = dispersion_roots(&m).unwrap();
        assert_eq!(res.structural_zero_order, 0);
        assert!(res
            .roots
            .iter()
            .any(|x| x.value == 0.0 && x.branch == Branch::ImposedVortical));
    }

    #[test]
    fn pair_symmetry_of_nonzero_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..40 {
            let d = rng.gen_range(2..=8u32);
            let n_planes = rng.gen_range(0..=(d / 2));
            let rates: Vec<Rat> = (0..n_planes).map(|_| r(rng.gen_range(0..6))).collect();
            let orders: Vec<u32> = rates.iter().map(|x| u32::from(!x.is_zero())).collect();
            let spec = RotationSpec::canonical_values_with_orders(d, &rates, &orders).unwrap();
            let kk: Vec<Rat> = (0..d).map(|_| r(rng.gen_range(-5..=5))).collect();
            if kk.iter().all(Rat::is_zero) {
                continue;
            }
            let m = build_matrix(&spec, &kk).unwrap();
            let res = dispersion_roots(&m).unwrap();
            let scale = res.roots.iter().map(|x| x.value.abs()).fold(1.0, f64::max);
            for root in res.roots.iter().filter(|x| x.value != 0.0) {
                assert!(
                    res.roots
                        .iter()
                        .any(|y| (y.value + root.value).abs() < 1e-9 * scale),
                    "unpaired root {} (d={d})",
                    root.value
                );
            }
        }
    }

    #[test]
    fn scaling_covariance() {
        let kk = rv(&[3, 1, -2, 2]);
        let m1 = build_matrix(&spec4(2, 1), &kk).unwrap();
        let r1 = dispersion_roots(&m1).unwrap();
        // k → 5k leaves roots unchanged
        let k5: Vec<Rat> = kk.iter().map(|x| x * r(5)).collect();
        let m2 = build_matrix(&spec4(2, 1), &k5).unwrap();
        let r2 = dispersion_roots(&m2).unwrap();
        // λ → 3λ scales roots by 3
        let m3 = build_matrix(&spec4(6, 3), &kk).unwrap();
        let r3 = dispersion_roots(&m3).unwrap();
        for ((a, b), c) in r1.roots.iter().zip(&r2.roots).zip(&r3.roots) {
            assert!((a.value - b.value).abs() < 1e-10 * a.value.abs().max(1.0));
            assert!((3.0 * a.value - c.value).abs() < 1e-10 * c.value.abs().max(1.0));
        }
    }

    #[test]
    fn e5_reference_formula_matches_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..60 {
            let l1 = rng.gen_range(1..=8);
            let l2 = rng.gen_range(1..=8);
            let kk: Vec<i64> = (0..5).map(|_| rng.gen_range(-6..=6)).collect();
            if kk.iter().all(|x| *x == 0) {
                continue;
            }
            let spec = RotationSpec::canonical_values(5, &rv(&[l1, l2])).unwrap();
            let m = build_matrix(&spec, &rv(&kk)).unwrap();
            let res = dispersion_roots(&m).unwrap();
            let kf: [f64; 5] = kk
                .iter()
                .map(|&x| x as f64)
                .collect::<Vec<_>>()
                .try_into()
                .unwrap();
            let want = e5_dispersion_reference(l1 as f64, l2 as f64, &kf);
            let max_root = res.roots.iter().map(|x| x.value).fold(f64::MIN, f64::max);
            assert!(
                (max_root - want).abs() <= 1e-10 * want.max(1.0),
                "λ=({l1},{l2}) k={kk:?}: {max_root} vs {want}"
            );
        }
    }

    #[test]
    fn vortical_mode_satisfies_constraints() {
        use crate::tpt::{derive_constraints, BalanceMode};
        // E⁴ simultaneous double: natural mode vs the coupled set
        let spec = spec4(1, 1);
        let m = build_matrix(&spec, &rv(&[1, 2, -1, 3])).unwrap();
        let res = dispersion_roots(&m).unwrap();
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let report = check_tpt_consistency(&m, &res, &cs).unwrap();
        assert!(report.max_residual < 1e-10, "residual {}", report.max_residual);

        // E⁴ simple rotation at k3=k4=0: imposed modes vs the cylinder set,
        // with û_3, û_4 free
        let spec_s = spec4(1, 0);
        let ms = build_matrix(&spec_s, &rv(&[2, 1, 0, 0])).unwrap();
        let ress = dispersion_roots(&ms).unwrap();
        let css = derive_constraints(&spec_s, 1, BalanceMode::DominantBalance).unwrap();
        let reports = check_tpt_consistency(&ms, &ress, &css).unwrap();
        assert!(reports.max_residual < 1e-10);
        let null_dim: usize = ress.vortical_roots().map(|x| x.nullspace.len()).sum();
        assert!(null_dim >= 3, "û_3 and û_4 must be unconstrained");
    }

    #[test]
    fn wave_mode_violates_constraints() {
        use crate::tpt::{derive_constraints, BalanceMode};
        let spec = spec4(1, 1);
        let m = build_matrix(&spec, &rv(&[1, 2, -1, 3])).unwrap();
        let res = dispersion_roots(&m).unwrap();
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let k: Vec<f64> = m.wavevector.iter().map(|x| x.to_f64().unwrap()).collect();
        let mut worst = 0.0f64;
        for root in res.roots.iter().filter(|x| x.branch == Branch::Wave) {
            for v in &root.nullspace {
                for c in &cs.constraints {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (jet, coeff) in c.terms() {
                        let Symbol::Jet { comp, d1: axis, d2: 0 } = jet else { continue };
                        let cval = coeff
                            .eval_with(&|s: &Symbol| match s {
                                Symbol::Rate(i) => m.rates.get(*i as usize - 1).cloned(),
                                _ => None,
                            })
                            .unwrap()
                            .to_f64()
                            .unwrap();
                        acc += Complex64::new(0.0, k[*axis as usize - 1])
                            * v[*comp as usize - 1]
                            * cval;
                    }
                    worst = worst.max(acc.norm());
                }
            }
        }
        assert!(worst > 1e-2, "wave branch should break the constraints, got {worst}");
    }

    #[test]
    fn odd_dimensions_have_no_natural_vortical_mode() {
        for d in [3u32, 5, 7] {
            let n = d / 2;
            let rates: Vec<Rat> = (0..n).map(|i| r(i as i64 + 2)).collect();
            let spec = RotationSpec::canonical_values(d, &rates).unwrap();
            let k: Vec<Rat> = (0..d).map(|i| r(i as i64 % 3 - 1)).collect();
            let m = build_matrix(&spec, &k).unwrap();
            let res = dispersion_roots(&m).unwrap();
            assert_eq!(res.structural_zero_order, 0, "d={d}");
            assert!(!res
                .roots
                .iter()
                .any(|x| x.branch == Branch::NaturalVortical));
        }
    }

    #[test]
    fn natural_mode_nullspace_dimension_matches_constraint_rank() {
        use crate::tpt::{derive_constraints, BalanceMode};
        // E⁴ double rotation: dim(null M(0)) restricted to û equals
        // d − rank of the Fourier-substituted constraint system
        let spec = spec4(2, 3);
        let k = rv(&[1, 2, -1, 3]);
        let m = build_matrix(&spec, &k).unwrap();
        let res = dispersion_roots(&m).unwrap();
        let natural: Vec<_> = res
            .roots
            .iter()
            .filter(|x| x.branch == Branch::NaturalVortical)
            .collect();
        assert_eq!(natural.len(), 1);
        let null_dim = natural[0].nullspace.len();

        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let kf: Vec<f64> = k.iter().map(|x| x.to_f64().unwrap()).collect();
        // rows: substituted constraints u_{i,j} → i k_j û_i, plus k·û = 0
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for c in &cs.constraints {
            let mut row = vec![0.0; 4];
            for (jet, coeff) in c.terms() {
                let Symbol::Jet { comp, d1: axis, d2: 0 } = jet else { continue };
                let cval = coeff
                    .eval_with(&|s: &Symbol| match s {
                        Symbol::Rate(i) => m.rates.get(*i as usize - 1).cloned(),
                        _ => None,
                    })
                    .unwrap()
                    .to_f64()
                    .unwrap();
                row[*comp as usize - 1] += cval * kf[*axis as usize - 1];
            }
            rows.push(row);
        }
        rows.push(kf.clone());
        let mat = DMatrix::<f64>::from_fn(rows.len(), 4, |i, j| rows[i][j]);
        let svd = mat.svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > 1e-10 * smax)
            .count();
        assert_eq!(null_dim, 4 - rank);
    }

    #[test]
    fn snapped_ingest_is_consistent() {
        let l = rat_from_f64_snapped(1.5);
        assert_eq!(l, Rat::new(3.into(), 2.into()));
    }
}
