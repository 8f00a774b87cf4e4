//! Numerical verification of circulation invariants on advected material
//! circuits and 3-chains.
//!
//! Circuits carry analytic tangents that are advected alongside the nodes
//! (the variational equation `τ' = ∇u·τ`), so closed-loop quadrature is the
//! composite trapezoid rule on the periodic parameter — spectrally accurate
//! for smooth circuits. Chains use central-difference Jacobians on the
//! advected grid instead; the second-order cell quadrature is the dominant
//! error term there. All reductions use pairwise summation so results are
//! independent of evaluation batching.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::form::{velocity_one_form, velocity_vector, DifferentialForm, SymbolicForm};
use crate::spectral::{rotating_velocity_form, rotation_two_form, RotationSpec};
use crate::symbol::{Symbol, SymbolTable};
use crate::{Rat, ScalarExpr};
use num_traits::ToPrimitive;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KelvinError {
    #[error("unknown flow name '{0}'")]
    UnknownFlow(String),
    #[error("flow '{flow}' needs dimension ≥ {needed}, got {got}")]
    DimensionTooSmall { flow: String, needed: u32, got: u32 },
    #[error("plane index {0} out of range for the rotation layout")]
    PlaneIndex(usize),
    #[error("circulation quadrature needs numeric rotation rates")]
    SymbolicRates,
    #[error("step {step}: node {node} moved {displacement:.3} > {limit:.3}; reduce dt")]
    StepTooLarge { step: usize, node: usize, displacement: f64, limit: f64 },
    #[error("degenerate chain cell {0:?}: advected Jacobian lost rank")]
    DegenerateCell([usize; 3]),
    #[error("circuit frame vectors must be orthonormal (got {0})")]
    BadFrame(String),
    #[error("bad chain geometry: {0}")]
    BadChainGeometry(String),
    #[error("advection needs dt > 0 and t_end ≥ 0 (got dt={dt}, t_end={t_end})")]
    BadTimeStep { dt: f64, t_end: f64 },
    #[error("cannot compile symbol {0} to a numeric slot")]
    UnsupportedSymbol(String),
    #[error("chain invariants are implemented for order k=1 (3-forms), got k={0}")]
    UnsupportedOrder(u32),
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
    #[error(transparent)]
    Form(#[from] crate::form::FormError),
}

/// Deterministic pairwise summation; results do not depend on how the work
/// was batched.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut acc = 0.0;
        for x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

// ---------------------------------------------------------------------------
// flow catalog

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowName {
    /// Zero relative velocity: the fluid co-rotates with the frame.
    Rigid,
    /// Steady cellular flow in rotation plane `i` (1-based).
    TaylorGreenPlane(usize),
    /// Smooth bounded field that does not solve the rotating Euler
    /// equations; negative control.
    ShearNonsolution,
}

impl std::str::FromStr for FlowName {
    type Err = KelvinError;
    fn from_str(s: &str) -> Result<Self, KelvinError> {
        let s = s.trim();
        if s == "rigid" {
            return Ok(FlowName::Rigid);
        }
        if s == "shear_nonsolution" {
            return Ok(FlowName::ShearNonsolution);
        }
        if let Some(rest) = s.strip_prefix("taylor_green_plane(") {
            if let Some(num) = rest.strip_suffix(')') {
                if let Ok(i) = num.trim().parse::<usize>() {
                    return Ok(FlowName::TaylorGreenPlane(i));
                }
            }
        }
        Err(KelvinError::UnknownFlow(s.to_string()))
    }
}

type VelocityFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Analytic velocity field with its spatial derivative, plus rotating-frame
/// metadata.
#[derive(Clone)]
pub struct FlowField {
    pub dim: u32,
    pub name: String,
    pub is_rotating_frame_euler_solution: bool,
    pub spec: RotationSpec,
    velocity: VelocityFn,
    jacobian: JacobianFn,
}

impl FlowField {
    pub fn velocity(&self, x: &[f64], out: &mut [f64]) {
        (self.velocity)(x, out)
    }

    /// Row-major d×d array of `∂_j u_i` at `x` (row = component).
    pub fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        (self.jacobian)(x, out)
    }
}

/// Construct a cataloged flow for the given rotation.
///
/// For `taylor_green_plane(i)` the Coriolis 1-form `2 ι_u Ω_R` is exact
/// (it equals `-2λ d(cos x_a cos x_b)`), which makes the field a steady
/// rotating-frame Euler solution with modified pressure; that exactness is
/// verified symbolically here at construction time.
pub fn flow_catalog(name: &FlowName, spec: &RotationSpec) -> Result<FlowField, KelvinError> {
    let d = spec.dim as usize;
    match name {
        FlowName::Rigid => Ok(FlowField {
            dim: spec.dim,
            name: "rigid".into(),
            is_rotating_frame_euler_solution: true,
            spec: spec.clone(),
            velocity: Arc::new(|_, out| out.fill(0.0)),
            jacobian: Arc::new(|_, out| out.fill(0.0)),
        }),
        FlowName::TaylorGreenPlane(i) => {
            let plane = spec
                .planes
                .get(i.checked_sub(1).ok_or(KelvinError::PlaneIndex(0))?)
                .ok_or(KelvinError::PlaneIndex(*i))?;
            let (a, b) = (plane.axes.0 as usize - 1, plane.axes.1 as usize - 1);
            verify_taylor_green_exactness(spec, *i)?;
            let (ai, bi) = (a, b);
            Ok(FlowField {
                dim: spec.dim,
                name: format!("taylor_green_plane({i})"),
                is_rotating_frame_euler_solution: true,
                spec: spec.clone(),
                velocity: Arc::new(move |x, out| {
                    out.fill(0.0);
                    out[ai] = x[ai].cos() * x[bi].sin();
                    out[bi] = -x[ai].sin() * x[bi].cos();
                }),
                jacobian: Arc::new(move |x, out| {
                    out.fill(0.0);
                    let d = (out.len() as f64).sqrt() as usize;
                    out[ai * d + ai] = -x[ai].sin() * x[bi].sin();
                    out[ai * d + bi] = x[ai].cos() * x[bi].cos();
                    out[bi * d + ai] = -x[ai].cos() * x[bi].cos();
                    out[bi * d + bi] = x[ai].sin() * x[bi].sin();
                }),
            })
        }
        FlowName::ShearNonsolution => {
            // two superposed shears with curved trajectories; the Coriolis
            // 1-form ι_u(dU + 2Ω_R) is not closed, so nothing conserves
            if d < 3 {
                return Err(KelvinError::DimensionTooSmall {
                    flow: "shear_nonsolution".into(),
                    needed: 3,
                    got: spec.dim,
                });
            }
            Ok(FlowField {
                dim: spec.dim,
                name: "shear_nonsolution".into(),
                is_rotating_frame_euler_solution: false,
                spec: spec.clone(),
                velocity: Arc::new(|x, out| {
                    out.fill(0.0);
                    out[0] = x[1].sin();
                    out[1] = x[2].sin();
                }),
                jacobian: Arc::new(|x, out| {
                    out.fill(0.0);
                    let d = (out.len() as f64).sqrt() as usize;
                    out[1] = x[1].cos(); // ∂_2 u_1, row 0
                    out[d + 2] = x[2].cos(); // ∂_3 u_2, row 1
                }),
            })
        }
    }
}

// 2 ι_u Ω_R + 2 λ_i dψ = 0 with ψ = cos x_a cos x_b, checked in the exact
// trigonometric polynomial ring.
fn verify_taylor_green_exactness(spec: &RotationSpec, plane_idx: usize) -> Result<(), KelvinError> {
    let table = SymbolTable::new(spec.dim);
    let plane = &spec.planes[plane_idx - 1];
    let (a, b) = plane.axes;
    let cos = |i| ScalarExpr::var(Symbol::Cos(i));
    let sin = |i| ScalarExpr::var(Symbol::Sin(i));
    let mut u = vec![ScalarExpr::zero(); spec.dim as usize];
    u[a as usize - 1] = &cos(a) * &sin(b);
    u[b as usize - 1] = -&(&sin(a) * &cos(b));

    let om = rotation_two_form(spec);
    let coriolis = om.interior_product(&u)?.scale(&ScalarExpr::constant(two()));
    let mut psi = DifferentialForm::zero(spec.dim, 0);
    psi.add_term(crate::form::MultiIndex::empty(), &cos(a) * &cos(b));
    let dpsi = psi.exterior_derivative(&table)?;
    let lam = spec.rate_expr(plane_idx - 1);
    let gradient_part = dpsi.scale(&(&lam * &ScalarExpr::constant(two())));
    let residual = coriolis.add(&gradient_part)?;
    assert!(
        residual.is_zero(),
        "taylor_green_plane({plane_idx}): Coriolis 1-form is not exact: {residual}"
    );
    Ok(())
}

fn two() -> Rat {
    Rat::from_integer(2.into())
}

// ---------------------------------------------------------------------------
// circuits

/// Closed material circuit sampled at N uniform parameter values, carrying
/// the tangent `dx/dθ` at every node. Node 0 follows node N−1 periodically.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub dim: usize,
    /// N×d node positions.
    pub nodes: Vec<Vec<f64>>,
    /// N×d parameter tangents dx/dθ, θ ∈ [0,1).
    pub tangents: Vec<Vec<f64>>,
}

impl Circuit {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Circle of radius `r` in the coordinate plane `(a, b)` (1-based).
    pub fn circle(dim: usize, center: &[f64], r: f64, axes: (u32, u32), n: usize) -> Circuit {
        let e = unit_axis(dim, axes.0 as usize - 1);
        let f = unit_axis(dim, axes.1 as usize - 1);
        Circuit::tilted_circle(dim, center, r, &e, &f, n).expect("axis frame is orthonormal")
    }

    /// Circle in the plane spanned by the orthonormal pair `(e, f)`.
    pub fn tilted_circle(
        dim: usize,
        center: &[f64],
        r: f64,
        e: &[f64],
        f: &[f64],
        n: usize,
    ) -> Result<Circuit, KelvinError> {
        let dot = |x: &[f64], y: &[f64]| -> f64 {
            x.iter().zip(y).map(|(a, b)| a * b).sum()
        };
        let ne = dot(e, e).sqrt();
        let nf = dot(f, f).sqrt();
        let ef = dot(e, f);
        if (ne - 1.0).abs() > 1e-10 || (nf - 1.0).abs() > 1e-10 || ef.abs() > 1e-10 {
            return Err(KelvinError::BadFrame(format!(
                "|e|={ne:.3}, |f|={nf:.3}, e·f={ef:.3e}"
            )));
        }
        let mut nodes = Vec::with_capacity(n);
        let mut tangents = Vec::with_capacity(n);
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            let (c, s) = (th.cos(), th.sin());
            let mut x = center.to_vec();
            let mut t = vec![0.0; dim];
            for i in 0..dim {
                x[i] += r * (c * e[i] + s * f[i]);
                t[i] = 2.0 * PI * r * (-s * e[i] + c * f[i]);
            }
            nodes.push(x);
            tangents.push(t);
        }
        Ok(Circuit { dim, nodes, tangents })
    }

    /// Smooth closed curve from a truncated Fourier series
    /// `x_i(θ) = c_i + Σ_m a_{im} cos(2πmθ) + b_{im} sin(2πmθ)`.
    pub fn fourier(
        dim: usize,
        center: &[f64],
        cos_coeffs: &[Vec<f64>],
        sin_coeffs: &[Vec<f64>],
        n: usize,
    ) -> Circuit {
        let mut nodes = Vec::with_capacity(n);
        let mut tangents = Vec::with_capacity(n);
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            let mut x = center.to_vec();
            let mut t = vec![0.0; dim];
            for i in 0..dim {
                for (m0, (am, bm)) in cos_coeffs[i].iter().zip(&sin_coeffs[i]).enumerate() {
                    let m = (m0 + 1) as f64;
                    x[i] += am * (m * th).cos() + bm * (m * th).sin();
                    t[i] += 2.0 * PI * m * (-am * (m * th).sin() + bm * (m * th).cos());
                }
            }
            nodes.push(x);
            tangents.push(t);
        }
        Circuit { dim, nodes, tangents }
    }

    /// Circuit from explicit nodes; tangents via the exact spectral
    /// derivative of the trigonometric interpolant.
    pub fn from_nodes(nodes: Vec<Vec<f64>>) -> Circuit {
        let n = nodes.len();
        let dim = nodes.first().map_or(0, Vec::len);
        let mut tangents = vec![vec![0.0; dim]; n];
        // naive DFT per coordinate; circuits are small enough
        for i in 0..dim {
            let xs: Vec<f64> = nodes.iter().map(|p| p[i]).collect();
            let deriv = spectral_derivative(&xs);
            for (j, t) in deriv.into_iter().enumerate() {
                tangents[j][i] = t;
            }
        }
        Circuit { dim, nodes, tangents }
    }
}

fn unit_axis(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

// d/dθ of the trigonometric interpolant through periodic samples.
fn spectral_derivative(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n];
    // real DFT coefficients up to the Nyquist mode
    for m in 1..=(n / 2) {
        let mut a = 0.0;
        let mut b = 0.0;
        for (j, x) in xs.iter().enumerate() {
            let th = 2.0 * PI * (m * j) as f64 / n as f64;
            a += x * th.cos();
            b += x * th.sin();
        }
        a *= 2.0 / n as f64;
        b *= 2.0 / n as f64;
        if 2 * m == n {
            a *= 0.5;
            b = 0.0;
        }
        for (j, o) in out.iter_mut().enumerate() {
            let th = 2.0 * PI * (m * j) as f64 / n as f64;
            *o += 2.0 * PI * m as f64 * (-a * th.sin() + b * th.cos());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// advection

/// Maximum node displacement per step before the step is rejected.
pub const STEP_LIMIT: f64 = PI;

/// Advect a circuit (nodes and tangents) by classical fixed-step RK4,
/// calling `on_sample(t, circuit)` after every step.
pub fn advect_circuit_sampled(
    c: &Circuit,
    flow: &FlowField,
    t_end: f64,
    dt: f64,
    mut on_sample: impl FnMut(f64, &Circuit),
) -> Result<Circuit, KelvinError> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(KelvinError::BadTimeStep { dt, t_end });
    }
    let d = c.dim;
    let n_steps = (t_end / dt).round() as usize;
    let dt = if n_steps > 0 { t_end / n_steps as f64 } else { dt };
    let mut cur = c.clone();
    let mut scratch = Rk4Scratch::new(d);
    for step in 0..n_steps {
        for (node, (x, tau)) in cur.nodes.iter_mut().zip(cur.tangents.iter_mut()).enumerate() {
            let moved = scratch.step(flow, x, tau, dt);
            if moved > STEP_LIMIT {
                return Err(KelvinError::StepTooLarge {
                    step,
                    node,
                    displacement: moved,
                    limit: STEP_LIMIT,
                });
            }
        }
        on_sample(dt * (step + 1) as f64, &cur);
    }
    Ok(cur)
}

pub fn advect_circuit(
    c: &Circuit,
    flow: &FlowField,
    t_end: f64,
    dt: f64,
) -> Result<Circuit, KelvinError> {
    advect_circuit_sampled(c, flow, t_end, dt, |_, _| {})
}

// one RK4 step of the coupled node/tangent system
//   x' = u(x),  τ' = ∇u(x)·τ
struct Rk4Scratch {
    d: usize,
    kx: [Vec<f64>; 4],
    kt: [Vec<f64>; 4],
    xs: Vec<f64>,
    ts: Vec<f64>,
    jac: Vec<f64>,
}

impl Rk4Scratch {
    fn new(d: usize) -> Self {
        Rk4Scratch {
            d,
            kx: std::array::from_fn(|_| vec![0.0; d]),
            kt: std::array::from_fn(|_| vec![0.0; d]),
            xs: vec![0.0; d],
            ts: vec![0.0; d],
            jac: vec![0.0; d * d],
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn eval(&mut self, flow: &FlowField, stage: usize) {
        let (kx, kt) = (&mut self.kx, &mut self.kt);
        flow.velocity(&self.xs, &mut kx[stage]);
        flow.jacobian(&self.xs, &mut self.jac);
        let d = self.d;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.jac[i * d + j] * self.ts[j];
            }
            kt[stage][i] = acc;
        }
    }

    fn step(&mut self, flow: &FlowField, x: &mut [f64], tau: &mut [f64], dt: f64) -> f64 {
        let d = self.d;
        let half = dt * 0.5;
        self.xs.copy_from_slice(x);
        self.ts.copy_from_slice(tau);
        self.eval(flow, 0);
        for i in 0..d {
            self.xs[i] = x[i] + half * self.kx[0][i];
            self.ts[i] = tau[i] + half * self.kt[0][i];
        }
        self.eval(flow, 1);
        for i in 0..d {
            self.xs[i] = x[i] + half * self.kx[1][i];
            self.ts[i] = tau[i] + half * self.kt[1][i];
        }
        self.eval(flow, 2);
        for i in 0..d {
            self.xs[i] = x[i] + dt * self.kx[2][i];
            self.ts[i] = tau[i] + dt * self.kt[2][i];
        }
        self.eval(flow, 3);
        let sixth = dt / 6.0;
        let mut moved2 = 0.0f64;
        for i in 0..d {
            let dx = sixth
                * (self.kx[0][i] + 2.0 * self.kx[1][i] + 2.0 * self.kx[2][i] + self.kx[3][i]);
            let dtau = sixth
                * (self.kt[0][i] + 2.0 * self.kt[1][i] + 2.0 * self.kt[2][i] + self.kt[3][i]);
            x[i] += dx;
            tau[i] += dtau;
            moved2 += dx * dx;
        }
        moved2.sqrt()
    }
}

// ---------------------------------------------------------------------------
// quadrature

/// `∮ f·dr` over the circuit: the trapezoid rule `(1/N) Σ f(x_j)·τ_j` on
/// the periodic parameter.
pub fn line_integral(c: &Circuit, mut f: impl FnMut(&[f64], &mut [f64])) -> f64 {
    let mut val = vec![0.0; c.dim];
    let terms: Vec<f64> = c
        .nodes
        .iter()
        .zip(&c.tangents)
        .map(|(x, tau)| {
            f(x, &mut val);
            val.iter().zip(tau).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    pairwise_sum(&terms) / c.len() as f64
}

/// Numeric rotation rates of a spec, with plane axes (0-based).
fn numeric_planes(spec: &RotationSpec) -> Result<Vec<(usize, usize, f64)>, KelvinError> {
    spec.planes
        .iter()
        .map(|p| {
            let rate = p
                .rate
                .value()
                .ok_or(KelvinError::SymbolicRates)?
                .to_f64()
                .unwrap();
            Ok((p.axes.0 as usize - 1, p.axes.1 as usize - 1, rate))
        })
        .collect()
}

/// Frame velocity `u_R` at a point: `Σ λ_i (x_a e_b − x_b e_a)`.
pub fn frame_velocity(spec: &RotationSpec, x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for p in &spec.planes {
        let (a, b) = (p.axes.0 as usize - 1, p.axes.1 as usize - 1);
        let lam = p.rate.value().expect("numeric rates").to_f64().unwrap();
        out[b] += lam * x[a];
        out[a] -= lam * x[b];
    }
}

/// Kelvin circulation `∮ (u + u_R)·dr` along the circuit.
pub fn circulation(c: &Circuit, flow: &FlowField, spec: &RotationSpec) -> Result<f64, KelvinError> {
    numeric_planes(spec)?;
    let mut u = vec![0.0; c.dim];
    Ok(line_integral(c, |x, out| {
        flow.velocity(x, &mut u);
        frame_velocity(spec, x, out);
        for (o, ui) in out.iter_mut().zip(&u) {
            *o += ui;
        }
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionAreas {
    /// Signed projected area per rotation plane.
    pub areas: Vec<f64>,
    /// `Σ 2 λ_i A_i`.
    pub weighted_sum: f64,
    /// `∮ U_R` by the same quadrature rule.
    pub ur_integral: f64,
}

/// Signed projection areas `A_i = ½∮(x_a dx_b − x_b dx_a)` per rotation
/// plane; asserts the circulation identity `Σ 2λ_i A_i = ∮ U_R` to
/// quadrature accuracy.
pub fn projection_areas(
    c: &Circuit,
    spec: &RotationSpec,
) -> Result<ProjectionAreas, KelvinError> {
    let planes = numeric_planes(spec)?;
    let mut areas = Vec::with_capacity(planes.len());
    for &(a, b, _) in &planes {
        let area = line_integral(c, |x, out| {
            out.fill(0.0);
            out[a] = -0.5 * x[b];
            out[b] = 0.5 * x[a];
        });
        areas.push(area);
    }
    let weighted: Vec<f64> = planes
        .iter()
        .zip(&areas)
        .map(|(&(_, _, lam), &ar)| 2.0 * lam * ar)
        .collect();
    let weighted_sum = pairwise_sum(&weighted);
    let ur_integral = line_integral(c, |x, out| frame_velocity(spec, x, out));
    let tol = 1e-10 * ur_integral.abs().max(1.0);
    assert!(
        (weighted_sum - ur_integral).abs() < tol,
        "projection-area identity violated: {weighted_sum} vs {ur_integral}"
    );
    Ok(ProjectionAreas { areas, weighted_sum, ur_integral })
}

// ---------------------------------------------------------------------------
// compiled forms (fast numeric evaluation of symbolic integrands)

// slot layout per point: [x (d) | u (d) | ∂u (d²) | cos x (d) | sin x (d)]
const fn slot_count(d: usize) -> usize {
    d * d + 4 * d
}

fn slot_of(sym: &Symbol, d: usize) -> Result<usize, KelvinError> {
    match *sym {
        Symbol::Coord(i) => Ok(i as usize - 1),
        Symbol::Jet { comp, d1: 0, d2: 0 } => Ok(d + comp as usize - 1),
        Symbol::Jet { comp, d1, d2: 0 } => {
            Ok(2 * d + (comp as usize - 1) * d + d1 as usize - 1)
        }
        Symbol::Cos(i) => Ok(2 * d + d * d + i as usize - 1),
        Symbol::Sin(i) => Ok(3 * d + d * d + i as usize - 1),
        _ => Err(KelvinError::UnsupportedSymbol(sym.to_string())),
    }
}

// coefficient × product of (slot, exponent) factors
type TermList = Vec<(f64, Vec<(usize, u32)>)>;

/// A symbolic form lowered to flat term lists over a numeric slot buffer.
pub struct CompiledForm {
    dim: usize,
    pub degree: u32,
    terms: Vec<(Vec<u32>, TermList)>,
}

impl CompiledForm {
    /// Lower a symbolic form with numeric-only coefficients (rates must be
    /// substituted beforehand).
    pub fn new(form: &SymbolicForm) -> Result<CompiledForm, KelvinError> {
        let d = form.dim() as usize;
        let mut terms = Vec::new();
        for (index, coeff) in form.terms() {
            let mut list = Vec::new();
            for (mono, c) in coeff.terms() {
                let mut factors = Vec::new();
                for (sym, e) in mono.powers() {
                    factors.push((slot_of(sym, d)?, *e));
                }
                list.push((c.to_f64().unwrap(), factors));
            }
            terms.push((index.axes().to_vec(), list));
        }
        Ok(CompiledForm { dim: d, degree: form.degree(), terms })
    }

    pub fn fill_slots(flow: &FlowField, x: &[f64], buf: &mut [f64]) {
        let d = x.len();
        buf[..d].copy_from_slice(x);
        let (u, rest) = buf[d..].split_at_mut(d);
        let (jac, trig) = rest.split_at_mut(d * d);
        flow.velocity(x, u);
        flow.jacobian(x, jac);
        for i in 0..d {
            trig[i] = x[i].cos();
            trig[d + i] = x[i].sin();
        }
    }

    /// Evaluate every coefficient on a prepared slot buffer, visiting
    /// `(axes, value)` pairs.
    pub fn eval_on(&self, buf: &[f64], mut visit: impl FnMut(&[u32], f64)) {
        for (axes, list) in &self.terms {
            let mut acc = 0.0;
            for (c, factors) in list {
                let mut t = *c;
                for &(slot, e) in factors {
                    t *= buf[slot].powi(e as i32);
                }
                acc += t;
            }
            visit(axes, acc);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `L_u (U + U_R)` with numeric rates folded in, ready for quadrature.
pub fn compiled_lie_integrand(spec: &RotationSpec) -> Result<CompiledForm, KelvinError> {
    let table = spec.table();
    let u = velocity_vector(spec.dim);
    let w = velocity_one_form(spec.dim).add(&rotating_velocity_form(spec))?;
    let lie = w.lie_derivative(&u, &table)?;
    CompiledForm::new(&substitute_rates(&lie, spec))
}

/// `H¹ = (U + U_R) ∧ d(U + U_R)` with numeric rates folded in.
pub fn compiled_chain_integrand(spec: &RotationSpec, k: u32) -> Result<CompiledForm, KelvinError> {
    if k != 1 {
        return Err(KelvinError::UnsupportedOrder(k));
    }
    let table = spec.table();
    let w = velocity_one_form(spec.dim).add(&rotating_velocity_form(spec))?;
    let dw = w.exterior_derivative(&table)?;
    let h = w.wedge(&dw)?;
    CompiledForm::new(&substitute_rates(&h, spec))
}

fn substitute_rates(form: &SymbolicForm, spec: &RotationSpec) -> SymbolicForm {
    let mut out = DifferentialForm::zero(form.dim(), form.degree());
    for (index, coeff) in form.terms() {
        let mut c = coeff.clone();
        for (i, p) in spec.planes.iter().enumerate() {
            if let Some(v) = p.rate.value() {
                c = c.substitute(
                    &Symbol::rate(i as u32 + 1),
                    &ScalarExpr::constant(v.clone()),
                );
            }
        }
        out.add_term(index.clone(), c);
    }
    out
}

/// Evaluate a compiled 1-form along a circuit by trapezoid quadrature.
pub fn circuit_form_integral(c: &Circuit, form: &CompiledForm, flow: &FlowField) -> f64 {
    assert_eq!(form.degree, 1, "line quadrature needs a 1-form");
    let d = c.dim;
    let mut buf = vec![0.0; slot_count(d)];
    let mut vals = vec![0.0; d];
    line_integral(c, |x, out| {
        CompiledForm::fill_slots(flow, x, &mut buf);
        vals.fill(0.0);
        form.eval_on(&buf, |axes, v| {
            vals[axes[0] as usize - 1] = v;
        });
        out.copy_from_slice(&vals);
    })
}

// ---------------------------------------------------------------------------
// first-order estimate of circulation change

#[derive(Clone, Debug, Serialize)]
pub struct LieCheckReport {
    pub gamma0: f64,
    /// `∮ L_u(U + U_R)` over the initial circuit.
    pub dgamma0: f64,
    /// `(t, |Γ(t) − Γ(0) − t·Γ'(0)|)`.
    pub errors: Vec<(f64, f64)>,
    /// Log-log slope of the error curve (only over points above the
    /// numerical floor); `None` when the curve sits at the floor, which is
    /// what exactly conserving configurations produce.
    pub slope: Option<f64>,
    pub floor: f64,
}

/// First-order accuracy of the pullback expansion of the circulation: the
/// error `|Γ(t) − Γ(0) − t ∮ L_u(U+U_R)|` must decay quadratically in `t`
/// for any smooth flow — the identity is kinematic, not dynamic.
pub fn lie_first_order_check(
    c: &Circuit,
    flow: &FlowField,
    spec: &RotationSpec,
    ts: &[f64],
    base_dt: f64,
) -> Result<LieCheckReport, KelvinError> {
    let gamma0 = circulation(c, flow, spec)?;
    let lie = compiled_lie_integrand(spec)?;
    let dgamma0 = circuit_form_integral(c, &lie, flow);
    let floor = 1e-12 * gamma0.abs().max(1.0);

    let mut errors = Vec::with_capacity(ts.len());
    for &t in ts {
        let steps = (t / base_dt).ceil().max(1.0);
        let advected = advect_circuit(c, flow, t, t / steps)?;
        let gamma_t = circulation(&advected, flow, spec)?;
        errors.push((t, (gamma_t - gamma0 - t * dgamma0).abs()));
    }

    let usable: Vec<(f64, f64)> = errors
        .iter()
        .filter(|(_, e)| *e > floor)
        .cloned()
        .collect();
    let slope = if usable.len() >= 2 {
        let n = usable.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (t, e) in &usable {
            let (x, y) = (t.ln(), e.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    } else {
        None
    };
    Ok(LieCheckReport { gamma0, dgamma0, errors, slope, floor })
}

// ---------------------------------------------------------------------------
// 3-chains

/// Closed 3-chain: an embedded 3-torus sampled on an M³ periodic grid.
#[derive(Clone, Debug)]
pub struct Chain3 {
    pub dim: usize,
    pub m: usize,
    /// Flattened m³ × d node positions, index `((i·m + j)·m + l)·d`.
    pub nodes: Vec<f64>,
}

impl Chain3 {
    /// Nested torus of revolution embedded in the span of the first two
    /// rotation planes (axes 1–4), with `r1 > r2 + r3` and `r2 > r3 > 0`.
    ///
    /// As a closed hypersurface of that 4-subspace it encloses 4-volume,
    /// so the rotating part of the chain invariant pairs nontrivially;
    /// product tori that spill into a fifth axis integrate to zero against
    /// every closed-surface projection.
    pub fn torus(
        dim: usize,
        m: usize,
        r1: f64,
        r2: f64,
        r3: f64,
    ) -> Result<Chain3, KelvinError> {
        if dim < 4 {
            return Err(KelvinError::DimensionTooSmall {
                flow: "torus chain".into(),
                needed: 4,
                got: dim as u32,
            });
        }
        if !(r1 > r2 + r3 && r2 > r3 && r3 > 0.0) {
            return Err(KelvinError::BadChainGeometry(format!(
                "nested radii must satisfy r1 > r2 + r3 > 2·r3 > 0, got ({r1}, {r2}, {r3})"
            )));
        }
        if m < 5 {
            return Err(KelvinError::BadChainGeometry(format!(
                "grid must resolve the difference stencil: m ≥ 5, got {m}"
            )));
        }
        let mut nodes = vec![0.0; m * m * m * dim];
        for i in 0..m {
            let s1 = 2.0 * PI * i as f64 / m as f64;
            for j in 0..m {
                let s2 = 2.0 * PI * j as f64 / m as f64;
                for l in 0..m {
                    let s3 = 2.0 * PI * l as f64 / m as f64;
                    let base = ((i * m + j) * m + l) * dim;
                    let ring = r2 + r3 * s3.cos();
                    let radial = r1 + ring * s2.cos();
                    nodes[base] = radial * s1.cos();
                    nodes[base + 1] = radial * s1.sin();
                    nodes[base + 2] = ring * s2.sin();
                    nodes[base + 3] = r3 * s3.sin();
                }
            }
        }
        Ok(Chain3 { dim, m, nodes })
    }

    fn node(&self, i: usize, j: usize, l: usize) -> &[f64] {
        let m = self.m;
        let base = (((i % m) * m + (j % m)) * m + (l % m)) * self.dim;
        &self.nodes[base..base + self.dim]
    }
}

/// Advect every chain node by fixed-step RK4.
pub fn advect_chain(
    ch: &Chain3,
    flow: &FlowField,
    t_end: f64,
    dt: f64,
) -> Result<Chain3, KelvinError> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(KelvinError::BadTimeStep { dt, t_end });
    }
    let d = ch.dim;
    let n_steps = (t_end / dt).round() as usize;
    let dt = if n_steps > 0 { t_end / n_steps as f64 } else { dt };
    let mut out = ch.clone();
    let mut scratch = Rk4Scratch::new(d);
    let mut tau = vec![0.0; d]; // unused tangent channel
    for step in 0..n_steps {
        for (node, chunk) in out.nodes.chunks_mut(d).enumerate() {
            let moved = scratch.step(flow, chunk, &mut tau, dt);
            if moved > STEP_LIMIT {
                return Err(KelvinError::StepTooLarge {
                    step,
                    node,
                    displacement: moved,
                    limit: STEP_LIMIT,
                });
            }
        }
    }
    Ok(out)
}

/// Integrate a compiled 3-form over the chain: midpoint quadrature on
/// node-centered cells with central-difference Jacobians on the advected
/// grid.
pub fn chain_integral(
    ch: &Chain3,
    form: &CompiledForm,
    flow: &FlowField,
) -> Result<f64, KelvinError> {
    assert_eq!(form.degree, 3, "chain quadrature needs a 3-form");
    let (d, m) = (ch.dim, ch.m);
    let cell_vol = 1.0 / (m * m * m) as f64;
    let mut buf = vec![0.0; slot_count(d)];
    let mut jac = vec![0.0; d * 3]; // ∂x/∂s columns
    let mut contributions = Vec::with_capacity(m * m * m);

    for i in 0..m {
        for j in 0..m {
            for l in 0..m {
                let center = ch.node(i, j, l);
                // fourth-order central differences along each grid line
                jac.fill(0.0);
                let mm = m as f64;
                for axis in 0..3 {
                    let at = |o: usize| match axis {
                        0 => ch.node(i + m + o - 2, j, l),
                        1 => ch.node(i, j + m + o - 2, l),
                        _ => ch.node(i, j, l + m + o - 2),
                    };
                    let (m2, m1, p1, p2) = (at(0), at(1), at(3), at(4));
                    for r in 0..d {
                        jac[r * 3 + axis] =
                            (m2[r] - 8.0 * m1[r] + 8.0 * p1[r] - p2[r]) * mm / 12.0;
                    }
                }
                // cell degeneracy: Gram determinant against column scales
                let mut gram = [[0.0f64; 3]; 3];
                let mut scale = 1.0f64;
                for a in 0..3 {
                    for b in 0..3 {
                        gram[a][b] = (0..d).map(|r| jac[r * 3 + a] * jac[r * 3 + b]).sum();
                    }
                    scale *= gram[a][a].max(f64::MIN_POSITIVE);
                }
                let det_gram = gram[0][0] * (gram[1][1] * gram[2][2] - gram[1][2] * gram[2][1])
                    - gram[0][1] * (gram[1][0] * gram[2][2] - gram[1][2] * gram[2][0])
                    + gram[0][2] * (gram[1][0] * gram[2][1] - gram[1][1] * gram[2][0]);
                if det_gram <= 1e-20 * scale {
                    return Err(KelvinError::DegenerateCell([i, j, l]));
                }

                CompiledForm::fill_slots(flow, center, &mut buf);
                let mut acc = 0.0;
                form.eval_on(&buf, |axes, coeff| {
                    if coeff == 0.0 {
                        return;
                    }
                    let (p, q, r) = (
                        axes[0] as usize - 1,
                        axes[1] as usize - 1,
                        axes[2] as usize - 1,
                    );
                    let det = jac[p * 3] * (jac[q * 3 + 1] * jac[r * 3 + 2] - jac[q * 3 + 2] * jac[r * 3 + 1])
                        - jac[p * 3 + 1] * (jac[q * 3] * jac[r * 3 + 2] - jac[q * 3 + 2] * jac[r * 3])
                        + jac[p * 3 + 2] * (jac[q * 3] * jac[r * 3 + 1] - jac[q * 3 + 1] * jac[r * 3]);
                    acc += coeff * det;
                });
                contributions.push(acc * cell_vol);
            }
        }
    }
    Ok(pairwise_sum(&contributions))
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainInvariantReport {
    pub initial: f64,
    pub final_value: f64,
    pub drift_abs: f64,
    pub drift_rel: f64,
}

/// Relative drift of `∫ H¹` over an advected chain on `[0, t_end]`.
pub fn chain_invariant(
    ch: &Chain3,
    flow: &FlowField,
    spec: &RotationSpec,
    k: u32,
    t_end: f64,
    dt: f64,
) -> Result<ChainInvariantReport, KelvinError> {
    let form = compiled_chain_integrand(spec, k)?;
    let initial = chain_integral(ch, &form, flow)?;
    let advected = advect_chain(ch, flow, t_end, dt)?;
    let final_value = chain_integral(&advected, &form, flow)?;
    let drift_abs = (final_value - initial).abs();
    Ok(ChainInvariantReport {
        initial,
        final_value,
        drift_abs,
        drift_rel: drift_abs / initial.abs().max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::RotationSpec;
    use num_traits::FromPrimitive;

    fn r(n: i64) -> Rat {
        Rat::from_i64(n).unwrap()
    }

    fn spec_d3(lam: i64) -> RotationSpec {
        RotationSpec::canonical_values(3, &[r(lam)]).unwrap()
    }

    fn spec_d5(l1: i64, l2: i64) -> RotationSpec {
        RotationSpec::canonical_values(5, &[r(l1), r(l2)]).unwrap()
    }

    fn tg(spec: &RotationSpec) -> FlowField {
        flow_catalog(&FlowName::TaylorGreenPlane(1), spec).unwrap()
    }

    #[test]
    fn flow_name_parsing() {
        use std::str::FromStr;
        assert_eq!(FlowName::from_str("rigid").unwrap(), FlowName::Rigid);
        assert_eq!(
            FlowName::from_str("taylor_green_plane(2)").unwrap(),
            FlowName::TaylorGreenPlane(2)
        );
        assert_eq!(
            FlowName::from_str("shear_nonsolution").unwrap(),
            FlowName::ShearNonsolution
        );
        assert!(FlowName::from_str("vortex").is_err());
    }

    #[test]
    fn catalog_flags_and_exactness() {
        let spec = spec_d3(2);
        assert!(tg(&spec).is_rotating_frame_euler_solution);
        assert!(
            !flow_catalog(&FlowName::ShearNonsolution, &spec)
                .unwrap()
                .is_rotating_frame_euler_solution
        );
        // exactness check also passes on a zero-rate plane (plain steady Euler)
        let spec0 = RotationSpec::canonical_values_with_orders(3, &[r(0)], &[0]).unwrap();
        let _ = tg(&spec0);
        // and in d=5 double rotation
        let _ = tg(&spec_d5(3, 1));
    }

    #[test]
    fn taylor_green_jacobian_is_consistent() {
        let spec = spec_d5(2, 1);
        let flow = tg(&spec);
        let x = [0.3, -0.7, 0.2, 0.9, -1.1];
        let mut jac = vec![0.0; 25];
        flow.jacobian(&x, &mut jac);
        let h = 1e-6;
        let mut up = vec![0.0; 5];
        let mut dn = vec![0.0; 5];
        for j in 0..5 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            flow.velocity(&xp, &mut up);
            flow.velocity(&xm, &mut dn);
            for i in 0..5 {
                let fd = (up[i] - dn[i]) / (2.0 * h);
                assert!((jac[i * 5 + j] - fd).abs() < 1e-8, "i={i} j={j}");
            }
        }
    }

    #[test]
    fn rigid_flow_keeps_nodes_and_circulation() {
        let spec = spec_d3(3);
        let flow = flow_catalog(&FlowName::Rigid, &spec).unwrap();
        let c = Circuit::circle(3, &[0.0, 0.0, 0.5], 1.0, (1, 2), 128);
        let adv = advect_circuit(&c, &flow, 1.0, 1e-2).unwrap();
        assert_eq!(c.nodes, adv.nodes);
        // unit circle in the rotation plane: Γ = 2λπ
        let gamma = circulation(&c, &flow, &spec).unwrap();
        assert!((gamma - 2.0 * 3.0 * PI).abs() < 1e-12 * gamma.abs());
    }

    #[test]
    fn zero_time_is_identity() {
        let spec = spec_d3(1);
        let flow = tg(&spec);
        let c = Circuit::circle(3, &[0.1, 0.2, 0.0], 0.7, (1, 2), 64);
        let adv = advect_circuit(&c, &flow, 0.0, 1e-3).unwrap();
        assert_eq!(c.nodes, adv.nodes);
    }

    #[test]
    fn rk4_node_convergence_is_fourth_order() {
        let spec = spec_d3(1);
        let flow = tg(&spec);
        let c = Circuit::circle(3, &[0.3, 0.1, 0.0], 0.8, (1, 2), 16);
        let reference = advect_circuit(&c, &flow, 1.0, 1.0 / 1024.0).unwrap();
        let mut errs = Vec::new();
        for steps in [8.0, 16.0, 32.0] {
            let adv = advect_circuit(&c, &flow, 1.0, 1.0 / steps).unwrap();
            let err: f64 = adv
                .nodes
                .iter()
                .zip(&reference.nodes)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 3.7 && order2 > 3.7, "orders {order1:.2} {order2:.2}");
    }

    #[test]
    fn step_limit_rejects_huge_dt() {
        // frame velocity is not advected here — use a fast self-advecting
        // control: big TG amplitude comes from dt, not |u|, so crank dt
        let spec = spec_d3(1);
        let flow = tg(&spec);
        let c = Circuit::circle(3, &[0.3, 0.1, 0.0], 0.8, (1, 2), 8);
        let res = advect_circuit(&c, &flow, 40.0, 20.0);
        assert!(matches!(res, Err(KelvinError::StepTooLarge { .. })));
    }

    #[test]
    fn circulation_conserved_for_taylor_green() {
        let spec = spec_d3(2);
        let flow = tg(&spec);
        let c = Circuit::circle(3, &[0.4, -0.3, 0.2], 0.9, (1, 2), 256);
        let g0 = circulation(&c, &flow, &spec).unwrap();
        let adv = advect_circuit(&c, &flow, 1.0, 1e-3).unwrap();
        let g1 = circulation(&adv, &flow, &spec).unwrap();
        assert!(
            ((g1 - g0) / g0).abs() < 1e-8,
            "relative drift {}",
            ((g1 - g0) / g0).abs()
        );
    }

    #[test]
    fn nonsolution_flow_drifts() {
        let spec = spec_d3(2);
        let flow = flow_catalog(&FlowName::ShearNonsolution, &spec).unwrap();
        let e = [1.0, 0.0, 0.0];
        let f = [0.0, 0.6, 0.8];
        let c = Circuit::tilted_circle(3, &[0.3, 0.2, 0.4], 1.0, &e, &f, 256).unwrap();
        let g0 = circulation(&c, &flow, &spec).unwrap();
        let adv = advect_circuit(&c, &flow, 1.0, 1e-3).unwrap();
        let g1 = circulation(&adv, &flow, &spec).unwrap();
        let drift = ((g1 - g0) / g0.abs().max(1.0)).abs();
        assert!(drift > 1e-2, "negative control drift only {drift}");
    }

    #[test]
    fn projection_area_of_unit_circle() {
        let spec = spec_d5(2, 5);
        let c = Circuit::circle(5, &[0.0; 5], 1.0, (1, 2), 512);
        let rep = projection_areas(&c, &spec).unwrap();
        assert!((rep.areas[0] - PI).abs() < 1e-12);
        assert!(rep.areas[1].abs() < 1e-12);
        assert!((rep.weighted_sum - 2.0 * 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn projection_areas_of_tilted_circle() {
        // unit circle spanning both rotation planes of E⁴: A_i = π (e_a f_b − e_b f_a)
        let spec = RotationSpec::canonical_values(4, &[r(1), r(1)]).unwrap();
        let s = 0.5f64.sqrt();
        let e = [s, 0.0, s, 0.0];
        let f = [0.0, s, 0.0, s];
        let c = Circuit::tilted_circle(4, &[0.0; 4], 1.0, &e, &f, 1024).unwrap();
        let rep = projection_areas(&c, &spec).unwrap();
        let want1 = PI * (e[0] * f[1] - e[1] * f[0]);
        let want2 = PI * (e[2] * f[3] - e[3] * f[2]);
        assert!((rep.areas[0] - want1).abs() < 1e-12);
        assert!((rep.areas[1] - want2).abs() < 1e-12);
        // projections halve the area each: A1² + A2² = (π/2)² + (π/2)² = π²/2
        let total: f64 = rep.areas.iter().map(|a| a * a).sum();
        assert!((total - PI * PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn gauge_gradient_does_not_change_circulation() {
        let spec = spec_d3(1);
        let flow = tg(&spec);
        let c = Circuit::circle(3, &[0.2, 0.1, 0.3], 0.8, (1, 2), 128);
        let mut u = vec![0.0; 3];
        let base = line_integral(&c, |x, out| {
            flow.velocity(x, &mut u);
            out.copy_from_slice(&u);
        });
        let gauged = line_integral(&c, |x, out| {
            flow.velocity(x, &mut u);
            out.copy_from_slice(&u);
            out[0] += x[0].cos(); // ∇(sin x1)
        });
        assert!((gauged - base).abs() < 1e-10);
    }

    #[test]
    fn lie_error_vanishes_for_rigid_flow() {
        let spec = spec_d3(2);
        let flow = flow_catalog(&FlowName::Rigid, &spec).unwrap();
        let c = Circuit::circle(3, &[0.0, 0.0, 0.1], 1.0, (1, 2), 128);
        let rep = lie_first_order_check(&c, &flow, &spec, &[1e-1, 1e-2], 1e-3).unwrap();
        assert!(rep.dgamma0.abs() < 1e-12);
        for (_, e) in rep.errors {
            assert!(e < 1e-12);
        }
    }

    #[test]
    fn lie_error_quadratic_for_nonsolution() {
        let spec = spec_d3(2);
        let flow = flow_catalog(&FlowName::ShearNonsolution, &spec).unwrap();
        let e = [1.0, 0.0, 0.0];
        let f = [0.0, 0.6, 0.8];
        let c = Circuit::tilted_circle(3, &[0.3, 0.2, 0.4], 1.0, &e, &f, 256).unwrap();
        let rep =
            lie_first_order_check(&c, &flow, &spec, &[1e-1, 1e-2, 1e-3], 1e-3).unwrap();
        let slope = rep.slope.expect("errors above floor");
        assert!((1.9..=2.1).contains(&slope), "slope {slope}");
    }

    #[test]
    fn lie_error_at_floor_for_conserving_flow() {
        let spec = spec_d3(2);
        let flow = tg(&spec);
        let c = Circuit::circle(3, &[0.4, -0.3, 0.2], 0.9, (1, 2), 256);
        let rep = lie_first_order_check(&c, &flow, &spec, &[1e-1, 1e-2], 1e-3).unwrap();
        // both Γ(t) − Γ(0) and Γ'(0) vanish for a steady Euler solution
        assert!(rep.dgamma0.abs() < 1e-10, "dΓ = {}", rep.dgamma0);
        for (_, e) in &rep.errors {
            assert!(*e < 1e-9, "error {e}");
        }
    }

    #[test]
    fn chain_integral_static_for_rigid_flow() {
        let spec = spec_d5(2, 1);
        let flow = flow_catalog(&FlowName::Rigid, &spec).unwrap();
        let ch = Chain3::torus(5, 8, 1.6, 0.8, 0.35).unwrap();
        let rep = chain_invariant(&ch, &flow, &spec, 1, 0.5, 1e-2).unwrap();
        assert!(rep.initial.abs() > 1e-6, "chain integral should be nontrivial");
        assert_eq!(rep.drift_abs, 0.0, "static chain, static integrand");
    }

    #[test]
    fn chain_invariant_converges_for_taylor_green() {
        let spec = spec_d5(2, 1);
        let flow = tg(&spec);
        let mut drifts = Vec::new();
        for m in [8, 16] {
            let ch = Chain3::torus(5, m, 1.6, 0.8, 0.35).unwrap();
            let rep = chain_invariant(&ch, &flow, &spec, 1, 0.1, 1e-3).unwrap();
            drifts.push(rep.drift_rel);
        }
        assert!(drifts[1] < 1e-4, "drift at M=16: {}", drifts[1]);
        let order = (drifts[0] / drifts[1]).log2();
        assert!(order >= 2.0, "grid convergence order {order:.2} ({drifts:?})");
    }

    #[test]
    fn chain_nonsolution_control_drifts() {
        let spec = spec_d5(2, 1);
        let flow = flow_catalog(&FlowName::ShearNonsolution, &spec).unwrap();
        let ch = Chain3::torus(5, 12, 1.6, 0.8, 0.35).unwrap();
        let rep = chain_invariant(&ch, &flow, &spec, 1, 1.0, 1e-2).unwrap();
        assert!(rep.drift_rel > 1e-2, "control drift only {}", rep.drift_rel);
    }

    #[test]
    fn degenerate_chain_cells_abort() {
        let spec = spec_d5(2, 1);
        let flow = flow_catalog(&FlowName::Rigid, &spec).unwrap();
        let form = compiled_chain_integrand(&spec, 1).unwrap();
        // collapse every node onto one point: rank-0 Jacobians everywhere
        let ch = Chain3 { dim: 5, m: 8, nodes: vec![0.3; 8 * 8 * 8 * 5] };
        assert!(matches!(
            chain_integral(&ch, &form, &flow),
            Err(KelvinError::DegenerateCell(_))
        ));
    }

    #[test]
    fn chain_order_validation() {
        let spec = spec_d5(1, 1);
        assert!(matches!(
            compiled_chain_integrand(&spec, 2),
            Err(KelvinError::UnsupportedOrder(2))
        ));
    }

    #[test]
    fn spectral_tangents_match_analytic_circle() {
        let c = Circuit::circle(3, &[0.2, 0.0, 0.1], 0.7, (1, 2), 64);
        let rebuilt = Circuit::from_nodes(c.nodes.clone());
        for (a, b) in c.tangents.iter().zip(&rebuilt.tangents) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn circulation_quadrature_converges_in_node_count() {
        // the TG velocity part has an infinite harmonic content on a
        // circle, so coarse node counts show the convergence rate
        let spec = spec_d3(1);
        let flow = tg(&spec);
        let gamma = |n: usize| {
            let c = Circuit::circle(3, &[0.4, -0.3, 0.2], 0.9, (1, 2), n);
            circulation(&c, &flow, &spec).unwrap()
        };
        let reference = gamma(4096);
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| (gamma(n) - reference).abs())
            .collect();
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(
            order1 >= 2.0 && order2 >= 2.0,
            "orders {order1:.2}, {order2:.2} ({errs:?})"
        );
    }

    #[test]
    fn area_term_dominates_as_rate_grows() {
        // the rotation contribution Σ2λA grows linearly in λ while the
        // relative-flow part stays fixed
        let c = Circuit::circle(3, &[0.3, 0.2, 0.0], 0.8, (1, 2), 256);
        let mut shares = Vec::new();
        for lam in [1i64, 10, 100] {
            let spec = spec_d3(lam);
            let flow = tg(&spec);
            let total = circulation(&c, &flow, &spec).unwrap();
            let rot = projection_areas(&c, &spec).unwrap().weighted_sum;
            shares.push((rot / total).abs());
        }
        let remainders: Vec<f64> = shares.iter().map(|s| (1.0 - s).abs()).collect();
        assert!(remainders[0] > remainders[1] && remainders[1] > remainders[2]);
        assert!(remainders[2] < 0.01);
    }
}
