//! The acceptance suite: every check runs with pinned tolerances and
//! deterministic seeds, and is shared between `cargo test` (the
//! `acceptance` target) and the CLI `selfcheck` command.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use num_traits::{FromPrimitive, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::form::{velocity_vector, DifferentialForm, MultiIndex, SymbolicForm};
use crate::kelvin::{
    advect_circuit, chain_invariant, circulation, flow_catalog, lie_first_order_check,
    projection_areas, Chain3, Circuit, FlowName,
};
use crate::poly::Monomial;
use crate::spectral::{
    block_diagonalize, rotating_velocity_form, rotation_two_form, PlaneRotation, Rate,
    RotationSpec, SkewMatrix,
};
use crate::symbol::{Symbol, SymbolTable};
use crate::tpt::{
    derive_constraints, higher_order_correction_degree, row_space_contains, BalanceMode,
    Constraint, ConstraintOrigin,
};
use crate::waves::{build_matrix, check_tpt_consistency, dispersion_roots, e5_dispersion_reference, Branch};
use crate::{Rat, ScalarExpr};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Budgeted runtime per criterion where one is stated; `None` means no
/// budget.
const BUDGETS: [Option<f64>; 12] = [
    Some(1.0),
    Some(10.0),
    Some(30.0),
    None,
    None,
    None,
    Some(60.0),
    None,
    None,
    None,
    None,
    None,
];

pub const CHECK_NAMES: [&str; 12] = [
    "golden_constraint_sets",
    "rotating_velocity_identity",
    "spectral_decomposition",
    "e4_dispersion_closed_form",
    "e5_dispersion_reference",
    "vortical_tpt_consistency",
    "higher_order_redundancy",
    "kelvin_conservation",
    "projection_area_identity",
    "lie_first_order_estimate",
    "chain_invariant",
    "algebra_property_suite",
];

/// Run the acceptance checks whose names contain `filter` (all when
/// `None`). `fault` deliberately perturbs a named check's expected data so
/// failure reporting can be exercised end to end.
pub fn run_all(filter: Option<&str>, fault: Option<&str>) -> Vec<CheckResult> {
    #[allow(clippy::type_complexity)]
    let checks: [fn(Option<&str>) -> (bool, String); 12] = [
        check_golden_sets,
        check_rotating_velocity_identity,
        check_spectral,
        check_e4_dispersion,
        check_e5_reference,
        check_vortical_consistency,
        check_higher_order,
        check_kelvin_conservation,
        check_projection_identity,
        check_lie_estimate,
        check_chain_invariant,
        check_algebra_properties,
    ];
    let mut out = Vec::new();
    for (i, (name, f)) in CHECK_NAMES.iter().zip(checks).enumerate() {
        if let Some(pat) = filter {
            if !name.contains(pat) {
                continue;
            }
        }
        let start = Instant::now();
        let (mut passed, mut detail) = f(fault);
        let seconds = start.elapsed().as_secs_f64();
        if let Some(budget) = BUDGETS[i] {
            if seconds > budget {
                passed = false;
                detail.push_str(&format!("; EXCEEDED {budget:.0}s budget"));
            }
        }
        out.push(CheckResult { id: i as u32 + 1, name, passed, detail, seconds });
    }
    out
}

// ---------------------------------------------------------------------------
// 1: golden constraint sets

fn jet(i: u32, j: u32) -> Symbol {
    Symbol::jet1(i, j)
}

fn lam(i: u32) -> ScalarExpr {
    ScalarExpr::var(Symbol::rate(i))
}

fn golden(terms: Vec<(ScalarExpr, Symbol)>) -> BTreeMap<Symbol, ScalarExpr> {
    Constraint::new(
        terms.into_iter().map(|(c, s)| (s, c)).collect(),
        ConstraintOrigin::BasisForm(vec![]),
        None,
    )
    .expect("golden relations are nonzero")
    .terms()
    .clone()
}

fn sorted(mut v: Vec<BTreeMap<Symbol, ScalarExpr>>) -> Vec<BTreeMap<Symbol, ScalarExpr>> {
    v.sort();
    v
}

fn check_golden_sets(fault: Option<&str>) -> (bool, String) {
    let one = ScalarExpr::one;
    let pairs_e4 = |finer: bool| -> Vec<BTreeMap<Symbol, ScalarExpr>> {
        let mut v = vec![
            golden(vec![(one(), jet(1, 1)), (one(), jet(2, 2))]),
            golden(vec![(one(), jet(3, 3)), (one(), jet(4, 4))]),
        ];
        if finer {
            for (i, j) in [(1, 3), (4, 2), (2, 3), (4, 1), (1, 4), (3, 2), (2, 4), (3, 1)] {
                v.push(golden(vec![(one(), jet(i, j))]));
            }
        } else {
            v.push(golden(vec![(lam(1), jet(1, 3)), (lam(2), jet(4, 2))]));
            v.push(golden(vec![(lam(1), jet(2, 3)), (-&lam(2), jet(4, 1))]));
            v.push(golden(vec![(lam(1), jet(1, 4)), (-&lam(2), jet(3, 2))]));
            v.push(golden(vec![(lam(1), jet(2, 4)), (lam(2), jet(3, 1))]));
        }
        v
    };

    #[allow(clippy::type_complexity)]
    let mut cases: Vec<(&str, RotationSpec, Vec<BTreeMap<Symbol, ScalarExpr>>)> = vec![
        (
            "d=3 classical",
            RotationSpec::canonical_symbolic(3, 1),
            vec![
                golden(vec![(one(), jet(1, 1)), (one(), jet(2, 2))]),
                golden(vec![(one(), jet(1, 3))]),
                golden(vec![(one(), jet(2, 3))]),
            ],
        ),
        ("d=4 simultaneous", RotationSpec::canonical_symbolic(4, 2), pairs_e4(false)),
        (
            "d=4 independent",
            RotationSpec::canonical_symbolic_with_orders(4, &[2, 1]),
            pairs_e4(true),
        ),
        (
            "d=4 simple",
            RotationSpec::canonical_values(4, &[Rat::one(), Rat::zero()]).expect("valid"),
            vec![
                golden(vec![(one(), jet(1, 1)), (one(), jet(2, 2))]),
                golden(vec![(one(), jet(1, 3))]),
                golden(vec![(one(), jet(1, 4))]),
                golden(vec![(one(), jet(2, 3))]),
                golden(vec![(one(), jet(2, 4))]),
            ],
        ),
    ];
    let mut d5 = pairs_e4(false);
    for a in 1..=4 {
        d5.push(golden(vec![(one(), jet(a, 5))]));
    }
    cases.push(("d=5 double + cylinder", RotationSpec::canonical_symbolic(5, 2), d5));

    if fault == Some("golden") {
        // seeded perturbation: flip one golden coefficient sign
        cases[0].2[0] = golden(vec![(one(), jet(1, 1)), (-&one(), jet(2, 2))]);
    }

    for (label, spec, want) in cases {
        let cs = match derive_constraints(&spec, 1, BalanceMode::DominantBalance) {
            Ok(cs) => cs,
            Err(e) => return (false, format!("{label}: derivation failed: {e}")),
        };
        let got: Vec<_> = cs.constraints.iter().map(|c| c.terms().clone()).collect();
        if got != sorted(want) {
            return (false, format!("{label}: derived set differs from the golden relations"));
        }
    }
    (true, "5 golden sets reproduced with structural equality".into())
}

// ---------------------------------------------------------------------------
// 2: dU_R = 2Ω_R, exhaustive plane layouts for d ≤ 8

fn matchings(free: &[u32]) -> Vec<Vec<(u32, u32)>> {
    if free.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let a = free[0];
    let rest: Vec<u32> = free[1..].to_vec();
    // a unpaired
    out.extend(matchings(&rest));
    // a paired with each later axis
    for (idx, &b) in rest.iter().enumerate() {
        let mut remaining = rest.clone();
        remaining.remove(idx);
        for mut m in matchings(&remaining) {
            m.insert(0, (a, b));
            out.push(m);
        }
    }
    out
}

fn check_rotating_velocity_identity(_fault: Option<&str>) -> (bool, String) {
    let mut layouts = 0usize;
    for d in 1..=8u32 {
        let axes: Vec<u32> = (1..=d).collect();
        for pairing in matchings(&axes) {
            if pairing.is_empty() {
                continue;
            }
            let planes: Vec<PlaneRotation> = pairing
                .iter()
                .map(|&(a, b)| PlaneRotation { axes: (a, b), rate: Rate::Symbolic, order: 1 })
                .collect();
            let spec = RotationSpec::new(d, planes).expect("disjoint pairs");
            let ur = rotating_velocity_form(&spec);
            let table = SymbolTable::new(d);
            let dur = ur.exterior_derivative(&table).expect("polynomial");
            let two_om = rotation_two_form(&spec)
                .scale(&ScalarExpr::constant(Rat::from_i64(2).unwrap()));
            let diff = dur.sub(&two_om).expect("2-forms");
            if !diff.is_zero() {
                return (false, format!("dU_R ≠ 2Ω_R for d={d}, planes {pairing:?}"));
            }
            layouts += 1;
        }
    }
    (true, format!("exact over {layouts} plane layouts, d ≤ 8"))
}

// ---------------------------------------------------------------------------
// 3: spectral decomposition against the −A² eigenvalue oracle

fn check_spectral(_fault: Option<&str>) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst_residual = 0.0f64;
    let mut worst_rate = 0.0f64;
    for trial in 0..1000 {
        let d = rng.gen_range(1..=10usize);
        let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.gen_range(-3.0..3.0));
        let a = &g - g.transpose();
        let skew = SkewMatrix::new(a.clone()).expect("constructed skew");
        let dec = match block_diagonalize(&skew) {
            Ok(dec) => dec,
            Err(e) => return (false, format!("trial {trial}: {e}")),
        };
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        worst_residual = worst_residual.max(dec.residual / scale);
        if dec.residual > 1e-10 * scale {
            return (false, format!("trial {trial}: residual {} > 1e-10·max|A|", dec.residual));
        }
        // oracle: rates are square roots of the eigenvalues of −A² (each
        // doubled), via the symmetric eigensolver — an independent path
        let sym = -(&a * &a);
        let mut eig: Vec<f64> = sym
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let oracle: Vec<f64> = eig.chunks(2).map(|c| c[0]).take(dec.rates.len()).collect();
        // relative to the rate scale: the squared-matrix oracle carries no
        // more than absolute eps·|A|² information, so per-rate relative
        // comparison is meaningless for rates far below the scale
        let rate_scale = dec.rates.first().copied().unwrap_or(0.0).max(1e-300);
        for (got, want) in dec.rates.iter().zip(&oracle) {
            let rel = (got - want).abs() / rate_scale;
            worst_rate = worst_rate.max(rel);
            if rel > 1e-9 {
                return (
                    false,
                    format!("trial {trial}: rate {got} vs oracle {want} ({rel:.2e} of scale)"),
                );
            }
        }
    }
    (
        true,
        format!(
            "1000 matrices, d ≤ 10: max residual {worst_residual:.2e}·|A|, max rate error {worst_rate:.2e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4: E⁴ closed-form dispersion + E³ specialization

fn rat(n: i64) -> Rat {
    Rat::from_i64(n).unwrap()
}

fn check_e4_dispersion(_fault: Option<&str>) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 1000 {
        let l1 = rng.gen_range(1..=60i64);
        let l2 = rng.gen_range(1..=60i64);
        let kk: Vec<i64> = (0..4).map(|_| rng.gen_range(-25..=25)).collect();
        if kk.iter().all(|v| *v == 0) {
            continue;
        }
        done += 1;
        let spec = RotationSpec::canonical_values(4, &[rat(l1), rat(l2)]).expect("valid");
        let krat: Vec<Rat> = kk.iter().map(|&v| rat(v)).collect();
        let m = build_matrix(&spec, &krat).expect("nonzero k");
        let res = match dispersion_roots(&m) {
            Ok(r) => r,
            Err(e) => return (false, format!("λ=({l1},{l2}) k={kk:?}: {e}")),
        };
        let kf: Vec<f64> = kk.iter().map(|&v| v as f64).collect();
        let s = (l2 * l2) as f64 * (kf[0] * kf[0] + kf[1] * kf[1])
            + (l1 * l1) as f64 * (kf[2] * kf[2] + kf[3] * kf[3]);
        let want = 2.0 * s.sqrt() / kf.iter().map(|x| x * x).sum::<f64>().sqrt();
        let pos = res.roots.iter().map(|r| r.value).fold(f64::MIN, f64::max);
        let rel = (pos - want).abs() / want.max(1e-300);
        worst = worst.max(rel);
        if rel > 1e-12 {
            return (false, format!("λ=({l1},{l2}) k={kk:?}: root {pos} vs {want} (rel {rel:.2e})"));
        }
        if !res
            .roots
            .iter()
            .any(|r| r.value == 0.0 && r.branch == Branch::NaturalVortical)
        {
            return (false, format!("λ=({l1},{l2}) k={kk:?}: missing natural vortical root"));
        }
    }
    // E³ specialization
    let mut done3 = 0;
    while done3 < 300 {
        let l = rng.gen_range(1..=40i64);
        let kk: Vec<i64> = (0..3).map(|_| rng.gen_range(-15..=15)).collect();
        if kk.iter().all(|v| *v == 0) {
            continue;
        }
        done3 += 1;
        let spec = RotationSpec::canonical_values(3, &[rat(l)]).expect("valid");
        let krat: Vec<Rat> = kk.iter().map(|&v| rat(v)).collect();
        let m = build_matrix(&spec, &krat).expect("nonzero k");
        let res = dispersion_roots(&m).expect("solvable");
        let kn = kk.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        let want = 2.0 * l as f64 * (kk[2] as f64).abs() / kn;
        let pos = res.roots.iter().map(|r| r.value).fold(f64::MIN, f64::max);
        let rel = (pos - want).abs() / want.max(1.0);
        worst = worst.max(rel);
        if rel > 1e-12 {
            return (false, format!("E3 λ={l} k={kk:?}: root {pos} vs {want}"));
        }
    }
    (true, format!("1000 E⁴ + 300 E³ samples, max relative deviation {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 5: E⁵ reference-formula cross-check

fn check_e5_reference(_fault: Option<&str>) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 500 {
        let l1 = rng.gen_range(1..=9i64);
        let l2 = rng.gen_range(1..=9i64);
        let kk: Vec<i64> = (0..5).map(|_| rng.gen_range(-7..=7)).collect();
        if kk.iter().all(|v| *v == 0) {
            continue;
        }
        done += 1;
        let spec = RotationSpec::canonical_values(5, &[rat(l1), rat(l2)]).expect("valid");
        let krat: Vec<Rat> = kk.iter().map(|&v| rat(v)).collect();
        let m = build_matrix(&spec, &krat).expect("nonzero k");
        let res = match dispersion_roots(&m) {
            Ok(r) => r,
            Err(e) => return (false, format!("λ=({l1},{l2}) k={kk:?}: {e}")),
        };
        let kf: [f64; 5] = kk
            .iter()
            .map(|&v| v as f64)
            .collect::<Vec<_>>()
            .try_into()
            .unwrap();
        let want = e5_dispersion_reference(l1 as f64, l2 as f64, &kf);
        let pos = res.roots.iter().map(|r| r.value).fold(f64::MIN, f64::max);
        let rel = (pos - want).abs() / want.max(1e-300);
        worst = worst.max(rel);
        if rel > 1e-10 {
            return (false, format!("λ=({l1},{l2}) k={kk:?}: root {pos} vs formula {want} (rel {rel:.2e})"));
        }
    }
    (true, format!("500 samples, max relative deviation {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 6: vortical nullspaces satisfy the matching constraint sets

fn check_vortical_consistency(_fault: Option<&str>) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut worst = 0.0f64;

    // (spec, k-sampler) triples covering both E⁴ fastness modes and E⁵
    struct Case {
        label: &'static str,
        spec: RotationSpec,
        restrict: fn(&mut ChaCha8Rng) -> Vec<Rat>,
    }
    let cases = [
        Case {
            label: "E4 simultaneous double (natural)",
            spec: RotationSpec::canonical_values(4, &[rat(2), rat(3)]).expect("valid"),
            restrict: |rng| (0..4).map(|_| rat(rng.gen_range(-9..=9))).collect(),
        },
        Case {
            label: "E4 simple (natural + imposed at k3=k4=0)",
            spec: RotationSpec::canonical_values(4, &[rat(2), rat(0)]).expect("valid"),
            restrict: |rng| {
                vec![rat(rng.gen_range(1..=9)), rat(rng.gen_range(-9..=9)), rat(0), rat(0)]
            },
        },
        Case {
            label: "E5 double (imposed at k5=0)",
            spec: RotationSpec::canonical_values(5, &[rat(2), rat(3)]).expect("valid"),
            restrict: |rng| {
                let mut k: Vec<Rat> = (0..4).map(|_| rat(rng.gen_range(-9..=9))).collect();
                if k.iter().all(Zero::is_zero) {
                    k[0] = rat(1);
                }
                k.push(rat(0));
                k
            },
        },
    ];
    for case in &cases {
        let cs = derive_constraints(&case.spec, 1, BalanceMode::DominantBalance)
            .expect("fast planes");
        for _ in 0..50 {
            let k = (case.restrict)(&mut rng);
            if k.iter().all(Zero::is_zero) {
                continue;
            }
            let m = build_matrix(&case.spec, &k).expect("nonzero k");
            let res = dispersion_roots(&m).expect("solvable");
            if res.vortical_roots().next().is_none() {
                return (false, format!("{}: no vortical root at k={k:?}", case.label));
            }
            match check_tpt_consistency(&m, &res, &cs) {
                Ok(rep) => {
                    worst = worst.max(rep.max_residual);
                    if rep.max_residual > 1e-10 {
                        return (
                            false,
                            format!("{}: residual {:.2e} at k={:?}", case.label, rep.max_residual, k),
                        );
                    }
                }
                Err(e) => return (false, format!("{}: {e}", case.label)),
            }
        }
    }
    (true, format!("3 modes × 50 wavevectors, max residual {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 7: higher-order redundancy and correction degree

fn check_higher_order(_fault: Option<&str>) -> (bool, String) {
    let mut specs: Vec<(u32, Vec<u32>)> = Vec::new();
    for d in 2..=6u32 {
        let max_planes = d / 2;
        for n in 1..=max_planes {
            let patterns: Vec<Vec<u32>> = match n {
                1 => vec![vec![1]],
                2 => vec![vec![1, 1], vec![2, 1]],
                3 => vec![vec![1, 1, 1], vec![2, 1, 1], vec![2, 2, 1], vec![3, 2, 1]],
                _ => unreachable!("d ≤ 6"),
            };
            for p in patterns {
                specs.push((d, p));
            }
        }
    }
    let mut redundancy_checks = 0;
    for (d, orders) in &specs {
        let spec = RotationSpec::canonical_symbolic_with_orders(*d, orders);
        let k1 = derive_constraints(&spec, 1, BalanceMode::DominantBalance).expect("fast");
        for k in 2..=(*d / 2) {
            let kset = derive_constraints(&spec, k, BalanceMode::DominantBalance).expect("fast");
            if !row_space_contains(&k1, &kset) {
                return (
                    false,
                    format!("d={d} orders={orders:?} k={k}: higher-order set escapes the k=1 row space"),
                );
            }
            redundancy_checks += 1;
        }
        if *d >= 4 {
            let report = higher_order_correction_degree(&spec);
            if report.min_jet_degree < 2 {
                return (
                    false,
                    format!("d={d} orders={orders:?}: correction degree {}", report.min_jet_degree),
                );
            }
        }
    }
    (
        true,
        format!("{} specs, {redundancy_checks} higher-order containments, corrections all ≥ quadratic", specs.len()),
    )
}

// ---------------------------------------------------------------------------
// 8: Kelvin circulation conservation

fn check_kelvin_conservation(_fault: Option<&str>) -> (bool, String) {
    // d=3 and d=5 Taylor-Green scenarios at the pinned resolution
    let scenarios: [(u32, Vec<Rat>, Vec<f64>); 2] = [
        (3, vec![rat(2)], vec![0.4, -0.3, 0.2]),
        (5, vec![rat(2), rat(1)], vec![0.4, -0.3, 0.2, 0.1, -0.2]),
    ];
    let mut details = Vec::new();
    for (d, rates, center) in &scenarios {
        let spec = RotationSpec::canonical_values(*d, rates).expect("valid");
        let flow = flow_catalog(&FlowName::TaylorGreenPlane(1), &spec).expect("cataloged");
        let c = Circuit::circle(*d as usize, center, 0.9, (1, 2), 1024);
        let g0 = circulation(&c, &flow, &spec).expect("numeric rates");
        let adv = match advect_circuit(&c, &flow, 1.0, 1e-3) {
            Ok(a) => a,
            Err(e) => return (false, format!("d={d}: {e}")),
        };
        let g1 = circulation(&adv, &flow, &spec).expect("numeric rates");
        let drift = ((g1 - g0) / g0).abs();
        if drift >= 1e-8 {
            return (false, format!("d={d}: relative drift {drift:.2e} ≥ 1e-8"));
        }
        details.push(format!("d={d} drift {drift:.1e}"));
    }

    // measured dt-convergence order on the d=3 scenario
    let spec = RotationSpec::canonical_values(3, &[rat(2)]).expect("valid");
    let flow = flow_catalog(&FlowName::TaylorGreenPlane(1), &spec).expect("cataloged");
    let c = Circuit::circle(3, &[0.4, -0.3, 0.2], 0.9, (1, 2), 512);
    let g0 = circulation(&c, &flow, &spec).expect("numeric");
    let mut drifts = Vec::new();
    for dt in [1.6e-2, 8e-3, 4e-3] {
        let adv = advect_circuit(&c, &flow, 1.0, dt).expect("steps fit");
        let g1 = circulation(&adv, &flow, &spec).expect("numeric");
        drifts.push(((g1 - g0) / g0).abs());
    }
    let order1 = (drifts[0] / drifts[1]).log2();
    let order2 = (drifts[1] / drifts[2]).log2();
    let order = order1.min(order2);
    if order < 3.9 {
        return (
            false,
            format!("dt-convergence order {order:.2} < 3.9 (drifts {drifts:?})"),
        );
    }

    // negative control: the non-solution flow must drift visibly
    let spec3 = RotationSpec::canonical_values(3, &[rat(2)]).expect("valid");
    let control = flow_catalog(&FlowName::ShearNonsolution, &spec3).expect("cataloged");
    let tilted = Circuit::tilted_circle(
        3,
        &[0.3, 0.2, 0.4],
        1.0,
        &[1.0, 0.0, 0.0],
        &[0.0, 0.6, 0.8],
        512,
    )
    .expect("orthonormal frame");
    let g0 = circulation(&tilted, &control, &spec3).expect("numeric");
    let adv = advect_circuit(&tilted, &control, 1.0, 1e-3).expect("bounded flow");
    let g1 = circulation(&adv, &control, &spec3).expect("numeric");
    let control_drift = ((g1 - g0) / g0.abs().max(1.0)).abs();
    if control_drift <= 1e-2 {
        return (false, format!("control drift {control_drift:.2e} ≤ 1e-2"));
    }
    (
        true,
        format!(
            "{}; dt-order {order:.2}; control drift {control_drift:.2}",
            details.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 9: projection-area identity on random circuits

fn check_projection_identity(_fault: Option<&str>) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let d = if trial % 2 == 0 { 4usize } else { 5 };
        let n_planes = d / 2;
        let rates: Vec<Rat> = (0..n_planes)
            .map(|_| Rat::new(rng.gen_range(1..=12).into(), rng.gen_range(1..=4).into()))
            .collect();
        let spec = RotationSpec::canonical_values(d as u32, &rates).expect("valid");
        let center: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let modes = 4;
        let coeffs = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..d)
                .map(|_| {
                    (1..=modes)
                        .map(|m| rng.gen_range(-1.0..1.0) / (m * m) as f64)
                        .collect()
                })
                .collect()
        };
        let a = coeffs(&mut rng);
        let b = coeffs(&mut rng);
        let c = Circuit::fourier(d, &center, &a, &b, 4096);
        match projection_areas(&c, &spec) {
            Ok(rep) => {
                let resid = (rep.weighted_sum - rep.ur_integral).abs();
                worst = worst.max(resid);
                if resid >= 1e-10 {
                    return (false, format!("trial {trial}: residual {resid:.2e}"));
                }
            }
            Err(e) => return (false, format!("trial {trial}: {e}")),
        }
    }
    (true, format!("100 random circuits (N=4096), max residual {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 10: first-order pullback estimate, O(t²) error

fn check_lie_estimate(_fault: Option<&str>) -> (bool, String) {
    let spec = RotationSpec::canonical_values(3, &[rat(2)]).expect("valid");
    let flow = flow_catalog(&FlowName::ShearNonsolution, &spec).expect("cataloged");
    let c = Circuit::tilted_circle(
        3,
        &[0.3, 0.2, 0.4],
        1.0,
        &[1.0, 0.0, 0.0],
        &[0.0, 0.6, 0.8],
        512,
    )
    .expect("orthonormal frame");
    let rep = match lie_first_order_check(&c, &flow, &spec, &[1e-1, 1e-2, 1e-3], 1e-3) {
        Ok(r) => r,
        Err(e) => return (false, format!("{e}")),
    };
    match rep.slope {
        Some(s) if (1.9..=2.1).contains(&s) => {
            (true, format!("log-log slope {s:.3} over t ∈ {{1e-1, 1e-2, 1e-3}}"))
        }
        Some(s) => (false, format!("slope {s:.3} outside [1.9, 2.1]")),
        None => (false, "error curve sat at the numerical floor".into()),
    }
}

// ---------------------------------------------------------------------------
// 11: 3-chain invariant

fn check_chain_invariant(_fault: Option<&str>) -> (bool, String) {
    let spec = RotationSpec::canonical_values(5, &[rat(2), rat(1)]).expect("valid");

    // rigid: static chain, static integrand
    let rigid = flow_catalog(&FlowName::Rigid, &spec).expect("cataloged");
    let ch = Chain3::torus(5, 16, 1.6, 0.8, 0.35).expect("embedded");
    let rep = chain_invariant(&ch, &rigid, &spec, 1, 0.5, 1e-2).expect("advects");
    if rep.drift_abs > 1e-14 * rep.initial.abs() {
        return (false, format!("rigid drift {:.2e} above the quadrature floor", rep.drift_abs));
    }

    // Taylor-Green: drift < 1e-4 at M=16 with ≥ 2nd-order grid convergence
    let flow = flow_catalog(&FlowName::TaylorGreenPlane(1), &spec).expect("cataloged");
    let mut drifts = Vec::new();
    for m in [8usize, 16] {
        let ch = Chain3::torus(5, m, 1.6, 0.8, 0.35).expect("embedded");
        match chain_invariant(&ch, &flow, &spec, 1, 0.1, 1e-3) {
            Ok(rep) => drifts.push(rep.drift_rel),
            Err(e) => return (false, format!("M={m}: {e}")),
        }
    }
    if drifts[1] >= 1e-4 {
        return (false, format!("M=16 drift {:.2e} ≥ 1e-4", drifts[1]));
    }
    let order = (drifts[0] / drifts[1]).log2();
    if order < 2.0 {
        return (false, format!("grid convergence order {order:.2} < 2 ({drifts:?})"));
    }

    // non-solution control
    let control = flow_catalog(&FlowName::ShearNonsolution, &spec).expect("cataloged");
    let ch = Chain3::torus(5, 12, 1.6, 0.8, 0.35).expect("embedded");
    let rep = chain_invariant(&ch, &control, &spec, 1, 2.0, 1e-2).expect("advects");
    if rep.drift_rel <= 1e-2 {
        return (false, format!("control drift {:.2e} ≤ 1e-2", rep.drift_rel));
    }
    (
        true,
        format!(
            "rigid exact; TG drift {:.1e} at M=16 (order {order:.1}); control drift {:.2}",
            drifts[1], rep.drift_rel
        ),
    )
}

// ---------------------------------------------------------------------------
// 12: randomized exact algebra properties

struct FormSampler {
    rng: ChaCha8Rng,
}

impl FormSampler {
    fn new(seed: u64) -> Self {
        FormSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn coeff(&mut self, dim: u32, max_jet_order: u32) -> ScalarExpr {
        let mut e = ScalarExpr::zero();
        let n_terms = self.rng.gen_range(1..=2);
        for _ in 0..n_terms {
            let c = Rat::new(
                self.rng.gen_range(-9..=9i64).into(),
                self.rng.gen_range(1..=4i64).into(),
            );
            if c.is_zero() {
                continue;
            }
            let mut powers = Vec::new();
            for _ in 0..self.rng.gen_range(0..=2) {
                let sym = match self.rng.gen_range(0..4) {
                    0 => Symbol::coord(self.rng.gen_range(1..=dim)),
                    1 => Symbol::rate(self.rng.gen_range(1..=(dim / 2).max(1))),
                    2 => Symbol::jet0(self.rng.gen_range(1..=dim)),
                    _ if max_jet_order >= 1 => Symbol::jet1(
                        self.rng.gen_range(1..=dim),
                        self.rng.gen_range(1..=dim),
                    ),
                    _ => Symbol::jet0(self.rng.gen_range(1..=dim)),
                };
                powers.push((sym, 1));
            }
            e.add_term(c, Monomial::from_powers(powers));
        }
        e
    }

    fn form(&mut self, dim: u32, degree: u32, max_jet_order: u32) -> SymbolicForm {
        let mut f = DifferentialForm::zero(dim, degree);
        for _ in 0..self.rng.gen_range(1..=3) {
            let mut axes: Vec<u32> = (1..=dim).collect();
            for i in (1..axes.len()).rev() {
                let j = self.rng.gen_range(0..=i);
                axes.swap(i, j);
            }
            let mut index: Vec<u32> = axes.into_iter().take(degree as usize).collect();
            index.sort_unstable();
            f.add_term(MultiIndex::new(index), self.coeff(dim, max_jet_order));
        }
        f
    }
}

fn check_algebra_properties(_fault: Option<&str>) -> (bool, String) {
    let mut s = FormSampler::new(1012);
    let cases_per_property = 2000;
    let mut total = 0usize;

    // antisymmetry of the wedge
    for _ in 0..cases_per_property {
        let d = s.rng.gen_range(1..=6);
        let p = s.rng.gen_range(0..=d);
        let q = s.rng.gen_range(0..=(d - p));
        let a = s.form(d, p, 1);
        let b = s.form(d, q, 1);
        let ab = a.wedge(&b).expect("same dim");
        let ba = b.wedge(&a).expect("same dim");
        let expect = if (p * q) % 2 == 0 { ba } else { ba.neg() };
        if ab != expect {
            return (false, format!("antisymmetry failed at case {total}"));
        }
        total += 1;
    }
    // d∘d = 0
    for _ in 0..cases_per_property {
        let d = s.rng.gen_range(1..=6);
        let table = SymbolTable::new(d);
        let deg = s.rng.gen_range(0..=d);
        let a = s.form(d, deg, 0);
        let dd = a
            .exterior_derivative(&table)
            .and_then(|da| da.exterior_derivative(&table))
            .expect("jet budget");
        if !dd.is_zero() {
            return (false, format!("d∘d ≠ 0 at case {total}"));
        }
        total += 1;
    }
    // Cartan consistency on closed forms: L_v a = d ι_v a when da = 0
    let mut cartan_done = 0;
    while cartan_done < cases_per_property {
        let d = s.rng.gen_range(2..=6);
        let table = SymbolTable::new(d);
        let deg = s.rng.gen_range(0..d);
        let b = s.form(d, deg, 0);
        let a = b.exterior_derivative(&table).expect("budget");
        if a.degree() == 0 || a.is_zero() {
            continue;
        }
        cartan_done += 1;
        let v = velocity_vector(d);
        let lie = a.lie_derivative(&v, &table).expect("budget");
        let dio = a
            .interior_product(&v)
            .expect("positive degree")
            .exterior_derivative(&table)
            .expect("budget");
        if lie != dio {
            return (false, format!("Cartan consistency failed at case {total}"));
        }
        total += 1;
    }
    // Hodge involution
    for _ in 0..cases_per_property {
        let d = s.rng.gen_range(1..=6);
        let k = s.rng.gen_range(0..=d);
        let a = s.form(d, k, 1);
        let twice = a.hodge_star().hodge_star();
        let expect = if (k * (d - k)) % 2 == 0 { a } else { a.neg() };
        if twice != expect {
            return (false, format!("Hodge involution failed at case {total}"));
        }
        total += 1;
    }
    // Leibniz rule for the Lie derivative over the wedge
    for _ in 0..cases_per_property {
        let d = s.rng.gen_range(2..=5);
        let table = SymbolTable::new(d);
        let p = s.rng.gen_range(0..=2.min(d));
        let q = s.rng.gen_range(0..=(d - p).min(2));
        let a = s.form(d, p, 1);
        let b = s.form(d, q, 1);
        let v = velocity_vector(d);
        let lhs = a
            .wedge(&b)
            .expect("dim")
            .lie_derivative(&v, &table)
            .expect("budget");
        let la = a.lie_derivative(&v, &table).expect("budget");
        let lb = b.lie_derivative(&v, &table).expect("budget");
        let rhs = la
            .wedge(&b)
            .expect("dim")
            .add(&a.wedge(&lb).expect("dim"))
            .expect("degree");
        if lhs != rhs {
            return (false, format!("Leibniz failed at case {total}"));
        }
        total += 1;
    }
    (true, format!("{total} randomized exact cases, zero failures"))
}
