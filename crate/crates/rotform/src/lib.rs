//! Symbolic and numeric toolkit for rotating flows in d-dimensional
//! Euclidean space.
//!
//! The crate decomposes arbitrary rotation generators into planes and
//! rates, derives Taylor-Proudman constraint sets (including
//! dominant-balance refinements and higher-order circulation analogues),
//! solves inertial-wave dispersion relations, and verifies circulation
//! invariants numerically by advecting material circuits and 3-chains.
//!
//! Core layers, bottom to top:
//!
//! * [`poly`] / [`symbol`] — exact sparse polynomials over the jet ring,
//!   generic over the coefficient scalar.
//! * [`form`] — exterior algebra (wedge, Hodge star, interior product,
//!   exterior and Lie derivatives) with exact rational coefficients, plus
//!   numeric evaluation.
//! * [`spectral`] — skew-matrix block diagonalization into rotation planes
//!   and rates; rotation 2-forms and velocity 1-forms; fastness classes.
//! * [`tpt`] — constraint derivation from the fast-rotation closure, with
//!   combined or dominant-balance order splitting and reduced-model
//!   classification.
//! * [`waves`] — exact normal-mode dispersion polynomials, root branches,
//!   and consistency of vortical modes with the constraint sets.
//! * [`kelvin`] — material circuit / chain advection and circulation
//!   quadrature against cataloged rotating-frame Euler solutions.
//! * [`selfcheck`] — the acceptance suite shared by `cargo test` and the
//!   CLI.
//!
//! All symbolic identities are checked in exact rational arithmetic;
//! floating point appears only in evaluation, spectral decomposition and
//! the simulators.

pub mod form;
pub mod kelvin;
pub mod poly;
pub mod selfcheck;
pub mod spectral;
pub mod symbol;
pub mod tpt;
pub mod waves;

/// Exact rational scalar used by every symbolic computation.
pub type Rat = num_rational::BigRational;

/// Complex rational scalar (Gaussian rationals) for normal-mode matrices.
pub type CRat = num_complex::Complex<Rat>;

/// Exact multivariate polynomial over the jet-ring symbols.
pub type ScalarExpr = poly::Poly<symbol::Symbol, Rat>;

pub use form::{
    kernel_of_two_form, position_one_form, velocity_one_form, velocity_vector, Bindings,
    DifferentialForm, FormError, KernelResult, MultiIndex, NumericForm, SymbolicForm,
};
pub use poly::{Coeff, Monomial, Poly, UniPoly};
pub use spectral::{
    block_diagonalize, classify_fastness, rotating_velocity_form, rotation_two_form,
    PlaneRotation, Rate, RotationSpec, SkewMatrix, SpectralDecomposition, SpectralError,
};
pub use symbol::{Symbol, SymbolError, SymbolTable};
pub use tpt::{
    coriolis_closure, derive_constraints, BalanceMode, Constraint, ConstraintSet, ReductionReport,
    TptError,
};
pub use kelvin::{
    circulation, flow_catalog, projection_areas, Chain3, Circuit, FlowField, FlowName,
    KelvinError,
};
pub use waves::{
    build_matrix, dispersion_polynomial, dispersion_roots, Branch, DispersionResult,
    NormalModeMatrix, WaveError,
};

/// Rational from an `f64` snapped to 1e-15 granularity (scaled-integer
/// ingest for numeric rates and wavevectors).
pub fn rat_from_f64_snapped(x: f64) -> Rat {
    use num_bigint::BigInt;
    let scaled = (x * 1e15).round();
    Rat::new(
        BigInt::from(scaled as i128),
        BigInt::from(1_000_000_000_000_000u64),
    )
}

/// Parse an exact rational from `"p/q"`, an integer, or a decimal string.
pub fn rat_from_str(s: &str) -> Result<Rat, String> {
    use num_bigint::BigInt;
    use std::str::FromStr;
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|e| e.to_string())?;
        let d = BigInt::from_str(den.trim()).map_err(|e| e.to_string())?;
        if d == BigInt::from(0) {
            return Err("zero denominator".into());
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if !frac_part.is_empty() && frac_part.chars().all(|c| c.is_ascii_digit()) {
            let neg = int_part.trim_start().starts_with('-');
            let ip = if int_part.is_empty() || int_part == "-" {
                BigInt::from(0)
            } else {
                BigInt::from_str(int_part).map_err(|e| e.to_string())?
            };
            let fp = BigInt::from_str(frac_part).map_err(|e| e.to_string())?;
            let den = BigInt::from(10u8).pow(frac_part.len() as u32);
            let frac = Rat::new(fp, den);
            let whole = Rat::from_integer(ip);
            return Ok(if neg { whole - frac } else { whole + frac });
        }
    }
    if let Ok(n) = BigInt::from_str(s) {
        return Ok(Rat::from_integer(n));
    }
    // scientific notation and anything else goes through f64 at 1e-15 granularity
    s.parse::<f64>()
        .map(rat_from_f64_snapped)
        .map_err(|e| format!("cannot parse rational '{s}': {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{FromPrimitive, ToPrimitive};

    #[test]
    fn rational_parsing() {
        assert_eq!(rat_from_str("3/2").unwrap(), Rat::new(3.into(), 2.into()));
        assert_eq!(rat_from_str("-7").unwrap(), Rat::from_i64(-7).unwrap());
        assert_eq!(rat_from_str("0.1").unwrap(), Rat::new(1.into(), 10.into()));
        assert_eq!(rat_from_str("-2.5").unwrap(), Rat::new((-5).into(), 2.into()));
        assert!(rat_from_str("abc").is_err());
    }

    #[test]
    fn snapping_granularity() {
        let r = rat_from_f64_snapped(0.5);
        assert_eq!(r, Rat::new(1.into(), 2.into()));
        let r = rat_from_f64_snapped(1.0 / 3.0);
        assert!((r.to_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }
}
