//! Constraint sets forced on velocity jets by fast rotation.
//!
//! The fast-rotation closure `d ι_u (Ω_R^k)` must vanish asymptotically;
//! each basis-form coefficient yields homogeneous linear relations in the
//! first jets. Dominant balance is implemented by formal ε-grading
//! (`λ_i = c_i ε^{-o_i}`) with exact bookkeeping of ε exponents: the
//! coefficient of each distinct ε power becomes a separate relation, so the
//! order-by-order vanishing is mechanized without tolerance choices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::form::{velocity_one_form, velocity_vector, DifferentialForm, SymbolicForm};
use crate::poly::Monomial;
use crate::spectral::{rotating_velocity_form, rotation_two_form, Rate, RotationSpec};
use crate::symbol::Symbol;
use crate::{Rat, ScalarExpr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TptError {
    #[error("no fast rotation plane (all order classes are zero)")]
    NoFastPlane,
    #[error("rescaling requires a combined-mode set over exactly two planes")]
    RescalePrecondition,
    #[error("rescale ratio must be positive, got {0}")]
    NonPositiveRatio(String),
    #[error("reduction classification requires a first-order (k=1) set, got k={0}")]
    NotFirstOrder(u32),
    #[error("constraint is not linear in jet symbols: {0}")]
    NotLinearInJets(String),
}

/// How asymptotically large terms are grouped into relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BalanceMode {
    /// All fast terms of a basis coefficient stay in one relation.
    Combined,
    /// Each distinct ε order becomes its own relation.
    DominantBalance,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ConstraintOrigin {
    /// Coefficient of this basis form in the closure.
    BasisForm(Vec<u32>),
    /// Completion of total incompressibility against in-plane relations.
    Incompressibility,
}

/// A normalized homogeneous linear form in first jets with coefficients
/// polynomial in the rates.
///
/// Normal form: coefficients are divided by their common rational content
/// and common rate monomial, and the lexicographically smallest jet symbol
/// carries a positive leading coefficient. Equality of normal forms is
/// structural.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Constraint {
    terms: BTreeMap<Symbol, ScalarExpr>,
    pub origin: ConstraintOrigin,
    /// Magnitude of the ε exponent this relation vanishes at
    /// (dominant-balance mode only).
    pub order_class: Option<u32>,
}

impl Constraint {
    /// Build and normalize; returns `None` when every coefficient is zero.
    pub fn new(
        terms: BTreeMap<Symbol, ScalarExpr>,
        origin: ConstraintOrigin,
        order_class: Option<u32>,
    ) -> Option<Self> {
        let mut terms: BTreeMap<Symbol, ScalarExpr> =
            terms.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        if terms.is_empty() {
            return None;
        }

        // combined content over all coefficients
        let mut whole = ScalarExpr::zero();
        for c in terms.values() {
            whole = &whole + c;
        }
        // `whole` can cancel between jets; fold in each coefficient instead
        let mut content = Rat::zero();
        let mut mono_gcd: Option<Monomial<Symbol>> = None;
        for c in terms.values() {
            let cc = c.content();
            content = rat_gcd(&content, &cc);
            let mg = c.monomial_gcd().expect("nonzero coefficient");
            mono_gcd = Some(match mono_gcd {
                None => mg,
                Some(g) => g.gcd(&mg),
            });
        }
        let mono_gcd = mono_gcd.expect("nonempty");
        let inv = content.recip();
        for c in terms.values_mut() {
            let mut out = ScalarExpr::zero();
            for (m, k) in c.terms() {
                out.add_term(k.clone() * inv.clone(), m.div_exact(&mono_gcd));
            }
            *c = out;
        }

        // smallest jet symbol carries a positive sign
        let lead = terms.keys().next().expect("nonempty").to_owned();
        let lead_sign_negative = terms[&lead]
            .terms()
            .next()
            .map(|(_, c)| c < &Rat::zero())
            .unwrap_or(false);
        if lead_sign_negative {
            for c in terms.values_mut() {
                *c = -&*c;
            }
        }

        Some(Constraint { terms, origin, order_class })
    }

    /// Build from a scalar expression that is linear in jet symbols.
    pub fn from_expr(
        expr: &ScalarExpr,
        origin: ConstraintOrigin,
        order_class: Option<u32>,
    ) -> Result<Option<Self>, TptError> {
        let mut terms: BTreeMap<Symbol, ScalarExpr> = BTreeMap::new();
        for (mono, coeff) in expr.terms() {
            let jets: Vec<(Symbol, u32)> = mono
                .powers()
                .iter()
                .filter(|(s, _)| s.is_jet())
                .map(|(s, e)| (*s, *e))
                .collect();
            if jets.len() != 1 || jets[0].1 != 1 {
                return Err(TptError::NotLinearInJets(expr.to_string()));
            }
            let rest = Monomial::from_powers(
                mono.powers()
                    .iter()
                    .filter(|(s, _)| !s.is_jet())
                    .cloned()
                    .collect(),
            );
            terms
                .entry(jets[0].0)
                .or_insert_with(ScalarExpr::zero)
                .add_term(coeff.clone(), rest);
        }
        Ok(Constraint::new(terms, origin, order_class))
    }

    pub fn terms(&self) -> &BTreeMap<Symbol, ScalarExpr> {
        &self.terms
    }

    /// Single relation `u_{i,j} = 0`?
    pub fn singleton_jet(&self) -> Option<Symbol> {
        if self.terms.len() == 1 {
            self.terms.keys().next().copied()
        } else {
            None
        }
    }

    /// Vector over ℚ with (jet symbol × rate monomial) coordinates.
    pub fn flatten(&self) -> BTreeMap<(Symbol, Monomial<Symbol>), Rat> {
        let mut out = BTreeMap::new();
        for (jet, coeff) in &self.terms {
            for (mono, c) in coeff.terms() {
                out.insert((*jet, mono.clone()), c.clone());
            }
        }
        out
    }

    /// Substitute a rate symbol by a polynomial in every coefficient,
    /// renormalizing. `None` if the constraint vanishes.
    pub fn substitute_rate(&self, rate: Symbol, value: &ScalarExpr) -> Option<Constraint> {
        let terms: BTreeMap<Symbol, ScalarExpr> = self
            .terms
            .iter()
            .map(|(jet, c)| (*jet, c.substitute(&rate, value)))
            .collect();
        Constraint::new(terms, self.origin.clone(), self.order_class)
    }

    /// Relabel axes (and matching jet components) by `perm[old-1] = new`.
    pub fn relabel_axes(&self, perm: &[u32]) -> Constraint {
        let map_sym = |s: &Symbol| match *s {
            Symbol::Jet { comp, d1, d2 } => Symbol::Jet {
                comp: perm[comp as usize - 1],
                d1: if d1 == 0 { 0 } else { perm[d1 as usize - 1] },
                d2: if d2 == 0 { 0 } else { perm[d2 as usize - 1] },
            },
            other => other,
        };
        let terms = self
            .terms
            .iter()
            .map(|(jet, c)| {
                let jet2 = match map_sym(jet) {
                    Symbol::Jet { comp, d1, d2 } if d2 != 0 => Symbol::jet2(comp, d1, d2),
                    other => other,
                };
                (jet2, c.clone())
            })
            .collect();
        Constraint::new(terms, self.origin.clone(), self.order_class)
            .expect("relabeling preserves nonzeroness")
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (jet, coeff) in &self.terms {
            let (neg, mag) = display_sign_split(coeff);
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if mag == ScalarExpr::one() {
                write!(f, "{jet}")?;
            } else if mag.num_terms() == 1 {
                write!(f, "{mag}*{jet}")?;
            } else {
                write!(f, "({mag})*{jet}")?;
            }
        }
        write!(f, " = 0")
    }
}

// pull a global sign out of a coefficient polynomial for rendering
fn display_sign_split(c: &ScalarExpr) -> (bool, ScalarExpr) {
    let neg = c
        .terms()
        .next()
        .map(|(_, k)| k < &Rat::zero())
        .unwrap_or(false);
    if neg {
        (true, -c)
    } else {
        (false, c.clone())
    }
}

fn rat_gcd(a: &Rat, b: &Rat) -> Rat {
    use num_integer::Integer;
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    Rat::new(
        a.numer().gcd(b.numer()),
        a.denom().lcm(b.denom()),
    )
}

impl Serialize for Constraint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Constraint", 4)?;
        let coeffs: BTreeMap<String, String> = self
            .terms
            .iter()
            .map(|(jet, c)| (jet.to_string(), c.to_string()))
            .collect();
        st.serialize_field("coeffs", &coeffs)?;
        st.serialize_field("order_class", &self.order_class)?;
        st.serialize_field(
            "origin_index",
            &match &self.origin {
                ConstraintOrigin::BasisForm(axes) => serde_json::json!(axes),
                ConstraintOrigin::Incompressibility => serde_json::json!("incompressibility"),
            },
        )?;
        st.serialize_field("rendered", &self.to_string())?;
        st.end()
    }
}

/// Metadata describing how a constraint set was derived.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivationMeta {
    pub dim: u32,
    pub spec: RotationSpec,
    pub kelvin_order: u32,
    pub balance: BalanceMode,
    /// The closure vanished identically (e.g. `Ω_R^k = 0`).
    pub null_constraint: bool,
    pub notes: Vec<String>,
}

/// A non-redundant, canonically ordered list of constraints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
    pub meta: DerivationMeta,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Structural equality of the relation lists (metadata ignored).
    pub fn same_relations(&self, other: &ConstraintSet) -> bool {
        self.constraints.len() == other.constraints.len()
            && self
                .constraints
                .iter()
                .zip(&other.constraints)
                .all(|(a, b)| a.terms == b.terms)
    }

    /// Human-readable aligned listing.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            let order = match c.order_class {
                Some(o) => format!("  [order {o}]"),
                None => String::new(),
            };
            out.push_str(&format!("{c}{order}\n"));
        }
        if self.meta.null_constraint {
            out.push_str("(null constraint: the closure form vanishes identically)\n");
        }
        for n in &self.meta.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }

    pub fn relabel_axes(&self, perm: &[u32]) -> ConstraintSet {
        let mut constraints: Vec<Constraint> = self
            .constraints
            .iter()
            .map(|c| c.relabel_axes(perm))
            .collect();
        constraints.sort();
        ConstraintSet { constraints, meta: self.meta.clone() }
    }
}

/// The symbolic fast-rotation closure `d ι_u (Ω_R^k)`, a 2k-form linear in
/// first jets. Vanishes identically when `Ω_R^k = 0` (k above the
/// nonzero-plane count or `2k > d`).
pub fn coriolis_closure(spec: &RotationSpec, k: u32) -> SymbolicForm {
    assert!(k >= 1, "circulation order starts at 1");
    let table = spec.table();
    let om = rotation_two_form(spec);
    let omk = om.wedge_pow(k).expect("same dimension");
    if omk.is_zero() {
        return DifferentialForm::zero(spec.dim, 2 * k.min(spec.dim));
    }
    omk.interior_product(&velocity_vector(spec.dim))
        .expect("degree 2k ≥ 2")
        .exterior_derivative(&table)
        .expect("coefficients are order-0 jets")
}

// ε-order magnitude of a rate monomial: Σ order(plane) × exponent.
fn epsilon_magnitude(mono: &Monomial<Symbol>, orders: &[u32]) -> u32 {
    mono.powers()
        .iter()
        .map(|(s, e)| match s {
            Symbol::Rate(i) => orders[*i as usize - 1] * e,
            _ => 0,
        })
        .sum()
}

/// Derive the constraint set forced by `d ι_u (Ω_R^k) → 0` under the
/// spec's order classes.
///
/// Combined mode emits one relation per nonzero basis-form coefficient
/// (fast terms only); dominant-balance mode splits each coefficient by
/// exact ε order. Numeric rates are substituted after the split, and the
/// result is reduced to a non-redundant, canonically sorted basis.
pub fn derive_constraints(
    spec: &RotationSpec,
    k: u32,
    balance: BalanceMode,
) -> Result<ConstraintSet, TptError> {
    if !spec.has_fast_plane() {
        return Err(TptError::NoFastPlane);
    }
    // work with symbolic rates so ε grading stays exact, substitute values at the end
    let sym_spec = RotationSpec {
        dim: spec.dim,
        planes: spec
            .planes
            .iter()
            .map(|p| crate::spectral::PlaneRotation {
                axes: p.axes,
                rate: if p.rate_is_zero() {
                    Rate::Value(Rat::zero())
                } else {
                    Rate::Symbolic
                },
                order: p.order,
            })
            .collect(),
    };
    let orders = spec.orders();
    let closure = coriolis_closure(&sym_spec, k);
    let null_constraint = closure.is_zero();

    let mut constraints: Vec<Constraint> = Vec::new();
    for (index, coeff) in closure.terms() {
        // group the coefficient's terms by ε magnitude; magnitude 0 is subdominant
        let mut by_order: BTreeMap<u32, ScalarExpr> = BTreeMap::new();
        for (mono, c) in coeff.terms() {
            let mag = epsilon_magnitude(mono, &orders);
            if mag == 0 {
                continue;
            }
            by_order
                .entry(mag)
                .or_insert_with(ScalarExpr::zero)
                .add_term(c.clone(), mono.clone());
        }
        let groups: Vec<(Option<u32>, ScalarExpr)> = match balance {
            BalanceMode::DominantBalance => by_order
                .into_iter()
                .map(|(o, e)| (Some(o), e))
                .collect(),
            BalanceMode::Combined => {
                let mut sum = ScalarExpr::zero();
                for e in by_order.values() {
                    sum = &sum + e;
                }
                if sum.is_zero() {
                    vec![]
                } else {
                    vec![(None, sum)]
                }
            }
        };
        for (order_class, expr) in groups {
            // numeric rates fold into the rational coefficients
            let mut expr = expr;
            for (i, p) in spec.planes.iter().enumerate() {
                if let Rate::Value(v) = &p.rate {
                    expr = expr.substitute(
                        &Symbol::rate(i as u32 + 1),
                        &ScalarExpr::constant(v.clone()),
                    );
                }
            }
            if let Some(c) = Constraint::from_expr(
                &expr,
                ConstraintOrigin::BasisForm(index.axes().to_vec()),
                order_class,
            )? {
                constraints.push(c);
            }
        }
    }

    let constraints = eliminate_redundant(constraints);
    let mut notes = Vec::new();
    if k >= 2 && spec.dim % 2 == 1 && spec.planes.iter().filter(|p| p.order > 0).count() >= 2 {
        notes.push(format!(
            "order-{k} closure in odd dimension {} yields individual axis-cylinder relations \
             together with the summed in-plane incompressibility; no single summed cross-axis \
             relation arises",
            spec.dim
        ));
    }
    Ok(ConstraintSet {
        constraints,
        meta: DerivationMeta {
            dim: spec.dim,
            spec: spec.clone(),
            kelvin_order: k,
            balance,
            null_constraint,
            notes,
        },
    })
}

/// Drop rows that are ℚ-linear combinations of earlier rows in the
/// (jet × rate-monomial) coordinate space, then sort canonically.
fn eliminate_redundant(rows: Vec<Constraint>) -> Vec<Constraint> {
    let mut kept: Vec<Constraint> = Vec::new();
    let mut echelon: Vec<BTreeMap<(Symbol, Monomial<Symbol>), Rat>> = Vec::new();
    for row in rows {
        let mut v = row.flatten();
        for basis in &echelon {
            let pivot = basis.keys().next().expect("nonzero basis row");
            if let Some(c) = v.get(pivot).cloned() {
                let scale = c / basis[pivot].clone();
                for (key, bv) in basis {
                    let entry = v.entry(key.clone()).or_insert_with(Rat::zero);
                    *entry -= scale.clone() * bv.clone();
                }
                v.retain(|_, val| !val.is_zero());
            }
        }
        if !v.is_empty() {
            // insert sorted by pivot for a deterministic echelon
            let pos = echelon
                .binary_search_by(|b| {
                    b.keys().next().unwrap().cmp(v.keys().next().unwrap())
                })
                .unwrap_or_else(|p| p);
            echelon.insert(pos, v);
            kept.push(row);
        }
    }
    kept.sort();
    kept
}

/// Pseudo-reduction rows over the polynomial ring in the rates: linear
/// algebra over the rational-function field without introducing fractions.
struct PolyRows {
    echelon: Vec<(Symbol, BTreeMap<Symbol, ScalarExpr>)>,
}

impl PolyRows {
    fn new() -> Self {
        PolyRows { echelon: Vec::new() }
    }

    fn normalize(row: &mut BTreeMap<Symbol, ScalarExpr>) {
        row.retain(|_, c| !c.is_zero());
        if row.is_empty() {
            return;
        }
        let mut content = Rat::zero();
        let mut mono: Option<Monomial<Symbol>> = None;
        for c in row.values() {
            content = rat_gcd(&content, &c.content());
            let mg = c.monomial_gcd().expect("nonzero");
            mono = Some(match mono {
                None => mg,
                Some(g) => g.gcd(&mg),
            });
        }
        let mono = mono.expect("nonempty");
        let inv = content.recip();
        for c in row.values_mut() {
            let mut out = ScalarExpr::zero();
            for (m, k) in c.terms() {
                out.add_term(k.clone() * inv.clone(), m.div_exact(&mono));
            }
            *c = out;
        }
    }

    /// Reduce `row` against the echelon; the returned remainder is zero iff
    /// the row lies in the span over the rate-function field.
    fn reduce(&self, mut row: BTreeMap<Symbol, ScalarExpr>) -> BTreeMap<Symbol, ScalarExpr> {
        for (pivot, basis) in &self.echelon {
            if let Some(c) = row.get(pivot).cloned() {
                if c.is_zero() {
                    continue;
                }
                let p = basis[pivot].clone();
                // row ← p·row − c·basis (stays polynomial)
                let mut next = BTreeMap::new();
                let keys: BTreeSet<Symbol> =
                    row.keys().chain(basis.keys()).copied().collect();
                for key in keys {
                    let a = row.get(&key).cloned().unwrap_or_else(ScalarExpr::zero);
                    let b = basis.get(&key).cloned().unwrap_or_else(ScalarExpr::zero);
                    let val = &(&a * &p) - &(&b * &c);
                    if !val.is_zero() {
                        next.insert(key, val);
                    }
                }
                Self::normalize(&mut next);
                row = next;
            }
        }
        row
    }

    fn insert(&mut self, row: BTreeMap<Symbol, ScalarExpr>) {
        let mut row = self.reduce(row);
        Self::normalize(&mut row);
        if let Some(pivot) = row.keys().next().copied() {
            let pos = self
                .echelon
                .binary_search_by(|(p, _)| p.cmp(&pivot))
                .unwrap_or_else(|p| p);
            self.echelon.insert(pos, (pivot, row));
        }
    }
}

/// Does every relation of `candidate` lie in the row space of `basis`,
/// with rates treated as formal nonzero quantities?
pub fn row_space_contains(basis: &ConstraintSet, candidate: &ConstraintSet) -> bool {
    let mut rows = PolyRows::new();
    for c in &basis.constraints {
        rows.insert(c.terms.clone());
    }
    candidate
        .constraints
        .iter()
        .all(|c| rows.reduce(c.terms.clone()).is_empty())
}

pub fn same_row_space(a: &ConstraintSet, b: &ConstraintSet) -> bool {
    row_space_contains(a, b) && row_space_contains(b, a)
}

/// Substitute `λ1 = r·λ2` in a two-plane combined set and verify the result
/// is equivalent to the equal-rate set transported by the coordinate
/// rescaling `x'_{1,2} = √r·x_{1,2}` acting on the jets.
pub fn rescale_rates(cs: &ConstraintSet, r: &Rat) -> Result<ConstraintSet, TptError> {
    if *r <= Rat::zero() {
        return Err(TptError::NonPositiveRatio(r.to_string()));
    }
    let spec = &cs.meta.spec;
    let two_fast = spec.planes.iter().filter(|p| p.order > 0).count() == 2;
    if cs.meta.balance != BalanceMode::Combined || !two_fast {
        return Err(TptError::RescalePrecondition);
    }

    let lam2 = ScalarExpr::var(Symbol::rate(2));
    let scaled_l2 = lam2.scale(r);
    let mut constraints: Vec<Constraint> = cs
        .constraints
        .iter()
        .filter_map(|c| c.substitute_rate(Symbol::rate(1), &scaled_l2))
        .collect();
    constraints = eliminate_redundant(constraints);
    let result = ConstraintSet { constraints, meta: cs.meta.clone() };

    // reference: the equal-rate (r = 1) set with jets transported by the rescaling
    let unit = ConstraintSet {
        constraints: eliminate_redundant(
            cs.constraints
                .iter()
                .filter_map(|c| c.substitute_rate(Symbol::rate(1), &lam2))
                .collect(),
        ),
        meta: cs.meta.clone(),
    };
    let plane1 = spec.planes[0].axes;
    let transported = ConstraintSet {
        constraints: eliminate_redundant(
            unit.constraints
                .iter()
                .map(|c| rescale_jets(c, plane1, r))
                .collect(),
        ),
        meta: cs.meta.clone(),
    };
    assert!(
        same_row_space(&result, &transported),
        "rate substitution and coordinate rescaling disagree"
    );
    Ok(result)
}

// Transport a constraint along x'_a = √r x_a for the two axes of `plane`:
// u_{i,j} picks up r^{(e_i - e_j)/2}. Exponents within one relation share a
// parity, so a global √r power clears to a rational rescaling.
fn rescale_jets(c: &Constraint, plane: (u32, u32), r: &Rat) -> Constraint {
    let e = |axis: u32| u32::from(axis == plane.0 || axis == plane.1) as i32;
    let h_of = |jet: &Symbol| match jet {
        Symbol::Jet { comp, d1, d2: 0 } if *d1 > 0 => e(*comp) - e(*d1),
        Symbol::Jet { comp, d1: 0, d2: 0 } => e(*comp),
        _ => 0,
    };
    let h_min = c.terms.keys().map(h_of).min().expect("nonempty");
    let terms: BTreeMap<Symbol, ScalarExpr> = c
        .terms
        .iter()
        .map(|(jet, coeff)| {
            let h = h_of(jet);
            debug_assert_eq!((h - h_min) % 2, 0, "mixed parity in one relation");
            let steps = ((h - h_min) / 2) as u32;
            let mut factor = Rat::one();
            for _ in 0..steps {
                factor *= r.clone();
            }
            (*jet, coeff.scale(&factor))
        })
        .collect();
    Constraint::new(terms, c.origin.clone(), c.order_class).expect("rescaling keeps nonzeroness")
}

/// Witness that `d ι_u (Ω_R^k) = k · (d ι_u Ω_R) ∧ Ω_R^{k-1}`.
pub struct LeibnizWitness {
    pub holds: bool,
    pub residual: SymbolicForm,
}

pub fn verify_leibniz_reduction(spec: &RotationSpec, k: u32) -> LeibnizWitness {
    let lhs = coriolis_closure(spec, k);
    let om = rotation_two_form(spec);
    let d_iu_om = coriolis_closure(spec, 1);
    let rhs = d_iu_om
        .wedge(&om.wedge_pow(k - 1).expect("dim match"))
        .expect("dim match")
        .scale(&ScalarExpr::constant(Rat::from_integer(k.into())));
    let residual = lhs.sub(&rhs).expect("same degree");
    LeibnizWitness { holds: residual.is_zero(), residual }
}

/// Jet-degree report for the subdominant correction `L_u(dU ∧ dU_R)`.
#[derive(Clone, Debug, Serialize)]
pub struct CorrectionDegreeReport {
    pub min_jet_degree: u32,
    pub max_jet_degree: u32,
    pub num_terms: usize,
}

/// Compute `L_u(dU ∧ dU_R)` symbolically and report the jet-degree range;
/// the minimum must be ≥ 2, making the correction irrelevant to the
/// first-order constraint structure.
pub fn higher_order_correction_degree(spec: &RotationSpec) -> CorrectionDegreeReport {
    let table = spec.table();
    let u = velocity_vector(spec.dim);
    let du = velocity_one_form(spec.dim)
        .exterior_derivative(&table)
        .expect("order-0 jets");
    let dur = rotating_velocity_form(spec)
        .exterior_derivative(&table)
        .expect("polynomial coefficients");
    let product = du.wedge(&dur).expect("same dimension");
    let lie = product.lie_derivative(&u, &table).expect("second jets available");
    let (min, max) = lie.jet_degree_range().unwrap_or((0, 0));
    CorrectionDegreeReport {
        min_jet_degree: min,
        max_jet_degree: max,
        num_terms: lie.terms().map(|(_, c)| c.num_terms()).sum(),
    }
}

/// Structural reading of a first-order constraint set.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    pub component: u32,
    /// Axes j with `u_{i,j} = 0` forced individually.
    pub cylinder_axes: Vec<u32>,
    /// Plane partner when `u_{a,a} + u_{b,b} = 0` is present.
    pub plane_partner: Option<u32>,
    /// No relation mentions this component at all.
    pub unconstrained: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub dim: u32,
    pub components: Vec<ComponentReport>,
    /// Axis pairs carrying an in-plane incompressibility relation.
    pub plane_incompressibility: Vec<(u32, u32)>,
    /// Relations appended by the total-incompressibility completion.
    pub appended: Vec<String>,
    /// Structural classification tag.
    pub structure: String,
    /// Passivity verdict with justification.
    pub passivity: String,
    /// The underlying relations (including appended completions); every
    /// reported feature references a member of this set.
    pub set: ConstraintSet,
}

impl ReductionReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("structure: {}\n", self.structure));
        for c in &self.components {
            if c.unconstrained {
                out.push_str(&format!("u_{}: unconstrained\n", c.component));
                continue;
            }
            let mut parts = Vec::new();
            if !c.cylinder_axes.is_empty() {
                let axes: Vec<String> =
                    c.cylinder_axes.iter().map(|a| format!("x{a}")).collect();
                parts.push(format!("cylinder along {}", axes.join(", ")));
            }
            if let Some(p) = c.plane_partner {
                parts.push(format!("in-plane incompressibility with u_{p}"));
            }
            if parts.is_empty() {
                parts.push("coupled relations only".into());
            }
            out.push_str(&format!("u_{}: {}\n", c.component, parts.join("; ")));
        }
        for a in &self.appended {
            out.push_str(&format!("appended (incompressibility): {a}\n"));
        }
        out.push_str(&format!("passivity: {}\n", self.passivity));
        out
    }
}

/// Classify the reduced-model structure a first-order set induces.
pub fn classify_reduction(
    cs: &ConstraintSet,
    incompressible: bool,
) -> Result<ReductionReport, TptError> {
    if cs.meta.kelvin_order != 1 {
        return Err(TptError::NotFirstOrder(cs.meta.kelvin_order));
    }
    let dim = cs.meta.dim;
    let spec = &cs.meta.spec;
    let mut set = cs.clone();

    // in-plane incompressibility relations present in the set
    let plane_pairs: Vec<(u32, u32)> = spec
        .planes
        .iter()
        .map(|p| p.axes)
        .filter(|(a, b)| {
            let want: BTreeMap<Symbol, ScalarExpr> = [
                (Symbol::jet1(*a, *a), ScalarExpr::one()),
                (Symbol::jet1(*b, *b), ScalarExpr::one()),
            ]
            .into_iter()
            .collect();
            cs.constraints.iter().any(|c| c.terms == want)
        })
        .collect();

    // total incompressibility minus the in-plane relations
    let mut appended = Vec::new();
    if incompressible {
        let covered: BTreeSet<u32> = plane_pairs
            .iter()
            .flat_map(|(a, b)| [*a, *b])
            .collect();
        let leftover: Vec<u32> = (1..=dim).filter(|a| !covered.contains(a)).collect();
        if !leftover.is_empty() && !covered.is_empty() {
            let terms: BTreeMap<Symbol, ScalarExpr> = leftover
                .iter()
                .map(|&a| (Symbol::jet1(a, a), ScalarExpr::one()))
                .collect();
            let c = Constraint::new(terms, ConstraintOrigin::Incompressibility, None)
                .expect("nonzero");
            appended.push(c.to_string());
            set.constraints.push(c);
            set.constraints.sort();
        }
    }

    // in-plane pairs recomputed over the completed set, so appended
    // relations attribute partners too
    let plane_pairs: Vec<(u32, u32)> = spec
        .planes
        .iter()
        .map(|p| p.axes)
        .filter(|(a, b)| {
            let want: BTreeMap<Symbol, ScalarExpr> = [
                (Symbol::jet1(*a, *a), ScalarExpr::one()),
                (Symbol::jet1(*b, *b), ScalarExpr::one()),
            ]
            .into_iter()
            .collect();
            set.constraints.iter().any(|c| c.terms == want)
        })
        .collect();

    // per-component features
    let mut components = Vec::new();
    for i in 1..=dim {
        let cylinder_axes: Vec<u32> = set
            .constraints
            .iter()
            .filter_map(Constraint::singleton_jet)
            .filter_map(|s| match s {
                Symbol::Jet { comp, d1, d2: 0 } if comp == i && d1 > 0 => Some(d1),
                _ => None,
            })
            .collect();
        let plane_partner = plane_pairs.iter().find_map(|(a, b)| {
            (*a == i).then_some(*b).or((*b == i).then_some(*a))
        });
        let mentioned = set.constraints.iter().any(|c| {
            c.terms
                .keys()
                .any(|s| matches!(s, Symbol::Jet { comp, .. } if *comp == i))
        });
        components.push(ComponentReport {
            component: i,
            cylinder_axes,
            plane_partner,
            unconstrained: !mentioned,
        });
    }

    let (structure, passivity) =
        classify_structure(dim, spec, &components, incompressible);

    Ok(ReductionReport {
        dim,
        components,
        plane_incompressibility: plane_pairs,
        appended,
        structure,
        passivity,
        set,
    })
}

#[derive(PartialEq, Eq, Clone, Copy, Debug)]
enum FastMode {
    Simple,
    Simultaneous,
    Independent,
    Mixed,
}

fn fast_mode(spec: &RotationSpec) -> (FastMode, usize) {
    let fast: Vec<u32> = spec
        .planes
        .iter()
        .filter(|p| p.order > 0 && !p.rate_is_zero())
        .map(|p| p.order)
        .collect();
    let mode = match fast.len() {
        0 | 1 => FastMode::Simple,
        _ => {
            let distinct: BTreeSet<u32> = fast.iter().copied().collect();
            if distinct.len() == 1 {
                FastMode::Simultaneous
            } else if distinct.len() == fast.len() {
                FastMode::Independent
            } else {
                FastMode::Mixed
            }
        }
    };
    (mode, fast.len())
}

fn classify_structure(
    dim: u32,
    spec: &RotationSpec,
    components: &[ComponentReport],
    incompressible: bool,
) -> (String, String) {
    let (mode, n_fast) = fast_mode(spec);
    let free: Vec<u32> = components
        .iter()
        .filter(|c| c.unconstrained)
        .map(|c| c.component)
        .collect();

    let structure = match (dim, mode, n_fast) {
        (3, FastMode::Simple, _) => "2D core + vertical component".to_string(),
        (4, FastMode::Simple, _) => {
            "2D-2C horizontal core, 2-component vertical system, coupling via pressure undetermined"
                .to_string()
        }
        (4, FastMode::Simultaneous, 2) => {
            "4D coupled core; no simple reduced model identified".to_string()
        }
        (4, FastMode::Independent, 2) => {
            "two independent 2D cores, separated pressure P = P1 + P2".to_string()
        }
        (5, FastMode::Simultaneous, 2) => {
            if incompressible {
                "4D horizontal core + u_5 passive scalar".to_string()
            } else {
                "4D horizontal core + u_5 unconstrained (passive-scalar reduction needs incompressibility)"
                    .to_string()
            }
        }
        (5, FastMode::Independent, 2) => {
            if incompressible {
                "two independent 2D cores + u_5 passive scalar".to_string()
            } else {
                "two independent 2D cores + u_5 unconstrained (passive-scalar reduction needs incompressibility)"
                    .to_string()
            }
        }
        _ => format!(
            "{n_fast} fast plane(s), {} free velocity component(s) [{}]",
            free.len(),
            match mode {
                FastMode::Simple => "simple",
                FastMode::Simultaneous => "simultaneously fast",
                FastMode::Independent => "independently fast",
                FastMode::Mixed => "mixed orders",
            }
        ),
    };

    let mut passivity = String::from(
        "no 3D passive scalar attainable: fast rotation never forces a cylinder set leaving a \
         three-component subsystem",
    );
    if !free.is_empty() {
        let names: Vec<String> = free.iter().map(|c| format!("u_{c}")).collect();
        passivity.push_str(&format!(
            "; no constraint on {} (pressure coupling to the core left undetermined)",
            names.join(", ")
        ));
    }
    (structure, passivity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::MultiIndex;
    use num_traits::FromPrimitive;

    fn r(n: i64) -> Rat {
        Rat::from_i64(n).unwrap()
    }

    fn lam(i: u32) -> ScalarExpr {
        ScalarExpr::var(Symbol::rate(i))
    }

    fn jet(i: u32, j: u32) -> Symbol {
        Symbol::jet1(i, j)
    }

    // hand-built golden constraint: Σ coeff·u_{i,j} with rate-polynomial coefficients
    fn golden(terms: Vec<(ScalarExpr, Symbol)>) -> Constraint {
        let mut map = BTreeMap::new();
        for (c, s) in terms {
            map.insert(s, c);
        }
        Constraint::new(map, ConstraintOrigin::BasisForm(vec![]), None).unwrap()
    }

    fn relations_of(cs: &ConstraintSet) -> Vec<BTreeMap<Symbol, ScalarExpr>> {
        cs.constraints.iter().map(|c| c.terms.clone()).collect()
    }

    fn golden_relations(golds: Vec<Constraint>) -> Vec<BTreeMap<Symbol, ScalarExpr>> {
        let mut g: Vec<_> = golds.into_iter().map(|c| c.terms).collect();
        g.sort();
        g
    }

    #[test]
    fn closure_d3_matches_classical_form() {
        // λ[(u11+u22)dx12 − u13 dx23 + u23 dx13]
        let spec = RotationSpec::canonical_symbolic(3, 1);
        let f = coriolis_closure(&spec, 1);
        let l = lam(1);
        let u = |i, j| ScalarExpr::var(jet(i, j));
        assert_eq!(
            f.coefficient(&MultiIndex::new(vec![1, 2])),
            &l * &(&u(1, 1) + &u(2, 2))
        );
        assert_eq!(f.coefficient(&MultiIndex::new(vec![2, 3])), -&(&l * &u(1, 3)));
        assert_eq!(f.coefficient(&MultiIndex::new(vec![1, 3])), &l * &u(2, 3));
        assert_eq!(f.num_terms(), 3);
    }

    #[test]
    fn closure_second_order_in_e4() {
        // 2λ1λ2 (Σ u_{i,i}) dx1234
        let spec = RotationSpec::canonical_symbolic(4, 2);
        let f = coriolis_closure(&spec, 2);
        assert_eq!(f.num_terms(), 1);
        let mut sum = ScalarExpr::zero();
        for i in 1..=4 {
            sum = &sum + &ScalarExpr::var(jet(i, i));
        }
        let want = &(&lam(1) * &lam(2)).scale(&r(2)) * &sum;
        assert_eq!(f.coefficient(&MultiIndex::new(vec![1, 2, 3, 4])), want);
    }

    #[test]
    fn closure_second_order_simple_rotation_is_null() {
        let spec = RotationSpec::canonical_values(4, &[r(1), r(0)]).unwrap();
        let f = coriolis_closure(&spec, 2);
        assert!(f.is_zero());
        let cs = derive_constraints(&spec, 2, BalanceMode::DominantBalance).unwrap();
        assert!(cs.is_empty());
        assert!(cs.meta.null_constraint);
    }

    #[test]
    fn golden_e3() {
        let spec = RotationSpec::canonical_symbolic(3, 1);
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let one = ScalarExpr::one;
        let want = golden_relations(vec![
            golden(vec![(one(), jet(1, 1)), (one(), jet(2, 2))]),
            golden(vec![(one(), jet(1, 3))]),
            golden(vec![(one(), jet(2, 3))]),
        ]);
        assert_eq!(relations_of(&cs), want);
    }

    #[test]
    fn golden_tp4_simultaneous() {
        let spec = RotationSpec::canonical_symbolic(4, 2);
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let one = ScalarExpr::one;
        let want = golden_relations(vec![
            golden(vec![(one(), jet(1, 1)), (one(), jet(2, 2))]),
            golden(vec![(one(), jet(3, 3)), (one(), jet(4, 4))]),
            golden(vec![(lam(1), jet(1, 3)), (lam(2), jet(4, 2))]),
            golden(vec![(lam(1), jet(2, 3)), (-&lam(2), jet(4, 1))]),
            golden(vec![(lam(1), jet(1, 4)), (-&lam(2), jet(3, 2))]),
            golden(vec![(lam(1), jet(2, 4)), (lam(2), jet(3, 1))]),
        ]);
        assert_eq!(relations_of(&cs), want);
        // simultaneous orders: combined mode coincides
        let cs2 = derive_constraints(&spec, 1, BalanceMode::Combined).unwrap();
        assert!(cs.same_relations(&cs2));
    }

    #[test]
    fn golden_e4_independent_finer() {
        let spec = RotationSpec::canonical_symbolic_with_orders(4, &[2, 1]);
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let one = ScalarExpr::one;
        let mut singles: Vec<Constraint> = [(1, 3), (4, 2), (2, 3), (4, 1), (1, 4), (3, 2), (2, 4), (3, 1)]
            .into_iter()
            .map(|(i, j)| golden(vec![(one(), jet(i, j))]))
            .collect();
        singles.push(golden(vec![(one(), jet(1, 1)), (one(), jet(2, 2))]));
        singles.push(golden(vec![(one(), jet(3, 3)), (one(), jet(4, 4))]));
        assert_eq!(relations_of(&cs), golden_relations(singles));
        // the finer set implies the simultaneous one
        let coarse =
            derive_constraints(&RotationSpec::canonical_symbolic(4, 2), 1, BalanceMode::Combined)
                .unwrap();
        assert!(row_space_contains(&cs, &coarse));
        assert!(!row_space_contains(&coarse, &cs));
    }

    #[test]
    fn golden_tpsr_simple_in_e4() {
        let spec = RotationSpec::canonical_values(4, &[r(1), r(0)]).unwrap();
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let one = ScalarExpr::one;
        let want = golden_relations(vec![
            golden(vec![(one(), jet(1, 1)), (one(), jet(2, 2))]),
            golden(vec![(one(), jet(1, 3))]),
            golden(vec![(one(), jet(1, 4))]),
            golden(vec![(one(), jet(2, 3))]),
            golden(vec![(one(), jet(2, 4))]),
        ]);
        assert_eq!(relations_of(&cs), want);
    }

    #[test]
    fn golden_tp5d_cylinder_additions() {
        let spec = RotationSpec::canonical_symbolic(5, 2);
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let one = ScalarExpr::one;
        let want = golden_relations(vec![
            golden(vec![(one(), jet(1, 1)), (one(), jet(2, 2))]),
            golden(vec![(one(), jet(3, 3)), (one(), jet(4, 4))]),
            golden(vec![(lam(1), jet(1, 3)), (lam(2), jet(4, 2))]),
            golden(vec![(lam(1), jet(2, 3)), (-&lam(2), jet(4, 1))]),
            golden(vec![(lam(1), jet(1, 4)), (-&lam(2), jet(3, 2))]),
            golden(vec![(lam(1), jet(2, 4)), (lam(2), jet(3, 1))]),
            golden(vec![(one(), jet(1, 5))]),
            golden(vec![(one(), jet(2, 5))]),
            golden(vec![(one(), jet(3, 5))]),
            golden(vec![(one(), jet(4, 5))]),
        ]);
        assert_eq!(relations_of(&cs), want);
    }

    #[test]
    fn numeric_rates_fold_into_coefficients() {
        let spec = RotationSpec::canonical_values(4, &[r(1), r(1)]).unwrap();
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        // λ1 = λ2 = 1: cross relations become e.g. u13 + u42 = 0
        let want: BTreeMap<Symbol, ScalarExpr> = [
            (jet(1, 3), ScalarExpr::one()),
            (jet(4, 2), ScalarExpr::one()),
        ]
        .into_iter()
        .collect();
        assert!(cs.constraints.iter().any(|c| c.terms == want));
    }

    #[test]
    fn no_fast_plane_is_an_error() {
        let spec = RotationSpec::canonical_values_with_orders(4, &[r(1), r(1)], &[0, 0]).unwrap();
        assert!(matches!(
            derive_constraints(&spec, 1, BalanceMode::DominantBalance),
            Err(TptError::NoFastPlane)
        ));
    }

    #[test]
    fn rescale_unit_ratio_is_identity() {
        let spec = RotationSpec::canonical_symbolic(4, 2);
        let cs = derive_constraints(&spec, 1, BalanceMode::Combined).unwrap();
        let back = rescale_rates(&cs, &r(1)).unwrap();
        // λ1 → λ2 merges the rate symbols; relations keep unit ratios
        let want: BTreeMap<Symbol, ScalarExpr> = [
            (jet(1, 3), ScalarExpr::one()),
            (jet(4, 2), ScalarExpr::one()),
        ]
        .into_iter()
        .collect();
        assert!(back.constraints.iter().any(|c| c.terms == want));
        let again = rescale_rates(&back, &r(1)).unwrap();
        assert!(back.same_relations(&again));
    }

    #[test]
    fn rescale_r3_matches_transported_unit_set() {
        let spec = RotationSpec::canonical_symbolic(4, 2);
        let cs = derive_constraints(&spec, 1, BalanceMode::Combined).unwrap();
        // internal assertion compares against the rescaled-coordinate set
        let scaled = rescale_rates(&cs, &r(3)).unwrap();
        let want: BTreeMap<Symbol, ScalarExpr> = [
            (jet(1, 3), ScalarExpr::constant(r(3))),
            (jet(4, 2), ScalarExpr::one()),
        ]
        .into_iter()
        .collect();
        assert!(scaled.constraints.iter().any(|c| c.terms == want));
    }

    #[test]
    fn rescale_preconditions() {
        let spec = RotationSpec::canonical_symbolic(4, 2);
        let cs = derive_constraints(&spec, 1, BalanceMode::Combined).unwrap();
        assert!(matches!(
            rescale_rates(&cs, &r(-2)),
            Err(TptError::NonPositiveRatio(_))
        ));
        let dom = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        // dominant-mode set is rejected even when the relations coincide
        assert!(matches!(
            rescale_rates(&dom, &r(2)),
            Err(TptError::RescalePrecondition)
        ));
    }

    #[test]
    fn leibniz_reduction_residuals_vanish() {
        for (d, k) in [(4u32, 1u32), (4, 2), (5, 2), (6, 2), (6, 3)] {
            let spec = RotationSpec::canonical_symbolic(d, d / 2);
            let w = verify_leibniz_reduction(&spec, k);
            assert!(w.holds, "d={d} k={k}: residual {}", w.residual);
        }
    }

    #[test]
    fn correction_is_at_least_quadratic_in_jets() {
        for d in [4u32, 5] {
            let spec = RotationSpec::canonical_symbolic(d, 2);
            let report = higher_order_correction_degree(&spec);
            assert!(report.min_jet_degree >= 2, "d={d}: {report:?}");
            assert!(report.num_terms > 0);
        }
        // contrast: the leading closure is linear in jets
        let spec = RotationSpec::canonical_symbolic(4, 2);
        assert_eq!(coriolis_closure(&spec, 1).jet_degree_range(), Some((1, 1)));
    }

    #[test]
    fn higher_order_constraints_are_redundant() {
        // E5 double: order-2 closure gives Σ_{i≤4} u_{i,i} and the u_{i,5},
        // all inside the k=1 dominant row space
        let spec = RotationSpec::canonical_symbolic(5, 2);
        let k1 = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let k2 = derive_constraints(&spec, 2, BalanceMode::DominantBalance).unwrap();
        assert!(!k2.is_empty());
        assert!(row_space_contains(&k1, &k2));

        let sum_terms: BTreeMap<Symbol, ScalarExpr> =
            (1..=4).map(|i| (jet(i, i), ScalarExpr::one())).collect();
        assert!(k2.constraints.iter().any(|c| c.terms == sum_terms));
        for a in 1..=4 {
            let single: BTreeMap<Symbol, ScalarExpr> =
                [(jet(a, 5), ScalarExpr::one())].into_iter().collect();
            assert!(k2.constraints.iter().any(|c| c.terms == single));
        }
        assert!(!k2.meta.notes.is_empty());
    }

    #[test]
    fn dominant_balance_implies_combined() {
        for (d, orders) in [
            (4u32, vec![1u32, 1]),
            (4, vec![2, 1]),
            (5, vec![2, 1]),
            (6, vec![3, 2, 1]),
            (6, vec![1, 1, 1]),
        ] {
            let spec = RotationSpec::canonical_symbolic_with_orders(d, &orders);
            let dom = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
            let comb = derive_constraints(&spec, 1, BalanceMode::Combined).unwrap();
            assert!(row_space_contains(&dom, &comb), "d={d} orders={orders:?}");
        }
    }

    #[test]
    fn frame_label_invariance() {
        // swap the two planes of the E4 double spec: axes (1,2) ↔ (3,4)
        let spec = RotationSpec::canonical_values(4, &[r(2), r(3)]).unwrap();
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let swapped = RotationSpec::canonical_values(4, &[r(3), r(2)]).unwrap();
        let cs_swapped = derive_constraints(&swapped, 1, BalanceMode::DominantBalance).unwrap();
        let relabeled = cs.relabel_axes(&[3, 4, 1, 2]);
        assert_eq!(relations_of(&relabeled), relations_of(&cs_swapped));
    }

    #[test]
    fn reduction_report_e4_simple() {
        let spec = RotationSpec::canonical_values(4, &[r(1), r(0)]).unwrap();
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let report = classify_reduction(&cs, false).unwrap();
        assert!(report.components[2].unconstrained && report.components[3].unconstrained);
        assert_eq!(report.components[0].cylinder_axes, vec![3, 4]);
        assert_eq!(report.components[0].plane_partner, Some(2));
        assert!(report.structure.contains("2D-2C horizontal core"));
        assert!(report.passivity.contains("u_3, u_4"));
    }

    #[test]
    fn reduction_report_e5_double_incompressible() {
        let spec = RotationSpec::canonical_symbolic(5, 2);
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let report = classify_reduction(&cs, true).unwrap();
        assert_eq!(report.appended, vec!["u_{5,5} = 0".to_string()]);
        assert!(report.structure.contains("passive scalar"));
        assert_eq!(report.plane_incompressibility, vec![(1, 2), (3, 4)]);
        // appended relation is a member of the underlying set
        assert!(report
            .set
            .constraints
            .iter()
            .any(|c| c.origin == ConstraintOrigin::Incompressibility));
    }

    #[test]
    fn reduction_report_e4_independent() {
        let spec = RotationSpec::canonical_symbolic_with_orders(4, &[2, 1]);
        let cs = derive_constraints(&spec, 1, BalanceMode::DominantBalance).unwrap();
        let report = classify_reduction(&cs, true).unwrap();
        assert!(report.structure.contains("two independent 2D cores"));
        assert!(report.structure.contains("P1 + P2"));
        // all four components carry cylinder conditions across the other plane
        assert_eq!(report.components[0].cylinder_axes, vec![3, 4]);
        assert_eq!(report.components[2].cylinder_axes, vec![1, 2]);
    }

    #[test]
    fn classify_rejects_higher_order_sets() {
        let spec = RotationSpec::canonical_symbolic(4, 2);
        let k2 = derive_constraints(&spec, 2, BalanceMode::DominantBalance).unwrap();
        assert!(matches!(
            classify_reduction(&k2, false),
            Err(TptError::NotFirstOrder(2))
        ));
    }

    #[test]
    fn constraint_normalization_is_deterministic() {
        // -3λ1 u13 - 6λ2 u42 normalizes to λ1 u13 + 2 λ2 u42 (content 3, sign flip)
        let mut terms = BTreeMap::new();
        terms.insert(jet(1, 3), lam(1).scale(&r(-3)));
        terms.insert(jet(4, 2), lam(2).scale(&r(-6)));
        let c = Constraint::new(terms, ConstraintOrigin::BasisForm(vec![2, 3]), None).unwrap();
        assert_eq!(c.terms[&jet(1, 3)], lam(1));
        assert_eq!(c.terms[&jet(4, 2)], lam(2).scale(&r(2)));
        assert_eq!(c.to_string(), "λ1*u_{1,3} + 2*λ2*u_{4,2} = 0");
    }
}
