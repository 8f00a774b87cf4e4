//! Sparse multivariate polynomials over an arbitrary commutative coefficient
//! ring, plus a small dense univariate type used by the dispersion solver.
//!
//! Canonical form: monomials are kept sorted in a `BTreeMap`, zero
//! coefficients are removed on every operation, and exponents are strictly
//! positive. Equality of canonical forms is structural equality.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::Rat;

/// Coefficient-ring requirements shared by every generic routine in the
/// crate (`Rat` for the exact path, `f64` or complex rationals elsewhere).
pub trait Coeff:
    Clone
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> Coeff for T where
    T: Clone
        + PartialEq
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
{
}

/// Product of variables with positive exponents, kept sorted by variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial<V: Ord>(Vec<(V, u32)>);

impl<V: Ord + Clone> Monomial<V> {
    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: V) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_powers(mut powers: Vec<(V, u32)>) -> Self {
        powers.retain(|(_, e)| *e > 0);
        powers.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(V, u32)> = Vec::with_capacity(powers.len());
        for (v, e) in powers {
            match out.last_mut() {
                Some((last, le)) if *last == v => *le += e,
                _ => out.push((v, e)),
            }
        }
        Monomial(out)
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn powers(&self) -> &[(V, u32)] {
        &self.0
    }

    pub fn exponent(&self, v: &V) -> u32 {
        self.0
            .iter()
            .find_map(|(w, e)| (w == v).then_some(*e))
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    /// Total degree counting only variables selected by `pred`.
    pub fn degree_where(&self, pred: impl Fn(&V) -> bool) -> u32 {
        self.0.iter().filter(|(v, _)| pred(v)).map(|(_, e)| e).sum()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut powers = self.0.clone();
        powers.extend(other.0.iter().cloned());
        Monomial::from_powers(powers)
    }

    /// Componentwise minimum of exponents (gcd of monomials).
    pub fn gcd(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for (v, e) in &self.0 {
            let oe = other.exponent(v);
            let m = (*e).min(oe);
            if m > 0 {
                out.push((v.clone(), m));
            }
        }
        Monomial(out)
    }

    /// Exact quotient; `divisor` must divide `self`.
    pub fn div_exact(&self, divisor: &Self) -> Self {
        let mut out = Vec::new();
        for (v, e) in &self.0 {
            let de = divisor.exponent(v);
            debug_assert!(de <= *e, "monomial division is not exact");
            if *e > de {
                out.push((v.clone(), e - de));
            }
        }
        Monomial(out)
    }
}

impl<V: Ord + Clone + fmt::Display> fmt::Display for Monomial<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (idx, (v, e)) in self.0.iter().enumerate() {
            if idx > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Sparse multivariate polynomial with variables `V` and coefficients `C`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Poly<V: Ord, C> {
    terms: BTreeMap<Monomial<V>, C>,
}

impl<V: Ord + Clone, C: Coeff> Poly<V, C> {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::unit(), c);
        }
        Poly { terms }
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn var(v: V) -> Self {
        Self::term(C::one(), Monomial::var(v))
    }

    pub fn term(c: C, m: Monomial<V>) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().is_unit())
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial<V>, &C)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial<V>, C)> {
        self.terms.into_iter()
    }

    pub fn coefficient(&self, m: &Monomial<V>) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, c: C, m: Monomial<V>) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
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

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k.clone() * c.clone()))
                .collect::<BTreeMap<_, _>>()
                .into_iter()
                .filter(|(_, k)| !k.is_zero())
                .collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial<V>) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(mm, c)| (mm.mul(m), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn map_coeff<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<V, D> {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(f(c), m.clone());
        }
        out
    }

    /// Replace variable `v` by the polynomial `value` everywhere.
    pub fn substitute(&self, v: &V, value: &Self) -> Self {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                out.add_term(c.clone(), m.clone());
            } else {
                let rest: Vec<(V, u32)> = m
                    .powers()
                    .iter()
                    .filter(|(w, _)| w != v)
                    .cloned()
                    .collect();
                let base = Poly::term(c.clone(), Monomial::from_powers(rest));
                out = &out + &(&base * &value.pow(e));
            }
        }
        out
    }

    /// Evaluate with every variable bound through `bind`; unbound variables
    /// are reported by value.
    pub fn eval_with(&self, bind: &impl Fn(&V) -> Option<C>) -> Result<C, V> {
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in m.powers() {
                let val = bind(v).ok_or_else(|| v.clone())?;
                for _ in 0..*e {
                    t = t * val.clone();
                }
            }
            acc = acc + t;
        }
        Ok(acc)
    }

    /// (min, max) total degree over terms counting variables selected by
    /// `pred`; `None` for the zero polynomial.
    pub fn degree_range_where(&self, pred: impl Fn(&V) -> bool) -> Option<(u32, u32)> {
        let mut range: Option<(u32, u32)> = None;
        for m in self.terms.keys() {
            let d = m.degree_where(&pred);
            range = Some(match range {
                None => (d, d),
                Some((lo, hi)) => (lo.min(d), hi.max(d)),
            });
        }
        range
    }
}

impl<V: Ord + Clone, C: Coeff> Add for &Poly<V, C> {
    type Output = Poly<V, C>;
    fn add(self, rhs: Self) -> Poly<V, C> {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(c.clone(), m.clone());
        }
        out
    }
}

impl<V: Ord + Clone, C: Coeff> Sub for &Poly<V, C> {
    type Output = Poly<V, C>;
    fn sub(self, rhs: Self) -> Poly<V, C> {
        self + &(-rhs)
    }
}

impl<V: Ord + Clone, C: Coeff> Neg for &Poly<V, C> {
    type Output = Poly<V, C>;
    fn neg(self) -> Poly<V, C> {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
}

impl<V: Ord + Clone, C: Coeff> Mul for &Poly<V, C> {
    type Output = Poly<V, C>;
    fn mul(self, rhs: Self) -> Poly<V, C> {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ca.clone() * cb.clone(), ma.mul(mb));
            }
        }
        out
    }
}

impl<V: Ord + Clone, C: Coeff> Add for Poly<V, C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<V: Ord + Clone, C: Coeff> Sub for Poly<V, C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl<V: Ord + Clone, C: Coeff> Neg for Poly<V, C> {
    type Output = Self;
    fn neg(self) -> Self {
        -&self
    }
}

impl<V: Ord + Clone, C: Coeff> Mul for Poly<V, C> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

impl<V: Ord + Clone, C: Coeff> Zero for Poly<V, C> {
    fn zero() -> Self {
        Poly::zero()
    }
    fn is_zero(&self) -> bool {
        Poly::is_zero(self)
    }
}

impl<V: Ord + Clone, C: Coeff> One for Poly<V, C> {
    fn one() -> Self {
        Poly::one()
    }
}

/// Rational-coefficient helpers used by constraint normalization.
impl<V: Ord + Clone> Poly<V, Rat> {
    /// gcd of the absolute values of all rational coefficients
    /// (`gcd(numerators)/lcm(denominators)`); zero polynomial gives 0.
    pub fn content(&self) -> Rat {
        use num_bigint::BigInt;
        use num_integer::Integer;
        let mut num = BigInt::from(0);
        let mut den = BigInt::from(1);
        for c in self.terms.values() {
            num = num.gcd(&c.numer().clone());
            den = den.lcm(&c.denom().clone());
        }
        if num.is_zero() {
            Rat::zero()
        } else {
            Rat::new(num, den)
        }
    }

    /// gcd of all monomials (componentwise min exponent).
    pub fn monomial_gcd(&self) -> Option<Monomial<V>> {
        let mut it = self.terms.keys();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, m| acc.gcd(m)))
    }
}

impl<V: Ord + Clone + fmt::Display> fmt::Display for Poly<V, Rat> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().enumerate() {
            let neg = c < &Rat::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_unit() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

/// Dense univariate polynomial, coefficients in ascending degree order.
#[derive(Clone, PartialEq, Debug)]
pub struct UniPoly<C> {
    coeffs: Vec<C>,
}

impl<C: Coeff> UniPoly<C> {
    pub fn zero() -> Self {
        UniPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: C) -> Self {
        let mut p = UniPoly { coeffs: vec![c] };
        p.trim();
        p
    }

    /// `a + b·x`.
    pub fn linear(a: C, b: C) -> Self {
        let mut p = UniPoly { coeffs: vec![a, b] };
        p.trim();
        p
    }

    pub fn from_coeffs(coeffs: Vec<C>) -> Self {
        let mut p = UniPoly { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the zero polynomial is `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn coefficient(&self, n: usize) -> C {
        self.coeffs.get(n).cloned().unwrap_or_else(C::zero)
    }

    pub fn scale(&self, c: &C) -> Self {
        UniPoly::from_coeffs(self.coeffs.iter().map(|k| k.clone() * c.clone()).collect())
    }

    pub fn eval(&self, x: &C) -> C {
        let mut acc = C::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    /// Multiplicity of the root at 0 (number of leading zero coefficients).
    pub fn order_at_zero(&self) -> usize {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .unwrap_or(self.coeffs.len())
    }

    /// Divide out `x^n`; all removed coefficients must be zero.
    pub fn shift_down(&self, n: usize) -> Self {
        debug_assert!(self.order_at_zero() >= n || self.is_zero());
        UniPoly::from_coeffs(self.coeffs.iter().skip(n).cloned().collect())
    }
}

impl<C: Coeff> Add for &UniPoly<C> {
    type Output = UniPoly<C>;
    fn add(self, rhs: Self) -> UniPoly<C> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        UniPoly::from_coeffs((0..n).map(|i| self.coefficient(i) + rhs.coefficient(i)).collect())
    }
}

impl<C: Coeff> Sub for &UniPoly<C> {
    type Output = UniPoly<C>;
    fn sub(self, rhs: Self) -> UniPoly<C> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        UniPoly::from_coeffs((0..n).map(|i| self.coefficient(i) - rhs.coefficient(i)).collect())
    }
}

impl<C: Coeff> Neg for &UniPoly<C> {
    type Output = UniPoly<C>;
    fn neg(self) -> UniPoly<C> {
        UniPoly { coeffs: self.coeffs.iter().map(|c| -c.clone()).collect() }
    }
}

impl<C: Coeff> Mul for &UniPoly<C> {
    type Output = UniPoly<C>;
    fn mul(self, rhs: Self) -> UniPoly<C> {
        if self.is_zero() || rhs.is_zero() {
            return UniPoly::zero();
        }
        let mut out = vec![C::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        UniPoly::from_coeffs(out)
    }
}

impl<C: Coeff> Add for UniPoly<C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<C: Coeff> Sub for UniPoly<C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl<C: Coeff> Neg for UniPoly<C> {
    type Output = Self;
    fn neg(self) -> Self {
        -&self
    }
}

impl<C: Coeff> Mul for UniPoly<C> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

impl<C: Coeff> Zero for UniPoly<C> {
    fn zero() -> Self {
        UniPoly::zero()
    }
    fn is_zero(&self) -> bool {
        UniPoly::is_zero(self)
    }
}

impl<C: Coeff> One for UniPoly<C> {
    fn one() -> Self {
        UniPoly::constant(C::one())
    }
}

/// Exact determinant over any commutative coefficient ring, by dynamic
/// programming over column subsets (Laplace expansion with memoized minors).
/// Exponential in the matrix side, fine for the small normal-mode systems.
pub fn determinant<C: Coeff>(m: &[Vec<C>]) -> C {
    let n = m.len();
    assert!(n <= 16, "subset-DP determinant limited to 16x16");
    if n == 0 {
        return C::one();
    }
    for row in m {
        assert_eq!(row.len(), n, "determinant needs a square matrix");
    }
    // minors[mask] = det of the first popcount(mask) rows on columns `mask`
    let mut minors: Vec<Option<C>> = vec![None; 1 << n];
    minors[0] = Some(C::one());
    for mask in 1usize..(1 << n) {
        let r = (mask as u32).count_ones() as usize - 1;
        let mut acc = C::zero();
        let mut pos = 0;
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let entry = &m[r][j];
            if !entry.is_zero() {
                let sub = minors[mask & !(1 << j)]
                    .clone()
                    .expect("minors are filled in mask order");
                let term = entry.clone() * sub;
                if (r + pos).is_multiple_of(2) {
                    acc = acc + term;
                } else {
                    acc = acc - term;
                }
            }
            pos += 1;
        }
        minors[mask] = Some(acc);
    }
    minors[(1 << n) - 1].take().unwrap()
}
