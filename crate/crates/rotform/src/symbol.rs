//! Symbols of the jet ring: coordinates, rotation rates, velocity jets and
//! the trigonometric atoms used by the flow catalog.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// A formal variable of the scalar ring.
///
/// Jet symbols encode partial derivatives of velocity components:
/// `Jet { comp: i, d1: 0, d2: 0 }` is `u_i`, `{i, j, 0}` is `u_{i,j}` and
/// `{i, j, k}` is `u_{i,jk}`. Second jets are symmetric and canonicalized
/// with `d1 <= d2`; unused derivative slots are `0`. All axis labels are
/// 1-based.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Symbol {
    /// Coordinate `x_i`.
    Coord(u32),
    /// Rotation rate `λ_i` of the i-th plane.
    Rate(u32),
    /// `cos(x_i)` treated as an atom with the usual chain rule.
    Cos(u32),
    /// `sin(x_i)`.
    Sin(u32),
    /// Velocity jet `u_i`, `u_{i,j}` or `u_{i,jk}`.
    Jet { comp: u32, d1: u32, d2: u32 },
}

impl Symbol {
    pub fn coord(i: u32) -> Self {
        assert!(i >= 1, "coordinate axes are 1-based");
        Symbol::Coord(i)
    }

    pub fn rate(i: u32) -> Self {
        assert!(i >= 1, "rate indices are 1-based");
        Symbol::Rate(i)
    }

    /// `u_i`.
    pub fn jet0(comp: u32) -> Self {
        assert!(comp >= 1);
        Symbol::Jet { comp, d1: 0, d2: 0 }
    }

    /// `u_{i,j}`.
    pub fn jet1(comp: u32, j: u32) -> Self {
        assert!(comp >= 1 && j >= 1);
        Symbol::Jet { comp, d1: j, d2: 0 }
    }

    /// `u_{i,jk}`, canonicalized so the derivative axes are sorted.
    pub fn jet2(comp: u32, j: u32, k: u32) -> Self {
        assert!(comp >= 1 && j >= 1 && k >= 1);
        let (d1, d2) = if j <= k { (j, k) } else { (k, j) };
        Symbol::Jet { comp, d1, d2 }
    }

    /// Number of derivative slots in use (0 for non-jet symbols too).
    pub fn jet_order(&self) -> u32 {
        match self {
            Symbol::Jet { d1, d2, .. } => (*d1 > 0) as u32 + (*d2 > 0) as u32,
            _ => 0,
        }
    }

    pub fn is_jet(&self) -> bool {
        matches!(self, Symbol::Jet { .. })
    }

    pub fn is_rate(&self) -> bool {
        matches!(self, Symbol::Rate(_))
    }

    /// Largest axis label mentioned by the symbol, for dimension checks.
    pub fn max_axis(&self) -> u32 {
        match *self {
            Symbol::Coord(i) | Symbol::Cos(i) | Symbol::Sin(i) => i,
            Symbol::Rate(_) => 0,
            Symbol::Jet { comp, d1, d2 } => comp.max(d1).max(d2),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Symbol::Coord(i) => write!(f, "x{i}"),
            Symbol::Rate(i) => write!(f, "λ{i}"),
            Symbol::Cos(i) => write!(f, "cos_x{i}"),
            Symbol::Sin(i) => write!(f, "sin_x{i}"),
            Symbol::Jet { comp, d1: 0, d2: 0 } => write!(f, "u_{comp}"),
            Symbol::Jet { comp, d1, d2: 0 } => write!(f, "u_{{{comp},{d1}}}"),
            Symbol::Jet { comp, d1, d2 } => write!(f, "u_{{{comp},{d1}{d2}}}"),
        }
    }
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolError {
    /// Differentiating a jet already at the table's maximum order.
    #[error("jet-order overflow: d({symbol}) exceeds max jet order {max_order}")]
    JetOverflow { symbol: String, max_order: u8 },
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: u32, dim: u32 },
}

/// Registry of the symbols available in a fixed ambient dimension.
///
/// Symbol identity is structural, so the table mostly carries the dimension
/// and the jet-order budget used by differentiation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolTable {
    dim: u32,
    num_rates: u32,
    max_jet_order: u8,
}

impl SymbolTable {
    /// Table for dimension `d` with `floor(d/2)` rate parameters and jet
    /// order 2.
    pub fn new(dim: u32) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SymbolTable { dim, num_rates: dim / 2, max_jet_order: 2 }
    }

    pub fn with_max_jet_order(mut self, order: u8) -> Self {
        assert!(order <= 2, "jets beyond second order are not representable");
        self.max_jet_order = order;
        self
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn num_rates(&self) -> u32 {
        self.num_rates
    }

    pub fn max_jet_order(&self) -> u8 {
        self.max_jet_order
    }

    pub fn check_axis(&self, axis: u32) -> Result<(), SymbolError> {
        if axis >= 1 && axis <= self.dim {
            Ok(())
        } else {
            Err(SymbolError::AxisOutOfRange { axis, dim: self.dim })
        }
    }

    /// `d(sym)/dx_axis` as a list of `(sign, symbol)` products; an empty list
    /// is zero and `(sign, None)` is a constant.
    ///
    /// The chain rule for jets raises the order by one; hitting the table's
    /// maximum order is a distinct error rather than a silent zero.
    pub fn derivative(
        &self,
        sym: Symbol,
        axis: u32,
    ) -> Result<Option<(i32, Option<Symbol>)>, SymbolError> {
        self.check_axis(axis)?;
        match sym {
            Symbol::Coord(i) => Ok((i == axis).then_some((1, None))),
            Symbol::Rate(_) => Ok(None),
            Symbol::Cos(i) => Ok((i == axis).then_some((-1, Some(Symbol::Sin(i))))),
            Symbol::Sin(i) => Ok((i == axis).then_some((1, Some(Symbol::Cos(i))))),
            Symbol::Jet { comp, d1, .. } => {
                let order = sym.jet_order();
                if order >= self.max_jet_order as u32 {
                    return Err(SymbolError::JetOverflow {
                        symbol: sym.to_string(),
                        max_order: self.max_jet_order,
                    });
                }
                let next = match order {
                    0 => Symbol::jet1(comp, axis),
                    1 => Symbol::jet2(comp, d1, axis),
                    _ => unreachable!("order 2 is capped above"),
                };
                Ok(Some((1, Some(next))))
            }
        }
    }
}
