//! Nodal box projection `v -> (v+, v-)`.

use crate::space::{FeSpace, NodalField};
use crate::FeError;

/// A bound that is either constant or given per dof.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Constant(f64),
    /// one value per dof of the space the box is used with
    Nodal(Vec<f64>),
}

impl Bound {
    pub fn at(&self, dof: usize) -> f64 {
        match self {
            Bound::Constant(c) => *c,
            Bound::Nodal(v) => v[dof],
        }
    }
}

/// `[lower, upper]` at every interior node. `upper` may be `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsBox {
    pub lower: Bound,
    pub upper: Bound,
}

impl BoundsBox {
    pub fn new(lower: f64, upper: f64) -> Result<BoundsBox, FeError> {
        let b = BoundsBox { lower: Bound::Constant(lower), upper: Bound::Constant(upper) };
        b.validate(None)?;
        Ok(b)
    }

    /// `[0, +inf)`
    pub fn nonnegative() -> BoundsBox {
        BoundsBox { lower: Bound::Constant(0.0), upper: Bound::Constant(f64::INFINITY) }
    }

    /// Checks `lower < upper` nodewise, finite lower, finite or `+inf` upper.
    /// With `ndofs`, nodal bounds must have that length.
    pub fn validate(&self, ndofs: Option<usize>) -> Result<(), FeError> {
        for b in [&self.lower, &self.upper] {
            if let (Bound::Nodal(v), Some(n)) = (b, ndofs) {
                if v.len() != n {
                    return Err(FeError::LengthMismatch { expected: n, found: v.len() });
                }
            }
        }
        let len = |b: &Bound| match b {
            Bound::Constant(_) => 1,
            Bound::Nodal(v) => v.len(),
        };
        let n = len(&self.lower).max(len(&self.upper));
        for i in 0..n {
            let lo = match &self.lower {
                Bound::Constant(c) => *c,
                Bound::Nodal(v) => v.get(i).copied().unwrap_or(f64::NAN),
            };
            let up = match &self.upper {
                Bound::Constant(c) => *c,
                Bound::Nodal(v) => v.get(i).copied().unwrap_or(f64::NAN),
            };
            if !lo.is_finite() || !(up.is_finite() || up == f64::INFINITY) || !(lo < up) {
                return Err(FeError::InvalidBounds { dof: i, lower: lo, upper: up });
            }
        }
        Ok(())
    }

    pub fn lower_at(&self, dof: usize) -> f64 {
        self.lower.at(dof)
    }

    pub fn upper_at(&self, dof: usize) -> f64 {
        self.upper.at(dof)
    }

    /// `max(lower, min(value, upper))` at `dof`.
    pub fn clip(&self, dof: usize, value: f64) -> f64 {
        value.min(self.upper_at(dof)).max(self.lower_at(dof))
    }

    pub fn contains(&self, dof: usize, value: f64) -> bool {
        value >= self.lower_at(dof) && value <= self.upper_at(dof)
    }
}

/// Splits interior values in place of a full solve vector: returns
/// `(plus, minus)` with `plus + minus == values` exactly.
pub fn split_interior(space: &FeSpace, values: &[f64], bounds: &BoundsBox) -> (Vec<f64>, Vec<f64>) {
    let mut plus = Vec::with_capacity(values.len());
    let mut minus = Vec::with_capacity(values.len());
    for (&dof, &v) in space.interior_dofs().iter().zip(values) {
        let p = bounds.clip(dof, v);
        plus.push(p);
        minus.push(v - p);
    }
    (plus, minus)
}

/// Clips every interior nodal value into the box. Boundary values pass
/// through into `v+`, with `v- = 0` there.
pub fn split<'s>(v: &NodalField<'s>, bounds: &BoundsBox) -> Result<(NodalField<'s>, NodalField<'s>), FeError> {
    let space = v.space();
    bounds.validate(Some(space.ndofs()))?;
    let mut plus = v.values().to_vec();
    let mut minus = vec![0.0; space.ndofs()];
    for &i in space.interior_dofs() {
        let p = bounds.clip(i, v.values()[i]);
        plus[i] = p;
        minus[i] = v.values()[i] - p;
    }
    Ok((NodalField::new(space, plus)?, NodalField::new(space, minus)?))
}

/// True iff every interior nodal value lies in the closed box, with no
/// tolerance.
pub fn is_admissible(v: &NodalField<'_>, bounds: &BoundsBox) -> bool {
    let space = v.space();
    space.interior_dofs().iter().all(|&i| bounds.contains(i, v.values()[i]))
}
