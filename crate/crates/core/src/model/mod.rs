//! Periodic cells, coefficient fields, directions and computational grids.
//!
//! Every other module speaks in terms of these types. They are immutable
//! after construction and cheap to share between threads.

mod expr;
mod field;
mod grid;
mod medium;

pub use expr::{FlowExpr, MediumSpec, ScalarExpr, TensorExpr};
pub use field::{
    Lerp, PeriodicSamples, ScalarField, Sym2, TensorField, VectorField, DEFAULT_TOL_DIV,
    DEFAULT_TOL_MEAN,
};
pub use grid::{Boundary, DirectionalDomain, GridSpec};
pub use medium::PeriodicMedium;

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// A point in R^dim; the second coordinate is ignored in 1D.
pub type Point = [f64; 2];

/// The cell of periodicity `(0, L_1) x ... x (0, L_dim)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PeriodicCell {
    dim: usize,
    lengths: [f64; 2],
}

impl PeriodicCell {
    pub fn new(lengths: &[f64]) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 2 {
            return Err(invalid(format!(
                "cell dimension must be 1 or 2, got {}",
                lengths.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(invalid(format!("cell length must be positive and finite, got {l}")));
        }
        let mut out = [1.0; 2];
        out[..lengths.len()].copy_from_slice(lengths);
        Ok(Self {
            dim: lengths.len(),
            lengths: out,
        })
    }

    /// Unit cell in the given dimension.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(&vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }
}

impl TryFrom<Vec<f64>> for PeriodicCell {
    type Error = crate::error::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<PeriodicCell> for Vec<f64> {
    fn from(c: PeriodicCell) -> Self {
        c.lengths().to_vec()
    }
}

/// Unit propagation direction `n` on the sphere `S^{dim-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction {
    dim: usize,
    comps: [f64; 2],
}

impl Direction {
    pub fn new(components: &[f64]) -> Result<Self> {
        if components.is_empty() || components.len() > 2 {
            return Err(invalid("direction must have 1 or 2 components"));
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(invalid(format!("direction must be a unit vector, |n| = {norm}")));
        }
        let mut comps = [0.0; 2];
        comps[..components.len()].copy_from_slice(components);
        Ok(Self {
            dim: components.len(),
            comps,
        })
    }

    /// Planar direction `(cos angle, sin angle)`.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        // exact zeros on the axes keep axis-aligned directions axis-aligned
        let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
        let (c, s) = (snap(c), snap(s));
        let norm = (c * c + s * s).sqrt();
        Self {
            dim: 2,
            comps: [c / norm, s / norm],
        }
    }

    /// Coordinate axis `e_axis` in `R^dim`.
    pub fn axis(dim: usize, axis: usize) -> Result<Self> {
        if dim == 0 || dim > 2 || axis >= dim {
            return Err(invalid(format!("no axis {axis} in dimension {dim}")));
        }
        let mut comps = [0.0; 2];
        comps[axis] = 1.0;
        Ok(Self { dim, comps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.comps[..self.dim]
    }

    pub fn get(&self, axis: usize) -> f64 {
        self.comps[axis]
    }

    pub fn as_point(&self) -> Point {
        self.comps
    }

    pub fn dot(&self, x: Point) -> f64 {
        self.comps[0] * x[0] + self.comps[1] * x[1]
    }

    /// Polar angle in `[0, 2 pi)`; in 1D `0` or `pi`.
    pub fn angle(&self) -> f64 {
        let a = self.comps[1].atan2(self.comps[0]);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }

    /// Axis with the largest component magnitude (ties go to the lower axis).
    pub fn dominant_axis(&self) -> usize {
        if self.dim == 2 && self.comps[1].abs() > self.comps[0].abs() + 1e-12 {
            1
        } else {
            0
        }
    }

    /// Whether `n` is a coordinate axis (up to sign).
    pub fn is_axis_aligned(&self) -> bool {
        self.comps[..self.dim]
            .iter()
            .filter(|c| c.abs() > 1e-12)
            .count()
            == 1
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = crate::error::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Self {
        d.components().to_vec()
    }
}

/// Equally spaced directions on the unit circle starting at angle 0; in 1D the
/// two directions `+1` and `-1`.
pub fn sample_directions(dim: usize, count: usize) -> Vec<Direction> {
    if dim == 1 {
        return vec![Direction::new(&[1.0]).unwrap(), Direction::new(&[-1.0]).unwrap()];
    }
    (0..count)
        .map(|k| Direction::from_angle(std::f64::consts::TAU * k as f64 / count as f64))
        .collect()
}
