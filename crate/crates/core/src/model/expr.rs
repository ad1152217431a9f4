//! Closed-form coefficient families and their JSON descriptors.

use super::{
    PeriodicCell, PeriodicMedium, PeriodicSamples, Point, ScalarField, Sym2, TensorField,
    VectorField, DEFAULT_TOL_DIV, DEFAULT_TOL_MEAN,
};
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Diffusion matrix families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TensorExpr {
    Identity,
    /// Constant symmetric matrix, given row by row.
    Constant { matrix: Vec<Vec<f64>> },
    /// `diag(b_x (1 + a_x cos(2 pi x / p_x)), b_y (1 + a_y cos(2 pi y / p_y)))`.
    CosineTensor {
        amplitude: f64,
        #[serde(default)]
        amplitude_y: f64,
        #[serde(default)]
        base: Option<Vec<f64>>,
        #[serde(default)]
        period: Option<Vec<f64>>,
    },
}

impl Default for TensorExpr {
    fn default() -> Self {
        TensorExpr::Identity
    }
}

/// Divergence-free advection families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowExpr {
    #[default]
    None,
    /// `q = (-d_y psi, d_x psi)` with `psi = U sin(2 pi x/L1) sin(2 pi y/L2) / (2 pi)`.
    Cellular { amplitude: f64 },
    /// `q = (U cos(2 pi y / L2), 0)`.
    Shear { amplitude: f64 },
    /// Constant drift. Has nonzero mean, so it is only accepted with the
    /// explicit bypass flag (used by transport tests).
    Constant {
        velocity: Vec<f64>,
        #[serde(default)]
        allow_nonzero_mean: bool,
    },
}

/// Periodic scalar families (reaction rates, potentials).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarExpr {
    Constant { value: f64 },
    /// `mean + amplitude cos(2 pi x_axis / period)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default)]
        axis: usize,
        #[serde(default)]
        period: Option<f64>,
    },
    /// `mean + amplitude cos(2 pi x / L1) cos(2 pi y / L2)`.
    CosineProduct { mean: f64, amplitude: f64 },
}

impl Default for ScalarExpr {
    fn default() -> Self {
        ScalarExpr::Constant { value: 1.0 }
    }
}

fn check_period(cell: &PeriodicCell, axis: usize, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid(format!("period must be positive, got {p}")));
    }
    let ratio = cell.length(axis) / p;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(invalid(format!(
            "cell length {} is not an integer multiple of the period {p}",
            cell.length(axis)
        )));
    }
    Ok(p)
}

impl TensorExpr {
    fn cosine_params(&self, cell: &PeriodicCell) -> Result<Option<([f64; 2], [f64; 2], [f64; 2])>> {
        match self {
            TensorExpr::CosineTensor {
                amplitude,
                amplitude_y,
                base,
                period,
            } => {
                let mut b = [1.0; 2];
                if let Some(v) = base {
                    if v.len() != cell.dim() {
                        return Err(invalid("base must have one entry per axis"));
                    }
                    b[..v.len()].copy_from_slice(v);
                }
                let mut p = [cell.length(0), cell.length(1)];
                if let Some(v) = period {
                    if v.len() != cell.dim() {
                        return Err(invalid("period must have one entry per axis"));
                    }
                    for (axis, &pv) in v.iter().enumerate() {
                        p[axis] = check_period(cell, axis, pv)?;
                    }
                }
                let ay = if cell.dim() == 2 { *amplitude_y } else { 0.0 };
                Ok(Some(([*amplitude, ay], b, p)))
            }
            _ => Ok(None),
        }
    }

    /// Closed-form value at `x`.
    pub fn evaluate(&self, cell: &PeriodicCell, x: Point) -> Result<Sym2> {
        Ok(match self {
            TensorExpr::Identity => Sym2::IDENTITY,
            TensorExpr::Constant { matrix } => constant_matrix(cell, matrix)?,
            TensorExpr::CosineTensor { .. } => {
                let (a, b, p) = self.cosine_params(cell)?.expect("cosine");
                Sym2::diag(
                    b[0] * (1.0 + a[0] * (TAU * x[0] / p[0]).cos()),
                    b[1] * (1.0 + a[1] * (TAU * x[1] / p[1]).cos()),
                )
            }
        })
    }

    /// Closed-form ellipticity bounds `(a1, a2)`.
    pub fn bounds(&self, cell: &PeriodicCell) -> Result<(f64, f64)> {
        match self {
            TensorExpr::Identity => Ok((1.0, 1.0)),
            TensorExpr::Constant { matrix } => Ok(constant_matrix(cell, matrix)?.eigenvalues(cell.dim())),
            TensorExpr::CosineTensor { .. } => {
                let (a, b, _) = self.cosine_params(cell)?.expect("cosine");
                let mut lo = b[0] * (1.0 - a[0].abs());
                let mut hi = b[0] * (1.0 + a[0].abs());
                if cell.dim() == 2 {
                    lo = lo.min(b[1] * (1.0 - a[1].abs()));
                    hi = hi.max(b[1] * (1.0 + a[1].abs()));
                }
                Ok((lo, hi))
            }
        }
    }

    /// Closed-form `div(A n)` at `x`.
    pub fn div_an(&self, cell: &PeriodicCell, x: Point, n: Point) -> Result<f64> {
        Ok(match self {
            TensorExpr::Identity | TensorExpr::Constant { .. } => 0.0,
            TensorExpr::CosineTensor { .. } => {
                let (a, b, p) = self.cosine_params(cell)?.expect("cosine");
                let dx = -b[0] * a[0] * (TAU / p[0]) * (TAU * x[0] / p[0]).sin();
                let dy = -b[1] * a[1] * (TAU / p[1]) * (TAU * x[1] / p[1]).sin();
                dx * n[0] + if cell.dim() == 2 { dy * n[1] } else { 0.0 }
            }
        })
    }

    /// Samples the family on the cell grid; bounds come from the closed form.
    pub fn sample(&self, cell: PeriodicCell, resolution: &[usize]) -> Result<TensorField> {
        let (a1, a2) = self.bounds(&cell)?;
        if !(a1 > 0.0) {
            return Err(Error::Ellipticity(format!("a1 = {a1} is not positive")));
        }
        // validate once so the sampling closure can unwrap
        self.evaluate(&cell, [0.0, 0.0])?;
        let samples = PeriodicSamples::from_fn(cell, resolution, |x| {
            self.evaluate(&cell, x).expect("validated")
        })?;
        TensorField::new(samples, a1, a2)
    }
}

fn constant_matrix(cell: &PeriodicCell, m: &[Vec<f64>]) -> Result<Sym2> {
    let d = cell.dim();
    if m.len() != d || m.iter().any(|row| row.len() != d) {
        return Err(invalid(format!("matrix must be {d}x{d}")));
    }
    if d == 1 {
        return Ok(Sym2::diag(m[0][0], 1.0));
    }
    if (m[0][1] - m[1][0]).abs() > 1e-12 {
        return Err(Error::Ellipticity("matrix is not symmetric".into()));
    }
    Ok(Sym2 {
        xx: m[0][0],
        xy: m[0][1],
        yy: m[1][1],
    })
}

impl FlowExpr {
    pub fn evaluate(&self, cell: &PeriodicCell, x: Point) -> Result<[f64; 2]> {
        let (l1, l2) = (cell.length(0), cell.length(1));
        Ok(match self {
            FlowExpr::None => [0.0; 2],
            FlowExpr::Cellular { amplitude } => {
                if cell.dim() != 2 {
                    return Err(Error::Flow("cellular flow needs a 2D cell".into()));
                }
                let (sx, cx) = (TAU * x[0] / l1).sin_cos();
                let (sy, cy) = (TAU * x[1] / l2).sin_cos();
                [-amplitude * sx * cy / l2, amplitude * cx * sy / l1]
            }
            FlowExpr::Shear { amplitude } => {
                if cell.dim() != 2 {
                    return Err(Error::Flow("shear flow needs a 2D cell".into()));
                }
                [amplitude * (TAU * x[1] / l2).cos(), 0.0]
            }
            FlowExpr::Constant { velocity, .. } => {
                if velocity.len() != cell.dim() {
                    return Err(Error::Flow("velocity must have one entry per axis".into()));
                }
                let mut v = [0.0; 2];
                v[..velocity.len()].copy_from_slice(velocity);
                v
            }
        })
    }

    pub fn sample(&self, cell: PeriodicCell, resolution: &[usize]) -> Result<VectorField> {
        self.evaluate(&cell, [0.0, 0.0])?;
        let samples =
            PeriodicSamples::from_fn(cell, resolution, |x| self.evaluate(&cell, x).expect("validated"))?;
        match self {
            FlowExpr::Constant {
                allow_nonzero_mean: true,
                ..
            } => VectorField::new_unchecked_mean(samples, DEFAULT_TOL_DIV),
            FlowExpr::Constant { .. } => Err(Error::Flow(
                "constant flow has nonzero cell mean (set allow_nonzero_mean for tests)".into(),
            )),
            _ => VectorField::new(samples, DEFAULT_TOL_DIV, DEFAULT_TOL_MEAN),
        }
    }
}

impl ScalarExpr {
    pub fn evaluate(&self, cell: &PeriodicCell, x: Point) -> Result<f64> {
        Ok(match self {
            ScalarExpr::Constant { value } => *value,
            ScalarExpr::Cosine {
                mean,
                amplitude,
                axis,
                period,
            } => {
                if *axis >= cell.dim() {
                    return Err(invalid(format!("axis {axis} out of range")));
                }
                let p = match period {
                    Some(p) => check_period(cell, *axis, *p)?,
                    None => cell.length(*axis),
                };
                mean + amplitude * (TAU * x[*axis] / p).cos()
            }
            ScalarExpr::CosineProduct { mean, amplitude } => {
                if cell.dim() != 2 {
                    return Err(invalid("cosine_product needs a 2D cell"));
                }
                mean + amplitude
                    * (TAU * x[0] / cell.length(0)).cos()
                    * (TAU * x[1] / cell.length(1)).cos()
            }
        })
    }

    /// Closed-form `(min, max)`.
    pub fn range(&self) -> (f64, f64) {
        match self {
            ScalarExpr::Constant { value } => (*value, *value),
            ScalarExpr::Cosine {
                mean, amplitude, ..
            }
            | ScalarExpr::CosineProduct { mean, amplitude } => {
                (mean - amplitude.abs(), mean + amplitude.abs())
            }
        }
    }

    pub fn sample(&self, cell: PeriodicCell, resolution: &[usize]) -> Result<ScalarField> {
        self.evaluate(&cell, [0.0, 0.0])?;
        ScalarField::from_fn(cell, resolution, |x| self.evaluate(&cell, x).expect("validated"))
    }
}

/// JSON description of a periodic medium, e.g.
/// `{"cell":[1,1],"diffusion":{"kind":"cosine_tensor","amplitude":0.5},"flow":{"kind":"none"}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    pub cell: PeriodicCell,
    /// Samples per axis; defaults to 128.
    #[serde(default)]
    pub resolution: Option<Vec<usize>>,
    #[serde(default)]
    pub diffusion: TensorExpr,
    #[serde(default)]
    pub flow: FlowExpr,
}

impl MediumSpec {
    pub const DEFAULT_RESOLUTION: usize = 128;

    pub fn resolution(&self) -> Vec<usize> {
        self.resolution
            .clone()
            .unwrap_or_else(|| vec![Self::DEFAULT_RESOLUTION; self.cell.dim()])
    }

    pub fn build(&self) -> Result<PeriodicMedium> {
        let res = self.resolution();
        let a = self.diffusion.sample(self.cell, &res)?;
        let q = self.flow.sample(self.cell, &res)?;
        PeriodicMedium::with_exprs(self.cell, a, q, Some(self.diffusion.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_tensor_bounds_and_values() {
        let cell = PeriodicCell::new(&[1.0, 1.0]).unwrap();
        let e = TensorExpr::CosineTensor {
            amplitude: 0.5,
            amplitude_y: 0.0,
            base: None,
            period: None,
        };
        let t = e.sample(cell, &[64, 64]).unwrap();
        assert_eq!((t.a1(), t.a2()), (0.5, 1.5));
        let m = t.evaluate([0.5, 0.3]);
        assert!((m.xx - 0.5).abs() < 1e-12);
        assert!((m.yy - 1.0).abs() < 1e-12);
        assert_eq!(m.xy, 0.0);
        assert_eq!(t.evaluate([0.0, 0.0]), t.evaluate([1.0, 0.0]));
    }

    #[test]
    fn cellular_flow_is_discretely_divergence_free() {
        let cell = PeriodicCell::new(&[1.0, 1.0]).unwrap();
        let q = FlowExpr::Cellular { amplitude: 1.0 }.sample(cell, &[64, 64]).unwrap();
        assert!(q.max_divergence() <= 1e-8);
        let m = q.mean();
        assert!(m[0].abs() <= 1e-10 && m[1].abs() <= 1e-10);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        let cell = PeriodicCell::new(&[1.0, 1.0]).unwrap();
        let bad = TensorExpr::CosineTensor {
            amplitude: 1.0,
            amplitude_y: 0.0,
            base: None,
            period: None,
        };
        assert!(bad.sample(cell, &[8, 8]).is_err());
        let q = FlowExpr::Constant {
            velocity: vec![1.0, 0.0],
            allow_nonzero_mean: false,
        };
        assert!(q.sample(cell, &[8, 8]).is_err());
        let nonsym = TensorExpr::Constant {
            matrix: vec![vec![1.0, 0.1], vec![0.2, 1.0]],
        };
        assert!(nonsym.sample(cell, &[8, 8]).is_err());
    }

    #[test]
    fn json_descriptor() {
        let spec: MediumSpec = serde_json::from_str(
            r#"{"cell":[1.0,1.0],"diffusion":{"kind":"cosine_tensor","amplitude":0.5,"period":[1.0,1.0]}}"#,
        )
        .unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.a1(), 0.5);
        let err = serde_json::from_str::<MediumSpec>(r#"{"cell":[1.0],"difusion":{"kind":"identity"}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("difusion"), "{err}");
    }
}
