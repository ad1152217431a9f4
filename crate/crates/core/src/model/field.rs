use super::{PeriodicCell, Point};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_TOL_DIV: f64 = 1e-8;
pub const DEFAULT_TOL_MEAN: f64 = 1e-10;

/// Values that can be blended linearly; used by bilinear interpolation.
pub trait Lerp: Copy {
    fn zero() -> Self;
    fn add_scaled(self, other: Self, w: f64) -> Self;
}

impl Lerp for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add_scaled(self, other: Self, w: f64) -> Self {
        self + w * other
    }
}

impl Lerp for [f64; 2] {
    fn zero() -> Self {
        [0.0; 2]
    }
    fn add_scaled(self, other: Self, w: f64) -> Self {
        [self[0] + w * other[0], self[1] + w * other[1]]
    }
}

/// Symmetric 2x2 matrix. In 1D only `xx` is meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn diag(xx: f64, yy: f64) -> Self {
        Self { xx, xy: 0.0, yy }
    }

    /// `A n`
    pub fn apply(&self, n: Point) -> Point {
        [
            self.xx * n[0] + self.xy * n[1],
            self.xy * n[0] + self.yy * n[1],
        ]
    }

    /// `xi . A xi`
    pub fn quad(&self, xi: Point) -> f64 {
        let a = self.apply(xi);
        a[0] * xi[0] + a[1] * xi[1]
    }

    /// Eigenvalues `(min, max)`; in 1D both equal `xx`.
    pub fn eigenvalues(&self, dim: usize) -> (f64, f64) {
        if dim == 1 {
            return (self.xx, self.xx);
        }
        let m = 0.5 * (self.xx + self.yy);
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m - d, m + d)
    }
}

impl Lerp for Sym2 {
    fn zero() -> Self {
        Sym2::default()
    }
    fn add_scaled(self, o: Self, w: f64) -> Self {
        Sym2 {
            xx: self.xx + w * o.xx,
            xy: self.xy + w * o.xy,
            yy: self.yy + w * o.yy,
        }
    }
}

/// Samples of a cell-periodic quantity on the uniform node grid
/// `x_i = i L / res` (nodes at `x = L` are the wrapped copies of `x = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicSamples<T> {
    cell: PeriodicCell,
    res: [usize; 2],
    data: Vec<T>,
}

impl<T: Lerp> PeriodicSamples<T> {
    pub fn from_fn(cell: PeriodicCell, resolution: &[usize], f: impl Fn(Point) -> T) -> Result<Self> {
        let res = normalize_resolution(&cell, resolution)?;
        let h = [cell.length(0) / res[0] as f64, cell.length(1) / res[1] as f64];
        let mut data = Vec::with_capacity(res[0] * res[1]);
        for j in 0..res[1] {
            for i in 0..res[0] {
                let y = if cell.dim() == 2 { j as f64 * h[1] } else { 0.0 };
                data.push(f([i as f64 * h[0], y]));
            }
        }
        Ok(Self { cell, res, data })
    }

    pub fn from_samples(cell: PeriodicCell, resolution: &[usize], data: Vec<T>) -> Result<Self> {
        let res = normalize_resolution(&cell, resolution)?;
        if data.len() != res[0] * res[1] {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                res[0] * res[1],
                data.len()
            )));
        }
        Ok(Self { cell, res, data })
    }

    pub fn cell(&self) -> &PeriodicCell {
        &self.cell
    }

    pub fn resolution(&self) -> [usize; 2] {
        self.res
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.cell.length(axis) / self.res[axis] as f64
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Sample at integer node `(i, j)` with periodic wrap.
    pub fn node(&self, i: isize, j: isize) -> T {
        let i = i.rem_euclid(self.res[0] as isize) as usize;
        let j = j.rem_euclid(self.res[1] as isize) as usize;
        self.data[j * self.res[0] + i]
    }

    /// Bilinear interpolation with periodic wrap.
    pub fn evaluate(&self, x: Point) -> T {
        let (i0, fx) = locate(x[0], self.spacing(0));
        if self.cell.dim() == 1 {
            return self
                .node(i0, 0)
                .add_scaled(self.node(i0, 0), -fx)
                .add_scaled(self.node(i0 + 1, 0), fx);
        }
        let (j0, fy) = locate(x[1], self.spacing(1));
        let mut out = T::zero();
        for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                let w = wx * wy;
                if w != 0.0 {
                    out = out.add_scaled(self.node(i0 + di, j0 + dj), w);
                }
            }
        }
        out
    }
}

fn locate(x: f64, h: f64) -> (isize, f64) {
    let s = x / h;
    let f = s.floor();
    (f as isize, s - f)
}

fn normalize_resolution(cell: &PeriodicCell, resolution: &[usize]) -> Result<[usize; 2]> {
    if resolution.len() != cell.dim() {
        return Err(invalid(format!(
            "resolution has {} entries for a {}-dimensional cell",
            resolution.len(),
            cell.dim()
        )));
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(invalid("resolution must be at least 2 per axis"));
    }
    Ok([resolution[0], if cell.dim() == 2 { resolution[1] } else { 1 }])
}

/// Sampled diffusion matrix `A(x)` with ellipticity bounds `a1 <= A <= a2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    samples: PeriodicSamples<Sym2>,
    a1: f64,
    a2: f64,
}

impl TensorField {
    /// Wraps samples with known bounds, checking ellipticity by sampling the
    /// quadratic form on 16 unit vectors at every node.
    pub fn new(samples: PeriodicSamples<Sym2>, a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0) {
            return Err(Error::Ellipticity(format!("a1 must be positive, got {a1}")));
        }
        if a2 < a1 {
            return Err(Error::Ellipticity(format!("a2 = {a2} below a1 = {a1}")));
        }
        let dim = samples.cell().dim();
        let probes: Vec<Point> = if dim == 1 {
            vec![[1.0, 0.0]]
        } else {
            (0..16)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / 16.0;
                    [t.cos(), t.sin()]
                })
                .collect()
        };
        for m in samples.data() {
            for &xi in &probes {
                let q = m.quad(xi);
                if q < a1 - 1e-10 || q > a2 + 1e-10 {
                    return Err(Error::Ellipticity(format!(
                        "quadratic form {q} outside [{a1}, {a2}]"
                    )));
                }
            }
        }
        Ok(Self { samples, a1, a2 })
    }

    /// Bounds estimated from the sampled eigenvalues.
    pub fn from_samples_estimated(samples: PeriodicSamples<Sym2>) -> Result<Self> {
        let dim = samples.cell().dim();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for m in samples.data() {
            let (a, b) = m.eigenvalues(dim);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Self::new(samples, lo, hi)
    }

    pub fn constant(cell: PeriodicCell, resolution: &[usize], m: Sym2) -> Result<Self> {
        let (a1, a2) = m.eigenvalues(cell.dim());
        Self::new(PeriodicSamples::from_fn(cell, resolution, |_| m)?, a1, a2)
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn samples(&self) -> &PeriodicSamples<Sym2> {
        &self.samples
    }

    pub fn evaluate(&self, x: Point) -> Sym2 {
        self.samples.evaluate(x)
    }
}

/// Sampled advection field `q(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    samples: PeriodicSamples<[f64; 2]>,
}

impl VectorField {
    /// Accepts the samples if the discrete divergence and the cell means are
    /// within the given tolerances.
    pub fn new(samples: PeriodicSamples<[f64; 2]>, tol_div: f64, tol_mean: f64) -> Result<Self> {
        let f = Self { samples };
        let div = f.max_divergence();
        if div > tol_div {
            return Err(Error::Flow(format!("discrete divergence {div:e} exceeds {tol_div:e}")));
        }
        let mean = f.mean();
        let worst = mean[0].abs().max(mean[1].abs());
        if worst > tol_mean {
            return Err(Error::Flow(format!("cell mean {worst:e} exceeds {tol_mean:e}")));
        }
        Ok(f)
    }

    /// Skips the zero-mean check; only for test configurations.
    pub fn new_unchecked_mean(samples: PeriodicSamples<[f64; 2]>, tol_div: f64) -> Result<Self> {
        Self::new(samples, tol_div, f64::INFINITY)
    }

    pub fn zero(cell: PeriodicCell, resolution: &[usize]) -> Result<Self> {
        Ok(Self {
            samples: PeriodicSamples::from_fn(cell, resolution, |_| [0.0; 2])?,
        })
    }

    pub fn samples(&self) -> &PeriodicSamples<[f64; 2]> {
        &self.samples
    }

    pub fn evaluate(&self, x: Point) -> [f64; 2] {
        self.samples.evaluate(x)
    }

    /// Max norm of the central-difference divergence with periodic wrap.
    pub fn max_divergence(&self) -> f64 {
        let s = &self.samples;
        let [n0, n1] = s.resolution();
        let dim = s.cell().dim();
        let (h0, h1) = (s.spacing(0), s.spacing(1));
        let mut worst = 0.0f64;
        for j in 0..n1 as isize {
            for i in 0..n0 as isize {
                let mut d = (s.node(i + 1, j)[0] - s.node(i - 1, j)[0]) / (2.0 * h0);
                if dim == 2 {
                    d += (s.node(i, j + 1)[1] - s.node(i, j - 1)[1]) / (2.0 * h1);
                }
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    pub fn mean(&self) -> [f64; 2] {
        let n = self.samples.data().len() as f64;
        let sum = self
            .samples
            .data()
            .iter()
            .fold([0.0; 2], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
        [sum[0] / n, sum[1] / n]
    }

    /// `sup |q|` over the samples.
    pub fn sup_norm(&self) -> f64 {
        self.samples
            .data()
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Sampled periodic scalar, e.g. a reaction rate `r(x)` or a potential `V(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    samples: PeriodicSamples<f64>,
}

impl ScalarField {
    pub fn new(samples: PeriodicSamples<f64>) -> Self {
        Self { samples }
    }

    pub fn constant(cell: PeriodicCell, resolution: &[usize], value: f64) -> Result<Self> {
        Ok(Self::new(PeriodicSamples::from_fn(cell, resolution, |_| value)?))
    }

    pub fn from_fn(cell: PeriodicCell, resolution: &[usize], f: impl Fn(Point) -> f64) -> Result<Self> {
        Ok(Self::new(PeriodicSamples::from_fn(cell, resolution, f)?))
    }

    pub fn samples(&self) -> &PeriodicSamples<f64> {
        &self.samples
    }

    pub fn cell(&self) -> &PeriodicCell {
        self.samples.cell()
    }

    pub fn evaluate(&self, x: Point) -> f64 {
        self.samples.evaluate(x)
    }

    pub fn min(&self) -> f64 {
        self.samples.data().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.data().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise map of the samples.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let s = &self.samples;
        let res = s.resolution();
        let data = s.data().iter().map(|&v| f(v)).collect();
        let r = &res[..s.cell().dim()];
        Self::new(PeriodicSamples::from_samples(*s.cell(), r, data).expect("same shape"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell2() -> PeriodicCell {
        PeriodicCell::new(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn constant_field_evaluates_to_constant() {
        let f = ScalarField::constant(cell2(), &[8, 8], 3.5).unwrap();
        for x in [[0.1, 0.7], [-3.3, 12.25], [0.0, 0.0]] {
            assert_eq!(f.evaluate(x), 3.5);
        }
    }

    #[test]
    fn periodic_wrap_is_exact_on_grid_points() {
        let f = ScalarField::from_fn(cell2(), &[16, 16], |x| (x[0] * 7.0).sin() + x[1]).unwrap();
        for i in 0..16 {
            for k in [-2.0, 1.0, 3.0] {
                let x = [i as f64 / 16.0, 5.0 / 16.0];
                assert_eq!(f.evaluate(x), f.evaluate([x[0] + k, x[1] + k]));
            }
        }
    }

    #[test]
    fn interpolation_is_bilinear() {
        let f = ScalarField::from_fn(cell2(), &[4, 4], |x| x[0] + 2.0 * x[1]).unwrap();
        // inside the first cell the field is exactly linear
        let v = f.evaluate([0.1, 0.2]);
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn ellipticity_rejects_out_of_bounds() {
        let s = PeriodicSamples::from_fn(cell2(), &[4, 4], |_| Sym2::diag(1.0, 3.0)).unwrap();
        assert!(TensorField::new(s.clone(), 1.0, 2.0).is_err());
        assert!(TensorField::new(s.clone(), 0.0, 3.0).is_err());
        let t = TensorField::from_samples_estimated(s).unwrap();
        assert_eq!((t.a1(), t.a2()), (1.0, 3.0));
    }

    #[test]
    fn constant_flow_has_nonzero_mean() {
        let s = PeriodicSamples::from_fn(cell2(), &[8, 8], |_| [1.0, 0.0]).unwrap();
        assert!(VectorField::new(s.clone(), 1e-8, 1e-10).is_err());
        assert!(VectorField::new_unchecked_mean(s, 1e-8).is_ok());
    }
}
