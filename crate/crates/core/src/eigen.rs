//! Periodic principal eigenvalue problems on the cell.
//!
//! For a direction `n`, an exponent `lambda >= 0`, a drift shift `kappa >= 0`
//! and a potential `V`, the operator is
//!
//! ```text
//! L phi = div(A grad phi) + lambda^2 (n.An) phi - lambda (div(A n phi) + n.A grad phi)
//!         + q.grad phi - lambda (q.n + kappa) phi + V phi
//! ```
//!
//! and `mu0(n, lambda)` is the eigenvalue of `-L` with a positive periodic
//! eigenfunction. With `V = d_u f(., 0)` and `kappa = 0`, exponential
//! solutions `exp(-lambda (x.n - c t)) phi(x)` of the linearized equation
//! exist for `c = -mu0 / lambda`, and the linear spreading speed is
//! `c_lin(n) = min_{lambda > 0} -mu0(n, lambda) / lambda`.

use crate::error::{Error, Result};
use crate::model::{sample_directions, Direction, GridSpec, PeriodicMedium, ScalarField};
use crate::nonlinearity::Nonlinearity;
use crate::optimize::golden_section;
use serde::Serialize;

/// Inputs of one eigenproblem.
#[derive(Clone, Debug)]
pub struct EigenOperatorSpec<'a> {
    pub medium: &'a PeriodicMedium,
    pub direction: Direction,
    pub lambda: f64,
    pub drift_shift: f64,
    pub potential: Option<&'a ScalarField>,
    pub resolution: Vec<usize>,
}

impl<'a> EigenOperatorSpec<'a> {
    pub fn new(medium: &'a PeriodicMedium, direction: Direction, lambda: f64, resolution: &[usize]) -> Self {
        Self {
            medium,
            direction,
            lambda,
            drift_shift: 0.0,
            potential: None,
            resolution: resolution.to_vec(),
        }
    }

    pub fn with_potential(mut self, v: &'a ScalarField) -> Self {
        self.potential = Some(v);
        self
    }

    pub fn with_drift_shift(mut self, kappa: f64) -> Self {
        self.drift_shift = kappa;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.drift_shift >= 0.0) {
            return Err(Error::InvalidParameter(
                "lambda and the drift shift must be nonnegative".into(),
            ));
        }
        if self.direction.dim() != self.medium.dim() || self.resolution.len() != self.medium.dim() {
            return Err(Error::InvalidParameter("dimension mismatch".into()));
        }
        if let Some(&r) = self.resolution.iter().find(|&&r| r < 16) {
            return Err(Error::Resolution(format!(
                "cell resolution {r} is below the minimum of 16 nodes per axis"
            )));
        }
        Ok(())
    }
}

/// Neighbour slots of the 9-point stencil.
const C: usize = 0;
const E: usize = 1;
const W: usize = 2;
const N: usize = 3;
const S: usize = 4;
const NE: usize = 5;
const NW: usize = 6;
const SE: usize = 7;
const SW: usize = 8;

/// Discrete `L` on the periodic cell grid (matrix-free 9-point stencil).
#[derive(Clone, Debug)]
pub struct CellOperator {
    grid: GridSpec,
    weights: Vec<[f64; 9]>,
    neighbors: Vec<[usize; 9]>,
    norm_inf: f64,
    a2: f64,
}

/// Assembles `L` for `spec`: flux-form second differences for `div(A grad)`
/// with face-averaged coefficients, centered first differences, and
/// `div(A n phi)` expanded by the product rule.
pub fn assemble(spec: &EigenOperatorSpec<'_>) -> Result<CellOperator> {
    spec.validate()?;
    let m = spec.medium;
    let grid = GridSpec::periodic_cell(m.cell(), &spec.resolution)?;
    let dim = m.dim();
    let [n0, n1] = grid.nodes();
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    let n = spec.direction.as_point();
    let lam = spec.lambda;

    let pos = grid.positions();
    let a: Vec<_> = pos.iter().map(|&x| m.diffusion_at(x)).collect();
    let idx = |i: isize, j: isize| -> usize {
        let i = i.rem_euclid(n0 as isize) as usize;
        let j = j.rem_euclid(n1 as isize) as usize;
        j * n0 + i
    };

    let mut weights = Vec::with_capacity(grid.len());
    let mut neighbors = Vec::with_capacity(grid.len());
    for j in 0..n1 as isize {
        for i in 0..n0 as isize {
            let k = idx(i, j);
            let x = pos[k];
            let ak = a[k];
            let an = ak.apply(n);
            let q = m.flow_at(x);
            let b = [q[0] - 2.0 * lam * an[0], q[1] - 2.0 * lam * an[1]];
            let v = spec.potential.map_or(0.0, |p| p.evaluate(x));
            let c0 = lam * lam * ak.quad(n)
                - lam * m.div_an(x, n)
                - lam * (q[0] * n[0] + q[1] * n[1])
                - lam * spec.drift_shift
                + v;

            let mut w = [0.0; 9];
            let nb = [
                k,
                idx(i + 1, j),
                idx(i - 1, j),
                idx(i, j + 1),
                idx(i, j - 1),
                idx(i + 1, j + 1),
                idx(i - 1, j + 1),
                idx(i + 1, j - 1),
                idx(i - 1, j - 1),
            ];
            let ae = 0.5 * (ak.xx + a[nb[E]].xx) / (h0 * h0);
            let aw = 0.5 * (ak.xx + a[nb[W]].xx) / (h0 * h0);
            w[E] = ae + b[0] / (2.0 * h0);
            w[W] = aw - b[0] / (2.0 * h0);
            let mut diag = -(ae + aw);
            if dim == 2 {
                let an_ = 0.5 * (ak.yy + a[nb[N]].yy) / (h1 * h1);
                let as_ = 0.5 * (ak.yy + a[nb[S]].yy) / (h1 * h1);
                w[N] = an_ + b[1] / (2.0 * h1);
                w[S] = as_ - b[1] / (2.0 * h1);
                diag -= an_ + as_;
                let s = 1.0 / (4.0 * h0 * h1);
                let (xe, xw, xn, xs) = (a[nb[E]].xy, a[nb[W]].xy, a[nb[N]].xy, a[nb[S]].xy);
                w[NE] = s * (xe + xn);
                w[NW] = -s * (xw + xn);
                w[SE] = -s * (xe + xs);
                w[SW] = s * (xw + xs);
            }
            w[C] = diag + c0;
            weights.push(w);
            neighbors.push(nb);
        }
    }
    let norm_inf = weights
        .iter()
        .map(|w| w.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(CellOperator {
        grid,
        weights,
        neighbors,
        norm_inf,
        a2: m.a2(),
    })
}

impl CellOperator {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `out = L u`
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for ((o, w), nb) in out.iter_mut().zip(&self.weights).zip(&self.neighbors) {
            let mut s = 0.0;
            for k in 0..9 {
                s += w[k] * u[nb[k]];
            }
            *o = s;
        }
    }

    /// Row sums of `L` (equal to `L 1`).
    pub fn row_sums(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.iter().sum()).collect()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.norm_inf
    }

    /// Whether every off-diagonal weight is nonnegative.
    pub fn is_m_matrix_like(&self) -> bool {
        self.weights.iter().all(|w| w[1..].iter().all(|&v| v >= 0.0))
    }

    fn pseudo_time_step(&self) -> f64 {
        let h = self.grid.min_spacing();
        let mut tau = 0.2 * h * h / self.a2;
        let worst = self.weights.iter().map(|w| -w[C]).fold(0.0, f64::max);
        if worst * tau > 0.9 {
            tau = 0.9 / worst;
        }
        tau
    }
}

/// Principal eigenpair of `-L`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenResult {
    pub mu0: f64,
    /// Positive periodic eigenfunction on the cell grid, `sup phi = 1`.
    pub phi: Vec<f64>,
    /// `|| (-L - mu0) phi ||_inf`
    pub residual: f64,
    /// Number of applications of the block propagator `(I + tau L)^m`.
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenSolverOptions {
    pub max_iters: usize,
    /// Power `m` of the propagator per iteration.
    pub block: usize,
    /// Stop when the residual is below `tol * ||L||_inf` ...
    pub tol: f64,
    /// ... and the Rayleigh quotient moved less than `rq_tol (1 + |mu|)`.
    pub rq_tol: f64,
}

impl Default for EigenSolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            block: 8,
            tol: 1e-12,
            rq_tol: 1e-14,
        }
    }
}

/// Power iteration on the positivity-preserving propagator `I + tau L`
/// starting from `init` (all ones when `None`).
pub fn solve(op: &CellOperator, opts: &EigenSolverOptions, init: Option<&[f64]>) -> Result<EigenResult> {
    let n = op.len();
    let mut phi = match init {
        Some(v) if v.len() == n && v.iter().all(|&x| x > 0.0 && x.is_finite()) => v.to_vec(),
        _ => vec![1.0; n],
    };
    let tau = op.pseudo_time_step();
    let mut lphi = vec![0.0; n];
    let mut mu_prev = f64::NAN;
    let mut residual = f64::INFINITY;
    let target = opts.tol * op.norm_inf().max(1.0);

    for it in 0..=opts.max_iters {
        if it > 0 {
            for _ in 0..opts.block {
                op.apply(&phi, &mut lphi);
                for (p, l) in phi.iter_mut().zip(&lphi) {
                    *p += tau * l;
                }
            }
            let sup = phi.iter().copied().fold(0.0, f64::max);
            if !(sup > 0.0 && sup.is_finite()) {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual,
                });
            }
            phi.iter_mut().for_each(|p| *p /= sup);
        } else {
            let sup = phi.iter().copied().fold(0.0, f64::max);
            phi.iter_mut().for_each(|p| *p /= sup);
        }
        op.apply(&phi, &mut lphi);
        let num: f64 = phi.iter().zip(&lphi).map(|(p, l)| p * l).sum();
        let den: f64 = phi.iter().map(|p| p * p).sum();
        let mu = -num / den;
        residual = phi
            .iter()
            .zip(&lphi)
            .map(|(p, l)| (l + mu * p).abs())
            .fold(0.0, f64::max);
        let stalled = (mu - mu_prev).abs() <= opts.rq_tol * (1.0 + mu.abs());
        if residual <= target && (stalled || residual <= 1e-3 * target) {
            if phi.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::Resolution(
                    "eigenfunction lost positivity; refine the cell grid".into(),
                ));
            }
            return Ok(EigenResult {
                mu0: mu,
                phi,
                residual,
                iterations: it,
            });
        }
        mu_prev = mu;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        residual,
    })
}

/// Principal eigenpair with default solver options.
pub fn principal_eigenpair(spec: &EigenOperatorSpec<'_>) -> Result<EigenResult> {
    principal_eigenpair_with(spec, &EigenSolverOptions::default(), None)
}

pub fn principal_eigenpair_with(
    spec: &EigenOperatorSpec<'_>,
    opts: &EigenSolverOptions,
    init: Option<&[f64]>,
) -> Result<EigenResult> {
    solve(&assemble(spec)?, opts, init)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSpeedOptions {
    pub resolution: Vec<usize>,
    pub bracket: (f64, f64),
    pub xtol: f64,
    pub solver: EigenSolverOptions,
}

impl LinearSpeedOptions {
    pub fn new(resolution: &[usize]) -> Self {
        Self {
            resolution: resolution.to_vec(),
            bracket: (1e-3, 20.0),
            xtol: 1e-7,
            solver: EigenSolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearSpeed {
    pub c_lin: f64,
    pub lambda_min: f64,
    pub mu0_at_min: f64,
    /// Eigen residual at the minimizer.
    pub residual: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

/// `c_lin(n) = min_{lambda > 0} -mu0(n, lambda) / lambda` with the potential
/// `V = d_u f(., 0)`, minimized by golden-section search.
///
/// `lambda -> mu0` is concave with `mu0(n, 0) < 0`, so the quotient is
/// quasiconvex on `(0, inf)`. The bracket is doubled while the minimizer
/// touches its right end.
pub fn linear_speed(
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    n: Direction,
    opts: &LinearSpeedOptions,
) -> Result<LinearSpeed> {
    let v = nl.linearization_at_zero(&opts.resolution)?;
    let spec0 = EigenOperatorSpec::new(medium, n, 0.0, &opts.resolution).with_potential(&v);
    let base = principal_eigenpair_with(&spec0, &opts.solver, None)?;
    if !(base.mu0 < 0.0) {
        return Err(Error::NotLinearlyUnstable(base.mu0));
    }

    let (mut lo, mut hi) = opts.bracket;
    let mut warm: Option<Vec<f64>> = Some(base.phi.clone());
    let mut iterations = base.iterations;
    let mut evaluations = 0;
    loop {
        let mut last = (0.0, 0.0, 0.0);
        let result = golden_section(
            |lam: f64| -> Result<f64> {
                let spec = EigenOperatorSpec::new(medium, n, lam, &opts.resolution).with_potential(&v);
                let r = principal_eigenpair_with(&spec, &opts.solver, warm.as_deref())?;
                iterations += r.iterations;
                let g = -r.mu0 / lam;
                last = (lam, r.mu0, r.residual);
                warm = Some(r.phi);
                Ok(g)
            },
            lo,
            hi,
            opts.xtol,
            400,
        )?;
        evaluations += result.evaluations;
        if result.at_upper {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::Bracket(format!(
                    "minimizer still at the right end with lambda = {}",
                    hi / 2.0
                )));
            }
            continue;
        }
        if result.at_lower {
            lo /= 10.0;
            if lo < 1e-9 {
                return Err(Error::Bracket("minimizer collapsed to lambda = 0".into()));
            }
            continue;
        }
        // re-solve at the reported minimizer for its diagnostics
        let (mu0, residual) = if last.0 == result.x {
            (last.1, last.2)
        } else {
            let spec = EigenOperatorSpec::new(medium, n, result.x, &opts.resolution).with_potential(&v);
            let r = principal_eigenpair_with(&spec, &opts.solver, warm.as_deref())?;
            iterations += r.iterations;
            (r.mu0, r.residual)
        };
        return Ok(LinearSpeed {
            c_lin: result.fx,
            lambda_min: result.x,
            mu0_at_min: mu0,
            residual,
            evaluations,
            iterations,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lambda0 {
    pub lambda0: f64,
    /// `min_n mu(n, lambda0)` over the direction sample.
    pub min_mu: f64,
}

/// Largest `lambda = 2^-k` (`k = 0..=20`) with `mu(n, lambda) > 0` for every
/// sampled direction, for the operator with drift shift `kappa` and no
/// potential. 32 directions in 2D, both directions in 1D.
pub fn find_lambda0(
    medium: &PeriodicMedium,
    kappa: f64,
    resolution: &[usize],
    solver: &EigenSolverOptions,
) -> Result<Lambda0> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter("kappa must be positive".into()));
    }
    let dirs = sample_directions(medium.dim(), 32);
    for k in 0..=20 {
        let lam = 0.5f64.powi(k);
        let mut min_mu = f64::INFINITY;
        for &n in &dirs {
            let spec = EigenOperatorSpec::new(medium, n, lam, resolution).with_drift_shift(kappa);
            min_mu = min_mu.min(principal_eigenpair_with(&spec, solver, None)?.mu0);
            if min_mu <= 0.0 {
                break;
            }
        }
        if min_mu > 0.0 {
            return Ok(Lambda0 { lambda0: lam, min_mu });
        }
    }
    Err(Error::Bracket(format!(
        "mu(n, lambda) <= 0 down to lambda = 2^-20; kappa = {kappa} is not a valid lower speed bound"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MediumSpec, PeriodicCell, Sym2};

    fn hetero2() -> PeriodicMedium {
        serde_json::from_str::<MediumSpec>(
            r#"{"cell":[1.0,1.0],"resolution":[16,16],
                "diffusion":{"kind":"cosine_tensor","amplitude":0.3,"amplitude_y":0.2},
                "flow":{"kind":"cellular","amplitude":0.5}}"#,
        )
        .unwrap()
        .build()
        .unwrap()
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let m = PeriodicMedium::homogeneous(PeriodicCell::unit(2).unwrap()).unwrap();
        let op = assemble(&EigenOperatorSpec::new(&m, Direction::from_angle(0.4), 0.0, &[16, 16])).unwrap();
        let mut out = vec![1.0; op.len()];
        op.apply(&vec![1.0; op.len()], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_potential_shifts_constants() {
        let cell = PeriodicCell::unit(2).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let v = ScalarField::constant(cell, &[4, 4], 1.0).unwrap();
        let lam = 0.7;
        let op = assemble(&EigenOperatorSpec::new(&m, Direction::from_angle(1.0), lam, &[16, 16]).with_potential(&v))
            .unwrap();
        for s in op.row_sums() {
            assert!((s - (lam * lam + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn heterogeneous_row_sums_vanish_at_lambda_zero() {
        let m = hetero2();
        for angle in [0.0, 0.9, 2.2] {
            let op = assemble(&EigenOperatorSpec::new(&m, Direction::from_angle(angle), 0.0, &[16, 16])).unwrap();
            assert!(op.row_sums().iter().all(|s| s.abs() < 1e-10));
        }
    }

    #[test]
    fn closed_form_eigenvalues() {
        let cell = PeriodicCell::unit(2).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        for (vv, lam, expected) in [(1.0, 1.0, -2.0), (4.0, 2.0, -8.0)] {
            let v = ScalarField::constant(cell, &[4, 4], vv).unwrap();
            let r = principal_eigenpair(
                &EigenOperatorSpec::new(&m, Direction::from_angle(0.3), lam, &[16, 16]).with_potential(&v),
            )
            .unwrap();
            assert!((r.mu0 - expected).abs() < 1e-6, "{}", r.mu0);
        }
    }

    #[test]
    fn mu_vanishes_at_lambda_zero_with_constant_eigenfunction() {
        let m = hetero2();
        let r = principal_eigenpair(&EigenOperatorSpec::new(&m, Direction::from_angle(0.5), 0.0, &[16, 16])).unwrap();
        assert!(r.mu0.abs() < 1e-8);
        assert!(r.phi.iter().all(|&p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn heterogeneous_eigenpair_is_positive_and_converged() {
        let m = hetero2();
        let r = principal_eigenpair(&EigenOperatorSpec::new(&m, Direction::from_angle(0.5), 0.8, &[16, 16])).unwrap();
        assert!(r.phi.iter().all(|&p| p > 0.0));
        assert!((r.phi.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
        let op = assemble(&EigenOperatorSpec::new(&m, Direction::from_angle(0.5), 0.8, &[16, 16])).unwrap();
        assert!(r.residual <= 1e-8 * op.norm_inf());
    }

    #[test]
    fn resolution_below_sixteen_is_rejected() {
        let m = PeriodicMedium::homogeneous(PeriodicCell::unit(1).unwrap()).unwrap();
        let err = principal_eigenpair(&EigenOperatorSpec::new(&m, Direction::new(&[1.0]).unwrap(), 0.5, &[4]))
            .unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
        assert!(err.is_numerical());
    }

    #[test]
    fn homogeneous_linear_speeds() {
        let cell = PeriodicCell::unit(1).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let n = Direction::new(&[1.0]).unwrap();
        for (rate, c, lam) in [(1.0, 2.0, 1.0), (4.0, 4.0, 2.0)] {
            let nl = Nonlinearity::kpp_constant(cell, rate).unwrap();
            let s = linear_speed(&m, &nl, n, &LinearSpeedOptions::new(&[32])).unwrap();
            assert!((s.c_lin - c).abs() < 1e-3, "{s:?}");
            assert!((s.lambda_min - lam).abs() < 1e-3, "{s:?}");
        }
    }

    #[test]
    fn ignition_is_not_linearly_unstable() {
        let cell = PeriodicCell::unit(1).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let nl = Nonlinearity::ignition(cell, 0.3).unwrap();
        let err = linear_speed(&m, &nl, Direction::new(&[1.0]).unwrap(), &LinearSpeedOptions::new(&[16])).unwrap_err();
        assert!(matches!(err, Error::NotLinearlyUnstable(_)));
    }

    #[test]
    fn anisotropic_axes() {
        let cell = PeriodicCell::unit(2).unwrap();
        let m = PeriodicMedium::constant(cell, Sym2::diag(1.0, 4.0)).unwrap();
        let nl = Nonlinearity::kpp_constant(cell, 1.0).unwrap();
        let opts = LinearSpeedOptions::new(&[16, 16]);
        let c1 = linear_speed(&m, &nl, Direction::from_angle(0.0), &opts).unwrap().c_lin;
        let c2 = linear_speed(&m, &nl, Direction::from_angle(std::f64::consts::FRAC_PI_2), &opts)
            .unwrap()
            .c_lin;
        assert!((c1 - 2.0).abs() < 1e-3 && (c2 - 4.0).abs() < 1e-3, "{c1} {c2}");
    }

    #[test]
    fn lambda0_for_homogeneous_medium() {
        let m = PeriodicMedium::homogeneous(PeriodicCell::unit(2).unwrap()).unwrap();
        let l0 = find_lambda0(&m, 1.0, &[16, 16], &EigenSolverOptions::default()).unwrap();
        assert_eq!(l0.lambda0, 0.5);
        assert!((l0.min_mu - 0.25).abs() < 1e-8);
        // mu(n, 1) = -1 + 1 = 0 is rejected
        let r = principal_eigenpair(
            &EigenOperatorSpec::new(&m, Direction::from_angle(0.0), 1.0, &[16, 16]).with_drift_shift(1.0),
        )
        .unwrap();
        assert!(r.mu0.abs() < 1e-10);
    }

    #[test]
    fn small_lambda_slope_is_kappa() {
        let m = hetero2();
        let kappa = 0.7;
        let lam = 1e-4;
        let r = principal_eigenpair(
            &EigenOperatorSpec::new(&m, Direction::from_angle(1.1), lam, &[16, 16]).with_drift_shift(kappa),
        )
        .unwrap();
        assert!((r.mu0 / lam - kappa).abs() < 1e-2, "{}", r.mu0 / lam);
    }
}
