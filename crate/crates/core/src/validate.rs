//! Executable comparison-principle certificates: the exponential
//! supersolution for ignition terms, uniform spreading over directions and
//! the ordering between monostable and ignition-approximation dynamics.

use crate::error::{invalid, Error, Result};
use crate::fronts::{speed_bounds, speed_domain, SpeedRunConfig};
use crate::model::{sample_directions, Direction, DirectionalDomain, GridSpec, PeriodicMedium, Point};
use crate::nonlinearity::Nonlinearity;
use crate::simulate::{comparison_run_pair, InitialData, OrderingReport, RunOptions, SimState, Simulator};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `v(t, x) = min{1, theta + C exp(-lambda (x.n - sigma t))}` with
/// `sigma = 2 a2 lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupersolutionSpec {
    pub theta: f64,
    pub c: f64,
    pub lambda: f64,
    pub a1: f64,
    pub a2: f64,
    /// `sup f(x, u) / (u - theta)`
    pub m: f64,
}

impl SupersolutionSpec {
    /// `C = (1 + theta) exp(lambda C_init)` so that `v(0, .) = 1` wherever
    /// planar data with front edge `C_init` are positive.
    pub fn new(medium: &PeriodicMedium, nl: &Nonlinearity, lambda: f64, c_init: f64) -> Self {
        let theta = nl.threshold();
        Self {
            theta,
            c: (1.0 + theta) * (lambda * c_init).exp(),
            lambda,
            a1: medium.a1(),
            a2: medium.a2(),
            m: nl.lipschitz_m(),
        }
    }

    pub fn sigma(&self) -> f64 {
        2.0 * self.a2 * self.lambda
    }

    /// `a1 lambda^2 - lambda (|div(An)| + |q.n|) - M` for direction `n`.
    pub fn margin(&self, medium: &PeriodicMedium, n: &Direction) -> f64 {
        let p = n.as_point();
        let b = medium.div_an_sup(p) + medium.flow_dot_sup(p);
        self.a1 * self.lambda * self.lambda - self.lambda * b - self.m
    }
}

/// Positive root of `a1 l^2 - b l - m`.
fn threshold_root(a1: f64, b: f64, m: f64) -> f64 {
    (b + (b * b + 4.0 * a1 * m).sqrt()) / (2.0 * a1)
}

/// One `lambda` valid for every direction: 1.1 times the largest root of
/// `a1 l^2 - l (|div(An)| + |q.n|) - M` over 16 sampled directions (both
/// directions in 1D), or `1e-3` when the inequality is degenerate.
pub fn choose_lambda(medium: &PeriodicMedium, nl: &Nonlinearity) -> Result<f64> {
    if !nl.kind().is_ignition() {
        return Err(invalid("choose_lambda needs an ignition-type nonlinearity"));
    }
    let m = nl.lipschitz_m();
    if !m.is_finite() {
        return Err(invalid("lipschitz constant M is not finite"));
    }
    let a1 = medium.a1();
    let mut worst = 0.0f64;
    for n in sample_directions(medium.dim(), 16) {
        let p = n.as_point();
        let b = medium.div_an_sup(p) + medium.flow_dot_sup(p);
        worst = worst.max(threshold_root(a1, b, m));
    }
    if worst == 0.0 {
        return Ok(1e-3);
    }
    let lambda = 1.1 * worst;
    if lambda > 1e6 {
        return Err(Error::Bracket(format!(
            "no lambda below 1e6 satisfies the supersolution inequality (needs {lambda:e})"
        )));
    }
    Ok(lambda)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupersolutionReport {
    pub direction: Direction,
    /// Smallest residual over points with `v < 1`.
    pub min_residual: f64,
    /// Smallest residual divided by the size of its terms.
    pub min_relative: f64,
    pub points_below_one: usize,
    pub negative_points: usize,
    /// `max |residual|` where `v = 1`.
    pub max_at_one: f64,
    pub pass: bool,
}

/// Residual `v_t - div(A grad v) - q.grad v - f(x, v)` at every node of
/// `grid` and every time in `times`, from the closed-form derivatives of
/// `v`. The contract is `residual >= -1e-8 scale` wherever `v < 1`.
pub fn check_supersolution(
    spec: &SupersolutionSpec,
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    n: &Direction,
    grid: &GridSpec,
    times: &[f64],
) -> Result<SupersolutionReport> {
    if spec.margin(medium, n) <= 0.0 {
        return Err(invalid(format!(
            "lambda = {} violates a1 lambda^2 - lambda(|div An| + |q.n|) - M > 0",
            spec.lambda
        )));
    }
    Ok(supersolution_residuals(spec, medium, nl, n, grid, times))
}

/// Residual evaluation without the precondition (used for negative controls).
pub fn supersolution_residuals(
    spec: &SupersolutionSpec,
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    n: &Direction,
    grid: &GridSpec,
    times: &[f64],
) -> SupersolutionReport {
    let pos = grid.positions();
    let mut report = SupersolutionReport {
        direction: n.clone(),
        min_residual: f64::INFINITY,
        min_relative: f64::INFINITY,
        points_below_one: 0,
        negative_points: 0,
        max_at_one: 0.0,
        pass: true,
    };
    for &t in times {
        for &x in &pos {
            let Some(r) = supersolution_residual_at(spec, medium, nl, n, x, t) else {
                report.max_at_one = report.max_at_one.max(nl.eval(x, 1.0).abs());
                continue;
            };
            report.points_below_one += 1;
            report.min_residual = report.min_residual.min(r.residual);
            if r.scale > 0.0 {
                report.min_relative = report.min_relative.min(r.residual / r.scale);
            }
            if r.residual < -1e-8 * r.scale.max(f64::MIN_POSITIVE) {
                report.negative_points += 1;
            }
        }
    }
    report.pass = report.negative_points == 0 && report.max_at_one <= 1e-12;
    report
}

/// Residual at one point together with the sum of magnitudes of its terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointResidual {
    pub v: f64,
    pub residual: f64,
    pub scale: f64,
}

/// Pointwise residual of `v`; `None` where `v >= 1` (there `v` is capped at 1).
pub fn supersolution_residual_at(
    spec: &SupersolutionSpec,
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    n: &Direction,
    x: Point,
    t: f64,
) -> Option<PointResidual> {
    let p = n.as_point();
    let lam = spec.lambda;
    let sigma = spec.sigma();
    let w = spec.c * (-lam * (n.dot(x) - sigma * t)).exp();
    let v = spec.theta + w;
    if v >= 1.0 {
        return None;
    }
    let a = medium.diffusion_at(x);
    let q = medium.flow_at(x);
    let vt = lam * sigma * w;
    let div = w * (lam * lam * a.quad(p) - lam * medium.div_an(x, p));
    let adv = -lam * w * (q[0] * p[0] + q[1] * p[1]);
    let f = nl.eval(x, v);
    Some(PointResidual {
        v,
        residual: vt - div - adv - f,
        scale: vt.abs() + div.abs() + adv.abs() + f.abs(),
    })
}

/// Square sampling grid `[-extent, extent]^dim` with spacing `h` for
/// supersolution checks.
pub fn sampling_grid(dim: usize, extent: f64, h: f64) -> Result<GridSpec> {
    let cells = ((2.0 * extent) / h).round() as usize;
    crate::model::GridSpec::new(
        dim,
        [-extent, if dim == 2 { -extent } else { 0.0 }],
        [cells as f64 * h, cells as f64 * h],
        [cells + 1, cells + 1],
        [crate::model::Boundary::NoFlux; 2],
    )
}

/// Settings of [`uniform_spreading_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpreadingConfig {
    pub h: f64,
    pub t_end: f64,
    pub every: f64,
    pub behind: f64,
    /// Planar data `C`, `K`, `mu`, shared by all directions.
    pub c: f64,
    pub k: f64,
    pub mu: f64,
    /// Uniformity gate on `max tau / min tau`.
    pub gate: f64,
}

impl Default for SpreadingConfig {
    fn default() -> Self {
        Self {
            h: 0.125,
            t_end: 30.0,
            every: 0.5,
            behind: 15.0,
            c: 0.0,
            k: 5.0,
            mu: 0.9,
            gate: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionSpreading {
    pub angle: f64,
    pub direction: Direction,
    pub c_ref: f64,
    /// First sampled time after which both conclusions hold through `t_end`.
    pub tau: Option<f64>,
    /// Same for each conclusion separately.
    pub tau_upper: Option<f64>,
    pub tau_lower: Option<f64>,
    /// The measurement window became empty before `tau` was found.
    pub inconclusive: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadingReport {
    pub alpha: f64,
    pub delta: f64,
    pub entries: Vec<DirectionSpreading>,
    pub tau_max: f64,
    pub tau_min: f64,
    pub ratio: f64,
    pub gate: f64,
    pub pass: bool,
}

/// Sampled conclusions at one time.
#[derive(Clone, Copy, Debug)]
struct Conclusions {
    upper_ok: bool,
    lower_ok: bool,
    empty: bool,
}

fn conclusions(
    state: &SimState,
    domain: &DirectionalDomain,
    c_ref: f64,
    alpha: f64,
    delta: f64,
    margin: f64,
) -> Conclusions {
    let g = &domain.grid;
    let t = state.t;
    let mut out = Conclusions {
        upper_ok: true,
        lower_ok: true,
        empty: true,
    };
    let [n0, n1] = g.nodes();
    for j in 0..n1 {
        for i in 0..n0 {
            let x = g.position(i, j);
            let s = domain.s(x);
            if s < -domain.behind || s > domain.ahead || !domain.in_window(x, margin) {
                continue;
            }
            out.empty = false;
            let u = state.u[g.index(i, j)];
            if s <= (c_ref - alpha) * t && u < 1.0 - delta {
                out.upper_ok = false;
            }
            if s >= (c_ref + alpha) * t && u > delta {
                out.lower_ok = false;
            }
        }
    }
    out
}

/// First time of a trailing run of `true`.
fn settle_time(times: &[f64], ok: &[bool]) -> Option<f64> {
    if !ok.last().copied().unwrap_or(false) {
        return None;
    }
    let k = ok.iter().rposition(|&b| !b).map_or(0, |k| k + 1);
    Some(times[k])
}

fn spreading_in_direction(
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    n: &Direction,
    c_ref: f64,
    alpha: f64,
    delta: f64,
    cfg: &SpreadingConfig,
) -> Result<DirectionSpreading> {
    // the region x.n >= (c + alpha) t must stay inside the domain
    let run_cfg = SpeedRunConfig {
        h: cfg.h,
        t_end: cfg.t_end,
        behind: cfg.behind,
        ahead: Some((c_ref + alpha) * cfg.t_end + 15.0),
        ..SpeedRunConfig::default()
    };
    let domain = speed_domain(medium, nl, n, &run_cfg)?;
    let sim = Simulator::new(medium, nl, domain.grid.clone())?;
    let init = InitialData::Planar {
        direction: n.clone(),
        c: cfg.c,
        k: cfg.k,
        mu: cfg.mu,
        floor: nl.lower(),
    };
    let rate = if domain.has_oblique_walls() {
        2.0 * speed_bounds(medium, nl).c_max
    } else {
        0.0
    };
    let mut times = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut emptied = false;
    let mut obs = |s: &SimState| -> Result<()> {
        let c = conclusions(s, &domain, c_ref, alpha, delta, rate * s.t);
        times.push(s.t);
        upper.push(c.upper_ok);
        lower.push(c.lower_ok);
        emptied |= c.empty;
        Ok(())
    };
    sim.run(
        sim.initial_state(&init)?,
        &RunOptions::new(cfg.t_end).every(cfg.every),
        &mut [&mut obs],
    )?;
    let both: Vec<bool> = upper.iter().zip(&lower).map(|(a, b)| *a && *b).collect();
    let tau = settle_time(&times, &both);
    Ok(DirectionSpreading {
        angle: n.angle(),
        direction: n.clone(),
        c_ref,
        tau,
        tau_upper: settle_time(&times, &upper),
        tau_lower: settle_time(&times, &lower),
        inconclusive: emptied && tau.is_none(),
        error: None,
    })
}

/// Runs every direction from planar data with shared `C, K, mu` and finds
/// the time `tau_n` after which `u >= 1 - delta` on `x.n <= (c(n) - alpha) t`
/// and `u <= delta` on `x.n >= (c(n) + alpha) t`. Passes when every `tau_n`
/// is finite and `max tau / min tau <= gate`.
pub fn uniform_spreading_check(
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    directions: &[Direction],
    references: &[f64],
    alpha: f64,
    delta: f64,
    cfg: &SpreadingConfig,
) -> Result<SpreadingReport> {
    if directions.len() != references.len() || directions.is_empty() {
        return Err(invalid("one reference speed per direction is required"));
    }
    if !(alpha > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("alpha must be positive and delta in (0, 1)"));
    }
    let entries: Vec<DirectionSpreading> = directions
        .par_iter()
        .zip(references.par_iter())
        .map(|(n, &c)| {
            spreading_in_direction(medium, nl, n, c, alpha, delta, cfg).unwrap_or_else(|e| DirectionSpreading {
                angle: n.angle(),
                direction: n.clone(),
                c_ref: c,
                tau: None,
                tau_upper: None,
                tau_lower: None,
                inconclusive: false,
                error: Some(e.to_string()),
            })
        })
        .collect();
    let taus: Vec<f64> = entries.iter().filter_map(|e| e.tau).collect();
    let all = taus.len() == entries.len();
    let tau_max = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if !all {
        f64::INFINITY
    } else if tau_max == 0.0 {
        1.0
    } else if tau_min == 0.0 {
        f64::INFINITY
    } else {
        tau_max / tau_min
    };
    Ok(SpreadingReport {
        alpha,
        delta,
        entries,
        tau_max,
        tau_min,
        ratio,
        gate: cfg.gate,
        pass: all && ratio <= cfg.gate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IgnitionOrderingReport {
    pub eps: f64,
    pub reversed: bool,
    pub ordering: OrderingReport,
    /// `min (u_high - u_low) >= -1e-8`.
    pub ordered: bool,
}

/// Runs the monostable dynamics and its ignition approximation from the
/// same planar data and checks `u_monostable >= u_approx`. With
/// `reversed` the roles are swapped (a negative control that must fail);
/// `eps = 0` compares the monostable dynamics with itself.
pub fn ignition_lower_bound_check(
    medium: &PeriodicMedium,
    base: &Nonlinearity,
    eps: f64,
    n: &Direction,
    cfg: &SpeedRunConfig,
    reversed: bool,
) -> Result<IgnitionOrderingReport> {
    if !base.kind().is_monostable() {
        return Err(invalid("the base nonlinearity must be monostable"));
    }
    let approx = if eps == 0.0 {
        base.clone()
    } else {
        Nonlinearity::ignition_approx(base, eps)?
    };
    let domain = speed_domain(medium, base, n, cfg)?;
    let sim_base = Simulator::new(medium, base, domain.grid.clone())?;
    let sim_approx = Simulator::new(medium, &approx, domain.grid.clone())?;
    let init = InitialData::Planar {
        direction: n.clone(),
        c: cfg.c,
        k: cfg.k,
        mu: cfg.mu.unwrap_or(0.9),
        floor: 0.0,
    };
    let ordering = if reversed {
        comparison_run_pair(&sim_base, &init, &sim_approx, &init, cfg.t_end)?
    } else {
        comparison_run_pair(&sim_approx, &init, &sim_base, &init, cfg.t_end)?
    };
    Ok(IgnitionOrderingReport {
        eps,
        reversed,
        ordered: ordering.min_difference >= -1e-8,
        ordering,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PeriodicCell;

    #[test]
    fn lambda_for_homogeneous_ignition() {
        let cell = PeriodicCell::unit(2).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let nl = Nonlinearity::ignition(cell, 0.3).unwrap();
        let lam = choose_lambda(&m, &nl).unwrap();
        // M = sup (1 - u) over u > theta = 0.7
        assert!((nl.lipschitz_m() - 0.7).abs() < 2e-3);
        assert!((lam - 1.1 * nl.lipschitz_m().sqrt()).abs() < 1e-12);
        let kpp = Nonlinearity::kpp_constant(cell, 1.0).unwrap();
        assert!(choose_lambda(&m, &kpp).is_err());
    }

    #[test]
    fn lambda_grows_with_flow() {
        let mk = |a: f64| {
            serde_json::from_str::<crate::model::MediumSpec>(&format!(
                r#"{{"cell":[1.0,1.0],"resolution":[32,32],"flow":{{"kind":"cellular","amplitude":{a}}}}}"#
            ))
            .unwrap()
            .build()
            .unwrap()
        };
        let nl = Nonlinearity::ignition(PeriodicCell::unit(2).unwrap(), 0.3).unwrap();
        let l1 = choose_lambda(&mk(1.0), &nl).unwrap();
        let l2 = choose_lambda(&mk(2.0), &nl).unwrap();
        assert!(l2 >= l1);
    }

    #[test]
    fn degenerate_inequality_returns_floor() {
        let cell = PeriodicCell::unit(1).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let zero = Nonlinearity::custom(
            crate::nonlinearity::NonlinearityKind::Ignition,
            cell,
            0.3,
            0.35,
            |_, _| 0.0,
            None,
        );
        assert_eq!(choose_lambda(&m, &zero).unwrap(), 1e-3);
    }

    #[test]
    fn supersolution_and_negative_control() {
        let cell = PeriodicCell::unit(2).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let nl = Nonlinearity::ignition(cell, 0.3).unwrap();
        let lam = choose_lambda(&m, &nl).unwrap();
        let grid = sampling_grid(2, 6.0, 0.25).unwrap();
        let n = Direction::from_angle(0.7);
        let spec = SupersolutionSpec::new(&m, &nl, lam, 0.0);
        let r = check_supersolution(&spec, &m, &nl, &n, &grid, &[0.0, 0.5, 1.0]).unwrap();
        assert!(r.pass && r.min_residual > 0.0 && r.points_below_one > 0, "{r:?}");
        assert_eq!(r.max_at_one, 0.0);
        let half = SupersolutionSpec::new(&m, &nl, 0.5 * lam, 0.0);
        assert!(check_supersolution(&half, &m, &nl, &n, &grid, &[0.0]).is_err());
        let bad = supersolution_residuals(&half, &m, &nl, &n, &grid, &[0.0, 0.5]);
        assert!(bad.negative_points > 0 && !bad.pass);
    }

    #[test]
    fn settle_time_uses_trailing_run() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(settle_time(&t, &[false, true, false, true]), Some(3.0));
        assert_eq!(settle_time(&t, &[false, true, true, true]), Some(1.0));
        assert_eq!(settle_time(&t, &[true, true, true, false]), None);
    }

    #[test]
    fn ignition_approximation_stays_below() {
        let cell = PeriodicCell::unit(1).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let nl = Nonlinearity::kpp_constant(cell, 1.0).unwrap();
        let n = Direction::axis(1, 0).unwrap();
        let cfg = SpeedRunConfig {
            h: 0.0625,
            t_end: 5.0,
            ..Default::default()
        };
        let r = ignition_lower_bound_check(&m, &nl, 0.1, &n, &cfg, false).unwrap();
        assert!(r.ordered, "{r:?}");
        let same = ignition_lower_bound_check(&m, &nl, 0.0, &n, &cfg, false).unwrap();
        assert_eq!(same.ordering.min_difference, 0.0);
        let rev = ignition_lower_bound_check(&m, &nl, 0.1, &n, &cfg, true).unwrap();
        assert!(!rev.ordered);
    }
}
