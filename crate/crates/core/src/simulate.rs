//! Explicit time stepping of `u_t = div(A grad u) + q . grad u + f(x, u)`.
//!
//! Diffusion is discretized in flux form with face-averaged coefficients,
//! advection by first-order upwinding per component and the reaction
//! pointwise. For diagonal `A` and `dt <= dt_max` every stencil weight is
//! nonnegative, so the scheme is monotone and satisfies a discrete
//! comparison principle.

use crate::error::{invalid, Error, Result};
use crate::model::{Direction, GridSpec, PeriodicMedium, Point};
use crate::nonlinearity::{LocalReaction, Nonlinearity};
use serde::{Deserialize, Serialize};

/// Initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// Equal to `floor` for `x.n >= c`, to `mu` for `x.n <= -k`, linear in
    /// `x.n` in between.
    Planar {
        direction: Direction,
        c: f64,
        k: f64,
        mu: f64,
        #[serde(default)]
        floor: f64,
    },
    /// `mu` inside the ball, linear ramp to `floor` over `ramp` outside it.
    Ball {
        center: Point,
        radius: f64,
        mu: f64,
        #[serde(default)]
        ramp: f64,
        #[serde(default)]
        floor: f64,
    },
    /// Explicit node values in grid order.
    Custom { values: Vec<f64> },
}

impl InitialData {
    pub fn planar(direction: Direction, c: f64, k: f64, mu: f64) -> Self {
        InitialData::Planar {
            direction,
            c,
            k,
            mu,
            floor: 0.0,
        }
    }

    /// Value at `x`; `None` for custom data.
    pub fn value_at(&self, x: Point) -> Option<f64> {
        match self {
            InitialData::Planar {
                direction,
                c,
                k,
                mu,
                floor,
            } => {
                let s = direction.dot(x);
                let w = ((c - s) / (c + k)).clamp(0.0, 1.0);
                Some(floor + (mu - floor) * w)
            }
            InitialData::Ball {
                center,
                radius,
                mu,
                ramp,
                floor,
            } => {
                let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                let w = if r <= *radius {
                    1.0
                } else if *ramp > 0.0 {
                    (1.0 - (r - radius) / ramp).max(0.0)
                } else {
                    0.0
                };
                Some(floor + (mu - floor) * w)
            }
            InitialData::Custom { .. } => None,
        }
    }

    /// Node values on `grid`.
    pub fn sample(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if let InitialData::Planar { c, k, .. } = self {
            if !(c + k > 0.0) {
                return Err(invalid("planar data need C + K > 0"));
            }
        }
        match self {
            InitialData::Custom { values } => {
                if values.len() != grid.len() {
                    return Err(invalid(format!(
                        "custom initial data has {} values for {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(values.clone())
            }
            _ => Ok(grid
                .positions()
                .into_iter()
                .map(|x| self.value_at(x).unwrap())
                .collect()),
        }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub max_rate: f64,
    /// `dt / dt_limit`; below 1 for admissible steps.
    pub cfl: f64,
}

/// Solution snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Vec<f64>,
    pub grid: GridSpec,
    pub diagnostics: StepDiagnostics,
}

/// Receives states during [`Simulator::run`].
pub trait Observer {
    fn observe(&mut self, state: &SimState) -> Result<()>;
}

impl<F: FnMut(&SimState) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &SimState) -> Result<()> {
        self(state)
    }
}

/// Keeps every observed state.
#[derive(Default, Debug)]
pub struct Recorder {
    pub states: Vec<SimState>,
}

impl Observer for Recorder {
    fn observe(&mut self, state: &SimState) -> Result<()> {
        self.states.push(state.clone());
        Ok(())
    }
}

/// Run length and observation cadence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    /// Observation interval in time units.
    pub every: f64,
    /// Multiplier on the stable step.
    pub safety: f64,
}

impl RunOptions {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            every: 0.5,
            safety: 0.9,
        }
    }

    pub fn every(mut self, every: f64) -> Self {
        self.every = every;
        self
    }
}

/// The discretized problem on a fixed grid.
#[derive(Clone)]
pub struct Simulator {
    grid: GridSpec,
    weights: Vec<[f64; 9]>,
    neighbors: Vec<[usize; 9]>,
    reactions: Vec<LocalReaction>,
    dt_diffusion: f64,
    dt_advection: f64,
    lower_guard: f64,
    upper_guard: f64,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("grid", &self.grid)
            .field("dt_max", &self.dt_max())
            .finish()
    }
}

const C: usize = 0;
const E: usize = 1;
const W: usize = 2;
const N: usize = 3;
const S: usize = 4;
const NE: usize = 5;
const NW: usize = 6;
const SE: usize = 7;
const SW: usize = 8;

impl Simulator {
    pub fn new(medium: &PeriodicMedium, nl: &Nonlinearity, grid: GridSpec) -> Result<Self> {
        if grid.dim() != medium.dim() || nl.cell().dim() != medium.dim() {
            return Err(invalid("grid, medium and nonlinearity dimensions differ"));
        }
        let dim = grid.dim();
        let [n0, n1] = grid.nodes();
        let (h0, h1) = (grid.spacing(0), grid.spacing(1));
        let pos = grid.positions();
        let a: Vec<_> = pos.iter().map(|&x| medium.diffusion_at(x)).collect();
        let mut weights = Vec::with_capacity(grid.len());
        let mut neighbors = Vec::with_capacity(grid.len());
        let mut reactions = Vec::with_capacity(grid.len());
        let mut qmax = 0.0f64;
        for j in 0..n1 {
            for i in 0..n0 {
                let k = grid.index(i, j);
                let x = pos[k];
                let at = |(a, b): (usize, usize)| grid.index(a, b);
                let e = grid.neighbor(i, j, 0, 1);
                let w_ = grid.neighbor(i, j, 0, -1);
                let mut nb = [k, at(e), at(w_), k, k, k, k, k, k];
                let q = medium.flow_at(x);
                let ak = a[k];
                let mut w = [0.0; 9];
                // no-flux ghosts mirror the interior coefficient as well
                let ae = 0.5 * (ak.xx + a[nb[E]].xx) / (h0 * h0);
                let aw = 0.5 * (ak.xx + a[nb[W]].xx) / (h0 * h0);
                w[E] = ae + q[0].max(0.0) / h0;
                w[W] = aw + (-q[0]).max(0.0) / h0;
                let mut diag = -(ae + aw) - q[0].abs() / h0;
                qmax = qmax.max(q[0].abs());
                if dim == 2 {
                    let nn = grid.neighbor(i, j, 1, 1);
                    let ss = grid.neighbor(i, j, 1, -1);
                    nb[N] = at(nn);
                    nb[S] = at(ss);
                    nb[NE] = at(grid.neighbor(nn.0, nn.1, 0, 1));
                    nb[NW] = at(grid.neighbor(nn.0, nn.1, 0, -1));
                    nb[SE] = at(grid.neighbor(ss.0, ss.1, 0, 1));
                    nb[SW] = at(grid.neighbor(ss.0, ss.1, 0, -1));
                    let an = 0.5 * (ak.yy + a[nb[N]].yy) / (h1 * h1);
                    let as_ = 0.5 * (ak.yy + a[nb[S]].yy) / (h1 * h1);
                    w[N] = an + q[1].max(0.0) / h1;
                    w[S] = as_ + (-q[1]).max(0.0) / h1;
                    diag -= an + as_ + q[1].abs() / h1;
                    qmax = qmax.max(q[1].abs());
                    let s = 1.0 / (4.0 * h0 * h1);
                    let (xe, xw, xn, xs) = (a[nb[E]].xy, a[nb[W]].xy, a[nb[N]].xy, a[nb[S]].xy);
                    w[NE] = s * (xe + xn);
                    w[NW] = -s * (xw + xn);
                    w[SE] = -s * (xe + xs);
                    w[SW] = s * (xw + xs);
                }
                w[C] = diag;
                weights.push(w);
                neighbors.push(nb);
                reactions.push(nl.localize(x));
            }
        }
        let h = grid.min_spacing();
        let dt_diffusion = 0.2 * h * h / (medium.a2() * dim as f64);
        let dt_advection = if qmax > 0.0 { 0.5 * h / qmax } else { f64::INFINITY };
        Ok(Self {
            grid,
            weights,
            neighbors,
            reactions,
            dt_diffusion,
            dt_advection,
            lower_guard: nl.lower() - 1e-6,
            upper_guard: 1.0 + nl.rho(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Largest admissible time step.
    pub fn dt_max(&self) -> f64 {
        self.dt_diffusion.min(self.dt_advection)
    }

    /// Whether all off-diagonal weights are nonnegative and the diagonal of
    /// `I + dt L` is nonnegative at `dt_max`.
    pub fn is_monotone(&self) -> bool {
        let dt = self.dt_max();
        self.weights
            .iter()
            .all(|w| w[1..].iter().all(|&v| v >= 0.0) && 1.0 + dt * w[C] >= 0.0)
    }

    pub fn initial_state(&self, init: &InitialData) -> Result<SimState> {
        Ok(SimState {
            t: 0.0,
            u: init.sample(&self.grid)?,
            grid: self.grid.clone(),
            diagnostics: StepDiagnostics::default(),
        })
    }

    /// One explicit Euler step of size `dt` in place.
    pub fn step(&self, state: &mut SimState, dt: f64, scratch: &mut Vec<f64>) -> Result<()> {
        let limit = self.dt_max();
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        let u = &state.u;
        scratch.clear();
        scratch.reserve(u.len());
        let mut max_rate = 0.0f64;
        for k in 0..u.len() {
            let w = &self.weights[k];
            let nb = &self.neighbors[k];
            let mut lu = 0.0;
            for s in 0..9 {
                lu += w[s] * u[nb[s]];
            }
            let rate = lu + self.reactions[k].eval(u[k]);
            max_rate = max_rate.max(rate.abs());
            scratch.push(u[k] + dt * rate);
        }
        let step = state.diagnostics.step + 1;
        for &v in scratch.iter() {
            if v.is_nan() {
                return Err(Error::NaN(step));
            }
            if v < self.lower_guard || v > self.upper_guard {
                return Err(Error::Range {
                    step,
                    value: v,
                    lo: self.lower_guard,
                    hi: self.upper_guard,
                });
            }
        }
        std::mem::swap(&mut state.u, scratch);
        state.t += dt;
        state.diagnostics = StepDiagnostics {
            step,
            max_rate,
            cfl: dt / limit,
        };
        Ok(())
    }

    /// Steps from `state` to `t_end`, calling every observer at the start,
    /// every `opts.every` time units and at the end.
    pub fn run(&self, mut state: SimState, opts: &RunOptions, observers: &mut [&mut dyn Observer]) -> Result<SimState> {
        if !(opts.t_end > state.t) {
            return Err(invalid("t_end must exceed the current time"));
        }
        if !(opts.safety > 0.0 && opts.safety <= 1.0) {
            return Err(invalid("safety factor must lie in (0, 1]"));
        }
        let span = opts.t_end - state.t;
        let dt0 = opts.safety * self.dt_max();
        let steps = (span / dt0).ceil() as usize;
        let dt = span / steps as f64;
        let cadence = ((opts.every / dt).round() as usize).max(1);
        for o in observers.iter_mut() {
            o.observe(&state)?;
        }
        let t0 = state.t;
        let mut scratch = Vec::with_capacity(state.u.len());
        for s in 1..=steps {
            self.step(&mut state, dt, &mut scratch)?;
            // avoid drift of the accumulated time
            state.t = t0 + s as f64 * dt;
            if s % cadence == 0 || s == steps {
                for o in observers.iter_mut() {
                    o.observe(&state)?;
                }
            }
        }
        Ok(state)
    }
}

/// Outcome of [`comparison_run`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderingReport {
    /// `min (u_high - u_low)` over all steps and nodes.
    pub min_difference: f64,
    pub worst_time: f64,
    pub steps: usize,
}

/// Runs two solutions with identical steps and tracks `min(u_high - u_low)`
/// after every step.
pub fn comparison_run(sim: &Simulator, low: &InitialData, high: &InitialData, t_end: f64) -> Result<OrderingReport> {
    comparison_run_pair(sim, low, sim, high, t_end)
}

/// Like [`comparison_run`] with a separate discretization for each solution
/// (same grid, e.g. two reaction terms).
pub fn comparison_run_pair(
    sim_low: &Simulator,
    low: &InitialData,
    sim_high: &Simulator,
    high: &InitialData,
    t_end: f64,
) -> Result<OrderingReport> {
    if sim_low.grid != sim_high.grid {
        return Err(invalid("compared runs must share the grid"));
    }
    if !(t_end > 0.0) {
        return Err(invalid("t_end must be positive"));
    }
    let mut a = sim_low.initial_state(low)?;
    let mut b = sim_high.initial_state(high)?;
    let min_diff = |a: &SimState, b: &SimState| {
        a.u.iter()
            .zip(&b.u)
            .map(|(l, h)| h - l)
            .fold(f64::INFINITY, f64::min)
    };
    let mut report = OrderingReport {
        min_difference: min_diff(&a, &b),
        worst_time: 0.0,
        steps: 0,
    };
    let dt0 = 0.9 * sim_low.dt_max().min(sim_high.dt_max());
    let steps = (t_end / dt0).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let (mut sa, mut sb) = (Vec::new(), Vec::new());
    for _ in 0..steps {
        sim_low.step(&mut a, dt, &mut sa)?;
        sim_high.step(&mut b, dt, &mut sb)?;
        let d = min_diff(&a, &b);
        if d < report.min_difference {
            report.min_difference = d;
            report.worst_time = a.t;
        }
    }
    report.steps = steps;
    Ok(report)
}
