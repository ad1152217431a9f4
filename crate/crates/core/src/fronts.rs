//! Front positions, speed fits and pulsating-wave profiles.

use crate::error::{invalid, Error, Result};
use crate::model::{Direction, DirectionalDomain, PeriodicCell, PeriodicMedium};
use crate::nonlinearity::Nonlinearity;
use crate::optimize::fit_line;
use crate::simulate::{InitialData, Observer, RunOptions, SimState, Simulator};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Rightmost crossing `max { x.n : u(x) >= level }` restricted to points at
/// least `margin` away from oblique walls, refined by linear interpolation
/// along the grid axis most aligned with `n`.
pub fn front_position(u: &[f64], domain: &DirectionalDomain, level: f64, margin: f64) -> Option<f64> {
    let g = &domain.grid;
    let n = &domain.direction;
    let a = if g.dim() == 1 { 0 } else { n.dominant_axis() };
    let b = 1 - a;
    let nodes = g.nodes();
    let forward = n.get(a) > 0.0;
    let len = nodes[a];
    let at = |p: usize, o: usize| if a == 0 { (p, o) } else { (o, p) };
    let mut best: Option<f64> = None;
    for o in 0..nodes[b] {
        // walk the line in the direction of increasing x.n
        let order = |k: usize| if forward { k } else { len - 1 - k };
        let mut last = None;
        for k in 0..len {
            let (i, j) = at(order(k), o);
            let x = g.position(i, j);
            if u[g.index(i, j)] >= level && domain.in_window(x, margin) {
                last = Some(k);
            }
        }
        let Some(k) = last else { continue };
        let (i, j) = at(order(k), o);
        let xp = g.position(i, j);
        let mut s = domain.s(xp);
        if k + 1 < len {
            let (i2, j2) = at(order(k + 1), o);
            let up = u[g.index(i, j)];
            let uq = u[g.index(i2, j2)];
            if uq < level && domain.in_window(g.position(i2, j2), margin) {
                let xq = g.position(i2, j2);
                let f = (up - level) / (up - uq);
                s += f * (domain.s(xq) - domain.s(xp));
            }
        }
        best = Some(best.map_or(s, |v: f64| v.max(s)));
    }
    best
}

/// Model fitted to front positions over the post-transient window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `m(t) = c t + b`
    Linear,
    /// `m(t) = c t + a ln t + b`; absorbs the logarithmic lag of pulled
    /// (KPP) fronts behind `c t`.
    LogCorrected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedFit {
    pub model: FitModel,
    pub speed: f64,
    pub intercept: f64,
    /// Coefficient of `ln t` (zero for the linear model).
    pub log_coefficient: f64,
    pub rms: f64,
    /// `rms / window length`
    pub uncertainty: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

impl SpeedFit {
    /// Fitted position at time `t`.
    pub fn position(&self, t: f64) -> f64 {
        let log = if self.log_coefficient != 0.0 {
            self.log_coefficient * t.ln()
        } else {
            0.0
        };
        self.speed * t + log + self.intercept
    }
}

/// Front positions `m(t)` along a direction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontTrace {
    pub direction: Direction,
    pub level: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Fraction of the run excluded from the fit.
    pub transient_cut: f64,
    pub fit: Option<SpeedFit>,
}

impl FrontTrace {
    pub fn new(direction: Direction, level: f64, transient_cut: f64) -> Self {
        Self {
            direction,
            level,
            times: Vec::new(),
            positions: Vec::new(),
            transient_cut,
            fit: None,
        }
    }

    pub fn push(&mut self, t: f64, m: f64) {
        self.times.push(t);
        self.positions.push(m);
    }

    /// Fits `model` over `t in [transient_cut T, T]` and stores the result.
    pub fn fit(&mut self, model: FitModel) -> Result<SpeedFit> {
        let t_last = *self
            .times
            .last()
            .ok_or_else(|| Error::InsufficientData("empty front trace".into()))?;
        let t0 = self.transient_cut * t_last;
        let (t, m): (Vec<f64>, Vec<f64>) = self
            .times
            .iter()
            .zip(&self.positions)
            .filter(|(t, _)| **t >= t0 && **t > 0.0)
            .map(|(t, m)| (*t, *m))
            .unzip();
        let need = if model == FitModel::Linear { 3 } else { 5 };
        if t.len() < need {
            return Err(Error::NoCrossing(format!(
                "only {} level crossings in the fit window [{t0}, {t_last}]; increase t_end",
                t.len()
            )));
        }
        let span = t[t.len() - 1] - t[0];
        let (speed, intercept, log_coefficient) = match model {
            FitModel::Linear => {
                let f = fit_line(&t, &m).ok_or_else(|| Error::InsufficientData("degenerate fit window".into()))?;
                (f.slope, f.intercept, 0.0)
            }
            FitModel::LogCorrected => {
                let mut ata = Matrix3::<f64>::zeros();
                let mut atb = Vector3::<f64>::zeros();
                for (&ti, &mi) in t.iter().zip(&m) {
                    let row = Vector3::new(ti, ti.ln(), 1.0);
                    ata += row * row.transpose();
                    atb += row * mi;
                }
                let sol = ata
                    .lu()
                    .solve(&atb)
                    .ok_or_else(|| Error::InsufficientData("singular log-corrected fit".into()))?;
                (sol[0], sol[2], sol[1])
            }
        };
        let mut fit = SpeedFit {
            model,
            speed,
            intercept,
            log_coefficient,
            rms: 0.0,
            uncertainty: 0.0,
            window: (t[0], t[t.len() - 1]),
            samples: t.len(),
        };
        let ss: f64 = t.iter().zip(&m).map(|(&ti, &mi)| (mi - fit.position(ti)).powi(2)).sum();
        fit.rms = (ss / t.len() as f64).sqrt();
        fit.uncertainty = if span > 0.0 { fit.rms / span } else { f64::INFINITY };
        self.fit = Some(fit);
        Ok(fit)
    }

    pub fn speed(&self) -> Option<f64> {
        self.fit.map(|f| f.speed)
    }
}

/// Fits a trace from precomputed `(t, m)` pairs.
pub fn track_front(times: &[f64], positions: &[f64], n: Direction, level: f64, model: FitModel) -> Result<FrontTrace> {
    if times.len() != positions.len() {
        return Err(invalid("times and positions differ in length"));
    }
    if positions.iter().any(|p| !p.is_finite()) {
        return Err(Error::NoCrossing("non-finite front position".into()));
    }
    let mut trace = FrontTrace::new(n, level, 0.4);
    for (&t, &m) in times.iter().zip(positions) {
        trace.push(t, m);
    }
    trace.fit(model)?;
    Ok(trace)
}

/// Tracks the front during a run. Points closer to an oblique wall than
/// `margin_rate * t` are ignored.
pub struct FrontTracker<'a> {
    pub domain: &'a DirectionalDomain,
    pub trace: FrontTrace,
    pub margin_rate: f64,
    pub margin_offset: f64,
}

impl<'a> FrontTracker<'a> {
    pub fn new(domain: &'a DirectionalDomain, level: f64, margin_rate: f64) -> Self {
        Self {
            domain,
            trace: FrontTrace::new(domain.direction.clone(), level, 0.4),
            margin_rate,
            margin_offset: 0.0,
        }
    }

    pub fn margin(&self, t: f64) -> f64 {
        self.margin_offset + self.margin_rate * t
    }
}

impl Observer for FrontTracker<'_> {
    fn observe(&mut self, state: &SimState) -> Result<()> {
        let margin = self.margin(state.t);
        match front_position(&state.u, self.domain, self.trace.level, margin) {
            Some(m) => {
                self.trace.push(state.t, m);
                Ok(())
            }
            None => {
                let umax = state.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Err(Error::NoCrossing(format!(
                    "level {} not reached at t = {} (max u = {umax})",
                    self.trace.level, state.t
                )))
            }
        }
    }
}

/// Settings of a direct speed measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedRunConfig {
    pub h: f64,
    pub t_end: f64,
    pub level: f64,
    pub transient_cut: f64,
    /// Sampling interval of the front position.
    pub every: f64,
    /// Extent behind the initial front.
    pub behind: f64,
    /// Extent ahead of the initial front; default `c_bound t_end + 15`.
    pub ahead: Option<f64>,
    /// Planar data parameters; defaults depend on the nonlinearity.
    pub c: f64,
    pub k: f64,
    pub mu: Option<f64>,
    pub fit: Option<FitModel>,
}

impl Default for SpeedRunConfig {
    fn default() -> Self {
        Self {
            h: 0.05,
            t_end: 40.0,
            level: 0.5,
            transient_cut: 0.4,
            every: 0.25,
            behind: 15.0,
            ahead: None,
            c: 0.0,
            k: 5.0,
            mu: None,
            fit: None,
        }
    }
}

/// Crude bounds used to size domains and wall margins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedBounds {
    /// Upper bound on front speeds, `2 sqrt(a2 M) + |q|`.
    pub c_bound: f64,
    /// Decay exponent bound `|q|/a1 + sqrt(M/a1)`.
    pub lambda_bound: f64,
    /// Boundary-influence speed `c_max = 2 a2 lambda_bound`.
    pub c_max: f64,
}

pub fn speed_bounds(medium: &PeriodicMedium, nl: &Nonlinearity) -> SpeedBounds {
    let m = nl.lipschitz_m().max(1e-3);
    let q = medium.flow_sup();
    let lambda_bound = q / medium.a1() + (m / medium.a1()).sqrt();
    SpeedBounds {
        c_bound: 2.0 * (medium.a2() * m).sqrt() + q,
        lambda_bound,
        c_max: 2.0 * medium.a2() * lambda_bound,
    }
}

/// Default planar data for `nl`: `mu = 0.9` for monostable terms and
/// ignition approximations, `(1 + theta)/2` for ignition terms; the data
/// sit on the lower steady state ahead of the front.
pub fn default_initial(nl: &Nonlinearity, n: Direction, cfg: &SpeedRunConfig) -> InitialData {
    use crate::nonlinearity::NonlinearityKind::*;
    let mu = cfg.mu.unwrap_or(match nl.kind() {
        Ignition => 0.5 * (1.0 + nl.threshold()),
        _ => 0.9,
    });
    InitialData::Planar {
        direction: n,
        c: cfg.c,
        k: cfg.k,
        mu,
        floor: nl.lower(),
    }
}

pub fn default_fit(nl: &Nonlinearity) -> FitModel {
    if nl.kind().is_monostable() {
        FitModel::LogCorrected
    } else {
        FitModel::Linear
    }
}

/// Builds the domain for a speed run in direction `n`.
pub fn speed_domain(medium: &PeriodicMedium, nl: &Nonlinearity, n: &Direction, cfg: &SpeedRunConfig) -> Result<DirectionalDomain> {
    let b = speed_bounds(medium, nl);
    let ahead = cfg.ahead.unwrap_or(b.c_bound * cfg.t_end + 15.0);
    let lateral = 2.0 * b.c_max * cfg.t_end + 10.0;
    DirectionalDomain::build(medium.cell(), n.clone(), cfg.h, cfg.behind, ahead, lateral)
}

/// Result of [`measure_speed`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedMeasurement {
    pub speed: f64,
    pub uncertainty: f64,
    pub trace: FrontTrace,
    /// Wall exclusion margin at `t_end` (zero without oblique walls).
    pub exclusion_margin: f64,
    pub nodes: usize,
    pub dt: f64,
}

/// Direct simulation from planar data in direction `n` with front tracking.
pub fn measure_speed(medium: &PeriodicMedium, nl: &Nonlinearity, n: &Direction, cfg: &SpeedRunConfig) -> Result<SpeedMeasurement> {
    let (_, m) = measure_speed_recorded(medium, nl, n, cfg, None)?;
    Ok(m)
}

/// Like [`measure_speed`], also returning the states observed at multiples
/// of `record_every` (none when `None`).
pub fn measure_speed_recorded(
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    n: &Direction,
    cfg: &SpeedRunConfig,
    record_every: Option<f64>,
) -> Result<(Vec<SimState>, SpeedMeasurement)> {
    if !(cfg.level > nl.lower() && cfg.level < nl.upper()) {
        return Err(invalid("tracking level must lie between the steady states"));
    }
    if !(cfg.t_end > 0.0) || !(0.0..1.0).contains(&cfg.transient_cut) {
        return Err(invalid("t_end must be positive and transient_cut in [0, 1)"));
    }
    let domain = speed_domain(medium, nl, n, cfg)?;
    if !domain.grid.resolves_cell(medium.cell()) {
        return Err(Error::Resolution(format!(
            "h = {} does not divide the cell lengths {:?}",
            cfg.h,
            medium.cell().lengths()
        )));
    }
    let min_nodes = (0..medium.dim())
        .map(|a| (medium.cell().length(a) / cfg.h).round() as usize)
        .min()
        .unwrap_or(0);
    if min_nodes < 16 {
        return Err(Error::Resolution(format!(
            "h = {} gives {min_nodes} nodes per period; at least 16 are required",
            cfg.h
        )));
    }
    let sim = Simulator::new(medium, nl, domain.grid.clone())?;
    let init = default_initial(nl, n.clone(), cfg);
    let state = sim.initial_state(&init)?;
    let bounds = speed_bounds(medium, nl);
    let rate = if domain.has_oblique_walls() {
        2.0 * bounds.c_max
    } else {
        0.0
    };
    let mut tracker = FrontTracker::new(&domain, cfg.level, rate);
    tracker.trace.transient_cut = cfg.transient_cut;
    let mut states = Vec::new();
    let every = match record_every {
        Some(r) => r.min(cfg.every),
        None => cfg.every,
    };
    let track_stride = ((cfg.every / every).round() as usize).max(1);
    let record_stride = record_every.map(|r| ((r / every).round() as usize).max(1));
    let mut count = 0usize;
    let mut obs = |s: &SimState| -> Result<()> {
        if count % track_stride == 0 {
            tracker.observe(s)?;
        }
        if let Some(rs) = record_stride {
            if count % rs == 0 {
                states.push(s.clone());
            }
        }
        count += 1;
        Ok(())
    };
    let opts = RunOptions::new(cfg.t_end).every(every);
    let last = sim.run(state, &opts, &mut [&mut obs])?;
    drop(obs);
    // the final state is always observed; make sure the tracker saw it
    if tracker.trace.times.last() != Some(&last.t) {
        tracker.observe(&last)?;
    }
    if record_every.is_some() && states.last().map(|s| s.t) != Some(last.t) {
        states.push(last.clone());
    }
    let model = cfg.fit.unwrap_or_else(|| default_fit(nl));
    let fit = tracker.trace.fit(model)?;
    let dt = {
        let dt0 = 0.9 * sim.dt_max();
        cfg.t_end / (cfg.t_end / dt0).ceil()
    };
    Ok((
        states,
        SpeedMeasurement {
            speed: fit.speed,
            uncertainty: fit.uncertainty,
            exclusion_margin: tracker.margin(cfg.t_end),
            trace: tracker.trace,
            nodes: domain.grid.len(),
            dt,
        },
    ))
}

/// Moving-frame samples `U(z, x)` of a pulsating wave.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveProfile {
    pub direction: Direction,
    pub speed: f64,
    /// Mean of `m_fit(t) - c t` over the window; `z = x.n - m_fit(t)`.
    pub shift: f64,
    pub bin_width: f64,
    /// Number of position-in-cell bins.
    pub x_bins: usize,
    /// `(z, x_bin, U)` sorted by `x_bin`, then `z`.
    pub samples: Vec<(f64, usize, f64)>,
    /// `max |u(t + L/c, x + L n) - u(t, x)|`
    pub pulsating_residual: f64,
    /// Largest increase of `U` in `z` between adjacent bins.
    pub monotonicity_violation: f64,
    /// Smallest `z` beyond which `U <= 0.02` everywhere.
    pub z_plus: Option<f64>,
    /// Largest `z` below which `U >= 0.98` everywhere.
    pub z_minus: Option<f64>,
}

/// Reconstructs `U(z, x)` from recorded states of a run in an axis-aligned
/// direction, using the fitted trace for the frame, and evaluates the
/// pulsating relation over one period.
pub fn extract_profile(
    states: &[SimState],
    domain: &DirectionalDomain,
    trace: &FrontTrace,
    cell: &PeriodicCell,
) -> Result<WaveProfile> {
    let fit = trace
        .fit
        .ok_or_else(|| Error::InsufficientData("front trace has not been fitted".into()))?;
    let c = fit.speed;
    if !(c > 0.0) {
        return Err(invalid("profile extraction needs a positive speed"));
    }
    let n = &domain.direction;
    if !n.is_axis_aligned() {
        return Err(invalid("profile extraction is limited to axis-aligned directions"));
    }
    let g = &domain.grid;
    let a = n.dominant_axis();
    let period = cell.length(a);
    let (t0, t1) = fit.window;
    let window: Vec<&SimState> = states.iter().filter(|s| s.t >= t0 - 1e-9 && s.t <= t1 + 1e-9).collect();
    if window.len() < 2 || c * (t1 - t0) < 3.0 * period {
        return Err(Error::InsufficientData(format!(
            "window [{t0}, {t1}] covers {:.2} cell crossings; at least 3 are needed",
            c * (t1 - t0) / period
        )));
    }

    // z binning
    let h = g.spacing(a);
    let width = 0.5 * h;
    let res: Vec<usize> = (0..g.dim())
        .map(|ax| (cell.length(ax) / g.spacing(ax)).round() as usize)
        .collect();
    let x_bins: usize = res.iter().product();
    let bin_of = |i: usize, j: usize| -> usize {
        let p = g.position(i, j);
        let ii = ((p[0] / g.spacing(0)).round() as i64).rem_euclid(res[0] as i64) as usize;
        if g.dim() == 1 {
            ii
        } else {
            let jj = ((p[1] / g.spacing(1)).round() as i64).rem_euclid(res[1] as i64) as usize;
            ii + res[0] * jj
        }
    };
    let mut acc: std::collections::BTreeMap<(usize, i64), (f64, usize)> = Default::default();
    let mut shift = 0.0;
    for s in &window {
        let m = fit.position(s.t);
        shift += m - c * s.t;
        let [n0, n1] = g.nodes();
        for j in 0..n1 {
            for i in 0..n0 {
                let z = domain.s(g.position(i, j)) - m;
                let key = (bin_of(i, j), (z / width).round() as i64);
                let e = acc.entry(key).or_insert((0.0, 0));
                e.0 += s.u[g.index(i, j)];
                e.1 += 1;
            }
        }
    }
    shift /= window.len() as f64;
    let samples: Vec<(f64, usize, f64)> = acc
        .iter()
        .map(|(&(xb, zb), &(sum, cnt))| (zb as f64 * width, xb, sum / cnt as f64))
        .collect();

    let mut violation = 0.0f64;
    for w in samples.windows(2) {
        if w[0].1 == w[1].1 {
            violation = violation.max(w[1].2 - w[0].2);
        }
    }
    let z_plus = samples
        .iter()
        .filter(|s| s.2 > 0.02)
        .map(|s| s.0)
        .fold(None, |m: Option<f64>, z| Some(m.map_or(z, |v| v.max(z))))
        .map(|z| z + width);
    let z_minus = samples
        .iter()
        .filter(|s| s.2 < 0.98)
        .map(|s| s.0)
        .fold(None, |m: Option<f64>, z| Some(m.map_or(z, |v| v.min(z))))
        .map(|z| z - width);

    let pulsating_residual = pulsating_residual(&window, domain, period, c)?;
    Ok(WaveProfile {
        direction: n.clone(),
        speed: c,
        shift,
        bin_width: width,
        x_bins,
        samples,
        pulsating_residual,
        monotonicity_violation: violation.max(0.0),
        z_plus,
        z_minus,
    })
}

/// `max |u(t + L/c, x + L n) - u(t, x)|` over recorded times `t` with
/// `t + L/c` inside the record (linear interpolation in time) and nodes
/// whose shift stays on the grid.
pub fn pulsating_residual(states: &[&SimState], domain: &DirectionalDomain, period: f64, c: f64) -> Result<f64> {
    let g = &domain.grid;
    let a = domain.direction.dominant_axis();
    let sign = domain.direction.get(a).signum();
    let shift_nodes = (period / g.spacing(a)).round() as isize * sign as isize;
    let dt = period / c;
    let t_last = states.last().map(|s| s.t).unwrap_or(0.0);
    let mut worst = 0.0f64;
    let mut used = 0;
    let [n0, n1] = g.nodes();
    for s in states {
        let t2 = s.t + dt;
        if t2 > t_last + 1e-12 {
            break;
        }
        let k = states.partition_point(|r| r.t < t2 - 1e-12).min(states.len() - 1);
        let (lo, hi) = if states[k].t <= t2 + 1e-12 || k == 0 {
            (states[k], states[k])
        } else {
            (states[k - 1], states[k])
        };
        let w = if hi.t > lo.t { (t2 - lo.t) / (hi.t - lo.t) } else { 0.0 };
        for j in 0..n1 {
            for i in 0..n0 {
                let (ti, tj) = if a == 0 {
                    (i as isize + shift_nodes, j as isize)
                } else {
                    (i as isize, j as isize + shift_nodes)
                };
                if ti < 0 || tj < 0 || ti >= n0 as isize || tj >= n1 as isize {
                    continue;
                }
                let idx2 = g.index(ti as usize, tj as usize);
                let later = (1.0 - w) * lo.u[idx2] + w * hi.u[idx2];
                worst = worst.max((later - s.u[g.index(i, j)]).abs());
            }
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientData("record shorter than one period shift".into()));
    }
    Ok(worst)
}

/// Tail band used by [`decay_rate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayOptions {
    pub upper: f64,
    pub floor: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            upper: 0.1,
            floor: 1e-12,
        }
    }
}

/// Least-squares slope of `-ln U` against `z` on the tail `U < 0.1`.
pub fn decay_rate(profile: &WaveProfile) -> Result<f64> {
    decay_rate_with(profile, &DecayOptions::default())
}

pub fn decay_rate_with(profile: &WaveProfile, opts: &DecayOptions) -> Result<f64> {
    // only the part ahead of the front belongs to the tail
    let tail: Vec<&(f64, usize, f64)> = profile
        .samples
        .iter()
        .filter(|s| s.0 > 0.0 && s.2 < opts.upper)
        .collect();
    if tail.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "profile tail has {} samples below {}; 10 are required",
            tail.len(),
            opts.upper
        )));
    }
    let (z, y): (Vec<f64>, Vec<f64>) = tail
        .iter()
        .filter(|s| s.2 >= opts.floor)
        .map(|s| (s.0, s.2.ln()))
        .unzip();
    if z.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} tail samples above the floor {}",
            z.len(),
            opts.floor
        )));
    }
    let f = fit_line(&z, &y).ok_or_else(|| Error::InsufficientData("degenerate tail".into()))?;
    Ok(-f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, GridSpec};

    fn line_domain(x0: f64, x1: f64, h: f64) -> DirectionalDomain {
        DirectionalDomain {
            grid: GridSpec::line(x0, x1, h).unwrap(),
            direction: Direction::axis(1, 0).unwrap(),
            anchor: [0.0; 2],
            oblique_walls: [false; 2],
            behind: -x0,
            ahead: x1,
        }
    }

    fn tanh_state(d: &DirectionalDomain, t: f64, c: f64) -> SimState {
        let u = d
            .grid
            .positions()
            .iter()
            .map(|x| 0.5 * (1.0 - ((x[0] - c * t) / 2.0).tanh()))
            .collect();
        SimState {
            t,
            u,
            grid: d.grid.clone(),
            diagnostics: Default::default(),
        }
    }

    #[test]
    fn synthetic_translating_profile() {
        let d = line_domain(-20.0, 80.0, 0.05);
        let mut trace = FrontTrace::new(d.direction.clone(), 0.5, 0.4);
        for k in 0..=40 {
            let s = tanh_state(&d, k as f64, 2.0);
            trace.push(s.t, front_position(&s.u, &d, 0.5, 0.0).unwrap());
        }
        let f = trace.fit(FitModel::Linear).unwrap();
        assert!((f.speed - 2.0).abs() < 1e-3, "{}", f.speed);
    }

    #[test]
    fn stationary_profile_has_zero_speed() {
        let d = line_domain(-20.0, 20.0, 0.1);
        let s = tanh_state(&d, 0.0, 0.0);
        let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let m = front_position(&s.u, &d, 0.5, 0.0).unwrap();
        let tr = track_front(&times, &vec![m; 20], d.direction.clone(), 0.5, FitModel::Linear).unwrap();
        assert!(tr.speed().unwrap().abs() < 1e-6);
        assert!(m.abs() < 1e-3);
    }

    #[test]
    fn log_corrected_fit_recovers_coefficients() {
        let t: Vec<f64> = (1..=100).map(|k| k as f64 * 0.4).collect();
        let m: Vec<f64> = t.iter().map(|t| 2.0 * t - 1.5 * t.ln() + 3.0).collect();
        let tr = track_front(&t, &m, Direction::axis(1, 0).unwrap(), 0.5, FitModel::LogCorrected).unwrap();
        let f = tr.fit.unwrap();
        assert!((f.speed - 2.0).abs() < 1e-9 && (f.log_coefficient + 1.5).abs() < 1e-8);
        let lin = track_front(&t, &m, Direction::axis(1, 0).unwrap(), 0.5, FitModel::Linear).unwrap();
        assert!(lin.speed().unwrap() < 1.98);
    }

    #[test]
    fn too_few_crossings_is_an_error() {
        let err = track_front(&[0.0, 1.0], &[0.0, 1.0], Direction::axis(1, 0).unwrap(), 0.5, FitModel::Linear)
            .unwrap_err();
        assert!(err.to_string().contains("no level crossing"));
    }

    #[test]
    fn front_position_in_two_dimensions() {
        let cell = PeriodicCell::unit(2).unwrap();
        let n = Direction::from_angle(std::f64::consts::FRAC_PI_4);
        let d = DirectionalDomain::build(&cell, n.clone(), 0.125, 5.0, 10.0, 3.0).unwrap();
        assert!(matches!(d.grid.boundary(1), Boundary::ShearPeriodic { .. } | Boundary::Periodic)
            || matches!(d.grid.boundary(0), Boundary::ShearPeriodic { .. }));
        let u: Vec<f64> = d
            .grid
            .positions()
            .iter()
            .map(|&x| 0.5 * (1.0 - ((n.dot(x) - 2.3) / 1.5).tanh()))
            .collect();
        let m = front_position(&u, &d, 0.5, 0.0).unwrap();
        assert!((m - 2.3).abs() < 0.01, "{m}");
    }

    #[test]
    fn synthetic_profile_has_exact_pulsating_relation() {
        let d = line_domain(-20.0, 80.0, 0.0625);
        let states: Vec<SimState> = (0..=160).map(|k| tanh_state(&d, k as f64 * 0.125, 2.0)).collect();
        let times: Vec<f64> = states.iter().map(|s| s.t).collect();
        let pos: Vec<f64> = states.iter().map(|s| front_position(&s.u, &d, 0.5, 0.0).unwrap()).collect();
        let trace = track_front(&times, &pos, d.direction.clone(), 0.5, FitModel::Linear).unwrap();
        let cell = PeriodicCell::unit(1).unwrap();
        let p = extract_profile(&states, &d, &trace, &cell).unwrap();
        // L/c = 0.5 is a multiple of the record spacing, so the relation is exact
        assert!(p.pulsating_residual <= 1e-10, "{}", p.pulsating_residual);
        assert!(p.monotonicity_violation <= 1e-3);
        assert!(p.z_minus.is_some() && p.z_plus.is_some());
    }

    #[test]
    fn decay_of_synthetic_exponential_tail() {
        let samples: Vec<(f64, usize, f64)> = (0..200).map(|k| (k as f64 * 0.1, 0, (-(k as f64) * 0.1).exp())).collect();
        let p = WaveProfile {
            direction: Direction::axis(1, 0).unwrap(),
            speed: 1.0,
            shift: 0.0,
            bin_width: 0.1,
            x_bins: 1,
            samples,
            pulsating_residual: 0.0,
            monotonicity_violation: 0.0,
            z_plus: None,
            z_minus: None,
        };
        assert!((decay_rate(&p).unwrap() - 1.0).abs() < 1e-3);
        let mut short = p.clone();
        short.samples.truncate(30);
        assert!(decay_rate(&short).is_err());
    }
}
