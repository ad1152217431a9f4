use crate::config::*;
use crate::report::{line_plot, num, opt, polar_plot, OutputDir, Series, Table};
use frontspeed_core::eigen::{linear_speed, principal_eigenpair_with, EigenOperatorSpec};
use frontspeed_core::fronts::{decay_rate, extract_profile, measure_speed_recorded, speed_domain, FrontTrace};
use frontspeed_core::io::write_snapshot;
use frontspeed_core::model::{sample_directions, Direction, PeriodicMedium};
use frontspeed_core::nonlinearity::Nonlinearity;
use frontspeed_core::studies::{
    continuity_report, ignition_approx_study, scan_directions, speed_in_direction, SpeedCurve, SpeedSettings,
};
use frontspeed_core::validate::{
    check_supersolution, choose_lambda, sampling_grid, supersolution_residual_at, uniform_spreading_check,
    SupersolutionSpec,
};
use frontspeed_core::Error;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: unreadable or invalid configuration.
    Config(String),
    /// Exit 3: a solver, simulation or check failed.
    Numerical(String),
    /// Exit 1: output could not be written.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else if matches!(e, Error::Io { .. } | Error::Format(_)) {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// What a finished command reports back to the driver.
pub struct Outcome {
    pub inputs: Vec<(String, String)>,
    /// A completed run whose verdict is negative (exit 3 after the manifest).
    pub failure: Option<String>,
    pub summary: String,
}

fn inputs(medium: &PeriodicMedium, nl: &Nonlinearity) -> Vec<(String, String)> {
    vec![
        ("medium".into(), medium.hash()),
        ("nonlinearity".into(), nl.descriptor().to_string()),
    ]
}

fn angle(n: &Direction) -> f64 {
    n.angle()
}

fn write_trace(out: &mut OutputDir, name: &str, trace: &FrontTrace) -> Result<(), CliError> {
    let mut t = Table::new(&["t", "position", "level"]);
    for (tt, m) in trace.times.iter().zip(&trace.positions) {
        t.row([num(*tt), num(*m), num(trace.level)]);
    }
    out.write(name, &t.into_bytes())?;
    Ok(())
}

fn trace_svg(trace: &FrontTrace) -> String {
    let mut series = vec![Series {
        label: format!("front (level {})", trace.level),
        points: trace.times.iter().copied().zip(trace.positions.iter().copied()).collect(),
        scatter: false,
    }];
    if let Some(fit) = &trace.fit {
        let (a, b) = fit.window;
        let pts = (0..=50)
            .map(|k| a + (b - a) * k as f64 / 50.0)
            .filter(|t| *t > 0.0)
            .map(|t| (t, fit.position(t)))
            .collect();
        series.push(Series {
            label: format!("fit c = {:.4}", fit.speed),
            points: pts,
            scatter: false,
        });
    }
    line_plot("Front position", "t", "x.n", &series)
}

pub fn eigen(cfg: &EigenConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (medium, nl) = build_problem(&cfg.medium, &cfg.nonlinearity)?;
    let opts = cfg.eigen.options(&medium);
    let dirs = sample_directions(medium.dim(), cfg.directions);
    let results: Vec<_> = dirs
        .par_iter()
        .map(|n| linear_speed(&medium, &nl, n.clone(), &opts))
        .collect();
    let mut table = Table::new(&["angle", "lambda_min", "c_lin", "mu0_residual"]);
    let mut samples = Table::new(&["n_angle", "lambda", "mu0", "residual", "iterations"]);
    let v = nl.linearization_at_zero(&opts.resolution)?;
    let mut c_values = Vec::new();
    for (n, r) in dirs.iter().zip(results) {
        let r = r?;
        table.row([num(angle(n)), num(r.lambda_min), num(r.c_lin), num(r.residual)]);
        c_values.push(r.c_lin);
        let mut lams = cfg.lambdas.clone();
        lams.push(r.lambda_min);
        for lam in lams {
            let spec = EigenOperatorSpec::new(&medium, n.clone(), lam, &opts.resolution).with_potential(&v);
            let e = principal_eigenpair_with(&spec, &opts.solver, None)?;
            samples.row([num(angle(n)), num(lam), num(e.mu0), num(e.residual), e.iterations.to_string()]);
        }
    }
    out.write("eigen.csv", &table.into_bytes())?;
    out.write("eigen_samples.csv", &samples.into_bytes())?;
    let lo = c_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome {
        inputs: inputs(&medium, &nl),
        failure: None,
        summary: format!("{} directions, c_lin in [{lo:.6}, {hi:.6}]", dirs.len()),
    })
}

#[derive(Serialize)]
struct SpeedSummary<'a> {
    angle: f64,
    speed: f64,
    uncertainty: f64,
    fit: &'a Option<frontspeed_core::fronts::SpeedFit>,
    nodes: usize,
    dt: f64,
}

pub fn speed(cfg: &SpeedConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (medium, nl) = build_problem(&cfg.medium, &cfg.nonlinearity)?;
    let n = direction_or_default(&cfg.direction, medium.dim())?;
    let record = cfg.snapshot.then_some(cfg.run.t_end);
    let (states, m) = measure_speed_recorded(&medium, &nl, &n, &cfg.run, record)?;
    let fit = m.trace.fit.as_ref().expect("measured traces are fitted");
    let mut table = Table::new(&[
        "angle",
        "speed",
        "uncertainty",
        "fit_model",
        "intercept",
        "log_coefficient",
        "rms",
        "window_start",
        "window_end",
        "samples",
        "nodes",
        "dt",
    ]);
    table.row([
        num(angle(&n)),
        num(m.speed),
        num(m.uncertainty),
        serde_json::to_value(fit.model).unwrap().as_str().unwrap_or("").to_string(),
        num(fit.intercept),
        num(fit.log_coefficient),
        num(fit.rms),
        num(fit.window.0),
        num(fit.window.1),
        fit.samples.to_string(),
        m.nodes.to_string(),
        num(m.dt),
    ]);
    out.write("speed.csv", &table.into_bytes())?;
    write_trace(out, "trace.csv", &m.trace)?;
    out.write("trace.svg", trace_svg(&m.trace).as_bytes())?;
    out.write_json(
        "speed.json",
        &SpeedSummary {
            angle: angle(&n),
            speed: m.speed,
            uncertainty: m.uncertainty,
            fit: &m.trace.fit,
            nodes: m.nodes,
            dt: m.dt,
        },
    )?;
    if let Some(last) = states.last() {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, last, &medium.hash())?;
        out.write("final.snap", &buf)?;
    }
    Ok(Outcome {
        inputs: inputs(&medium, &nl),
        failure: None,
        summary: format!("speed {:.6} +/- {:.2e}", m.speed, m.uncertainty),
    })
}

fn curve_table(curve: &SpeedCurve) -> Vec<u8> {
    let mut t = Table::new(&["angle", "c", "method", "uncertainty", "flags"]);
    for e in &curve.entries {
        t.row([num(e.angle), num(e.c), e.method.clone(), num(e.uncertainty), e.flags().to_string()]);
    }
    t.into_bytes()
}

fn curve_series(curve: &SpeedCurve, label: &str) -> Series {
    Series {
        label: label.to_string(),
        points: curve.entries.iter().filter(|e| e.ok()).map(|e| (e.angle, e.c)).collect(),
        scatter: false,
    }
}

fn failed_angles(curve: &SpeedCurve) -> Option<String> {
    let bad: Vec<String> = curve
        .entries
        .iter()
        .filter(|e| !e.ok())
        .map(|e| format!("angle {:.4}: {}", e.angle, e.error.as_deref().unwrap_or("")))
        .collect();
    (!bad.is_empty()).then(|| bad.join("; "))
}

pub fn scan(cfg: &ScanConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (medium, nl) = build_problem(&cfg.medium, &cfg.nonlinearity)?;
    if cfg.refine && medium.dim() != 2 {
        return Err(CliError::Config("refine needs a two-dimensional medium".into()));
    }
    let settings = SpeedSettings {
        eigen: cfg.eigen.options(&medium),
        sim: cfg.run.clone(),
    };
    let curve = scan_directions(&medium, &nl, cfg.method, cfg.samples, &settings)?;
    out.write("scan.csv", &curve_table(&curve))?;
    out.write_json("curve.json", &curve)?;
    let mut series = vec![curve_series(&curve, &format!("{} ({})", cfg.method, cfg.samples))];
    let mut failure = failed_angles(&curve);
    let mut summary = format!("kappa {:.6}, k_sup {:.6}, dc_max {:.3e}", curve.kappa, curve.k_sup, curve.dc_max);
    if cfg.refine {
        let fine = scan_directions(&medium, &nl, cfg.method, 2 * cfg.samples, &settings)?;
        out.write("scan_fine.csv", &curve_table(&fine))?;
        let report = continuity_report(&curve, &fine);
        out.write_json("continuity.json", &report)?;
        series.push(curve_series(&fine, &format!("{} ({})", cfg.method, 2 * cfg.samples)));
        summary.push_str(&format!(", continuity {}", if report.pass { "pass" } else { "FAIL" }));
        if failure.is_none() && !report.pass {
            failure = Some(format!(
                "continuity gate failed: dc_fine {:e} vs dc_coarse {:e}",
                report.dc_fine, report.dc_coarse
            ));
        }
        if let Some(f) = failed_angles(&fine) {
            failure.get_or_insert(f);
        }
    }
    out.write("scan.svg", polar_plot("Directional speed c(n)", &series).as_bytes())?;
    Ok(Outcome {
        inputs: inputs(&medium, &nl),
        failure,
        summary,
    })
}

pub fn approx(cfg: &ApproxConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (medium, nl) = build_problem(&cfg.medium, &cfg.nonlinearity)?;
    let settings = SpeedSettings {
        eigen: cfg.eigen.options(&medium),
        sim: cfg.run.clone(),
    };
    let dirs = sample_directions(medium.dim(), cfg.directions);
    let table = ignition_approx_study(&medium, &nl, &dirs, &cfg.eps, &settings)?;
    let mut t = Table::new(&["eps", "angle", "c", "uncertainty", "reference", "gap", "error"]);
    for row in &table.cells {
        for (k, c) in row.iter().enumerate() {
            t.row([
                num(c.eps),
                num(c.angle),
                num(c.c),
                num(c.uncertainty),
                num(table.reference[k]),
                num(table.reference[k] - c.c),
                c.error.clone().unwrap_or_default(),
            ]);
        }
    }
    out.write("approx.csv", &t.into_bytes())?;
    out.write_json("approx.json", &table)?;
    let mut series: Vec<Series> = table
        .cells
        .iter()
        .map(|row| Series {
            label: format!("eps = {}", row.first().map_or(f64::NAN, |c| c.eps)),
            points: row.iter().map(|c| (c.angle, c.c)).collect(),
            scatter: false,
        })
        .collect();
    series.push(Series {
        label: table.reference_method.clone(),
        points: table.angles.iter().copied().zip(table.reference.iter().copied()).collect(),
        scatter: false,
    });
    out.write("approx.svg", line_plot("Ignition approximation speeds", "angle", "c", &series).as_bytes())?;
    let failure = if table.failures > 0 {
        Some(format!("{} cells failed", table.failures))
    } else if !table.violations.is_empty() {
        Some(format!("{} monotonicity violations", table.violations.len()))
    } else {
        None
    };
    let gaps: Vec<String> = table.sup_gap.iter().map(|g| format!("{g:.4}")).collect();
    Ok(Outcome {
        inputs: inputs(&medium, &nl),
        failure,
        summary: format!("sup gaps [{}], decreasing {}", gaps.join(", "), table.gap_decreasing),
    })
}

#[derive(Serialize)]
struct SupersolutionOutput {
    spec: SupersolutionSpec,
    reports: Vec<frontspeed_core::validate::SupersolutionReport>,
    pass: bool,
}

pub fn validate(cfg: &ValidateConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    if cfg.spreading.is_none() && cfg.supersolution.is_none() {
        return Err(CliError::Config(
            "at least one of `spreading` and `supersolution` is required".into(),
        ));
    }
    let (medium, nl) = build_problem(&cfg.medium, &cfg.nonlinearity)?;
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    if let Some(s) = &cfg.spreading {
        let dirs = sample_directions(medium.dim(), s.directions);
        let refs = match &s.references {
            Some(r) if r.len() != dirs.len() => {
                return Err(CliError::Config(format!(
                    "spreading.references has {} entries for {} directions",
                    r.len(),
                    dirs.len()
                )))
            }
            Some(r) => r.clone(),
            None => {
                let settings = SpeedSettings {
                    eigen: s.eigen.options(&medium),
                    sim: s.run.clone(),
                };
                let r: Result<Vec<f64>, Error> = dirs
                    .par_iter()
                    .map(|n| speed_in_direction(&medium, &nl, n, s.reference_method, &settings).map(|p| p.0))
                    .collect();
                r?
            }
        };
        let report = uniform_spreading_check(&medium, &nl, &dirs, &refs, s.alpha, s.delta, &s.check)?;
        let mut t = Table::new(&["angle", "c_ref", "tau", "tau_upper", "tau_lower", "inconclusive", "error"]);
        for e in &report.entries {
            t.row([
                num(e.angle),
                num(e.c_ref),
                opt(e.tau),
                opt(e.tau_upper),
                opt(e.tau_lower),
                e.inconclusive.to_string(),
                e.error.clone().unwrap_or_default(),
            ]);
        }
        out.write("spreading.csv", &t.into_bytes())?;
        out.write_json("spreading.json", &report)?;
        let series = [Series {
            label: format!("alpha {}, delta {}", s.alpha, s.delta),
            points: report.entries.iter().filter_map(|e| e.tau.map(|t| (e.angle, t))).collect(),
            scatter: false,
        }];
        out.write("spreading.svg", line_plot("Spreading time tau(n)", "angle", "tau", &series).as_bytes())?;
        summary.push(format!("spreading ratio {:.4} ({})", report.ratio, if report.pass { "pass" } else { "FAIL" }));
        if !report.pass {
            failures.push(format!("uniform spreading failed (ratio {})", report.ratio));
        }
    }
    if let Some(s) = &cfg.supersolution {
        let lambda = match s.lambda {
            Some(l) => l,
            None => choose_lambda(&medium, &nl)?,
        };
        let spec = SupersolutionSpec::new(&medium, &nl, lambda, s.c_init);
        let grid = sampling_grid(medium.dim(), s.extent, s.h)?;
        let dirs = sample_directions(medium.dim(), s.directions);
        let reports: Result<Vec<_>, Error> = dirs
            .par_iter()
            .map(|n| check_supersolution(&spec, &medium, &nl, n, &grid, &s.times))
            .collect();
        let reports = reports?;
        let pass = reports.iter().all(|r| r.pass);
        // residual map at the first sampled time, before v saturates
        let t_map = s.times.first().copied().unwrap_or(0.0);
        let mut map = Table::new(&["angle", "t", "x", "y", "v", "residual"]);
        let positions = grid.positions();
        for n in &dirs {
            for &x in &positions {
                if let Some(r) = supersolution_residual_at(&spec, &medium, &nl, n, x, t_map) {
                    map.row([num(angle(n)), num(t_map), num(x[0]), num(x[1]), num(r.v), num(r.residual)]);
                }
            }
        }
        out.write("supersolution_residuals.csv", &map.into_bytes())?;
        out.write_json("supersolution.json", &SupersolutionOutput { spec, reports, pass })?;
        summary.push(format!("supersolution lambda {lambda:.4} ({})", if pass { "pass" } else { "FAIL" }));
        if !pass {
            failures.push("supersolution residual negative".into());
        }
    }
    Ok(Outcome {
        inputs: inputs(&medium, &nl),
        failure: (!failures.is_empty()).then(|| failures.join("; ")),
        summary: summary.join(", "),
    })
}

#[derive(Serialize)]
struct ProfileSummary {
    angle: f64,
    speed: f64,
    uncertainty: f64,
    shift: f64,
    pulsating_residual: f64,
    monotonicity_violation: f64,
    z_plus: Option<f64>,
    z_minus: Option<f64>,
    decay_rate: Option<f64>,
    decay_error: Option<String>,
}

pub fn profile(cfg: &ProfileConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (medium, nl) = build_problem(&cfg.medium, &cfg.nonlinearity)?;
    let n = direction_or_default(&cfg.direction, medium.dim())?;
    if !n.is_axis_aligned() {
        return Err(CliError::Config("profile extraction needs an axis-aligned direction".into()));
    }
    if !(cfg.record_every > 0.0) {
        return Err(CliError::Config("record_every must be positive".into()));
    }
    let (states, m) = measure_speed_recorded(&medium, &nl, &n, &cfg.run, Some(cfg.record_every))?;
    let domain = speed_domain(&medium, &nl, &n, &cfg.run)?;
    let p = extract_profile(&states, &domain, &m.trace, medium.cell())?;
    let mut t = Table::new(&["z", "x_bin", "U"]);
    for (z, b, u) in &p.samples {
        t.row([num(*z), b.to_string(), num(*u)]);
    }
    out.write("profile.csv", &t.into_bytes())?;
    write_trace(out, "trace.csv", &m.trace)?;
    let decay = decay_rate(&p);
    out.write_json(
        "profile.json",
        &ProfileSummary {
            angle: angle(&n),
            speed: p.speed,
            uncertainty: m.uncertainty,
            shift: p.shift,
            pulsating_residual: p.pulsating_residual,
            monotonicity_violation: p.monotonicity_violation,
            z_plus: p.z_plus,
            z_minus: p.z_minus,
            decay_rate: decay.as_ref().ok().copied(),
            decay_error: decay.as_ref().err().map(|e| e.to_string()),
        },
    )?;
    let series = [Series {
        label: format!("U(z, x), {} bins", p.x_bins),
        points: p.samples.iter().map(|(z, _, u)| (*z, *u)).collect(),
        scatter: true,
    }];
    out.write("profile.svg", line_plot("Wave profile", "z", "U", &series).as_bytes())?;
    Ok(Outcome {
        inputs: inputs(&medium, &nl),
        failure: None,
        summary: format!("speed {:.6}, pulsating residual {:.3e}", p.speed, p.pulsating_residual),
    })
}
