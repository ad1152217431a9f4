//! Direction scans `n -> c(n)`, continuity reports and ignition-approximation
//! convergence tables.

use crate::eigen::{linear_speed, LinearSpeedOptions};
use crate::error::{invalid, Result};
use crate::fronts::{measure_speed, SpeedRunConfig};
use crate::model::{sample_directions, Direction, PeriodicMedium};
use crate::nonlinearity::{Nonlinearity, NonlinearityKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedMethod {
    EigenLin,
    SimDirect,
    SimIgnitionApprox { eps: f64 },
}

impl fmt::Display for SpeedMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedMethod::EigenLin => write!(f, "eigen_lin"),
            SpeedMethod::SimDirect => write!(f, "sim_direct"),
            SpeedMethod::SimIgnitionApprox { eps } => write!(f, "sim_ignition_approx({eps})"),
        }
    }
}

/// Numerical settings shared by all speed methods.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedSettings {
    pub eigen: LinearSpeedOptions,
    pub sim: SpeedRunConfig,
}

impl SpeedSettings {
    pub fn for_medium(medium: &PeriodicMedium) -> Self {
        let res = if medium.dim() == 1 { vec![64] } else { vec![32, 32] };
        Self {
            eigen: LinearSpeedOptions::new(&res),
            sim: SpeedRunConfig::default(),
        }
    }
}

/// Speed in one direction by `method`, with its uncertainty.
pub fn speed_in_direction(
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    n: &Direction,
    method: SpeedMethod,
    settings: &SpeedSettings,
) -> Result<(f64, f64)> {
    match method {
        SpeedMethod::EigenLin => {
            let r = linear_speed(medium, nl, n.clone(), &settings.eigen)?;
            // golden-section bracket width bounds the error of the minimum value
            Ok((r.c_lin, 0.0))
        }
        SpeedMethod::SimDirect => {
            let r = measure_speed(medium, nl, n, &settings.sim)?;
            Ok((r.speed, r.uncertainty))
        }
        SpeedMethod::SimIgnitionApprox { eps } => {
            let approx = Nonlinearity::ignition_approx(nl, eps)?;
            let r = measure_speed(medium, &approx, n, &settings.sim)?;
            Ok((r.speed, r.uncertainty))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedEntry {
    pub angle: f64,
    pub direction: Direction,
    /// `NaN` when the computation failed (see `error`).
    pub c: f64,
    pub method: String,
    pub uncertainty: f64,
    pub error: Option<String>,
}

impl SpeedEntry {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn flags(&self) -> &str {
        if self.ok() {
            "ok"
        } else {
            "failed"
        }
    }
}

/// Sampled `n -> c(n)` with provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedCurve {
    pub entries: Vec<SpeedEntry>,
    pub method: String,
    pub medium_hash: String,
    pub nonlinearity: String,
    /// `min c` over successful entries.
    pub kappa: f64,
    /// `max c` over successful entries.
    pub k_sup: f64,
    /// Largest jump between neighbouring angles (cyclic).
    pub dc_max: f64,
    pub max_uncertainty: f64,
}

impl SpeedCurve {
    /// Builds a curve from entries, sorting by angle and computing bounds.
    pub fn from_entries(mut entries: Vec<SpeedEntry>, method: String, medium_hash: String, nonlinearity: String) -> Self {
        entries.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        entries.dedup_by(|a, b| (a.angle - b.angle).abs() < 1e-12);
        let ok: Vec<&SpeedEntry> = entries.iter().filter(|e| e.ok()).collect();
        let kappa = ok.iter().map(|e| e.c).fold(f64::INFINITY, f64::min);
        let k_sup = ok.iter().map(|e| e.c).fold(f64::NEG_INFINITY, f64::max);
        let max_uncertainty = ok.iter().map(|e| e.uncertainty).fold(0.0, f64::max);
        let dc_max = max_adjacent_jump(&entries);
        Self {
            entries,
            method,
            medium_hash,
            nonlinearity,
            kappa,
            k_sup,
            dc_max,
            max_uncertainty,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.ok())
    }

    /// Speed at the sampled angle closest to `angle`.
    pub fn at_angle(&self, angle: f64) -> Option<&SpeedEntry> {
        let d = |a: f64| {
            let x = (a - angle).rem_euclid(std::f64::consts::TAU);
            x.min(std::f64::consts::TAU - x)
        };
        self.entries.iter().min_by(|a, b| d(a.angle).total_cmp(&d(b.angle)))
    }
}

fn max_adjacent_jump(entries: &[SpeedEntry]) -> f64 {
    let n = entries.len();
    if n < 2 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for k in 0..n {
        let (a, b) = (&entries[k], &entries[(k + 1) % n]);
        if a.ok() && b.ok() {
            worst = worst.max((a.c - b.c).abs());
        } else {
            worst = f64::INFINITY;
        }
    }
    worst
}

/// Evaluates `method` at `n_samples` equally spaced angles (both unit
/// directions in 1D). Per-direction failures are recorded in the entries.
pub fn scan_directions(
    medium: &PeriodicMedium,
    nl: &Nonlinearity,
    method: SpeedMethod,
    n_samples: usize,
    settings: &SpeedSettings,
) -> Result<SpeedCurve> {
    if medium.dim() == 2 && (n_samples < 4 || !n_samples.is_power_of_two()) {
        return Err(invalid(format!(
            "direction count must be a power of two >= 4, got {n_samples}"
        )));
    }
    let dirs = sample_directions(medium.dim(), n_samples);
    let entries: Vec<SpeedEntry> = dirs
        .par_iter()
        .map(|n| {
            let r = speed_in_direction(medium, nl, n, method, settings);
            let (c, uncertainty, error) = match r {
                Ok((c, u)) => (c, u, None),
                Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
            };
            SpeedEntry {
                angle: n.angle(),
                direction: n.clone(),
                c,
                method: method.to_string(),
                uncertainty,
                error,
            }
        })
        .collect();
    Ok(SpeedCurve::from_entries(
        entries,
        method.to_string(),
        medium.hash(),
        nl.descriptor().to_string(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub dc_coarse: f64,
    pub dc_fine: f64,
    pub max_uncertainty: f64,
    /// Fine angles contain the coarse ones.
    pub nested: bool,
    pub pass: bool,
}

/// Modulus-of-continuity contraction test:
/// `dc(fine) <= 0.75 dc(coarse) + 2 max uncertainty`.
pub fn continuity_report(coarse: &SpeedCurve, fine: &SpeedCurve) -> ContinuityReport {
    let nested = fine.entries.len() == 2 * coarse.entries.len()
        && coarse
            .entries
            .iter()
            .enumerate()
            .all(|(k, e)| (fine.entries[2 * k].angle - e.angle).abs() < 1e-9);
    let max_uncertainty = coarse.max_uncertainty.max(fine.max_uncertainty);
    let pass = nested
        && coarse.dc_max.is_finite()
        && fine.dc_max <= 0.75 * coarse.dc_max + 2.0 * max_uncertainty + 1e-12;
    ContinuityReport {
        dc_coarse: coarse.dc_max,
        dc_fine: fine.dc_max,
        max_uncertainty,
        nested,
        pass,
    }
}

/// One `(n, eps)` cell of the convergence table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxCell {
    pub angle: f64,
    pub eps: f64,
    pub c: f64,
    pub uncertainty: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub angle: f64,
    /// The smaller `eps` whose speed fell below the larger one's.
    pub eps: f64,
    pub eps_prev: f64,
    pub amount: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxTable {
    pub eps: Vec<f64>,
    pub angles: Vec<f64>,
    /// Reference speeds per angle.
    pub reference: Vec<f64>,
    pub reference_method: String,
    /// `cells[e][k]` for `eps[e]` and `angles[k]`.
    pub cells: Vec<Vec<ApproxCell>>,
    pub violations: Vec<MonotonicityViolation>,
    /// `max_n |c(n) - c_eps(n)|` per eps.
    pub sup_gap: Vec<f64>,
    /// `max_n (c_eps(n) - c(n) - 2 uncertainty)`, at most zero when every
    /// approximation speed stays below its reference.
    pub max_excess: f64,
    pub gap_decreasing: bool,
    pub failures: usize,
}

/// Measures `c_eps(n)` for every `n` and `eps` and compares with the
/// reference speed: `eigen_lin` for KPP bases, direct simulation otherwise.
pub fn ignition_approx_study(
    medium: &PeriodicMedium,
    base: &Nonlinearity,
    directions: &[Direction],
    eps_list: &[f64],
    settings: &SpeedSettings,
) -> Result<ApproxTable> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps_list must be nonempty and strictly decreasing"));
    }
    if !base.kind().is_monostable() {
        return Err(invalid("the base nonlinearity must be monostable"));
    }
    let ref_method = if base.kind() == NonlinearityKind::KppMonostable {
        SpeedMethod::EigenLin
    } else {
        SpeedMethod::SimDirect
    };
    let reference: Vec<f64> = directions
        .par_iter()
        .map(|n| speed_in_direction(medium, base, n, ref_method, settings).map(|r| r.0))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..eps_list.len())
        .flat_map(|e| (0..directions.len()).map(move |k| (e, k)))
        .collect();
    let results: Vec<ApproxCell> = jobs
        .par_iter()
        .map(|&(e, k)| {
            let eps = eps_list[e];
            let n = &directions[k];
            let r = speed_in_direction(medium, base, n, SpeedMethod::SimIgnitionApprox { eps }, settings);
            let (c, uncertainty, error) = match r {
                Ok((c, u)) => (c, u, None),
                Err(err) => (f64::NAN, f64::NAN, Some(err.to_string())),
            };
            ApproxCell {
                angle: n.angle(),
                eps,
                c,
                uncertainty,
                error,
            }
        })
        .collect();
    let mut cells: Vec<Vec<ApproxCell>> = vec![Vec::new(); eps_list.len()];
    for (cell, &(e, _)) in results.into_iter().zip(&jobs) {
        cells[e].push(cell);
    }

    let mut violations = Vec::new();
    for e in 1..eps_list.len() {
        for k in 0..directions.len() {
            let (prev, cur) = (&cells[e - 1][k], &cells[e][k]);
            if prev.error.is_some() || cur.error.is_some() {
                continue;
            }
            let tol = 2.0 * (prev.uncertainty + cur.uncertainty);
            if cur.c < prev.c - tol {
                violations.push(MonotonicityViolation {
                    angle: cur.angle,
                    eps: cur.eps,
                    eps_prev: prev.eps,
                    amount: prev.c - cur.c,
                    tolerance: tol,
                });
            }
        }
    }
    let sup_gap: Vec<f64> = cells
        .iter()
        .map(|row| {
            row.iter()
                .zip(&reference)
                .map(|(c, r)| if c.error.is_some() { f64::INFINITY } else { (r - c.c).abs() })
                .fold(0.0, f64::max)
        })
        .collect();
    let max_excess = cells
        .iter()
        .flatten()
        .zip(reference.iter().cycle())
        .filter(|(c, _)| c.error.is_none())
        .map(|(c, r)| c.c - r - 2.0 * c.uncertainty)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap_decreasing = sup_gap.windows(2).all(|w| w[1] < w[0]);
    let failures = cells.iter().flatten().filter(|c| c.error.is_some()).count();
    Ok(ApproxTable {
        eps: eps_list.to_vec(),
        angles: directions.iter().map(|n| n.angle()).collect(),
        reference,
        reference_method: ref_method.to_string(),
        cells,
        violations,
        sup_gap,
        max_excess,
        gap_decreasing,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PeriodicCell, Sym2};

    fn entry(angle: f64, c: f64) -> SpeedEntry {
        SpeedEntry {
            angle,
            direction: Direction::from_angle(angle),
            c,
            method: "eigen_lin".into(),
            uncertainty: 0.0,
            error: None,
        }
    }

    fn curve(cs: &[f64]) -> SpeedCurve {
        let n = cs.len();
        let entries = cs
            .iter()
            .enumerate()
            .map(|(k, &c)| entry(std::f64::consts::TAU * k as f64 / n as f64, c))
            .collect();
        SpeedCurve::from_entries(entries, "eigen_lin".into(), String::new(), String::new())
    }

    #[test]
    fn constant_curve_is_continuous() {
        let r = continuity_report(&curve(&[2.0; 8]), &curve(&[2.0; 16]));
        assert!(r.pass && r.dc_coarse == 0.0 && r.dc_fine == 0.0);
    }

    #[test]
    fn discontinuous_curve_fails() {
        let coarse: Vec<f64> = (0..8).map(|k| if k < 4 { 1.0 } else { 2.0 }).collect();
        let fine: Vec<f64> = (0..16).map(|k| if k < 8 { 1.0 } else { 2.0 }).collect();
        let r = continuity_report(&curve(&coarse), &curve(&fine));
        assert!(!r.pass);
    }

    #[test]
    fn smooth_curve_contracts() {
        let f = |k: usize, n: usize| (std::f64::consts::TAU * k as f64 / n as f64).cos();
        let coarse: Vec<f64> = (0..16).map(|k| f(k, 16)).collect();
        let fine: Vec<f64> = (0..32).map(|k| f(k, 32)).collect();
        assert!(continuity_report(&curve(&coarse), &curve(&fine)).pass);
    }

    #[test]
    fn isotropic_eigen_scan() {
        let cell = PeriodicCell::unit(2).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let nl = Nonlinearity::kpp_constant(cell, 1.0).unwrap();
        let s = SpeedSettings {
            eigen: LinearSpeedOptions::new(&[16, 16]),
            sim: SpeedRunConfig::default(),
        };
        let c = scan_directions(&m, &nl, SpeedMethod::EigenLin, 8, &s).unwrap();
        assert_eq!(c.entries.len(), 8);
        assert!(c.entries.iter().all(|e| (e.c - 2.0).abs() < 1e-3));
        assert!(c.kappa > 0.0 && c.k_sup.is_finite());
        assert!(scan_directions(&m, &nl, SpeedMethod::EigenLin, 6, &s).is_err());
    }

    #[test]
    fn anisotropic_diagonal_speed_lies_between() {
        let cell = PeriodicCell::unit(2).unwrap();
        let m = PeriodicMedium::constant(cell, Sym2::diag(1.0, 4.0)).unwrap();
        let nl = Nonlinearity::kpp_constant(cell, 1.0).unwrap();
        let s = SpeedSettings {
            eigen: LinearSpeedOptions::new(&[16, 16]),
            sim: SpeedRunConfig::default(),
        };
        let (c, _) = speed_in_direction(&m, &nl, &Direction::from_angle(std::f64::consts::FRAC_PI_4), SpeedMethod::EigenLin, &s)
            .unwrap();
        // 2 sqrt(n.An) with n.An = 5/2
        assert!((c - 2.0 * 2.5f64.sqrt()).abs() < 1e-3, "{c}");
    }

    #[test]
    fn bad_eps_surfaces_in_the_table() {
        let cell = PeriodicCell::unit(1).unwrap();
        let m = PeriodicMedium::homogeneous(cell).unwrap();
        let nl = Nonlinearity::kpp_constant(cell, 1.0).unwrap();
        let mut s = SpeedSettings::for_medium(&m);
        s.sim.t_end = 4.0;
        s.sim.h = 0.0625;
        let t = ignition_approx_study(&m, &nl, &[Direction::axis(1, 0).unwrap()], &[0.7, 0.2], &s).unwrap();
        assert_eq!(t.failures, 1);
        assert!(t.cells[0][0].error.as_deref().unwrap().contains("eps"));
        assert!(ignition_approx_study(&m, &nl, &[Direction::axis(1, 0).unwrap()], &[0.1, 0.2], &s).is_err());
    }
}
