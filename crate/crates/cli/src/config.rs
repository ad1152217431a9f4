//! JSON run configurations, one struct per subcommand. Unknown keys are
//! rejected so typos surface as config errors.

use frontspeed_core::eigen::LinearSpeedOptions;
use frontspeed_core::fronts::SpeedRunConfig;
use frontspeed_core::model::{Direction, MediumSpec, PeriodicMedium};
use frontspeed_core::nonlinearity::{Nonlinearity, NonlinearitySpec};
use frontspeed_core::studies::{SpeedMethod, SpeedSettings};
use frontspeed_core::validate::SpreadingConfig;
use serde::{Deserialize, Serialize};

/// Builds the medium and the nonlinearity sampled on the medium resolution.
pub fn build_problem(
    medium: &MediumSpec,
    nonlinearity: &NonlinearitySpec,
) -> frontspeed_core::Result<(PeriodicMedium, Nonlinearity)> {
    let m = medium.build()?;
    let nl = nonlinearity.build(*m.cell(), &medium.resolution())?;
    Ok((m, nl))
}

/// Eigen solver knobs; unset fields keep the library defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenSettings {
    /// Cell resolution of the eigenproblem (64 in 1D, 32x32 in 2D).
    pub resolution: Option<Vec<usize>>,
    pub bracket: Option<[f64; 2]>,
    pub xtol: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
}

impl EigenSettings {
    pub fn options(&self, medium: &PeriodicMedium) -> LinearSpeedOptions {
        let mut opts = SpeedSettings::for_medium(medium).eigen;
        if let Some(r) = &self.resolution {
            opts.resolution = r.clone();
        }
        if let Some([a, b]) = self.bracket {
            opts.bracket = (a, b);
        }
        if let Some(x) = self.xtol {
            opts.xtol = x;
        }
        if let Some(m) = self.max_iters {
            opts.solver.max_iters = m;
        }
        if let Some(t) = self.tol {
            opts.solver.tol = t;
        }
        opts
    }
}

fn default_eigen_directions() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub medium: MediumSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default = "default_eigen_directions")]
    pub directions: usize,
    #[serde(default)]
    pub eigen: EigenSettings,
    /// Extra `lambda` values at which `mu0(n, lambda)` is tabulated.
    #[serde(default)]
    pub lambdas: Vec<f64>,
}

/// Direction as components; defaults to `e1`.
pub fn direction_or_default(components: &Option<Vec<f64>>, dim: usize) -> frontspeed_core::Result<Direction> {
    match components {
        Some(c) => {
            if c.len() != dim {
                return Err(frontspeed_core::Error::InvalidParameter(format!(
                    "direction has {} components but the cell is {dim}-dimensional",
                    c.len()
                )));
            }
            Direction::new(c)
        }
        None => Direction::axis(dim, 0),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedConfig {
    pub medium: MediumSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub run: SpeedRunConfig,
    /// Write the final state as a binary snapshot.
    #[serde(default)]
    pub snapshot: bool,
}

fn default_scan_samples() -> usize {
    16
}

fn default_method() -> SpeedMethod {
    SpeedMethod::EigenLin
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub medium: MediumSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default = "default_method")]
    pub method: SpeedMethod,
    #[serde(default = "default_scan_samples")]
    pub samples: usize,
    /// Also scan at twice the sample count and report continuity.
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub eigen: EigenSettings,
    #[serde(default)]
    pub run: SpeedRunConfig,
}

fn default_eps() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

fn default_directions() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxConfig {
    pub medium: MediumSpec,
    /// Monostable base of the approximation family.
    pub nonlinearity: NonlinearitySpec,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default)]
    pub eigen: EigenSettings,
    #[serde(default)]
    pub run: SpeedRunConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadingSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Explicit reference speeds, one per direction; computed with
    /// `reference_method` when absent.
    #[serde(default)]
    pub references: Option<Vec<f64>>,
    #[serde(default = "default_method")]
    pub reference_method: SpeedMethod,
    #[serde(default)]
    pub eigen: EigenSettings,
    #[serde(default)]
    pub run: SpeedRunConfig,
    #[serde(default)]
    pub check: SpreadingConfig,
}

fn default_alpha() -> f64 {
    0.4
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupersolutionSection {
    #[serde(default = "default_super_directions")]
    pub directions: usize,
    /// `lambda` override; chosen automatically when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Front edge `C` of the initial datum the supersolution must dominate.
    #[serde(default)]
    pub c_init: f64,
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_super_h")]
    pub h: f64,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
}

fn default_super_directions() -> usize {
    16
}

fn default_extent() -> f64 {
    4.0
}

fn default_super_h() -> f64 {
    0.1
}

fn default_times() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    pub medium: MediumSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub spreading: Option<SpreadingSection>,
    #[serde(default)]
    pub supersolution: Option<SupersolutionSection>,
}

fn default_record_every() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub medium: MediumSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub run: SpeedRunConfig,
    #[serde(default = "default_record_every")]
    pub record_every: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_eigen_config_fills_defaults() {
        let c: EigenConfig = serde_json::from_str(
            r#"{"medium":{"cell":[1.0,1.0]},"nonlinearity":{"kind":"kpp"}}"#,
        )
        .unwrap();
        assert_eq!(c.directions, 8);
        assert!(c.lambdas.is_empty());
    }

    #[test]
    fn unknown_key_is_named() {
        let e = serde_json::from_str::<SpeedConfig>(
            r#"{"medium":{"cell":[1.0]},"nonlinearity":{"kind":"kpp"},"run":{"t_edn":3}}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("t_edn"), "{e}");
    }
}
