//! Reaction terms: KPP, general monostable, ignition and the ignition
//! approximations `f_eps` of a monostable term.

use crate::error::{Error, Result};
use crate::model::{PeriodicCell, Point, ScalarExpr, ScalarField};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    KppMonostable,
    GeneralMonostable,
    Ignition,
    IgnitionApprox,
}

impl NonlinearityKind {
    pub fn is_monostable(self) -> bool {
        matches!(self, Self::KppMonostable | Self::GeneralMonostable)
    }

    pub fn is_ignition(self) -> bool {
        matches!(self, Self::Ignition | Self::IgnitionApprox)
    }
}

/// Reaction function of a custom nonlinearity.
pub type ReactionFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Law {
    Kpp { r: ScalarField },
    Monostable { r: ScalarField, b: f64 },
    Ignition { theta: f64, scale: Option<ScalarField> },
    Approx { eps: f64, base: Box<Nonlinearity> },
    Custom { f: ReactionFn, linear: Option<ScalarField> },
}

/// The reaction frozen at one point `x`; evaluates `u -> f(x, u)` without
/// interpolating coefficient fields.
#[derive(Clone)]
pub enum LocalReaction {
    Kpp { r: f64, cap: f64 },
    Monostable { r: f64, b: f64, cap: f64 },
    Ignition { theta: f64, s: f64, cap: f64 },
    Approx { eps: f64, base: Box<LocalReaction> },
    Custom { f: ReactionFn, x: Point },
}

impl LocalReaction {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            LocalReaction::Kpp { r, cap } => {
                if u <= 0.0 || u > *cap {
                    0.0
                } else {
                    r * u * (1.0 - u)
                }
            }
            LocalReaction::Monostable { r, b, cap } => {
                if u <= 0.0 || u > *cap {
                    0.0
                } else {
                    r * u * (1.0 - u) * (1.0 + b * u)
                }
            }
            LocalReaction::Ignition { theta, s, cap } => {
                if u <= *theta || u > *cap {
                    0.0
                } else {
                    s * (u - theta) * (1.0 - u)
                }
            }
            LocalReaction::Approx { eps, base } => {
                let knee = 1.0 - eps;
                if u <= 0.0 {
                    0.0
                } else if u <= knee {
                    base.eval(u)
                } else {
                    let top = 1.0 - 0.5 * eps;
                    // anchored at the upper state so f_eps(1 - eps/2) = f(1) exactly
                    let w = if u >= top {
                        1.0 + 2.0 * (u - top)
                    } else {
                        knee + 2.0 * (u - knee)
                    };
                    base.eval(w)
                }
            }
            LocalReaction::Custom { f, x } => f(*x, u),
        }
    }
}

/// A reaction term `f(x, u)` with its structural constants.
///
/// `lower`/`upper` are the two steady states the fronts connect (`0`/`1`,
/// or `-eps`/`1 - eps/2` for ignition approximations), `threshold` is the
/// ignition cutoff (`0` for monostable terms) and `rho` the width of the
/// band below `upper` where `f` is nonincreasing in `u`.
#[derive(Clone)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    cell: PeriodicCell,
    law: Law,
    rho: f64,
    threshold: f64,
    lower: f64,
    upper: f64,
    lipschitz_m: f64,
    descriptor: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("kind", &self.kind)
            .field("descriptor", &self.descriptor)
            .field("rho", &self.rho)
            .field("threshold", &self.threshold)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("lipschitz_m", &self.lipschitz_m)
            .finish()
    }
}

/// Largest local maximum of `u (1-u) (1 + b u)` on `(0, 1)`.
fn monostable_peak(b: f64) -> f64 {
    if b.abs() < 1e-14 {
        return 0.5;
    }
    // d/du = 1 + 2 (b - 1) u - 3 b u^2
    let disc = 4.0 * (b - 1.0).powi(2) + 12.0 * b;
    (2.0 * (b - 1.0) + disc.sqrt()) / (6.0 * b)
}

impl Nonlinearity {
    fn finish(mut self) -> Self {
        self.lipschitz_m = self.estimate_lipschitz(1001);
        self
    }

    /// `f(x, u) = r(x) u (1 - u)`, requires `min r > 0`.
    pub fn kpp(r: ScalarField) -> Result<Self> {
        if !(r.min() > 0.0) {
            return Err(Error::Nonlinearity(format!(
                "KPP rate must be positive, min r = {}",
                r.min()
            )));
        }
        let descriptor = format!("kpp(r in [{}, {}])", r.min(), r.max());
        Ok(Self {
            kind: NonlinearityKind::KppMonostable,
            cell: *r.cell(),
            law: Law::Kpp { r },
            rho: 0.5,
            threshold: 0.0,
            lower: 0.0,
            upper: 1.0,
            lipschitz_m: 0.0,
            descriptor,
        }
        .finish())
    }

    /// Homogeneous `u (1 - u)` on the given cell.
    pub fn kpp_constant(cell: PeriodicCell, rate: f64) -> Result<Self> {
        Self::kpp(ScalarField::constant(cell, &vec![4; cell.dim()], rate)?)
    }

    /// `f(x, u) = r(x) u (1 - u)(1 + b u)`; not KPP once `b > 0`.
    pub fn monostable(r: ScalarField, b: f64) -> Result<Self> {
        if !(r.min() > 0.0) || !(b >= 0.0) {
            return Err(Error::Nonlinearity("monostable needs r > 0 and b >= 0".into()));
        }
        let descriptor = format!("monostable(b={b}, r in [{}, {}])", r.min(), r.max());
        Ok(Self {
            kind: NonlinearityKind::GeneralMonostable,
            cell: *r.cell(),
            law: Law::Monostable { r, b },
            rho: 1.0 - monostable_peak(b),
            threshold: 0.0,
            lower: 0.0,
            upper: 1.0,
            lipschitz_m: 0.0,
            descriptor,
        }
        .finish())
    }

    /// `f(u) = (u - theta)(1 - u)` for `u > theta`, zero below.
    pub fn ignition(cell: PeriodicCell, theta: f64) -> Result<Self> {
        Self::ignition_scaled(cell, theta, None)
    }

    /// Ignition term multiplied by a positive periodic factor `s(x)`.
    pub fn ignition_scaled(cell: PeriodicCell, theta: f64, scale: Option<ScalarField>) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Nonlinearity(format!("theta must lie in (0,1), got {theta}")));
        }
        if let Some(s) = &scale {
            if !(s.min() > 0.0) {
                return Err(Error::Nonlinearity("ignition scale must be positive".into()));
            }
        }
        Ok(Self {
            kind: NonlinearityKind::Ignition,
            cell,
            law: Law::Ignition { theta, scale },
            rho: 0.5 * (1.0 - theta),
            threshold: theta,
            lower: 0.0,
            upper: 1.0,
            lipschitz_m: 0.0,
            descriptor: format!("ignition(theta={theta})"),
        }
        .finish())
    }

    /// Ignition approximation from below of a monostable `base`:
    /// zero on `[-eps, 0]`, equal to `f` on `[0, 1-eps]` and
    /// `f(x, 1 - eps + 2(u - (1 - eps)))` on `[1-eps, 1-eps/2]`.
    pub fn ignition_approx(base: &Nonlinearity, eps: f64) -> Result<Self> {
        if !base.kind.is_monostable() {
            return Err(Error::Nonlinearity("ignition approximation needs a monostable base".into()));
        }
        if !(eps > 0.0 && eps < base.rho.min(0.5)) {
            return Err(Error::Nonlinearity(format!(
                "eps = {eps} must lie in (0, min(rho, 1/2)) = (0, {})",
                base.rho.min(0.5)
            )));
        }
        Ok(Self {
            kind: NonlinearityKind::IgnitionApprox,
            cell: base.cell,
            law: Law::Approx {
                eps,
                base: Box::new(base.clone()),
            },
            rho: base.rho - 0.5 * eps,
            threshold: 0.0,
            lower: -eps,
            upper: 1.0 - 0.5 * eps,
            lipschitz_m: 0.0,
            descriptor: format!("ignition_approx(eps={eps}, base={})", base.descriptor),
        }
        .finish())
    }

    /// Arbitrary reaction; no assumption is enforced (see [`check_assumptions`]).
    pub fn custom(
        kind: NonlinearityKind,
        cell: PeriodicCell,
        threshold: f64,
        rho: f64,
        f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        linearization: Option<ScalarField>,
    ) -> Self {
        Self {
            kind,
            cell,
            law: Law::Custom {
                f: Arc::new(f),
                linear: linearization,
            },
            rho,
            threshold,
            lower: 0.0,
            upper: 1.0,
            lipschitz_m: 0.0,
            descriptor: "custom".into(),
        }
        .finish()
    }

    pub fn kind(&self) -> NonlinearityKind {
        self.kind
    }

    pub fn cell(&self) -> &PeriodicCell {
        &self.cell
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Ignition cutoff (`theta`, `0` for approximations and monostable terms).
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `eps` for ignition approximations.
    pub fn eps(&self) -> Option<f64> {
        match &self.law {
            Law::Approx { eps, .. } => Some(*eps),
            _ => None,
        }
    }

    /// `sup f(x, u) / |u - threshold|` over sampled `x` and `u` in the front range.
    pub fn lipschitz_m(&self) -> f64 {
        self.lipschitz_m
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn localize(&self, x: Point) -> LocalReaction {
        let cap = 1.0 + self.rho;
        match &self.law {
            Law::Kpp { r } => LocalReaction::Kpp {
                r: r.evaluate(x),
                cap,
            },
            Law::Monostable { r, b } => LocalReaction::Monostable {
                r: r.evaluate(x),
                b: *b,
                cap,
            },
            Law::Ignition { theta, scale } => LocalReaction::Ignition {
                theta: *theta,
                s: scale.as_ref().map_or(1.0, |s| s.evaluate(x)),
                cap,
            },
            Law::Approx { eps, base } => LocalReaction::Approx {
                eps: *eps,
                base: Box::new(base.localize(x)),
            },
            Law::Custom { f, .. } => LocalReaction::Custom { f: f.clone(), x },
        }
    }

    pub fn eval(&self, x: Point, u: f64) -> f64 {
        self.localize(x).eval(u)
    }

    /// `d_u f(x, 0)` as a periodic field. Ignition kinds (including the
    /// approximations, whose lower state is `-eps`) give zero.
    pub fn linearization_at_zero(&self, resolution: &[usize]) -> Result<ScalarField> {
        match &self.law {
            Law::Kpp { r } | Law::Monostable { r, .. } => Ok(r.clone()),
            Law::Ignition { .. } | Law::Approx { .. } => ScalarField::constant(self.cell, resolution, 0.0),
            Law::Custom { linear: Some(l), .. } => Ok(l.clone()),
            Law::Custom { f, .. } => {
                let du = 1e-7;
                let f = f.clone();
                ScalarField::from_fn(self.cell, resolution, move |x| (f(x, du) - f(x, 0.0)) / du)
            }
        }
    }

    /// Sample points of the cell: 64 in 1D, 8 x 8 in 2D.
    pub fn x_samples(&self) -> Vec<Point> {
        let c = &self.cell;
        if c.dim() == 1 {
            (0..64).map(|i| [i as f64 * c.length(0) / 64.0, 0.0]).collect()
        } else {
            let mut v = Vec::with_capacity(64);
            for j in 0..8 {
                for i in 0..8 {
                    v.push([i as f64 * c.length(0) / 8.0, j as f64 * c.length(1) / 8.0]);
                }
            }
            v
        }
    }

    fn estimate_lipschitz(&self, u_samples: usize) -> f64 {
        let lo = self.threshold;
        let hi = self.upper;
        let mut m = 0.0f64;
        for x in self.x_samples() {
            let local = self.localize(x);
            for k in 1..u_samples {
                let u = lo + (hi - lo) * k as f64 / (u_samples - 1) as f64;
                m = m.max(local.eval(u) / (u - lo));
            }
        }
        m
    }

    /// Lipschitz ratio on a custom `u` grid (for refinement studies).
    pub fn lipschitz_m_with(&self, u_samples: usize) -> f64 {
        self.estimate_lipschitz(u_samples)
    }
}

/// One assumption check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst violation magnitude (0 when passed).
    pub worst: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Sampling check of the structural assumptions on a 64 x 1001 grid.
pub fn check_assumptions(nl: &Nonlinearity) -> AssumptionReport {
    check_assumptions_with(nl, 1001)
}

pub fn check_assumptions_with(nl: &Nonlinearity, u_samples: usize) -> AssumptionReport {
    let (lo, hi) = (nl.lower, nl.upper);
    let us: Vec<f64> = (0..u_samples)
        .map(|k| lo + (hi - lo) * k as f64 / (u_samples - 1) as f64)
        .collect();
    let locals: Vec<LocalReaction> = nl.x_samples().into_iter().map(|x| nl.localize(x)).collect();
    let mut checks = Vec::new();

    let steady = locals
        .iter()
        .map(|f| f.eval(lo).abs().max(f.eval(hi).abs()))
        .fold(0.0, f64::max);
    checks.push(AssumptionCheck {
        name: "steady_states",
        passed: steady <= 1e-12,
        worst: steady,
    });

    let negative = locals
        .iter()
        .flat_map(|f| us.iter().map(move |&u| (-f.eval(u)).max(0.0)))
        .fold(0.0, f64::max);
    checks.push(AssumptionCheck {
        name: "nonnegative",
        passed: negative == 0.0,
        worst: negative,
    });

    let interior: Vec<f64> = us
        .iter()
        .copied()
        .filter(|&u| u > nl.threshold + 1e-12 && u < hi - 1e-12)
        .collect();
    let failing = interior
        .iter()
        .filter(|&&u| locals.iter().all(|f| f.eval(u) <= 0.0))
        .count();
    checks.push(AssumptionCheck {
        name: "positive_somewhere",
        passed: failing == 0,
        worst: if interior.is_empty() {
            0.0
        } else {
            failing as f64 / interior.len() as f64
        },
    });

    if nl.kind.is_ignition() {
        let cutoff = locals
            .iter()
            .flat_map(|f| {
                us.iter()
                    .filter(|&&u| u <= nl.threshold)
                    .map(move |&u| f.eval(u).abs())
            })
            .fold(0.0, f64::max);
        checks.push(AssumptionCheck {
            name: "ignition_cutoff",
            passed: cutoff == 0.0,
            worst: cutoff,
        });
    }

    let du = 1e-3;
    let start = hi - nl.rho;
    let steps = ((hi - start) / du).floor() as usize;
    let mut rise = 0.0f64;
    for f in &locals {
        for k in 0..steps {
            let u0 = hi - (k + 1) as f64 * du;
            if u0 <= start {
                break;
            }
            rise = rise.max(f.eval(u0 + du) - f.eval(u0));
        }
    }
    let rise = if rise > 1e-12 { rise } else { 0.0 };
    checks.push(AssumptionCheck {
        name: "monotone_near_upper",
        passed: rise == 0.0,
        worst: rise,
    });

    AssumptionReport { checks }
}

/// JSON descriptor of a nonlinearity, e.g. `{"kind":"ignition","theta":0.3}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Kpp {
        #[serde(default)]
        r: ScalarExpr,
    },
    Monostable {
        #[serde(default)]
        r: ScalarExpr,
        b: f64,
    },
    Ignition {
        theta: f64,
        #[serde(default)]
        scale: Option<ScalarExpr>,
    },
    IgnitionApprox {
        eps: f64,
        base: Box<NonlinearitySpec>,
    },
}

impl NonlinearitySpec {
    pub fn build(&self, cell: PeriodicCell, resolution: &[usize]) -> Result<Nonlinearity> {
        let mut nl = match self {
            NonlinearitySpec::Kpp { r } => Nonlinearity::kpp(r.sample(cell, resolution)?)?,
            NonlinearitySpec::Monostable { r, b } => {
                Nonlinearity::monostable(r.sample(cell, resolution)?, *b)?
            }
            NonlinearitySpec::Ignition { theta, scale } => {
                let s = match scale {
                    Some(e) => Some(e.sample(cell, resolution)?),
                    None => None,
                };
                Nonlinearity::ignition_scaled(cell, *theta, s)?
            }
            NonlinearitySpec::IgnitionApprox { eps, base } => {
                Nonlinearity::ignition_approx(&base.build(cell, resolution)?, *eps)?
            }
        };
        nl.descriptor = serde_json::to_string(self).expect("serializable");
        Ok(nl)
    }
}
