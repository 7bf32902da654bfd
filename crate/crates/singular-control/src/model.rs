//! Problem data: dynamics coefficients, costs, discounting and horizon.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// A point of the augmented domain `Q`: state level `x`, time `t >= 0` and
/// accumulated singular control `y >= 0`.
///
/// `y` is nondecreasing along any trajectory; every unit of control shifts the
/// state down one-for-one, so the sum `x + y` is the uncontrolled coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState {
    pub x: f64,
    pub t: f64,
    pub y: f64,
}

impl AugmentedState {
    pub fn new(x: f64, t: f64, y: f64) -> Self {
        debug_assert!(y >= 0.0, "accumulated control must be nonnegative");
        Self { x, t, y }
    }

    /// The state reached by exerting `a` units of control instantaneously.
    pub fn pushed(&self, a: f64) -> Self {
        Self {
            x: self.x - a,
            t: self.t,
            y: self.y + a,
        }
    }
}

/// Time horizon of the control problem.
///
/// Infinite-horizon problems carry an explicit truncation time so that every
/// consumer (simulator, learner, valuation) agrees on where paths stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Terminal time `T` with a terminal cost settled at `T`.
    Finite { t_end: f64 },
    /// No terminal cost; paths are truncated at `t_trunc` for simulation.
    Infinite { t_trunc: f64 },
}

impl Horizon {
    /// Last simulated time point.
    pub fn end_time(&self) -> f64 {
        match *self {
            Horizon::Finite { t_end } => t_end,
            Horizon::Infinite { t_trunc } => t_trunc,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Horizon::Finite { .. })
    }
}

type CoeffFn = Box<dyn Fn(&AugmentedState) -> f64 + Send + Sync>;
type TerminalFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Immutable bundle of model primitives.
///
/// All fields are pure evaluation interfaces, so the same object serves both
/// the model-aware oracle code and the model-free learning code. Learning
/// routines consume recorded cost samples from trajectories and never call
/// [`ModelSpec::drift`] or [`ModelSpec::vol`]; only the simulator does.
pub struct ModelSpec {
    drift: CoeffFn,
    vol: CoeffFn,
    running_cost: CoeffFn,
    control_cost: CoeffFn,
    terminal_cost: Option<TerminalFn>,
    discount: f64,
    horizon: Horizon,
}

impl ModelSpec {
    /// Assembles a model from its primitive functions.
    ///
    /// `terminal_cost(x, y)` is required for finite horizons and ignored
    /// otherwise. `discount` is the rate `beta >= 0`.
    pub fn new(
        drift: CoeffFn,
        vol: CoeffFn,
        running_cost: CoeffFn,
        control_cost: CoeffFn,
        terminal_cost: Option<TerminalFn>,
        discount: f64,
        horizon: Horizon,
    ) -> Self {
        Self {
            drift,
            vol,
            running_cost,
            control_cost,
            terminal_cost,
            discount,
            horizon,
        }
    }

    pub fn drift(&self, s: &AugmentedState) -> f64 {
        (self.drift)(s)
    }

    pub fn vol(&self, s: &AugmentedState) -> f64 {
        (self.vol)(s)
    }

    pub fn running_cost(&self, s: &AugmentedState) -> f64 {
        (self.running_cost)(s)
    }

    pub fn control_cost(&self, s: &AugmentedState) -> f64 {
        (self.control_cost)(s)
    }

    /// Terminal cost `F(x, y)`, present only for finite horizons.
    pub fn terminal_cost(&self, x: f64, y: f64) -> Option<f64> {
        self.terminal_cost.as_ref().map(|f| f(x, y))
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }
}

/// Parameters of the constant-coefficient benchmark: drift `mu`, volatility
/// `sigma`, running cost `exp(a x)`, constant control cost `c` and discount
/// rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpCostParams {
    pub mu: f64,
    pub sigma: f64,
    pub a: f64,
    pub c: f64,
    pub beta: f64,
}

impl ExpCostParams {
    /// Checks the documented preconditions, in particular the finiteness
    /// condition `beta > mu*a + sigma^2*a^2/2` for the uncontrolled objective.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma > 0 violated (sigma = {})",
                self.sigma
            )));
        }
        if !(self.a > 0.0) {
            return Err(Error::InvalidParams(format!(
                "a > 0 violated (a = {})",
                self.a
            )));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidParams(format!(
                "c > 0 violated (c = {})",
                self.c
            )));
        }
        let bound = self.mu * self.a + 0.5 * self.sigma * self.sigma * self.a * self.a;
        if !(self.beta > bound) {
            return Err(Error::InvalidParams(format!(
                "beta > mu*a + sigma^2*a^2/2 violated: beta = {} <= {}",
                self.beta, bound
            )));
        }
        Ok(())
    }
}

/// Builds the benchmark model: constant `mu`, `sigma`, `c`, running cost
/// `exp(a x)`, no terminal cost, infinite horizon truncated at `t_trunc`.
pub fn make_exp_cost_model(p: ExpCostParams, t_trunc: f64) -> Result<ModelSpec> {
    p.validate()?;
    if !(t_trunc > 0.0) {
        return Err(Error::InvalidParams(format!(
            "t_trunc > 0 violated (t_trunc = {t_trunc})"
        )));
    }
    let ExpCostParams { mu, sigma, a, c, beta } = p;
    Ok(ModelSpec::new(
        Box::new(move |_| mu),
        Box::new(move |_| sigma),
        Box::new(move |s| math::exp(a * s.x)),
        Box::new(move |_| c),
        None,
        beta,
        Horizon::Infinite { t_trunc },
    ))
}

/// Result of sampling the control-cost translation constraint
/// `c(x - a, t, y + a) = c(x, t, y)` for `a >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationReport {
    /// Largest absolute deviation over the samples.
    pub max_deviation: f64,
    /// Sample attaining the maximum, if any samples were given.
    pub worst: Option<(AugmentedState, f64)>,
    /// Whether the maximum exceeds the tolerance.
    pub violated: bool,
    /// Tolerance the deviations were compared against.
    pub tolerance: f64,
}

/// Tolerance used by [`check_cost_translation`].
pub const TRANSLATION_TOLERANCE: f64 = 1e-12;

/// Samples `|c(x - a, t, y + a) - c(x, t, y)|` and reports the worst case.
///
/// Report-only: a violation is flagged, never raised as an error.
pub fn check_cost_translation(
    m: &ModelSpec,
    samples: &[(AugmentedState, f64)],
) -> TranslationReport {
    let mut max_deviation = 0.0f64;
    let mut worst = None;
    for &(s, a) in samples {
        debug_assert!(a >= 0.0);
        let shifted = s.pushed(a);
        let dev = math::abs(m.control_cost(&shifted) - m.control_cost(&s));
        if dev >= max_deviation {
            max_deviation = dev;
            worst = Some((s, a));
        }
    }
    TranslationReport {
        max_deviation,
        worst,
        violated: max_deviation > TRANSLATION_TOLERANCE,
        tolerance: TRANSLATION_TOLERANCE,
    }
}

/// Convenience grid of translation-check samples covering `x`, `y` and shift
/// ranges; callers with domain knowledge should supply their own.
pub fn default_translation_samples() -> Vec<(AugmentedState, f64)> {
    let mut samples = Vec::new();
    let xs = [-3.0, -1.0, 0.0, 0.5, 1.0, 2.0, 5.0];
    let ys = [0.0, 0.5, 2.0];
    let shifts = [0.0, 0.1, 1.0, 3.0];
    for &x in &xs {
        for &y in &ys {
            for &a in &shifts {
                samples.push((AugmentedState::new(x, 0.3, y), a));
            }
        }
    }
    samples
}
