//! Discretized simulation of the reflected state-control pair, trajectory
//! recording in the exact layout the learning updates consume, and Monte
//! Carlo valuation.
//!
//! The scheme is project-after-Euler along the control direction
//! `(-1, +1)` in `(x, y)`: jump onto the waiting closure, diffuse, project
//! back. Its weak bias is `O(sqrt(dt))` in general and is budgeted by the
//! acceptance tests at the benchmark boundary, where smooth fit cancels the
//! leading term.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::law::{ControlLaw, DEFAULT_A_MAX};
use crate::math;
use crate::model::{AugmentedState, Horizon, ModelSpec};

/// Simulation grid and sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t0: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl SimConfig {
    /// The grid must land exactly on the model's horizon end.
    pub fn validate_against(&self, horizon: &Horizon) -> Result<()> {
        let grid_end = self.t0 + self.n_steps as f64 * self.dt;
        let horizon_end = horizon.end_time();
        if math::abs(grid_end - horizon_end) > 1e-12 {
            return Err(Error::GridMismatch {
                grid_end,
                horizon_end,
            });
        }
        if self.n_steps == 0 || self.dt <= 0.0 || self.n_paths == 0 {
            return Err(Error::InvalidParams(
                "n_steps >= 1, dt > 0 and n_paths >= 1 required".into(),
            ));
        }
        Ok(())
    }
}

/// One mesh interval `[r_n, r_{n+1})` of a controlled path.
///
/// `pre` is the state just before the jump at `r_n`, `post` just after;
/// `cont_increment` is the control accumulated by reflection over the
/// interval. Cost samples: `h_bar` is the running cost at `post`
/// (left-endpoint rule for the interval average), `c_pre` the control cost
/// at `pre` (prices the jump), `c_bar` at `post` (prices the continuous
/// increment; inert when the increment is zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub pre: AugmentedState,
    pub post: AugmentedState,
    pub jump: f64,
    pub cont_increment: f64,
    pub h_bar: f64,
    pub c_pre: f64,
    pub c_bar: f64,
}

/// A simulated path on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub steps: Vec<StepRecord>,
    /// Pre-jump state at the final grid point.
    pub terminal: AugmentedState,
    /// Terminal control jump (zero for truncated infinite horizons).
    pub terminal_jump: f64,
    /// Control cost at the pre-jump terminal state.
    pub terminal_c_pre: f64,
    /// Terminal cost sample `F` at the post-jump terminal state; `None` for
    /// infinite horizons.
    pub terminal_cost: Option<f64>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.steps.len() as f64 * self.dt
    }

    /// Iterates `(step_n, next_pre_state)` pairs; the last step pairs with
    /// the terminal pre-jump state.
    pub fn transitions(&self) -> impl Iterator<Item = (&StepRecord, &AugmentedState)> {
        self.steps.iter().enumerate().map(move |(n, rec)| {
            let next = if n + 1 < self.steps.len() {
                &self.steps[n + 1].pre
            } else {
                &self.terminal
            };
            (rec, next)
        })
    }
}

/// Advances one mesh interval: jump onto the waiting closure, Euler
/// diffusion with increment `dw`, projection back. Returns the record and
/// the next pre-jump state.
pub fn step(
    m: &ModelSpec,
    law: &ControlLaw,
    s: &AugmentedState,
    dw: f64,
    dt: f64,
) -> Result<(StepRecord, AugmentedState)> {
    let jump = law.projection_increment(s)?;
    let post = s.pushed(jump);
    let drifted = post.x + m.drift(&post) * dt + m.vol(&post) * dw;
    let proposed = AugmentedState {
        x: drifted,
        t: s.t + dt,
        y: post.y,
    };
    let cont_increment = law.projection_increment(&proposed)?;
    let next = AugmentedState {
        x: drifted - cont_increment,
        t: s.t + dt,
        y: post.y + cont_increment,
    };
    let record = StepRecord {
        pre: *s,
        post,
        jump,
        cont_increment,
        h_bar: m.running_cost(&post),
        c_pre: m.control_cost(s),
        c_bar: m.control_cost(&post),
    };
    Ok((record, next))
}

/// Simulates `n_steps` intervals from `init` with Gaussian increments
/// `dw ~ N(0, dt)` drawn from `rng`. Finite-horizon models settle the
/// terminal jump by minimizing `F(x - a, y + a) + c(x, T, y) a`.
pub fn simulate(
    m: &ModelSpec,
    law: &ControlLaw,
    init: &AugmentedState,
    n_steps: usize,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let mut steps = Vec::with_capacity(n_steps);
    let mut state = *init;
    let sqrt_dt = math::sqrt(dt);
    for _ in 0..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        let (record, next) = step(m, law, &state, sqrt_dt * z, dt)?;
        steps.push(record);
        state = next;
    }
    let terminal_c_pre = m.control_cost(&state);
    let (terminal_jump, terminal_cost) = match m.horizon() {
        Horizon::Finite { .. } => {
            let c_here = terminal_c_pre;
            let objective =
                |a: f64| m.terminal_cost(state.x - a, state.y + a).unwrap_or(0.0) + c_here * a;
            let a_star = golden_section_min(&objective, 0.0, DEFAULT_A_MAX, 1e-10);
            let settled = state.pushed(a_star);
            (a_star, m.terminal_cost(settled.x, settled.y))
        }
        Horizon::Infinite { .. } => (0.0, None),
    };
    Ok(Trajectory {
        t0: init.t,
        dt,
        steps,
        terminal: state,
        terminal_jump,
        terminal_c_pre,
        terminal_cost,
    })
}

/// Discounted pathwise cost: running cost plus control cost of jumps and
/// continuous increments, plus the settled terminal cost when present.
pub fn discounted_cost(tr: &Trajectory, m: &ModelSpec) -> f64 {
    let beta = m.discount();
    let mut total = 0.0;
    for (n, rec) in tr.steps.iter().enumerate() {
        let disc = math::exp(-beta * (n as f64 * tr.dt));
        total += disc
            * (rec.h_bar * tr.dt + rec.c_pre * rec.jump + rec.c_bar * rec.cont_increment);
    }
    if let Some(f_sample) = tr.terminal_cost {
        let disc = math::exp(-beta * (tr.end_time() - tr.t0));
        total += disc * (f_sample + tr.terminal_c_pre * tr.terminal_jump);
    }
    total
}

/// Deterministic per-path generator: one ChaCha stream per path index, so
/// results are independent of scheduling order and two laws evaluated with
/// the same configuration share Brownian increments (common random numbers).
pub fn path_rng(seed: u64, path: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Monte Carlo estimate with standard error (`None` for a single path).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: Option<f64>,
    pub n_paths: usize,
}

fn summarize(costs: &[f64]) -> McEstimate {
    let n = costs.len();
    let mean = costs.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n as f64 - 1.0);
        Some(math::sqrt(var / n as f64))
    } else {
        None
    };
    McEstimate {
        mean,
        stderr,
        n_paths: n,
    }
}

/// Sample mean and standard error of the discounted cost over
/// `cfg.n_paths` independent paths.
pub fn mc_value(
    m: &ModelSpec,
    law: &ControlLaw,
    init: &AugmentedState,
    cfg: &SimConfig,
) -> Result<McEstimate> {
    let costs = sample_costs(m, law, init, cfg)?;
    Ok(summarize(&costs))
}

/// Evaluates two laws on identical Brownian increments. Returns the two
/// estimates and the estimate of the pathwise difference
/// `cost(second) - cost(first)`.
pub struct CrnComparison {
    pub first: McEstimate,
    pub second: McEstimate,
    pub diff: McEstimate,
}

pub fn mc_value_crn(
    m: &ModelSpec,
    first: &ControlLaw,
    second: &ControlLaw,
    init: &AugmentedState,
    cfg: &SimConfig,
) -> Result<CrnComparison> {
    let costs_a = sample_costs(m, first, init, cfg)?;
    let costs_b = sample_costs(m, second, init, cfg)?;
    let diffs: Vec<f64> = costs_b.iter().zip(&costs_a).map(|(b, a)| b - a).collect();
    Ok(CrnComparison {
        first: summarize(&costs_a),
        second: summarize(&costs_b),
        diff: summarize(&diffs),
    })
}

fn sample_costs(
    m: &ModelSpec,
    law: &ControlLaw,
    init: &AugmentedState,
    cfg: &SimConfig,
) -> Result<Vec<f64>> {
    cfg.validate_against(&m.horizon())?;
    let mut costs = Vec::with_capacity(cfg.n_paths);
    for path in 0..cfg.n_paths {
        let mut rng = path_rng(cfg.seed, path as u64);
        let tr = simulate(m, law, init, cfg.n_steps, cfg.dt, &mut rng).map_err(|e| {
            Error::PathFailed {
                path,
                source: Box::new(e),
            }
        })?;
        costs.push(discounted_cost(&tr, m));
    }
    Ok(costs)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden_section_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
