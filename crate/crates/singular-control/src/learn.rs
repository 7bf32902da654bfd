//! Martingale-characterization machinery and q-learning updates.
//!
//! A candidate triple `(J, q0, q1)` is correct for a law exactly when the
//! discounted cost-adjusted process along controlled paths is a martingale.
//! This module discretizes those martingale increments, implements the
//! offline martingale-loss update and the online TD(0) updates (full and
//! simplified known-cost variants), provides the benchmark three-parameter
//! family with analytic gradients, and drives episode-level training.
//!
//! Learning code consumes only recorded observations (state transitions and
//! cost samples); the model's drift and volatility are touched exclusively by
//! the simulator that generates the data.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::law::ControlLaw;
use crate::math;
use crate::model::{AugmentedState, ExpCostParams, ModelSpec};
use crate::oracle;
use crate::sim::{self, SimConfig, StepRecord, Trajectory};

// ---------------------------------------------------------------------------
// Function approximators
// ---------------------------------------------------------------------------

type EvalFn = Box<dyn Fn(&[f64], &AugmentedState) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64], &AugmentedState, &mut [f64]) + Send + Sync>;

/// A parameterized scalar function of the augmented state with an analytic
/// parameter gradient.
pub struct Approximator {
    pub param_dim: usize,
    eval: EvalFn,
    grad: GradFn,
}

impl Approximator {
    pub fn new(param_dim: usize, eval: EvalFn, grad: GradFn) -> Self {
        Self {
            param_dim,
            eval,
            grad,
        }
    }

    /// Wraps a fixed (parameter-free) function, e.g. a closed-form solution.
    pub fn from_fn(f: impl Fn(&AugmentedState) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            param_dim: 0,
            eval: Box::new(move |_, s| f(s)),
            grad: Box::new(|_, _, _| {}),
        }
    }

    pub fn eval(&self, params: &[f64], s: &AugmentedState) -> f64 {
        (self.eval)(params, s)
    }

    pub fn grad_into(&self, params: &[f64], s: &AugmentedState, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.param_dim);
        (self.grad)(params, s, out);
    }

    pub fn grad(&self, params: &[f64], s: &AugmentedState) -> Vec<f64> {
        let mut out = vec![0.0; self.param_dim];
        self.grad_into(params, s, &mut out);
        out
    }
}

/// The `(J, q0, q1)` approximators entering a q-learning update.
pub struct QLearningFunctions<'a> {
    pub j: &'a Approximator,
    pub q0: &'a Approximator,
    pub q1: &'a Approximator,
}

/// Parameter vectors for the three approximators.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSet {
    pub j: Vec<f64>,
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
}

impl ThetaSet {
    pub fn is_finite(&self) -> bool {
        self.j
            .iter()
            .chain(&self.q0)
            .chain(&self.q1)
            .all(|v| v.is_finite())
    }
}

/// Initial learning rates for the three function updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alphas {
    pub j: f64,
    pub q0: f64,
    pub q1: f64,
}

/// Learning-rate schedule `l(m)` over episodes `m = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// `l(m) = rate^(-m)`.
    Geometric { rate: f64 },
    Constant { value: f64 },
}

impl Schedule {
    pub fn factor(&self, episode: u32) -> f64 {
        match *self {
            Schedule::Geometric { rate } => {
                let mut f = 1.0;
                for _ in 0..episode {
                    f /= rate;
                }
                f
            }
            Schedule::Constant { value } => value,
        }
    }
}

/// Episode-level learning configuration.
///
/// `alphas` are per-function rates `(alpha_J, alpha_q0, alpha_q1)` in generic
/// mode and per-coordinate rates `(alpha_1, alpha_2, alpha_3)` in benchmark
/// mode, where the three functions share one parameter vector.
///
/// `normalize_rates` rescales the per-step online updates by `dt`, reading
/// the rates as per unit of simulated time; this matches the `dt`-weighted
/// sums of the offline update and keeps the printed rates usable. Off by
/// default: updates are applied exactly as displayed.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub alphas: [f64; 3],
    pub schedule: Schedule,
    pub episodes: u32,
    pub sim: SimConfig,
    pub normalize_rates: bool,
}

// ---------------------------------------------------------------------------
// Martingale increments
// ---------------------------------------------------------------------------

/// Discretized martingale increments `M_{r_N} - M_{r_j-}` of the policy
/// evaluation martingale, one per grid index `j = 0..=N`.
///
/// Finite horizons use the recorded terminal cost sample and terminal jump;
/// truncated infinite horizons substitute the candidate value at the
/// truncation point for the missing terminal term, which keeps the increments
/// mean-zero under the truncated martingale.
pub fn pe_martingale_deltas(
    tr: &Trajectory,
    beta: f64,
    j: &Approximator,
    theta: &[f64],
) -> Vec<f64> {
    let n = tr.n_steps();
    let disc = |i: usize| math::exp(-beta * (i as f64 * tr.dt));
    let disc_n = disc(n);
    // terminal value term plus terminal jump cost
    let head = match tr.terminal_cost {
        Some(f_sample) => disc_n * (f_sample + tr.terminal_c_pre * tr.terminal_jump),
        None => disc_n * j.eval(theta, &tr.terminal),
    };
    let mut deltas = vec![0.0; n + 1];
    deltas[n] = head - disc_n * j.eval(theta, &tr.terminal);
    let mut tail = 0.0;
    for i in (0..n).rev() {
        let rec = &tr.steps[i];
        tail += disc(i)
            * (rec.h_bar * tr.dt + rec.c_pre * rec.jump + rec.c_bar * rec.cont_increment);
        deltas[i] = head + tail - disc(i) * j.eval(theta, &rec.pre);
    }
    deltas
}

/// The two TD(0) martingale differences of one transition: `g_n` for the
/// continuous part `M_{r_{n+1}-} - M_{r_n}` and `g_n_minus` for the jump part
/// `M_{r_n} - M_{r_n-}`.
pub fn td0_deltas(
    rec: &StepRecord,
    next_pre: &AugmentedState,
    t0: f64,
    beta: f64,
    funcs: &QLearningFunctions<'_>,
    thetas: &ThetaSet,
) -> (f64, f64) {
    let disc_n = math::exp(-beta * (rec.pre.t - t0));
    let disc_n1 = math::exp(-beta * (next_pre.t - t0));
    let dt = next_pre.t - rec.pre.t;
    let g_n = disc_n1 * funcs.j.eval(&thetas.j, next_pre)
        - disc_n * funcs.j.eval(&thetas.j, &rec.post)
        + disc_n * (rec.h_bar - funcs.q1.eval(&thetas.q1, &rec.post)) * dt
        + disc_n * (rec.c_bar - funcs.q0.eval(&thetas.q0, &rec.post)) * rec.cont_increment;
    let g_n_minus = disc_n
        * (funcs.j.eval(&thetas.j, &rec.post) - funcs.j.eval(&thetas.j, &rec.pre)
            + (rec.c_pre - funcs.q0.eval(&thetas.q0, &rec.pre)) * rec.jump);
    (g_n, g_n_minus)
}

// ---------------------------------------------------------------------------
// Parameter updates
// ---------------------------------------------------------------------------

fn axpy(acc: &mut [f64], scale: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}

/// One offline martingale-loss update from a complete trajectory, applying
/// the three displayed iteration rules: `dt`-weighted delta sums against the
/// value gradient at pre-jump states, a `dt^2` factor on the first-order
/// q-update with its gradient summed over post states, and the jump plus
/// continuous split of the zero-order q-gradient sum.
///
/// All three new vectors are computed from the incoming `thetas`
/// (simultaneous update). `l_m` is the schedule factor of the episode.
pub fn ml_offline_update(
    tr: &Trajectory,
    beta: f64,
    funcs: &QLearningFunctions<'_>,
    thetas: &ThetaSet,
    alphas: Alphas,
    l_m: f64,
) -> ThetaSet {
    let n = tr.n_steps();
    let dt = tr.dt;
    let disc = |i: usize| math::exp(-beta * (i as f64 * dt));
    let disc_n = disc(n);

    let head_pe = match tr.terminal_cost {
        Some(f_sample) => disc_n * (f_sample + tr.terminal_c_pre * tr.terminal_jump),
        None => disc_n * funcs.j.eval(&thetas.j, &tr.terminal),
    };
    // the q-adjusted head subtracts the q0 price of the terminal jump
    let head_q = match tr.terminal_cost {
        Some(f_sample) => {
            disc_n
                * (f_sample
                    + (tr.terminal_c_pre - funcs.q0.eval(&thetas.q0, &tr.terminal))
                        * tr.terminal_jump)
        }
        None => disc_n * funcs.j.eval(&thetas.j, &tr.terminal),
    };

    let mut acc_j = vec![0.0; funcs.j.param_dim];
    let mut acc_q0 = vec![0.0; funcs.q0.param_dim];
    let mut acc_q1 = vec![0.0; funcs.q1.param_dim];

    // suffix accumulators, built backwards over j = n-1..0
    let mut tail_pe = 0.0;
    let mut tail_q = 0.0;
    let mut gsum_q1 = vec![0.0; funcs.q1.param_dim];
    let mut gsum_q0 = vec![0.0; funcs.q0.param_dim];
    if tr.terminal_cost.is_some() && tr.terminal_jump != 0.0 {
        let g = funcs.q0.grad(&thetas.q0, &tr.terminal);
        axpy(&mut gsum_q0, disc_n * tr.terminal_jump, &g);
    }

    let mut grad_buf_j = vec![0.0; funcs.j.param_dim];
    for i in (0..n).rev() {
        let rec = &tr.steps[i];
        let d = disc(i);
        tail_pe += d * (rec.h_bar * dt + rec.c_pre * rec.jump + rec.c_bar * rec.cont_increment);
        tail_q += d
            * ((rec.h_bar - funcs.q1.eval(&thetas.q1, &rec.post)) * dt
                + (rec.c_pre - funcs.q0.eval(&thetas.q0, &rec.pre)) * rec.jump
                + (rec.c_bar - funcs.q0.eval(&thetas.q0, &rec.post)) * rec.cont_increment);
        axpy(&mut gsum_q1, d, &funcs.q1.grad(&thetas.q1, &rec.post));
        if rec.jump != 0.0 {
            axpy(&mut gsum_q0, d * rec.jump, &funcs.q0.grad(&thetas.q0, &rec.pre));
        }
        if rec.cont_increment != 0.0 {
            axpy(
                &mut gsum_q0,
                d * rec.cont_increment,
                &funcs.q0.grad(&thetas.q0, &rec.post),
            );
        }

        let delta_pe = head_pe + tail_pe - d * funcs.j.eval(&thetas.j, &rec.pre);
        let delta_q = head_q + tail_q - d * funcs.j.eval(&thetas.j, &rec.pre);

        funcs.j.grad_into(&thetas.j, &rec.pre, &mut grad_buf_j);
        axpy(&mut acc_j, delta_pe * d, &grad_buf_j);
        axpy(&mut acc_q1, delta_q, &gsum_q1);
        axpy(&mut acc_q0, delta_q, &gsum_q0);
    }

    let mut out = thetas.clone();
    axpy(&mut out.j, l_m * alphas.j * dt, &acc_j);
    axpy(&mut out.q1, l_m * alphas.q1 * dt * dt, &acc_q1);
    axpy(&mut out.q0, l_m * alphas.q0 * dt, &acc_q0);
    out
}

/// One online TD(0) update from a single transition: each parameter vector
/// moves along `g_n` times its gradient at the post state plus `g_n_minus`
/// times its gradient at the pre-jump state.
pub fn td0_online_update(
    rec: &StepRecord,
    next_pre: &AugmentedState,
    t0: f64,
    beta: f64,
    funcs: &QLearningFunctions<'_>,
    thetas: &ThetaSet,
    alphas: Alphas,
    l_m: f64,
) -> ThetaSet {
    let (g_n, g_n_minus) = td0_deltas(rec, next_pre, t0, beta, funcs, thetas);
    let mut out = thetas.clone();
    axpy(&mut out.j, l_m * alphas.j * g_n, &funcs.j.grad(&thetas.j, &rec.post));
    axpy(
        &mut out.j,
        l_m * alphas.j * g_n_minus,
        &funcs.j.grad(&thetas.j, &rec.pre),
    );
    axpy(
        &mut out.q1,
        l_m * alphas.q1 * g_n,
        &funcs.q1.grad(&thetas.q1, &rec.post),
    );
    axpy(
        &mut out.q1,
        l_m * alphas.q1 * g_n_minus,
        &funcs.q1.grad(&thetas.q1, &rec.pre),
    );
    axpy(
        &mut out.q0,
        l_m * alphas.q0 * g_n,
        &funcs.q0.grad(&thetas.q0, &rec.post),
    );
    axpy(
        &mut out.q0,
        l_m * alphas.q0 * g_n_minus,
        &funcs.q0.grad(&thetas.q0, &rec.pre),
    );
    out
}

/// Known-control-cost simplification: only the continuous difference `g_n`
/// drives the update, with gradients at the post state.
pub fn td0_simplified_update(
    rec: &StepRecord,
    next_pre: &AugmentedState,
    t0: f64,
    beta: f64,
    funcs: &QLearningFunctions<'_>,
    thetas: &ThetaSet,
    alphas: Alphas,
    l_m: f64,
) -> ThetaSet {
    let (g_n, _) = td0_deltas(rec, next_pre, t0, beta, funcs, thetas);
    let mut out = thetas.clone();
    axpy(&mut out.j, l_m * alphas.j * g_n, &funcs.j.grad(&thetas.j, &rec.post));
    axpy(
        &mut out.q1,
        l_m * alphas.q1 * g_n,
        &funcs.q1.grad(&thetas.q1, &rec.post),
    );
    axpy(
        &mut out.q0,
        l_m * alphas.q0 * g_n,
        &funcs.q0.grad(&thetas.q0, &rec.post),
    );
    out
}

/// Empirical martingale-orthogonality residuals: for each test function
/// `psi`, the pathwise inner product `sum_n psi(post_n) g_n +
/// psi(pre_n) g_n_minus`. Vanishes in expectation exactly when the candidate
/// triple is correct for the sampling law.
pub fn orthogonality_residuals(
    tr: &Trajectory,
    beta: f64,
    funcs: &QLearningFunctions<'_>,
    thetas: &ThetaSet,
    tests: &[Box<dyn Fn(&AugmentedState) -> f64 + Send + Sync>],
) -> Vec<f64> {
    let mut out = vec![0.0; tests.len()];
    for (rec, next_pre) in tr.transitions() {
        let (g_n, g_n_minus) = td0_deltas(rec, next_pre, tr.t0, beta, funcs, thetas);
        for (slot, psi) in out.iter_mut().zip(tests) {
            *slot += psi(&rec.post) * g_n + psi(&rec.pre) * g_n_minus;
        }
    }
    out
}

/// Orthogonality residuals against the default test functions: the
/// components of the three parameter-gradient maps, concatenated in the
/// order `(J, q0, q1)`.
pub fn orthogonality_residuals_grad(
    tr: &Trajectory,
    beta: f64,
    funcs: &QLearningFunctions<'_>,
    thetas: &ThetaSet,
) -> ThetaSet {
    let mut out = ThetaSet {
        j: vec![0.0; funcs.j.param_dim],
        q0: vec![0.0; funcs.q0.param_dim],
        q1: vec![0.0; funcs.q1.param_dim],
    };
    for (rec, next_pre) in tr.transitions() {
        let (g_n, g_n_minus) = td0_deltas(rec, next_pre, tr.t0, beta, funcs, thetas);
        axpy(&mut out.j, g_n, &funcs.j.grad(&thetas.j, &rec.post));
        axpy(&mut out.j, g_n_minus, &funcs.j.grad(&thetas.j, &rec.pre));
        axpy(&mut out.q0, g_n, &funcs.q0.grad(&thetas.q0, &rec.post));
        axpy(&mut out.q0, g_n_minus, &funcs.q0.grad(&thetas.q0, &rec.pre));
        axpy(&mut out.q1, g_n, &funcs.q1.grad(&thetas.q1, &rec.post));
        axpy(&mut out.q1, g_n_minus, &funcs.q1.grad(&thetas.q1, &rec.pre));
    }
    out
}

// ---------------------------------------------------------------------------
// Benchmark parameterization
// ---------------------------------------------------------------------------

/// The benchmark's three-parameter encoding: `exp(theta1)` is the running
/// cost exponent, `exp(theta2)` the gap between the homogeneous exponent and
/// it, and `theta3` the waiting boundary. The exponential encoding keeps the
/// implied exponents positive and ordered automatically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkTheta {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl BenchmarkTheta {
    pub fn as_array(&self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            theta1: v[0],
            theta2: v[1],
            theta3: v[2],
        }
    }

    /// Encodes the closed-form solution of guessed model parameters, with the
    /// known control cost and discount rate.
    pub fn from_guess(guess_mu: f64, guess_sigma: f64, guess_a: f64, c: f64, beta: f64) -> Result<Self> {
        let sol = oracle::solve_benchmark(ExpCostParams {
            mu: guess_mu,
            sigma: guess_sigma,
            a: guess_a,
            c,
            beta,
        })?;
        Ok(Self {
            theta1: math::ln(guess_a),
            theta2: math::ln(sol.lambda2 - guess_a),
            theta3: sol.xhat,
        })
    }

    /// Encodes the true solution.
    pub fn from_solution(sol: &oracle::ClosedFormSolution) -> Self {
        Self {
            theta1: math::ln(sol.params.a),
            theta2: math::ln(sol.lambda2 - sol.params.a),
            theta3: sol.xhat,
        }
    }
}

/// The benchmark family of value and q-functions sharing one parameter
/// vector `[theta1, theta2, theta3]`, for known control cost `c` and
/// discount `beta`.
///
/// Writing `A = exp(theta1)`, `lambda = A + exp(theta2)` and `u = x - theta3`,
/// the waiting branch is
/// `V(x) = c lambda/(A B) exp(A u) - c A/(B lambda) exp(lambda u)`,
/// which builds in value matching, smooth fit and vanishing curvature at the
/// boundary `theta3` for every parameter vector. Beyond the boundary the
/// value continues linearly with slope `c` and the first-order q-function is
/// `exp(A x) - exp(A theta3) - beta c (x - theta3)`.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkFamily {
    pub c: f64,
    pub beta: f64,
}

struct FamilyTerms {
    big_a: f64,
    big_b: f64,
    lambda: f64,
    /// `c lambda/(A B) exp(A (x - t3))`
    p: f64,
    /// `c A/(B lambda) exp(lambda (x - t3))`
    q: f64,
    u: f64,
}

impl BenchmarkFamily {
    fn terms(&self, theta: &[f64], x: f64) -> FamilyTerms {
        let big_a = math::exp(theta[0]);
        let big_b = math::exp(theta[1]);
        let lambda = big_a + big_b;
        let u = x - theta[2];
        FamilyTerms {
            big_a,
            big_b,
            lambda,
            p: self.c * lambda / (big_a * big_b) * math::exp(big_a * u),
            q: self.c * big_a / (big_b * lambda) * math::exp(lambda * u),
            u,
        }
    }

    pub fn value(&self, theta: &[f64], x: f64) -> f64 {
        let t = self.terms(theta, x);
        if x < theta[2] {
            t.p - t.q
        } else {
            self.c * t.u + self.c * (1.0 / t.big_a + 1.0 / t.lambda)
        }
    }

    pub fn value_grad(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        let t = self.terms(theta, x);
        if x < theta[2] {
            let dp1 = t.p * (t.big_a / t.lambda - 1.0 + t.big_a * t.u);
            let dp2 = t.p * (t.big_b / t.lambda - 1.0);
            let dp3 = -t.big_a * t.p;
            let dq1 = t.q * (1.0 - t.big_a / t.lambda + t.big_a * t.u);
            let dq2 = t.q * (-1.0 - t.big_b / t.lambda + t.big_b * t.u);
            let dq3 = -t.lambda * t.q;
            out[0] = dp1 - dq1;
            out[1] = dp2 - dq2;
            out[2] = dp3 - dq3;
        } else {
            out[0] = -self.c * (1.0 / t.big_a + t.big_a / (t.lambda * t.lambda));
            out[1] = -self.c * t.big_b / (t.lambda * t.lambda);
            out[2] = -self.c;
        }
    }

    /// Spatial derivative of the value, `c` beyond the boundary.
    pub fn value_dx(&self, theta: &[f64], x: f64) -> f64 {
        let t = self.terms(theta, x);
        if x < theta[2] {
            t.big_a * t.p - t.lambda * t.q
        } else {
            self.c
        }
    }

    pub fn q0(&self, theta: &[f64], x: f64) -> f64 {
        if x < theta[2] {
            self.c - self.value_dx(theta, x)
        } else {
            0.0
        }
    }

    pub fn q0_grad(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        if x < theta[2] {
            let t = self.terms(theta, x);
            let dwx1 = t.big_a * t.p * (t.big_a / t.lambda + t.big_a * t.u)
                - t.lambda * t.q * (1.0 + t.big_a * t.u);
            let dwx2 = t.big_a * t.p * (t.big_b / t.lambda - 1.0)
                - t.lambda * t.q * (t.big_b * t.u - 1.0);
            let dwx3 = -(t.big_a * t.big_a * t.p - t.lambda * t.lambda * t.q);
            out[0] = -dwx1;
            out[1] = -dwx2;
            out[2] = -dwx3;
        } else {
            out.fill(0.0);
        }
    }

    pub fn q1(&self, theta: &[f64], x: f64) -> f64 {
        if x < theta[2] {
            0.0
        } else {
            let big_a = math::exp(theta[0]);
            math::exp(big_a * x) - math::exp(big_a * theta[2])
                - self.beta * self.c * (x - theta[2])
        }
    }

    pub fn q1_grad(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        if x < theta[2] {
            out.fill(0.0);
        } else {
            let big_a = math::exp(theta[0]);
            let e_x = math::exp(big_a * x);
            let e_b = math::exp(big_a * theta[2]);
            out[0] = big_a * x * e_x - big_a * theta[2] * e_b;
            out[1] = 0.0;
            out[2] = -big_a * e_b + self.beta * self.c;
        }
    }

    /// Drift implied by the parameter vector: the unique `mu` for which the
    /// waiting branch solves the generator equation. Appears in the
    /// action-branch q-function through
    /// `mu c - beta V(theta3) = -exp(A theta3)`.
    pub fn implied_mu(&self, theta: &[f64]) -> f64 {
        let big_a = math::exp(theta[0]);
        let lambda = big_a + math::exp(theta[1]);
        self.beta * (1.0 / lambda + 1.0 / big_a) - math::exp(big_a * theta[2]) / self.c
    }
}

/// Bundle of the three benchmark approximators over the shared parameter
/// vector `[theta1, theta2, theta3]`.
pub struct BenchmarkParameterization {
    pub family: BenchmarkFamily,
    pub value: Approximator,
    pub q0: Approximator,
    pub q1: Approximator,
}

/// Builds the benchmark approximators for known control cost `c` and
/// discount rate `beta`.
pub fn benchmark_approximator(c: f64, beta: f64) -> BenchmarkParameterization {
    let family = BenchmarkFamily { c, beta };
    let value = Approximator::new(
        3,
        Box::new(move |th, s| family.value(th, s.x)),
        Box::new(move |th, s, out| family.value_grad(th, s.x, out)),
    );
    let q0 = Approximator::new(
        3,
        Box::new(move |th, s| family.q0(th, s.x)),
        Box::new(move |th, s, out| family.q0_grad(th, s.x, out)),
    );
    let q1 = Approximator::new(
        3,
        Box::new(move |th, s| family.q1(th, s.x)),
        Box::new(move |th, s, out| family.q1_grad(th, s.x, out)),
    );
    BenchmarkParameterization {
        family,
        value,
        q0,
        q1,
    }
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

/// Which update rule drives an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    /// Offline martingale-loss update once per completed episode.
    OfflineMl,
    /// Online TD(0) with both continuous and jump differences, per step.
    OnlineTd0,
    /// Online TD(0) with known control cost: continuous difference only.
    SimplifiedTd0,
}

/// Outcome of a benchmark training run: the shared parameter vector after
/// every episode (index 0 holds the initial vector) and any episodes aborted
/// by the non-finite guard, with the step where divergence was detected.
/// Aborted episodes retain the last finite parameters; divergence is
/// reported, never masked.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub history: Vec<[f64; 3]>,
    pub divergences: Vec<(u32, usize)>,
}

/// Trains the benchmark parameterization against a model treated as a black
/// box: the simulator applies the current threshold law (boundary `theta3`)
/// and the updates consume only the recorded observations, driven through
/// the value-gradient iteration with per-coordinate rates.
///
/// Online algorithms refresh the law after every update so the boundary
/// tracks `theta3`; the offline algorithm holds the law fixed within an
/// episode and refreshes it afterwards.
pub fn run_benchmark_learning(
    model: &ModelSpec,
    algo: Algo,
    theta0: BenchmarkTheta,
    cfg: &LearnConfig,
    init: &AugmentedState,
) -> Result<BenchmarkRun> {
    cfg.sim.validate_against(&model.horizon())?;
    let c = model.control_cost(init);
    let beta = model.discount();
    let family = BenchmarkFamily { c, beta };
    let param = benchmark_approximator(c, beta);
    let funcs = QLearningFunctions {
        j: &param.value,
        q0: &param.q0,
        q1: &param.q1,
    };

    let scale = if cfg.normalize_rates { cfg.sim.dt } else { 1.0 };
    let mut theta = theta0.as_array();
    let mut history = Vec::with_capacity(cfg.episodes as usize + 1);
    history.push(theta);
    let mut divergences = Vec::new();

    for episode in 1..=cfg.episodes {
        let l_m = cfg.schedule.factor(episode);
        match algo {
            Algo::OfflineMl => {
                let law = ControlLaw::threshold(theta[2]);
                let mut rng = sim::path_rng(cfg.sim.seed, episode as u64);
                let tr = sim::simulate(model, &law, init, cfg.sim.n_steps, cfg.sim.dt, &mut rng)?;
                let deltas = pe_martingale_deltas(&tr, beta, &param.value, &theta);
                let mut acc = [0.0; 3];
                let mut grad = [0.0; 3];
                for (jdx, rec) in tr.steps.iter().enumerate() {
                    let d = math::exp(-beta * (jdx as f64 * tr.dt));
                    family.value_grad(&theta, rec.pre.x, &mut grad);
                    for k in 0..3 {
                        acc[k] += deltas[jdx] * d * grad[k];
                    }
                }
                let mut next = theta;
                for k in 0..3 {
                    next[k] += l_m * cfg.alphas[k] * scale * cfg.sim.dt * acc[k];
                }
                if next.iter().all(|v| v.is_finite()) {
                    theta = next;
                } else {
                    divergences.push((episode, cfg.sim.n_steps));
                }
            }
            Algo::OnlineTd0 | Algo::SimplifiedTd0 => {
                let mut rng = sim::path_rng(cfg.sim.seed, episode as u64);
                let mut state = *init;
                let sqrt_dt = math::sqrt(cfg.sim.dt);
                let mut aborted = false;
                for n in 0..cfg.sim.n_steps {
                    let law = ControlLaw::threshold(theta[2]);
                    let z: f64 = rng.sample(StandardNormal);
                    let (rec, next_pre) =
                        sim::step(model, &law, &state, sqrt_dt * z, cfg.sim.dt)?;
                    if !aborted {
                        let thetas = ThetaSet {
                            j: theta.to_vec(),
                            q0: theta.to_vec(),
                            q1: theta.to_vec(),
                        };
                        let (g_n, g_n_minus) =
                            td0_deltas(&rec, &next_pre, init.t, beta, &funcs, &thetas);
                        let mut grad_post = [0.0; 3];
                        family.value_grad(&theta, rec.post.x, &mut grad_post);
                        let mut next = theta;
                        for k in 0..3 {
                            next[k] += l_m * cfg.alphas[k] * scale * g_n * grad_post[k];
                        }
                        if algo == Algo::OnlineTd0 {
                            let mut grad_pre = [0.0; 3];
                            family.value_grad(&theta, rec.pre.x, &mut grad_pre);
                            for k in 0..3 {
                                next[k] +=
                                    l_m * cfg.alphas[k] * scale * g_n_minus * grad_pre[k];
                            }
                        }
                        if next.iter().all(|v| v.is_finite()) {
                            theta = next;
                        } else {
                            divergences.push((episode, n));
                            aborted = true;
                        }
                    }
                    state = next_pre;
                }
            }
        }
        history.push(theta);
    }
    Ok(BenchmarkRun {
        history,
        divergences,
    })
}

/// Generic-mode learner: independently parameterized `(J, q0, q1)` behind
/// shared handles, so region-masked views can be rebuilt as the law moves.
pub struct GenericLearner {
    pub j: Arc<Approximator>,
    pub q0: Arc<Approximator>,
    pub q1: Arc<Approximator>,
}

/// Outcome of a generic training run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericRun {
    pub history: Vec<ThetaSet>,
    pub divergences: Vec<(u32, usize)>,
}

/// Region-masked approximator views enforcing the structural constraints of
/// the simultaneous characterization: the zero-order function vanishes on the
/// action region of the current law, the first-order one on its waiting
/// region.
fn masked_funcs(
    learner: &GenericLearner,
    law: &Arc<ControlLaw>,
) -> (Approximator, Approximator) {
    let law0 = Arc::clone(law);
    let raw_q0 = Arc::clone(&learner.q0);
    let q0 = Approximator::new(
        learner.q0.param_dim,
        Box::new({
            let law = Arc::clone(&law0);
            let raw = Arc::clone(&raw_q0);
            move |th, s| {
                if law.classify(s) == crate::law::Region::Waiting {
                    raw.eval(th, s)
                } else {
                    0.0
                }
            }
        }),
        Box::new({
            let law = Arc::clone(&law0);
            let raw = Arc::clone(&raw_q0);
            move |th, s, out| {
                if law.classify(s) == crate::law::Region::Waiting {
                    raw.grad_into(th, s, out);
                } else {
                    out.fill(0.0);
                }
            }
        }),
    );
    let raw_q1 = Arc::clone(&learner.q1);
    let q1 = Approximator::new(
        learner.q1.param_dim,
        Box::new({
            let law = Arc::clone(&law0);
            let raw = Arc::clone(&raw_q1);
            move |th, s| {
                if law.classify(s) == crate::law::Region::Action {
                    raw.eval(th, s)
                } else {
                    0.0
                }
            }
        }),
        Box::new({
            let law = Arc::clone(&law0);
            let raw = Arc::clone(&raw_q1);
            move |th, s, out| {
                if law.classify(s) == crate::law::Region::Action {
                    raw.grad_into(th, s, out);
                } else {
                    out.fill(0.0);
                }
            }
        }),
    );
    (q0, q1)
}

/// Builds the next law from the raw parameterized q-pair at frozen
/// parameters: the interior of `{q1 <= 0 and q0 >= 0}`, exactly the region
/// update line of the algorithms. The raw pair is used here (not the masked
/// views) so laws capture only parameter snapshots and classification stays
/// O(1) across refreshes.
fn refreshed_law(learner: &GenericLearner, thetas: &ThetaSet) -> Arc<ControlLaw> {
    let raw_q0 = Arc::clone(&learner.q0);
    let raw_q1 = Arc::clone(&learner.q1);
    let th0 = thetas.q0.clone();
    let th1 = thetas.q1.clone();
    Arc::new(crate::law::improved_law(
        Box::new(move |s| raw_q0.eval(&th0, s)),
        Box::new(move |s| raw_q1.eval(&th1, s)),
    ))
}

/// Trains independently parameterized approximators, refreshing the law by
/// region iteration (per episode offline, per step online).
pub fn run_generic_learning(
    model: &ModelSpec,
    algo: Algo,
    learner: &GenericLearner,
    theta0: ThetaSet,
    law0: ControlLaw,
    alphas: Alphas,
    cfg: &LearnConfig,
    init: &AugmentedState,
) -> Result<GenericRun> {
    cfg.sim.validate_against(&model.horizon())?;
    let beta = model.discount();
    let scale = if cfg.normalize_rates { cfg.sim.dt } else { 1.0 };
    let scaled = Alphas {
        j: alphas.j * scale,
        q0: alphas.q0 * scale,
        q1: alphas.q1 * scale,
    };
    let mut law = Arc::new(law0);
    let mut thetas = theta0;
    let mut history = Vec::with_capacity(cfg.episodes as usize + 1);
    history.push(thetas.clone());
    let mut divergences = Vec::new();

    for episode in 1..=cfg.episodes {
        let l_m = cfg.schedule.factor(episode);
        match algo {
            Algo::OfflineMl => {
                let mut rng = sim::path_rng(cfg.sim.seed, episode as u64);
                let tr =
                    sim::simulate(model, &law, init, cfg.sim.n_steps, cfg.sim.dt, &mut rng)?;
                let (q0m, q1m) = masked_funcs(learner, &law);
                let funcs = QLearningFunctions {
                    j: &learner.j,
                    q0: &q0m,
                    q1: &q1m,
                };
                // the offline rule already carries its printed dt factors;
                // the usability rescale applies through `scaled`
                let next = ml_offline_update(&tr, beta, &funcs, &thetas, scaled, l_m);
                if next.is_finite() {
                    thetas = next;
                } else {
                    divergences.push((episode, cfg.sim.n_steps));
                }
                law = refreshed_law(learner, &thetas);
            }
            Algo::OnlineTd0 | Algo::SimplifiedTd0 => {
                let mut rng = sim::path_rng(cfg.sim.seed, episode as u64);
                let mut state = *init;
                let sqrt_dt = math::sqrt(cfg.sim.dt);
                let mut aborted = false;
                for n in 0..cfg.sim.n_steps {
                    let z: f64 = rng.sample(StandardNormal);
                    let (rec, next_pre) =
                        sim::step(model, &law, &state, sqrt_dt * z, cfg.sim.dt)?;
                    if !aborted {
                        let (q0m, q1m) = masked_funcs(learner, &law);
                        let funcs = QLearningFunctions {
                            j: &learner.j,
                            q0: &q0m,
                            q1: &q1m,
                        };
                        let next = if algo == Algo::OnlineTd0 {
                            td0_online_update(
                                &rec, &next_pre, init.t, beta, &funcs, &thetas, scaled, l_m,
                            )
                        } else {
                            td0_simplified_update(
                                &rec, &next_pre, init.t, beta, &funcs, &thetas, scaled, l_m,
                            )
                        };
                        if next.is_finite() {
                            thetas = next;
                            law = refreshed_law(learner, &thetas);
                        } else {
                            divergences.push((episode, n));
                            aborted = true;
                        }
                    }
                    state = next_pre;
                }
            }
        }
        history.push(thetas.clone());
    }
    Ok(GenericRun {
        history,
        divergences,
    })
}
