//! Martingale-at-truth checks: with the closed-form value and q-functions
//! plugged in, the discretized martingale increments have zero mean along
//! benchmark paths, and misspecifications shift the mean detectably.

use singular_control::law::ControlLaw;
use singular_control::learn::{
    pe_martingale_deltas, td0_deltas, Approximator, QLearningFunctions, ThetaSet,
};
use singular_control::model::{make_exp_cost_model, AugmentedState, ExpCostParams};
use singular_control::oracle::{solve_benchmark, ClosedFormSolution};
use singular_control::sim;

const N_PATHS: u64 = 2000;
const N_STEPS: usize = 2000;
const DT: f64 = 0.01;

fn reference_params() -> ExpCostParams {
    ExpCostParams {
        mu: 0.2,
        sigma: 1.0,
        a: 0.1,
        c: 1.0,
        beta: 0.1,
    }
}

fn oracle_funcs(sol: &ClosedFormSolution) -> (Approximator, Approximator, Approximator) {
    let s1 = sol.clone();
    let s2 = sol.clone();
    let s3 = sol.clone();
    (
        Approximator::from_fn(move |s| s1.value(s.x)),
        Approximator::from_fn(move |s| s2.q0(s.x)),
        Approximator::from_fn(move |s| s3.q1(s.x)),
    )
}

fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn martingale_moments_at_truth_and_under_misspecification() {
    let sol = solve_benchmark(reference_params()).unwrap();
    let model = make_exp_cost_model(reference_params(), N_STEPS as f64 * DT).unwrap();
    let law = ControlLaw::threshold(sol.xhat);
    let init = AugmentedState::new(1.0, 0.0, 0.0);
    let beta = model.discount();

    let (j, q0, q1) = oracle_funcs(&sol);
    let j_shift = {
        let s = sol.clone();
        Approximator::from_fn(move |st| s.value(st.x) + 1.0)
    };
    let q0_misspec = {
        // +0.1 on the action region, where the control is active
        let s = sol.clone();
        Approximator::from_fn(move |st| {
            s.q0(st.x) + if st.x >= s.xhat - 1e-12 { 0.1 } else { 0.0 }
        })
    };
    let empty = ThetaSet {
        j: vec![],
        q0: vec![],
        q1: vec![],
    };

    let mut pe_sums = Vec::new();
    let mut pe_shift_sums = Vec::new();
    let mut td_sums = Vec::new();
    let mut td_misspec_sums = Vec::new();
    for path in 0..N_PATHS {
        let mut rng = sim::path_rng(2024, path);
        let tr = sim::simulate(&model, &law, &init, N_STEPS, DT, &mut rng).unwrap();

        let deltas = pe_martingale_deltas(&tr, beta, &j, &[]);
        pe_sums.push(deltas.iter().sum::<f64>());
        let shifted = pe_martingale_deltas(&tr, beta, &j_shift, &[]);
        pe_shift_sums.push(shifted.iter().sum::<f64>());

        let funcs = QLearningFunctions {
            j: &j,
            q0: &q0,
            q1: &q1,
        };
        let funcs_bad = QLearningFunctions {
            j: &j,
            q0: &q0_misspec,
            q1: &q1,
        };
        let mut acc = 0.0;
        let mut acc_bad = 0.0;
        for (rec, next) in tr.transitions() {
            let (g, gm) = td0_deltas(rec, next, tr.t0, beta, &funcs, &empty);
            acc += g + gm;
            let (g, gm) = td0_deltas(rec, next, tr.t0, beta, &funcs_bad, &empty);
            acc_bad += g + gm;
        }
        td_sums.push(acc);
        td_misspec_sums.push(acc_bad);
    }

    let (pe_mean, pe_se) = mean_stderr(&pe_sums);
    assert!(
        pe_mean.abs() < 3.0 * pe_se,
        "PE increments biased at truth: {pe_mean} +- {pe_se}"
    );

    let (td_mean, td_se) = mean_stderr(&td_sums);
    assert!(
        td_mean.abs() < 3.0 * td_se,
        "TD increments biased at truth: {td_mean} +- {td_se}"
    );

    // a constant shift of the value function changes each increment by
    // e^{-beta(T-t0)} - e^{-beta(r_j-t0)} < 0 and is detected immediately
    let (sh_mean, sh_se) = mean_stderr(&pe_shift_sums);
    assert!(
        sh_mean < -3.0 * sh_se,
        "shifted value not detected: {sh_mean} +- {sh_se}"
    );

    // overpriced zero-order q on the action region biases the mean downward
    let (ms_mean, ms_se) = mean_stderr(&td_misspec_sums);
    assert!(
        ms_mean < -3.0 * ms_se,
        "misspecified q0 not detected: {ms_mean} +- {ms_se}"
    );
}

#[test]
fn ml_loss_is_lowest_at_the_true_parameters() {
    // common-random-numbers loss landscape around the true parameter vector
    let sol = solve_benchmark(reference_params()).unwrap();
    let model = make_exp_cost_model(reference_params(), 20.0).unwrap();
    let law = ControlLaw::threshold(sol.xhat);
    let init = AugmentedState::new(1.0, 0.0, 0.0);
    let beta = model.discount();
    let family = singular_control::learn::benchmark_approximator(1.0, 0.1);
    let theta_true = singular_control::learn::BenchmarkTheta::from_solution(&sol).as_array();

    let mut trajectories = Vec::new();
    for path in 0..2000u64 {
        let mut rng = sim::path_rng(31337, path);
        trajectories.push(sim::simulate(&model, &law, &init, 1000, 0.02, &mut rng).unwrap());
    }
    let loss = |theta: &[f64; 3]| -> f64 {
        trajectories
            .iter()
            .map(|tr| {
                pe_martingale_deltas(tr, beta, &family.value, theta)
                    .iter()
                    .map(|d| d * d)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / trajectories.len() as f64
    };
    let base = loss(&theta_true);
    for k in 0..3 {
        for sign in [1.0, -1.0] {
            let mut perturbed = theta_true;
            perturbed[k] *= 1.0 + sign * 0.1;
            let l = loss(&perturbed);
            assert!(
                l > base,
                "loss not separated at coord {k} sign {sign}: {l} <= {base}"
            );
        }
    }
}
