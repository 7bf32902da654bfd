//! Pathwise invariants of the reflected simulation on the benchmark model.

use singular_control::law::ControlLaw;
use singular_control::model::{make_exp_cost_model, AugmentedState, ExpCostParams};
use singular_control::sim::{self, SimConfig};

const XHAT: f64 = 1.3536007206413314;

fn reference_params() -> ExpCostParams {
    ExpCostParams {
        mu: 0.2,
        sigma: 1.0,
        a: 0.1,
        c: 1.0,
        beta: 0.1,
    }
}

#[test]
fn trajectories_respect_constraint_monotonicity_and_complementarity() {
    let model = make_exp_cost_model(reference_params(), 20.0).unwrap();
    let law = ControlLaw::threshold(XHAT);
    let init = AugmentedState::new(1.0, 0.0, 0.0);
    for path in 0..1000u64 {
        let mut rng = sim::path_rng(20240517, path);
        let tr = sim::simulate(&model, &law, &init, 1000, 0.02, &mut rng).unwrap();
        let mut prev_y = 0.0;
        for (rec, next) in tr.transitions() {
            // control is nondecreasing across jump and continuous parts
            assert!(rec.jump >= 0.0 && rec.cont_increment >= 0.0);
            assert!(rec.pre.y >= prev_y);
            assert!(rec.post.y >= rec.pre.y);
            prev_y = rec.post.y;
            // accounting identities of the record
            assert_eq!(rec.post.y, rec.pre.y + rec.jump);
            assert_eq!(rec.post.x, rec.pre.x - rec.jump);
            assert!((next.y - (rec.post.y + rec.cont_increment)).abs() < 1e-15);
            // constraint: post-control states never exceed the boundary
            assert!(rec.post.x <= XHAT + 1e-12);
            assert!(next.x <= XHAT + 1e-12);
            // complementarity at grid scale: a continuous increment only
            // occurs when the diffused point left the waiting closure, in
            // which case the reflected point sits on the boundary
            if rec.cont_increment > 0.0 {
                assert!((next.x - XHAT).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn moment_growth_is_linear_in_squared_start() {
    // E[max |X + xi|^2] <= C (1 + |x + y|^2): regression slope stays bounded
    let model = make_exp_cost_model(reference_params(), 20.0).unwrap();
    let law = ControlLaw::threshold(XHAT);
    let starts = [0.0, 4.0, 8.0, 16.0, 32.0];
    let mut xs = Vec::new();
    let mut es = Vec::new();
    for &x0 in &starts {
        let init = AugmentedState::new(x0, 0.0, 0.0);
        let mut acc = 0.0;
        let n_paths = 200u64;
        for path in 0..n_paths {
            let mut rng = sim::path_rng(555, path);
            let tr = sim::simulate(&model, &law, &init, 1000, 0.02, &mut rng).unwrap();
            let mut peak: f64 = (init.x + init.y).abs();
            for (rec, next) in tr.transitions() {
                peak = peak.max((rec.post.x + rec.post.y).abs());
                peak = peak.max((next.x + next.y).abs());
            }
            acc += peak * peak;
        }
        xs.push(1.0 + x0 * x0);
        es.push(acc / n_paths as f64);
    }
    // ordinary least squares slope
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = es.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&es).map(|(x, e)| (x - mx) * (e - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    assert!(slope > 0.0 && slope < 5.0, "slope {slope}");
}

#[test]
fn crn_comparison_prefers_the_free_boundary() {
    // with the truncation tail negligible, the optimal threshold beats a
    // shifted one on common random numbers
    let model = make_exp_cost_model(reference_params(), 100.0).unwrap();
    let cfg = SimConfig {
        t0: 0.0,
        n_steps: 5000,
        dt: 0.02,
        seed: 4242,
        n_paths: 2000,
    };
    let init = AugmentedState::new(1.0, 0.0, 0.0);
    let optimal = ControlLaw::threshold(XHAT);
    let shifted = ControlLaw::threshold(XHAT + 1.0);
    let cmp = sim::mc_value_crn(&model, &optimal, &shifted, &init, &cfg).unwrap();
    let margin = cmp.diff.stderr.unwrap();
    assert!(
        cmp.diff.mean > 3.0 * margin,
        "ordering not established: diff {} +- {}",
        cmp.diff.mean,
        margin
    );
    assert!(cmp.first.mean < cmp.second.mean);
}

#[test]
fn zero_vol_path_matches_the_explicit_euler_recursion() {
    // sigma = 0 and no boundary contact: the path is the deterministic
    // recursion x_{n+1} = x_n + mu dt
    use singular_control::model::{Horizon, ModelSpec};
    let model = ModelSpec::new(
        Box::new(|_| 0.3),
        Box::new(|_| 0.0),
        Box::new(|_| 0.0),
        Box::new(|_| 1.0),
        None,
        0.0,
        Horizon::Infinite { t_trunc: 2.0 },
    );
    let law = ControlLaw::threshold(1e9);
    let init = AugmentedState::new(-1.0, 0.0, 0.0);
    let mut rng = sim::path_rng(1, 0);
    let tr = sim::simulate(&model, &law, &init, 100, 0.02, &mut rng).unwrap();
    let mut x = init.x;
    for (rec, next) in tr.transitions() {
        assert!((rec.post.x - x).abs() < 1e-9);
        x += 0.3 * 0.02;
        assert!((next.x - x).abs() < 1e-9);
    }
}

#[test]
fn mc_value_is_seed_deterministic() {
    let model = make_exp_cost_model(reference_params(), 2.0).unwrap();
    let law = ControlLaw::threshold(XHAT);
    let cfg = SimConfig {
        t0: 0.0,
        n_steps: 100,
        dt: 0.02,
        seed: 77,
        n_paths: 50,
    };
    let init = AugmentedState::new(1.0, 0.0, 0.0);
    let a = sim::mc_value(&model, &law, &init, &cfg).unwrap();
    let b = sim::mc_value(&model, &law, &init, &cfg).unwrap();
    assert_eq!(a, b);
}
