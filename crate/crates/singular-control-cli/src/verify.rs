//! The `verify` subcommand: one pass/fail line per invariant family.

use singular_control::law::ControlLaw;
use singular_control::learn::{
    benchmark_approximator, pe_martingale_deltas, td0_deltas, Approximator, BenchmarkTheta,
    QLearningFunctions, ThetaSet,
};
use singular_control::model::{
    check_cost_translation, default_translation_samples, AugmentedState, Horizon, ModelSpec,
};
use singular_control::oracle::solve_benchmark;
use singular_control::sim;

use crate::config::Config;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

/// Fault injections used to exercise the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inject {
    None,
    /// Shift the piecewise split of the closed form below the free boundary.
    Hjb,
    /// Replace the control cost by a translation-violating one.
    CostTranslation,
}

pub fn run_suite(cfg: &Config, inject: Inject) -> anyhow::Result<Vec<Check>> {
    let params = cfg.params();
    let sol = solve_benchmark(params)?;
    let model = cfg.model()?;
    let mut checks = Vec::new();

    // HJB variational inequality on a grid avoiding the boundary
    {
        let mut sol_checked = sol.clone();
        if inject == Inject::Hjb {
            sol_checked.xhat -= 0.1;
        }
        let mut grid = Vec::new();
        let mut x = -5.0;
        while x <= 5.0 {
            if (x - sol_checked.xhat).abs() > 1e-9 {
                grid.push(x);
            }
            x += 0.01;
        }
        let (res, argmax) = sol_checked.hjb_residual(&grid);
        checks.push(check(
            "hjb-residual",
            res < 1e-8,
            format!("max residual {res:.3e} at x = {argmax:.4}"),
        ));
    }

    // smooth fit at the free boundary
    {
        let a = params.a;
        let wx = a * sol.k1 * (a * sol.xhat).exp()
            + sol.lambda2 * sol.c2 * (sol.lambda2 * sol.xhat).exp();
        let wxx = a * a * sol.k1 * (a * sol.xhat).exp()
            + sol.lambda2 * sol.lambda2 * sol.c2 * (sol.lambda2 * sol.xhat).exp();
        let ok = (wx - params.c).abs() < 1e-10 && wxx.abs() < 1e-10;
        checks.push(check(
            "smooth-fit",
            ok,
            format!("V'(xhat) - c = {:.3e}, V''(xhat) = {:.3e}", wx - params.c, wxx),
        ));
    }

    // analytic gradients of the benchmark parameterization
    {
        use rand::{Rng, SeedableRng};
        let param = benchmark_approximator(params.c, params.beta);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1234);
        let h = 1e-6;
        let mut worst = 0.0f64;
        let mut probes = 0;
        while probes < 100 {
            let theta = [
                -2.3 + rng.random_range(-0.5..0.5),
                -1.6 + rng.random_range(-0.5..0.5),
                1.35 + rng.random_range(-1.0..1.0),
            ];
            let x: f64 = rng.random_range(-4.0..4.0);
            if (x - theta[2]).abs() < 1e-3 {
                continue;
            }
            probes += 1;
            let s = AugmentedState::new(x, 0.0, 0.0);
            for approx in [&param.value, &param.q0, &param.q1] {
                let grad = approx.grad(&theta, &s);
                for k in 0..3 {
                    let mut tp = theta;
                    tp[k] += h;
                    let mut tm = theta;
                    tm[k] -= h;
                    let fd = (approx.eval(&tp, &s) - approx.eval(&tm, &s)) / (2.0 * h);
                    worst = worst.max((fd - grad[k]).abs() / fd.abs().max(1.0));
                }
            }
        }
        checks.push(check(
            "gradient-check",
            worst < 1e-5,
            format!("max relative error {worst:.3e} over 100 probes"),
        ));
    }

    // control-cost translation constraint
    {
        let report = if inject == Inject::CostTranslation {
            let bad = ModelSpec::new(
                Box::new(|_| 0.0),
                Box::new(|_| 1.0),
                Box::new(|_| 0.0),
                Box::new(|s| s.x.abs()),
                None,
                0.0,
                Horizon::Infinite { t_trunc: 1.0 },
            );
            check_cost_translation(&bad, &default_translation_samples())
        } else {
            check_cost_translation(&model, &default_translation_samples())
        };
        checks.push(check(
            "cost-translation",
            !report.violated,
            format!(
                "max deviation {:.3e} (tolerance {:.0e})",
                report.max_deviation, report.tolerance
            ),
        ));
    }

    // boundary iteration: fixed point and convergence
    {
        let fp = sol.pi_map(sol.xhat)?;
        let mut ok = (fp - sol.xhat).abs() < 1e-9;
        let mut detail = format!("|pi(xhat) - xhat| = {:.3e}", (fp - sol.xhat).abs());
        for &x0 in &[-2.0, 0.0, 0.5, 3.0, 5.0] {
            let mut x = x0;
            let mut hit = false;
            for _ in 0..100 {
                x = sol.pi_map(x)?;
                if (x - sol.xhat).abs() < 1e-6 {
                    hit = true;
                    break;
                }
            }
            if !hit {
                ok = false;
                detail = format!("no convergence from x0 = {x0}");
                break;
            }
        }
        checks.push(check("pi-iteration", ok, detail));
    }

    // simulator invariants over sampled paths
    {
        let law = ControlLaw::threshold(sol.xhat);
        let init = cfg.init_state();
        let scfg = cfg.sim_config();
        let mut ok = true;
        let mut detail = format!("{} paths clean", cfg.verify.n_paths);
        'paths: for path in 0..cfg.verify.n_paths {
            let mut rng = sim::path_rng(scfg.seed, path as u64);
            let tr = sim::simulate(&model, &law, &init, scfg.n_steps, scfg.dt, &mut rng)?;
            for (rec, next) in tr.transitions() {
                let monotone = rec.jump >= 0.0
                    && rec.cont_increment >= 0.0
                    && rec.post.y >= rec.pre.y
                    && next.y >= rec.post.y;
                let constrained =
                    rec.post.x <= sol.xhat + 1e-12 && next.x <= sol.xhat + 1e-12;
                let complementary =
                    rec.cont_increment == 0.0 || (next.x - sol.xhat).abs() < 1e-12;
                if !(monotone && constrained && complementary) {
                    ok = false;
                    detail = format!("violation on path {path} at t = {}", rec.pre.t);
                    break 'paths;
                }
            }
        }
        checks.push(check("sim-invariants", ok, detail));
    }

    // martingale increments vanish in expectation at the closed form
    {
        let beta = model.discount();
        let law = ControlLaw::threshold(sol.xhat);
        let init = cfg.init_state();
        let scfg = cfg.sim_config();
        let sol_j = sol.clone();
        let j = Approximator::from_fn(move |s| sol_j.value(s.x));
        let sol_q0 = sol.clone();
        let q0 = Approximator::from_fn(move |s| sol_q0.q0(s.x));
        let sol_q1 = sol.clone();
        let q1 = Approximator::from_fn(move |s| sol_q1.q1(s.x));
        let funcs = QLearningFunctions {
            j: &j,
            q0: &q0,
            q1: &q1,
        };
        let empty = ThetaSet {
            j: vec![],
            q0: vec![],
            q1: vec![],
        };
        let mut pe = Vec::new();
        let mut td = Vec::new();
        for path in 0..cfg.verify.n_paths {
            let mut rng = sim::path_rng(scfg.seed.wrapping_add(1), path as u64);
            let tr = sim::simulate(&model, &law, &init, scfg.n_steps, scfg.dt, &mut rng)?;
            pe.push(pe_martingale_deltas(&tr, beta, &j, &[]).iter().sum::<f64>());
            let mut acc = 0.0;
            for (rec, next) in tr.transitions() {
                let (g, gm) = td0_deltas(rec, next, tr.t0, beta, &funcs, &empty);
                acc += g + gm;
            }
            td.push(acc);
        }
        let stats = |v: &[f64]| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        };
        let (pe_mean, pe_se) = stats(&pe);
        let (td_mean, td_se) = stats(&td);
        let ok = pe_mean.abs() < 3.0 * pe_se && td_mean.abs() < 3.0 * td_se;
        checks.push(check(
            "martingale-at-truth",
            ok,
            format!(
                "PE {pe_mean:.3} +- {pe_se:.3}, TD {td_mean:.4} +- {td_se:.4} over {} paths",
                cfg.verify.n_paths
            ),
        ));
    }

    // benchmark parameterization reproduces the closed form at the truth
    {
        let param = benchmark_approximator(params.c, params.beta);
        let theta = BenchmarkTheta::from_solution(&sol).as_array();
        let mut worst = 0.0f64;
        let mut x = -5.0;
        while x <= 5.0 {
            worst = worst.max((param.family.value(&theta, x) - sol.value(x)).abs());
            x += 0.01;
        }
        checks.push(check(
            "parameterization-at-truth",
            worst < 1e-9,
            format!("max |V_theta - V| = {worst:.3e}"),
        ));
    }

    Ok(checks)
}
