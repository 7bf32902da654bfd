//! `sctl`: experiment runner for the singular-control toolkit.
//!
//! Every subcommand is a pure function of (config file, flags, seed):
//! identical inputs produce byte-identical artifacts. Exit codes:
//! 0 success, 1 config/validation error, 2 runtime or numerical error,
//! 3 verification-suite failure.

mod artifacts;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use singular_control::learn::{
    run_benchmark_learning, BenchmarkTheta, LearnConfig,
};
use singular_control::oracle::solve_benchmark;
use singular_control::sim;

use artifacts::{full, theta_history_csv, trajectory_csv, LineChart, OutDir};
use config::Config;

#[derive(Parser)]
#[command(name = "sctl", version, about = "singular control experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Path to the TOML configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `sim.n_paths`.
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the closed-form solution; optionally dump value and q-functions
    /// on a grid.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Grid specification lo:hi:step for the CSV dump.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Simulate trajectories under the configured law and export them.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo value of the configured law; with a second law, a
    /// common-random-numbers comparison.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Iterate the exact boundary-improvement map from `pi.x0`.
    PiIterate {
        #[command(flatten)]
        common: Common,
    },
    /// Run a learning experiment and export the parameter history.
    Learn {
        #[command(flatten)]
        common: Common,
        /// Overrides `learn.algo` (offline-ml | td0 | td0-simplified).
        #[arg(long)]
        algo: Option<String>,
    },
    /// Run the invariant suite and report one pass/fail line per check.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Inject a fault to exercise a detector (hjb | cost-translation).
        #[arg(long)]
        inject: Option<String>,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
    VerifySuite,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::VerifySuite => 3,
        }
    }
}

fn validation<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Validation(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Validation(e) => eprintln!("error: {e:#}"),
                Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::VerifySuite => eprintln!("error: verification failed"),
            }
            ExitCode::from(failure.code())
        }
    }
}

fn load(common: &Common) -> Result<Config, Failure> {
    let mut cfg = Config::from_path(&common.config).map_err(validation)?;
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    if let Some(paths) = common.paths {
        cfg.sim.n_paths = paths;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Oracle { common, grid } => cmd_oracle(&common, grid.as_deref()),
        Cmd::Simulate { common } => cmd_simulate(&common),
        Cmd::Evaluate { common } => cmd_evaluate(&common),
        Cmd::PiIterate { common } => cmd_pi_iterate(&common),
        Cmd::Learn { common, algo } => cmd_learn(&common, algo.as_deref()),
        Cmd::Verify { common, inject } => cmd_verify(&common, inject.as_deref()),
    }
}

fn cmd_oracle(common: &Common, grid: Option<&str>) -> Result<(), Failure> {
    let cfg = load(common)?;
    let sol = solve_benchmark(cfg.params()).map_err(validation)?;
    println!("lambda2 = {}", full(sol.lambda2));
    println!("K1 = {}", full(sol.k1));
    println!("C2 = {}", full(sol.c2));
    println!("xhat = {}", full(sol.xhat));
    if let Some(spec) = grid {
        let xs = config::parse_grid(spec).map_err(validation)?;
        let mut csv = String::from("x,V,q0,q1\n");
        for x in xs {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                full(x),
                full(sol.value(x)),
                full(sol.q0(x)),
                full(sol.q1(x))
            ));
        }
        let mut out = OutDir::create(&common.out).map_err(runtime)?;
        let path = out.write("oracle_grid.csv", &csv).map_err(runtime)?;
        out.finish(&cfg, cfg.sim.seed).map_err(runtime)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_simulate(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let model = cfg.model().map_err(validation)?;
    let law_section = cfg
        .law
        .as_ref()
        .ok_or_else(|| validation(anyhow::anyhow!("missing [law] section")))?;
    let law = config::build_law(law_section).map_err(validation)?;
    let scfg = cfg.sim_config();
    scfg.validate_against(&model.horizon()).map_err(validation)?;
    let init = cfg.init_state();

    let mut csv = String::new();
    let multi = scfg.n_paths > 1;
    for path in 0..scfg.n_paths {
        let mut rng = sim::path_rng(scfg.seed, path as u64);
        let tr = sim::simulate(&model, &law, &init, scfg.n_steps, scfg.dt, &mut rng)
            .map_err(runtime)?;
        trajectory_csv(&mut csv, &tr, multi.then_some(path));
    }
    let name = if multi {
        "trajectories.csv"
    } else {
        "trajectory.csv"
    };
    let mut out = OutDir::create(&common.out).map_err(runtime)?;
    let path = out.write(name, &csv).map_err(runtime)?;
    out.finish(&cfg, scfg.seed).map_err(runtime)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_evaluate(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let model = cfg.model().map_err(validation)?;
    let law_section = cfg
        .law
        .as_ref()
        .ok_or_else(|| validation(anyhow::anyhow!("missing [law] section")))?;
    let law = config::build_law(law_section).map_err(validation)?;
    let scfg = cfg.sim_config();
    let init = cfg.init_state();
    match &cfg.law2 {
        None => {
            let est = sim::mc_value(&model, &law, &init, &scfg).map_err(runtime)?;
            println!("mean = {}", full(est.mean));
            match est.stderr {
                Some(se) => println!("stderr = {}", full(se)),
                None => println!("stderr = n/a (single path)"),
            }
            println!("n_paths = {}", est.n_paths);
        }
        Some(second) => {
            let law2 = config::build_law(second).map_err(validation)?;
            let cmp = sim::mc_value_crn(&model, &law, &law2, &init, &scfg).map_err(runtime)?;
            println!("law1 mean = {}", full(cmp.first.mean));
            println!("law2 mean = {}", full(cmp.second.mean));
            println!("crn diff (law2 - law1) = {}", full(cmp.diff.mean));
            if let Some(se) = cmp.diff.stderr {
                println!("crn diff stderr = {}", full(se));
            }
            println!("n_paths = {}", cmp.diff.n_paths);
        }
    }
    Ok(())
}

fn cmd_pi_iterate(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let sol = solve_benchmark(cfg.params()).map_err(validation)?;
    let mut csv = String::from("iteration,boundary\n");
    let mut x = cfg.pi.x0;
    csv.push_str(&format!("0,{}\n", full(x)));
    let mut converged_at = None;
    for k in 1..=cfg.pi.max_iters {
        let next = sol.pi_map(x).map_err(runtime)?;
        csv.push_str(&format!("{k},{}\n", full(next)));
        if (next - x).abs() < cfg.pi.tol {
            x = next;
            converged_at = Some(k);
            break;
        }
        x = next;
    }
    let mut out = OutDir::create(&common.out).map_err(runtime)?;
    let path = out.write("pi_iterates.csv", &csv).map_err(runtime)?;
    out.finish(&cfg, cfg.sim.seed).map_err(runtime)?;
    println!("boundary = {}", full(x));
    println!("xhat = {}", full(sol.xhat));
    match converged_at {
        Some(k) => println!("converged after {k} iterations (tol {})", cfg.pi.tol),
        None => println!("no convergence within {} iterations", cfg.pi.max_iters),
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_learn(common: &Common, algo_flag: Option<&str>) -> Result<(), Failure> {
    let mut cfg = load(common)?;
    if let Some(name) = algo_flag {
        if let Some(section) = cfg.learn.as_mut() {
            section.algo = name.to_string();
        }
    }
    let learn_section = cfg
        .learn
        .as_ref()
        .ok_or_else(|| validation(anyhow::anyhow!("missing [learn] section")))?
        .clone();
    let model = cfg.model().map_err(validation)?;
    let algo = cfg.algo().map_err(validation)?;
    let schedule = cfg.schedule().map_err(validation)?;
    let theta0 = BenchmarkTheta::from_guess(
        learn_section.guess.mu,
        learn_section.guess.sigma,
        learn_section.guess.a,
        cfg.model.c,
        cfg.model.beta,
    )
    .map_err(validation)?;
    let sol = solve_benchmark(cfg.params()).map_err(validation)?;
    let init = cfg.init_state();

    let seeds = learn_section
        .seeds
        .clone()
        .unwrap_or_else(|| vec![cfg.sim.seed]);
    let mut out = OutDir::create(&common.out).map_err(runtime)?;
    let mut summary = String::from("seed,theta3_final,abs_err_final,abs_err_episode1,diverged_episodes\n");
    let mut first_history = None;
    for (k, &seed) in seeds.iter().enumerate() {
        let lcfg = LearnConfig {
            alphas: learn_section.alphas,
            schedule,
            episodes: learn_section.episodes,
            sim: sim::SimConfig {
                seed,
                ..cfg.sim_config()
            },
            normalize_rates: learn_section.normalize_rates,
        };
        let run =
            run_benchmark_learning(&model, algo, theta0, &lcfg, &init).map_err(runtime)?;
        let final_theta = run.history.last().copied().unwrap_or_default();
        let first_theta = run.history.get(1).copied().unwrap_or(final_theta);
        summary.push_str(&format!(
            "{seed},{},{},{},{}\n",
            full(final_theta[2]),
            full((final_theta[2] - sol.xhat).abs()),
            full((first_theta[2] - sol.xhat).abs()),
            run.divergences.len()
        ));
        if !run.divergences.is_empty() {
            eprintln!(
                "warning: seed {seed}: {} episode(s) aborted by the non-finite guard",
                run.divergences.len()
            );
        }
        let name = if seeds.len() == 1 {
            "theta_history.csv".to_string()
        } else {
            format!("theta_history_seed{seed}.csv")
        };
        out.write(&name, &theta_history_csv(&run.history))
            .map_err(runtime)?;
        if k == 0 {
            first_history = Some(run.history);
        }
    }
    if seeds.len() > 1 {
        out.write("summary.csv", &summary).map_err(runtime)?;
    }
    if let Some(history) = first_history {
        let episodes: Vec<f64> = (0..history.len()).map(|m| m as f64).collect();
        let chart = LineChart {
            title: "parameter iterates per episode".to_string(),
            series: vec![
                (
                    "theta1".to_string(),
                    episodes.iter().zip(&history).map(|(m, h)| (*m, h[0])).collect(),
                ),
                (
                    "theta2".to_string(),
                    episodes.iter().zip(&history).map(|(m, h)| (*m, h[1])).collect(),
                ),
                (
                    "theta3".to_string(),
                    episodes.iter().zip(&history).map(|(m, h)| (*m, h[2])).collect(),
                ),
            ],
            reference: Some(("xhat".to_string(), sol.xhat)),
        };
        out.write("learning.svg", &chart.render()).map_err(runtime)?;
    }
    out.finish(&cfg, cfg.sim.seed).map_err(runtime)?;
    println!("wrote artifacts to {}", common.out.display());
    Ok(())
}

fn cmd_verify(common: &Common, inject: Option<&str>) -> Result<(), Failure> {
    let cfg = load(common)?;
    let inject = match inject {
        None => verify::Inject::None,
        Some("hjb") => verify::Inject::Hjb,
        Some("cost-translation") => verify::Inject::CostTranslation,
        Some(other) => {
            return Err(validation(anyhow::anyhow!(
                "unknown injection `{other}` (expected hjb | cost-translation)"
            )))
        }
    };
    let checks = verify::run_suite(&cfg, inject).map_err(runtime)?;
    let mut all_ok = true;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", c.name, c.detail);
        all_ok &= c.passed;
    }
    if all_ok {
        Ok(())
    } else {
        Err(Failure::VerifySuite)
    }
}
