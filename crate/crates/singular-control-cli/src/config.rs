//! Config file schema shared by every subcommand, with CLI-flag overrides.
//!
//! One TOML file drives all runs. Model keys: `model.mu`, `model.sigma`,
//! `model.a`, `model.c`, `model.beta` and `model.horizon.{kind,t,t_trunc}`.
//! Floats are parsed by exact decimal rules, independent of locale.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use singular_control::law::{Boundary, BoundaryTable, ControlLaw};
use singular_control::learn::{Algo, Schedule};
use singular_control::model::{make_exp_cost_model, ExpCostParams, Horizon, ModelSpec};
use singular_control::sim::SimConfig;
use singular_control::AugmentedState;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law2: Option<LawSection>,
    #[serde(default)]
    pub pi: PiSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learn: Option<LearnSection>,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mu: f64,
    pub sigma: f64,
    pub a: f64,
    pub c: f64,
    pub beta: f64,
    pub horizon: HorizonSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_trunc: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub x: f64,
    pub t: f64,
    pub y: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            x: 1.0,
            t: 0.0,
            y: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub t0: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            t0: 0.0,
            n_steps: 1000,
            dt: 0.02,
            seed: 0,
            n_paths: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<f64>,
    /// Rows `(t, y, b)` covering a full rectangular grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSection {
    pub x0: f64,
    pub max_iters: u32,
    pub tol: f64,
}

impl Default for PiSection {
    fn default() -> Self {
        Self {
            x0: 3.0,
            max_iters: 100,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnSection {
    pub algo: String,
    pub episodes: u32,
    pub alphas: [f64; 3],
    pub schedule: ScheduleSection,
    pub guess: GuessSection,
    #[serde(default)]
    pub normalize_rates: bool,
    /// Seeds for multi-seed runs; single-seed runs use `sim.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuessSection {
    pub mu: f64,
    pub sigma: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub n_paths: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { n_paths: 400 }
    }
}

impl Config {
    pub fn from_path(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: Config =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn params(&self) -> ExpCostParams {
        ExpCostParams {
            mu: self.model.mu,
            sigma: self.model.sigma,
            a: self.model.a,
            c: self.model.c,
            beta: self.model.beta,
        }
    }

    pub fn horizon(&self) -> anyhow::Result<Horizon> {
        let h = &self.model.horizon;
        match h.kind.as_str() {
            "finite" => {
                let t = h
                    .t
                    .ok_or_else(|| anyhow::anyhow!("missing key `model.horizon.t` for kind = \"finite\""))?;
                Ok(Horizon::Finite { t_end: t })
            }
            "infinite" => {
                let t_trunc = h.t_trunc.ok_or_else(|| {
                    anyhow::anyhow!("missing key `model.horizon.t_trunc` for kind = \"infinite\"")
                })?;
                Ok(Horizon::Infinite { t_trunc })
            }
            other => bail!("unknown model.horizon.kind `{other}` (expected \"finite\" or \"infinite\")"),
        }
    }

    /// Builds the benchmark model. The file schema intentionally covers the
    /// constant-coefficient exponential-cost family only; richer models are
    /// constructed programmatically against the library.
    pub fn model(&self) -> anyhow::Result<ModelSpec> {
        let horizon = self.horizon()?;
        let end = horizon.end_time();
        if horizon.is_finite() {
            bail!("the exponential-cost benchmark has no terminal cost; use horizon.kind = \"infinite\"");
        }
        Ok(make_exp_cost_model(self.params(), end)?)
    }

    pub fn init_state(&self) -> AugmentedState {
        AugmentedState::new(self.init.x, self.init.t, self.init.y)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            t0: self.sim.t0,
            n_steps: self.sim.n_steps,
            dt: self.sim.dt,
            seed: self.sim.seed,
            n_paths: self.sim.n_paths,
        }
    }

    pub fn algo(&self) -> anyhow::Result<Algo> {
        let name = self
            .learn
            .as_ref()
            .map(|l| l.algo.as_str())
            .unwrap_or("td0-simplified");
        parse_algo(name)
    }

    pub fn schedule(&self) -> anyhow::Result<Schedule> {
        let section = self
            .learn
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("missing [learn] section"))?;
        // schedules must be positive and nonincreasing over the run
        match section.schedule.kind.as_str() {
            "geometric" => {
                let rate = section
                    .schedule
                    .rate
                    .ok_or_else(|| anyhow::anyhow!("missing key `learn.schedule.rate`"))?;
                if !(rate >= 1.0) {
                    bail!("learn.schedule.rate must be >= 1 for a nonincreasing schedule, got {rate}");
                }
                Ok(Schedule::Geometric { rate })
            }
            "constant" => {
                let value = section
                    .schedule
                    .value
                    .ok_or_else(|| anyhow::anyhow!("missing key `learn.schedule.value`"))?;
                if !(value >= 0.0) {
                    bail!("learn.schedule.value must be >= 0, got {value}");
                }
                Ok(Schedule::Constant { value })
            }
            other => bail!("unknown learn.schedule.kind `{other}`"),
        }
    }
}

pub fn parse_algo(name: &str) -> anyhow::Result<Algo> {
    match name {
        "offline-ml" => Ok(Algo::OfflineMl),
        "td0" => Ok(Algo::OnlineTd0),
        "td0-simplified" => Ok(Algo::SimplifiedTd0),
        other => bail!("unknown algorithm `{other}` (expected offline-ml | td0 | td0-simplified)"),
    }
}

pub fn build_law(section: &LawSection) -> anyhow::Result<ControlLaw> {
    match section.kind.as_str() {
        "threshold" => {
            if let Some(b) = section.boundary {
                Ok(ControlLaw::threshold(b))
            } else if let Some(rows) = &section.table {
                let rows: Vec<(f64, f64, f64)> =
                    rows.iter().map(|r| (r[0], r[1], r[2])).collect();
                let table = BoundaryTable::from_rows(&rows)?;
                Ok(ControlLaw::threshold_boundary(Boundary::Table(table)))
            } else {
                bail!("threshold law needs `law.boundary` or `law.table`")
            }
        }
        other => bail!("unknown law.kind `{other}` (expected \"threshold\")"),
    }
}

/// Parses a `lo:hi:step` grid specification into the grid points.
pub fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be lo:hi:step, got `{spec}`");
    }
    let lo: f64 = parts[0].parse().context("grid lo")?;
    let hi: f64 = parts[1].parse().context("grid hi")?;
    let step: f64 = parts[2].parse().context("grid step")?;
    if !(step > 0.0) || hi < lo {
        bail!("grid requires step > 0 and hi >= lo");
    }
    let n = ((hi - lo) / step).round() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}
