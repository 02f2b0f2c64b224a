//! Experiment configuration files and the drivers that turn one into output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::droplet::bond_number;
use crate::error::{Error, Result};
use crate::experiments::{run_accuracy_study, AccuracyConfig, DropletExperiment, TeapotMode};
use crate::par::Execution;
use crate::pinned::{self, convergence_study, PinnedConfig};
use crate::stability::{self, StabilityConfig};
use crate::trace::SimulationTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum Experiment {
    Accuracy(AccuracyConfig),
    Splitting(DropletExperiment),
    Teapot(TeapotConfig),
    Stability(StabilityConfig),
    Pinned(PinnedConfig),
    Custom(DropletExperiment),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Accuracy(_) => "accuracy",
            Experiment::Splitting(_) => "splitting",
            Experiment::Teapot(_) => "teapot",
            Experiment::Stability(_) => "stability",
            Experiment::Pinned(_) => "pinned",
            Experiment::Custom(_) => "custom",
        }
    }
}

/// Teapot run; `droplets` lists droplet 1 then droplet 2 and `modes` picks
/// which subsets are simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeapotConfig {
    #[serde(flatten)]
    pub base: DropletExperiment,
    #[serde(default = "all_modes")]
    pub modes: Vec<TeapotMode>,
}

fn all_modes() -> Vec<TeapotMode> {
    TeapotMode::ALL.to_vec()
}

impl TeapotConfig {
    pub fn for_mode(&self, mode: TeapotMode) -> Result<DropletExperiment> {
        if self.base.droplets.len() != 2 {
            return Err(Error::Schema(format!(
                "teapot config needs exactly two droplets, got {}",
                self.base.droplets.len()
            )));
        }
        let mut e = self.base.clone();
        e.droplets = match mode {
            TeapotMode::Droplet1 => vec![self.base.droplets[0].clone()],
            TeapotMode::Droplet2 => vec![self.base.droplets[1].clone()],
            TeapotMode::Both => self.base.droplets.clone(),
        };
        Ok(e)
    }
}

impl Default for TeapotConfig {
    fn default() -> Self {
        Self {
            base: DropletExperiment::teapot(TeapotMode::Both),
            modes: all_modes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            output_dir: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parameter checks that can run before any numerics.
    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            Experiment::Accuracy(c) => {
                c.params(c.reference_steps).validate()?;
                if c.steps.len() < 2 || c.steps.iter().any(|&m| m == 0 || m >= c.reference_steps) {
                    return Err(Error::Schema(
                        "accuracy steps must be positive, below the reference, two or more".into(),
                    ));
                }
                Ok(())
            }
            Experiment::Splitting(e) | Experiment::Custom(e) => validate_droplets(e),
            Experiment::Teapot(t) => {
                validate_droplets(&t.base)?;
                if t.modes.is_empty() {
                    return Err(Error::Schema("teapot config lists no modes".into()));
                }
                t.for_mode(TeapotMode::Both).map(|_| ())
            }
            Experiment::Stability(c) => {
                stability::StabilityParams {
                    beta: c.beta,
                    sigma: c.sigma,
                    dt: c.dts.first().copied().unwrap_or(0.0),
                }
                .validate()?;
                if c.dts.iter().any(|&dt| !(dt > 0.0)) || c.profiles == 0 || c.n < 4 {
                    return Err(Error::Schema(
                        "stability config needs positive dts, profiles >= 1, n >= 4".into(),
                    ));
                }
                Ok(())
            }
            Experiment::Pinned(c) => {
                if c.rungs < 4 || !(c.tau0 > 0.0) || !(c.t_final >= 0.0) || c.n < 2 || !(c.a < c.b)
                {
                    return Err(Error::Schema(
                        "pinned config needs rungs >= 4, tau0 > 0, T >= 0, n >= 2, a < b".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Replaces the RNG seed of randomized experiments.
    pub fn set_seed(&mut self, seed: u64) {
        match &mut self.experiment {
            Experiment::Stability(c) => c.seed = seed,
            Experiment::Pinned(c) => c.seed = seed,
            _ => {}
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.experiment {
            Experiment::Stability(c) => Some(c.seed),
            Experiment::Pinned(c) => Some(c.seed),
            _ => None,
        }
    }
}

fn validate_droplets(e: &DropletExperiment) -> Result<()> {
    e.params.validate()?;
    if e.droplets.is_empty() {
        return Err(Error::Schema("no droplets configured".into()));
    }
    if !(e.t_final >= 0.0) || e.snapshot_stride == 0 {
        return Err(Error::Schema("need T >= 0 and snapshot_stride >= 1".into()));
    }
    Ok(())
}

/// Default configuration of each named experiment.
pub fn default_config(experiment: &str) -> Option<ExperimentConfig> {
    let e = match experiment {
        "accuracy" => Experiment::Accuracy(AccuracyConfig::default()),
        "splitting" => Experiment::Splitting(DropletExperiment::splitting()),
        "teapot" => Experiment::Teapot(TeapotConfig::default()),
        "stability" => Experiment::Stability(StabilityConfig::default()),
        "pinned" => Experiment::Pinned(PinnedConfig::default()),
        _ => return None,
    };
    Some(ExperimentConfig::new(e))
}

/// Failure of a driver after some outputs may already have been written.
#[derive(Debug)]
pub struct DriverFailure {
    pub written: Vec<PathBuf>,
    pub error: Error,
}

impl From<Error> for DriverFailure {
    fn from(error: Error) -> Self {
        Self {
            written: Vec::new(),
            error,
        }
    }
}

/// Runs the configured experiment and writes its outputs into `out`.
/// Returns the files written.
pub fn run_experiment(
    config: &ExperimentConfig,
    out: &Path,
    exec: Execution,
) -> std::result::Result<Vec<PathBuf>, DriverFailure> {
    config.validate()?;
    fs::create_dir_all(out).map_err(Error::from)?;
    let mut written = Vec::new();
    let result = drive(config, out, exec, &mut written);
    let meta = write_metadata(config, out);
    match (result, meta) {
        (Ok(()), Ok(p)) => {
            written.push(p);
            Ok(written)
        }
        (Err(error), _) | (Ok(()), Err(error)) => Err(DriverFailure { written, error }),
    }
}

fn drive(
    config: &ExperimentConfig,
    out: &Path,
    exec: Execution,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    match &config.experiment {
        Experiment::Accuracy(c) => {
            let table = run_accuracy_study(c, exec)?;
            let path = out.join("table1.csv");
            table.write_csv(&path)?;
            written.push(path);
        }
        Experiment::Splitting(e) | Experiment::Custom(e) => run_droplets(e, out, exec, written)?,
        Experiment::Teapot(t) => {
            for &mode in &t.modes {
                run_droplets(&t.for_mode(mode)?, &out.join(mode.name()), exec, written)?;
            }
        }
        Experiment::Stability(c) => {
            let reports = stability::stability_runs(c, exec)?;
            let path = out.join("stability_report.csv");
            stability::write_report_csv(&reports, c.sigma, &path)?;
            written.push(path);
            for r in &reports {
                r.check(c.sigma)?;
            }
        }
        Experiment::Pinned(c) => {
            for (name, u0) in [
                ("ladder.csv", c.inactive_profile()),
                ("ladder_contact.csv", c.contact_profile()),
            ] {
                let problem = c.problem(&u0)?;
                let study = convergence_study(&problem, &u0, c.t_final, c.tau0, c.rungs, exec)?;
                let path = out.join(name);
                study.write_csv(&path)?;
                written.push(path);
            }
            let check = pinned::oracle::run_oracle_check(c.oracle_instances, c.seed, exec)?;
            let path = out.join("oracle_check.json");
            fs::write(&path, serde_json::to_string_pretty(&check)?)?;
            written.push(path);
        }
    }
    Ok(())
}

fn run_droplets(
    e: &DropletExperiment,
    dir: &Path,
    exec: Execution,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let (trace, error) = match e.run_keep_trace(exec) {
        Ok(t) => (t, None),
        Err(f) if f.trace.records.is_empty() => return Err(f.error),
        Err(f) => (f.trace, Some(f.error)),
    };
    write_trace(&trace, dir, written)?;
    error.map_or(Ok(()), Err)
}

fn write_trace(trace: &SimulationTrace, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    trace.write_all(dir)?;
    written.push(dir.join("trace.csv"));
    if !trace.droplet_records.is_empty() {
        written.push(dir.join("droplets.csv"));
    }
    written.push(dir.join("snapshots"));
    written.push(dir.join("events.json"));
    Ok(())
}

/// `metadata.json`: the resolved config, seed, Bond numbers of the initial
/// droplets and notes on parameter choices.
fn write_metadata(config: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let droplet_runs: Vec<&DropletExperiment> = match &config.experiment {
        Experiment::Splitting(e) | Experiment::Custom(e) => vec![e],
        Experiment::Teapot(t) => vec![&t.base],
        _ => vec![],
    };
    let mut bond = Vec::new();
    for e in droplet_runs {
        let substrate = e.substrate.build()?;
        for d in e.initial_states(&substrate)? {
            bond.push(bond_number(d.volume, e.params.kappa, e.params.theta0));
        }
    }
    let mut notes = Vec::new();
    if let Experiment::Splitting(e) = &config.experiment {
        notes.push(format!(
            "sigma = {} (groove example default is -0.52; the alternative -0.95 is set through params.sigma)",
            e.params.sigma
        ));
    }
    if let Experiment::Teapot(t) = &config.experiment {
        notes.push(format!(
            "theta0 = {} rad enters the dynamics",
            t.base.params.theta0
        ));
    }
    let meta = json!({
        "experiment": config.experiment.name(),
        "seed": config.seed(),
        "bond_numbers": bond,
        "notes": notes,
        "config": config,
    });
    let path = out.join("metadata.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
    Ok(path)
}
