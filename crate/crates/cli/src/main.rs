use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use pwabs::abstraction::{abstract_model, refine_abstraction, FiniteTS};
use pwabs::dynamics::{BlackBox, Dataset, ModelSimulator, PwaModel, Sample};
use pwabs::geometry::{BoundingBox, Polytope, Region};
use pwabs::harness::{
    benchmark_abstraction, run_pipeline, run_tables, HarnessError, PipelineConfig, TablesConfig,
};
use pwabs::identify::{init_identify, refine_identify, IdentConfig};
use pwabs::logic::{parse_ltl, to_dba, Atom};
use pwabs::sample::{fit_error_models, select_next, GpModel, SamplerConfig};
use pwabs::verify::{check_sigma_simulation, Scope, SimulationOptions, VarianceConvention};

/// Data-driven abstraction of black-box piecewise-affine systems.
#[derive(Parser, Debug)]
#[command(name = "pwabs", version)]
struct Cli {
    /// Master seed; overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Identify a PWA model from a dataset CSV (config: identification settings).
    Identify {
        #[arg(long)]
        data: PathBuf,
        /// Output model JSON; defaults to model.json in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Domain polytope JSON; defaults to the bounding box of the states.
        #[arg(long)]
        domain: Option<PathBuf>,
    },
    /// Choose states to query next (config: sampler settings).
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// Dataset CSV with a cluster column, used to fit the error GPs.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Fitted GPs (JSON array, one per mode) instead of fitting from data.
        #[arg(long)]
        gp: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Model JSON queried at the chosen states; the answers are appended
        /// to the dataset CSV. Without it the states go to picks.csv.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Abstract a model under an LTL formula (config: pipeline settings).
    Abstract {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: Option<String>,
        /// Atoms JSON: [{"name":..., "h":[...], "k":...}].
        #[arg(long)]
        atoms: Option<PathBuf>,
    },
    /// Check that LHS is σ-approximately simulated by RHS.
    Check {
        #[arg(long)]
        lhs: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
        /// Only these LHS states must be related (comma separated).
        #[arg(long, value_delimiter = ',')]
        initial: Option<Vec<usize>>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// `epsilon,sigma_e,C` for the probability bound.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        bound: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "verbatim")]
        variance: Variance,
    },
    /// Run the full loop against a simulated black box (config: pipeline settings).
    Pipeline {
        /// Model JSON simulated as the black box; defaults to the built-in case study.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
    /// Sweep active samples and refinement steps (config: table settings).
    Tables {
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum Variance {
    Verbatim,
    Squared,
}

/// Errors in the user's inputs rather than in a stage.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct ConfigError(String);

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

fn read_dataset(path: &Path) -> Result<(Dataset, Option<Vec<Option<usize>>>)> {
    let file = fs::File::open(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    Dataset::read_csv(file).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Out { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        fs::write(self.path(name), body).with_context(|| format!("writing {name}"))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.text(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn dataset(&self, name: &str, data: &Dataset, clusters: Option<&[Option<usize>]>) -> Result<()> {
        data.write_csv(fs::File::create(self.path(name))?, clusters)?;
        Ok(())
    }

    fn abstraction(&self, ts: &FiniteTS) -> Result<()> {
        self.text("ts.json", &ts.to_json()?)?;
        self.text("ts.dot", &ts.to_dot())?;
        ts.write_partition_csv(fs::File::create(self.path("partition.csv"))?)?;
        Ok(())
    }
}

fn truth_model(path: Option<&Path>) -> Result<PwaModel> {
    path.map_or_else(|| Ok(PwaModel::case_study(0.0)), read_json)
}

fn identify(cli: &Cli, data: &Path, out: Option<&Path>, domain: Option<&Path>) -> Result<()> {
    let mut cfg: IdentConfig = config_or_default(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let (data, _) = read_dataset(data)?;
    let domain = match domain {
        Some(p) => read_json::<Polytope>(p)?,
        None => {
            let dim = data.dim().ok_or_else(|| config_err("dataset is empty"))?;
            let lower = (0..dim).map(|j| data.pairs.iter().map(|s| s.x[j]).fold(f64::INFINITY, f64::min)).collect();
            let upper = (0..dim).map(|j| data.pairs.iter().map(|s| s.x[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
            BoundingBox::new(lower, upper)?.to_polytope()?
        }
    };
    let init = init_identify(&data, &domain, &cfg)?;
    let result = refine_identify(&data, &init, None, &cfg)?;
    let dir = Out::new(&cli.out_dir)?;
    let model_path = out.map_or_else(|| dir.path("model.json"), Path::to_path_buf);
    fs::write(&model_path, serde_json::to_string_pretty(&result.model)? + "\n")?;
    dir.dataset("clusters.csv", &data, Some(&result.labels(data.len())))?;
    eprintln!("identified {} modes from {} samples", result.model.mode_count(), data.len());
    Ok(())
}

fn sample(cli: &Cli, model: &Path, data: Option<&Path>, gp: Option<&Path>, n: usize, truth: Option<&Path>) -> Result<()> {
    let mut cfg: SamplerConfig = config_or_default(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let model: PwaModel = read_json(model)?;
    let mut gps: Vec<GpModel> = match (gp, data) {
        (Some(p), _) => read_json(p)?,
        (None, Some(d)) => {
            let (data, labels) = read_dataset(d)?;
            let labels = labels.ok_or_else(|| config_err("dataset has no cluster column"))?;
            let mut clusters = vec![Vec::new(); model.mode_count()];
            for (k, l) in labels.iter().enumerate() {
                if let Some(c) = l.filter(|c| *c < clusters.len()) {
                    clusters[c].push(k);
                }
            }
            fit_error_models(&data, &clusters, &model, &cfg)?
        }
        (None, None) => return Err(config_err("sample needs --gp or --data")),
    };
    if gps.len() != model.mode_count() {
        return Err(config_err("need one GP per model mode"));
    }
    let regions: Vec<Region> = model.modes().iter().map(|m| Region::from_polytope(m.region.clone())).collect();
    let mut bb = match truth {
        Some(p) => Some(ModelSimulator::new(read_json(p)?, cfg.seed)),
        None => None,
    };
    let mut picks = Dataset::default();
    let mut points = Vec::new();
    let start = gps.iter().map(GpModel::len).max().unwrap_or(0);
    for t in 1..=n {
        let sel = select_next(&gps, &regions, start + t, &cfg)?;
        if let Some(bb) = bb.as_mut() {
            let y = bb.query(&sel.point)?;
            let pred = model.modes()[sel.mode].apply(&sel.point);
            let err = pred.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            gps[sel.mode] = gps[sel.mode].with_observation(sel.point.clone(), err)?;
            picks.push(Sample { x: sel.point.clone(), y });
        }
        points.push(sel);
    }
    let dir = Out::new(&cli.out_dir)?;
    match (bb, data) {
        (Some(_), Some(d)) => {
            let (mut all, labels) = read_dataset(d)?;
            all.extend(&picks);
            let labels = labels.map(|mut l| {
                l.resize(all.len(), None);
                l
            });
            all.write_csv(fs::File::create(d)?, labels.as_deref())?;
        }
        (Some(_), None) => dir.dataset("picks.csv", &picks, None)?,
        (None, _) => {
            let mut csv = (1..=model.dim()).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",") + ",mode\n";
            for p in &points {
                csv += &format!(
                    "{},{}\n",
                    p.point.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","),
                    p.mode
                );
            }
            dir.text("picks.csv", &csv)?;
        }
    }
    dir.json("selections.json", &points)?;
    Ok(())
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg: PipelineConfig = config_or_default(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(cfg)
}

fn abstract_cmd(cli: &Cli, model: &Path, formula: Option<&str>, atoms: Option<&Path>) -> Result<()> {
    let mut cfg = pipeline_config(cli)?;
    if let Some(f) = formula {
        cfg.formula = f.to_string();
    }
    if let Some(p) = atoms {
        cfg.atoms = read_json::<Vec<Atom>>(p)?;
    }
    let model: PwaModel = read_json(model)?;
    let b = to_dba(&parse_ltl(&cfg.formula, &cfg.atoms).map_err(|e| config_err(e.to_string()))?)
        .map_err(|e| config_err(e.to_string()))?;
    let rcfg = pwabs::abstraction::RefineConfig {
        eta: cfg.eta,
        max_passes: cfg.refinement_cap,
        sliver_floor: cfg.sliver_floor,
        volume_samples: cfg.volume_samples,
        seed: cfg.seed,
    };
    let abs = abstract_model(&model, &cfg.atoms, &b, &cfg.grid, &rcfg)?;
    let (abs, report) = refine_abstraction(&model, &cfg.atoms, &b, abs, &rcfg)?;
    let dir = Out::new(&cli.out_dir)?;
    dir.abstraction(&abs.ts)?;
    dir.text("automaton.dot", &b.to_dot())?;
    dir.json("refinement.json", &report)?;
    dir.json("classification.json", &abs.classification)?;
    eprintln!(
        "{} states, {} undecided product states after {} passes",
        abs.ts.cells().count(),
        abs.classification.undecided.len(),
        report.passes.len() - 1
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn check(
    cli: &Cli,
    lhs: &Path,
    rhs: &Path,
    sigma: f64,
    initial: Option<&[usize]>,
    samples: usize,
    bound: Option<&[f64]>,
    variance: Variance,
) -> Result<()> {
    let t1: FiniteTS = read_json(lhs)?;
    let t2: FiniteTS = read_json(rhs)?;
    if !(sigma >= 0.0) {
        return Err(config_err("sigma must be non-negative"));
    }
    let opts = SimulationOptions {
        scope: initial.map_or(Scope::AllStates, |v| Scope::Initial(v.to_vec())),
        samples,
        seed: cli.seed.unwrap_or(0),
        bound: bound.map(|b| (b[0], b[1], b[2])),
        variance_convention: match variance {
            Variance::Verbatim => VarianceConvention::Verbatim,
            Variance::Squared => VarianceConvention::Squared,
        },
    };
    let cert = check_sigma_simulation(&t1, &t2, sigma, &opts)?;
    writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&cert)?)?;
    Ok(())
}

fn pipeline(cli: &Cli, truth: Option<&Path>, noise: f64) -> Result<()> {
    let cfg = pipeline_config(cli)?;
    let truth = truth_model(truth)?;
    let bench = benchmark_abstraction(&truth, &cfg)?;
    let mut bb = ModelSimulator::new(
        truth.with_noise(noise).map_err(|e| config_err(e.to_string()))?,
        pwabs::seeds::derive(cfg.seed, &[0]),
    );
    let dir = Out::new(&cli.out_dir)?;
    let out = match run_pipeline(&mut bb, &cfg, Some(&bench)) {
        Ok(out) => out,
        Err(e @ HarnessError::Collapse { .. }) => {
            dir.json("diagnostics.json", &serde_json::json!({ "stage": e.stage(), "error": e.to_string() }))?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let metrics = pwabs::harness::compute_metrics(
        &truth,
        &out.model,
        &bench.ts,
        &out.abstraction.ts,
        cfg.sigma_step,
        cfg.hausdorff_samples,
        cfg.seed,
    )?;
    dir.json("model.json", &out.model)?;
    dir.dataset("dataset.csv", &out.dataset, Some(&out.ident.labels(out.dataset.len())))?;
    dir.abstraction(&out.abstraction.ts)?;
    dir.text("benchmark.json", &bench.ts.to_json()?)?;
    dir.json("certificate.json", &out.certificate)?;
    dir.json(
        "report.json",
        &serde_json::json!({
            "rounds": out.rounds,
            "refinement": out.refine_report,
            "metrics": metrics,
        }),
    )?;
    eprintln!(
        "{} modes, {} states, sigma_bar = {}",
        out.model.mode_count(),
        out.abstraction.ts.cells().count(),
        metrics.sigma_bar.map_or("none".into(), |s| format!("{s:.3}"))
    );
    Ok(())
}

fn tables(cli: &Cli, truth: Option<&Path>) -> Result<()> {
    let mut cfg: TablesConfig = config_or_default(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.pipeline.seed = s;
    }
    cfg.pipeline.validate().map_err(|e| config_err(e.to_string()))?;
    let truth = truth_model(truth)?;
    let report = run_tables(&truth, &cfg)?;
    let dir = Out::new(&cli.out_dir)?;
    dir.json("tables.json", &report)?;
    dir.text("tables.csv", &report.to_csv())?;
    dir.text("tables.md", &report.to_markdown())?;
    dir.text("timings.csv", &report.timings_csv())?;
    write!(std::io::stdout().lock(), "{}", report.to_markdown())?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Identify { data, out, domain } => identify(cli, data, out.as_deref(), domain.as_deref()),
        Command::Sample {
            model,
            data,
            gp,
            n,
            truth,
        } => sample(cli, model, data.as_deref(), gp.as_deref(), *n, truth.as_deref()),
        Command::Abstract { model, formula, atoms } => abstract_cmd(cli, model, formula.as_deref(), atoms.as_deref()),
        Command::Check {
            lhs,
            rhs,
            sigma,
            initial,
            samples,
            bound,
            variance,
        } => check(cli, lhs, rhs, *sigma, initial.as_deref(), *samples, bound.as_deref(), *variance),
        Command::Pipeline { truth, noise } => pipeline(cli, truth.as_deref(), *noise),
        Command::Tables { truth } => tables(cli, truth.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.is::<ConfigError>()
                || matches!(e.downcast_ref::<HarnessError>(), Some(HarnessError::Config(_)));
            ExitCode::from(if config { 3 } else { 2 })
        }
    }
}
