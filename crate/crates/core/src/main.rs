use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use netar::depmeas::{estimate_delta_network, estimate_delta_x, CouplingConfig, CouplingMode};
use netar::estimate::{Family, ModelFit};
use netar::forecast::{forecast_h, NetworkForecastPolicy};
use netar::harness::{
    ingest_panel, run_experiment, run_rolling_forecast, write_atomic, ExperimentConfig, Frequency,
    MethodConfig, PanelOptions, PanelPaths, RollingConfig, ScenarioConfig, VarMask,
};
use netar::model::{read_series_csv, write_series_csv, SimOptions};
use netar::moments::sample_acf;
use netar::netdyn::{AdjacencySeries, NeighborhoodFn};
use netar::{Error, Result};

#[derive(Parser)]
#[command(
    name = "netar",
    version,
    about = "Network autoregressions on dynamic networks"
)]
struct Cli {
    /// Root random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory; single-file outputs go to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a network and process path; writes x.csv and network.csv.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = netar::model::DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Fit a NAR, LNAR or VAR model; writes the fit as JSON.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Forecast from a fitted model; writes h,component,point,truth,error.
    Forecast {
        /// Fit JSON written by `fit`.
        #[arg(long)]
        fit: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = PolicyArg::HoldLast)]
        policy: PolicyArg,
        #[arg(long)]
        h: usize,
    },
    /// Sample autocovariances of a series.
    Acf {
        #[arg(long)]
        x: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_lag: usize,
    },
    /// Coupling estimate of the physical dependence coefficients.
    Depmeas {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, value_enum, default_value_t = Target::X)]
        target: Target,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 200)]
        burn_in: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Joint)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1)]
        fit_from: usize,
    },
    /// Run a Monte Carlo forecasting study from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rolling forecasts on a levels file plus yearly trade matrices.
    Panel {
        #[arg(long)]
        levels: PathBuf,
        /// Directory with one `<year>.csv` trade matrix per year.
        #[arg(long)]
        trade_dir: PathBuf,
        /// Rolling-forecast JSON config.
        #[arg(long)]
        config: PathBuf,
        /// Periods are years rather than quarters.
        #[arg(long)]
        annual: bool,
    },
}

#[derive(Args)]
struct ScenarioArg {
    /// Preset name (example1, example2:<d>, flip:<persist>), inline JSON or a
    /// JSON file.
    #[arg(long, default_value = "example1")]
    scenario: String,
}

#[derive(Args)]
struct DataArgs {
    /// Series CSV `t,x1,..,xd`.
    #[arg(long)]
    x: PathBuf,
    /// Long network CSV; not needed for VAR.
    #[arg(long)]
    network: Option<PathBuf>,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Nar)]
    family: FamilyArg,
    /// Neighborhood function per lag: a name (transpose, identity,
    /// row_normalized_transpose, k_stage:<k>, sign_poly:<k>) or JSON.
    #[arg(long = "g")]
    g: Vec<String>,
    /// Fixed order; BIC over 1..=p-max otherwise.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = netar::harness::DEFAULT_P_MAX)]
    p_max: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Nar,
    Lnar,
    Var,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Known,
    HoldLast,
    Markov,
    MarkovFrozen,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    X,
    Network,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Joint,
    NetworkOnly,
    InnovationOnly,
}

fn parse_scenario(s: &str) -> Result<ScenarioConfig> {
    let text = if Path::new(s).is_file() {
        fs::read_to_string(s)?
    } else if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let num = |what: &str| -> Result<f64> {
            arg.and_then(|v| v.parse().ok()).ok_or_else(|| {
                Error::InvalidArgument(format!("{name} needs {what}, e.g. {name}:<{what}>"))
            })
        };
        return match name {
            "example1" => Ok(ScenarioConfig::Example1),
            "example2" => Ok(ScenarioConfig::Example2 {
                d: num("d")? as usize,
            }),
            "flip" => Ok(ScenarioConfig::Flip {
                persist: num("persist")?,
                mu: [0.0; 3],
            }),
            _ => Err(Error::InvalidArgument(format!("unknown scenario '{s}'"))),
        };
    };
    Ok(serde_json::from_str(&text)?)
}

fn parse_g(s: &str) -> Result<NeighborhoodFn> {
    if s.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    let v = match s.split_once(':') {
        Some((name, k)) => {
            let k: usize = k
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad order in '{s}'")))?;
            serde_json::json!({ "kind": name, "k": k })
        }
        None => serde_json::json!({ "kind": s }),
    };
    Ok(serde_json::from_value(v)?)
}

impl MethodArgs {
    fn method(&self) -> Result<MethodConfig> {
        let gs = self
            .g
            .iter()
            .map(|s| parse_g(s))
            .collect::<Result<Vec<_>>>()?;
        let family = match self.family {
            FamilyArg::Nar => Family::Nar,
            FamilyArg::Lnar => Family::Lnar,
            FamilyArg::Var => Family::Var,
        };
        let mut m = match family {
            Family::Var => MethodConfig::var(VarMask::None),
            _ => MethodConfig::nar(NeighborhoodFn::Transpose, NetworkForecastPolicy::Known),
        };
        m.family = family;
        if family != Family::Var {
            m.g = if gs.is_empty() {
                vec![NeighborhoodFn::Transpose]
            } else {
                gs
            };
        } else if !gs.is_empty() {
            return Err(Error::InvalidArgument("VAR takes no --g".into()));
        }
        m.order = self.order;
        m.validate()?;
        Ok(m)
    }
}

impl PolicyArg {
    fn policy(self) -> NetworkForecastPolicy {
        match self {
            PolicyArg::Known => NetworkForecastPolicy::Known,
            PolicyArg::HoldLast => NetworkForecastPolicy::HoldLast,
            PolicyArg::Markov => NetworkForecastPolicy::per_edge_markov(),
            PolicyArg::MarkovFrozen => NetworkForecastPolicy::PerEdgeMarkov {
                laplace_alpha: 1.0,
                freeze: true,
            },
        }
    }
}

/// Series plus the network snapshots aligned to its columns.
struct Data {
    x: nalgebra::DMatrix<f64>,
    ads: AdjacencySeries,
}

impl DataArgs {
    fn load(&self) -> Result<Data> {
        let (t0, x) = read_series_csv(BufReader::new(File::open(&self.x)?))?;
        let ads = match &self.network {
            None => AdjacencySeries::empty(x.nrows(), t0),
            Some(p) => {
                let all = AdjacencySeries::read_long_csv(
                    BufReader::new(File::open(p)?),
                    Some(x.nrows()),
                )?;
                if all.t0() > t0 {
                    return Err(Error::MissingSnapshot { t: t0 });
                }
                let start = (t0 - all.t0()) as usize;
                all.slice(start.min(all.len()), all.len())
            }
        };
        Ok(Data { x, ads })
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn out_dir(out: Option<&Path>, default: &str) -> PathBuf {
    out.map_or_else(|| PathBuf::from(default), Path::to_path_buf)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(1);
    let out = cli.out.as_deref();
    match cli.cmd {
        Command::Simulate {
            scenario,
            n,
            burn_in,
            replicate,
        } => {
            let scen = parse_scenario(&scenario.scenario)?.build()?;
            let path = scen.simulate_path(n, &SimOptions::burn_in(burn_in), seed, replicate)?;
            let dir = out_dir(out, "sim");
            let mut x = Vec::new();
            write_series_csv(&mut x, &path.x, path.ads.t0())?;
            write_atomic(&dir.join("x.csv"), &x)?;
            let mut net = Vec::new();
            path.ads.write_long_csv(&mut net)?;
            write_atomic(&dir.join("network.csv"), &net)?;
        }
        Command::Fit { data, method } => {
            let d = data.load()?;
            let m = method.method()?;
            let fit = m.fit(
                &d.x,
                d.ads.slice(0, d.ads.len().min(d.x.ncols())).mats(),
                method.p_max,
            )?;
            let mut text = fit.to_json();
            text.push('\n');
            emit(out, text.as_bytes())?;
        }
        Command::Forecast {
            fit,
            data,
            policy,
            h,
        } => {
            let fit = ModelFit::from_json(&fs::read_to_string(&fit)?)?;
            let d = data.load()?;
            let n = d.x.ncols();
            let observed = d.ads.slice(0, d.ads.len().min(n));
            let future = &d.ads.mats()[observed.len()..];
            let f = forecast_h(&fit, &d.x, &observed, &policy.policy(), h, Some(future))?;
            let mut buf = Vec::new();
            f.write_csv(&mut buf)?;
            emit(out, &buf)?;
        }
        Command::Acf { x, max_lag } => {
            let (_, x) = read_series_csv(BufReader::new(File::open(&x)?))?;
            let mut buf = Vec::new();
            sample_acf(&x, max_lag)?.write_csv(&mut buf)?;
            emit(out, &buf)?;
        }
        Command::Depmeas {
            scenario,
            target,
            q,
            max_lag,
            reps,
            burn_in,
            mode,
            fit_from,
        } => {
            let scen = parse_scenario(&scenario.scenario)?.build()?;
            let mode = match mode {
                ModeArg::Joint => CouplingMode::Joint,
                ModeArg::NetworkOnly => CouplingMode::NetworkOnly,
                ModeArg::InnovationOnly => CouplingMode::InnovationOnly,
            };
            let cfg = CouplingConfig {
                q,
                max_lag,
                reps,
                seed,
                burn_in,
                mode,
                fit_from,
            };
            let run = match target {
                Target::X => estimate_delta_x(&scen, &cfg)?,
                Target::Network => estimate_delta_network(&scen.network, &cfg)?,
            };
            let mut buf = Vec::new();
            run.write_csv(&mut buf)?;
            match out {
                Some(p) => {
                    write_atomic(&p.join("delta.csv"), &buf)?;
                    let mut s = serde_json::to_string_pretty(&run.summary_json())?;
                    s.push('\n');
                    write_atomic(&p.join("summary.json"), s.as_bytes())?;
                }
                None => io::stdout().write_all(&buf)?,
            }
        }
        Command::Experiment { config } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let dir = out
                .map(Path::to_path_buf)
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(&cfg.id));
            let report = run_experiment(&cfg)?;
            report.write(&dir)?;
            eprintln!(
                "{} results, {} failed replicates -> {}",
                report.results.len(),
                report.failures.len(),
                dir.display()
            );
        }
        Command::Panel {
            levels,
            trade_dir,
            config,
            annual,
        } => {
            let cfg: RollingConfig = serde_json::from_str(&fs::read_to_string(&config)?)?;
            let frequency = if annual {
                Frequency::Annual
            } else {
                Frequency::Quarterly
            };
            let data = ingest_panel(
                &PanelPaths { levels, trade_dir },
                &PanelOptions { frequency },
            )?;
            if !data.row_stochastic && !data.column_stochastic {
                eprintln!("warning: weight matrices are neither row- nor column-stochastic");
            }
            let report = run_rolling_forecast(&data, &cfg)?;
            report.write(&out_dir(out, "panel"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
