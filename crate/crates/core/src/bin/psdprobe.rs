use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use psdprobe::harness::{
    calibrate, run_experiment, scaling_report, write_report, CalibrationOptions, CalibrationReport, ExperimentConfig,
    Format, ScalingOptions, ScalingReport, Suite, TesterKind,
};
use psdprobe::oracle::Bulk;
use psdprobe::{Error, Result};

#[derive(Parser)]
#[command(name = "psdprobe", version, about = "Query-counted PSD testing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// First trial seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials (per family and cell for calibrate, per probe for scaling).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Leave wall times out so reruns give identical files.
        #[arg(long)]
        no_timing: bool,
    },
    /// Calibrate a tester constant.
    Calibrate {
        #[arg(long)]
        suite: String,
        /// Comma-separated dimensions (default: the suite's own).
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Fixed constants, as `name=value`.
        #[arg(long = "set", value_parser = parse_constant)]
        set: Vec<(String, f64)>,
    },
    /// Fit query-scaling exponents by bisecting the size constant.
    Scaling {
        #[arg(long)]
        tester: String,
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long = "set", value_parser = parse_constant)]
        set: Vec<(String, f64)>,
        /// Bulk spectrum: flat, uniform, harmonic or harmonic:<a>.
        #[arg(long)]
        bulk: Option<String>,
    },
}

fn parse_constant(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v: f64 = v.parse().map_err(|e| format!("{e}"))?;
    Ok((k.to_string(), v))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn calibration_csv(rep: &CalibrationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["suite", "eps", "dim", "value", "metric", "measurement"])?;
    for c in &rep.cells {
        for (k, v) in &c.metrics {
            w.write_record([
                rep.suite.name().to_string(),
                c.eps.to_string(),
                c.dim.to_string(),
                c.value.to_string(),
                k.clone(),
                v.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8"))
}

fn scaling_csv(rep: &ScalingReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tester", "p", "eps", "dim", "kappa", "queries", "success", "saturated"])?;
    for pt in &rep.points {
        w.write_record([
            rep.tester.name().to_string(),
            rep.p.to_string(),
            pt.eps.to_string(),
            pt.dim.to_string(),
            pt.kappa.to_string(),
            pt.queries.to_string(),
            pt.success.to_string(),
            pt.saturated.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8"))
}

fn execute(cli: Cli) -> Result<()> {
    let format: Format = cli.common.format.parse()?;
    match cli.command {
        Command::Run { config, no_timing } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = cli.common.seed {
                cfg.seed0 = s;
            }
            if let Some(t) = cli.common.trials {
                cfg.trials = t;
            }
            if no_timing {
                cfg.timing = false;
            }
            cfg.validate()?;
            let report = run_experiment(&cfg)?;
            let dir = cli.common.out.or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
            println!("{}", serde_json::to_string_pretty(&report.summary)?);
            if let Some(dir) = dir {
                for path in write_report(&report, &dir, format)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            Ok(())
        }
        Command::Calibrate { suite, dims, eps, set } => {
            let suite: Suite = suite.parse()?;
            let mut opts = CalibrationOptions { dims, eps, constants: set.into_iter().collect(), ..Default::default() };
            if let Some(s) = cli.common.seed {
                opts.seed0 = s;
            }
            if let Some(t) = cli.common.trials {
                opts.trials = t;
            }
            let rep = calibrate(suite, &opts)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            if let Some(dir) = &cli.common.out {
                let path = match format {
                    Format::Json => write_file(dir, "calibration.json", &serde_json::to_string_pretty(&rep)?)?,
                    Format::Csv => write_file(dir, "calibration.csv", &calibration_csv(&rep)?)?,
                };
                eprintln!("wrote {}", path.display());
            }
            rep.ensure_separated()
        }
        Command::Scaling { tester, p, eps, dims, set, bulk } => {
            let tester: TesterKind = tester.parse()?;
            let bulk = bulk.map(|b| b.parse::<Bulk>()).transpose()?;
            let mut opts = ScalingOptions { constants: set.into_iter().collect(), bulk, ..Default::default() };
            if let Some(s) = cli.common.seed {
                opts.seed0 = s;
            }
            if let Some(t) = cli.common.trials {
                opts.trials = t;
            }
            let rep = scaling_report(tester, p, &eps, &dims, &opts)?;
            print!("{}", rep.table());
            if let Some(dir) = &cli.common.out {
                let path = match format {
                    Format::Json => write_file(dir, "scaling.json", &serde_json::to_string_pretty(&rep)?)?,
                    Format::Csv => write_file(dir, "scaling.csv", &scaling_csv(&rep)?)?,
                };
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::NonSeparation(_) => 3,
                _ => 1,
            })
        }
    }
}
