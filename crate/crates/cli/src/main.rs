mod settings;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};
use uoi::experiment::{run_experiment, write_synthetic, ExperimentTask};
use uoi::UoiError;

use settings::{normalize_key, read_config_file, Settings};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn opt(name: &'static str, value: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name(value).help(help)
}

fn shared_args() -> Vec<Arg> {
    vec![
        opt("x", "PATH", "Feature matrix CSV (samples in rows)"),
        opt("y", "PATH", "Response vector CSV"),
        opt("beta", "PATH", "Known coefficients CSV, enables selection metrics"),
        opt("b1", "N", "Selection bootstraps [default: 20]"),
        opt("b2", "N", "Estimation bootstraps [default: 10]"),
        opt("grid-size", "Q", "Number of penalty values [default: 48]"),
        opt("grid-ratio", "R", "Smallest over largest penalty [default: 0.001]"),
        opt("seed", "S", "Master seed [default: 0]"),
        opt("workers", "W", "Worker threads [default: 1]").env("UOI_WORKERS"),
        opt("reps", "K", "Random 80/10/10 repetitions [default: 100]"),
        opt("variant", "NAME", "Selection variant: bolasso or stability [default: bolasso]"),
        opt("alpha", "A", "Stability selection weight lower bound [default: 0.5]"),
        opt("pi-thr", "T", "Stability selection frequency threshold [default: 0.75]"),
        opt("subsamples", "N", "Stability selection subsamples [default: 100]"),
        opt("tol", "EPS", "Solver tolerance [default: 1e-6]"),
        opt("max-iter", "N", "Solver iteration budget [default: 10000]"),
        opt("standardize", "BOOL", "Fit on standardized columns [default: true]"),
        opt("baseline", "BOOL", "Also fit the validation-tuned penalized model [default: true]"),
        opt("out", "PATH", "Write the JSON result here instead of stdout"),
        opt("csv-out", "PATH", "Also write a CSV table of aggregate metrics"),
    ]
}

fn generator_args() -> Vec<Arg> {
    vec![
        opt("n", "N", "Samples [default: 1200]"),
        opt("p", "P", "Features [default: 300]"),
        opt("k", "K", "Nonzero coefficients [default: 100]"),
        opt(
            "distribution",
            "NAME",
            "Coefficient magnitudes: laplacian-like-decay, uniform, exponential-increase, clustered-positive",
        ),
        opt("noise", "M", "Noise variance as a multiple of sum |beta| [default: 0.2]"),
        opt("beta-min", "V", "Smallest coefficient magnitude [default: 0.1]"),
        opt("beta-max", "V", "Largest coefficient magnitude [default: 3]"),
    ]
}

fn config_arg() -> Arg {
    opt("config", "PATH", "Flat `key = value` file; flags override its entries")
}

fn command() -> Command {
    let with_shared = |c: Command| c.arg(config_arg()).args(shared_args());
    Command::new("uoi")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Union of Intersections model selection and estimation")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_shared(Command::new("lasso").about("UoI with Lasso selection on a regression data set")))
        .subcommand(with_shared(
            Command::new("logistic").about("UoI with L1-logistic selection on a binary response"),
        ))
        .subcommand(
            with_shared(Command::new("cur").about("Column subset selection on a matrix (--x)"))
                .arg(opt("ranks", "LIST", "Comma-separated target ranks [default: 2,4,6]"))
                .arg(opt("cols-per-rank", "C", "Columns sampled per rank and bootstrap [default: 10]"))
                .arg(opt("encoded", "BOOL", "Treat the matrix as {-1,0,1} coded [default: false]")),
        )
        .subcommand(
            Command::new("synth")
                .about("Draw a synthetic regression data set into a directory")
                .arg(config_arg())
                .args(generator_args())
                .arg(opt("seed", "S", "Master seed [default: 0]"))
                .arg(opt("out", "DIR", "Output directory [default: .]")),
        )
        .subcommand(
            with_shared(Command::new("sweep").about("Repeat UoI on synthetic draws across a parameter range"))
                .args(generator_args())
                .arg(opt("parameter", "NAME", "Swept parameter: b1, b2, noise or sparsity"))
                .arg(opt("values", "LIST", "Comma-separated parameter values"))
                .arg(opt(
                    "samples-per-feature",
                    "R",
                    "For sparsity sweeps, keep n = R * p as p changes",
                )),
        )
}

/// Config file entries first, then environment defaults, then explicit flags.
fn merged_settings(name: &str, sub: &ArgMatches) -> Result<Settings, String> {
    let mut values: BTreeMap<String, String> = match sub.get_one::<String>("config") {
        Some(p) => read_config_file(&PathBuf::from(p)).map_err(|e| e.0)?,
        None => BTreeMap::new(),
    };
    for id in sub.ids() {
        let id = id.as_str();
        if id == "config" {
            continue;
        }
        let Some(v) = sub.get_one::<String>(id) else {
            continue;
        };
        match sub.value_source(id) {
            Some(ValueSource::CommandLine) => {
                values.insert(normalize_key(id), v.clone());
            }
            Some(_) => {
                values.entry(normalize_key(id)).or_insert_with(|| v.clone());
            }
            None => {}
        }
    }
    let cmd = command();
    let known: Vec<&str> = cmd
        .find_subcommand(name)
        .expect("parsed subcommand exists")
        .get_arguments()
        .map(|a| a.get_id().as_str())
        .filter(|i| *i != "config")
        .collect();
    let settings = Settings::new(values);
    settings.check_known(&known).map_err(|e| e.0)?;
    Ok(settings)
}

fn exit_code_for(e: &UoiError) -> u8 {
    match e {
        UoiError::InvalidArgument(_) => EXIT_USAGE,
        UoiError::InvalidData(_) | UoiError::Parse { .. } | UoiError::Io { .. } => EXIT_DATA,
        UoiError::Solver(_) | UoiError::Numerical(_) => EXIT_NUMERICAL,
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let settings = match merged_settings(name, sub) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, e),
    };

    if name == "synth" {
        let spec = match settings.generator() {
            Ok(s) => s,
            Err(e) => return fail(EXIT_USAGE, e),
        };
        let dir = settings.output().unwrap_or_else(|| PathBuf::from("."));
        return match write_synthetic(&spec, &dir) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(exit_code_for(&e), e),
        };
    }

    let task = match name {
        "lasso" => ExperimentTask::Lasso,
        "logistic" => ExperimentTask::Logistic,
        "cur" => ExperimentTask::Cur,
        "sweep" => ExperimentTask::Sweep,
        other => return fail(EXIT_USAGE, format!("unknown subcommand {other}")),
    };
    let config = match settings.experiment(task) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let record = match run_experiment(&config) {
        Ok(r) => r,
        Err(e) => return fail(exit_code_for(&e), e),
    };
    let json = match record.to_json() {
        Ok(j) => j,
        Err(e) => return fail(EXIT_NUMERICAL, e),
    };
    let written = match &config.output {
        Some(p) => uoi::io::write_atomic(p, json.as_bytes()),
        None => {
            println!("{json}");
            Ok(())
        }
    };
    if let Err(e) = written {
        return fail(exit_code_for(&e), e);
    }
    if let Some(p) = &config.csv_output {
        if let Err(e) = uoi::io::write_atomic(p, record.metrics_csv().as_bytes()) {
            return fail(exit_code_for(&e), e);
        }
    }
    if record.all_failed() {
        return fail(
            EXIT_NUMERICAL,
            format!("all {} repetitions failed", record.repetitions.len()),
        );
    }
    ExitCode::SUCCESS
}
