use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use noisylab::config::{ExperimentConfig, KEYS};
use noisylab::data::{load_dataset, save_dataset};
use noisylab::metrics::evaluate;
use noisylab::netcore::load_checkpoint;
use noisylab::pipeline::{load_data, run_sweep, run_to_dir, sweep_csv, SWEEP_AXES};
use noisylab::{Error, Result};

fn with_config_flags(cmd: Command) -> Command {
    let cmd = cmd
        .arg(Arg::new("config").long("config").value_name("FILE").help("TOML config file"))
        .arg(Arg::new("seed-flag").long("seed").value_name("N").help("master seed"));
    KEYS.iter().filter(|k| **k != "seed").fold(cmd, |cmd, key| {
        cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").hide(true))
    })
}

fn cli() -> Command {
    Command::new("noisylab")
        .about("Label-noise experiments: correction, co-learning, ablations and sweeps")
        .subcommand_required(true)
        .after_help("Every config key is also a flag, e.g. --noise.rho 0.2 --pipeline.k 20")
        .subcommand(
            with_config_flags(Command::new("run").about("Run the pipeline once"))
                .arg(Arg::new("out").long("out").value_name("DIR").default_value("runs/run")),
        )
        .subcommand(
            with_config_flags(Command::new("sweep").about("Run the pipeline over values of one parameter"))
                .arg(Arg::new("out").long("out").value_name("DIR").default_value("runs/sweep"))
                .arg(
                    Arg::new("axis")
                        .long("axis")
                        .required(true)
                        .value_parser(SWEEP_AXES.iter().map(|(a, _)| *a).collect::<Vec<_>>()),
                )
                .arg(Arg::new("values").long("values").required(true).value_delimiter(',').action(ArgAction::Append))
                .arg(Arg::new("seeds").long("seeds").value_parser(clap::value_parser!(usize)).default_value("3"))
                .arg(Arg::new("threads").long("threads").value_parser(clap::value_parser!(usize))),
        )
        .subcommand(
            with_config_flags(Command::new("gen-data").about("Write the configured synthetic train/test sets"))
                .arg(Arg::new("out").long("out").value_name("FILE").required(true))
                .arg(Arg::new("test-out").long("test-out").value_name("FILE")),
        )
        .subcommand(
            Command::new("eval")
                .about("Evaluate a model checkpoint on a dataset")
                .arg(Arg::new("model").long("model").value_name("FILE").required(true))
                .arg(Arg::new("data").long("data").value_name("FILE").required(true))
                .arg(Arg::new("out").long("out").value_name("DIR")),
        )
}

fn config_from(m: &ArgMatches) -> Result<ExperimentConfig> {
    let base = match m.get_one::<String>("config") {
        Some(path) => ExperimentConfig::load(Path::new(path))?,
        None => ExperimentConfig::default(),
    };
    let mut overrides: Vec<(&str, &str)> = KEYS
        .iter()
        .filter_map(|k| m.try_get_one::<String>(k).ok().flatten().map(|v| (*k, v.as_str())))
        .collect();
    if let Some(seed) = m.get_one::<String>("seed-flag") {
        overrides.push(("seed", seed));
    }
    base.with_overrides(overrides)
}

fn out_path(m: &ArgMatches) -> PathBuf {
    PathBuf::from(m.get_one::<String>("out").expect("has default"))
}

fn execute(matches: &ArgMatches) -> Result<()> {
    match matches.subcommand() {
        Some(("run", m)) => {
            let cfg = config_from(m)?;
            let out = out_path(m);
            let report = run_to_dir(&cfg, &out)?;
            print!("{}", report.to_text());
            println!("output: {}", out.display());
        }
        Some(("sweep", m)) => {
            let cfg = config_from(m)?;
            let out = out_path(m);
            let axis = m.get_one::<String>("axis").expect("required");
            let values: Vec<String> = m.get_many::<String>("values").expect("required").cloned().collect();
            let seeds = *m.get_one::<usize>("seeds").expect("has default");
            let threads = m
                .get_one::<usize>("threads")
                .copied()
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("config.resolved"), cfg.to_toml())?;
            let rows = run_sweep(&cfg, axis, &values, seeds, threads, Some(&out))?;
            let csv = sweep_csv(&rows);
            std::fs::write(out.join("sweep.csv"), &csv)?;
            print!("{csv}");
        }
        Some(("gen-data", m)) => {
            let cfg = config_from(m)?;
            if cfg.data_path.is_some() {
                return Err(Error::ConfigKey {
                    key: "data.path".into(),
                    message: "gen-data only generates synthetic data".into(),
                });
            }
            let (train, test) = load_data(&cfg)?;
            save_dataset(&train, Path::new(m.get_one::<String>("out").expect("required")))?;
            if let Some(path) = m.get_one::<String>("test-out") {
                save_dataset(&test, Path::new(path))?;
            }
            println!(
                "wrote {} training samples (noise ratio {:.4})",
                train.len(),
                train.noise_ratio().unwrap_or(0.0)
            );
        }
        Some(("eval", m)) => {
            let model = load_checkpoint(Path::new(m.get_one::<String>("model").expect("required")))?;
            let ds = load_dataset(Path::new(m.get_one::<String>("data").expect("required")))?;
            let truth = ds.clean_labels().unwrap_or(ds.labels());
            let report = evaluate(model.forward(ds.features())?.view(), truth)?;
            let csv = report.to_csv();
            if let Some(dir) = m.get_one::<String>("out") {
                let dir = Path::new(dir);
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("metrics.csv"), &csv)?;
                for c in &report.per_class {
                    if let Some(roc) = &c.roc {
                        std::fs::write(dir.join(format!("roc_class_{}.csv", c.class)), roc.to_csv())?;
                    }
                }
            }
            print!("{csv}");
        }
        _ => unreachable!("subcommand required"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    match execute(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
