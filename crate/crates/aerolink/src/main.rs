use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aerolink::acceptance::{self, Options};
use aerolink::config::{parse_config, ScenarioConfig, KEYS};
use aerolink::output::Table;
use aerolink::pipeline::{self, SweepKey};
use aerolink::runner::{Parallel, THREADS_ENV};
use anyhow::{bail, Context, Result};
use clap::{Arg, ArgMatches, Command};

fn cli() -> Command {
    let mut root = Command::new("aerolink")
        .about("Air-to-air massive MIMO link analysis: rate sweeps, ACM design and validation")
        .after_help(format!("Set {THREADS_ENV} to choose the number of worker threads."))
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .global(true)
                .value_name("FILE")
                .help("Scenario file of `key = value` lines"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .short('o')
                .global(true)
                .value_name("DIR")
                .default_value(".")
                .help("Directory for CSV output"),
        );
    for k in KEYS {
        root = root.arg(Arg::new(k).long(k).global(true).value_name("VALUE").help_heading("Scenario overrides"));
    }
    root.subcommand(
        Command::new("sweep")
            .about("Closed-form and Monte-Carlo rates over one parameter")
            .arg(
                Arg::new("key").long("key").required(true).help("distance, n_tx, n_rx, num_interferers, rho or k_rice"),
            )
            .arg(Arg::new("grid").long("grid").required(true).help("Comma-separated values")),
    )
    .subcommand(Command::new("acm-design").about("Switching thresholds and accumulated data volume").arg(
        Arg::new("menu").long("menu").value_parser(["table1", "table2"]).help("Mode catalogue (default follows n_tx)"),
    ))
    .subcommand(
        Command::new("validate")
            .about("Run the acceptance suite")
            .arg(Arg::new("criteria").long("criteria").help("Comma-separated criterion numbers (default all)")),
    )
    .subcommand(
        Command::new("mse-curve")
            .about("Monte-Carlo detection MSE against multiples of the optimal regularizer")
            .arg(Arg::new("factors").long("factors").help("Comma-separated multiples (default 0.1,0.2,0.5,1,2,5,10)")),
    )
}

fn load_config(m: &ArgMatches) -> Result<ScenarioConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            parse_config(&text).with_context(|| format!("in {path}"))?
        }
        None => ScenarioConfig::default(),
    };
    for k in KEYS {
        if let Some(v) = m.get_one::<String>(k) {
            cfg.set(k, v).map_err(|e| anyhow::anyhow!("--{k}: {e}"))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, table: &Table) -> Result<()> {
    let path = dir.join(name);
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    table.write(std::io::BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run() -> Result<bool> {
    let m = cli().get_matches();
    let cfg = load_config(&m)?;
    let out = PathBuf::from(m.get_one::<String>("out").expect("defaulted"));
    let runner = Parallel::from_env()?;
    match m.subcommand() {
        Some(("sweep", s)) => {
            let key: SweepKey = s.get_one::<String>("key").expect("required").parse()?;
            let grid = pipeline::parse_grid(s.get_one::<String>("grid").expect("required"))?;
            fs::create_dir_all(&out)?;
            let rows = pipeline::run_sweep(&cfg, key, &grid, &runner)?;
            write(&out, &format!("sweep_{key}.csv"), &pipeline::sweep_table(key, &rows))?;
        }
        Some(("acm-design", s)) => {
            let n_tx = match s.get_one::<String>("menu").map(String::as_str) {
                Some("table2") => 64,
                Some(_) => 32,
                None => cfg.n_tx,
            };
            fs::create_dir_all(&out)?;
            let d = pipeline::run_acm_design(&cfg, &pipeline::reference_menu(n_tx), &runner)?;
            for (mo, rc) in &d.design.dropped {
                eprintln!("warning: mode ({mo}, {rc}) is never selected and was dropped");
            }
            if let Some(r) = d.design.uncovered_beyond_km {
                eprintln!("warning: no mode is supported beyond {r:.1} km");
            }
            if !d.design.monotone {
                eprintln!("warning: rate curve is not monotone; thresholds use the largest crossing");
            }
            write(&out, "acm_modes.csv", &pipeline::mode_table(&d.design.table))?;
            write(&out, "acm_volume.csv", &pipeline::volume_table(&d.profile))?;
        }
        Some(("mse-curve", s)) => {
            let factors = match s.get_one::<String>("factors") {
                Some(f) => pipeline::parse_grid(f)?,
                None => pipeline::MSE_FACTORS.to_vec(),
            };
            fs::create_dir_all(&out)?;
            let pts = pipeline::run_mse_curve(&cfg, &factors, &runner)?;
            write(&out, "mse_curve.csv", &pipeline::mse_table(&pts))?;
        }
        Some(("validate", s)) => {
            let ids: Vec<u8> = match s.get_one::<String>("criteria") {
                Some(list) => list
                    .split(',')
                    .map(|x| match x.trim().parse::<u8>() {
                        Ok(i @ 1..=10) => Ok(i),
                        _ => bail!("criterion `{}` is not in 1..=10", x.trim()),
                    })
                    .collect::<Result<_>>()?,
                None => (1..=10).collect(),
            };
            let opts = Options { trials: cfg.trials, placements: cfg.placements, master_seed: cfg.master_seed };
            let mut all = true;
            for id in ids {
                let o = acceptance::run_one(id, &opts, &runner);
                println!("{o}");
                all &= o.pass;
            }
            return Ok(all);
        }
        _ => unreachable!("subcommand required"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
