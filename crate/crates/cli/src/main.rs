use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use barrier_fleet::sim::{Mode, Policy};
use barrier_fleet_cli::batch;
use barrier_fleet_cli::config::{ConfigError, ScenarioConfig};
use barrier_fleet_cli::gateway::{self, ServeOptions};
use clap::{Parser, Subcommand};

/// Multi-vessel joust simulator with barrier-function safety filtering.
#[derive(Debug, Parser)]
#[command(name = "barrier-fleet", version)]
struct Args {
    #[command(subcommand)]
    command: Option<Command>,
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Campaign mode: colregs_only, cbf_only or colregs_plus_cbf.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Run exactly this many legs (disables the encounter target).
    #[arg(long, global = true)]
    legs: Option<usize>,
    /// Stop once this many encounters have been recorded.
    #[arg(long, global = true)]
    encounters: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of vehicles in the joust.
    #[arg(long, global = true)]
    vehicles: Option<usize>,
    /// Run all three modes and write a comparison table.
    #[arg(long, global = true)]
    table2: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for campaigns (default: all cores).
    #[arg(long, global = true, env = "BARRIER_FLEET_THREADS")]
    threads: Option<usize>,
    /// Run the real-time gateway instead of a campaign.
    #[arg(long, global = true)]
    serve: bool,
    /// Gateway port on 127.0.0.1 (0 picks a free port).
    #[arg(long, global = true, default_value_t = 7878)]
    port: u16,
    /// Make this vehicle externally driven.
    #[arg(long, global = true)]
    external: Option<usize>,
    /// Stop serving after this many legs.
    #[arg(long, global = true)]
    max_legs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Run a batch campaign (the default).
    Run,
    /// Run the real-time gateway; same as `--serve`.
    Serve,
}

fn load(args: &Args) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let j = &mut cfg.joust;
    if let Some(n) = args.legs {
        j.n_legs = n;
        j.target_encounters = None;
    }
    if let Some(n) = args.encounters {
        j.target_encounters = Some(n);
    }
    if let Some(s) = args.seed {
        j.seed = s;
    }
    if let Some(n) = args.vehicles {
        j.n_vehicles = n;
    }
    if let Some(m) = args.mode {
        j.mode = m;
    }
    if let Some(d) = &args.out {
        cfg.output.dir = d.clone();
    }
    if let Some(id) = args.external {
        cfg.vehicles.push(barrier_fleet_cli::config::VehicleOverride {
            id,
            policy: Some(Policy::External),
            ..Default::default()
        });
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    let (scenario, template) = match cfg.scenario().and_then(|s| Ok((s, cfg.grid_template()?))) {
        Ok(v) => v,
        Err(e) => {
            log::error!("invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };

    if args.serve || matches!(args.command, Some(Command::Serve)) {
        if let Err(e) = gateway::external_vehicle(&scenario) {
            log::error!("{e}");
            return ExitCode::from(2);
        }
        let listener = match TcpListener::bind(("127.0.0.1", args.port)) {
            Ok(l) => l,
            Err(e) => {
                log::error!("cannot bind port {}: {e}", args.port);
                return ExitCode::from(3);
            }
        };
        match listener.local_addr() {
            Ok(addr) => println!("listening on {addr}"),
            Err(e) => {
                log::error!("{e}");
                return ExitCode::from(3);
            }
        }
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
            log::warn!("no interrupt handler: {e}");
        }
        return match gateway::serve(&scenario, listener, shutdown, ServeOptions { max_legs: args.max_legs }) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                log::error!("{e}");
                ExitCode::from(3)
            }
        };
    }

    let dir = &cfg.output.dir;
    let result = if args.table2 {
        batch::run_table(&scenario, args.threads, &template, dir).map(|(table, _)| print!("{table}"))
    } else {
        batch::run_mode(&scenario, scenario.joust.mode, args.threads, &template, dir).map(|a| {
            print!("{}{}", batch::table_header(), batch::table_row(&a.summary));
            for f in &a.files {
                log::info!("wrote {}", f.display());
            }
        })
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(3)
        }
    }
}
