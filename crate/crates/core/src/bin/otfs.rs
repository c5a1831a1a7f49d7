//! `otfs` command line: `simulate`, `sweep` and `verify`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use otfs::detect::DetectorKind;
use otfs::sim::config::{profile_file_name, KeyValues, SweepPlan};
use otfs::sim::{format_csv, run_sweep, Simulator};
use otfs::verify::run_checks;
use otfs::Error;

const WORKERS_ENV: &str = "OTFS_WORKERS";

#[derive(Parser)]
#[command(name = "otfs", version, about = "OTFS delay-Doppler link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one (channel profile, SNR) cell and trace one frame's iterations.
    Simulate(RunArgs),
    /// Run the full grid of channel profiles and SNRs, one CSV per profile.
    Sweep(RunArgs),
    /// Run the built-in consistency checks.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// Key = value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    keys: KeyFlags,
}

#[derive(Args, Default)]
struct KeyFlags {
    /// Delay bins L.
    #[arg(long)]
    delay_bins: Option<String>,
    /// Doppler bins K.
    #[arg(long)]
    doppler_bins: Option<String>,
    /// Subcarrier spacing in Hz.
    #[arg(long)]
    delta_f: Option<String>,
    /// QAM order.
    #[arg(long)]
    order: Option<String>,
    /// Comma-separated detectors: bpic-dsc, mmse, ml.
    #[arg(long)]
    detectors: Option<String>,
    /// SNR points in dB (comma-separated).
    #[arg(long)]
    snr: Option<String>,
    /// Number of channel paths P (comma-separated for sweeps).
    #[arg(long)]
    paths: Option<String>,
    /// Maximum delay index; also the cyclic prefix length.
    #[arg(long)]
    lmax: Option<String>,
    /// Maximum Doppler index (comma-separated for sweeps).
    #[arg(long)]
    kmax: Option<String>,
    /// Frame cap per cell.
    #[arg(long)]
    frames: Option<String>,
    /// Bit errors after which a detector stops in a cell.
    #[arg(long)]
    min_errors: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    t_max: Option<String>,
    #[arg(long)]
    zeta: Option<String>,
    /// full_mmse or scalar_mmse.
    #[arg(long)]
    init: Option<String>,
    /// Record detector wall time in the CSV.
    #[arg(long)]
    timing: Option<bool>,
    /// CSV file (simulate) or directory (sweep).
    #[arg(long)]
    output: Option<String>,
}

impl KeyFlags {
    fn to_keys(&self) -> Result<KeyValues, Error> {
        let mut kv = KeyValues::default();
        let timing = self.timing.map(|b| b.to_string());
        let pairs = [
            ("delay_bins", &self.delay_bins),
            ("doppler_bins", &self.doppler_bins),
            ("delta_f", &self.delta_f),
            ("order", &self.order),
            ("detectors", &self.detectors),
            ("snr", &self.snr),
            ("paths", &self.paths),
            ("lmax", &self.lmax),
            ("kmax", &self.kmax),
            ("frames", &self.frames),
            ("min_errors", &self.min_errors),
            ("seed", &self.seed),
            ("t_max", &self.t_max),
            ("zeta", &self.zeta),
            ("init", &self.init),
            ("timing", &timing),
            ("output", &self.output),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                kv.set(k, v)?;
            }
        }
        Ok(kv)
    }
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn load_plan(args: &RunArgs) -> SweepPlan {
    let result = (|| {
        let mut kv = match &args.config {
            Some(path) => KeyValues::parse(&std::fs::read_to_string(path)?)?,
            None => KeyValues::default(),
        };
        kv.override_with(&args.keys.to_keys()?);
        SweepPlan::from_keys(&kv)
    })();
    match result {
        Ok(mut plan) => {
            let workers = workers_from_env();
            plan.base.workers = workers;
            plan
        }
        Err(e) => usage_error(e),
    }
}

fn workers_from_env() -> Option<usize> {
    let raw = std::env::var(WORKERS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => usage_error(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")),
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn simulate(args: RunArgs) -> ExitCode {
    let plan = load_plan(&args);
    if plan.base.snr_db.len() != 1 || plan.paths.len() != 1 || plan.k_max.len() != 1 {
        usage_error("simulate runs a single cell: give one snr, one paths and one kmax value");
    }
    let mut cfg = plan.base.clone();
    if args.keys.timing.is_none() {
        cfg.timing = true;
    }
    cfg.output = plan.output.clone();
    let snr = cfg.snr_db[0];

    if cfg.detectors.contains(&DetectorKind::BpicDsc) {
        let sim = match Simulator::new(cfg.clone()) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        match sim.trace_trial(snr, 0) {
            Ok(states) => {
                eprintln!("trace of trial 0 (bpic-dsc, {snr} dB):");
                for s in &states {
                    let n = s.rho.len() as f64;
                    eprintln!(
                        "  t={:2}  |dx_dsc|={:.3e}  mean rho={:.4}  mean V={:.4e}  mean e={:.4e}",
                        s.t,
                        s.dsc_change(),
                        s.rho.iter().sum::<f64>() / n,
                        s.v_hat.iter().sum::<f64>() / n,
                        s.e.iter().sum::<f64>() / n,
                    );
                }
            }
            Err(e) => eprintln!("trace of trial 0 failed: {e}"),
        }
    }

    match run_sweep(&cfg) {
        Ok(records) => {
            print!("{}", format_csv(&records));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn sweep(args: RunArgs) -> ExitCode {
    if args.keys.seed.is_none() {
        Cli::command()
            .error(ErrorKind::MissingRequiredArgument, "sweep requires --seed")
            .exit();
    }
    let plan = load_plan(&args);
    let dir = plan.output.clone().unwrap_or_else(|| PathBuf::from("results"));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return fail(e.into());
    }
    for mut cfg in plan.configs() {
        let path = dir.join(profile_file_name(&cfg.profile));
        cfg.output = Some(path.clone());
        eprintln!("P={} k_max={} -> {}", cfg.profile.paths, cfg.profile.k_max, path.display());
        if let Err(e) = run_sweep(&cfg) {
            return fail(e);
        }
    }
    ExitCode::SUCCESS
}

fn verify() -> ExitCode {
    match run_checks() {
        Ok(checks) => {
            let mut ok = true;
            for c in &checks {
                println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify => verify(),
    }
}
