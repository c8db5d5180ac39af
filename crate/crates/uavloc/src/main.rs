//! Thin command-line front end over the `uavloc` library.
//!
//! Exit codes: 0 on success, 2 on scenario validation or argument errors,
//! 3 on runtime failures (I/O, solver).

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use uavloc::airsim::{simulate_emitter_capture, simulate_radar_capture};
use uavloc::harness::{
    campaign_clocks, export_capture, report_from_errors_csv, run_calibration, run_campaign,
    sweep_filter_window, sweep_table, CampaignOptions,
};
use uavloc::scene::{load_scenario, CaptureParams, Mode};
use uavloc::Error;

#[derive(Parser)]
#[command(name = "uavloc", version, about = "Distributed UAV radar/emitter localization testbed twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record a continuous capture segment to per-receiver IQ files.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's operating mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Number of back-to-back symbols to record.
        #[arg(long, default_value_t = 256)]
        snapshots: usize,
        /// Zero this fraction of Ethernet frames to exercise gap padding.
        #[arg(long, default_value_t = 0.0)]
        frame_loss: f64,
        /// Frame size in samples for --frame-loss.
        #[arg(long, default_value_t = 1024)]
        frame_size: usize,
    },
    /// Run the beacon synchronization calibration and print the offsets.
    Calibrate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional CSV output path for the offset table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full radar campaign (simulate, calibrate, track, localize).
    Radar(CampaignArgs),
    /// Run the full emitter campaign (simulate, calibrate, TDoA, localize).
    Emitter(CampaignArgs),
    /// Sweep rectangular filter windows and print the variance table.
    SweepFilter {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Candidate windows in seconds.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 5.0, 11.0, 21.0, 41.0, 81.0, 161.0, 321.0])]
        windows: Vec<f64>,
    },
    /// Recompute a summary from an errors.csv produced by a campaign.
    Report {
        #[arg(long)]
        errors: PathBuf,
    },
}

/// CLI-facing mode selector.
#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Radar,
    Emitter,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Radar => Mode::Radar,
            ModeArg::Emitter => Mode::Emitter,
        }
    }
}

#[derive(clap::Args)]
struct CampaignArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario's snapshot count.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Override the scenario's sample-domain SNR.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Worker pool size (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse(_) | Error::Validation(_) | Error::InvalidArgument(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> uavloc::Result<()> {
    match cli.command {
        Command::Simulate { scenario, seed, out, mode, snapshots, frame_loss, frame_size } => {
            let mut config = load_scenario(&scenario)?;
            if let Some(mode) = mode {
                config.mode = mode.into();
                config.validate()?;
            }
            // Continuous recording: symbols back to back, so the IQ files
            // are gapless unless frame loss is injected.
            let capture = CaptureParams {
                t0_s: config.capture.t0_s,
                n_snapshots: snapshots,
                snapshot_interval_s: config.waveform.symbol_length_s,
            };
            let clocks = campaign_clocks(&config, seed)?;
            let result = match config.mode {
                Mode::Radar => simulate_radar_capture(&config, &capture, clocks.as_deref(), seed)?,
                Mode::Emitter => {
                    simulate_emitter_capture(&config, &capture, clocks.as_deref(), seed)?
                }
            };
            let loss = if frame_loss > 0.0 { Some((frame_size, frame_loss, seed)) } else { None };
            let paths = export_capture(&result, &out, loss)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Calibrate { scenario, seed, out } => {
            let config = load_scenario(&scenario)?;
            let clocks = campaign_clocks(&config, seed)?.ok_or_else(|| {
                Error::Validation("calibrate requires a clock model in [impairments.clock]".into())
            })?;
            let corrections = run_calibration(&config, &clocks, seed)?;
            let mut table = String::from("receiver,constant_offset_s,residual_std_s\n");
            for o in &corrections.offsets {
                table.push_str(&format!("{},{},{}\n", o.receiver, o.constant_offset_s, o.residual_std_s));
            }
            match out {
                Some(path) => std::fs::write(path, table)?,
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::Radar(args) => run_mode(args, Mode::Radar),
        Command::Emitter(args) => run_mode(args, Mode::Emitter),
        Command::SweepFilter { scenario, seed, windows } => {
            let config = load_scenario(&scenario)?;
            let rows = sweep_filter_window(&config, &windows, seed)?;
            print!("{}", sweep_table(&rows));
            Ok(())
        }
        Command::Report { errors } => {
            print!("{}", report_from_errors_csv(&errors)?);
            Ok(())
        }
    }
}

fn run_mode(args: CampaignArgs, expected: Mode) -> uavloc::Result<()> {
    let config = load_scenario(&args.scenario)?;
    if config.mode != expected {
        return Err(Error::Validation(format!(
            "scenario mode {:?} does not match the requested subcommand",
            config.mode
        )));
    }
    let opts = CampaignOptions {
        seed: args.seed,
        workers: args.workers,
        snapshots_override: args.snapshots,
        snr_override: args.snr_db,
    };
    let report = run_campaign(&args.scenario, &opts, &args.out)?;
    print!("{}", report.summary_text());
    Ok(())
}
