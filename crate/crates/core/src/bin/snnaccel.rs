// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use snnaccel::harness::{
    compare_distribution, efficiency_metrics, load_network_spec, run, PhaseDistribution, RunConfig,
    RunMode,
};
use snnaccel::io::load_image;

/// Golden model and cycle-level simulator for a spiking transformer accelerator.
///
/// Log verbosity is read from SNNACCEL_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "snnaccel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a network and write a cycle report.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "shape-only")]
        mode: RunMode,
        /// Input image tensor file (u8, [C, H, W]); required in functional mode.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        clock_mhz: u64,
        /// JSON report destination; the table always goes to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Peak throughput and efficiency arithmetic.
    Metrics {
        #[arg(long, default_value_t = 4096)]
        pes: u64,
        #[arg(long, default_value_t = 500)]
        clock_mhz: u64,
        #[arg(long)]
        area_mm2: Option<f64>,
        #[arg(long)]
        power_mw: Option<f64>,
    },
    /// Compare a report's phase distribution with a reference.
    Compare {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "table2")]
        reference: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SNNACCEL_LOG", "warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> snnaccel::Result<ExitCode> {
    match cmd {
        Command::Run {
            spec,
            mode,
            image,
            seed,
            clock_mhz,
            report,
        } => {
            let net = load_network_spec(&spec)?;
            let img = image.as_ref().map(load_image).transpose()?;
            let cfg = RunConfig {
                mode,
                seed,
                clock_mhz,
                spec_path: Some(spec),
                image_path: image,
                report_path: report.clone(),
                ..RunConfig::default()
            };
            let rep = run(&net, &cfg, img.as_ref())?;
            if let Some(path) = &report {
                std::fs::write(path, rep.to_json()?)?;
            }
            print!("{}", rep.to_table());
            Ok(if rep.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Metrics {
            pes,
            clock_mhz,
            area_mm2,
            power_mw,
        } => {
            if pes == 0
                || clock_mhz == 0
                || area_mm2.is_some_and(|a| a <= 0.0)
                || power_mw.is_some_and(|p| p <= 0.0)
            {
                return Err(snnaccel::Error::Argument(
                    "metrics inputs must be positive".into(),
                ));
            }
            let m = efficiency_metrics(pes, clock_mhz, area_mm2, power_mw);
            println!("peak throughput: {} GSOPS", m.peak_gsops);
            if let Some(a) = m.tsops_per_mm2 {
                println!("area efficiency: {a:.3} TSOPS/mm2");
            }
            if let Some(e) = m.tsops_per_w {
                println!("energy efficiency: {e:.3} TSOPS/W");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { report, reference } => {
            let text = std::fs::read_to_string(&report)?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| snnaccel::Error::Report(e.to_string()))?;
            let sim = PhaseDistribution::from_report_json(&value)?;
            let cmp = compare_distribution(&sim, &PhaseDistribution::named(&reference)?);
            print!("{}", cmp.to_table());
            Ok(if cmp.mandatory_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
