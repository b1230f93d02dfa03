// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end for `layergeo`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use layergeo::report::{
    cmd_analyze, cmd_dims, cmd_oracle, cmd_simulate, cmd_synth, AnalyzeOptions, DimsOptions,
};
use layergeo::Error;

#[derive(Parser)]
#[command(name = "layergeo", version, about = "Layer geometry diagnostics for hidden-state dumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Correlator, cosine and (optionally) Gram spectra for every layer of a dump.
    Analyze {
        trace: PathBuf,
        #[arg(long)]
        spectra: bool,
        #[arg(long, default_value_t = layergeo::geometry::DEFAULT_CLIP)]
        clip: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Calibrate on a random-weight baseline and estimate d_model and d_machine.
    Dims {
        model: PathBuf,
        baseline: PathBuf,
        #[arg(long)]
        allow_mismatch: bool,
        /// Additional random-weight baselines averaged into the calibration.
        #[arg(long, num_args = 1..)]
        multi_baseline: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a projection cascade campaign from a JSON config.
    Simulate {
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Monte Carlo estimate of E[cos^2] on the unit sphere.
    Oracle {
        #[arg(long, value_delimiter = ',', default_value = "2,10,100,1000")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write a synthetic dump described by a JSON spec.
    Synth {
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Analyze { trace, spectra, clip, out } => {
            let opts = AnalyzeOptions { spectra, clip, out_dir: out };
            let report = cmd_analyze(&trace, &opts)?;
            println!(
                "{}: {} layers, argmin layer {}, E_model {:e}, E_final {:e}",
                report.model_label,
                report.records.len(),
                report.argmin_layer,
                report.e_model,
                report.e_final
            );
        }
        Command::Dims { model, baseline, allow_mismatch, multi_baseline, out } => {
            let opts = DimsOptions { allow_mismatch, extra_baselines: multi_baseline, out_dir: out };
            let report = cmd_dims(&model, &baseline, &opts)?;
            let est = &report.estimate;
            println!(
                "d_model {:.3} (layer {}), d_machine {:.3}",
                est.d_model, est.working_layer, est.d_machine
            );
            for w in &est.calibration.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Simulate { spec, seed, out } => {
            let report = cmd_simulate(&spec, seed, &out)?;
            println!("{} cascade runs written to {}", report.runs.len(), out.display());
        }
        Command::Oracle { dims, samples, seed, out } => {
            for row in cmd_oracle(&dims, samples, seed, &out)? {
                println!(
                    "d={} mean={:.6} exact={:.6} z={:.2}",
                    row.d, row.mc_mean, row.exact, row.z_score
                );
            }
        }
        Command::Synth { spec, seed, out } => {
            cmd_synth(&spec, seed, &out)?;
            println!("trace written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "layer": e.layer(),
            });
            eprintln!("{payload}");
            ExitCode::from(e.exit_code())
        }
    }
}
