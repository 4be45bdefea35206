use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nvcqed::experiments::{run, ExperimentReport, ExperimentSpec, Preset, ReportBody};
use nvcqed::io::{parse_config, write_report, RunManifest};
use nvcqed::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_CONVERGENCE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "nvcqed", version, about = "Driven resonator + cooled spin ensemble simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Steady Dicke coordinates over temperature and cooling rate.
    DickeMap(Common),
    /// Photon number under a square pulse (Rabi oscillations).
    RabiTransient(Common),
    /// Steady photon number versus drive frequency (Rabi splitting).
    RabiSpectrum(Common),
    /// Stimulated superradiant pulse and re-cooling.
    Superradiance(Common),
    /// Spin-frequency sensing from split spectra and detuning sweeps.
    Sense(Common),
    /// Cumulant equations against the exact master equation for a few spins.
    OracleCheck(Common),
}

impl Command {
    fn parts(&self) -> (&Common, &'static [Preset]) {
        match self {
            Command::DickeMap(c) => (c, &[Preset::Fig2b]),
            Command::RabiTransient(c) => (c, &[Preset::Fig3a]),
            Command::RabiSpectrum(c) => (c, &[Preset::Fig3b]),
            Command::Superradiance(c) => (c, &[Preset::Fig4]),
            Command::Sense(c) => (c, &[Preset::Fig5a, Preset::Fig5b]),
            Command::OracleCheck(c) => (c, &[Preset::OracleCheck]),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::InvalidSweep(_) => EXIT_CONFIG,
        Error::Io(_) | Error::WouldOverwrite(_) | Error::Json(_) => EXIT_IO,
        _ => EXIT_CONVERGENCE,
    }
}

fn load_spec(common: &Common, allowed: &[Preset]) -> nvcqed::Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => parse_config(path, Some(allowed[0])).map_err(|e| match e {
            Error::Io(io) => Error::Config { line: None, message: format!("cannot read {}: {io}", path.display()) },
            other => other,
        })?,
        None => ExperimentSpec::preset(allowed[0]),
    };
    if !allowed.contains(&spec.preset) {
        let names: Vec<&str> = allowed.iter().map(|p| p.name()).collect();
        return Err(Error::Config {
            line: None,
            message: format!("preset `{}` does not belong to this subcommand (expected {})", spec.preset, names.join(" or ")),
        });
    }
    if let Some(w) = common.workers {
        spec.workers = w;
    }
    spec.validate().map_err(|e| Error::Config { line: None, message: e.to_string() })?;
    Ok(spec)
}

fn summary(report: &ExperimentReport) {
    let mhz = |w: f64| w / std::f64::consts::TAU / 1e6;
    match &report.body {
        ReportBody::DickeMap(points) => println!("{} grid points", points.len()),
        ReportBody::RabiTransient(runs) => {
            for r in runs {
                match r.measured_frequency {
                    Some(f) => println!(
                        "eta_s {:e}: oscillation {:.3} MHz, predicted {:.3} MHz",
                        r.eta_s,
                        mhz(f),
                        mhz(r.predicted_frequency)
                    ),
                    None => println!("eta_s {:e}: no oscillation (modulation {:.3})", r.eta_s, r.envelope_modulation),
                }
            }
        }
        ReportBody::RabiSpectrum(runs) => {
            for r in runs {
                let f: Vec<String> = r.peaks.frequencies().iter().map(|&x| format!("{:.3}", mhz(x))).collect();
                println!("eta_s {:e}: peaks at [{}] MHz, predicted splitting {:.3} MHz", r.eta_s, f.join(", "), mhz(r.predicted.splitting()));
            }
        }
        ReportBody::Superradiance(runs) => {
            for r in runs {
                match r.metrics {
                    Some(m) => println!(
                        "eta_s {:e}: burst {:.3e} photons at {:.3e} s, duration {:.3e} s, plateau {:.3}",
                        r.eta_s, m.burst_peak, m.burst_time, m.duration, m.plateau
                    ),
                    None => println!("eta_s {:e}: no superradiant burst found", r.eta_s),
                }
            }
        }
        ReportBody::Sensing(s) => {
            for r in &s.spectra {
                match r.inferred_spin_detuning {
                    Some(d) => println!("spin detuning {:.3} MHz: inferred {:.3} MHz", mhz(r.spin_detuning), mhz(d)),
                    None => println!("spin detuning {:.3} MHz: {} peaks, no inference", mhz(r.spin_detuning), r.peaks.len()),
                }
            }
            for c in &s.curves {
                println!("drive offset {:.3} MHz: minimum at {:.3} MHz", mhz(c.drive_offset), mhz(c.spin_detunings[c.min_index]));
            }
        }
        ReportBody::OracleComparison(runs) => {
            for r in runs {
                println!(
                    "N = {}{}: photon number deviation {:.2e}, first-order {:.2e}",
                    r.n_spins,
                    if r.report_only { " (strong drive)" } else { "" },
                    r.deviation(nvcqed::Slot::AdA),
                    r.first_order_deviation()
                );
            }
        }
    }
    println!("wall time {:.2} s", report.wall_time);
}

fn execute(command: &Command) -> nvcqed::Result<bool> {
    let (common, allowed) = command.parts();
    let spec = load_spec(common, allowed)?;
    let report = run(&spec)?;
    let manifest = RunManifest::new(&spec, &report);
    let files = write_report(&report, &manifest, &common.out, common.force)?;
    summary(&report);
    println!("wrote {} files to {}", files.len(), common.out.display());
    for p in report.non_converged() {
        eprintln!(
            "not converged: {} point {} (residual {:.3e}, windowed change {:.3e})",
            p.curve, p.index, p.residual_norm, p.windowed_change
        );
    }
    Ok(report.all_converged())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CONVERGENCE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
