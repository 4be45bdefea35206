//! CSV tables, plot script and manifest for a finished run.
//!
//! Floats are written in shortest round-trip exponent form, so identical
//! runs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use super::RunManifest;
use crate::constants::TAU;
use crate::error::{Error, Result};
use crate::experiments::{
    number_label, spectrum_label, transmission_label, ExperimentReport, OracleRun, ReportBody, SpectrumRun,
};
use crate::integrator::Trajectory;
use crate::state::Slot;

enum Cell {
    F(f64),
    I(usize),
    B(bool),
    S(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:e}"),
            Cell::I(n) => n.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

fn opt(x: Option<f64>) -> Cell {
    x.map_or(Cell::Empty, Cell::F)
}

struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

const TRAJECTORY_HEADER: [&str; 5] = ["time_s", "photon_number", "upper_population", "dicke_j", "dicke_m"];

fn trajectory_table(name: String, traj: &Trajectory, with_field: bool) -> Table {
    let mut header = TRAJECTORY_HEADER.to_vec();
    if with_field {
        header.extend(["field_re", "field_im"]);
    }
    let mut t = Table::new(name, &header);
    for ((time, s), d) in traj.times.iter().zip(&traj.states).zip(&traj.dicke) {
        let mut row = vec![Cell::F(*time), Cell::F(s.photon_number()), Cell::F(s.upper_population()), Cell::F(d.j), Cell::F(d.m)];
        if with_field {
            let a = s.get(Slot::A);
            row.extend([Cell::F(a.re), Cell::F(a.im)]);
        }
        t.rows.push(row);
    }
    t
}

fn hz(x: f64) -> f64 {
    x / TAU
}

/// Curve files, peaks.csv and hybrid_modes.csv for drive-frequency spectra.
fn spectrum_tables(runs: &[SpectrumRun], with_spin_detuning: bool) -> Vec<Table> {
    let mut tables = Vec::new();
    let mut peaks = Table::new(
        "peaks.csv",
        &["curve", "eta_s_per_s", "spin_detuning_hz", "frequency_hz", "photon_number", "prominence"],
    );
    let mut modes = Table::new(
        "hybrid_modes.csv",
        &[
            "curve",
            "eta_s_per_s",
            "spin_detuning_hz",
            "dicke_j",
            "predicted_minus_hz",
            "predicted_plus_hz",
            "predicted_splitting_hz",
            "peak_count",
            "measured_splitting_hz",
            "dip_count",
            "inferred_spin_detuning_hz",
        ],
    );
    for r in runs {
        let label = spectrum_label(r.eta_s, with_spin_detuning.then_some(r.spin_detuning));
        let mut curve = Table::new(format!("spectrum_{label}.csv"), &["drive_detuning_hz", "photon_number"]);
        for (x, n) in r.drive_detunings.iter().zip(&r.photon_numbers) {
            curve.rows.push(vec![Cell::F(hz(*x)), Cell::F(*n)]);
        }
        tables.push(curve);
        for p in &r.peaks.peaks {
            peaks.rows.push(vec![
                Cell::S(label.clone()),
                Cell::F(r.eta_s),
                Cell::F(hz(r.spin_detuning)),
                Cell::F(hz(p.frequency)),
                Cell::F(p.height),
                Cell::F(p.prominence),
            ]);
        }
        let f = r.peaks.frequencies();
        let measured = (f.len() == 2).then(|| hz(f[1] - f[0]));
        modes.rows.push(vec![
            Cell::S(label),
            Cell::F(r.eta_s),
            Cell::F(hz(r.spin_detuning)),
            Cell::F(r.j_ss),
            Cell::F(hz(r.predicted.omega_minus)),
            Cell::F(hz(r.predicted.omega_plus)),
            Cell::F(hz(r.predicted.splitting())),
            Cell::I(f.len()),
            opt(measured),
            Cell::I(r.dips.len()),
            opt(r.inferred_spin_detuning.map(hz)),
        ]);
    }
    tables.push(peaks);
    tables.push(modes);
    tables
}

fn oracle_tables(runs: &[OracleRun]) -> Vec<Table> {
    let mut tables = Vec::new();
    let mut dev_header = vec!["n_spins".to_string(), "drive_amplitude".into(), "report_only".into(), "fock_cutoff".into()];
    dev_header.extend(Slot::ALL.iter().map(|s| format!("max_rel_dev_{}", s.label())));
    let mut devs = Table { name: "oracle_deviations.csv".into(), header: dev_header, rows: Vec::new() };
    for r in runs {
        let name = format!("oracle_n{}{}.csv", r.n_spins, if r.report_only { "_strong" } else { "" });
        let mut header = vec!["time_s".to_string()];
        for s in Slot::ALL {
            for kind in ["cumulant", "exact"] {
                header.push(format!("{}_{kind}_re", s.label()));
                header.push(format!("{}_{kind}_im", s.label()));
            }
        }
        let mut t = Table { name, header, rows: Vec::new() };
        for ((time, c), e) in r.times.iter().zip(&r.cumulant).zip(&r.exact) {
            let mut row = vec![Cell::F(*time)];
            for s in Slot::ALL {
                for z in [c.get(s), e.get(s)] {
                    row.extend([Cell::F(z.re), Cell::F(z.im)]);
                }
            }
            t.rows.push(row);
        }
        tables.push(t);
        let mut row = vec![Cell::I(r.n_spins), Cell::F(r.drive_amplitude), Cell::B(r.report_only), Cell::I(r.fock_cutoff)];
        row.extend(r.max_relative_deviation.iter().map(|&d| Cell::F(d)));
        devs.rows.push(row);
    }
    tables.push(devs);
    tables
}

fn tables(report: &ExperimentReport) -> Vec<Table> {
    match &report.body {
        ReportBody::DickeMap(points) => {
            let mut t = Table::new(
                "dicke_map.csv",
                &["temperature_k", "eta_s_per_s", "upper_population", "dicke_j", "dicke_m", "j_fraction"],
            );
            for p in points {
                t.rows.push(vec![
                    Cell::F(p.temperature),
                    Cell::F(p.eta_s),
                    Cell::F(p.population),
                    Cell::F(p.dicke.j),
                    Cell::F(p.dicke.m),
                    Cell::F(p.j_fraction),
                ]);
            }
            vec![t]
        }
        ReportBody::RabiTransient(runs) => {
            let mut out: Vec<Table> = runs
                .iter()
                .map(|r| trajectory_table(format!("transient_eta_{}.csv", number_label(r.eta_s)), &r.trajectory, true))
                .collect();
            let mut f = Table::new(
                "rabi_frequencies.csv",
                &["eta_s_per_s", "dicke_j", "predicted_frequency_hz", "measured_frequency_hz", "envelope_modulation"],
            );
            for r in runs {
                f.rows.push(vec![
                    Cell::F(r.eta_s),
                    Cell::F(r.j_ss),
                    Cell::F(hz(r.predicted_frequency)),
                    opt(r.measured_frequency.map(hz)),
                    Cell::F(r.envelope_modulation),
                ]);
            }
            out.push(f);
            out
        }
        ReportBody::RabiSpectrum(runs) => spectrum_tables(runs, false),
        ReportBody::Superradiance(runs) => {
            let mut out: Vec<Table> = runs
                .iter()
                .map(|r| trajectory_table(format!("trajectory_eta_{}.csv", number_label(r.eta_s)), &r.trajectory, false))
                .collect();
            let mut t = Table::new(
                "pulses.csv",
                &[
                    "eta_s_per_s",
                    "burst_peak_photons",
                    "burst_time_s",
                    "pulse_end_s",
                    "duration_s",
                    "plateau_population",
                    "recool_time_s",
                ],
            );
            for r in runs {
                let m = r.metrics;
                t.rows.push(vec![
                    Cell::F(r.eta_s),
                    opt(m.map(|m| m.burst_peak)),
                    opt(m.map(|m| m.burst_time)),
                    opt(m.map(|m| m.pulse_end)),
                    opt(m.map(|m| m.duration)),
                    opt(m.map(|m| m.plateau)),
                    opt(m.and_then(|m| m.recool_time)),
                ]);
            }
            out.push(t);
            out
        }
        ReportBody::Sensing(s) => {
            let mut out = if s.spectra.is_empty() { Vec::new() } else { spectrum_tables(&s.spectra, true) };
            if !s.curves.is_empty() {
                let mut minima = Table::new(
                    "transmission_minima.csv",
                    &["curve", "eta_s_per_s", "drive_offset_hz", "min_spin_detuning_hz", "min_photon_number"],
                );
                for c in &s.curves {
                    let label = transmission_label(c.eta_s, c.drive_offset);
                    let mut t = Table::new(format!("transmission_{label}.csv"), &["spin_detuning_hz", "photon_number"]);
                    for (x, n) in c.spin_detunings.iter().zip(&c.photon_numbers) {
                        t.rows.push(vec![Cell::F(hz(*x)), Cell::F(*n)]);
                    }
                    out.push(t);
                    minima.rows.push(vec![
                        Cell::S(label),
                        Cell::F(c.eta_s),
                        Cell::F(hz(c.drive_offset)),
                        Cell::F(hz(c.spin_detunings[c.min_index])),
                        Cell::F(c.photon_numbers[c.min_index]),
                    ]);
                }
                out.push(minima);
            }
            out
        }
        ReportBody::OracleComparison(runs) => oracle_tables(runs),
    }
}

/// Python/matplotlib script drawing every curve file of the run.
fn plot_script(files: &[String]) -> String {
    let mut groups: Vec<(&str, &str, &str, &str)> = Vec::new();
    let plots = [
        ("spectrum_", "drive_detuning_hz", "photon_number", "linear"),
        ("transmission_eta", "spin_detuning_hz", "photon_number", "linear"),
        ("transient_", "time_s", "photon_number", "linear"),
        ("trajectory_", "time_s", "photon_number", "log"),
        ("trajectory_", "time_s", "upper_population", "linear"),
        ("oracle_n", "time_s", "ad_a_exact_re", "linear"),
        ("dicke_map", "dicke_j", "dicke_m", "linear"),
    ];
    for p in plots {
        if files.iter().any(|f| f.starts_with(p.0)) {
            groups.push(p);
        }
    }
    let mut s = String::from(
        "#!/usr/bin/env python3\n\
         # Plots the CSV files next to this script.\n\
         import csv\nimport os\n\nimport matplotlib.pyplot as plt\n\n\
         HERE = os.path.dirname(os.path.abspath(__file__))\n\n\n\
         def load(name):\n    with open(os.path.join(HERE, name), newline=\"\") as f:\n        rows = list(csv.DictReader(f))\n    return rows\n\n\n\
         def column(rows, key):\n    return [float(r[key]) for r in rows if r[key] != \"\"]\n\n\n",
    );
    s.push_str("FILES = [\n");
    for f in files {
        s.push_str(&format!("    \"{f}\",\n"));
    }
    s.push_str("]\n\nPLOTS = [\n");
    for (prefix, x, y, scale) in &groups {
        s.push_str(&format!("    (\"{prefix}\", \"{x}\", \"{y}\", \"{scale}\"),\n"));
    }
    s.push_str(
        "]\n\n\
         for prefix, x, y, scale in PLOTS:\n\
         \x20   fig, ax = plt.subplots()\n\
         \x20   for name in FILES:\n\
         \x20       if not name.startswith(prefix):\n\
         \x20           continue\n\
         \x20       rows = load(name)\n\
         \x20       if x not in rows[0] or y not in rows[0]:\n\
         \x20           continue\n\
         \x20       style = \"o\" if prefix == \"dicke_map\" else \"-\"\n\
         \x20       ax.plot(column(rows, x), column(rows, y), style, label=name[:-4])\n\
         \x20   ax.set_xlabel(x)\n\
         \x20   ax.set_ylabel(y)\n\
         \x20   ax.set_yscale(scale)\n\
         \x20   ax.legend(fontsize=\"small\")\n\
         \x20   fig.savefig(os.path.join(HERE, f\"{prefix.rstrip('_')}_{y}.png\"), dpi=150)\n\n\
         plt.show()\n",
    );
    s
}

/// Names of all files `write_report` would create for `report`.
pub fn planned_files(report: &ExperimentReport) -> Vec<String> {
    let mut names: Vec<String> = tables(report).into_iter().map(|t| t.name).collect();
    names.push("plot.py".into());
    names.push("manifest.json".into());
    names
}

/// Writes one CSV per curve, summary tables, `plot.py` and `manifest.json`
/// into `out_dir`. Without `force` nothing is written if any target exists.
pub fn write_report(report: &ExperimentReport, manifest: &RunManifest, out_dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    let tables = tables(report);
    let csv_names: Vec<String> = tables.iter().map(|t| t.name.clone()).collect();
    let mut contents: Vec<(String, Vec<u8>)> = Vec::with_capacity(tables.len() + 2);
    for t in &tables {
        contents.push((t.name.clone(), t.bytes()?));
    }
    contents.push(("plot.py".into(), plot_script(&csv_names).into_bytes()));
    let mut json = serde_json::to_vec_pretty(manifest)?;
    json.push(b'\n');
    contents.push(("manifest.json".into(), json));

    if !force {
        if let Some((name, _)) = contents.iter().find(|(n, _)| out_dir.join(n).exists()) {
            return Err(Error::WouldOverwrite(out_dir.join(name)));
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(contents.len());
    for (name, bytes) in contents {
        let path = out_dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}
