//! TOML run configuration.
//!
//! Every frequency, rate, detuning and drive amplitude must carry a unit
//! flag: `{ value = 0.8e6, angular = false }` is read as 2π·0.8e6 rad/s,
//! `angular = true` takes the value as given. Grids take the same flag:
//! `{ values = [...], angular = ... }` or `{ start, stop, count, angular }`.
//! Temperatures are in kelvin and times in seconds.

use std::fmt;
use std::path::Path;

use serde::de::value::MapAccessDeserializer;
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Deserialize;
use toml::Spanned;

use crate::constants::TAU;
use crate::error::{Error, Result};
use crate::experiments::{linear_grid, ExperimentSpec, Preset};
use crate::model::SystemParams;

const PARAM_SETS: [&str; 2] = ["fig3", "fig4"];

/// A float that also accepts TOML integers.
#[derive(Debug, Clone, Copy)]
struct Number(f64);

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Number;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Number, E> {
                Ok(Number(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Number, E> {
                Ok(Number(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Number, E> {
                Ok(Number(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlaggedValue {
    value: Number,
    angular: bool,
}

/// Physical value with its unit flag, resolved to angular units.
#[derive(Debug, Clone, Copy)]
struct Quantity(f64);

fn unit_factor(angular: bool) -> f64 {
    if angular {
        1.0
    } else {
        TAU
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Quantity;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a table `{ value = ..., angular = true|false }`")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Quantity, E> {
                Err(E::custom(format!(
                    "bare number {v} needs a unit flag: write {{ value = {v:e}, angular = true|false }}"
                )))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Quantity, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Quantity, E> {
                self.visit_f64(v as f64)
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<Quantity, A::Error> {
                let f = FlaggedValue::deserialize(MapAccessDeserializer::new(map))?;
                Ok(Quantity(f.value.0 * unit_factor(f.angular)))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridTable {
    values: Option<Vec<Number>>,
    start: Option<Number>,
    stop: Option<Number>,
    count: Option<usize>,
    angular: Option<bool>,
}

enum GridInput {
    /// Plain list; only allowed where no unit flag is needed.
    List(Vec<f64>),
    Table(GridTable),
}

impl<'de> Deserialize<'de> for GridInput {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = GridInput;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of numbers or a grid table")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<GridInput, A::Error> {
                let mut out = Vec::new();
                while let Some(Number(x)) = seq.next_element()? {
                    out.push(x);
                }
                Ok(GridInput::List(out))
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<GridInput, A::Error> {
                GridTable::deserialize(MapAccessDeserializer::new(map)).map(GridInput::Table)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ParamsSection {
    omega_c: Option<Quantity>,
    kappa_c: Option<Quantity>,
    kappa_1: Option<Quantity>,
    omega_s: Option<Quantity>,
    gamma_s: Option<Quantity>,
    eta_s: Option<Quantity>,
    chi_s: Option<Quantity>,
    g_s: Option<Quantity>,
    omega_d: Option<Quantity>,
    n_spins: Option<Number>,
    temperature: Option<Number>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DriveSection {
    amplitude: Option<Quantity>,
    strong_amplitude: Option<Quantity>,
    pulse_duration: Option<Number>,
    tail_duration: Option<Number>,
    samples: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    eta_values: Option<Spanned<GridInput>>,
    temperatures: Option<Spanned<GridInput>>,
    drive_detunings: Option<Spanned<GridInput>>,
    spin_detunings: Option<Spanned<GridInput>>,
    spin_sweep: Option<Spanned<GridInput>>,
    drive_offsets: Option<Spanned<GridInput>>,
    oracle_spins: Option<Vec<usize>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct IntegrationSection {
    rel_tol: Option<Number>,
    abs_tol: Option<Number>,
    max_step: Option<Number>,
    initial_step: Option<Number>,
    max_steps: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SteadySection {
    rel_tol: Option<Number>,
    window: Option<Number>,
    max_time: Option<Number>,
    scale_floor: Option<Number>,
    divergence_bound: Option<Number>,
    polish: Option<bool>,
    polish_trigger: Option<Number>,
    integration: Option<IntegrationSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<Spanned<String>>,
    workers: Option<usize>,
    #[serde(default)]
    params: ParamsSection,
    #[serde(default)]
    drive: DriveSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    integration: IntegrationSection,
    #[serde(default)]
    steady: SteadySection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn config_error(text: &str, span: Option<std::ops::Range<usize>>, message: impl Into<String>) -> Error {
    Error::Config { line: span.map(|s| line_of(text, s.start)), message: message.into() }
}

fn required_keys_message() -> String {
    let experiments: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
    format!(
        "missing required key `preset`; required keys: preset = one of {} (or the parameter sets {})",
        experiments.join(", "),
        PARAM_SETS.join(", ")
    )
}

fn resolve_grid(text: &str, name: &str, grid: Spanned<GridInput>, needs_flag: bool) -> Result<Vec<f64>> {
    let span = grid.span();
    let err = |m: String| config_error(text, Some(span.clone()), format!("`{name}`: {m}"));
    match grid.into_inner() {
        GridInput::List(v) if needs_flag => Err(err(format!(
            "list of {} values needs a unit flag: write {{ values = [...], angular = true|false }}",
            v.len()
        ))),
        GridInput::List(v) => Ok(v),
        GridInput::Table(t) => {
            let factor = match (t.angular, needs_flag) {
                (Some(a), true) => unit_factor(a),
                (None, true) => return Err(err("missing unit flag `angular`".into())),
                (Some(_), false) => return Err(err("takes no unit flag".into())),
                (None, false) => 1.0,
            };
            let values = match (t.values, t.start, t.stop, t.count) {
                (Some(v), None, None, None) => v.into_iter().map(|n| n.0).collect(),
                (None, Some(a), Some(b), Some(n)) => {
                    if n == 0 {
                        return Err(err("`count` must be >= 1".into()));
                    }
                    linear_grid(a.0, b.0, n)
                }
                _ => return Err(err("give either `values` or all of `start`, `stop`, `count`".into())),
            };
            Ok(values.into_iter().map(|x| x * factor).collect())
        }
    }
}

fn apply_integration(cfg: &mut crate::integrator::IntegrationConfig, s: IntegrationSection) {
    if let Some(v) = s.rel_tol {
        cfg.rel_tol = v.0;
    }
    if let Some(v) = s.abs_tol {
        cfg.abs_tol = v.0;
    }
    if let Some(v) = s.max_step {
        cfg.max_step = v.0;
    }
    if let Some(v) = s.initial_step {
        cfg.initial_step = v.0;
    }
    if let Some(v) = s.max_steps {
        cfg.max_steps = v;
    }
}

fn resolve_preset(text: &str, name: &Spanned<String>, fallback: Option<Preset>) -> Result<(Preset, Option<SystemParams>)> {
    let s = name.get_ref().as_str();
    match s {
        "fig3" => Ok((fallback.unwrap_or(Preset::Fig3b), Some(SystemParams::fig3()))),
        "fig4" => Ok((fallback.unwrap_or(Preset::Fig4), Some(SystemParams::fig4()))),
        _ => s.parse::<Preset>().map(|p| (p, None)).map_err(|_| {
            config_error(text, Some(name.span()), format!("unknown preset `{s}`; {}", required_keys_message()))
        }),
    }
}

/// Parses a config. A parameter-set preset (`fig3`, `fig4`) runs the
/// `fallback` scenario, or the natural one for that set when `None`.
pub fn parse_config_str(text: &str, fallback: Option<Preset>) -> Result<ExperimentSpec> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| config_error(text, e.span(), e.message().to_string()))?;
    let Some(preset_name) = &file.preset else {
        return Err(Error::Config { line: None, message: required_keys_message() });
    };
    let (preset, param_set) = resolve_preset(text, preset_name, fallback)?;
    let mut spec = ExperimentSpec::preset(preset);
    if let Some(p) = param_set {
        spec.params = p;
    }
    if let Some(w) = file.workers {
        spec.workers = w;
    }

    let p = &mut spec.params;
    let q = file.params;
    for (slot, v) in [
        (&mut p.omega_c, q.omega_c),
        (&mut p.kappa_c, q.kappa_c),
        (&mut p.kappa_1, q.kappa_1),
        (&mut p.omega_s, q.omega_s),
        (&mut p.gamma_s, q.gamma_s),
        (&mut p.eta_s, q.eta_s),
        (&mut p.chi_s, q.chi_s),
        (&mut p.g_s, q.g_s),
        (&mut p.omega_d, q.omega_d),
    ] {
        if let Some(Quantity(x)) = v {
            *slot = x;
        }
    }
    if let Some(n) = q.n_spins {
        p.n_spins = n.0;
    }
    if let Some(t) = q.temperature {
        p.temperature = t.0;
    }

    let d = file.drive;
    if let Some(Quantity(a)) = d.amplitude {
        spec.drive_amplitude = a;
    }
    if let Some(Quantity(a)) = d.strong_amplitude {
        spec.strong_drive_amplitude = Some(a);
    }
    if let Some(t) = d.pulse_duration {
        spec.pulse_duration = t.0;
    }
    if let Some(t) = d.tail_duration {
        spec.tail_duration = Some(t.0);
    }
    if let Some(n) = d.samples {
        spec.samples = n;
    }

    let s = file.sweep;
    let grids: [(&str, Option<Spanned<GridInput>>, &mut Vec<f64>, bool); 6] = [
        ("eta_values", s.eta_values, &mut spec.eta_values, true),
        ("temperatures", s.temperatures, &mut spec.temperatures, false),
        ("drive_detunings", s.drive_detunings, &mut spec.drive_detunings, true),
        ("spin_detunings", s.spin_detunings, &mut spec.spin_detunings, true),
        ("spin_sweep", s.spin_sweep, &mut spec.spin_sweep, true),
        ("drive_offsets", s.drive_offsets, &mut spec.drive_offsets, true),
    ];
    for (name, input, target, flag) in grids {
        if let Some(g) = input {
            *target = resolve_grid(text, name, g, flag)?;
        }
    }
    if let Some(n) = s.oracle_spins {
        spec.oracle_spins = n;
    }

    apply_integration(&mut spec.integration, file.integration);
    let st = file.steady;
    let steady = &mut spec.steady;
    if let Some(v) = st.rel_tol {
        steady.rel_tol = v.0;
    }
    if let Some(v) = st.window {
        steady.window = Some(v.0);
    }
    if let Some(v) = st.max_time {
        steady.max_time = Some(v.0);
    }
    if let Some(v) = st.scale_floor {
        steady.scale_floor = v.0;
    }
    if let Some(v) = st.divergence_bound {
        steady.divergence_bound = v.0;
    }
    if let Some(v) = st.polish {
        steady.polish = v;
    }
    if let Some(v) = st.polish_trigger {
        steady.polish_trigger = v.0;
    }
    if let Some(i) = st.integration {
        apply_integration(&mut steady.integration, i);
    }

    spec.validate().map_err(|e| Error::Config { line: None, message: e.to_string() })?;
    Ok(spec)
}

/// Reads a TOML config, or the spec stored in a run manifest (`.json`).
pub fn parse_config(path: &Path, fallback: Option<Preset>) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: super::RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::Config { line: Some(e.line()), message: e.to_string() })?;
        manifest.spec.validate().map_err(|e| Error::Config { line: None, message: e.to_string() })?;
        return Ok(manifest.spec);
    }
    parse_config_str(&text, fallback)
}
