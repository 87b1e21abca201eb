//! Run configuration: flat `section.key = value` lines, `#` comments.
//!
//! Values are numbers, booleans, bare or double-quoted strings, and
//! bracketed number lists (`[0, 200, 400]`). Any key may be overridden
//! through the environment as `SOLITONLAB_` followed by the key path in
//! upper case with dots replaced by underscores, e.g.
//! `SOLITONLAB_PHYSICS_DELTA_OVER_2PI_GHZ=-2.1`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::optimizer::{Bound, GaConfig, Parameter, SearchSpace};
use crate::params::{ghz_to_angular, mhz_to_angular, KernelForm, PhysicalParams};
use crate::propagator::{KernelPart, Mode, PropagationConfig};
use crate::quadrature::QuadratureOptions;

pub const ENV_PREFIX: &str = "SOLITONLAB_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Optimize,
    Potentials,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "run" => Some(Command::Run),
            "sweep" => Some(Command::Sweep),
            "optimize" => Some(Command::Optimize),
            "potentials" => Some(Command::Potentials),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
            Command::Potentials => "potentials",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Str(String),
    List(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "\"{s}\""),
            Value::List(v) => {
                let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", items.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Number,
    Integer,
    Bool,
    Str,
    List,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Number => "a number",
            Kind::Integer => "an integer",
            Kind::Bool => "true or false",
            Kind::Str => "a string",
            Kind::List => "a list of numbers",
        }
    }
}

/// Every accepted key and its value type.
const SCHEMA: &[(&str, Kind)] = &[
    ("command", Kind::Str),
    ("output.dir", Kind::Str),
    ("physics.lambda_p_um", Kind::Number),
    ("physics.gamma_e_over_2pi_mhz", Kind::Number),
    ("physics.gamma_r_over_2pi_mhz", Kind::Number),
    ("physics.omega_c_over_2pi_mhz", Kind::Number),
    ("physics.omega_c_over_gamma_e", Kind::Number),
    ("physics.omega_p0_over_2pi_mhz", Kind::Number),
    ("physics.omega_p0_over_gamma_e", Kind::Number),
    ("physics.delta_over_2pi_ghz", Kind::Number),
    ("physics.c6_over_2pi_ghz_um6", Kind::Number),
    ("physics.n_a_per_um3", Kind::Number),
    ("physics.r0_um", Kind::Number),
    ("physics.kappa", Kind::Number),
    ("physics.kernel_form", Kind::Str),
    ("grid.n", Kind::Integer),
    ("grid.extent_um", Kind::Number),
    ("beam.l1", Kind::Integer),
    ("beam.l2", Kind::Integer),
    ("propagation.mode", Kind::Str),
    ("propagation.dz_um", Kind::Number),
    ("propagation.z_end_um", Kind::Number),
    ("propagation.record_every", Kind::Integer),
    ("propagation.snapshots_um", Kind::List),
    ("propagation.images", Kind::Bool),
    ("propagation.absorbing", Kind::Bool),
    ("propagation.absorber_width_fraction", Kind::Number),
    ("propagation.absorber_strength_per_um", Kind::Number),
    ("propagation.kernel_part", Kind::Str),
    ("propagation.quadrature_rel_tol", Kind::Number),
    ("potentials.delta_min_over_2pi_ghz", Kind::Number),
    ("potentials.delta_max_over_2pi_ghz", Kind::Number),
    ("potentials.samples", Kind::Integer),
    ("sweep.key", Kind::Str),
    ("sweep.values", Kind::List),
    ("optimizer.z_target_um", Kind::Number),
    ("optimizer.population", Kind::Integer),
    ("optimizer.generations", Kind::Integer),
    ("optimizer.seed", Kind::Integer),
    ("optimizer.tournament_size", Kind::Integer),
    ("optimizer.crossover_rate", Kind::Number),
    ("optimizer.blend_alpha", Kind::Number),
    ("optimizer.mutation_rate", Kind::Number),
    ("optimizer.mutation_scale", Kind::Number),
    ("optimizer.elitism", Kind::Integer),
    ("optimizer.grid_scan", Kind::Integer),
    ("search.delta_over_2pi_ghz", Kind::List),
    ("search.n_a_per_um3", Kind::List),
    ("search.omega_p0_over_2pi_mhz", Kind::List),
    ("search.omega_c_over_2pi_mhz", Kind::List),
];

fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(k, _)| *k == key).map(|&(_, kind)| kind)
}

pub fn known_keys() -> impl Iterator<Item = &'static str> {
    SCHEMA.iter().map(|&(k, _)| k)
}

pub fn env_var_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_uppercase().replace('.', "_"))
}

/// Where a value came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Line(usize),
    Env(String),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Env(name) => write!(f, "environment variable {name}"),
            Origin::Override => write!(f, "override"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: Value,
    pub origin: Origin,
}

fn parse_value(raw: &str) -> std::result::Result<Value, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err("missing value".into());
    }
    if let Some(inner) = raw.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or("unterminated list")?;
        if inner.trim().is_empty() {
            return Ok(Value::List(Vec::new()));
        }
        return inner
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("list item `{}` is not a number", s.trim())))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Value::List);
    }
    if let Some(inner) = raw.strip_prefix('"') {
        let inner = inner.strip_suffix('"').ok_or("unterminated string")?;
        return Ok(Value::Str(inner.to_string()));
    }
    match raw {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if let Ok(x) = raw.parse::<f64>() {
        return Ok(Value::Number(x));
    }
    if raw.chars().all(|c| c.is_ascii_alphanumeric() || "_-./".contains(c)) {
        return Ok(Value::Str(raw.to_string()));
    }
    Err(format!("cannot parse `{raw}`; quote strings that contain spaces or symbols"))
}

fn check_kind(key: &str, value: &Value, origin: &Origin) -> Result<()> {
    let kind = kind_of(key).ok_or_else(|| Error::Config(format!("{origin}: unknown key `{key}`")))?;
    let ok = match (kind, value) {
        (Kind::Number, Value::Number(_)) => true,
        (Kind::Integer, Value::Number(x)) => x.fract() == 0.0 && x.abs() < 2f64.powi(53),
        (Kind::Bool, Value::Bool(_)) => true,
        (Kind::Str, Value::Str(_)) => true,
        (Kind::List, Value::List(_)) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{origin}: `{key}` must be {}, got {value}", kind.describe())))
    }
}

/// Splits the text into key/value entries without interpreting them.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let origin = Origin::Line(i + 1);
        let content = strip_comment(line).trim();
        if content.is_empty() {
            continue;
        }
        let (key, raw) = content
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{origin}: expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        let value = parse_value(raw).map_err(|e| Error::Config(format!("{origin}: `{key}`: {e}")))?;
        check_kind(key, &value, &origin)?;
        if let Some(prev) = entries.get(key) {
            return Err(Error::Config(format!("{origin}: `{key}` already set at {}", prev.origin)));
        }
        entries.insert(key.to_string(), Entry { value, origin });
    }
    Ok(entries)
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Applies `SOLITONLAB_*` overrides looked up through `env`.
pub fn apply_env(entries: &mut BTreeMap<String, Entry>, env: impl Fn(&str) -> Option<String>) -> Result<()> {
    for key in known_keys() {
        let name = env_var_name(key);
        if let Some(raw) = env(&name) {
            let origin = Origin::Env(name);
            let value = parse_value(&raw).map_err(|e| Error::Config(format!("{origin}: `{key}`: {e}")))?;
            check_kind(key, &value, &origin)?;
            entries.insert(key.to_string(), Entry { value, origin });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Beam {
    pub l1: i32,
    pub l2: i32,
}

impl Beam {
    /// Opposite windings form an optical Ferris wheel.
    pub fn is_ofw(&self) -> bool {
        self.l1 == -self.l2 && self.l1 != 0
    }

    pub fn max_winding(&self) -> u32 {
        self.l1.unsigned_abs().max(self.l2.unsigned_abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSweep {
    pub delta_min_over_2pi_ghz: f64,
    pub delta_max_over_2pi_ghz: f64,
    pub samples: usize,
}

impl PotentialSweep {
    pub fn detunings_over_2pi_ghz(&self) -> Vec<f64> {
        if self.samples == 1 {
            return vec![self.delta_min_over_2pi_ghz];
        }
        let step = (self.delta_max_over_2pi_ghz - self.delta_min_over_2pi_ghz) / (self.samples - 1) as f64;
        (0..self.samples).map(|i| self.delta_min_over_2pi_ghz + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub ga: GaConfig,
    pub space: SearchSpace,
    pub z_target: f64,
    /// Points per axis of the optional uniform scan; 0 disables it.
    pub grid_scan: usize,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub physics: PhysicalParams,
    pub grid: Grid,
    pub beam: Option<Beam>,
    pub propagation: Option<PropagationConfig>,
    pub snapshots: Vec<f64>,
    pub images: bool,
    pub quadrature: QuadratureOptions,
    pub output_dir: PathBuf,
    pub potentials: PotentialSweep,
    pub sweep: Option<Sweep>,
    pub optimizer: Option<OptimizerSpec>,
    entries: BTreeMap<String, Entry>,
}

impl RunSpec {
    pub fn entries(&self) -> &BTreeMap<String, Entry> {
        &self.entries
    }

    /// Rebuilds the spec with one key replaced.
    pub fn with_value(&self, key: &str, value: Value) -> Result<RunSpec> {
        check_kind(key, &value, &Origin::Override)?;
        let mut entries = self.entries.clone();
        entries.insert(key.to_string(), Entry { value, origin: Origin::Override });
        build(entries, Some(self.command))
    }

    /// Startup summary with the derived scales.
    pub fn banner(&self) -> String {
        let d = self.physics.derive().expect("validated when parsed");
        let mut s = format!(
            "solitonlab {}: l_diff = {:.3} um, R_b = {:.4} um, kappa = {:.6} rad/us/um, delta_EIT/2pi = {:.4} MHz, grid {}x{} over {:.1} um",
            self.command.name(),
            d.l_diff,
            d.r_b,
            Sig(d.kappa),
            d.delta_eit / std::f64::consts::TAU,
            self.grid.nx,
            self.grid.ny,
            self.grid.extent_x()
        );
        if let Some(b) = &self.beam {
            s.push_str(&format!(", beam l1 = {}, l2 = {}{}", b.l1, b.l2, if b.is_ofw() { " (OFW)" } else { "" }));
        }
        s
    }
}

/// Six significant digits, switching to exponent form for extreme magnitudes.
struct Sig(f64);

impl fmt::Display for Sig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && !(1e-3..1e6).contains(&a) {
            write!(f, "{:.5e}", self.0)
        } else {
            write!(f, "{:.prec$}", self.0, prec = f.precision().unwrap_or(4))
        }
    }
}

/// Parses `text` with no environment overrides; `command` is required.
pub fn parse_config(text: &str) -> Result<RunSpec> {
    parse_config_with(text, None, |_| None)
}

/// Parses `text`, applies overrides from `env`, and fills the command
/// from `command` when given (it then takes precedence over the file).
pub fn parse_config_with(text: &str, command: Option<Command>, env: impl Fn(&str) -> Option<String>) -> Result<RunSpec> {
    let mut entries = parse_entries(text)?;
    apply_env(&mut entries, env)?;
    build(entries, command)
}

struct Reader<'a> {
    entries: &'a BTreeMap<String, Entry>,
    missing: Vec<String>,
}

impl<'a> Reader<'a> {
    fn entry(&self, key: &str) -> Option<&'a Entry> {
        debug_assert!(kind_of(key).is_some(), "{key} not in schema");
        self.entries.get(key)
    }

    fn bad(&self, key: &str, reason: impl fmt::Display) -> Error {
        match self.entries.get(key) {
            Some(e) => Error::Config(format!("{}: `{key}` {reason}", e.origin)),
            None => Error::Config(format!("`{key}` {reason}")),
        }
    }

    fn number(&self, key: &str) -> Option<f64> {
        match self.entry(key).map(|e| &e.value) {
            Some(Value::Number(x)) => Some(*x),
            _ => None,
        }
    }

    fn require(&mut self, key: &str) -> f64 {
        self.number(key).unwrap_or_else(|| {
            self.missing.push(key.to_string());
            f64::NAN
        })
    }

    fn string(&self, key: &str) -> Option<&'a str> {
        match self.entry(key).map(|e| &e.value) {
            Some(Value::Str(s)) => Some(s.as_str()),
            _ => None,
        }
    }

    fn boolean(&self, key: &str) -> Option<bool> {
        match self.entry(key).map(|e| &e.value) {
            Some(Value::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    fn list(&self, key: &str) -> Option<&'a [f64]> {
        match self.entry(key).map(|e| &e.value) {
            Some(Value::List(v)) => Some(v.as_slice()),
            _ => None,
        }
    }

    fn count(&self, key: &str, min: usize) -> Result<Option<usize>> {
        match self.number(key) {
            None => Ok(None),
            Some(x) if x >= min as f64 => Ok(Some(x as usize)),
            Some(x) => Err(self.bad(key, format!("must be >= {min}, got {x}"))),
        }
    }

    fn positive(&self, key: &str, v: f64) -> Result<f64> {
        if v.is_nan() || (v.is_finite() && v > 0.0) {
            Ok(v)
        } else {
            Err(self.bad(key, format!("must be > 0, got {v}")))
        }
    }

    fn either(&mut self, primary: &str, alternative: &str) -> Option<(bool, f64)> {
        match (self.number(primary), self.number(alternative)) {
            (Some(x), None) => Some((true, x)),
            (None, Some(x)) => Some((false, x)),
            (None, None) => {
                self.missing.push(format!("{primary} (or {alternative})"));
                None
            }
            (Some(_), Some(_)) => None,
        }
    }
}

fn build(entries: BTreeMap<String, Entry>, command_override: Option<Command>) -> Result<RunSpec> {
    let mut r = Reader { entries: &entries, missing: Vec::new() };

    let command = match (command_override, r.string("command")) {
        (Some(c), _) => Some(c),
        (None, Some(s)) => Some(Command::parse(s).ok_or_else(|| r.bad("command", "must be run, sweep, optimize or potentials"))?),
        (None, None) => {
            r.missing.push("command".into());
            None
        }
    };

    for (a, b) in [
        ("physics.omega_c_over_2pi_mhz", "physics.omega_c_over_gamma_e"),
        ("physics.omega_p0_over_2pi_mhz", "physics.omega_p0_over_gamma_e"),
    ] {
        if r.number(a).is_some() && r.number(b).is_some() {
            return Err(r.bad(b, format!("conflicts with `{a}`; set only one")));
        }
    }

    let lambda_p = r.require("physics.lambda_p_um");
    let gamma_e = r.require("physics.gamma_e_over_2pi_mhz");
    let gamma_r = r.require("physics.gamma_r_over_2pi_mhz");
    let omega_c = r.either("physics.omega_c_over_2pi_mhz", "physics.omega_c_over_gamma_e");
    let omega_p0 = r.either("physics.omega_p0_over_2pi_mhz", "physics.omega_p0_over_gamma_e");
    let delta = r.require("physics.delta_over_2pi_ghz");
    let c6 = r.require("physics.c6_over_2pi_ghz_um6");
    let n_a = r.require("physics.n_a_per_um3");
    let r0 = r.require("physics.r0_um");

    let needs_beam = matches!(command, Some(Command::Run | Command::Sweep | Command::Optimize));
    let (l1, l2) = if needs_beam {
        (r.require("beam.l1"), r.require("beam.l2"))
    } else {
        (r.number("beam.l1").unwrap_or(f64::NAN), r.number("beam.l2").unwrap_or(f64::NAN))
    };
    let z_end = if matches!(command, Some(Command::Run | Command::Sweep)) {
        r.require("propagation.z_end_um")
    } else {
        r.number("propagation.z_end_um").unwrap_or(0.0)
    };
    if command == Some(Command::Sweep) {
        if r.string("sweep.key").is_none() {
            r.missing.push("sweep.key".into());
        }
        if r.list("sweep.values").is_none() {
            r.missing.push("sweep.values".into());
        }
    }
    let z_target = if command == Some(Command::Optimize) { r.require("optimizer.z_target_um") } else { f64::NAN };

    if !r.missing.is_empty() {
        return Err(Error::Config(format!("missing required keys: {}", r.missing.join(", "))));
    }
    let command = command.expect("checked above");

    let gamma_e = mhz_to_angular(r.positive("physics.gamma_e_over_2pi_mhz", gamma_e)?);
    let rabi = |r: &Reader, spec: Option<(bool, f64)>, mhz_key: &str, ratio_key: &str| -> Result<f64> {
        let (is_mhz, v) = spec.expect("checked above");
        if is_mhz {
            Ok(mhz_to_angular(v))
        } else if v.is_finite() {
            Ok(v * gamma_e)
        } else {
            Err(r.bad(if is_mhz { mhz_key } else { ratio_key }, "must be finite"))
        }
    };
    let mut physics = PhysicalParams {
        lambda_p: r.positive("physics.lambda_p_um", lambda_p)?,
        gamma_e,
        gamma_r: mhz_to_angular(r.positive("physics.gamma_r_over_2pi_mhz", gamma_r)?),
        omega_c: rabi(&r, omega_c, "physics.omega_c_over_2pi_mhz", "physics.omega_c_over_gamma_e")?,
        omega_p0: rabi(&r, omega_p0, "physics.omega_p0_over_2pi_mhz", "physics.omega_p0_over_gamma_e")?,
        delta: ghz_to_angular(delta),
        c6: ghz_to_angular(c6),
        n_a: r.positive("physics.n_a_per_um3", n_a)?,
        r0: r.positive("physics.r0_um", r0)?,
        kappa_override: match r.number("physics.kappa") {
            Some(k) => Some(r.positive("physics.kappa", k)?),
            None => None,
        },
        kernel_form: KernelForm::default(),
    };
    if let Some(s) = r.string("physics.kernel_form") {
        physics.kernel_form = KernelForm::parse(s).ok_or_else(|| r.bad("physics.kernel_form", "must be dispersive or printed"))?;
    }
    if physics.omega_c <= 0.0 {
        let key = if r.number("physics.omega_c_over_gamma_e").is_some() { "physics.omega_c_over_gamma_e" } else { "physics.omega_c_over_2pi_mhz" };
        return Err(r.bad(key, "must be > 0"));
    }
    physics.validate().map_err(|e| Error::Config(format!("physics: {e}")))?;

    let beam = if l1.is_nan() || l2.is_nan() {
        None
    } else {
        let check = |key: &str, l: f64| -> Result<i32> {
            if l.abs() <= 20.0 {
                Ok(l as i32)
            } else {
                Err(r.bad(key, format!("must lie in [-20, 20], got {l}")))
            }
        };
        Some(Beam { l1: check("beam.l1", l1)?, l2: check("beam.l2", l2)? })
    };

    let default_grid = Grid::default_for(physics.r0, beam.map_or(2, |b| b.max_winding()));
    let n = r.count("grid.n", 8)?.unwrap_or(default_grid.nx);
    if !n.is_power_of_two() {
        return Err(r.bad("grid.n", format!("must be a power of two, got {n}")));
    }
    let extent = match r.number("grid.extent_um") {
        Some(e) => r.positive("grid.extent_um", e)?,
        None => default_grid.extent_x(),
    };
    let grid = Grid::square(n, extent).map_err(|e| r.bad("grid.n", e))?;

    let mut quadrature = QuadratureOptions::default();
    if let Some(t) = r.number("propagation.quadrature_rel_tol") {
        quadrature.rel_tol = r.positive("propagation.quadrature_rel_tol", t)?;
    }

    let mut cfg = PropagationConfig::new(&physics, z_end);
    if z_end.is_nan() || z_end < 0.0 {
        return Err(r.bad("propagation.z_end_um", format!("must be >= 0, got {z_end}")));
    }
    if let Some(m) = r.string("propagation.mode") {
        cfg.mode = Mode::parse(m).ok_or_else(|| r.bad("propagation.mode", "must be reduced or full"))?;
    }
    if let Some(dz) = r.number("propagation.dz_um") {
        cfg.dz = r.positive("propagation.dz_um", dz)?;
    }
    if let Some(n) = r.count("propagation.record_every", 1)? {
        cfg.record_every = n;
    }
    if let Some(part) = r.string("propagation.kernel_part") {
        cfg.kernel_part = KernelPart::parse(part).ok_or_else(|| r.bad("propagation.kernel_part", "must be complex or real"))?;
    }
    if r.boolean("propagation.absorbing") == Some(false) {
        cfg.absorbing_boundary = None;
    }
    if let Some(b) = cfg.absorbing_boundary.as_mut() {
        if let Some(w) = r.number("propagation.absorber_width_fraction") {
            if !(w > 0.0 && w < 0.5) {
                return Err(r.bad("propagation.absorber_width_fraction", format!("must lie in (0, 0.5), got {w}")));
            }
            b.width_fraction = w;
        }
        if let Some(s) = r.number("propagation.absorber_strength_per_um") {
            b.strength = r.positive("propagation.absorber_strength_per_um", s)?;
        }
    }
    cfg = cfg.fitted();
    cfg.validate(&physics).map_err(|e| Error::Config(format!("propagation: {e}")))?;

    let snapshots = r.list("propagation.snapshots_um").map(<[f64]>::to_vec).unwrap_or_default();
    for &s in &snapshots {
        if !(s >= 0.0 && s <= z_end + 0.5 * cfg.dz) {
            return Err(r.bad("propagation.snapshots_um", format!("distance {s} outside [0, z_end = {z_end}]")));
        }
    }

    let potentials = PotentialSweep {
        delta_min_over_2pi_ghz: r.number("potentials.delta_min_over_2pi_ghz").unwrap_or(-3.0),
        delta_max_over_2pi_ghz: r.number("potentials.delta_max_over_2pi_ghz").unwrap_or(3.0),
        samples: r.count("potentials.samples", 1)?.unwrap_or(61),
    };
    if potentials.delta_max_over_2pi_ghz < potentials.delta_min_over_2pi_ghz {
        return Err(r.bad("potentials.delta_max_over_2pi_ghz", "must be >= potentials.delta_min_over_2pi_ghz"));
    }

    let sweep = match (r.string("sweep.key"), r.list("sweep.values")) {
        (Some(key), Some(values)) => {
            match kind_of(key) {
                Some(Kind::Number | Kind::Integer) if key != "command" => {}
                _ => return Err(r.bad("sweep.key", format!("`{key}` is not a numeric configuration key"))),
            }
            if values.is_empty() {
                return Err(r.bad("sweep.values", "must not be empty"));
            }
            Some(Sweep { key: key.to_string(), values: values.to_vec() })
        }
        _ => None,
    };

    let optimizer = if command == Command::Optimize {
        Some(optimizer_spec(&r, z_target)?)
    } else {
        None
    };

    let propagation = (command != Command::Potentials).then_some(cfg);
    Ok(RunSpec {
        command,
        physics,
        grid,
        beam,
        propagation,
        snapshots,
        images: r.boolean("propagation.images").unwrap_or(true),
        quadrature,
        output_dir: PathBuf::from(r.string("output.dir").unwrap_or("out")),
        potentials,
        sweep,
        optimizer,
        entries: entries.clone(),
    })
}

fn optimizer_spec(r: &Reader, z_target: f64) -> Result<OptimizerSpec> {
    if !(z_target >= 0.0 && z_target.is_finite()) {
        return Err(r.bad("optimizer.z_target_um", format!("must be >= 0, got {z_target}")));
    }
    let mut ga = GaConfig::default();
    for (key, slot) in [
        ("optimizer.population", &mut ga.population),
        ("optimizer.generations", &mut ga.generations),
        ("optimizer.tournament_size", &mut ga.tournament_size),
        ("optimizer.elitism", &mut ga.elitism),
    ] {
        if let Some(v) = r.count(key, 0)? {
            *slot = v;
        }
    }
    if let Some(s) = r.count("optimizer.seed", 0)? {
        ga.seed = s as u64;
    }
    for (key, slot) in [
        ("optimizer.crossover_rate", &mut ga.crossover_rate),
        ("optimizer.blend_alpha", &mut ga.blend_alpha),
        ("optimizer.mutation_rate", &mut ga.mutation_rate),
        ("optimizer.mutation_scale", &mut ga.mutation_scale),
    ] {
        if let Some(v) = r.number(key) {
            *slot = v;
        }
    }
    ga.validate().map_err(|e| Error::Config(format!("optimizer: {e}")))?;

    let to_internal: [(&str, Parameter, Box<dyn Fn(f64) -> f64>); 4] = [
        ("search.delta_over_2pi_ghz", Parameter::Delta, Box::new(ghz_to_angular)),
        ("search.n_a_per_um3", Parameter::Density, Box::new(|x| x)),
        ("search.omega_p0_over_2pi_mhz", Parameter::ProbeRabi, Box::new(mhz_to_angular)),
        ("search.omega_c_over_2pi_mhz", Parameter::CouplingRabi, Box::new(mhz_to_angular)),
    ];
    let mut bounds = Vec::new();
    for (key, parameter, convert) in &to_internal {
        if let Some(v) = r.list(key) {
            if v.len() != 2 || !(v[0] <= v[1]) {
                return Err(r.bad(key, "must be [lower, upper] with lower <= upper"));
            }
            let (a, b) = (convert(v[0]), convert(v[1]));
            bounds.push(Bound { parameter: *parameter, lower: a.min(b), upper: a.max(b) });
        }
    }
    if bounds.is_empty() {
        return Err(Error::Config("optimize needs at least one search.* range".into()));
    }
    for b in &bounds {
        let bad_low = match b.parameter {
            Parameter::Density | Parameter::CouplingRabi => b.lower <= 0.0,
            _ => false,
        };
        if bad_low {
            return Err(Error::Config(format!("search range for {} must be > 0", b.parameter.name())));
        }
    }
    let space = SearchSpace::new(bounds).map_err(|e| Error::Config(e.to_string()))?;
    Ok(OptimizerSpec {
        ga,
        space,
        z_target,
        grid_scan: r.count("optimizer.grid_scan", 0)?.unwrap_or(0),
    })
}
