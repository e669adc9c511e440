//! Scenario files: a TOML description of the emitters plus what to compute.
//!
//! ```toml
//! [waveguide]
//! description = "single two-level emitter"
//!
//! [[emitter]]
//! id = "A"
//! phase_position = 0.0
//! levels = [{ id = "g", kind = "ground" }, { id = "e", kind = "excited" }]
//!
//! [[transition]]
//! emitter = "A"
//! excited = "e"
//! ground = "g"
//! gamma1d_right = 0.5
//! gamma1d_left = 0.5
//!
//! [run]
//! mode = "spectrum"
//! sweep = { label = "delta", grid = { start = -3.0, stop = 3.0, points = 601 }, targets = [{ path = "detuning" }] }
//! ```
//!
//! See `docs/schema.md` for the full format and the parameter paths.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::PulseSpec;
use crate::kernel::Direction;
use crate::model::{
    validate_system, CoherentCoupling, DipoleCoupling, Emitter, GroundSplitting, Level, LevelKind, LevelRef, Subject,
    SystemSpec, Transition,
};
use crate::protocols::{DetectionConfig, Filter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warn,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, code: code.into(), line, message: message.into() }
    }

    pub fn warn(code: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warn, code: code.into(), line: None, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warn => "WARN",
            Severity::Error => "ERROR",
        };
        match self.line {
            Some(l) => write!(f, "{sev} {} line {l}: {}", self.code, self.message),
            None => write!(f, "{sev} {} {}", self.code, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Spectrum,
    LambdaRates,
    LambdaIntensity,
    Fidelity,
    AverageFidelity,
}

impl Mode {
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Mode::Spectrum => &["T2", "R2", "loss", "re_t", "im_t", "re_r", "im_r"],
            Mode::LambdaRates => &[
                "p_d",
                "p_r",
                "p_sc",
                "p_red_r",
                "p_red_l",
                "p_blue_r",
                "p_blue_l",
                "stark_shift",
                "omega01_prime",
                "click_single",
                "click_coherent",
                "click_coherent_weak",
            ],
            Mode::LambdaIntensity => &["I_out", "rho00", "rho11", "re_rho01", "im_rho01"],
            Mode::Fidelity => &["F"],
            Mode::AverageFidelity => &["Fbar", "Fbar_numeric", "Fbar_analytic"],
        }
    }

    pub fn default_outputs(self, with_series: bool) -> Vec<String> {
        let names: &[&str] = match self {
            Mode::Spectrum if with_series => &["T2"],
            Mode::Spectrum => &["T2", "R2"],
            Mode::LambdaRates => &["p_d", "p_r", "p_sc"],
            Mode::LambdaIntensity => Mode::LambdaIntensity.outputs(),
            Mode::Fidelity => &["F"],
            Mode::AverageFidelity => &["Fbar_numeric"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    fn needs_pulse(self) -> bool {
        !matches!(self, Mode::Spectrum | Mode::LambdaRates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Ground0,
    Superposition,
}

/// Values a sweep or series may change besides the system itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub input_direction: Direction,
    pub detuning: f64,
    pub detuning_sign: f64,
    pub time: f64,
    pub tc_over_t: f64,
    pub initial: InitialState,
    pub pulse: Option<PulseSpec>,
    pub detection: DetectionConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Linear { start: f64, stop: f64, points: usize },
    Values(Vec<f64>),
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Linear { start, stop, points } => {
                if *points == 1 {
                    return vec![*start];
                }
                let n = (*points - 1) as f64;
                (0..*points).map(|k| start + (stop - start) * (k as f64 / n)).collect()
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Grid::Linear { start, stop, points } => format!("linear({start}, {stop}, {points})"),
            Grid::Values(v) => format!("values({})", v.len()),
        }
    }
}

/// `value = offset + scale · x` is written to `path` at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub path: String,
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub label: String,
    pub grid: Grid,
    pub targets: Vec<Target>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub set: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: RunParams,
    pub outputs: Vec<String>,
    pub sweep: Option<Sweep>,
    pub series: Vec<Series>,
    pub panels: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputConfig {
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub description: Option<String>,
    pub rate_unit: Option<String>,
    pub system: SystemSpec,
    pub run: RunConfig,
    pub output: OutputConfig,
}

// File layout.

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWaveguide {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevel {
    id: String,
    #[serde(default)]
    energy: f64,
    kind: LevelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplitting {
    from: String,
    to: String,
    omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmitter {
    id: String,
    #[serde(default)]
    phase_position: f64,
    levels: Vec<RawLevel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    splittings: Vec<RawSplitting>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    emitter: String,
    excited: String,
    ground: String,
    gamma1d_right: f64,
    gamma1d_left: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    gamma_prime: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    coupling_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawCoupling {
    Coherent {
        emitter: String,
        a: String,
        b: String,
        magnitude: f64,
        #[serde(default)]
        phase: f64,
    },
    Dipole {
        a: String,
        b: String,
        magnitude: f64,
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intensity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_photons: Option<f64>,
    duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    #[serde(default = "one")]
    efficiency: f64,
    #[serde(default)]
    filter: Filter,
    #[serde(default)]
    phase_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    path: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    scale: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    label: String,
    grid: RawGrid,
    targets: Vec<RawTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeries {
    label: String,
    #[serde(default)]
    set: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: Mode,
    #[serde(default = "right", skip_serializing_if = "is_right")]
    input_direction: Direction,
    #[serde(default, skip_serializing_if = "is_zero")]
    detuning: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    detuning_sign: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    time: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    tc_over_t: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    initial: InitialState,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    panels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pulse: Option<RawPulse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detection: Option<RawDetection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    series: Vec<RawSeries>,
}

fn right() -> Direction {
    Direction::Right
}

fn is_right(d: &Direction) -> bool {
    *d == Direction::Right
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(default = "csv", skip_serializing_if = "is_csv")]
    format: String,
}

fn csv() -> String {
    "csv".into()
}

fn is_csv(s: &String) -> bool {
    s == "csv"
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default, skip_serializing_if = "is_default")]
    waveguide: RawWaveguide,
    #[serde(default, rename = "emitter")]
    emitters: Vec<RawEmitter>,
    #[serde(default, rename = "transition", skip_serializing_if = "Vec::is_empty")]
    transitions: Vec<RawTransition>,
    #[serde(default, rename = "coupling", skip_serializing_if = "Vec::is_empty")]
    couplings: Vec<RawCoupling>,
    run: RawRun,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
}

/// Only the positions of the array entries, for line numbers in diagnostics.
#[derive(Deserialize)]
struct Spans {
    #[serde(default)]
    emitter: Vec<toml::Spanned<toml::Value>>,
    #[serde(default)]
    transition: Vec<toml::Spanned<toml::Value>>,
    #[serde(default)]
    coupling: Vec<toml::Spanned<toml::Value>>,
    #[serde(default)]
    run: Option<toml::Spanned<toml::Value>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

struct Lines {
    emitter: Vec<usize>,
    transition: Vec<usize>,
    coupling: Vec<usize>,
    run: Option<usize>,
}

impl Lines {
    fn from_text(text: &str) -> Self {
        let spans: Option<Spans> = toml::from_str(text).ok();
        let lines = |v: &[toml::Spanned<toml::Value>]| v.iter().map(|s| line_of(text, s.span().start)).collect();
        match spans {
            Some(s) => Lines {
                emitter: lines(&s.emitter),
                transition: lines(&s.transition),
                coupling: lines(&s.coupling),
                run: s.run.map(|r| line_of(text, r.span().start)),
            },
            None => Lines { emitter: vec![], transition: vec![], coupling: vec![], run: None },
        }
    }
}

/// Where each system entity came from in the file.
#[derive(Default)]
struct Origins {
    emitter: Vec<Option<usize>>,
    transition: Vec<Vec<Option<usize>>>,
    coherent: Vec<Vec<Option<usize>>>,
    dipole: Vec<Option<usize>>,
    splitting: Vec<Option<usize>>,
}

impl Origins {
    fn line(&self, s: Subject) -> Option<usize> {
        match s {
            Subject::System => None,
            Subject::Emitter(e) | Subject::Level { emitter: e, .. } => self.emitter.get(e).copied().flatten(),
            Subject::Transition { emitter, transition } => self.transition.get(emitter)?.get(transition).copied().flatten(),
            Subject::Coherent { emitter, coupling } => self.coherent.get(emitter)?.get(coupling).copied().flatten(),
            Subject::Dipole(d) => self.dipole.get(d).copied().flatten(),
            Subject::Splitting(s) => self.splitting.get(s).copied().flatten(),
        }
    }
}

fn split_ref(s: &str) -> Option<LevelRef> {
    let (e, l) = s.split_once('.')?;
    Some(LevelRef { emitter: e.into(), level: l.into() })
}

fn build_grid(g: &RawGrid) -> Result<Grid, String> {
    match (g.start, g.stop, g.points, &g.values) {
        (Some(start), Some(stop), Some(points), None) => {
            if points == 0 {
                return Err("grid needs at least one point".into());
            }
            if !start.is_finite() || !stop.is_finite() || stop < start {
                return Err("grid needs finite start ≤ stop".into());
            }
            Ok(Grid::Linear { start, stop, points })
        }
        (None, None, None, Some(v)) => {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] < w[0]) {
                return Err("grid values must be finite, non-empty and sorted".into());
            }
            Ok(Grid::Values(v.clone()))
        }
        _ => Err("grid takes either start/stop/points or values".into()),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        ScenarioError { diagnostics: vec![Diagnostic::error("schema", line, e.message().trim().to_string())] }
    })?;
    let lines = Lines::from_text(text);
    let mut diags = Vec::new();
    let mut origins = Origins::default();
    let at = |v: &[usize], i: usize| v.get(i).copied();

    let mut system = SystemSpec::default();
    for (i, re) in raw.emitters.iter().enumerate() {
        let line = at(&lines.emitter, i);
        if re.id.contains('.') || re.levels.iter().any(|l| l.id.contains('.')) {
            diags.push(Diagnostic::error("invalid_id", line, format!("ids may not contain '.' (emitter '{}')", re.id)));
        }
        system.emitters.push(Emitter {
            id: re.id.clone(),
            phase_position: re.phase_position,
            levels: re.levels.iter().map(|l| Level { id: l.id.clone(), energy: l.energy, kind: l.kind }).collect(),
            transitions: vec![],
            coherent_couplings: vec![],
        });
        origins.emitter.push(line);
        origins.transition.push(vec![]);
        origins.coherent.push(vec![]);
        for s in &re.splittings {
            system.ground_splittings.push(GroundSplitting {
                emitter: re.id.clone(),
                from: s.from.clone(),
                to: s.to.clone(),
                omega: s.omega,
            });
            origins.splitting.push(line);
        }
    }

    for (i, rt) in raw.transitions.iter().enumerate() {
        let line = at(&lines.transition, i);
        let Some(ei) = system.emitter_index(&rt.emitter) else {
            diags.push(Diagnostic::error("dangling_reference", line, format!("transition refers to unknown emitter '{}'", rt.emitter)));
            continue;
        };
        system.emitters[ei].transitions.push(Transition {
            excited: rt.excited.clone(),
            ground: rt.ground.clone(),
            gamma1d_right: rt.gamma1d_right,
            gamma1d_left: rt.gamma1d_left,
            gamma_prime: rt.gamma_prime,
            coupling_phase: rt.coupling_phase,
        });
        origins.transition[ei].push(line);
    }

    for (i, rc) in raw.couplings.iter().enumerate() {
        let line = at(&lines.coupling, i);
        match rc {
            RawCoupling::Coherent { emitter, a, b, magnitude, phase } => {
                let Some(ei) = system.emitter_index(emitter) else {
                    diags.push(Diagnostic::error("dangling_reference", line, format!("coupling refers to unknown emitter '{emitter}'")));
                    continue;
                };
                system.emitters[ei].coherent_couplings.push(CoherentCoupling {
                    a: a.clone(),
                    b: b.clone(),
                    magnitude: *magnitude,
                    phase: *phase,
                });
                origins.coherent[ei].push(line);
            }
            RawCoupling::Dipole { a, b, magnitude, phase } => match (split_ref(a), split_ref(b)) {
                (Some(a), Some(b)) => {
                    system.dipole_couplings.push(DipoleCoupling { a, b, magnitude: *magnitude, phase: *phase });
                    origins.dipole.push(line);
                }
                _ => diags.push(Diagnostic::error("schema", line, "dipole coupling ends must be written 'emitter.level'")),
            },
        }
    }

    for v in validate_system(&system).violations {
        diags.push(Diagnostic::error(v.kind.code(), origins.line(v.subject), v.message));
    }

    let run_line = lines.run;
    let rr = &raw.run;
    let pulse = match &rr.pulse {
        None => None,
        Some(p) => match (p.intensity, p.mean_photons) {
            (Some(i), None) => Some(PulseSpec { intensity: i, duration: p.duration }),
            (None, Some(n)) => Some(PulseSpec::from_mean_photons(n, p.duration)),
            _ => {
                diags.push(Diagnostic::error("schema", run_line, "pulse takes exactly one of intensity or mean_photons"));
                None
            }
        },
    };
    if let Some(p) = &pulse {
        if !(p.duration > 0.0 && p.intensity >= 0.0 && p.duration.is_finite() && p.intensity.is_finite()) {
            diags.push(Diagnostic::error("invalid_pulse", run_line, "pulse needs duration > 0 and intensity ≥ 0"));
        }
    }
    if rr.mode.needs_pulse() && pulse.is_none() {
        diags.push(Diagnostic::error("missing_pulse", run_line, format!("mode {:?} needs [run.pulse]", rr.mode)));
    }
    if rr.detuning_sign != 1.0 && rr.detuning_sign != -1.0 {
        diags.push(Diagnostic::error("schema", run_line, "detuning_sign must be 1 or -1"));
    }
    let detection = rr.detection.as_ref().map_or_else(DetectionConfig::default, |d| DetectionConfig {
        efficiency: d.efficiency,
        filter: d.filter,
        phase_offset: d.phase_offset,
    });
    if !(0.0..=1.0).contains(&detection.efficiency) {
        diags.push(Diagnostic::error("schema", run_line, "detection efficiency must lie in [0, 1]"));
    }

    let sweep = match &rr.sweep {
        None => None,
        Some(s) => match build_grid(&s.grid) {
            Ok(grid) => Some(Sweep {
                label: s.label.clone(),
                grid,
                targets: s
                    .targets
                    .iter()
                    .map(|t| Target { path: t.path.clone(), scale: t.scale, offset: t.offset })
                    .collect(),
            }),
            Err(m) => {
                diags.push(Diagnostic::error("invalid_grid", run_line, m));
                None
            }
        },
    };
    if let Some(s) = &sweep {
        if s.targets.is_empty() {
            diags.push(Diagnostic::error("schema", run_line, "sweep needs at least one target"));
        }
    }

    let outputs = if rr.outputs.is_empty() { rr.mode.default_outputs(!rr.series.is_empty()) } else { rr.outputs.clone() };
    for o in &outputs {
        if !rr.mode.outputs().contains(&o.as_str()) {
            diags.push(Diagnostic::error(
                "unknown_output",
                run_line,
                format!("mode {:?} has no output '{o}' (available: {})", rr.mode, rr.mode.outputs().join(", ")),
            ));
        }
    }
    let mut labels = std::collections::HashSet::new();
    for s in &rr.series {
        if !labels.insert(s.label.as_str()) {
            diags.push(Diagnostic::error("duplicate_id", run_line, format!("series label '{}' is repeated", s.label)));
        }
    }
    let panels = rr.panels.unwrap_or(crate::protocols::DEFAULT_PANELS);
    if panels < 2000 || !panels.is_multiple_of(2) {
        diags.push(Diagnostic::error("schema", run_line, "panels must be even and at least 2000"));
    }
    if let Some(o) = &raw.output {
        if o.format != "csv" {
            diags.push(Diagnostic::error("schema", None, format!("unsupported output format '{}'", o.format)));
        }
    }

    let scenario = Scenario {
        description: raw.waveguide.description.clone(),
        rate_unit: raw.waveguide.rate_unit.clone(),
        system,
        run: RunConfig {
            mode: rr.mode,
            params: RunParams {
                input_direction: rr.input_direction,
                detuning: rr.detuning,
                detuning_sign: rr.detuning_sign,
                time: rr.time,
                tc_over_t: rr.tc_over_t,
                initial: rr.initial,
                pulse,
                detection,
            },
            outputs,
            sweep,
            series: rr.series.iter().map(|s| Series { label: s.label.clone(), set: s.set.clone() }).collect(),
            panels,
        },
        output: OutputConfig { path: raw.output.and_then(|o| o.path) },
    };

    if diags.is_empty() {
        // Every path must resolve on the base configuration.
        let mut paths: Vec<&str> = scenario.run.series.iter().flat_map(|s| s.set.keys().map(String::as_str)).collect();
        if let Some(s) = &scenario.run.sweep {
            paths.extend(s.targets.iter().map(|t| t.path.as_str()));
        }
        for p in paths {
            let mut sys = scenario.system.clone();
            let mut params = scenario.run.params.clone();
            if let Err(m) = apply_path(&mut sys, &mut params, p, 1.0) {
                diags.push(Diagnostic::error("unknown_path", run_line, m));
            }
        }
    }

    if diags.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError { diagnostics: diags })
    }
}

pub fn serialize_scenario(sc: &Scenario) -> String {
    let sys = &sc.system;
    let raw = RawScenario {
        waveguide: RawWaveguide { description: sc.description.clone(), rate_unit: sc.rate_unit.clone() },
        emitters: sys
            .emitters
            .iter()
            .map(|e| RawEmitter {
                id: e.id.clone(),
                phase_position: e.phase_position,
                levels: e.levels.iter().map(|l| RawLevel { id: l.id.clone(), energy: l.energy, kind: l.kind }).collect(),
                splittings: sys
                    .ground_splittings
                    .iter()
                    .filter(|s| s.emitter == e.id)
                    .map(|s| RawSplitting { from: s.from.clone(), to: s.to.clone(), omega: s.omega })
                    .collect(),
            })
            .collect(),
        transitions: sys
            .emitters
            .iter()
            .flat_map(|e| {
                e.transitions.iter().map(|t| RawTransition {
                    emitter: e.id.clone(),
                    excited: t.excited.clone(),
                    ground: t.ground.clone(),
                    gamma1d_right: t.gamma1d_right,
                    gamma1d_left: t.gamma1d_left,
                    gamma_prime: t.gamma_prime,
                    coupling_phase: t.coupling_phase,
                })
            })
            .collect(),
        couplings: sys
            .emitters
            .iter()
            .flat_map(|e| {
                e.coherent_couplings.iter().map(|c| RawCoupling::Coherent {
                    emitter: e.id.clone(),
                    a: c.a.clone(),
                    b: c.b.clone(),
                    magnitude: c.magnitude,
                    phase: c.phase,
                })
            })
            .chain(sys.dipole_couplings.iter().map(|d| RawCoupling::Dipole {
                a: d.a.to_string(),
                b: d.b.to_string(),
                magnitude: d.magnitude,
                phase: d.phase,
            }))
            .collect(),
        run: {
            let r = &sc.run;
            let p = &r.params;
            RawRun {
                mode: r.mode,
                input_direction: p.input_direction,
                detuning: p.detuning,
                detuning_sign: p.detuning_sign,
                time: p.time,
                tc_over_t: p.tc_over_t,
                initial: p.initial,
                outputs: r.outputs.clone(),
                panels: (r.panels != crate::protocols::DEFAULT_PANELS).then_some(r.panels),
                pulse: p.pulse.map(|p| RawPulse { intensity: Some(p.intensity), mean_photons: None, duration: p.duration }),
                detection: (p.detection != DetectionConfig::default()).then_some(RawDetection {
                    efficiency: p.detection.efficiency,
                    filter: p.detection.filter,
                    phase_offset: p.detection.phase_offset,
                }),
                sweep: r.sweep.as_ref().map(|s| RawSweep {
                    label: s.label.clone(),
                    grid: match &s.grid {
                        Grid::Linear { start, stop, points } => RawGrid {
                            start: Some(*start),
                            stop: Some(*stop),
                            points: Some(*points),
                            values: None,
                        },
                        Grid::Values(v) => RawGrid { start: None, stop: None, points: None, values: Some(v.clone()) },
                    },
                    targets: s
                        .targets
                        .iter()
                        .map(|t| RawTarget { path: t.path.clone(), scale: t.scale, offset: t.offset })
                        .collect(),
                }),
                series: r.series.iter().map(|s| RawSeries { label: s.label.clone(), set: s.set.clone() }).collect(),
            }
        },
        output: sc.output.path.as_ref().map(|p| RawOutput { path: Some(p.clone()), format: csv() }),
    };
    toml::to_string(&raw).expect("scenario serializes")
}

fn parse_index(s: &str, what: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("'{s}' is not a valid {what} index"))
}

/// Writes `value` to the parameter named by `path`.
///
/// Run parameters: `detuning`, `detuning_sign`, `time`, `tc_over_t`,
/// `pulse.intensity`, `pulse.mean_photons`, `pulse.duration`,
/// `detection.efficiency`, `detection.phase_offset`.
///
/// System parameters: `emitter.<id>.phase_position`,
/// `level.<emitter>.<level>.energy`,
/// `transition.<emitter>.<excited>.<ground>.<field>` with field one of
/// `gamma1d_right`, `gamma1d_left`, `gamma1d` (split evenly), `gamma_prime`,
/// `coupling_phase`; `coherent.<emitter>.<n>.<magnitude|phase>`;
/// `dipole.<n>.<magnitude|phase>`; `splitting.<emitter>.<from>.<to>`.
pub fn apply_path(system: &mut SystemSpec, params: &mut RunParams, path: &str, value: f64) -> Result<(), String> {
    let parts: Vec<&str> = path.split('.').collect();
    let no_pulse = || format!("path '{path}' needs [run.pulse]");
    match parts.as_slice() {
        ["detuning"] => params.detuning = value,
        ["detuning_sign"] => params.detuning_sign = value,
        ["time"] => params.time = value,
        ["tc_over_t"] => params.tc_over_t = value,
        ["pulse", "intensity"] => params.pulse.as_mut().ok_or_else(no_pulse)?.intensity = value,
        ["pulse", "mean_photons"] => {
            let p = params.pulse.as_mut().ok_or_else(no_pulse)?;
            p.intensity = value / p.duration;
        }
        ["pulse", "duration"] => params.pulse.as_mut().ok_or_else(no_pulse)?.duration = value,
        ["detection", "efficiency"] => params.detection.efficiency = value,
        ["detection", "phase_offset"] => params.detection.phase_offset = value,
        ["emitter", id, "phase_position"] => {
            system.emitters.iter_mut().find(|e| e.id == *id).ok_or_else(|| format!("no emitter '{id}' for path '{path}'"))?.phase_position =
                value
        }
        ["level", em, lv, "energy"] => {
            let e = system.emitters.iter_mut().find(|e| e.id == *em).ok_or_else(|| format!("no emitter '{em}' for path '{path}'"))?;
            e.levels.iter_mut().find(|l| l.id == *lv).ok_or_else(|| format!("no level '{em}.{lv}' for path '{path}'"))?.energy = value;
        }
        ["transition", em, ex, gr, field] => {
            let e = system.emitters.iter_mut().find(|e| e.id == *em).ok_or_else(|| format!("no emitter '{em}' for path '{path}'"))?;
            let t = e
                .transitions
                .iter_mut()
                .find(|t| t.excited == *ex && t.ground == *gr)
                .ok_or_else(|| format!("no transition '{em}.{ex}->{gr}' for path '{path}'"))?;
            match *field {
                "gamma1d_right" => t.gamma1d_right = value,
                "gamma1d_left" => t.gamma1d_left = value,
                "gamma1d" => {
                    t.gamma1d_right = 0.5 * value;
                    t.gamma1d_left = 0.5 * value;
                }
                "gamma_prime" => t.gamma_prime = value,
                "coupling_phase" => t.coupling_phase = value,
                _ => return Err(format!("unknown transition field '{field}' in path '{path}'")),
            }
        }
        ["coherent", em, n, field] => {
            let e = system.emitters.iter_mut().find(|e| e.id == *em).ok_or_else(|| format!("no emitter '{em}' for path '{path}'"))?;
            let c = e
                .coherent_couplings
                .get_mut(parse_index(n, "coupling")?)
                .ok_or_else(|| format!("no coherent coupling {n} on '{em}' for path '{path}'"))?;
            match *field {
                "magnitude" => c.magnitude = value,
                "phase" => c.phase = value,
                _ => return Err(format!("unknown coupling field '{field}' in path '{path}'")),
            }
        }
        ["dipole", n, field] => {
            let c = system
                .dipole_couplings
                .get_mut(parse_index(n, "coupling")?)
                .ok_or_else(|| format!("no dipole coupling {n} for path '{path}'"))?;
            match *field {
                "magnitude" => c.magnitude = value,
                "phase" => c.phase = value,
                _ => return Err(format!("unknown coupling field '{field}' in path '{path}'")),
            }
        }
        ["splitting", em, from, to] => {
            system.emitter(em).ok_or_else(|| format!("no emitter '{em}' for path '{path}'"))?;
            let found = system.ground_splittings.iter_mut().find(|s| s.emitter == *em && s.from == *from && s.to == *to);
            match found {
                Some(s) => s.omega = value,
                None => {
                    system.ground_splittings.retain(|s| !(s.emitter == *em && s.from == *to && s.to == *from));
                    system.ground_splittings.push(GroundSplitting {
                        emitter: em.to_string(),
                        from: from.to_string(),
                        to: to.to_string(),
                        omega: value,
                    });
                }
            }
        }
        _ => return Err(format!("unknown parameter path '{path}'")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TWO_LEVEL: &str = r#"
[waveguide]
description = "one emitter"

[[emitter]]
id = "A"
levels = [{ id = "g", kind = "ground" }, { id = "e", kind = "excited" }]

[[transition]]
emitter = "A"
excited = "e"
ground = "g"
gamma1d_right = 0.5
gamma1d_left = 0.5

[run]
mode = "spectrum"
sweep = { label = "delta", grid = { start = -1.0, stop = 1.0, points = 5 }, targets = [{ path = "detuning" }] }
"#;

    #[test]
    fn parses_minimal_file() {
        let sc = parse_scenario(TWO_LEVEL).unwrap();
        assert_eq!(sc.system.emitters.len(), 1);
        assert_eq!(sc.system.emitters[0].transitions[0].gamma1d(), 1.0);
        assert_eq!(sc.run.outputs, vec!["T2", "R2"]);
        assert_eq!(sc.run.sweep.as_ref().unwrap().grid.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn dangling_level_reports_line() {
        let text = TWO_LEVEL.replace("excited = \"e\"", "excited = \"x\"");
        let err = parse_scenario(&text).unwrap_err();
        let d = &err.diagnostics[0];
        assert_eq!(d.code, "dangling_reference");
        assert_eq!(d.line, Some(9));
        assert!(d.message.contains("no level 'x'"));
    }

    #[test]
    fn unknown_field_reports_line() {
        let text = TWO_LEVEL.replace("gamma1d_left = 0.5", "gamma1d_left = 0.5\ngamma_bogus = 1.0");
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.diagnostics[0].code, "schema");
        assert!(err.diagnostics[0].message.contains("gamma_bogus"));
        assert!(err.diagnostics[0].line.is_some());
    }

    #[test]
    fn unknown_path_is_rejected() {
        let text = TWO_LEVEL.replace("path = \"detuning\"", "path = \"emitter.Z.phase_position\"");
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.diagnostics[0].code, "unknown_path");
    }

    #[test]
    fn fidelity_without_pulse_is_rejected() {
        let text = TWO_LEVEL.replace("mode = \"spectrum\"", "mode = \"fidelity\"");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.diagnostics.iter().any(|d| d.code == "missing_pulse"));
    }

    #[test]
    fn round_trip() {
        let sc = parse_scenario(TWO_LEVEL).unwrap();
        let again = parse_scenario(&serialize_scenario(&sc)).unwrap();
        assert_eq!(sc, again);
    }

    #[test]
    fn paths_write_through() {
        let mut sc = parse_scenario(TWO_LEVEL).unwrap();
        let (sys, params) = (&mut sc.system, &mut sc.run.params);
        apply_path(sys, params, "transition.A.e.g.gamma1d", 0.4).unwrap();
        apply_path(sys, params, "emitter.A.phase_position", 2.0).unwrap();
        apply_path(sys, params, "detuning", 0.3).unwrap();
        assert_eq!(sys.emitters[0].transitions[0].gamma1d_right, 0.2);
        assert_eq!(sys.emitters[0].phase_position, 2.0);
        assert_eq!(params.detuning, 0.3);
        assert!(apply_path(sys, params, "pulse.intensity", 1.0).is_err());
        assert!(apply_path(sys, params, "transition.A.e.g.nope", 1.0).is_err());
    }
}
