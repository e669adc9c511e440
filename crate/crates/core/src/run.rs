//! Executes a scenario and renders the result as CSV.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dynamics::{
    compute_rates, effective_hamiltonian_elements, evolve_ground_state, DynamicsError, GroundState, IntegratorConfig,
    LambdaParams, PulseSpec,
};
use crate::hamiltonian::Drive;
use crate::kernel::{kernel_at, output_amplitudes, ScatterError};
use crate::model::{build_single_excitation_basis, validate_system, SystemSpec};
use crate::protocols::{
    average_fidelity, click_probabilities, conditional_fidelity, filtered_photon_probs, output_intensity, ProtocolError,
};
use crate::scenario::{apply_path, serialize_scenario, Diagnostic, InitialState, Mode, RunParams, Scenario, ScenarioError};

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// The configuration cannot be evaluated as written.
    Invalid(ScenarioError),
    /// A computation failed in a way that a NaN row cannot stand in for.
    Numerical(Diagnostic),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }

    fn invalid(code: &str, message: impl Into<String>) -> Self {
        RunError::Invalid(ScenarioError { diagnostics: vec![Diagnostic::error(code, None, message)] })
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Invalid(e) => write!(f, "{e}"),
            RunError::Numerical(d) => write!(f, "{d}"),
        }
    }
}

impl std::error::Error for RunError {}

/// One fully resolved evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Option<f64>,
    pub system: SystemSpec,
    pub params: RunParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoints {
    pub label: Option<String>,
    pub points: Vec<Point>,
}

/// Applies series overrides and sweep targets, giving every point to evaluate.
pub fn expand(sc: &Scenario) -> Result<Vec<SeriesPoints>, RunError> {
    let xs: Vec<Option<f64>> = match &sc.run.sweep {
        Some(s) => s.grid.points().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let unnamed = [None];
    let series: Vec<Option<&crate::scenario::Series>> = if sc.run.series.is_empty() {
        unnamed.to_vec()
    } else {
        sc.run.series.iter().map(Some).collect()
    };
    let fail = |m: String| RunError::invalid("unknown_path", m);
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        let mut system = sc.system.clone();
        let mut params = sc.run.params.clone();
        if let Some(s) = s {
            for (path, v) in &s.set {
                apply_path(&mut system, &mut params, path, *v).map_err(fail)?;
            }
        }
        let mut points = Vec::with_capacity(xs.len());
        for &x in &xs {
            let (mut sys, mut par) = (system.clone(), params.clone());
            if let (Some(x), Some(sw)) = (x, &sc.run.sweep) {
                for t in &sw.targets {
                    apply_path(&mut sys, &mut par, &t.path, t.offset + t.scale * x).map_err(fail)?;
                }
            }
            let report = validate_system(&sys);
            if !report.is_ok() {
                let at = x.map_or(String::new(), |x| format!(" at x = {x}"));
                let diagnostics = report
                    .violations
                    .into_iter()
                    .map(|v| Diagnostic::error(v.kind.code(), None, format!("{}{at}", v.message)))
                    .collect();
                return Err(RunError::Invalid(ScenarioError { diagnostics }));
            }
            points.push(Point { x, system: sys, params: par });
        }
        out.push(SeriesPoints { label: s.map(|s| s.label.clone()), points });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub version: String,
    pub scenario_sha256: String,
    pub mode: Mode,
    pub grid: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Provenance,
    pub warnings: Vec<Diagnostic>,
}

impl ResultTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

enum PointError {
    Warn(Diagnostic),
    Fatal(RunError),
}

impl From<DynamicsError> for PointError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::NotLambda(_) | DynamicsError::InvalidParams(_) => {
                PointError::Fatal(RunError::invalid("unsupported_topology", e.to_string()))
            }
            _ => PointError::Fatal(RunError::Numerical(Diagnostic::error("dynamics", None, e.to_string()))),
        }
    }
}

impl From<ProtocolError> for PointError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Dynamics(d) => d.into(),
            ProtocolError::AsymmetricCoupling => PointError::Fatal(RunError::invalid("asymmetric_coupling", e.to_string())),
            ProtocolError::OutOfRange { .. } => PointError::Fatal(RunError::invalid("out_of_range", e.to_string())),
        }
    }
}

fn need_pulse(params: &RunParams, what: &str) -> Result<PulseSpec, PointError> {
    params.pulse.ok_or_else(|| PointError::Fatal(RunError::invalid("missing_pulse", format!("output '{what}' needs [run.pulse]"))))
}

fn eval_spectrum(point: &Point, outputs: &[String]) -> Result<Vec<f64>, PointError> {
    let p = &point.params;
    let drive = Drive { detuning: p.detuning, sign: p.detuning_sign, ground: 0 };
    let amps = kernel_at(&point.system, &drive).and_then(|k| output_amplitudes(&k, p.input_direction, 0));
    let a = match amps {
        Ok(a) => a,
        Err(ScatterError::Numeric(e)) => {
            let at = point.x.map_or(String::new(), |x| format!(" at x = {x}"));
            return Err(PointError::Warn(Diagnostic::warn(e.code(), format!("{e}{at}; row set to nan"))));
        }
        Err(e) => return Err(PointError::Fatal(RunError::invalid("unsupported_topology", e.to_string()))),
    };
    Ok(outputs
        .iter()
        .map(|o| match o.as_str() {
            "T2" => a.transmission(),
            "R2" => a.reflection(),
            "loss" => 1.0 - a.transmission() - a.reflection(),
            "re_t" => a.t.re,
            "im_t" => a.t.im,
            "re_r" => a.r.re,
            "im_r" => a.r.im,
            _ => unreachable!("outputs are checked on parse"),
        })
        .collect())
}

fn eval_lambda(mode: Mode, point: &Point, outputs: &[String], panels: usize) -> Result<Vec<f64>, PointError> {
    let pr = &point.params;
    let lp = LambdaParams::from_system(&point.system, pr.detuning, pr.detuning_sign)?;
    let det = &pr.detection;
    match mode {
        Mode::LambdaRates => {
            let rates = compute_rates(&lp)?;
            let mut row = Vec::with_capacity(outputs.len());
            for o in outputs {
                let v = match o.as_str() {
                    "p_d" => rates.p_d,
                    "p_r" => rates.p_r,
                    "p_sc" => rates.p_sc,
                    "p_red_r" => filtered_photon_probs(&lp)?.red_r,
                    "p_red_l" => filtered_photon_probs(&lp)?.red_l,
                    "p_blue_r" => filtered_photon_probs(&lp)?.blue_r,
                    "p_blue_l" => filtered_photon_probs(&lp)?.blue_l,
                    "stark_shift" => effective_hamiltonian_elements(&lp, need_pulse(pr, o)?.intensity).h00_shift,
                    "omega01_prime" => effective_hamiltonian_elements(&lp, need_pulse(pr, o)?.intensity).omega01_prime,
                    "click_single" => click_probabilities(&lp, &need_pulse(pr, o)?, det)?.single_photon,
                    "click_coherent" => click_probabilities(&lp, &need_pulse(pr, o)?, det)?.coherent,
                    "click_coherent_weak" => click_probabilities(&lp, &need_pulse(pr, o)?, det)?.coherent_weak,
                    _ => unreachable!("outputs are checked on parse"),
                };
                row.push(v);
            }
            Ok(row)
        }
        Mode::LambdaIntensity => {
            let pulse = need_pulse(pr, "I_out")?;
            let rates = compute_rates(&lp)?;
            let initial = match pr.initial {
                InitialState::Ground0 => GroundState { rho00: 1.0, rho11: 0.0, rho01: Default::default() },
                InitialState::Superposition => GroundState::superposition(),
            };
            let rho = evolve_ground_state(&lp, &pulse, &[pr.time], initial, &IntegratorConfig::default())?[0];
            Ok(outputs
                .iter()
                .map(|o| match o.as_str() {
                    "I_out" => output_intensity(&rates, &pulse, pr.time),
                    "rho00" => rho.rho00,
                    "rho11" => rho.rho11,
                    "re_rho01" => rho.rho01.re,
                    "im_rho01" => rho.rho01.im,
                    _ => unreachable!("outputs are checked on parse"),
                })
                .collect())
        }
        Mode::Fidelity => {
            let pulse = need_pulse(pr, "F")?;
            Ok(vec![conditional_fidelity(&lp, &pulse, pr.tc_over_t * pulse.duration, det)?])
        }
        Mode::AverageFidelity => {
            let pulse = need_pulse(pr, "Fbar")?;
            let f = average_fidelity(&lp, &pulse, det, panels)?;
            Ok(outputs
                .iter()
                .map(|o| match o.as_str() {
                    "Fbar" => f.closed_form,
                    "Fbar_numeric" => f.numeric,
                    "Fbar_analytic" => f.analytic,
                    _ => unreachable!("outputs are checked on parse"),
                })
                .collect())
        }
        Mode::Spectrum => unreachable!(),
    }
}

fn evaluate(sc: &Scenario, point: &Point) -> Result<Vec<f64>, PointError> {
    let outputs = &sc.run.outputs;
    match sc.run.mode {
        Mode::Spectrum => eval_spectrum(point, outputs),
        m => eval_lambda(m, point, outputs, sc.run.panels),
    }
}

pub fn provenance(sc: &Scenario) -> Provenance {
    let hash = Sha256::digest(serialize_scenario(sc).as_bytes());
    Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
        mode: sc.run.mode,
        grid: sc.run.sweep.as_ref().map_or_else(|| "none".to_string(), |s| s.grid.describe()),
    }
}

/// Evaluates every point, in parallel on the current rayon pool. The result
/// does not depend on the number of threads.
pub fn run_scenario(sc: &Scenario) -> Result<ResultTable, RunError> {
    if sc.run.mode == Mode::Spectrum {
        let basis = build_single_excitation_basis(&sc.system)
            .map_err(|e| RunError::invalid("unsupported_topology", e.to_string()))?;
        if basis.n_ground() != 1 {
            return Err(RunError::invalid("unsupported_topology", ScatterError::MultiGroundElastic.to_string()));
        }
    }
    let series = expand(sc)?;
    let n_out = sc.run.outputs.len();
    let n_rows = series[0].points.len();

    let jobs: Vec<&Point> = series.iter().flat_map(|s| s.points.iter()).collect();
    let results: Vec<Result<Vec<f64>, PointError>> = jobs.par_iter().map(|p| evaluate(sc, p)).collect();

    let mut columns = Vec::new();
    let sweep_label = sc.run.sweep.as_ref().map(|s| s.label.clone());
    if let Some(l) = &sweep_label {
        columns.push(l.clone());
    }
    for s in &series {
        for o in &sc.run.outputs {
            columns.push(match &s.label {
                Some(l) => format!("{o}_{l}"),
                None => o.clone(),
            });
        }
    }

    let mut rows: Vec<Vec<f64>> = (0..n_rows)
        .map(|i| series[0].points[i].x.into_iter().collect::<Vec<f64>>())
        .collect();
    let mut warnings = Vec::new();
    for (k, res) in results.into_iter().enumerate() {
        let row = k % n_rows;
        match res {
            Ok(v) => rows[row].extend(v),
            Err(PointError::Warn(d)) => {
                warnings.push(d);
                rows[row].extend(std::iter::repeat_n(f64::NAN, n_out));
            }
            Err(PointError::Fatal(e)) => return Err(e),
        }
    }
    Ok(ResultTable { columns, rows, provenance: provenance(sc), warnings })
}

/// Twelve significant digits, trailing zeros trimmed; scientific notation
/// outside `1e-4 ≤ |x| < 1e6`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        format!("{}e{exp}", trim(mant))
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

/// Writes the table as CSV with LF line endings. With `with_provenance` the
/// header is preceded by `#` comment lines identifying the run.
pub fn emit_table<W: Write>(table: &ResultTable, mut w: W, with_provenance: bool) -> io::Result<()> {
    if with_provenance {
        let p = &table.provenance;
        writeln!(w, "# wgqed {}", p.version)?;
        writeln!(w, "# scenario sha256 {}", p.scenario_sha256)?;
        writeln!(w, "# mode {:?}", p.mode)?;
        writeln!(w, "# grid {}", p.grid)?;
    }
    writeln!(w, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
