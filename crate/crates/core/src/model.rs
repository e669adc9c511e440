//! Emitter descriptions and the single-excitation basis built from them.
//!
//! Rates are in units of a reference linewidth chosen by the user, detunings
//! and energies share that unit. Positions are stored as phases `θ = k₀ z`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelKind {
    Ground,
    Excited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub id: String,
    /// Rotating-frame offset of the level.
    pub energy: f64,
    pub kind: LevelKind,
}

/// Decay channel `excited -> ground`, split into right/left waveguide rates and
/// a non-guided rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub excited: String,
    pub ground: String,
    pub gamma1d_right: f64,
    pub gamma1d_left: f64,
    pub gamma_prime: f64,
    pub coupling_phase: f64,
}

impl Transition {
    pub fn gamma1d(&self) -> f64 {
        self.gamma1d_right + self.gamma1d_left
    }

    pub fn total(&self) -> f64 {
        self.gamma1d() + self.gamma_prime
    }
}

/// Classical drive between two excited levels of one emitter. `magnitude` is
/// the full matrix element added to the Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentCoupling {
    pub a: String,
    pub b: String,
    pub magnitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelRef {
    pub emitter: String,
    pub level: String,
}

impl fmt::Display for LevelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.emitter, self.level)
    }
}

/// Exchange coupling between excited levels of two different emitters.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleCoupling {
    pub a: LevelRef,
    pub b: LevelRef,
    pub magnitude: f64,
    pub phase: f64,
}

/// Explicit splitting `ω_{from,to} = ω_from − ω_to` between two ground levels.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundSplitting {
    pub emitter: String,
    pub from: String,
    pub to: String,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emitter {
    pub id: String,
    pub phase_position: f64,
    pub levels: Vec<Level>,
    pub transitions: Vec<Transition>,
    pub coherent_couplings: Vec<CoherentCoupling>,
}

impl Emitter {
    pub fn level(&self, id: &str) -> Option<&Level> {
        self.levels.iter().find(|l| l.id == id)
    }

    pub fn level_index(&self, id: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.id == id)
    }

    pub fn grounds(&self) -> impl Iterator<Item = (usize, &Level)> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LevelKind::Ground)
    }

    pub fn excited(&self) -> impl Iterator<Item = (usize, &Level)> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LevelKind::Excited)
    }

    pub fn transition(&self, excited: &str, ground: &str) -> Option<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.excited == excited && t.ground == ground)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SystemSpec {
    pub emitters: Vec<Emitter>,
    pub dipole_couplings: Vec<DipoleCoupling>,
    pub ground_splittings: Vec<GroundSplitting>,
}

impl SystemSpec {
    pub fn emitter(&self, id: &str) -> Option<&Emitter> {
        self.emitters.iter().find(|e| e.id == id)
    }

    pub fn emitter_index(&self, id: &str) -> Option<usize> {
        self.emitters.iter().position(|e| e.id == id)
    }

    /// Splitting `ω_{from,to}` between two ground levels of one emitter. An
    /// explicit entry wins, otherwise the level energies are used.
    pub fn ground_splitting(&self, emitter: &str, from: &str, to: &str) -> Option<f64> {
        for s in &self.ground_splittings {
            if s.emitter == emitter && s.from == from && s.to == to {
                return Some(s.omega);
            }
            if s.emitter == emitter && s.from == to && s.to == from {
                return Some(-s.omega);
            }
        }
        let e = self.emitter(emitter)?;
        Some(e.level(from)?.energy - e.level(to)?.energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateId,
    DanglingReference,
    WrongLevelKind,
    NegativeRate,
    NonFinite,
    SelfCoupling,
    MissingGround,
    NonAntisymmetricSplitting,
    UnsupportedTopology,
}

impl ViolationKind {
    pub fn code(self) -> &'static str {
        match self {
            ViolationKind::DuplicateId => "duplicate_id",
            ViolationKind::DanglingReference => "dangling_reference",
            ViolationKind::WrongLevelKind => "wrong_level_kind",
            ViolationKind::NegativeRate => "negative_rate",
            ViolationKind::NonFinite => "non_finite",
            ViolationKind::SelfCoupling => "self_coupling",
            ViolationKind::MissingGround => "missing_ground",
            ViolationKind::NonAntisymmetricSplitting => "non_antisymmetric_splitting",
            ViolationKind::UnsupportedTopology => "unsupported_topology",
        }
    }
}

/// Which part of a [`SystemSpec`] a violation refers to. Indices follow the
/// vectors of the spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    System,
    Emitter(usize),
    Level { emitter: usize, level: usize },
    Transition { emitter: usize, transition: usize },
    Coherent { emitter: usize, coupling: usize },
    Dipole(usize),
    Splitting(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: Subject,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.code(), self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, subject: Subject, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            subject,
            message: message.into(),
        });
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown emitter '{0}'")]
    UnknownEmitter(String),
    #[error("unknown level '{0}'")]
    UnknownLevel(String),
    #[error("level '{0}' is not an excited level")]
    NotExcited(String),
    #[error("system has no excited states")]
    EmptyManifold,
    #[error("several emitters with more than one ground level each are not supported")]
    Unsupported,
    #[error("system failed validation ({} violation(s))", .0.violations.len())]
    Invalid(ValidationReport),
}

fn check_finite(report: &mut ValidationReport, subject: Subject, what: &str, v: f64) {
    if !v.is_finite() {
        report.push(ViolationKind::NonFinite, subject, format!("{what} is not finite"));
    }
}

fn check_rate(report: &mut ValidationReport, subject: Subject, what: &str, v: f64) {
    if !v.is_finite() {
        report.push(ViolationKind::NonFinite, subject, format!("{what} is not finite"));
    } else if v < 0.0 {
        report.push(ViolationKind::NegativeRate, subject, format!("{what} = {v} is negative"));
    }
}

/// Collects every structural problem of `system` instead of stopping at the first.
pub fn validate_system(system: &SystemSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();

    for (ei, em) in system.emitters.iter().enumerate() {
        let subj = Subject::Emitter(ei);
        if !seen.insert(em.id.as_str()) {
            report.push(ViolationKind::DuplicateId, subj, format!("emitter id '{}' is repeated", em.id));
        }
        check_finite(&mut report, subj, &format!("phase_position of emitter '{}'", em.id), em.phase_position);

        let mut level_ids = HashSet::new();
        for (li, lv) in em.levels.iter().enumerate() {
            let subj = Subject::Level { emitter: ei, level: li };
            if !level_ids.insert(lv.id.as_str()) {
                report.push(ViolationKind::DuplicateId, subj, format!("level id '{}.{}' is repeated", em.id, lv.id));
            }
            check_finite(&mut report, subj, &format!("energy of level '{}.{}'", em.id, lv.id), lv.energy);
        }
        if em.grounds().next().is_none() {
            report.push(ViolationKind::MissingGround, subj, format!("emitter '{}' has no ground level", em.id));
        }

        let mut pairs = HashSet::new();
        for (ti, tr) in em.transitions.iter().enumerate() {
            let subj = Subject::Transition { emitter: ei, transition: ti };
            let name = format!("{}.{}->{}", em.id, tr.excited, tr.ground);
            match em.level(&tr.excited) {
                None => report.push(ViolationKind::DanglingReference, subj, format!("transition {name}: no level '{}'", tr.excited)),
                Some(l) if l.kind != LevelKind::Excited => report.push(
                    ViolationKind::WrongLevelKind,
                    subj,
                    format!("transition {name}: '{}' is not an excited level", tr.excited),
                ),
                _ => {}
            }
            match em.level(&tr.ground) {
                None => report.push(ViolationKind::DanglingReference, subj, format!("transition {name}: no level '{}'", tr.ground)),
                Some(l) if l.kind != LevelKind::Ground => report.push(
                    ViolationKind::WrongLevelKind,
                    subj,
                    format!("transition {name}: '{}' is not a ground level", tr.ground),
                ),
                _ => {}
            }
            if !pairs.insert((tr.excited.as_str(), tr.ground.as_str())) {
                report.push(ViolationKind::DuplicateId, subj, format!("transition {name} is repeated"));
            }
            check_rate(&mut report, subj, &format!("gamma1d_right of {name}"), tr.gamma1d_right);
            check_rate(&mut report, subj, &format!("gamma1d_left of {name}"), tr.gamma1d_left);
            check_rate(&mut report, subj, &format!("gamma_prime of {name}"), tr.gamma_prime);
            check_finite(&mut report, subj, &format!("coupling_phase of {name}"), tr.coupling_phase);
        }

        for (ci, cc) in em.coherent_couplings.iter().enumerate() {
            let subj = Subject::Coherent { emitter: ei, coupling: ci };
            let name = format!("{}.{}<->{}", em.id, cc.a, cc.b);
            if cc.a == cc.b {
                report.push(ViolationKind::SelfCoupling, subj, format!("coherent coupling {name} couples a level to itself"));
            }
            for id in [&cc.a, &cc.b] {
                match em.level(id) {
                    None => report.push(ViolationKind::DanglingReference, subj, format!("coherent coupling {name}: no level '{id}'")),
                    Some(l) if l.kind != LevelKind::Excited => report.push(
                        ViolationKind::WrongLevelKind,
                        subj,
                        format!("coherent coupling {name}: '{id}' is not an excited level"),
                    ),
                    _ => {}
                }
            }
            check_rate(&mut report, subj, &format!("magnitude of coherent coupling {name}"), cc.magnitude);
            check_finite(&mut report, subj, &format!("phase of coherent coupling {name}"), cc.phase);
        }
    }

    for (di, dc) in system.dipole_couplings.iter().enumerate() {
        let subj = Subject::Dipole(di);
        let name = format!("{}<->{}", dc.a, dc.b);
        if dc.a.emitter == dc.b.emitter {
            report.push(ViolationKind::SelfCoupling, subj, format!("dipole coupling {name} must join two different emitters"));
        }
        for r in [&dc.a, &dc.b] {
            match system.emitter(&r.emitter) {
                None => report.push(ViolationKind::DanglingReference, subj, format!("dipole coupling {name}: no emitter '{}'", r.emitter)),
                Some(em) => match em.level(&r.level) {
                    None => report.push(ViolationKind::DanglingReference, subj, format!("dipole coupling {name}: no level '{r}'")),
                    Some(l) if l.kind != LevelKind::Excited => report.push(
                        ViolationKind::WrongLevelKind,
                        subj,
                        format!("dipole coupling {name}: '{r}' is not an excited level"),
                    ),
                    _ => {}
                },
            }
        }
        check_rate(&mut report, subj, &format!("magnitude of dipole coupling {name}"), dc.magnitude);
        check_finite(&mut report, subj, &format!("phase of dipole coupling {name}"), dc.phase);
    }

    for (si, sp) in system.ground_splittings.iter().enumerate() {
        let subj = Subject::Splitting(si);
        let name = format!("{}.{}-{}", sp.emitter, sp.from, sp.to);
        check_finite(&mut report, subj, &format!("ground splitting {name}"), sp.omega);
        if sp.from == sp.to {
            report.push(ViolationKind::SelfCoupling, subj, format!("ground splitting {name} joins a level to itself"));
        }
        match system.emitter(&sp.emitter) {
            None => report.push(ViolationKind::DanglingReference, subj, format!("ground splitting {name}: no emitter '{}'", sp.emitter)),
            Some(em) => {
                for id in [&sp.from, &sp.to] {
                    match em.level(id) {
                        None => report.push(ViolationKind::DanglingReference, subj, format!("ground splitting {name}: no level '{id}'")),
                        Some(l) if l.kind != LevelKind::Ground => report.push(
                            ViolationKind::WrongLevelKind,
                            subj,
                            format!("ground splitting {name}: '{id}' is not a ground level"),
                        ),
                        _ => {}
                    }
                }
            }
        }
        for other in &system.ground_splittings[..si] {
            if other.emitter != sp.emitter {
                continue;
            }
            let same = other.from == sp.from && other.to == sp.to;
            let reversed = other.from == sp.to && other.to == sp.from;
            if (same && other.omega != sp.omega) || (reversed && other.omega != -sp.omega) {
                report.push(
                    ViolationKind::NonAntisymmetricSplitting,
                    subj,
                    format!("ground splitting {name} contradicts an earlier entry for the same pair"),
                );
            }
        }
    }

    let multi_ground = system.emitters.iter().filter(|e| e.grounds().count() > 1).count();
    if system.emitters.len() > 1 && multi_ground > 0 {
        report.push(
            ViolationKind::UnsupportedTopology,
            Subject::System,
            "emitters with several ground levels can only be simulated on their own",
        );
    }

    report
}

/// Total decay rate of an excited level, summed over all of its channels.
pub fn total_decay_rate(emitter: &Emitter, excited: &str) -> Result<f64, ModelError> {
    match emitter.level(excited) {
        None => Err(ModelError::UnknownLevel(format!("{}.{}", emitter.id, excited))),
        Some(l) if l.kind != LevelKind::Excited => Err(ModelError::NotExcited(format!("{}.{}", emitter.id, excited))),
        Some(_) => Ok(emitter
            .transitions
            .iter()
            .filter(|t| t.excited == excited)
            .map(Transition::total)
            .sum()),
    }
}

/// One emitter excited, all others in their ground level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcitedState {
    pub emitter: usize,
    pub level: usize,
}

/// Level index of every emitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointGround {
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedBasis {
    pub grounds: Vec<JointGround>,
    pub excited: Vec<ExcitedState>,
}

impl CombinedBasis {
    pub fn n_excited(&self) -> usize {
        self.excited.len()
    }

    pub fn n_ground(&self) -> usize {
        self.grounds.len()
    }

    /// Joint ground reached when the excited emitter decays into its level `g`.
    /// `None` if that configuration is not in the basis.
    pub fn ground_after_decay(&self, state: ExcitedState, g: usize) -> Option<usize> {
        self.grounds.iter().position(|jg| {
            jg.levels[state.emitter] == g
        })
    }
}

/// Builds the single-excitation manifold and the joint ground states.
pub fn build_single_excitation_basis(system: &SystemSpec) -> Result<CombinedBasis, ModelError> {
    let report = validate_system(system);
    if !report.is_ok() {
        if report.violations.iter().all(|v| v.kind == ViolationKind::UnsupportedTopology) {
            return Err(ModelError::Unsupported);
        }
        return Err(ModelError::Invalid(report));
    }

    let mut grounds = vec![JointGround { levels: Vec::new() }];
    for em in &system.emitters {
        let mut next = Vec::new();
        for jg in &grounds {
            for (gi, _) in em.grounds() {
                let mut levels = jg.levels.clone();
                levels.push(gi);
                next.push(JointGround { levels });
            }
        }
        grounds = next;
    }

    let excited: Vec<ExcitedState> = system
        .emitters
        .iter()
        .enumerate()
        .flat_map(|(ei, em)| em.excited().map(move |(li, _)| ExcitedState { emitter: ei, level: li }))
        .collect();
    if excited.is_empty() {
        return Err(ModelError::EmptyManifold);
    }

    Ok(CombinedBasis { grounds, excited })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn level(id: &str, energy: f64, kind: LevelKind) -> Level {
        Level { id: id.into(), energy, kind }
    }

    pub fn transition(excited: &str, ground: &str, right: f64, left: f64, prime: f64) -> Transition {
        Transition {
            excited: excited.into(),
            ground: ground.into(),
            gamma1d_right: right,
            gamma1d_left: left,
            gamma_prime: prime,
            coupling_phase: 0.0,
        }
    }

    pub fn two_level(id: &str, theta: f64, energy: f64, g1d: f64, prime: f64) -> Emitter {
        Emitter {
            id: id.into(),
            phase_position: theta,
            levels: vec![level("g", 0.0, LevelKind::Ground), level("e", energy, LevelKind::Excited)],
            transitions: vec![transition("e", "g", g1d / 2.0, g1d / 2.0, prime)],
            coherent_couplings: vec![],
        }
    }

    pub fn lambda(g0: f64, g1: f64, prime0: f64, prime1: f64, omega01: f64) -> SystemSpec {
        SystemSpec {
            emitters: vec![Emitter {
                id: "L".into(),
                phase_position: 0.0,
                levels: vec![
                    level("g0", 0.0, LevelKind::Ground),
                    level("g1", omega01, LevelKind::Ground),
                    level("e", 0.0, LevelKind::Excited),
                ],
                transitions: vec![
                    transition("e", "g0", g0 / 2.0, g0 / 2.0, prime0),
                    transition("e", "g1", g1 / 2.0, g1 / 2.0, prime1),
                ],
                coherent_couplings: vec![],
            }],
            ..Default::default()
        }
    }
}
