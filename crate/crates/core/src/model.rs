//! Declarative scenario description and validation.
//!
//! A [`ScenarioSpec`] mirrors the JSON scenario files field for field. It is
//! turned into a [`ValidatedScenario`] by [`validate_scenario`], which every
//! other module consumes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{complex_serde, Diagnostic, Diagnostics, Error, Result, Severity, C64};
#[allow(unused_imports)]
use num_traits::Float;

pub const MIN_LEVELS: usize = 2;
pub const MAX_LEVELS: usize = 8;
/// Default weak-probe Rabi frequency.
pub const DEFAULT_PROBE_AMPLITUDE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub label: String,
    /// Level energy as an angular frequency. Only differences matter.
    pub energy: f64,
    pub metastable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub upper: String,
    pub lower: String,
    /// Population decay rate `upper -> lower`.
    #[serde(default)]
    pub pop_decay_rate: f64,
    /// Marks the transition as one member of the dipole-dipole coupled pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingSpec {
    pub level: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub name: String,
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub transitions: Vec<TransitionSpec>,
    #[serde(default)]
    pub dephasing: Vec<DephasingSpec>,
}

impl AtomSpec {
    pub fn new(name: &str) -> Self {
        Self { name: name.into(), levels: Vec::new(), transitions: Vec::new(), dephasing: Vec::new() }
    }

    pub fn level(mut self, label: &str, energy: f64, metastable: bool) -> Self {
        self.levels.push(LevelSpec { label: label.into(), energy, metastable });
        self
    }

    pub fn transition(mut self, upper: &str, lower: &str, pop_decay_rate: f64) -> Self {
        self.transitions.push(TransitionSpec {
            upper: upper.into(),
            lower: lower.into(),
            pop_decay_rate,
            dipole_tag: None,
        });
        self
    }

    /// Adds a transition that takes part in the dipole-dipole coupling.
    pub fn coupled_transition(mut self, upper: &str, lower: &str, pop_decay_rate: f64) -> Self {
        self.transitions.push(TransitionSpec {
            upper: upper.into(),
            lower: lower.into(),
            pop_decay_rate,
            dipole_tag: Some("dd".into()),
        });
        self
    }

    pub fn dephasing(mut self, level: &str, rate: f64) -> Self {
        self.dephasing.push(DephasingSpec { level: level.into(), rate });
        self
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    fn transition_between(&self, upper: &str, lower: &str) -> Option<&TransitionSpec> {
        self.transitions.iter().find(|t| t.upper == upper && t.lower == lower)
    }

    /// Total population decay rate out of a level.
    pub fn population_decay_out_of(&self, label: &str) -> f64 {
        self.transitions.iter().filter(|t| t.upper == label).map(|t| t.pop_decay_rate).sum()
    }

    pub fn dephasing_of(&self, label: &str) -> f64 {
        self.dephasing.iter().filter(|d| d.level == label).map(|d| d.rate).sum()
    }

    /// Coherence decay rate between two levels:
    /// `(Γ_i + Γ_j) / 2 + γ^deph_i + γ^deph_j`, zero for `i == j`.
    pub fn coherence_decay(&self, i: &str, j: &str) -> f64 {
        if i == j {
            return 0.0;
        }
        0.5 * (self.population_decay_out_of(i) + self.population_decay_out_of(j))
            + self.dephasing_of(i)
            + self.dephasing_of(j)
    }

    pub fn energy_of(&self, label: &str) -> Option<f64> {
        self.levels.iter().find(|l| l.label == label).map(|l| l.energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    #[default]
    Direct,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    #[serde(default)]
    pub mode: CouplingMode,
    /// Coupling constant `g` (direct mode; filled in by validation in
    /// geometric mode).
    #[serde(default, with = "complex_serde::option", skip_serializing_if = "Option::is_none")]
    pub g_value: Option<C64>,
    /// Interatomic distance in units of the transition wavelength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    /// `z / r`, the cosine of the angle between the dipoles and the
    /// interatomic axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar_factor: Option<f64>,
    /// Radiative rate of the coupled transition of atom A.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_a: Option<f64>,
    /// Radiative rate of the coupled transition of atom B.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_b: Option<f64>,
}

impl CouplingSpec {
    pub fn direct(g: f64) -> Self {
        Self { mode: CouplingMode::Direct, g_value: Some(C64::new(g, 0.0)), ..Default::default() }
    }

    pub fn geometric(separation: f64, polar_factor: f64, gamma_a: f64, gamma_b: f64) -> Self {
        Self {
            mode: CouplingMode::Geometric,
            g_value: None,
            separation: Some(separation),
            polar_factor: Some(polar_factor),
            gamma_a: Some(gamma_a),
            gamma_b: Some(gamma_b),
        }
    }
}

/// Near-field dipole-dipole coupling constant
/// `g = 3/2 (2π)⁻³ √(γ_A γ_B) (λ/r)³ (3 (z/r)² − 1)` with `r` in units of `λ`.
pub fn geometric_coupling(separation: f64, polar_factor: f64, gamma_a: f64, gamma_b: f64) -> f64 {
    let two_pi = 2.0 * PI;
    1.5 / (two_pi * two_pi * two_pi) * (gamma_a * gamma_b).sqrt()
        / (separation * separation * separation)
        * (3.0 * polar_factor * polar_factor - 1.0)
}

/// Time dependence of a drive amplitude, multiplied onto the complex
/// amplitude of the drive.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    #[default]
    Constant,
    /// `cos(t / period)`
    Cosine { period: f64 },
    /// `sin(t / period)`
    Sine { period: f64 },
    /// 1 on `[start, end]`, 0 elsewhere.
    Rectangular { start: f64, end: f64 },
    /// `sin²(π (t − start) / (end − start))` on `[start, end]`, 0 elsewhere.
    SineSquared { start: f64, end: f64 },
    /// Piecewise linear through the samples, held constant outside.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        self.value_in(t, t)
    }

    /// Evaluates the envelope at `t` while deciding window membership at
    /// `inside`. Integrators pass a point strictly inside the current smooth
    /// segment so that stages sitting exactly on a switching time see the
    /// segment's own side of the discontinuity.
    pub fn value_in(&self, t: f64, inside: f64) -> f64 {
        match self {
            Envelope::Constant => 1.0,
            Envelope::Cosine { period } => (t / period).cos(),
            Envelope::Sine { period } => (t / period).sin(),
            Envelope::Rectangular { start, end } => {
                if inside >= *start && inside <= *end {
                    1.0
                } else {
                    0.0
                }
            }
            Envelope::SineSquared { start, end } => {
                if inside >= *start && inside <= *end {
                    let s = (PI * (t - start) / (end - start)).sin();
                    s * s
                } else {
                    0.0
                }
            }
            Envelope::Sampled { times, values } => sample_linear(times, values, t),
        }
    }

    /// Times at which the envelope (or its derivative) is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Envelope::Rectangular { start, end } | Envelope::SineSquared { start, end } => {
                alloc::vec![*start, *end]
            }
            Envelope::Sampled { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Envelope::Constant)
    }

    fn check(&self) -> core::result::Result<(), String> {
        match self {
            Envelope::Constant => Ok(()),
            Envelope::Cosine { period } | Envelope::Sine { period } => {
                if period.is_finite() && *period > 0.0 {
                    Ok(())
                } else {
                    Err(format!("envelope period must be positive, got {period}"))
                }
            }
            Envelope::Rectangular { start, end } | Envelope::SineSquared { start, end } => {
                if start.is_finite() && end.is_finite() && start < end {
                    Ok(())
                } else {
                    Err(format!("envelope window [{start}, {end}] is empty"))
                }
            }
            Envelope::Sampled { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err("sampled envelope needs equally many times and values".into());
                }
                if times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err("sampled envelope times must increase".into());
                }
                if times.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err("sampled envelope has non-finite entries".into());
                }
                Ok(())
            }
        }
    }
}

fn sample_linear(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let k = times.partition_point(|&x| x <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] * (1.0 - w) + values[k + 1] * w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub atom: String,
    pub upper: String,
    pub lower: String,
    /// Carrier angular frequency `ν`.
    pub carrier: f64,
    /// Complex Rabi frequency `Ω`; the drive term is `−Ω(t) |upper⟩⟨lower| + h.c.`.
    #[serde(with = "complex_serde")]
    pub amplitude: C64,
    #[serde(default, skip_serializing_if = "Envelope::is_constant")]
    pub envelope: Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectiveDecay {
    pub enabled: bool,
    /// Correlation factor `β ∈ [−1, 1]` of the cross-damping
    /// `γ_AB = β √(γ_A γ_B)`.
    #[serde(default)]
    pub beta: f64,
}

/// Weak probe used by the spectral analyses. Its carrier is scanned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub atom: String,
    pub upper: String,
    pub lower: String,
    #[serde(default = "default_probe_amplitude", with = "complex_serde")]
    pub amplitude: C64,
}

fn default_probe_amplitude() -> C64 {
    C64::new(DEFAULT_PROBE_AMPLITUDE, 0.0)
}

/// Single-atom state amplitudes keyed by level label (normalized on use).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomState {
    #[serde(with = "complex_serde::map")]
    pub amplitudes: BTreeMap<String, C64>,
}

impl AtomState {
    pub fn basis(label: &str) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(label.to_string(), C64::new(1.0, 0.0));
        Self { amplitudes }
    }

    pub fn superposition(terms: &[(&str, C64)]) -> Self {
        Self { amplitudes: terms.iter().map(|(l, a)| (l.to_string(), *a)).collect() }
    }
}

/// Product initial state, keyed by atom name.
pub type InitialState = BTreeMap<String, AtomState>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    pub atom: String,
    pub ket: String,
    pub bra: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    pub t_end: f64,
    pub samples: usize,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
}

/// Level roles in the conditional gate protocols. The target atom carries the
/// qubit `{zero, one}` and the optical fields; the control atom sits in
/// `open` (transfer proceeds) or `blocked` (dipole coupling suppresses it).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateLabels {
    pub target: String,
    pub control: String,
    pub excited: String,
    pub zero: String,
    pub one: String,
    pub open: String,
    pub blocked: String,
}

impl Default for GateLabels {
    fn default() -> Self {
        Self {
            target: "A".into(),
            control: "B".into(),
            excited: "a".into(),
            zero: "c".into(),
            one: "d".into(),
            open: "c".into(),
            blocked: "b".into(),
        }
    }
}

/// Which field leads in the conditional adiabatic passage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapOrdering {
    /// `Ω cos(t/T)` on the initially empty `one → excited` leg and
    /// `−Ω sin(t/T)` on the occupied `zero → excited` leg, so the occupied
    /// state is dark at `t = 0` and ends in `+|one⟩`.
    #[default]
    Counterintuitive,
    /// `Ω cos(t/T)` on `zero → excited` and `Ω sin(t/T)` on `one → excited`
    /// as literally written; the occupied state starts bright.
    AsWritten,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseShape {
    /// Constant amplitude for `π / Ω̄`.
    #[default]
    Rectangular,
    /// `sin²` envelope over the given duration, rescaled to area `π / Ω̄`.
    SineSquared { duration: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolSpec {
    /// Conditional adiabatic passage.
    Cap {
        omega: f64,
        period: f64,
        #[serde(default)]
        ordering: CapOrdering,
        #[serde(default)]
        labels: GateLabels,
    },
    /// Conditional Raman π-pulse.
    Cpi {
        #[serde(with = "complex_serde")]
        omega1: C64,
        #[serde(with = "complex_serde")]
        omega2: C64,
        #[serde(default)]
        shape: PulseShape,
        #[serde(default)]
        labels: GateLabels,
    },
    /// Two-atom Raman transfer with cw fields on the scenario's drives.
    Raman {
        #[serde(with = "complex_serde")]
        omega1: C64,
        #[serde(with = "complex_serde")]
        omega2: C64,
        t_end: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path of the swept scalar inside the scenario document.
    pub parameter: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub scale: GridScale,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        grid_values(self.lo, self.hi, self.n, self.scale)
    }
}

pub fn grid_values(lo: f64, hi: f64, n: usize, scale: GridScale) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![lo];
    }
    (0..n)
        .map(|k| {
            let w = k as f64 / (n - 1) as f64;
            match scale {
                GridScale::Linear => lo + (hi - lo) * w,
                GridScale::Log => (lo.ln() + (hi.ln() - lo.ln()) * w).exp(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub atoms: Vec<AtomSpec>,
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub drives: Vec<DriveSpec>,
    #[serde(default)]
    pub collective_decay: CollectiveDecay,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ScenarioSpec {
    pub fn new(a: AtomSpec, b: AtomSpec, coupling: CouplingSpec) -> Self {
        Self {
            name: None,
            atoms: alloc::vec![a, b],
            coupling,
            drives: Vec::new(),
            collective_decay: CollectiveDecay::default(),
            probe: None,
            initial: None,
            evolution: None,
            protocol: None,
            sweep: None,
        }
    }

    pub fn drive(mut self, atom: &str, upper: &str, lower: &str, carrier: f64, amplitude: C64) -> Self {
        self.drives.push(DriveSpec {
            atom: atom.into(),
            upper: upper.into(),
            lower: lower.into(),
            carrier,
            amplitude,
            envelope: Envelope::Constant,
        });
        self
    }

    /// Adds a drive tuned exactly to its transition frequency.
    pub fn resonant_drive(self, atom: &str, upper: &str, lower: &str, amplitude: C64) -> Self {
        let carrier = self.transition_frequency(atom, upper, lower).unwrap_or(0.0);
        self.drive(atom, upper, lower, carrier, amplitude)
    }

    pub fn probe(mut self, atom: &str, upper: &str, lower: &str) -> Self {
        self.probe = Some(ProbeSpec {
            atom: atom.into(),
            upper: upper.into(),
            lower: lower.into(),
            amplitude: default_probe_amplitude(),
        });
        self
    }

    pub fn initial_state(mut self, a: AtomState, b: AtomState) -> Self {
        let mut init = InitialState::new();
        init.insert(self.atoms[0].name.clone(), a);
        init.insert(self.atoms[1].name.clone(), b);
        self.initial = Some(init);
        self
    }

    pub fn collective(mut self, beta: f64) -> Self {
        self.collective_decay = CollectiveDecay { enabled: true, beta };
        self
    }

    pub fn atom(&self, name: &str) -> Option<&AtomSpec> {
        self.atoms.iter().find(|a| a.name == name)
    }

    /// `E_upper − E_lower` for levels of one atom.
    pub fn transition_frequency(&self, atom: &str, upper: &str, lower: &str) -> Option<f64> {
        let a = self.atom(atom)?;
        Some(a.energy_of(upper)? - a.energy_of(lower)?)
    }
}

/// Level indices of the dipole-dipole coupled transitions, `[atom A, atom B]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledPair {
    pub upper: [usize; 2],
    pub lower: [usize; 2],
}

/// A scenario that passed validation, with the coupling constant resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedScenario {
    spec: ScenarioSpec,
    g: C64,
    coupled: Option<CoupledPair>,
    warnings: Vec<Diagnostic>,
}

impl ValidatedScenario {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn into_spec(self) -> ScenarioSpec {
        self.spec
    }

    /// Dipole-dipole coupling constant `g`.
    pub fn g(&self) -> C64 {
        self.g
    }

    pub fn coupled(&self) -> Option<CoupledPair> {
        self.coupled
    }

    pub fn warnings(&self) -> &[Diagnostic] {
        &self.warnings
    }

    pub fn atoms(&self) -> &[AtomSpec] {
        &self.spec.atoms
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.spec.atoms[0].levels.len(), self.spec.atoms[1].levels.len())
    }

    pub fn dim(&self) -> usize {
        let (a, b) = self.dims();
        a * b
    }

    pub fn atom_index(&self, name: &str) -> Result<usize> {
        self.spec
            .atoms
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAtom(name.into()))
    }

    pub fn level_index(&self, atom: usize, label: &str) -> Result<usize> {
        let a = &self.spec.atoms[atom];
        a.level_index(label)
            .ok_or_else(|| Error::UnknownLabel { atom: a.name.clone(), label: label.into() })
    }

    /// Composite basis index of `|i_A j_B⟩` (atom A is the slow index).
    pub fn basis_index(&self, level_a: usize, level_b: usize) -> usize {
        level_a * self.dims().1 + level_b
    }

    pub fn basis_label(&self, index: usize) -> String {
        let nb = self.dims().1;
        let (a, b) = (&self.spec.atoms[0], &self.spec.atoms[1]);
        format!("{}_{} {}_{}", a.levels[index / nb].label, a.name, b.levels[index % nb].label, b.name)
    }

    /// Re-validates a modified copy of the underlying spec.
    pub fn modified(&self, f: impl FnOnce(&mut ScenarioSpec)) -> Result<ValidatedScenario> {
        let mut spec = self.spec.clone();
        f(&mut spec);
        validate_scenario(&spec)
    }
}

/// Checks a raw scenario and resolves the coupling constant.
///
/// All problems found are reported together in [`Error::Validation`];
/// warnings are kept on the returned scenario.
pub fn validate_scenario(raw: &ScenarioSpec) -> Result<ValidatedScenario> {
    let mut diags = Vec::new();
    let spec = raw.clone();

    if spec.atoms.len() != 2 {
        diags.push(Diagnostic::error(format!("exactly two atoms required, found {}", spec.atoms.len())));
        return Err(Error::Validation(Diagnostics(diags)));
    }
    if spec.atoms[0].name == spec.atoms[1].name {
        diags.push(Diagnostic::error(format!("duplicate atom name `{}`", spec.atoms[0].name)));
    }
    for atom in &spec.atoms {
        check_atom(atom, &mut diags);
    }

    let coupled = find_coupled_pair(&spec, &mut diags);
    let g = resolve_coupling(&spec, coupled, &mut diags);

    for (k, d) in spec.drives.iter().enumerate() {
        check_drive(&spec, k, d, coupled, &mut diags);
    }

    let beta = spec.collective_decay.beta;
    if !beta.is_finite() || beta.abs() > 1.0 {
        diags.push(Diagnostic::error(format!("collective decay factor β = {beta} outside [-1, 1]")));
    }
    if spec.collective_decay.enabled && coupled.is_none() {
        diags.push(Diagnostic::error("collective decay requires a coupled dipole pair"));
    }

    if let Some(p) = &spec.probe {
        check_transition_ref(&spec, "probe", &p.atom, &p.upper, &p.lower, &mut diags);
        if !(p.amplitude.re.is_finite() && p.amplitude.im.is_finite()) || p.amplitude.norm() == 0.0 {
            diags.push(Diagnostic::error("probe amplitude must be finite and nonzero"));
        }
    }
    if let Some(init) = &spec.initial {
        check_initial(&spec, init, &mut diags);
    }
    if let Some(ev) = &spec.evolution {
        check_evolution(&spec, ev, &mut diags);
    }
    if let Some(p) = &spec.protocol {
        check_protocol(&spec, p, &mut diags);
    }
    if let Some(s) = &spec.sweep {
        if s.n == 0 || !s.lo.is_finite() || !s.hi.is_finite() || s.lo > s.hi {
            diags.push(Diagnostic::error("sweep grid must satisfy lo <= hi and n >= 1"));
        }
        if s.scale == GridScale::Log && s.lo <= 0.0 {
            diags.push(Diagnostic::error("logarithmic sweep needs lo > 0"));
        }
    }

    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(Error::Validation(Diagnostics(diags)));
    }

    let mut spec = spec;
    spec.coupling.g_value = Some(g);
    Ok(ValidatedScenario { spec, g, coupled, warnings: diags })
}

fn check_atom(atom: &AtomSpec, diags: &mut Vec<Diagnostic>) {
    let n = atom.levels.len();
    if !(MIN_LEVELS..=MAX_LEVELS).contains(&n) {
        diags.push(Diagnostic::error(format!(
            "atom {}: level count {n} outside [{MIN_LEVELS}, {MAX_LEVELS}]",
            atom.name
        )));
    }
    for (i, l) in atom.levels.iter().enumerate() {
        if atom.levels[..i].iter().any(|o| o.label == l.label) {
            diags.push(Diagnostic::error(format!("atom {}: duplicate label `{}`", atom.name, l.label)));
        }
        if !l.energy.is_finite() {
            diags.push(Diagnostic::error(format!("atom {}: level `{}` has non-finite energy", atom.name, l.label)));
        }
    }
    for (i, t) in atom.transitions.iter().enumerate() {
        let (eu, el) = (atom.energy_of(&t.upper), atom.energy_of(&t.lower));
        if eu.is_none() || el.is_none() {
            diags.push(Diagnostic::error(format!(
                "atom {}: transition {}->{} references an unknown level",
                atom.name, t.upper, t.lower
            )));
            continue;
        }
        if t.upper == t.lower {
            diags.push(Diagnostic::error(format!("atom {}: transition {0}->{0} is trivial", t.upper)));
        }
        let same_pair = |o: &TransitionSpec| {
            (o.upper == t.upper && o.lower == t.lower) || (o.upper == t.lower && o.lower == t.upper)
        };
        if atom.transitions[..i].iter().any(same_pair) {
            diags.push(Diagnostic::error(format!(
                "atom {}: more than one transition between `{}` and `{}`",
                atom.name, t.upper, t.lower
            )));
        }
        if !t.pop_decay_rate.is_finite() || t.pop_decay_rate < 0.0 {
            diags.push(Diagnostic::error(format!(
                "atom {}: negative or non-finite decay rate on {}->{}",
                atom.name, t.upper, t.lower
            )));
        } else if t.pop_decay_rate > 0.0 {
            if let (Some(eu), Some(el)) = (eu, el) {
                if eu <= el {
                    diags.push(Diagnostic::error(format!(
                        "atom {}: population decay {}->{} must lower the energy",
                        atom.name, t.upper, t.lower
                    )));
                }
            }
            if atom.levels.iter().any(|l| l.label == t.upper && l.metastable) {
                diags.push(Diagnostic::warning(format!(
                    "atom {}: metastable level `{}` has optical decay",
                    atom.name, t.upper
                )));
            }
        }
    }
    for d in &atom.dephasing {
        if atom.level_index(&d.level).is_none() {
            diags.push(Diagnostic::error(format!("atom {}: dephasing on unknown level `{}`", atom.name, d.level)));
        }
        if !d.rate.is_finite() || d.rate < 0.0 {
            diags.push(Diagnostic::error(format!(
                "atom {}: negative or non-finite dephasing rate on `{}`",
                atom.name, d.level
            )));
        }
    }
}

fn find_coupled_pair(spec: &ScenarioSpec, diags: &mut Vec<Diagnostic>) -> Option<CoupledPair> {
    let mut tagged: [Vec<&TransitionSpec>; 2] = [Vec::new(), Vec::new()];
    for (k, atom) in spec.atoms.iter().enumerate() {
        tagged[k] = atom.transitions.iter().filter(|t| t.dipole_tag.is_some()).collect();
    }
    match (tagged[0].len(), tagged[1].len()) {
        (0, 0) => None,
        (1, 1) => {
            let (ta, tb) = (tagged[0][0], tagged[1][0]);
            if ta.dipole_tag != tb.dipole_tag {
                diags.push(Diagnostic::error("more than one coupled-dipole pair (tags differ)"));
                return None;
            }
            let idx = |k: usize, l: &str| spec.atoms[k].level_index(l);
            match (idx(0, &ta.upper), idx(0, &ta.lower), idx(1, &tb.upper), idx(1, &tb.lower)) {
                (Some(ua), Some(la), Some(ub), Some(lb)) => {
                    Some(CoupledPair { upper: [ua, ub], lower: [la, lb] })
                }
                _ => None,
            }
        }
        (na, nb) if na > 1 || nb > 1 => {
            diags.push(Diagnostic::error("more than one coupled-dipole pair"));
            None
        }
        _ => {
            diags.push(Diagnostic::error("coupled dipole tag must appear on exactly one transition of each atom"));
            None
        }
    }
}

fn resolve_coupling(spec: &ScenarioSpec, coupled: Option<CoupledPair>, diags: &mut Vec<Diagnostic>) -> C64 {
    let c = &spec.coupling;
    match c.mode {
        CouplingMode::Direct => match c.g_value {
            Some(g) if g.re.is_finite() && g.im.is_finite() => g,
            Some(_) => {
                diags.push(Diagnostic::error("coupling g_value must be finite"));
                C64::new(0.0, 0.0)
            }
            None if coupled.is_none() => C64::new(0.0, 0.0),
            None => {
                diags.push(Diagnostic::error("direct coupling mode needs g_value"));
                C64::new(0.0, 0.0)
            }
        },
        CouplingMode::Geometric => {
            let r = c.separation.unwrap_or(f64::NAN);
            if !(r.is_finite() && r > 0.0) {
                diags.push(Diagnostic::error(format!("nonpositive separation r = {r}")));
                return C64::new(0.0, 0.0);
            }
            let p = c.polar_factor.unwrap_or(0.0);
            if !(p.is_finite() && p.abs() <= 1.0) {
                diags.push(Diagnostic::error(format!("polar factor z/r = {p} outside [-1, 1]")));
                return C64::new(0.0, 0.0);
            }
            let coupled_rate = |k: usize| {
                coupled.map(|cp| {
                    let atom = &spec.atoms[k];
                    let upper = &atom.levels[cp.upper[k]].label;
                    let lower = &atom.levels[cp.lower[k]].label;
                    atom.transition_between(upper, lower).map(|t| t.pop_decay_rate).unwrap_or(0.0)
                })
            };
            let ga = c.gamma_a.or_else(|| coupled_rate(0));
            let gb = c.gamma_b.or_else(|| coupled_rate(1));
            match (ga, gb) {
                (Some(ga), Some(gb)) if ga >= 0.0 && gb >= 0.0 && ga.is_finite() && gb.is_finite() => {
                    C64::new(geometric_coupling(r, p, ga, gb), 0.0)
                }
                _ => {
                    diags.push(Diagnostic::error("geometric coupling needs nonnegative radiative rates"));
                    C64::new(0.0, 0.0)
                }
            }
        }
    }
}

fn check_transition_ref(
    spec: &ScenarioSpec,
    what: &str,
    atom: &str,
    upper: &str,
    lower: &str,
    diags: &mut Vec<Diagnostic>,
) -> bool {
    let Some(a) = spec.atom(atom) else {
        diags.push(Diagnostic::error(format!("{what}: unknown atom `{atom}`")));
        return false;
    };
    if a.transition_between(upper, lower).is_none() {
        diags.push(Diagnostic::error(format!(
            "{what} on nonexistent transition {upper}->{lower} of atom {atom}"
        )));
        return false;
    }
    true
}

fn check_drive(spec: &ScenarioSpec, k: usize, d: &DriveSpec, coupled: Option<CoupledPair>, diags: &mut Vec<Diagnostic>) {
    let what = format!("drive #{k}");
    if !check_transition_ref(spec, &what, &d.atom, &d.upper, &d.lower, diags) {
        return;
    }
    if !(d.amplitude.re.is_finite() && d.amplitude.im.is_finite()) {
        diags.push(Diagnostic::error(format!("{what}: amplitude must be finite")));
    }
    if !d.carrier.is_finite() {
        diags.push(Diagnostic::error(format!("{what}: carrier must be finite")));
    }
    if let Err(msg) = d.envelope.check() {
        diags.push(Diagnostic::error(format!("{what}: {msg}")));
    }
    if let Some(cp) = coupled {
        let ai = spec.atoms.iter().position(|a| a.name == d.atom).unwrap_or(0);
        let atom = &spec.atoms[ai];
        if atom.levels[cp.upper[ai]].label == d.upper && atom.levels[cp.lower[ai]].label == d.lower {
            diags.push(Diagnostic::warning(format!("{what} drives the dipole-coupled transition")));
        }
    }
}

fn check_initial(spec: &ScenarioSpec, init: &InitialState, diags: &mut Vec<Diagnostic>) {
    for atom in &spec.atoms {
        let Some(st) = init.get(&atom.name) else {
            diags.push(Diagnostic::error(format!("initial state missing atom `{}`", atom.name)));
            continue;
        };
        let mut norm = 0.0;
        for (label, amp) in &st.amplitudes {
            if atom.level_index(label).is_none() {
                diags.push(Diagnostic::error(format!("initial state: unknown level `{label}` in atom {}", atom.name)));
            }
            if !(amp.re.is_finite() && amp.im.is_finite()) {
                diags.push(Diagnostic::error("initial state amplitudes must be finite"));
            }
            norm += amp.norm_sqr();
        }
        if norm == 0.0 {
            diags.push(Diagnostic::error(format!("initial state of atom {} is zero", atom.name)));
        }
    }
    for name in init.keys() {
        if spec.atom(name).is_none() {
            diags.push(Diagnostic::error(format!("initial state for unknown atom `{name}`")));
        }
    }
}

fn check_evolution(spec: &ScenarioSpec, ev: &EvolutionSpec, diags: &mut Vec<Diagnostic>) {
    if !(ev.t_end.is_finite() && ev.t_end > 0.0) || ev.samples < 2 {
        diags.push(Diagnostic::error("evolution needs t_end > 0 and at least 2 samples"));
    }
    for o in &ev.observables {
        match spec.atom(&o.atom) {
            Some(a) if a.level_index(&o.ket).is_some() && a.level_index(&o.bra).is_some() => {}
            _ => diags.push(Diagnostic::error(format!("observable `{}` references unknown levels", o.name))),
        }
    }
}

fn check_gate_labels(spec: &ScenarioSpec, l: &GateLabels, diags: &mut Vec<Diagnostic>) {
    check_transition_ref(spec, "gate", &l.target, &l.excited, &l.zero, diags);
    check_transition_ref(spec, "gate", &l.target, &l.excited, &l.one, diags);
    match spec.atom(&l.control) {
        Some(c) if c.level_index(&l.open).is_some() && c.level_index(&l.blocked).is_some() => {}
        _ => diags.push(Diagnostic::error("gate control levels not found")),
    }
    if l.target == l.control {
        diags.push(Diagnostic::error("gate target and control must be different atoms"));
    }
}

fn check_protocol(spec: &ScenarioSpec, p: &ProtocolSpec, diags: &mut Vec<Diagnostic>) {
    match p {
        ProtocolSpec::Cap { omega, period, labels, .. } => {
            if !(omega.is_finite() && *omega > 0.0 && period.is_finite() && *period > 0.0) {
                diags.push(Diagnostic::error("adiabatic passage needs Ω > 0 and T > 0"));
            }
            check_gate_labels(spec, labels, diags);
        }
        ProtocolSpec::Cpi { omega1, omega2, shape, labels } => {
            if (omega1.norm_sqr() + omega2.norm_sqr()).sqrt() <= 0.0 {
                diags.push(Diagnostic::error("Raman pulse needs nonzero total amplitude"));
            }
            if let PulseShape::SineSquared { duration } = shape {
                if !(duration.is_finite() && *duration > 0.0) {
                    diags.push(Diagnostic::error("pulse duration must be positive"));
                }
            }
            check_gate_labels(spec, labels, diags);
        }
        ProtocolSpec::Raman { t_end, samples, .. } => {
            if !(t_end.is_finite() && *t_end > 0.0) || *samples < 2 {
                diags.push(Diagnostic::error("Raman transfer needs t_end > 0 and at least 2 samples"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig1a() -> ScenarioSpec {
        let a = AtomSpec::new("A")
            .level("a", 100.0, false)
            .level("b", 5.0, true)
            .level("c", 0.0, true)
            .coupled_transition("a", "b", 0.0)
            .transition("a", "c", 0.0)
            .dephasing("a", 1.0);
        let b = AtomSpec::new("B")
            .level("a", 95.0, false)
            .level("b", 0.0, true)
            .level("c", 3.0, true)
            .coupled_transition("a", "b", 0.0)
            .transition("a", "c", 0.0)
            .dephasing("a", 1.0);
        ScenarioSpec::new(a, b, CouplingSpec::direct(4.0))
            .resonant_drive("B", "a", "c", C64::new(1.0, 0.0))
            .probe("A", "a", "c")
    }

    fn errors(r: Result<ValidatedScenario>) -> Vec<String> {
        match r {
            Err(Error::Validation(d)) => d.0.into_iter().map(|d| d.message).collect(),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn fig1a_scheme_is_valid() {
        let v = validate_scenario(&fig1a()).unwrap();
        assert_eq!(v.dims(), (3, 3));
        assert_eq!(v.g(), C64::new(4.0, 0.0));
        let cp = v.coupled().unwrap();
        assert_eq!(cp.upper, [0, 0]);
        assert_eq!(cp.lower, [1, 1]);
        assert!(v.warnings().is_empty());
    }

    #[test]
    fn duplicate_label_rejected() {
        let mut s = fig1a();
        s.atoms[0].levels[2].label = "b".into();
        let errs = errors(validate_scenario(&s));
        assert!(errs.iter().any(|e| e.contains("duplicate label")), "{errs:?}");
    }

    #[test]
    fn zero_separation_rejected() {
        let mut s = fig1a();
        s.coupling = CouplingSpec::geometric(0.0, 1.0, 1.0, 1.0);
        let errs = errors(validate_scenario(&s));
        assert!(errs.iter().any(|e| e.contains("nonpositive separation")), "{errs:?}");
    }

    #[test]
    fn drive_on_missing_transition_rejected() {
        let s = fig1a().drive("A", "b", "c", 5.0, C64::new(1.0, 0.0));
        let errs = errors(validate_scenario(&s));
        assert!(errs.iter().any(|e| e.contains("nonexistent transition")), "{errs:?}");
    }

    #[test]
    fn negative_rate_rejected() {
        let mut s = fig1a();
        s.atoms[1].transitions[1].pop_decay_rate = -0.5;
        let errs = errors(validate_scenario(&s));
        assert!(errs.iter().any(|e| e.contains("negative")), "{errs:?}");
    }

    #[test]
    fn second_coupled_pair_rejected() {
        let mut s = fig1a();
        s.atoms[0].transitions[1].dipole_tag = Some("dd".into());
        let errs = errors(validate_scenario(&s));
        assert!(errs.iter().any(|e| e.contains("more than one coupled-dipole pair")), "{errs:?}");
    }

    #[test]
    fn driving_coupled_transition_is_a_warning() {
        let s = fig1a().resonant_drive("A", "a", "b", C64::new(0.1, 0.0));
        let v = validate_scenario(&s).unwrap();
        assert_eq!(v.warnings().len(), 1);
        assert!(v.warnings()[0].message.contains("dipole-coupled"));
    }

    #[test]
    fn beta_out_of_range_rejected() {
        let s = fig1a().collective(1.5);
        assert!(!errors(validate_scenario(&s)).is_empty());
    }

    #[test]
    fn validation_is_idempotent() {
        for coupling in [CouplingSpec::direct(4.0), CouplingSpec::geometric(0.05, 1.0, 1.0, 1.0)] {
            let mut s = fig1a();
            s.coupling = coupling;
            let once = validate_scenario(&s).unwrap();
            let twice = validate_scenario(once.spec()).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn geometric_coupling_scales_as_inverse_cube() {
        for &r in &[0.01, 0.037, 0.1, 0.25, 1.3] {
            let g1 = geometric_coupling(r, 1.0, 1.0, 0.7);
            let g2 = geometric_coupling(2.0 * r, 1.0, 1.0, 0.7);
            assert_eq!(g2 / g1, 0.125);
        }
        let s = {
            let mut s = fig1a();
            s.coupling = CouplingSpec::geometric(0.1, 0.0, 1.0, 1.0);
            s
        };
        let g = validate_scenario(&s).unwrap().g().re;
        // perpendicular geometry flips the sign: 3·0 − 1 = −1
        let expected = -1.5 / (8.0 * PI * PI * PI) / 1e-3;
        assert!((g - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn envelopes() {
        let e = Envelope::Rectangular { start: 1.0, end: 2.0 };
        assert_eq!(e.value(0.5), 0.0);
        assert_eq!(e.value(1.5), 1.0);
        assert_eq!(e.value_in(2.0, 2.5), 0.0);
        assert_eq!(e.value_in(2.0, 1.9), 1.0);
        let s = Envelope::Sampled { times: alloc::vec![0.0, 1.0, 3.0], values: alloc::vec![0.0, 2.0, 0.0] };
        assert_eq!(s.value(0.5), 1.0);
        assert_eq!(s.value(2.0), 1.0);
        assert_eq!(s.value(5.0), 0.0);
    }

    #[test]
    fn log_grid_endpoints() {
        let v = grid_values(0.1, 100.0, 4, GridScale::Log);
        assert!((v[0] - 0.1).abs() < 1e-15);
        assert!((v[1] - 1.0).abs() < 1e-12);
        assert!((v[3] - 100.0).abs() < 1e-12);
    }
}
