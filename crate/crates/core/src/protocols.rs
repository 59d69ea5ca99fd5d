//! Pulse protocols on the two-atom system: cw two-atom Raman transfer,
//! conditional adiabatic passage (cAP), conditional Raman pulses (cπ), their
//! ideal target maps and the minimal fidelity of simulated runs.
//!
//! In the gate protocols the target atom holds a qubit `{zero, one}` coupled
//! to a common `excited` level by resonant fields; the control atom selects
//! the branch. With the control in `open` the target evolves freely, with the
//! control in `blocked` the dipole exchange shifts the excited level out of
//! resonance and the target is left alone.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    basis_state, evolve_at, evolve_many, pure_density, uniform_times, DensityMatrix, EvolveOptions, LindbladSystem,
    PureState, Trajectory,
};
use crate::model::{
    CapOrdering, DriveSpec, Envelope, GateLabels, ProtocolSpec, PulseShape, ValidatedScenario,
};
use crate::operators::sigma;
use crate::spectra::{find_extrema, ExtremumKind};
use crate::{Diagnostic, Error, Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

/// Seed of the pseudo-random product states in the default fidelity set.
pub const DEFAULT_SEED: u64 = 0x5EED_2A70;
/// Number of pseudo-random product states in the default fidelity set.
pub const DEFAULT_RANDOM_STATES: usize = 12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    CosineSine,
    ShapedIdentical,
    Rectangular,
    CustomSampled,
}

/// Time-dependent fields of one protocol run on `[0, duration]`.
///
/// Carriers are left at zero and set to the bare transition frequencies by
/// [`apply_schedule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub drives: Vec<DriveSpec>,
    pub duration: f64,
    pub kind: ScheduleKind,
}

impl PulseSchedule {
    /// Complex Rabi frequency of every drive at `t`.
    pub fn rabi_at(&self, t: f64) -> Vec<C64> {
        self.drives.iter().map(|d| d.amplitude * d.envelope.value(t)).collect()
    }

    /// `√(Σ|Ω_k(t)|²)`.
    pub fn total_rabi(&self, t: f64) -> f64 {
        self.rabi_at(t).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Mixing angles of a conditional Raman pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateAngles {
    /// `tan θ = 2|Ω₁||Ω₂| / (|Ω₁|² − |Ω₂|²)`, `θ ∈ [0, π]`.
    pub theta: f64,
    /// `e^{iφ} = Ω₁* Ω₂ / (|Ω₁||Ω₂|)`, `φ ∈ (−π, π]`.
    pub phi: f64,
    /// One of the two fields vanishes, so there is no Raman coupling.
    pub degenerate: bool,
}

impl GateAngles {
    pub fn from_amplitudes(omega1: C64, omega2: C64) -> Result<Self> {
        let (m1, m2) = (omega1.norm(), omega2.norm());
        if m1 == 0.0 && m2 == 0.0 {
            return Err(Error::invalid("Raman pulse needs nonzero total amplitude"));
        }
        if m2 == 0.0 {
            return Ok(Self { theta: 0.0, phi: 0.0, degenerate: true });
        }
        if m1 == 0.0 {
            return Ok(Self { theta: PI, phi: 0.0, degenerate: true });
        }
        let theta = (2.0 * m1 * m2).atan2(m1 * m1 - m2 * m2);
        let mut phi = (omega1.conj() * omega2).arg();
        if phi <= -PI {
            phi = PI;
        }
        Ok(Self { theta, phi, degenerate: false })
    }
}

fn drive(atom: &str, upper: &str, lower: &str, amplitude: C64, envelope: Envelope) -> DriveSpec {
    DriveSpec { atom: atom.into(), upper: upper.into(), lower: lower.into(), carrier: 0.0, amplitude, envelope }
}

/// Conditional adiabatic passage fields `Ω cos(t/T)`, `Ω sin(t/T)` on
/// `[0, Tπ/2]`, placed according to `ordering`.
pub fn cap_schedule(omega: f64, period: f64, ordering: CapOrdering, labels: &GateLabels) -> Result<PulseSchedule> {
    if !(omega.is_finite() && omega > 0.0 && period.is_finite() && period > 0.0) {
        return Err(Error::invalid(format!("adiabatic passage needs Ω > 0 and T > 0, got Ω = {omega}, T = {period}")));
    }
    let l = labels;
    let cos = Envelope::Cosine { period };
    let sin = Envelope::Sine { period };
    let amp = C64::new(omega, 0.0);
    let drives = match ordering {
        CapOrdering::Counterintuitive => vec![
            drive(&l.target, &l.excited, &l.one, amp, cos),
            drive(&l.target, &l.excited, &l.zero, -amp, sin),
        ],
        CapOrdering::AsWritten => vec![
            drive(&l.target, &l.excited, &l.zero, amp, cos),
            drive(&l.target, &l.excited, &l.one, amp, sin),
        ],
    };
    Ok(PulseSchedule { drives, duration: FRAC_PI_2 * period, kind: ScheduleKind::CosineSine })
}

/// Identically shaped resonant pulses `Ω̄₁ f(t)`, `Ω̄₂ f(t)` on `zero -> excited`
/// and `one -> excited`, scaled so that `∫ f dt · Ω̄ = π`.
pub fn cpi_schedule(omega1: C64, omega2: C64, shape: &PulseShape, labels: &GateLabels) -> Result<(PulseSchedule, GateAngles)> {
    let angles = GateAngles::from_amplitudes(omega1, omega2)?;
    let bar = (omega1.norm_sqr() + omega2.norm_sqr()).sqrt();
    if !bar.is_finite() {
        return Err(Error::invalid("Raman pulse amplitudes must be finite"));
    }
    let (envelope, duration, scale, kind) = match *shape {
        PulseShape::Rectangular => {
            let d = PI / bar;
            (Envelope::Rectangular { start: 0.0, end: d }, d, 1.0, ScheduleKind::Rectangular)
        }
        PulseShape::SineSquared { duration } => {
            if !(duration.is_finite() && duration > 0.0) {
                return Err(Error::invalid(format!("pulse duration must be positive, got {duration}")));
            }
            // ∫ sin² over the window is duration / 2
            let s = PI / (bar * 0.5 * duration);
            (Envelope::SineSquared { start: 0.0, end: duration }, duration, s, ScheduleKind::ShapedIdentical)
        }
    };
    let l = labels;
    let drives = vec![
        drive(&l.target, &l.excited, &l.zero, omega1 * scale, envelope.clone()),
        drive(&l.target, &l.excited, &l.one, omega2 * scale, envelope),
    ];
    Ok((PulseSchedule { drives, duration, kind }, angles))
}

/// Copy of the scenario with the schedule's drives added, each tuned to its
/// bare transition frequency.
pub fn apply_schedule(v: &ValidatedScenario, schedule: &PulseSchedule) -> Result<ValidatedScenario> {
    let mut drives = Vec::with_capacity(schedule.drives.len());
    for d in &schedule.drives {
        let carrier = v
            .spec()
            .transition_frequency(&d.atom, &d.upper, &d.lower)
            .ok_or_else(|| Error::UnknownLabel { atom: d.atom.clone(), label: format!("{} / {}", d.upper, d.lower) })?;
        drives.push(DriveSpec { carrier, ..d.clone() });
    }
    v.modified(|s| s.drives.extend(drives))
}

struct GateIndex {
    target: usize,
    zero: usize,
    one: usize,
    open: usize,
    blocked: usize,
}

impl GateIndex {
    fn new(v: &ValidatedScenario, l: &GateLabels) -> Result<Self> {
        let target = v.atom_index(&l.target)?;
        let control = v.atom_index(&l.control)?;
        if target == control {
            return Err(Error::invalid("gate target and control must be different atoms"));
        }
        Ok(Self {
            target,
            zero: v.level_index(target, &l.zero)?,
            one: v.level_index(target, &l.one)?,
            open: v.level_index(control, &l.open)?,
            blocked: v.level_index(control, &l.blocked)?,
        })
    }

    /// Joint index of `|t_target c_control⟩`.
    fn joint(&self, v: &ValidatedScenario, t: usize, c: usize) -> usize {
        if self.target == 0 {
            v.basis_index(t, c)
        } else {
            v.basis_index(c, t)
        }
    }

    fn split(&self, v: &ValidatedScenario, k: usize) -> (usize, usize) {
        let nb = v.dims().1;
        let (i, j) = (k / nb, k % nb);
        if self.target == 0 {
            (i, j)
        } else {
            (j, i)
        }
    }
}

fn check_dim(v: &ValidatedScenario, psi: &PureState) -> Result<()> {
    if psi.len() != v.dim() {
        return Err(Error::DimensionMismatch { expected: v.dim(), found: psi.len() });
    }
    Ok(())
}

/// Ideal conditional adiabatic passage: `|zero, open⟩ -> |one, open⟩`, every
/// other component unchanged. The `one` level must start empty.
pub fn ideal_cap_apply(v: &ValidatedScenario, psi: &PureState, labels: &GateLabels) -> Result<PureState> {
    check_dim(v, psi)?;
    let gi = GateIndex::new(v, labels)?;
    let (_, nc) = if gi.target == 0 { v.dims() } else { (v.dims().1, v.dims().0) };
    let occupied: f64 = (0..nc).map(|c| psi[gi.joint(v, gi.one, c)].norm_sqr()).sum();
    if occupied > 1e-12 {
        return Err(Error::invalid(format!("level `{}` of the target must be empty, population {occupied:e}", labels.one)));
    }
    let mut out = psi.clone();
    let from = gi.joint(v, gi.zero, gi.open);
    let to = gi.joint(v, gi.one, gi.open);
    out[to] = psi[from];
    out[from] = ZERO;
    Ok(out)
}

/// Ideal conditional Raman pulse. On the `open` branch
/// `|zero⟩ -> cos θ |zero⟩ + e^{−iφ} sin θ |one⟩` and
/// `|one⟩ -> −cos θ |one⟩ + e^{iφ} sin θ |zero⟩`; identity elsewhere.
pub fn ideal_cpi_apply(v: &ValidatedScenario, psi: &PureState, angles: &GateAngles, labels: &GateLabels) -> Result<PureState> {
    check_dim(v, psi)?;
    let gi = GateIndex::new(v, labels)?;
    let (c, s) = (angles.theta.cos(), angles.theta.sin());
    let e = C64::from_polar(1.0, angles.phi);
    let iz = gi.joint(v, gi.zero, gi.open);
    let io = gi.joint(v, gi.one, gi.open);
    let (z, o) = (psi[iz], psi[io]);
    let mut out = psi.clone();
    out[iz] = z * c + o * e * s;
    out[io] = z * e.conj() * s - o * c;
    Ok(out)
}

/// Ideal map of a gate protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Cap,
    Cpi(GateAngles),
}

impl Gate {
    pub fn apply(&self, v: &ValidatedScenario, psi: &PureState, labels: &GateLabels) -> Result<PureState> {
        match self {
            Gate::Cap => ideal_cap_apply(v, psi, labels),
            Gate::Cpi(a) => ideal_cpi_apply(v, psi, a, labels),
        }
    }
}

/// A gate protocol ready to run: the schedule, its ideal map and the driven
/// system.
#[derive(Debug, Clone)]
pub struct PreparedGate {
    pub schedule: PulseSchedule,
    pub gate: Gate,
    pub labels: GateLabels,
    pub scenario: ValidatedScenario,
    pub system: LindbladSystem,
    pub warnings: Vec<Diagnostic>,
}

/// Builds the schedule and driven system of a `cap` or `cpi` protocol.
pub fn prepare_gate(v: &ValidatedScenario, protocol: &ProtocolSpec) -> Result<PreparedGate> {
    let (schedule, gate, labels) = match protocol {
        ProtocolSpec::Cap { omega, period, ordering, labels } => {
            (cap_schedule(*omega, *period, *ordering, labels)?, Gate::Cap, labels.clone())
        }
        ProtocolSpec::Cpi { omega1, omega2, shape, labels } => {
            let (s, a) = cpi_schedule(*omega1, *omega2, shape, labels)?;
            (s, Gate::Cpi(a), labels.clone())
        }
        ProtocolSpec::Raman { .. } => return Err(Error::invalid("Raman transfer is not a gate protocol")),
    };
    let scenario = apply_schedule(v, &schedule)?;
    let system = LindbladSystem::from_scenario(&scenario)?;
    let warnings = validity_warnings(v, protocol);
    Ok(PreparedGate { schedule, gate, labels, scenario, system, warnings })
}

/// Decay rate of the target's excited level, the `γ` of the fidelity
/// estimates.
pub fn protocol_gamma(v: &ValidatedScenario, labels: &GateLabels) -> f64 {
    v.spec().atom(&labels.target).map(|a| a.population_decay_out_of(&labels.excited)).unwrap_or(0.0)
}

/// Warns when the pulse area lies outside `[10γ, |g|²/(10γ)]`, where the
/// closed-form fidelity estimates stop being meaningful.
pub fn validity_warnings(v: &ValidatedScenario, protocol: &ProtocolSpec) -> Vec<Diagnostic> {
    let g2 = v.g().norm_sqr();
    let (what, value, labels) = match protocol {
        ProtocolSpec::Cap { omega, period, labels, .. } => ("Ω²T", omega * omega * period, labels),
        ProtocolSpec::Cpi { omega1, omega2, labels, .. } => {
            ("Ω̄", (omega1.norm_sqr() + omega2.norm_sqr()).sqrt(), labels)
        }
        ProtocolSpec::Raman { .. } => return Vec::new(),
    };
    let gamma = protocol_gamma(v, labels);
    let (lo, hi) = (10.0 * gamma, g2 / (10.0 * gamma));
    if value < lo || value > hi {
        vec![Diagnostic::warning(format!("{what} = {value} outside the validity window [{lo}, {hi}]"))]
    } else {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub final_state: DensityMatrix,
    pub target: PureState,
    /// `⟨Ψ_f|ρ_f|Ψ_f⟩`.
    pub fidelity: f64,
    /// `(ξ_cb, ξ_bc)` for two-atom Raman runs.
    pub xi: Option<(C64, C64)>,
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn state_fidelity(rho: &DensityMatrix, psi: &PureState) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}

/// Evolves `psi0` through a prepared gate and compares with its ideal image.
pub fn run_protocol(p: &PreparedGate, psi0: &PureState, opts: &EvolveOptions) -> Result<ProtocolResult> {
    let target = p.gate.apply(&p.scenario, psi0, &p.labels)?;
    let tr = evolve_at(&pure_density(psi0), &p.system, 0.0, &[p.schedule.duration], opts)?;
    let final_state = tr.final_state().clone();
    let fidelity = state_fidelity(&final_state, &target);
    Ok(ProtocolResult { final_state, target, fidelity, xi: None })
}

/// A labelled initial state of a fidelity evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledState {
    pub label: String,
    pub state: PureState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    /// Minimum over the initial set.
    pub fidelity: f64,
    pub argmin: usize,
    pub argmin_label: String,
    pub fidelities: Vec<f64>,
    pub labels: Vec<String>,
    /// Closed-form estimate for the same parameters.
    pub analytic: f64,
    pub warnings: Vec<Diagnostic>,
}

fn random_qubit(rng: &mut ChaCha8Rng) -> (C64, C64) {
    let mut z = [ZERO; 2];
    loop {
        for c in z.iter_mut() {
            *c = C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
        }
        let n = (z[0].norm_sqr() + z[1].norm_sqr()).sqrt();
        if n > 1e-3 {
            return (z[0] / n, z[1] / n);
        }
    }
}

/// Default initial set of a gate protocol.
///
/// For `cpi`: the four product basis states of `{zero, one} ⊗ {open, blocked}`
/// and [`DEFAULT_RANDOM_STATES`] random product superpositions drawn from
/// ChaCha8 seeded with [`DEFAULT_SEED`]. For `cap` the `one` level must start
/// empty, so the target stays in `zero` and only the control is sampled.
pub fn default_initial_set(v: &ValidatedScenario, gate: &Gate, labels: &GateLabels) -> Result<Vec<LabelledState>> {
    let gi = GateIndex::new(v, labels)?;
    let mut set = Vec::new();
    let targets: Vec<usize> = match gate {
        Gate::Cap => vec![gi.zero],
        Gate::Cpi(_) => vec![gi.zero, gi.one],
    };
    for &t in &targets {
        for &c in &[gi.open, gi.blocked] {
            let k = gi.joint(v, t, c);
            let mut psi = PureState::zeros(v.dim());
            psi[k] = ONE;
            set.push(LabelledState { label: v.basis_label(k), state: psi });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    for r in 0..DEFAULT_RANDOM_STATES {
        let (t0, t1) = match gate {
            Gate::Cap => (ONE, ZERO),
            Gate::Cpi(_) => random_qubit(&mut rng),
        };
        let (c0, c1) = random_qubit(&mut rng);
        let mut psi = PureState::zeros(v.dim());
        for (t, ta) in [(gi.zero, t0), (gi.one, t1)] {
            for (c, ca) in [(gi.open, c0), (gi.blocked, c1)] {
                psi[gi.joint(v, t, c)] += ta * ca;
            }
        }
        set.push(LabelledState { label: format!("random #{r}"), state: psi });
    }
    Ok(set)
}

/// Final states of all `initial` states, obtained by evolving a spanning set
/// of density matrices on the joint support of the inputs and expanding by
/// linearity.
pub fn evolve_pure_states(p: &PreparedGate, initial: &[PureState], opts: &EvolveOptions) -> Result<Vec<DensityMatrix>> {
    let n = p.system.dim();
    for psi in initial {
        if psi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: psi.len() });
        }
    }
    let support: Vec<usize> = (0..n).filter(|&k| initial.iter().any(|psi| psi[k] != ZERO)).collect();
    let m = support.len();
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let mut inputs: Vec<DensityMatrix> = Vec::with_capacity(m * m);
    for &i in &support {
        inputs.push(pure_density(&unit(n, i)));
    }
    for a in 0..m {
        for b in a + 1..m {
            let (i, j) = (support[a], support[b]);
            inputs.push(pure_density(&((unit(n, i) + unit(n, j)) * C64::new(h, 0.0))));
            inputs.push(pure_density(&((unit(n, i) + unit(n, j) * I) * C64::new(h, 0.0))));
        }
    }
    let finals: Vec<DensityMatrix> = evolve_many(&inputs, &p.system, 0.0, &[p.schedule.duration], opts)?
        .into_iter()
        .map(|mut s| s.pop().unwrap())
        .collect();

    // image of |j⟩⟨i| = E(X) − i E(Y) − (1 − i)/2 (E(|i⟩⟨i|) + E(|j⟩⟨j|))
    let mut image = vec![DensityMatrix::zeros(n, n); m * m];
    for a in 0..m {
        image[a * m + a] = finals[a].clone();
    }
    let mut next = m;
    let half = C64::new(0.5, -0.5);
    for a in 0..m {
        for b in a + 1..m {
            let (x, y) = (&finals[next], &finals[next + 1]);
            next += 2;
            let ab = x - y * I - (&finals[a] + &finals[b]) * half;
            image[a * m + b] = ab.adjoint();
            image[b * m + a] = ab;
        }
    }
    Ok(initial
        .iter()
        .map(|psi| {
            let mut rho = DensityMatrix::zeros(n, n);
            for a in 0..m {
                for b in 0..m {
                    let w = psi[support[a]] * psi[support[b]].conj();
                    if w != ZERO {
                        rho += &image[a * m + b] * w;
                    }
                }
            }
            rho
        })
        .collect())
}

fn unit(n: usize, k: usize) -> PureState {
    let mut psi = PureState::zeros(n);
    psi[k] = ONE;
    psi
}

/// Minimal fidelity `min ⟨Ψ_f|ρ_f|Ψ_f⟩` of a gate protocol over `initial`
/// (the default set when `None`). The minimum over a finite sample bounds the
/// true minimum from above.
pub fn min_fidelity(
    v: &ValidatedScenario,
    protocol: &ProtocolSpec,
    initial: Option<&[LabelledState]>,
    opts: &EvolveOptions,
) -> Result<FidelityResult> {
    let p = prepare_gate(v, protocol)?;
    let owned;
    let set = match initial {
        Some(s) => s,
        None => {
            owned = default_initial_set(v, &p.gate, &p.labels)?;
            &owned[..]
        }
    };
    if set.is_empty() {
        return Err(Error::invalid("fidelity needs at least one initial state"));
    }
    let states: Vec<PureState> = set.iter().map(|s| s.state.normalize()).collect();
    let finals = evolve_pure_states(&p, &states, opts)?;
    let mut fidelities = Vec::with_capacity(set.len());
    for (psi, rho) in states.iter().zip(&finals) {
        let target = p.gate.apply(&p.scenario, psi, &p.labels)?;
        fidelities.push(state_fidelity(rho, &target));
    }
    let argmin = (0..fidelities.len()).fold(0, |m, k| if fidelities[k] < fidelities[m] { k } else { m });
    Ok(FidelityResult {
        fidelity: fidelities[argmin],
        argmin,
        argmin_label: set[argmin].label.clone(),
        fidelities,
        labels: set.iter().map(|s| s.label.clone()).collect(),
        analytic: analytic_fidelity(v, protocol)?,
        warnings: p.warnings,
    })
}

/// Closed-form fidelity estimate matching a protocol spec.
pub fn analytic_fidelity(v: &ValidatedScenario, protocol: &ProtocolSpec) -> Result<f64> {
    let g = v.g().norm();
    match protocol {
        ProtocolSpec::Cap { omega, period, labels, .. } => {
            Ok(analytic_fidelity_cap(protocol_gamma(v, labels), *omega, *period, g))
        }
        ProtocolSpec::Cpi { omega1, omega2, labels, .. } => {
            let bar = (omega1.norm_sqr() + omega2.norm_sqr()).sqrt();
            Ok(analytic_fidelity_cpi(protocol_gamma(v, labels), bar, g))
        }
        ProtocolSpec::Raman { .. } => Err(Error::invalid("no fidelity estimate for Raman transfer")),
    }
}

/// `min[exp(−πγ/(2Ω²T)), exp(−πγΩ²T/(4|g|²))]`
pub fn analytic_fidelity_cap(gamma: f64, omega: f64, period: f64, g: f64) -> f64 {
    if gamma == 0.0 {
        return 1.0;
    }
    let area = omega * omega * period;
    let nonadiabatic = (-PI * gamma / (2.0 * area)).exp();
    let leak = (-PI * gamma * area / (4.0 * g * g)).exp();
    nonadiabatic.min(leak)
}

/// `min[exp(−πγ/(2Ω̄)), exp(−πγΩ̄/|g|²)]`
pub fn analytic_fidelity_cpi(gamma: f64, omega_bar: f64, g: f64) -> f64 {
    if gamma == 0.0 {
        return 1.0;
    }
    let nonadiabatic = (-PI * gamma / (2.0 * omega_bar)).exp();
    let leak = (-PI * gamma * omega_bar / (g * g)).exp();
    nonadiabatic.min(leak)
}

/// Pulse area `Ω²T = √2|g|` maximizing [`analytic_fidelity_cap`].
pub fn cap_optimal_area(g: f64) -> f64 {
    core::f64::consts::SQRT_2 * g.abs()
}

/// `Ω̄ = |g|/√2` maximizing [`analytic_fidelity_cpi`].
pub fn cpi_optimal_omega(g: f64) -> f64 {
    g.abs() * core::f64::consts::FRAC_1_SQRT_2
}

/// First maximum of the transferred coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferExtremum {
    pub time: f64,
    /// `|⟨σ_bc^B⟩(t)| / |⟨σ_bc^A⟩(0)|`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamanTransfer {
    /// Carries the observables `sigma_bc_A` and `sigma_bc_B`.
    pub trajectory: Trajectory,
    pub extremum: Option<TransferExtremum>,
    /// Final `(ξ_cb, ξ_bc)`.
    pub xi: (C64, C64),
    /// Population left in the optically excited levels at the end.
    pub excited_population: f64,
}

/// cw two-atom Raman transfer: the single drive on each atom gets amplitude
/// `omega1` (atom A) or `omega2` (atom B), the system evolves from the
/// scenario's initial state and the ground-state coherences
/// `⟨σ_bc⟩ = ⟨|b⟩⟨c|⟩` of both atoms are recorded. `b` is the lower level of
/// the coupled transition, `c` the lower level of the atom's drive.
pub fn raman_transfer_sim(
    v: &ValidatedScenario,
    omega1: C64,
    omega2: C64,
    t_span: (f64, f64),
    samples: usize,
    opts: &EvolveOptions,
) -> Result<RamanTransfer> {
    let cp = v.coupled().ok_or_else(|| Error::Scheme("Raman transfer needs a dipole-coupled pair".into()))?;
    let mut drive_of = [None, None];
    for (k, d) in v.spec().drives.iter().enumerate() {
        let a = v.atom_index(&d.atom)?;
        if drive_of[a].replace(k).is_some() {
            return Err(Error::Scheme(format!("Raman transfer needs one drive per atom, atom {} has more", d.atom)));
        }
    }
    let [Some(da), Some(db)] = drive_of else {
        return Err(Error::Scheme("Raman transfer needs one drive on each atom".into()));
    };
    let v = v.modified(|s| {
        s.drives[da].amplitude = omega1;
        s.drives[db].amplitude = omega2;
    })?;
    let init = v.spec().initial.as_ref().ok_or_else(|| Error::invalid("Raman transfer needs an initial state"))?;
    let psi0 = crate::dynamics::product_state(&v, init)?;
    let sys = LindbladSystem::from_scenario(&v)?;

    let mut c = [0usize; 2];
    for (a, &k) in [da, db].iter().enumerate() {
        c[a] = v.level_index(a, &v.spec().drives[k].lower)?;
    }
    let names = [v.atoms()[0].name.clone(), v.atoms()[1].name.clone()];
    let label = |a: usize, i: usize| v.atoms()[a].levels[i].label.clone();

    let times = uniform_times(t_span.0, t_span.1, samples);
    let mut tr = evolve_at(&pure_density(&psi0), &sys, t_span.0, &times, opts)?;
    for a in 0..2 {
        let op = sigma(&v, &names[a], &label(a, cp.lower[a]), &label(a, c[a]))?;
        tr.observe(&format!("sigma_bc_{}", names[a]), &op)?;
    }
    let sa = tr.observables[0].1.clone();
    let sb = tr.observables[1].1.clone();

    let reference = sa[0].norm();
    let mags: Vec<f64> = sb.iter().map(|z| z.norm()).collect();
    let extremum = if times.len() >= 3 && reference > 0.0 {
        find_extrema(&times, &mags)?
            .into_iter()
            .find(|e| e.kind == ExtremumKind::Maximum)
            .map(|e| TransferExtremum { time: e.position, ratio: e.value / reference })
    } else {
        None
    };

    let rho = tr.final_state();
    let cb = v.basis_index(c[0], cp.lower[1]);
    let bc = v.basis_index(cp.lower[0], c[1]);
    let p_cb = rho[(cb, cb)].re.max(0.0);
    let xi_cb = C64::new(p_cb.sqrt(), 0.0);
    let xi_bc = if p_cb > 0.0 { rho[(bc, cb)] / xi_cb } else { C64::new(rho[(bc, bc)].re.max(0.0).sqrt(), 0.0) };
    let (na, nb) = v.dims();
    let mut excited_population = 0.0;
    for i in 0..na {
        for j in 0..nb {
            if !v.atoms()[0].levels[i].metastable || !v.atoms()[1].levels[j].metastable {
                let k = v.basis_index(i, j);
                excited_population += rho[(k, k)].re;
            }
        }
    }
    Ok(RamanTransfer { trajectory: tr, extremum, xi: (xi_cb, xi_bc), excited_population })
}

/// Runs a validated scenario's `raman` protocol.
pub fn run_raman_protocol(v: &ValidatedScenario, opts: &EvolveOptions) -> Result<RamanTransfer> {
    match &v.spec().protocol {
        Some(ProtocolSpec::Raman { omega1, omega2, t_end, samples }) => {
            raman_transfer_sim(v, *omega1, *omega2, (0.0, *t_end), *samples, opts)
        }
        _ => Err(Error::invalid("scenario has no Raman transfer protocol")),
    }
}

/// Basis state of the gate scenario by target and control level labels.
pub fn gate_basis_state(v: &ValidatedScenario, labels: &GateLabels, target: &str, control: &str) -> Result<PureState> {
    let gi = GateIndex::new(v, labels)?;
    let t = v.level_index(gi.target, target)?;
    let c = v.level_index(1 - gi.target, control)?;
    let (i, j) = gi.split(v, gi.joint(v, t, c));
    Ok(basis_state(v, i, j))
}
