//! Weak-probe susceptibility and dressed states.
//!
//! The probe couples `lower -> upper` of one atom with Rabi frequency `Ω₁`.
//! The reported response is `χ = ⟨σ_ul⟩ / (−Ω₁*)`, normalized so that a free
//! atom gives `χ = i / Γ_ul` with `Γ_ul = γ_ul + i(ν₁ − ω_ul)`: `Im χ` is the
//! absorption line shape.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{linear_response, LindbladSystem};
use crate::frame::{solve_rotating_frame_with, FrameLink};
use crate::model::{ProbeSpec, ValidatedScenario};
use crate::operators::{build_collapse_operators, build_hamiltonian, drive_operator, sigma_idx, Op};
use crate::{Error, Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

pub const DEFAULT_GRID: (f64, f64, usize) = (-8.0, 8.0, 201);
/// Largest tolerated negative absorption.
pub const ABSORPTION_TOL: f64 = 1e-8;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Inputs of the closed-form susceptibility of the two-atom Raman scheme:
/// probe on `c -> a` of atom A, drive `Ω₂` on `c -> a` of atom B, dipole
/// exchange on `a <-> b` of both atoms, population initially in `|c_A b_B⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub gamma_ac_a: f64,
    pub gamma_bc_a: f64,
    pub gamma_ab_b: f64,
    pub gamma_cb_b: f64,
    pub omega_ac_a: f64,
    pub omega_bc_a: f64,
    pub omega_ab_b: f64,
    pub omega_cb_b: f64,
    pub nu2: f64,
    pub omega2: C64,
    pub g: C64,
}

/// Level indices of the recognized two-atom Raman scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RamanScheme {
    /// Probed atom and its `a`, `b`, `c` levels.
    pub probed: usize,
    pub a: [usize; 2],
    pub b: [usize; 2],
    pub c: [usize; 2],
    /// Index of the drive on the other atom.
    pub drive: usize,
}

impl RamanScheme {
    pub fn other(&self) -> usize {
        1 - self.probed
    }

    /// Composite index of `|c_probed b_other⟩`.
    pub fn reference(&self, v: &ValidatedScenario) -> usize {
        let (p, q) = (self.probed, self.other());
        let mut lv = [0; 2];
        lv[p] = self.c[p];
        lv[q] = self.b[q];
        v.basis_index(lv[0], lv[1])
    }
}

fn probe_of(v: &ValidatedScenario) -> Result<&ProbeSpec> {
    v.spec().probe.as_ref().ok_or_else(|| Error::Scheme("scenario has no probe".into()))
}

/// Recognizes the 3+3-level Raman scheme the closed form applies to.
pub fn identify_scheme(v: &ValidatedScenario) -> Result<RamanScheme> {
    let bad = |why: &str| Error::Scheme(format!("closed form needs the two-atom Raman scheme: {why}"));
    let probe = probe_of(v)?;
    let cp = v.coupled().ok_or_else(|| bad("no coupled dipole pair"))?;
    if v.dims() != (3, 3) {
        return Err(bad("both atoms must have three levels"));
    }
    let p = v.atom_index(&probe.atom)?;
    let q = 1 - p;
    let pu = v.level_index(p, &probe.upper)?;
    let pl = v.level_index(p, &probe.lower)?;
    if pu != cp.upper[p] || pl == cp.lower[p] {
        return Err(bad("probe must share the upper level of the coupled transition"));
    }
    let spec = v.spec();
    if spec.drives.len() != 1 {
        return Err(bad("exactly one drive expected"));
    }
    let d = &spec.drives[0];
    if v.atom_index(&d.atom)? != q || !d.envelope.is_constant() {
        return Err(bad("the cw drive must act on the unprobed atom"));
    }
    let du = v.level_index(q, &d.upper)?;
    let dl = v.level_index(q, &d.lower)?;
    if du != cp.upper[q] || dl == cp.lower[q] {
        return Err(bad("drive must share the upper level of the coupled transition"));
    }
    if spec.collective_decay.enabled {
        return Err(bad("collective decay is not part of the closed form"));
    }
    let mut s = RamanScheme { probed: p, a: [0; 2], b: [0; 2], c: [0; 2], drive: 0 };
    s.a[p] = pu;
    s.b[p] = cp.lower[p];
    s.c[p] = pl;
    s.a[q] = du;
    s.b[q] = cp.lower[q];
    s.c[q] = dl;
    Ok(s)
}

impl SpectrumParams {
    pub fn from_scenario(v: &ValidatedScenario) -> Result<Self> {
        let s = identify_scheme(v)?;
        let (p, q) = (s.probed, s.other());
        let (ap, aq) = (&v.atoms()[p], &v.atoms()[q]);
        let lab = |k: usize, i: usize| v.atoms()[k].levels[i].label.as_str();
        let e = |k: usize, i: usize| v.atoms()[k].levels[i].energy;
        let d = &v.spec().drives[s.drive];
        Ok(Self {
            gamma_ac_a: ap.coherence_decay(lab(p, s.a[p]), lab(p, s.c[p])),
            gamma_bc_a: ap.coherence_decay(lab(p, s.b[p]), lab(p, s.c[p])),
            gamma_ab_b: aq.coherence_decay(lab(q, s.a[q]), lab(q, s.b[q])),
            gamma_cb_b: aq.coherence_decay(lab(q, s.c[q]), lab(q, s.b[q])),
            omega_ac_a: e(p, s.a[p]) - e(p, s.c[p]),
            omega_bc_a: e(p, s.b[p]) - e(p, s.c[p]),
            omega_ab_b: e(q, s.a[q]) - e(q, s.b[q]),
            omega_cb_b: e(q, s.c[q]) - e(q, s.b[q]),
            nu2: d.carrier,
            omega2: d.amplitude,
            g: v.g(),
        })
    }

    pub fn gamma_ac(&self, nu1: f64) -> C64 {
        C64::new(self.gamma_ac_a, nu1 - self.omega_ac_a)
    }

    pub fn gamma_bcab(&self, nu1: f64) -> C64 {
        C64::new(self.gamma_bc_a + self.gamma_ab_b, nu1 - self.omega_bc_a - self.omega_ab_b)
    }

    pub fn gamma_bccb(&self, nu1: f64) -> C64 {
        C64::new(self.gamma_bc_a + self.gamma_cb_b, nu1 - self.nu2 - self.omega_bc_a - self.omega_cb_b)
    }

    /// Probe frequency at which `Im Γ_bccb` vanishes.
    pub fn two_photon_resonance(&self) -> f64 {
        self.nu2 + self.omega_bc_a + self.omega_cb_b
    }
}

/// Closed-form susceptibility
/// `χ = i(Γ_bcab Γ_bccb + |Ω₂|²) / (Γ_ac (Γ_bcab Γ_bccb + |Ω₂|²) + |g|² Γ_bccb)`.
pub fn susceptibility_analytic(p: &SpectrumParams, nu1: f64) -> Result<C64> {
    let g_ac = p.gamma_ac(nu1);
    if p.g.norm_sqr() == 0.0 {
        // the common factor cancels; avoids 0/0 at an undriven Raman resonance
        if g_ac == C64::new(0.0, 0.0) {
            return Err(Error::Pole { detuning: nu1 - p.omega_ac_a });
        }
        return Ok(I / g_ac);
    }
    let g_bcab = p.gamma_bcab(nu1);
    let g_bccb = p.gamma_bccb(nu1);
    let num = g_bcab * g_bccb + p.omega2.norm_sqr();
    let den = g_ac * num + g_bccb * p.g.norm_sqr();
    if den == C64::new(0.0, 0.0) {
        return Err(Error::Pole { detuning: nu1 - p.omega_ac_a });
    }
    Ok(I * num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Probe carrier frequencies.
    pub nu1: Vec<f64>,
    /// `ν₁ − ω_ul` of the probed transition.
    pub detuning: Vec<f64>,
    pub chi: Vec<C64>,
    pub method: Method,
}

impl SpectrumResult {
    pub fn absorption(&self) -> Vec<f64> {
        self.chi.iter().map(|z| z.im).collect()
    }

    /// Most negative `Im χ` if it falls below `−ABSORPTION_TOL`.
    pub fn gain_violation(&self) -> Option<f64> {
        let m = self.chi.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
        (m < -ABSORPTION_TOL).then_some(m)
    }
}

/// Probe transition frequency `ω_ul`.
pub fn probe_transition_frequency(v: &ValidatedScenario) -> Result<f64> {
    let p = probe_of(v)?;
    v.spec()
        .transition_frequency(&p.atom, &p.upper, &p.lower)
        .ok_or_else(|| Error::UnknownAtom(p.atom.clone()))
}

pub fn detuning_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::model::grid_values(lo, hi, n, crate::model::GridScale::Linear)
}

pub fn spectrum_analytic(v: &ValidatedScenario, detunings: &[f64]) -> Result<SpectrumResult> {
    let p = SpectrumParams::from_scenario(v)?;
    let nu1: Vec<f64> = detunings.iter().map(|d| p.omega_ac_a + d).collect();
    let chi = nu1.iter().map(|&n| susceptibility_analytic(&p, n)).collect::<Result<Vec<_>>>()?;
    Ok(SpectrumResult { nu1, detuning: detunings.to_vec(), chi, method: Method::Analytic })
}

/// Everything about the numeric probe response that does not depend on the
/// probe frequency.
#[derive(Debug, Clone)]
pub struct ProbeProblem {
    scenario: ValidatedScenario,
    atom: usize,
    upper: usize,
    lower: usize,
    amplitude: C64,
    reference: usize,
    omega_ul: f64,
}

impl ProbeProblem {
    /// The unperturbed state is the scenario's initial product state, which
    /// must be a single basis state.
    pub fn new(v: &ValidatedScenario) -> Result<Self> {
        let probe = probe_of(v)?;
        let atom = v.atom_index(&probe.atom)?;
        let upper = v.level_index(atom, &probe.upper)?;
        let lower = v.level_index(atom, &probe.lower)?;
        let reference = reference_state(v)?;
        Ok(Self {
            scenario: v.clone(),
            atom,
            upper,
            lower,
            amplitude: probe.amplitude,
            reference,
            omega_ul: probe_transition_frequency(v)?,
        })
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    /// `χ` at probe carrier `nu1` with the given probe amplitude.
    pub fn response_with(&self, nu1: f64, amplitude: C64) -> Result<C64> {
        let v = &self.scenario;
        let link = FrameLink { atom: self.atom, upper: self.upper, lower: self.lower, carrier: nu1, label: "probe".into() };
        let frame = solve_rotating_frame_with(v, &[link])?;
        let h0 = build_hamiltonian(v, &frame)?;
        if !h0.is_static() {
            return Err(Error::Scheme("probe spectra need cw drives".into()));
        }
        let probe = v.spec().probe.as_ref().unwrap();
        let d = crate::model::DriveSpec {
            atom: probe.atom.clone(),
            upper: probe.upper.clone(),
            lower: probe.lower.clone(),
            carrier: nu1,
            amplitude,
            envelope: Default::default(),
        };
        let h1 = drive_operator(v, &d)?;
        let sys = LindbladSystem::new(h0, build_collapse_operators(v));
        let rho1 = linear_response(&sys, self.reference, &h1).map_err(|e| match e {
            Error::Singular(_) => Error::Pole { detuning: nu1 - self.omega_ul },
            other => other,
        })?;
        let pol = crate::dynamics::expectation(&rho1, &sigma_idx(v, self.atom, self.upper, self.lower))?;
        Ok(pol / (-amplitude.conj()))
    }

    pub fn response(&self, nu1: f64) -> Result<C64> {
        self.response_with(nu1, self.amplitude)
    }

    /// Relative change of `χ` when the probe amplitude is halved.
    pub fn linearity_deviation(&self, nu1: f64) -> Result<f64> {
        let full = self.response(nu1)?;
        let half = self.response_with(nu1, self.amplitude * 0.5)?;
        Ok((full - half).norm() / full.norm().max(f64::MIN_POSITIVE))
    }

    pub fn omega_ul(&self) -> f64 {
        self.omega_ul
    }
}

/// Composite index of the scenario's initial state, required to be a product
/// of basis states.
pub fn reference_state(v: &ValidatedScenario) -> Result<usize> {
    let init = v
        .spec()
        .initial
        .as_ref()
        .ok_or_else(|| Error::Scheme("probe spectra need an initial basis state".into()))?;
    let mut lv = [0usize; 2];
    for (k, atom) in v.atoms().iter().enumerate() {
        let st = init.get(&atom.name).ok_or_else(|| Error::UnknownAtom(atom.name.clone()))?;
        let occupied: Vec<&String> =
            st.amplitudes.iter().filter(|(_, a)| a.norm() > 0.0).map(|(l, _)| l).collect();
        if occupied.len() != 1 {
            return Err(Error::Scheme(format!("initial state of atom {} must be a basis state", atom.name)));
        }
        lv[k] = v.level_index(k, occupied[0])?;
    }
    Ok(v.basis_index(lv[0], lv[1]))
}

/// Relative deviation above which the probe is considered too strong.
pub const LINEARITY_TOL: f64 = 1e-4;

/// Numeric susceptibility on a grid of probe detunings `ν₁ − ω_ul`, with a
/// half-amplitude linearity check at the grid midpoint.
pub fn probe_spectrum_numeric(v: &ValidatedScenario, detunings: &[f64]) -> Result<SpectrumResult> {
    let pp = ProbeProblem::new(v)?;
    let nu1: Vec<f64> = detunings.iter().map(|d| pp.omega_ul + d).collect();
    let chi = nu1.iter().map(|&n| pp.response(n)).collect::<Result<Vec<_>>>()?;
    if let Some(&mid) = nu1.get(nu1.len() / 2) {
        let dev = pp.linearity_deviation(mid)?;
        if dev > LINEARITY_TOL {
            return Err(Error::Nonlinear { deviation: dev });
        }
    }
    Ok(SpectrumResult { nu1, detuning: detunings.to_vec(), chi, method: Method::Numeric })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub position: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Strict interior local extrema of `y(x)`, refined by the parabola through
/// each extremum and its two neighbours.
pub fn find_extrema(x: &[f64], y: &[f64]) -> Result<Vec<Extremum>> {
    if x.len() < 3 || x.len() != y.len() {
        return Err(Error::invalid("extremum search needs at least 3 aligned samples"));
    }
    let eps = 1e-12 * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = Vec::new();
    for k in 1..x.len() - 1 {
        let (l, c, r) = (y[k - 1], y[k], y[k + 1]);
        let kind = if c - l > eps && c - r > eps {
            ExtremumKind::Maximum
        } else if l - c > eps && r - c > eps {
            ExtremumKind::Minimum
        } else {
            continue;
        };
        let (position, value) = parabola_vertex([x[k - 1], x[k], x[k + 1]], [l, c, r]);
        out.push(Extremum { position, value, kind });
    }
    Ok(out)
}

fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d01 = (y[1] - y[0]) / (x[1] - x[0]);
    let d12 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d12 - d01) / (x[2] - x[0]);
    if a == 0.0 {
        return (x[1], y[1]);
    }
    // p(t) = y0 + d01 (t − x0) + a (t − x0)(t − x1)
    let xv = (0.5 * (x[0] + x[1]) - d01 / (2.0 * a)).clamp(x[0], x[2]);
    (xv, y[0] + d01 * (xv - x[0]) + a * (xv - x[0]) * (xv - x[1]))
}

/// Locates the narrow two-photon feature as the point where the coupled
/// response touches the free-atom response `χ_free`. Interior local minima of
/// `|χ − χ_free| / |χ_free|` on the grid are refined by golden-section search
/// within one grid step, and the deepest is returned.
pub fn locate_touching_point<F, G>(x: &[f64], chi: F, chi_free: G) -> Result<f64>
where
    F: Fn(f64) -> Result<C64>,
    G: Fn(f64) -> Result<C64>,
{
    if x.len() < 3 {
        return Err(Error::invalid("touching-point search needs at least 3 grid points"));
    }
    let dist = |t: f64| -> Result<f64> {
        let free = chi_free(t)?;
        Ok((chi(t)? - free).norm() / free.norm())
    };
    let d = x.iter().map(|&t| dist(t)).collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, f64)> = None;
    for k in 1..x.len() - 1 {
        if !(d[k] <= d[k - 1] && d[k] <= d[k + 1]) {
            continue;
        }
        let (pos, val) = golden_min(&dist, x[k - 1], x[k + 1], (x[k], d[k]))?;
        if best.is_none_or(|b| val < b.1) {
            best = Some((pos, val));
        }
    }
    best.map(|b| b.0).ok_or_else(|| Error::invalid("no interior touching point on the grid"))
}

fn golden_min<F: Fn(f64) -> Result<f64>>(f: &F, mut lo: f64, mut hi: f64, start: (f64, f64)) -> Result<(f64, f64)> {
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d)?;
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm)?;
    Ok(if fm <= start.1 { (xm, fm) } else { start })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedSpectrum {
    /// Resonance positions as probe detunings, ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` holds the amplitudes of eigenvalue `k` over `basis`.
    pub eigenvectors: Vec<Vec<C64>>,
    pub basis: Vec<String>,
    pub basis_indices: Vec<usize>,
}

/// States reachable from the probe's upper state through drive and exchange
/// couplings, excluding the unperturbed state.
pub fn single_excitation_manifold(v: &ValidatedScenario) -> Result<Vec<usize>> {
    let probe = probe_of(v)?;
    if v.coupled().is_none() {
        return Err(Error::Scheme("dressed states need a coupled dipole pair".into()));
    }
    let reference = reference_state(v)?;
    let p = v.atom_index(&probe.atom)?;
    let pu = v.level_index(p, &probe.upper)?;
    let nb = v.dims().1;
    let (ra, rb) = (reference / nb, reference % nb);
    let start = if p == 0 { v.basis_index(pu, rb) } else { v.basis_index(ra, pu) };

    let n = v.dim();
    let mut pattern = DMatrix::<bool>::from_element(n, n, false);
    let mut mark = |op: &Op| {
        for i in 0..n {
            for j in 0..n {
                if op[(i, j)] != C64::new(0.0, 0.0) {
                    pattern[(i, j)] = true;
                    pattern[(j, i)] = true;
                }
            }
        }
    };
    for d in &v.spec().drives {
        let k = v.atom_index(&d.atom)?;
        mark(&sigma_idx(v, k, v.level_index(k, &d.upper)?, v.level_index(k, &d.lower)?));
    }
    let cp = v.coupled().unwrap();
    mark(&(sigma_idx(v, 0, cp.upper[0], cp.lower[0]) * sigma_idx(v, 1, cp.lower[1], cp.upper[1])));

    let mut seen = vec![false; n];
    seen[reference] = true;
    seen[start] = true;
    let mut order = vec![start];
    let mut head = 0;
    while head < order.len() {
        let k = order[head];
        head += 1;
        for j in 0..n {
            if pattern[(k, j)] && !seen[j] {
                seen[j] = true;
                order.push(j);
            }
        }
    }
    Ok(order)
}

/// Eigenanalysis of the frame Hamiltonian on the single-excitation manifold.
/// The frame includes a resonant virtual probe, so eigenvalues measured from
/// the unperturbed state's energy are the probe detunings of the resonances.
pub fn dressed_states(v: &ValidatedScenario) -> Result<DressedSpectrum> {
    let manifold = single_excitation_manifold(v)?;
    let probe = probe_of(v)?;
    let p = v.atom_index(&probe.atom)?;
    let link = FrameLink {
        atom: p,
        upper: v.level_index(p, &probe.upper)?,
        lower: v.level_index(p, &probe.lower)?,
        carrier: probe_transition_frequency(v)?,
        label: "probe".into(),
    };
    let frame = solve_rotating_frame_with(v, &[link])?;
    let h = build_hamiltonian(v, &frame)?;
    if !h.is_static() {
        return Err(Error::Scheme("dressed states need cw drives".into()));
    }
    let h = h.static_part;
    let r = reference_state(v)?;
    let m = manifold.len();
    let sub = DMatrix::from_fn(m, m, |i, j| {
        let z = h[(manifold[i], manifold[j])];
        if i == j {
            z - h[(r, r)]
        } else {
            z
        }
    });
    let eig = sub.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| {
            let col = eig.eigenvectors.column(k);
            // fix the phase: largest component real and positive
            let big = col.iter().copied().fold(C64::new(0.0, 0.0), |a, z| if z.norm() > a.norm() + 1e-12 { z } else { a });
            let ph = if big.norm() > 0.0 { big.conj() / big.norm() } else { C64::new(1.0, 0.0) };
            col.iter().map(|z| z * ph).collect()
        })
        .collect();
    Ok(DressedSpectrum {
        eigenvalues,
        eigenvectors,
        basis: manifold.iter().map(|&k| v.basis_label(k)).collect(),
        basis_indices: manifold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_scenario, AtomSpec, AtomState, CouplingSpec, ScenarioSpec};
    use proptest::prelude::*;

    /// Two-atom Raman scheme with every coherence decay realized by pure
    /// dephasing of the excited levels.
    pub(crate) fn scheme(g: f64, omega2: f64, drive_detuning: f64, dephase_b: f64) -> ScenarioSpec {
        let a = AtomSpec::new("A")
            .level("a", 100.0, false)
            .level("b", 5.0, true)
            .level("c", 0.0, true)
            .coupled_transition("a", "b", 0.0)
            .transition("a", "c", 0.0)
            .dephasing("a", 1.0)
            .dephasing("b", dephase_b);
        let b = AtomSpec::new("B")
            .level("a", 95.0, false)
            .level("b", 0.0, true)
            .level("c", 3.0, true)
            .coupled_transition("a", "b", 0.0)
            .transition("a", "c", 0.0)
            .dephasing("a", 1.0);
        ScenarioSpec::new(a, b, CouplingSpec::direct(g))
            .drive("B", "a", "c", 92.0 + drive_detuning, C64::new(omega2, 0.0))
            .probe("A", "a", "c")
            .initial_state(AtomState::basis("c"), AtomState::basis("b"))
    }

    fn grid() -> Vec<f64> {
        detuning_grid(DEFAULT_GRID.0, DEFAULT_GRID.1, DEFAULT_GRID.2)
    }

    #[test]
    fn free_atom_is_lorentzian() {
        let v = validate_scenario(&scheme(0.0, 0.0, 0.0, 0.0)).unwrap();
        let p = SpectrumParams::from_scenario(&v).unwrap();
        for d in [-3.0, -0.5, 0.0, 1.7] {
            let chi = susceptibility_analytic(&p, 100.0 + d).unwrap();
            let expected = I / C64::new(1.0, d);
            assert!((chi - expected).norm() < 1e-15);
        }
        let num = probe_spectrum_numeric(&v, &grid()).unwrap();
        let ana = spectrum_analytic(&v, &grid()).unwrap();
        for (a, b) in num.chi.iter().zip(&ana.chi) {
            assert!((a - b).norm() / b.norm() < 1e-10);
        }
        let ext = find_extrema(&ana.detuning, &ana.absorption()).unwrap();
        assert_eq!(ext.len(), 1);
        assert_eq!(ext[0].kind, ExtremumKind::Maximum);
        assert!(ext[0].position.abs() < 1e-9);
    }

    #[test]
    fn solid_curve_peaks() {
        let v = validate_scenario(&scheme(4.0, 1.0, 0.0, 0.0)).unwrap();
        let s = spectrum_analytic(&v, &grid()).unwrap();
        let ext = find_extrema(&s.detuning, &s.absorption()).unwrap();
        let maxima: Vec<f64> = ext.iter().filter(|e| e.kind == ExtremumKind::Maximum).map(|e| e.position).collect();
        assert_eq!(maxima.len(), 3, "{ext:?}");
        let r = 17f64.sqrt();
        assert!((maxima[0] + r).abs() < 0.08 && maxima[1].abs() < 0.08 && (maxima[2] - r).abs() < 0.08, "{maxima:?}");
        assert!(s.gain_violation().is_none());
    }

    #[test]
    fn narrow_line_follows_two_photon_resonance() {
        for shift in [0.0, 4.0, -2.5] {
            let v = validate_scenario(&scheme(4.0, 1.0, shift, 0.0)).unwrap();
            let p = SpectrumParams::from_scenario(&v).unwrap();
            let free = SpectrumParams { g: C64::new(0.0, 0.0), ..p };
            let x = grid();
            let found = locate_touching_point(
                &x,
                |d| susceptibility_analytic(&p, p.omega_ac_a + d),
                |d| susceptibility_analytic(&free, free.omega_ac_a + d),
            )
            .unwrap();
            let expected = p.two_photon_resonance() - p.omega_ac_a;
            assert!((expected - shift).abs() < 1e-12);
            assert!((found - expected).abs() < 1e-6, "{found} vs {expected}");
            // on resonance the coupled response equals i/γ_ac
            let chi = susceptibility_analytic(&p, p.two_photon_resonance()).unwrap();
            let chi_free = susceptibility_analytic(&free, p.two_photon_resonance()).unwrap();
            assert!((chi - chi_free).norm() < 1e-14);
        }
    }

    #[test]
    fn pole_is_reported() {
        let v = validate_scenario(&scheme(0.0, 0.0, 0.0, 0.0)).unwrap();
        let mut p = SpectrumParams::from_scenario(&v).unwrap();
        p.gamma_ac_a = 0.0;
        assert!(matches!(susceptibility_analytic(&p, p.omega_ac_a), Err(Error::Pole { .. })));
    }

    #[test]
    fn numeric_matches_analytic_with_ground_dephasing() {
        let v = validate_scenario(&scheme(4.0, 1.0, 4.0, 0.05)).unwrap();
        let x = detuning_grid(-8.0, 8.0, 41);
        let num = probe_spectrum_numeric(&v, &x).unwrap();
        let ana = spectrum_analytic(&v, &x).unwrap();
        for (a, b) in num.chi.iter().zip(&ana.chi) {
            assert!((a - b).norm() / b.norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn linearity_deviation_is_small() {
        let v = validate_scenario(&scheme(4.0, 1.0, 0.0, 0.0)).unwrap();
        let pp = ProbeProblem::new(&v).unwrap();
        assert!(pp.linearity_deviation(100.3).unwrap() < LINEARITY_TOL);
    }

    #[test]
    fn dressed_energies() {
        let v = validate_scenario(&scheme(4.0, 0.0, 0.0, 0.0)).unwrap();
        let d = dressed_states(&v).unwrap();
        assert_eq!(d.basis, vec!["a_A b_B", "b_A a_B", "b_A c_B"]);
        let ev = &d.eigenvalues;
        assert!((ev[0] + 4.0).abs() < 1e-12 && ev[1].abs() < 1e-12 && (ev[2] - 4.0).abs() < 1e-12);
        let s = 0.5f64.sqrt();
        for (k, sign) in [(0usize, 1.0), (2, -1.0)] {
            let vec = &d.eigenvectors[k];
            let ov = (vec[0] * s + vec[1] * s * sign).norm();
            assert!((ov - 1.0).abs() < 1e-12);
        }

        let v = validate_scenario(&scheme(4.0, 1.0, 0.0, 0.0)).unwrap();
        let d = dressed_states(&v).unwrap();
        let r = 17f64.sqrt();
        assert!((d.eigenvalues[0] + r).abs() < 1e-12 && d.eigenvalues[1].abs() < 1e-12 && (d.eigenvalues[2] - r).abs() < 1e-12);
        // zero-energy state ∝ −Ω₂|a_A b_B⟩ + g|b_A c_B⟩
        let z = &d.eigenvectors[1];
        let expected = [-1.0 / r, 0.0, 4.0 / r];
        let ov: C64 = z.iter().zip(expected).map(|(a, b)| a.conj() * b).sum();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_coupling_dressed_states() {
        let v = validate_scenario(&scheme(100.0, 1.0, 0.0, 0.0)).unwrap();
        let d = dressed_states(&v).unwrap();
        let s = 0.5f64.sqrt();
        for (k, sign) in [(0usize, 1.0), (2, -1.0)] {
            let vec = &d.eigenvectors[k];
            let ov = (vec[0] * s + vec[1] * s * sign).norm_sqr();
            assert!(ov > 1.0 - 1e-3, "{ov}");
        }
    }

    #[test]
    fn extrema_edge_cases() {
        let x = detuning_grid(-1.0, 1.0, 11);
        assert!(find_extrema(&x, &[0.0; 11]).unwrap().is_empty());
        assert!(find_extrema(&x[..2], &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn dressed_eigenvalues_resonant(g in 0.1..30.0f64, o in 0.0..10.0f64) {
            let v = validate_scenario(&scheme(g, o, 0.0, 0.0)).unwrap();
            let d = dressed_states(&v).unwrap();
            let r = (g * g + o * o).sqrt();
            prop_assert!((d.eigenvalues[0] + r).abs() < 1e-12 * (1.0 + r));
            prop_assert!(d.eigenvalues[1].abs() < 1e-12 * (1.0 + r));
            prop_assert!((d.eigenvalues[2] - r).abs() < 1e-12 * (1.0 + r));
        }

        #[test]
        fn absorption_is_nonnegative(g in 0.0..20.0f64, o in 0.0..5.0f64, shift in -6.0..6.0f64, gbc in 0.0..0.5f64, d in -10.0..10.0f64) {
            let v = validate_scenario(&scheme(g, o, shift, gbc)).unwrap();
            let p = SpectrumParams::from_scenario(&v).unwrap();
            prop_assert!(susceptibility_analytic(&p, p.omega_ac_a + d).unwrap().im >= -1e-12);
        }
    }
}
