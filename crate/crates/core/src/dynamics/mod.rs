//! Lindblad dynamics: right-hand side, time evolution, steady states and
//! first-order probe response.
//!
//! `dρ/dt = −i[H(t), ρ] + Σ_L (LρL† − ½{L†L, ρ})`

pub mod dopri;
mod steady;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrixView, DMatrixViewMut, DVector};

use crate::frame::solve_rotating_frame;
use crate::model::{InitialState, ValidatedScenario};
use crate::operators::{build_collapse_operators, build_hamiltonian, triplets, CollapseChannel, Hamiltonian, Op};
use crate::{Error, Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

pub use steady::{liouvillian, linear_response, steady_state};

/// Joint-space density matrix.
pub type DensityMatrix = Op;
/// Joint-space state vector.
pub type PureState = DVector<C64>;

pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn pure_density(psi: &PureState) -> DensityMatrix {
    psi * psi.adjoint()
}

/// `|i_A j_B⟩`.
pub fn basis_state(v: &ValidatedScenario, i: usize, j: usize) -> PureState {
    let mut psi = PureState::zeros(v.dim());
    psi[v.basis_index(i, j)] = C64::new(1.0, 0.0);
    psi
}

/// Product state from per-atom amplitudes, each atom normalized separately.
pub fn product_state(v: &ValidatedScenario, init: &InitialState) -> Result<PureState> {
    let mut parts: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
    for (k, atom) in v.atoms().iter().enumerate() {
        let st = init.get(&atom.name).ok_or_else(|| Error::UnknownAtom(atom.name.clone()))?;
        let mut amp = vec![C64::new(0.0, 0.0); atom.levels.len()];
        for (label, a) in &st.amplitudes {
            amp[v.level_index(k, label)?] += *a;
        }
        let norm = amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid(format!("initial state of atom {} is zero", atom.name)));
        }
        parts[k] = amp.into_iter().map(|a| a / norm).collect();
    }
    let nb = parts[1].len();
    Ok(PureState::from_fn(v.dim(), |r, _| parts[0][r / nb] * parts[1][r % nb]))
}

/// Hamiltonian plus collapse channels, with the pieces of the non-Hermitian
/// effective Hamiltonian precomputed.
#[derive(Debug, Clone)]
pub struct LindbladSystem {
    pub hamiltonian: Hamiltonian,
    pub channels: Vec<CollapseChannel>,
    jumps: Vec<Vec<(usize, usize, C64)>>,
    /// `−(i/2) Σ L†L`
    damping: Op,
}

impl LindbladSystem {
    pub fn new(hamiltonian: Hamiltonian, channels: Vec<CollapseChannel>) -> Self {
        let n = hamiltonian.dim();
        let mut damping = Op::zeros(n, n);
        for ch in &channels {
            damping += ch.operator.adjoint() * &ch.operator;
        }
        damping *= C64::new(0.0, -0.5);
        let jumps = channels.iter().map(|c| triplets(&c.operator)).collect();
        Self { hamiltonian, channels, jumps, damping }
    }

    /// Frame Hamiltonian and collapse channels of a validated scenario.
    pub fn from_scenario(v: &ValidatedScenario) -> Result<Self> {
        let frame = solve_rotating_frame(v)?;
        Ok(Self::new(build_hamiltonian(v, &frame)?, build_collapse_operators(v)))
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn is_static(&self) -> bool {
        self.hamiltonian.is_static()
    }

    fn heff_into(&self, t: f64, inside: f64, out: &mut Op) {
        out.copy_from(&self.hamiltonian.static_part);
        *out += &self.damping;
        for d in &self.hamiltonian.drives {
            let e = d.envelope.value_in(t, inside);
            if e != 0.0 {
                out.zip_apply(&d.operator, |x, y| *x += y * e);
            }
        }
    }

    fn add_jumps(&self, rho: &DMatrixView<C64>, out: &mut DMatrixViewMut<C64>) {
        for ops in &self.jumps {
            for &(i, j, a) in ops {
                for &(k, l, b) in ops {
                    out[(i, k)] += a * b.conj() * rho[(j, l)];
                }
            }
        }
    }

    /// Batched right-hand side for a stack of Hermitian matrices stored
    /// column-major side by side. Uses `ρ Heff† = (Heff ρ)†`.
    fn rhs_hermitian_batch(&self, heff: &Op, y: &[C64], dy: &mut [C64]) {
        let n = self.dim();
        let m = y.len() / n;
        let ym = DMatrixView::from_slice(y, n, m);
        let mut dm = DMatrixViewMut::from_slice(dy, n, m);
        dm.gemm(-I, heff, &ym, C64::new(0.0, 0.0));
        for b in 0..m / n {
            let off = b * n;
            for c in 0..n {
                for r in 0..=c {
                    let s = dm[(r, off + c)] + dm[(c, off + r)].conj();
                    dm[(r, off + c)] = s;
                    dm[(c, off + r)] = s.conj();
                }
            }
            let rho = ym.columns(off, n);
            let mut d = dm.columns_mut(off, n);
            self.add_jumps(&rho, &mut d);
        }
    }
}

/// `dρ/dt` at time `t`. Valid for any square `rho`, Hermitian or not.
pub fn lindblad_rhs(rho: &Op, t: f64, sys: &LindbladSystem) -> Result<Op> {
    let n = sys.dim();
    if rho.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: rho.nrows() });
    }
    let mut heff = Op::zeros(n, n);
    sys.heff_into(t, t, &mut heff);
    let mut out = (&heff * rho - rho * heff.adjoint()) * (-I);
    sys.add_jumps(&rho.as_view(), &mut out.as_view_mut());
    Ok(out)
}

/// `tr(op · ρ)`.
pub fn expectation(rho: &Op, op: &Op) -> Result<C64> {
    if rho.shape() != op.shape() || !rho.is_square() {
        return Err(Error::DimensionMismatch { expected: op.nrows(), found: rho.nrows() });
    }
    let n = rho.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            s += op[(i, k)] * rho[(k, i)];
        }
    }
    Ok(s)
}

/// Deviations of a matrix from being a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physicality {
    /// `|tr ρ − 1|`
    pub trace_error: f64,
    /// `max |ρ − ρ†|`
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Physicality {
    pub fn of(rho: &Op) -> Self {
        let trace_error = (rho.trace() - C64::new(1.0, 0.0)).norm();
        let hermiticity_error = (rho - rho.adjoint()).camax();
        let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
        let min_eigenvalue = herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        Self { trace_error, hermiticity_error, min_eigenvalue }
    }

    pub fn is_ok(&self) -> bool {
        self.trace_error < TRACE_TOL && self.hermiticity_error < HERMITICITY_TOL && self.min_eigenvalue > -POSITIVITY_TOL
    }

    /// Worst of two reports, entry by entry.
    pub fn worst(self, o: Self) -> Self {
        Self {
            trace_error: self.trace_error.max(o.trace_error),
            hermiticity_error: self.hermiticity_error.max(o.hermiticity_error),
            min_eigenvalue: self.min_eigenvalue.min(o.min_eigenvalue),
        }
    }

    pub fn ideal() -> Self {
        Self { trace_error: 0.0, hermiticity_error: 0.0, min_eigenvalue: f64::INFINITY }
    }
}

pub fn check_physical(rho: &Op, t: f64) -> Result<Physicality> {
    let p = Physicality::of(rho);
    if !p.is_ok() {
        return Err(Error::InvariantViolation {
            t,
            what: format!(
                "trace error {:e}, hermiticity error {:e}, min eigenvalue {:e}",
                p.trace_error, p.hermiticity_error, p.min_eigenvalue
            ),
        });
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub integrator: dopri::Options,
    /// Check the density-matrix invariants at every sample.
    pub check: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { integrator: dopri::Options::default(), check: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Named expectation-value series aligned with `times`.
    pub observables: Vec<(String, Vec<C64>)>,
    /// Worst invariant deviations over the stored states.
    pub physicality: Physicality,
}

impl Trajectory {
    /// Adds `tr(op ρ(t))` as a named series.
    pub fn observe(&mut self, name: &str, op: &Op) -> Result<&[C64]> {
        let series = self.states.iter().map(|r| expectation(r, op)).collect::<Result<Vec<_>>>()?;
        self.observables.push((name.into(), series));
        Ok(&self.observables.last().unwrap().1)
    }

    pub fn observable(&self, name: &str) -> Option<&[C64]> {
        self.observables.iter().find(|(n, _)| n == name).map(|(_, s)| s.as_slice())
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has at least one sample")
    }
}

/// `samples` equally spaced times on `[t0, t1]` (both ends included).
pub fn uniform_times(t0: f64, t1: f64, samples: usize) -> Vec<f64> {
    if samples < 2 {
        return vec![t1];
    }
    (0..samples).map(|k| t0 + (t1 - t0) * k as f64 / (samples - 1) as f64).collect()
}

/// Evolves `rho0` from `t_span.0` and samples `samples` equally spaced times
/// on `t_span`.
pub fn evolve(rho0: &DensityMatrix, sys: &LindbladSystem, t_span: (f64, f64), samples: usize) -> Result<Trajectory> {
    evolve_at(rho0, sys, t_span.0, &uniform_times(t_span.0, t_span.1, samples), &EvolveOptions::default())
}

/// Evolves `rho0` from `t0` and samples at the sorted times `times >= t0`.
pub fn evolve_at(rho0: &DensityMatrix, sys: &LindbladSystem, t0: f64, times: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    let states = evolve_many(core::slice::from_ref(rho0), sys, t0, times, opts)?.pop().unwrap();
    let mut phys = Physicality::ideal();
    if opts.check {
        for s in &states {
            phys = phys.worst(Physicality::of(s));
        }
    }
    Ok(Trajectory { times: times.to_vec(), states, observables: Vec::new(), physicality: phys })
}

/// Evolves several initial density matrices together under one system.
/// Returns, per initial state, the states at `times`.
pub fn evolve_many(
    rho0s: &[DensityMatrix],
    sys: &LindbladSystem,
    t0: f64,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<Vec<DensityMatrix>>> {
    let n = sys.dim();
    let nb = rho0s.len();
    for r in rho0s {
        if r.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: r.nrows() });
        }
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(Error::invalid("sample times must be sorted and not precede the start time"));
    }
    let mut out: Vec<Vec<DensityMatrix>> = (0..nb).map(|_| Vec::with_capacity(times.len())).collect();
    let mut y: Vec<C64> = Vec::with_capacity(nb * n * n);
    for r in rho0s {
        if opts.check {
            check_physical(r, t0)?;
        }
        y.extend_from_slice(r.as_slice());
    }

    let unpack = |t: f64, y: &[C64], out: &mut Vec<Vec<DensityMatrix>>| -> Result<()> {
        for (b, dst) in out.iter_mut().enumerate() {
            let m = Op::from_column_slice(n, n, &y[b * n * n..(b + 1) * n * n]);
            if opts.check {
                check_physical(&m, t)?;
            }
            dst.push(m);
        }
        Ok(())
    };

    let mut k = 0;
    while k < times.len() && times[k] == t0 {
        unpack(t0, &y, &mut out)?;
        k += 1;
    }
    let Some(&t_end) = times.last() else { return Ok(out) };

    let mut cuts: Vec<f64> =
        sys.hamiltonian.breakpoints().into_iter().filter(|&b| b > t0 && b < t_end).collect();
    cuts.push(t_end);
    let mut heff = Op::zeros(n, n);
    let mut t = t0;
    for &seg_end in &cuts {
        if seg_end <= t {
            continue;
        }
        let mid = 0.5 * (t + seg_end);
        let start = k;
        while k < times.len() && times[k] <= seg_end {
            k += 1;
        }
        let outs = &times[start..k];
        let mut err = None;
        let (y_end, _) = dopri::integrate(
            |tt, yy, dy| {
                sys.heff_into(tt, mid, &mut heff);
                sys.rhs_hermitian_batch(&heff, yy, dy);
            },
            t,
            &y,
            seg_end,
            outs,
            &opts.integrator,
            |_, tt, yy| {
                unpack(tt, yy, &mut out).inspect_err(|e| err = Some(e.clone()))
            },
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        y = y_end;
        t = seg_end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_scenario, AtomSpec, AtomState, CouplingSpec, ScenarioSpec};
    use crate::operators::{sigma, CollapseChannel};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn two_level(decay: f64, omega: f64) -> ValidatedScenario {
        let a = AtomSpec::new("A").level("a", 10.0, false).level("b", 0.0, true).transition("a", "b", decay);
        let b = AtomSpec::new("B").level("g", 0.0, true).level("e", 1.0, false).transition("e", "g", 0.0);
        let mut s = ScenarioSpec::new(a, b, CouplingSpec::direct(0.0));
        if omega != 0.0 {
            s = s.resonant_drive("A", "a", "b", C64::new(omega, 0.0));
        }
        validate_scenario(&s).unwrap()
    }

    fn fig1a(g: f64, decay: f64) -> ScenarioSpec {
        let a = AtomSpec::new("A")
            .level("a", 100.0, false)
            .level("b", 5.0, true)
            .level("c", 0.0, true)
            .coupled_transition("a", "b", decay)
            .transition("a", "c", decay);
        let b = AtomSpec::new("B")
            .level("a", 95.0, false)
            .level("b", 0.0, true)
            .level("c", 3.0, true)
            .coupled_transition("a", "b", decay)
            .transition("a", "c", decay);
        ScenarioSpec::new(a, b, CouplingSpec::direct(g))
    }

    fn random_hermitian(n: usize, seed: &[f64]) -> Op {
        let m = Op::from_fn(n, n, |i, j| C64::new(seed[(3 * i + j) % seed.len()], seed[(i + 5 * j + 1) % seed.len()]));
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn maximally_mixed_is_stationary_without_channels() {
        let v = validate_scenario(&fig1a(4.0, 0.0).resonant_drive("B", "a", "c", C64::new(1.3, 0.2))).unwrap();
        let sys = LindbladSystem::from_scenario(&v).unwrap();
        let rho = Op::identity(9, 9) * C64::new(1.0 / 9.0, 0.0);
        assert!(lindblad_rhs(&rho, 0.0, &sys).unwrap().camax() < 1e-15);
    }

    #[test]
    fn two_level_decay_rate() {
        let v = two_level(0.8, 0.0);
        let sys = LindbladSystem::from_scenario(&v).unwrap();
        let rho = pure_density(&basis_state(&v, 0, 0));
        let d = lindblad_rhs(&rho, 0.0, &sys).unwrap();
        assert!((d[(0, 0)].re + 0.8).abs() < 1e-15);
    }

    #[test]
    fn rhs_dimension_mismatch() {
        let sys = LindbladSystem::from_scenario(&two_level(1.0, 0.0)).unwrap();
        assert!(matches!(lindblad_rhs(&Op::zeros(3, 3), 0.0, &sys), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn free_evolution_is_constant() {
        let v = two_level(0.0, 0.0);
        let sys = LindbladSystem::from_scenario(&v).unwrap();
        let psi = (basis_state(&v, 0, 0) + basis_state(&v, 1, 1)) * C64::new(0.5f64.sqrt(), 0.0);
        let rho0 = pure_density(&psi);
        let tr = evolve(&rho0, &sys, (0.0, 10.0), 11).unwrap();
        for s in &tr.states {
            assert!((s - &rho0).camax() < 1e-10);
        }
    }

    #[test]
    fn rabi_oscillation_period() {
        // −Ω(|a⟩⟨b| + h.c.) oscillates populations as cos²(Ω t)
        let omega = 1.0;
        let v = two_level(0.0, omega);
        let sys = LindbladSystem::from_scenario(&v).unwrap();
        let rho0 = pure_density(&basis_state(&v, 1, 0));
        let tr = evolve(&rho0, &sys, (0.0, 2.0 * PI), 101).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let pb = s[(v.basis_index(1, 0), v.basis_index(1, 0))].re;
            assert!((pb - (omega * t).cos().powi(2)).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn expectations() {
        let s = fig1a(4.0, 0.0).initial_state(
            AtomState::superposition(&[("b", C64::new(1.0, 0.0)), ("c", C64::new(1.0, 0.0))]),
            AtomState::basis("b"),
        );
        let v = validate_scenario(&s).unwrap();
        let rho = pure_density(&product_state(&v, v.spec().initial.as_ref().unwrap()).unwrap());
        assert!((expectation(&rho, &Op::identity(9, 9)).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let sbc = sigma(&v, "A", "b", "c").unwrap();
        assert!((expectation(&rho, &sbc).unwrap() - C64::new(0.5, 0.0)).norm() < 1e-15);
        let bb = pure_density(&basis_state(&v, 1, 1));
        assert_eq!(expectation(&bb, &crate::operators::projector(&v, 1, 1)).unwrap(), C64::new(1.0, 0.0));
        assert!(expectation(&Op::zeros(3, 3), &sbc).is_err());
    }

    #[test]
    fn non_physical_start_is_rejected() {
        let sys = LindbladSystem::from_scenario(&two_level(1.0, 0.0)).unwrap();
        let mut rho = Op::zeros(4, 4);
        rho[(0, 0)] = C64::new(1.5, 0.0);
        rho[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(matches!(evolve(&rho, &sys, (0.0, 1.0), 3), Err(Error::InvariantViolation { .. })));
    }

    #[test]
    fn step_underflow_carries_time() {
        let hb = Hamiltonian { static_part: Op::zeros(1, 1), drives: Vec::new() };
        let ch = CollapseChannel {
            operator: Op::from_element(1, 1, C64::new(1e200, 0.0)),
            kind: crate::operators::ChannelKind::Dephasing,
            rate: 0.0,
            label: "huge".into(),
        };
        let sys = LindbladSystem::new(hb, vec![ch]);
        let mut heff = Op::zeros(1, 1);
        sys.heff_into(0.0, 0.0, &mut heff);
        let r = dopri::integrate(
            |_, y, dy| dy[0] = heff[(0, 0)] * y[0] * C64::new(0.0, -1.0) * 1e300,
            0.0,
            &[C64::new(1.0, 0.0)],
            1.0,
            &[],
            &dopri::Options::default(),
            |_, _, _| Ok(()),
        );
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. }) | Err(Error::TooManySteps { .. })));
    }

    #[test]
    fn uncoupled_dynamics_factorizes() {
        // g = 0: the joint state stays the product of independently evolved atoms
        let s = fig1a(0.0, 0.5)
            .resonant_drive("A", "a", "c", C64::new(0.7, 0.0))
            .drive("B", "a", "c", 93.0, C64::new(1.1, 0.3))
            .initial_state(
                AtomState::superposition(&[("b", C64::new(0.6, 0.0)), ("c", C64::new(0.0, 0.8))]),
                AtomState::superposition(&[("b", C64::new(1.0, 0.0)), ("c", C64::new(1.0, 0.0))]),
            );
        let v = validate_scenario(&s).unwrap();
        let sys = LindbladSystem::from_scenario(&v).unwrap();
        let rho0 = pure_density(&product_state(&v, v.spec().initial.as_ref().unwrap()).unwrap());
        let tr = evolve(&rho0, &sys, (0.0, 6.0), 13).unwrap();
        for s in &tr.states {
            let (ra, rb) = partial_traces(s, 3, 3);
            let prod = ra.kronecker(&rb);
            assert!((s - prod).camax() < 1e-8);
        }
    }

    pub(crate) fn partial_traces(rho: &Op, na: usize, nb: usize) -> (Op, Op) {
        let mut ra = Op::zeros(na, na);
        let mut rb = Op::zeros(nb, nb);
        for i in 0..na {
            for k in 0..na {
                for j in 0..nb {
                    ra[(i, k)] += rho[(i * nb + j, k * nb + j)];
                }
            }
        }
        for j in 0..nb {
            for l in 0..nb {
                for i in 0..na {
                    rb[(j, l)] += rho[(i * nb + j, i * nb + l)];
                }
            }
        }
        (ra, rb)
    }

    proptest! {
        #[test]
        fn rhs_is_traceless_and_hermitian(seed in proptest::collection::vec(-1.0..1.0f64, 16), g in 0.0..20.0f64, o in 0.0..3.0f64) {
            let v = validate_scenario(&fig1a(g, 0.7).resonant_drive("B", "a", "c", C64::new(o, 0.0)).dephasing_free()).unwrap();
            let sys = LindbladSystem::from_scenario(&v).unwrap();
            let rho = random_hermitian(9, &seed);
            let d = lindblad_rhs(&rho, 0.0, &sys).unwrap();
            prop_assert!(d.trace().norm() < 1e-13);
            prop_assert!((d.clone() - d.adjoint()).camax() < 1e-13);
            // the batched kernel agrees with the general form
            let mut heff = Op::zeros(9, 9);
            sys.heff_into(0.0, 0.0, &mut heff);
            let mut dy = vec![C64::new(0.0, 0.0); 81];
            sys.rhs_hermitian_batch(&heff, rho.as_slice(), &mut dy);
            prop_assert!((Op::from_column_slice(9, 9, &dy) - d).camax() < 1e-13);
        }
    }

    trait NoDephasing {
        fn dephasing_free(self) -> Self;
    }

    impl NoDephasing for ScenarioSpec {
        fn dephasing_free(mut self) -> Self {
            for a in &mut self.atoms {
                a.dephasing.clear();
            }
            self
        }
    }
}
