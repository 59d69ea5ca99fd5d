//! Composite-space operators: the rotating-frame Hamiltonian and the Lindblad
//! collapse channels.
//!
//! The joint basis is `|i_A j_B⟩` with atom A as the slow index, so the
//! composite index is `i * n_B + j`. Drive terms read `−Ω(t)|u⟩⟨l| + h.c.` and
//! the exchange term reads `−(g σ^A_ab σ^B_ba + h.c.)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::frame::FrameAssignment;
use crate::model::{DriveSpec, Envelope, ValidatedScenario};
use crate::{Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

/// Dense operator on the joint Hilbert space.
pub type Op = DMatrix<C64>;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Product labels `a_A b_B` in basis order.
pub fn basis_labels(v: &ValidatedScenario) -> Vec<String> {
    (0..v.dim()).map(|k| v.basis_label(k)).collect()
}

pub fn kron(a: &Op, b: &Op) -> Op {
    a.kronecker(b)
}

/// Embeds a single-atom operator of atom `atom` (0 or 1) into the joint space.
pub fn embed(v: &ValidatedScenario, atom: usize, single: &Op) -> Op {
    let (na, nb) = v.dims();
    if atom == 0 {
        kron(single, &Op::identity(nb, nb))
    } else {
        kron(&Op::identity(na, na), single)
    }
}

fn single_transition(n: usize, upper: usize, lower: usize) -> Op {
    let mut m = Op::zeros(n, n);
    m[(upper, lower)] = c(1.0);
    m
}

/// `|upper⟩⟨lower|` on `atom`, identity on the other atom.
pub fn sigma(v: &ValidatedScenario, atom: &str, upper: &str, lower: &str) -> Result<Op> {
    let k = v.atom_index(atom)?;
    Ok(sigma_idx(v, k, v.level_index(k, upper)?, v.level_index(k, lower)?))
}

pub(crate) fn sigma_idx(v: &ValidatedScenario, atom: usize, upper: usize, lower: usize) -> Op {
    let n = [v.dims().0, v.dims().1][atom];
    embed(v, atom, &single_transition(n, upper, lower))
}

/// Projector onto the product basis state `|i_A j_B⟩`.
pub fn projector(v: &ValidatedScenario, i: usize, j: usize) -> Op {
    let mut m = Op::zeros(v.dim(), v.dim());
    let k = v.basis_index(i, j);
    m[(k, k)] = c(1.0);
    m
}

/// `−(Ω |upper⟩⟨lower| + Ω* |lower⟩⟨upper|)` for a drive with unit envelope.
pub fn drive_operator(v: &ValidatedScenario, d: &DriveSpec) -> Result<Op> {
    let k = v.atom_index(&d.atom)?;
    let (u, l) = (v.level_index(k, &d.upper)?, v.level_index(k, &d.lower)?);
    let s = sigma_idx(v, k, u, l);
    Ok(-(s.clone() * d.amplitude + s.adjoint() * d.amplitude.conj()))
}

/// `−(g σ^A_ab σ^B_ba + h.c.)`, or zero without a coupled pair.
pub fn coupling_operator(v: &ValidatedScenario) -> Op {
    let n = v.dim();
    match v.coupled() {
        None => Op::zeros(n, n),
        Some(cp) => {
            let x = sigma_idx(v, 0, cp.upper[0], cp.lower[0]) * sigma_idx(v, 1, cp.lower[1], cp.upper[1]);
            -(x.clone() * v.g() + x.adjoint() * v.g().conj())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveTerm {
    /// Drive operator at unit envelope.
    pub operator: Op,
    pub envelope: Envelope,
}

/// `H(t) = static_part + Σ envelope_k(t) · operator_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub static_part: Op,
    pub drives: Vec<DriveTerm>,
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.static_part.nrows()
    }

    pub fn is_static(&self) -> bool {
        self.drives.is_empty()
    }

    pub fn at(&self, t: f64) -> Op {
        self.at_in(t, t)
    }

    /// See [`Envelope::value_in`].
    pub fn at_in(&self, t: f64, inside: f64) -> Op {
        let mut h = self.static_part.clone();
        for d in &self.drives {
            let e = d.envelope.value_in(t, inside);
            if e != 0.0 {
                h.zip_apply(&d.operator, |x, y| *x += y * e);
            }
        }
        h
    }

    /// Sorted switching times of all envelopes.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.drives.iter().flat_map(|d| d.envelope.breakpoints()).collect();
        b.sort_by(|x, y| x.total_cmp(y));
        b.dedup();
        b
    }
}

/// Frame Hamiltonian: diagonal detunings, drives and dipole exchange.
pub fn build_hamiltonian(v: &ValidatedScenario, frame: &FrameAssignment) -> Result<Hamiltonian> {
    let (na, nb) = v.dims();
    let mut h = coupling_operator(v);
    for i in 0..na {
        for j in 0..nb {
            let k = v.basis_index(i, j);
            h[(k, k)] += c(frame.composite_detuning(i, j));
        }
    }
    let mut drives = Vec::new();
    for d in &v.spec().drives {
        let op = drive_operator(v, d)?;
        if d.envelope.is_constant() {
            h += op;
        } else {
            drives.push(DriveTerm { operator: op, envelope: d.envelope.clone() });
        }
    }
    Ok(Hamiltonian { static_part: h, drives })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Population,
    Dephasing,
    Collective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseChannel {
    /// Jump operator with the rate folded in.
    pub operator: Op,
    pub kind: ChannelKind,
    pub rate: f64,
    pub label: String,
}

/// One `√Γ σ_lower,upper` per decaying transition, one `√(2γ) |k⟩⟨k|` per
/// dephasing entry, and optionally the two collective channels replacing the
/// coupled pair's individual decays.
pub fn build_collapse_operators(v: &ValidatedScenario) -> Vec<CollapseChannel> {
    let collective = v.spec().collective_decay.enabled;
    let cp = v.coupled();
    let mut out = Vec::new();
    let mut coupled_rates = [0.0; 2];

    for (k, atom) in v.atoms().iter().enumerate() {
        for t in &atom.transitions {
            let (u, l) = (atom.level_index(&t.upper).unwrap(), atom.level_index(&t.lower).unwrap());
            let is_coupled = cp.is_some_and(|cp| cp.upper[k] == u && cp.lower[k] == l);
            if collective && is_coupled {
                coupled_rates[k] = t.pop_decay_rate;
                continue;
            }
            if t.pop_decay_rate > 0.0 {
                out.push(CollapseChannel {
                    operator: sigma_idx(v, k, l, u) * c(t.pop_decay_rate.sqrt()),
                    kind: ChannelKind::Population,
                    rate: t.pop_decay_rate,
                    label: format!("{}:{}->{}", atom.name, t.upper, t.lower),
                });
            }
        }
        for d in &atom.dephasing {
            if d.rate > 0.0 {
                let i = atom.level_index(&d.level).unwrap();
                out.push(CollapseChannel {
                    operator: sigma_idx(v, k, i, i) * c((2.0 * d.rate).sqrt()),
                    kind: ChannelKind::Dephasing,
                    rate: d.rate,
                    label: format!("{}:{} dephasing", atom.name, d.level),
                });
            }
        }
    }

    if let (true, Some(cp)) = (collective, cp) {
        let beta = v.spec().collective_decay.beta;
        let [ga, gb] = coupled_rates;
        let cross = beta * (ga * gb).sqrt();
        let la = sigma_idx(v, 0, cp.lower[0], cp.upper[0]);
        let lb = sigma_idx(v, 1, cp.lower[1], cp.upper[1]);
        for (m, (lambda, vec)) in sym2_eigen(ga, cross, gb).into_iter().enumerate() {
            let rate = lambda.max(0.0);
            out.push(CollapseChannel {
                operator: (&la * c(vec[0]) + &lb * c(vec[1])) * c(rate.sqrt()),
                kind: ChannelKind::Collective,
                rate,
                label: format!("collective #{m}"),
            });
        }
    }
    out
}

/// Eigenpairs of the real symmetric matrix `[[p, q], [q, r]]`. For `q = 0`
/// the unit vectors are returned in order, so uncorrelated decay reproduces
/// the individual channels.
fn sym2_eigen(p: f64, q: f64, r: f64) -> [(f64, [f64; 2]); 2] {
    if q == 0.0 {
        return [(p, [1.0, 0.0]), (r, [0.0, 1.0])];
    }
    let m = 0.5 * (p + r);
    let d = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let vec = |l: f64| {
        let (x, y) = (q, l - p);
        let n = (x * x + y * y).sqrt();
        [x / n, y / n]
    };
    [(m + d, vec(m + d)), (m - d, vec(m - d))]
}

/// Nonzero entries `(row, col, value)` in row-major order.
pub fn triplets(op: &Op) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for i in 0..op.nrows() {
        for j in 0..op.ncols() {
            let z = op[(i, j)];
            if z != c(0.0) {
                out.push((i, j, z));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::solve_rotating_frame;
    use crate::model::{validate_scenario, AtomSpec, CouplingSpec, ScenarioSpec};
    use proptest::prelude::*;

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

    fn nnz(m: &Op) -> usize {
        triplets(m).len()
    }

    #[test]
    fn sigma_structure() {
        let v = validate_scenario(&fig1a(4.0, 0.0)).unwrap();
        let s = sigma(&v, "A", "a", "b").unwrap();
        assert_eq!(s.shape(), (9, 9));
        assert_eq!(nnz(&s), 3);
        let x = &s * sigma(&v, "B", "b", "a").unwrap();
        let t = triplets(&x);
        assert_eq!(t.len(), 1);
        let (r, col, z) = t[0];
        assert_eq!(v.basis_label(r), "a_A b_B");
        assert_eq!(v.basis_label(col), "b_A a_B");
        assert_eq!(z, c(1.0));
        let p = sigma(&v, "A", "b", "b").unwrap();
        assert_eq!(&p * &p, p);
        assert!(sigma(&v, "A", "z", "b").is_err());
    }

    #[test]
    fn undriven_hamiltonian_only_exchanges() {
        let v = validate_scenario(&fig1a(4.0, 0.0)).unwrap();
        let fr = solve_rotating_frame(&v).unwrap();
        let h = build_hamiltonian(&v, &fr).unwrap().at(0.0);
        let ab = v.basis_index(0, 1);
        let ba = v.basis_index(1, 0);
        for (i, j, z) in triplets(&h) {
            if i != j {
                assert!((i, j) == (ab, ba) || (i, j) == (ba, ab));
                assert_eq!(z, c(-4.0));
            }
        }
    }

    #[test]
    fn resonant_drives_give_zero_diagonal() {
        let s = fig1a(4.0, 0.0)
            .resonant_drive("A", "a", "c", c(0.3))
            .resonant_drive("B", "a", "c", C64::new(0.5, 0.2));
        let v = validate_scenario(&s).unwrap();
        let h = build_hamiltonian(&v, &solve_rotating_frame(&v).unwrap()).unwrap().at(0.0);
        for k in 0..9 {
            assert!(h[(k, k)].norm() < 1e-12);
        }
    }

    #[test]
    fn single_decay_channel() {
        let a = AtomSpec::new("A").level("a", 1.0, false).level("b", 0.0, true).transition("a", "b", 0.7);
        let b = AtomSpec::new("B").level("g", 0.0, true).level("e", 1.0, false).transition("e", "g", 0.0);
        let v = validate_scenario(&ScenarioSpec::new(a, b, CouplingSpec::direct(0.0))).unwrap();
        let ch = build_collapse_operators(&v);
        assert_eq!(ch.len(), 1);
        assert_eq!(ch[0].kind, ChannelKind::Population);
        let expected = sigma(&v, "A", "b", "a").unwrap() * c(0.7f64.sqrt());
        assert_eq!(ch[0].operator, expected);
    }

    #[test]
    fn collective_channels() {
        let v = validate_scenario(&fig1a(4.0, 1.0).collective(1.0)).unwrap();
        let ch: Vec<_> = build_collapse_operators(&v).into_iter().filter(|c| c.kind == ChannelKind::Collective).collect();
        assert_eq!(ch.len(), 2);
        assert!((ch[0].rate - 2.0).abs() < 1e-14);
        assert!(ch[1].rate.abs() < 1e-14);

        let off = build_collapse_operators(&validate_scenario(&fig1a(4.0, 1.0)).unwrap());
        let zero_beta = build_collapse_operators(&validate_scenario(&fig1a(4.0, 1.0).collective(0.0)).unwrap());
        let ops = |chs: &[CollapseChannel]| {
            let mut v: Vec<Vec<(usize, usize, C64)>> = chs.iter().map(|c| triplets(&c.operator)).collect();
            v.sort_by(|a, b| a[0].0.cmp(&b[0].0).then(a[0].1.cmp(&b[0].1)));
            v
        };
        assert_eq!(ops(&off), ops(&zero_beta));
    }

    #[test]
    fn decay_sum_matches_total_rate() {
        let s = fig1a(4.0, 0.0);
        let mut s = s;
        s.atoms[0].transitions[0].pop_decay_rate = 0.3;
        s.atoms[0].transitions[1].pop_decay_rate = 0.45;
        let v = validate_scenario(&s).unwrap();
        let mut sum = Op::zeros(9, 9);
        for ch in build_collapse_operators(&v) {
            sum += ch.operator.adjoint() * &ch.operator;
        }
        let k = v.basis_index(0, 2);
        assert!((sum[(k, k)].re - 0.75).abs() < 1e-14);
    }

    #[test]
    fn uncoupled_hamiltonian_factorizes() {
        let s = fig1a(0.0, 0.5).drive("A", "a", "c", 99.0, c(0.8)).drive("B", "a", "c", 93.5, c(0.4));
        let v = validate_scenario(&s).unwrap();
        let fr = solve_rotating_frame(&v).unwrap();
        let h = build_hamiltonian(&v, &fr).unwrap().at(0.0);
        let single = |k: usize, omega: f64| {
            let mut m = Op::from_diagonal(&nalgebra::DVector::from_iterator(3, fr.detunings[k].iter().map(|&d| c(d))));
            m[(0, 2)] -= c(omega);
            m[(2, 0)] -= c(omega);
            m
        };
        let expected = kron(&single(0, 0.8), &Op::identity(3, 3)) + kron(&Op::identity(3, 3), &single(1, 0.4));
        assert!((h - expected).camax() < 1e-14);
    }

    proptest! {
        #[test]
        fn hamiltonian_is_hermitian(
            g in -10.0..10.0f64, gi in -3.0..3.0f64,
            o1 in -5.0..5.0f64, o2 in -5.0..5.0f64, p in -3.0..3.0f64,
            d1 in -10.0..10.0f64, d2 in -10.0..10.0f64, t in 0.0..20.0f64,
        ) {
            let mut s = fig1a(0.0, 0.2)
                .drive("A", "a", "c", 100.0 + d1, C64::new(o1, p))
                .drive("B", "a", "c", 92.0 + d2, C64::new(o2, -p));
            s.coupling.g_value = Some(C64::new(g, gi));
            s.drives[1].envelope = Envelope::Cosine { period: 3.0 };
            let v = validate_scenario(&s).unwrap();
            let h = build_hamiltonian(&v, &solve_rotating_frame(&v).unwrap()).unwrap().at(t);
            prop_assert!((h.clone() - h.adjoint()).camax() < 1e-14);
        }
    }
}
