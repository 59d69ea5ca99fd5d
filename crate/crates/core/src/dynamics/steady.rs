use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{lindblad_rhs, LindbladSystem};
use crate::operators::Op;
use crate::{Error, Result, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Liouvillian superoperator acting on column-major `vec(ρ)`.
pub fn liouvillian(sys: &LindbladSystem) -> Result<DMatrix<C64>> {
    if !sys.is_static() {
        return Err(Error::invalid("the Liouvillian needs a time-independent system"));
    }
    let n = sys.dim();
    let id = Op::identity(n, n);
    let mut heff = Op::zeros(n, n);
    sys.heff_into(0.0, 0.0, &mut heff);
    let mut l = id.kronecker(&heff) * (-I) + heff.map(|z| z.conj()).kronecker(&id) * I;
    for ch in &sys.channels {
        l += ch.operator.map(|z| z.conj()).kronecker(&ch.operator);
    }
    Ok(l)
}

/// Unique stationary state from the kernel of the Liouvillian.
pub fn steady_state(sys: &LindbladSystem) -> Result<Op> {
    let n = sys.dim();
    let l = liouvillian(sys)?;
    let svd = l.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Singular("SVD failed".into()))?;
    let smax = svd.singular_values.max();
    let tol = 1e-9 * smax.max(1.0);
    let kernel: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] <= tol).collect();
    if kernel.len() != 1 {
        return Err(Error::DegenerateKernel { dim: kernel.len() });
    }
    let row = v_t.row(kernel[0]);
    let x: Vec<C64> = row.iter().map(|z| z.conj()).collect();
    let rho = Op::from_column_slice(n, n, &x);
    let tr = rho.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::Singular("kernel vector has zero trace".into()));
    }
    let rho = rho / tr;
    Ok((&rho + rho.adjoint()) * C64::new(0.5, 0.0))
}

/// First-order response `ρ₁` to a weak perturbation `h1` around the stationary
/// pure state `|r⟩⟨r|`, from `0 = L₀ρ₁ − i[h1, |r⟩⟨r|]`.
///
/// Only the coherences `|k⟩⟨r|` are driven at this order; the sector must be
/// closed under `L₀`, which holds when `|r⟩` is an undriven, undecaying
/// eigenstate of the unperturbed system.
pub fn linear_response(sys: &LindbladSystem, reference: usize, h1: &Op) -> Result<Op> {
    let n = sys.dim();
    if h1.shape() != (n, n) || reference >= n {
        return Err(Error::DimensionMismatch { expected: n, found: h1.nrows() });
    }
    let r = reference;
    let mut p0 = Op::zeros(n, n);
    p0[(r, r)] = C64::new(1.0, 0.0);
    let scale = 1.0 + sys.hamiltonian.static_part.camax();
    if lindblad_rhs(&p0, 0.0, sys)?.camax() > 1e-12 * scale {
        return Err(Error::Scheme(format!("reference state {r} is not stationary")));
    }

    let others: Vec<usize> = (0..n).filter(|&k| k != r).collect();
    let m = others.len();
    let mut mat = DMatrix::<C64>::zeros(m, m);
    for (col, &k) in others.iter().enumerate() {
        let mut e = Op::zeros(n, n);
        e[(k, r)] = C64::new(1.0, 0.0);
        let d = lindblad_rhs(&e, 0.0, sys)?;
        for i in 0..n {
            for j in 0..n {
                let inside = j == r && i != r;
                if !inside && d[(i, j)].norm() > 1e-12 * scale {
                    return Err(Error::Scheme("probe coherences do not form a closed sector".into()));
                }
            }
        }
        for (row, &j) in others.iter().enumerate() {
            mat[(row, col)] = d[(j, r)];
        }
    }
    let src: Vec<C64> = others.iter().map(|&k| I * h1[(k, r)]).collect();

    // restrict to the part of the sector reachable from the source
    let mut seen = vec![false; m];
    let mut queue: VecDeque<usize> = (0..m).filter(|&k| src[k] != C64::new(0.0, 0.0)).collect();
    for &k in &queue {
        seen[k] = true;
    }
    while let Some(k) = queue.pop_front() {
        for j in 0..m {
            if !seen[j] && (mat[(j, k)] != C64::new(0.0, 0.0) || mat[(k, j)] != C64::new(0.0, 0.0)) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    let idx: Vec<usize> = (0..m).filter(|&k| seen[k]).collect();
    let mut y = Op::zeros(n, n);
    if !idx.is_empty() {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| mat[(idx[a], idx[b])]);
        let rhs = DVector::from_fn(idx.len(), |a, _| src[idx[a]]);
        let sol = sub.lu().solve(&rhs).ok_or_else(|| Error::Singular("probe response at a pole".into()))?;
        if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Singular("probe response at a pole".into()));
        }
        for (a, &k) in idx.iter().enumerate() {
            y[(others[k], r)] = sol[a];
        }
    }
    Ok(&y + y.adjoint())
}
