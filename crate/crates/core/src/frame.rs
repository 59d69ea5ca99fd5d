//! Rotating frame.
//!
//! Every level `k` of every atom gets a frame frequency `f_k`. Each drive on
//! `upper -> lower` with carrier `ν` imposes `f_upper − f_lower = ν`, and the
//! dipole coupling imposes `f_aA − f_bA − f_aB + f_bB = 0`. Among all
//! solutions the one closest to the bare energies is taken, so levels touched
//! by no constraint keep zero detuning.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::model::ValidatedScenario;
use crate::{Error, Result};

/// One frame constraint `f_upper − f_lower = carrier` within one atom.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLink {
    pub atom: usize,
    pub upper: usize,
    pub lower: usize,
    pub carrier: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAssignment {
    /// Frame frequency per level, `[atom A, atom B]`.
    pub frequencies: [Vec<f64>; 2],
    /// `E_k − f_k` per level; the diagonal of the frame Hamiltonian.
    pub detunings: [Vec<f64>; 2],
}

impl FrameAssignment {
    /// Diagonal entry of the composite frame Hamiltonian for `|i_A j_B⟩`.
    pub fn composite_detuning(&self, i: usize, j: usize) -> f64 {
        self.detunings[0][i] + self.detunings[1][j]
    }
}

/// Frame constraints from the scenario's drives.
pub fn drive_links(v: &ValidatedScenario) -> Result<Vec<FrameLink>> {
    v.spec()
        .drives
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let atom = v.atom_index(&d.atom)?;
            Ok(FrameLink {
                atom,
                upper: v.level_index(atom, &d.upper)?,
                lower: v.level_index(atom, &d.lower)?,
                carrier: d.carrier,
                label: format!("drive #{k} {}:{}->{} (ν = {})", d.atom, d.lower, d.upper, d.carrier),
            })
        })
        .collect()
}

pub fn solve_rotating_frame(v: &ValidatedScenario) -> Result<FrameAssignment> {
    solve_rotating_frame_with(v, &[])
}

/// Solves the frame for the scenario's drives plus `extra` constraints
/// (used for the probe field).
pub fn solve_rotating_frame_with(v: &ValidatedScenario, extra: &[FrameLink]) -> Result<FrameAssignment> {
    let (na, nb) = v.dims();
    let n = na + nb;
    let mut links = drive_links(v)?;
    links.extend_from_slice(extra);

    let mut rows: Vec<(Vec<(usize, f64)>, f64, String)> = links
        .iter()
        .map(|l| {
            let off = if l.atom == 0 { 0 } else { na };
            (vec![(off + l.upper, 1.0), (off + l.lower, -1.0)], l.carrier, l.label.clone())
        })
        .collect();
    if let Some(cp) = v.coupled() {
        if v.g().norm() != 0.0 {
            rows.push((
                vec![(cp.upper[0], 1.0), (cp.lower[0], -1.0), (na + cp.upper[1], -1.0), (na + cp.lower[1], 1.0)],
                0.0,
                "dipole coupling".into(),
            ));
        }
    }

    let energies: Vec<f64> =
        v.atoms().iter().flat_map(|a| a.levels.iter().map(|l| l.energy)).collect();
    let e = DVector::from_vec(energies);
    let mut f = e.clone();

    if !rows.is_empty() {
        let m = rows.len();
        let mut c = DMatrix::<f64>::zeros(m, n);
        let mut d = DVector::<f64>::zeros(m);
        for (r, (entries, rhs, _)) in rows.iter().enumerate() {
            for &(col, val) in entries {
                c[(r, col)] += val;
            }
            d[r] = *rhs;
        }
        let pinv = c.clone().svd(true, true).pseudo_inverse(1e-9).map_err(|e| Error::Singular(e.into()))?;
        f += &pinv * (&d - &c * &e);

        let scale = 1.0 + d.amax().max(e.amax());
        let residual = &c * &f - &d;
        let tol = 1e-12 * scale;
        if residual.amax() > tol {
            let offending: Vec<&str> = rows
                .iter()
                .zip(residual.iter())
                .filter(|(_, r)| r.abs() > tol)
                .map(|(row, _)| row.2.as_str())
                .collect();
            return Err(Error::FrameIncompatible { cycle: offending.join(" / ") });
        }
    }

    let fa: Vec<f64> = f.as_slice()[..na].to_vec();
    let fb: Vec<f64> = f.as_slice()[na..].to_vec();
    let det = |k: usize, fr: &[f64]| -> Vec<f64> {
        v.atoms()[k].levels.iter().zip(fr).map(|(l, f)| l.energy - f).collect()
    };
    Ok(FrameAssignment { detunings: [det(0, &fa), det(1, &fb)], frequencies: [fa, fb] })
}
