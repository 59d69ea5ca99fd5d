//! Dormand–Prince 5(4) with Hairer's continuous extension, for complex state
//! vectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, C64};
#[allow(unused_imports)]
use num_traits::Float;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step size; `0` means unbounded.
    pub h_max: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 10_000_000, h_max: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn axpy(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (a, k) in terms {
            acc += k[i] * *a;
        }
        out[i] = y[i] + acc * h;
    }
}

fn err_norm(err: &[C64], y0: &[C64], y1: &[C64], o: &Options) -> f64 {
    let mut s = 0.0;
    for i in 0..err.len() {
        let sr = o.atol + o.rtol * y0[i].re.abs().max(y1[i].re.abs());
        let si = o.atol + o.rtol * y0[i].im.abs().max(y1[i].im.abs());
        s += (err[i].re / sr).powi(2) + (err[i].im / si).powi(2);
    }
    (s / (2 * err.len()).max(1) as f64).sqrt()
}

fn scaled_norm(x: &[C64], y: &[C64], o: &Options) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let sr = o.atol + o.rtol * y[i].re.abs();
        let si = o.atol + o.rtol * y[i].im.abs();
        s += (x[i].re / sr).powi(2) + (x[i].im / si).powi(2);
    }
    (s / (2 * x.len()).max(1) as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`.
///
/// `outputs` must be sorted and lie in `(t0, t1]`; `emit` is called once for
/// each of them with the dense-output state. Returns the state at `t1`.
pub fn integrate<F, G>(
    mut f: F,
    t0: f64,
    y0: &[C64],
    t1: f64,
    outputs: &[f64],
    opts: &Options,
    mut emit: G,
) -> Result<(Vec<C64>, Stats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    G: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = Stats::default();
    let mut y = y0.to_vec();
    if !(t1 > t0) {
        return Ok((y, stats));
    }
    let mut k1 = vec![C64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut ys = k1.clone();
    let mut ynew = k1.clone();
    let mut err = k1.clone();
    let mut dense = vec![C64::new(0.0, 0.0); 5 * n];
    let mut out_buf = k1.clone();

    let mut t = t0;
    f(t, &y, &mut k1);
    stats.evaluations += 1;

    let span = t1 - t0;
    let h_max = if opts.h_max > 0.0 { opts.h_max.min(span) } else { span };
    let mut h = initial_step(&mut f, t0, &y, &k1, opts, &mut stats).min(h_max);
    let mut next_out = 0;
    let mut fac_old = 1e-4f64;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::TooManySteps { t });
        }
        let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * span;
        if last {
            h = t1 - t;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }

        axpy(&mut ys, &y, h, &[(A21, &k1)]);
        f(t + C2 * h, &ys, &mut k2);
        axpy(&mut ys, &y, h, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * h, &ys, &mut k3);
        axpy(&mut ys, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * h, &ys, &mut k4);
        axpy(&mut ys, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * h, &ys, &mut k5);
        axpy(&mut ys, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let t_new = if last { t1 } else { t + h };
        f(t_new, &ys, &mut k6);
        axpy(&mut ynew, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t_new, &ynew, &mut k7);
        stats.evaluations += 6;

        for i in 0..n {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let e = err_norm(&err, &y, &ynew, opts);

        if e.is_finite() && e <= 1.0 {
            stats.accepted += 1;
            if next_out < outputs.len() && outputs[next_out] <= t_new {
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = k1[i] * h - ydiff;
                    dense[i] = y[i];
                    dense[n + i] = ydiff;
                    dense[2 * n + i] = bspl;
                    dense[3 * n + i] = ydiff - k7[i] * h - bspl;
                    dense[4 * n + i] =
                        (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                }
                while next_out < outputs.len() && outputs[next_out] <= t_new {
                    let to = outputs[next_out];
                    if to >= t_new {
                        emit(next_out, to, &ynew)?;
                    } else {
                        let th = (to - t) / h;
                        let th1 = 1.0 - th;
                        for i in 0..n {
                            out_buf[i] = dense[i]
                                + (dense[n + i]
                                    + (dense[2 * n + i] + (dense[3 * n + i] + dense[4 * n + i] * th1) * th) * th1)
                                    * th;
                        }
                        emit(next_out, to, &out_buf)?;
                    }
                    next_out += 1;
                }
            }
            core::mem::swap(&mut y, &mut ynew);
            core::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if last {
                return Ok((y, stats));
            }
            // Lund stabilisation as in Hairer's DOPRI5
            let fac11 = e.powf(0.2 - 0.04 * 0.75);
            let fac = (fac11 / fac_old.powf(0.04) / 0.9).clamp(0.1, 5.0);
            fac_old = e.max(1e-4);
            h = (h / fac).min(h_max);
        } else {
            stats.rejected += 1;
            let shrink = if e.is_finite() { (e.powf(0.2) / 0.9).min(5.0) } else { 10.0 };
            h /= shrink.max(1.0 / 0.9);
        }
    }
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[C64], f0: &[C64], o: &Options, stats: &mut Stats) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let d0 = scaled_norm(y0, y0, o);
    let d1 = scaled_norm(f0, y0, o);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<C64> = y0.iter().zip(f0).map(|(y, k)| y + k * h0).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); y0.len()];
    f(t0 + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&diff, y0, o) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}
