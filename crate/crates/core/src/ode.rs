//! Explicit integrators for large complex linear ODE systems: adaptive
//! Dormand-Prince 5(4), an adaptive fourth-order exponential Runge-Kutta
//! scheme (ETDRK4) for systems with large blockwise decay rates, and
//! classical fixed-step RK4.
//!
//! Every integrator lands exactly on the requested output times, so samples
//! carry the full accuracy of the method.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::prelude::*;
use crate::error::invalid;
use crate::{Complex64, Error, Result};

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn eval(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()>;

    /// Blockwise linear decay: `(block_len, rates)` such that the linear part
    /// of `f` contains `-rates[b] * y` on block `b`. Used by exponential
    /// integrators.
    fn decay(&self) -> Option<(usize, &[f64])> {
        None
    }

    /// `f(t, y)` with the decay part removed.
    fn eval_nonstiff(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        self.eval(t, y, dy)?;
        if let Some((len, rates)) = self.decay() {
            for (b, &r) in rates.iter().enumerate() {
                let range = b * len..(b + 1) * len;
                for (d, v) in dy[range.clone()].iter_mut().zip(&y[range]) {
                    *d += v * r;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Embedded 5(4) pair with error control.
    DormandPrince,
    /// Cox-Matthews ETDRK4 with step-doubling error control; treats the
    /// system's blockwise decay exactly.
    Exponential,
    /// Classical fourth-order Runge-Kutta with the given step.
    Rk4 { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Steps shorter than `min_step_ratio * max(1, |t|)` count as a collapse.
    pub min_step_ratio: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            method: Method::DormandPrince,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            min_step_ratio: 1e-13,
        }
    }
}

/// Work counters of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// Difference between the fifth- and fourth-order weights (stage 7 is FSAL).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn combine(out: &mut [Complex64], y: &[Complex64], h: f64, coeffs: &[f64], ks: &[Vec<Complex64>]) {
    out.copy_from_slice(y);
    for (&a, k) in coeffs.iter().zip(ks) {
        if a == 0.0 {
            continue;
        }
        let ha = h * a;
        for (o, kv) in out.iter_mut().zip(k) {
            *o += kv * ha;
        }
    }
}

fn check_outputs(t0: f64, outputs: &[f64]) -> Result<()> {
    let mut prev = t0;
    for &t in outputs {
        if !(t >= prev && t.is_finite()) {
            return Err(invalid("output_times", "must be finite, nondecreasing and not before t0"));
        }
        prev = t;
    }
    Ok(())
}

fn error_norm(y0: &[Complex64], y1: &[Complex64], err: &[Complex64], opts: &OdeOptions) -> f64 {
    let mut worst: f64 = 0.0;
    for ((a, b), e) in y0.iter().zip(y1).zip(err) {
        let sc = opts.abs_tol + opts.rel_tol * a.norm().max(b.norm());
        worst = worst.max(e.norm() / sc);
    }
    worst
}

/// Integrates from `t0` and calls `observe(t, y_prefix)` at every time in
/// `outputs` with the first `output_len` components of the solution.
/// Returns the state at the last output time.
pub fn solve<S, F>(
    sys: &mut S,
    t0: f64,
    y0: &[Complex64],
    outputs: &[f64],
    output_len: usize,
    opts: &OdeOptions,
    mut observe: F,
) -> Result<(Vec<Complex64>, OdeStats)>
where
    S: OdeSystem,
    F: FnMut(f64, &[Complex64]) -> Result<()>,
{
    if y0.len() != sys.dim() || output_len > y0.len() {
        return Err(invalid("y0", "state length does not match the system"));
    }
    check_outputs(t0, outputs)?;
    if !(opts.max_step > 0.0) {
        return Err(invalid("max_step", "must be positive"));
    }
    let mut stepper: Box<dyn Stepper<S>> = match opts.method {
        Method::DormandPrince | Method::Exponential => {
            if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
                return Err(invalid("tolerance", "rel_tol and abs_tol must be positive"));
            }
            if opts.method == Method::DormandPrince {
                Box::new(DormandPrince::new(y0.len()))
            } else {
                Box::new(Etdrk4::new(y0.len()))
            }
        }
        Method::Rk4 { step } => {
            if !(step > 0.0) {
                return Err(invalid("step", "RK4 step must be positive"));
            }
            Box::new(Rk4::new(y0.len(), step))
        }
    };
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    for &target in outputs {
        if target > t {
            stepper.advance(sys, &mut t, &mut y, target, opts, &mut stats)?;
            t = target;
        }
        observe(target, &y[..output_len])?;
    }
    Ok((y, stats))
}

use alloc::boxed::Box;

trait Stepper<S: OdeSystem> {
    /// Advances `y` from `*t` to exactly `target`.
    fn advance(
        &mut self,
        sys: &mut S,
        t: &mut f64,
        y: &mut Vec<Complex64>,
        target: f64,
        opts: &OdeOptions,
        stats: &mut OdeStats,
    ) -> Result<()>;
}

/// Next trial step, clipped so that the step lands on `target`.
fn clip_step(t: f64, h: f64, target: f64, min_step: f64) -> (f64, bool) {
    let remaining = target - t;
    if h >= remaining || remaining - h < min_step {
        (remaining, true)
    } else if h > 0.5 * remaining && h < remaining {
        // Avoid leaving a sliver: split the rest evenly.
        (0.5 * remaining, false)
    } else {
        (h, false)
    }
}

struct DormandPrince {
    k: Vec<Vec<Complex64>>,
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    err: Vec<Complex64>,
    h: Option<f64>,
    fsal_valid: bool,
}

impl DormandPrince {
    fn new(n: usize) -> Self {
        Self {
            k: (0..7).map(|_| vec![ZERO; n]).collect(),
            stage: vec![ZERO; n],
            y_new: vec![ZERO; n],
            err: vec![ZERO; n],
            h: None,
            fsal_valid: false,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<S: OdeSystem>(
    sys: &mut S,
    t0: f64,
    y0: &[Complex64],
    f0: &[Complex64],
    span: f64,
    order: i32,
    opts: &OdeOptions,
    stats: &mut OdeStats,
    nonstiff: bool,
) -> Result<f64> {
    let scale = |y: &Complex64| opts.abs_tol + opts.rel_tol * y.norm();
    let d0 = y0.iter().map(|y| y.norm() / scale(y)).fold(0.0, f64::max);
    let d1 = y0.iter().zip(f0).map(|(y, f)| f.norm() / scale(y)).fold(0.0, f64::max);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span).min(opts.max_step);
    let y1: Vec<Complex64> = y0.iter().zip(f0).map(|(y, f)| y + f * h0).collect();
    let mut f1 = vec![ZERO; y0.len()];
    if nonstiff {
        sys.eval_nonstiff(t0 + h0, &y1, &mut f1)?;
    } else {
        sys.eval(t0 + h0, &y1, &mut f1)?;
    }
    stats.evaluations += 1;
    let d2 = y0
        .iter()
        .zip(f0.iter().zip(&f1))
        .map(|(y, (a, b))| (b - a).norm() / scale(y))
        .fold(0.0, f64::max)
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
    };
    Ok((100.0 * h0).min(h1).min(span).min(opts.max_step))
}

impl<S: OdeSystem> Stepper<S> for DormandPrince {
    fn advance(
        &mut self,
        sys: &mut S,
        t: &mut f64,
        y: &mut Vec<Complex64>,
        target: f64,
        opts: &OdeOptions,
        stats: &mut OdeStats,
    ) -> Result<()> {
        if !self.fsal_valid {
            sys.eval(*t, y, &mut self.k[0])?;
            stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => initial_step(sys, *t, y, &self.k[0], target - *t, 5, opts, stats, false)?,
        };
        while *t < target {
            let min_step = opts.min_step_ratio * t.abs().max(1.0);
            if h < min_step {
                return Err(Error::Stiffness { t: *t, step: h });
            }
            let (step, last) = clip_step(*t, h.min(opts.max_step), target, min_step);
            let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
            for (s, row) in rows.iter().enumerate() {
                combine(&mut self.stage, y, step, row, &self.k[..s + 1]);
                let (_, rest) = self.k.split_at_mut(s + 1);
                sys.eval(*t + C[s] * step, &self.stage, &mut rest[0])?;
            }
            combine(&mut self.y_new, y, step, &B, &self.k[..6]);
            let t_new = if last { target } else { *t + step };
            {
                let (_, rest) = self.k.split_at_mut(6);
                sys.eval(t_new, &self.y_new, &mut rest[0])?;
            }
            stats.evaluations += 6;

            self.err.iter_mut().for_each(|e| *e = ZERO);
            for (&e, kv) in E.iter().zip(&self.k) {
                if e == 0.0 {
                    continue;
                }
                for (o, v) in self.err.iter_mut().zip(kv) {
                    *o += v * (step * e);
                }
            }
            let en = error_norm(y, &self.y_new, &self.err, opts);
            if !en.is_finite() {
                stats.rejected += 1;
                h = step * 0.1;
                continue;
            }
            if en <= 1.0 {
                stats.accepted += 1;
                core::mem::swap(y, &mut self.y_new);
                self.k.swap(0, 6);
                *t = t_new;
                let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                // A step clipped to hit an output says nothing about the
                // natural step size; keep the larger of the two.
                h = if last { h.max(step * factor) } else { step * factor };
                h = h.min(opts.max_step);
            } else {
                stats.rejected += 1;
                h = step * (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

/// `phi_1, phi_2, phi_3` at `z <= 0`.
fn phi123(z: f64) -> (f64, f64, f64) {
    if z.abs() < 0.5 {
        // phi_k(z) = sum_j z^j / (j + k)!
        let (mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0);
        let mut zj = 1.0;
        let mut fact = [1.0f64, 2.0, 6.0]; // (j+1)!, (j+2)!, (j+3)! at j = 0
        for j in 0..20 {
            p1 += zj / fact[0];
            p2 += zj / fact[1];
            p3 += zj / fact[2];
            zj *= z;
            let jf = j as f64;
            fact = [fact[0] * (jf + 2.0), fact[1] * (jf + 3.0), fact[2] * (jf + 4.0)];
        }
        (p1, p2, p3)
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        (p1, p2, p3)
    }
}

#[derive(Clone, Copy, Default)]
struct EtdCoeffs {
    e_half: f64,
    e_full: f64,
    p_half: f64,
    f1: f64,
    f2: f64,
    f3: f64,
}

impl EtdCoeffs {
    fn new(rate: f64, h: f64) -> Self {
        let z = -rate * h;
        let (p1h, _, _) = phi123(0.5 * z);
        let (p1, p2, p3) = phi123(z);
        Self {
            e_half: (0.5 * z).exp(),
            e_full: z.exp(),
            p_half: 0.5 * h * p1h,
            f1: h * (p1 - 3.0 * p2 + 4.0 * p3),
            f2: h * (p2 - 2.0 * p3),
            f3: h * (-p2 + 4.0 * p3),
        }
    }
}

struct Etdrk4 {
    n_u: Vec<Complex64>,
    n_mid: Vec<Complex64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    na: Vec<Complex64>,
    nb: Vec<Complex64>,
    nc: Vec<Complex64>,
    full: Vec<Complex64>,
    mid: Vec<Complex64>,
    two: Vec<Complex64>,
    err: Vec<Complex64>,
    coeffs: Vec<EtdCoeffs>,
    h: Option<f64>,
}

impl Etdrk4 {
    fn new(n: usize) -> Self {
        let z = || vec![ZERO; n];
        Self {
            n_u: z(),
            n_mid: z(),
            a: z(),
            b: z(),
            c: z(),
            na: z(),
            nb: z(),
            nc: z(),
            full: z(),
            mid: z(),
            two: z(),
            err: z(),
            coeffs: Vec::new(),
            h: None,
        }
    }

    fn set_coeffs(&mut self, rates: &[f64], h: f64) {
        self.coeffs.clear();
        self.coeffs.extend(rates.iter().map(|&r| EtdCoeffs::new(r, h)));
    }

    /// One ETDRK4 step of length `h` from `(t, u)` with `nu = N(t, u)` given.
    #[allow(clippy::too_many_arguments)]
    fn step<S: OdeSystem>(
        sys: &mut S,
        t: f64,
        h: f64,
        u: &[Complex64],
        nu: &[Complex64],
        block: usize,
        coeffs: &[EtdCoeffs],
        scratch: [&mut Vec<Complex64>; 6],
        out: &mut [Complex64],
    ) -> Result<()> {
        let [a, b, c, na, nb, nc] = scratch;
        let blocks = |f: &mut dyn FnMut(usize, &EtdCoeffs)| {
            for (bi, cf) in coeffs.iter().enumerate() {
                for i in bi * block..(bi + 1) * block {
                    f(i, cf);
                }
            }
        };
        blocks(&mut |i, cf| a[i] = u[i] * cf.e_half + nu[i] * cf.p_half);
        sys.eval_nonstiff(t + 0.5 * h, a, na)?;
        blocks(&mut |i, cf| b[i] = u[i] * cf.e_half + na[i] * cf.p_half);
        sys.eval_nonstiff(t + 0.5 * h, b, nb)?;
        blocks(&mut |i, cf| c[i] = a[i] * cf.e_half + (nb[i] * 2.0 - nu[i]) * cf.p_half);
        sys.eval_nonstiff(t + h, c, nc)?;
        blocks(&mut |i, cf| {
            out[i] = u[i] * cf.e_full + nu[i] * cf.f1 + (na[i] + nb[i]) * (2.0 * cf.f2) + nc[i] * cf.f3;
        });
        Ok(())
    }
}

impl<S: OdeSystem> Stepper<S> for Etdrk4 {
    fn advance(
        &mut self,
        sys: &mut S,
        t: &mut f64,
        y: &mut Vec<Complex64>,
        target: f64,
        opts: &OdeOptions,
        stats: &mut OdeStats,
    ) -> Result<()> {
        let n = y.len();
        let (block, rates): (usize, Vec<f64>) = match sys.decay() {
            Some((len, r)) => (len, r.to_vec()),
            None => (n, vec![0.0]),
        };
        sys.eval_nonstiff(*t, y, &mut self.n_u)?;
        stats.evaluations += 1;
        let mut h = match self.h {
            Some(h) => h,
            None => {
                // Step guess from the non-stiff part alone.
                let nu = self.n_u.clone();
                initial_step(sys, *t, y, &nu, target - *t, 4, opts, stats, true)?
            }
        };
        while *t < target {
            let min_step = opts.min_step_ratio * t.abs().max(1.0);
            if h < min_step {
                return Err(Error::Stiffness { t: *t, step: h });
            }
            let (step, last) = clip_step(*t, h.min(opts.max_step), target, min_step);

            // One full step ...
            self.set_coeffs(&rates, step);
            let coeffs = core::mem::take(&mut self.coeffs);
            Self::step(
                sys, *t, step, y, &self.n_u, block, &coeffs,
                [&mut self.a, &mut self.b, &mut self.c, &mut self.na, &mut self.nb, &mut self.nc],
                &mut self.full,
            )?;
            // ... and two half steps.
            self.set_coeffs(&rates, 0.5 * step);
            let half = core::mem::take(&mut self.coeffs);
            Self::step(
                sys, *t, 0.5 * step, y, &self.n_u, block, &half,
                [&mut self.a, &mut self.b, &mut self.c, &mut self.na, &mut self.nb, &mut self.nc],
                &mut self.mid,
            )?;
            sys.eval_nonstiff(*t + 0.5 * step, &self.mid, &mut self.n_mid)?;
            let mid = core::mem::take(&mut self.mid);
            Self::step(
                sys, *t + 0.5 * step, 0.5 * step, &mid, &self.n_mid, block, &half,
                [&mut self.a, &mut self.b, &mut self.c, &mut self.na, &mut self.nb, &mut self.nc],
                &mut self.two,
            )?;
            self.mid = mid;
            self.coeffs = coeffs;
            stats.evaluations += 10;

            // Richardson: the difference estimates the error of the two half
            // steps; adding it back gives a locally extrapolated result.
            for ((e, a), b) in self.err.iter_mut().zip(self.two.iter_mut()).zip(&self.full) {
                *e = (*a - b) / 15.0;
                *a += *e;
            }
            let en = error_norm(y, &self.two, &self.err, opts);
            if !en.is_finite() {
                stats.rejected += 1;
                h = step * 0.1;
                continue;
            }
            if en <= 1.0 {
                stats.accepted += 1;
                core::mem::swap(y, &mut self.two);
                *t = if last { target } else { *t + step };
                sys.eval_nonstiff(*t, y, &mut self.n_u)?;
                stats.evaluations += 1;
                let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                h = if last { h.max(step * factor) } else { step * factor };
                h = h.min(opts.max_step);
            } else {
                stats.rejected += 1;
                h = step * (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

struct Rk4 {
    step: f64,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(n: usize, step: f64) -> Self {
        Self { step, k1: vec![ZERO; n], k2: vec![ZERO; n], k3: vec![ZERO; n], k4: vec![ZERO; n], tmp: vec![ZERO; n] }
    }
}

impl<S: OdeSystem> Stepper<S> for Rk4 {
    fn advance(
        &mut self,
        sys: &mut S,
        t: &mut f64,
        y: &mut Vec<Complex64>,
        target: f64,
        _opts: &OdeOptions,
        stats: &mut OdeStats,
    ) -> Result<()> {
        let span = target - *t;
        let steps = (span / self.step).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let stage = |tmp: &mut [Complex64], y: &[Complex64], k: &[Complex64], h: f64| {
            for ((t, y), k) in tmp.iter_mut().zip(y).zip(k) {
                *t = y + k * h;
            }
        };
        for i in 0..steps {
            let ti = *t + i as f64 * h;
            sys.eval(ti, y, &mut self.k1)?;
            stage(&mut self.tmp, y, &self.k1, 0.5 * h);
            sys.eval(ti + 0.5 * h, &self.tmp, &mut self.k2)?;
            stage(&mut self.tmp, y, &self.k2, 0.5 * h);
            sys.eval(ti + 0.5 * h, &self.tmp, &mut self.k3)?;
            stage(&mut self.tmp, y, &self.k3, h);
            let t_next = if i + 1 == steps { target } else { ti + h };
            sys.eval(t_next, &self.tmp, &mut self.k4)?;
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += (self.k1[j] + (self.k2[j] + self.k3[j]) * 2.0 + self.k4[j]) * (h / 6.0);
            }
            stats.evaluations += 4;
            stats.accepted += 1;
        }
        *t = target;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// `y' = (i w - g) y` plus a driven component `z' = cos(t)`.
    struct Test {
        w: f64,
        g: f64,
    }

    impl OdeSystem for Test {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
            dy[0] = y[0] * Complex64::new(-self.g, self.w);
            dy[1] = Complex64::new(t.cos(), 0.0);
            Ok(())
        }
    }

    fn exact(t: f64) -> [Complex64; 2] {
        [Complex64::new(-0.1 * t, 3.0 * t).exp(), Complex64::new(t.sin(), 0.0)]
    }

    #[test]
    fn dopri_hits_tolerance_and_interpolates() {
        let mut sys = Test { w: 3.0, g: 0.1 };
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let outputs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let mut worst: f64 = 0.0;
        let (yf, stats) = solve(&mut sys, 0.0, &y0, &outputs, 2, &OdeOptions::default(), |t, y| {
            let ex = exact(t);
            worst = worst.max((y[0] - ex[0]).norm()).max((y[1] - ex[1]).norm());
            Ok(())
        })
        .unwrap();
        assert!(worst < 1e-7, "{worst}");
        assert_abs_diff_eq!((yf[0] - exact(10.0)[0]).norm(), 0.0, epsilon = 1e-7);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn dopri_order_on_tolerance() {
        let run = |tol: f64| {
            let mut sys = Test { w: 3.0, g: 0.1 };
            let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let opts = OdeOptions { rel_tol: tol, abs_tol: tol, ..OdeOptions::default() };
            let (yf, _) = solve(&mut sys, 0.0, &y0, &[5.0], 2, &opts, |_, _| Ok(())).unwrap();
            (yf[0] - exact(5.0)[0]).norm()
        };
        assert!(run(1e-10) < 1e-8);
        assert!(run(1e-10) < run(1e-6));
    }

    /// Block 0 decays fast; block 1 is driven and coupled to block 0.
    struct Stiff {
        rates: [f64; 2],
    }

    impl OdeSystem for Stiff {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
            dy[0] = -y[0] * self.rates[0] + Complex64::new(t.sin(), 0.0);
            dy[1] = y[1] * Complex64::new(0.0, 2.0) + y[0];
            Ok(())
        }
        fn decay(&self) -> Option<(usize, &[f64])> {
            Some((1, &self.rates))
        }
    }

    #[test]
    fn phi_functions_are_continuous() {
        for z in [-0.5f64, -1e-3] {
            let (a1, a2, a3) = phi123(z * (1.0 - 1e-12));
            let (b1, b2, b3) = phi123(z * (1.0 + 1e-12));
            assert_abs_diff_eq!(a1, b1, epsilon = 1e-11);
            assert_abs_diff_eq!(a2, b2, epsilon = 1e-11);
            assert_abs_diff_eq!(a3, b3, epsilon = 1e-10);
        }
        assert_eq!(phi123(0.0), (1.0, 0.5, 1.0 / 6.0));
    }

    #[test]
    fn exponential_integrator_handles_stiff_decay() {
        let opts = OdeOptions { rel_tol: 1e-9, abs_tol: 1e-11, ..OdeOptions::default() };
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let reference = {
            let mut sys = Stiff { rates: [2000.0, 0.0] };
            let (y, stats) = solve(&mut sys, 0.0, &y0, &[3.0], 2, &opts, |_, _| Ok(())).unwrap();
            assert!(stats.accepted > 1000, "explicit RK is stability limited");
            y
        };
        // Stiff coupling costs ETDRK4 some order, but it is not stability
        // limited and its error still tracks the tolerance.
        let mut sys = Stiff { rates: [2000.0, 0.0] };
        let etd = OdeOptions { method: Method::Exponential, rel_tol: 1e-7, abs_tol: 1e-9, ..opts };
        let (y, stats) = solve(&mut sys, 0.0, &y0, &[3.0], 2, &etd, |_, _| Ok(())).unwrap();
        assert!(stats.accepted < 300, "{stats:?}");
        assert!((y[0] - reference[0]).norm() < 1e-8);
        assert!((y[1] - reference[1]).norm() < 2e-6, "{} vs {}", y[1], reference[1]);
    }

    #[test]
    fn exponential_integrator_without_decay_matches_exact() {
        let mut sys = Test { w: 3.0, g: 0.1 };
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let opts = OdeOptions { method: Method::Exponential, ..OdeOptions::default() };
        let (y, _) = solve(&mut sys, 0.0, &y0, &[1.0, 4.0], 2, &opts, |_, _| Ok(())).unwrap();
        assert!((y[0] - exact(4.0)[0]).norm() < 1e-7);
        assert!((y[1] - exact(4.0)[1]).norm() < 1e-7);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let run = |h: f64| {
            let mut sys = Test { w: 3.0, g: 0.1 };
            let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let opts = OdeOptions { method: Method::Rk4 { step: h }, ..OdeOptions::default() };
            let (yf, _) = solve(&mut sys, 0.0, &y0, &[2.0], 2, &opts, |_, _| Ok(())).unwrap();
            (yf[0] - exact(2.0)[0]).norm()
        };
        let ratio = run(0.02) / run(0.01);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn reports_step_collapse() {
        struct Blowup;
        impl OdeSystem for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&mut self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
                dy[0] = y[0] * y[0];
                Ok(())
            }
        }
        let y0 = [Complex64::new(1.0, 0.0)];
        let err = solve(&mut Blowup, 0.0, &y0, &[2.0], 1, &OdeOptions::default(), |_, _| Ok(())).unwrap_err();
        assert!(matches!(err, Error::Stiffness { t, .. } if t > 0.9 && t < 1.01), "{err:?}");
    }

    #[test]
    fn rejects_unsorted_outputs() {
        let mut sys = Test { w: 1.0, g: 0.0 };
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(solve(&mut sys, 0.0, &y0, &[1.0, 0.5], 2, &OdeOptions::default(), |_, _| Ok(())).is_err());
    }
}
