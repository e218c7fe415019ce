//! Drude-Lorentz bath: spectral density, correlation function, Matsubara
//! expansion and the Markovian residual of its truncation.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use crate::prelude::*;
use crate::error::invalid;
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::special::{scaled_e1, scaled_ei};
use crate::{Complex64, Error, Result};

/// Relative distance below which a Matsubara frequency hits the Drude pole.
pub const POLE_TOL: f64 = 1e-9;

/// Drude-Lorentz bath with coupling `q`, width `gamma`, temperature `T` and
/// Matsubara cutoff `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathModel {
    pub q: f64,
    pub gamma: f64,
    pub temperature: f64,
    pub m_cut: usize,
}

/// One exponential `c e^{-nu t}` of the correlation function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionTerm {
    pub c: Complex64,
    pub nu: f64,
}

/// Cutoff rule for the study grid: 18 terms below `T = 1`, 5 at or above.
pub fn default_matsubara_cutoff(temperature: f64) -> usize {
    if temperature < 1.0 { 18 } else { 5 }
}

impl BathModel {
    pub fn new(q: f64, gamma: f64, temperature: f64, m_cut: usize) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(invalid("q", "coupling must be finite and nonnegative"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", "cutoff width must be positive"));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidTemperature(temperature));
        }
        Ok(Self { q, gamma, temperature, m_cut })
    }

    /// Bath with the default cutoff rule for its temperature.
    pub fn with_default_cutoff(q: f64, gamma: f64, temperature: f64) -> Result<Self> {
        Self::new(q, gamma, temperature, default_matsubara_cutoff(temperature))
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }

    /// `nu_k = 2 pi k T`.
    pub fn matsubara_frequency(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 * self.temperature
    }
}

/// `J(w) = 2 q gamma w / (gamma^2 + w^2)`.
pub fn spectral_density(bath: &BathModel, omega: f64) -> f64 {
    2.0 * bath.q * bath.gamma * omega / (bath.gamma * bath.gamma + omega * omega)
}

/// Bose occupation `1 / (e^{w/T} - 1)`.
pub fn bose(omega: f64, temperature: f64) -> f64 {
    1.0 / (omega / temperature).exp_m1()
}

/// `J(w) coth(w / 2T)`, with its finite limit `4 q T / gamma` near `w = 0`.
fn symmetrized_density(bath: &BathModel, omega: f64) -> f64 {
    let t = bath.temperature;
    let g = bath.gamma;
    // w coth(w/2T) = 2T + w^2/(6T) + ...
    let w_coth = if omega.abs() < 1e-6 {
        2.0 * t + omega * omega / (6.0 * t)
    } else {
        omega / (omega / (2.0 * t)).tanh()
    };
    2.0 * bath.q * g * w_coth / (g * g + omega * omega)
}

/// Fourier transform `S(w) = int C(t) e^{i w t} dt = 2 J(w) (1 + n(w))`,
/// extended to `w < 0` with odd `J`. `S(0) = 4 q T / gamma`.
pub fn power_spectrum(bath: &BathModel, omega: f64) -> f64 {
    if omega.abs() < 1e-10 * bath.temperature {
        return 4.0 * bath.q * bath.temperature / bath.gamma;
    }
    let w = omega.abs();
    let n = bose(w, bath.temperature);
    // For w < 0 use 1 + n(-w) = -n(w), which avoids cancellation at large w/T.
    let occupation = if omega > 0.0 { 1.0 + n } else { n };
    2.0 * spectral_density(bath, w) * occupation
}

fn pole_check(bath: &BathModel) -> Result<()> {
    // cot(gamma / 2T) is singular whenever some nu_k equals gamma, even for k > M.
    let ratio = bath.gamma / (2.0 * PI * bath.temperature);
    let k = ratio.round();
    if k >= 1.0 {
        let nu = bath.matsubara_frequency(k as usize);
        if (nu - bath.gamma).abs() <= POLE_TOL * bath.gamma {
            return Err(Error::PoleCollision { k: k as usize, nu });
        }
    }
    Ok(())
}

/// Terms `c_0 = q gamma (cot(gamma/2T) - i)`, `nu_0 = gamma` and
/// `c_k = 4 q gamma T nu_k / (nu_k^2 - gamma^2)`, `nu_k = 2 pi k T` for `k = 1..=M`.
pub fn matsubara_expansion(bath: &BathModel) -> Result<Vec<ExpansionTerm>> {
    pole_check(bath)?;
    let (q, g, t) = (bath.q, bath.gamma, bath.temperature);
    let x = g / (2.0 * t);
    let mut terms = Vec::with_capacity(bath.m_cut + 1);
    terms.push(ExpansionTerm { c: Complex64::new(q * g / x.tan(), -q * g), nu: g });
    for k in 1..=bath.m_cut {
        let nu = bath.matsubara_frequency(k);
        terms.push(ExpansionTerm { c: Complex64::new(4.0 * q * g * t * nu / (nu * nu - g * g), 0.0), nu });
    }
    Ok(terms)
}

/// Markovian weight of the discarded terms,
/// `Delta_M = 2qT/gamma - Re c_0/gamma - sum_{k=1..M} c_k/nu_k`.
///
/// Errors when it is negative beyond rounding, which happens if the cutoff
/// stops below `k* = gamma / 2 pi T`.
pub fn terminator_residual(bath: &BathModel) -> Result<f64> {
    let terms = matsubara_expansion(bath)?;
    let total = 2.0 * bath.q * bath.temperature / bath.gamma;
    let kept: f64 = terms.iter().map(|c| c.c.re / c.nu).sum();
    let delta = total - kept;
    if delta < -1e-12 * total.max(1.0) {
        return Err(Error::ExpansionInconsistent(delta));
    }
    Ok(delta.max(0.0))
}

/// `sum_k c_k e^{-nu_k t}`.
pub fn expansion_value(terms: &[ExpansionTerm], t: f64) -> Complex64 {
    terms.iter().map(|e| e.c * (-e.nu * t).exp()).sum()
}

/// Fourier transform of the truncated expansion, `sum_k 2 Re[c_k / (nu_k - i w)]`.
pub fn expansion_spectrum(terms: &[ExpansionTerm], omega: f64) -> f64 {
    terms
        .iter()
        .map(|e| 2.0 * (e.c / Complex64::new(e.nu, -omega)).re)
        .sum()
}

/// Bath correlation function
/// `C(t) = (1/pi) int_0^inf J(w) [coth(w/2T) cos(wt) - i sin(wt)] dw`.
///
/// The temperature-independent part is evaluated in closed form through
/// exponential integrals; the thermal part `(2/pi) int J n cos(wt) dw` by
/// adaptive quadrature. `Re C(t)` diverges logarithmically as `t -> 0`, so
/// `t = 0` returns an infinite real part.
pub fn correlation_function(bath: &BathModel, t: f64) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(invalid("t", "correlation time must be nonnegative"));
    }
    let (q, g, temp) = (bath.q, bath.gamma, bath.temperature);
    let im = -q * g * (-g * t).exp();
    if q == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if t == 0.0 {
        return Ok(Complex64::new(f64::INFINITY, im));
    }
    let x = g * t;
    let vacuum = -(q * g / PI) * (scaled_ei(x) - scaled_e1(x));
    let upper = (50.0 * g).max(60.0 * temp);
    let thermal = integrate(
        |w| {
            if w == 0.0 {
                return 2.0 * q * temp / g;
            }
            spectral_density(bath, w) * bose(w, temp) * (w * t).cos()
        },
        0.0,
        upper,
        QuadOptions { abs_tol: 1e-11, rel_tol: 1e-11, max_intervals: 20_000 },
    )?;
    Ok(Complex64::new(vacuum + 2.0 / PI * thermal.value, im))
}

/// `C(t)` with the frequency integral cut at `omega_max`, by adaptive
/// quadrature on `(0, omega_max]` to absolute tolerance `1e-8`.
pub fn band_limited_correlation(bath: &BathModel, t: f64, omega_max: f64) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(invalid("t", "correlation time must be nonnegative"));
    }
    let opts = QuadOptions { abs_tol: 1e-8, rel_tol: 0.0, max_intervals: 20_000 };
    let re = integrate(|w| symmetrized_density(bath, w) * (w * t).cos(), 0.0, omega_max, opts)?;
    let im = integrate(|w| -spectral_density(bath, w) * (w * t).sin(), 0.0, omega_max, opts)?;
    Ok(Complex64::new(re.value, im.value) / PI)
}

/// Reorganization-type integral `(1/pi) int_0^inf J(w)/w dw`, equal to `q`.
pub fn reorganization_integral(bath: &BathModel) -> Result<f64> {
    let r = integrate_to_infinity(
        |w| 2.0 * bath.q * bath.gamma / (bath.gamma * bath.gamma + w * w),
        0.0,
        QuadOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 2000 },
    )?;
    Ok(r.value / PI)
}
