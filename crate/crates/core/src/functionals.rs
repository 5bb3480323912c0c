//! Per-branch signal integrals that populate the Fisher information matrix.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::{sample_branch, BranchSpec, SampledSignal};

/// Threshold for a functional to count as converged under grid refinement.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// The seven time-domain integrals over the observation window plus the RMS
/// bandwidth of the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalSet {
    /// `E = int |s|^2`
    pub energy: f64,
    /// `E~ = int |s'|^2`
    pub deriv_energy: f64,
    /// `int Re{s' s*}`
    pub e_hat_r: f64,
    /// `int Im{s' s*}`
    pub e_hat_i: f64,
    /// `F = int t^2 |s|^2`
    pub f_moment: f64,
    /// `F^ = int t |s|^2`
    pub f_hat: f64,
    /// `G = int t Im{s* s'}`
    pub g_moment: f64,
    /// RMS bandwidth about zero frequency, Hz.
    pub eff_bandwidth: f64,
}

impl FunctionalSet {
    /// Magnitude of the cross term, `sqrt(e_hat_r^2 + e_hat_i^2)`.
    pub fn e_hat(&self) -> f64 {
        self.e_hat_r.hypot(self.e_hat_i)
    }

    /// Gram determinant of `{1, t}` under the weight `|s|^2`.
    pub fn moment_gap(&self) -> f64 {
        self.energy * self.f_moment - self.f_hat * self.f_hat
    }

    /// Named integrals with a scale for relative comparisons. Cross terms that
    /// can legitimately vanish are measured against their Cauchy-Schwarz bound.
    pub fn scaled_fields(&self) -> [(&'static str, f64, f64); 7] {
        let cs_cross = (self.energy * self.deriv_energy).sqrt();
        [
            ("energy", self.energy, self.energy.abs()),
            ("deriv_energy", self.deriv_energy, self.deriv_energy.abs()),
            ("e_hat_r", self.e_hat_r, cs_cross),
            ("e_hat_i", self.e_hat_i, cs_cross),
            ("f_moment", self.f_moment, self.f_moment.abs()),
            ("f_hat", self.f_hat, (self.energy * self.f_moment).sqrt()),
            (
                "g_moment",
                self.g_moment,
                (self.f_moment * self.deriv_energy).sqrt(),
            ),
        ]
    }

    /// Positivity and the two Cauchy-Schwarz inequalities, with relative slack `tol`.
    pub fn check_invariants(&self, tol: f64) -> std::result::Result<(), String> {
        if !(self.energy > 0.0 && self.deriv_energy > 0.0 && self.f_moment > 0.0) {
            return Err(format!("non-positive energy or moment in {self:?}"));
        }
        if self.moment_gap() < -tol * self.energy * self.f_moment {
            return Err(format!(
                "E*F - F_hat^2 = {:e} is negative",
                self.moment_gap()
            ));
        }
        let e_hat = self.e_hat();
        if e_hat * e_hat > (1.0 + tol) * self.energy * self.deriv_energy {
            return Err(format!("E_hat^2 = {:e} exceeds E*E~", e_hat * e_hat));
        }
        Ok(())
    }
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    match samples {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dt * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// All seven integrals by the trapezoid rule on the signal's own grid, and the
/// RMS bandwidth from a zero-padded DFT.
pub fn compute_functionals(sig: &SampledSignal) -> Result<FunctionalSet> {
    if sig.is_empty() {
        return Err(Error::EmptySignal);
    }
    let deriv = sig.derivative.as_ref().ok_or(Error::MissingDerivative)?;
    if deriv.len() != sig.len() {
        return Err(Error::MissingDerivative);
    }
    if !(sig.dt > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "sampling step {} must be positive",
            sig.dt
        )));
    }

    let last = sig.len() - 1;
    let mut acc = [0.0f64; 7];
    for (k, (s, ds)) in sig.values.iter().zip(deriv).enumerate() {
        let w = if k == 0 || k == last { 0.5 } else { 1.0 };
        let t = sig.time(k);
        let power = s.norm_sqr();
        let cross = ds * s.conj();
        acc[0] += w * power;
        acc[1] += w * ds.norm_sqr();
        acc[2] += w * cross.re;
        acc[3] += w * cross.im;
        acc[4] += w * t * t * power;
        acc[5] += w * t * power;
        // Im{s* s'} == Im{s' s*}
        acc[6] += w * t * cross.im;
    }
    let [energy, deriv_energy, e_hat_r, e_hat_i, f_moment, f_hat, g_moment] =
        acc.map(|v| v * sig.dt);
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok(FunctionalSet {
        energy,
        deriv_energy,
        e_hat_r,
        e_hat_i,
        f_moment,
        f_hat,
        g_moment,
        eff_bandwidth: effective_bandwidth(sig)?,
    })
}

/// Bins more than this far below the spectral peak are left out of the
/// bandwidth numerator (-80 dB).
pub const SPECTRAL_FLOOR: f64 = 1e-8;

/// RMS bandwidth `sqrt(sum f^2 |S(f)|^2 / sum |S(f)|^2)` over a DFT zero-padded
/// to the next power of two at least eight times the signal length.
///
/// Jumps at slot boundaries leave a `1/f^2` tail in `|S(f)|^2` that reaches
/// the Nyquist frequency, so its weight in the numerator grows with the
/// sampling rate. Bins below [`SPECTRAL_FLOOR`] times the peak are dropped from
/// the numerator; the denominator keeps every bin.
pub fn effective_bandwidth(sig: &SampledSignal) -> Result<f64> {
    if sig.is_empty() {
        return Err(Error::EmptySignal);
    }
    let len = (8 * sig.len()).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[..sig.len()].copy_from_slice(&sig.values);
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let df = 1.0 / (len as f64 * sig.dt);
    let peak = buf.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max);
    let floor = SPECTRAL_FLOOR * peak;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, x) in buf.iter().enumerate() {
        let bin = if k < len / 2 {
            k as f64
        } else {
            k as f64 - len as f64
        };
        let f = bin * df;
        let p = x.norm_sqr();
        if p >= floor {
            num += f * f * p;
        }
        den += p;
    }
    if !(den > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDelta {
    pub name: &'static str,
    pub coarse: f64,
    pub fine: f64,
    pub rel_delta: f64,
    pub flagged: bool,
}

/// Outcome of recomputing a branch's functionals on a grid twice as fine.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub dt: f64,
    pub fields: Vec<FieldDelta>,
    /// Relative change of the DFT bandwidth. Reported, never flagged: the
    /// truncation edges add a spectral floor that grows as the grid refines.
    pub bandwidth_delta: f64,
}

impl ConvergenceReport {
    pub fn converged(&self) -> bool {
        self.fields.iter().all(|f| !f.flagged)
    }

    pub fn max_delta(&self) -> f64 {
        self.fields.iter().map(|f| f.rel_delta).fold(0.0, f64::max)
    }
}

/// Recomputes the functionals at `dt` and `dt / 2` and flags any integral whose
/// relative change exceeds [`CONVERGENCE_TOL`].
pub fn convergence_check(b: &BranchSpec, tau: f64, dt: f64) -> Result<ConvergenceReport> {
    let coarse = compute_functionals(&sample_branch(b, tau, dt)?)?;
    let fine = compute_functionals(&sample_branch(b, tau, 0.5 * dt)?)?;
    let fields = coarse
        .scaled_fields()
        .iter()
        .zip(fine.scaled_fields().iter())
        .map(|(&(name, c, cs), &(_, f, fs))| {
            let scale = cs.max(fs);
            let rel_delta = if scale > 0.0 {
                (c - f).abs() / scale
            } else {
                0.0
            };
            FieldDelta {
                name,
                coarse: c,
                fine: f,
                rel_delta,
                flagged: !(rel_delta <= CONVERGENCE_TOL),
            }
        })
        .collect();
    let bandwidth_delta = (coarse.eff_bandwidth - fine.eff_bandwidth).abs()
        / fine.eff_bandwidth.max(f64::MIN_POSITIVE);
    Ok(ConvergenceReport {
        dt,
        fields,
        bandwidth_delta,
    })
}

/// `4 pi^2 beta^2 E`, the derivative energy implied by the DFT bandwidth.
pub fn parseval_deriv_energy(fs: &FunctionalSet) -> f64 {
    4.0 * PI * PI * fs.eff_bandwidth * fs.eff_bandwidth * fs.energy
}
