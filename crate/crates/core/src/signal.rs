//! Baseband transmit signals: Gaussian-doublet pulses carrying a known symbol
//! sequence, one pulse per symbol slot.
//!
//! A branch signal on the observation window `[0, N * T_sym]` is
//!
//! ```text
//! s(t) = sum_l d_l(t) p(t - l T_sym)
//! ```
//!
//! where `d_l` is a constant symbol for PAM/PSK/QAM and
//! `exp(j 2 pi m_l df (t - l T_sym))` for FSK (phase restarts every slot).
//! Pulses are hard-truncated to their slot so at most one pulse is active at
//! any instant; the sample sitting exactly on a slot boundary belongs to the
//! later slot, except at the end of the window where it belongs to the last.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative slack used when deciding which slot a time instant falls in.
const SLOT_EPS: f64 = 1e-9;

/// Gaussian doublet `A (1 - 4 pi x^2 / zeta^2) exp(-2 pi x^2 / zeta^2)` with
/// `x = t - center`, truncated to `[0, symbol_duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub amplitude: f64,
    /// Width parameter, seconds.
    pub zeta: f64,
    /// Slot length, seconds.
    pub symbol_duration: f64,
    /// Peak position inside the slot, seconds.
    pub center: f64,
}

impl PulseSpec {
    /// Unit-energy doublet centered in its slot.
    pub fn unit_energy(zeta: f64, symbol_duration: f64) -> Result<Self> {
        let raw = PulseSpec {
            amplitude: 1.0,
            zeta,
            symbol_duration,
            center: 0.5 * symbol_duration,
        };
        raw.validate()?;
        Ok(raw.normalized(1.0))
    }

    /// Rescales the amplitude so the truncated pulse carries `energy`.
    ///
    /// The energy is measured by trapezoidal quadrature at `zeta / 4096`.
    pub fn normalized(self, energy: f64) -> Self {
        let current = pulse_energy(&self, self.zeta / 4096.0);
        PulseSpec {
            amplitude: self.amplitude * (energy / current).sqrt(),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidPulse(format!(
                "zeta must be positive, got {}",
                self.zeta
            )));
        }
        if !(self.symbol_duration > 0.0 && self.symbol_duration.is_finite()) {
            return Err(Error::InvalidPulse(format!(
                "symbol duration must be positive, got {}",
                self.symbol_duration
            )));
        }
        if !(0.0..=self.symbol_duration).contains(&self.center) {
            return Err(Error::InvalidPulse(format!(
                "center {} lies outside [0, {}]",
                self.center, self.symbol_duration
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidPulse("amplitude is not finite".into()));
        }
        Ok(())
    }

    fn exponent_rate(&self) -> f64 {
        2.0 * PI / (self.zeta * self.zeta)
    }

    fn in_support(&self, t: f64) -> bool {
        (0.0..=self.symbol_duration).contains(&t)
    }

    /// Closed-form time derivative of the truncated doublet (zero outside the slot).
    pub fn derivative(&self, t: f64) -> f64 {
        if !self.in_support(t) {
            return 0.0;
        }
        let a = self.exponent_rate();
        let x = t - self.center;
        self.amplitude * (-a * x * x).exp() * 2.0 * a * x * (2.0 * a * x * x - 3.0)
    }
}

/// Value of the truncated Gaussian doublet at `t` (seconds from slot start).
pub fn gaussian_doublet(p: &PulseSpec, t: f64) -> f64 {
    if !p.in_support(t) {
        return 0.0;
    }
    let a = p.exponent_rate();
    let x = t - p.center;
    p.amplitude * (1.0 - 2.0 * a * x * x) * (-a * x * x).exp()
}

/// Trapezoidal energy of the truncated pulse on a grid of step `dt` over its slot.
pub fn pulse_energy(p: &PulseSpec, dt: f64) -> f64 {
    let n = grid_len(p.symbol_duration, dt);
    let samples: Vec<f64> = (0..n)
        .map(|k| gaussian_doublet(p, k as f64 * dt).powi(2))
        .collect();
    crate::functionals::trapezoid(&samples, dt)
}

/// Number of grid points `0, dt, 2dt, ...` not exceeding `span`.
pub(crate) fn grid_len(span: f64, dt: f64) -> usize {
    (span / dt + SLOT_EPS).floor() as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModulationKind {
    Pam,
    Psk,
    Qam,
    Fsk,
}

impl ModulationKind {
    /// PAM, PSK and QAM carry a constant complex factor per symbol.
    pub fn is_linear(self) -> bool {
        !matches!(self, ModulationKind::Fsk)
    }

    fn label(self) -> &'static str {
        match self {
            ModulationKind::Pam => "PAM",
            ModulationKind::Psk => "PSK",
            ModulationKind::Qam => "QAM",
            ModulationKind::Fsk => "FSK",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSpec {
    pub kind: ModulationKind,
    pub order: usize,
    /// Tone spacing in Hz; only meaningful for FSK.
    pub fsk_shift: Option<f64>,
    /// Mean squared magnitude of the constellation.
    pub mean_energy: f64,
}

impl ModulationSpec {
    pub fn new(kind: ModulationKind, order: usize) -> Self {
        ModulationSpec {
            kind,
            order,
            fsk_shift: None,
            mean_energy: 1.0,
        }
    }

    pub fn fsk(order: usize, shift_hz: f64) -> Self {
        ModulationSpec {
            fsk_shift: Some(shift_hz),
            ..Self::new(ModulationKind::Fsk, order)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.order;
        if m < 2 {
            return Err(Error::InvalidModulation(format!("order {m} is below 2")));
        }
        if !(self.mean_energy > 0.0 && self.mean_energy.is_finite()) {
            return Err(Error::InvalidModulation(format!(
                "normalization target {} must be positive",
                self.mean_energy
            )));
        }
        match self.kind {
            ModulationKind::Qam => {
                let side = integer_sqrt(m);
                if side * side != m {
                    return Err(Error::InvalidModulation(format!(
                        "QAM order {m} is not a perfect square"
                    )));
                }
            }
            ModulationKind::Fsk => match self.fsk_shift {
                Some(df) if df > 0.0 && df.is_finite() => {}
                other => {
                    return Err(Error::InvalidModulation(format!(
                        "FSK requires a positive frequency shift, got {other:?}"
                    )))
                }
            },
            ModulationKind::Pam | ModulationKind::Psk => {}
        }
        Ok(())
    }

    /// Every constellation point, scaled to the normalization target. FSK
    /// points are the (identical) unit-phase markers.
    pub fn constellation(&self) -> Result<Vec<Complex64>> {
        self.validate()?;
        let m = self.order;
        let raw: Vec<Complex64> = match self.kind {
            ModulationKind::Pam => (0..m)
                .map(|i| Complex64::new((2 * i) as f64 + 1.0 - m as f64, 0.0))
                .collect(),
            ModulationKind::Psk => (0..m)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / m as f64))
                .collect(),
            ModulationKind::Qam => {
                let side = integer_sqrt(m);
                let level = |i: usize| (2 * i) as f64 + 1.0 - side as f64;
                (0..m)
                    .map(|i| Complex64::new(level(i % side), level(i / side)))
                    .collect()
            }
            ModulationKind::Fsk => vec![Complex64::new(1.0, 0.0); m],
        };
        let mean = raw.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
        let scale = (self.mean_energy / mean).sqrt();
        Ok(raw.into_iter().map(|z| z * scale).collect())
    }
}

impl fmt::Display for ModulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.order, self.kind.label())
    }
}

/// Parses labels such as `16PSK` or `4pam`. FSK parsed this way has no shift
/// yet; set `fsk_shift` before use.
impl FromStr for ModulationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|c: char| !c.is_ascii_digit())
            .ok_or_else(|| Error::InvalidModulation(format!("`{s}` has no modulation kind")))?;
        let (digits, kind) = s.split_at(split);
        let order: usize = digits
            .parse()
            .map_err(|_| Error::InvalidModulation(format!("`{s}` has no modulation order")))?;
        let kind = match kind.to_ascii_uppercase().as_str() {
            "PAM" => ModulationKind::Pam,
            "PSK" => ModulationKind::Psk,
            "QAM" => ModulationKind::Qam,
            "FSK" => ModulationKind::Fsk,
            other => {
                return Err(Error::InvalidModulation(format!(
                    "unknown modulation kind `{other}`"
                )))
            }
        };
        Ok(ModulationSpec::new(kind, order))
    }
}

fn integer_sqrt(m: usize) -> usize {
    let mut r = (m as f64).sqrt() as usize;
    while r * r > m {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= m {
        r += 1;
    }
    r
}

/// Known training symbols: the drawn constellation index and its value.
/// For FSK the index is the tone number.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSequence {
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SymbolSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean_energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

/// Draws `n` symbols uniformly from the order-`M` constellation.
///
/// The generator is ChaCha8 seeded with `seed` through `SeedableRng::seed_from_u64`;
/// each index is `(next_u64() * M) >> 64` in 128-bit arithmetic, so a sequence
/// is a prefix of any longer sequence with the same seed.
pub fn make_symbols(m: &ModulationSpec, n: usize, seed: u64) -> Result<SymbolSequence> {
    if n == 0 {
        return Err(Error::InvalidModulation(
            "symbol count must be at least 1".into(),
        ));
    }
    let points = m.constellation()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..n)
        .map(|_| ((rng.next_u64() as u128 * m.order as u128) >> 64) as usize)
        .collect();
    let values = indices.iter().map(|&i| points[i]).collect();
    Ok(SymbolSequence { indices, values })
}

/// One receiver branch: transmitted waveform parameters plus its channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub pulse: PulseSpec,
    pub modulation: ModulationSpec,
    pub symbols: SymbolSequence,
    /// |alpha|
    pub channel_amp: f64,
    /// arg(alpha), radians
    pub channel_phase: f64,
    /// Carrier frequency offset, rad/s.
    pub cfo: f64,
    /// Per-component noise spectral density sigma^2.
    pub noise_psd: f64,
}

impl BranchSpec {
    /// Unit channel, no CFO, unit noise density.
    pub fn new(pulse: PulseSpec, modulation: ModulationSpec, symbols: SymbolSequence) -> Self {
        BranchSpec {
            pulse,
            modulation,
            symbols,
            channel_amp: 1.0,
            channel_phase: 0.0,
            cfo: 0.0,
            noise_psd: 1.0,
        }
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    /// Observation window length `N * T_sym`.
    pub fn window(&self) -> f64 {
        self.n_symbols() as f64 * self.pulse.symbol_duration
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::from_polar(self.channel_amp, self.channel_phase)
    }

    pub fn gamma(&self) -> f64 {
        self.channel_amp * self.channel_amp / self.noise_psd
    }

    /// Checks the waveform side of the branch. Noise density is checked
    /// separately because noiseless synthesis is allowed.
    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.modulation.validate()?;
        if self.symbols.is_empty() {
            return Err(Error::InvalidBranch("branch has no symbols".into()));
        }
        if self.symbols.indices.len() != self.symbols.values.len() {
            return Err(Error::InvalidBranch(
                "symbol indices and values differ in length".into(),
            ));
        }
        if self.modulation.kind == ModulationKind::Fsk
            && self
                .symbols
                .indices
                .iter()
                .any(|&m| m >= self.modulation.order)
        {
            return Err(Error::InvalidBranch(
                "FSK tone index exceeds the modulation order".into(),
            ));
        }
        if !(self.channel_amp >= 0.0 && self.channel_amp.is_finite()) {
            return Err(Error::InvalidBranch(format!(
                "channel amplitude {} must be finite and non-negative",
                self.channel_amp
            )));
        }
        if !(self.channel_phase.is_finite() && self.cfo.is_finite()) {
            return Err(Error::InvalidBranch(
                "channel phase and CFO must be finite".into(),
            ));
        }
        if !(self.noise_psd >= 0.0 && self.noise_psd.is_finite()) {
            return Err(Error::InvalidBranch(format!(
                "noise density {} must be finite and non-negative",
                self.noise_psd
            )));
        }
        Ok(())
    }

    pub fn validate_noise(&self) -> Result<()> {
        if self.noise_psd > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidBranch(format!(
                "noise density must be positive, got {}",
                self.noise_psd
            )))
        }
    }

    /// Transmitted signal and its derivative at `u` seconds after the train start.
    fn waveform_at(&self, u: f64) -> (Complex64, Complex64) {
        let n = self.n_symbols();
        let ts = self.pulse.symbol_duration;
        if u < -SLOT_EPS * ts || u > (n as f64 + SLOT_EPS) * ts {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let slot = ((u / ts + SLOT_EPS).floor().max(0.0) as usize).min(n - 1);
        let local = (u - slot as f64 * ts).clamp(0.0, ts);
        let p = gaussian_doublet(&self.pulse, local);
        let dp = self.pulse.derivative(local);
        let d = self.symbols.values[slot];
        match self.modulation.kind {
            ModulationKind::Fsk => {
                let df = self.modulation.fsk_shift.unwrap_or(0.0);
                let w = 2.0 * PI * self.symbols.indices[slot] as f64 * df;
                let tone = d * Complex64::from_polar(1.0, w * local);
                (tone * p, tone * Complex64::new(dp, w * p))
            }
            _ => (d * p, d * dp),
        }
    }

    /// Samples of `s(t - tau)` on `t0, t0 + dt, ...` (`len` points) with no
    /// window check.
    pub(crate) fn render(&self, tau: f64, t0: f64, dt: f64, len: usize) -> SampledSignal {
        let (values, derivative) = (0..len)
            .map(|k| self.waveform_at(t0 + k as f64 * dt - tau))
            .unzip();
        SampledSignal {
            t0,
            dt,
            values,
            derivative: Some(derivative),
        }
    }
}

/// Uniformly sampled complex baseband waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Complex64>,
    pub derivative: Option<Vec<Complex64>>,
}

impl SampledSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }
}

/// Samples `s(t - tau)` and its analytic derivative on `[0, N * T_sym]`.
///
/// Fails if the delayed pulse train would not fit in the observation window.
pub fn sample_branch(b: &BranchSpec, tau: f64, dt: f64) -> Result<SampledSignal> {
    b.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "sampling step {dt} must be positive"
        )));
    }
    if dt > b.pulse.symbol_duration {
        return Err(Error::InvalidGrid(format!(
            "sampling step {dt:e} s exceeds the symbol duration"
        )));
    }
    check_window(b, tau, dt)?;
    Ok(b.render(tau, 0.0, dt, grid_len(b.window(), dt)))
}

/// Fails unless the pulse train delayed by `tau` lies inside `[0, N * T_sym]`.
/// With the window equal to the train length only `tau = 0` (within a
/// rounding slack of the grid step) passes.
pub fn check_window(b: &BranchSpec, tau: f64, dt: f64) -> Result<()> {
    let window = b.window();
    let slack = SLOT_EPS * dt;
    if !tau.is_finite() || tau < -slack || tau + window > window + slack {
        return Err(Error::WindowClipped { tau, window });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: f64 = 1e-9;

    fn pulse() -> PulseSpec {
        PulseSpec {
            amplitude: 1.0,
            zeta: 8.0 * NS,
            symbol_duration: 20.0 * NS,
            center: 10.0 * NS,
        }
    }

    #[test]
    fn doublet_peak_and_zero_crossing() {
        let p = pulse();
        assert_eq!(gaussian_doublet(&p, 10.0 * NS), 1.0);
        let zero = 10.0 * NS + p.zeta / (2.0 * PI.sqrt());
        assert!(gaussian_doublet(&p, zero).abs() < 1e-12);
    }

    #[test]
    fn doublet_vanishes_outside_slot() {
        let p = pulse();
        assert_eq!(gaussian_doublet(&p, -1e-15), 0.0);
        assert_eq!(gaussian_doublet(&p, 20.0 * NS + 1e-15), 0.0);
        assert_eq!(p.derivative(-1e-12), 0.0);
        assert!(gaussian_doublet(&p, 0.0) != 0.0);
    }

    #[test]
    fn centered_doublet_has_equal_edges() {
        let p = pulse();
        assert_eq!(gaussian_doublet(&p, 0.0), gaussian_doublet(&p, 20.0 * NS));
    }

    #[test]
    fn pulse_validation() {
        let mut p = pulse();
        p.center = 21.0 * NS;
        assert!(p.validate().is_err());
        p = pulse();
        p.zeta = 0.0;
        assert!(p.validate().is_err());
        assert!(PulseSpec::unit_energy(8.0 * NS, -1.0).is_err());
    }

    #[test]
    fn unit_energy_normalization() {
        let p = PulseSpec::unit_energy(8.0 * NS, 20.0 * NS).unwrap();
        assert!((pulse_energy(&p, p.zeta / 4096.0) - 1.0).abs() < 1e-12);
        assert_eq!(p.center, 10.0 * NS);
    }

    #[test]
    fn psk_symbols_are_unit_magnitude() {
        let m = ModulationSpec::new(ModulationKind::Psk, 16);
        let s = make_symbols(&m, 4, 7).unwrap();
        assert_eq!(s.len(), 4);
        for d in &s.values {
            assert!((d.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn qam_scale_is_inverse_sqrt_ten() {
        let m = ModulationSpec::new(ModulationKind::Qam, 16);
        let pts = m.constellation().unwrap();
        // raw corner point (-3, -3) is index 0
        let scale = pts[0].re / -3.0;
        assert!((scale - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        let mean = pts.iter().map(|z| z.norm_sqr()).sum::<f64>() / 16.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qam_rejects_non_square_order() {
        let m = ModulationSpec::new(ModulationKind::Qam, 8);
        assert!(matches!(
            make_symbols(&m, 4, 1),
            Err(Error::InvalidModulation(_))
        ));
    }

    #[test]
    fn fsk_requires_shift() {
        let mut m = ModulationSpec::new(ModulationKind::Fsk, 16);
        assert!(m.validate().is_err());
        m.fsk_shift = Some(23.75e6);
        assert!(m.validate().is_ok());
        let s = make_symbols(&m, 8, 3).unwrap();
        assert!(s.indices.iter().all(|&i| i < 16));
        assert!(s.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn zero_symbols_rejected() {
        let m = ModulationSpec::new(ModulationKind::Psk, 4);
        assert!(make_symbols(&m, 0, 1).is_err());
    }

    #[test]
    fn modulation_labels_round_trip() {
        for label in ["16PSK", "16QAM", "16FSK", "4PAM"] {
            let m: ModulationSpec = label.parse().unwrap();
            assert_eq!(m.to_string(), label);
        }
        assert!("PSK".parse::<ModulationSpec>().is_err());
        assert!("16XYZ".parse::<ModulationSpec>().is_err());
    }

    #[test]
    fn constellation_energy_matches_target() {
        for kind in [
            ModulationKind::Pam,
            ModulationKind::Psk,
            ModulationKind::Qam,
        ] {
            for order in [4usize, 16, 64] {
                let mut m = ModulationSpec::new(kind, order);
                m.mean_energy = 2.5;
                let pts = m.constellation().unwrap();
                let mean = pts.iter().map(|z| z.norm_sqr()).sum::<f64>() / order as f64;
                assert!((mean / 2.5 - 1.0).abs() < 1e-12, "{kind:?} {order}");
            }
        }
    }

    fn branch(m: ModulationSpec, n: usize) -> BranchSpec {
        let p = PulseSpec::unit_energy(8.0 * NS, 20.0 * NS).unwrap();
        let syms = make_symbols(&m, n, 11).unwrap();
        BranchSpec::new(p, m, syms)
    }

    #[test]
    fn sample_branch_grid_covers_window() {
        let b = branch(ModulationSpec::new(ModulationKind::Psk, 16), 2);
        let s = sample_branch(&b, 0.0, 0.025 * NS).unwrap();
        assert_eq!(s.len(), 1601);
        assert!((s.time(s.len() - 1) - 40.0 * NS).abs() < 1e-18);
        assert_eq!(s.derivative.as_ref().unwrap().len(), s.len());
    }

    #[test]
    fn sample_branch_rejects_clipping_delay() {
        let b = branch(ModulationSpec::new(ModulationKind::Psk, 16), 2);
        assert!(matches!(
            sample_branch(&b, 1.0 * NS, 0.025 * NS),
            Err(Error::WindowClipped { .. })
        ));
        assert!(sample_branch(&b, -NS, 0.025 * NS).is_err());
        assert!(sample_branch(&b, 0.0, 0.0).is_err());
    }

    #[test]
    fn fsk_tone_zero_is_the_bare_pulse() {
        let m = ModulationSpec::fsk(16, 23.75e6);
        let mut b = branch(m, 1);
        b.symbols = SymbolSequence {
            indices: vec![0],
            values: vec![Complex64::new(1.0, 0.0)],
        };
        let s = sample_branch(&b, 0.0, 0.025 * NS).unwrap();
        let ts = b.pulse.symbol_duration;
        for (k, v) in s.values.iter().enumerate() {
            let expect = gaussian_doublet(&b.pulse, s.time(k).min(ts));
            assert_eq!(v.im, 0.0);
            assert!((v.re - expect).abs() <= 1e-12 * b.pulse.amplitude, "{k}");
        }
    }

    #[test]
    fn slot_boundary_sample_belongs_to_later_symbol() {
        let m = ModulationSpec::new(ModulationKind::Psk, 16);
        let mut b = branch(m, 2);
        b.symbols.values = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let dt = 0.025 * NS;
        let s = sample_branch(&b, 0.0, dt).unwrap();
        let edge = gaussian_doublet(&b.pulse, 0.0);
        let close = |v: f64, want: f64| (v - want).abs() <= 1e-9 * edge.abs();
        assert!(close(s.values[800].re, -edge));
        assert!(close(s.values[1600].re, -edge));
        assert_eq!(s.values[0].re, edge);
    }
}
