//! Fisher information assembly and the three delay bounds.
//!
//! Parameter order in the Fisher matrix is
//! `[tau, a_1..a_K, phi_1..phi_K, w_1..w_K]`. Entries are kept in raw SI units:
//! the `tau` row is in s^-2 scaled by energy, `a` is dimensionless, `phi` in
//! radians and `w` in rad/s, so blocks span many orders of magnitude.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functionals::{compute_functionals, FunctionalSet};
use crate::linalg::{self, PivotedLdl, MAX_CONDITION};
use crate::signal::{gaussian_doublet, pulse_energy, sample_branch, BranchSpec, SampledSignal};

/// `E*F - F_hat^2` must exceed this fraction of `E*F`.
pub const GEOMETRY_TOL: f64 = 1e-12;
/// Relative slack for the sample-level constant-envelope test.
pub const ENVELOPE_TOL: f64 = 1e-9;
/// `|p(0) - p(T_sym)|` must stay below this fraction of the pulse peak.
pub const EDGE_TOL: f64 = 1e-6;

/// Channel gain and noise level of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelWeights {
    pub amp: f64,
    pub noise_psd: f64,
}

impl ChannelWeights {
    pub fn gamma(&self) -> f64 {
        self.amp * self.amp / self.noise_psd
    }
}

impl From<&BranchSpec> for ChannelWeights {
    fn from(b: &BranchSpec) -> Self {
        ChannelWeights {
            amp: b.channel_amp,
            noise_psd: b.noise_psd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    branches: usize,
    matrix: DMatrix<f64>,
}

impl FisherInfo {
    /// Wraps an externally built matrix of size `3K + 1`.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() || n < 4 || !(n - 1).is_multiple_of(3) {
            return Err(Error::InvalidGrid(format!(
                "Fisher matrix must be (3K+1)x(3K+1), got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        Ok(FisherInfo {
            branches: (n - 1) / 3,
            matrix,
        })
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn dim(&self) -> usize {
        3 * self.branches + 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn amp_index(&self, i: usize) -> usize {
        1 + i
    }

    pub fn phase_index(&self, i: usize) -> usize {
        1 + self.branches + i
    }

    pub fn cfo_index(&self, i: usize) -> usize {
        1 + 2 * self.branches + i
    }

    /// Symmetry, positive semidefiniteness (on the equilibrated matrix) and the
    /// structural zeros of the amplitude row/column blocks.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let m = &self.matrix;
        let n = self.dim();
        for i in 0..n {
            for j in 0..i {
                let scale = (m[(i, i)].abs() * m[(j, j)].abs()).sqrt();
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(format!("asymmetric at ({i}, {j})"));
                }
            }
        }
        for i in 0..self.branches {
            for j in 0..self.branches {
                let a = self.amp_index(i);
                for other in [self.phase_index(j), self.cfo_index(j)] {
                    if m[(a, other)] != 0.0 || m[(other, a)] != 0.0 {
                        return Err(format!("amplitude block not zero at ({a}, {other})"));
                    }
                }
                if i != j {
                    let pairs = [
                        (self.amp_index(i), self.amp_index(j)),
                        (self.phase_index(i), self.phase_index(j)),
                        (self.cfo_index(i), self.cfo_index(j)),
                        (self.phase_index(i), self.cfo_index(j)),
                    ];
                    if pairs.iter().any(|&(r, c)| m[(r, c)] != 0.0) {
                        return Err(format!("cross-branch coupling between {i} and {j}"));
                    }
                }
            }
        }
        match linalg::equilibrated_spectrum(m) {
            Some((min, max)) if min >= -1e-9 * max => Ok(()),
            Some((min, max)) => Err(format!("not PSD: eigenvalues {min:e} .. {max:e}")),
            None => Err("non-positive diagonal entry".into()),
        }
    }
}

/// Builds the `(3K+1)x(3K+1)` Fisher matrix from per-branch functionals.
pub fn assemble_fim(fs: &[FunctionalSet], channels: &[ChannelWeights]) -> Result<FisherInfo> {
    if fs.is_empty() || fs.len() != channels.len() {
        return Err(Error::InvalidBranch(format!(
            "need matching non-empty functional and channel lists, got {} and {}",
            fs.len(),
            channels.len()
        )));
    }
    let k = fs.len();
    let mut m = DMatrix::zeros(3 * k + 1, 3 * k + 1);
    let (a0, p0, w0) = (1, 1 + k, 1 + 2 * k);
    for (i, (f, ch)) in fs.iter().zip(channels).enumerate() {
        let gamma = ch.gamma();
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::NonPositiveGamma { branch: i, gamma });
        }
        m[(0, 0)] += gamma * f.deriv_energy;
        m[(a0 + i, a0 + i)] = f.energy / ch.noise_psd;
        m[(p0 + i, p0 + i)] = f.energy * gamma;
        m[(w0 + i, w0 + i)] = f.f_moment * gamma;
        m[(p0 + i, w0 + i)] = f.f_hat * gamma;
        m[(w0 + i, p0 + i)] = f.f_hat * gamma;

        let tau_a = -f.e_hat_r * ch.amp / ch.noise_psd;
        let tau_p = -f.e_hat_i * gamma;
        let tau_w = -f.g_moment * gamma;
        for (col, v) in [(a0 + i, tau_a), (p0 + i, tau_p), (w0 + i, tau_w)] {
            m[(0, col)] = v;
            m[(col, 0)] = v;
        }
    }
    Ok(FisherInfo {
        branches: k,
        matrix: m,
    })
}

fn check_gammas(fs: &[FunctionalSet], gammas: &[f64]) -> Result<()> {
    if fs.is_empty() || fs.len() != gammas.len() {
        return Err(Error::InvalidBranch(format!(
            "need matching non-empty functional and weight lists, got {} and {}",
            fs.len(),
            gammas.len()
        )));
    }
    if let Some((branch, &gamma)) = gammas
        .iter()
        .enumerate()
        .find(|(_, g)| !(**g >= 0.0 && g.is_finite()))
    {
        return Err(Error::NonPositiveGamma { branch, gamma });
    }
    if gammas.iter().all(|&g| g == 0.0) {
        return Err(Error::NonPositiveGamma {
            branch: 0,
            gamma: 0.0,
        });
    }
    Ok(())
}

fn invert_information(info: f64) -> Result<f64> {
    if info > 0.0 && info.is_finite() {
        Ok(1.0 / info)
    } else {
        Err(Error::NonPositiveInformation(info))
    }
}

/// CFO-coupling penalty: the information about `tau` lost to the unknown
/// phases and frequency offsets beyond what the phases alone remove.
pub fn xi(fs: &[FunctionalSet], gammas: &[f64]) -> Result<f64> {
    check_gammas(fs, gammas)?;
    let mut total = 0.0;
    for (branch, (f, &g)) in fs.iter().zip(gammas).enumerate() {
        let gap = f.moment_gap();
        if !(gap > GEOMETRY_TOL * f.energy * f.f_moment) {
            return Err(Error::SingularGeometry { branch, gap });
        }
        let num = f.e_hat_i * f.e_hat_i * f.f_moment + f.energy * f.g_moment * f.g_moment
            - 2.0 * f.e_hat_i * f.g_moment * f.f_hat;
        total += g * num / gap;
    }
    Ok(total)
}

/// Bound with delay, amplitudes, phases and CFOs all unknown, via the closed form.
pub fn crlb1_closed(fs: &[FunctionalSet], gammas: &[f64]) -> Result<f64> {
    let penalty = xi(fs, gammas)?;
    let info: f64 = fs
        .iter()
        .zip(gammas)
        .map(|(f, g)| g * (f.deriv_energy - f.e_hat_r * f.e_hat_r / f.energy))
        .sum();
    invert_information(info - penalty)
}

/// `[I^-1]_00` by factoring the full matrix and solving for its first column.
/// Returns the bound and the equilibrated condition estimate.
pub fn crlb1_via_inverse(fim: &FisherInfo) -> Result<(f64, f64)> {
    let condition = linalg::condition_estimate(fim.matrix());
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularFim { condition });
    }
    let mut e0 = DVector::zeros(fim.dim());
    e0[0] = 1.0;
    let col = PivotedLdl::factor(fim.matrix())
        .map_err(|_| Error::SingularFim { condition })?
        .solve(&e0);
    let bound = col[0];
    if bound > 0.0 && bound.is_finite() {
        Ok((bound, condition))
    } else {
        Err(Error::SingularFim { condition })
    }
}

/// Bound with CFOs known, amplitudes and phases unknown.
pub fn crlb2(fs: &[FunctionalSet], gammas: &[f64]) -> Result<f64> {
    check_gammas(fs, gammas)?;
    for (branch, f) in fs.iter().enumerate() {
        let gap = f.moment_gap();
        if !(gap > GEOMETRY_TOL * f.energy * f.f_moment) {
            return Err(Error::SingularGeometry { branch, gap });
        }
    }
    let info: f64 = fs
        .iter()
        .zip(gammas)
        .map(|(f, g)| {
            let e_hat = f.e_hat();
            g * (f.deriv_energy - e_hat * e_hat / f.energy)
        })
        .sum();
    invert_information(info)
}

/// Bound with only the delay unknown.
pub fn crlb3(fs: &[FunctionalSet], gammas: &[f64]) -> Result<f64> {
    check_gammas(fs, gammas)?;
    invert_information(fs.iter().zip(gammas).map(|(f, g)| g * f.deriv_energy).sum())
}

/// `1 / (4 pi^2 sum SNR_i beta_i^2)`, valid for constant-envelope linear
/// modulation with `p(0) = p(T_sym)`.
pub fn crlb_constant_envelope(snrs: &[f64], betas: &[f64]) -> Result<f64> {
    if snrs.is_empty() || snrs.len() != betas.len() {
        return Err(Error::InvalidBranch(format!(
            "need matching non-empty SNR and bandwidth lists, got {} and {}",
            snrs.len(),
            betas.len()
        )));
    }
    if snrs
        .iter()
        .chain(betas)
        .any(|&v| !(v > 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidBranch(
            "SNRs and bandwidths must be positive".into(),
        ));
    }
    let sum: f64 = snrs.iter().zip(betas).map(|(s, b)| s * b * b).sum();
    Ok(1.0 / (4.0 * PI * PI * sum))
}

/// Preconditions of the constant-envelope closed form, checked on samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeCheck {
    /// `s' s*` is real at every sample.
    pub linear: bool,
    /// `|s| / |p|` is the same at every sample where the pulse is significant.
    pub constant_envelope: bool,
    /// `p(0) = p(T_sym)` within [`EDGE_TOL`] of the peak.
    pub equal_edges: bool,
    /// Mean `|d_l|^2` of the symbols.
    pub symbol_energy: f64,
    /// `int p^2` on the analysis grid.
    pub pulse_energy: f64,
}

impl EnvelopeCheck {
    pub fn closed_form_applies(&self) -> bool {
        self.linear && self.constant_envelope && self.equal_edges
    }

    fn inspect(b: &BranchSpec, sig: &SampledSignal, tau: f64) -> Self {
        let deriv = sig.derivative.as_deref().unwrap_or(&[]);
        let scale = sig
            .values
            .iter()
            .zip(deriv)
            .map(|(s, d)| s.norm() * d.norm())
            .fold(0.0, f64::max);
        let linear = !deriv.is_empty()
            && sig
                .values
                .iter()
                .zip(deriv)
                .all(|(s, d)| (d * s.conj()).im.abs() <= ENVELOPE_TOL * scale);

        let p = &b.pulse;
        let ts = p.symbol_duration;
        let peak = gaussian_doublet(p, p.center).abs();
        let mut ratios = sig.times().zip(&sig.values).filter_map(|(t, s)| {
            let u = t - tau;
            let slot = ((u / ts + 1e-9).floor().max(0.0) as usize).min(b.n_symbols() - 1);
            let pv = gaussian_doublet(p, (u - slot as f64 * ts).clamp(0.0, ts)).abs();
            (pv > 1e-3 * peak).then(|| s.norm() / pv)
        });
        let constant_envelope = match ratios.next() {
            Some(first) => ratios.all(|r| (r - first).abs() <= ENVELOPE_TOL * first),
            None => false,
        };
        let equal_edges =
            (gaussian_doublet(p, 0.0) - gaussian_doublet(p, ts)).abs() <= EDGE_TOL * peak;

        EnvelopeCheck {
            linear,
            constant_envelope,
            equal_edges,
            symbol_energy: b.symbols.mean_energy(),
            pulse_energy: pulse_energy(p, sig.dt),
        }
    }
}

/// Everything the bounds need from one branch's waveform; independent of the
/// channel and noise, so it can be reused across SNR points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAnalysis {
    pub functionals: FunctionalSet,
    pub n_symbols: usize,
    pub envelope: EnvelopeCheck,
}

impl BranchAnalysis {
    /// Per-branch SNR in the constant-envelope form, `N |d|^2 gamma E_p`.
    pub fn closed_form_snr(&self, gamma: f64) -> f64 {
        self.n_symbols as f64 * self.envelope.symbol_energy * gamma * self.envelope.pulse_energy
    }
}

pub fn analyze_branch(b: &BranchSpec, tau: f64, dt: f64) -> Result<BranchAnalysis> {
    let sig = sample_branch(b, tau, dt)?;
    let functionals = compute_functionals(&sig)?;
    Ok(BranchAnalysis {
        functionals,
        n_symbols: b.n_symbols(),
        envelope: EnvelopeCheck::inspect(b, &sig, tau),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbReport {
    /// Delay, channel and CFO unknown (closed form), s^2.
    pub crlb1: f64,
    /// CFO known, s^2.
    pub crlb2: f64,
    /// Only delay unknown, s^2.
    pub crlb3: f64,
    /// `[I^-1]_00` of the full Fisher matrix, s^2.
    pub crlb1_via_inverse: f64,
    /// CFO-coupling penalty, s^-2.
    pub xi: f64,
    /// Constant-envelope closed form, present only when every branch passes
    /// its sample-level preconditions.
    pub constant_envelope_bound: Option<f64>,
    /// Equilibrated condition estimate of the Fisher matrix.
    pub condition: f64,
}

impl CrlbReport {
    /// `crlb3 <= crlb2 <= crlb1` with relative slack.
    pub fn ordered(&self, slack: f64) -> bool {
        self.crlb3 <= self.crlb2 * (1.0 + slack) && self.crlb2 <= self.crlb1 * (1.0 + slack)
    }

    /// Relative gap between the closed form and the matrix inverse.
    pub fn inverse_mismatch(&self) -> f64 {
        (self.crlb1 - self.crlb1_via_inverse).abs() / self.crlb1
    }
}

pub fn crlb_report(branches: &[BranchAnalysis], channels: &[ChannelWeights]) -> Result<CrlbReport> {
    let fs: Vec<FunctionalSet> = branches.iter().map(|b| b.functionals).collect();
    let fim = assemble_fim(&fs, channels)?;
    let gammas: Vec<f64> = channels.iter().map(ChannelWeights::gamma).collect();
    let (crlb1_via_inverse, condition) = crlb1_via_inverse(&fim)?;

    let constant_envelope_bound = if branches.iter().all(|b| b.envelope.closed_form_applies()) {
        let snrs: Vec<f64> = branches
            .iter()
            .zip(&gammas)
            .map(|(b, &g)| b.closed_form_snr(g))
            .collect();
        let betas: Vec<f64> = fs.iter().map(|f| f.eff_bandwidth).collect();
        Some(crlb_constant_envelope(&snrs, &betas)?)
    } else {
        None
    };

    Ok(CrlbReport {
        crlb1: crlb1_closed(&fs, &gammas)?,
        crlb2: crlb2(&fs, &gammas)?,
        crlb3: crlb3(&fs, &gammas)?,
        crlb1_via_inverse,
        xi: xi(&fs, &gammas)?,
        constant_envelope_bound,
        condition,
    })
}

/// Samples, integrates and bounds a set of branches in one go.
pub fn evaluate(branches: &[BranchSpec], tau: f64, dt: f64) -> Result<CrlbReport> {
    let analyses = branches
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.validate_noise().map_err(|e| e.in_branch(i))?;
            analyze_branch(b, tau, dt).map_err(|e| e.in_branch(i))
        })
        .collect::<Result<Vec<_>>>()?;
    let channels: Vec<ChannelWeights> = branches.iter().map(ChannelWeights::from).collect();
    crlb_report(&analyses, &channels)
}
