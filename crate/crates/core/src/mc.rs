//! Monte Carlo check of delay-estimator efficiency.
//!
//! Each branch is received as `r(t) = alpha e^{-j w t} s(t - tau) + n(t)` with
//! white complex Gaussian noise of per-component spectral density `sigma^2`.
//! On a grid of step `dt` that is per-sample per-component variance
//! `sigma^2 / dt`, so that `dt * sum |.|^2` approximates the continuous
//! log-likelihood and the bounds in [`crate::crlb`] apply unchanged.
//!
//! The estimators maximize the log-likelihood over a delay grid at three
//! knowledge levels, concentrating out whatever is unknown:
//!
//! - [`KnowledgeLevel::Full`]: `alpha` and `w` known,
//! - [`KnowledgeLevel::CfoKnown`]: `w` known, `alpha` unknown,
//! - [`KnowledgeLevel::None`]: both unknown, `w` searched on a grid.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::crlb::evaluate;
use crate::error::{Error, Result};
use crate::signal::{sample_branch, BranchSpec, SampledSignal};

/// Largest fraction of trials allowed to peak on the delay-grid boundary.
pub const MAX_BOUNDARY_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KnowledgeLevel {
    Full,
    CfoKnown,
    None,
}

impl KnowledgeLevel {
    pub const ALL: [KnowledgeLevel; 3] = [
        KnowledgeLevel::Full,
        KnowledgeLevel::CfoKnown,
        KnowledgeLevel::None,
    ];

    pub fn label(self) -> &'static str {
        match self {
            KnowledgeLevel::Full => "full",
            KnowledgeLevel::CfoKnown => "cfo_known",
            KnowledgeLevel::None => "none",
        }
    }
}

impl fmt::Display for KnowledgeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for KnowledgeLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KnowledgeLevel::ALL
            .into_iter()
            .find(|l| l.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown knowledge level `{s}`")))
    }
}

/// Delay grid (and CFO grid for [`KnowledgeLevel::None`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchGrid {
    pub tau_min: f64,
    pub tau_max: f64,
    /// Must be an integer multiple of the sampling step.
    pub tau_step: f64,
    /// CFO search covers `[-omega_max, omega_max]`, rad/s.
    pub omega_max: f64,
    pub omega_step: f64,
}

impl SearchGrid {
    /// Delay grid `tau_true +- half_width` at the sampling step, no CFO search.
    pub fn around(tau_true: f64, half_width: f64, dt: f64) -> Self {
        SearchGrid {
            tau_min: tau_true - half_width,
            tau_max: tau_true + half_width,
            tau_step: dt,
            omega_max: 0.0,
            omega_step: 0.0,
        }
    }

    /// CFO step giving under 0.1% correlation loss at half a step for a
    /// window of length `window`.
    pub fn default_omega_step(window: f64) -> f64 {
        0.2 / window
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub branches: Vec<BranchSpec>,
    pub tau_true: f64,
    pub dt: f64,
    pub level: KnowledgeLevel,
    pub n_trials: usize,
    pub seed: u64,
    pub grid: SearchGrid,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::Config("at least one branch is required".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        for (i, b) in self.branches.iter().enumerate() {
            b.validate().map_err(|e| e.in_branch(i))?;
        }
        let g = &self.grid;
        if !(g.tau_step > 0.0 && g.tau_min < g.tau_max) {
            return Err(Error::InvalidGrid("delay grid is empty".into()));
        }
        if !(g.tau_min <= self.tau_true && self.tau_true <= g.tau_max) {
            return Err(Error::InvalidGrid(format!(
                "delay range [{:e}, {:e}] does not contain the true delay {:e}",
                g.tau_min, g.tau_max, self.tau_true
            )));
        }
        if self.level == KnowledgeLevel::None {
            if !(g.omega_step > 0.0 && g.omega_max >= 0.0) {
                return Err(Error::InvalidGrid("CFO grid is empty".into()));
            }
            if let Some(i) = self.branches.iter().position(|b| b.cfo.abs() > g.omega_max) {
                return Err(Error::InvalidGrid(format!(
                    "branch {i} CFO {:e} rad/s lies outside the CFO search range",
                    self.branches[i].cfo
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub tau: f64,
    /// The coarse maximum sat on the first or last grid point.
    pub boundary_hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub level: KnowledgeLevel,
    pub tau_true: f64,
    pub rmse: f64,
    pub bias: f64,
    pub estimates: Vec<f64>,
    pub boundary_hits: usize,
    /// Matching bound (s^2); absent for noiseless runs.
    pub crlb: Option<f64>,
    /// `rmse / sqrt(crlb)`.
    pub ratio: Option<f64>,
}

impl TrialReport {
    /// Percentile bootstrap interval for the RMSE.
    pub fn rmse_interval(&self, resamples: usize, confidence: f64, seed: u64) -> (f64, f64) {
        let errors: Vec<f64> = self.estimates.iter().map(|e| e - self.tau_true).collect();
        let n = errors.len();
        if n == 0 || resamples == 0 {
            return (self.rmse, self.rmse);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stats: Vec<f64> = (0..resamples)
            .map(|_| {
                let ss: f64 = (0..n)
                    .map(|_| errors[((rng.next_u64() as u128 * n as u128) >> 64) as usize].powi(2))
                    .sum();
                (ss / n as f64).sqrt()
            })
            .collect();
        stats.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - confidence);
        let pick =
            |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
        (pick(tail), pick(1.0 - tail))
    }
}

fn add_noise<R: Rng + ?Sized>(
    clean: &[Complex64],
    noise_psd: f64,
    dt: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    if noise_psd == 0.0 {
        return clean.to_vec();
    }
    let sd = (noise_psd / dt).sqrt();
    clean
        .iter()
        .map(|&x| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            x + Complex64::new(re, im) * sd
        })
        .collect()
}

/// `alpha e^{-j w t} s(t - tau)` on the branch grid, without noise.
fn channel_output(b: &BranchSpec, tau: f64, dt: f64) -> Result<Vec<Complex64>> {
    let s = sample_branch(b, tau, dt)?;
    let alpha = b.alpha();
    Ok(s.times()
        .zip(&s.values)
        .map(|(t, &v)| alpha * Complex64::from_polar(1.0, -b.cfo * t) * v)
        .collect())
}

/// One noisy reception of a branch. A zero noise density yields the clean
/// channel output.
pub fn synthesize_received<R: Rng + ?Sized>(
    b: &BranchSpec,
    tau: f64,
    dt: f64,
    rng: &mut R,
) -> Result<SampledSignal> {
    let clean = channel_output(b, tau, dt)?;
    Ok(SampledSignal {
        t0: 0.0,
        dt,
        values: add_noise(&clean, b.noise_psd, dt, rng),
        derivative: None,
    })
}

/// Branch template and the bookkeeping needed to correlate it at integer lags.
#[derive(Debug, Clone)]
struct Template {
    values: Vec<Complex64>,
    /// `cum[n] = sum_{m < n} |s[m]|^2`
    cum: Vec<f64>,
}

impl Template {
    fn new(values: Vec<Complex64>) -> Self {
        let mut cum = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        cum.push(acc);
        for v in &values {
            acc += v.norm_sqr();
            cum.push(acc);
        }
        Template { values, cum }
    }

    /// Template indices overlapping the window when delayed by `lag` samples.
    fn overlap(&self, lag: isize) -> (usize, usize) {
        let len = self.values.len() as isize;
        let lo = (-lag).clamp(0, len);
        let hi = (len - lag).clamp(0, len);
        (lo as usize, hi.max(lo) as usize)
    }

    /// `sum_m y[m + lag] conj(s[m])`, unscaled.
    fn correlate(&self, y: &[Complex64], lag: isize) -> Complex64 {
        let (lo, hi) = self.overlap(lag);
        let start = (lo as isize + lag) as usize;
        y[start..start + (hi - lo)]
            .iter()
            .zip(&self.values[lo..hi])
            .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b.conj())
    }

    fn energy(&self, lag: isize) -> f64 {
        let (lo, hi) = self.overlap(lag);
        self.cum[hi] - self.cum[lo]
    }
}

/// Maximum-likelihood delay estimator with precomputed templates.
#[derive(Debug, Clone)]
pub struct MlEstimator {
    level: KnowledgeLevel,
    dt: f64,
    len: usize,
    taus: Vec<f64>,
    lags: Vec<isize>,
    /// Distinct templates; `group[i]` indexes the one used by branch `i`.
    templates: Vec<Template>,
    group: Vec<usize>,
    alphas: Vec<Complex64>,
    weights: Vec<f64>,
    /// `e^{+j w_i t}` per branch.
    derotors: Vec<Vec<Complex64>>,
    /// `e^{+j w t}` per CFO grid point.
    omega_bank: Vec<Vec<Complex64>>,
}

impl MlEstimator {
    pub fn new(cfg: &TrialConfig) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.dt;
        let g = &cfg.grid;
        let count = ((g.tau_max - g.tau_min) / g.tau_step + 1e-9).floor() as usize + 1;
        if count < 3 {
            return Err(Error::InvalidGrid(
                "delay grid needs at least three points".into(),
            ));
        }
        let taus: Vec<f64> = (0..count)
            .map(|j| g.tau_min + j as f64 * g.tau_step)
            .collect();
        let lags = taus
            .iter()
            .map(|&tau| {
                let k = (tau / dt).round();
                if (tau - k * dt).abs() > 1e-6 * dt {
                    Err(Error::InvalidGrid(format!(
                        "delay grid point {tau:e} s is not a multiple of the sampling step"
                    )))
                } else {
                    Ok(k as isize)
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let mut templates: Vec<Template> = Vec::new();
        let mut group = Vec::with_capacity(cfg.branches.len());
        let mut len = None;
        for (i, b) in cfg.branches.iter().enumerate() {
            let s = sample_branch(b, 0.0, dt).map_err(|e| e.in_branch(i))?;
            if *len.get_or_insert(s.len()) != s.len() {
                return Err(Error::InvalidGrid(
                    "branches must share one observation grid".into(),
                ));
            }
            match templates.iter().position(|t| t.values == s.values) {
                Some(idx) => group.push(idx),
                None => {
                    group.push(templates.len());
                    templates.push(Template::new(s.values));
                }
            }
        }
        let len = len.unwrap_or(0);
        let times: Vec<f64> = (0..len).map(|k| k as f64 * dt).collect();
        let rotor = |w: f64| -> Vec<Complex64> {
            times
                .iter()
                .map(|&t| Complex64::from_polar(1.0, w * t))
                .collect()
        };

        let omega_bank = if cfg.level == KnowledgeLevel::None {
            let steps = (g.omega_max / g.omega_step + 1e-9).floor() as i64;
            (-steps..=steps)
                .map(|k| rotor(k as f64 * g.omega_step))
                .collect()
        } else {
            Vec::new()
        };

        Ok(MlEstimator {
            level: cfg.level,
            dt,
            len,
            taus,
            lags,
            templates,
            group,
            alphas: cfg.branches.iter().map(BranchSpec::alpha).collect(),
            weights: cfg
                .branches
                .iter()
                .map(|b| {
                    if b.noise_psd > 0.0 {
                        1.0 / b.noise_psd
                    } else {
                        1.0
                    }
                })
                .collect(),
            derotors: cfg.branches.iter().map(|b| rotor(b.cfo)).collect(),
            omega_bank,
        })
    }

    pub fn delay_grid(&self) -> &[f64] {
        &self.taus
    }

    fn metric_full(&self, received: &[&[Complex64]]) -> Vec<f64> {
        let mut combined = vec![vec![Complex64::new(0.0, 0.0); self.len]; self.templates.len()];
        let mut energy_coef = vec![0.0; self.templates.len()];
        for (i, r) in received.iter().enumerate() {
            let g = self.group[i];
            let c = self.alphas[i].conj() * self.weights[i];
            for ((acc, x), rot) in combined[g].iter_mut().zip(*r).zip(&self.derotors[i]) {
                *acc += c * x * rot;
            }
            energy_coef[g] += 0.5 * self.weights[i] * self.alphas[i].norm_sqr();
        }
        self.lags
            .iter()
            .map(|&lag| {
                self.templates
                    .iter()
                    .zip(&combined)
                    .zip(&energy_coef)
                    .map(|((t, y), e)| self.dt * (t.correlate(y, lag).re - e * t.energy(lag)))
                    .sum()
            })
            .collect()
    }

    fn metric_cfo_known(&self, received: &[&[Complex64]]) -> Vec<f64> {
        let mut metric = vec![0.0; self.lags.len()];
        for (i, r) in received.iter().enumerate() {
            let t = &self.templates[self.group[i]];
            let z: Vec<Complex64> = r
                .iter()
                .zip(&self.derotors[i])
                .map(|(x, w)| x * w)
                .collect();
            for (m, &lag) in metric.iter_mut().zip(&self.lags) {
                let e = t.energy(lag);
                if e > 0.0 {
                    *m += self.weights[i] * self.dt * t.correlate(&z, lag).norm_sqr() / e;
                }
            }
        }
        metric
    }

    fn metric_blind(&self, received: &[&[Complex64]]) -> Vec<f64> {
        let mut metric = vec![0.0; self.lags.len()];
        for (i, r) in received.iter().enumerate() {
            let t = &self.templates[self.group[i]];
            let rotated: Vec<Vec<Complex64>> = self
                .omega_bank
                .iter()
                .map(|rot| r.iter().zip(rot).map(|(x, w)| x * w).collect())
                .collect();
            for (m, &lag) in metric.iter_mut().zip(&self.lags) {
                let e = t.energy(lag);
                if e <= 0.0 {
                    continue;
                }
                let powers: Vec<f64> = rotated
                    .iter()
                    .map(|z| t.correlate(z, lag).norm_sqr())
                    .collect();
                *m += self.weights[i] * self.dt * refined_peak(&powers) / e;
            }
        }
        metric
    }

    pub fn estimate(&self, received: &[SampledSignal]) -> Result<Estimate> {
        if received.len() != self.group.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} received branches, got {}",
                self.group.len(),
                received.len()
            )));
        }
        if received
            .iter()
            .any(|r| r.len() != self.len || (r.dt - self.dt).abs() > 1e-9 * self.dt || r.t0 != 0.0)
        {
            return Err(Error::InvalidGrid(
                "received signals do not share the template grid".into(),
            ));
        }
        let slices: Vec<&[Complex64]> = received.iter().map(|r| r.values.as_slice()).collect();
        Ok(self.estimate_slices(&slices))
    }

    fn estimate_slices(&self, received: &[&[Complex64]]) -> Estimate {
        let metric = match self.level {
            KnowledgeLevel::Full => self.metric_full(received),
            KnowledgeLevel::CfoKnown => self.metric_cfo_known(received),
            KnowledgeLevel::None => self.metric_blind(received),
        };
        let best = (0..metric.len())
            .max_by(|&a, &b| metric[a].total_cmp(&metric[b]))
            .unwrap_or(0);
        let last = metric.len() - 1;
        if best == 0 || best == last {
            return Estimate {
                tau: self.taus[best],
                boundary_hit: true,
            };
        }
        let step = self.taus[1] - self.taus[0];
        let offset = parabolic_offset(metric[best - 1], metric[best], metric[best + 1]);
        Estimate {
            tau: self.taus[best] + offset * step,
            boundary_hit: false,
        }
    }
}

/// Vertex of the parabola through three equally spaced points, in units of
/// the spacing relative to the middle point, clamped to half a step.
fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let curvature = left - 2.0 * mid + right;
    if curvature < 0.0 {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Grid maximum refined by a parabola through its neighbours.
fn refined_peak(values: &[f64]) -> f64 {
    let best = (0..values.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    if best == 0 || best + 1 == values.len() {
        return values[best];
    }
    let (l, m, r) = (values[best - 1], values[best], values[best + 1]);
    let x = parabolic_offset(l, m, r);
    m + 0.25 * (r - l) * x
}

/// Single delay estimate from one set of received branches.
pub fn ml_estimate(received: &[SampledSignal], cfg: &TrialConfig) -> Result<Estimate> {
    MlEstimator::new(cfg)?.estimate(received)
}

/// Independent noise per trial, seeded by `(seed, trial index)` through the
/// ChaCha stream number; results do not depend on evaluation order.
pub fn run_trials(cfg: &TrialConfig) -> Result<TrialReport> {
    let estimator = MlEstimator::new(cfg)?;
    let clean = cfg
        .branches
        .iter()
        .enumerate()
        .map(|(i, b)| channel_output(b, cfg.tau_true, cfg.dt).map_err(|e| e.in_branch(i)))
        .collect::<Result<Vec<_>>>()?;

    let mut estimates = Vec::with_capacity(cfg.n_trials);
    let mut boundary_hits = 0;
    for trial in 0..cfg.n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(trial as u64);
        let received: Vec<Vec<Complex64>> = cfg
            .branches
            .iter()
            .zip(&clean)
            .map(|(b, c)| add_noise(c, b.noise_psd, cfg.dt, &mut rng))
            .collect();
        let slices: Vec<&[Complex64]> = received.iter().map(Vec::as_slice).collect();
        let est = estimator.estimate_slices(&slices);
        boundary_hits += usize::from(est.boundary_hit);
        estimates.push(est.tau);
    }
    if boundary_hits as f64 > MAX_BOUNDARY_FRACTION * cfg.n_trials as f64 {
        return Err(Error::BoundaryHits {
            hits: boundary_hits,
            trials: cfg.n_trials,
        });
    }

    let n = estimates.len() as f64;
    let bias = estimates.iter().map(|e| e - cfg.tau_true).sum::<f64>() / n;
    let rmse = (estimates
        .iter()
        .map(|e| (e - cfg.tau_true).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();

    let crlb = if cfg.branches.iter().all(|b| b.noise_psd > 0.0) {
        let report = evaluate(&cfg.branches, cfg.tau_true, cfg.dt)?;
        Some(match cfg.level {
            KnowledgeLevel::Full => report.crlb3,
            KnowledgeLevel::CfoKnown => report.crlb2,
            KnowledgeLevel::None => report.crlb1,
        })
    } else {
        None
    };

    Ok(TrialReport {
        level: cfg.level,
        tau_true: cfg.tau_true,
        rmse,
        bias,
        estimates,
        boundary_hits,
        crlb,
        ratio: crlb.map(|c| rmse / c.sqrt()),
    })
}
