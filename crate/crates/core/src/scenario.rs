//! TOML-driven sweeps over modulation, branch count, symbol count and SNR.
//!
//! A scenario file looks like
//!
//! ```toml
//! schema_version = 1
//! k = 10                  # branch count, or a list such as [10, 15, 20]
//! n = 2                   # symbols per branch, or a list
//! modulations = ["16FSK", "16QAM", "16PSK"]
//! snr_db = [0, 10, 20]    # system SNR: sum of per-branch SNRs
//! tau = 0.0               # seconds
//! dt = 2.5e-11            # seconds
//! seed = 2008
//! unit = "seconds"        # or "meters" (render-time only)
//!
//! [pulse]
//! zeta = 8e-9
//! symbol_duration = 2e-8
//! # center defaults to symbol_duration / 2; amplitude is set for unit energy
//!
//! [modulation]
//! fsk_shift = 23.75e6     # Hz, FSK tone spacing
//! mean_energy = 1.0
//!
//! [[branch]]              # optional per-branch overrides
//! index = 0
//! amp = 1.0
//! phase = 0.0
//! cfo = 0.0               # rad/s
//!
//! [mc]                    # only needed by `run_mc`
//! n_trials = 1000
//! levels = ["full", "cfo_known", "none"]
//! snr_db = [10, 20, 30]
//! tau_half_width = 1e-9
//! ```
//!
//! The SNR of branch `i` is the per-symbol ratio `|alpha_i|^2 (E_i / N) / sigma^2`,
//! with one noise density `sigma^2` shared by all branches and chosen so the
//! branch SNRs add up to the system SNR. Every branch uses the same symbol
//! sequence, drawn from `seed`.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::crlb::{analyze_branch, crlb_report, BranchAnalysis, ChannelWeights, CrlbReport};
use crate::error::{Error, Result};
use crate::functionals::{convergence_check, ConvergenceReport};
use crate::mc::{run_trials, KnowledgeLevel, SearchGrid, TrialConfig, TrialReport};
use crate::signal::{
    check_window, make_symbols, BranchSpec, ModulationKind, ModulationSpec, PulseSpec,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Metres per second of propagation delay.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const NOISE_SEED_MIX: u64 = 0xA5A5_5A5A_C3C3_3C3C;
const BOOTSTRAP_SEED_MIX: u64 = 0x5BD1_E995_9E37_79B9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Seconds,
    Meters,
}

impl Unit {
    fn scale(self) -> f64 {
        match self {
            Unit::Seconds => 1.0,
            Unit::Meters => SPEED_OF_LIGHT,
        }
    }
}

impl std::str::FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seconds" | "s" => Ok(Unit::Seconds),
            "meters" | "m" => Ok(Unit::Meters),
            other => Err(Error::Config(format!("unknown unit `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_dt() -> f64 {
    0.025e-9
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub zeta: f64,
    pub symbol_duration: f64,
    pub center: Option<f64>,
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection {
            zeta: 8e-9,
            symbol_duration: 20e-9,
            center: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSection {
    pub fsk_shift: Option<f64>,
    #[serde(default = "one")]
    pub mean_energy: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ModulationSection {
    fn default() -> Self {
        ModulationSection {
            fsk_shift: None,
            mean_energy: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchOverride {
    pub index: usize,
    pub amp: Option<f64>,
    pub phase: Option<f64>,
    pub cfo: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_trials: usize,
    pub levels: Vec<String>,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_half_width")]
    pub tau_half_width: f64,
    /// Defaults to the sampling step.
    pub tau_step: Option<f64>,
    /// Defaults to the largest branch CFO plus four CFO steps.
    pub omega_max: Option<f64>,
    /// Defaults to `0.2 / T`.
    pub omega_step: Option<f64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_half_width() -> f64 {
    1e-9
}

fn default_bootstrap() -> usize {
    1000
}

fn default_confidence() -> f64 {
    0.95
}

/// Raw contents of a scenario file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub k: OneOrMany<usize>,
    pub n: OneOrMany<usize>,
    pub modulations: Vec<String>,
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub unit: Unit,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub modulation: ModulationSection,
    #[serde(default, rename = "branch")]
    pub branches: Vec<BranchOverride>,
    pub mc: Option<McSection>,
}

/// A parsed and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub pulse: PulseSpec,
    pub modulations: Vec<ModulationSpec>,
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
}

fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.schema_version != SCHEMA_VERSION {
            return config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                file.schema_version
            ));
        }
        let ks = file.k.to_vec();
        let ns = file.n.to_vec();
        if ks.is_empty() || ks.contains(&0) {
            return config("k: every branch count must be at least 1");
        }
        if ns.is_empty() || ns.contains(&0) {
            return config("n: every symbol count must be at least 1");
        }
        if file.snr_db.is_empty() {
            return config("snr_db: sweep must not be empty");
        }
        if let Some(v) = file.snr_db.iter().find(|v| !v.is_finite()) {
            return config(format!("snr_db: {v} is not finite"));
        }
        if !(file.dt > 0.0 && file.dt.is_finite()) {
            return config(format!("dt: must be positive, got {}", file.dt));
        }
        if file.modulations.is_empty() {
            return config("modulations: list must not be empty");
        }

        let ps = &file.pulse;
        let mut pulse = PulseSpec {
            amplitude: 1.0,
            zeta: ps.zeta,
            symbol_duration: ps.symbol_duration,
            center: ps.center.unwrap_or(0.5 * ps.symbol_duration),
        };
        pulse
            .validate()
            .map_err(|e| Error::Config(format!("pulse: {e}")))?;
        pulse = pulse.normalized(1.0);
        if file.dt > pulse.symbol_duration {
            return config("dt: sampling step exceeds the symbol duration");
        }

        let modulations = file
            .modulations
            .iter()
            .map(|label| {
                let mut m: ModulationSpec = label
                    .parse()
                    .map_err(|e| Error::Config(format!("modulations: {e}")))?;
                m.mean_energy = file.modulation.mean_energy;
                if m.kind == ModulationKind::Fsk {
                    m.fsk_shift = file.modulation.fsk_shift;
                }
                m.validate()
                    .map_err(|e| Error::Config(format!("modulations: {label}: {e}")))?;
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;

        let k_max = *ks.iter().max().unwrap_or(&0);
        for o in &file.branches {
            if o.index >= k_max {
                return config(format!(
                    "branch: override index {} exceeds the largest branch count {k_max}",
                    o.index
                ));
            }
            if let Some(a) = o.amp {
                if !(a > 0.0 && a.is_finite()) {
                    return config(format!(
                        "branch[{}].amp: must be positive, got {a}",
                        o.index
                    ));
                }
            }
            if o.phase.is_some_and(|v| !v.is_finite()) || o.cfo.is_some_and(|v| !v.is_finite()) {
                return config(format!("branch[{}]: phase and cfo must be finite", o.index));
            }
        }

        let scenario = Scenario {
            file,
            pulse,
            modulations,
            ks,
            ns,
        };
        if let Some(mc) = &scenario.file.mc {
            scenario.validate_mc(mc)?;
        }
        // the delayed train must fit the window for every symbol count
        for &n in &scenario.ns {
            let b = scenario.branches(&scenario.modulations[0], 1, n)?;
            check_window(&b[0], scenario.file.tau, scenario.file.dt)
                .map_err(|e| Error::Config(format!("tau: {e}")))?;
        }
        Ok(scenario)
    }

    fn validate_mc(&self, mc: &McSection) -> Result<()> {
        if mc.n_trials == 0 {
            return config("mc.n_trials: must be at least 1");
        }
        if mc.levels.is_empty() {
            return config("mc.levels: list must not be empty");
        }
        for l in &mc.levels {
            l.parse::<KnowledgeLevel>()
                .map_err(|e| Error::Config(format!("mc.levels: {e}")))?;
        }
        if mc.snr_db.is_empty() {
            return config("mc.snr_db: list must not be empty");
        }
        if mc
            .snr_db
            .iter()
            .any(|v| v.is_nan() || *v == f64::NEG_INFINITY)
        {
            return config("mc.snr_db: values must be numbers or +inf");
        }
        if !(mc.tau_half_width > 0.0) {
            return config("mc.tau_half_width: must be positive");
        }
        if mc.tau_step.is_some_and(|s| !(s > 0.0)) || mc.omega_step.is_some_and(|s| !(s > 0.0)) {
            return config("mc: grid steps must be positive");
        }
        if mc.omega_max.is_some_and(|w| !(w >= 0.0)) {
            return config("mc.omega_max: must be non-negative");
        }
        if !(0.0 < mc.confidence && mc.confidence < 1.0) {
            return config("mc.confidence: must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn unit(&self) -> Unit {
        self.file.unit
    }

    /// `k` identical branches with unit noise density and overrides applied.
    pub fn branches(&self, m: &ModulationSpec, k: usize, n: usize) -> Result<Vec<BranchSpec>> {
        let symbols = make_symbols(m, n, self.file.seed)?;
        let mut branches = vec![BranchSpec::new(self.pulse, *m, symbols); k];
        for o in self.file.branches.iter().filter(|o| o.index < k) {
            let b = &mut branches[o.index];
            b.channel_amp = o.amp.unwrap_or(b.channel_amp);
            b.channel_phase = o.phase.unwrap_or(b.channel_phase);
            b.cfo = o.cfo.unwrap_or(b.cfo);
        }
        Ok(branches)
    }

    fn analysis(&self, m: &ModulationSpec, n: usize) -> Result<BranchAnalysis> {
        let b = self.branches(m, 1, n)?;
        analyze_branch(&b[0], self.file.tau, self.file.dt).map_err(|e| e.in_branch(0))
    }

    /// Assigns the shared noise density that makes the branch SNRs sum to `snr_db`.
    fn set_noise(branches: &mut [BranchSpec], energy: f64, snr_db: f64) {
        let snr = 10f64.powf(snr_db / 10.0);
        let n = branches[0].n_symbols() as f64;
        let gain: f64 = branches.iter().map(|b| b.channel_amp * b.channel_amp).sum();
        let sigma2 = if snr.is_infinite() {
            0.0
        } else {
            gain * (energy / n) / snr
        };
        for b in branches {
            b.noise_psd = sigma2;
        }
    }

    pub fn crlb_rows(&self) -> Result<Vec<CrlbRow>> {
        let mut rows = Vec::new();
        for m in &self.modulations {
            for &n in &self.ns {
                let analysis = self.analysis(m, n)?;
                for &k in &self.ks {
                    let mut branches = self.branches(m, k, n)?;
                    let analyses = vec![analysis; k];
                    for &snr_db in &self.file.snr_db {
                        Self::set_noise(&mut branches, analysis.functionals.energy, snr_db);
                        let channels: Vec<ChannelWeights> =
                            branches.iter().map(ChannelWeights::from).collect();
                        rows.push(CrlbRow {
                            modulation: m.to_string(),
                            k,
                            n,
                            snr_db,
                            report: crlb_report(&analyses, &channels)?,
                        });
                    }
                }
            }
        }
        Ok(rows)
    }

    pub fn mc_rows(&self) -> Result<Vec<McRow>> {
        let mc =
            self.file.mc.as_ref().ok_or_else(|| {
                Error::Config("mc: section is required for Monte Carlo runs".into())
            })?;
        let levels = mc
            .levels
            .iter()
            .map(|l| l.parse())
            .collect::<Result<Vec<KnowledgeLevel>>>()?;
        let dt = self.file.dt;
        let mut rows = Vec::new();
        for m in &self.modulations {
            for &n in &self.ns {
                let analysis = self.analysis(m, n)?;
                for &k in &self.ks {
                    let mut branches = self.branches(m, k, n)?;
                    let window = branches[0].window();
                    let omega_step = mc
                        .omega_step
                        .unwrap_or(SearchGrid::default_omega_step(window));
                    let max_cfo = branches.iter().map(|b| b.cfo.abs()).fold(0.0, f64::max);
                    let grid = SearchGrid {
                        omega_max: mc.omega_max.unwrap_or(max_cfo + 4.0 * omega_step),
                        omega_step,
                        tau_step: mc.tau_step.unwrap_or(dt),
                        ..SearchGrid::around(self.file.tau, mc.tau_half_width, dt)
                    };
                    for &level in &levels {
                        for &snr_db in &mc.snr_db {
                            Self::set_noise(&mut branches, analysis.functionals.energy, snr_db);
                            let cfg = TrialConfig {
                                branches: branches.clone(),
                                tau_true: self.file.tau,
                                dt,
                                level,
                                n_trials: mc.n_trials,
                                seed: self.file.seed ^ NOISE_SEED_MIX,
                                grid,
                            };
                            let report = run_trials(&cfg)?;
                            let ci = report.rmse_interval(
                                mc.bootstrap,
                                mc.confidence,
                                self.file.seed ^ BOOTSTRAP_SEED_MIX,
                            );
                            rows.push(McRow {
                                modulation: m.to_string(),
                                k,
                                n,
                                snr_db,
                                ci,
                                report,
                            });
                        }
                    }
                }
            }
        }
        Ok(rows)
    }

    /// Grid-refinement check for every modulation and symbol count.
    pub fn convergence(&self) -> Result<Vec<(String, usize, ConvergenceReport)>> {
        let mut out = Vec::new();
        for m in &self.modulations {
            for &n in &self.ns {
                let b = self.branches(m, 1, n)?;
                let report = convergence_check(&b[0], self.file.tau, self.file.dt)
                    .map_err(|e| e.in_branch(0))?;
                out.push((m.to_string(), n, report));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbRow {
    pub modulation: String,
    pub k: usize,
    pub n: usize,
    pub snr_db: f64,
    pub report: CrlbReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub modulation: String,
    pub k: usize,
    pub n: usize,
    pub snr_db: f64,
    /// Bootstrap interval of the RMSE, seconds.
    pub ci: (f64, f64),
    pub report: TrialReport,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite())
        .map(format_float)
        .unwrap_or_default()
}

fn write_csv<I>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv: {e}")))
}

pub const CRLB_HEADER: [&str; 9] = [
    "modulation",
    "k",
    "n",
    "snr_db",
    "sqrt_crlb1",
    "sqrt_crlb2",
    "sqrt_crlb3",
    "sqrt_crlb24",
    "xi",
];

pub fn render_crlb_csv(rows: &[CrlbRow], unit: Unit) -> Result<String> {
    let s = unit.scale();
    write_csv(
        &CRLB_HEADER,
        rows.iter().map(|r| {
            let rep = &r.report;
            vec![
                r.modulation.clone(),
                r.k.to_string(),
                r.n.to_string(),
                format_float(r.snr_db),
                format_float(rep.crlb1.sqrt() * s),
                format_float(rep.crlb2.sqrt() * s),
                format_float(rep.crlb3.sqrt() * s),
                format_opt(rep.constant_envelope_bound.map(|v| v.sqrt() * s)),
                format_float(rep.xi),
            ]
        }),
    )
}

pub const MC_HEADER: [&str; 11] = [
    "modulation",
    "k",
    "n",
    "level",
    "snr_db",
    "rmse",
    "sqrt_crlb",
    "ratio",
    "ci_low",
    "ci_high",
    "boundary_hits",
];

pub fn render_mc_csv(rows: &[McRow], unit: Unit) -> Result<String> {
    let s = unit.scale();
    write_csv(
        &MC_HEADER,
        rows.iter().map(|r| {
            let rep = &r.report;
            vec![
                r.modulation.clone(),
                r.k.to_string(),
                r.n.to_string(),
                rep.level.to_string(),
                format_float(r.snr_db),
                format_float(rep.rmse * s),
                format_opt(rep.crlb.map(|c| c.sqrt() * s)),
                format_opt(rep.ratio),
                format_float(r.ci.0 * s),
                format_float(r.ci.1 * s),
                rep.boundary_hits.to_string(),
            ]
        }),
    )
}

pub const CONVERGENCE_HEADER: [&str; 7] = [
    "modulation",
    "n",
    "field",
    "coarse",
    "fine",
    "rel_delta",
    "flagged",
];

pub fn render_convergence_csv(rows: &[(String, usize, ConvergenceReport)]) -> Result<String> {
    write_csv(
        &CONVERGENCE_HEADER,
        rows.iter().flat_map(|(m, n, rep)| {
            rep.fields.iter().map(move |f| {
                vec![
                    m.clone(),
                    n.to_string(),
                    f.name.to_owned(),
                    format_float(f.coarse),
                    format_float(f.fine),
                    format_float(f.rel_delta),
                    f.flagged.to_string(),
                ]
            })
        }),
    )
}

/// Loads `path` and renders the CRLB sweep.
pub fn run_scenario(path: impl AsRef<Path>) -> Result<Vec<CrlbRow>> {
    Scenario::load(path)?.crlb_rows()
}

/// Loads `path` and runs its Monte Carlo section.
pub fn run_mc(path: impl AsRef<Path>) -> Result<Vec<McRow>> {
    Scenario::load(path)?.mc_rows()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
k = 2
n = 1
modulations = ["16PSK"]
snr_db = [10]
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.file.dt, 0.025e-9);
        assert_eq!(s.pulse.zeta, 8e-9);
        assert_eq!(s.pulse.center, 10e-9);
        assert_eq!(s.unit(), Unit::Seconds);
        assert!(s.file.mc.is_none());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Scenario::from_toml_str(&format!("{MINIMAL}\nbogus = 3\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn schema_version_checked() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 9");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn fsk_without_shift_rejected() {
        let text = MINIMAL.replace("16PSK", "16FSK");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("16FSK"), "{err}");
    }

    #[test]
    fn clipping_delay_rejected() {
        let err = Scenario::from_toml_str(&format!("tau = 1e-9\n{MINIMAL}")).unwrap_err();
        assert!(
            matches!(err, Error::Config(ref m) if m.starts_with("tau")),
            "{err}"
        );
    }

    #[test]
    fn override_index_out_of_range() {
        let text = format!("{MINIMAL}\n[[branch]]\nindex = 5\namp = 2.0\n");
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn empty_sweep_rejected() {
        let text = MINIMAL.replace("snr_db = [10]", "snr_db = []");
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn system_snr_is_split_over_branches() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let m = s.modulations[0];
        let a = s.analysis(&m, 1).unwrap();
        let mut b = s.branches(&m, 2, 1).unwrap();
        Scenario::set_noise(&mut b, a.functionals.energy, 10.0);
        let per_branch: f64 = b.iter().map(|b| b.gamma() * a.functionals.energy).sum();
        assert!((per_branch - 10.0).abs() < 1e-12);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2.5e-11, 12345.678] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(5.0), "5.0000000000000000e0");
    }
}
