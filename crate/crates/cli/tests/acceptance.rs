//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::{Command, ExitCode};

use bandcrlb::functionals::parseval_deriv_energy;
use bandcrlb::{
    analyze_branch, compute_functionals, convergence_check, crlb_report, make_symbols,
    sample_branch, BranchSpec, ChannelWeights, CrlbRow, ModulationKind, ModulationSpec, PulseSpec,
    Scenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NS: f64 = 1e-9;
const DT: f64 = 0.025 * NS;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn preset(name: &str) -> String {
    format!("{}/../../presets/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn rows(name: &str) -> Vec<CrlbRow> {
    Scenario::load(preset(name))
        .and_then(|s| s.crlb_rows())
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn modulation(kind: usize) -> ModulationSpec {
    match kind % 4 {
        0 => ModulationSpec::new(ModulationKind::Pam, 4),
        1 => ModulationSpec::new(ModulationKind::Psk, 16),
        2 => ModulationSpec::new(ModulationKind::Qam, 16),
        _ => ModulationSpec::fsk(16, 23.75e6),
    }
}

fn branch(kind: usize, n: usize, seed: u64) -> BranchSpec {
    let p = PulseSpec::unit_energy(8.0 * NS, 20.0 * NS).unwrap();
    let m = modulation(kind);
    BranchSpec::new(p, m, make_symbols(&m, n, seed).unwrap())
}

fn closed_form_vs_inverse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut kinds_seen = [false; 4];
    for _ in 0..100 {
        let k = rng.random_range(1..=10);
        let mut analyses = Vec::with_capacity(k);
        let mut channels = Vec::with_capacity(k);
        for _ in 0..k {
            let kind = rng.random_range(0..4);
            kinds_seen[kind] = true;
            let b = branch(kind, rng.random_range(1..=4), rng.random());
            analyses.push(analyze_branch(&b, 0.0, DT).map_err(|e| e.to_string())?);
            channels.push(ChannelWeights {
                amp: rng.random_range(0.1..3.0),
                noise_psd: 10f64.powf(rng.random_range(-22.0..-18.0)),
            });
        }
        let r = crlb_report(&analyses, &channels).map_err(|e| e.to_string())?;
        worst = worst.max(r.inverse_mismatch());
    }
    if !kinds_seen.iter().all(|&s| s) {
        return Err("not every modulation kind was drawn".into());
    }
    if worst < 1e-9 {
        Ok(format!("max relative gap {worst:.2e} over 100 scenarios"))
    } else {
        Err(format!("max relative gap {worst:.2e} >= 1e-9"))
    }
}

fn linear_identity_and_fsk_distinct() -> Outcome {
    let mut worst = 0.0f64;
    let mut fsk_gap = f64::INFINITY;
    for r in rows("fig2.toml").into_iter().chain(rows("fig3.toml")) {
        let c = &r.report;
        if r.modulation == "16FSK" {
            let gaps = [c.crlb1 / c.crlb2, c.crlb2 / c.crlb3, c.crlb1 / c.crlb3];
            fsk_gap = gaps
                .into_iter()
                .map(|g| (g - 1.0).abs())
                .fold(fsk_gap, f64::min);
        } else {
            worst = worst.max(rel(c.crlb1, c.crlb2));
        }
    }
    let detail = format!(
        "QAM/PSK max |C1-C2|/C2 = {worst:.2e}, FSK min pairwise gap = {:.2}%",
        100.0 * fsk_gap
    );
    if worst < 1e-9 && fsk_gap > 0.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn constant_envelope_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    let mut points = 0;
    for r in rows("fig3.toml")
        .into_iter()
        .filter(|r| r.modulation == "16PSK")
    {
        let c = &r.report;
        let ce = c
            .constant_envelope_bound
            .ok_or("closed form not applicable to 16PSK")?;
        for v in [c.crlb1, c.crlb2, c.crlb3] {
            worst = worst.max(rel(v, ce));
        }
        points += 1;
    }
    let detail = format!("max relative gap {worst:.2e} over {points} SNR points");
    if points > 0 && worst < 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fig2_ordering() -> Outcome {
    let all = rows("fig2.toml");
    let unordered = all.iter().filter(|r| !r.report.ordered(1e-9)).count();
    let qam: Vec<_> = all.iter().filter(|r| r.modulation == "16QAM").collect();
    let qam_gap = qam
        .iter()
        .map(|r| 1.0 - r.report.crlb3 / r.report.crlb2)
        .fold(f64::INFINITY, f64::min);
    let detail = format!(
        "{unordered} unordered of {} points; 16QAM min (C2-C3)/C2 = {qam_gap:.2e} (needs > 1e-2)",
        all.len()
    );
    if unordered == 0 && !qam.is_empty() && qam_gap > 0.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn more_symbols_help() -> Outcome {
    let short = rows("fig2.toml");
    let long = rows("fig3.toml");
    let mut violations = Vec::new();
    for a in &short {
        let b = long
            .iter()
            .find(|b| b.modulation == a.modulation && b.snr_db == a.snr_db)
            .ok_or_else(|| format!("{} {} dB missing at N = 16", a.modulation, a.snr_db))?;
        let (x, y) = (&a.report, &b.report);
        if !(y.crlb1 < x.crlb1 && y.crlb2 < x.crlb2 && y.crlb3 < x.crlb3) {
            violations.push(format!("{} {} dB bound", a.modulation, a.snr_db));
        }
        if a.modulation == "16FSK" && y.crlb1 / y.crlb3 >= x.crlb1 / x.crlb3 {
            violations.push(format!("16FSK {} dB C1/C3", a.snr_db));
        }
    }
    if violations.is_empty() {
        Ok(format!("{} SNR/modulation pairs checked", short.len()))
    } else {
        Err(violations.join(", "))
    }
}

fn branch_count_invariance() -> Outcome {
    let all = rows("fig4.toml");
    let mut worst = 0.0f64;
    for snr in [5.0, 10.0, 15.0] {
        let at: Vec<f64> = all
            .iter()
            .filter(|r| r.snr_db == snr)
            .map(|r| r.report.crlb1.sqrt())
            .collect();
        if at.len() != 4 {
            return Err(format!("{} rows at {snr} dB, expected 4", at.len()));
        }
        for v in &at {
            worst = worst.max(rel(*v, at[0]));
        }
    }
    let detail = format!("max spread {worst:.2e} across K = 10..25");
    if worst < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn quadrature_convergence() -> Outcome {
    let mut worst = 0.0f64;
    for kind in 0..4 {
        for n in [2, 16] {
            let r =
                convergence_check(&branch(kind, n, 2008), 0.0, DT).map_err(|e| e.to_string())?;
            if !r.converged() {
                return Err(format!(
                    "{} N={n}: max delta {:.2e}",
                    modulation(kind),
                    r.max_delta()
                ));
            }
            worst = worst.max(r.max_delta());
        }
    }
    Ok(format!("max relative change {worst:.2e} when halving dt"))
}

fn parseval() -> Outcome {
    let mut signals: Vec<BranchSpec> = Vec::new();
    for name in ["fig2.toml", "fig3.toml", "fig4.toml", "mc.toml"] {
        let s = Scenario::load(preset(name)).map_err(|e| e.to_string())?;
        for m in &s.modulations {
            for &n in &s.ns {
                signals.extend(s.branches(m, 1, n).map_err(|e| e.to_string())?);
            }
        }
    }
    for kind in 0..4 {
        for n in [1, 2, 5, 16] {
            for seed in 0..5 {
                signals.push(branch(kind, n, seed));
            }
        }
    }
    let mut worst = 0.0f64;
    for b in &signals {
        let fs = sample_branch(b, 0.0, DT)
            .and_then(|s| compute_functionals(&s))
            .map_err(|e| e.to_string())?;
        worst = worst.max(rel(parseval_deriv_energy(&fs), fs.deriv_energy));
    }
    let detail = format!(
        "max relative gap {worst:.2e} over {} signals",
        signals.len()
    );
    if worst < 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn monte_carlo_efficiency() -> Outcome {
    let s = Scenario::load(preset("mc.toml")).map_err(|e| e.to_string())?;
    let trials = s.file.mc.as_ref().map_or(0, |m| m.n_trials);
    if trials < 1000 {
        return Err(format!("preset runs only {trials} trials"));
    }
    let mut mc = s.mc_rows().map_err(|e| e.to_string())?;
    mc.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    let ratios: Vec<(f64, f64)> = mc
        .iter()
        .map(|r| (r.snr_db, r.report.ratio.unwrap_or(f64::NAN)))
        .collect();
    let snrs: Vec<f64> = ratios.iter().map(|r| r.0).collect();
    if snrs != [10.0, 20.0, 30.0] {
        return Err(format!("unexpected SNR points {snrs:?}"));
    }
    let at30 = ratios[2].1;
    let monotone = ratios.windows(2).all(|w| w[1].1 <= w[0].1);
    let detail = format!(
        "rmse/sqrt(CRLB3) = {:.4} / {:.4} / {:.4} at 10/20/30 dB, {trials} trials",
        ratios[0].1, ratios[1].1, at30
    );
    if (0.85..=1.5).contains(&at30) && monotone {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_bandcrlb");
    let run = |sub: &str, name: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(bin)
            .args([sub, &preset(name)])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{sub} {name}: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        Ok(out.stdout)
    };
    let jobs = [
        ("crlb", "fig2.toml"),
        ("crlb", "fig3.toml"),
        ("crlb", "fig4.toml"),
        ("crlb", "mc.toml"),
        ("mc", "mc.toml"),
    ];
    for (sub, name) in jobs {
        let a = run(sub, name)?;
        let b = run(sub, name)?;
        if a != b {
            return Err(format!("{sub} {name}: outputs differ"));
        }
        if a.is_empty() {
            return Err(format!("{sub} {name}: empty output"));
        }
    }
    Ok(format!("{} preset runs byte-identical", jobs.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("closed form matches [I^-1]_00", closed_form_vs_inverse),
        (
            "CRLB1 = CRLB2 for QAM/PSK, FSK bounds distinct",
            linear_identity_and_fsk_distinct,
        ),
        (
            "constant-envelope closed form for 16PSK",
            constant_envelope_closed_form,
        ),
        ("fig2 ordering and 16QAM gap", fig2_ordering),
        ("N = 16 tighter than N = 2", more_symbols_help),
        ("bound invariant to branch count", branch_count_invariance),
        ("quadrature converged at 0.025 ns", quadrature_convergence),
        ("time/frequency derivative energy agree", parseval),
        ("ML efficiency at full knowledge", monte_carlo_efficiency),
        ("byte-identical CSV for a fixed seed", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {:>2}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
