//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

mod common;

use std::time::Instant;

use toric_rg::harness::{
    estimate_threshold, marginal_anisotropy_report, run_batch, trial_rng, BatchResult, Curve, PointSpec,
    ThresholdOptions,
};
use toric_rg::rg::decoder::argmax;
use toric_rg::{
    Alphabet, Decoder, DecoderConfig, Execution, Lattice2D, Lattice3D, LogicalClass, NoiseChannel, Schedule,
};

fn exec() -> Execution {
    if cfg!(feature = "parallel") {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

fn decoder(schedule: Schedule) -> Decoder {
    Decoder::new(DecoderConfig::new(schedule).with_execution(exec()))
}

fn batch(schedule: Schedule, ell: usize, p: f64, trials: u64, seed: u64) -> BatchResult {
    run_batch(&decoder(schedule), &PointSpec::memory(ell, ell, p, trials, seed), exec()).expect("batch runs")
}

/// Every built-in cell agrees with enumeration over its full group.
fn cell_exactness() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for name in ["cell22", "cell22x", "cell211", "cell221"] {
        let w = common::cell_exactness(name, 100, 11);
        parts.push(format!("{name} {w:.1e}"));
        worst = worst.max(w);
    }
    (worst <= 1e-12, format!("max |dev| {worst:.2e} ({})", parts.join(", ")))
}

/// RG failure rate within a factor two of maximum likelihood at ell=4.
fn oracle_comparison() -> (bool, String) {
    let lat = Lattice2D::new(4).unwrap();
    let dec = decoder(Schedule::Cell22);
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, p) in [0.05, 0.10].into_iter().enumerate() {
        let ch = NoiseChannel::bit_flip(p, lat.num_qubits()).unwrap();
        let (mut rg_fail, mut ml_fail) = (0u64, 0u64);
        let n = 1000;
        for trial in 0..n {
            let e = lat.sample_error(&ch, &mut trial_rng(100 + k as u64, trial));
            let s = lat.extract_syndrome(&e).unwrap();
            let d = dec.decode_2d(&lat, &ch, &s, Alphabet::BitFlip).unwrap();
            let mut r = e.clone();
            r.mul_assign(&d.correction);
            rg_fail += !lat.logical_class(&r).unwrap().is_trivial() as u64;
            let probs = lat.exact_class_probabilities(&s, &ch, Alphabet::BitFlip).unwrap();
            let mut ml = lat.pure_error(&s).unwrap();
            ml.mul_assign(&lat.logical_operator(LogicalClass(argmax(&probs) as u8)));
            let mut r = e.clone();
            r.mul_assign(&ml);
            ml_fail += !lat.logical_class(&r).unwrap().is_trivial() as u64;
        }
        let (f_rg, f_ml) = (rg_fail as f64 / n as f64, ml_fail as f64 / n as f64);
        ok &= f_rg <= 2.0 * f_ml && f_ml <= 2.0 * f_rg;
        parts.push(format!("p={p}: rg {f_rg:.3} ml {f_ml:.3}"));
    }
    (ok, parts.join("; "))
}

/// Every 3D correction reproduces the observed syndrome.
fn codespace_return() -> (bool, String) {
    let lat = Lattice3D::cube(8).unwrap();
    let dec = decoder(Schedule::Cell211);
    let n = 10_000u64;
    let mut bad = 0u64;
    for trial in 0..n {
        let h = lat.sample_history(0.05, &mut trial_rng(200, trial));
        let db = lat.delta_syndrome(&h).unwrap();
        let d = dec.decode_3d(&lat, 0.05, 0.05, &db).unwrap();
        if lat.delta_syndrome(&h.xor(&d.correction)).unwrap().count() != 0 {
            bad += 1;
        }
    }
    (bad == 0, format!("{} of {n} corrections return to the codespace", n - bad))
}

/// Crossing of the 2x1x1 curves for ell in {8, 16}.
fn threshold() -> (bool, String) {
    let ps: Vec<f64> = (0..9).map(|i| 0.010 + 0.002 * i as f64).collect();
    let curves: Vec<Curve> = [8, 16]
        .into_iter()
        .map(|ell| {
            let batches: Vec<BatchResult> = ps.iter().map(|&p| batch(Schedule::Cell211, ell, p, 1000, 0)).collect();
            Curve::from_batches(ell, &batches)
        })
        .collect();
    let est = estimate_threshold(&curves, ThresholdOptions::default()).unwrap();
    match est.p_th {
        Some(p) => {
            let ci = est.ci.map(|(a, b)| format!(" CI [{a:.4}, {b:.4}]")).unwrap_or_default();
            ((0.013..=0.023).contains(&p), format!("p_th = {p:.4}{ci}"))
        }
        None => (false, "curves do not cross".into()),
    }
}

/// Larger lattices fail less often well below threshold.
fn suppression() -> (bool, String) {
    let small = batch(Schedule::Cell211, 8, 0.010, 10_000, 1);
    let large = batch(Schedule::Cell211, 16, 0.010, 10_000, 1);
    let (s, l) = (small.ci(), large.ci());
    (
        large.rate() < small.rate() && l.1 < s.0,
        format!(
            "ell=8 {:.4} [{:.4}, {:.4}], ell=16 {:.4} [{:.4}, {:.4}]",
            small.rate(),
            s.0,
            s.1,
            large.rate(),
            l.0,
            l.1
        ),
    )
}

/// Hybrid and pure 2x1x1 schedules agree at ell=8.
fn hybrid_consistency() -> (bool, String) {
    let h = batch(Schedule::Hybrid, 8, 0.015, 1000, 2);
    let c = batch(Schedule::Cell211, 8, 0.015, 1000, 3);
    let sigma = (h.sigma().powi(2) + c.sigma().powi(2)).sqrt();
    let gap = (h.rate() - c.rate()).abs();
    (
        gap <= 3.0 * sigma,
        format!(
            "hybrid {}/{}, cell211 {}/{}, |diff| = {:.2} sigma",
            h.failures,
            h.trials,
            c.failures,
            c.trials,
            gap / sigma.max(f64::MIN_POSITIVE)
        ),
    )
}

/// No preferred direction among the x, y and t failures.
fn anisotropy() -> (bool, String) {
    let b = batch(Schedule::Cell211, 8, 0.015, 10_000, 4);
    let rep = marginal_anisotropy_report(&b.records);
    let rates: Vec<String> = ["x", "y", "t"]
        .iter()
        .zip(&rep.rates)
        .map(|(d, r)| format!("{d} {}/{}", r.failures, r.trials))
        .collect();
    (
        rep.within_sigma(3.0),
        format!("{}; max separation {:.2} sigma", rates.join(", "), rep.max_separation()),
    )
}

/// Property suites over normalization, additivity, bases and determinism.
fn invariants() -> (bool, String) {
    let suites: [(&str, fn(u32) -> Result<(), String>, u32); 6] = [
        ("normalization", common::prop_normalization, 64),
        ("additivity", common::prop_additivity, 128),
        ("basis round-trip", common::prop_basis_round_trip, 128),
        ("parallel determinism", common::prop_parallel_determinism, 16),
        ("scale invariance", common::prop_argmax_scale_invariance, 32),
        ("stabilizer covariance", common::prop_stabilizer_covariance, 32),
    ];
    let mut failed = Vec::new();
    for (name, f, cases) in suites {
        if let Err(e) = f(cases) {
            failed.push(format!("{name}: {e}"));
        }
    }
    let n = suites.len();
    if failed.is_empty() {
        (true, format!("{n} suites green"))
    } else {
        (false, failed.join("; "))
    }
}

fn main() {
    let criteria: [(&str, fn() -> (bool, String)); 8] = [
        ("cell exactness", cell_exactness),
        ("ML oracle comparison", oracle_comparison),
        ("codespace return", codespace_return),
        ("threshold", threshold),
        ("below-threshold suppression", suppression),
        ("hybrid schedule consistency", hybrid_consistency),
        ("anisotropy", anisotropy),
        ("invariant suites", invariants),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = run();
        failures += !ok as usize;
        println!(
            "{} {id}. {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
