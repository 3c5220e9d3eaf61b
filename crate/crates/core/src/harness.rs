//! Monte Carlo driver: seeded trials, failure rates with Wilson intervals,
//! threshold crossings and directional residual rates.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lattice2d::{Lattice2D, NoiseChannel};
use crate::pauli::Alphabet;
use crate::rg::Decoder;
use crate::spacetime::Lattice3D;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Generator for trial `trial` of a batch: stream `trial` of the ChaCha
/// generator keyed by `base_seed`. Any trial can be replayed on its own.
pub fn trial_rng(base_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Bit-flip memory with faulty measurements, decoded in space-time.
    #[default]
    Memory3D,
    /// 2D bit-flip noise with perfect syndromes.
    BitFlip2D,
    /// 2D depolarizing noise with perfect syndromes.
    Depolarizing2D,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Memory3D => "memory3d",
            Mode::BitFlip2D => "bitflip2d",
            Mode::Depolarizing2D => "depolarizing2d",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "memory3d" => Ok(Mode::Memory3D),
            "bitflip2d" => Ok(Mode::BitFlip2D),
            "depolarizing2d" => Ok(Mode::Depolarizing2D),
            _ => Err(Error::Config(format!(
                "unknown noise mode `{s}` (memory3d | bitflip2d | depolarizing2d)"
            ))),
        }
    }
}

/// One `(p, ell)` point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSpec {
    pub mode: Mode,
    pub ell: usize,
    /// Measurement rounds; ignored in 2D.
    pub tau: usize,
    pub p: f64,
    /// Measurement error rate as a multiple of `p` (3D only).
    pub time_ratio: f64,
    pub trials: u64,
    pub base_seed: u64,
}

impl PointSpec {
    pub fn memory(ell: usize, tau: usize, p: f64, trials: u64, base_seed: u64) -> Self {
        PointSpec {
            mode: Mode::Memory3D,
            ell,
            tau,
            p,
            time_ratio: 1.0,
            trials,
            base_seed,
        }
    }

    pub fn p_time(&self) -> f64 {
        (self.p * self.time_ratio).clamp(0.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("p = {} outside [0, 1]", self.p)));
        }
        if !(self.time_ratio >= 0.0) {
            return Err(Error::Config(format!("time ratio {} is negative", self.time_ratio)));
        }
        Ok(())
    }
}

/// Outcome of one trial. Equality ignores the wall time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub p: f64,
    pub ell: usize,
    pub tau: usize,
    pub schedule: String,
    pub base_seed: u64,
    pub trial: u64,
    pub success: bool,
    /// Residual class bits: `x, y, t` in 3D, `x0, x1, z0, z1` in 2D.
    pub residual: u8,
    pub wall_time: f64,
}

impl PartialEq for TrialRecord {
    fn eq(&self, o: &Self) -> bool {
        self.p == o.p
            && self.ell == o.ell
            && self.tau == o.tau
            && self.schedule == o.schedule
            && self.base_seed == o.base_seed
            && self.trial == o.trial
            && self.success == o.success
            && self.residual == o.residual
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let ph = k as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let centre = (ph + z2 / (2.0 * n)) / den;
    let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / den;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub p: f64,
    pub ell: usize,
    pub tau: usize,
    pub schedule: String,
    pub trials: u64,
    pub failures: u64,
    pub base_seed: u64,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl BatchResult {
    pub fn rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }

    pub fn ci(&self) -> (f64, f64) {
        wilson(self.failures, self.trials, Z95)
    }

    /// Binomial standard error of the rate.
    pub fn sigma(&self) -> f64 {
        let r = self.rate();
        (r * (1.0 - r) / self.trials as f64).sqrt()
    }
}

fn run_trial(decoder: &Decoder, spec: &PointSpec, trial: u64) -> Result<(bool, u8)> {
    let mut rng = trial_rng(spec.base_seed, trial);
    match spec.mode {
        Mode::Memory3D => {
            let lat = Lattice3D::new(spec.ell, spec.tau)?;
            let h = lat.sample_history_aniso(spec.p, spec.p_time(), &mut rng);
            let db = lat.delta_syndrome(&h)?;
            let d = decoder.decode_3d(&lat, spec.p, spec.p_time(), &db)?;
            let j = lat.judge(&h, &d.correction)?;
            Ok((j.success, j.residual.0))
        }
        Mode::BitFlip2D | Mode::Depolarizing2D => {
            let lat = Lattice2D::new(spec.ell)?;
            let n = lat.num_qubits();
            let (channel, alphabet) = if spec.mode == Mode::BitFlip2D {
                (NoiseChannel::bit_flip(spec.p, n)?, Alphabet::BitFlip)
            } else {
                (NoiseChannel::depolarizing(spec.p, n)?, Alphabet::Pauli)
            };
            let e = lat.sample_error(&channel, &mut rng);
            let s = lat.extract_syndrome(&e)?;
            let d = decoder.decode_2d(&lat, &channel, &s, alphabet)?;
            let mut r = e;
            r.mul_assign(&d.correction);
            let class = lat.logical_class(&r)?;
            Ok((class.is_trivial(), class.0))
        }
    }
}

/// Runs `spec.trials` independent trials. Trials run through `exec`; the
/// records come back in trial order whatever the mode.
pub fn run_batch(decoder: &Decoder, spec: &PointSpec, exec: Execution) -> Result<BatchResult> {
    spec.validate()?;
    let schedule = decoder.config().schedule.to_string();
    let outcomes = exec.map_range(spec.trials as usize, |i| {
        let start = Instant::now();
        let r = run_trial(decoder, spec, i as u64);
        (r, start.elapsed().as_secs_f64())
    });
    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for (i, (r, wall_time)) in outcomes.into_iter().enumerate() {
        let (success, residual) = r.map_err(|e| Error::Trial {
            trial: i as u64,
            seed: spec.base_seed,
            source: Box::new(e),
        })?;
        failures += !success as u64;
        records.push(TrialRecord {
            p: spec.p,
            ell: spec.ell,
            tau: if spec.mode == Mode::Memory3D { spec.tau } else { 0 },
            schedule: schedule.clone(),
            base_seed: spec.base_seed,
            trial: i as u64,
            success,
            residual,
            wall_time,
        });
    }
    Ok(BatchResult {
        p: spec.p,
        ell: spec.ell,
        tau: if spec.mode == Mode::Memory3D { spec.tau } else { 0 },
        schedule,
        trials: spec.trials,
        failures,
        base_seed: spec.base_seed,
        records,
    })
}

/// Failure counts of one lattice size over a range of `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub ell: usize,
    /// `(p, failures, trials)` in increasing `p`.
    pub points: Vec<(f64, u64, u64)>,
}

impl Curve {
    pub fn from_batches(ell: usize, batches: &[BatchResult]) -> Curve {
        let mut points: Vec<(f64, u64, u64)> = batches
            .iter()
            .filter(|b| b.ell == ell)
            .map(|b| (b.p, b.failures, b.trials))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Curve { ell, points }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub ell_small: usize,
    pub ell_large: usize,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    /// Mean of the pairwise crossings; `None` when no pair of curves crosses.
    pub p_th: Option<f64>,
    /// Central 95% of the bootstrap replicates.
    pub ci: Option<(f64, f64)>,
    pub crossings: Vec<Crossing>,
    pub curves: Vec<Curve>,
}

impl ThresholdEstimate {
    pub fn crossed(&self) -> bool {
        self.p_th.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdOptions {
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            bootstrap: 400,
            seed: 0,
        }
    }
}

/// Log failure rate with half a count added to each outcome, so that points
/// without failures stay finite.
fn log_rate(k: u64, n: u64) -> f64 {
    ((k as f64 + 0.5) / (n as f64 + 1.0)).ln()
}

/// First upward crossing of `log f_large - log f_small`, interpolated
/// linearly in `p`.
fn crossing(small: &[(f64, u64, u64)], large: &[(f64, u64, u64)]) -> Option<f64> {
    let common: Vec<(f64, f64)> = small
        .iter()
        .filter_map(|a| {
            large
                .iter()
                .find(|b| (b.0 - a.0).abs() <= 1e-12 * a.0.abs().max(1.0))
                .map(|b| (a.0, log_rate(b.1, b.2) - log_rate(a.1, a.2)))
        })
        .collect();
    for w in common.windows(2) {
        let ((p0, d0), (p1, d1)) = (w[0], w[1]);
        if d0 < 0.0 && d1 >= 0.0 {
            return Some(p0 + (p1 - p0) * (-d0) / (d1 - d0));
        }
    }
    None
}

fn crossings(curves: &[Curve]) -> Vec<Crossing> {
    let mut sorted: Vec<&Curve> = curves.iter().collect();
    sorted.sort_by_key(|c| c.ell);
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if sorted[i].ell == sorted[j].ell {
                continue;
            }
            if let Some(p) = crossing(&sorted[i].points, &sorted[j].points) {
                out.push(Crossing {
                    ell_small: sorted[i].ell,
                    ell_large: sorted[j].ell,
                    p,
                });
            }
        }
    }
    out
}

fn mean_crossing(c: &[Crossing]) -> Option<f64> {
    if c.is_empty() {
        None
    } else {
        Some(c.iter().map(|x| x.p).sum::<f64>() / c.len() as f64)
    }
}

/// Threshold from pairwise crossings of the failure curves, with a
/// parametric bootstrap over binomial resamples of every point.
pub fn estimate_threshold(curves: &[Curve], opts: ThresholdOptions) -> Result<ThresholdEstimate> {
    let sizes: std::collections::BTreeSet<usize> = curves.iter().map(|c| c.ell).collect();
    if sizes.len() < 2 {
        return Err(Error::Config("threshold estimation needs at least two sizes".into()));
    }
    if curves.iter().any(|c| c.points.len() < 3) {
        return Err(Error::Config("threshold estimation needs at least three p values per size".into()));
    }
    let found = crossings(curves);
    let p_th = mean_crossing(&found);
    let ci = match p_th {
        None => None,
        Some(_) => {
            let mut reps = Vec::with_capacity(opts.bootstrap);
            for b in 0..opts.bootstrap {
                let mut rng = trial_rng(opts.seed, b as u64);
                let resampled: Vec<Curve> = curves
                    .iter()
                    .map(|c| Curve {
                        ell: c.ell,
                        points: c
                            .points
                            .iter()
                            .map(|&(p, k, n)| {
                                let rate = k as f64 / n as f64;
                                let k2 = Binomial::new(n, rate).map(|d| d.sample(&mut rng)).unwrap_or(k);
                                (p, k2, n)
                            })
                            .collect(),
                    })
                    .collect();
                if let Some(p) = mean_crossing(&crossings(&resampled)) {
                    reps.push(p);
                }
            }
            if reps.is_empty() {
                None
            } else {
                reps.sort_by(f64::total_cmp);
                let q = |f: f64| reps[((reps.len() - 1) as f64 * f).round() as usize];
                Some((q(0.025), q(0.975)))
            }
        }
    };
    Ok(ThresholdEstimate {
        p_th,
        ci,
        crossings: found,
        curves: curves.to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionRate {
    pub failures: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci: (f64, f64),
}

impl DirectionRate {
    fn new(failures: u64, trials: u64) -> Self {
        DirectionRate {
            failures,
            trials,
            rate: if trials == 0 { 0.0 } else { failures as f64 / trials as f64 },
            ci: wilson(failures, trials, Z95),
        }
    }

    pub fn sigma(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.rate * (1.0 - self.rate) / self.trials as f64).sqrt()
    }
}

/// Residual logical rates along `x`, `y` and time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyReport {
    pub rates: [DirectionRate; 3],
}

impl AnisotropyReport {
    /// Largest pairwise difference in units of the combined standard error.
    pub fn max_separation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                let (a, b) = (&self.rates[i], &self.rates[j]);
                let diff = (a.rate - b.rate).abs();
                let s = (a.sigma().powi(2) + b.sigma().powi(2)).sqrt();
                let sep = if s > 0.0 {
                    diff / s
                } else if diff > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                worst = worst.max(sep);
            }
        }
        worst
    }

    pub fn within_sigma(&self, k: f64) -> bool {
        self.max_separation() <= k
    }
}

pub fn marginal_anisotropy_report(trials: &[TrialRecord]) -> AnisotropyReport {
    let n = trials.len() as u64;
    let count = |bit: u8| trials.iter().filter(|t| t.residual >> bit & 1 == 1).count() as u64;
    AnisotropyReport {
        rates: [
            DirectionRate::new(count(0), n),
            DirectionRate::new(count(1), n),
            DirectionRate::new(count(2), n),
        ],
    }
}

pub const POINT_CSV_HEADER: &str = "p,ell,tau,schedule,trials,failures,rate,ci_low,ci_high,base_seed";
pub const TRIAL_CSV_HEADER: &str = "p,ell,tau,schedule,base_seed,trial,success,residual,wall_time";

pub fn write_points_csv<W: Write>(mut w: W, batches: &[BatchResult]) -> Result<()> {
    writeln!(w, "{POINT_CSV_HEADER}")?;
    for b in batches {
        let (lo, hi) = b.ci();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            b.p,
            b.ell,
            b.tau,
            b.schedule,
            b.trials,
            b.failures,
            b.rate(),
            lo,
            hi,
            b.base_seed
        )?;
    }
    Ok(())
}

pub fn write_trials_csv<W: Write>(mut w: W, batches: &[BatchResult]) -> Result<()> {
    writeln!(w, "{TRIAL_CSV_HEADER}")?;
    for t in batches.iter().flat_map(|b| &b.records) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{:.6}",
            t.p, t.ell, t.tau, t.schedule, t.base_seed, t.trial, t.success as u8, t.residual, t.wall_time
        )?;
    }
    Ok(())
}
