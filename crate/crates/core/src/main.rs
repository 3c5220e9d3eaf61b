use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use toric_rg::config::{write_atomic, Command, RunConfig};
use toric_rg::exec::set_threads;
use toric_rg::harness::{
    estimate_threshold, marginal_anisotropy_report, run_batch, trial_rng, write_points_csv, write_trials_csv,
    BatchResult, Curve, Mode, ThresholdOptions,
};
use toric_rg::lattice2d::{error_to_text, parse_error};
use toric_rg::rg::Decoder;
use toric_rg::{Alphabet, ErrorHistory, Lattice2D, Lattice3D, NoiseChannel};

#[derive(Parser)]
#[command(name = "toric-rg", version, about = "Renormalization-group decoding of the toric code")]
struct Cli {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel trials.
    #[arg(long, global = true, env = "TORIC_RG_THREADS")]
    threads: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decode one 2D syndrome (sampled, or from `--error`).
    #[command(name = "decode-2d")]
    Decode2d(Keys),
    /// Decode one space-time history (sampled, or from `--history`).
    #[command(name = "decode-3d")]
    Decode3d(Keys),
    /// Failure rates over a grid of sizes and error rates.
    Sweep(Keys),
    /// A sweep followed by a curve-crossing threshold estimate.
    Threshold(Keys),
    /// Run the mode named in the config file.
    Run(Keys),
}

/// One flag per config key.
#[derive(Args, Default)]
struct Keys {
    /// Lattice size(s), comma separated.
    #[arg(long)]
    ell: Option<String>,
    /// Measurement rounds (default: ell).
    #[arg(long)]
    tau: Option<String>,
    /// Error rate(s): `a,b,c` or inclusive `start:stop:step`.
    #[arg(long)]
    p: Option<String>,
    /// Measurement error rate as a multiple of p.
    #[arg(long)]
    time_ratio: Option<String>,
    /// memory3d | bitflip2d | depolarizing2d.
    #[arg(long)]
    noise: Option<String>,
    /// cell22 | cell211 | cell221 | hybrid | explicit steps such as `211x,221yz`.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    bp_rounds: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Base seed; trial k uses stream k of this seed.
    #[arg(long)]
    seed: Option<String>,
    /// Bootstrap replicates for the threshold interval.
    #[arg(long)]
    bootstrap: Option<String>,
    /// true | false.
    #[arg(long)]
    parallel: Option<String>,
    /// Extra cell files, comma separated.
    #[arg(long)]
    cells: Option<String>,
    /// Error history file for decode-3d.
    #[arg(long)]
    history: Option<String>,
    /// Error file for decode-2d.
    #[arg(long)]
    error: Option<String>,
    /// CSV (sweeps) or correction (single decodes) output path.
    #[arg(long)]
    output: Option<String>,
    /// Per-trial CSV output path.
    #[arg(long)]
    per_trial: Option<String>,
    /// JSON summary output path.
    #[arg(long)]
    json: Option<String>,
}

impl Keys {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("ell", &self.ell),
            ("tau", &self.tau),
            ("p", &self.p),
            ("time_ratio", &self.time_ratio),
            ("noise", &self.noise),
            ("schedule", &self.schedule),
            ("bp_rounds", &self.bp_rounds),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("bootstrap", &self.bootstrap),
            ("parallel", &self.parallel),
            ("cells", &self.cells),
            ("history", &self.history),
            ("error", &self.error),
            ("output", &self.output),
            ("per_trial", &self.per_trial),
            ("json", &self.json),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

/// Errors in the configuration or user input, reported with exit code 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

fn build_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(config_err)?,
        None => RunConfig::default(),
    };
    let keys = match &cli.command {
        Cmd::Decode2d(k) => {
            cfg.mode = Command::Decode2D;
            k
        }
        Cmd::Decode3d(k) => {
            cfg.mode = Command::Decode3D;
            k
        }
        Cmd::Sweep(k) => {
            cfg.mode = Command::Sweep;
            k
        }
        Cmd::Threshold(k) => {
            cfg.mode = Command::Threshold;
            k
        }
        Cmd::Run(k) => k,
    };
    for (k, v) in keys.pairs() {
        cfg.set(k, v).map_err(config_err)?;
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn decode_2d(cfg: &RunConfig, decoder: &Decoder) -> anyhow::Result<String> {
    let ell = cfg.ell[0];
    let p = cfg.p[0];
    let lat = Lattice2D::new(ell).map_err(config_err)?;
    let n = lat.num_qubits();
    let (channel, alphabet) = match cfg.noise() {
        Mode::Depolarizing2D => (NoiseChannel::depolarizing(p, n)?, Alphabet::Pauli),
        _ => (NoiseChannel::bit_flip(p, n)?, Alphabet::BitFlip),
    };
    let e = match &cfg.error {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            parse_error(&text, &lat).map_err(|e| config_err(format!("{}: {e}", path.display())))?
        }
        None => lat.sample_error(&channel, &mut trial_rng(cfg.seed, 0)),
    };
    let s = lat.extract_syndrome(&e)?;
    let d = decoder.decode_2d(&lat, &channel, &s, alphabet)?;
    let mut r = e.clone();
    r.mul_assign(&d.correction);
    let residual = if alphabet == Alphabet::BitFlip {
        let x_only = toric_rg::PauliWord::from_sparse(
            n,
            &(0..n)
                .filter(|&q| r.x_bit(q))
                .map(|q| (q, toric_rg::Letter::X))
                .collect::<Vec<_>>(),
        )?;
        lat.logical_class(&x_only)?
    } else {
        lat.logical_class(&r)?
    };
    if let Some(path) = &cfg.output {
        write_atomic(path, error_to_text(&d.correction, &lat).as_bytes())?;
    }
    Ok(format!(
        "decode-2d ell={ell} p={p} weight={} class={} p_class={:.6} success={}",
        e.weight(),
        d.class,
        d.probabilities[d.class.0 as usize],
        residual.is_trivial()
    ))
}

fn decode_3d(cfg: &RunConfig, decoder: &Decoder) -> anyhow::Result<String> {
    let ell = cfg.ell[0];
    let tau = cfg.tau_for(ell);
    let p = cfg.p[0];
    let p_time = (p * cfg.time_ratio).min(1.0);
    let lat = Lattice3D::new(ell, tau).map_err(config_err)?;
    let h = match &cfg.history {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            ErrorHistory::parse(&text, &lat).map_err(|e| config_err(format!("{}: {e}", path.display())))?
        }
        None => lat.sample_history_aniso(p, p_time, &mut trial_rng(cfg.seed, 0)),
    };
    let db = lat.delta_syndrome(&h)?;
    let d = decoder.decode_3d(&lat, p, p_time, &db)?;
    let j = lat.judge(&h, &d.correction)?;
    if let Some(path) = &cfg.output {
        write_atomic(path, d.correction.to_text(&lat).as_bytes())?;
    }
    Ok(format!(
        "decode-3d ell={ell} tau={tau} p={p} faults={} defects={} class=({},{},{}) success={}",
        h.weight(),
        db.count(),
        d.class.x() as u8,
        d.class.y() as u8,
        d.class.t() as u8,
        j.success
    ))
}

fn sweep(cfg: &RunConfig, decoder: &Decoder) -> anyhow::Result<Vec<BatchResult>> {
    let mut out = Vec::new();
    for &ell in &cfg.ell {
        for &p in &cfg.p {
            let b = run_batch(decoder, &cfg.point(ell, p), cfg.execution())?;
            let (lo, hi) = b.ci();
            eprintln!(
                "ell={ell} p={p}: {}/{} failures, rate {:.5} [{:.5}, {:.5}]",
                b.failures,
                b.trials,
                b.rate(),
                lo,
                hi
            );
            out.push(b);
        }
    }
    let mut csv = Vec::new();
    write_points_csv(&mut csv, &out)?;
    write_or_print(cfg.output.as_deref(), std::str::from_utf8(&csv)?)?;
    if let Some(path) = &cfg.per_trial {
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &out)?;
        write_atomic(path, &buf)?;
    }
    Ok(out)
}

fn run(cfg: &RunConfig) -> anyhow::Result<String> {
    let decoder = Decoder::with_library(cfg.decoder_config(), cfg.library().map_err(config_err)?);
    match cfg.mode {
        Command::Decode2D => decode_2d(cfg, &decoder),
        Command::Decode3D => decode_3d(cfg, &decoder),
        Command::Sweep => {
            let b = sweep(cfg, &decoder)?;
            let trials: u64 = b.iter().map(|x| x.trials).sum();
            if let Some(path) = &cfg.json {
                let all: Vec<_> = b.iter().flat_map(|x| x.records.clone()).collect();
                let summary = json!({
                    "points": b.iter().map(|x| json!({
                        "p": x.p, "ell": x.ell, "tau": x.tau, "trials": x.trials,
                        "failures": x.failures, "rate": x.rate(), "ci": [x.ci().0, x.ci().1],
                    })).collect::<Vec<_>>(),
                    "anisotropy": marginal_anisotropy_report(&all),
                });
                write_atomic(path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
            }
            Ok(format!("sweep: {} points, {trials} trials, schedule {}", b.len(), cfg.schedule()))
        }
        Command::Threshold => {
            let b = sweep(cfg, &decoder)?;
            let curves: Vec<Curve> = cfg.ell.iter().map(|&l| Curve::from_batches(l, &b)).collect();
            let est = estimate_threshold(
                &curves,
                ThresholdOptions {
                    bootstrap: cfg.bootstrap,
                    seed: cfg.seed,
                },
            )?;
            let summary = json!({
                "p_th": est.p_th,
                "ci": est.ci.map(|(a, b)| [a, b]),
                "crossings": est.crossings,
                "curves": est.curves,
            });
            if let Some(path) = &cfg.json {
                write_atomic(path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
            }
            Ok(match (est.p_th, est.ci) {
                (Some(p), Some((lo, hi))) => format!("threshold: p_th = {p:.5} (95% CI [{lo:.5}, {hi:.5}])"),
                (Some(p), None) => format!("threshold: p_th = {p:.5}"),
                _ => "threshold: no crossing in the swept range".to_string(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        set_threads(n.max(1));
    }
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.dump_config {
        print!("{}", cfg.dump());
        return ExitCode::SUCCESS;
    }
    match run(&cfg) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
