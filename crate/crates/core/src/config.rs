//! Run configuration: a flat `key = value` format whose keys match the
//! command-line flags one to one.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Model;
use crate::harness::{Mode, PointSpec};
use crate::pauli::Alphabet;
use crate::rg::{CellLibrary, DecoderConfig, Schedule, UnitCellSpec, DEFAULT_BP_ROUNDS};
use crate::Execution;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Command {
    Decode2D,
    Decode3D,
    #[default]
    Sweep,
    Threshold,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Decode2D => "decode-2d",
            Command::Decode3D => "decode-3d",
            Command::Sweep => "sweep",
            Command::Threshold => "threshold",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Command> {
        match s {
            "decode-2d" => Ok(Command::Decode2D),
            "decode-3d" => Ok(Command::Decode3D),
            "sweep" => Ok(Command::Sweep),
            "threshold" => Ok(Command::Threshold),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

/// Every key accepted in a config file or as a `--key` flag.
pub const KEYS: &[&str] = &[
    "mode",
    "ell",
    "tau",
    "p",
    "time_ratio",
    "noise",
    "schedule",
    "bp_rounds",
    "trials",
    "seed",
    "bootstrap",
    "parallel",
    "cells",
    "history",
    "error",
    "output",
    "per_trial",
    "json",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Command,
    pub ell: Vec<usize>,
    /// Measurement rounds; defaults to `ell`.
    pub tau: Option<usize>,
    pub p: Vec<f64>,
    pub time_ratio: f64,
    /// Defaults to bit-flip for 2D decoding and the space-time memory otherwise.
    pub noise: Option<Mode>,
    /// Defaults to `cell22` in 2D and `cell211` in 3D.
    pub schedule: Option<Schedule>,
    pub bp_rounds: usize,
    pub trials: u64,
    pub seed: u64,
    pub bootstrap: usize,
    pub parallel: bool,
    pub cells: Vec<PathBuf>,
    pub history: Option<PathBuf>,
    pub error: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub per_trial: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Command::default(),
            ell: vec![8],
            tau: None,
            p: vec![0.01],
            time_ratio: 1.0,
            noise: None,
            schedule: None,
            bp_rounds: DEFAULT_BP_ROUNDS,
            trials: 1000,
            seed: 0,
            bootstrap: 400,
            parallel: cfg!(feature = "parallel"),
            cells: Vec::new(),
            history: None,
            error: None,
            output: None,
            per_trial: None,
            json: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let out: Vec<T> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(key, s))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Config(format!("`{key}` is empty")));
    }
    Ok(out)
}

/// Parses `a,b,c` or the inclusive range `start:stop:step`.
pub fn parse_p_list(v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.len() {
        1 => list("p", v),
        3 => {
            let start: f64 = num("p", parts[0])?;
            let stop: f64 = num("p", parts[1])?;
            let step: f64 = num("p", parts[2])?;
            if !(step > 0.0) || stop < start {
                return Err(Error::Config(format!("bad p range `{v}`")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|i| {
                    let p = start + step * i as f64;
                    // Keep the decimal grid exact enough to print cleanly.
                    (p * 1e12).round() / 1e12
                })
                .collect())
        }
        _ => Err(Error::Config(format!("bad p list `{v}`"))),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(v: &str) -> Option<PathBuf> {
    let v = v.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Sets one key. An empty value restores an optional key to its default.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "mode" => self.mode = v.parse()?,
            "ell" => self.ell = list(key, v)?,
            "tau" => self.tau = if v.is_empty() { None } else { Some(num(key, v)?) },
            "p" => self.p = parse_p_list(v)?,
            "time_ratio" => self.time_ratio = num(key, v)?,
            "noise" => self.noise = if v.is_empty() { None } else { Some(v.parse()?) },
            "schedule" => {
                self.schedule = if v.is_empty() {
                    None
                } else {
                    Some(v.parse().map_err(|e: Error| Error::Config(e.to_string()))?)
                }
            }
            "bp_rounds" => self.bp_rounds = num(key, v)?,
            "trials" => self.trials = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "bootstrap" => self.bootstrap = num(key, v)?,
            "parallel" => self.parallel = num(key, v)?,
            "cells" => {
                self.cells = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| PathBuf::from(s.trim()))
                    .collect()
            }
            "history" => self.history = opt_path(v),
            "error" => self.error = opt_path(v),
            "output" => self.output = opt_path(v),
            "per_trial" => self.per_trial = opt_path(v),
            "json" => self.json = opt_path(v),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "mode" => self.mode.name().to_string(),
            "ell" => join(&self.ell),
            "tau" => self.tau.map(|t| t.to_string()).unwrap_or_default(),
            "p" => join(&self.p),
            "time_ratio" => self.time_ratio.to_string(),
            "noise" => self.noise.map(|m| m.to_string()).unwrap_or_default(),
            "schedule" => self.schedule.as_ref().map(|s| s.to_string()).unwrap_or_default(),
            "bp_rounds" => self.bp_rounds.to_string(),
            "trials" => self.trials.to_string(),
            "seed" => self.seed.to_string(),
            "bootstrap" => self.bootstrap.to_string(),
            "parallel" => self.parallel.to_string(),
            "cells" => self
                .cells
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
            "history" => path_str(&self.history),
            "error" => path_str(&self.error),
            "output" => path_str(&self.output),
            "per_trial" => path_str(&self.per_trial),
            "json" => path_str(&self.json),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e)))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Every key with its effective value; parses back to an equal config.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).unwrap_or_default());
        }
        out
    }

    pub fn noise(&self) -> Mode {
        self.noise.unwrap_or(match self.mode {
            Command::Decode2D => Mode::BitFlip2D,
            _ => Mode::Memory3D,
        })
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule.clone().unwrap_or(match self.noise() {
            Mode::Memory3D => Schedule::Cell211,
            _ => Schedule::Cell22,
        })
    }

    pub fn tau_for(&self, ell: usize) -> usize {
        self.tau.unwrap_or(ell)
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::best_available()
        } else {
            Execution::Sequential
        }
    }

    pub fn decoder_config(&self) -> DecoderConfig {
        // Trials are the unit of parallel work; each decode runs sequentially.
        DecoderConfig::new(self.schedule()).with_bp_rounds(self.bp_rounds)
    }

    pub fn library(&self) -> Result<CellLibrary> {
        let mut lib = CellLibrary::builtin();
        for path in &self.cells {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read cell file {}: {e}", path.display())))?;
            let spec = UnitCellSpec::parse(&text)
                .map_err(|e| Error::Config(format!("cell file {}: {e}", path.display())))?;
            lib.add(spec)?;
        }
        Ok(lib)
    }

    /// Model and lattice sizes for one `ell`.
    pub fn lattice(&self, ell: usize) -> (Model, Vec<usize>) {
        match self.noise() {
            Mode::Memory3D => (Model::flux3d(), vec![ell, ell, self.tau_for(ell)]),
            Mode::BitFlip2D => (Model::toric2d(Alphabet::BitFlip), vec![ell, ell]),
            Mode::Depolarizing2D => (Model::toric2d(Alphabet::Pauli), vec![ell, ell]),
        }
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<()> {
        let lib = self.library()?;
        let noise = self.noise();
        match (self.mode, noise) {
            (Command::Decode2D, Mode::Memory3D) => {
                return Err(Error::Config("decode-2d needs a 2D noise mode".into()))
            }
            (Command::Decode3D, m) if m != Mode::Memory3D => {
                return Err(Error::Config("decode-3d needs noise = memory3d".into()))
            }
            _ => {}
        }
        if matches!(self.mode, Command::Decode2D | Command::Decode3D) && (self.ell.len() != 1 || self.p.len() != 1) {
            return Err(Error::Config("single decodes take one ell and one p".into()));
        }
        if self.mode == Command::Threshold && (self.ell.len() < 2 || self.p.len() < 3) {
            return Err(Error::Config(
                "threshold needs at least two sizes and three p values".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        for &p in &self.p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("p = {p} outside [0, 1]")));
            }
        }
        if !(self.time_ratio >= 0.0) || self.time_ratio * self.p.iter().cloned().fold(0.0, f64::max) > 1.0 {
            return Err(Error::Config(format!("time_ratio {} gives a rate outside [0, 1]", self.time_ratio)));
        }
        let schedule = self.schedule();
        for &ell in &self.ell {
            if ell < 2 || !ell.is_power_of_two() {
                return Err(Error::Config(format!("ell = {ell} must be a power of two >= 2")));
            }
            let (model, sizes) = self.lattice(ell);
            schedule
                .steps(&model, &sizes, &lib)
                .map_err(|e| Error::Config(format!("ell = {ell}: {e}")))?;
        }
        Ok(())
    }

    pub fn point(&self, ell: usize, p: f64) -> PointSpec {
        PointSpec {
            mode: self.noise(),
            ell,
            tau: self.tau_for(ell),
            p,
            time_ratio: self.time_ratio,
            trials: self.trials,
            base_seed: self.seed,
        }
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_ranges_are_inclusive() {
        let p = parse_p_list("0.010:0.026:0.002").unwrap();
        assert_eq!(p.len(), 9);
        assert_eq!(p[0], 0.01);
        assert_eq!(p[8], 0.026);
        assert_eq!(parse_p_list("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_p_list("0.2:0.1:0.01").is_err());
        assert!(parse_p_list("a").is_err());
    }

    #[test]
    fn dump_round_trips() {
        let mut c = RunConfig::default();
        c.set("mode", "threshold").unwrap();
        c.set("ell", "8,16").unwrap();
        c.set("p", "0.01:0.02:0.005").unwrap();
        c.set("schedule", "211x,211y,211z").unwrap();
        c.set("output", "out.csv").unwrap();
        c.set("parallel", "false").unwrap();
        let back = RunConfig::parse(&c.dump()).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::parse(&RunConfig::default().dump()).unwrap(), RunConfig::default());
    }

    #[test]
    fn every_key_is_gettable_and_settable() {
        let c = RunConfig::default();
        for k in KEYS {
            let v = c.get(k).unwrap();
            let mut d = c.clone();
            d.set(k, &v).unwrap();
            assert_eq!(d, c, "{k}");
        }
        assert!(RunConfig::default().set("nope", "1").is_err());
    }

    #[test]
    fn validation_catches_bad_shapes() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.set("ell", "6").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("schedule", "cell221").unwrap();
        c.set("ell", "8").unwrap();
        assert!(c.validate().is_err());
        c.set("tau", "4").unwrap();
        assert!(c.validate().is_ok());
        let mut c = RunConfig::default();
        c.set("mode", "threshold").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("mode = decode-2d\nnoise = memory3d\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn comments_and_errors_in_files() {
        let c = RunConfig::parse("# a run\nell = 4 # small\n\ntrials=7\n").unwrap();
        assert_eq!(c.ell, vec![4]);
        assert_eq!(c.trials, 7);
        assert!(RunConfig::parse("ell 4").is_err());
        assert!(RunConfig::parse("trials = x").is_err());
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
