//! Full decoder: initial priors, the level loop and the final class choice.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{Grid, Model, MAX_DIMS};
use crate::lattice2d::{Lattice2D, LogicalClass, NoiseChannel, SyndromeConfig};
use crate::pauli::{Alphabet, Letter, PauliWord};
use crate::spacetime::{CubicSyndrome, ErrorHistory, HistoryClass, Lattice3D};

use super::cell::CellLibrary;
use super::engine::{rg_iteration, LevelState};
use super::plan::LevelPlan;
use super::schedule::Schedule;

pub const DEFAULT_BP_ROUNDS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderConfig {
    pub schedule: Schedule,
    /// Message-passing rounds per level; 0 gives plain RG.
    pub bp_rounds: usize,
    pub execution: Execution,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            schedule: Schedule::default(),
            bp_rounds: DEFAULT_BP_ROUNDS,
            execution: Execution::default(),
        }
    }
}

impl DecoderConfig {
    pub fn new(schedule: Schedule) -> Self {
        DecoderConfig {
            schedule,
            ..Default::default()
        }
    }

    pub fn with_bp_rounds(mut self, rounds: usize) -> Self {
        self.bp_rounds = rounds;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Joint distribution of the wall crossings of the whole lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct TopLevel {
    pub table: Vec<f64>,
    pub levels: usize,
    /// Tables or messages that lost all mass and were reset to uniform.
    pub resets: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded2D {
    pub class: LogicalClass,
    /// Indexed by class value; 4 entries in bit-flip mode, else 16.
    pub probabilities: Vec<f64>,
    pub correction: PauliWord,
    pub resets: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded3D {
    pub class: HistoryClass,
    /// Indexed by class value (x, y, t bits).
    pub probabilities: Vec<f64>,
    pub correction: ErrorHistory,
    pub resets: u64,
}

type PlanKey = (String, [usize; MAX_DIMS], Vec<usize>);

pub struct Decoder {
    config: DecoderConfig,
    library: CellLibrary,
    plans: Mutex<HashMap<PlanKey, Arc<LevelPlan>>>,
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Crossing class of a 2D top-level table index.
fn class_of_2d(idx: usize, alphabet: Alphabet) -> LogicalClass {
    match alphabet {
        Alphabet::BitFlip => LogicalClass(idx as u8),
        Alphabet::Pauli => {
            let b = |k: usize| (idx >> k & 1) as u8;
            LogicalClass(b(0) | b(2) << 1 | b(1) << 2 | b(3) << 3)
        }
    }
}

impl Decoder {
    pub fn new(config: DecoderConfig) -> Self {
        Decoder::with_library(config, CellLibrary::builtin())
    }

    pub fn with_library(config: DecoderConfig, library: CellLibrary) -> Self {
        Decoder {
            config,
            library,
            plans: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn library(&self) -> &CellLibrary {
        &self.library
    }

    /// Checks that the schedule reduces a lattice of these sizes.
    pub fn validate(&self, model: &Model, sizes: &[usize]) -> Result<()> {
        self.config.schedule.steps(model, sizes, &self.library).map(|_| ())
    }

    fn plan(&self, step: &super::schedule::Step, grid: Grid) -> Result<Arc<LevelPlan>> {
        let key = (step.spec.name().to_string(), step.perm, grid.sizes().to_vec());
        if let Some(p) = self.plans.lock().expect("plan cache").get(&key) {
            return Ok(p.clone());
        }
        let plan = Arc::new(LevelPlan::new(step.spec.clone(), step.perm, grid)?);
        self.plans
            .lock()
            .expect("plan cache")
            .insert(key, plan.clone());
        Ok(plan)
    }

    /// Runs every level of the schedule on the given priors and syndrome.
    pub fn run(&self, model: &Model, state: LevelState) -> Result<TopLevel> {
        let steps = self.config.schedule.steps(model, state.grid.sizes(), &self.library)?;
        let mut state = state;
        let mut resets = 0;
        for step in &steps {
            let plan = self.plan(step, state.grid)?;
            let (next, stats) = rg_iteration(&plan, &state, self.config.bp_rounds, self.config.execution)?;
            resets += stats.resets;
            state = next;
        }
        if state.grid.num_sites() != 1 {
            return Err(Error::Schedule("schedule did not reach a single site".into()));
        }
        Ok(TopLevel {
            table: state.table(0).to_vec(),
            levels: steps.len(),
            resets,
        })
    }

    /// Initial level for a 2D lattice: one joint table per site over its
    /// `H` and `V` qubits.
    pub fn level_2d(
        lat: &Lattice2D,
        channel: &NoiseChannel,
        s: &SyndromeConfig,
        alphabet: Alphabet,
    ) -> Result<(Model, LevelState)> {
        if channel.num_qubits() != lat.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: lat.num_qubits(),
                actual: channel.num_qubits(),
            });
        }
        if s.ell != lat.ell() {
            return Err(Error::DimensionMismatch {
                expected: lat.ell(),
                actual: s.ell,
            });
        }
        let model = Model::toric2d(alphabet);
        let bits = alphabet.bits();
        let a_size = alphabet.size();
        let states = model.site_states();
        let mut tables = Vec::with_capacity(lat.num_sites() * states);
        for site in 0..lat.num_sites() {
            for idx in 0..states {
                let h = Letter::from_index(idx & (a_size - 1));
                let v = Letter::from_index(idx >> bits);
                tables.push(channel.prob_in(2 * site, h, alphabet) * channel.prob_in(2 * site + 1, v, alphabet));
            }
        }
        let state = LevelState::new(&model, lat.grid(), tables, s.site_bits(alphabet))?;
        Ok((model, state))
    }

    /// Decodes a 2D syndrome. In bit-flip mode only fluxes are read and the
    /// correction is X-only.
    pub fn decode_2d(
        &self,
        lat: &Lattice2D,
        channel: &NoiseChannel,
        s: &SyndromeConfig,
        alphabet: Alphabet,
    ) -> Result<Decoded2D> {
        let s = match alphabet {
            Alphabet::Pauli => s.clone(),
            Alphabet::BitFlip => SyndromeConfig {
                ell: s.ell,
                a: vec![false; s.a.len()],
                b: s.b.clone(),
            },
        };
        let (model, state) = Decoder::level_2d(lat, channel, &s, alphabet)?;
        let top = self.run(&model, state)?;
        let t = lat.pure_error(&s)?;
        let tc = lat.crossing(&t);
        let mut probabilities = vec![0.0; top.table.len()];
        for (idx, &p) in top.table.iter().enumerate() {
            probabilities[class_of_2d(idx, alphabet).xor(tc).0 as usize] = p;
        }
        let class = LogicalClass(argmax(&probabilities) as u8);
        let mut correction = t;
        correction.mul_assign(&lat.logical_operator(class));
        Ok(Decoded2D {
            class,
            probabilities,
            correction,
            resets: top.resets,
        })
    }

    /// Initial level for a space-time history with independent space-like
    /// and time-like flips.
    pub fn level_3d(lat: &Lattice3D, p_space: f64, p_time: f64, db: &CubicSyndrome) -> Result<(Model, LevelState)> {
        for p in [p_space, p_time] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} outside [0, 1]")));
            }
        }
        if db.db.len() != lat.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: lat.num_sites(),
                actual: db.db.len(),
            });
        }
        let model = Model::flux3d();
        let ps = [p_space, p_space, p_time];
        let table: Vec<f64> = (0..8)
            .map(|idx| {
                (0..3)
                    .map(|a| if idx >> a & 1 == 1 { ps[a] } else { 1.0 - ps[a] })
                    .product()
            })
            .collect();
        let state = LevelState::uniform_prior(&model, lat.grid(), &table, db.site_bits())?;
        Ok((model, state))
    }

    /// Decodes a cubic syndrome. The spatial class is the argmax of the
    /// spatial marginal; the time winding is then chosen conditionally.
    pub fn decode_3d(&self, lat: &Lattice3D, p_space: f64, p_time: f64, db: &CubicSyndrome) -> Result<Decoded3D> {
        let (model, state) = Decoder::level_3d(lat, p_space, p_time, db)?;
        let top = self.run(&model, state)?;
        let t = lat.pure_history(db)?;
        let tc = lat.crossing(&t);
        let mut probabilities = vec![0.0; 8];
        for (idx, &p) in top.table.iter().enumerate() {
            probabilities[(idx as u8 ^ tc.0) as usize] = p;
        }
        let spatial: Vec<f64> = (0..4).map(|c| probabilities[c] + probabilities[c | 4]).collect();
        let s = argmax(&spatial);
        let c = if probabilities[s | 4] > probabilities[s] { s | 4 } else { s };
        let class = HistoryClass(c as u8);
        let correction = t.xor(&lat.logical_history(class));
        Ok(Decoded3D {
            class,
            probabilities,
            correction,
            resets: top.resets,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_syndrome_decodes_to_identity() {
        let lat = Lattice2D::new(8).unwrap();
        let ch = NoiseChannel::bit_flip(0.02, lat.num_qubits()).unwrap();
        let d = Decoder::new(DecoderConfig::default());
        let r = d.decode_2d(&lat, &ch, &SyndromeConfig::zeros(8), Alphabet::BitFlip).unwrap();
        assert!(r.class.is_trivial());
        assert!(r.correction.is_identity());
        let l3 = Lattice3D::cube(4).unwrap();
        let d3 = Decoder::new(DecoderConfig::new(Schedule::Cell211));
        let r = d3
            .decode_3d(&l3, 0.01, 0.01, &l3.delta_syndrome(&l3.empty_history()).unwrap())
            .unwrap();
        assert_eq!(r.class, HistoryClass(0));
        assert_eq!(r.correction.weight(), 0);
    }

    #[test]
    fn single_flip_is_corrected() {
        let lat = Lattice2D::new(4).unwrap();
        let ch = NoiseChannel::bit_flip(0.05, lat.num_qubits()).unwrap();
        let d = Decoder::new(DecoderConfig::default());
        for q in 0..lat.num_qubits() {
            let e = PauliWord::x_on(lat.num_qubits(), &[q]);
            let s = lat.extract_syndrome(&e).unwrap();
            let r = d.decode_2d(&lat, &ch, &s, Alphabet::BitFlip).unwrap();
            let mut res = e.clone();
            res.mul_assign(&r.correction);
            assert!(lat.logical_class(&res).unwrap().is_trivial(), "qubit {q}");
        }
    }

    #[test]
    fn single_space_and_time_faults_are_corrected() {
        let l = Lattice3D::cube(4).unwrap();
        let d = Decoder::new(DecoderConfig::new(Schedule::Cell211));
        for face in 0..l.num_bits() {
            let mut h = l.empty_history();
            h.flip(face);
            let db = l.delta_syndrome(&h).unwrap();
            let r = d.decode_3d(&l, 0.02, 0.02, &db).unwrap();
            let j = l.judge(&h, &r.correction).unwrap();
            assert!(j.success, "face {face}");
            assert_eq!(j.residual, HistoryClass(0), "face {face}");
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let l = Lattice3D::cube(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq = Decoder::new(DecoderConfig::new(Schedule::Hybrid));
        let par = Decoder::new(DecoderConfig::new(Schedule::Hybrid).with_execution(Execution::Parallel));
        for _ in 0..5 {
            let h = l.sample_history(0.03, &mut rng);
            let db = l.delta_syndrome(&h).unwrap();
            let a = seq.decode_3d(&l, 0.03, 0.03, &db).unwrap();
            let b = par.decode_3d(&l, 0.03, 0.03, &db).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.25, 0.25, 0.5, 0.5]), 2);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }
}
