//! Oracles and property checks shared by the integration and acceptance
//! tests.

#![allow(dead_code)]

use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toric_rg::geometry::{Grid, Offset, MAX_DIMS};
use toric_rg::group_prob::GroupDistribution;
use toric_rg::harness::{run_batch, PointSpec};
use toric_rg::pauli::{ExponentVector, Letter, PauliWord, Tag};
use toric_rg::rg::engine::{cells, rg_iteration, uniform_messages, CellState, LevelState};
use toric_rg::rg::{CellLibrary, Decoder, DecoderConfig, LevelPlan, Schedule, UnitCellSpec};
use toric_rg::{Alphabet, Execution, Lattice2D, Lattice3D, NoiseChannel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Skewed random site tables: entries `u^4`, normalized per site.
pub fn random_tables<R: Rng>(rng: &mut R, sites: usize, states: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(sites * states);
    for _ in 0..sites {
        let row: Vec<f64> = (0..states).map(|_| rng.gen::<f64>().powi(4) + 1e-6).collect();
        let s: f64 = row.iter().sum();
        t.extend(row.iter().map(|x| x / s));
    }
    t
}

/// Random syndrome with even parity per check kind; the last site absorbs
/// the parity fix.
pub fn random_syndrome<R: Rng>(rng: &mut R, sites: usize, kinds: usize) -> Vec<u8> {
    let mut s: Vec<u8> = (0..sites).map(|_| rng.gen::<u8>() & ((1 << kinds) - 1)).collect();
    let parity = s[..sites - 1].iter().fold(0u8, |a, b| a ^ b);
    s[sites - 1] = parity;
    s
}

pub fn rotation(first: usize, dims: usize) -> [usize; MAX_DIMS] {
    let mut p = [0; MAX_DIMS];
    for (a, v) in p.iter_mut().enumerate().take(dims) {
        *v = (first + a) % dims;
    }
    p
}

/// Random level for `spec` on a grid four sites wide along every axis.
pub fn random_level(spec: &UnitCellSpec, seed: u64) -> LevelState {
    let model = spec.model();
    let grid = Grid::new(&vec![4; model.dims()]).unwrap();
    let mut r = rng(seed);
    let tables = random_tables(&mut r, grid.num_sites(), model.site_states());
    let syndrome = random_syndrome(&mut r, grid.num_sites(), model.checks().len());
    LevelState::new(model, grid, tables, syndrome).unwrap()
}

/// Every Pauli word on the cell at the origin that reproduces the measured
/// syndrome, as `(L bits, word, prior weight)`. The syndrome is evaluated
/// from the check supports and the current from the basis decomposition of
/// single-qubit operators; the prior is the product of the sites' joint
/// tables and, for qubits owned outside the cell, the owning site's
/// marginal. Words pack `letter_bits` bits per slot.
pub fn enumerate_cell(
    spec: &UnitCellSpec,
    perm: [usize; MAX_DIMS],
    state: &LevelState,
    mut visit: impl FnMut(usize, usize, f64),
) {
    let model = spec.model();
    let dims = model.dims();
    let nb = model.letter_bits();
    let mask = (1usize << nb) - 1;
    let grid = state.grid;
    let slots = spec.slots();
    let n = slots.len();
    let basis = spec.basis();
    let map = |o: &Offset| {
        let mut g = [0i64; MAX_DIMS];
        for a in 0..dims {
            g[perm[a]] = o[a];
        }
        g
    };
    let face_of = |q: usize| grid.face(grid.shift(0, &map(&slots[q].offset)), perm[slots[q].axis]);
    let faces: HashSet<usize> = (0..n).map(face_of).collect();
    assert_eq!(faces.len(), n, "cell must not wrap onto itself");

    let mut factors: Vec<(Vec<(usize, usize)>, Vec<f64>)> = Vec::new();
    for (k, off) in spec.sites().iter().enumerate() {
        let site = grid.shift(0, &map(off));
        let qs = spec.site_slots()[k]
            .iter()
            .enumerate()
            .map(|(a, &q)| (q, perm[a] * nb))
            .collect();
        factors.push((qs, state.table(site).to_vec()));
    }
    let owned: HashSet<Offset> = spec.sites().iter().copied().collect();
    for (q, s) in slots.iter().enumerate() {
        if owned.contains(&s.offset) {
            continue;
        }
        let f = face_of(q);
        let (site, axis) = (f / dims, f % dims);
        let mut m = vec![0.0; 1 << nb];
        for (idx, &p) in state.table(site).iter().enumerate() {
            m[idx >> (axis * nb) & mask] += p;
        }
        factors.push((vec![(q, 0)], m));
    }

    let ls: Vec<usize> = basis.of_tag(Tag::L).collect();
    let n_vars = n * nb;
    let mut syn_of = vec![0u64; n_vars];
    let mut l_of = vec![0usize; n_vars];
    for (j, (syn, lv)) in syn_of.iter_mut().zip(l_of.iter_mut()).enumerate() {
        let (q, c) = (j / nb, j % nb);
        for (k, chk) in spec.measured().iter().enumerate() {
            let support = spec.check_slots(*chk).expect("measured checks lie inside the cell");
            if model.checks()[chk.kind].bit == c && support.iter().filter(|&&s| s == q).count() % 2 == 1 {
                *syn |= 1 << k;
            }
        }
        let w = if c == 0 {
            PauliWord::x_on(n, &[q])
        } else {
            PauliWord::z_on(n, &[q])
        };
        let e: ExponentVector = basis.decompose(&w).unwrap();
        *lv = ls
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &g)| acc | (e.get(g) as usize) << i);
    }
    let target = spec.measured().iter().enumerate().fold(0u64, |acc, (k, chk)| {
        let s = grid.shift(0, &map(&spec.sites()[chk.site]));
        acc | ((state.syndrome[s] >> chk.kind & 1) as u64) << k
    });

    let (mut g, mut syn, mut lv) = (0usize, 0u64, 0usize);
    for v in 0..1usize << n_vars {
        if v > 0 {
            let j = v.trailing_zeros() as usize;
            g ^= 1 << j;
            syn ^= syn_of[j];
            lv ^= l_of[j];
        }
        if syn != target {
            continue;
        }
        let mut w = 1.0;
        for (qs, table) in &factors {
            let idx = qs
                .iter()
                .fold(0usize, |acc, &(q, sh)| acc | (g >> (q * nb) & mask) << sh);
            w *= table[idx];
        }
        visit(lv, g, w);
    }
}

/// `P(l | t)` for the cell at the origin by enumeration.
pub fn brute_force_cell(spec: &UnitCellSpec, perm: [usize; MAX_DIMS], state: &LevelState) -> Vec<f64> {
    let mut out = vec![0.0; 1 << spec.basis().of_tag(Tag::L).count()];
    enumerate_cell(spec, perm, state, |l, _, w| out[l] += w);
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
    out
}

/// Outgoing BP messages of the cell at the origin by enumeration: for each
/// shared slot, the sum over words of prior times the incoming messages on
/// the other shared slots, divided by the slot's prior marginal and
/// normalized.
pub fn brute_force_outgoing(plan: &LevelPlan, state: &LevelState, ins: &[f64]) -> Vec<f64> {
    let nb = plan.letter_bits();
    let a = plan.alphabet_size();
    let ns = plan.n_shared();
    let mut out = vec![0.0; ns * a];
    enumerate_cell(&plan.spec, plan.perm, state, |_, g, w| {
        let letter = |m: usize| g >> (plan.shared[m] * nb) & (a - 1);
        for m in 0..ns {
            let others: f64 = (0..ns).filter(|&k| k != m).map(|k| ins[k * a + letter(k)]).product();
            out[m * a + letter(m)] += w * others;
        }
    });
    let marg = state.face_marginals(nb);
    for m in 0..ns {
        let f = plan.shared_faces[m];
        let chunk = &mut out[m * a..(m + 1) * a];
        for (x, p) in chunk.iter_mut().zip(&marg[f * a..(f + 1) * a]) {
            *x /= p;
        }
        let s: f64 = chunk.iter().sum();
        chunk.iter_mut().for_each(|x| *x /= s);
    }
    out
}

/// Engine result for the cell at the origin with uniform messages.
pub fn engine_cell(spec: Arc<UnitCellSpec>, perm: [usize; MAX_DIMS], state: &LevelState) -> Vec<f64> {
    let plan = LevelPlan::new(spec, perm, state.grid).unwrap();
    let marg = state.face_marginals(plan.letter_bits());
    CellState::new(&plan, state, &marg, 0).cell_distribution(None).0
}

/// Largest deviation between engine and brute force over `cases` random
/// levels of the named cell, with random orientations in 3D.
pub fn cell_exactness(name: &str, cases: u64, seed: u64) -> f64 {
    let lib = CellLibrary::builtin();
    let spec = lib.get(name).unwrap();
    let dims = spec.model().dims();
    let mut worst: f64 = 0.0;
    for c in 0..cases {
        let state = random_level(&spec, seed.wrapping_mul(1000).wrapping_add(c));
        let perm = if dims == 3 { rotation(c as usize % 3, 3) } else { rotation(0, 2) };
        let a = engine_cell(spec.clone(), perm, &state);
        let b = brute_force_cell(&spec, perm, &state);
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn close(a: f64, b: f64, tol: f64) -> Result<(), TestCaseError> {
    prop_assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    Ok(())
}

/// Cell sums, messages and coarse tables all sum to one.
pub fn prop_normalization(cases: u32) -> Result<(), String> {
    let lib = CellLibrary::builtin();
    runner(cases)
        .run(&(any::<u64>(), 0usize..4, 0usize..3), |(seed, which, rounds)| {
            let name = ["cell22", "cell22x", "cell211", "cell221"][which];
            let spec = lib.get(name).unwrap();
            let dims = spec.model().dims();
            let state = random_level(&spec, seed);
            let perm = if dims == 3 { rotation(seed as usize % 3, 3) } else { rotation(0, 2) };
            let plan = LevelPlan::new(spec.clone(), perm, state.grid).unwrap();
            let marg = state.face_marginals(plan.letter_bits());
            let cs = cells(&plan, &state, &marg, Execution::Sequential);
            let ins = uniform_messages(&plan);
            let stride = plan.n_shared() * plan.alphabet_size();
            for (c, cell) in cs.iter().enumerate().take(4) {
                let (d, _) = cell.cell_distribution(Some(&ins[c * stride..(c + 1) * stride]));
                close(d.iter().sum(), 1.0, 1e-9)?;
                let (out, _) = cell.outgoing(&ins[c * stride..(c + 1) * stride]);
                for m in out.chunks(plan.alphabet_size()) {
                    close(m.iter().sum(), 1.0, 1e-9)?;
                }
            }
            let (coarse, _) = rg_iteration(&plan, &state, rounds, Execution::Sequential).unwrap();
            for s in 0..coarse.grid.num_sites() {
                close(coarse.table(s).iter().sum(), 1.0, 1e-9)?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Marginals of a group distribution preserve mass and compose.
pub fn prop_additivity(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(any::<u64>(), 2usize..8), |(seed, k)| {
            let mut r = rng(seed);
            let gens: Vec<PauliWord> = (0..k).map(|i| PauliWord::x_on(k, &[i])).collect();
            let probs = random_tables(&mut r, 1, 1 << k);
            let d = GroupDistribution::new(gens, probs).unwrap();
            let a: Vec<usize> = (0..k).filter(|_| r.gen_bool(0.5)).collect();
            let mut ab = a.clone();
            ab.extend((0..k).filter(|i| !a.contains(i) && r.gen_bool(0.5)));
            let ma = d.marginal(&a).unwrap();
            close(ma.total(), 1.0, 1e-12)?;
            let via = d.marginal(&ab).unwrap().marginal(&(0..a.len()).collect::<Vec<_>>()).unwrap();
            for (x, y) in ma.probs().iter().zip(via.probs()) {
                close(*x, *y, 1e-12)?;
            }
            for q in 0..k {
                close(d.qubit_marginal(q).unwrap().probs().iter().sum(), 1.0, 1e-12)?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Exponent vectors and words survive a trip through every built-in basis.
pub fn prop_basis_round_trip(cases: u32) -> Result<(), String> {
    let lib = CellLibrary::builtin();
    runner(cases)
        .run(&(any::<u64>(), 0usize..4), |(seed, which)| {
            let name = ["cell22", "cell22x", "cell211", "cell221"][which];
            let basis = lib.get(name).unwrap().basis().clone();
            let mut r = rng(seed);
            let k = basis.len();
            let e = ExponentVector::new(r.gen::<u64>() & ((1u64 << k) - 1), k);
            let w = basis.compose(&e);
            prop_assert_eq!(basis.decompose(&w).unwrap(), e);
            let n = basis.num_qubits();
            let letters: Vec<(usize, Letter)> = (0..n)
                .map(|q| {
                    let l = Letter::from_index(r.gen_range(0..basis.alphabet().size()));
                    (q, l)
                })
                .collect();
            let w = PauliWord::from_sparse(n, &letters).unwrap();
            prop_assert_eq!(basis.compose(&basis.decompose(&w).unwrap()), w);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Sequential and parallel execution give identical decisions and batches.
pub fn prop_parallel_determinism(cases: u32) -> Result<(), String> {
    let lat = Lattice3D::cube(4).unwrap();
    let seq = Decoder::new(DecoderConfig::new(Schedule::Cell211));
    let par = Decoder::new(DecoderConfig::new(Schedule::Cell211).with_execution(Execution::Parallel));
    runner(cases)
        .run(&(any::<u64>(), 1u32..60), |(seed, pm)| {
            let p = pm as f64 / 1000.0;
            let h = lat.sample_history(p, &mut rng(seed));
            let db = lat.delta_syndrome(&h).unwrap();
            let a = seq.decode_3d(&lat, p, p, &db).unwrap();
            let b = par.decode_3d(&lat, p, p, &db).unwrap();
            prop_assert_eq!(a, b);
            let spec = PointSpec::memory(2, 2, p, 8, seed);
            let x = run_batch(&seq, &spec, Execution::Sequential).unwrap();
            let y = run_batch(&seq, &spec, Execution::Parallel).unwrap();
            prop_assert_eq!(x.records, y.records);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Scaling every prior table by one positive constant leaves the decision.
pub fn prop_argmax_scale_invariance(cases: u32) -> Result<(), String> {
    let lat = Lattice3D::cube(4).unwrap();
    let d = Decoder::new(DecoderConfig::new(Schedule::Cell211));
    runner(cases)
        .run(&(any::<u64>(), 1u32..60, 1u32..1000), |(seed, pm, sc)| {
            let p = pm as f64 / 1000.0;
            let scale = sc as f64 / 37.0;
            let h = lat.sample_history(p, &mut rng(seed));
            let db = lat.delta_syndrome(&h).unwrap();
            let (model, state) = Decoder::level_3d(&lat, p, p, &db).unwrap();
            let scaled: Vec<f64> = state.tables().iter().map(|x| x * scale).collect();
            let state2 = LevelState::new(&model, state.grid, scaled, state.syndrome.clone()).unwrap();
            let a = d.run(&model, state).unwrap().table;
            let b = d.run(&model, state2).unwrap().table;
            prop_assert_eq!(
                toric_rg::rg::decoder::argmax(&a),
                toric_rg::rg::decoder::argmax(&b)
            );
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Multiplying the error by a stabilizer changes neither the syndrome nor
/// the decoder output.
pub fn prop_stabilizer_covariance(cases: u32) -> Result<(), String> {
    let lat = Lattice2D::new(4).unwrap();
    let ch = NoiseChannel::depolarizing(0.08, lat.num_qubits()).unwrap();
    let d = Decoder::new(DecoderConfig::default());
    runner(cases)
        .run(&(any::<u64>(), 0i64..4, 0i64..4, any::<bool>()), |(seed, i, j, site)| {
            use toric_rg::lattice2d::StabilizerKind;
            let e = lat.sample_error(&ch, &mut rng(seed));
            let kind = if site { StabilizerKind::Site } else { StabilizerKind::Plaquette };
            let mut e2 = e.clone();
            e2.mul_assign(&lat.stabilizer(kind, i, j));
            let s = lat.extract_syndrome(&e).unwrap();
            prop_assert_eq!(&s, &lat.extract_syndrome(&e2).unwrap());
            let a = d.decode_2d(&lat, &ch, &s, Alphabet::Pauli).unwrap();
            let b = d.decode_2d(&lat, &ch, &lat.extract_syndrome(&e2).unwrap(), Alphabet::Pauli).unwrap();
            prop_assert_eq!(a, b);
            Ok(())
        })
        .map_err(|e| e.to_string())
}
