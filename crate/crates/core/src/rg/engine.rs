//! Per-cell sums, belief propagation and one RG iteration.
//!
//! The prior of a level is held in product form: a joint table per site over
//! the letters of the faces it owns. A cell's weight for a word `t l s e` is
//! the product of its sites' tables and, for qubits owned by a neighbouring
//! cell, the owner's single-face marginal.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{Grid, Model};
use crate::group_prob::{normalize, GroupDistribution, Normalized, QubitMessage, FLOOR};
use crate::pauli::Tag;

use super::plan::{Gathered, LevelPlan};

/// Above this many `(current, shared configuration)` pairs the per-cell sums
/// are streamed over words instead of being tabulated.
pub const COMPRESS_LIMIT: usize = 1 << 16;

/// Priors and syndrome of one RG level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelState {
    pub grid: Grid,
    site_states: usize,
    tables: Vec<f64>,
    /// Bit `k` of entry `s`: check kind `k` at site `s`.
    pub syndrome: Vec<u8>,
}

impl LevelState {
    pub fn new(model: &Model, grid: Grid, tables: Vec<f64>, syndrome: Vec<u8>) -> Result<Self> {
        let site_states = model.site_states();
        if grid.dims() != model.dims() {
            return Err(Error::DimensionMismatch {
                expected: model.dims(),
                actual: grid.dims(),
            });
        }
        if tables.len() != grid.num_sites() * site_states {
            return Err(Error::DimensionMismatch {
                expected: grid.num_sites() * site_states,
                actual: tables.len(),
            });
        }
        if syndrome.len() != grid.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_sites(),
                actual: syndrome.len(),
            });
        }
        for k in 0..model.checks().len() {
            let parity = syndrome.iter().fold(0u8, |acc, s| acc ^ (s >> k & 1));
            if parity != 0 {
                return Err(Error::InvalidSyndrome(format!(
                    "odd number of {} defects",
                    model.checks()[k].name
                )));
            }
        }
        Ok(LevelState {
            grid,
            site_states,
            tables,
            syndrome,
        })
    }

    /// Every site gets the same joint table.
    pub fn uniform_prior(model: &Model, grid: Grid, site_table: &[f64], syndrome: Vec<u8>) -> Result<Self> {
        let tables = site_table
            .iter()
            .copied()
            .cycle()
            .take(site_table.len() * grid.num_sites())
            .collect();
        LevelState::new(model, grid, tables, syndrome)
    }

    pub fn table(&self, site: usize) -> &[f64] {
        &self.tables[site * self.site_states..(site + 1) * self.site_states]
    }

    pub fn tables(&self) -> &[f64] {
        &self.tables
    }

    pub fn site_states(&self) -> usize {
        self.site_states
    }

    /// Letter marginal of every face, laid out `[face * alphabet + letter]`.
    pub fn face_marginals(&self, letter_bits: usize) -> Vec<f64> {
        let dims = self.grid.dims();
        let a_size = 1usize << letter_bits;
        let mask = a_size - 1;
        let mut out = vec![0.0; self.grid.num_faces() * a_size];
        for s in 0..self.grid.num_sites() {
            let t = self.table(s);
            for (idx, &p) in t.iter().enumerate() {
                for a in 0..dims {
                    let l = idx >> (a * letter_bits) & mask;
                    out[(s * dims + a) * a_size + l] += p;
                }
            }
        }
        out
    }
}

enum Terms {
    /// `b[l * n_combos + combo]` and its sum over `l`.
    Compressed { b: Vec<f64>, m: Vec<f64> },
    Direct,
}

/// One cell of a level with its prior factors and pure error fixed.
pub struct CellState<'a> {
    plan: &'a LevelPlan,
    factors: Vec<&'a [f64]>,
    t: Gathered,
    prior_q: Vec<f64>,
    terms: Terms,
}

impl<'a> CellState<'a> {
    pub fn new(plan: &'a LevelPlan, state: &'a LevelState, marginals: &'a [f64], c: usize) -> Self {
        let spc = plan.sites_per_cell;
        let a_size = plan.alphabet_size();
        let mut factors: Vec<&[f64]> = Vec::with_capacity(plan.n_factors());
        for k in 0..spc {
            factors.push(state.table(plan.cell_sites[c * spc + k]));
        }
        let ne = plan.extra_factors.len();
        for e in 0..ne {
            let f = plan.extra_faces[c * ne + e];
            factors.push(&marginals[f * a_size..(f + 1) * a_size]);
        }
        let ns = plan.n_shared();
        let mut prior_q = Vec::with_capacity(ns * a_size);
        for m in 0..ns {
            let f = plan.shared_faces[c * ns + m];
            prior_q.extend_from_slice(&marginals[f * a_size..(f + 1) * a_size]);
        }
        let mut t = Gathered::default();
        plan.gather_into(plan.t_vector(plan.t_bits(c, &state.syndrome)), &mut t);
        let mut cell = CellState {
            plan,
            factors,
            t,
            prior_q,
            terms: Terms::Direct,
        };
        let n_l = 1usize << plan.words.n_l;
        let nc = plan.n_combos();
        if n_l * nc <= COMPRESS_LIMIT {
            let mut b = vec![0.0; n_l * nc];
            cell.for_each_word(|l, combo, w| b[l * nc + combo] += w);
            let mut m = vec![0.0; nc];
            for l in 0..n_l {
                for (acc, v) in m.iter_mut().zip(&b[l * nc..(l + 1) * nc]) {
                    *acc += v;
                }
            }
            cell.terms = Terms::Compressed { b, m };
        }
        cell
    }

    pub fn plan(&self) -> &LevelPlan {
        self.plan
    }

    pub fn is_compressed(&self) -> bool {
        matches!(self.terms, Terms::Compressed { .. })
    }

    /// Calls `f(l_bits, shared_configuration, prior_weight)` for every word
    /// consistent with the pure error and alias constraints.
    fn for_each_word(&self, mut f: impl FnMut(usize, usize, f64)) {
        let wt = &self.plan.words;
        let nf = wt.n_factors;
        let tf = &self.t.factors;
        for w in 0..wt.len() {
            if wt.alias[w] != self.t.alias {
                continue;
            }
            let fi = &wt.factors[w * nf..(w + 1) * nf];
            let mut p = 1.0;
            for k in 0..nf {
                p *= self.factors[k][(fi[k] ^ tf[k]) as usize];
            }
            if p == 0.0 {
                continue;
            }
            f(w >> wt.n_se, (wt.combo[w] ^ self.t.combo) as usize, p);
        }
    }

    fn letters(&self, combo: usize, out: &mut [usize]) {
        let bits = self.plan.letter_bits();
        let mask = (1 << bits) - 1;
        for (m, o) in out.iter_mut().enumerate() {
            *o = combo >> (m * bits) & mask;
        }
    }

    /// Unnormalized extrinsic sums `sum_{words} w * prod_{q' != q} m_in(q')`,
    /// before division by the prior marginal.
    fn extrinsic(&self, ins: &[f64]) -> Vec<f64> {
        let ns = self.plan.n_shared();
        let a_size = self.plan.alphabet_size();
        let mut out = vec![0.0; ns * a_size];
        let mut letters = vec![0usize; ns];
        let mut prefix = vec![1.0; ns + 1];
        let mut suffix = vec![1.0; ns + 1];
        let mut add = |combo: usize, w: f64| {
            self.letters(combo, &mut letters);
            for m in 0..ns {
                prefix[m + 1] = prefix[m] * ins[m * a_size + letters[m]];
            }
            for m in (0..ns).rev() {
                suffix[m] = suffix[m + 1] * ins[m * a_size + letters[m]];
            }
            for m in 0..ns {
                out[m * a_size + letters[m]] += w * prefix[m] * suffix[m + 1];
            }
        };
        match &self.terms {
            Terms::Compressed { m, .. } => {
                for (combo, &w) in m.iter().enumerate() {
                    if w != 0.0 {
                        add(combo, w);
                    }
                }
            }
            Terms::Direct => self.for_each_word(|_, combo, w| add(combo, w)),
        }
        out
    }

    /// All outgoing messages given incoming ones (`[m * alphabet + letter]`),
    /// each normalized. Returns the messages and the number of resets.
    pub fn outgoing(&self, ins: &[f64]) -> (Vec<f64>, u64) {
        let a_size = self.plan.alphabet_size();
        let mut out = self.extrinsic(ins);
        for (o, &p) in out.iter_mut().zip(&self.prior_q) {
            *o = if p < FLOOR { 0.0 } else { *o / p };
        }
        let mut resets = 0;
        for chunk in out.chunks_mut(a_size) {
            if normalize(chunk) == Normalized::Reset {
                resets += 1;
            }
        }
        (out, resets)
    }

    /// Outgoing message on shared qubit `m`.
    pub fn bp_message_update(&self, ins: &[f64], m: usize) -> QubitMessage {
        let a_size = self.plan.alphabet_size();
        let (out, _) = self.outgoing(ins);
        QubitMessage::new(out[m * a_size..(m + 1) * a_size].to_vec()).expect("message size")
    }

    /// Current distribution `P(l | t)` indexed by L exponent bits, with each
    /// word weighted by the incoming messages on the shared qubits. Pass
    /// `None` for the plain RG sum.
    pub fn cell_distribution(&self, ins: Option<&[f64]>) -> (Vec<f64>, Normalized) {
        let ns = self.plan.n_shared();
        let a_size = self.plan.alphabet_size();
        let n_l = 1usize << self.plan.words.n_l;
        let mut out = vec![0.0; n_l];
        let mut letters = vec![0usize; ns];
        let mut weight = |combo: usize| -> f64 {
            match ins {
                None => 1.0,
                Some(ins) => {
                    self.letters(combo, &mut letters);
                    letters
                        .iter()
                        .enumerate()
                        .map(|(m, &a)| ins[m * a_size + a])
                        .product()
                }
            }
        };
        match &self.terms {
            Terms::Compressed { b, .. } => {
                let nc = self.plan.n_combos();
                for combo in 0..nc {
                    let w = weight(combo);
                    if w == 0.0 {
                        continue;
                    }
                    for (l, o) in out.iter_mut().enumerate() {
                        *o += b[l * nc + combo] * w;
                    }
                }
            }
            Terms::Direct => {
                let mut cache: Vec<(usize, usize, f64)> = Vec::new();
                self.for_each_word(|l, combo, p| cache.push((l, combo, p)));
                for (l, combo, p) in cache {
                    out[l] += p * weight(combo);
                }
            }
        }
        let n = normalize(&mut out);
        (out, n)
    }

    /// [`CellState::cell_distribution`] as a table over the cell's L
    /// generators.
    pub fn current_distribution(&self, ins: Option<&[f64]>) -> GroupDistribution {
        let basis = self.plan.spec.basis();
        let gens = basis.of_tag(Tag::L).map(|g| basis.generator(g).clone()).collect();
        GroupDistribution::new(gens, self.cell_distribution(ins).0).expect("one entry per L assignment")
    }
}

/// Diagnostics gathered while running a level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LevelStats {
    /// Tables or messages that carried no mass and were reset to uniform.
    pub resets: u64,
}

/// Builds the cell states of a level.
pub fn cells<'a>(plan: &'a LevelPlan, state: &'a LevelState, marginals: &'a [f64], exec: Execution) -> Vec<CellState<'a>> {
    exec.map_range(plan.n_cells(), |c| CellState::new(plan, state, marginals, c))
}

/// Uniform incoming messages for every shared qubit of every cell.
pub fn uniform_messages(plan: &LevelPlan) -> Vec<f64> {
    let a = plan.alphabet_size();
    vec![1.0 / a as f64; plan.n_cells() * plan.n_shared() * a]
}

/// One synchronous flooding round: every cell computes its outgoing messages
/// from `ins`, then each message is delivered to the partner slot.
pub fn bp_round(cells: &[CellState<'_>], ins: &[f64], exec: Execution) -> (Vec<f64>, u64) {
    let Some(first) = cells.first() else {
        return (Vec::new(), 0);
    };
    let plan = first.plan;
    let ns = plan.n_shared();
    let a = plan.alphabet_size();
    let stride = ns * a;
    let outs = exec.map_range(cells.len(), |c| cells[c].outgoing(&ins[c * stride..(c + 1) * stride]));
    let mut next = vec![0.0; ins.len()];
    let mut resets = 0;
    for (_, r) in &outs {
        resets += r;
    }
    for (id, &p) in plan.partner.iter().enumerate() {
        let (src, m) = (p / ns, p % ns);
        next[id * a..(id + 1) * a].copy_from_slice(&outs[src].0[m * a..(m + 1) * a]);
    }
    (next, resets)
}

/// Runs `bp_rounds` of message passing, then the message-weighted RG sum in
/// every cell. The coarse prior of each cell is its joint current
/// distribution; the coarse syndrome is the cell's total charge.
pub fn rg_iteration(
    plan: &LevelPlan,
    state: &LevelState,
    bp_rounds: usize,
    exec: Execution,
) -> Result<(LevelState, LevelStats)> {
    if plan.fine != state.grid {
        return Err(Error::Schedule(format!(
            "plan expects grid {:?}, level has {:?}",
            plan.fine.sizes(),
            state.grid.sizes()
        )));
    }
    let model = plan.spec.model();
    let marginals = state.face_marginals(model.letter_bits());
    let cells = cells(plan, state, &marginals, exec);
    let mut ins = uniform_messages(plan);
    let mut stats = LevelStats::default();
    if plan.n_shared() > 0 {
        for _ in 0..bp_rounds {
            let (next, r) = bp_round(&cells, &ins, exec);
            ins = next;
            stats.resets += r;
        }
    }
    let stride = plan.n_shared() * plan.alphabet_size();
    let site_states = model.site_states();
    let coarse = exec.map_range(cells.len(), |c| {
        let (d, n) = cells[c].cell_distribution(Some(&ins[c * stride..(c + 1) * stride]));
        let mut t = vec![0.0; site_states];
        for (l, p) in d.iter().enumerate() {
            t[plan.l_map[l]] += p;
        }
        (t, n == Normalized::Reset)
    });
    let mut tables = Vec::with_capacity(cells.len() * site_states);
    for (t, reset) in coarse {
        tables.extend_from_slice(&t);
        stats.resets += reset as u64;
    }
    let spc = plan.sites_per_cell;
    let syndrome = (0..plan.n_cells())
        .map(|c| {
            plan.cell_sites[c * spc..(c + 1) * spc]
                .iter()
                .fold(0u8, |acc, &s| acc ^ state.syndrome[s])
        })
        .collect();
    Ok((LevelState::new(model, plan.coarse, tables, syndrome)?, stats))
}
