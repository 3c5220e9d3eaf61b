//! Translation-invariant wiring of one RG level.
//!
//! A [`LevelPlan`] places copies of a unit cell on a fine grid, works out
//! which cell qubits are private, shared with a neighbouring cell, or aliased
//! to another qubit of the same cell (when the lattice is only one cell wide
//! along some axis), and precomputes, for every cell word without pure-error
//! part, the table indices it selects.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Offset, MAX_DIMS};
use crate::pauli::{Alphabet, Tag};

use super::cell::UnitCellSpec;

/// Cells whose word count exceeds this are rejected.
pub const MAX_WORDS: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotRole {
    /// Appears in this cell only.
    Private,
    /// Appears in exactly one other cell; carries a BP message.
    Shared,
    /// Same physical qubit as another slot of this cell.
    Alias(usize),
}

/// Indices selected by a packed cell vector.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Gathered {
    pub factors: Vec<u8>,
    pub combo: u32,
    pub alias: u32,
}

/// Per-word gather results for all words without T part, indexed
/// `(l_bits << n_se) | se_bits`.
#[derive(Clone, Debug)]
pub struct WordTable {
    pub n_se: usize,
    pub n_l: usize,
    pub n_factors: usize,
    pub factors: Vec<u8>,
    pub combo: Vec<u32>,
    pub alias: Vec<u32>,
}

impl WordTable {
    pub fn len(&self) -> usize {
        self.combo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combo.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct LevelPlan {
    pub spec: Arc<UnitCellSpec>,
    /// Local axis `a` of the cell lies along global axis `perm[a]`.
    pub perm: [usize; MAX_DIMS],
    pub fine: Grid,
    pub coarse: Grid,
    pub roles: Vec<SlotRole>,
    /// Shared slots in increasing order; message `m` of a cell refers to `shared[m]`.
    pub shared: Vec<usize>,
    /// Extra slots that contribute their owner's marginal as a prior factor.
    pub extra_factors: Vec<usize>,
    pub alias_pairs: Vec<(usize, usize)>,
    pub sites_per_cell: usize,
    /// `cell_sites[c * sites_per_cell + k]`: global site of local site `k`.
    pub cell_sites: Vec<usize>,
    /// `extra_faces[c * extra_factors.len() + e]`: face read by extra factor `e`.
    pub extra_faces: Vec<usize>,
    /// `shared_faces[c * shared.len() + m]`: face carried by message `m`.
    pub shared_faces: Vec<usize>,
    /// Message id `c * shared.len() + m` of the partner slot.
    pub partner: Vec<usize>,
    /// L exponent bits to coarse site-table index.
    pub l_map: Vec<usize>,
    pub t_vectors: Vec<u64>,
    pub words: WordTable,
    letter_bits: usize,
    n_qubits: usize,
}

fn map_offset(o: &Offset, perm: &[usize; MAX_DIMS], dims: usize) -> Offset {
    let mut g = [0; MAX_DIMS];
    for a in 0..dims {
        g[perm[a]] = o[a];
    }
    g
}

impl LevelPlan {
    pub fn new(spec: Arc<UnitCellSpec>, perm: [usize; MAX_DIMS], fine: Grid) -> Result<LevelPlan> {
        let model = spec.model();
        let dims = model.dims();
        if fine.dims() != dims {
            return Err(Error::Schedule(format!(
                "cell {} is {}-dimensional, lattice is {}-dimensional",
                spec.name(),
                dims,
                fine.dims()
            )));
        }
        let mut used = [false; MAX_DIMS];
        for &p in &perm[..dims] {
            if p >= dims || used[p] {
                return Err(Error::Schedule(format!("bad orientation {perm:?}")));
            }
            used[p] = true;
        }
        if !model.symmetric_under(&perm[..dims]) {
            return Err(Error::Schedule(format!(
                "model {} is not invariant under orientation {:?}",
                model.name(),
                &perm[..dims]
            )));
        }
        let mut extent = [1usize; MAX_DIMS];
        for (a, &e) in spec.extent().iter().enumerate() {
            extent[perm[a]] = e;
        }
        let mut coarse_sizes = vec![0; dims];
        for g in 0..dims {
            if fine.size(g) % extent[g] != 0 {
                return Err(Error::Schedule(format!(
                    "axis {g} of size {} is not divisible by the {} extent {}",
                    fine.size(g),
                    spec.name(),
                    extent[g]
                )));
            }
            coarse_sizes[g] = fine.size(g) / extent[g];
        }
        let coarse = Grid::new(&coarse_sizes)?;
        let n_cells = coarse.num_sites();
        let slots = spec.slots();
        let n_slots = slots.len();
        let spc = spec.sites().len();

        // Physical face of every (cell, slot).
        let mut faces = vec![0usize; n_cells * n_slots];
        let mut cell_sites = vec![0usize; n_cells * spc];
        for c in 0..n_cells {
            let cc = coarse.coords(c);
            let mut origin = [0usize; MAX_DIMS];
            for g in 0..dims {
                origin[g] = cc[g] * extent[g];
            }
            let o = fine.index(&origin);
            for (q, s) in slots.iter().enumerate() {
                let site = fine.shift(o, &map_offset(&s.offset, &perm, dims));
                faces[c * n_slots + q] = fine.face(site, perm[s.axis]);
            }
            for (k, off) in spec.sites().iter().enumerate() {
                cell_sites[c * spc + k] = fine.shift(o, &map_offset(off, &perm, dims));
            }
        }
        let mut occ: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for c in 0..n_cells {
            for q in 0..n_slots {
                occ.entry(faces[c * n_slots + q]).or_default().push((c, q));
            }
        }
        let owned: Vec<bool> = slots
            .iter()
            .map(|s| spec.sites().contains(&s.offset))
            .collect();
        let role_in = |c: usize, q: usize| -> Result<SlotRole> {
            let list = &occ[&faces[c * n_slots + q]];
            match list.len() {
                1 => Ok(SlotRole::Private),
                2 => {
                    let other = if list[0] == (c, q) { list[1] } else { list[0] };
                    if other.0 == c {
                        if owned[q] == owned[other.1] {
                            return Err(Error::Wiring(format!(
                                "slots {q} and {} of {} alias without an owner",
                                other.1,
                                spec.name()
                            )));
                        }
                        Ok(SlotRole::Alias(other.1))
                    } else {
                        Ok(SlotRole::Shared)
                    }
                }
                n => Err(Error::Wiring(format!(
                    "a qubit is used {n} times by {} cells on grid {:?}",
                    spec.name(),
                    fine.sizes()
                ))),
            }
        };
        let roles: Vec<SlotRole> = (0..n_slots).map(|q| role_in(0, q)).collect::<Result<_>>()?;
        for c in 1..n_cells {
            for (q, want) in roles.iter().enumerate() {
                if role_in(c, q)? != *want {
                    return Err(Error::Wiring(format!(
                        "cell {c} of {} disagrees on the role of slot {q}",
                        spec.name()
                    )));
                }
            }
        }
        for (q, r) in roles.iter().enumerate() {
            if *r == SlotRole::Private && !owned[q] {
                return Err(Error::Wiring(format!(
                    "slot {q} of {} has no owning cell",
                    spec.name()
                )));
            }
        }
        let shared: Vec<usize> = (0..n_slots).filter(|&q| roles[q] == SlotRole::Shared).collect();
        let extra_factors: Vec<usize> = (0..n_slots)
            .filter(|&q| !owned[q] && !matches!(roles[q], SlotRole::Alias(_)))
            .collect();
        let alias_pairs: Vec<(usize, usize)> = (0..n_slots)
            .filter_map(|q| match roles[q] {
                SlotRole::Alias(o) if owned[q] => Some((q, o)),
                _ => None,
            })
            .collect();
        let ns = shared.len();
        let bits = model.letter_bits();
        if bits * ns > 32 || bits * alias_pairs.len() > 32 {
            return Err(Error::Cell(format!("{} shares too many qubits", spec.name())));
        }
        let mut partner = vec![0usize; n_cells * ns];
        let mut shared_faces = vec![0usize; n_cells * ns];
        for c in 0..n_cells {
            for (m, &q) in shared.iter().enumerate() {
                let f = faces[c * n_slots + q];
                shared_faces[c * ns + m] = f;
                let list = &occ[&f];
                let (oc, oq) = if list[0] == (c, q) { list[1] } else { list[0] };
                let om = shared
                    .iter()
                    .position(|&s| s == oq)
                    .expect("partner slot is shared");
                partner[c * ns + m] = oc * ns + om;
            }
        }
        let ne = extra_factors.len();
        let mut extra_faces = vec![0usize; n_cells * ne];
        for c in 0..n_cells {
            for (e, &q) in extra_factors.iter().enumerate() {
                extra_faces[c * ne + e] = faces[c * n_slots + q];
            }
        }

        let basis = spec.basis();
        let ls: Vec<usize> = basis.of_tag(Tag::L).collect();
        let l_map = (0..1usize << ls.len())
            .map(|lb| {
                spec.currents()
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| lb >> k & 1 == 1)
                    .fold(0usize, |acc, (_, cur)| acc | 1 << (perm[cur.axis] * bits + cur.bit))
            })
            .collect();
        let t_vectors = basis
            .of_tag(Tag::T)
            .map(|g| basis.vector(basis.generator(g)))
            .collect();

        let mut plan = LevelPlan {
            spec: spec.clone(),
            perm,
            fine,
            coarse,
            roles,
            shared,
            extra_factors,
            alias_pairs,
            sites_per_cell: spc,
            cell_sites,
            extra_faces,
            shared_faces,
            partner,
            l_map,
            t_vectors,
            words: WordTable {
                n_se: 0,
                n_l: 0,
                n_factors: 0,
                factors: Vec::new(),
                combo: Vec::new(),
                alias: Vec::new(),
            },
            letter_bits: bits,
            n_qubits: n_slots,
        };
        plan.words = plan.build_words()?;
        Ok(plan)
    }

    fn build_words(&self) -> Result<WordTable> {
        let basis = self.spec.basis();
        let se: Vec<usize> = (0..basis.len())
            .filter(|&g| matches!(basis.tag(g), Tag::S | Tag::E))
            .collect();
        let ls: Vec<usize> = basis.of_tag(Tag::L).collect();
        let free: Vec<u64> = se
            .iter()
            .chain(&ls)
            .map(|&g| basis.vector(basis.generator(g)))
            .collect();
        if free.len() >= 63 || 1usize << free.len() > MAX_WORDS {
            return Err(Error::Cell(format!(
                "{} has {} free generators; at most 2^{} words are supported",
                self.spec.name(),
                free.len(),
                MAX_WORDS.trailing_zeros()
            )));
        }
        let n_words = 1usize << free.len();
        let nf = self.n_factors();
        let mut factors = vec![0u8; n_words * nf];
        let mut combo = vec![0u32; n_words];
        let mut alias = vec![0u32; n_words];
        let mut vs = vec![0u64; n_words];
        for w in 1..n_words {
            vs[w] = vs[w & (w - 1)] ^ free[w.trailing_zeros() as usize];
        }
        let mut g = Gathered::default();
        for (w, &v) in vs.iter().enumerate() {
            self.gather_into(v, &mut g);
            factors[w * nf..(w + 1) * nf].copy_from_slice(&g.factors);
            combo[w] = g.combo;
            alias[w] = g.alias;
        }
        Ok(WordTable {
            n_se: se.len(),
            n_l: ls.len(),
            n_factors: nf,
            factors,
            combo,
            alias,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.coarse.num_sites()
    }

    pub fn n_factors(&self) -> usize {
        self.sites_per_cell + self.extra_factors.len()
    }

    pub fn n_shared(&self) -> usize {
        self.shared.len()
    }

    pub fn letter_bits(&self) -> usize {
        self.letter_bits
    }

    pub fn alphabet_size(&self) -> usize {
        1 << self.letter_bits
    }

    pub fn n_combos(&self) -> usize {
        1 << (self.letter_bits * self.shared.len())
    }

    #[inline]
    fn letter(&self, v: u64, q: usize) -> u8 {
        let x = (v >> q & 1) as u8;
        if self.letter_bits == 2 {
            x | ((v >> (self.n_qubits + q) & 1) as u8) << 1
        } else {
            x
        }
    }

    /// Indices selected by the packed cell vector `v`.
    pub fn gather_into(&self, v: u64, out: &mut Gathered) {
        let bits = self.letter_bits;
        out.factors.clear();
        for slots in self.spec.site_slots() {
            let idx = slots.iter().enumerate().fold(0u8, |acc, (a, &q)| {
                acc | self.letter(v, q) << (self.perm[a] * bits)
            });
            out.factors.push(idx);
        }
        for &q in &self.extra_factors {
            out.factors.push(self.letter(v, q));
        }
        out.combo = self
            .shared
            .iter()
            .enumerate()
            .fold(0u32, |acc, (m, &q)| acc | (self.letter(v, q) as u32) << (m * bits));
        out.alias = self
            .alias_pairs
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &(a, b))| {
                acc | ((self.letter(v, a) ^ self.letter(v, b)) as u32) << (i * bits)
            });
    }

    /// Packed pure error for the given T exponents.
    pub fn t_vector(&self, t_bits: u64) -> u64 {
        self.t_vectors
            .iter()
            .enumerate()
            .filter(|(k, _)| t_bits >> k & 1 == 1)
            .fold(0, |acc, (_, v)| acc ^ v)
    }

    /// T exponents of cell `c` read from a site syndrome.
    pub fn t_bits(&self, c: usize, syndrome: &[u8]) -> u64 {
        self.spec
            .measured()
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, chk)| {
                let s = self.cell_sites[c * self.sites_per_cell + chk.site];
                acc | ((syndrome[s] >> chk.kind & 1) as u64) << k
            })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.spec.model().alphabet()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rg::cell::CellLibrary;

    fn plan(name: &str, perm: [usize; 3], sizes: &[usize]) -> Result<LevelPlan> {
        let lib = CellLibrary::builtin();
        LevelPlan::new(lib.get(name).unwrap(), perm, Grid::new(sizes).unwrap())
    }

    #[test]
    fn shared_sets_in_the_bulk() {
        let p = plan("cell22", [0, 1, 0], &[8, 8]).unwrap();
        assert_eq!(p.shared, vec![0, 1, 6, 7, 8, 9, 10, 11]);
        let p = plan("cell211", [0, 1, 2], &[8, 8, 8]).unwrap();
        assert_eq!(p.shared, vec![1, 2, 6, 7]);
        let p = plan("cell221", [0, 1, 2], &[8, 8, 8]).unwrap();
        assert_eq!(p.shared, vec![0, 1, 2, 4, 7, 12, 13, 14, 15, 16]);
    }

    #[test]
    fn partners_are_symmetric() {
        for (name, perm, sizes) in [
            ("cell22x", [0, 1, 0], vec![4, 4]),
            ("cell211", [1, 2, 0], vec![4, 4, 2]),
            ("cell221", [2, 0, 1], vec![4, 2, 4]),
        ] {
            let p = plan(name, perm, &sizes).unwrap();
            for (id, &other) in p.partner.iter().enumerate() {
                assert_eq!(p.partner[other], id);
                assert_ne!(other / p.n_shared(), id / p.n_shared());
                assert_eq!(p.shared_faces[id], p.shared_faces[other]);
            }
        }
    }

    #[test]
    fn single_cell_lattice_aliases_everything() {
        let p = plan("cell22", [0, 1, 0], &[2, 2]).unwrap();
        assert!(p.shared.is_empty());
        assert!(p.extra_factors.is_empty());
        assert_eq!(p.alias_pairs.len(), 4);
        let p = plan("cell211", [0, 1, 2], &[2, 1, 1]).unwrap();
        assert_eq!(p.alias_pairs, vec![(1, 6), (2, 7)]);
    }

    #[test]
    fn divisibility_and_orientation_are_checked() {
        assert!(plan("cell221", [0, 1, 2], &[2, 3, 4]).is_err());
        assert!(plan("cell22", [0, 0, 0], &[4, 4]).is_err());
    }

    #[test]
    fn word_table_matches_direct_gather() {
        let p = plan("cell221", [1, 2, 0], &[4, 4, 4]).unwrap();
        let basis = p.spec.basis();
        let free: Vec<usize> = (0..basis.len())
            .filter(|&g| matches!(basis.tag(g), Tag::S | Tag::E))
            .chain(basis.of_tag(Tag::L))
            .collect();
        let mut g = Gathered::default();
        for w in [0usize, 1, 77, 4095, (1 << 14) - 1] {
            let v = free
                .iter()
                .enumerate()
                .filter(|(b, _)| w >> b & 1 == 1)
                .fold(0u64, |acc, (_, &i)| acc ^ basis.vector(basis.generator(i)));
            p.gather_into(v, &mut g);
            let nf = p.words.n_factors;
            assert_eq!(&p.words.factors[w * nf..(w + 1) * nf], &g.factors[..]);
            assert_eq!(p.words.combo[w], g.combo);
        }
    }
}
