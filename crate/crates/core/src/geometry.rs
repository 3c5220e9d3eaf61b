//! Periodic site grids shared by the 2D code, the 3D space-time lattice and
//! every coarse lattice produced by the decoder.
//!
//! Each site owns one face per axis (the face on its negative side), so a
//! qubit is addressed by `(site, axis)` and stored at `site * dims + axis`.
//! A check kind lists the faces it reads relative to its site together with
//! the letter bit (`0` for the X part, `1` for the Z part) it is sensitive to.

use crate::error::{Error, Result};
use crate::pauli::Alphabet;

pub const MAX_DIMS: usize = 3;

pub type Offset = [i64; MAX_DIMS];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckKind {
    pub name: &'static str,
    pub bit: usize,
    pub faces: Vec<(Offset, usize)>,
}

impl CheckKind {
    /// The nonzero offset at which face `(s, axis)` is read by a check: the
    /// face belongs to the checks at `s` and `s - d`.
    pub fn partner_offset(&self, axis: usize) -> Offset {
        self.faces
            .iter()
            .find(|(o, a)| *a == axis && *o != [0; MAX_DIMS])
            .map(|(o, _)| *o)
            .expect("every check reads two faces per axis")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// 2D toric code; fluxes only in bit-flip mode, fluxes and charges otherwise.
    Toric2D,
    /// 3D space-time cubic checks for a bit-flip memory with faulty measurements.
    Flux3D,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    kind: ModelKind,
    alphabet: Alphabet,
    dims: usize,
    checks: Vec<CheckKind>,
}

fn unit(axis: usize, sign: i64) -> Offset {
    let mut o = [0; MAX_DIMS];
    o[axis] = sign;
    o
}

impl Model {
    pub fn toric2d(alphabet: Alphabet) -> Model {
        let flux = CheckKind {
            name: "flux",
            bit: 0,
            faces: vec![
                ([0; 3], 0),
                (unit(0, 1), 0),
                ([0; 3], 1),
                (unit(1, 1), 1),
            ],
        };
        let charge = CheckKind {
            name: "charge",
            bit: 1,
            faces: vec![
                ([0; 3], 0),
                (unit(1, -1), 0),
                ([0; 3], 1),
                (unit(0, -1), 1),
            ],
        };
        let checks = match alphabet {
            Alphabet::BitFlip => vec![flux],
            Alphabet::Pauli => vec![flux, charge],
        };
        Model {
            kind: ModelKind::Toric2D,
            alphabet,
            dims: 2,
            checks,
        }
    }

    pub fn flux3d() -> Model {
        let faces = (0..3)
            .flat_map(|a| [([0; 3], a), (unit(a, 1), a)])
            .collect();
        Model {
            kind: ModelKind::Flux3D,
            alphabet: Alphabet::BitFlip,
            dims: 3,
            checks: vec![CheckKind {
                name: "flux",
                bit: 0,
                faces,
            }],
        }
    }

    pub fn from_name(name: &str, alphabet: Alphabet) -> Result<Model> {
        match (name, alphabet) {
            ("toric2d", a) => Ok(Model::toric2d(a)),
            ("flux3d", Alphabet::BitFlip) => Ok(Model::flux3d()),
            _ => Err(Error::Cell(format!(
                "unknown model `{name}` with alphabet {}",
                alphabet.name()
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Toric2D => "toric2d",
            ModelKind::Flux3D => "flux3d",
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn checks(&self) -> &[CheckKind] {
        &self.checks
    }

    pub fn check_index(&self, name: &str) -> Option<usize> {
        self.checks.iter().position(|c| c.name == name)
    }

    pub fn letter_bits(&self) -> usize {
        self.alphabet.bits()
    }

    /// Width of a site's joint letter index: `letter(axis) << (axis * bits)`.
    pub fn site_bits(&self) -> usize {
        self.dims * self.letter_bits()
    }

    pub fn site_states(&self) -> usize {
        1 << self.site_bits()
    }

    /// True when relabelling axes by `perm` (local axis `a` becomes global
    /// axis `perm[a]`) maps every check onto itself.
    pub fn symmetric_under(&self, perm: &[usize]) -> bool {
        self.checks.iter().all(|c| {
            c.faces.iter().all(|(o, a)| {
                let mut g = [0; MAX_DIMS];
                for d in 0..self.dims {
                    g[perm[d]] = o[d];
                }
                c.faces.contains(&(g, perm[*a]))
            })
        })
    }
}

/// Periodic box of sites, row-major with axis 0 slowest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    dims: usize,
    sizes: [usize; MAX_DIMS],
}

impl Grid {
    pub fn new(sizes: &[usize]) -> Result<Grid> {
        if sizes.is_empty() || sizes.len() > MAX_DIMS || sizes.contains(&0) {
            return Err(Error::InvalidLattice(format!("bad grid sizes {sizes:?}")));
        }
        let mut s = [1; MAX_DIMS];
        s[..sizes.len()].copy_from_slice(sizes);
        Ok(Grid {
            dims: sizes.len(),
            sizes: s,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.dims]
    }

    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    pub fn num_sites(&self) -> usize {
        self.sizes().iter().product()
    }

    pub fn num_faces(&self) -> usize {
        self.num_sites() * self.dims
    }

    pub fn index(&self, c: &[usize]) -> usize {
        (0..self.dims).fold(0, |acc, a| acc * self.sizes[a] + c[a] % self.sizes[a])
    }

    pub fn coords(&self, mut idx: usize) -> [usize; MAX_DIMS] {
        let mut c = [0; MAX_DIMS];
        for a in (0..self.dims).rev() {
            c[a] = idx % self.sizes[a];
            idx /= self.sizes[a];
        }
        c
    }

    /// Site reached from `idx` by a periodic displacement.
    pub fn shift(&self, idx: usize, off: &Offset) -> usize {
        let c = self.coords(idx);
        let mut out = [0; MAX_DIMS];
        for a in 0..self.dims {
            let n = self.sizes[a] as i64;
            out[a] = (c[a] as i64 + off[a]).rem_euclid(n) as usize;
        }
        self.index(&out)
    }

    pub fn face(&self, site: usize, axis: usize) -> usize {
        site * self.dims + axis
    }
}

/// Syndrome of a letter field: bit `k` of entry `s` is check kind `k` at `s`.
pub fn syndrome(model: &Model, grid: &Grid, letters: &[u8]) -> Vec<u8> {
    let dims = grid.dims();
    debug_assert_eq!(letters.len(), grid.num_faces());
    let mut out = vec![0u8; grid.num_sites()];
    for (s, slot) in out.iter_mut().enumerate() {
        for (k, check) in model.checks().iter().enumerate() {
            let mut parity = 0u8;
            for (o, a) in &check.faces {
                let t = grid.shift(s, o);
                parity ^= letters[t * dims + a] >> check.bit & 1;
            }
            *slot |= parity << k;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_shift() {
        let g = Grid::new(&[4, 2]).unwrap();
        let s = g.index(&[3, 1]);
        assert_eq!(g.coords(g.shift(s, &[1, 1, 0])), [0, 0, 0]);
        assert_eq!(g.coords(g.shift(s, &[-4, -3, 0])), [3, 0, 0]);
    }

    #[test]
    fn single_face_flips_two_checks() {
        for model in [Model::toric2d(Alphabet::Pauli), Model::flux3d()] {
            let sizes = vec![4; model.dims()];
            let g = Grid::new(&sizes).unwrap();
            for f in 0..g.num_faces() {
                for letter in 1..model.alphabet().size() as u8 {
                    let mut field = vec![0u8; g.num_faces()];
                    field[f] = letter;
                    let syn = syndrome(&model, &g, &field);
                    let flips: u32 = syn.iter().map(|b| b.count_ones()).sum();
                    assert_eq!(flips, 2 * letter.count_ones());
                }
            }
        }
    }

    #[test]
    fn checks_are_symmetric_under_axis_relabelling() {
        let m = Model::flux3d();
        assert!(m.symmetric_under(&[1, 2, 0]));
        assert!(m.symmetric_under(&[2, 0, 1]));
        let t = Model::toric2d(Alphabet::Pauli);
        assert!(t.symmetric_under(&[1, 0]));
    }
}
