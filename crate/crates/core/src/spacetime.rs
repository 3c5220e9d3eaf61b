//! Space-time histories of a bit-flip toric memory with faulty measurements.
//!
//! Site `(i, j, k)` owns three bits: `eta^k_{i,j,H}`, `eta^k_{i,j,V}` and the
//! measurement error `mu^{k-1}_{i,j}` that separates rounds `k-1` and `k`.
//! Time is periodic, so `mu^{tau-1}` sits on the faces of round 0.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{self, Grid, Model};
use crate::lattice2d::{Dir, LogicalClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lattice3D {
    ell: usize,
    tau: usize,
}

impl Lattice3D {
    pub fn new(ell: usize, tau: usize) -> Result<Self> {
        for (name, v) in [("ell", ell), ("tau", tau)] {
            if v < 2 || !v.is_power_of_two() {
                return Err(Error::InvalidLattice(format!(
                    "{name} must be a power of two >= 2, got {v}"
                )));
            }
        }
        Ok(Lattice3D { ell, tau })
    }

    pub fn cube(ell: usize) -> Result<Self> {
        Lattice3D::new(ell, ell)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn grid(&self) -> Grid {
        Grid::new(&[self.ell, self.ell, self.tau]).expect("valid sizes")
    }

    pub fn num_sites(&self) -> usize {
        self.ell * self.ell * self.tau
    }

    pub fn num_bits(&self) -> usize {
        3 * self.num_sites()
    }

    pub fn site(&self, i: i64, j: i64, k: i64) -> usize {
        let w = |v: i64, n: usize| v.rem_euclid(n as i64) as usize;
        (w(i, self.ell) * self.ell + w(j, self.ell)) * self.tau + w(k, self.tau)
    }

    pub fn eta_index(&self, i: i64, j: i64, k: i64, d: Dir) -> usize {
        3 * self.site(i, j, k) + d as usize
    }

    pub fn mu_index(&self, i: i64, j: i64, k: i64) -> usize {
        3 * self.site(i, j, k + 1) + 2
    }

    pub fn empty_history(&self) -> ErrorHistory {
        ErrorHistory {
            bits: vec![0; self.num_bits()],
        }
    }

    pub fn sample_history<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> ErrorHistory {
        self.sample_history_aniso(p, p, rng)
    }

    /// Independent flips with rate `p_space` on `eta` and `p_time` on `mu`.
    pub fn sample_history_aniso<R: Rng + ?Sized>(
        &self,
        p_space: f64,
        p_time: f64,
        rng: &mut R,
    ) -> ErrorHistory {
        let mut h = self.empty_history();
        for (f, b) in h.bits.iter_mut().enumerate() {
            let p = if f % 3 == 2 { p_time } else { p_space };
            *b = (rng.gen::<f64>() < p) as u8;
        }
        h
    }

    pub fn delta_syndrome(&self, h: &ErrorHistory) -> Result<CubicSyndrome> {
        self.check(h)?;
        let syn = geometry::syndrome(&Model::flux3d(), &self.grid(), &h.bits);
        Ok(CubicSyndrome {
            db: syn.iter().map(|&b| b & 1 == 1).collect(),
        })
    }

    fn check(&self, h: &ErrorHistory) -> Result<()> {
        if h.bits.len() != self.num_bits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_bits(),
                actual: h.bits.len(),
            });
        }
        Ok(())
    }

    /// Wall parities: bit 0 across `i = 0` (H faces), bit 1 across `j = 0`
    /// (V faces), bit 2 across the round-0 time faces.
    pub fn crossing(&self, h: &ErrorHistory) -> HistoryClass {
        let mut bits = 0u8;
        for a in 0..self.ell as i64 {
            for k in 0..self.tau as i64 {
                bits ^= h.bits[self.eta_index(0, a, k, Dir::H)];
                bits ^= h.bits[self.eta_index(a, 0, k, Dir::V)] << 1;
            }
            for b in 0..self.ell as i64 {
                bits ^= h.bits[3 * self.site(a, b, 0) + 2] << 2;
            }
        }
        HistoryClass(bits)
    }

    pub fn history_class(&self, h: &ErrorHistory) -> Result<HistoryClass> {
        if !self.delta_syndrome(h)?.is_trivial() {
            return Err(Error::OpenOperator);
        }
        Ok(self.crossing(h))
    }

    /// Closed history with the given class: one loop per set bit.
    pub fn logical_history(&self, class: HistoryClass) -> ErrorHistory {
        let mut h = self.empty_history();
        if class.x() {
            for i in 0..self.ell as i64 {
                h.bits[self.eta_index(i, 0, 0, Dir::H)] ^= 1;
            }
        }
        if class.y() {
            for j in 0..self.ell as i64 {
                h.bits[self.eta_index(0, j, 0, Dir::V)] ^= 1;
            }
        }
        if class.t() {
            for k in 0..self.tau as i64 {
                h.bits[self.mu_index(0, 0, k)] ^= 1;
            }
        }
        h
    }

    /// Success iff `actual * correction` has trivial spatial homology.
    pub fn judge(&self, actual: &ErrorHistory, correction: &ErrorHistory) -> Result<Judgement> {
        if self.delta_syndrome(actual)? != self.delta_syndrome(correction)? {
            return Err(Error::SyndromeMismatch);
        }
        let residual = self.history_class(&actual.xor(correction))?;
        Ok(Judgement {
            residual,
            success: residual.spatial().is_trivial(),
        })
    }

    /// Canonical history for `db`: defects paired in site order, each pair
    /// joined along time, then `j`, then `i`, without wrapping.
    pub fn pure_history(&self, db: &CubicSyndrome) -> Result<ErrorHistory> {
        if db.db.len() != self.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: self.num_sites(),
                actual: db.db.len(),
            });
        }
        if !db.is_valid() {
            return Err(Error::InvalidSyndrome("odd number of cubic defects".into()));
        }
        let grid = self.grid();
        let on: Vec<usize> = (0..db.db.len()).filter(|&s| db.db[s]).collect();
        let mut h = self.empty_history();
        for pair in on.chunks(2) {
            let a = grid.coords(pair[0]).map(|v| v as i64);
            let b = grid.coords(pair[1]).map(|v| v as i64);
            for k in a[2].min(b[2])..a[2].max(b[2]) {
                h.bits[self.mu_index(a[0], a[1], k)] ^= 1;
            }
            for j in a[1].min(b[1])..a[1].max(b[1]) {
                h.bits[self.eta_index(a[0], j + 1, b[2], Dir::V)] ^= 1;
            }
            for i in a[0].min(b[0])..a[0].max(b[0]) {
                h.bits[self.eta_index(i + 1, b[1], b[2], Dir::H)] ^= 1;
            }
        }
        Ok(h)
    }

    /// Accumulated space-like error `prod_k E^k` as 2D bits `(i, j, H|V)`.
    pub fn accumulated_spatial(&self, h: &ErrorHistory) -> Vec<u8> {
        let mut out = vec![0u8; 2 * self.ell * self.ell];
        for i in 0..self.ell as i64 {
            for j in 0..self.ell as i64 {
                for k in 0..self.tau as i64 {
                    let q = 2 * (i as usize * self.ell + j as usize);
                    out[q] ^= h.bits[self.eta_index(i, j, k, Dir::H)];
                    out[q + 1] ^= h.bits[self.eta_index(i, j, k, Dir::V)];
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorHistory {
    bits: Vec<u8>,
}

impl ErrorHistory {
    pub fn from_bits(bits: Vec<u8>) -> Self {
        ErrorHistory {
            bits: bits.into_iter().map(|b| b & 1).collect(),
        }
    }

    /// One byte per face in decoder layout.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn flip(&mut self, face: usize) {
        self.bits[face] ^= 1;
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn xor(&self, other: &ErrorHistory) -> ErrorHistory {
        ErrorHistory {
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect(),
        }
    }

    /// Parses `eta i j k H|V` and `mu i j k` lines.
    pub fn parse(text: &str, lat: &Lattice3D) -> Result<ErrorHistory> {
        let mut h = lat.empty_history();
        for (lineno, raw) in text.lines().enumerate() {
            let line = crate::pauli::strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::parse(lineno + 1, format!("unrecognised history line `{line}`"));
            let num = |t: &str| t.parse::<i64>().map_err(|_| bad());
            match toks.as_slice() {
                ["eta", i, j, k, d] => {
                    let d = Dir::from_symbol(d).ok_or_else(bad)?;
                    h.bits[lat.eta_index(num(i)?, num(j)?, num(k)?, d)] ^= 1;
                }
                ["mu", i, j, k] => {
                    h.bits[lat.mu_index(num(i)?, num(j)?, num(k)?)] ^= 1;
                }
                _ => return Err(bad()),
            }
        }
        Ok(h)
    }

    pub fn to_text(&self, lat: &Lattice3D) -> String {
        let grid = lat.grid();
        let mut out = String::new();
        for (f, _) in self.bits.iter().enumerate().filter(|(_, &b)| b != 0) {
            let [i, j, k] = grid.coords(f / 3);
            match f % 3 {
                0 => out.push_str(&format!("eta {i} {j} {k} H\n")),
                1 => out.push_str(&format!("eta {i} {j} {k} V\n")),
                _ => {
                    let prev = (k + lat.tau - 1) % lat.tau;
                    out.push_str(&format!("mu {i} {j} {prev}\n"));
                }
            }
        }
        out
    }
}

/// Cubic check values `Delta b^k_{i,j}` in site order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubicSyndrome {
    pub db: Vec<bool>,
}

impl CubicSyndrome {
    pub fn is_trivial(&self) -> bool {
        !self.db.iter().any(|&b| b)
    }

    pub fn is_valid(&self) -> bool {
        self.db.iter().filter(|&&b| b).count() % 2 == 0
    }

    pub fn count(&self) -> usize {
        self.db.iter().filter(|&&b| b).count()
    }

    pub fn site_bits(&self) -> Vec<u8> {
        self.db.iter().map(|&b| b as u8).collect()
    }
}

/// Wall parities of a history: bit 0 `x`, bit 1 `y`, bit 2 time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct HistoryClass(pub u8);

impl HistoryClass {
    pub fn x(self) -> bool {
        self.0 & 1 != 0
    }
    pub fn y(self) -> bool {
        self.0 & 2 != 0
    }
    pub fn t(self) -> bool {
        self.0 & 4 != 0
    }
    pub fn xor(self, o: HistoryClass) -> HistoryClass {
        HistoryClass(self.0 ^ o.0)
    }
    /// Spatial part as a 2D class; time windings are not memory errors.
    pub fn spatial(self) -> LogicalClass {
        LogicalClass(self.0 & 3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Judgement {
    pub residual: HistoryClass,
    pub success: bool,
}
