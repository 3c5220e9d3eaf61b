//! Small dense GF(2) linear algebra on packed `u64` rows.
//!
//! Vectors are at most 64 bits wide and a system has at most 64 rows, which
//! covers every unit cell the decoder works with.

use crate::error::{Error, Result};

/// Row-reduced copy of a list of generators that remembers, for every
/// reduced row, which combination of the original rows produced it.
#[derive(Clone, Debug)]
pub struct Gf2Solver {
    width: usize,
    count: usize,
    // (pivot bit, reduced row, combination of input rows)
    pivots: Vec<(u32, u64, u64)>,
}

impl Gf2Solver {
    pub fn new(rows: &[u64], width: usize) -> Self {
        assert!(rows.len() <= 64 && width <= 64);
        let mut pivots: Vec<(u32, u64, u64)> = Vec::with_capacity(rows.len());
        for (i, &row) in rows.iter().enumerate() {
            let mut v = row;
            let mut c = 1u64 << i;
            for &(bit, r, rc) in &pivots {
                if v >> bit & 1 == 1 {
                    v ^= r;
                    c ^= rc;
                }
            }
            if v != 0 {
                pivots.push((v.trailing_zeros(), v, c));
            }
        }
        Gf2Solver {
            width,
            count: rows.len(),
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_independent(&self) -> bool {
        self.rank() == self.count
    }

    /// Returns the combination of input rows summing to `v`, or the
    /// non-zero residual when `v` is outside their span.
    pub fn solve(&self, v: u64) -> std::result::Result<u64, u64> {
        let mut v = v;
        let mut c = 0u64;
        for &(bit, r, rc) in &self.pivots {
            if v >> bit & 1 == 1 {
                v ^= r;
                c ^= rc;
            }
        }
        if v == 0 {
            Ok(c)
        } else {
            Err(v)
        }
    }
}

/// Linear map `u64 -> u64` evaluated with one lookup table per input byte.
#[derive(Clone, Debug)]
pub struct LinearMap {
    tables: Vec<[u64; 256]>,
}

impl LinearMap {
    /// `columns[b]` is the image of the unit vector `1 << b`.
    pub fn from_columns(columns: &[u64]) -> Self {
        let nbytes = columns.len().div_ceil(8);
        let mut tables = vec![[0u64; 256]; nbytes];
        for (chunk, table) in tables.iter_mut().enumerate() {
            for byte in 1..256usize {
                let low = byte.trailing_zeros() as usize;
                let col = columns.get(chunk * 8 + low).copied().unwrap_or(0);
                table[byte] = table[byte & (byte - 1)] ^ col;
            }
        }
        LinearMap { tables }
    }

    #[inline]
    pub fn apply(&self, v: u64) -> u64 {
        let mut out = 0;
        let mut v = v;
        for table in &self.tables {
            out ^= table[(v & 0xff) as usize];
            v >>= 8;
            if v == 0 {
                break;
            }
        }
        out
    }
}

/// Square matrix over GF(2); row `i` is a bit mask over columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: Vec<u64>,
}

impl Gf2Matrix {
    pub fn from_rows(rows: Vec<u64>) -> Self {
        assert!(rows.len() <= 64);
        Gf2Matrix { rows }
    }

    pub fn identity(k: usize) -> Self {
        Gf2Matrix {
            rows: (0..k).map(|i| 1u64 << i).collect(),
        }
    }

    pub fn from_dense(entries: &[Vec<u8>]) -> Self {
        let rows = entries
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(0u64, |acc, (j, &b)| acc | (((b & 1) as u64) << j))
            })
            .collect();
        Gf2Matrix { rows }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i] >> j & 1 == 1
    }

    /// Row vector times matrix: `out_j = sum_i v_i m_ij`.
    pub fn left_mul(&self, v: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(i, _)| v >> i & 1 == 1)
            .fold(0, |acc, (_, r)| acc ^ r)
    }

    pub fn inverse(&self) -> Result<Gf2Matrix> {
        let k = self.rows.len();
        let solver = Gf2Solver::new(&self.rows, k);
        if !solver.is_independent() {
            return Err(Error::Singular);
        }
        // Row i of the inverse expresses unit vector e_i as a combination of rows.
        let rows = (0..k)
            .map(|i| solver.solve(1u64 << i).map_err(|_| Error::Singular))
            .collect::<Result<Vec<_>>>()?;
        Ok(Gf2Matrix { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_reconstructs_combination() {
        let rows = [0b0011, 0b0110, 0b1100];
        let s = Gf2Solver::new(&rows, 4);
        assert_eq!(s.rank(), 3);
        assert_eq!(s.solve(0b0101), Ok(0b011));
        assert!(s.solve(0b0001).is_err());
    }

    #[test]
    fn dependent_rows_detected() {
        let s = Gf2Solver::new(&[0b01, 0b10, 0b11], 2);
        assert!(!s.is_independent());
    }

    #[test]
    fn inverse_round_trip() {
        let m = Gf2Matrix::from_rows(vec![0b011, 0b010, 0b100]);
        let inv = m.inverse().unwrap();
        for v in 0..8u64 {
            assert_eq!(inv.left_mul(m.left_mul(v)), v);
        }
        assert!(Gf2Matrix::from_rows(vec![0b11, 0b11]).inverse().is_err());
    }

    #[test]
    fn linear_map_matches_columns() {
        let cols: Vec<u64> = (0..20).map(|i| (i * 2654435761u64) & 0xfffff).collect();
        let map = LinearMap::from_columns(&cols);
        for v in [0u64, 1, 0x80, 0x81, 0xfffff, 0x12345] {
            let want = (0..20).filter(|b| v >> b & 1 == 1).fold(0, |a, b| a ^ cols[b]);
            assert_eq!(map.apply(v), want);
        }
    }
}
