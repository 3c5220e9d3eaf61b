//! Dense probability tables over Pauli subgroups.
//!
//! A [`GroupDistribution`] assigns a probability to every element
//! `prod_i Q_i^{x_i}` of the group generated by an ordered list of Pauli words.
//! Entry `x` of the table is indexed little-endian in generator order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::gf2::{Gf2Matrix, Gf2Solver};
use crate::pauli::{Alphabet, CellBasis, Letter, PauliWord};

/// Entries below this are flushed to zero before normalizing.
pub const FLOOR: f64 = 1e-300;

/// Largest table the dense representation accepts.
pub const MAX_GENERATORS: usize = 26;

/// Outcome of [`normalize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalized {
    Ok,
    /// The table had no usable mass and was reset to uniform.
    Reset,
}

/// Flushes tiny entries, rescales to unit sum, and resets to uniform when the
/// table carries no finite positive mass.
pub fn normalize(probs: &mut [f64]) -> Normalized {
    let mut sum = 0.0;
    for p in probs.iter_mut() {
        if *p < FLOOR {
            *p = 0.0;
        }
        sum += *p;
    }
    if !(sum > 0.0) || !sum.is_finite() {
        let u = 1.0 / probs.len() as f64;
        probs.iter_mut().for_each(|p| *p = u);
        return Normalized::Reset;
    }
    let inv = 1.0 / sum;
    probs.iter_mut().for_each(|p| *p *= inv);
    Normalized::Ok
}

/// Per-qubit distribution over `{I, X}` or `{I, X, Z, Y}`, indexed by
/// [`Letter::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct QubitMessage {
    probs: Vec<f64>,
}

impl QubitMessage {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 2 && probs.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                actual: probs.len(),
            });
        }
        Ok(QubitMessage { probs })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.size();
        QubitMessage {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, l: Letter) -> f64 {
        self.probs.get(l.index()).copied().unwrap_or(0.0)
    }

    pub fn normalize(&mut self) -> Normalized {
        normalize(&mut self.probs)
    }
}

/// Probability table over the group generated by `generators`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupDistribution {
    generators: Vec<PauliWord>,
    probs: Vec<f64>,
}

impl GroupDistribution {
    pub fn new(generators: Vec<PauliWord>, probs: Vec<f64>) -> Result<Self> {
        let k = generators.len();
        if k > MAX_GENERATORS {
            return Err(Error::DimensionMismatch {
                expected: MAX_GENERATORS,
                actual: k,
            });
        }
        if probs.len() != 1 << k {
            return Err(Error::DimensionMismatch {
                expected: 1 << k,
                actual: probs.len(),
            });
        }
        if let Some(n) = generators.first().map(|g| g.num_qubits()) {
            if let Some(bad) = generators.iter().find(|g| g.num_qubits() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: bad.num_qubits(),
                });
            }
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Cell("probabilities must be nonnegative".into()));
        }
        Ok(GroupDistribution { generators, probs })
    }

    pub fn over_basis(basis: &CellBasis, probs: Vec<f64>) -> Result<Self> {
        GroupDistribution::new(basis.generators().to_vec(), probs)
    }

    pub fn uniform(generators: Vec<PauliWord>) -> Result<Self> {
        let size = 1usize << generators.len();
        GroupDistribution::new(generators, vec![1.0 / size as f64; size])
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[PauliWord] {
        &self.generators
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: u64) -> f64 {
        self.probs[x as usize]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= 1e-12
    }

    pub fn normalize(&mut self) -> Normalized {
        normalize(&mut self.probs)
    }

    /// Group element with exponents `x`.
    pub fn element(&self, x: u64) -> PauliWord {
        let n = self.num_qubits();
        let mut w = PauliWord::identity(n);
        for (i, g) in self.generators.iter().enumerate() {
            if x >> i & 1 == 1 {
                w.mul_assign(g);
            }
        }
        w
    }

    pub fn num_qubits(&self) -> usize {
        self.generators.first().map_or(0, |g| g.num_qubits())
    }

    fn check_indices(&self, subset: &[usize]) -> Result<()> {
        let k = self.len();
        let mut seen = 0u64;
        for &i in subset {
            if i >= k {
                return Err(Error::IndexOutOfRange { index: i, size: k });
            }
            if seen >> i & 1 == 1 {
                return Err(Error::Cell(format!("generator {i} listed twice")));
            }
            seen |= 1 << i;
        }
        Ok(())
    }

    /// Sums out every generator not in `subset`. The result is indexed in the
    /// order of `subset`.
    pub fn marginal(&self, subset: &[usize]) -> Result<GroupDistribution> {
        self.check_indices(subset)?;
        let mut out = vec![0.0; 1 << subset.len()];
        for (x, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let y = subset
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, &i)| acc | ((x >> i & 1) << j));
            out[y] += p;
        }
        let generators = subset.iter().map(|&i| self.generators[i].clone()).collect();
        Ok(GroupDistribution {
            generators,
            probs: out,
        })
    }

    /// Restricts to the slice where generator `i` has exponent `v` for every
    /// `(i, v)` in `given`, then renormalizes. Keeps all generators.
    pub fn conditional(&self, given: &[(usize, bool)]) -> Result<GroupDistribution> {
        let idx: Vec<usize> = given.iter().map(|g| g.0).collect();
        self.check_indices(&idx)?;
        let (mask, want) = given.iter().fold((0u64, 0u64), |(m, w), &(i, v)| {
            (m | 1 << i, w | (v as u64) << i)
        });
        let mut probs: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(x, &p)| if x as u64 & mask == want { p } else { 0.0 })
            .collect();
        let mass: f64 = probs.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::ZeroProbability);
        }
        probs.iter_mut().for_each(|p| *p /= mass);
        Ok(GroupDistribution {
            generators: self.generators.clone(),
            probs,
        })
    }

    /// Re-expresses the table in the basis `Q'_i = prod_j Q_j^{y_ij}`. The
    /// supplied words must match those products.
    pub fn change_basis(
        &self,
        new_generators: &[PauliWord],
        y: &Gf2Matrix,
    ) -> Result<GroupDistribution> {
        let k = self.len();
        if y.size() != k || new_generators.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: y.size().max(new_generators.len()),
            });
        }
        y.inverse()?;
        for (i, w) in new_generators.iter().enumerate() {
            if *w != self.element(y.rows()[i]) {
                return Err(Error::Cell(format!(
                    "new generator {i} ({w}) is not the product named by row {i} of y"
                )));
            }
        }
        let mut probs = vec![0.0; 1 << k];
        for (z, p) in probs.iter_mut().enumerate() {
            *p = self.probs[y.left_mul(z as u64) as usize];
        }
        Ok(GroupDistribution {
            generators: new_generators.to_vec(),
            probs,
        })
    }

    /// Marginal distribution of the letter on qubit `q`.
    pub fn qubit_marginal(&self, q: usize) -> Result<QubitMessage> {
        let n = self.num_qubits();
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, size: n });
        }
        let pauli = self.generators.iter().any(|g| g.has_z());
        let mut out = vec![0.0; if pauli { 4 } else { 2 }];
        // The letter on q is linear in x, so each generator contributes a fixed
        // bit pair that we fold in along a Gray-code walk.
        let contrib: Vec<usize> = self
            .generators
            .iter()
            .map(|g| g.letter(q).index())
            .collect();
        let mut letter = 0usize;
        let mut x = 0usize;
        for step in 0..self.probs.len() {
            out[letter] += self.probs[x];
            if step + 1 == self.probs.len() {
                break;
            }
            let bit = (step + 1).trailing_zeros() as usize;
            x ^= 1 << bit;
            letter ^= contrib[bit];
        }
        Ok(QubitMessage { probs: out })
    }

    /// Independent per-qubit channel pushed onto the group generated by
    /// `basis`. `channel[q]` is indexed by [`Letter::index`]; bit-flip
    /// channels may give two entries.
    pub fn from_channel(channel: &[Vec<f64>], basis: &CellBasis) -> Result<GroupDistribution> {
        let n = basis.num_qubits();
        if channel.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: channel.len(),
            });
        }
        let k = basis.len();
        if k > MAX_GENERATORS {
            return Err(Error::DimensionMismatch {
                expected: MAX_GENERATORS,
                actual: k,
            });
        }
        let lookup = |q: usize, l: Letter| channel[q].get(l.index()).copied().unwrap_or(0.0);
        let mut probs = vec![0.0; 1 << k];
        let mut w = PauliWord::identity(n);
        let mut x = 0usize;
        for step in 0..probs.len() {
            probs[x] = (0..n).map(|q| lookup(q, w.letter(q))).product();
            if step + 1 == probs.len() {
                break;
            }
            let bit = (step + 1).trailing_zeros() as usize;
            x ^= 1 << bit;
            w.mul_assign(basis.generator(bit));
        }
        Ok(GroupDistribution {
            generators: basis.generators().to_vec(),
            probs,
        })
    }

    /// FNV-1a hash over the generator words.
    pub fn fingerprint(&self) -> u64 {
        let text: String = self
            .generators
            .iter()
            .map(|g| format!("{g};"))
            .collect();
        text.bytes().fold(0xcbf29ce484222325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100000001b3)
        })
    }

    /// Writes `k` (u32), the generator fingerprint (u64) and the `2^k`
    /// entries, all little-endian.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.len() as u32).to_le_bytes())?;
        out.write_all(&self.fingerprint().to_le_bytes())?;
        for p in &self.probs {
            out.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a table written by [`write_binary`](Self::write_binary); the
    /// fingerprint must match `generators`.
    pub fn read_binary<R: Read>(mut input: R, generators: Vec<PauliWord>) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4)?;
        let k = u32::from_le_bytes(b4) as usize;
        if k != generators.len() {
            return Err(Error::DimensionMismatch {
                expected: generators.len(),
                actual: k,
            });
        }
        input.read_exact(&mut b8)?;
        let fp = u64::from_le_bytes(b8);
        let mut probs = Vec::with_capacity(1 << k);
        for _ in 0..1usize << k {
            input.read_exact(&mut b8)?;
            probs.push(f64::from_le_bytes(b8));
        }
        let d = GroupDistribution::new(generators, probs)?;
        if d.fingerprint() != fp {
            return Err(Error::Cell("basis fingerprint mismatch".into()));
        }
        Ok(d)
    }
}

/// Checks that two generator lists span the same group.
pub fn same_span(a: &[PauliWord], b: &[PauliWord]) -> bool {
    let n = a.first().or(b.first()).map_or(0, |w| w.num_qubits());
    if n > 32 {
        return false;
    }
    let pack = |w: &PauliWord| {
        let (x, z) = w.masks();
        x | z << n
    };
    let ra: Vec<u64> = a.iter().map(pack).collect();
    let rb: Vec<u64> = b.iter().map(pack).collect();
    let sa = Gf2Solver::new(&ra, 2 * n);
    let sb = Gf2Solver::new(&rb, 2 * n);
    sa.rank() == sb.rank() && rb.iter().all(|v| sa.solve(*v).is_ok())
}
