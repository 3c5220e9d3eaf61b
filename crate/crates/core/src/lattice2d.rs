//! The 2D toric code on an `ell x ell` periodic lattice.
//!
//! Qubit `(i, j, H)` has index `2 * (i * ell + j)` and `(i, j, V)` the next
//! one. Plaquette (flux) outcomes are stored in `b`, site (charge) outcomes in
//! `a`, both row-major.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{self, Grid, Model};
use crate::pauli::{Alphabet, Letter, PauliWord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    H = 0,
    V = 1,
}

impl Dir {
    pub fn from_symbol(s: &str) -> Option<Dir> {
        match s {
            "H" | "h" => Some(Dir::H),
            "V" | "v" => Some(Dir::V),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Dir::H => 'H',
            Dir::V => 'V',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilizerKind {
    /// `A_{i,j}`, X-type, detects Z errors.
    Site,
    /// `B_{i,j}`, Z-type, detects X errors.
    Plaquette,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lattice2D {
    ell: usize,
}

/// Largest lattice accepted by [`Lattice2D::exact_class_probabilities`] in
/// bit-flip mode; full Pauli mode accepts only `ell = 2`.
pub const EXACT_MAX_ELL_BITFLIP: usize = 4;

impl Lattice2D {
    pub fn new(ell: usize) -> Result<Self> {
        if ell < 2 || !ell.is_power_of_two() {
            return Err(Error::InvalidLattice(format!(
                "linear size must be a power of two >= 2, got {ell}"
            )));
        }
        Ok(Lattice2D { ell })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn num_qubits(&self) -> usize {
        2 * self.ell * self.ell
    }

    pub fn num_sites(&self) -> usize {
        self.ell * self.ell
    }

    fn wrap(&self, v: i64) -> usize {
        v.rem_euclid(self.ell as i64) as usize
    }

    pub fn qubit(&self, i: i64, j: i64, d: Dir) -> usize {
        2 * (self.wrap(i) * self.ell + self.wrap(j)) + d as usize
    }

    pub fn site(&self, i: i64, j: i64) -> usize {
        self.wrap(i) * self.ell + self.wrap(j)
    }

    pub fn grid(&self) -> Grid {
        Grid::new(&[self.ell, self.ell]).expect("valid sizes")
    }

    pub fn stabilizer(&self, kind: StabilizerKind, i: i64, j: i64) -> PauliWord {
        let n = self.num_qubits();
        match kind {
            StabilizerKind::Site => PauliWord::x_on(
                n,
                &[
                    self.qubit(i, j, Dir::H),
                    self.qubit(i, j, Dir::V),
                    self.qubit(i, j - 1, Dir::H),
                    self.qubit(i - 1, j, Dir::V),
                ],
            ),
            StabilizerKind::Plaquette => PauliWord::z_on(
                n,
                &[
                    self.qubit(i, j, Dir::H),
                    self.qubit(i, j + 1, Dir::V),
                    self.qubit(i + 1, j, Dir::H),
                    self.qubit(i, j, Dir::V),
                ],
            ),
        }
    }

    pub fn sample_error<R: Rng + ?Sized>(&self, channel: &NoiseChannel, rng: &mut R) -> PauliWord {
        let n = self.num_qubits();
        let mut w = PauliWord::identity(n);
        for q in 0..n {
            let l = channel.sample(q, rng);
            if l != Letter::I {
                w.set_letter(q, l);
            }
        }
        w
    }

    /// Per-face letter indices in the layout used by the decoder.
    pub fn field(&self, w: &PauliWord) -> Vec<u8> {
        (0..self.num_qubits())
            .map(|q| w.letter(q).index() as u8)
            .collect()
    }

    pub fn word_from_field(&self, field: &[u8]) -> PauliWord {
        let mut w = PauliWord::identity(self.num_qubits());
        for (q, &l) in field.iter().enumerate() {
            if l != 0 {
                w.set_letter(q, Letter::from_index(l as usize));
            }
        }
        w
    }

    pub fn extract_syndrome(&self, e: &PauliWord) -> Result<SyndromeConfig> {
        if e.num_qubits() != self.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits(),
                actual: e.num_qubits(),
            });
        }
        let model = Model::toric2d(Alphabet::Pauli);
        let syn = geometry::syndrome(&model, &self.grid(), &self.field(e));
        Ok(SyndromeConfig {
            ell: self.ell,
            b: syn.iter().map(|s| s & 1 == 1).collect(),
            a: syn.iter().map(|s| s & 2 == 2).collect(),
        })
    }

    /// Canonical operator with syndrome `s`: defects of each type are paired
    /// in row-major order and joined by a path that moves along `j` first and
    /// then down along `i`, inside the fundamental domain.
    pub fn pure_error(&self, s: &SyndromeConfig) -> Result<PauliWord> {
        self.check_syndrome(s)?;
        let mut w = PauliWord::identity(self.num_qubits());
        let pairs = |bits: &[bool]| -> Vec<(usize, usize)> {
            let on: Vec<usize> = (0..bits.len()).filter(|&k| bits[k]).collect();
            on.chunks(2).map(|c| (c[0], c[1])).collect()
        };
        let ell = self.ell as i64;
        for (from, to) in pairs(&s.b) {
            let (i0, j0) = ((from as i64) / ell, (from as i64) % ell);
            let (i1, j1) = ((to as i64) / ell, (to as i64) % ell);
            // Flux moves (i,j)->(i,j+1) through V(i,j+1) and (i,j)->(i+1,j) through H(i+1,j).
            for j in j0.min(j1)..j0.max(j1) {
                w.mul_letter(self.qubit(i0, j + 1, Dir::V), Letter::X);
            }
            for i in i0..i1 {
                w.mul_letter(self.qubit(i + 1, j1, Dir::H), Letter::X);
            }
        }
        for (from, to) in pairs(&s.a) {
            let (i0, j0) = ((from as i64) / ell, (from as i64) % ell);
            let (i1, j1) = ((to as i64) / ell, (to as i64) % ell);
            // Charge moves (i,j)->(i,j+1) through H(i,j) and (i,j)->(i+1,j) through V(i,j).
            for j in j0.min(j1)..j0.max(j1) {
                w.mul_letter(self.qubit(i0, j, Dir::H), Letter::Z);
            }
            for i in i0..i1 {
                w.mul_letter(self.qubit(i, j1, Dir::V), Letter::Z);
            }
        }
        Ok(w)
    }

    fn check_syndrome(&self, s: &SyndromeConfig) -> Result<()> {
        if s.ell != self.ell {
            return Err(Error::DimensionMismatch {
                expected: self.ell,
                actual: s.ell,
            });
        }
        if !s.is_valid() {
            return Err(Error::InvalidSyndrome(
                "odd number of fluxes or charges".into(),
            ));
        }
        Ok(())
    }

    /// Parities of `w` across the four reference walls. For a closed operator
    /// these are its homology class.
    pub fn crossing(&self, w: &PauliWord) -> LogicalClass {
        let ell = self.ell as i64;
        let mut bits = 0u8;
        for t in 0..ell {
            bits ^= w.x_bit(self.qubit(0, t, Dir::H)) as u8;
            bits ^= (w.x_bit(self.qubit(t, 0, Dir::V)) as u8) << 1;
            bits ^= (w.z_bit(self.qubit(t, ell - 1, Dir::H)) as u8) << 2;
            bits ^= (w.z_bit(self.qubit(ell - 1, t, Dir::V)) as u8) << 3;
        }
        LogicalClass(bits)
    }

    pub fn logical_class(&self, w: &PauliWord) -> Result<LogicalClass> {
        if !self.extract_syndrome(w)?.is_trivial() {
            return Err(Error::OpenOperator);
        }
        Ok(self.crossing(w))
    }

    /// Bare logical operator for each set bit of `class`.
    pub fn logical_operator(&self, class: LogicalClass) -> PauliWord {
        let n = self.num_qubits();
        let ell = self.ell as i64;
        let mut w = PauliWord::identity(n);
        for t in 0..ell {
            if class.x0() {
                w.mul_letter(self.qubit(t, 0, Dir::H), Letter::X);
            }
            if class.x1() {
                w.mul_letter(self.qubit(0, t, Dir::V), Letter::X);
            }
            if class.z0() {
                w.mul_letter(self.qubit(0, t, Dir::H), Letter::Z);
            }
            if class.z1() {
                w.mul_letter(self.qubit(t, 0, Dir::V), Letter::Z);
            }
        }
        w
    }

    /// Exact `P(l | t)` by summing the channel over the full stabilizer group,
    /// for every class `l` relative to the canonical pure error of `s`. In
    /// bit-flip mode only the flux syndrome is used and four classes are
    /// returned; otherwise sixteen.
    pub fn exact_class_probabilities(
        &self,
        s: &SyndromeConfig,
        channel: &NoiseChannel,
        alphabet: Alphabet,
    ) -> Result<Vec<f64>> {
        let (max_ell, n_classes) = match alphabet {
            Alphabet::BitFlip => (EXACT_MAX_ELL_BITFLIP, 4usize),
            Alphabet::Pauli => (2, 16),
        };
        if self.ell > max_ell {
            return Err(Error::LatticeTooLarge(format!(
                "exact enumeration supports ell <= {max_ell} in {} mode, got {}",
                alphabet.name(),
                self.ell
            )));
        }
        if channel.num_qubits() != self.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits(),
                actual: channel.num_qubits(),
            });
        }
        let s = match alphabet {
            Alphabet::BitFlip => SyndromeConfig {
                ell: s.ell,
                a: vec![false; s.a.len()],
                b: s.b.clone(),
            },
            Alphabet::Pauli => s.clone(),
        };
        let t = self.pure_error(&s)?;
        let n = self.num_qubits();
        let pack = |w: &PauliWord| {
            let (x, z) = w.masks();
            x | z << n
        };
        let mut gens = Vec::new();
        let last = self.ell as i64 - 1;
        for i in 0..self.ell as i64 {
            for j in 0..self.ell as i64 {
                if (i, j) == (last, last) {
                    continue;
                }
                gens.push(pack(&self.stabilizer(StabilizerKind::Site, i, j)));
                if alphabet == Alphabet::Pauli {
                    gens.push(pack(&self.stabilizer(StabilizerKind::Plaquette, i, j)));
                }
            }
        }
        let weigh = ChunkWeights::new(channel, alphabet);
        let mut out = vec![0.0; n_classes];
        for (l, slot) in out.iter_mut().enumerate() {
            let base = pack(&t) ^ pack(&self.logical_operator(LogicalClass(l as u8)));
            let mut v = base;
            let mut sum = weigh.weight(v);
            for step in 1..1u64 << gens.len() {
                v ^= gens[step.trailing_zeros() as usize];
                sum += weigh.weight(v);
            }
            *slot = sum;
        }
        let total: f64 = out.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroProbability);
        }
        out.iter_mut().for_each(|p| *p /= total);
        Ok(out)
    }
}

/// Product of per-qubit probabilities evaluated four qubits at a time from a
/// packed `x | z << n` vector.
struct ChunkWeights {
    n: usize,
    tables: Vec<[f64; 256]>,
}

impl ChunkWeights {
    fn new(channel: &NoiseChannel, alphabet: Alphabet) -> Self {
        let n = channel.num_qubits();
        let chunks = n.div_ceil(4);
        let mut tables = vec![[0.0; 256]; chunks];
        for (c, table) in tables.iter_mut().enumerate() {
            for (idx, entry) in table.iter_mut().enumerate() {
                let mut p = 1.0;
                for k in 0..4 {
                    let q = 4 * c + k;
                    let x = idx >> k & 1 == 1;
                    let z = idx >> (4 + k) & 1 == 1;
                    if q >= n {
                        if x || z {
                            p = 0.0;
                        }
                        continue;
                    }
                    let l = match alphabet {
                        Alphabet::BitFlip => Letter::from_bits(x, false),
                        Alphabet::Pauli => Letter::from_bits(x, z),
                    };
                    p *= if alphabet == Alphabet::BitFlip && z {
                        0.0
                    } else {
                        channel.prob_in(q, l, alphabet)
                    };
                }
                *entry = p;
            }
        }
        ChunkWeights { n, tables }
    }

    #[inline]
    fn weight(&self, v: u64) -> f64 {
        let x = v & ((1u64 << self.n) - 1);
        let z = v >> self.n;
        let mut p = 1.0;
        for (c, t) in self.tables.iter().enumerate() {
            let idx = (x >> (4 * c) & 0xf) | (z >> (4 * c) & 0xf) << 4;
            p *= t[idx as usize];
        }
        p
    }
}

/// Observed excitation configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyndromeConfig {
    pub ell: usize,
    /// Charges (site operators), row-major.
    pub a: Vec<bool>,
    /// Fluxes (plaquette operators), row-major.
    pub b: Vec<bool>,
}

impl SyndromeConfig {
    pub fn zeros(ell: usize) -> Self {
        SyndromeConfig {
            ell,
            a: vec![false; ell * ell],
            b: vec![false; ell * ell],
        }
    }

    pub fn is_valid(&self) -> bool {
        let n = self.ell * self.ell;
        self.a.len() == n
            && self.b.len() == n
            && self.a.iter().filter(|&&v| v).count() % 2 == 0
            && self.b.iter().filter(|&&v| v).count() % 2 == 0
    }

    pub fn is_trivial(&self) -> bool {
        !self.a.iter().any(|&v| v) && !self.b.iter().any(|&v| v)
    }

    pub fn xor(&self, other: &SyndromeConfig) -> SyndromeConfig {
        SyndromeConfig {
            ell: self.ell,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x ^ y).collect(),
            b: self.b.iter().zip(&other.b).map(|(x, y)| x ^ y).collect(),
        }
    }

    /// Per-site bits in decoder layout: bit 0 flux, bit 1 charge.
    pub fn site_bits(&self, alphabet: Alphabet) -> Vec<u8> {
        self.b
            .iter()
            .zip(&self.a)
            .map(|(&b, &a)| b as u8 | if alphabet == Alphabet::Pauli { (a as u8) << 1 } else { 0 })
            .collect()
    }

    /// Parses `a i j` / `b i j` lines; `#` starts a comment.
    pub fn parse(text: &str, ell: usize) -> Result<SyndromeConfig> {
        let mut s = SyndromeConfig::zeros(ell);
        for (lineno, raw) in text.lines().enumerate() {
            let line = crate::pauli::strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::parse(lineno + 1, format!("expected `a|b i j`, got `{line}`"));
            if toks.len() != 3 {
                return Err(bad());
            }
            let i: usize = toks[1].parse().map_err(|_| bad())?;
            let j: usize = toks[2].parse().map_err(|_| bad())?;
            if i >= ell || j >= ell {
                return Err(bad());
            }
            let k = i * ell + j;
            match toks[0] {
                "a" => s.a[k] ^= true,
                "b" => s.b[k] ^= true,
                _ => return Err(bad()),
            }
        }
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, bits) in [("a", &self.a), ("b", &self.b)] {
            for (k, _) in bits.iter().enumerate().filter(|(_, &v)| v) {
                out.push_str(&format!("{name} {} {}\n", k / self.ell, k % self.ell));
            }
        }
        out
    }
}

/// Parses error lines `X i j H` (letters I, X, Y, Z; directions H, V).
pub fn parse_error(text: &str, lat: &Lattice2D) -> Result<PauliWord> {
    let mut w = PauliWord::identity(lat.num_qubits());
    for (lineno, raw) in text.lines().enumerate() {
        let line = crate::pauli::strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::parse(lineno + 1, format!("expected `P i j H|V`, got `{line}`"));
        if toks.len() != 4 {
            return Err(bad());
        }
        let l = toks[0]
            .chars()
            .next()
            .and_then(Letter::from_symbol)
            .ok_or_else(bad)?;
        let i: i64 = toks[1].parse().map_err(|_| bad())?;
        let j: i64 = toks[2].parse().map_err(|_| bad())?;
        let d = Dir::from_symbol(toks[3]).ok_or_else(bad)?;
        w.mul_letter(lat.qubit(i, j, d), l);
    }
    Ok(w)
}

pub fn error_to_text(w: &PauliWord, lat: &Lattice2D) -> String {
    let mut out = String::new();
    for (q, l) in w.support() {
        let site = q / 2;
        let d = if q % 2 == 0 { Dir::H } else { Dir::V };
        out.push_str(&format!(
            "{} {} {} {}\n",
            l.symbol(),
            site / lat.ell,
            site % lat.ell,
            d.symbol()
        ));
    }
    out
}

/// Memoryless Pauli channel with one `[I, X, Z, Y]` row per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseChannel {
    rows: Vec<[f64; 4]>,
}

impl NoiseChannel {
    pub fn new(rows: Vec<[f64; 4]>) -> Result<Self> {
        for r in &rows {
            if r.iter().any(|p| !(*p >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("channel row {r:?} is not a distribution")));
            }
        }
        Ok(NoiseChannel { rows })
    }

    pub fn iid(row: [f64; 4], n: usize) -> Result<Self> {
        NoiseChannel::new(vec![row; n])
    }

    pub fn bit_flip(p: f64, n: usize) -> Result<Self> {
        check_p(p)?;
        NoiseChannel::iid([1.0 - p, p, 0.0, 0.0], n)
    }

    /// Each of X, Y, Z with probability `p / 3`.
    pub fn depolarizing(p: f64, n: usize) -> Result<Self> {
        check_p(p)?;
        NoiseChannel::iid([1.0 - p, p / 3.0, p / 3.0, p / 3.0], n)
    }

    pub fn num_qubits(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, q: usize) -> &[f64; 4] {
        &self.rows[q]
    }

    pub fn prob(&self, q: usize, l: Letter) -> f64 {
        self.rows[q][l.index()]
    }

    /// Probability of the letter in the given alphabet; in bit-flip mode the
    /// Z part is traced out.
    pub fn prob_in(&self, q: usize, l: Letter, alphabet: Alphabet) -> f64 {
        let r = &self.rows[q];
        match alphabet {
            Alphabet::Pauli => r[l.index()],
            Alphabet::BitFlip => {
                if l.x() {
                    r[Letter::X.index()] + r[Letter::Y.index()]
                } else {
                    r[Letter::I.index()] + r[Letter::Z.index()]
                }
            }
        }
    }

    pub fn is_bit_flip(&self) -> bool {
        self.rows.iter().all(|r| r[2] == 0.0 && r[3] == 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, q: usize, rng: &mut R) -> Letter {
        let r = &self.rows[q];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for l in [Letter::X, Letter::Z, Letter::Y] {
            acc += r[l.index()];
            if u < acc {
                return l;
            }
        }
        Letter::I
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Exponents of `X0, X1, Z0, Z1` as bits 0..4.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogicalClass(pub u8);

impl LogicalClass {
    pub const TRIVIAL: LogicalClass = LogicalClass(0);

    pub fn x0(self) -> bool {
        self.0 & 1 != 0
    }
    pub fn x1(self) -> bool {
        self.0 & 2 != 0
    }
    pub fn z0(self) -> bool {
        self.0 & 4 != 0
    }
    pub fn z1(self) -> bool {
        self.0 & 8 != 0
    }
    pub fn is_trivial(self) -> bool {
        self.0 == 0
    }
    pub fn xor(self, other: LogicalClass) -> LogicalClass {
        LogicalClass(self.0 ^ other.0)
    }
}

impl fmt::Display for LogicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{},{})",
            self.x0() as u8,
            self.x1() as u8,
            self.z0() as u8,
            self.z1() as u8
        )
    }
}
