//! Phase-free Pauli operators over GF(2) and tagged cell bases.

use std::fmt;

use crate::error::{Error, Result};
use crate::gf2::{Gf2Solver, LinearMap};

/// Single-qubit Pauli label. The discriminant packs the (x, z) bit pair as `x | z << 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I = 0,
    X = 1,
    Z = 2,
    Y = 3,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Z, Letter::Y];

    pub fn from_bits(x: bool, z: bool) -> Letter {
        Letter::from_index(x as usize | (z as usize) << 1)
    }

    pub fn from_index(i: usize) -> Letter {
        Letter::ALL[i & 3]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn x(self) -> bool {
        self as u8 & 1 == 1
    }

    pub fn z(self) -> bool {
        self as u8 & 2 == 2
    }

    /// Product up to phase.
    pub fn mul(self, other: Letter) -> Letter {
        Letter::from_index(self.index() ^ other.index())
    }

    pub fn symbol(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Z => 'Z',
            Letter::Y => 'Y',
        }
    }

    pub fn from_symbol(c: char) -> Option<Letter> {
        match c {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Z' => Some(Letter::Z),
            'Y' => Some(Letter::Y),
            _ => None,
        }
    }
}

/// Which single-qubit errors are in scope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Alphabet {
    /// X errors only; letters are `{I, X}`.
    BitFlip,
    /// Full Pauli group; letters are `{I, X, Z, Y}`.
    Pauli,
}

impl Alphabet {
    pub fn bits(self) -> usize {
        match self {
            Alphabet::BitFlip => 1,
            Alphabet::Pauli => 2,
        }
    }

    pub fn size(self) -> usize {
        1 << self.bits()
    }

    pub fn name(self) -> &'static str {
        match self {
            Alphabet::BitFlip => "x",
            Alphabet::Pauli => "xz",
        }
    }

    pub fn from_name(s: &str) -> Option<Alphabet> {
        match s {
            "x" | "bitflip" => Some(Alphabet::BitFlip),
            "xz" | "pauli" => Some(Alphabet::Pauli),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Bits {
    words: Vec<u64>,
}

impl Bits {
    fn zeros(n: usize) -> Self {
        Bits {
            words: vec![0; n.div_ceil(64)],
        }
    }

    #[inline]
    fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize, v: bool) {
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    #[inline]
    fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    fn xor_assign(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    fn and_parity(&self, other: &Bits) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    fn low_u64(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }
}

/// An `n`-qubit Pauli operator in binary symplectic form. Phases are not tracked.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliWord {
    n: usize,
    x: Bits,
    z: Bits,
}

impl PauliWord {
    pub fn identity(n: usize) -> Self {
        PauliWord {
            n,
            x: Bits::zeros(n),
            z: Bits::zeros(n),
        }
    }

    /// Builds a word from `(qubit, letter)` pairs. Repeated qubits multiply.
    pub fn from_sparse(n: usize, terms: &[(usize, Letter)]) -> Result<Self> {
        let mut w = PauliWord::identity(n);
        for &(q, l) in terms {
            if q >= n {
                return Err(Error::IndexOutOfRange { index: q, size: n });
            }
            w.mul_letter(q, l);
        }
        Ok(w)
    }

    pub fn x_on(n: usize, qubits: &[usize]) -> Self {
        let mut w = PauliWord::identity(n);
        for &q in qubits {
            w.x.flip(q);
        }
        w
    }

    pub fn z_on(n: usize, qubits: &[usize]) -> Self {
        let mut w = PauliWord::identity(n);
        for &q in qubits {
            w.z.flip(q);
        }
        w
    }

    /// Word on at most 64 qubits from packed x and z masks.
    pub fn from_masks(n: usize, x: u64, z: u64) -> Self {
        assert!(n <= 64);
        let mut w = PauliWord::identity(n);
        if n > 0 {
            let keep = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            w.x.words[0] = x & keep;
            w.z.words[0] = z & keep;
        }
        w
    }

    /// Packed (x, z) masks; only valid for `n <= 64`.
    pub fn masks(&self) -> (u64, u64) {
        assert!(self.n <= 64);
        (self.x.low_u64(), self.z.low_u64())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn letter(&self, q: usize) -> Letter {
        Letter::from_bits(self.x.get(q), self.z.get(q))
    }

    pub fn set_letter(&mut self, q: usize, l: Letter) {
        self.x.set(q, l.x());
        self.z.set(q, l.z());
    }

    pub fn mul_letter(&mut self, q: usize, l: Letter) {
        if l.x() {
            self.x.flip(q);
        }
        if l.z() {
            self.z.flip(q);
        }
    }

    pub fn x_bit(&self, q: usize) -> bool {
        self.x.get(q)
    }

    pub fn z_bit(&self, q: usize) -> bool {
        self.z.get(q)
    }

    pub fn has_z(&self) -> bool {
        self.z.any()
    }

    pub fn is_identity(&self) -> bool {
        !self.x.any() && !self.z.any()
    }

    pub fn weight(&self) -> usize {
        (0..self.n)
            .filter(|&q| self.x.get(q) || self.z.get(q))
            .count()
    }

    pub fn x_weight(&self) -> usize {
        self.x.count()
    }

    /// Non-identity positions with their letters.
    pub fn support(&self) -> impl Iterator<Item = (usize, Letter)> + '_ {
        (0..self.n)
            .map(move |q| (q, self.letter(q)))
            .filter(|(_, l)| *l != Letter::I)
    }

    fn check_size(&self, other: &PauliWord) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        Ok(())
    }

    /// Phase-free product.
    pub fn multiply(&self, other: &PauliWord) -> Result<PauliWord> {
        self.check_size(other)?;
        let mut out = self.clone();
        out.x.xor_assign(&other.x);
        out.z.xor_assign(&other.z);
        Ok(out)
    }

    /// In-place product; panics on size mismatch.
    pub fn mul_assign(&mut self, other: &PauliWord) {
        assert_eq!(self.n, other.n, "Pauli word size mismatch");
        self.x.xor_assign(&other.x);
        self.z.xor_assign(&other.z);
    }

    /// True iff the symplectic inner product vanishes.
    pub fn commutes(&self, other: &PauliWord) -> Result<bool> {
        self.check_size(other)?;
        Ok(self.x.and_parity(&other.z) == other.x.and_parity(&self.z))
    }

    /// The single-qubit factor on qubit `q` (written `w|_q`).
    pub fn restrict(&self, q: usize) -> Result<Letter> {
        if q >= self.n {
            return Err(Error::IndexOutOfRange {
                index: q,
                size: self.n,
            });
        }
        Ok(self.letter(q))
    }
}

impl fmt::Debug for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliWord({}; {})", self.n, self)
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for (q, l) in self.support() {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{}{}", l.symbol(), q)?;
        }
        Ok(())
    }
}

/// Role of a generator inside a unit cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    /// Stabilizer: relates topologically equivalent processes.
    S,
    /// Pure error conjugate to one measured check.
    T,
    /// Changes the charge of the unmeasured check.
    E,
    /// Current through a retained wall.
    L,
}

impl Tag {
    pub fn symbol(self) -> char {
        match self {
            Tag::S => 'S',
            Tag::T => 'T',
            Tag::E => 'E',
            Tag::L => 'L',
        }
    }

    pub fn from_symbol(s: &str) -> Option<Tag> {
        match s {
            "S" => Some(Tag::S),
            "T" => Some(Tag::T),
            "E" => Some(Tag::E),
            "L" => Some(Tag::L),
            _ => None,
        }
    }
}

/// Exponents `x_i` in `E = prod_i Q_i^{x_i}`, little-endian in generator order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ExponentVector {
    bits: u64,
    len: usize,
}

impl ExponentVector {
    pub fn new(bits: u64, len: usize) -> Self {
        assert!(len <= 64);
        let keep = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        ExponentVector {
            bits: bits & keep,
            len,
        }
    }

    pub fn zeros(len: usize) -> Self {
        ExponentVector::new(0, len)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn xor(&self, other: &ExponentVector) -> ExponentVector {
        assert_eq!(self.len, other.len);
        ExponentVector::new(self.bits ^ other.bits, self.len)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }
}

/// Tagged generating set for the in-scope Pauli group of a unit cell.
#[derive(Clone, Debug)]
pub struct CellBasis {
    alphabet: Alphabet,
    n_qubits: usize,
    tags: Vec<Tag>,
    generators: Vec<PauliWord>,
    solver: Gf2Solver,
    inverse: LinearMap,
}

pub const MAX_CELL_QUBITS: usize = 32;

impl CellBasis {
    pub fn new(alphabet: Alphabet, n_qubits: usize, gens: Vec<(Tag, PauliWord)>) -> Result<Self> {
        if n_qubits > MAX_CELL_QUBITS {
            return Err(Error::Cell(format!(
                "cells are limited to {MAX_CELL_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let width = alphabet.bits() * n_qubits;
        if gens.len() != width {
            return Err(Error::Cell(format!(
                "{} generators cannot span the {}-bit group on {} qubits",
                gens.len(),
                width,
                n_qubits
            )));
        }
        let mut tags = Vec::with_capacity(gens.len());
        let mut generators = Vec::with_capacity(gens.len());
        for (tag, w) in gens {
            if w.num_qubits() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    actual: w.num_qubits(),
                });
            }
            if alphabet == Alphabet::BitFlip && w.has_z() {
                return Err(Error::Cell(format!(
                    "generator {w} has Z support in a bit-flip basis"
                )));
            }
            tags.push(tag);
            generators.push(w);
        }
        let rows: Vec<u64> = generators
            .iter()
            .map(|w| symplectic(alphabet, n_qubits, w))
            .collect();
        let solver = Gf2Solver::new(&rows, width);
        if !solver.is_independent() {
            return Err(Error::Dependent {
                rank: solver.rank(),
                count: rows.len(),
            });
        }
        let columns: Vec<u64> = (0..width)
            .map(|b| solver.solve(1u64 << b).expect("full rank basis spans"))
            .collect();
        let basis = CellBasis {
            alphabet,
            n_qubits,
            tags,
            generators,
            solver,
            inverse: LinearMap::from_columns(&columns),
        };
        basis.check_conjugacy()?;
        Ok(basis)
    }

    /// Each T must anticommute with exactly one S. Only meaningful when both
    /// X and Z letters are present.
    fn check_conjugacy(&self) -> Result<()> {
        if self.alphabet != Alphabet::Pauli {
            return Ok(());
        }
        let s: Vec<&PauliWord> = self.of_tag(Tag::S).map(|i| &self.generators[i]).collect();
        for t in self.of_tag(Tag::T) {
            let anti = s
                .iter()
                .filter(|w| !w.commutes(&self.generators[t]).unwrap())
                .count();
            if anti != 1 {
                return Err(Error::Cell(format!(
                    "pure error {} anticommutes with {anti} stabilizers",
                    self.generators[t]
                )));
            }
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn num_qubits(&self) -> usize {
        self.n_qubits
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

    pub fn generator(&self, i: usize) -> &PauliWord {
        &self.generators[i]
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn tag(&self, i: usize) -> Tag {
        self.tags[i]
    }

    /// Generator indices carrying `tag`, in basis order.
    pub fn of_tag(&self, tag: Tag) -> impl Iterator<Item = usize> + '_ {
        (0..self.tags.len()).filter(move |&i| self.tags[i] == tag)
    }

    /// Index of the `k`-th generator with the given tag (e.g. `T3`).
    pub fn tagged(&self, tag: Tag, k: usize) -> Option<usize> {
        self.of_tag(tag).nth(k)
    }

    /// Packed symplectic vector of a word: `x | z << n` (or just `x` for bit-flip).
    pub fn vector(&self, w: &PauliWord) -> u64 {
        symplectic(self.alphabet, self.n_qubits, w)
    }

    pub fn decompose(&self, w: &PauliWord) -> Result<ExponentVector> {
        if w.num_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: w.num_qubits(),
            });
        }
        if self.alphabet == Alphabet::BitFlip && w.has_z() {
            let (_, z) = w.masks();
            return Err(Error::NotInSpan { residual: z });
        }
        self.solver
            .solve(self.vector(w))
            .map(|bits| ExponentVector::new(bits, self.len()))
            .map_err(|residual| Error::NotInSpan { residual })
    }

    /// Table-driven decomposition of a packed symplectic vector.
    #[inline]
    pub fn decompose_vector(&self, v: u64) -> u64 {
        self.inverse.apply(v)
    }

    pub fn compose(&self, e: &ExponentVector) -> PauliWord {
        let mut w = PauliWord::identity(self.n_qubits);
        for i in e.ones() {
            w.mul_assign(&self.generators[i]);
        }
        w
    }

    /// Parses the plain-text basis format: one generator per line, `TAG P<q> P<q> ...`,
    /// with optional `qubits N` and `alphabet x|xz` headers and `#` comments.
    pub fn parse(text: &str) -> Result<CellBasis> {
        let mut alphabet = None;
        let mut n_qubits = None;
        let mut lines = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            match head {
                "qubits" => {
                    n_qubits = Some(parse_num(parts.next(), lineno + 1)?);
                }
                "alphabet" => {
                    let a = parts.next().unwrap_or("");
                    alphabet = Some(
                        Alphabet::from_name(a)
                            .ok_or_else(|| Error::parse(lineno + 1, format!("unknown alphabet {a}")))?,
                    );
                }
                _ => lines.push(parse_generator_line(line, lineno + 1)?),
            }
        }
        build_basis(alphabet, n_qubits, lines)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "qubits {}\nalphabet {}\n",
            self.n_qubits,
            self.alphabet.name()
        );
        for (t, w) in self.tags.iter().zip(&self.generators) {
            s.push(t.symbol());
            for (q, l) in w.support() {
                s.push_str(&format!(" {}{}", l.symbol(), q));
            }
            s.push('\n');
        }
        s
    }

    /// FNV-1a hash of the canonical text form.
    pub fn fingerprint(&self) -> u64 {
        self.to_text().bytes().fold(0xcbf29ce484222325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100000001b3)
        })
    }
}

fn symplectic(alphabet: Alphabet, n: usize, w: &PauliWord) -> u64 {
    let (x, z) = w.masks();
    match alphabet {
        Alphabet::BitFlip => x,
        Alphabet::Pauli => x | z << n,
    }
}

pub(crate) fn strip_comment(raw: &str) -> &str {
    raw.split('#').next().unwrap_or("").trim()
}

fn parse_num(tok: Option<&str>, line: usize) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(line, "expected a number"))
}

/// `(tag, terms)` for one generator line such as `S X1 X3 X4`.
pub(crate) type GeneratorLine = (Tag, Vec<(usize, Letter)>);

pub(crate) fn parse_generator_line(line: &str, lineno: usize) -> Result<GeneratorLine> {
    let mut parts = line.split_whitespace();
    let head = parts.next().unwrap_or("");
    let tag = Tag::from_symbol(head)
        .ok_or_else(|| Error::parse(lineno, format!("unknown directive `{head}`")))?;
    let mut terms = Vec::new();
    for tok in parts {
        let mut chars = tok.chars();
        let letter = chars
            .next()
            .and_then(Letter::from_symbol)
            .ok_or_else(|| Error::parse(lineno, format!("bad Pauli term `{tok}`")))?;
        let q: usize = chars
            .as_str()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad qubit index in `{tok}`")))?;
        terms.push((q, letter));
    }
    if terms.is_empty() {
        return Err(Error::parse(lineno, "generator has empty support"));
    }
    Ok((tag, terms))
}

pub(crate) fn build_basis(
    alphabet: Option<Alphabet>,
    n_qubits: Option<usize>,
    lines: Vec<GeneratorLine>,
) -> Result<CellBasis> {
    let max_q = lines
        .iter()
        .flat_map(|(_, t)| t.iter().map(|(q, _)| *q + 1))
        .max()
        .unwrap_or(0);
    let n = n_qubits.unwrap_or(max_q);
    let alphabet = alphabet.unwrap_or_else(|| {
        if lines
            .iter()
            .any(|(_, t)| t.iter().any(|(_, l)| l.z()))
        {
            Alphabet::Pauli
        } else {
            Alphabet::BitFlip
        }
    });
    let gens = lines
        .into_iter()
        .map(|(tag, terms)| PauliWord::from_sparse(n, &terms).map(|w| (tag, w)))
        .collect::<Result<Vec<_>>>()?;
    CellBasis::new(alphabet, n, gens)
}
