//! Unit cells: a tagged operator basis together with the geometry that ties
//! each cell qubit to a lattice face.
//!
//! Cell files are line oriented:
//!
//! ```text
//! name cell211
//! model flux3d            # toric2d | flux3d
//! alphabet x              # x | xz
//! extent 2 1 1            # sites per local axis
//! slot 6 1 0 1 0          # qubit 6 is the axis-1 face of the site at offset (0,1,0)
//! measure flux 0 0 0      # check read by T0, T1, ... in order
//! unmeasured flux 1 0 0
//! current 1 x             # L1 becomes the X part of the coarse axis-1 face
//! S X1 X3 X4              # generators, as in the plain basis format
//! ```

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Model, Offset, MAX_DIMS};
use crate::pauli::{
    build_basis, parse_generator_line, strip_comment, Alphabet, CellBasis, Letter, PauliWord, Tag,
};

pub const CELL22: &str = include_str!("../../cells/cell22.cell");
pub const CELL22X: &str = include_str!("../../cells/cell22x.cell");
pub const CELL211: &str = include_str!("../../cells/cell211.cell");
pub const CELL221: &str = include_str!("../../cells/cell221.cell");

/// Cell qubit: the face on local `axis` of the site at `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Slot {
    pub offset: Offset,
    pub axis: usize,
}

/// A check inside the cell: the site it sits on and its kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellCheck {
    pub site: usize,
    pub kind: usize,
}

/// Coarse face fed by an L generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Current {
    pub axis: usize,
    pub bit: usize,
}

#[derive(Clone, Debug)]
pub struct UnitCellSpec {
    name: String,
    model: Model,
    basis: CellBasis,
    extent: [usize; MAX_DIMS],
    sites: Vec<Offset>,
    slots: Vec<Slot>,
    /// `site_slots[k][a]`: slot of the local axis-`a` face owned by site `k`.
    site_slots: Vec<Vec<usize>>,
    measured: Vec<CellCheck>,
    unmeasured: Vec<CellCheck>,
    currents: Vec<Current>,
}

impl UnitCellSpec {
    pub fn parse(text: &str) -> Result<UnitCellSpec> {
        let mut name = None;
        let mut model_name = None;
        let mut alphabet = None;
        let mut extent: Option<Vec<usize>> = None;
        let mut slots: Vec<(usize, usize, Vec<i64>)> = Vec::new();
        let mut measured: Vec<(String, Vec<i64>, usize)> = Vec::new();
        let mut unmeasured: Vec<(String, Vec<i64>, usize)> = Vec::new();
        let mut currents: Vec<(usize, String, usize)> = Vec::new();
        let mut gens = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let nums = |t: &[&str]| -> Result<Vec<i64>> {
                t.iter()
                    .map(|s| {
                        s.parse::<i64>()
                            .map_err(|_| Error::parse(lineno, format!("expected an integer, got `{s}`")))
                    })
                    .collect()
            };
            match toks[0] {
                "name" => name = toks.get(1).map(|s| s.to_string()),
                "model" => model_name = toks.get(1).map(|s| s.to_string()),
                "alphabet" => {
                    let a = toks.get(1).copied().unwrap_or("");
                    alphabet = Some(
                        Alphabet::from_name(a)
                            .ok_or_else(|| Error::parse(lineno, format!("unknown alphabet `{a}`")))?,
                    );
                }
                "extent" => {
                    let v = nums(&toks[1..])?;
                    if v.iter().any(|&x| x < 1) {
                        return Err(Error::parse(lineno, "extent must be positive"));
                    }
                    extent = Some(v.into_iter().map(|x| x as usize).collect());
                }
                "slot" => {
                    let v = nums(&toks[1..])?;
                    if v.len() < 3 || v[0] < 0 || v[1] < 0 {
                        return Err(Error::parse(lineno, "expected `slot <qubit> <axis> <offset...>`"));
                    }
                    slots.push((v[0] as usize, v[1] as usize, v[2..].to_vec()));
                }
                "measure" | "unmeasured" => {
                    let kind = toks
                        .get(1)
                        .ok_or_else(|| Error::parse(lineno, "missing check kind"))?
                        .to_string();
                    let entry = (kind, nums(&toks[2..])?, lineno);
                    if toks[0] == "measure" {
                        measured.push(entry);
                    } else {
                        unmeasured.push(entry);
                    }
                }
                "current" => {
                    if toks.len() != 3 {
                        return Err(Error::parse(lineno, "expected `current <axis> <x|z>`"));
                    }
                    let axis = nums(&toks[1..2])?[0];
                    if axis < 0 {
                        return Err(Error::parse(lineno, "negative axis"));
                    }
                    currents.push((axis as usize, toks[2].to_string(), lineno));
                }
                _ => gens.push(parse_generator_line(line, lineno)?),
            }
        }
        let name = name.ok_or_else(|| Error::Cell("missing `name`".into()))?;
        let alphabet = alphabet.ok_or_else(|| Error::Cell(format!("{name}: missing `alphabet`")))?;
        let model = Model::from_name(
            &model_name.ok_or_else(|| Error::Cell(format!("{name}: missing `model`")))?,
            alphabet,
        )?;
        let dims = model.dims();
        let extent_v = extent.ok_or_else(|| Error::Cell(format!("{name}: missing `extent`")))?;
        if extent_v.len() != dims {
            return Err(Error::Cell(format!("{name}: extent needs {dims} entries")));
        }
        let offset = |v: &[i64], lineno: usize| -> Result<Offset> {
            if v.len() != dims {
                return Err(Error::parse(lineno, format!("offset needs {dims} coordinates")));
            }
            let mut o = [0; MAX_DIMS];
            o[..dims].copy_from_slice(v);
            Ok(o)
        };
        let n_slots = slots.len();
        let mut slot_list = vec![None; n_slots];
        for (q, axis, off) in &slots {
            if *q >= n_slots || slot_list[*q].is_some() {
                return Err(Error::Cell(format!("{name}: slot {q} missing or repeated")));
            }
            if *axis >= dims {
                return Err(Error::Cell(format!("{name}: slot {q} has axis {axis}")));
            }
            slot_list[*q] = Some(Slot {
                offset: offset(off, 0)?,
                axis: *axis,
            });
        }
        let slots: Vec<Slot> = slot_list.into_iter().map(|s| s.unwrap()).collect();
        let check = |entries: &[(String, Vec<i64>, usize)]| -> Result<Vec<(usize, Offset)>> {
            entries
                .iter()
                .map(|(kind, v, l)| {
                    let k = model
                        .check_index(kind)
                        .ok_or_else(|| Error::parse(*l, format!("unknown check kind `{kind}`")))?;
                    Ok((k, offset(v, *l)?))
                })
                .collect()
        };
        let measured = check(&measured)?;
        let unmeasured = check(&unmeasured)?;
        let currents = currents
            .into_iter()
            .map(|(axis, b, l)| {
                let bit = match b.as_str() {
                    "x" => 0,
                    "z" => 1,
                    _ => return Err(Error::parse(l, format!("unknown letter part `{b}`"))),
                };
                Ok(Current { axis, bit })
            })
            .collect::<Result<Vec<_>>>()?;
        let basis = build_basis(Some(alphabet), Some(n_slots), gens)?;
        let mut extent = [1; MAX_DIMS];
        extent[..dims].copy_from_slice(&extent_v);
        UnitCellSpec::new(name, model, basis, extent, slots, measured, unmeasured, currents)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        model: Model,
        basis: CellBasis,
        extent: [usize; MAX_DIMS],
        slots: Vec<Slot>,
        measured: Vec<(usize, Offset)>,
        unmeasured: Vec<(usize, Offset)>,
        currents: Vec<Current>,
    ) -> Result<UnitCellSpec> {
        let err = |m: String| Error::Cell(format!("{name}: {m}"));
        let dims = model.dims();
        if basis.alphabet() != model.alphabet() {
            return Err(err("basis alphabet differs from the model".into()));
        }
        if basis.num_qubits() != slots.len() {
            return Err(err(format!(
                "{} slots for a {}-qubit basis",
                slots.len(),
                basis.num_qubits()
            )));
        }
        let sites = box_sites(&extent, dims);
        let mut seen = HashSet::new();
        for s in &slots {
            if !seen.insert(*s) {
                return Err(err(format!("face {s:?} listed twice")));
            }
        }
        let site_slots = sites
            .iter()
            .map(|o| {
                (0..dims)
                    .map(|a| {
                        slots
                            .iter()
                            .position(|s| s.offset == *o && s.axis == a)
                            .ok_or_else(|| err(format!("site {o:?} has no slot for axis {a}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let site_of = |o: &Offset| {
            sites
                .iter()
                .position(|s| s == o)
                .ok_or_else(|| err(format!("check site {o:?} outside the cell")))
        };
        let measured = measured
            .iter()
            .map(|(k, o)| Ok(CellCheck { site: site_of(o)?, kind: *k }))
            .collect::<Result<Vec<_>>>()?;
        let unmeasured = unmeasured
            .iter()
            .map(|(k, o)| Ok(CellCheck { site: site_of(o)?, kind: *k }))
            .collect::<Result<Vec<_>>>()?;
        let spec = UnitCellSpec {
            name: name.clone(),
            model,
            basis,
            extent,
            sites,
            slots,
            site_slots,
            measured,
            unmeasured,
            currents,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let err = |m: String| Error::Cell(format!("{}: {m}", self.name));
        let basis = &self.basis;
        let n_t = basis.of_tag(Tag::T).count();
        if n_t != self.measured.len() {
            return Err(err(format!(
                "{} T generators for {} measured checks",
                n_t,
                self.measured.len()
            )));
        }
        if basis.of_tag(Tag::L).count() != self.currents.len() {
            return Err(err("one `current` line is needed per L generator".into()));
        }
        // Every (site, kind) pair is either measured or left out, exactly once.
        for k in 0..self.model.checks().len() {
            for s in 0..self.sites.len() {
                let c = CellCheck { site: s, kind: k };
                let count = self.measured.iter().chain(&self.unmeasured).filter(|&&x| x == c).count();
                if count != 1 {
                    return Err(err(format!("check {k} at site {s} listed {count} times")));
                }
            }
        }
        let functionals = self
            .measured
            .iter()
            .map(|c| self.check_slots(*c).ok_or_else(|| err(format!("measured check {c:?} reads a face outside the cell"))))
            .collect::<Result<Vec<_>>>()?;
        let mut t_seen = 0;
        for (g, w) in basis.generators().iter().enumerate() {
            let flips: Vec<usize> = (0..self.measured.len())
                .filter(|&m| self.eval_check(&functionals[m], self.measured[m].kind, w))
                .collect();
            match basis.tag(g) {
                Tag::T => {
                    if flips != [t_seen] {
                        return Err(err(format!("T{t_seen} = {w} flips measured checks {flips:?}")));
                    }
                    t_seen += 1;
                }
                tag => {
                    if !flips.is_empty() {
                        return Err(err(format!(
                            "{}-generator {w} flips measured checks {flips:?}",
                            tag.symbol()
                        )));
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        for (k, cur) in self.currents.iter().enumerate() {
            if cur.axis >= self.model.dims() || cur.bit >= self.model.letter_bits() || !seen.insert(*cur) {
                return Err(err(format!("bad or repeated current {cur:?}")));
            }
            let wall = self.wall(*cur);
            let l_index = basis.tagged(Tag::L, k).unwrap();
            for q in 0..self.slots.len() {
                for bit in 0..self.model.letter_bits() {
                    let letter = Letter::from_bits(bit == 0, bit == 1);
                    let w = PauliWord::from_sparse(self.slots.len(), &[(q, letter)])?;
                    let e = basis.decompose(&w)?;
                    let want = bit == cur.bit && wall.contains(&q);
                    if e.get(l_index) != want {
                        return Err(err(format!(
                            "L{k} does not measure the wall of axis {} on qubit {q}",
                            cur.axis
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Slots read by a check, or `None` if some face lies outside the cell.
    pub fn check_slots(&self, c: CellCheck) -> Option<Vec<usize>> {
        let o = self.sites[c.site];
        self.model.checks()[c.kind]
            .faces
            .iter()
            .map(|(d, a)| {
                let mut t = o;
                for i in 0..MAX_DIMS {
                    t[i] += d[i];
                }
                self.slot_at(&t, *a)
            })
            .collect()
    }

    fn eval_check(&self, slots: &[usize], kind: usize, w: &PauliWord) -> bool {
        let bit = self.model.checks()[kind].bit;
        slots
            .iter()
            .fold(false, |acc, &q| acc ^ (w.letter(q).index() >> bit & 1 == 1))
    }

    pub fn slot_at(&self, offset: &Offset, axis: usize) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.offset == *offset && s.axis == axis)
    }

    /// Owned slots whose letter bit crosses the cell boundary that becomes the
    /// coarse face `cur`.
    pub fn wall(&self, cur: Current) -> Vec<usize> {
        let kind = self
            .model
            .checks()
            .iter()
            .find(|k| k.bit == cur.bit)
            .expect("model has a check for each letter bit");
        let d = kind.partner_offset(cur.axis);
        let mut w: Vec<usize> = self
            .sites
            .iter()
            .enumerate()
            .filter(|(_, o)| {
                let mut t = **o;
                for i in 0..MAX_DIMS {
                    t[i] -= d[i];
                }
                !self.sites.contains(&t)
            })
            .map(|(k, _)| self.site_slots[k][cur.axis])
            .collect();
        w.sort_unstable();
        w
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn basis(&self) -> &CellBasis {
        &self.basis
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent[..self.model.dims()]
    }

    pub fn sites(&self) -> &[Offset] {
        &self.sites
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn site_slots(&self) -> &[Vec<usize>] {
        &self.site_slots
    }

    /// Slots that do not belong to a site of this cell.
    pub fn extra_slots(&self) -> Vec<usize> {
        (0..self.slots.len())
            .filter(|&q| !self.sites.contains(&self.slots[q].offset))
            .collect()
    }

    pub fn measured(&self) -> &[CellCheck] {
        &self.measured
    }

    pub fn unmeasured(&self) -> &[CellCheck] {
        &self.unmeasured
    }

    pub fn currents(&self) -> &[Current] {
        &self.currents
    }
}

/// All offsets of the extent box, row-major.
fn box_sites(extent: &[usize; MAX_DIMS], dims: usize) -> Vec<Offset> {
    let total: usize = extent[..dims].iter().product();
    (0..total)
        .map(|mut idx| {
            let mut o = [0; MAX_DIMS];
            for a in (0..dims).rev() {
                o[a] = (idx % extent[a]) as i64;
                idx /= extent[a];
            }
            o
        })
        .collect()
}

/// Built-in cells and any user-supplied ones, by name.
#[derive(Clone, Debug)]
pub struct CellLibrary {
    cells: Vec<Arc<UnitCellSpec>>,
}

impl CellLibrary {
    pub fn builtin() -> CellLibrary {
        let cells = [CELL22, CELL22X, CELL211, CELL221]
            .iter()
            .map(|t| Arc::new(UnitCellSpec::parse(t).expect("built-in cell is valid")))
            .collect();
        CellLibrary { cells }
    }

    pub fn add(&mut self, spec: UnitCellSpec) -> Result<()> {
        if self.get(spec.name()).is_some() {
            return Err(Error::Cell(format!("cell `{}` already defined", spec.name())));
        }
        self.cells.push(Arc::new(spec));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Arc<UnitCellSpec>> {
        self.cells.iter().find(|c| c.name() == name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.cells.iter().map(|c| c.name()).collect()
    }
}

impl Default for CellLibrary {
    fn default() -> Self {
        CellLibrary::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_cells_parse_and_validate() {
        let lib = CellLibrary::builtin();
        assert_eq!(lib.names(), vec!["cell22", "cell22x", "cell211", "cell221"]);
        let c = lib.get("cell22").unwrap();
        assert_eq!(c.slots().len(), 12);
        assert_eq!(c.extra_slots(), vec![8, 9, 10, 11]);
        assert_eq!(lib.get("cell211").unwrap().basis().len(), 8);
        assert_eq!(lib.get("cell221").unwrap().basis().len(), 17);
    }

    #[test]
    fn paper_decompositions_in_the_2d_cell() {
        let lib = CellLibrary::builtin();
        let c = lib.get("cell22").unwrap();
        let b = c.basis();
        let t3 = b.tagged(Tag::T, 3).unwrap();
        let x0 = b.tagged(Tag::L, 0).unwrap();
        let s = |k| b.tagged(Tag::S, k).unwrap();
        let e4 = b.tagged(Tag::E, 4).unwrap();
        let e = b.decompose(&PauliWord::x_on(12, &[0])).unwrap();
        let want: Vec<usize> = {
            let mut v = vec![t3, x0, s(0), s(2), e4];
            v.sort();
            v
        };
        assert_eq!(e.ones().collect::<Vec<_>>(), want);
        let e = b.decompose(&PauliWord::x_on(12, &[2, 3])).unwrap();
        let mut want = vec![t3, x0, s(2)];
        want.sort();
        assert_eq!(e.ones().collect::<Vec<_>>(), want);
    }

    #[test]
    fn walls() {
        let lib = CellLibrary::builtin();
        let c = lib.get("cell22").unwrap();
        assert_eq!(c.wall(Current { axis: 0, bit: 0 }), vec![0, 2]);
        assert_eq!(c.wall(Current { axis: 1, bit: 0 }), vec![1, 5]);
        assert_eq!(c.wall(Current { axis: 0, bit: 1 }), vec![2, 6]);
        assert_eq!(c.wall(Current { axis: 1, bit: 1 }), vec![5, 7]);
        let c = lib.get("cell221").unwrap();
        assert_eq!(c.wall(Current { axis: 2, bit: 0 }), vec![1, 4, 7, 10]);
    }

    #[test]
    fn broken_cells_are_rejected() {
        // Same span, but L0 no longer reads its wall.
        let bad = CELL211.replace("T X3", "T X0");
        assert!(UnitCellSpec::parse(&bad).is_err());
        let bad = CELL211.replace("L X4", "L X4 X6");
        assert!(UnitCellSpec::parse(&bad).is_err());
        let bad = CELL211.replace("current 2 x", "current 1 x");
        assert!(UnitCellSpec::parse(&bad).is_err());
        let bad = CELL211.replace("slot 7 2 0 0 1", "slot 7 2 0 1 0");
        assert!(UnitCellSpec::parse(&bad).is_err());
    }
}
