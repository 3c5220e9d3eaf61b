//! RG schedules: which cell, in which orientation, at each level.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Model, ModelKind, MAX_DIMS};
use crate::pauli::Alphabet;

use super::cell::{CellLibrary, UnitCellSpec};

const AXES: [char; MAX_DIMS] = ['x', 'y', 'z'];

/// A cell applied with its local axis 0 along global axis `first`; the other
/// local axes follow cyclically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StepToken {
    pub cell: String,
    pub first: usize,
    /// Number of axes named in the token (for display only).
    pub named: usize,
}

impl StepToken {
    fn new(cell: &str, first: usize, named: usize) -> StepToken {
        StepToken {
            cell: cell.to_string(),
            first,
            named,
        }
    }

    fn parse(token: &str) -> Result<StepToken> {
        let token = token.trim();
        let (cell, orient) = match token.split_once(':') {
            Some((c, o)) => (c.to_string(), o.to_string()),
            None => {
                let digits: String = token.chars().take_while(|c| c.is_ascii_digit()).collect();
                if digits.is_empty() {
                    (token.to_string(), String::new())
                } else {
                    (format!("cell{digits}"), token[digits.len()..].to_string())
                }
            }
        };
        if cell.is_empty() {
            return Err(Error::Schedule(format!("empty cell name in `{token}`")));
        }
        let axes: Vec<usize> = orient
            .chars()
            .map(|c| {
                AXES.iter()
                    .position(|&a| a == c)
                    .ok_or_else(|| Error::Schedule(format!("bad axis `{c}` in `{token}`")))
            })
            .collect::<Result<_>>()?;
        let first = axes.first().copied().unwrap_or(0);
        for (k, &a) in axes.iter().enumerate() {
            if a != (first + k) % MAX_DIMS {
                return Err(Error::Schedule(format!(
                    "orientation `{orient}` is not a cyclic rotation of xyz"
                )));
            }
        }
        Ok(StepToken {
            cell,
            first,
            named: axes.len(),
        })
    }
}

impl fmt::Display for StepToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.cell)?;
        if self.named > 0 {
            write!(f, ":")?;
            for k in 0..self.named {
                write!(f, "{}", AXES[(self.first + k) % MAX_DIMS])?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// 2D: the 2x2 cell at every level.
    #[default]
    Cell22,
    /// 3D: the 2x1x1 cell cycling through x, y, t.
    Cell211,
    /// 3D: the 2x2x1 cell cycling through xy, yt, tx.
    Cell221,
    /// 2x2x1 while two axes remain, then 2x1x1 on the last one.
    Hybrid,
    /// Steps cycled until the lattice is a single site.
    Explicit(Vec<StepToken>),
}

/// One resolved RG level.
#[derive(Clone, Debug)]
pub struct Step {
    pub spec: Arc<UnitCellSpec>,
    pub perm: [usize; MAX_DIMS],
}

fn rotation(first: usize, dims: usize) -> [usize; MAX_DIMS] {
    let mut p = [0; MAX_DIMS];
    for (a, v) in p.iter_mut().enumerate().take(dims) {
        *v = (first + a) % dims;
    }
    p
}

impl Schedule {
    pub fn name(&self) -> String {
        self.to_string()
    }

    fn plan_tokens(&self, model: &Model) -> (Vec<StepToken>, Vec<StepToken>) {
        let cyc = |cell: &str, k: usize| -> Vec<StepToken> {
            (0..3).map(|a| StepToken::new(cell, a, k)).collect()
        };
        match self {
            Schedule::Cell22 => {
                let cell = match model.alphabet() {
                    Alphabet::Pauli => "cell22",
                    Alphabet::BitFlip => "cell22x",
                };
                (vec![StepToken::new(cell, 0, 0)], Vec::new())
            }
            Schedule::Cell211 => (cyc("cell211", 1), Vec::new()),
            Schedule::Cell221 => (cyc("cell221", 2), Vec::new()),
            Schedule::Hybrid => (cyc("cell221", 2), cyc("cell211", 1)),
            Schedule::Explicit(t) => (t.clone(), Vec::new()),
        }
    }

    /// Resolves the schedule for a lattice of the given sizes, down to a
    /// single site. Fails if some axis cannot be reduced.
    pub fn steps(&self, model: &Model, sizes: &[usize], library: &CellLibrary) -> Result<Vec<Step>> {
        let dims = model.dims();
        if sizes.len() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: sizes.len(),
            });
        }
        let (primary, fallback) = self.plan_tokens(model);
        let resolve = |tokens: &[StepToken]| -> Result<Vec<Step>> {
            tokens
                .iter()
                .map(|t| {
                    let spec = library
                        .get(&t.cell)
                        .ok_or_else(|| Error::Schedule(format!("unknown cell `{}`", t.cell)))?;
                    if spec.model() != model {
                        return Err(Error::Schedule(format!(
                            "cell {} is for {}/{}, lattice is {}/{}",
                            spec.name(),
                            spec.model().name(),
                            spec.model().alphabet().name(),
                            model.name(),
                            model.alphabet().name()
                        )));
                    }
                    if t.first >= dims {
                        return Err(Error::Schedule(format!("orientation {t} needs axis {}", t.first)));
                    }
                    Ok(Step {
                        perm: rotation(t.first, dims),
                        spec,
                    })
                })
                .collect()
        };
        let primary = resolve(&primary)?;
        let fallback = resolve(&fallback)?;
        if primary.is_empty() {
            return Err(Error::Schedule("empty schedule".into()));
        }
        if dims == 2 && model.kind() == ModelKind::Toric2D {
            for s in primary.iter().chain(&fallback) {
                if s.perm[..2] != [0, 1] {
                    return Err(Error::Schedule("2D cells cannot be rotated".into()));
                }
            }
        }
        let mut cur = sizes.to_vec();
        let mut out = Vec::new();
        for list in [&primary, &fallback] {
            let mut idle = 0;
            let mut k = 0;
            while cur.iter().any(|&s| s > 1) && idle < list.len() {
                let step = &list[k % list.len()];
                k += 1;
                let ext = step.spec.extent();
                let mut applies = true;
                for (a, &e) in ext.iter().enumerate().take(dims) {
                    let g = step.perm[a];
                    if e > 1 && cur[g] < e {
                        applies = false;
                    }
                }
                if !applies {
                    idle += 1;
                    continue;
                }
                for (a, &e) in ext.iter().enumerate().take(dims) {
                    let g = step.perm[a];
                    if cur[g] % e != 0 {
                        return Err(Error::Schedule(format!(
                            "axis {} of size {} is not divisible by the {} extent {e}",
                            AXES[g],
                            cur[g],
                            step.spec.name()
                        )));
                    }
                    cur[g] /= e;
                }
                idle = 0;
                out.push(step.clone());
            }
        }
        if let Some(g) = cur.iter().position(|&s| s > 1) {
            return Err(Error::Schedule(format!(
                "schedule {self} cannot reduce axis {} (size {}) of a {:?} lattice",
                AXES[g], cur[g], sizes
            )));
        }
        Ok(out)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Cell22 => write!(f, "cell22"),
            Schedule::Cell211 => write!(f, "cell211"),
            Schedule::Cell221 => write!(f, "cell221"),
            Schedule::Hybrid => write!(f, "hybrid"),
            Schedule::Explicit(t) => {
                let parts: Vec<String> = t.iter().map(|s| s.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Schedule> {
        match s.trim() {
            "cell22" | "22" => Ok(Schedule::Cell22),
            "cell211" | "211" => Ok(Schedule::Cell211),
            "cell221" | "221" => Ok(Schedule::Cell221),
            "hybrid" => Ok(Schedule::Hybrid),
            "" => Err(Error::Schedule("empty schedule".into())),
            other => Ok(Schedule::Explicit(
                other.split(',').map(StepToken::parse).collect::<Result<_>>()?,
            )),
        }
    }
}
