//! The adjusted-cost matrix indexed by an Euler tour of the basis tree.
//!
//! In `Full` mode every tour element (self-loops and arcs) is a key; only
//! self-loop pairs carry values and every other cell is `+inf`. `Vertices`
//! mode keeps only the self-loop keys, in tour order. Both orders make each
//! subtree a cyclic interval, so cutting a tree edge splits the matrix into
//! four pieces.

use serde::{Deserialize, Serialize};

use super::{Key, Piece, SkipOrthogonalList};
use crate::error::{Error, Result};
use crate::euler_tour::{EulerForest, TourElement};
use crate::model::BasisTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexMode {
    /// Keys are all `3|V| - 2` tour elements.
    #[default]
    Full,
    /// Keys are the `|V|` self-loops only.
    Vertices,
}

/// The four pieces after cutting `{u, v}`; `u` names the first side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutPieces {
    pub u: usize,
    pub v: usize,
    pub uu: Piece,
    pub uv: Piece,
    pub vu: Piece,
    pub vv: Piece,
}

impl CutPieces {
    fn array(&self) -> [Piece; 4] {
        [self.uu, self.uv, self.vu, self.vv]
    }
}

#[derive(Debug, Clone)]
pub struct TourMatrix {
    mode: IndexMode,
    forest: EulerForest,
    sol: SkipOrthogonalList,
}

fn cell(forest: &EulerForest, value: &mut impl FnMut(usize, usize) -> f64, r: Key, c: Key) -> f64 {
    match (forest.kind(r), forest.kind(c)) {
        (TourElement::SelfLoop(u), TourElement::SelfLoop(v)) => value(u, v),
        _ => f64::INFINITY,
    }
}

impl TourMatrix {
    pub fn new(mode: IndexMode, p: f64, seed: u64) -> Self {
        TourMatrix { mode, forest: EulerForest::new(), sol: SkipOrthogonalList::new(p, seed) }
    }

    /// Builds the tour of `tree` and the matrix with cells `value(u, v)`.
    pub fn build(&mut self, tree: &BasisTree, mut value: impl FnMut(usize, usize) -> f64) -> Result<()> {
        let (forest, tour) = EulerForest::build_from_tree(tree)?;
        self.forest = forest;
        self.sol.clear();
        let Some(tour) = tour else { return Ok(()) };
        let keys: Vec<Key> = match self.mode {
            IndexMode::Full => self.forest.iter(tour).collect(),
            IndexMode::Vertices => self
                .forest
                .iter(tour)
                .filter(|&e| matches!(self.forest.kind(e), TourElement::SelfLoop(_)))
                .collect(),
        };
        let forest = &self.forest;
        self.sol.build(&keys, |r, c| cell(forest, &mut value, r, c))?;
        Ok(())
    }

    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    pub fn forest(&self) -> &EulerForest {
        &self.forest
    }

    pub fn sol(&self) -> &SkipOrthogonalList {
        &self.sol
    }

    pub fn sol_mut(&mut self) -> &mut SkipOrthogonalList {
        &mut self.sol
    }

    pub fn key_of(&self, v: usize) -> Result<Key> {
        self.forest.self_loop(v).ok_or(Error::ElementNotFound(v as u32))
    }

    /// Square piece holding vertex `v`'s row and column.
    pub fn piece_of(&self, v: usize) -> Result<Piece> {
        self.sol.piece_of(self.key_of(v)?)
    }

    /// Cuts the tree edge `{u, v}`. Pieces come back as `u`-side first.
    pub fn cut(&mut self, u: usize, v: usize) -> Result<CutPieces> {
        let (uv, vu) = match (self.forest.arc(u, v), self.forest.arc(v, u)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::EdgeNotFound(u, v)),
        };
        let p = self.forest.prev(uv);
        let q = self.forest.prev(vu);
        let [uu, uvp, vup, vv] = match self.mode {
            IndexMode::Full => {
                self.sol.remove_line(uv)?;
                self.sol.remove_line(vu)?;
                self.forest.cut(u, v)?;
                self.sol.split(p, q)?
            }
            IndexMode::Vertices => {
                self.forest.cut(u, v)?;
                let a_last = self.forest.self_loop_at_or_before(p);
                let b_last = self.forest.self_loop_at_or_before(q);
                self.sol.split(a_last, b_last)?
            }
        };
        Ok(CutPieces { u, v, uu, uv: uvp, vu: vup, vv })
    }

    /// Links `u` (on the first side of `pieces`) with `v` (on the second).
    pub fn link(&mut self, pieces: CutPieces, u: usize, v: usize) -> Result<Piece> {
        let su = self.key_of(u)?;
        let sv = self.key_of(v)?;
        let merged = self.sol.join(pieces.array(), su, sv)?;
        self.forest.link_unchecked(u, v);
        if self.mode == IndexMode::Full {
            let uv = self.forest.arc(u, v).expect("fresh arc");
            let vu = self.forest.arc(v, u).expect("fresh arc");
            self.sol.insert_line(uv, su, |_, _| f64::INFINITY)?;
            self.sol.insert_line(vu, sv, |_, _| f64::INFINITY)?;
        }
        Ok(merged)
    }

    /// Adds a vertex as the first one of an empty matrix.
    pub fn add_first_vertex(&mut self, v: usize, value: f64) -> Result<()> {
        let t = self.forest.add_vertex(v)?;
        self.sol.build(&[t.0], |_, _| value)?;
        Ok(())
    }

    /// Adds a fresh vertex `v` hanging off `u`, with row and column cells
    /// `value(row, col)`.
    pub fn add_vertex(&mut self, v: usize, u: usize, mut value: impl FnMut(usize, usize) -> f64) -> Result<()> {
        let su = self.key_of(u)?;
        self.forest.add_vertex(v)?;
        self.forest.link_unchecked(u, v);
        let sv = self.key_of(v)?;
        match self.mode {
            IndexMode::Full => {
                let uv = self.forest.arc(u, v).expect("fresh arc");
                let vu = self.forest.arc(v, u).expect("fresh arc");
                self.sol.insert_line(uv, su, |_, _| f64::INFINITY)?;
                let forest = &self.forest;
                self.sol.insert_line(sv, uv, |r, c| cell(forest, &mut value, r, c))?;
                self.sol.insert_line(vu, sv, |_, _| f64::INFINITY)?;
            }
            IndexMode::Vertices => {
                let forest = &self.forest;
                self.sol.insert_line(sv, su, |r, c| cell(forest, &mut value, r, c))?;
            }
        }
        Ok(())
    }

    pub fn range_add(&mut self, piece: Piece, x: f64) {
        self.sol.range_add(piece, x);
    }

    /// Minimum of the piece and, when finite, the vertex pair holding it.
    pub fn global_min(&mut self, piece: Piece) -> (f64, Option<(usize, usize)>) {
        let m = self.sol.global_min(piece);
        if m.value.is_infinite() {
            return (m.value, None);
        }
        match (self.forest.kind(m.row), self.forest.kind(m.col)) {
            (TourElement::SelfLoop(u), TourElement::SelfLoop(v)) => (m.value, Some((u, v))),
            _ => (m.value, None),
        }
    }

    pub fn read(&self, u: usize, v: usize) -> Result<f64> {
        self.sol.read(self.key_of(u)?, self.key_of(v)?)
    }

    /// Reads cell `(u, v)` inside an explicit piece.
    pub fn read_in(&self, piece: Piece, u: usize, v: usize) -> Result<f64> {
        self.sol.read_cell(piece, self.key_of(u)?, self.key_of(v)?)
    }

    pub fn write(&mut self, u: usize, v: usize, value: f64) -> Result<()> {
        let (ku, kv) = (self.key_of(u)?, self.key_of(v)?);
        self.sol.write(ku, kv, value)
    }

    /// Rewrites row and column `v` with `value(row, col)`.
    pub fn refresh_vertex(&mut self, v: usize, mut value: impl FnMut(usize, usize) -> f64) -> Result<()> {
        let k = self.key_of(v)?;
        let forest = &self.forest;
        self.sol.refresh_line(k, |r, c| cell(forest, &mut value, r, c))
    }

    /// Finite cells of row and column `v` as vertex pairs.
    pub fn vertex_cells(&self, v: usize) -> Result<Vec<(usize, usize, f64)>> {
        let k = self.key_of(v)?;
        let mut out = Vec::new();
        for (r, c, x) in self.sol.line_values(k)? {
            if let (TourElement::SelfLoop(a), TourElement::SelfLoop(b)) = (self.forest.kind(r), self.forest.kind(c)) {
                if x.is_finite() {
                    out.push((a, b, x));
                }
            }
        }
        Ok(out)
    }

    /// Checks the Euler-tour laws on the tour of `v`; returns its vertex count.
    pub fn validate_tour(&self, v: usize) -> Result<usize> {
        let t = self.forest.tour_of(v).ok_or(Error::ElementNotFound(v as u32))?;
        self.forest.validate(t)
    }

    /// Number of elements in the tour of `v`.
    pub fn tour_len(&self, v: usize) -> usize {
        self.forest.tour_of(v).map_or(0, |t| self.forest.len(t))
    }
}
