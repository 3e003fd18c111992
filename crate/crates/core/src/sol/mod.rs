//! Skip orthogonal list: a leveled 2D cyclic linked grid over a cyclic key
//! sequence, with lazy range-add and min aggregates.
//!
//! Every key gets a geometric height. A node `(r, c)` exists at level `l`
//! iff both `r` and `c` reach height `l`. The parent of `(r, c)` at level
//! `l - 1` is `(pred_l(r), pred_l(c))` at level `l`, where `pred_l(k)` is the
//! closest key at or before `k` with height at least `l`.
//!
//! Lazy invariant: for a node at level >= 1, `min = tag + min(children)`;
//! bottom nodes store their value in `min` and keep `tag = 0`. The true value
//! of a bottom cell is its stored value plus the tags on its ancestor chain.

mod audit;
mod surgery;
mod tour_matrix;


pub use tour_matrix::{CutPieces, IndexMode, TourMatrix};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Key = u32;
pub(crate) type Idx = u32;

pub(crate) const NIL: Idx = u32::MAX;
const ABSENT: u8 = u8::MAX;
pub const MAX_HEIGHT: u8 = 40;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    min: f64,
    tag: f64,
    right: Idx,
    left: Idx,
    down: Idx,
    up: Idx,
    child: Idx,
    parent: Idx,
    min_node: Idx,
    row: Key,
    col: Key,
    level: u8,
}

/// Handle to one rectangular piece: any bottom node inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Piece(pub(crate) Idx);

/// Minimum over a piece with its witness cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinEntry {
    pub value: f64,
    pub row: Key,
    pub col: Key,
}

#[derive(Debug, Clone)]
pub struct SkipOrthogonalList {
    nodes: Vec<Node>,
    free: Vec<Idx>,
    height: Vec<u8>,
    diag: Vec<Idx>,
    p: f64,
    rng: ChaCha8Rng,
    live: usize,
    touched: u64,
    kids: Vec<Idx>,
    slot_row: [Vec<Idx>; 2],
    slot_col: [Vec<Idx>; 2],
}

impl SkipOrthogonalList {
    pub fn new(p: f64, seed: u64) -> Self {
        assert!(p > 0.0 && p < 1.0, "height parameter must lie in (0, 1)");
        SkipOrthogonalList {
            nodes: Vec::new(),
            free: Vec::new(),
            height: Vec::new(),
            diag: Vec::new(),
            p,
            rng: ChaCha8Rng::seed_from_u64(seed),
            live: 0,
            touched: 0,
            kids: Vec::new(),
            slot_row: [Vec::new(), Vec::new()],
            slot_col: [Vec::new(), Vec::new()],
        }
    }

    /// Drops every node and key but keeps the allocations.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.free.clear();
        self.height.iter_mut().for_each(|h| *h = ABSENT);
        self.diag.iter_mut().for_each(|d| *d = NIL);
        self.live = 0;
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Number of live nodes over all levels.
    pub fn node_count(&self) -> usize {
        self.live
    }

    /// Nodes visited by aggregate and pointer work since the last reset.
    pub fn touched(&self) -> u64 {
        self.touched
    }

    pub fn reset_touched(&mut self) {
        self.touched = 0;
    }

    pub fn contains(&self, k: Key) -> bool {
        self.height.get(k as usize).is_some_and(|&h| h != ABSENT)
    }

    pub fn height(&self, k: Key) -> Option<u8> {
        self.height.get(k as usize).copied().filter(|&h| h != ABSENT)
    }

    fn h(&self, k: Key) -> u8 {
        self.height[k as usize]
    }

    fn draw_height(&mut self) -> u8 {
        let mut h = 0;
        while h < MAX_HEIGHT && self.rng.random_bool(self.p) {
            h += 1;
        }
        h
    }

    fn register_key(&mut self, k: Key, h: u8) -> Result<()> {
        if self.contains(k) {
            return Err(Error::DuplicateNode(k));
        }
        let need = k as usize + 1;
        if self.height.len() < need {
            self.height.resize(need, ABSENT);
            self.diag.resize(need, NIL);
            for v in self.slot_row.iter_mut().chain(self.slot_col.iter_mut()) {
                v.resize(need, NIL);
            }
        }
        self.height[k as usize] = h;
        Ok(())
    }

    fn unregister_key(&mut self, k: Key) {
        self.height[k as usize] = ABSENT;
        self.diag[k as usize] = NIL;
    }

    fn diag_of(&self, k: Key) -> Result<Idx> {
        match self.diag.get(k as usize) {
            Some(&d) if d != NIL => Ok(d),
            _ => Err(Error::ElementNotFound(k)),
        }
    }

    /// Piece containing the diagonal cell of `k`.
    pub fn piece_of(&self, k: Key) -> Result<Piece> {
        self.diag_of(k).map(Piece)
    }

    fn alloc(&mut self, row: Key, col: Key, level: u8, min: f64) -> Idx {
        let node = Node {
            min,
            tag: 0.0,
            right: NIL,
            left: NIL,
            down: NIL,
            up: NIL,
            child: NIL,
            parent: NIL,
            min_node: NIL,
            row,
            col,
            level,
        };
        self.live += 1;
        self.touched += 1;
        let id = match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as Idx
            }
        };
        if level == 0 {
            self.nodes[id as usize].min_node = id;
        }
        id
    }

    fn release(&mut self, id: Idx) {
        self.live -= 1;
        self.free.push(id);
    }

    #[inline]
    fn n(&self, i: Idx) -> &Node {
        &self.nodes[i as usize]
    }

    #[inline]
    fn nm(&mut self, i: Idx) -> &mut Node {
        &mut self.nodes[i as usize]
    }

    fn link_h(&mut self, a: Idx, b: Idx) {
        self.nm(a).right = b;
        self.nm(b).left = a;
    }

    fn link_v(&mut self, a: Idx, b: Idx) {
        self.nm(a).down = b;
        self.nm(b).up = a;
    }

    /// Builds a square piece over `keys` (in cyclic order) whose bottom
    /// cells hold `value(row, col)`. The keys must be new.
    pub fn build(&mut self, keys: &[Key], mut value: impl FnMut(Key, Key) -> f64) -> Result<Piece> {
        if keys.is_empty() {
            return Err(Error::ShapeMismatch("empty key sequence".into()));
        }
        for (i, &k) in keys.iter().enumerate() {
            let h = self.draw_height();
            if let Err(e) = self.register_key(k, h) {
                for &done in &keys[..i] {
                    self.unregister_key(done);
                }
                return Err(e);
            }
        }
        let mut level_keys: Vec<Key> = keys.to_vec();
        let mut prev_grid: Vec<Idx> = Vec::new();
        let mut prev_pos: Vec<usize> = Vec::new();
        let mut prev_m = 0usize;
        let mut level: u8 = 0;
        loop {
            let m = level_keys.len();
            let mut grid = Vec::with_capacity(m * m);
            for (i, &r) in level_keys.iter().enumerate() {
                for (j, &c) in level_keys.iter().enumerate() {
                    let min = if level == 0 { value(r, c) } else { f64::INFINITY };
                    let id = self.alloc(r, c, level, min);
                    if level > 0 {
                        self.nm(id).child = prev_grid[prev_pos[i] * prev_m + prev_pos[j]];
                    }
                    grid.push(id);
                }
            }
            for i in 0..m {
                for j in 0..m {
                    self.link_h(grid[i * m + j], grid[i * m + (j + 1) % m]);
                    self.link_v(grid[i * m + j], grid[((i + 1) % m) * m + j]);
                }
            }
            if level == 0 {
                for (i, &k) in level_keys.iter().enumerate() {
                    self.diag[k as usize] = grid[i * m + i];
                }
            } else {
                for &id in &grid {
                    self.pull_up(id);
                }
            }
            let next: Vec<(usize, Key)> = level_keys
                .iter()
                .enumerate()
                .filter(|&(_, &k)| self.h(k) > level)
                .map(|(i, &k)| (i, k))
                .collect();
            if next.is_empty() {
                break;
            }
            prev_pos = next.iter().map(|&(i, _)| i).collect();
            level_keys = next.into_iter().map(|(_, k)| k).collect();
            prev_grid = grid;
            prev_m = m;
            level += 1;
        }
        Ok(Piece(self.diag[keys[0] as usize]))
    }

    /// Children of `x` (level >= 1) in row-major block order.
    fn children_into(&self, x: Idx, out: &mut Vec<Idx>) {
        let lvl = self.n(x).level;
        let first = self.n(x).child;
        let mut row_start = first;
        loop {
            let mut y = row_start;
            loop {
                out.push(y);
                y = self.n(y).right;
                if self.h(self.n(y).col) >= lvl {
                    break;
                }
            }
            row_start = self.n(row_start).down;
            if self.h(self.n(row_start).row) >= lvl {
                break;
            }
        }
    }

    /// Moves the tag of `x` into its children. With `orphan`, also clears
    /// the children's parent links ahead of pointer surgery.
    fn push_down(&mut self, x: Idx, orphan: bool) {
        if self.n(x).level == 0 {
            return;
        }
        let tag = self.n(x).tag;
        if tag == 0.0 && !orphan {
            return;
        }
        let mut kids = std::mem::take(&mut self.kids);
        kids.clear();
        self.children_into(x, &mut kids);
        for &y in &kids {
            let node = self.nm(y);
            if tag != 0.0 {
                node.min += tag;
                if node.level > 0 {
                    node.tag += tag;
                }
            }
            if orphan {
                node.parent = NIL;
            }
        }
        self.nm(x).tag = 0.0;
        self.touched += 1 + kids.len() as u64;
        self.kids = kids;
    }

    /// `(value, row, col)` order on witnesses.
    #[inline]
    fn better(&self, a_min: f64, a_wit: Idx, b_min: f64, b_wit: Idx) -> bool {
        if a_min != b_min {
            return a_min < b_min;
        }
        let (a, b) = (self.n(a_wit), self.n(b_wit));
        (a.row, a.col) < (b.row, b.col)
    }

    /// Recomputes `min` and `min_node` of `x` from its children and claims
    /// them as its own.
    fn pull_up(&mut self, x: Idx) {
        if self.n(x).level == 0 {
            return;
        }
        let mut kids = std::mem::take(&mut self.kids);
        kids.clear();
        self.children_into(x, &mut kids);
        let mut best_min = f64::INFINITY;
        let mut best_wit = NIL;
        for &y in &kids {
            let (m, w) = {
                let node = self.nm(y);
                node.parent = x;
                (node.min, node.min_node)
            };
            if best_wit == NIL || self.better(m, w, best_min, best_wit) {
                best_min = m;
                best_wit = w;
            }
        }
        let node = self.nm(x);
        node.min = node.tag + best_min;
        node.min_node = best_wit;
        self.touched += 1 + kids.len() as u64;
        self.kids = kids;
    }

    /// Ancestor chain of `x`, starting with `x` itself.
    fn chain(&self, x: Idx) -> Vec<Idx> {
        let mut out = vec![x];
        let mut cur = x;
        while self.n(cur).parent != NIL {
            cur = self.n(cur).parent;
            out.push(cur);
        }
        out
    }

    fn top(&self, x: Idx) -> Idx {
        let mut cur = x;
        while self.n(cur).parent != NIL {
            cur = self.n(cur).parent;
        }
        cur
    }

    fn row_from(&self, x: Idx) -> Vec<Idx> {
        let mut out = vec![x];
        let mut cur = self.n(x).right;
        while cur != x {
            out.push(cur);
            cur = self.n(cur).right;
        }
        out
    }

    fn col_from(&self, x: Idx) -> Vec<Idx> {
        let mut out = vec![x];
        let mut cur = self.n(x).down;
        while cur != x {
            out.push(cur);
            cur = self.n(cur).down;
        }
        out
    }

    fn for_each_top(&self, piece: Piece, mut f: impl FnMut(Idx)) {
        let start = self.top(piece.0);
        let mut col_head = start;
        loop {
            let mut y = col_head;
            loop {
                f(y);
                y = self.n(y).down;
                if y == col_head {
                    break;
                }
            }
            col_head = self.n(col_head).right;
            if col_head == start {
                break;
            }
        }
    }

    /// Adds `x` to every cell of the piece through the top level only.
    pub fn range_add(&mut self, piece: Piece, x: f64) {
        if x == 0.0 {
            return;
        }
        let mut tops = std::mem::take(&mut self.kids);
        tops.clear();
        self.for_each_top(piece, |y| tops.push(y));
        for &y in &tops {
            let node = self.nm(y);
            node.min += x;
            if node.level > 0 {
                node.tag += x;
            }
        }
        self.touched += tops.len() as u64;
        self.kids = tops;
    }

    /// Exact minimum over the piece, ties broken by `(row, col)`.
    pub fn global_min(&mut self, piece: Piece) -> MinEntry {
        let mut best_min = f64::INFINITY;
        let mut best_wit = NIL;
        let mut count = 0u64;
        self.for_each_top(piece, |y| {
            count += 1;
            let node = self.n(y);
            if best_wit == NIL || self.better(node.min, node.min_node, best_min, best_wit) {
                best_min = node.min;
                best_wit = node.min_node;
            }
        });
        self.touched += count;
        let w = self.n(best_wit);
        MinEntry { value: best_min, row: w.row, col: w.col }
    }

    /// Number of nodes on the top level of the piece.
    pub fn top_size(&self, piece: Piece) -> usize {
        let mut count = 0;
        self.for_each_top(piece, |_| count += 1);
        count
    }

    /// Bottom node of cell `(r, c)` inside the piece.
    fn find_cell(&self, piece: Piece, r: Key, c: Key) -> Result<Idx> {
        let start = piece.0;
        let mut cur = start;
        while self.n(cur).row != r {
            cur = self.n(cur).down;
            if cur == start {
                return Err(Error::ElementNotFound(r));
            }
        }
        let row_start = cur;
        while self.n(cur).col != c {
            cur = self.n(cur).right;
            if cur == row_start {
                return Err(Error::ElementNotFound(c));
            }
        }
        Ok(cur)
    }

    fn true_value(&self, b: Idx) -> f64 {
        let mut v = self.n(b).min;
        let mut cur = self.n(b).parent;
        while cur != NIL {
            v += self.n(cur).tag;
            cur = self.n(cur).parent;
        }
        v
    }

    pub fn read_cell(&self, piece: Piece, r: Key, c: Key) -> Result<f64> {
        let b = self.find_cell(piece, r, c)?;
        Ok(self.true_value(b))
    }

    /// Reads a cell whose row and column share the square piece of `r`.
    pub fn read(&self, r: Key, c: Key) -> Result<f64> {
        self.read_cell(self.piece_of(r)?, r, c)
    }

    pub fn write_cell(&mut self, piece: Piece, r: Key, c: Key, value: f64) -> Result<()> {
        let b = self.find_cell(piece, r, c)?;
        let chain = self.chain(b);
        for &x in chain.iter().rev() {
            self.push_down(x, false);
        }
        self.nm(b).min = value;
        for &x in &chain[1..] {
            self.pull_up(x);
        }
        Ok(())
    }

    pub fn write(&mut self, r: Key, c: Key, value: f64) -> Result<()> {
        let piece = self.piece_of(r)?;
        self.write_cell(piece, r, c, value)
    }

    /// Rewrites every cell in row `k` and column `k` of the square piece of
    /// `k` with `value(row, col)`.
    pub fn refresh_line(&mut self, k: Key, mut value: impl FnMut(Key, Key) -> f64) -> Result<()> {
        let dk = self.diag_of(k)?;
        let chain = self.chain(dk);
        let lines = self.lines_of(&chain);
        self.push_lines(&lines, false);
        for b in self.row_from(dk) {
            let (r, c) = (self.n(b).row, self.n(b).col);
            self.nm(b).min = value(r, c);
        }
        for b in self.col_from(dk).into_iter().skip(1) {
            let (r, c) = (self.n(b).row, self.n(b).col);
            self.nm(b).min = value(r, c);
        }
        self.touched += 2 * lines[0].len() as u64;
        self.pull_lines(&lines);
        Ok(())
    }

    /// True values of row and column `k`, diagonal once.
    pub fn line_values(&self, k: Key) -> Result<Vec<(Key, Key, f64)>> {
        let dk = self.diag_of(k)?;
        let mut out = Vec::new();
        for b in self.row_from(dk).into_iter().chain(self.col_from(dk).into_iter().skip(1)) {
            out.push((self.n(b).row, self.n(b).col, self.true_value(b)));
        }
        Ok(out)
    }

    /// Row and column of each chain node, grouped by level.
    fn lines_of(&self, chain: &[Idx]) -> Vec<Vec<Idx>> {
        chain
            .iter()
            .map(|&x| {
                let mut v = self.row_from(x);
                v.extend(self.col_from(x).into_iter().skip(1));
                v
            })
            .collect()
    }

    /// Pushes down every node of `lines[l]` for `l >= 1`, top level first.
    fn push_lines(&mut self, lines: &[Vec<Idx>], orphan: bool) {
        for level in lines.iter().skip(1).rev() {
            for &x in level {
                self.push_down(x, orphan);
            }
        }
    }

    /// Pulls up every node of `lines[l]` for `l >= 1`, bottom level first.
    fn pull_lines(&mut self, lines: &[Vec<Idx>]) {
        for level in lines.iter().skip(1) {
            for &x in level {
                self.pull_up(x);
            }
        }
    }

    /// Keys of the piece's rows in cyclic order, starting at the anchor row.
    pub fn row_keys(&self, piece: Piece) -> Vec<Key> {
        self.col_from(piece.0).into_iter().map(|x| self.n(x).row).collect()
    }

    /// Keys of the piece's columns in cyclic order, starting at the anchor column.
    pub fn col_keys(&self, piece: Piece) -> Vec<Key> {
        self.row_from(piece.0).into_iter().map(|x| self.n(x).col).collect()
    }

    /// True values of all bottom cells as `(row, col, value)`.
    pub fn cells(&self, piece: Piece) -> Vec<(Key, Key, f64)> {
        let mut out = Vec::new();
        for r in self.col_from(piece.0) {
            for b in self.row_from(r) {
                out.push((self.n(b).row, self.n(b).col, self.true_value(b)));
            }
        }
        out
    }
}
