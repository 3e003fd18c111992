//! Structural operations. Each follows the same pattern: collect the lines
//! whose blocks change, push their tags down (orphaning their children),
//! rewire pointers, then pull the same lines back up bottom-first. Nodes
//! left without a parent are the top level of their piece.

use super::{Idx, Key, Piece, SkipOrthogonalList, NIL};
use crate::error::{Error, Result};

impl SkipOrthogonalList {
    /// Exchanges the right neighbours of `p` and `q`.
    fn swap_right(&mut self, p: Idx, q: Idx) {
        let pf = self.n(p).right;
        let qf = self.n(q).right;
        self.link_h(p, qf);
        self.link_h(q, pf);
    }

    /// Exchanges the down neighbours of `p` and `q`.
    fn swap_down(&mut self, p: Idx, q: Idx) {
        let pf = self.n(p).down;
        let qf = self.n(q).down;
        self.link_v(p, qf);
        self.link_v(q, pf);
    }

    /// Splits a square piece whose key sequence is `A ++ B` into its four
    /// quadrants. `a_last` and `b_last` are the last keys of `A` and `B`.
    /// Returns `[A x A, A x B, B x A, B x B]`.
    pub fn split(&mut self, a_last: Key, b_last: Key) -> Result<[Piece; 4]> {
        let da = self.diag_of(a_last)?;
        let db = self.diag_of(b_last)?;
        if a_last == b_last {
            return Err(Error::ShapeMismatch("split needs two distinct keys".into()));
        }
        let ca = self.chain(da);
        let cb = self.chain(db);
        if ca.len() != cb.len() {
            return Err(Error::ShapeMismatch("keys lie in different pieces".into()));
        }
        let ab = self.n(da).right;
        let ba = self.n(da).down;

        struct Level {
            rx: Vec<Idx>,
            cx: Vec<Idx>,
            ry: Vec<Idx>,
            cy: Vec<Idx>,
        }
        let levels: Vec<Level> = ca
            .iter()
            .zip(&cb)
            .map(|(&x, &y)| {
                let (ry, cy) = if x != y { (self.row_from(y), self.col_from(y)) } else { (Vec::new(), Vec::new()) };
                Level { rx: self.row_from(x), cx: self.col_from(x), ry, cy }
            })
            .collect();

        for lv in levels.iter().skip(1).rev() {
            for &z in lv.rx.iter().chain(&lv.cx).chain(&lv.ry).chain(&lv.cy) {
                self.push_down(z, true);
            }
        }
        for (l, lv) in levels.iter().enumerate() {
            if ca[l] == cb[l] {
                continue;
            }
            let x_key = self.n(ca[l]).row;
            let off = lv.cy.iter().position(|&z| self.n(z).row == x_key).expect("aligned row");
            for (j, &p) in lv.cx.iter().enumerate() {
                self.swap_right(p, lv.cy[(off + j) % lv.cy.len()]);
            }
            let off = lv.ry.iter().position(|&z| self.n(z).col == x_key).expect("aligned col");
            for (j, &p) in lv.rx.iter().enumerate() {
                self.swap_down(p, lv.ry[(off + j) % lv.ry.len()]);
            }
            self.touched += 2 * (lv.cx.len() + lv.rx.len()) as u64;
        }
        for lv in levels.iter().skip(1) {
            for &z in lv.rx.iter().chain(&lv.cx).chain(&lv.ry).chain(&lv.cy) {
                self.pull_up(z);
            }
        }
        Ok([Piece(da), Piece(ab), Piece(ba), Piece(db)])
    }

    /// Inverse of `split`: merges `[A x A, A x B, B x A, B x B]` into one
    /// square piece over `A[..=x] ++ B[y+1..] ++ B[..=y] ++ A[x+1..]`.
    pub fn join(&mut self, pieces: [Piece; 4], x: Key, y: Key) -> Result<Piece> {
        let [_, ab, ba, _] = pieces;
        let dx = self.diag_of(x)?;
        let dy = self.diag_of(y)?;
        if x == y {
            return Err(Error::ShapeMismatch("join needs two distinct keys".into()));
        }
        let nxy = self
            .find_cell(ab, x, y)
            .map_err(|_| Error::ShapeMismatch(format!("cell ({x}, {y}) is not in the off-diagonal piece")))?;
        let nyx = self
            .find_cell(ba, y, x)
            .map_err(|_| Error::ShapeMismatch(format!("cell ({y}, {x}) is not in the off-diagonal piece")))?;
        let c_aa = self.chain(dx);
        let c_ab = self.chain(nxy);
        let c_ba = self.chain(nyx);
        let c_bb = self.chain(dy);
        if c_ab.len() != c_ba.len() || c_ab.len() > c_aa.len().min(c_bb.len()) {
            return Err(Error::ShapeMismatch("piece heights do not fit".into()));
        }
        let depth = c_aa.len().max(c_bb.len());

        #[derive(Default)]
        struct Level {
            rx_aa: Vec<Idx>,
            cx_aa: Vec<Idx>,
            rx_ab: Vec<Idx>,
            cy_ab: Vec<Idx>,
            ry_ba: Vec<Idx>,
            cx_ba: Vec<Idx>,
            ry_bb: Vec<Idx>,
            cy_bb: Vec<Idx>,
        }
        impl Level {
            fn all(&self) -> impl Iterator<Item = &Idx> {
                self.rx_aa
                    .iter()
                    .chain(&self.cx_aa)
                    .chain(&self.rx_ab)
                    .chain(&self.cy_ab)
                    .chain(&self.ry_ba)
                    .chain(&self.cx_ba)
                    .chain(&self.ry_bb)
                    .chain(&self.cy_bb)
            }
        }
        let mut levels: Vec<Level> = Vec::with_capacity(depth);
        for l in 0..depth {
            let mut lv = Level::default();
            if let Some(&z) = c_aa.get(l) {
                lv.rx_aa = self.row_from(z);
                lv.cx_aa = self.col_from(z);
            }
            if let Some(&z) = c_ab.get(l) {
                lv.rx_ab = self.row_from(z);
                lv.cy_ab = self.col_from(z);
            }
            if let Some(&z) = c_ba.get(l) {
                lv.ry_ba = self.row_from(z);
                lv.cx_ba = self.col_from(z);
            }
            if let Some(&z) = c_bb.get(l) {
                lv.ry_bb = self.row_from(z);
                lv.cy_bb = self.col_from(z);
            }
            levels.push(lv);
        }

        for lv in levels.iter().skip(1).rev() {
            for &z in lv.all() {
                self.push_down(z, true);
            }
        }
        for lv in levels.iter().take(c_ab.len()) {
            for (&p, &q) in lv.cx_aa.iter().zip(&lv.cy_ab) {
                self.swap_right(p, q);
            }
            for (&p, &q) in lv.cx_ba.iter().zip(&lv.cy_bb) {
                self.swap_right(p, q);
            }
            for (&p, &q) in lv.rx_aa.iter().zip(&lv.ry_ba) {
                self.swap_down(p, q);
            }
            for (&p, &q) in lv.rx_ab.iter().zip(&lv.ry_bb) {
                self.swap_down(p, q);
            }
            self.touched += 2 * (lv.cx_aa.len() + lv.cx_ba.len() + lv.rx_aa.len() + lv.rx_ab.len()) as u64;
        }
        for lv in levels.iter().skip(1) {
            for &z in lv.all() {
                self.pull_up(z);
            }
        }
        Ok(Piece(dx))
    }

    /// Removes row and column `k` at every level.
    pub fn remove_line(&mut self, k: Key) -> Result<()> {
        let dk = self.diag_of(k)?;
        if self.n(dk).right == dk {
            // last key of its piece
            for z in self.chain(dk) {
                self.release(z);
            }
            self.unregister_key(k);
            return Ok(());
        }
        let q = self.n(self.n(dk).left).col;
        let dq = self.diag_of(q)?;
        let ck = self.chain(dk);
        let cq = self.chain(dq);
        let mut lines = self.lines_of(&ck);
        for (l, extra) in self.lines_of(&cq).into_iter().enumerate() {
            if cq[l] != ck[l] {
                lines[l].extend(extra);
            }
        }
        self.push_lines(&lines, true);

        for &z in &ck {
            if self.n(z).row != k {
                break;
            }
            let row = self.row_from(z);
            let col = self.col_from(z);
            for &n in &row {
                let (u, d) = (self.n(n).up, self.n(n).down);
                self.link_v(u, d);
            }
            for &n in &col {
                let (l, r) = (self.n(n).left, self.n(n).right);
                self.link_h(l, r);
            }
            for &n in row.iter().chain(col.iter().skip(1)) {
                self.release(n);
            }
            self.touched += (row.len() + col.len()) as u64;
        }
        self.unregister_key(k);

        let mut after: Vec<Vec<Idx>> = Vec::with_capacity(cq.len());
        for &z in &cq {
            if self.n(z).row == k {
                break;
            }
            let mut v = self.row_from(z);
            v.extend(self.col_from(z).into_iter().skip(1));
            after.push(v);
        }
        self.pull_lines(&after);
        Ok(())
    }

    /// Inserts a new key `k` right after `j` in the square piece of `j`, with
    /// a freshly drawn height and bottom cells `value(row, col)`.
    pub fn insert_line(&mut self, k: Key, j: Key, value: impl FnMut(Key, Key) -> f64) -> Result<()> {
        let h = self.draw_height();
        self.insert_line_with_height(k, j, h, value)
    }

    pub(crate) fn insert_line_with_height(
        &mut self,
        k: Key,
        j: Key,
        h: u8,
        mut value: impl FnMut(Key, Key) -> f64,
    ) -> Result<()> {
        let dj = self.diag_of(j)?;
        self.register_key(k, h)?;
        let cj = self.chain(dj);
        let top = cj.len() - 1;
        let before = self.lines_of(&cj);
        self.push_lines(&before, true);

        let mut new_lines: Vec<Vec<Idx>> = Vec::new();
        let mut prev_diag = NIL;
        let (mut cur, mut prev) = (0usize, 1usize);
        for (l, &p_node) in cj.iter().enumerate().take((h as usize).min(top) + 1) {
            let level = l as u8;
            let mut made = Vec::new();
            // row k under row pred_l(j)
            let row_p = self.row_from(p_node);
            let mut row_new = Vec::with_capacity(row_p.len());
            for &n in &row_p {
                let c = self.n(n).col;
                let min = if l == 0 { value(k, c) } else { f64::INFINITY };
                let m = self.alloc(k, c, level, min);
                if l > 0 {
                    self.nm(m).child = self.slot_row[prev][c as usize];
                }
                let d = self.n(n).down;
                self.link_v(n, m);
                self.link_v(m, d);
                row_new.push(m);
            }
            for i in 0..row_new.len() {
                self.link_h(row_new[i], row_new[(i + 1) % row_new.len()]);
            }
            for &m in &row_new {
                let c = self.n(m).col;
                self.slot_row[cur][c as usize] = m;
            }
            // column k right of column pred_l(j), row k included
            let col_p = self.col_from(p_node);
            let mut col_new = Vec::with_capacity(col_p.len());
            for &n in &col_p {
                let r = self.n(n).row;
                let min = if l == 0 { value(r, k) } else { f64::INFINITY };
                let m = self.alloc(r, k, level, min);
                if l > 0 {
                    self.nm(m).child = if r == k { prev_diag } else { self.slot_col[prev][r as usize] };
                }
                let rt = self.n(n).right;
                self.link_h(n, m);
                self.link_h(m, rt);
                col_new.push(m);
            }
            for i in 0..col_new.len() {
                self.link_v(col_new[i], col_new[(i + 1) % col_new.len()]);
            }
            let mut dkk = NIL;
            for &m in &col_new {
                let r = self.n(m).row;
                self.slot_col[cur][r as usize] = m;
                if r == k {
                    dkk = m;
                }
            }
            if l == 0 {
                self.diag[k as usize] = dkk;
            }
            prev_diag = dkk;
            made.extend(row_new);
            made.extend(col_new);
            new_lines.push(made);
            std::mem::swap(&mut cur, &mut prev);
        }
        for l in (top + 1)..=(h as usize) {
            let m = self.alloc(k, k, l as u8, f64::INFINITY);
            self.link_h(m, m);
            self.link_v(m, m);
            self.nm(m).child = prev_diag;
            prev_diag = m;
            new_lines.push(vec![m]);
        }

        let levels = new_lines.len().max(cj.len());
        for l in 1..levels {
            if let Some(&z) = cj.get(l) {
                for y in self.row_from(z).into_iter().chain(self.col_from(z)) {
                    self.pull_up(y);
                }
            }
            if let Some(made) = new_lines.get(l) {
                for &y in made {
                    self.pull_up(y);
                }
            }
        }
        Ok(())
    }
}
