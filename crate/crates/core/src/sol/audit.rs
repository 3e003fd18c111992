//! Consistency checks and a text dump, for tests and debugging.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use super::{Idx, Key, Piece, SkipOrthogonalList, NIL};
use crate::error::{Error, Result};

fn fail(msg: String) -> Error {
    Error::InternalInvariantViolation(msg)
}

fn close(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

impl SkipOrthogonalList {
    /// All nodes of one level torus, row by row.
    fn torus(&self, start: Idx) -> Vec<Idx> {
        let mut out = Vec::new();
        for r in self.col_from(start) {
            out.extend(self.row_from(r));
        }
        out
    }

    /// Checks links, the level structure, domination, and the lazy
    /// equation on every level of the piece.
    pub fn audit(&self, piece: Piece) -> Result<()> {
        let mut level_nodes = vec![self.torus(piece.0)];
        loop {
            let cur = level_nodes.last().unwrap();
            let up = cur.iter().map(|&x| self.n(x).parent).find(|&p| p != NIL);
            match up {
                Some(p) => level_nodes.push(self.torus(p)),
                None => break,
            }
        }
        let mut seen_parent: HashMap<Idx, Idx> = HashMap::new();
        for (l, nodes) in level_nodes.iter().enumerate() {
            let top = l + 1 == level_nodes.len();
            let set: HashSet<Idx> = nodes.iter().copied().collect();
            let rows = self.col_from(nodes[0]).iter().map(|&x| self.n(x).row).collect::<Vec<Key>>();
            let cols = self.row_from(nodes[0]).iter().map(|&x| self.n(x).col).collect::<Vec<Key>>();
            if nodes.len() != rows.len() * cols.len() || set.len() != nodes.len() {
                return Err(fail(format!("level {l} is not a torus")));
            }
            for &x in nodes {
                let n = self.n(x);
                if n.level as usize != l {
                    return Err(fail(format!("node at level {} found on level {l}", n.level)));
                }
                if self.h(n.row) < n.level || self.h(n.col) < n.level {
                    return Err(fail(format!("node ({}, {}) above its key heights", n.row, n.col)));
                }
                if self.n(n.right).left != x || self.n(n.down).up != x {
                    return Err(fail(format!("broken back link at ({}, {})", n.row, n.col)));
                }
                if self.n(n.right).row != n.row || self.n(n.down).col != n.col {
                    return Err(fail(format!("line key changes at ({}, {})", n.row, n.col)));
                }
                if top != (n.parent == NIL) {
                    return Err(fail(format!("parent link of ({}, {}) at level {l}", n.row, n.col)));
                }
                if l == 0 {
                    if n.tag != 0.0 || n.min_node != x {
                        return Err(fail(format!("bottom node ({}, {}) carries a tag", n.row, n.col)));
                    }
                    continue;
                }
                let c = self.n(n.child);
                if c.row != n.row || c.col != n.col || c.level + 1 != n.level {
                    return Err(fail(format!("child of ({}, {}) is not its twin", n.row, n.col)));
                }
                let mut kids = Vec::new();
                self.children_into(x, &mut kids);
                let mut best = f64::INFINITY;
                for &y in &kids {
                    if self.n(y).parent != x {
                        return Err(fail(format!(
                            "({}, {})@{} is not claimed by its dominator",
                            self.n(y).row,
                            self.n(y).col,
                            l - 1
                        )));
                    }
                    if seen_parent.insert(y, x).is_some() {
                        return Err(fail("node dominated twice".into()));
                    }
                    best = best.min(self.n(y).min);
                }
                if !close(n.min, n.tag + best) {
                    return Err(fail(format!(
                        "lazy equation fails at ({}, {})@{l}: {} vs {} + {}",
                        n.row, n.col, n.min, n.tag, best
                    )));
                }
                // the witness must sit under x and realize its minimum
                let w = n.min_node;
                let mut cur = w;
                let mut below = 0.0;
                while cur != x {
                    if cur == NIL {
                        return Err(fail(format!("witness of ({}, {})@{l} escapes its block", n.row, n.col)));
                    }
                    if cur != w {
                        below += self.n(cur).tag;
                    }
                    cur = self.n(cur).parent;
                }
                if !close(self.n(w).min + below + n.tag, n.min) {
                    return Err(fail(format!("witness of ({}, {})@{l} does not attain the minimum", n.row, n.col)));
                }
            }
            if l > 0 {
                let prev = &level_nodes[l - 1];
                let prev_rows = self.col_from(prev[0]).iter().map(|&x| self.n(x).row).collect::<Vec<Key>>();
                let prev_cols = self.row_from(prev[0]).iter().map(|&x| self.n(x).col).collect::<Vec<Key>>();
                let want_rows: Vec<Key> = prev_rows.iter().copied().filter(|&k| self.h(k) >= l as u8).collect();
                let want_cols: Vec<Key> = prev_cols.iter().copied().filter(|&k| self.h(k) >= l as u8).collect();
                if !same_cycle(&rows, &want_rows) || !same_cycle(&cols, &want_cols) {
                    return Err(fail(format!("level {l} is not the induced sub-list")));
                }
                if prev.iter().any(|y| !seen_parent.contains_key(y)) {
                    return Err(fail(format!("orphan below level {l}")));
                }
            }
        }
        // every key tall enough must show up on the top level's parent side
        let top = level_nodes.len() - 1;
        let bottom_rows = self.col_from(piece.0).iter().map(|&x| self.n(x).row).collect::<Vec<Key>>();
        let bottom_cols = self.row_from(piece.0).iter().map(|&x| self.n(x).col).collect::<Vec<Key>>();
        let next = top as u8 + 1;
        if bottom_rows.iter().any(|&r| self.h(r) >= next) && bottom_cols.iter().any(|&c| self.h(c) >= next) {
            return Err(fail(format!("piece stops at level {top} but taller keys exist")));
        }
        Ok(())
    }

    /// Bottom level as a text grid of true values, plus the key heights.
    pub fn dump(&self, piece: Piece) -> String {
        let mut s = String::new();
        let cols = self.col_keys(piece);
        let _ = write!(s, "{:>8}", "");
        for c in &cols {
            let _ = write!(s, " {:>8}", format!("{c}^{}", self.h(*c)));
        }
        s.push('\n');
        for r in self.col_from(piece.0) {
            let rk = self.n(r).row;
            let _ = write!(s, "{:>8}", format!("{rk}^{}", self.h(rk)));
            for b in self.row_from(r) {
                let v = self.true_value(b);
                if v.is_infinite() {
                    let _ = write!(s, " {:>8}", "inf");
                } else {
                    let _ = write!(s, " {v:>8.3}");
                }
            }
            s.push('\n');
        }
        s
    }
}

fn same_cycle(a: &[Key], b: &[Key]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    match b.iter().position(|&k| k == a[0]) {
        Some(off) => (0..a.len()).all(|i| a[i] == b[(off + i) % b.len()]),
        None => false,
    }
}
