//! Conventional network simplex on a dense cost table: parent pointers,
//! block pricing, subtree re-rooting. Used as the static re-solve baseline.

use super::initial_basis;
use crate::error::{Error, Result};
use crate::par;
use crate::model::{BasisTree, Instance, Side, TransportPlan, EPS_DUAL};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct StaticSolver {
    supplies: Vec<usize>,
    demands: Vec<usize>,
    /// Position of a node inside its side list.
    slot: Vec<usize>,
    cost: Vec<f64>,
    tree: BasisTree,
    parent: Vec<usize>,
    parent_edge: Vec<usize>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    cursor: usize,
    pub pivots: usize,
}

impl StaticSolver {
    /// Northwest-corner start with a precomputed cost table.
    pub fn new(inst: &Instance) -> Result<Self> {
        let (tree, _) = initial_basis(inst)?;
        let supplies: Vec<usize> = inst.side_ids(Side::Supply).map(|v| v.idx()).collect();
        let demands: Vec<usize> = inst.side_ids(Side::Demand).map(|v| v.idx()).collect();
        let n = inst.len();
        let mut slot = vec![0; n];
        for (i, &a) in supplies.iter().enumerate() {
            slot[a] = i;
        }
        for (j, &b) in demands.iter().enumerate() {
            slot[b] = j;
        }
        let rows = par::map(&supplies, |&a| demands.iter().map(|&b| inst.metric(a, b)).collect::<Vec<f64>>());
        let cost: Vec<f64> = rows.into_iter().flatten().collect();
        let mut s = StaticSolver {
            supplies,
            demands,
            slot,
            cost,
            tree,
            parent: vec![NONE; n],
            parent_edge: vec![NONE; n],
            depth: vec![0; n],
            pi: vec![0.0; n],
            cursor: 0,
            pivots: 0,
        };
        if n > 0 {
            s.hang(0, NONE, NONE);
        }
        Ok(s)
    }

    fn c(&self, a: usize, b: usize) -> f64 {
        self.cost[self.slot[a] * self.demands.len() + self.slot[b]]
    }

    /// Re-roots the subtree containing `root` under `parent` and refreshes
    /// depth and duals below it.
    fn hang(&mut self, root: usize, parent: usize, edge: usize) {
        self.parent[root] = parent;
        self.parent_edge[root] = edge;
        if parent == NONE {
            self.depth[root] = 0;
            self.pi[root] = 0.0;
        } else {
            self.depth[root] = self.depth[parent] + 1;
            self.pi[root] = self.dual_from(parent, edge);
        }
        let mut stack = vec![root];
        while let Some(x) = stack.pop() {
            for i in 0..self.tree.neighbors(x).len() {
                let (y, e) = self.tree.neighbors(x)[i];
                if y == self.parent[x] {
                    continue;
                }
                self.parent[y] = x;
                self.parent_edge[y] = e;
                self.depth[y] = self.depth[x] + 1;
                self.pi[y] = self.dual_from(x, e);
                stack.push(y);
            }
        }
    }

    fn dual_from(&self, known: usize, edge: usize) -> f64 {
        let e = self.tree.edge(edge);
        let c = self.c(e.supply, e.demand);
        if known == e.supply {
            self.pi[known] - c
        } else {
            self.pi[known] + c
        }
    }

    fn reduced(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.supplies[i], self.demands[j]);
        self.cost[i * self.demands.len() + j] - self.pi[a] + self.pi[b]
    }

    /// Block search: scans blocks of about `sqrt(arcs)` cells from the last
    /// position and returns the best candidate of the first block that has one.
    fn price(&mut self) -> Option<(usize, usize)> {
        let m = self.demands.len();
        let total = self.supplies.len() * m;
        if total == 0 {
            return None;
        }
        let block = ((total as f64).sqrt() as usize).max(16);
        let mut scanned = 0;
        let mut best: Option<(f64, usize)> = None;
        while scanned < total {
            let end = (scanned + block).min(total);
            while scanned < end {
                let k = self.cursor;
                self.cursor = if k + 1 == total { 0 } else { k + 1 };
                scanned += 1;
                let r = self.reduced(k / m, k % m);
                if r < -EPS_DUAL && best.is_none_or(|(b, _)| r < b) {
                    best = Some((r, k));
                }
            }
            if let Some((_, k)) = best {
                return Some((self.supplies[k / m], self.demands[k % m]));
            }
        }
        None
    }

    fn pivot(&mut self, a: usize, b: usize) -> Result<()> {
        // cycle: a -> b, then b up to the apex and down to a
        let (mut x, mut y) = (b, a);
        let mut up_b = Vec::new();
        let mut up_a = Vec::new();
        while x != y {
            if self.depth[x] >= self.depth[y] {
                up_b.push(x);
                x = self.parent[x];
            } else {
                up_a.push(y);
                y = self.parent[y];
            }
            if x == NONE || y == NONE {
                return Err(Error::InternalInvariantViolation("baseline tree is disconnected".into()));
            }
        }
        // walking b -> apex steps from child to parent; apex -> a from parent to child
        let mut theta = f64::INFINITY;
        let mut leave = NONE;
        for &z in &up_b {
            let e = self.tree.edge(self.parent_edge[z]);
            if z == e.demand && e.flow < theta {
                theta = e.flow;
                leave = z;
            }
        }
        for &z in up_a.iter().rev() {
            let e = self.tree.edge(self.parent_edge[z]);
            if z == e.supply && e.flow <= theta {
                theta = e.flow;
                leave = z;
            }
        }
        if leave == NONE {
            return Err(Error::InternalInvariantViolation("unbounded cycle".into()));
        }
        for &z in &up_b {
            let id = self.parent_edge[z];
            let e = self.tree.edge_mut(id);
            if z == e.demand {
                e.flow = (e.flow - theta).max(0.0);
            } else {
                e.flow += theta;
            }
        }
        for &z in &up_a {
            let id = self.parent_edge[z];
            let e = self.tree.edge_mut(id);
            if z == e.supply {
                e.flow = (e.flow - theta).max(0.0);
            } else {
                e.flow += theta;
            }
        }
        let leave_edge = self.parent_edge[leave];
        self.tree.remove_edge(leave_edge);
        let id = self.tree.add_edge(a, b, theta);
        // the endpoint below the leaving edge gets re-hung from the other one
        let in_sub = if up_b.contains(&leave) { b } else { a };
        let other = if in_sub == b { a } else { b };
        self.hang(in_sub, other, id);
        self.pivots += 1;
        Ok(())
    }

    /// Pivots to optimality. Block pricing takes more pivots than the
    /// steepest rule, so the cap is `500 |V|`.
    pub fn solve(&mut self) -> Result<f64> {
        let cap = 500 * self.parent.len().max(1);
        while let Some((a, b)) = self.price() {
            if self.pivots >= cap {
                return Err(Error::IterationCapExceeded(cap));
            }
            self.pivot(a, b)?;
        }
        Ok(self.cost())
    }

    pub fn cost(&self) -> f64 {
        self.tree.edges().filter(|(_, e)| e.flow > 0.0).map(|(_, e)| e.flow * self.c(e.supply, e.demand)).sum()
    }

    pub fn plan(&self, inst: &Instance) -> TransportPlan {
        let mut plan = TransportPlan::new();
        for (_, e) in self.tree.edges() {
            if e.flow > 0.0 {
                plan.insert(inst.node_id(e.supply), inst.node_id(e.demand), e.flow);
            }
        }
        plan
    }

    pub fn basis(&self) -> &BasisTree {
        &self.tree
    }

    pub fn into_basis(self) -> BasisTree {
        self.tree
    }

    pub fn duals(&self) -> &[f64] {
        &self.pi
    }
}
