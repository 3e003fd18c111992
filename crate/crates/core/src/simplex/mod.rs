//! Network simplex over the transport basis, with the adjusted costs held in
//! a [`TourMatrix`] so each pivot costs one cut, two range adds and one link.

mod baseline;

pub use baseline::StaticSolver;

use crate::error::{Error, Result};
use crate::model::{BasisTree, DualPotential, Instance, PathStep, Side, TransportPlan, EPS_DUAL};
use crate::sol::{CutPieces, IndexMode, TourMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexConfig {
    /// Height parameter of the skip orthogonal list.
    pub p: f64,
    pub seed: u64,
    pub mode: IndexMode,
    /// Pivot cap per `run_primal` call, as a multiple of `|V|`.
    pub max_iter_factor: usize,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig { p: 0.5, seed: 0, mode: IndexMode::Full, max_iter_factor: 50 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PivotStats {
    pub pivots: u64,
    pub degenerate: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PivotReport {
    pub pivots: usize,
    pub degenerate: usize,
    /// Structure nodes visited during the run.
    pub touched: u64,
}

/// Leaving variable of a pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaving {
    pub edge: usize,
    pub theta: f64,
    /// Endpoint on the entering supply node's side.
    pub near: usize,
    pub far: usize,
}

/// Northwest-corner basis over supplies and demands in id order.
pub fn initial_basis(inst: &Instance) -> Result<(BasisTree, TransportPlan)> {
    if !inst.check_balance() {
        return Err(Error::Unbalanced(inst.weight_sum()));
    }
    let supplies: Vec<_> = inst.side_ids(Side::Supply).collect();
    let demands: Vec<_> = inst.side_ids(Side::Demand).collect();
    let mut tree = BasisTree::with_nodes(inst.len());
    let mut plan = TransportPlan::new();
    if supplies.is_empty() || demands.is_empty() {
        if inst.is_empty() {
            return Ok((tree, plan));
        }
        return Err(Error::MissingSide);
    }
    let (mut i, mut j) = (0, 0);
    let mut rs = inst.weight(supplies[0]);
    let mut rd = -inst.weight(demands[0]);
    loop {
        let f = rs.min(rd).max(0.0);
        tree.add_edge(supplies[i].idx(), demands[j].idx(), f);
        plan.insert(supplies[i], demands[j], f);
        rs -= f;
        rd -= f;
        let last_i = i + 1 == supplies.len();
        let last_j = j + 1 == demands.len();
        if last_i && last_j {
            break;
        }
        if last_i || (!last_j && rs >= rd) {
            j += 1;
            rd = -inst.weight(demands[j]);
        } else {
            i += 1;
            rs = inst.weight(supplies[i]);
        }
    }
    Ok((tree, plan))
}

/// Duals with `pi = 0` at the lowest index and `pi_s - pi_d = c_sd` on
/// every basic edge.
pub fn compute_duals(tree: &BasisTree, inst: &Instance) -> DualPotential {
    let n = tree.node_count();
    let mut pi = vec![0.0; n];
    if n == 0 {
        return DualPotential { pi };
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &(y, e) in tree.neighbors(x) {
            if seen[y] {
                continue;
            }
            seen[y] = true;
            let edge = tree.edge(e);
            let c = inst.metric(edge.supply, edge.demand);
            pi[y] = if y == edge.demand { pi[x] - c } else { pi[x] + c };
            stack.push(y);
        }
    }
    DualPotential { pi }
}

/// Basis, duals and adjusted-cost structure kept in step.
#[derive(Debug, Clone)]
pub struct SimplexState {
    pub basis: BasisTree,
    pub duals: DualPotential,
    pub adj: TourMatrix,
    pub stats: PivotStats,
    config: SimplexConfig,
    mark: Vec<u32>,
    epoch: u32,
}

impl SimplexState {
    /// Northwest-corner start, duals and a fresh structure.
    pub fn new(inst: &Instance, config: SimplexConfig) -> Result<Self> {
        let (basis, _) = initial_basis(inst)?;
        Self::from_basis(inst, basis, config)
    }

    pub fn from_basis(inst: &Instance, basis: BasisTree, config: SimplexConfig) -> Result<Self> {
        let duals = compute_duals(&basis, inst);
        let mut state = SimplexState {
            basis,
            duals,
            adj: TourMatrix::new(config.mode, config.p, config.seed),
            stats: PivotStats::default(),
            config,
            mark: Vec::new(),
            epoch: 0,
        };
        state.build_adjusted(inst)?;
        Ok(state)
    }

    pub fn config(&self) -> &SimplexConfig {
        &self.config
    }

    /// Rebuilds the adjusted-cost structure from the current duals.
    pub fn build_adjusted(&mut self, inst: &Instance) -> Result<()> {
        let duals = &self.duals;
        self.adj.build(&self.basis, |u, v| duals.adjusted(inst, u, v))
    }

    /// Recomputes duals from the basis and rebuilds the structure.
    pub fn rebuild(&mut self, inst: &Instance) -> Result<()> {
        self.duals = compute_duals(&self.basis, inst);
        self.build_adjusted(inst)
    }

    pub fn touched(&self) -> u64 {
        self.adj.sol().touched()
    }

    /// Most negative adjusted cost below `-EPS_DUAL`, if any.
    pub fn select_entering(&mut self) -> Result<Option<(usize, usize, f64)>> {
        if self.basis.node_count() < 2 {
            return Ok(None);
        }
        let piece = self.adj.piece_of(0)?;
        loop {
            let (value, cell) = self.adj.global_min(piece);
            if value >= -EPS_DUAL {
                return Ok(None);
            }
            let (u, v) = cell.ok_or_else(|| Error::InternalInvariantViolation("negative arc cell".into()))?;
            if self.basis.find_edge(u, v).is_some() {
                // rounding drift on a basic cell; pin it back to zero
                self.adj.write(u, v, 0.0)?;
                continue;
            }
            return Ok(Some((u, v, value)));
        }
    }

    /// Walks the tree path from `demand` back to `supply` and picks the
    /// opposing edge with the smallest flow, nearest `supply` on ties.
    pub fn find_leaving(&mut self, inst: &Instance, supply: usize, demand: usize) -> Result<Leaving> {
        let (theta, step) = self
            .bottleneck(inst, demand, supply)?
            .ok_or_else(|| Error::InternalInvariantViolation("cycle has no opposing edge".into()))?;
        Ok(Leaving { edge: step.edge, theta, near: step.to, far: step.from })
    }

    /// Smallest flow among edges walked from their demand end on the tree
    /// path `from -> to`, the last such edge on ties.
    pub(crate) fn bottleneck(&mut self, inst: &Instance, from: usize, to: usize) -> Result<Option<(f64, PathStep)>> {
        let steps = self
            .basis
            .path(from, to)
            .ok_or_else(|| Error::InternalInvariantViolation(format!("{from} and {to} are disconnected")))?;
        let mut best: Option<(f64, PathStep)> = None;
        for step in steps {
            if inst.node_id(step.from).side != Side::Demand {
                continue;
            }
            let f = self.basis.edge(step.edge).flow;
            if best.is_none_or(|(b, _)| f <= b) {
                best = Some((f, step));
            }
        }
        Ok(best.map(|(f, s)| (f.max(0.0), s)))
    }

    /// Sends `amount` along the tree path `from -> to`: edges walked from
    /// their supply end gain it, edges walked from their demand end lose it.
    pub(crate) fn push_path(&mut self, inst: &Instance, from: usize, to: usize, amount: f64) {
        if amount == 0.0 {
            return;
        }
        let steps = self.basis.path(from, to).expect("connected basis");
        for s in steps {
            let e = self.basis.edge_mut(s.edge);
            if inst.node_id(s.from).side == Side::Demand {
                e.flow = (e.flow - amount).max(0.0);
            } else {
                e.flow += amount;
            }
        }
    }

    /// Replaces basic edge `leave` by `(supply, demand)` carrying `flow`.
    /// `t` is the current adjusted cost of the entering cell; duals shift so
    /// that it reads zero afterwards and every other basic cell stays zero.
    pub(crate) fn exchange(&mut self, leave: usize, supply: usize, demand: usize, t: f64, flow: f64) -> Result<()> {
        let e = self.basis.remove_edge(leave);
        let small = self.smaller_side(e.supply, e.demand, None);
        let supply_small = self.is_marked(supply);
        let near = if self.is_marked(e.supply) == supply_small { e.supply } else { e.demand };
        let far = e.other(near);
        let pieces = self.adj.cut(near, far)?;
        self.relink(pieces, &small, supply_small, supply, demand, t, flow)
    }

    /// Removes basic edge `leave` and brings in the cheapest cell from the
    /// side of `near` across to the other side, as a zero-flow edge. Every
    /// cell that drops under the relink drops by exactly that minimum, so
    /// no adjusted cost turns negative.
    pub(crate) fn dual_exchange(&mut self, leave: usize, near: usize) -> Result<(usize, usize)> {
        let e = self.basis.remove_edge(leave);
        let far = e.other(near);
        let small = self.smaller_side(near, far, None);
        let near_small = self.is_marked(near);
        let pieces = self.adj.cut(near, far)?;
        let (t, cell) = self.adj.global_min(pieces.uv);
        let (supply, demand) = cell.ok_or_else(|| {
            Error::InternalInvariantViolation(format!("no arc crosses the cut between {near} and {far}"))
        })?;
        self.relink(pieces, &small, near_small, supply, demand, t, 0.0)?;
        Ok((supply, demand))
    }

    /// Common tail of both exchanges: the first side of `pieces` holds
    /// `supply` and gains `t` in its duals.
    #[allow(clippy::too_many_arguments)]
    fn relink(
        &mut self,
        pieces: CutPieces,
        small: &[usize],
        first_small: bool,
        supply: usize,
        demand: usize,
        t: f64,
        flow: f64,
    ) -> Result<()> {
        self.adj.range_add(pieces.uv, -t);
        self.adj.range_add(pieces.vu, t);
        self.adj.link(pieces, supply, demand)?;
        self.adj.write(supply, demand, 0.0)?;
        self.basis.add_edge(supply, demand, flow);
        // pi += t on the first side, or the same shift expressed on the
        // other side when that one is smaller
        let delta = if first_small { t } else { -t };
        for &x in small {
            self.duals.pi[x] += delta;
        }
        Ok(())
    }

    /// Shifts duals by `s` on the side of `w` across basic edge `edge` and
    /// mirrors it in the structure, leaving the edge in place.
    pub(crate) fn shift_across(&mut self, edge: usize, w: usize, s: f64) -> Result<()> {
        let v = self.basis.edge(edge).other(w);
        let small = self.smaller_side(w, v, Some(edge));
        let w_small = self.is_marked(w);
        let pieces = self.adj.cut(w, v)?;
        self.adj.range_add(pieces.uv, -s);
        self.adj.range_add(pieces.vu, s);
        self.adj.link(pieces, w, v)?;
        let delta = if w_small { s } else { -s };
        for &x in &small {
            self.duals.pi[x] += delta;
        }
        Ok(())
    }

    /// Nodes of the smaller component after an edge removal, found by
    /// alternating searches from both endpoints, never crossing `blocked`.
    /// Marks the returned nodes.
    fn smaller_side(&mut self, a: usize, b: usize, blocked: Option<usize>) -> Vec<usize> {
        let n = self.basis.node_count();
        if self.mark.len() < n {
            self.mark.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(2);
        if self.epoch < 2 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 2;
        }
        let (ma, mb) = (self.epoch, self.epoch + 1);
        let mut qa = vec![a];
        let mut qb = vec![b];
        self.mark[a] = ma;
        self.mark[b] = mb;
        let (mut ia, mut ib) = (0, 0);
        loop {
            if ia == qa.len() {
                for &x in &qb {
                    self.mark[x] = 0;
                }
                for &x in &qa {
                    self.mark[x] = self.epoch;
                }
                return qa;
            }
            if ib == qb.len() {
                for &x in &qa {
                    self.mark[x] = 0;
                }
                for &x in &qb {
                    self.mark[x] = self.epoch;
                }
                return qb;
            }
            let x = qa[ia];
            ia += 1;
            for &(y, e) in self.basis.neighbors(x) {
                if self.mark[y] != ma && Some(e) != blocked {
                    self.mark[y] = ma;
                    qa.push(y);
                }
            }
            let x = qb[ib];
            ib += 1;
            for &(y, e) in self.basis.neighbors(x) {
                if self.mark[y] != mb && Some(e) != blocked {
                    self.mark[y] = mb;
                    qb.push(y);
                }
            }
        }
    }

    fn is_marked(&self, x: usize) -> bool {
        self.mark.get(x) == Some(&self.epoch)
    }

    /// One primal pivot on entering `(supply, demand)` with adjusted cost `t`.
    pub fn pivot(&mut self, inst: &Instance, supply: usize, demand: usize, t: f64, leaving: Leaving) -> Result<()> {
        self.push_path(inst, demand, supply, leaving.theta);
        self.basis.edge_mut(leaving.edge).flow = 0.0;
        self.exchange(leaving.edge, supply, demand, t, leaving.theta)?;
        self.stats.pivots += 1;
        if leaving.theta == 0.0 {
            self.stats.degenerate += 1;
        }
        Ok(())
    }

    /// Pivots until no adjusted cost is below `-EPS_DUAL`.
    pub fn run_primal(&mut self, inst: &Instance) -> Result<PivotReport> {
        let cap = self.config.max_iter_factor.saturating_mul(inst.len().max(1));
        let touched0 = self.touched();
        let mut report = PivotReport::default();
        while let Some((s, d, t)) = self.select_entering()? {
            if report.pivots >= cap {
                return Err(Error::IterationCapExceeded(cap));
            }
            let leaving = self.find_leaving(inst, s, d)?;
            self.pivot(inst, s, d, t, leaving)?;
            report.pivots += 1;
            if leaving.theta == 0.0 {
                report.degenerate += 1;
            }
        }
        report.touched = self.touched() - touched0;
        Ok(report)
    }

    /// Basic flows on positive edges.
    pub fn plan(&self, inst: &Instance) -> TransportPlan {
        let mut plan = TransportPlan::new();
        for (_, e) in self.basis.edges() {
            if e.flow > 0.0 {
                plan.insert(inst.node_id(e.supply), inst.node_id(e.demand), e.flow);
            }
        }
        plan
    }

    pub fn cost(&self, inst: &Instance) -> f64 {
        self.basis.edges().filter(|(_, e)| e.flow > 0.0).map(|(_, e)| e.flow * inst.metric(e.supply, e.demand)).sum()
    }

    /// Full consistency check: tree laws, conservation, basic duals, tour
    /// length, and the structure against freshly computed adjusted costs on
    /// `samples` cells (all cells when `None`).
    pub fn check(&self, inst: &Instance, samples: Option<&[(usize, usize)]>) -> Result<()> {
        self.basis.validate(inst)?;
        let n = inst.len();
        if n == 0 {
            return Ok(());
        }
        let plan = self.plan(inst);
        let err = plan.conservation_error(inst, inst.node_ids());
        if err > 1e-7 {
            return Err(Error::InternalInvariantViolation(format!("conservation error {err:e}")));
        }
        let tol = |x: f64| 1e-7 * (1.0 + x.abs());
        for (_, e) in self.basis.edges() {
            let r = self.duals.adjusted(inst, e.supply, e.demand);
            if r.abs() > tol(inst.metric(e.supply, e.demand)) {
                return Err(Error::InternalInvariantViolation(format!(
                    "basic edge {}-{} has adjusted cost {r:e}",
                    e.supply, e.demand
                )));
            }
        }
        let tour_vertices = self.adj.validate_tour(0)?;
        if tour_vertices != n || self.adj.tour_len(0) != 3 * n - 2 {
            return Err(Error::InternalInvariantViolation(format!(
                "tour has {} elements for {n} vertices",
                self.adj.tour_len(0)
            )));
        }
        let all: Vec<(usize, usize)>;
        let cells = match samples {
            Some(s) => s,
            None => {
                all = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).collect();
                &all
            }
        };
        for &(u, v) in cells {
            let want = self.duals.adjusted(inst, u, v);
            let got = self.adj.read(u, v)?;
            let ok = if want.is_infinite() { got.is_infinite() } else { (got - want).abs() <= tol(want) };
            if !ok {
                return Err(Error::InternalInvariantViolation(format!(
                    "cell ({u}, {v}) reads {got}, expected {want}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
