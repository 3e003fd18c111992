//! Dynamic transport: point moves, weight shifts, insertions and deletions
//! applied to an optimal basis, each followed by a repair back to optimality.

use crate::error::{Error, Result};
use crate::model::{BasisTree, Instance, NodeId, Side, TransportPlan, EPS_BAL, EPS_DUAL};
use crate::simplex::{PivotReport, SimplexConfig, SimplexState};

const FLOW_DUST: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverConfig {
    pub simplex: SimplexConfig,
    /// Degree above which a move rebuilds duals and structure from scratch
    /// instead of patching edge by edge. `None` means `sqrt(|V|)`.
    pub rebuild_threshold: Option<f64>,
    /// Nudges supply `k` by `k * 1e-12` (demands absorb the total evenly)
    /// to break ties between degenerate bases.
    pub perturb: bool,
}


#[derive(Debug, Clone, PartialEq)]
pub enum UpdateEvent {
    Move { v: NodeId, coords: Vec<f64> },
    Shift { u: NodeId, v: NodeId, delta: f64 },
    Insert { side: Side, coords: Vec<f64>, weight: f64 },
    Delete { v: NodeId },
    Query,
}

impl UpdateEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            UpdateEvent::Move { .. } => "move",
            UpdateEvent::Shift { .. } => "shift",
            UpdateEvent::Insert { .. } => "insert",
            UpdateEvent::Delete { .. } => "delete",
            UpdateEvent::Query => "query",
        }
    }
}

/// Work done by one operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpReport {
    pub pivots: usize,
    /// Basis exchanges made while rerouting weight.
    pub dual_steps: usize,
    pub touched: u64,
    pub inserted: Option<NodeId>,
    pub rebuilt: bool,
}

#[derive(Debug, Clone)]
pub struct Solver {
    inst: Instance,
    state: SimplexState,
    pooled: Vec<bool>,
    config: SolverConfig,
}

impl Solver {
    /// Solves `inst` from a northwest-corner start.
    pub fn new(mut inst: Instance, config: SolverConfig) -> Result<Self> {
        inst.validate()?;
        if !inst.check_balance() {
            return Err(Error::Unbalanced(inst.weight_sum()));
        }
        if config.perturb {
            perturb(&mut inst);
        }
        let mut state = SimplexState::new(&inst, config.simplex)?;
        state.run_primal(&inst)?;
        let pooled = vec![false; inst.len()];
        Ok(Solver { inst, state, pooled, config })
    }

    /// Starts from a given spanning-tree basis of `inst` (for example one
    /// produced by [`crate::StaticSolver`]) and pivots from there.
    pub fn with_basis(inst: Instance, basis: BasisTree, config: SolverConfig) -> Result<Self> {
        inst.validate()?;
        if !inst.check_balance() {
            return Err(Error::Unbalanced(inst.weight_sum()));
        }
        basis.validate(&inst)?;
        let mut state = SimplexState::from_basis(&inst, basis, config.simplex)?;
        state.run_primal(&inst)?;
        let pooled = vec![false; inst.len()];
        Ok(Solver { inst, state, pooled, config })
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn state(&self) -> &SimplexState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn is_pooled(&self, v: NodeId) -> bool {
        self.pooled.get(v.idx()).copied().unwrap_or(false)
    }

    pub fn live_ids(&self) -> Vec<NodeId> {
        self.inst.node_ids().filter(|&v| !self.pooled[v.idx()]).collect()
    }

    pub fn pooled_ids(&self) -> Vec<NodeId> {
        self.inst.node_ids().filter(|&v| self.pooled[v.idx()]).collect()
    }

    /// The instance over live nodes only, for re-solving from scratch.
    pub fn live_instance(&self) -> Instance {
        self.inst.restricted(&self.live_ids())
    }

    fn check_live(&self, v: NodeId) -> Result<()> {
        if v.idx() >= self.inst.len() || self.inst.node_id(v.idx()) != v {
            return Err(Error::UnknownNode(v));
        }
        if self.pooled[v.idx()] {
            return Err(Error::NodePooled(v));
        }
        Ok(())
    }

    fn touched(&self) -> u64 {
        self.state.touched()
    }

    fn finish(&self, touched0: u64, mut report: OpReport, primal: PivotReport) -> OpReport {
        report.pivots += primal.pivots;
        report.touched = self.touched() - touched0;
        report
    }

    /// Moves `v` to `coords`. Each basic edge at `v` gets its dual equation
    /// restored by shifting the far side, then `v`'s row and column are
    /// refreshed and primal pivots finish the job.
    pub fn move_point(&mut self, v: NodeId, coords: Vec<f64>) -> Result<OpReport> {
        self.check_live(v)?;
        let touched0 = self.touched();
        self.inst.set_coords(v, coords)?;
        let mut report = OpReport::default();
        let x = v.idx();
        let limit = self.config.rebuild_threshold.unwrap_or_else(|| (self.inst.len() as f64).sqrt());
        if self.state.basis.degree(x) as f64 > limit {
            self.state.rebuild(&self.inst)?;
            report.rebuilt = true;
        } else {
            let around: Vec<(usize, usize)> = self.state.basis.neighbors(x).to_vec();
            for (w, e) in around {
                let edge = *self.state.basis.edge(e);
                let pi = &self.state.duals.pi;
                let delta = self.inst.metric(edge.supply, edge.demand) - (pi[edge.supply] - pi[edge.demand]);
                if delta == 0.0 {
                    continue;
                }
                // the far side's duals absorb the change in this edge's cost
                let s = if v.side == Side::Demand { delta } else { -delta };
                self.state.shift_across(e, w, s)?;
            }
            let inst = &self.inst;
            let duals = &self.state.duals;
            self.state.adj.refresh_vertex(x, |r, c| duals.adjusted(inst, r, c))?;
        }
        let primal = self.state.run_primal(&self.inst)?;
        Ok(self.finish(touched0, report, primal))
    }

    /// Moves `delta` of weight from `u` to `v`: `w_u -= delta`,
    /// `w_v += delta`. The flow change is routed through the tree; each
    /// emptied edge is swapped for the cheapest arc across the cut, which
    /// keeps every adjusted cost nonnegative.
    pub fn shift_weight(&mut self, u: NodeId, v: NodeId, delta: f64) -> Result<OpReport> {
        self.check_live(u)?;
        self.check_live(v)?;
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidInstance(format!("weight shift must be positive, got {delta}")));
        }
        if u == v {
            return Ok(OpReport::default());
        }
        let wu = signed_clamp(u.side, self.inst.weight(u) - delta).ok_or(Error::WeightSignViolation(u))?;
        let wv = signed_clamp(v.side, self.inst.weight(v) + delta).ok_or(Error::WeightSignViolation(v))?;
        let touched0 = self.touched();
        self.inst.set_weight(u, wu);
        self.inst.set_weight(v, wv);
        let mut report = OpReport::default();
        let (from, to) = (v.idx(), u.idx());
        let cap = self.config.simplex.max_iter_factor.saturating_mul(self.inst.len().max(1));
        let mut rest = delta;
        loop {
            match self.state.bottleneck(&self.inst, from, to)? {
                // a bottleneck within rounding of the rest is not a real one
                Some((theta, step)) if theta < rest - FLOW_DUST => {
                    if report.dual_steps >= cap {
                        return Err(Error::IterationCapExceeded(cap));
                    }
                    self.state.push_path(&self.inst, from, to, theta);
                    self.state.basis.edge_mut(step.edge).flow = 0.0;
                    rest -= theta;
                    // `step.from` lies on the side of `from`
                    self.state.dual_exchange(step.edge, step.from)?;
                    report.dual_steps += 1;
                }
                _ => {
                    self.state.push_path(&self.inst, from, to, rest);
                    break;
                }
            }
        }
        let primal = self.state.run_primal(&self.inst)?;
        Ok(self.finish(touched0, report, primal))
    }

    /// Adds a point with `weight` taken from same-side nodes in id order.
    /// A pooled node of that side is reused when one exists; otherwise the
    /// node joins the basis on a zero-flow edge to the opposite-side node
    /// that keeps all of its adjusted costs nonnegative.
    pub fn insert_point(&mut self, side: Side, coords: Vec<f64>, weight: f64) -> Result<OpReport> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidInstance(format!("insert weight must be nonnegative, got {weight}")));
        }
        if !self.inst.supports_points() {
            return Err(Error::InvalidInstance("explicit-cost instances cannot gain points".into()));
        }
        if coords.len() != self.inst.dim() {
            return Err(Error::InvalidInstance(format!(
                "point has dimension {}, expected {}",
                coords.len(),
                self.inst.dim()
            )));
        }
        let donors: Vec<NodeId> = self
            .inst
            .side_ids(side)
            .filter(|&d| !self.pooled[d.idx()] && self.inst.weight(d) != 0.0)
            .collect();
        let available: f64 = donors.iter().map(|&d| self.inst.weight(d).abs()).sum();
        if weight > available + EPS_BAL {
            return Err(Error::InvalidInstance(format!(
                "insert weight {weight} exceeds the {available} held by the other {side:?} nodes"
            )));
        }
        let touched0 = self.touched();
        let reuse = self.inst.side_ids(side).find(|&d| self.pooled[d.idx()]);
        let mut report = match reuse {
            Some(id) => {
                self.pooled[id.idx()] = false;
                let mut r = self.move_point(id, coords)?;
                r.inserted = Some(id);
                r
            }
            None => {
                let id = self.attach_fresh(side, coords)?;
                OpReport { inserted: Some(id), ..Default::default() }
            }
        };
        let id = report.inserted.expect("inserted id");
        let mut rest = weight;
        for d in donors {
            if rest <= 0.0 {
                break;
            }
            let take = rest.min(self.inst.weight(d).abs());
            let r = match side {
                Side::Supply => self.shift_weight(d, id, take)?,
                Side::Demand => self.shift_weight(id, d, take)?,
            };
            report.pivots += r.pivots;
            report.dual_steps += r.dual_steps;
            rest -= take;
        }
        report.touched = self.touched() - touched0;
        Ok(report)
    }

    /// Adds a zero-weight node to the basis, dual-feasibly.
    fn attach_fresh(&mut self, side: Side, coords: Vec<f64>) -> Result<NodeId> {
        let other = side.opposite();
        let anchor_pool: Vec<NodeId> = self.inst.side_ids(other).collect();
        if anchor_pool.is_empty() {
            return Err(Error::MissingSide);
        }
        let id = self.inst.add_node(side, coords, 0.0)?;
        let v = id.idx();
        let pi = &self.state.duals.pi;
        // demand: pi_v = max_u (pi_u - c_uv); supply: pi_v = min_u (pi_u + c_vu)
        let mut best: Option<(f64, usize)> = None;
        for u in anchor_pool {
            let x = u.idx();
            let cand = match side {
                Side::Demand => pi[x] - self.inst.metric(x, v),
                Side::Supply => pi[x] + self.inst.metric(v, x),
            };
            let better = match best {
                None => true,
                Some((b, _)) => match side {
                    Side::Demand => cand > b,
                    Side::Supply => cand < b,
                },
            };
            if better {
                best = Some((cand, x));
            }
        }
        let (pv, anchor) = best.expect("nonempty anchor set");
        self.pooled.push(false);
        self.state.basis.ensure_node(v);
        self.state.duals.pi.push(pv);
        let (s, d) = if side == Side::Supply { (v, anchor) } else { (anchor, v) };
        self.state.basis.add_edge(s, d, 0.0);
        let inst = &self.inst;
        let duals = &self.state.duals;
        self.state.adj.add_vertex(v, anchor, |r, c| duals.adjusted(inst, r, c))?;
        Ok(id)
    }

    /// Smallest adjusted cost in `v`'s row and column, read from the
    /// structure.
    pub fn line_min(&self, v: NodeId) -> Result<f64> {
        let cells = self.state.adj.vertex_cells(v.idx())?;
        Ok(cells.into_iter().map(|(_, _, x)| x).fold(f64::INFINITY, f64::min))
    }

    /// Returns a zero-weight node to the pool. It stays in the basis.
    pub fn delete_point(&mut self, v: NodeId) -> Result<OpReport> {
        self.check_live(v)?;
        let w = self.inst.weight(v);
        if w.abs() > EPS_BAL {
            return Err(Error::WeightNotZero(v, w));
        }
        let mut report = OpReport::default();
        if w != 0.0 {
            // rounding dust goes to a same-side neighbour
            let sink = self.inst.side_ids(v.side).find(|&d| d != v && !self.pooled[d.idx()]);
            match sink {
                Some(d) if v.side == Side::Supply => report = self.shift_weight(v, d, w)?,
                Some(d) => report = self.shift_weight(d, v, -w)?,
                None => self.inst.set_weight(v, 0.0),
            }
        }
        self.pooled[v.idx()] = true;
        Ok(report)
    }

    /// Positive flows between live nodes.
    pub fn query_plan(&self) -> TransportPlan {
        let mut plan = TransportPlan::new();
        for (_, e) in self.state.basis.edges() {
            if e.flow > 0.0 && !self.pooled[e.supply] && !self.pooled[e.demand] {
                plan.insert(self.inst.node_id(e.supply), self.inst.node_id(e.demand), e.flow);
            }
        }
        plan
    }

    pub fn query_cost(&self) -> f64 {
        self.state
            .basis
            .edges()
            .filter(|(_, e)| e.flow > 0.0 && !self.pooled[e.supply] && !self.pooled[e.demand])
            .map(|(_, e)| e.flow * self.inst.metric(e.supply, e.demand))
            .sum()
    }

    pub fn apply(&mut self, event: &UpdateEvent) -> Result<OpReport> {
        match event {
            UpdateEvent::Move { v, coords } => self.move_point(*v, coords.clone()),
            UpdateEvent::Shift { u, v, delta } => self.shift_weight(*u, *v, *delta),
            UpdateEvent::Insert { side, coords, weight } => self.insert_point(*side, coords.clone(), *weight),
            UpdateEvent::Delete { v } => self.delete_point(*v),
            UpdateEvent::Query => Ok(OpReport::default()),
        }
    }

    /// Full audit: tree, conservation, duals, the tour law, every structure
    /// cell against recomputed adjusted costs (up to `full_limit` nodes,
    /// sampled rows beyond), dual feasibility, and zero weight on pooled
    /// nodes.
    pub fn check_invariants(&mut self, full_limit: usize) -> Result<()> {
        let n = self.inst.len();
        if n <= full_limit {
            self.state.check(&self.inst, None)?;
        } else {
            let step = n / full_limit.max(1) + 1;
            let cells: Vec<(usize, usize)> =
                (0..n).step_by(step).flat_map(|u| (0..n).flat_map(move |v| [(u, v), (v, u)])).collect();
            self.state.check(&self.inst, Some(&cells))?;
        }
        for v in self.pooled_ids() {
            if self.inst.weight(v) != 0.0 {
                return Err(Error::WeightNotZero(v, self.inst.weight(v)));
            }
        }
        if n >= 2 {
            let piece = self.state.adj.piece_of(0)?;
            let (m, _) = self.state.adj.global_min(piece);
            if m < -EPS_DUAL {
                return Err(Error::InternalInvariantViolation(format!("adjusted cost {m:e} after repair")));
            }
        }
        Ok(())
    }
}

/// `w` if it has the sign its side allows, snapping tiny overshoots to 0.
pub(crate) fn signed_clamp(side: Side, w: f64) -> Option<f64> {
    match side {
        Side::Supply if w >= 0.0 => Some(w),
        Side::Supply if w >= -EPS_BAL => Some(0.0),
        Side::Demand if w <= 0.0 => Some(w),
        Side::Demand if w <= EPS_BAL => Some(0.0),
        _ => None,
    }
}

fn perturb(inst: &mut Instance) {
    let supplies: Vec<NodeId> = inst.side_ids(Side::Supply).collect();
    let demands: Vec<NodeId> = inst.side_ids(Side::Demand).collect();
    if supplies.is_empty() || demands.is_empty() {
        return;
    }
    let mut added = 0.0;
    for (k, &a) in supplies.iter().enumerate() {
        let e = (k + 1) as f64 * 1e-12;
        inst.set_weight(a, inst.weight(a) + e);
        added += e;
    }
    let share = added / demands.len() as f64;
    for &b in &demands {
        inst.set_weight(b, inst.weight(b) - share);
    }
}
