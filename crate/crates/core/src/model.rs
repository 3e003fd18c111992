//! Domain types shared by every layer: instances, plans, duals, the basis tree
//! and the saturating extended scalar used for forbidden directions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute balance tolerance on `sum(w)`.
pub const EPS_BAL: f64 = 1e-9;
/// Absolute tolerance on flow conservation.
pub const EPS_FLOW: f64 = 1e-9;
/// Absolute tolerance on dual feasibility and reduced costs.
pub const EPS_DUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Supply,
    Demand,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Supply => Side::Demand,
            Side::Demand => Side::Supply,
        }
    }
}

/// Dense node handle. Indices are never reused within one instance, pooled
/// nodes keep theirs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub index: u32,
    pub side: Side,
}

impl NodeId {
    pub fn idx(self) -> usize {
        self.index as usize
    }
}

/// A real number or `+inf`. Addition saturates; `NaN` and `-inf` cannot be
/// represented.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct ExtScalar(f64);

impl ExtScalar {
    pub const INFINITY: ExtScalar = ExtScalar(f64::INFINITY);
    pub const ZERO: ExtScalar = ExtScalar(0.0);

    pub fn finite(x: f64) -> Self {
        assert!(x.is_finite(), "ExtScalar::finite called with {x}");
        ExtScalar(x)
    }

    /// Accepts any finite value or `+inf`.
    pub fn from_f64(x: f64) -> Self {
        assert!(!x.is_nan() && x != f64::NEG_INFINITY, "not an extended scalar: {x}");
        ExtScalar(x)
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        !self.0.is_finite()
    }

    pub fn value(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    /// Raw `f64` view (`+inf` for the infinite value).
    pub fn to_f64(self) -> f64 {
        self.0
    }

    pub fn min(self, other: ExtScalar) -> ExtScalar {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }
}

impl fmt::Debug for ExtScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_finite() {
            write!(f, "Finite({})", self.0)
        } else {
            f.write_str("PositiveInfinity")
        }
    }
}

impl Eq for ExtScalar {}

impl PartialOrd for ExtScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for ExtScalar {
    type Output = ExtScalar;
    fn add(self, rhs: ExtScalar) -> ExtScalar {
        ExtScalar(self.0 + rhs.0)
    }
}

impl Add<f64> for ExtScalar {
    type Output = ExtScalar;
    fn add(self, rhs: f64) -> ExtScalar {
        debug_assert!(rhs.is_finite());
        ExtScalar(self.0 + rhs)
    }
}

impl Sub for ExtScalar {
    type Output = ExtScalar;
    fn sub(self, rhs: ExtScalar) -> ExtScalar {
        assert!(rhs.is_finite(), "subtracting PositiveInfinity");
        ExtScalar(self.0 - rhs.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostFn {
    SquaredEuclidean,
    Euclidean,
    /// Row per supply slot, column per demand slot.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeData {
    pub side: Side,
    /// Position among the nodes of the same side, in creation order.
    pub slot: usize,
    pub coords: Vec<f64>,
    /// Signed weight: supplies positive, demands negative.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    dim: usize,
    nodes: Vec<NodeData>,
    cost_fn: CostFn,
    scale: f64,
    supply_slots: usize,
    demand_slots: usize,
}

impl Instance {
    pub fn new(dim: usize, cost_fn: CostFn) -> Self {
        Instance {
            dim,
            nodes: Vec::new(),
            cost_fn,
            scale: 1.0,
            supply_slots: 0,
            demand_slots: 0,
        }
    }

    /// Builds an instance from nonnegative marginals, converting to the signed
    /// convention internally.
    pub fn from_marginals(
        dim: usize,
        supply: Vec<(Vec<f64>, f64)>,
        demand: Vec<(Vec<f64>, f64)>,
        cost_fn: CostFn,
    ) -> Result<Self> {
        let mut inst = Instance::new(dim, cost_fn);
        for (coords, alpha) in supply {
            if alpha < 0.0 {
                return Err(Error::InvalidInstance(format!("negative supply weight {alpha}")));
            }
            inst.add_node(Side::Supply, coords, alpha)?;
        }
        for (coords, beta) in demand {
            if beta < 0.0 {
                return Err(Error::InvalidInstance(format!("negative demand weight {beta}")));
            }
            inst.add_node(Side::Demand, coords, -beta)?;
        }
        inst.validate()?;
        Ok(inst)
    }

    /// Instance over an explicit `|A| x |B|` matrix; points are zero-dimensional.
    pub fn from_matrix(alpha: &[f64], beta: &[f64], matrix: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_marginals(
            0,
            alpha.iter().map(|&a| (Vec::new(), a)).collect(),
            beta.iter().map(|&b| (Vec::new(), b)).collect(),
            CostFn::Explicit(matrix),
        )
    }

    pub fn add_node(&mut self, side: Side, coords: Vec<f64>, weight: f64) -> Result<NodeId> {
        if coords.len() != self.dim {
            return Err(Error::InvalidInstance(format!(
                "point has dimension {}, expected {}",
                coords.len(),
                self.dim
            )));
        }
        let slot = match side {
            Side::Supply => {
                self.supply_slots += 1;
                self.supply_slots - 1
            }
            Side::Demand => {
                self.demand_slots += 1;
                self.demand_slots - 1
            }
        };
        self.nodes.push(NodeData { side, slot, coords, weight });
        Ok(NodeId { index: (self.nodes.len() - 1) as u32, side })
    }

    /// Checks explicit-matrix shape and entries, and weight signs.
    pub fn validate(&self) -> Result<()> {
        if let CostFn::Explicit(m) = &self.cost_fn {
            if m.len() != self.supply_slots {
                return Err(Error::InvalidInstance(format!(
                    "explicit matrix has {} rows for {} supply nodes",
                    m.len(),
                    self.supply_slots
                )));
            }
            for row in m {
                if row.len() != self.demand_slots {
                    return Err(Error::InvalidInstance("explicit matrix is not rectangular".into()));
                }
                if let Some(bad) = row.iter().find(|c| !c.is_finite() || **c < 0.0) {
                    return Err(Error::InvalidInstance(format!(
                        "explicit supply->demand costs must be finite and nonnegative, got {bad}"
                    )));
                }
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let ok = match n.side {
                Side::Supply => n.weight >= 0.0,
                Side::Demand => n.weight <= 0.0,
            };
            if !ok {
                return Err(Error::InvalidInstance(format!("node {i} has a weight of the wrong sign")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cost_fn(&self) -> &CostFn {
        &self.cost_fn
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Multiplier applied to every metric cost.
    pub fn set_scale(&mut self, scale: f64) {
        assert!(scale.is_finite() && scale > 0.0);
        self.scale = scale;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: NodeId) -> &NodeData {
        &self.nodes[v.idx()]
    }

    pub fn node_id(&self, index: usize) -> NodeId {
        NodeId { index: index as u32, side: self.nodes[index].side }
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(|i| self.node_id(i))
    }

    pub fn side_ids(&self, side: Side) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(move |v| v.side == side)
    }

    pub fn weight(&self, v: NodeId) -> f64 {
        self.nodes[v.idx()].weight
    }

    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.weight).collect()
    }

    pub(crate) fn set_weight(&mut self, v: NodeId, w: f64) {
        self.nodes[v.idx()].weight = w;
    }

    pub fn coords(&self, v: NodeId) -> &[f64] {
        &self.nodes[v.idx()].coords
    }

    pub(crate) fn set_coords(&mut self, v: NodeId, coords: Vec<f64>) -> Result<()> {
        if coords.len() != self.dim {
            return Err(Error::InvalidInstance(format!(
                "point has dimension {}, expected {}",
                coords.len(),
                self.dim
            )));
        }
        if matches!(self.cost_fn, CostFn::Explicit(_)) {
            return Err(Error::InvalidInstance("explicit-cost instances have no coordinates".into()));
        }
        self.nodes[v.idx()].coords = coords;
        Ok(())
    }

    pub fn supports_points(&self) -> bool {
        !matches!(self.cost_fn, CostFn::Explicit(_))
    }

    /// `c_uv`: finite only in the supply -> demand direction.
    pub fn cost(&self, u: NodeId, v: NodeId) -> Result<ExtScalar> {
        if u.idx() >= self.nodes.len() || v.idx() >= self.nodes.len() {
            return Err(Error::InvalidInstance(format!("unknown node in pair ({u:?}, {v:?})")));
        }
        let (a, b) = (&self.nodes[u.idx()], &self.nodes[v.idx()]);
        if u == v || a.side != Side::Supply || b.side != Side::Demand {
            return Ok(ExtScalar::INFINITY);
        }
        if !matches!(self.cost_fn, CostFn::Explicit(_))
            && (a.coords.len() != self.dim || b.coords.len() != self.dim)
        {
            return Err(Error::InvalidInstance("coordinate dimension mismatch".into()));
        }
        Ok(ExtScalar::finite(self.metric(u.idx(), v.idx())))
    }

    /// Raw cost for a supply index `a` and demand index `b`; no side checks.
    #[inline]
    pub fn metric(&self, a: usize, b: usize) -> f64 {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        match &self.cost_fn {
            CostFn::SquaredEuclidean => self.scale * sq_dist(&na.coords, &nb.coords),
            CostFn::Euclidean => self.scale * sq_dist(&na.coords, &nb.coords).sqrt(),
            CostFn::Explicit(m) => m[na.slot][nb.slot],
        }
    }

    /// `c_uv` as a raw `f64` (`+inf` for forbidden directions).
    #[inline]
    pub fn cost_f64(&self, u: usize, v: usize) -> f64 {
        if u != v && self.nodes[u].side == Side::Supply && self.nodes[v].side == Side::Demand {
            self.metric(u, v)
        } else {
            f64::INFINITY
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn check_balance(&self) -> bool {
        self.weight_sum().abs() <= EPS_BAL
    }

    pub fn plan_cost(&self, plan: &TransportPlan) -> Result<f64> {
        let mut total = 0.0;
        for (&(u, v), &x) in plan.iter() {
            let c = self.cost(u, v)?;
            match c.value() {
                Some(c) => total += c * x,
                None if x == 0.0 => {}
                None => return Err(Error::InfeasiblePlan { from: u, to: v, flow: x }),
            }
        }
        Ok(total)
    }

    /// Sub-instance restricted to `keep`, preserving order and relative slots.
    pub fn restricted(&self, keep: &[NodeId]) -> Instance {
        let cost_fn = match &self.cost_fn {
            CostFn::Explicit(m) => {
                let rows: Vec<usize> =
                    keep.iter().filter(|v| v.side == Side::Supply).map(|v| self.node(*v).slot).collect();
                let cols: Vec<usize> =
                    keep.iter().filter(|v| v.side == Side::Demand).map(|v| self.node(*v).slot).collect();
                CostFn::Explicit(rows.iter().map(|&r| cols.iter().map(|&c| m[r][c]).collect()).collect())
            }
            other => other.clone(),
        };
        let mut out = Instance::new(self.dim, cost_fn);
        out.scale = self.scale;
        for v in keep {
            let n = self.node(*v);
            out.add_node(n.side, n.coords.clone(), n.weight).expect("same dimension");
        }
        out
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sparse supply -> demand flow.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransportPlan {
    entries: BTreeMap<(NodeId, NodeId), f64>,
}

impl TransportPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, from: NodeId, to: NodeId, flow: f64) {
        assert!(flow >= 0.0, "negative flow {flow}");
        *self.entries.entry((from, to)).or_insert(0.0) += flow;
    }

    pub fn get(&self, from: NodeId, to: NodeId) -> f64 {
        self.entries.get(&(from, to)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest violation of `out(u) - in(u) = w_u` over the given nodes.
    pub fn conservation_error(&self, inst: &Instance, nodes: impl IntoIterator<Item = NodeId>) -> f64 {
        let mut net = vec![0.0; inst.len()];
        for (&(u, v), &x) in &self.entries {
            net[u.idx()] += x;
            net[v.idx()] -= x;
        }
        nodes.into_iter().map(|v| (net[v.idx()] - inst.weight(v)).abs()).fold(0.0, f64::max)
    }
}

/// Per-node dual values, indexed by `NodeId::index`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DualPotential {
    pub pi: Vec<f64>,
}

impl DualPotential {
    pub fn get(&self, v: NodeId) -> f64 {
        self.pi[v.idx()]
    }

    /// `c_uv + pi_v - pi_u`.
    pub fn adjusted(&self, inst: &Instance, u: usize, v: usize) -> f64 {
        inst.cost_f64(u, v) + self.pi[v] - self.pi[u]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEdge {
    pub supply: usize,
    pub demand: usize,
    pub flow: f64,
}

impl BasisEdge {
    pub fn other(&self, v: usize) -> usize {
        if v == self.supply {
            self.demand
        } else {
            self.supply
        }
    }
}

/// One step of a tree path: edge id and the node the step leaves from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub edge: usize,
    pub from: usize,
    pub to: usize,
}

/// Spanning tree of basic variables. Every edge runs supply -> demand.
#[derive(Debug, Clone, Default)]
pub struct BasisTree {
    adj: Vec<Vec<(usize, usize)>>,
    edges: Vec<Option<BasisEdge>>,
    free: Vec<usize>,
    live_edges: usize,
    // scratch for path searches
    prev: Vec<(usize, usize)>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl BasisTree {
    pub fn with_nodes(n: usize) -> Self {
        let mut t = BasisTree::default();
        t.ensure_node(n.saturating_sub(1));
        if n == 0 {
            t.adj.clear();
            t.prev.clear();
            t.stamp.clear();
        }
        t
    }

    pub fn ensure_node(&mut self, v: usize) {
        if v >= self.adj.len() {
            self.adj.resize_with(v + 1, Vec::new);
            self.prev.resize(v + 1, (usize::MAX, usize::MAX));
            self.stamp.resize(v + 1, 0);
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.live_edges
    }

    pub fn add_edge(&mut self, supply: usize, demand: usize, flow: f64) -> usize {
        self.ensure_node(supply.max(demand));
        let e = BasisEdge { supply, demand, flow };
        let id = match self.free.pop() {
            Some(id) => {
                self.edges[id] = Some(e);
                id
            }
            None => {
                self.edges.push(Some(e));
                self.edges.len() - 1
            }
        };
        self.adj[supply].push((demand, id));
        self.adj[demand].push((supply, id));
        self.live_edges += 1;
        id
    }

    pub fn remove_edge(&mut self, id: usize) -> BasisEdge {
        let e = self.edges[id].take().expect("edge present");
        self.adj[e.supply].retain(|&(_, eid)| eid != id);
        self.adj[e.demand].retain(|&(_, eid)| eid != id);
        self.free.push(id);
        self.live_edges -= 1;
        e
    }

    pub fn edge(&self, id: usize) -> &BasisEdge {
        self.edges[id].as_ref().expect("edge present")
    }

    pub fn edge_mut(&mut self, id: usize) -> &mut BasisEdge {
        self.edges[id].as_mut().expect("edge present")
    }

    pub fn find_edge(&self, u: usize, v: usize) -> Option<usize> {
        self.adj.get(u)?.iter().find(|&&(w, _)| w == v).map(|&(_, id)| id)
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, &BasisEdge)> {
        self.edges.iter().enumerate().filter_map(|(i, e)| e.as_ref().map(|e| (i, e)))
    }

    /// Tree path from `from` to `to`, as steps in walking order.
    pub fn path(&mut self, from: usize, to: usize) -> Option<Vec<PathStep>> {
        if from == to {
            return Some(Vec::new());
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        // search from `to` so the predecessor chain reads forward from `from`
        let mut queue = VecDeque::new();
        self.stamp[to] = epoch;
        queue.push_back(to);
        while let Some(x) = queue.pop_front() {
            if x == from {
                break;
            }
            for i in 0..self.adj[x].len() {
                let (y, e) = self.adj[x][i];
                if self.stamp[y] != epoch {
                    self.stamp[y] = epoch;
                    self.prev[y] = (x, e);
                    queue.push_back(y);
                }
            }
        }
        if self.stamp[from] != epoch {
            return None;
        }
        let mut steps = Vec::new();
        let mut x = from;
        while x != to {
            let (y, e) = self.prev[x];
            steps.push(PathStep { edge: e, from: x, to: y });
            x = y;
        }
        Some(steps)
    }

    /// Nodes reachable from `start` without crossing `blocked`.
    pub fn component(&self, start: usize, blocked: Option<usize>) -> Vec<usize> {
        let mut seen = vec![false; self.adj.len()];
        let mut out = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < out.len() {
            let x = out[i];
            i += 1;
            for &(y, e) in &self.adj[x] {
                if Some(e) != blocked && !seen[y] {
                    seen[y] = true;
                    out.push(y);
                }
            }
        }
        out
    }

    /// Checks the spanning-tree laws over the nodes `0..node_count()`.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        let n = self.adj.len();
        if n == 0 {
            return Ok(());
        }
        if self.live_edges != n - 1 {
            return Err(Error::NotATree(format!("{} edges on {} nodes", self.live_edges, n)));
        }
        if self.component(0, None).len() != n {
            return Err(Error::NotATree("disconnected".into()));
        }
        for (_, e) in self.edges() {
            if inst.node_id(e.supply).side != Side::Supply || inst.node_id(e.demand).side != Side::Demand {
                return Err(Error::NotATree(format!("edge {}-{} is not supply->demand", e.supply, e.demand)));
            }
            if e.flow < -EPS_FLOW {
                return Err(Error::NotATree(format!("negative flow {}", e.flow)));
            }
        }
        Ok(())
    }
}
