//! Reference solvers and a dense mirror of the adjusted-cost structure.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::model::{Instance, NodeId, Side, TransportPlan, EPS_BAL};
use crate::sol::Key;

/// Default number of flow units per unit of weight in [`solve_ssp`].
pub const SSP_RESOLUTION: f64 = 1e12;

/// Dense mirror of the structure's bottom cells, updated eagerly.
#[derive(Debug, Clone, Default)]
pub struct DenseShadow {
    cells: HashMap<(Key, Key), f64>,
}

impl DenseShadow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cells(cells: impl IntoIterator<Item = (Key, Key, f64)>) -> Self {
        DenseShadow { cells: cells.into_iter().map(|(r, c, v)| ((r, c), v)).collect() }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, r: Key, c: Key) -> Option<f64> {
        self.cells.get(&(r, c)).copied()
    }

    pub fn set(&mut self, r: Key, c: Key, v: f64) {
        self.cells.insert((r, c), v);
    }

    /// Drops row and column `k`.
    pub fn remove_key(&mut self, k: Key) {
        self.cells.retain(|&(r, c), _| r != k && c != k);
    }

    /// Adds row and column `k` against the keys in `others`.
    pub fn add_key(&mut self, k: Key, others: &[Key], mut value: impl FnMut(Key, Key) -> f64) {
        for &o in others {
            if o != k {
                self.cells.insert((k, o), value(k, o));
                self.cells.insert((o, k), value(o, k));
            }
        }
        self.cells.insert((k, k), value(k, k));
    }

    pub fn range_add(&mut self, rows: &HashSet<Key>, cols: &HashSet<Key>, x: f64) {
        for (&(r, c), v) in self.cells.iter_mut() {
            if rows.contains(&r) && cols.contains(&c) {
                *v += x;
            }
        }
    }

    /// Minimum over `rows x cols`, ties broken by `(row, col)`.
    pub fn min(&self, rows: &HashSet<Key>, cols: &HashSet<Key>) -> Option<(f64, Key, Key)> {
        let mut best: Option<(f64, Key, Key)> = None;
        for (&(r, c), &v) in &self.cells {
            if !rows.contains(&r) || !cols.contains(&c) {
                continue;
            }
            let better = match best {
                None => true,
                Some((bv, br, bc)) => v < bv || (v == bv && (r, c) < (br, bc)),
            };
            if better {
                best = Some((v, r, c));
            }
        }
        best
    }

    /// Cells of `rows x cols` that differ from `observed` (or are missing
    /// from it), described for test output.
    pub fn diff(&self, rows: &HashSet<Key>, cols: &HashSet<Key>, observed: &[(Key, Key, f64)]) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for &(r, c, v) in observed {
            seen.insert((r, c));
            match self.get(r, c) {
                Some(w) if w == v || (w - v).abs() <= 1e-9 * (1.0 + w.abs()) => {}
                Some(w) => out.push(format!("cell ({r}, {c}): structure {v}, shadow {w}")),
                None => out.push(format!("cell ({r}, {c}) is not in the shadow")),
            }
        }
        for &(r, c) in self.cells.keys() {
            if rows.contains(&r) && cols.contains(&c) && !seen.contains(&(r, c)) {
                out.push(format!("cell ({r}, {c}) missing from the structure"));
            }
        }
        out
    }
}

/// Rounds weights to integers at `resolution` units per unit of mass; the
/// largest supply absorbs the rounding so the sides balance exactly.
fn integer_weights(inst: &Instance, ids: &[NodeId], resolution: f64) -> Vec<i64> {
    let mut w: Vec<i64> = ids.iter().map(|&v| (inst.weight(v).abs() * resolution).round() as i64).collect();
    let (mut sup, mut dem) = (0i64, 0i64);
    let mut big: Option<usize> = None;
    for (i, &v) in ids.iter().enumerate() {
        if v.side == Side::Supply {
            sup += w[i];
            if big.is_none_or(|b| w[i] > w[b]) {
                big = Some(i);
            }
        } else {
            dem += w[i];
        }
    }
    if let Some(b) = big {
        w[b] = (w[b] + dem - sup).max(0);
    }
    w
}

/// Successive shortest paths with node potentials on the complete bipartite
/// graph. Weights are scaled to integers at `resolution` per unit; costs stay
/// floating point. Returns the plan in weight units and its cost.
pub fn solve_ssp_with(inst: &Instance, resolution: f64) -> Result<(TransportPlan, f64)> {
    if !inst.check_balance() {
        return Err(Error::Unbalanced(inst.weight_sum()));
    }
    let sup: Vec<NodeId> = inst.side_ids(Side::Supply).collect();
    let dem: Vec<NodeId> = inst.side_ids(Side::Demand).collect();
    let (na, nb) = (sup.len(), dem.len());
    let mut plan = TransportPlan::new();
    if na == 0 || nb == 0 {
        return Ok((plan, 0.0));
    }
    let ids: Vec<NodeId> = sup.iter().chain(dem.iter()).copied().collect();
    let units = integer_weights(inst, &ids, resolution);
    let mut excess: Vec<i64> = units[..na].to_vec();
    let mut deficit: Vec<i64> = units[na..].to_vec();
    let cost: Vec<f64> = sup.iter().flat_map(|a| dem.iter().map(move |b| inst.metric(a.idx(), b.idx()))).collect();
    let c = |i: usize, j: usize| cost[i * nb + j];
    let mut flow = vec![0i64; na * nb];
    // potentials: supplies 0, demands at their cheapest incoming arc
    let mut pa = vec![0.0; na];
    let mut pb: Vec<f64> = (0..nb).map(|j| (0..na).map(|i| c(i, j)).fold(f64::INFINITY, f64::min)).collect();
    let n = na + nb;
    let mut dist = vec![0.0; n];
    let mut done = vec![false; n];
    let mut prev = vec![usize::MAX; n];
    while excess.iter().any(|&e| e > 0) {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        done.iter_mut().for_each(|d| *d = false);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        for i in 0..na {
            if excess[i] > 0 {
                dist[i] = 0.0;
            }
        }
        let target = loop {
            let mut best = usize::MAX;
            for v in 0..n {
                if !done[v] && dist[v].is_finite() && (best == usize::MAX || dist[v] < dist[best]) {
                    best = v;
                }
            }
            if best == usize::MAX {
                return Err(Error::InternalInvariantViolation("no augmenting path".into()));
            }
            done[best] = true;
            if best >= na {
                let j = best - na;
                if deficit[j] > 0 {
                    break best;
                }
                for i in 0..na {
                    if flow[i * nb + j] > 0 && !done[i] {
                        let d = dist[best] + (-c(i, j) + pb[j] - pa[i]).max(0.0);
                        if d < dist[i] {
                            dist[i] = d;
                            prev[i] = best;
                        }
                    }
                }
            } else {
                let i = best;
                for j in 0..nb {
                    if !done[na + j] {
                        let d = dist[i] + (c(i, j) + pa[i] - pb[j]).max(0.0);
                        if d < dist[na + j] {
                            dist[na + j] = d;
                            prev[na + j] = i;
                        }
                    }
                }
            }
        };
        let dt = dist[target];
        for i in 0..na {
            pa[i] += dist[i].min(dt);
        }
        for j in 0..nb {
            pb[j] += dist[na + j].min(dt);
        }
        // bottleneck along the path back to a source
        let mut amount = deficit[target - na];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= na {
                amount = amount.min(flow[v * nb + (u - na)]);
            }
            v = u;
        }
        amount = amount.min(excess[v]);
        let source = v;
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < na {
                flow[u * nb + (v - na)] += amount;
            } else {
                flow[v * nb + (u - na)] -= amount;
            }
            v = u;
        }
        excess[source] -= amount;
        deficit[target - na] -= amount;
    }
    let mut total = 0.0;
    for i in 0..na {
        for j in 0..nb {
            let x = flow[i * nb + j];
            if x > 0 {
                let f = x as f64 / resolution;
                plan.insert(sup[i], dem[j], f);
                total += c(i, j) * f;
            }
        }
    }
    Ok((plan, total))
}

/// [`solve_ssp_with`] at [`SSP_RESOLUTION`].
pub fn solve_ssp(inst: &Instance) -> Result<(TransportPlan, f64)> {
    solve_ssp_with(inst, SSP_RESOLUTION)
}

/// Brute force over every spanning tree of the complete bipartite graph:
/// each tree fixes a unique flow, and the cheapest nonnegative one wins.
pub fn enumerate_tiny(inst: &Instance) -> Result<f64> {
    let sup: Vec<NodeId> = inst.side_ids(Side::Supply).collect();
    let dem: Vec<NodeId> = inst.side_ids(Side::Demand).collect();
    let (na, nb) = (sup.len(), dem.len());
    if na > 4 || nb > 4 {
        return Err(Error::TooLarge(na, nb));
    }
    if !inst.check_balance() {
        return Err(Error::Unbalanced(inst.weight_sum()));
    }
    if na == 0 || nb == 0 {
        return Ok(0.0);
    }
    let n = na + nb;
    let arcs: Vec<(usize, usize)> = (0..na).flat_map(|i| (0..nb).map(move |j| (i, j))).collect();
    let weight: Vec<f64> = sup.iter().chain(dem.iter()).map(|&v| inst.weight(v)).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(n - 1);
    for mask in 0u32..(1u32 << arcs.len()) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        chosen.clear();
        chosen.extend((0..arcs.len()).filter(|k| mask >> k & 1 == 1).map(|k| arcs[k]));
        if let Some(cost) = tree_flow_cost(inst, &sup, &dem, &weight, &chosen) {
            best = best.min(cost);
        }
    }
    if best.is_infinite() {
        return Err(Error::InternalInvariantViolation("no feasible spanning tree".into()));
    }
    Ok(best)
}

/// Peels leaves to get the unique flow of a spanning tree; `None` when the
/// arcs do not form a tree or a flow comes out negative.
fn tree_flow_cost(inst: &Instance, sup: &[NodeId], dem: &[NodeId], weight: &[f64], arcs: &[(usize, usize)]) -> Option<f64> {
    let na = sup.len();
    let n = na + dem.len();
    let mut deg = vec![0usize; n];
    for &(i, j) in arcs {
        deg[i] += 1;
        deg[na + j] += 1;
    }
    if deg.contains(&0) {
        return None;
    }
    let mut rest = weight.to_vec();
    let mut used = vec![false; arcs.len()];
    let mut cost = 0.0;
    for _ in 0..arcs.len() {
        let (k, leaf) = arcs.iter().enumerate().find_map(|(k, &(i, j))| {
            if used[k] {
                None
            } else if deg[i] == 1 {
                Some((k, i))
            } else if deg[na + j] == 1 {
                Some((k, na + j))
            } else {
                None
            }
        })?;
        used[k] = true;
        let (i, j) = arcs[k];
        // supply leaf sends its remainder out; demand leaf receives its remainder
        let f = if leaf < na { rest[leaf] } else { -rest[leaf] };
        if f < -EPS_BAL {
            return None;
        }
        rest[i] -= f;
        rest[na + j] += f;
        deg[i] -= 1;
        deg[na + j] -= 1;
        cost += f.max(0.0) * inst.metric(sup[i].idx(), dem[j].idx());
    }
    // a cycle leaves some node with unmet weight or some arc unused
    if used.iter().any(|u| !u) || rest.iter().any(|r| r.abs() > 1e-9) {
        return None;
    }
    Some(cost)
}
