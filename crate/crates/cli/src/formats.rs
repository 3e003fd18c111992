//! File formats: JSON instances, JSON-Lines update streams, CSV reports.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use dynot_core::{CostFn, Instance, NodeId, Side, UpdateEvent};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub id: u64,
    #[serde(default)]
    pub coords: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostSpec {
    Sqeuclidean,
    Euclidean,
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub dim: usize,
    pub supply: Vec<PointEntry>,
    pub demand: Vec<PointEntry>,
    pub cost: CostSpec,
    /// Multiplier applied to every cost; omitted when 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl InstanceFile {
    /// Ids follow node order: supplies first, then demands.
    pub fn from_instance(inst: &Instance) -> Self {
        let entries = |side| {
            inst.side_ids(side)
                .map(|v| PointEntry {
                    id: v.idx() as u64,
                    coords: inst.coords(v).to_vec(),
                    weight: inst.weight(v).abs(),
                })
                .collect()
        };
        let cost = match inst.cost_fn() {
            CostFn::SquaredEuclidean => CostSpec::Sqeuclidean,
            CostFn::Euclidean => CostSpec::Euclidean,
            CostFn::Explicit(m) => CostSpec::Explicit(m.clone()),
        };
        let scale = (inst.scale() != 1.0).then_some(inst.scale());
        InstanceFile {
            dim: inst.dim(),
            supply: entries(Side::Supply),
            demand: entries(Side::Demand),
            cost,
            scale,
        }
    }

    /// The instance and the map from file ids to its nodes.
    pub fn to_instance(&self) -> Result<(Instance, IdMap)> {
        let mut seen = HashSet::new();
        for e in self.supply.iter().chain(&self.demand) {
            if !seen.insert(e.id) {
                bail!("duplicate node id {}", e.id);
            }
        }
        let points = |entries: &[PointEntry]| {
            entries
                .iter()
                .map(|e| (e.coords.clone(), e.weight))
                .collect()
        };
        let mut inst = match &self.cost {
            CostSpec::Sqeuclidean => Instance::from_marginals(
                self.dim,
                points(&self.supply),
                points(&self.demand),
                CostFn::SquaredEuclidean,
            )?,
            CostSpec::Euclidean => Instance::from_marginals(
                self.dim,
                points(&self.supply),
                points(&self.demand),
                CostFn::Euclidean,
            )?,
            CostSpec::Explicit(m) => {
                let alpha: Vec<f64> = self.supply.iter().map(|e| e.weight).collect();
                let beta: Vec<f64> = self.demand.iter().map(|e| e.weight).collect();
                Instance::from_matrix(&alpha, &beta, m.clone())?
            }
        };
        if let Some(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                bail!("scale must be positive and finite, got {s}");
            }
            inst.set_scale(s);
        }
        if !inst.check_balance() {
            bail!(
                "weights do not balance (supply - demand = {:e})",
                inst.weight_sum()
            );
        }
        let ids = self.supply.iter().chain(&self.demand).map(|e| e.id);
        let map = IdMap::new(ids.zip(inst.node_ids()).collect());
        Ok((inst, map))
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// Tracks which file id names which node as nodes are deleted and inserted.
/// Inserted nodes get ids counting up from one past the largest id seen;
/// a node reused from the pool gets a new id and its old one goes away.
#[derive(Debug, Clone)]
pub struct IdMap {
    to_node: HashMap<u64, NodeId>,
    to_file: HashMap<NodeId, u64>,
    pooled: [BTreeSet<u32>; 2],
    node_count: u32,
    next: u64,
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::Supply => 0,
        Side::Demand => 1,
    }
}

impl IdMap {
    fn new(pairs: Vec<(u64, NodeId)>) -> Self {
        let next = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0);
        IdMap {
            to_file: pairs.iter().map(|&(f, v)| (v, f)).collect(),
            to_node: pairs.iter().copied().collect(),
            pooled: [BTreeSet::new(), BTreeSet::new()],
            node_count: pairs.len() as u32,
            next,
        }
    }

    pub fn node(&self, id: u64) -> Result<NodeId> {
        self.to_node
            .get(&id)
            .copied()
            .ok_or_else(|| anyhow!("unknown node id {id}"))
    }

    pub fn file_id(&self, v: NodeId) -> Result<u64> {
        self.to_file
            .get(&v)
            .copied()
            .ok_or_else(|| anyhow!("node {v:?} has no file id"))
    }

    pub fn deleted(&mut self, v: NodeId) {
        if let Some(f) = self.to_file.remove(&v) {
            self.to_node.remove(&f);
        }
        self.pooled[side_slot(v.side)].insert(v.index);
    }

    /// Node the solver hands out for the next insert on `side`.
    pub fn predict_insert(&self, side: Side) -> NodeId {
        match self.pooled[side_slot(side)].first() {
            Some(&index) => NodeId { index, side },
            None => NodeId {
                index: self.node_count,
                side,
            },
        }
    }

    pub fn inserted(&mut self, v: NodeId) -> u64 {
        if !self.pooled[side_slot(v.side)].remove(&v.index) {
            self.node_count = self.node_count.max(v.index + 1);
        }
        let id = self.next;
        self.next += 1;
        self.to_node.insert(id, v);
        self.to_file.insert(v, id);
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SideTag {
    A,
    B,
}

impl From<SideTag> for Side {
    fn from(s: SideTag) -> Side {
        match s {
            SideTag::A => Side::Supply,
            SideTag::B => Side::Demand,
        }
    }
}

impl From<Side> for SideTag {
    fn from(s: Side) -> SideTag {
        match s {
            Side::Supply => SideTag::A,
            Side::Demand => SideTag::B,
        }
    }
}

/// One line of an update stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum EventLine {
    Move {
        v: u64,
        coords: Vec<f64>,
    },
    Shift {
        u: u64,
        v: u64,
        delta: f64,
    },
    Insert {
        side: SideTag,
        coords: Vec<f64>,
        weight: f64,
    },
    Delete {
        v: u64,
    },
    Query,
}

impl EventLine {
    /// Resolves file ids. Does not update the map; call
    /// [`IdMap::deleted`] / [`IdMap::inserted`] once the event is applied.
    pub fn resolve(&self, ids: &IdMap) -> Result<UpdateEvent> {
        Ok(match self {
            EventLine::Move { v, coords } => UpdateEvent::Move {
                v: ids.node(*v)?,
                coords: coords.clone(),
            },
            EventLine::Shift { u, v, delta } => UpdateEvent::Shift {
                u: ids.node(*u)?,
                v: ids.node(*v)?,
                delta: *delta,
            },
            EventLine::Insert {
                side,
                coords,
                weight,
            } => UpdateEvent::Insert {
                side: (*side).into(),
                coords: coords.clone(),
                weight: *weight,
            },
            EventLine::Delete { v } => UpdateEvent::Delete { v: ids.node(*v)? },
            EventLine::Query => UpdateEvent::Query,
        })
    }

    /// Translates a solver event into file ids and advances the map.
    pub fn from_event(ev: &UpdateEvent, ids: &mut IdMap) -> Result<Self> {
        Ok(match ev {
            UpdateEvent::Move { v, coords } => EventLine::Move {
                v: ids.file_id(*v)?,
                coords: coords.clone(),
            },
            UpdateEvent::Shift { u, v, delta } => EventLine::Shift {
                u: ids.file_id(*u)?,
                v: ids.file_id(*v)?,
                delta: *delta,
            },
            UpdateEvent::Insert {
                side,
                coords,
                weight,
            } => {
                let v = ids.predict_insert(*side);
                ids.inserted(v);
                EventLine::Insert {
                    side: (*side).into(),
                    coords: coords.clone(),
                    weight: *weight,
                }
            }
            UpdateEvent::Delete { v } => {
                let id = ids.file_id(*v)?;
                ids.deleted(*v);
                EventLine::Delete { v: id }
            }
            UpdateEvent::Query => EventLine::Query,
        })
    }
}

/// Parses a whole stream; errors name the 1-based line.
pub fn parse_stream(text: &str) -> Result<Vec<EventLine>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(line).map_err(|e| anyhow!("line {}: {e}", i + 1))?;
        out.push(ev);
    }
    Ok(out)
}

pub fn write_stream(events: &[EventLine]) -> Result<String> {
    let mut out = String::new();
    for ev in events {
        writeln!(out, "{}", serde_json::to_string(ev)?)?;
    }
    Ok(out)
}

/// One row of a replay report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub event: usize,
    pub op: String,
    pub wall_ns: u128,
    pub pivots: usize,
    pub touched: u64,
    pub cost: f64,
    pub oracle_cost: Option<f64>,
    pub matches: Option<bool>,
}

pub fn write_report(path: &std::path::Path, rows: &[ReportRow]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
