//! Random instances and random valid update streams.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamic::{signed_clamp, UpdateEvent};
use crate::model::{CostFn, Instance, NodeId, Side};

/// Gaussian mixture with `clusters` unit-variance components whose centers
/// are drawn with spread 3 per axis; supplies and demands sample the same
/// mixture. Weights are uniform per side.
pub fn gaussian_mixture(n_supply: usize, n_demand: usize, dim: usize, clusters: usize, seed: u64) -> Instance {
    gaussian_mixture_labeled(n_supply, n_demand, dim, clusters, seed).instance
}

/// A sampled mixture with its component centers and the component of each
/// node, in node order.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub instance: Instance,
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn gaussian_mixture_labeled(n_supply: usize, n_demand: usize, dim: usize, clusters: usize, seed: u64) -> Mixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let clusters = clusters.max(1);
    let centers: Vec<Vec<f64>> =
        (0..clusters).map(|_| (0..dim).map(|_| 3.0 * unit.sample(&mut rng)).collect()).collect();
    let mut labels = Vec::with_capacity(n_supply + n_demand);
    let mut point = |rng: &mut ChaCha8Rng| {
        let k = rng.random_range(0..clusters);
        labels.push(k);
        centers[k].iter().map(|&m| m + unit.sample(rng)).collect::<Vec<f64>>()
    };
    let supply: Vec<_> = (0..n_supply).map(|_| (point(&mut rng), 1.0 / n_supply as f64)).collect();
    let demand: Vec<_> = (0..n_demand).map(|_| (point(&mut rng), 1.0 / n_demand as f64)).collect();
    let instance = Instance::from_marginals(dim, supply, demand, CostFn::SquaredEuclidean).expect("valid mixture");
    Mixture { instance, centers, labels }
}

/// Uniform points in the unit cube with random normalized weights.
pub fn random_instance(rng: &mut impl Rng, n_supply: usize, n_demand: usize, dim: usize) -> Instance {
    let mut side = |k: usize| {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| ((0..dim).map(|_| rng.random::<f64>()).collect(), w / total)).collect::<Vec<_>>()
    };
    let supply = side(n_supply);
    let demand = side(n_demand);
    Instance::from_marginals(dim, supply, demand, CostFn::SquaredEuclidean).expect("valid instance")
}

/// Relative frequency of each event kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventMix {
    pub moves: f64,
    pub shifts: f64,
    pub inserts: f64,
    pub deletes: f64,
    pub queries: f64,
}

impl EventMix {
    pub const MOVES: EventMix = EventMix { moves: 1.0, shifts: 0.0, inserts: 0.0, deletes: 0.0, queries: 0.0 };
    pub const SHIFTS: EventMix = EventMix { moves: 0.0, shifts: 1.0, inserts: 0.0, deletes: 0.0, queries: 0.0 };
    pub const INSERTS: EventMix = EventMix { moves: 0.0, shifts: 0.0, inserts: 1.0, deletes: 0.0, queries: 0.0 };
    pub const MIXED: EventMix = EventMix { moves: 0.35, shifts: 0.3, inserts: 0.1, deletes: 0.1, queries: 0.15 };
}

impl Default for EventMix {
    fn default() -> Self {
        EventMix::MIXED
    }
}

/// Emits events that are valid for a solver that started from the given
/// instance and has applied every earlier event. It mirrors the solver's
/// bookkeeping: weights, the pool, and the ids handed to inserted points.
#[derive(Debug, Clone)]
pub struct StreamGen {
    rng: ChaCha8Rng,
    dim: usize,
    sides: Vec<Side>,
    weights: Vec<f64>,
    coords: Vec<Vec<f64>>,
    pooled: Vec<bool>,
    noise: Normal<f64>,
    mix: EventMix,
    /// Chance that a shift drains its source completely.
    pub drain_prob: f64,
}

impl StreamGen {
    pub fn new(inst: &Instance, mix: EventMix, noise_var: f64, seed: u64) -> Self {
        let ids: Vec<NodeId> = inst.node_ids().collect();
        StreamGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dim: inst.dim(),
            sides: ids.iter().map(|v| v.side).collect(),
            weights: inst.weights(),
            coords: ids.iter().map(|&v| inst.coords(v).to_vec()).collect(),
            pooled: vec![false; ids.len()],
            noise: Normal::new(0.0, noise_var.max(0.0).sqrt()).expect("valid noise"),
            mix,
            drain_prob: 0.2,
        }
    }

    fn id(&self, i: usize) -> NodeId {
        NodeId { index: i as u32, side: self.sides[i] }
    }

    fn live(&self) -> Vec<usize> {
        (0..self.sides.len()).filter(|&i| !self.pooled[i]).collect()
    }

    pub fn next_event(&mut self) -> UpdateEvent {
        let m = self.mix;
        let total = m.moves + m.shifts + m.inserts + m.deletes + m.queries;
        for _ in 0..8 {
            let mut x = self.rng.random::<f64>() * total;
            let picked = [m.moves, m.shifts, m.inserts, m.deletes, m.queries]
                .iter()
                .position(|&w| {
                    x -= w;
                    x < 0.0
                })
                .unwrap_or(4);
            let ev = match picked {
                0 => self.gen_move(),
                1 => self.gen_shift(),
                2 => self.gen_insert(),
                3 => self.gen_delete(),
                _ => Some(UpdateEvent::Query),
            };
            if let Some(ev) = ev {
                return ev;
            }
        }
        UpdateEvent::Query
    }

    pub fn events(&mut self, count: usize) -> Vec<UpdateEvent> {
        (0..count).map(|_| self.next_event()).collect()
    }

    fn gen_move(&mut self) -> Option<UpdateEvent> {
        let live = self.live();
        let &i = live.choose(&mut self.rng)?;
        let coords: Vec<f64> = self.coords[i].iter().map(|&c| c + self.noise.sample(&mut self.rng)).collect();
        self.coords[i] = coords.clone();
        Some(UpdateEvent::Move { v: self.id(i), coords })
    }

    fn gen_shift(&mut self) -> Option<UpdateEvent> {
        let live = self.live();
        if live.len() < 2 {
            return None;
        }
        let &u = live.choose(&mut self.rng)?;
        let &v = live.choose(&mut self.rng)?;
        if u == v {
            return None;
        }
        // largest amount that keeps both signs
        let mut cap = f64::INFINITY;
        if self.sides[u] == Side::Supply {
            cap = cap.min(self.weights[u]);
        }
        if self.sides[v] == Side::Demand {
            cap = cap.min(-self.weights[v]);
        }
        let drain = cap.is_finite() && self.rng.random::<f64>() < self.drain_prob;
        let delta = if drain {
            cap
        } else {
            let spread = (self.weights[u] - self.weights[v]).abs().max(1e-3);
            (0.01 * spread * self.rng.random::<f64>()).min(cap)
        };
        if delta.is_nan() || delta <= 1e-12 {
            return None;
        }
        self.weights[u] = signed_clamp(self.sides[u], self.weights[u] - delta)?;
        self.weights[v] = signed_clamp(self.sides[v], self.weights[v] + delta)?;
        Some(UpdateEvent::Shift { u: self.id(u), v: self.id(v), delta })
    }

    fn gen_insert(&mut self) -> Option<UpdateEvent> {
        let side = if self.rng.random::<bool>() { Side::Supply } else { Side::Demand };
        let live = self.live();
        let &anchor = live.choose(&mut self.rng)?;
        let coords: Vec<f64> = self.coords[anchor].iter().map(|&c| c + self.noise.sample(&mut self.rng)).collect();
        let donors: Vec<usize> = (0..self.sides.len())
            .filter(|&i| self.sides[i] == side && !self.pooled[i] && self.weights[i] != 0.0)
            .collect();
        let available: f64 = donors.iter().map(|&i| self.weights[i].abs()).sum();
        let weight = if self.rng.random::<bool>() { 0.0 } else { 0.2 * available * self.rng.random::<f64>() };
        let id = match (0..self.sides.len()).find(|&i| self.sides[i] == side && self.pooled[i]) {
            Some(i) => {
                self.pooled[i] = false;
                self.coords[i] = coords.clone();
                i
            }
            None => {
                if !self.sides.contains(&side.opposite()) {
                    return None;
                }
                self.sides.push(side);
                self.weights.push(0.0);
                self.coords.push(coords.clone());
                self.pooled.push(false);
                self.sides.len() - 1
            }
        };
        let mut rest = weight;
        for d in donors {
            if rest <= 0.0 {
                break;
            }
            let take = rest.min(self.weights[d].abs());
            let (from, to) = if side == Side::Supply { (d, id) } else { (id, d) };
            self.weights[from] = signed_clamp(self.sides[from], self.weights[from] - take)?;
            self.weights[to] = signed_clamp(self.sides[to], self.weights[to] + take)?;
            rest -= take;
        }
        Some(UpdateEvent::Insert { side, coords, weight })
    }

    fn gen_delete(&mut self) -> Option<UpdateEvent> {
        let zero: Vec<usize> = self.live().into_iter().filter(|&i| self.weights[i] == 0.0).collect();
        let &i = zero.choose(&mut self.rng)?;
        // keep at least one live node per side
        let side_live = self.live().into_iter().filter(|&j| self.sides[j] == self.sides[i]).count();
        if side_live <= 1 {
            return None;
        }
        self.pooled[i] = true;
        Some(UpdateEvent::Delete { v: self.id(i) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_means_sit_near_their_centers() {
        let dim = 784;
        let m = gaussian_mixture_labeled(100, 100, dim, 2, 5);
        for (k, center) in m.centers.iter().enumerate() {
            let members: Vec<NodeId> =
                m.instance.node_ids().zip(&m.labels).filter(|(_, &l)| l == k).map(|(v, _)| v).collect();
            let n = members.len() as f64;
            assert!(n > 0.0);
            let sq: f64 = (0..dim)
                .map(|d| {
                    let mean = members.iter().map(|&v| m.instance.coords(v)[d]).sum::<f64>() / n;
                    (mean - center[d]).powi(2)
                })
                .sum();
            // root-mean-square error per axis, against 3 sigma / sqrt(n)
            assert!((sq / dim as f64).sqrt() <= 3.0 / n.sqrt(), "cluster {k}");
        }
    }

    #[test]
    fn labeled_and_plain_mixtures_agree() {
        let a = gaussian_mixture(7, 9, 3, 2, 11);
        let b = gaussian_mixture_labeled(7, 9, 3, 2, 11);
        assert_eq!(a, b.instance);
        assert_eq!(b.labels.len(), 16);
    }
}
