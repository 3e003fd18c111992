//! Euler tour representation of a forest: every vertex contributes a
//! self-loop, every tree edge two opposite arcs, and each tree is one cyclic
//! sequence. Cut and link are constant-time list splices; element ids stay
//! stable across both.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::BasisTree;

pub type ElemId = u32;
pub const NO_ELEM: ElemId = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TourElement {
    SelfLoop(usize),
    Arc(usize, usize),
}

impl TourElement {
    pub fn tail(self) -> usize {
        match self {
            TourElement::SelfLoop(v) | TourElement::Arc(v, _) => v,
        }
    }

    pub fn head(self) -> usize {
        match self {
            TourElement::SelfLoop(v) | TourElement::Arc(_, v) => v,
        }
    }
}

/// Handle to one cyclic tour (any of its elements).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tour(pub ElemId);

#[derive(Debug, Clone)]
struct Slot {
    kind: TourElement,
    next: ElemId,
    prev: ElemId,
}

#[derive(Debug, Clone, Default)]
pub struct EulerForest {
    slots: Vec<Option<Slot>>,
    free: Vec<ElemId>,
    self_loops: Vec<ElemId>,
    arcs: HashMap<(usize, usize), ElemId>,
}

impl EulerForest {
    pub fn new() -> Self {
        Self::default()
    }

    fn alloc(&mut self, kind: TourElement) -> ElemId {
        let slot = Slot { kind, next: NO_ELEM, prev: NO_ELEM };
        let id = match self.free.pop() {
            Some(id) => {
                self.slots[id as usize] = Some(slot);
                id
            }
            None => {
                self.slots.push(Some(slot));
                (self.slots.len() - 1) as ElemId
            }
        };
        match kind {
            TourElement::SelfLoop(v) => {
                if v >= self.self_loops.len() {
                    self.self_loops.resize(v + 1, NO_ELEM);
                }
                self.self_loops[v] = id;
            }
            TourElement::Arc(u, v) => {
                self.arcs.insert((u, v), id);
            }
        }
        id
    }

    fn release(&mut self, id: ElemId) {
        let slot = self.slots[id as usize].take().expect("live element");
        match slot.kind {
            TourElement::SelfLoop(v) => self.self_loops[v] = NO_ELEM,
            TourElement::Arc(u, v) => {
                self.arcs.remove(&(u, v));
            }
        }
        self.free.push(id);
    }

    fn slot(&self, id: ElemId) -> &Slot {
        self.slots[id as usize].as_ref().expect("live element")
    }

    fn slot_mut(&mut self, id: ElemId) -> &mut Slot {
        self.slots[id as usize].as_mut().expect("live element")
    }

    fn join(&mut self, a: ElemId, b: ElemId) {
        self.slot_mut(a).next = b;
        self.slot_mut(b).prev = a;
    }

    /// Upper bound on element ids handed out so far.
    pub fn id_bound(&self) -> usize {
        self.slots.len()
    }

    pub fn contains(&self, id: ElemId) -> bool {
        self.slots.get(id as usize).is_some_and(|s| s.is_some())
    }

    /// Adds an isolated vertex as a one-element tour.
    pub fn add_vertex(&mut self, v: usize) -> Result<Tour> {
        if self.self_loop(v).is_some() {
            return Err(Error::DuplicateNode(v as u32));
        }
        let id = self.alloc(TourElement::SelfLoop(v));
        self.join(id, id);
        Ok(Tour(id))
    }

    /// Builds the tour of a spanning tree over `0..tree.node_count()` by a
    /// depth-first walk from vertex 0, visiting children by increasing id.
    pub fn build_from_tree(tree: &BasisTree) -> Result<(EulerForest, Option<Tour>)> {
        let n = tree.node_count();
        let mut forest = EulerForest::new();
        if n == 0 {
            return Ok((forest, None));
        }
        if tree.edge_count() != n - 1 {
            return Err(Error::NotATree(format!("{} edges on {} vertices", tree.edge_count(), n)));
        }
        let mut order = Vec::with_capacity(3 * n - 2);
        let mut seen = vec![false; n];
        // (vertex, parent, next child cursor)
        let mut stack: Vec<(usize, usize, usize)> = vec![(0, usize::MAX, 0)];
        let sorted: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                let mut c: Vec<usize> = tree.neighbors(v).iter().map(|&(w, _)| w).collect();
                c.sort_unstable();
                c
            })
            .collect();
        seen[0] = true;
        order.push(TourElement::SelfLoop(0));
        while let Some(top) = stack.last_mut() {
            let (v, parent, cursor) = *top;
            if cursor < sorted[v].len() {
                top.2 += 1;
                let c = sorted[v][cursor];
                if c == parent {
                    continue;
                }
                if seen[c] {
                    return Err(Error::NotATree("cycle".into()));
                }
                seen[c] = true;
                order.push(TourElement::Arc(v, c));
                order.push(TourElement::SelfLoop(c));
                stack.push((c, v, 0));
            } else {
                stack.pop();
                if parent != usize::MAX {
                    order.push(TourElement::Arc(v, parent));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::NotATree("disconnected".into()));
        }
        let ids: Vec<ElemId> = order.iter().map(|&k| forest.alloc(k)).collect();
        for i in 0..ids.len() {
            forest.join(ids[i], ids[(i + 1) % ids.len()]);
        }
        Ok((forest, Some(Tour(ids[0]))))
    }

    pub fn kind(&self, id: ElemId) -> TourElement {
        self.slot(id).kind
    }

    pub fn next(&self, id: ElemId) -> ElemId {
        self.slot(id).next
    }

    pub fn prev(&self, id: ElemId) -> ElemId {
        self.slot(id).prev
    }

    pub fn self_loop(&self, v: usize) -> Option<ElemId> {
        self.self_loops.get(v).copied().filter(|&id| id != NO_ELEM)
    }

    pub fn arc(&self, u: usize, v: usize) -> Option<ElemId> {
        self.arcs.get(&(u, v)).copied()
    }

    pub fn tour_of(&self, v: usize) -> Option<Tour> {
        self.self_loop(v).map(Tour)
    }

    /// Elements of the tour starting at its handle.
    pub fn iter(&self, tour: Tour) -> TourIter<'_> {
        TourIter { forest: self, start: tour.0, cur: Some(tour.0) }
    }

    pub fn len(&self, tour: Tour) -> usize {
        self.iter(tour).count()
    }

    pub fn same_tour(&self, a: ElemId, b: ElemId) -> bool {
        self.iter(Tour(a)).any(|e| e == b)
    }

    /// Vertices of the tour in self-loop order.
    pub fn vertices(&self, tour: Tour) -> Vec<usize> {
        self.iter(tour)
            .filter_map(|e| match self.kind(e) {
                TourElement::SelfLoop(v) => Some(v),
                TourElement::Arc(..) => None,
            })
            .collect()
    }

    /// Closest self-loop at or before `id` in cyclic order.
    pub fn self_loop_at_or_before(&self, id: ElemId) -> ElemId {
        let mut e = id;
        loop {
            if matches!(self.kind(e), TourElement::SelfLoop(_)) {
                return e;
            }
            e = self.prev(e);
            assert_ne!(e, id, "tour without self-loops");
        }
    }

    /// Elements from `from` to `to` inclusive, in cyclic order.
    pub fn range(&self, from: ElemId, to: ElemId) -> Result<Vec<ElemId>> {
        if !self.contains(from) {
            return Err(Error::ElementNotFound(from));
        }
        if !self.contains(to) {
            return Err(Error::ElementNotFound(to));
        }
        let mut out = vec![from];
        let mut e = from;
        while e != to {
            e = self.next(e);
            if e == from {
                return Err(Error::ElementNotFound(to));
            }
            out.push(e);
        }
        Ok(out)
    }

    /// Removes both arcs of `{u, v}`. Returns the tours of the component of
    /// `u` and of `v`, handled by their self-loops.
    pub fn cut(&mut self, u: usize, v: usize) -> Result<(Tour, Tour)> {
        let (uv, vu) = match (self.arc(u, v), self.arc(v, u)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::EdgeNotFound(u, v)),
        };
        let (p, n) = (self.prev(uv), self.next(uv));
        let (q, m) = (self.prev(vu), self.next(vu));
        // ... p (u,v) n .. q (v,u) m ...  ->  [m .. p] and [n .. q]
        self.join(p, m);
        self.join(q, n);
        self.release(uv);
        self.release(vu);
        let su = self.self_loop(u).expect("vertex present");
        let sv = self.self_loop(v).expect("vertex present");
        Ok((Tour(su), Tour(sv)))
    }

    /// Joins the tours of `u` and `v` by the edge `{u, v}`: `(u,v)` goes right
    /// after `(u,u)` and `(v,u)` right after `(v,v)`.
    pub fn link(&mut self, u: usize, v: usize) -> Result<Tour> {
        let su = self.self_loop(u).ok_or(Error::ElementNotFound(u as u32))?;
        let sv = self.self_loop(v).ok_or(Error::ElementNotFound(v as u32))?;
        if self.same_tour(su, sv) {
            return Err(Error::WouldCreateCycle(u, v));
        }
        Ok(self.link_unchecked(u, v))
    }

    /// `link` without the connectivity check, for callers that know the
    /// endpoints sit in different tours.
    pub fn link_unchecked(&mut self, u: usize, v: usize) -> Tour {
        let su = self.self_loop(u).expect("vertex present");
        let sv = self.self_loop(v).expect("vertex present");
        let (su_next, sv_next) = (self.next(su), self.next(sv));
        let uv = self.alloc(TourElement::Arc(u, v));
        let vu = self.alloc(TourElement::Arc(v, u));
        self.join(su, uv);
        self.join(uv, sv_next);
        self.join(sv, vu);
        self.join(vu, su_next);
        Tour(su)
    }

    /// Drops an isolated vertex.
    pub fn remove_vertex(&mut self, v: usize) -> Result<()> {
        let s = self.self_loop(v).ok_or(Error::ElementNotFound(v as u32))?;
        if self.next(s) != s {
            return Err(Error::InternalInvariantViolation(format!("vertex {v} is not isolated")));
        }
        self.release(s);
        Ok(())
    }

    /// Checks the Euler-tour laws for one tour: consecutive elements share
    /// their middle vertex, one self-loop per vertex, both arcs of each edge,
    /// and `len = 3|V| - 2`. Returns the vertex count.
    pub fn validate(&self, tour: Tour) -> Result<usize> {
        let elems: Vec<ElemId> = self.iter(tour).collect();
        let mut loops = 0usize;
        let mut arcs = 0usize;
        for (i, &e) in elems.iter().enumerate() {
            let next = elems[(i + 1) % elems.len()];
            if self.prev(next) != e {
                return Err(Error::InternalInvariantViolation("broken back link".into()));
            }
            if self.kind(e).head() != self.kind(next).tail() {
                return Err(Error::InternalInvariantViolation(format!(
                    "{:?} is followed by {:?}",
                    self.kind(e),
                    self.kind(next)
                )));
            }
            match self.kind(e) {
                TourElement::SelfLoop(v) => {
                    if self.self_loop(v) != Some(e) {
                        return Err(Error::InternalInvariantViolation(format!("stale self-loop {v}")));
                    }
                    loops += 1;
                }
                TourElement::Arc(u, v) => {
                    match self.arc(v, u) {
                        Some(back) if elems.contains(&back) => {}
                        _ => {
                            return Err(Error::InternalInvariantViolation(format!(
                                "arc ({u},{v}) has no reverse"
                            )))
                        }
                    }
                    arcs += 1;
                }
            }
        }
        if loops == 0 || elems.len() != 3 * loops - 2 || arcs != 2 * (loops - 1) {
            return Err(Error::InternalInvariantViolation(format!(
                "{} elements for {} vertices",
                elems.len(),
                loops
            )));
        }
        Ok(loops)
    }
}

pub struct TourIter<'a> {
    forest: &'a EulerForest,
    start: ElemId,
    cur: Option<ElemId>,
}

impl Iterator for TourIter<'_> {
    type Item = ElemId;

    fn next(&mut self) -> Option<ElemId> {
        let cur = self.cur?;
        let next = self.forest.next(cur);
        self.cur = (next != self.start).then_some(next);
        Some(cur)
    }
}
