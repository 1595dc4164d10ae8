//! Weighted conflict graphs and independent-set solvers.
//!
//! Vertex ids are insertion indices. All solvers break ties toward the
//! lowest id so identical graphs always give identical answers.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

pub type VertexId = usize;

/// Largest graph [`brute_force_best`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex<P> {
    pub id: VertexId,
    pub payload: P,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGraph<P> {
    vertices: Vec<Vertex<P>>,
    adjacency: Vec<BTreeSet<VertexId>>,
}

impl<P> Default for ConflictGraph<P> {
    fn default() -> Self {
        Self {
            vertices: Vec::new(),
            adjacency: Vec::new(),
        }
    }
}

impl<P> ConflictGraph<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, payload: P, weight: f64) -> Result<VertexId> {
        if !weight.is_finite() {
            return Err(Error::NonFinite(format!("weight of vertex {}", self.vertices.len())));
        }
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, payload, weight });
        self.adjacency.push(BTreeSet::new());
        Ok(id)
    }

    pub fn add_edge(&mut self, a: VertexId, b: VertexId) -> Result<()> {
        if a == b {
            return Err(Error::Validation(format!("self-loop on vertex {a}")));
        }
        let n = self.vertices.len();
        if a >= n || b >= n {
            return Err(Error::Validation(format!("edge {a}-{b} references a missing vertex")));
        }
        self.adjacency[a].insert(b);
        self.adjacency[b].insert(a);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex<P>] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex<P> {
        &self.vertices[id]
    }

    pub fn neighbors(&self, id: VertexId) -> &BTreeSet<VertexId> {
        &self.adjacency[id]
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.adjacency.get(a).is_some_and(|s| s.contains(&b))
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.range(a + 1..).map(move |&b| (a, b)))
    }

    /// Build an [`IndependentSet`] from ids, summing weights in id order.
    pub fn set_of(&self, ids: impl IntoIterator<Item = VertexId>) -> IndependentSet {
        let ids: BTreeSet<VertexId> = ids.into_iter().collect();
        let total_weight = ids.iter().map(|&i| self.vertices[i].weight).sum();
        IndependentSet { ids, total_weight }
    }

    pub fn is_independent(&self, ids: &BTreeSet<VertexId>) -> bool {
        ids.iter()
            .all(|&a| a < self.len() && self.adjacency[a].is_disjoint(ids))
    }

    /// Independent and no outside vertex can be added.
    pub fn is_maximal(&self, ids: &BTreeSet<VertexId>) -> bool {
        self.is_independent(ids)
            && (0..self.len())
                .filter(|v| !ids.contains(v))
                .all(|v| !self.adjacency[v].is_disjoint(ids))
    }

    /// Edge-list dump: `#`-prefixed header and vertex weights, then one
    /// `a b` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# vertices {} edges {}\n", self.len(), self.num_edges());
        for v in &self.vertices {
            let _ = writeln!(out, "# v {} {}", v.id, v.weight);
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndependentSet {
    pub ids: BTreeSet<VertexId>,
    pub total_weight: f64,
}

impl IndependentSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Maximum total weight over all independent sets.
    Max,
    /// Minimum total weight over maximal independent sets.
    MinMaximal,
}

/// Exhaustive search. Ties go to the lexicographically smallest id set.
pub fn brute_force_best<P>(graph: &ConflictGraph<P>, objective: Objective) -> Result<IndependentSet> {
    let n = graph.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeBound {
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let nbr: Vec<u32> = (0..n)
        .map(|v| graph.neighbors(v).iter().fold(0u32, |m, &u| m | (1 << u)))
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut best: Option<(f64, Vec<VertexId>)> = None;
    for mask in 0..=full {
        let mut covered = 0u32;
        let mut ok = true;
        for (v, &nv) in nbr.iter().enumerate() {
            if mask & (1 << v) != 0 {
                if nv & mask != 0 {
                    ok = false;
                    break;
                }
                covered |= nv;
            }
        }
        if !ok {
            continue;
        }
        if objective == Objective::MinMaximal && (covered | mask) != full {
            continue;
        }
        let ids: Vec<VertexId> = (0..n).filter(|v| mask & (1 << v) != 0).collect();
        let w: f64 = ids.iter().map(|&i| graph.vertex(i).weight).sum();
        let better = match &best {
            None => true,
            Some((bw, bids)) => {
                let strictly = match objective {
                    Objective::Max => w > *bw,
                    Objective::MinMaximal => w < *bw,
                };
                strictly || (w == *bw && ids < *bids)
            }
        };
        if better {
            best = Some((w, ids));
        }
        if mask == full {
            break;
        }
    }
    let (_, ids) = best.unwrap_or_default();
    Ok(graph.set_of(ids))
}

/// Pick vertices in the given order, skipping any adjacent to a pick.
fn greedy_in_order<P>(graph: &ConflictGraph<P>, order: &[VertexId], cap: usize) -> IndependentSet {
    let mut blocked = vec![false; graph.len()];
    let mut picked = BTreeSet::new();
    for &v in order {
        if picked.len() >= cap {
            break;
        }
        if blocked[v] {
            continue;
        }
        picked.insert(v);
        blocked[v] = true;
        for &u in graph.neighbors(v) {
            blocked[u] = true;
        }
    }
    graph.set_of(picked)
}

/// Heaviest-first greedy; the result is a maximal independent set.
pub fn greedy_mwis<P>(graph: &ConflictGraph<P>) -> IndependentSet {
    let mut order: Vec<VertexId> = (0..graph.len()).collect();
    order.sort_by(|&a, &b| {
        graph
            .vertex(b)
            .weight
            .total_cmp(&graph.vertex(a).weight)
            .then(a.cmp(&b))
    });
    greedy_in_order(graph, &order, usize::MAX)
}

/// Lightest-first greedy, stopping at `max_size` picks or when nothing
/// else fits.
pub fn greedy_min_wis<P>(graph: &ConflictGraph<P>, max_size: usize) -> IndependentSet {
    let mut order: Vec<VertexId> = (0..graph.len()).collect();
    order.sort_by(|&a, &b| {
        graph
            .vertex(a)
            .weight
            .total_cmp(&graph.vertex(b).weight)
            .then(a.cmp(&b))
    });
    greedy_in_order(graph, &order, max_size.max(1))
}

/// Maximal independent set built in uniformly random order.
pub fn random_maximal<P, R: Rng + ?Sized>(graph: &ConflictGraph<P>, max_size: usize, rng: &mut R) -> IndependentSet {
    let mut order: Vec<VertexId> = (0..graph.len()).collect();
    order.shuffle(rng);
    greedy_in_order(graph, &order, max_size.max(1))
}
