//! Spatial graph data model.
//!
//! A [`SpatialGraph`] is a simple undirected graph whose nodes carry planar locations
//! (meters) plus household/workplace tags, and whose edges are labelled as family or
//! coworker contacts. Graphs are validated on construction and immutable afterwards;
//! transformations build new graphs.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::union_find::UnionFind;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub location: Point,
    pub household: u64,
    pub workplace: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Family,
    Coworker,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Family => "family",
            EdgeKind::Coworker => "coworker",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "family" => Ok(EdgeKind::Family),
            "coworker" => Ok(EdgeKind::Coworker),
            other => Err(Error::validation(format!("unknown edge kind {other:?}"))),
        }
    }
}

/// Undirected edge. Constructed through [`Edge::new`], which puts the endpoints in
/// canonical order `u <= v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId, kind: EdgeKind) -> Self {
        Edge {
            u: a.min(b),
            v: a.max(b),
            kind,
        }
    }

    pub fn key(&self) -> u64 {
        ((self.u as u64) << 32) | self.v as u64
    }
}

#[derive(Debug, Clone)]
pub struct SpatialGraph {
    nodes: Vec<NodeRecord>,
    edges: Vec<Edge>,
    study_area: Rect,
    // CSR adjacency, neighbours sorted ascending
    offsets: Vec<u32>,
    targets: Vec<NodeId>,
}

impl SpatialGraph {
    /// Validates and builds a graph. Edges are canonicalised; self-loops, duplicates
    /// (after canonicalisation), dangling endpoints, non-contiguous node ids, non-finite
    /// coordinates and nodes outside the study area are rejected.
    pub fn new(nodes: Vec<NodeRecord>, edges: Vec<Edge>, study_area: Rect) -> Result<Self> {
        for (i, node) in nodes.iter().enumerate() {
            if node.id as usize != i {
                return Err(Error::validation(format!(
                    "node ids must be contiguous 0..n-1: position {i} holds id {}",
                    node.id
                )));
            }
            if !node.location.is_finite() {
                return Err(Error::validation(format!(
                    "node {i} has a non-finite location {:?}",
                    node.location
                )));
            }
            if !study_area.contains(&node.location) {
                return Err(Error::validation(format!(
                    "node {i} at ({}, {}) lies outside the study area {study_area:?}",
                    node.location.x, node.location.y
                )));
            }
        }
        if nodes.len() > u32::MAX as usize {
            return Err(Error::validation("too many nodes"));
        }
        let n = nodes.len() as u64;
        let mut edges: Vec<Edge> = edges.into_iter().map(|e| Edge::new(e.u, e.v, e.kind)).collect();
        for e in &edges {
            if e.u == e.v {
                return Err(Error::validation(format!("self-loop at edge ({}, {})", e.u, e.v)));
            }
            if e.v as u64 >= n {
                return Err(Error::validation(format!(
                    "edge ({}, {}) references missing node {}",
                    e.u, e.v, e.v
                )));
            }
        }
        let mut keys: Vec<u64> = edges.iter().map(Edge::key).collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!(
                "duplicate edge after canonicalization: ({}, {})",
                w[0] >> 32,
                w[0] & 0xffff_ffff
            )));
        }
        edges.shrink_to_fit();
        Ok(Self::from_parts_unchecked(nodes, edges, study_area))
    }

    /// Builds the adjacency for parts already known to satisfy every invariant.
    pub(crate) fn from_parts_unchecked(nodes: Vec<NodeRecord>, edges: Vec<Edge>, study_area: Rect) -> Self {
        let n = nodes.len();
        let mut offsets = vec![0u32; n + 1];
        for e in &edges {
            offsets[e.u as usize + 1] += 1;
            offsets[e.v as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0; 2 * edges.len()];
        for e in &edges {
            targets[fill[e.u as usize] as usize] = e.v;
            fill[e.u as usize] += 1;
            targets[fill[e.v as usize] as usize] = e.u;
            fill[e.v as usize] += 1;
        }
        for i in 0..n {
            targets[offsets[i] as usize..offsets[i + 1] as usize].sort_unstable();
        }
        SpatialGraph {
            nodes,
            edges,
            study_area,
            offsets,
            targets,
        }
    }

    /// Same topology and tags, new node locations.
    pub fn with_locations(&self, locations: Vec<Point>) -> Result<Self> {
        if locations.len() != self.nodes.len() {
            return Err(Error::validation(format!(
                "expected {} locations, got {}",
                self.nodes.len(),
                locations.len()
            )));
        }
        let mut g = self.clone();
        for (node, loc) in g.nodes.iter_mut().zip(locations) {
            if !loc.is_finite() {
                return Err(Error::validation(format!("non-finite location {loc:?}")));
            }
            node.location = loc;
        }
        Ok(g)
    }

    /// Same nodes, new edge set (validated).
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        SpatialGraph::new(self.nodes.clone(), edges, self.study_area)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn study_area(&self) -> &Rect {
        &self.study_area
    }

    pub fn location(&self, i: NodeId) -> Point {
        self.nodes[i as usize].location
    }

    pub fn locations(&self) -> Vec<Point> {
        self.nodes.iter().map(|n| n.location).collect()
    }

    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        let i = i as usize;
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        let i = i as usize;
        (self.offsets[i + 1] - self.offsets[i]) as usize
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        let (s, t) = if self.degree(a) <= self.degree(b) {
            (a, b)
        } else {
            (b, a)
        };
        self.neighbors(s).binary_search(&t).is_ok()
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        (0..self.nodes.len() as NodeId).map(|i| self.degree(i)).collect()
    }

    /// `2|E| / n`, or 0 for an empty graph.
    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.nodes.len() as f64
        }
    }

    /// Euclidean distance between the endpoints of `e`.
    pub fn edge_distance(&self, e: &Edge) -> f64 {
        self.location(e.u).distance(&self.location(e.v))
    }

    pub fn edge_distances(&self) -> Vec<f64> {
        self.edges.iter().map(|e| self.edge_distance(e)).collect()
    }

    pub fn mean_edge_distance(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.edges.iter().map(|e| self.edge_distance(e)).sum::<f64>() / self.edges.len() as f64
    }

    /// Checks the observed-network invariants: members of one household share one
    /// location, and an edge is a family edge exactly when its endpoints share a
    /// household (family edges therefore have length zero).
    ///
    /// Null-model outputs do not satisfy this and are never checked.
    pub fn check_household_structure(&self) -> Result<()> {
        let mut home: HashMap<u64, Point> = HashMap::new();
        for node in &self.nodes {
            let loc = *home.entry(node.household).or_insert(node.location);
            if loc != node.location {
                return Err(Error::validation(format!(
                    "household {} members are not co-located (node {})",
                    node.household, node.id
                )));
            }
        }
        for e in &self.edges {
            let same = self.nodes[e.u as usize].household == self.nodes[e.v as usize].household;
            if same != (e.kind == EdgeKind::Family) {
                return Err(Error::validation(format!(
                    "edge ({}, {}) is labelled {} but the endpoints {} a household",
                    e.u,
                    e.v,
                    e.kind,
                    if same { "share" } else { "do not share" }
                )));
            }
        }
        Ok(())
    }

    pub fn connected_components(&self) -> ComponentLabeling {
        let n = self.nodes.len();
        let mut uf = UnionFind::new(n);
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        // labels in order of first appearance by node index
        let mut root_label = vec![u32::MAX; n];
        let mut labels = Vec::with_capacity(n);
        let mut sizes: Vec<usize> = Vec::new();
        for i in 0..n as u32 {
            let r = uf.find(i) as usize;
            if root_label[r] == u32::MAX {
                root_label[r] = sizes.len() as u32;
                sizes.push(0);
            }
            let l = root_label[r];
            sizes[l as usize] += 1;
            labels.push(l);
        }
        ComponentLabeling { labels, sizes }
    }
}

/// Partition of the nodes into maximal connected clusters.
///
/// `sizes[labels[i]]` counts node `i`; labels are numbered by first appearance in
/// node-id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn from_sizes(sizes: Vec<usize>) -> Self {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(l, &s)| std::iter::repeat_n(l as u32, s))
            .collect();
        ComponentLabeling { labels, sizes }
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Members of each component, ascending by node id.
    pub fn members(&self) -> Vec<Vec<NodeId>> {
        let mut out: Vec<Vec<NodeId>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i as NodeId);
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Graph with all nodes at the origin and household = node id.
    pub fn graph_from_pairs(n: usize, pairs: &[(u32, u32)]) -> SpatialGraph {
        let nodes = (0..n as u32)
            .map(|i| NodeRecord {
                id: i,
                location: Point::new(0.0, 0.0),
                household: i as u64,
                workplace: None,
            })
            .collect();
        let edges = pairs
            .iter()
            .map(|&(u, v)| Edge::new(u, v, EdgeKind::Coworker))
            .collect();
        SpatialGraph::new(nodes, edges, Rect::with_size(1.0, 1.0).unwrap()).unwrap()
    }

    pub fn complete(n: usize) -> SpatialGraph {
        let mut pairs = Vec::new();
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                pairs.push((u, v));
            }
        }
        graph_from_pairs(n, &pairs)
    }

    pub fn path(n: usize) -> SpatialGraph {
        let pairs: Vec<_> = (1..n as u32).map(|v| (v - 1, v)).collect();
        graph_from_pairs(n, &pairs)
    }
}
