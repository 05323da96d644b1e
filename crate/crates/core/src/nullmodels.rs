//! Reference networks: location shuffling (random node) and distance-binned edge
//! rewiring (random edge), plus seeded replicate ensembles.
//!
//! Rewiring is a double-edge swap chain. A proposal picks two edges `(a, b)`, `(c, d)`
//! and suggests `(a, d)`, `(c, b)`; it is accepted when all four endpoints differ,
//! neither new edge exists, and the distance-bin multiset of the pair is unchanged, with
//! `bin(d) = floor(d / bin_width)`. Degrees and binned distance counts are therefore
//! preserved exactly.
//!
//! Uniform pairs of edges in a spatial graph almost never satisfy the bin condition, so
//! most proposals are local: after drawing `(a, b)` the second edge is drawn from a node
//! `c` near `a` (same or adjacent cell of a square grid with side `local_radius`) and a
//! uniformly chosen edge at `c`. Locations and degrees do not change under a swap, so
//! the reverse move has the same proposal probability and the chain still targets the
//! uniform distribution over admissible graphs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::graph::{Edge, EdgeKind, SpatialGraph};
use crate::metrics::Summary;
use crate::rng::{mix, rng_from_seed, StageRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModelKind {
    RandomNode,
    RandomEdge,
}

impl NullModelKind {
    pub fn name(self) -> &'static str {
        match self {
            NullModelKind::RandomNode => "random_node",
            NullModelKind::RandomEdge => "random_edge",
        }
    }
}

/// How random-node assigns locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Permute the existing location multiset among nodes.
    #[default]
    Permute,
    /// Draw fresh locations uniformly in the study area.
    UniformRect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullModelConfig {
    pub kind: NullModelKind,
    pub bin_width: f64,
    /// Accepted swaps to perform; defaults to 10 |E|.
    pub swap_budget: Option<u64>,
    /// Proposal cap; defaults to 100 |E|.
    pub max_attempts: Option<u64>,
    pub master_seed: u64,
    pub placement: Placement,
    /// Share of proposals drawn locally; the rest pair two uniform edges.
    pub local_fraction: f64,
    /// Neighbourhood cell size for local proposals; defaults to `bin_width`.
    pub local_radius: Option<f64>,
    /// Acceptance rate over the final tenth of attempts below which the run is flagged
    /// as under-mixed.
    pub min_acceptance: f64,
}

impl Default for NullModelConfig {
    fn default() -> Self {
        NullModelConfig {
            kind: NullModelKind::RandomEdge,
            bin_width: 50.0,
            swap_budget: None,
            max_attempts: None,
            master_seed: 0,
            placement: Placement::Permute,
            local_fraction: 0.9,
            local_radius: None,
            min_acceptance: 0.001,
        }
    }
}

impl NullModelConfig {
    pub fn random_node(master_seed: u64) -> Self {
        NullModelConfig {
            kind: NullModelKind::RandomNode,
            master_seed,
            ..NullModelConfig::default()
        }
    }

    pub fn random_edge(master_seed: u64) -> Self {
        NullModelConfig {
            master_seed,
            ..NullModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::validation(format!(
                "bin_width must be positive, got {}",
                self.bin_width
            )));
        }
        if !(0.0..=1.0).contains(&self.local_fraction) {
            return Err(Error::validation(format!(
                "local_fraction must lie in [0, 1], got {}",
                self.local_fraction
            )));
        }
        if let Some(r) = self.local_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::validation(format!(
                    "local_radius must be positive, got {r}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.min_acceptance) {
            return Err(Error::validation(format!(
                "min_acceptance must lie in [0, 1], got {}",
                self.min_acceptance
            )));
        }
        Ok(())
    }
}

/// Seed of replicate `index` under `master_seed`.
pub fn replicate_seed(master_seed: u64, index: u64) -> u64 {
    mix(master_seed, index)
}

/// Same topology, locations permuted uniformly among nodes (Fisher-Yates).
pub fn random_node(g: &SpatialGraph, seed: u64) -> SpatialGraph {
    random_node_with(g, Placement::Permute, seed)
}

pub fn random_node_with(g: &SpatialGraph, placement: Placement, seed: u64) -> SpatialGraph {
    let mut rng = rng_from_seed(seed);
    let locations = match placement {
        Placement::Permute => {
            let mut locs = g.locations();
            locs.shuffle(&mut rng);
            locs
        }
        Placement::UniformRect => {
            let a = g.study_area();
            (0..g.node_count())
                .map(|_| Point::new(rng.random_range(a.xmin..a.xmax), rng.random_range(a.ymin..a.ymax)))
                .collect()
        }
    };
    g.with_locations(locations)
        .expect("locations are finite and node count is unchanged")
}

/// Bin of a distance under the rewiring constraint.
pub fn swap_bin(distance: f64, bin_width: f64) -> u32 {
    // truncation is floor for non-negative values and skips a libm call
    (distance / bin_width) as u32
}

/// Edge counts per rewiring bin, indexed by bin.
pub fn swap_bin_counts(g: &SpatialGraph, bin_width: f64) -> Vec<u64> {
    let mut counts = Vec::new();
    for d in g.edge_distances() {
        let b = swap_bin(d, bin_width) as usize;
        if counts.len() <= b {
            counts.resize(b + 1, 0);
        }
        counts[b] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewireStats {
    pub swap_budget: u64,
    pub max_attempts: u64,
    pub attempts: u64,
    pub accepted: u64,
    /// Acceptance rate over the final tenth of attempts.
    pub tail_acceptance: f64,
    pub under_mixed: bool,
}

impl RewireStats {
    pub fn warning(&self) -> Option<String> {
        self.under_mixed.then(|| {
            format!(
                "under-mixed rewiring: {} of {} swaps after {} attempts, final acceptance {:.6}",
                self.accepted, self.swap_budget, self.attempts, self.tail_acceptance
            )
        })
    }
}

/// Uniform grid of node buckets. Nodes are relabelled in bucket order, so a bucket is
/// a contiguous id range and neighbouring nodes sit close together in memory.
struct NodeGrid {
    x0: f64,
    y0: f64,
    side: f64,
    nx: usize,
    ny: usize,
    start: Vec<u32>,
    /// Original node id per relabelled id.
    members: Vec<u32>,
}

impl NodeGrid {
    fn new(locs: &[Point], side: f64) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in locs {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        // cap the bucket count so sparse or huge extents stay cheap
        let limit = 4 * locs.len().max(1);
        let mut side = side;
        while ((x1 - x0) / side + 1.0) * ((y1 - y0) / side + 1.0) > limit as f64 {
            side *= 2.0;
        }
        let nx = ((x1 - x0) / side).floor() as usize + 1;
        let ny = ((y1 - y0) / side).floor() as usize + 1;
        let mut grid = NodeGrid {
            x0,
            y0,
            side,
            nx,
            ny,
            start: vec![0; nx * ny + 1],
            members: vec![0; locs.len()],
        };
        let cells: Vec<usize> = locs.iter().map(|p| grid.cell(p)).collect();
        for &c in &cells {
            grid.start[c + 1] += 1;
        }
        for i in 0..nx * ny {
            grid.start[i + 1] += grid.start[i];
        }
        let mut fill = grid.start.clone();
        for (i, &c) in cells.iter().enumerate() {
            grid.members[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid
    }

    fn cell(&self, p: &Point) -> usize {
        let cx = (((p.x - self.x0) / self.side) as usize).min(self.nx - 1);
        let cy = (((p.y - self.y0) / self.side) as usize).min(self.ny - 1);
        cy * self.nx + cx
    }

    /// Uniform relabelled node from the 3x3 block of cells around `p`.
    fn sample_near(&self, p: &Point, rng: &mut StageRng) -> u32 {
        let c = self.cell(p);
        let (cx, cy) = (c % self.nx, c / self.nx);
        let xs = cx.saturating_sub(1)..=(cx + 1).min(self.nx - 1);
        let ys = cy.saturating_sub(1)..=(cy + 1).min(self.ny - 1);
        let mut total = 0u32;
        for y in ys.clone() {
            let row = y * self.nx;
            total += self.start[row + xs.end() + 1] - self.start[row + xs.start()];
        }
        // the block always holds the node at p itself
        let mut k = rng.random_range(0..total);
        for y in ys {
            let row = y * self.nx;
            let (lo, hi) = (self.start[row + xs.start()], self.start[row + xs.end() + 1]);
            if k < hi - lo {
                return lo + k;
            }
            k -= hi - lo;
        }
        unreachable!("index within block total")
    }
}

/// Per-graph rewiring setup shared by all replicates: nodes relabelled in grid order and
/// the slot layout of the adjacency lists. Degrees never change, so each node owns a
/// fixed run of slots and a swap rewrites four slots in place. Every edge occupies two
/// slots, one per endpoint, and both carry its kind.
pub struct Rewirer<'g> {
    g: &'g SpatialGraph,
    cfg: NullModelConfig,
    grid: NodeGrid,
    locs: Vec<Point>,
    offsets: Vec<u32>,
    owner: Vec<u32>,
    adj: Vec<u32>,
    kinds: Vec<EdgeKind>,
}

/// Mutable part of one chain.
struct Chain<'r> {
    offsets: &'r [u32],
    adj: Vec<u32>,
    kinds: Vec<EdgeKind>,
}

impl Chain<'_> {
    fn range(&self, node: u32) -> std::ops::Range<usize> {
        self.offsets[node as usize] as usize..self.offsets[node as usize + 1] as usize
    }

    fn linked(&self, a: u32, b: u32) -> bool {
        // scan the shorter list
        let (ra, rb) = (self.range(a), self.range(b));
        let (r, y) = if ra.len() <= rb.len() { (ra, b) } else { (rb, a) };
        self.adj[r].contains(&y)
    }

    /// Slot of `x` in the list of `node`.
    fn slot(&self, node: u32, x: u32) -> usize {
        let r = self.range(node);
        let lo = r.start;
        lo + self.adj[r].iter().position(|&y| y == x).expect("edge is present")
    }
}

impl<'g> Rewirer<'g> {
    pub fn new(g: &'g SpatialGraph, cfg: &NullModelConfig) -> Result<Self> {
        cfg.validate()?;
        let n = g.node_count();
        let grid = NodeGrid::new(&g.locations(), cfg.local_radius.unwrap_or(cfg.bin_width));
        let mut relabel = vec![0u32; n];
        for (new, &old) in grid.members.iter().enumerate() {
            relabel[old as usize] = new as u32;
        }
        let locs = grid.members.iter().map(|&old| g.location(old)).collect();
        let edges = || {
            g.edges()
                .iter()
                .map(|e| (relabel[e.u as usize], relabel[e.v as usize], e.kind))
        };
        let mut offsets = vec![0u32; n + 1];
        for (u, v, _) in edges() {
            offsets[u as usize + 1] += 1;
            offsets[v as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let slots = offsets[n] as usize;
        let mut owner = vec![0u32; slots];
        for u in 0..n {
            owner[offsets[u] as usize..offsets[u + 1] as usize].fill(u as u32);
        }
        let mut fill = offsets.clone();
        let mut adj = vec![0u32; slots];
        let mut kinds = vec![EdgeKind::Family; slots];
        for (u, v, kind) in edges() {
            for (x, y) in [(u, v), (v, u)] {
                let slot = fill[x as usize] as usize;
                adj[slot] = y;
                kinds[slot] = kind;
                fill[x as usize] += 1;
            }
        }
        Ok(Rewirer {
            g,
            cfg: cfg.clone(),
            grid,
            locs,
            offsets,
            owner,
            adj,
            kinds,
        })
    }

    /// One chain from the input graph, driven by `seed`.
    pub fn run(&self, seed: u64) -> Result<(SpatialGraph, RewireStats)> {
        let cfg = &self.cfg;
        let m = self.g.edge_count() as u64;
        let budget = cfg.swap_budget.unwrap_or(10 * m);
        let max_attempts = cfg.max_attempts.unwrap_or(100 * m);
        let mut stats = RewireStats {
            swap_budget: budget,
            max_attempts,
            attempts: 0,
            accepted: 0,
            tail_acceptance: 0.0,
            under_mixed: false,
        };
        if m < 2 || budget == 0 {
            return Ok((self.g.clone(), stats));
        }
        let (locs, owner, w) = (&self.locs, &self.owner, cfg.bin_width);
        let mut chain = Chain {
            offsets: &self.offsets,
            adj: self.adj.clone(),
            kinds: self.kinds.clone(),
        };
        let slots = 2 * m;
        let mut rng = rng_from_seed(seed);
        let bin_of = |a: u32, b: u32| swap_bin(locs[a as usize].distance(&locs[b as usize]), w);

        const CHECKPOINT: u64 = 256;
        let mut checkpoints: Vec<u64> = Vec::new();
        while stats.accepted < budget && stats.attempts < max_attempts {
            if stats.attempts.is_multiple_of(CHECKPOINT) {
                checkpoints.push(stats.accepted);
            }
            stats.attempts += 1;
            // a uniform slot is a uniform edge with a uniform orientation
            let s1 = rng.random_range(0..slots) as usize;
            let (a, b) = (owner[s1], chain.adj[s1]);
            let local = cfg.local_fraction > 0.0 && rng.random::<f64>() < cfg.local_fraction;
            let s2 = if local {
                let c = self.grid.sample_near(&locs[a as usize], &mut rng);
                let r = chain.range(c);
                if r.is_empty() {
                    continue;
                }
                r.start + rng.random_range(0..r.len())
            } else {
                rng.random_range(0..slots) as usize
            };
            let (c, d) = (owner[s2], chain.adj[s2]);
            // also rejects drawing the same edge twice
            if c == a || c == b || d == a || d == b {
                continue;
            }
            let (old1, old2, new1) = (bin_of(a, b), bin_of(c, d), bin_of(a, d));
            let new2 = if new1 == old1 {
                old2
            } else if new1 == old2 {
                old1
            } else {
                continue;
            };
            if bin_of(c, b) != new2 {
                continue;
            }
            if chain.linked(a, d) || chain.linked(c, b) {
                continue;
            }
            let (k1, k2) = (chain.kinds[s1], chain.kinds[s2]);
            let (sb, sd) = (chain.slot(b, a), chain.slot(d, c));
            chain.adj[s1] = d;
            chain.adj[sd] = a;
            chain.kinds[sd] = k1;
            chain.adj[s2] = b;
            chain.adj[sb] = c;
            chain.kinds[sb] = k2;
            stats.accepted += 1;
        }

        let tail_start = stats.attempts - stats.attempts / 10;
        let k = (tail_start / CHECKPOINT) as usize;
        let (from_attempt, from_accepted) = match checkpoints.get(k) {
            Some(&acc) => (k as u64 * CHECKPOINT, acc),
            None => (0, 0),
        };
        let span = stats.attempts - from_attempt;
        stats.tail_acceptance = if span == 0 {
            1.0
        } else {
            (stats.accepted - from_accepted) as f64 / span as f64
        };
        stats.under_mixed = stats.accepted < budget && stats.tail_acceptance < cfg.min_acceptance;
        if let Some(msg) = stats.warning() {
            log::warn!("{msg}");
        }

        let members = &self.grid.members;
        let mut edges: Vec<Edge> = (0..slots as usize)
            .filter_map(|s| {
                let (x, y) = (members[owner[s] as usize], members[chain.adj[s] as usize]);
                (x < y).then(|| Edge::new(x, y, chain.kinds[s]))
            })
            .collect();
        edges.sort_unstable_by_key(|e| (e.u, e.v));
        Ok((self.g.with_edges(edges)?, stats))
    }
}

/// Degree- and distance-bin-preserving rewiring. Kinds travel with the edge: the new
/// `(a, d)` keeps the kind of `(a, b)`. Use [`Rewirer`] directly to share the setup
/// across replicates.
pub fn random_edge(
    g: &SpatialGraph,
    cfg: &NullModelConfig,
    seed: u64,
) -> Result<(SpatialGraph, RewireStats)> {
    Rewirer::new(g, cfg)?.run(seed)
}

/// A null model bound to one graph; replicates share the per-graph setup.
pub enum Prepared<'g> {
    RandomNode {
        g: &'g SpatialGraph,
        placement: Placement,
    },
    RandomEdge(Box<Rewirer<'g>>),
}

impl<'g> Prepared<'g> {
    pub fn new(g: &'g SpatialGraph, cfg: &NullModelConfig) -> Result<Self> {
        Ok(match cfg.kind {
            NullModelKind::RandomNode => Prepared::RandomNode {
                g,
                placement: cfg.placement,
            },
            NullModelKind::RandomEdge => Prepared::RandomEdge(Box::new(Rewirer::new(g, cfg)?)),
        })
    }

    /// Builds the replicate for `seed`.
    pub fn realize(&self, seed: u64) -> Result<(SpatialGraph, Option<RewireStats>)> {
        match self {
            Prepared::RandomNode { g, placement } => Ok((random_node_with(g, *placement, seed), None)),
            Prepared::RandomEdge(r) => r.run(seed).map(|(g, s)| (g, Some(s))),
        }
    }
}

/// Builds one replicate of the configured null model.
pub fn realize(
    g: &SpatialGraph,
    cfg: &NullModelConfig,
    seed: u64,
) -> Result<(SpatialGraph, Option<RewireStats>)> {
    Prepared::new(g, cfg)?.realize(seed)
}

/// Runs `k` replicates in parallel on the current rayon pool. Replicate `i` receives
/// seed `replicate_seed(master_seed, i)`; outputs come back in index order. The first
/// failing replicate (lowest index) aborts the ensemble.
pub fn run_replicates<T, F>(k: usize, master_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    if k == 0 {
        return Err(Error::validation("replicate count must be at least 1"));
    }
    let results: Vec<Result<T>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let seed = replicate_seed(master_seed, i as u64);
            f(i, seed).map_err(|e| Error::Replicate {
                index: i,
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Across-replicate summaries of named scalar outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub replicates: usize,
    pub seeds: Vec<u64>,
    pub summaries: BTreeMap<String, Summary>,
}

impl EnsembleResult {
    /// `values[i]` holds the named outputs of replicate `i`. Missing names are skipped
    /// for that replicate, which lowers the count.
    pub fn from_values(seeds: Vec<u64>, values: &[Vec<(String, f64)>]) -> Self {
        let mut by_name: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for rep in values {
            for (name, v) in rep {
                by_name.entry(name.clone()).or_default().push(*v);
            }
        }
        let summaries = by_name
            .into_iter()
            .filter_map(|(name, vs)| Summary::unweighted(&vs).map(|s| (name, s)))
            .collect();
        EnsembleResult {
            replicates: values.len(),
            seeds,
            summaries,
        }
    }
}

/// Runs a null-model ensemble and summarises `downstream` over the replicates.
pub fn run_ensemble<F>(
    g: &SpatialGraph,
    cfg: &NullModelConfig,
    k: usize,
    downstream: F,
) -> Result<EnsembleResult>
where
    F: Fn(&SpatialGraph) -> Result<Vec<(String, f64)>> + Sync,
{
    cfg.validate()?;
    let model = Prepared::new(g, cfg)?;
    let values = run_replicates(k, cfg.master_seed, |_, seed| {
        let (net, _) = model.realize(seed)?;
        downstream(&net)
    })?;
    let seeds = (0..k as u64)
        .map(|i| replicate_seed(cfg.master_seed, i))
        .collect();
    Ok(EnsembleResult::from_values(seeds, &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::graph::test_support::graph_from_pairs;
    use crate::graph::{EdgeKind, NodeRecord};
    use crate::metrics::{self, PathMode};
    use crate::synthgen::{self, SynthConfig};
    use proptest::prelude::*;

    fn located(points: &[(f64, f64)], pairs: &[(u32, u32)]) -> SpatialGraph {
        let nodes = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| NodeRecord {
                id: i as u32,
                location: Point::new(x, y),
                household: i as u64,
                workplace: None,
            })
            .collect();
        let edges = pairs
            .iter()
            .map(|&(a, b)| Edge::new(a, b, EdgeKind::Coworker))
            .collect();
        SpatialGraph::new(nodes, edges, Rect::with_size(1000.0, 1000.0).unwrap()).unwrap()
    }

    fn sorted_locations(g: &SpatialGraph) -> Vec<(u64, u64)> {
        let mut v: Vec<_> = g
            .nodes()
            .iter()
            .map(|n| (n.location.x.to_bits(), n.location.y.to_bits()))
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn single_edge_is_left_alone() {
        let g = located(&[(0.0, 0.0), (10.0, 0.0)], &[(0, 1)]);
        let (out, stats) = random_edge(&g, &NullModelConfig::default(), 3).unwrap();
        assert_eq!(out.edges(), g.edges());
        assert_eq!(stats.accepted, 0);
    }

    #[test]
    fn square_swaps_between_matchings() {
        // unit square: (0,1),(2,3) can only become (0,3),(2,1), distances stay in bin 0
        let g = located(
            &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
            &[(0, 1), (2, 3)],
        );
        let cfg = NullModelConfig {
            swap_budget: Some(1),
            ..NullModelConfig::default()
        };
        let (out, stats) = random_edge(&g, &cfg, 1).unwrap();
        assert_eq!(stats.accepted, 1);
        assert_ne!(out.edges(), g.edges());
        assert_eq!(out.degree_sequence(), g.degree_sequence());
    }

    #[test]
    fn frozen_graph_is_flagged() {
        // a triangle admits no swap with distinct endpoints
        let g = located(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], &[(0, 1), (1, 2), (0, 2)]);
        let (out, stats) = random_edge(&g, &NullModelConfig::default(), 9).unwrap();
        let sorted = |g: &SpatialGraph| {
            let mut e = g.edges().to_vec();
            e.sort_by_key(|e| (e.u, e.v));
            e
        };
        assert_eq!(sorted(&out), sorted(&g));
        assert_eq!(stats.attempts, stats.max_attempts);
        assert!(stats.under_mixed);
        assert!(stats.warning().unwrap().contains("under-mixed rewiring"));
    }

    #[test]
    fn replicate_seeds_follow_mix() {
        assert_eq!(replicate_seed(5, 3), mix(5, 3));
        assert_ne!(replicate_seed(5, 3), replicate_seed(5, 4));
    }

    #[test]
    fn singleton_ensemble() {
        let g = graph_from_pairs(5, &[(0, 1), (1, 2), (3, 4)]);
        let r = run_ensemble(&g, &NullModelConfig::random_node(1), 1, |net| {
            Ok(vec![("cc".into(), metrics::network_clustering(net))])
        })
        .unwrap();
        assert_eq!(r.replicates, 1);
        assert_eq!(r.summaries["cc"].stdev, 0.0);
        assert_eq!(r.seeds, vec![replicate_seed(1, 0)]);
    }

    #[test]
    fn failing_replicate_names_its_seed() {
        let err = run_replicates(4, 11, |i, _| {
            if i == 2 {
                Err(Error::consistency("boom"))
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("replicate 2") && msg.contains(&format!("{:#x}", replicate_seed(11, 2))),
            "{msg}"
        );
    }

    #[test]
    fn ensemble_is_independent_of_pool_size() {
        let g = synthgen::generate(&SynthConfig::default().scaled_to(800), 4).unwrap();
        let cfg = NullModelConfig::random_edge(77);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    run_ensemble(&g, &cfg, 6, |net| {
                        Ok(vec![
                            ("cc".into(), metrics::network_clustering(net)),
                            ("dist".into(), net.mean_edge_distance()),
                        ])
                    })
                    .unwrap()
                })
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn uniform_placement_stays_in_area() {
        let g = graph_from_pairs(50, &[(0, 1), (2, 3)]);
        let g = g.with_locations(vec![Point::new(0.0, 0.0); 50]).unwrap();
        let out = random_node_with(&g, Placement::UniformRect, 2);
        assert!(out.nodes().iter().all(|n| g.study_area().contains(&n.location)));
        assert_eq!(out.edges(), g.edges());
    }

    #[test]
    fn rewiring_decorrelates_small_synthetic_network() {
        let g = synthgen::generate(&SynthConfig::default().scaled_to(3000), 8).unwrap();
        let (out, stats) = random_edge(&g, &NullModelConfig::default(), 5).unwrap();
        assert_eq!(stats.accepted, stats.swap_budget, "{stats:?}");
        assert_eq!(swap_bin_counts(&out, 50.0), swap_bin_counts(&g, 50.0));
        let (c0, c1) = (metrics::network_clustering(&g), metrics::network_clustering(&out));
        assert!(c1 < 0.25 * c0, "cc {c0} -> {c1}");
        let m = metrics::compute_metrics(&out, &PathMode::Exact);
        assert!(m.s_rel > metrics::compute_metrics(&g, &PathMode::Exact).s_rel);
    }

    fn arb_spatial_graph() -> impl Strategy<Value = SpatialGraph> {
        (4usize..30).prop_flat_map(|n| {
            let pts = proptest::collection::vec((0u8..6, 0u8..6), n);
            let pairs = proptest::collection::vec((0..n as u32, 0..n as u32), 0..3 * n);
            (pts, pairs).prop_map(|(pts, pairs)| {
                let points: Vec<(f64, f64)> = pts
                    .iter()
                    .map(|&(x, y)| (x as f64 * 37.0, y as f64 * 29.0))
                    .collect();
                let mut keys: Vec<(u32, u32)> = pairs
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (a.min(b), a.max(b)))
                    .collect();
                keys.sort_unstable();
                keys.dedup();
                located(&points, &keys)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_edge_invariants(g in arb_spatial_graph(), seed in any::<u64>(), local in 0.0f64..=1.0) {
            let cfg = NullModelConfig { local_fraction: local, ..NullModelConfig::default() };
            let (out, _) = random_edge(&g, &cfg, seed).unwrap();
            prop_assert_eq!(out.degree_sequence(), g.degree_sequence());
            prop_assert_eq!(swap_bin_counts(&out, 50.0), swap_bin_counts(&g, 50.0));
            prop_assert_eq!(out.nodes(), g.nodes());
            // SpatialGraph::new rejects self-loops and duplicates
            prop_assert!(SpatialGraph::new(out.nodes().to_vec(), out.edges().to_vec(), *out.study_area()).is_ok());
            let (again, _) = random_edge(&g, &cfg, seed).unwrap();
            prop_assert_eq!(again.edges(), out.edges());
        }

        #[test]
        fn random_node_invariants(g in arb_spatial_graph(), seed in any::<u64>()) {
            let out = random_node(&g, seed);
            prop_assert_eq!(out.edges(), g.edges());
            prop_assert_eq!(sorted_locations(&out), sorted_locations(&g));
            let (a, b) = (metrics::compute_metrics(&g, &PathMode::Exact), metrics::compute_metrics(&out, &PathMode::Exact));
            prop_assert_eq!(a, b);
        }
    }
}
