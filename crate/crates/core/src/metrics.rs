//! Network-structure and spatial-structure metrics of a (unit) network.
//!
//! Network structure: relative size of the largest component, mean size of the other
//! components, mean local clustering coefficient and the relative average path length.
//! Spatial structure: the binned distribution of edge lengths, and the distribution of
//! the edges lost when a network is divided.
//!
//! Degenerate conventions:
//! - an empty graph has `S = 0`, `<s> = 0`, `cc = 0` and no path length;
//! - `<s> = 0` when there is at most one component;
//! - nodes with fewer than two neighbours have clustering 0 and still count in the mean;
//! - path lengths average over connected ordered pairs only, and the diameter is the
//!   longest finite shortest path across all components. Without any connected pair
//!   both are missing.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ComponentLabeling, NodeId, SpatialGraph};
use crate::rng;

/// `n_max / n`; 0 for an empty labeling.
pub fn largest_component_share(lab: &ComponentLabeling) -> f64 {
    let n = lab.node_count();
    match lab.sizes.iter().max() {
        Some(&max) if n > 0 => max as f64 / n as f64,
        _ => 0.0,
    }
}

/// Mean size of every component except the largest (the lowest-index one on ties).
pub fn mean_other_component_size(lab: &ComponentLabeling) -> f64 {
    let c = lab.count();
    if c <= 1 {
        return 0.0;
    }
    let largest = lab
        .sizes
        .iter()
        .enumerate()
        .fold(0, |best, (i, &s)| if s > lab.sizes[best] { i } else { best });
    let rest: usize = lab
        .sizes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != largest)
        .map(|(_, &s)| s)
        .sum();
    rest as f64 / (c - 1) as f64
}

fn sorted_intersection_len(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Local clustering coefficient `2 e_i / (k_i (k_i - 1))`.
pub fn node_clustering(g: &SpatialGraph, i: NodeId) -> f64 {
    let nbrs = g.neighbors(i);
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    // each neighbour-neighbour link is seen from both of its ends
    let twice_links: usize = nbrs
        .iter()
        .map(|&j| sorted_intersection_len(nbrs, g.neighbors(j)))
        .sum();
    twice_links as f64 / (k * (k - 1)) as f64
}

/// Mean of [`node_clustering`] over all nodes; 0 for an empty graph.
pub fn network_clustering(g: &SpatialGraph) -> f64 {
    let n = g.node_count();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n as NodeId).map(|i| node_clustering(g, i)).sum();
    total / n as f64
}

/// How shortest paths are evaluated on large components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PathMode {
    /// BFS from every node.
    Exact,
    /// Components larger than `threshold` nodes use BFS from `samples` sources drawn
    /// deterministically from `seed` and the component's smallest node id.
    Sampled {
        threshold: usize,
        samples: usize,
        seed: u64,
    },
}

impl Default for PathMode {
    fn default() -> Self {
        PathMode::Sampled {
            threshold: 5_000,
            samples: 1_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLengths {
    /// Mean shortest-path length over connected ordered pairs.
    pub mean: f64,
    /// Longest finite shortest path (diameter across components).
    pub max: u32,
}

impl PathLengths {
    pub fn relative(&self) -> f64 {
        self.mean / self.max as f64
    }
}

struct BfsScratch {
    dist: Vec<u32>,
    queue: Vec<NodeId>,
    /// Queue length after each position was expanded: the children of `queue[i]` in
    /// the BFS tree are `queue[ends[i - 1]..ends[i]]` (from 1 for the root).
    ends: Vec<u32>,
}

impl BfsScratch {
    fn new(n: usize) -> Self {
        BfsScratch {
            dist: vec![u32::MAX; n],
            queue: Vec::new(),
            ends: Vec::new(),
        }
    }

    /// Returns the sum of distances to reached nodes, the eccentricity of `source`, and
    /// the last node reached (one at maximal distance).
    fn run(&mut self, g: &SpatialGraph, source: NodeId) -> Sweep {
        self.queue.clear();
        self.ends.clear();
        self.queue.push(source);
        self.dist[source as usize] = 0;
        let (mut sum, mut ecc) = (0u64, 0u32);
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            let d = self.dist[v as usize];
            sum += d as u64;
            ecc = d;
            for &w in g.neighbors(v) {
                if self.dist[w as usize] == u32::MAX {
                    self.dist[w as usize] = d + 1;
                    self.queue.push(w);
                }
            }
            self.ends.push(self.queue.len() as u32);
        }
        for &v in &self.queue {
            self.dist[v as usize] = u32::MAX;
        }
        Sweep {
            sum,
            ecc,
            source,
            far: *self.queue.last().expect("source is reached"),
        }
    }

    /// Preorder of the last run's BFS tree. Runs of consecutive nodes fill small
    /// subtrees, so they lie close together in the graph.
    fn tree_preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.queue.len());
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            out.push(self.queue[i]);
            let start = if i == 0 { 1 } else { self.ends[i - 1] as usize };
            stack.extend((start..self.ends[i] as usize).rev());
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Sweep {
    sum: u64,
    ecc: u32,
    source: NodeId,
    far: NodeId,
}

impl Sweep {
    const EMPTY: Sweep = Sweep {
        sum: 0,
        ecc: 0,
        source: NodeId::MAX,
        far: NodeId::MAX,
    };

    // sums add; the extreme sweep is the largest eccentricity, ties to the lower source,
    // so the result does not depend on reduction order
    fn combine(a: Sweep, b: Sweep) -> Sweep {
        let top = if (b.ecc, std::cmp::Reverse(b.source)) > (a.ecc, std::cmp::Reverse(a.source)) {
            b
        } else {
            a
        };
        Sweep {
            sum: a.sum + b.sum,
            ..top
        }
    }
}

/// Words per source mask; a batch holds `64 * LANES` sources.
const LANES: usize = 8;
const BATCH: usize = 64 * LANES;

type Mask = [u64; LANES];

const NONE: Mask = [0; LANES];

fn has_bit(m: &Mask, i: usize) -> bool {
    m[i / 64] >> (i % 64) & 1 == 1
}

/// Bit-parallel BFS from up to [`BATCH`] sources at once: each node carries a bitmask
/// of the sources that have reached it, so sources whose searches overlap share the
/// traversal.
struct MultiBfs {
    seen: Vec<Mask>,
    visit: Vec<Mask>,
    next: Vec<Mask>,
    frontier: Vec<NodeId>,
    upcoming: Vec<NodeId>,
    touched: Vec<NodeId>,
}

impl MultiBfs {
    fn new(n: usize) -> Self {
        MultiBfs {
            seen: vec![NONE; n],
            visit: vec![NONE; n],
            next: vec![NONE; n],
            frontier: Vec::new(),
            upcoming: Vec::new(),
            touched: Vec::new(),
        }
    }

    fn run(&mut self, g: &SpatialGraph, sources: &[NodeId]) -> Sweep {
        debug_assert!(sources.len() <= BATCH);
        for (i, &s) in sources.iter().enumerate() {
            let s = s as usize;
            if self.seen[s] == NONE {
                self.frontier.push(s as NodeId);
                self.touched.push(s as NodeId);
            }
            self.seen[s][i / 64] |= 1 << (i % 64);
            self.visit[s][i / 64] |= 1 << (i % 64);
        }
        let mut sum = 0u64;
        let mut level = 0u32;
        let mut ecc = 0u32;
        // nodes of the deepest level reached so far, with the sources that reached them
        let mut last: Vec<(NodeId, Mask)> = Vec::new();
        while !self.frontier.is_empty() {
            for &v in &self.frontier {
                let bits = self.visit[v as usize];
                for &w in g.neighbors(v) {
                    let nx = &mut self.next[w as usize];
                    if *nx == NONE {
                        self.upcoming.push(w);
                    }
                    for (a, b) in nx.iter_mut().zip(&bits) {
                        *a |= b;
                    }
                }
            }
            for &v in &self.frontier {
                self.visit[v as usize] = NONE;
            }
            self.frontier.clear();
            level += 1;
            for &w in &self.upcoming {
                let w_ = w as usize;
                let mut fresh = NONE;
                let mut count = 0;
                for k in 0..LANES {
                    fresh[k] = self.next[w_][k] & !self.seen[w_][k];
                    count += fresh[k].count_ones();
                }
                self.next[w_] = NONE;
                if count != 0 {
                    if self.seen[w_] == NONE {
                        self.touched.push(w);
                    }
                    for k in 0..LANES {
                        self.seen[w_][k] |= fresh[k];
                    }
                    self.visit[w_] = fresh;
                    sum += level as u64 * count as u64;
                    self.frontier.push(w);
                }
            }
            self.upcoming.clear();
            if !self.frontier.is_empty() {
                ecc = level;
                last.clear();
                last.extend(self.frontier.iter().map(|&w| (w, self.visit[w as usize])));
            }
        }
        for &v in &self.touched {
            self.seen[v as usize] = NONE;
        }
        self.touched.clear();
        if ecc == 0 {
            let s = *sources.iter().min().expect("a source was given");
            return Sweep {
                sum,
                ecc,
                source: s,
                far: s,
            };
        }
        // report the lowest source node at maximal eccentricity and its lowest far node,
        // independent of the order of sources within the batch
        let reached = last.iter().fold(NONE, |mut acc, (_, bits)| {
            for (a, b) in acc.iter_mut().zip(bits) {
                *a |= b;
            }
            acc
        });
        let (i, source) = sources
            .iter()
            .enumerate()
            .filter(|&(i, _)| has_bit(&reached, i))
            .min_by_key(|&(_, &s)| s)
            .map(|(i, &s)| (i, s))
            .expect("deepest level has a source");
        let far = last
            .iter()
            .filter(|(_, bits)| has_bit(bits, i))
            .map(|&(w, _)| w)
            .min()
            .expect("source reached the deepest level");
        Sweep {
            sum,
            ecc,
            source,
            far,
        }
    }
}

fn bfs_totals(g: &SpatialGraph, sources: &[NodeId]) -> Sweep {
    let n = g.node_count();
    if sources.len() <= BATCH {
        return if sources.is_empty() {
            Sweep::EMPTY
        } else {
            MultiBfs::new(n).run(g, sources)
        };
    }
    sources
        .par_chunks(BATCH)
        .map_init(|| MultiBfs::new(n), |bfs, batch| bfs.run(g, batch))
        .reduce(|| Sweep::EMPTY, Sweep::combine)
}

/// Extra BFS passes from the farthest node found so far, which tighten a sampled
/// diameter estimate without entering the mean.
const DIAMETER_SWEEPS: usize = 4;

pub fn average_path_length(g: &SpatialGraph, mode: &PathMode) -> Option<PathLengths> {
    average_path_length_with(g, &g.connected_components(), mode)
}

pub fn average_path_length_with(
    g: &SpatialGraph,
    lab: &ComponentLabeling,
    mode: &PathMode,
) -> Option<PathLengths> {
    let members = lab.members();
    let mut order = BfsScratch::new(g.node_count());
    let mut exact_sources: Vec<NodeId> = Vec::new();
    let mut pairs = 0u64;
    let mut sampled_sum = 0.0f64;
    let mut max = 0u32;
    for comp in members.iter().filter(|m| m.len() >= 2) {
        let c = comp.len() as u64;
        pairs += c * (c - 1);
        match *mode {
            PathMode::Sampled {
                threshold,
                samples,
                seed,
            } if comp.len() > threshold && samples < comp.len() => {
                let mut r = rng::rng_from_seed(rng::mix(seed, comp[0] as u64));
                let mut picks: Vec<NodeId> = index::sample(&mut r, comp.len(), samples.max(1))
                    .into_iter()
                    .map(|k| comp[k])
                    .collect();
                picks.sort_unstable();
                order.run(g, comp[0]);
                let picks: Vec<NodeId> = order
                    .tree_preorder()
                    .into_iter()
                    .filter(|v| picks.binary_search(v).is_ok())
                    .collect();
                let best = bfs_totals(g, &picks);
                sampled_sum += best.sum as f64 * c as f64 / picks.len() as f64;
                let mut ecc = best.ecc;
                let mut far = best.far;
                let mut scratch = BfsScratch::new(g.node_count());
                for _ in 0..DIAMETER_SWEEPS {
                    let next = scratch.run(g, far);
                    if next.ecc <= ecc {
                        break;
                    }
                    ecc = next.ecc;
                    far = next.far;
                }
                max = max.max(ecc);
            }
            // keeping each batch of sources close together makes their searches
            // overlap
            _ => {
                order.run(g, comp[0]);
                exact_sources.extend(order.tree_preorder());
            }
        }
    }
    if pairs == 0 {
        return None;
    }
    let exact = bfs_totals(g, &exact_sources);
    max = max.max(exact.ecc);
    Some(PathLengths {
        mean: (exact.sum as f64 + sampled_sum) / pairs as f64,
        max,
    })
}

/// `l / l_max`, or `None` when no pair of nodes is connected.
pub fn relative_path_length(g: &SpatialGraph, mode: &PathMode) -> Option<f64> {
    average_path_length(g, mode).map(|p| p.relative())
}

/// Structure metrics of one (unit) network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub s_rel: f64,
    pub s_other: f64,
    pub cc: f64,
    pub l_rel: Option<f64>,
    pub n: usize,
    pub e: usize,
}

impl MetricRecord {
    pub fn value(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::LargestComponent => Some(self.s_rel),
            Metric::OtherComponents => Some(self.s_other),
            Metric::Clustering => Some(self.cc),
            Metric::RelativePathLength => self.l_rel,
        }
    }
}

pub fn compute_metrics(g: &SpatialGraph, mode: &PathMode) -> MetricRecord {
    let lab = g.connected_components();
    MetricRecord {
        s_rel: largest_component_share(&lab),
        s_other: mean_other_component_size(&lab),
        cc: network_clustering(g),
        l_rel: average_path_length_with(g, &lab, mode).map(|p| p.relative()),
        n: g.node_count(),
        e: g.edge_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "S")]
    LargestComponent,
    #[serde(rename = "s_other")]
    OtherComponents,
    #[serde(rename = "cc")]
    Clustering,
    #[serde(rename = "l_rel")]
    RelativePathLength,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::LargestComponent,
        Metric::OtherComponents,
        Metric::Clustering,
        Metric::RelativePathLength,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::LargestComponent => "S",
            Metric::OtherComponents => "s_other",
            Metric::Clustering => "cc",
            Metric::RelativePathLength => "l_rel",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::LargestComponent => "Relative size of the largest component",
            Metric::OtherComponents => "Average size of other components",
            Metric::Clustering => "Clustering coefficient",
            Metric::RelativePathLength => "Relative average path length",
        }
    }

    pub fn from_name(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Weighted summary of one metric over the unit networks of a scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stdev: f64,
    pub count: usize,
}

impl Summary {
    /// Weighted mean and population-style weighted standard deviation
    /// `sqrt(sum w (x - mean)^2 / sum w)`. `None` for an empty input.
    pub fn weighted(values: &[(f64, f64)]) -> Option<Summary> {
        let total_w: f64 = values.iter().map(|&(_, w)| w).sum();
        if values.is_empty() || total_w <= 0.0 {
            return None;
        }
        let mean = values.iter().map(|&(x, w)| w * x).sum::<f64>() / total_w;
        let var = values
            .iter()
            .map(|&(x, w)| w * (x - mean) * (x - mean))
            .sum::<f64>()
            / total_w;
        Some(Summary {
            mean,
            stdev: var.sqrt(),
            count: values.len(),
        })
    }

    /// Unweighted mean and population standard deviation.
    pub fn unweighted(values: &[f64]) -> Option<Summary> {
        let pairs: Vec<_> = values.iter().map(|&x| (x, 1.0)).collect();
        Summary::weighted(&pairs)
    }
}

/// Per-metric summaries at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleAggregate {
    pub s_rel: Summary,
    pub s_other: Summary,
    pub cc: Summary,
    /// `None` when no unit network at this scale has a connected pair.
    pub l_rel: Option<Summary>,
}

impl ScaleAggregate {
    pub fn get(&self, m: Metric) -> Option<&Summary> {
        match m {
            Metric::LargestComponent => Some(&self.s_rel),
            Metric::OtherComponents => Some(&self.s_other),
            Metric::Clustering => Some(&self.cc),
            Metric::RelativePathLength => self.l_rel.as_ref(),
        }
    }
}

/// Weighted aggregation of unit-network records at one scale. Missing path lengths are
/// left out of that metric only, which lowers its count.
pub fn aggregate_scale(records: &[(MetricRecord, f64)]) -> Result<ScaleAggregate> {
    if records.is_empty() {
        return Err(Error::validation("no unit networks at scale"));
    }
    if let Some((_, w)) = records.iter().find(|(_, w)| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::validation(format!(
            "unit weight must be positive, got {w}"
        )));
    }
    let collect = |m: Metric| -> Vec<(f64, f64)> {
        records
            .iter()
            .filter_map(|(r, w)| r.value(m).map(|x| (x, *w)))
            .collect()
    };
    // non-empty input with positive weights always yields a summary
    let must = |m: Metric| Summary::weighted(&collect(m)).expect("non-empty");
    Ok(ScaleAggregate {
        s_rel: must(Metric::LargestComponent),
        s_other: must(Metric::OtherComponents),
        cc: must(Metric::Clustering),
        l_rel: Summary::weighted(&collect(Metric::RelativePathLength)),
    })
}

/// Binned edge-length distribution. Edges of length exactly 0 are counted in
/// `zero_count`; an edge of positive length `d` falls in bin `ceil(d / w) - 1`, which
/// covers `(k w, (k + 1) w]`. Trailing empty bins are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    bin_width_bits: u64,
    pub zero_count: u64,
    pub bins: Vec<u64>,
    pub total: u64,
}

impl DistanceHistogram {
    pub fn new(bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::validation(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        Ok(DistanceHistogram {
            bin_width_bits: bin_width.to_bits(),
            zero_count: 0,
            bins: Vec::new(),
            total: 0,
        })
    }

    pub fn bin_width(&self) -> f64 {
        f64::from_bits(self.bin_width_bits)
    }

    pub fn bin_index(&self, d: f64) -> Option<usize> {
        if d <= 0.0 {
            None
        } else {
            Some(((d / self.bin_width()).ceil() as usize).max(1) - 1)
        }
    }

    pub fn add(&mut self, d: f64) {
        match self.bin_index(d) {
            None => self.zero_count += 1,
            Some(k) => {
                if self.bins.len() <= k {
                    self.bins.resize(k + 1, 0);
                }
                self.bins[k] += 1;
            }
        }
        self.total += 1;
    }

    pub fn from_distances(bin_width: f64, distances: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut h = DistanceHistogram::new(bin_width)?;
        for d in distances {
            h.add(d);
        }
        Ok(h)
    }

    /// Bin-wise sum.
    pub fn merge(&mut self, other: &DistanceHistogram) -> Result<()> {
        self.check_width(other)?;
        if self.bins.len() < other.bins.len() {
            self.bins.resize(other.bins.len(), 0);
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        self.zero_count += other.zero_count;
        self.total += other.total;
        Ok(())
    }

    fn check_width(&self, other: &DistanceHistogram) -> Result<()> {
        if self.bin_width_bits != other.bin_width_bits {
            return Err(Error::validation(format!(
                "bin widths differ: {} vs {}",
                self.bin_width(),
                other.bin_width()
            )));
        }
        Ok(())
    }

    fn trim(&mut self) {
        while self.bins.last() == Some(&0) {
            self.bins.pop();
        }
    }

    /// `(bin_lo, bin_hi, count)` rows, starting with the `(0, 0, zero_count)` row.
    pub fn rows(&self) -> Vec<(f64, f64, u64)> {
        let w = self.bin_width();
        std::iter::once((0.0, 0.0, self.zero_count))
            .chain(
                self.bins
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| (k as f64 * w, (k + 1) as f64 * w, c)),
            )
            .collect()
    }
}

pub fn edge_distance_histogram(g: &SpatialGraph, bin_width: f64) -> Result<DistanceHistogram> {
    DistanceHistogram::from_distances(bin_width, g.edges().iter().map(|e| g.edge_distance(e)))
}

/// Distribution of the edges removed by a division: `original - retained`, bin-wise.
/// A negative bin means the retained edges are not a subset of the original ones.
pub fn loss_histogram(
    original: &DistanceHistogram,
    retained: &DistanceHistogram,
) -> Result<DistanceHistogram> {
    original.check_width(retained)?;
    let sub = |a: u64, b: u64, what: &str| {
        a.checked_sub(b).ok_or_else(|| {
            Error::consistency(format!("negative Loss in {what}: original {a} < retained {b}"))
        })
    };
    let mut bins = Vec::with_capacity(original.bins.len());
    for k in 0..original.bins.len().max(retained.bins.len()) {
        let a = original.bins.get(k).copied().unwrap_or(0);
        let b = retained.bins.get(k).copied().unwrap_or(0);
        bins.push(sub(a, b, &format!("bin {k}"))?);
    }
    let mut loss = DistanceHistogram {
        bin_width_bits: original.bin_width_bits,
        zero_count: sub(original.zero_count, retained.zero_count, "zero bin")?,
        bins,
        total: sub(original.total, retained.total, "total")?,
    };
    loss.trim();
    Ok(loss)
}

/// Histogram with real-valued counts: the bin-wise mean over replicate histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanHistogram {
    pub bin_width: f64,
    pub zero_count: f64,
    pub bins: Vec<f64>,
    pub total: f64,
}

impl MeanHistogram {
    /// Bin-wise mean; accumulation runs in slice order so the result is reproducible.
    pub fn mean_of(hists: &[DistanceHistogram]) -> Result<MeanHistogram> {
        let first = hists
            .first()
            .ok_or_else(|| Error::validation("mean of zero histograms"))?;
        let len = hists.iter().map(|h| h.bins.len()).max().unwrap_or(0);
        let k = hists.len() as f64;
        let mut sums = vec![0u64; len];
        let (mut zero, mut total) = (0u64, 0u64);
        for h in hists {
            first.check_width(h)?;
            for (s, &c) in sums.iter_mut().zip(&h.bins) {
                *s += c;
            }
            zero += h.zero_count;
            total += h.total;
        }
        Ok(MeanHistogram {
            bin_width: first.bin_width(),
            zero_count: zero as f64 / k,
            bins: sums.into_iter().map(|s| s as f64 / k).collect(),
            total: total as f64 / k,
        })
    }

    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        let w = self.bin_width;
        std::iter::once((0.0, 0.0, self.zero_count))
            .chain(
                self.bins
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| (k as f64 * w, (k + 1) as f64 * w, c)),
            )
            .collect()
    }
}

impl From<&DistanceHistogram> for MeanHistogram {
    fn from(h: &DistanceHistogram) -> Self {
        MeanHistogram {
            bin_width: h.bin_width(),
            zero_count: h.zero_count as f64,
            bins: h.bins.iter().map(|&c| c as f64).collect(),
            total: h.total as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::graph::test_support::*;
    use crate::graph::{Edge, EdgeKind, NodeRecord};

    fn exact(g: &SpatialGraph) -> Option<PathLengths> {
        average_path_length(g, &PathMode::Exact)
    }

    #[test]
    fn largest_share_examples() {
        assert_eq!(
            largest_component_share(&ComponentLabeling::from_sizes(vec![3, 2, 1])),
            0.5
        );
        assert_eq!(
            largest_component_share(&ComponentLabeling::from_sizes(vec![7])),
            1.0
        );
        assert_eq!(
            largest_component_share(&ComponentLabeling::from_sizes(vec![1, 1, 1, 1])),
            0.25
        );
        assert_eq!(
            largest_component_share(&ComponentLabeling::from_sizes(vec![])),
            0.0
        );
        assert_eq!(
            largest_component_share(&graph_from_pairs(1, &[]).connected_components()),
            1.0
        );
    }

    #[test]
    fn other_components_examples() {
        assert_eq!(
            mean_other_component_size(&ComponentLabeling::from_sizes(vec![3, 2, 1])),
            1.5
        );
        assert_eq!(
            mean_other_component_size(&ComponentLabeling::from_sizes(vec![4])),
            0.0
        );
        assert_eq!(
            mean_other_component_size(&ComponentLabeling::from_sizes(vec![5, 1, 1, 1])),
            1.0
        );
        // ties: exactly one largest component is excluded
        assert_eq!(
            mean_other_component_size(&ComponentLabeling::from_sizes(vec![2, 2, 2])),
            2.0
        );
        assert_eq!(
            mean_other_component_size(&ComponentLabeling::from_sizes(vec![])),
            0.0
        );
    }

    #[test]
    fn clustering_examples() {
        assert_eq!(node_clustering(&complete(3), 0), 1.0);
        let star = graph_from_pairs(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(node_clustering(&star, 0), 0.0);
        let one_link = graph_from_pairs(4, &[(0, 1), (0, 2), (0, 3), (1, 2)]);
        assert!((node_clustering(&one_link, 0) - 1.0 / 3.0).abs() < 1e-15);

        assert_eq!(network_clustering(&complete(3)), 1.0);
        assert_eq!(network_clustering(&path(3)), 0.0);
        let k4_minus = graph_from_pairs(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]);
        assert!((network_clustering(&k4_minus) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(network_clustering(&graph_from_pairs(0, &[])), 0.0);
    }

    #[test]
    fn path_length_examples() {
        let p3 = exact(&path(3)).unwrap();
        assert!((p3.mean - 8.0 / 6.0).abs() < 1e-15);
        assert_eq!(p3.max, 2);
        assert!((p3.relative() - 2.0 / 3.0).abs() < 1e-15);

        let k4 = exact(&complete(4)).unwrap();
        assert_eq!((k4.mean, k4.max), (1.0, 1));
        assert_eq!(k4.relative(), 1.0);

        let p5 = exact(&path(5)).unwrap();
        assert_eq!((p5.mean, p5.max), (2.0, 4));
        assert_eq!(p5.relative(), 0.5);

        assert!(exact(&graph_from_pairs(3, &[])).is_none());
        assert!(exact(&graph_from_pairs(0, &[])).is_none());
    }

    #[test]
    fn disconnected_path_lengths_use_connected_pairs() {
        // path 0-1-2 plus edge 3-4: pairs 6 + 2, distance sum 8 + 2
        let g = graph_from_pairs(6, &[(0, 1), (1, 2), (3, 4)]);
        let p = exact(&g).unwrap();
        assert_eq!(p.mean, 10.0 / 8.0);
        assert_eq!(p.max, 2);
    }

    #[test]
    fn sampling_is_exact_below_threshold_and_deterministic_above() {
        let g = path(40);
        let sampled = PathMode::Sampled {
            threshold: 100,
            samples: 10,
            seed: 1,
        };
        assert_eq!(average_path_length(&g, &sampled), exact(&g));
        let tight = PathMode::Sampled {
            threshold: 10,
            samples: 10,
            seed: 1,
        };
        let a = average_path_length(&g, &tight).unwrap();
        assert_eq!(Some(a), average_path_length(&g, &tight));
        let truth = exact(&g).unwrap();
        // the farthest-node sweep finds a path's diameter from any start
        assert_eq!(a.max, truth.max);
        assert!((a.mean - truth.mean).abs() / truth.mean < 0.5);
    }

    #[test]
    fn sampled_diameter_is_a_lower_bound() {
        let mut pairs: Vec<(u32, u32)> = (0..59).map(|i| (i, i + 1)).collect();
        // a hub shortcut and a pendant tail
        pairs.extend((0..30).map(|i| (60, i * 2)));
        pairs.extend((61..70).map(|i| (i - 1, i)));
        let g = graph_from_pairs(70, &pairs);
        let truth = exact(&g).unwrap();
        for seed in 0..20 {
            let mode = PathMode::Sampled {
                threshold: 10,
                samples: 5,
                seed,
            };
            let a = average_path_length(&g, &mode).unwrap();
            assert!(a.max <= truth.max && a.max >= 1);
        }
    }

    #[test]
    fn bit_parallel_bfs_matches_single_source() {
        use rand::Rng;
        let mut r = rng::rng_from_seed(11);
        for round in 0..40 {
            let n = r.random_range(2..300usize);
            let m = r.random_range(0..n * 2);
            let mut pairs: Vec<(u32, u32)> = (0..m)
                .map(|_| (r.random_range(0..n as u32), r.random_range(0..n as u32)))
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            let g = graph_from_pairs(n, &pairs);
            let sources: Vec<NodeId> = (0..n as NodeId).collect();
            let mut single = BfsScratch::new(n);
            let want = sources
                .iter()
                .fold(Sweep::EMPTY, |acc, &s| Sweep::combine(acc, single.run(&g, s)));
            let got = bfs_totals(&g, &sources);
            assert_eq!(
                (got.sum, got.ecc, got.source),
                (want.sum, want.ecc, want.source),
                "round {round}"
            );
            // far lies at maximal distance from the reported source, so its own
            // eccentricity is at least that distance
            assert_eq!(single.run(&g, got.source).ecc, got.ecc);
            assert!(single.run(&g, got.far).ecc >= got.ecc);
        }
    }

    fn graph_with_distances(ds: &[f64]) -> SpatialGraph {
        let mut nodes = vec![NodeRecord {
            id: 0,
            location: Point::new(0.0, 0.0),
            household: 0,
            workplace: None,
        }];
        let mut edges = Vec::new();
        for (i, &d) in ds.iter().enumerate() {
            let id = i as u32 + 1;
            nodes.push(NodeRecord {
                id,
                location: Point::new(d, 0.0),
                household: id as u64,
                workplace: None,
            });
            edges.push(Edge::new(0, id, EdgeKind::Coworker));
        }
        SpatialGraph::new(nodes, edges, Rect::with_size(1000.0, 1000.0).unwrap()).unwrap()
    }

    #[test]
    fn histogram_binning() {
        let h = edge_distance_histogram(&graph_with_distances(&[0.0, 120.0, 750.0]), 100.0).unwrap();
        assert_eq!(h.zero_count, 1);
        assert_eq!(h.total, 3);
        assert_eq!(h.bins, vec![0, 1, 0, 0, 0, 0, 0, 1]);
        let rows = h.rows();
        assert_eq!(rows[0], (0.0, 0.0, 1));
        assert_eq!(rows[2], (100.0, 200.0, 1));
        assert_eq!(rows[8], (700.0, 800.0, 1));
        // right-closed bins
        let edge = edge_distance_histogram(&graph_with_distances(&[100.0, 0.5]), 100.0).unwrap();
        assert_eq!(edge.bins, vec![2]);

        let family = edge_distance_histogram(&graph_with_distances(&[0.0, 0.0]), 50.0).unwrap();
        assert_eq!((family.zero_count, family.total), (2, 2));
        assert!(family.bins.is_empty());

        let empty = edge_distance_histogram(&graph_from_pairs(0, &[]), 50.0).unwrap();
        assert_eq!((empty.zero_count, empty.total, empty.bins.len()), (0, 0, 0));
        assert!(DistanceHistogram::new(0.0).is_err());
    }

    fn hist(zero: u64, bins: &[u64]) -> DistanceHistogram {
        let mut h = DistanceHistogram::new(100.0).unwrap();
        h.zero_count = zero;
        h.bins = bins.to_vec();
        h.total = zero + bins.iter().sum::<u64>();
        h
    }

    #[test]
    fn loss_examples() {
        let loss = loss_histogram(&hist(2, &[3]), &hist(2, &[1])).unwrap();
        assert_eq!(loss, hist(0, &[2]));
        let none = loss_histogram(&hist(2, &[3, 4]), &hist(2, &[3, 4])).unwrap();
        assert_eq!(none, hist(0, &[]));
        let err = loss_histogram(&hist(2, &[1]), &hist(2, &[3])).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Consistency);
        let mut other_width = hist(0, &[]);
        other_width.bin_width_bits = 50f64.to_bits();
        assert!(loss_histogram(&hist(0, &[]), &other_width).is_err());
    }

    #[test]
    fn mean_histogram() {
        let m = MeanHistogram::mean_of(&[hist(2, &[1]), hist(1, &[0, 3])]).unwrap();
        assert_eq!(m.zero_count, 1.5);
        assert_eq!(m.bins, vec![0.5, 1.5]);
        assert_eq!(m.total, 3.5);
    }

    fn rec(s_rel: f64, l_rel: Option<f64>) -> MetricRecord {
        MetricRecord {
            s_rel,
            s_other: 0.0,
            cc: 0.0,
            l_rel,
            n: 1,
            e: 0,
        }
    }

    #[test]
    fn aggregation_examples() {
        let a = aggregate_scale(&[(rec(1.0, None), 1.0), (rec(0.5, None), 1.0)]).unwrap();
        assert_eq!(a.s_rel.mean, 0.75);
        assert_eq!(a.s_rel.stdev, 0.25);
        assert!(a.l_rel.is_none());

        let b = aggregate_scale(&[(rec(1.0, None), 1.0), (rec(0.0, None), 0.5)]).unwrap();
        assert!((b.s_rel.mean - 1.0 / 1.5).abs() < 1e-15);

        let c = aggregate_scale(&[(rec(0.0, Some(0.5)), 1.0), (rec(0.0, None), 1.0)]).unwrap();
        let l = c.l_rel.unwrap();
        assert_eq!((l.mean, l.count), (0.5, 1));
        assert_eq!(c.s_rel.count, 2);

        let err = aggregate_scale(&[]).unwrap_err();
        assert!(err.to_string().contains("no unit networks at scale"));
        assert!(aggregate_scale(&[(rec(0.0, None), 0.0)]).is_err());
    }

    #[test]
    fn metric_record_of_triangle_plus_pair() {
        let g = graph_from_pairs(6, &[(0, 1), (1, 2), (0, 2), (3, 4)]);
        let r = compute_metrics(&g, &PathMode::Exact);
        assert_eq!(r.s_rel, 0.5);
        assert_eq!(r.s_other, 1.5);
        assert_eq!(r.cc, 0.5);
        // 6 pairs at distance 1 in the triangle, 2 in the pair
        assert_eq!(r.l_rel, Some(1.0));
        assert_eq!((r.n, r.e), (6, 4));
    }
}
