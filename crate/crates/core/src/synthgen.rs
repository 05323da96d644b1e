//! Synthetic contact networks: household cliques joined by distance-decayed workplace
//! cliques.
//!
//! Households are placed by a mixture of a uniform background and planar Gaussian
//! clusters, optionally snapped to a lattice of residential sites (parcel-level
//! geocoding). Each employed person picks a workplace with probability proportional to
//! `remaining capacity * exp(-d / decay_scale)`, where `d` is the distance from home to
//! the workplace. A share of workers (`long_range_share`) ignores distance and picks by
//! remaining capacity alone, giving the commute distribution a long tail. Family members
//! form a complete clique at one location; co-workers form a complete clique among their
//! home locations.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::graph::{Edge, EdgeKind, NodeId, NodeRecord, SpatialGraph};
use crate::metrics;
use crate::rng::{rng_from_seed, stage_seed, StageRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub area: Rect,
    pub n_individuals: usize,
    /// Probabilities of household sizes 1, 2, ...
    pub household_size_pmf: Vec<f64>,
    pub n_workplaces: usize,
    /// Probabilities of workplace capacities 1, 2, ...
    pub workplace_capacity_pmf: Vec<f64>,
    pub employment_rate: f64,
    /// Length scale of the workplace choice kernel, meters.
    pub decay_scale: f64,
    /// Share of workers choosing a workplace by remaining capacity alone.
    pub long_range_share: f64,
    pub residential_cluster_count: usize,
    /// Standard deviation of each residential cluster, meters.
    pub cluster_spread: f64,
    /// Share of households placed uniformly rather than in clusters.
    pub background_share: f64,
    /// Share of workplace sites drawn from the residential mixture (same centres,
    /// spread and background share); the rest follow the employment-centre mixture.
    pub workplace_home_share: f64,
    /// Employment centres: workplaces follow their own cluster mixture.
    pub workplace_cluster_count: usize,
    pub workplace_cluster_spread: f64,
    pub workplace_background_share: f64,
    /// Spacing of the residential site lattice; households are snapped to the nearest
    /// site centre. `None` keeps continuous locations.
    pub site_spacing: Option<f64>,
    /// Seed used when none is given on the command line.
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            area: Rect {
                xmin: 0.0,
                ymin: 0.0,
                xmax: 4800.0,
                ymax: 3700.0,
            },
            n_individuals: 64_726,
            household_size_pmf: vec![0.18, 0.27, 0.20, 0.18, 0.09, 0.045, 0.02, 0.015],
            n_workplaces: 10_000,
            workplace_capacity_pmf: vec![0.0, 0.10, 0.15, 0.20, 0.20, 0.15, 0.10, 0.05, 0.05],
            employment_rate: 0.70,
            decay_scale: 65.0,
            long_range_share: 0.0,
            residential_cluster_count: 12,
            cluster_spread: 300.0,
            background_share: 0.55,
            workplace_home_share: 0.4,
            workplace_cluster_count: 150,
            workplace_cluster_spread: 200.0,
            workplace_background_share: 0.3,
            site_spacing: Some(50.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        Rect::new(self.area.xmin, self.area.ymin, self.area.xmax, self.area.ymax)?;
        if self.n_individuals == 0 {
            return Err(Error::validation("n_individuals must be at least 1"));
        }
        check_pmf("household_size_pmf", &self.household_size_pmf)?;
        check_pmf("workplace_capacity_pmf", &self.workplace_capacity_pmf)?;
        for (name, v) in [
            ("employment_rate", self.employment_rate),
            ("long_range_share", self.long_range_share),
            ("workplace_home_share", self.workplace_home_share),
            ("background_share", self.background_share),
            ("workplace_background_share", self.workplace_background_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.decay_scale > 0.0 && self.decay_scale.is_finite()) {
            return Err(Error::validation(format!(
                "decay_scale must be positive, got {}",
                self.decay_scale
            )));
        }
        check_mixture(
            "residential",
            self.background_share,
            self.residential_cluster_count,
            self.cluster_spread,
        )?;
        check_mixture(
            "workplace",
            self.workplace_background_share,
            self.workplace_cluster_count,
            self.workplace_cluster_spread,
        )?;
        if let Some(s) = self.site_spacing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::validation(format!(
                    "site_spacing must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    /// The default layout at a different population with the same density: the area,
    /// cluster and workplace counts scale with `n`, sides rounded to whole sites.
    pub fn scaled_to(&self, n: usize) -> SynthConfig {
        let f = n as f64 / self.n_individuals as f64;
        let unit = self.site_spacing.unwrap_or(1.0);
        let side = |len: f64| ((len * f.sqrt() / unit).round().max(1.0)) * unit;
        SynthConfig {
            area: Rect {
                xmin: self.area.xmin,
                ymin: self.area.ymin,
                xmax: self.area.xmin + side(self.area.width()),
                ymax: self.area.ymin + side(self.area.height()),
            },
            n_individuals: n,
            n_workplaces: (self.n_workplaces as f64 * f).round() as usize,
            residential_cluster_count: ((self.residential_cluster_count as f64 * f).round() as usize).max(1),
            workplace_cluster_count: ((self.workplace_cluster_count as f64 * f).round() as usize).max(1),
            ..self.clone()
        }
    }
}

fn check_mixture(what: &str, background: f64, count: usize, spread: f64) -> Result<()> {
    if background < 1.0 {
        if count == 0 {
            return Err(Error::validation(format!(
                "{what} cluster count must be positive unless its background share is 1"
            )));
        }
        if !(spread > 0.0 && spread.is_finite()) {
            return Err(Error::validation(format!(
                "{what} cluster spread must be positive, got {spread}"
            )));
        }
    }
    Ok(())
}

fn check_pmf(name: &str, pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() || pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::validation(format!(
            "{name} must be a non-empty list of probabilities"
        )));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Household {
    pub location: Point,
    pub size: usize,
}

/// Households and workplace assignments before edges are drawn. Members are numbered
/// consecutively in household order.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub households: Vec<Household>,
    /// Workplace index of every individual.
    pub workplace_of: Vec<Option<u32>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub households: usize,
    pub workplaces: usize,
    pub employed: usize,
    /// Employed individuals left without a workplace because every workplace was full.
    pub unplaced_workers: usize,
}

impl Population {
    pub fn individuals(&self) -> usize {
        self.households.iter().map(|h| h.size).sum()
    }

    /// Complete cliques per household (family) and per workplace (coworker). A pair that
    /// shares both keeps the family kind.
    pub fn to_graph(&self, area: Rect) -> Result<SpatialGraph> {
        let n = self.individuals();
        if self.workplace_of.len() != n {
            return Err(Error::validation(format!(
                "{} workplace entries for {n} individuals",
                self.workplace_of.len()
            )));
        }
        let mut nodes = Vec::with_capacity(n);
        let mut edges = Vec::new();
        for (h, hh) in self.households.iter().enumerate() {
            let first = nodes.len() as NodeId;
            for k in 0..hh.size as NodeId {
                let id = first + k;
                nodes.push(NodeRecord {
                    id,
                    location: hh.location,
                    household: h as u64,
                    workplace: self.workplace_of[id as usize].map(u64::from),
                });
                for j in first..id {
                    edges.push(Edge::new(j, id, EdgeKind::Family));
                }
            }
        }
        let n_work = self
            .workplace_of
            .iter()
            .flatten()
            .map(|&w| w as usize + 1)
            .max()
            .unwrap_or(0);
        let mut staff: Vec<Vec<NodeId>> = vec![Vec::new(); n_work];
        for (i, w) in self.workplace_of.iter().enumerate() {
            if let Some(w) = w {
                staff[*w as usize].push(i as NodeId);
            }
        }
        for members in &staff {
            for (k, &a) in members.iter().enumerate() {
                for &b in &members[..k] {
                    if nodes[a as usize].household != nodes[b as usize].household {
                        edges.push(Edge::new(a, b, EdgeKind::Coworker));
                    }
                }
            }
        }
        edges.sort_unstable_by_key(Edge::key);
        SpatialGraph::new(nodes, edges, area)
    }
}

/// Mixture of a uniform background and isotropic Gaussian clusters.
struct Mixture {
    area: Rect,
    background: f64,
    centres: Vec<Point>,
    normal: Normal<f64>,
}

impl Mixture {
    fn new(area: Rect, background: f64, count: usize, spread: f64, rng: &mut StageRng) -> Result<Self> {
        let centres = if background < 1.0 {
            (0..count).map(|_| uniform_point(&area, rng)).collect()
        } else {
            Vec::new()
        };
        Ok(Mixture {
            area,
            background,
            centres,
            normal: Normal::new(0.0, spread.max(f64::MIN_POSITIVE))
                .map_err(|e| Error::validation(e.to_string()))?,
        })
    }

    fn sample(&self, rng: &mut StageRng) -> Point {
        let a = &self.area;
        if self.centres.is_empty() || rng.random::<f64>() < self.background {
            return uniform_point(a, rng);
        }
        let k = rng.random_range(0..self.centres.len());
        let c = self.centres[k];
        // rejection keeps the cluster shape; a far-off-area cluster falls back to uniform
        for _ in 0..64 {
            let p = Point::new(c.x + self.normal.sample(rng), c.y + self.normal.sample(rng));
            if a.contains(&p) && p.x < a.xmax && p.y < a.ymax {
                return p;
            }
        }
        uniform_point(a, rng)
    }
}

fn snap(cfg: &SynthConfig, p: Point) -> Point {
    let Some(s) = cfg.site_spacing else { return p };
    let a = &cfg.area;
    let snap1 = |v: f64, lo: f64, hi: f64| (lo + ((v - lo) / s).floor() * s + 0.5 * s).min(hi);
    Point::new(snap1(p.x, a.xmin, a.xmax), snap1(p.y, a.ymin, a.ymax))
}

fn uniform_point(a: &Rect, rng: &mut StageRng) -> Point {
    Point::new(rng.random_range(a.xmin..a.xmax), rng.random_range(a.ymin..a.ymax))
}

/// Draws households, workplaces and assignments.
pub fn populate(cfg: &SynthConfig, seed: u64) -> Result<(Population, Diagnostics)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(stage_seed(seed, "synth/households"));
    let sizes = WeightedIndex::new(&cfg.household_size_pmf).map_err(|e| Error::validation(e.to_string()))?;
    let mut remaining = cfg.n_individuals;
    let mut household_sizes = Vec::new();
    while remaining > 0 {
        let g = (sizes.sample(&mut rng) + 1).min(remaining);
        household_sizes.push(g);
        remaining -= g;
    }

    let mut rng = rng_from_seed(stage_seed(seed, "synth/layout"));
    let homes = Mixture::new(
        cfg.area,
        cfg.background_share,
        cfg.residential_cluster_count,
        cfg.cluster_spread,
        &mut rng,
    )?;
    let households: Vec<Household> = household_sizes
        .into_iter()
        .map(|size| {
            let p = homes.sample(&mut rng);
            Household {
                location: snap(cfg, p),
                size,
            }
        })
        .collect();

    let mut rng = rng_from_seed(stage_seed(seed, "synth/workplaces"));
    let jobs = Mixture::new(
        cfg.area,
        cfg.workplace_background_share,
        cfg.workplace_cluster_count,
        cfg.workplace_cluster_spread,
        &mut rng,
    )?;
    let caps =
        WeightedIndex::new(&cfg.workplace_capacity_pmf).map_err(|e| Error::validation(e.to_string()))?;
    let work_sites: Vec<Point> = (0..cfg.n_workplaces)
        .map(|_| {
            if rng.random::<f64>() < cfg.workplace_home_share {
                homes.sample(&mut rng)
            } else {
                jobs.sample(&mut rng)
            }
        })
        .collect();
    let mut capacity: Vec<f64> = (0..cfg.n_workplaces)
        .map(|_| (caps.sample(&mut rng) + 1) as f64)
        .collect();

    let mut rng = rng_from_seed(stage_seed(seed, "synth/assignment"));
    let n = cfg.n_individuals;
    let mut employed = Vec::with_capacity(n);
    let mut first_member = Vec::with_capacity(households.len());
    for h in &households {
        first_member.push(employed.len());
        employed.extend((0..h.size).map(|_| rng.random::<f64>() < cfg.employment_rate));
    }
    let mut order: Vec<usize> = (0..households.len()).collect();
    order.shuffle(&mut rng);

    let mut workplace_of = vec![None; n];
    let mut diag = Diagnostics {
        households: households.len(),
        workplaces: cfg.n_workplaces,
        ..Diagnostics::default()
    };
    let mut kernel = vec![0.0; cfg.n_workplaces];
    let mut weights = vec![0.0; cfg.n_workplaces];
    for h in order {
        let home = households[h].location;
        let members = first_member[h]..first_member[h] + households[h].size;
        if !members.clone().any(|i| employed[i]) {
            continue;
        }
        let mut total = 0.0;
        for (((k, w), site), c) in kernel
            .iter_mut()
            .zip(weights.iter_mut())
            .zip(&work_sites)
            .zip(&capacity)
        {
            *k = (-home.distance(site) / cfg.decay_scale).exp();
            *w = *k * c;
            total += *w;
        }
        for i in members.filter(|&i| employed[i]) {
            diag.employed += 1;
            if !(total > 0.0) {
                diag.unplaced_workers += 1;
                continue;
            }
            let long = rng.random::<f64>() < cfg.long_range_share;
            let j = if long {
                pick_weighted(&capacity, rng.random::<f64>() * capacity.iter().sum::<f64>())
            } else {
                pick_weighted(&weights, rng.random::<f64>() * total)
            };
            capacity[j] -= 1.0;
            weights[j] = kernel[j] * capacity[j];
            // recompute rather than subtract so rounding cannot leave a phantom total
            total = weights.iter().sum();
            workplace_of[i] = Some(j as u32);
        }
    }
    Ok((
        Population {
            households,
            workplace_of,
        },
        diag,
    ))
}

/// Index whose cumulative weight first exceeds `target`, skipping zero weights.
fn pick_weighted(weights: &[f64], target: f64) -> usize {
    let mut run = 0.0;
    let mut pick = None;
    for (j, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            run += w;
            pick = Some(j);
            if run > target {
                break;
            }
        }
    }
    pick.expect("positive total has a positive weight")
}

pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<SpatialGraph> {
    generate_with_diagnostics(cfg, seed).map(|(g, _)| g)
}

pub fn generate_with_diagnostics(cfg: &SynthConfig, seed: u64) -> Result<(SpatialGraph, Diagnostics)> {
    let (pop, diag) = populate(cfg, seed)?;
    if diag.unplaced_workers > 0 {
        log::warn!(
            "{} of {} workers found no workplace with free capacity",
            diag.unplaced_workers,
            diag.employed
        );
    }
    Ok((pop.to_graph(cfg.area)?, diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    /// |achieved - target| <= value * |target|
    Relative { value: f64 },
    /// |achieved - target| <= value
    Absolute { value: f64 },
    /// achieved >= target
    AtLeast,
    /// No gate; reported for comparison.
    ReportOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationLine {
    pub name: &'static str,
    /// Where the target constant comes from.
    pub source: &'static str,
    pub target: f64,
    pub achieved: f64,
    pub tolerance: Tolerance,
    /// `None` for report-only lines.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub mean_degree: f64,
    pub mean_degree_tol: Tolerance,
    pub zero_distance_fraction: f64,
    pub zero_distance_fraction_tol: Tolerance,
    pub coworker_short_share: f64,
    /// Distance threshold for the co-worker share, meters.
    pub coworker_short_distance: f64,
    pub mean_edge_distance: f64,
    pub mean_edge_distance_tol: Tolerance,
    pub clustering: f64,
    pub clustering_tol: Tolerance,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            mean_degree: 6.01,
            mean_degree_tol: Tolerance::Relative { value: 0.05 },
            zero_distance_fraction: 93_474.0 / 194_683.0,
            zero_distance_fraction_tol: Tolerance::Absolute { value: 0.05 },
            coworker_short_share: 0.80,
            coworker_short_distance: 800.0,
            mean_edge_distance: 327.11,
            mean_edge_distance_tol: Tolerance::ReportOnly,
            clustering: 0.43,
            clustering_tol: Tolerance::ReportOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub lines: Vec<CalibrationLine>,
}

impl CalibrationReport {
    /// True when every gated line passes.
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.pass != Some(false))
    }

    pub fn line(&self, name: &str) -> Option<&CalibrationLine> {
        self.lines.iter().find(|l| l.name == name)
    }
}

fn judge(achieved: f64, target: f64, tol: Tolerance) -> Option<bool> {
    match tol {
        Tolerance::Relative { value } => Some((achieved - target).abs() <= value * target.abs()),
        Tolerance::Absolute { value } => Some((achieved - target).abs() <= value),
        Tolerance::AtLeast => Some(achieved >= target),
        Tolerance::ReportOnly => None,
    }
}

/// Compares a network with the observed aggregates it should emulate.
pub fn validate(g: &SpatialGraph, t: &CalibrationTargets) -> CalibrationReport {
    let distances = g.edge_distances();
    let e = distances.len().max(1) as f64;
    let zero = distances.iter().filter(|&&d| d == 0.0).count() as f64 / e;
    let (mut cw, mut cw_short) = (0usize, 0usize);
    for (edge, d) in g.edges().iter().zip(&distances) {
        if edge.kind == EdgeKind::Coworker {
            cw += 1;
            if *d < t.coworker_short_distance {
                cw_short += 1;
            }
        }
    }
    let cw_share = if cw == 0 { 0.0 } else { cw_short as f64 / cw as f64 };
    let line = |name, source, target, achieved, tolerance| CalibrationLine {
        name,
        source,
        target,
        achieved,
        tolerance,
        pass: judge(achieved, target, tolerance),
    };
    let lines = vec![
        line(
            "mean_degree",
            "observed network average degree 6.01",
            t.mean_degree,
            g.mean_degree(),
            t.mean_degree_tol,
        ),
        line(
            "zero_distance_fraction",
            "observed family edges 93,474 of 194,683",
            t.zero_distance_fraction,
            zero,
            t.zero_distance_fraction_tol,
        ),
        line(
            "coworker_short_share",
            "observed co-worker distances die out near 800 m",
            t.coworker_short_share,
            cw_share,
            Tolerance::AtLeast,
        ),
        line(
            "mean_edge_distance",
            "observed average edge distance 327.11 m",
            t.mean_edge_distance,
            g.mean_edge_distance(),
            t.mean_edge_distance_tol,
        ),
        line(
            "clustering",
            "observed clustering coefficient 0.43",
            t.clustering,
            metrics::network_clustering(g),
            t.clustering_tol,
        ),
    ];
    CalibrationReport { lines }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(n: usize, pmf: Vec<f64>) -> SynthConfig {
        SynthConfig {
            area: Rect::with_size(1000.0, 1000.0).unwrap(),
            n_individuals: n,
            household_size_pmf: pmf,
            n_workplaces: 0,
            residential_cluster_count: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn single_household_no_workplaces() {
        let g = generate(&tiny(3, vec![0.0, 0.0, 1.0]), 1).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!(g.edge_distances().iter().all(|&d| d == 0.0));
        assert!(g.edges().iter().all(|e| e.kind == EdgeKind::Family));
    }

    #[test]
    fn last_household_is_truncated() {
        let (pop, _) = populate(&tiny(7, vec![0.0, 0.0, 0.0, 1.0]), 3).unwrap();
        let sizes: Vec<_> = pop.households.iter().map(|h| h.size).collect();
        assert_eq!(sizes, vec![4, 3]);
    }

    #[test]
    fn hand_built_population() {
        let pop = Population {
            households: vec![
                Household {
                    location: Point::new(0.0, 0.0),
                    size: 2,
                },
                Household {
                    location: Point::new(300.0, 400.0),
                    size: 2,
                },
            ],
            workplace_of: vec![Some(0), None, None, Some(0)],
        };
        let g = pop.to_graph(Rect::with_size(1000.0, 1000.0).unwrap()).unwrap();
        let fam = g.edges().iter().filter(|e| e.kind == EdgeKind::Family).count();
        assert_eq!(fam, 2);
        let cw: Vec<_> = g
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Coworker)
            .collect();
        assert_eq!(cw.len(), 1);
        assert_eq!(g.edge_distance(cw[0]), 500.0);
        g.check_household_structure().unwrap();
    }

    #[test]
    fn shared_workplace_keeps_family_kind() {
        let pop = Population {
            households: vec![Household {
                location: Point::new(5.0, 5.0),
                size: 3,
            }],
            workplace_of: vec![Some(0), Some(0), None],
        };
        let g = pop.to_graph(Rect::with_size(10.0, 10.0).unwrap()).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert!(g.edges().iter().all(|e| e.kind == EdgeKind::Family));
    }

    #[test]
    fn capacity_exhaustion_leaves_workers_unplaced() {
        let cfg = SynthConfig {
            employment_rate: 1.0,
            n_workplaces: 2,
            workplace_capacity_pmf: vec![0.0, 1.0],
            ..tiny(30, vec![1.0])
        };
        let (pop, diag) = populate(&cfg, 5).unwrap();
        assert_eq!(diag.employed, 30);
        assert_eq!(diag.unplaced_workers, 26);
        assert_eq!(pop.workplace_of.iter().flatten().count(), 4);
        let g = pop.to_graph(cfg.area).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn workplaces_form_cliques_and_households_co_locate() {
        let cfg = SynthConfig::default().scaled_to(3000);
        let g = generate(&cfg, 11).unwrap();
        g.check_household_structure().unwrap();
        let mut staff: std::collections::BTreeMap<u64, Vec<NodeId>> = Default::default();
        for n in g.nodes() {
            if let Some(w) = n.workplace {
                staff.entry(w).or_default().push(n.id);
            }
        }
        for members in staff.values() {
            for (k, &a) in members.iter().enumerate() {
                for &b in &members[..k] {
                    assert!(g.has_edge(a, b));
                }
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = SynthConfig::default().scaled_to(2000);
        let a = generate(&cfg, 9).unwrap();
        let b = generate(&cfg, 9).unwrap();
        let c = generate(&cfg, 10).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.edges(), b.edges());
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn sites_are_at_least_a_bin_apart() {
        // so the first 50 m swap bin only ever holds zero-distance edges
        let cfg = SynthConfig::default().scaled_to(2000);
        let g = generate(&cfg, 2).unwrap();
        let mut sites: Vec<(u64, u64)> = g
            .nodes()
            .iter()
            .map(|n| (n.location.x.to_bits(), n.location.y.to_bits()))
            .collect();
        sites.sort_unstable();
        sites.dedup();
        for (i, a) in sites.iter().enumerate() {
            for b in &sites[..i] {
                let pa = Point::new(f64::from_bits(a.0), f64::from_bits(a.1));
                let pb = Point::new(f64::from_bits(b.0), f64::from_bits(b.1));
                assert!(pa.distance(&pb) >= 49.999);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SynthConfig::default();
        cfg.household_size_pmf = vec![0.5, 0.4];
        assert!(cfg.validate().unwrap_err().to_string().contains("sums to"));
        let cfg = SynthConfig {
            decay_scale: 0.0,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SynthConfig {
            employment_rate: 1.5,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
        let parsed: SynthConfig =
            serde_json::from_str(r#"{"n_individuals": 50, "decay_scale": 120.0}"#).unwrap();
        assert_eq!(parsed.n_individuals, 50);
        assert_eq!(
            parsed.household_size_pmf,
            SynthConfig::default().household_size_pmf
        );
        assert!(serde_json::from_str::<SynthConfig>(r#"{"n_individual": 50}"#).is_err());
    }

    #[test]
    fn validation_examples() {
        let g = generate(&tiny(5, vec![0.0, 0.0, 0.0, 0.0, 1.0]), 0).unwrap();
        let r = validate(&g, &CalibrationTargets::default());
        let md = r.line("mean_degree").unwrap();
        assert_eq!(md.achieved, 4.0);
        assert_eq!(md.pass, Some(false));
        assert_eq!(r.line("zero_distance_fraction").unwrap().achieved, 1.0);
        assert!(!r.passed());
        assert_eq!(r.line("clustering").unwrap().pass, None);
    }

    // Family edges per seed are a sum over households, so their mean over seeds
    // should sit within 3 standard errors of n_households * E[g(g-1)/2].
    #[test]
    fn family_edge_count_matches_expectation() {
        let cfg = SynthConfig {
            n_workplaces: 0,
            ..SynthConfig::default().scaled_to(5000)
        };
        let pmf = &cfg.household_size_pmf;
        let pairs = |g: usize| (g * (g - 1) / 2) as f64;
        let mean_pairs: f64 = pmf.iter().enumerate().map(|(k, p)| p * pairs(k + 1)).sum();
        let var_pairs: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| p * (pairs(k + 1) - mean_pairs).powi(2))
            .sum();
        let mut ratios = Vec::new();
        for seed in 0..30 {
            let (pop, _) = populate(&cfg, seed).unwrap();
            // exclude the truncated last household from the comparison
            let full = &pop.households[..pop.households.len() - 1];
            let fam: f64 = full.iter().map(|h| pairs(h.size)).sum();
            let expect = full.len() as f64 * mean_pairs;
            let se = (full.len() as f64 * var_pairs).sqrt();
            ratios.push((fam - expect) / se);
        }
        // the average of 30 standardised sums has standard error 1/sqrt(30)
        let z: f64 = ratios.iter().sum::<f64>() / 30f64.sqrt();
        assert!(z.abs() < 3.0, "z = {z}");
    }
}
