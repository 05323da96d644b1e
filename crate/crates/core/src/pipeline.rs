//! Experiment orchestration: three networks (observed, random-node, random-edge) divided
//! by two partition families (a grid ladder and polygon levels), with per-scale metric
//! curves, edge-distance histograms and a run manifest.
//!
//! Output directory layout:
//!
//! - `curves_grid.csv`, `curves_polygon.csv`: one row per (network, scale, metric).
//! - `dist_<network>_<scale>.csv`, `loss_<network>_<scale>.csv`: retained and lost edge
//!   distances per scale; `dist_<network>_original.csv` for the undivided network.
//! - `summary.csv`: whole-network metrics; `characteristic_scales.csv`.
//! - `plots/*.svg` and `manifest.json`, written last.
//!
//! Null-model rows are means over replicates; histograms of null models hold mean
//! (real-valued) counts. Every CSV is a pure function of the configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::graph::SpatialGraph;
use crate::io::{self, fmt_opt, fmt_real};
use crate::metrics::{self, DistanceHistogram, MeanHistogram, Metric, MetricRecord, PathMode, Summary};
use crate::nullmodels::{self, NullModelConfig, NullModelKind};
use crate::partition::{self, Partition};
use crate::rng;
use crate::synthgen::{self, SynthConfig};

mod plots;

pub use plots::emit_plots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Observed,
    RandomNode,
    RandomEdge,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 3] = [
        NetworkKind::Observed,
        NetworkKind::RandomNode,
        NetworkKind::RandomEdge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Observed => "observed",
            NetworkKind::RandomNode => "random_node",
            NetworkKind::RandomEdge => "random_edge",
        }
    }

    pub fn from_name(s: &str) -> Option<NetworkKind> {
        NetworkKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl From<NullModelKind> for NetworkKind {
    fn from(k: NullModelKind) -> Self {
        match k {
            NullModelKind::RandomNode => NetworkKind::RandomNode,
            NullModelKind::RandomEdge => NetworkKind::RandomEdge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Grid,
    Polygon,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Grid => "grid",
            Family::Polygon => "polygon",
        }
    }

    pub fn curves_file(self) -> String {
        format!("curves_{}.csv", self.name())
    }
}

/// Where the observed network comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    /// Generated with `synthgen`, seeded by the config's own `seed`.
    Synthetic { config: SynthConfig },
    Files {
        nodes: PathBuf,
        edges: PathBuf,
        area: Rect,
    },
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Synthetic {
            config: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec {
            min: 100.0,
            max: 2400.0,
            step: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolygonSource {
    /// GeoJSON FeatureCollection; the level label comes from the features.
    File { path: PathBuf },
    /// Jittered quadrilateral tiling, seeded from the master seed and the label.
    Jittered { label: String, size: f64, jitter: f64 },
}

/// Census-like levels used when no polygon files are given.
pub fn default_polygon_levels() -> Vec<PolygonSource> {
    [("block", 150.0), ("block_group", 600.0), ("tract", 1600.0)]
        .into_iter()
        .map(|(label, size)| PolygonSource::Jittered {
            label: label.to_string(),
            size,
            jitter: 0.2,
        })
        .collect()
}

/// Unit weights in the per-scale mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Share of the cell inside the study area.
    #[default]
    Coverage,
    Equal,
    /// Number of nodes in the unit network.
    Nodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputSource,
    /// `None` runs polygon levels only.
    pub grid: Option<LadderSpec>,
    pub polygons: Vec<PolygonSource>,
    /// Each model's `master_seed` is replaced by one derived from `master_seed` below.
    pub null_models: Vec<NullModelConfig>,
    pub replicates: usize,
    pub bin_width: f64,
    pub path_mode: PathMode,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
    pub weighting: Weighting,
    /// Leave cells that extend past the study area out of the means.
    pub exclude_partial_cells: bool,
    pub plateau_tolerance: f64,
    /// Scale labels that get histogram panels.
    pub histogram_scales: Vec<String>,
    /// Also write each null-model replicate's histograms under `replicates/`.
    pub keep_replicate_histograms: bool,
    pub plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input: InputSource::default(),
            grid: Some(LadderSpec::default()),
            polygons: default_polygon_levels(),
            null_models: vec![NullModelConfig::random_node(0), NullModelConfig::random_edge(0)],
            replicates: 100,
            bin_width: 50.0,
            path_mode: PathMode::default(),
            master_seed: 0,
            output_dir: PathBuf::from("results"),
            workers: 0,
            weighting: Weighting::Coverage,
            exclude_partial_cells: false,
            plateau_tolerance: 0.1,
            histogram_scales: ["grid-600", "grid-1200", "grid-2400"].map(String::from).to_vec(),
            keep_replicate_histograms: false,
            plots: true,
        }
    }
}

impl ExperimentConfig {
    /// Parses an experiment config, or the `config` echoed in a run manifest.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("bad experiment config: {e}")))?;
        let body = match value.get("config") {
            Some(inner) if value.get("mix_function").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(body).map_err(|e| Error::validation(format!("bad experiment config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::validation("replicate count must be at least 1"));
        }
        let rungs = match &self.grid {
            Some(l) => {
                if !(l.min > 0.0 && l.step > 0.0 && l.max.is_finite()) {
                    return Err(Error::validation(format!(
                        "grid ladder needs min > 0 and step > 0, got {l:?}"
                    )));
                }
                l.max >= l.min
            }
            None => false,
        };
        if !rungs && self.polygons.is_empty() {
            return Err(Error::validation(
                "nothing to divide by: the grid ladder is empty and no polygon partition is given",
            ));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::validation(format!(
                "bin_width must be positive, got {}",
                self.bin_width
            )));
        }
        if !(self.plateau_tolerance >= 0.0 && self.plateau_tolerance.is_finite()) {
            return Err(Error::validation(format!(
                "plateau_tolerance must be non-negative, got {}",
                self.plateau_tolerance
            )));
        }
        if let PathMode::Sampled { samples: 0, .. } = self.path_mode {
            return Err(Error::validation("sampled path mode needs at least one source"));
        }
        let mut kinds = Vec::new();
        for nm in &self.null_models {
            nm.validate()?;
            if kinds.contains(&nm.kind) {
                return Err(Error::validation(format!(
                    "null model {} listed twice",
                    nm.kind.name()
                )));
            }
            kinds.push(nm.kind);
        }
        if let InputSource::Synthetic { config } = &self.input {
            config.validate()?;
        }
        Ok(())
    }

    /// Master seed of a null-model ensemble.
    pub fn null_model_seed(&self, kind: NullModelKind) -> u64 {
        rng::stage_seed(self.master_seed, kind.name())
    }
}

/// Statistics of one metric at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointStats {
    /// Weighted mean over unit networks (mean of replicate means for null models).
    pub mean: f64,
    /// Weighted standard deviation over unit networks (replicate mean for null models).
    pub stdev: f64,
    /// Standard deviation of the scale mean across replicates; `None` for a single
    /// network.
    pub replicate_stdev: Option<f64>,
    /// Unit networks contributing (mean over replicates).
    pub units: f64,
    /// Replicates in which the metric was defined.
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub label: String,
    pub scale_m: f64,
    pub cells: usize,
    pub metrics: BTreeMap<Metric, PointStats>,
    pub retained_edges: PointStats,
    pub lost_edges: PointStats,
}

/// One network's metric curve over one partition family, ordered by scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleCurve {
    pub network: NetworkKind,
    pub family: Family,
    pub points: Vec<CurvePoint>,
}

impl ScaleCurve {
    pub fn values(&self, m: Metric) -> Vec<Option<f64>> {
        self.points
            .iter()
            .map(|p| p.metrics.get(&m).map(|s| s.mean))
            .collect()
    }
}

/// Index of the smallest scale from which every coarser value stays within
/// `tolerance * |last - first|` of the last value. A constant curve plateaus at once.
/// `None` when some value is not finite.
pub fn plateau_index(values: &[f64], tolerance: f64) -> Option<usize> {
    let (first, last) = (*values.first()?, *values.last()?);
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let band = tolerance * (last - first).abs();
    let mut start = values.len() - 1;
    for i in (0..values.len()).rev() {
        if (values[i] - last).abs() <= band {
            start = i;
        } else {
            break;
        }
    }
    Some(start)
}

/// Label of the characteristic (plateau) scale of `metric` on `curve`, or `None` when
/// the metric is missing at some scale.
pub fn detect_characteristic_scale(
    curve: &ScaleCurve,
    metric: Metric,
    plateau_tolerance: f64,
) -> Result<Option<String>> {
    if curve.points.len() < 3 {
        return Err(Error::validation(format!(
            "characteristic scale needs at least 3 points, got {}",
            curve.points.len()
        )));
    }
    let values: Option<Vec<f64>> = curve.values(metric).into_iter().collect();
    Ok(values
        .and_then(|v| plateau_index(&v, plateau_tolerance))
        .map(|i| curve.points[i].label.clone()))
}

/// One partition evaluated on one network.
#[derive(Debug, Clone)]
pub struct ScaleEvaluation {
    pub label: String,
    pub family: Family,
    pub scale_m: f64,
    pub cells: usize,
    /// `None` when every unit was excluded.
    pub aggregate: Option<metrics::ScaleAggregate>,
    pub retained: u64,
    pub lost: u64,
    pub unassigned_nodes: usize,
    pub dist: DistanceHistogram,
    pub loss: DistanceHistogram,
}

/// One network evaluated at every scale.
#[derive(Debug, Clone)]
pub struct NetworkEvaluation {
    pub whole: MetricRecord,
    pub mean_edge_distance: f64,
    pub original: DistanceHistogram,
    pub scales: Vec<ScaleEvaluation>,
}

/// Settings shared by every evaluation of a run.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub bin_width: f64,
    pub path_mode: PathMode,
    pub weighting: Weighting,
    pub exclude_partial_cells: bool,
}

impl From<&ExperimentConfig> for EvalOptions {
    fn from(c: &ExperimentConfig) -> Self {
        EvalOptions {
            bin_width: c.bin_width,
            path_mode: c.path_mode,
            weighting: c.weighting,
            exclude_partial_cells: c.exclude_partial_cells,
        }
    }
}

/// A partition with the family it belongs to.
#[derive(Debug, Clone)]
pub struct Scale {
    pub family: Family,
    pub partition: Partition,
}

/// Divides `g` by one partition and summarises the unit networks. Checks edge and
/// histogram conservation exactly.
pub fn evaluate_scale(
    g: &SpatialGraph,
    scale: &Scale,
    original: &DistanceHistogram,
    opts: &EvalOptions,
) -> Result<ScaleEvaluation> {
    let p = &scale.partition;
    let div = partition::divide(g, p);
    let records: Vec<(MetricRecord, f64)> = div
        .units
        .par_iter()
        .filter(|u| !opts.exclude_partial_cells || u.weight >= 1.0)
        .map(|u| {
            let w = match opts.weighting {
                Weighting::Coverage => u.weight,
                Weighting::Equal => 1.0,
                Weighting::Nodes => u.graph.node_count() as f64,
            };
            (metrics::compute_metrics(&u.graph, &opts.path_mode), w)
        })
        .collect();
    let aggregate = if records.is_empty() {
        None
    } else {
        Some(metrics::aggregate_scale(&records)?)
    };

    let mut dist = DistanceHistogram::new(opts.bin_width)?;
    for u in &div.units {
        dist.merge(&metrics::edge_distance_histogram(&u.graph, opts.bin_width)?)?;
    }
    let lost_hist =
        DistanceHistogram::from_distances(opts.bin_width, div.lost_edges.iter().map(|e| g.edge_distance(e)))?;
    let (retained, lost) = (div.retained_count as u64, div.lost_count() as u64);
    if retained + lost != g.edge_count() as u64 || dist.total != retained {
        return Err(Error::consistency(format!(
            "{}: retained {retained} + lost {lost} edges (histogram {}) != |E| {}",
            p.label,
            dist.total,
            g.edge_count()
        )));
    }
    let loss = metrics::loss_histogram(original, &dist)
        .map_err(|e| Error::consistency(format!("{}: {e}", p.label)))?;
    if loss != lost_hist {
        return Err(Error::consistency(format!(
            "{}: original minus retained distances differ from the lost edges' distances",
            p.label
        )));
    }
    if loss.zero_count != 0 {
        return Err(Error::consistency(format!(
            "{}: {} zero-distance edges were cut",
            p.label, loss.zero_count
        )));
    }
    Ok(ScaleEvaluation {
        label: p.label.clone(),
        family: scale.family,
        scale_m: p.scale_m(),
        cells: p.cells.len(),
        aggregate,
        retained,
        lost,
        unassigned_nodes: div.unassigned_nodes,
        dist,
        loss,
    })
}

pub fn evaluate_network(g: &SpatialGraph, scales: &[Scale], opts: &EvalOptions) -> Result<NetworkEvaluation> {
    let original = metrics::edge_distance_histogram(g, opts.bin_width)?;
    let evaluated = scales
        .par_iter()
        .map(|s| evaluate_scale(g, s, &original, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkEvaluation {
        whole: metrics::compute_metrics(g, &opts.path_mode),
        mean_edge_distance: g.mean_edge_distance(),
        original,
        scales: evaluated,
    })
}

/// Builds the grid ladder and polygon levels of a run, sorted by scale within each
/// family.
pub fn build_scales(cfg: &ExperimentConfig, area: &Rect) -> Result<Vec<Scale>> {
    let mut scales = Vec::new();
    if let Some(l) = &cfg.grid {
        for p in partition::grid_ladder(area, l.min, l.max, l.step)? {
            scales.push(Scale {
                family: Family::Grid,
                partition: p,
            });
        }
    }
    let mut polys = Vec::new();
    for src in &cfg.polygons {
        let p = match src {
            PolygonSource::File { path } => partition::load_polygon_partition(path, area)?,
            PolygonSource::Jittered { label, size, jitter } => partition::jittered_partition(
                area,
                *size,
                *jitter,
                rng::stage_seed(cfg.master_seed, &format!("polygons/{label}")),
                label,
            )?,
        };
        polys.push(Scale {
            family: Family::Polygon,
            partition: p,
        });
    }
    polys.sort_by(|a, b| {
        a.partition
            .scale_m()
            .total_cmp(&b.partition.scale_m())
            .then_with(|| a.partition.label.cmp(&b.partition.label))
    });
    scales.extend(polys);
    let mut seen = std::collections::BTreeSet::new();
    for s in &scales {
        if !seen.insert(s.partition.label.as_str()) {
            return Err(Error::validation(format!(
                "scale label {:?} used twice",
                s.partition.label
            )));
        }
    }
    Ok(scales)
}

/// Curves, histograms and whole-network summaries of one network kind.
#[derive(Debug, Clone)]
pub struct NetworkResults {
    pub network: NetworkKind,
    pub replicates: usize,
    /// Master seed and per-replicate seeds (null models only).
    pub master_seed: Option<u64>,
    pub replicate_seeds: Vec<u64>,
    pub curves: Vec<ScaleCurve>,
    pub whole: BTreeMap<String, PointStats>,
    pub original: MeanHistogram,
    /// Per scale label: (retained, lost) mean histograms.
    pub histograms: Vec<(String, MeanHistogram, MeanHistogram)>,
}

fn point_stats(means: &[f64], stdevs: &[f64], units: &[f64], single: bool) -> Option<PointStats> {
    let s = Summary::unweighted(means)?;
    let mean_of = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some(PointStats {
        mean: s.mean,
        stdev: mean_of(stdevs),
        replicate_stdev: (!single).then_some(s.stdev),
        units: mean_of(units),
        replicates: means.len(),
    })
}

fn count_stats(counts: &[u64], single: bool) -> PointStats {
    let v: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let s = Summary::unweighted(&v).expect("at least one replicate");
    PointStats {
        mean: s.mean,
        stdev: 0.0,
        replicate_stdev: (!single).then_some(s.stdev),
        units: 1.0,
        replicates: v.len(),
    }
}

/// Reduces per-replicate evaluations (in replicate order) to curves and histograms.
pub fn combine_evaluations(network: NetworkKind, evals: &[NetworkEvaluation]) -> Result<NetworkResults> {
    let single = network == NetworkKind::Observed;
    let first = evals
        .first()
        .ok_or_else(|| Error::validation("no evaluations to combine"))?;
    let mut curves: Vec<ScaleCurve> = Vec::new();
    let mut histograms = Vec::new();
    for (i, sc) in first.scales.iter().enumerate() {
        let at: Vec<&ScaleEvaluation> = evals.iter().map(|e| &e.scales[i]).collect();
        let mut point_metrics = BTreeMap::new();
        for m in Metric::ALL {
            let (mut means, mut stdevs, mut units) = (vec![], vec![], vec![]);
            for s in at
                .iter()
                .filter_map(|e| e.aggregate.as_ref().and_then(|a| a.get(m)))
            {
                means.push(s.mean);
                stdevs.push(s.stdev);
                units.push(s.count as f64);
            }
            if let Some(ps) = point_stats(&means, &stdevs, &units, single) {
                point_metrics.insert(m, ps);
            }
        }
        let retained: Vec<u64> = at.iter().map(|e| e.retained).collect();
        let lost: Vec<u64> = at.iter().map(|e| e.lost).collect();
        let point = CurvePoint {
            label: sc.label.clone(),
            scale_m: sc.scale_m,
            cells: sc.cells,
            metrics: point_metrics,
            retained_edges: count_stats(&retained, single),
            lost_edges: count_stats(&lost, single),
        };
        match curves.iter_mut().find(|c| c.family == sc.family) {
            Some(c) => c.points.push(point),
            None => curves.push(ScaleCurve {
                network,
                family: sc.family,
                points: vec![point],
            }),
        }
        let dists: Vec<DistanceHistogram> = at.iter().map(|e| e.dist.clone()).collect();
        let losses: Vec<DistanceHistogram> = at.iter().map(|e| e.loss.clone()).collect();
        histograms.push((
            sc.label.clone(),
            MeanHistogram::mean_of(&dists)?,
            MeanHistogram::mean_of(&losses)?,
        ));
    }
    let originals: Vec<DistanceHistogram> = evals.iter().map(|e| e.original.clone()).collect();
    let mut whole = BTreeMap::new();
    let scalar = |f: &dyn Fn(&NetworkEvaluation) -> Option<f64>| {
        let v: Vec<f64> = evals.iter().filter_map(f).collect();
        point_stats(&v, &vec![0.0; v.len()], &vec![1.0; v.len()], single)
    };
    for m in Metric::ALL {
        if let Some(ps) = scalar(&|e| e.whole.value(m)) {
            whole.insert(m.name().to_string(), ps);
        }
    }
    let extra: [(&str, &dyn Fn(&NetworkEvaluation) -> Option<f64>); 4] = [
        ("mean_edge_distance", &|e| Some(e.mean_edge_distance)),
        ("nodes", &|e| Some(e.whole.n as f64)),
        ("edges", &|e| Some(e.whole.e as f64)),
        ("mean_degree", &|e| {
            Some(2.0 * e.whole.e as f64 / e.whole.n.max(1) as f64)
        }),
    ];
    for (name, f) in extra {
        if let Some(ps) = scalar(f) {
            whole.insert(name.to_string(), ps);
        }
    }
    Ok(NetworkResults {
        network,
        replicates: evals.len(),
        master_seed: None,
        replicate_seeds: Vec::new(),
        curves,
        whole,
        original: MeanHistogram::mean_of(&originals)?,
        histograms,
    })
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub nodes: usize,
    pub edges: usize,
    pub networks: Vec<NetworkResults>,
    pub warnings: Vec<String>,
    pub timings: Vec<(String, f64)>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn network(&self, kind: NetworkKind) -> Option<&NetworkResults> {
        self.networks.iter().find(|n| n.network == kind)
    }

    pub fn curve(&self, kind: NetworkKind, family: Family) -> Option<&ScaleCurve> {
        self.network(kind)?.curves.iter().find(|c| c.family == family)
    }
}

/// Loads or generates the observed network.
pub fn load_input(input: &InputSource) -> Result<(SpatialGraph, Vec<String>)> {
    match input {
        InputSource::Synthetic { config } => {
            let (g, diag) = synthgen::generate_with_diagnostics(config, config.seed)?;
            let mut warnings = Vec::new();
            if diag.unplaced_workers > 0 {
                warnings.push(format!(
                    "synthgen: {} of {} workers found no workplace with free capacity",
                    diag.unplaced_workers, diag.employed
                ));
            }
            Ok((g, warnings))
        }
        InputSource::Files { nodes, edges, area } => {
            let loaded = io::read_graph(nodes, edges, *area)?;
            Ok((loaded.graph, Vec::new()))
        }
    }
}

/// Runs the whole study and writes the output directory. The manifest is written last,
/// so its presence marks a complete run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::validation(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut timings = Vec::new();
    let clock = Instant::now();
    // every input is read before any computation starts
    let (g, mut warnings) = load_input(&cfg.input)?;
    let scales = build_scales(cfg, g.study_area())?;
    timings.push(("load".to_string(), clock.elapsed().as_secs_f64()));
    let opts = EvalOptions::from(cfg);

    let clock = Instant::now();
    let observed = evaluate_network(&g, &scales, &opts)?;
    for s in observed.scales.iter().filter(|s| s.unassigned_nodes > 0) {
        warnings.push(format!(
            "{}: {} nodes fall in no cell",
            s.label, s.unassigned_nodes
        ));
    }
    let mut networks = vec![combine_evaluations(NetworkKind::Observed, &[observed])?];
    timings.push(("observed".to_string(), clock.elapsed().as_secs_f64()));

    let mut replicate_rows: Vec<(String, String)> = Vec::new();
    let mut models: Vec<&NullModelConfig> = cfg.null_models.iter().collect();
    models.sort_by_key(|m| m.kind);
    for nm in models {
        let clock = Instant::now();
        let master = cfg.null_model_seed(nm.kind);
        let model = NullModelConfig {
            master_seed: master,
            ..nm.clone()
        };
        let prepared = nullmodels::Prepared::new(&g, &model)?;
        let outputs = nullmodels::run_replicates(cfg.replicates, master, |_, seed| {
            let (net, stats) = prepared.realize(seed)?;
            let eval = evaluate_network(&net, &scales, &opts)?;
            Ok((eval, stats.and_then(|s| s.warning())))
        })?;
        let kind = NetworkKind::from(nm.kind);
        let seeds: Vec<u64> = (0..cfg.replicates as u64)
            .map(|i| nullmodels::replicate_seed(master, i))
            .collect();
        for (i, (_, w)) in outputs.iter().enumerate() {
            if let Some(w) = w {
                warnings.push(format!(
                    "{} replicate {i} (seed {:#018x}): {w}",
                    kind.name(),
                    seeds[i]
                ));
            }
        }
        let evals: Vec<NetworkEvaluation> = outputs.into_iter().map(|(e, _)| e).collect();
        if cfg.keep_replicate_histograms {
            for (i, e) in evals.iter().enumerate() {
                for s in &e.scales {
                    let stem = format!("{}_{}_r{i:04}", kind.name(), s.label);
                    replicate_rows.push((format!("replicates/dist_{stem}.csv"), io::histogram_csv(&s.dist)));
                    replicate_rows.push((format!("replicates/loss_{stem}.csv"), io::histogram_csv(&s.loss)));
                }
            }
        }
        let mut res = combine_evaluations(kind, &evals)?;
        res.master_seed = Some(master);
        res.replicate_seeds = seeds;
        networks.push(res);
        timings.push((kind.name().to_string(), clock.elapsed().as_secs_f64()));
    }

    let clock = Instant::now();
    let mut outcome = ExperimentOutcome {
        config: cfg.clone(),
        nodes: g.node_count(),
        edges: g.edge_count(),
        networks,
        warnings,
        timings,
        files: Vec::new(),
    };
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        io::write_text(&dir.join(name), text)?;
        files.push(PathBuf::from(name));
        Ok(())
    };
    for family in [Family::Grid, Family::Polygon] {
        if let Some(text) = curves_csv(&outcome.networks, family) {
            put(&family.curves_file(), &text)?;
        }
    }
    for n in &outcome.networks {
        let name = n.network.name();
        put(
            &format!("dist_{name}_original.csv"),
            &io::mean_histogram_csv(&n.original),
        )?;
        for (label, dist, loss) in &n.histograms {
            put(&format!("dist_{name}_{label}.csv"), &io::mean_histogram_csv(dist))?;
            put(&format!("loss_{name}_{label}.csv"), &io::mean_histogram_csv(loss))?;
        }
    }
    for (name, text) in &replicate_rows {
        put(name, text)?;
    }
    put("summary.csv", &summary_csv(&outcome.networks))?;
    put(
        "characteristic_scales.csv",
        &characteristic_csv(&outcome.networks, cfg.plateau_tolerance),
    )?;
    if cfg.plots {
        let charts = emit_plots(dir, &cfg.histogram_scales)?;
        files.extend(
            charts
                .into_iter()
                .filter_map(|p| p.strip_prefix(dir).ok().map(Path::to_path_buf)),
        );
    }
    outcome
        .timings
        .push(("write".to_string(), clock.elapsed().as_secs_f64()));
    outcome.files = files;
    io::write_text(&dir.join("manifest.json"), &manifest_json(&outcome))?;
    Ok(outcome)
}

pub const CURVE_HEADER: &str =
    "network,scale,scale_m,cells,metric,mean,stdev,replicate_stdev,units,replicates";

fn curve_row(out: &mut String, network: NetworkKind, p: &CurvePoint, metric: &str, s: &PointStats) {
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        network.name(),
        p.label,
        fmt_real(p.scale_m),
        p.cells,
        metric,
        fmt_real(s.mean),
        fmt_real(s.stdev),
        fmt_opt(s.replicate_stdev),
        fmt_real(s.units),
        s.replicates
    ));
}

/// Curve rows of one family, ordered by network, scale and metric. `None` when no
/// network has a scale of this family.
pub fn curves_csv(networks: &[NetworkResults], family: Family) -> Option<String> {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    let mut any = false;
    let mut ordered: Vec<&NetworkResults> = networks.iter().collect();
    ordered.sort_by_key(|n| n.network);
    for n in ordered {
        for c in n.curves.iter().filter(|c| c.family == family) {
            for p in &c.points {
                any = true;
                for (m, s) in &p.metrics {
                    curve_row(&mut out, n.network, p, m.name(), s);
                }
                curve_row(&mut out, n.network, p, "retained_edges", &p.retained_edges);
                curve_row(&mut out, n.network, p, "lost_edges", &p.lost_edges);
            }
        }
    }
    any.then_some(out)
}

fn summary_csv(networks: &[NetworkResults]) -> String {
    let mut out = String::from("network,metric,mean,stdev,replicates\n");
    for n in networks {
        for (name, s) in &n.whole {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                n.network.name(),
                name,
                fmt_real(s.mean),
                fmt_opt(s.replicate_stdev),
                s.replicates
            ));
        }
    }
    out
}

fn characteristic_csv(networks: &[NetworkResults], tolerance: f64) -> String {
    let mut out = String::from("network,family,metric,scale,scale_m\n");
    for n in networks {
        for c in &n.curves {
            for m in Metric::ALL {
                let found = if c.points.len() >= 3 {
                    detect_characteristic_scale(c, m, tolerance).ok().flatten()
                } else {
                    None
                };
                let scale_m = found
                    .as_ref()
                    .and_then(|l| c.points.iter().find(|p| &p.label == l))
                    .map(|p| p.scale_m);
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    n.network.name(),
                    c.family.name(),
                    m.name(),
                    found.unwrap_or_default(),
                    fmt_opt(scale_m)
                ));
            }
        }
    }
    out
}

fn manifest_json(o: &ExperimentOutcome) -> String {
    let null_models: Vec<_> = o
        .networks
        .iter()
        .filter(|n| n.network != NetworkKind::Observed)
        .map(|n| {
            json!({
                "network": n.network.name(),
                "master_seed": n.master_seed,
                "replicate_seeds": n.replicate_seeds,
            })
        })
        .collect();
    let timings: serde_json::Map<String, serde_json::Value> =
        o.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let manifest = json!({
        "tool": "scalenet",
        "version": env!("CARGO_PKG_VERSION"),
        "mix_function": rng::MIX_FUNCTION,
        "master_seed": o.config.master_seed,
        "config": o.config,
        "network": { "nodes": o.nodes, "edges": o.edges },
        "null_models": null_models,
        "warnings": o.warnings,
        "timings_s": timings,
        "files": o.files,
    });
    serde_json::to_string_pretty(&manifest).expect("serialisable") + "\n"
}
