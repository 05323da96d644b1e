//! Areal units and the division of a network into unit networks.
//!
//! Regular grids are anchored at the study area's minimum corner (optionally shifted
//! by an offset) and use half-open cells `[x0, x1) x [y0, y1)`; points on the study
//! area's upper boundary fall in the last row/column. Polygon partitions are read from
//! GeoJSON and use even-odd containment with boundary points assigned to the lowest
//! containing cell id.

use std::path::Path;

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, Rect};
use crate::graph::{Edge, NodeId, NodeRecord, SpatialGraph};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum CellGeometry {
    Rect(Rect),
    Polygon(Polygon),
}

impl CellGeometry {
    pub fn bbox(&self) -> Rect {
        match self {
            CellGeometry::Rect(r) => *r,
            CellGeometry::Polygon(p) => *p.bbox(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            CellGeometry::Rect(r) => r.area(),
            CellGeometry::Polygon(p) => p.area(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: u64,
    pub geometry: CellGeometry,
    /// Share of the cell's area inside the study area, in (0, 1].
    pub coverage: f64,
}

#[derive(Debug, Clone)]
enum Locator {
    Grid {
        origin: Point,
        size: f64,
        ncols: usize,
        nrows: usize,
        area: Rect,
    },
    Buckets {
        frame: Rect,
        nx: usize,
        ny: usize,
        // cell positions per bucket, ascending by cell id
        buckets: Vec<Vec<u32>>,
    },
}

/// A set of areal cells at one scale.
#[derive(Debug, Clone)]
pub struct Partition {
    pub label: String,
    /// Side length for grids.
    pub nominal_size: Option<f64>,
    pub cells: Vec<Cell>,
    locator: Locator,
}

impl Partition {
    /// Linear size used to order scales: the grid side, or the side of a square with the
    /// mean cell area for polygon partitions.
    pub fn scale_m(&self) -> f64 {
        self.nominal_size.unwrap_or_else(|| {
            let mean =
                self.cells.iter().map(|c| c.geometry.area()).sum::<f64>() / self.cells.len().max(1) as f64;
            mean.sqrt()
        })
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.locator, Locator::Grid { .. })
    }

    /// Position (index into `cells`) of the cell holding `p`, if any.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        match &self.locator {
            Locator::Grid {
                origin,
                size,
                ncols,
                nrows,
                area,
            } => {
                if !area.contains(p) {
                    return None;
                }
                let col = (((p.x - origin.x) / size).floor() as usize).min(ncols - 1);
                let row = (((p.y - origin.y) / size).floor() as usize).min(nrows - 1);
                Some(row * ncols + col)
            }
            Locator::Buckets {
                frame,
                nx,
                ny,
                buckets,
            } => {
                if !frame.contains(p) {
                    return None;
                }
                let bx = bucket_index(p.x, frame.xmin, frame.width(), *nx);
                let by = bucket_index(p.y, frame.ymin, frame.height(), *ny);
                buckets[by * nx + bx]
                    .iter()
                    .map(|&pos| pos as usize)
                    .find(|&pos| match &self.cells[pos].geometry {
                        CellGeometry::Polygon(poly) => poly.contains(p),
                        CellGeometry::Rect(r) => r.contains(p),
                    })
            }
        }
    }
}

fn bucket_index(v: f64, lo: f64, extent: f64, n: usize) -> usize {
    (((v - lo) / extent * n as f64).floor().max(0.0) as usize).min(n - 1)
}

/// Regular grid of `cell_size` squares over `area`, anchored at the minimum corner.
pub fn make_grid(area: &Rect, cell_size: f64) -> Result<Partition> {
    make_grid_with_offset(area, cell_size, (0.0, 0.0))
}

/// As [`make_grid`], with the grid origin moved to `area.min - offset`. Offsets are
/// taken modulo `cell_size`.
pub fn make_grid_with_offset(area: &Rect, cell_size: f64, offset: (f64, f64)) -> Result<Partition> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::validation(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    let origin = Point::new(
        area.xmin - offset.0.rem_euclid(cell_size),
        area.ymin - offset.1.rem_euclid(cell_size),
    );
    let ncols = ((area.xmax - origin.x) / cell_size).ceil().max(1.0) as usize;
    let nrows = ((area.ymax - origin.y) / cell_size).ceil().max(1.0) as usize;
    if ncols == 1 && nrows == 1 {
        log::warn!(
            "cell size {cell_size} m covers the whole {}x{} m study area: single cell",
            area.width(),
            area.height()
        );
    }
    let mut cells = Vec::with_capacity(ncols * nrows);
    for row in 0..nrows {
        for col in 0..ncols {
            let r = Rect {
                xmin: origin.x + col as f64 * cell_size,
                ymin: origin.y + row as f64 * cell_size,
                xmax: origin.x + (col + 1) as f64 * cell_size,
                ymax: origin.y + (row + 1) as f64 * cell_size,
            };
            let coverage = (r.intersection_area(area) / r.area()).min(1.0);
            // the locator indexes cells by row-major position, so every slot is kept;
            // the ceil() above guarantees positive overlap
            debug_assert!(coverage > 0.0);
            cells.push(Cell {
                id: (row * ncols + col) as u64,
                geometry: CellGeometry::Rect(r),
                coverage,
            });
        }
    }
    Ok(Partition {
        label: format!("grid-{cell_size}"),
        nominal_size: Some(cell_size),
        cells,
        locator: Locator::Grid {
            origin,
            size: cell_size,
            ncols,
            nrows,
            area: *area,
        },
    })
}

/// Grids of side `min, min + step, ...` up to `max` inclusive. An inverted range
/// yields no partitions.
pub fn grid_ladder(area: &Rect, min: f64, max: f64, step: f64) -> Result<Vec<Partition>> {
    if !(min > 0.0 && step > 0.0) {
        return Err(Error::validation(format!(
            "grid ladder needs min > 0 and step > 0, got min {min}, step {step}"
        )));
    }
    if min > max {
        log::warn!("grid ladder min {min} exceeds max {max}: no scales");
        return Ok(Vec::new());
    }
    let rungs = ((max - min) / step + 1e-9).floor() as usize + 1;
    (0..rungs)
        .map(|i| make_grid(area, min + i as f64 * step))
        .collect()
}

/// Builds a polygon partition. Cells that do not overlap the study area are dropped.
pub fn polygon_partition(label: &str, polys: Vec<(u64, Polygon)>, area: &Rect) -> Result<Partition> {
    let mut cells = Vec::with_capacity(polys.len());
    let mut ids = std::collections::HashSet::new();
    for (id, poly) in polys {
        if !ids.insert(id) {
            return Err(Error::validation(format!("duplicate polygon id {id}")));
        }
        let coverage = (poly.clipped_area(area) / poly.area()).min(1.0);
        if coverage <= 0.0 {
            log::warn!("polygon {id} lies outside the study area and is dropped");
            continue;
        }
        cells.push(Cell {
            id,
            geometry: CellGeometry::Polygon(poly),
            coverage,
        });
    }
    if cells.is_empty() {
        return Err(Error::validation(format!(
            "partition {label:?} has no cells in the study area"
        )));
    }
    cells.sort_by_key(|c| c.id);
    let locator = bucket_locator(&cells);
    Ok(Partition {
        label: label.to_string(),
        nominal_size: None,
        cells,
        locator,
    })
}

fn bucket_locator(cells: &[Cell]) -> Locator {
    let mut frame = cells[0].geometry.bbox();
    for c in &cells[1..] {
        let b = c.geometry.bbox();
        frame = Rect {
            xmin: frame.xmin.min(b.xmin),
            ymin: frame.ymin.min(b.ymin),
            xmax: frame.xmax.max(b.xmax),
            ymax: frame.ymax.max(b.ymax),
        };
    }
    let side = (cells.len() as f64).sqrt().ceil().max(1.0) as usize;
    let (nx, ny) = (side, side);
    let mut buckets = vec![Vec::new(); nx * ny];
    for (pos, c) in cells.iter().enumerate() {
        let b = c.geometry.bbox();
        let (x0, x1) = (
            bucket_index(b.xmin, frame.xmin, frame.width(), nx),
            bucket_index(b.xmax, frame.xmin, frame.width(), nx),
        );
        let (y0, y1) = (
            bucket_index(b.ymin, frame.ymin, frame.height(), ny),
            bucket_index(b.ymax, frame.ymin, frame.height(), ny),
        );
        for by in y0..=y1 {
            for bx in x0..=x1 {
                buckets[by * nx + bx].push(pos as u32);
            }
        }
    }
    Locator::Buckets {
        frame,
        nx,
        ny,
        buckets,
    }
}

/// Reads a GeoJSON FeatureCollection of Polygon features with integer `id` and text
/// `level` properties. Only single-ring polygons are accepted.
pub fn load_polygon_partition(path: &Path, area: &Rect) -> Result<Partition> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_polygon_partition(&text, area).map_err(|e| match e {
        Error::Validation(msg) => Error::validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_polygon_partition(text: &str, area: &Rect) -> Result<Partition> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::validation(format!("invalid GeoJSON: {e}")))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::validation("expected a GeoJSON FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::validation("FeatureCollection has no features array"))?;
    let mut level: Option<String> = None;
    let mut polys = Vec::with_capacity(features.len());
    for (k, f) in features.iter().enumerate() {
        let props = f.get("properties").unwrap_or(&Value::Null);
        let id = props
            .get("id")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::validation(format!("feature {k}: missing integer property id")))?;
        let lvl = props.get("level").and_then(Value::as_str).ok_or_else(|| {
            Error::validation(format!("feature {k} (id {id}): missing text property level"))
        })?;
        match &level {
            None => level = Some(lvl.to_string()),
            Some(l) if l != lvl => {
                return Err(Error::validation(format!(
                    "feature {k} (id {id}): level {lvl:?} differs from {l:?}"
                )))
            }
            _ => {}
        }
        let geom = f
            .get("geometry")
            .ok_or_else(|| Error::validation(format!("feature id {id}: missing geometry")))?;
        if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
            return Err(Error::validation(format!(
                "feature id {id}: geometry is not a Polygon"
            )));
        }
        let rings = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::validation(format!("feature id {id}: missing coordinates")))?;
        if rings.len() != 1 {
            return Err(Error::validation(format!(
                "feature id {id}: {} rings; holes are not supported",
                rings.len()
            )));
        }
        let ring = parse_ring(&rings[0])
            .map_err(|msg| Error::validation(format!("ring of feature id {id}: {msg}")))?;
        let poly = Polygon::from_closed_ring(&ring)
            .map_err(|e| Error::validation(format!("ring of feature id {id}: {e}")))?;
        polys.push((id, poly));
    }
    let label = level.ok_or_else(|| Error::validation("FeatureCollection is empty"))?;
    polygon_partition(&label, polys, area)
}

fn parse_ring(v: &Value) -> std::result::Result<Vec<Point>, String> {
    let positions = v.as_array().ok_or("ring is not an array")?;
    positions
        .iter()
        .map(|pos| match pos.as_array().map(|a| a.as_slice()) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok(Point::new(x, y)),
                _ => Err(format!("non-numeric position {pos}")),
            },
            _ => Err(format!("bad position {pos}")),
        })
        .collect()
}

/// GeoJSON text for a polygon partition (grid cells are written as rectangles).
pub fn partition_to_geojson(p: &Partition) -> String {
    let features: Vec<Value> = p
        .cells
        .iter()
        .map(|c| {
            let ring: Vec<Point> = match &c.geometry {
                CellGeometry::Rect(r) => r.corners().to_vec(),
                CellGeometry::Polygon(poly) => poly.ring().to_vec(),
            };
            let mut coords: Vec<[f64; 2]> = ring.iter().map(|q| [q.x, q.y]).collect();
            coords.push(coords[0]);
            json!({
                "type": "Feature",
                "properties": { "id": c.id, "level": p.label },
                "geometry": { "type": "Polygon", "coordinates": [coords] },
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "type": "FeatureCollection", "features": features }))
        .expect("serialisable")
}

/// Irregular tessellation of `area` into roughly `size x size` quadrilaterals: a
/// lattice whose interior vertices are displaced by up to `jitter` (fraction of the
/// spacing, below 0.25 so quads stay simple). Boundary vertices stay on the boundary,
/// so the cells tile the study area exactly. Stands in for census-style units.
pub fn jittered_partition(area: &Rect, size: f64, jitter: f64, seed: u64, label: &str) -> Result<Partition> {
    if !(size > 0.0) || !(0.0..0.25).contains(&jitter) {
        return Err(Error::validation(format!(
            "jittered partition needs size > 0 and jitter in [0, 0.25), got {size}, {jitter}"
        )));
    }
    let nx = (area.width() / size).round().max(1.0) as usize;
    let ny = (area.height() / size).round().max(1.0) as usize;
    let (sx, sy) = (area.width() / nx as f64, area.height() / ny as f64);
    let mut r = rng::rng_from_seed(seed);
    let mut vertex = vec![Point::new(0.0, 0.0); (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let mut x = area.xmin + i as f64 * sx;
            let mut y = area.ymin + j as f64 * sy;
            if i == nx {
                x = area.xmax;
            }
            if j == ny {
                y = area.ymax;
            }
            if i > 0 && i < nx {
                x += r.random_range(-jitter..=jitter) * sx;
            }
            if j > 0 && j < ny {
                y += r.random_range(-jitter..=jitter) * sy;
            }
            vertex[j * (nx + 1) + i] = Point::new(x, y);
        }
    }
    let v = |i: usize, j: usize| vertex[j * (nx + 1) + i];
    let mut polys = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let ring = vec![v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            polys.push(((j * nx + i) as u64, Polygon::from_open_ring(ring)?));
        }
    }
    polygon_partition(label, polys, area)
}

/// Cell position of every node, or `None` for nodes outside all cells.
pub fn assign_nodes(g: &SpatialGraph, p: &Partition) -> Vec<Option<u32>> {
    g.nodes()
        .iter()
        .map(|n| p.locate(&n.location).map(|pos| pos as u32))
        .collect()
}

/// The subgraph induced by one cell.
#[derive(Debug, Clone)]
pub struct UnitNetwork {
    pub cell_id: u64,
    pub graph: SpatialGraph,
    /// Original node id of each local node.
    pub node_ids: Vec<NodeId>,
    /// The cell's coverage fraction.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct DivisionResult {
    /// One unit network per cell holding at least one node, ordered by cell position.
    pub units: Vec<UnitNetwork>,
    pub lost_edges: Vec<Edge>,
    pub retained_count: usize,
    /// Nodes that fall in no cell; excluded from this scale.
    pub unassigned_nodes: usize,
}

impl DivisionResult {
    pub fn lost_count(&self) -> usize {
        self.lost_edges.len()
    }
}

/// Splits `g` into unit networks: an edge is retained when both endpoints lie in the
/// same cell, and lost otherwise. Cells without nodes produce no unit network.
pub fn divide(g: &SpatialGraph, p: &Partition) -> DivisionResult {
    let assignment = assign_nodes(g, p);
    let ncells = p.cells.len();
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); ncells];
    let mut local = vec![u32::MAX; g.node_count()];
    let mut unassigned = 0;
    for (i, a) in assignment.iter().enumerate() {
        match a {
            Some(pos) => {
                let m = &mut members[*pos as usize];
                local[i] = m.len() as u32;
                m.push(i as NodeId);
            }
            None => unassigned += 1,
        }
    }
    let mut cell_edges: Vec<Vec<Edge>> = vec![Vec::new(); ncells];
    let mut lost_edges = Vec::new();
    for e in g.edges() {
        match (assignment[e.u as usize], assignment[e.v as usize]) {
            (Some(a), Some(b)) if a == b => cell_edges[a as usize].push(Edge {
                u: local[e.u as usize],
                v: local[e.v as usize],
                kind: e.kind,
            }),
            _ => lost_edges.push(*e),
        }
    }
    let retained_count = g.edge_count() - lost_edges.len();
    let units = members
        .into_iter()
        .zip(cell_edges)
        .enumerate()
        .filter(|(_, (m, _))| !m.is_empty())
        .map(|(pos, (node_ids, edges))| {
            let cell = &p.cells[pos];
            let nodes: Vec<NodeRecord> = node_ids
                .iter()
                .enumerate()
                .map(|(k, &orig)| NodeRecord {
                    id: k as NodeId,
                    ..g.nodes()[orig as usize].clone()
                })
                .collect();
            let frame = cell
                .geometry
                .bbox()
                .intersection(g.study_area())
                .unwrap_or(cell.geometry.bbox());
            UnitNetwork {
                cell_id: cell.id,
                // local ids ascend with original ids, so canonical order is preserved
                graph: SpatialGraph::from_parts_unchecked(nodes, edges, frame),
                node_ids,
                weight: cell.coverage,
            }
        })
        .collect();
    DivisionResult {
        units,
        lost_edges,
        retained_count,
        unassigned_nodes: unassigned,
    }
}
