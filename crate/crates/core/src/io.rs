//! File formats: node/edge CSVs, histogram CSVs and fixed real-number formatting.
//!
//! Node file header `id,x,y,household,workplace` (empty workplace when none); edge file
//! header `u,v,kind` with kind `family` or `coworker`. External node ids may be any
//! text; they are mapped to dense indices in file order and kept alongside the graph.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::graph::{Edge, EdgeKind, NodeId, NodeRecord, SpatialGraph};
use crate::metrics::{DistanceHistogram, MeanHistogram};

/// Real numbers in output CSVs: 17 significant digits in scientific notation, so a
/// value round-trips and its text never depends on platform formatting. Missing values
/// are written as an empty field.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x == 0.0 {
        // no negative zero in outputs
        format!("{:.16e}", 0.0f64)
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_real)
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRow {
    id: String,
    x: f64,
    y: f64,
    household: u64,
    workplace: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    u: String,
    v: String,
    kind: EdgeKind,
}

/// A graph read from CSV files, with the external id of every dense node index.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: SpatialGraph,
    pub external_ids: Vec<String>,
}

impl LoadedGraph {
    /// True when external ids are exactly `0..n` in order, so no sidecar is needed.
    pub fn ids_are_dense(&self) -> bool {
        self.external_ids
            .iter()
            .enumerate()
            .all(|(i, id)| id.parse::<usize>() == Ok(i))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::format(path, format!("{other:?}")),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::format(
            path,
            format!("expected header {:?}, found {:?}", expected.join(","), headers),
        ));
    }
    Ok(())
}

pub fn read_graph(nodes_path: &Path, edges_path: &Path, study_area: Rect) -> Result<LoadedGraph> {
    let mut rdr = open_csv(nodes_path)?;
    check_header(nodes_path, &mut rdr, &["id", "x", "y", "household", "workplace"])?;
    let mut external_ids = Vec::new();
    let mut index: HashMap<String, NodeId> = HashMap::new();
    let mut nodes = Vec::new();
    for row in rdr.deserialize::<NodeRow>() {
        let row = row.map_err(|e| csv_error(nodes_path, e))?;
        let id = nodes.len() as NodeId;
        if index.insert(row.id.clone(), id).is_some() {
            return Err(Error::validation(format!("duplicate node id {:?}", row.id)));
        }
        nodes.push(NodeRecord {
            id,
            location: Point::new(row.x, row.y),
            household: row.household,
            workplace: row.workplace,
        });
        external_ids.push(row.id);
    }

    let mut rdr = open_csv(edges_path)?;
    check_header(edges_path, &mut rdr, &["u", "v", "kind"])?;
    let mut edges = Vec::new();
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::validation(format!("edge references unknown node {id:?}")))
    };
    for row in rdr.deserialize::<EdgeRow>() {
        let row = row.map_err(|e| csv_error(edges_path, e))?;
        edges.push(Edge::new(lookup(&row.u)?, lookup(&row.v)?, row.kind));
    }
    let graph = SpatialGraph::new(nodes, edges, study_area)?;
    Ok(LoadedGraph { graph, external_ids })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(contents.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes node and edge CSVs. Coordinates use Rust's shortest round-trip formatting,
/// so a written graph reads back bit-identically.
pub fn write_graph(
    g: &SpatialGraph,
    external_ids: Option<&[String]>,
    nodes_path: &Path,
    edges_path: &Path,
) -> Result<()> {
    let id_of =
        |i: NodeId| -> String { external_ids.map_or_else(|| i.to_string(), |ids| ids[i as usize].clone()) };
    let mut out = String::from("id,x,y,household,workplace\n");
    for n in g.nodes() {
        let wp = n.workplace.map(|w| w.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            id_of(n.id),
            n.location.x,
            n.location.y,
            n.household,
            wp
        ));
    }
    write_text(nodes_path, &out)?;
    let mut out = String::from("u,v,kind\n");
    for e in g.edges() {
        out.push_str(&format!("{},{},{}\n", id_of(e.u), id_of(e.v), e.kind));
    }
    write_text(edges_path, &out)
}

/// Sidecar mapping from dense index to external id.
pub fn write_id_map(path: &Path, external_ids: &[String]) -> Result<()> {
    let mut out = String::from("index,external_id\n");
    for (i, id) in external_ids.iter().enumerate() {
        out.push_str(&format!("{i},{id}\n"));
    }
    write_text(path, &out)
}

pub fn histogram_csv(h: &DistanceHistogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (lo, hi, c) in h.rows() {
        out.push_str(&format!("{lo},{hi},{c}\n"));
    }
    out
}

pub fn mean_histogram_csv(h: &MeanHistogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (lo, hi, c) in h.rows() {
        out.push_str(&format!("{lo},{hi},{}\n", fmt_real(c)));
    }
    out
}

/// Parses `xmin,ymin,xmax,ymax`.
pub fn parse_rect(s: &str) -> Result<Rect> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::validation(format!("bad study area {s:?}: {e}")))?;
    match parts[..] {
        [xmin, ymin, xmax, ymax] => Rect::new(xmin, ymin, xmax, ymax),
        _ => Err(Error::validation(format!(
            "study area needs four values xmin,ymin,xmax,ymax, got {s:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_is_fixed_width_scientific() {
        assert_eq!(fmt_real(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_real(-0.0), "0.0000000000000000e0");
        assert_eq!(fmt_real(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_real(f64::NAN), "");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn graph_round_trip_with_text_ids() {
        let dir = tempfile::tempdir().unwrap();
        let (np, ep) = (dir.path().join("n.csv"), dir.path().join("e.csv"));
        std::fs::write(
            &np,
            "id,x,y,household,workplace\nalice,0.1,2,7,\nbob,0.1,2,7,3\ncarol,100.25,-3.5,8,3\n",
        )
        .unwrap();
        std::fs::write(&ep, "u,v,kind\nbob,alice,family\nbob,carol,coworker\n").unwrap();
        let area = Rect::new(-10.0, -10.0, 200.0, 200.0).unwrap();
        let loaded = read_graph(&np, &ep, area).unwrap();
        assert!(!loaded.ids_are_dense());
        let g = &loaded.graph;
        assert_eq!(g.edges()[0], Edge::new(0, 1, EdgeKind::Family));
        assert_eq!(g.nodes()[1].workplace, Some(3));
        assert_eq!(g.nodes()[0].workplace, None);
        g.check_household_structure().unwrap();

        let (np2, ep2) = (dir.path().join("n2.csv"), dir.path().join("e2.csv"));
        write_graph(g, Some(&loaded.external_ids), &np2, &ep2).unwrap();
        let again = read_graph(&np2, &ep2, area).unwrap();
        assert_eq!(again.graph.nodes(), g.nodes());
        assert_eq!(again.graph.edges(), g.edges());
        assert_eq!(again.external_ids, loaded.external_ids);
    }

    #[test]
    fn bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let (np, ep) = (dir.path().join("n.csv"), dir.path().join("e.csv"));
        let area = Rect::with_size(10.0, 10.0).unwrap();
        std::fs::write(&np, "id,x,y,household,workplace\n0,0,0,0,\n1,1,1,1,\n").unwrap();
        std::fs::write(&ep, "u,v,kind\n0,2,family\n").unwrap();
        let err = read_graph(&np, &ep, area).unwrap_err();
        assert!(err.to_string().contains("unknown node"), "{err}");

        std::fs::write(&ep, "u,v,kind\n0,1,friend\n").unwrap();
        assert_eq!(
            read_graph(&np, &ep, area).unwrap_err().kind(),
            crate::ErrorKind::Io
        );

        std::fs::write(&ep, "a,b,c\n").unwrap();
        assert!(read_graph(&np, &ep, area)
            .unwrap_err()
            .to_string()
            .contains("header"));

        let missing = read_graph(&dir.path().join("nope.csv"), &ep, area).unwrap_err();
        assert_eq!(missing.kind(), crate::ErrorKind::Io);
    }

    #[test]
    fn rect_parsing() {
        assert_eq!(
            parse_rect("0,0,4800,3700").unwrap(),
            Rect::new(0.0, 0.0, 4800.0, 3700.0).unwrap()
        );
        assert!(parse_rect("0,0,1").is_err());
        assert!(parse_rect("0,0,x,1").is_err());
    }
}
