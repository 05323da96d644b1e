use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scalenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalenet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 1,500-person network in `dir/g`.
fn generated(dir: &Path) -> PathBuf {
    let g = dir.join("g");
    let out = scalenet(&["generate", "--individuals", "1500", "--seed", "3", "--out", s(&g)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    g
}

fn read_edges(dir: &Path) -> Vec<(usize, usize)> {
    fs::read_to_string(dir.join("edges.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            let u = f.next().unwrap().parse().unwrap();
            let v = f.next().unwrap().parse().unwrap();
            (u, v)
        })
        .collect()
}

fn read_nodes(dir: &Path) -> BTreeMap<usize, (f64, f64)> {
    fs::read_to_string(dir.join("nodes.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                (f[1].parse().unwrap(), f[2].parse().unwrap()),
            )
        })
        .collect()
}

fn degrees(edges: &[(usize, usize)]) -> BTreeMap<usize, usize> {
    let mut d = BTreeMap::new();
    for &(u, v) in edges {
        *d.entry(u).or_insert(0) += 1;
        *d.entry(v).or_insert(0) += 1;
    }
    d
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&scalenet(&["--help"])), 0);
    assert_eq!(code(&scalenet(&["--version"])), 0);
    assert_eq!(code(&scalenet(&["experiment", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&scalenet(&[])), 1);
    assert_eq!(code(&scalenet(&["frobnicate"])), 1);
    assert_eq!(
        code(&scalenet(&[
            "divide", "--nodes", "a", "--edges", "b", "--out", "c"
        ])),
        1
    );
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = scalenet(&[
        "metrics",
        "--nodes",
        s(&dir.path().join("none.csv")),
        "--edges",
        s(&dir.path().join("none_e.csv")),
        "--area",
        "0,0,10,10",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("none.csv"));
}

#[test]
fn missing_area_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("n.csv"),
        "id,x,y,household,workplace\n0,1,1,0,\n1,2,2,1,\n",
    )
    .unwrap();
    fs::write(dir.path().join("e.csv"), "u,v,kind\n0,1,family\n").unwrap();
    let args = [
        "metrics",
        "--nodes",
        &format!("{}/n.csv", s(dir.path())),
        "--edges",
        &format!("{}/e.csv", s(dir.path())),
    ];
    let out = scalenet(&args.iter().map(|a| a.as_ref()).collect::<Vec<&str>>());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--area"));

    // a node outside the given area is also a validation error
    let mut with_area: Vec<&str> = args.iter().map(|a| a.as_ref()).collect();
    with_area.extend(["--area", "0,0,1.5,1.5"]);
    assert_eq!(code(&scalenet(&with_area)), 1);
}

#[test]
fn generate_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let g = generated(dir.path());
    for f in ["nodes.csv", "edges.csv", "study_area.txt", "calibration.json"] {
        assert!(g.join(f).exists(), "{f}");
    }
    let calib: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(g.join("calibration.json")).unwrap()).unwrap();
    assert_eq!(calib["seed"], 3);

    let out = scalenet(&[
        "metrics",
        "--nodes",
        s(&g.join("nodes.csv")),
        "--edges",
        s(&g.join("edges.csv")),
        "--exact",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["nodes"], 1500);
    let edges = read_edges(&g);
    assert_eq!(m["edges"], edges.len());
    let mean_degree = m["mean_degree"].as_f64().unwrap();
    assert!((mean_degree - 2.0 * edges.len() as f64 / 1500.0).abs() < 1e-12);
    let s_rel = m["S"].as_f64().unwrap();
    assert!(s_rel > 0.0 && s_rel <= 1.0);

    // same seed, same bytes
    let again = dir.path().join("again");
    scalenet(&[
        "generate",
        "--individuals",
        "1500",
        "--seed",
        "3",
        "--out",
        s(&again),
    ]);
    assert_eq!(
        fs::read(g.join("edges.csv")).unwrap(),
        fs::read(again.join("edges.csv")).unwrap()
    );
    assert_eq!(
        fs::read(g.join("nodes.csv")).unwrap(),
        fs::read(again.join("nodes.csv")).unwrap()
    );
}

#[test]
fn rewire_keeps_degrees_and_distance_bins() {
    let dir = tempfile::tempdir().unwrap();
    let g = generated(dir.path());
    let r = dir.path().join("r");
    let out = scalenet(&[
        "rewire",
        "--nodes",
        s(&g.join("nodes.csv")),
        "--edges",
        s(&g.join("edges.csv")),
        "--seed",
        "9",
        "--out",
        s(&r),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let before = read_edges(&g);
    let after = read_edges(&r);
    assert_eq!(degrees(&before), degrees(&after));
    assert_ne!(before, after);

    let pos = read_nodes(&g);
    assert_eq!(pos, read_nodes(&r));
    let bins = |edges: &[(usize, usize)]| {
        let mut c = BTreeMap::new();
        for &(u, v) in edges {
            let (a, b) = (pos[&u], pos[&v]);
            let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            *c.entry((d / 50.0).floor() as u64).or_insert(0) += 1;
        }
        c
    };
    assert_eq!(bins(&before), bins(&after));

    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(r.join("rewire.json")).unwrap()).unwrap();
    assert_eq!(stats["accepted"], 10 * before.len());
    assert_eq!(stats["under_mixed"], false);
}

#[test]
fn shuffle_nodes_permutes_locations() {
    let dir = tempfile::tempdir().unwrap();
    let g = generated(dir.path());
    let r = dir.path().join("rn");
    let out = scalenet(&[
        "shuffle-nodes",
        "--nodes",
        s(&g.join("nodes.csv")),
        "--edges",
        s(&g.join("edges.csv")),
        "--out",
        s(&r),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_edges(&g), read_edges(&r));
    let key = |p: &(f64, f64)| (p.0.to_bits(), p.1.to_bits());
    let mut a: Vec<_> = read_nodes(&g).values().map(key).collect();
    let mut b: Vec<_> = read_nodes(&r).values().map(key).collect();
    assert_ne!(a, b);
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn divide_by_grid_and_polygons() {
    let dir = tempfile::tempdir().unwrap();
    let g = generated(dir.path());
    let area = fs::read_to_string(g.join("study_area.txt")).unwrap();
    let c: Vec<f64> = area.trim().split(',').map(|x| x.parse().unwrap()).collect();
    let total = read_edges(&g).len() as u64;

    let check = |out_dir: &Path| {
        let count = |f: &str| -> u64 {
            fs::read_to_string(out_dir.join(f))
                .unwrap()
                .lines()
                .skip(1)
                .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
                .sum()
        };
        assert_eq!(count("dist.csv") + count("loss.csv"), total);
        let units = fs::read_to_string(out_dir.join("units.csv")).unwrap();
        assert!(units.starts_with("cell_id,weight,nodes,edges,S,s_other,cc,l_rel\n"));
        let nodes: u64 = units
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(nodes, 1500);
    };

    let grid = dir.path().join("grid");
    let out = scalenet(&[
        "divide",
        "--nodes",
        s(&g.join("nodes.csv")),
        "--edges",
        s(&g.join("edges.csv")),
        "--cell-size",
        "250",
        "--out",
        s(&grid),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    check(&grid);

    // two halves split at the midline
    let mid = (c[0] + c[2]) / 2.0;
    let feature = |id: u32, x0: f64, x1: f64| {
        serde_json::json!({
            "type": "Feature",
            "properties": {"id": id, "level": "halves"},
            "geometry": {"type": "Polygon", "coordinates": [[[x0, c[1]], [x1, c[1]], [x1, c[3]], [x0, c[3]], [x0, c[1]]]]},
        })
    };
    let fc = serde_json::json!({"type": "FeatureCollection", "features": [feature(0, c[0], mid), feature(1, mid, c[2])]});
    let poly = dir.path().join("halves.geojson");
    fs::write(&poly, fc.to_string()).unwrap();
    let halves = dir.path().join("halves");
    let out = scalenet(&[
        "divide",
        "--nodes",
        s(&g.join("nodes.csv")),
        "--edges",
        s(&g.join("edges.csv")),
        "--polygons",
        s(&poly),
        "--out",
        s(&halves),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    check(&halves);
    assert_eq!(
        fs::read_to_string(halves.join("units.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn experiment_writes_manifest_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let g = generated(dir.path());
    let area: Vec<f64> = fs::read_to_string(g.join("study_area.txt"))
        .unwrap()
        .trim()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    let cfg = serde_json::json!({
        "input": {
            "kind": "files",
            "nodes": g.join("nodes.csv"),
            "edges": g.join("edges.csv"),
            "area": {"xmin": area[0], "ymin": area[1], "xmax": area[2], "ymax": area[3]},
        },
        "grid": {"min": 200.0, "max": 600.0, "step": 200.0},
        "polygons": [{"kind": "jittered", "label": "blocks", "size": 300.0, "jitter": 0.2}],
        "histogram_scales": ["grid-400"],
    });
    let cfg_path = dir.path().join("exp.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let run = |out: &Path| {
        let o = scalenet(&[
            "experiment",
            "--config",
            s(&cfg_path),
            "--replicates",
            "2",
            "--seed",
            "5",
            "--workers",
            "2",
            "--out",
            s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    let first = dir.path().join("first");
    run(&first);
    let curves = fs::read_to_string(first.join("curves_grid.csv")).unwrap();
    assert!(curves
        .starts_with("network,scale,scale_m,cells,metric,mean,stdev,replicate_stdev,units,replicates\n"));
    for net in ["observed", "random_node", "random_edge"] {
        assert!(
            curves.lines().any(|l| l.starts_with(&format!("{net},grid-600,"))),
            "{net}"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 5);
    assert!(first.join("plots").is_dir());

    // replaying from the manifest reproduces the curves byte for byte
    let second = dir.path().join("second");
    let o = scalenet(&[
        "experiment",
        "--config",
        s(&first.join("manifest.json")),
        "--workers",
        "1",
        "--out",
        s(&second),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["curves_grid.csv", "curves_polygon.csv", "summary.csv"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }

    // plot re-renders from the CSVs alone
    let o = scalenet(&["plot", "--out", s(&first), "--scales", "grid-400,blocks"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(first.join("plots/loss_blocks.svg").exists());
}

#[test]
fn bad_experiment_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, r#"{"replicates": 0}"#).unwrap();
    assert_eq!(
        code(&scalenet(&[
            "experiment",
            "--config",
            s(&p),
            "--out",
            s(dir.path())
        ])),
        1
    );
    fs::write(&p, r#"{"no_such_field": 1}"#).unwrap();
    assert_eq!(
        code(&scalenet(&[
            "experiment",
            "--config",
            s(&p),
            "--out",
            s(dir.path())
        ])),
        1
    );
}
