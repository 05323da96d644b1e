use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use scalenet::io::{self, fmt_opt, fmt_real};
use scalenet::metrics::{self, PathMode};
use scalenet::nullmodels::{self, NullModelConfig, NullModelKind, Placement};
use scalenet::partition;
use scalenet::pipeline::{self, ExperimentConfig};
use scalenet::synthgen::{self, CalibrationTargets, SynthConfig};
use scalenet::{Error, ErrorKind, Rect, Result, SpatialGraph};

/// Multi-scale analysis of spatially embedded contact networks.
///
/// Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal consistency
/// violation.
#[derive(Parser)]
#[command(name = "scalenet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args)]
struct Common {
    /// Seed; defaults to the config's seed, or 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GraphInput {
    /// Node CSV (`id,x,y,household,workplace`).
    #[arg(long)]
    nodes: PathBuf,
    /// Edge CSV (`u,v,kind`).
    #[arg(long)]
    edges: PathBuf,
    /// Study area `xmin,ymin,xmax,ymax`; defaults to `study_area.txt` next to the
    /// node file.
    #[arg(long)]
    area: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Permute,
    Uniform,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic contact network and its calibration report.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Population size; the default layout is rescaled to keep its density.
        #[arg(long)]
        individuals: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-node null model: permute locations, keep topology.
    ShuffleNodes {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: GraphInput,
        #[arg(long, value_enum, default_value = "permute")]
        placement: PlacementArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-edge null model: bin-preserving double-edge swaps.
    Rewire {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: GraphInput,
        /// Distance bin width, meters.
        #[arg(long)]
        bin_width: Option<f64>,
        /// Accepted swaps; defaults to 10 |E|.
        #[arg(long)]
        swaps: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Divide a network by a grid or polygon partition and summarise the unit networks.
    Divide {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: GraphInput,
        /// Grid cell size, meters.
        #[arg(long, conflicts_with = "polygons", required_unless_present = "polygons")]
        cell_size: Option<f64>,
        /// GeoJSON polygon partition.
        #[arg(long)]
        polygons: Option<PathBuf>,
        #[arg(long, default_value_t = 50.0)]
        bin_width: f64,
        /// Exact path lengths on every component.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Whole-network metrics as JSON.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        exact: bool,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full multi-scale experiment.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Replicates per null model.
        #[arg(long)]
        replicates: Option<usize>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG charts from an experiment's output directory.
    Plot {
        #[arg(long)]
        out: PathBuf,
        /// Scale labels that get histogram panels, comma separated.
        #[arg(long, value_delimiter = ',')]
        scales: Vec<String>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

fn install_workers(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::validation(format!("cannot start {n} workers: {e}")))
}

fn study_area(input: &GraphInput) -> Result<Rect> {
    if let Some(a) = &input.area {
        return io::parse_rect(a);
    }
    let sidecar = input
        .nodes
        .parent()
        .unwrap_or(Path::new("."))
        .join("study_area.txt");
    match std::fs::read_to_string(&sidecar) {
        Ok(text) => io::parse_rect(text.trim()),
        Err(_) => Err(Error::validation(format!(
            "--area is required ({} not found)",
            sidecar.display()
        ))),
    }
}

fn load(input: &GraphInput) -> Result<io::LoadedGraph> {
    let area = study_area(input)?;
    io::read_graph(&input.nodes, &input.edges, area)
}

fn area_text(a: &Rect) -> String {
    format!("{},{},{},{}\n", a.xmin, a.ymin, a.xmax, a.ymax)
}

/// Writes a graph as `nodes.csv`, `edges.csv` and `study_area.txt` in `dir`, plus an
/// id sidecar when the input used non-numeric ids.
fn save(g: &SpatialGraph, ids: Option<&[String]>, dir: &Path) -> Result<()> {
    io::write_graph(g, ids, &dir.join("nodes.csv"), &dir.join("edges.csv"))?;
    io::write_text(&dir.join("study_area.txt"), &area_text(g.study_area()))
}

fn path_mode(exact: bool, seed: u64) -> PathMode {
    if exact {
        PathMode::Exact
    } else {
        match PathMode::default() {
            PathMode::Sampled {
                threshold, samples, ..
            } => PathMode::Sampled {
                threshold,
                samples,
                seed,
            },
            m => m,
        }
    }
}

fn null_config(common: &Common, kind: NullModelKind) -> Result<NullModelConfig> {
    let mut cfg = match &common.config {
        Some(p) => read_json::<NullModelConfig>(p)?,
        None => NullModelConfig::default(),
    };
    cfg.kind = kind;
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            common,
            individuals,
            out,
        } => {
            install_workers(common.workers)?;
            let mut cfg = match &common.config {
                Some(p) => read_json::<SynthConfig>(p)?,
                None => SynthConfig::default(),
            };
            if let Some(n) = individuals {
                cfg = SynthConfig {
                    seed: cfg.seed,
                    ..cfg.scaled_to(n)
                };
            }
            let seed = common.seed.unwrap_or(cfg.seed);
            let (g, diag) = synthgen::generate_with_diagnostics(&cfg, seed)?;
            save(&g, None, &out)?;
            let report = synthgen::validate(&g, &CalibrationTargets::default());
            for l in &report.lines {
                let verdict = match l.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "report",
                };
                eprintln!(
                    "{:<24} target {:>10.4} achieved {:>10.4}  {verdict}",
                    l.name, l.target, l.achieved
                );
            }
            let body = serde_json::json!({
                "seed": seed,
                "config": cfg,
                "diagnostics": {
                    "households": diag.households,
                    "workplaces": diag.workplaces,
                    "employed": diag.employed,
                    "unplaced_workers": diag.unplaced_workers,
                },
                "calibration": report,
            });
            io::write_text(
                &out.join("calibration.json"),
                &(serde_json::to_string_pretty(&body).expect("json") + "\n"),
            )?;
            info!(
                "wrote {} nodes and {} edges to {}",
                g.node_count(),
                g.edge_count(),
                out.display()
            );
            Ok(())
        }
        Command::ShuffleNodes {
            common,
            input,
            placement,
            out,
        } => {
            let loaded = load(&input)?;
            let mut cfg = null_config(&common, NullModelKind::RandomNode)?;
            cfg.placement = match placement {
                PlacementArg::Permute => Placement::Permute,
                PlacementArg::Uniform => Placement::UniformRect,
            };
            let g = nullmodels::random_node_with(&loaded.graph, cfg.placement, cfg.master_seed);
            save(&g, Some(&loaded.external_ids), &out)
        }
        Command::Rewire {
            common,
            input,
            bin_width,
            swaps,
            out,
        } => {
            let loaded = load(&input)?;
            let mut cfg = null_config(&common, NullModelKind::RandomEdge)?;
            if let Some(w) = bin_width {
                cfg.bin_width = w;
            }
            if swaps.is_some() {
                cfg.swap_budget = swaps;
            }
            cfg.validate()?;
            let (g, stats) = nullmodels::random_edge(&loaded.graph, &cfg, cfg.master_seed)?;
            if let Some(w) = stats.warning() {
                warn!("{w}");
            }
            save(&g, Some(&loaded.external_ids), &out)?;
            let body = serde_json::json!({
                "seed": cfg.master_seed,
                "config": cfg,
                "swap_budget": stats.swap_budget,
                "max_attempts": stats.max_attempts,
                "attempts": stats.attempts,
                "accepted": stats.accepted,
                "tail_acceptance": stats.tail_acceptance,
                "under_mixed": stats.under_mixed,
            });
            io::write_text(
                &out.join("rewire.json"),
                &(serde_json::to_string_pretty(&body).expect("json") + "\n"),
            )
        }
        Command::Divide {
            common,
            input,
            cell_size,
            polygons,
            bin_width,
            exact,
            out,
        } => {
            install_workers(common.workers)?;
            let loaded = load(&input)?;
            let g = &loaded.graph;
            let p = match (cell_size, polygons) {
                (Some(s), _) => partition::make_grid(g.study_area(), s)?,
                (None, Some(path)) => partition::load_polygon_partition(&path, g.study_area())?,
                (None, None) => return Err(Error::validation("give --cell-size or --polygons")),
            };
            let mode = path_mode(exact, common.seed.unwrap_or(0));
            let div = partition::divide(g, &p);
            let mut units = String::from("cell_id,weight,nodes,edges,S,s_other,cc,l_rel\n");
            let mut retained = metrics::DistanceHistogram::new(bin_width)?;
            for u in &div.units {
                let r = metrics::compute_metrics(&u.graph, &mode);
                units.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    u.cell_id,
                    fmt_real(u.weight),
                    r.n,
                    r.e,
                    fmt_real(r.s_rel),
                    fmt_real(r.s_other),
                    fmt_real(r.cc),
                    fmt_opt(r.l_rel)
                ));
                retained.merge(&metrics::edge_distance_histogram(&u.graph, bin_width)?)?;
            }
            let original = metrics::edge_distance_histogram(g, bin_width)?;
            let loss = metrics::loss_histogram(&original, &retained)?;
            io::write_text(&out.join("units.csv"), &units)?;
            io::write_text(&out.join("dist.csv"), &io::histogram_csv(&retained))?;
            io::write_text(&out.join("loss.csv"), &io::histogram_csv(&loss))?;
            eprintln!(
                "{}: {} units, {} edges retained, {} lost, {} nodes outside every cell",
                p.label,
                div.units.len(),
                div.retained_count,
                div.lost_count(),
                div.unassigned_nodes
            );
            Ok(())
        }
        Command::Metrics {
            common,
            input,
            exact,
            out,
        } => {
            install_workers(common.workers)?;
            let loaded = load(&input)?;
            let g = &loaded.graph;
            let r = metrics::compute_metrics(g, &path_mode(exact, common.seed.unwrap_or(0)));
            let body = serde_json::json!({
                "nodes": r.n,
                "edges": r.e,
                "mean_degree": g.mean_degree(),
                "S": r.s_rel,
                "s_other": r.s_other,
                "cc": r.cc,
                "l_rel": r.l_rel,
                "mean_edge_distance": g.mean_edge_distance(),
            });
            let text = serde_json::to_string_pretty(&body).expect("json") + "\n";
            match out {
                Some(p) => io::write_text(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Experiment {
            common,
            replicates,
            out,
        } => {
            let mut cfg = match &common.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    ExperimentConfig::from_json(&text)?
                }
                None => ExperimentConfig::default(),
            };
            if let Some(s) = common.seed {
                cfg.master_seed = s;
            }
            if let Some(k) = replicates {
                cfg.replicates = k;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.workers = common.workers;
            let outcome = pipeline::run_experiment(&cfg)?;
            for w in &outcome.warnings {
                warn!("{w}");
            }
            for (stage, secs) in &outcome.timings {
                info!("{stage}: {secs:.1} s");
            }
            eprintln!(
                "wrote {} files to {}",
                outcome.files.len() + 1,
                cfg.output_dir.display()
            );
            Ok(())
        }
        Command::Plot { out, scales } => {
            let written = pipeline::emit_plots(&out, &scales)?;
            eprintln!("wrote {} charts", written.len());
            Ok(())
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::Consistency => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; help and version are not errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
