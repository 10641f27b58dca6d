//! Command-line driver: `ingest`, `match`, `report`, `serve` and `synth`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lowres_match::config::{ConfigFile, RunConfig, THREADS_ENV};
use lowres_match::criteria::CriterionId;
use lowres_match::matcher::match_all;
use lowres_match::network::{self, Coords, SpatialIndex};
use lowres_match::overrides::{apply_overrides, OverrideLog};
use lowres_match::report::{
    column_stats, correlation_pairs, csv_bytes, json_bytes, layer_path, measurement_layer, pearson, rank_curve,
    render_exports, street_layer, worst_layer, worst_n, write_all_atomic, OutputCoords,
};
use lowres_match::run::{self, PreparedData, RunRecord};
use lowres_match::synth::GridBenchmark;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "lowres-match", version, about = "Match low-resolution measurement segments to street network paths")]
pub struct Cli {
    /// Flat key = value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, consolidate and split raw inputs into a prepared directory.
    Ingest(IngestArgs),
    /// Match every prepared segment and write results and exports.
    Match(MatchArgs),
    /// Rank curves, correlation pairs, worst-N layers and override-aware re-exports.
    Report(ReportArgs),
    /// Serve the review API (and optionally a static UI bundle).
    Serve(ServeArgs),
    /// Generate a synthetic grid benchmark with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Street nodes CSV: node_id,x,y
    #[arg(long)]
    pub nodes: PathBuf,
    /// Street edges CSV: edge_id,from,to[,length_m]
    #[arg(long)]
    pub edges: PathBuf,
    /// Measurement segments: CSV (segment_id,sensor_id,ax,ay,bx,by) or GeoJSON
    #[arg(long)]
    pub measurements: PathBuf,
    /// Output directory for the prepared files.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub coords: Option<Coords>,
    /// Node consolidation tolerance in meters.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Prepared directory written by `ingest`.
    #[arg(long)]
    pub prepared: PathBuf,
    /// Run directory for results.
    #[arg(long)]
    pub out: PathBuf,
    /// Prefix of every output file; defaults to the criterion name.
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub criterion: Option<CriterionId>,
    /// Anchors per segment endpoint.
    #[arg(long)]
    pub k: Option<usize>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Add the wall time to the summary file (makes it differ between runs).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory written by `match`.
    #[arg(long)]
    pub run: PathBuf,
    /// Needed when the run directory holds several runs.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Output directory; defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub worst_n_lc: Option<usize>,
    #[arg(long)]
    pub worst_n_rc: Option<usize>,
    #[arg(long)]
    pub worst_n_sc: Option<usize>,
    #[arg(long)]
    pub worst_n_ac: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub prepared: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Directory with the review UI bundle, served at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Grid nodes per side.
    #[arg(long, default_value_t = 30)]
    pub size: usize,
    #[arg(long, default_value_t = 100.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 500)]
    pub segments: usize,
    #[arg(long, default_value_t = 3)]
    pub min_span: usize,
    #[arg(long, default_value_t = 10)]
    pub max_span: usize,
    /// Maximum endpoint displacement in meters.
    #[arg(long, default_value_t = 10.0)]
    pub jitter: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Defaults, then the config file, then the threads variable.
fn base_config(cli_config: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = cli_config {
        cfg.apply_file(&ConfigFile::load(path)?);
    }
    cfg.apply_threads_env(std::env::var(THREADS_ENV).ok().as_deref())?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => {
            cfg.coords = a.coords.unwrap_or(cfg.coords);
            cfg.consolidation_tolerance = a.tolerance.unwrap_or(cfg.consolidation_tolerance);
            cfg.validate()?;
            ingest(&a, &cfg)
        }
        Command::Match(a) => {
            cfg.criterion = a.criterion.unwrap_or(cfg.criterion);
            cfg.k = a.k.unwrap_or(cfg.k);
            cfg.threads = a.threads.or(cfg.threads);
            cfg.validate()?;
            run_match(&a, &cfg)
        }
        Command::Report(a) => {
            cfg.worst_n_lc = a.worst_n_lc.unwrap_or(cfg.worst_n_lc);
            cfg.worst_n_rc = a.worst_n_rc.unwrap_or(cfg.worst_n_rc);
            cfg.worst_n_sc = a.worst_n_sc.unwrap_or(cfg.worst_n_sc);
            cfg.worst_n_ac = a.worst_n_ac.unwrap_or(cfg.worst_n_ac);
            cfg.validate()?;
            report(&a, &cfg)
        }
        Command::Serve(a) => serve(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn ingest(a: &IngestArgs, cfg: &RunConfig) -> Result<()> {
    let (prepared, report) = run::ingest(&a.nodes, &a.edges, &a.measurements, cfg.coords, cfg.consolidation_tolerance)?;
    create_dir(&a.out)?;
    let coords = OutputCoords::new(prepared.projection.as_ref());
    let mut files = prepared.render(&a.out);
    files.push((a.out.join(run::INGEST_REPORT_FILE), json_bytes(&report)));
    files.push((a.out.join("streets.geojson"), json_bytes(&street_layer(&prepared.network, coords, None))));
    files.push((
        a.out.join("measurements.geojson"),
        json_bytes(&measurement_layer(&prepared.measurements, coords, None)),
    ));
    write_all_atomic(&files)?;
    println!(
        "street nodes {} -> {}, edges {} -> {}, weak components {}, segments {}",
        report.nodes_before, report.nodes_after, report.edges_before, report.edges_after, report.weak_components_after, report.segments
    );
    Ok(())
}

fn run_match(a: &MatchArgs, cfg: &RunConfig) -> Result<()> {
    let prepared = PreparedData::load(&a.prepared)?;
    let run_id = a.run_id.clone().unwrap_or_else(|| cfg.criterion.as_str().to_string());
    let index = SpatialIndex::build(&prepared.network);
    let started = Instant::now();
    let (results, summary) = match_all(&prepared.network, &index, &prepared.measurements, cfg.k, cfg.criterion, cfg.threads)?;
    let elapsed = started.elapsed().as_secs_f64();

    create_dir(&a.out)?;
    let coords = OutputCoords::new(prepared.projection.as_ref());
    let mut files = render_exports(&results, &a.out, &run_id, coords)?;
    let mut summary_json = serde_json::to_value(&summary)?;
    summary_json["criterion"] = json!(cfg.criterion);
    summary_json["k"] = json!(cfg.k);
    if a.record_timing {
        summary_json["wall_time_s"] = json!(elapsed);
    }
    files.push((layer_path(&a.out, &run_id, "summary", "json"), json_bytes(&summary_json)));
    let record = RunRecord {
        run_id: run_id.clone(),
        criterion: cfg.criterion,
        k: cfg.k,
        projection: prepared.projection,
        street_nodes: prepared.network.node_count(),
        street_edges: prepared.network.edge_count(),
        summary: summary.clone(),
        results,
    };
    files.push((a.out.join(RunRecord::file_name(&run_id)), json_bytes(&record)));
    write_all_atomic(&files)?;

    println!(
        "{run_id}: {} segments, {} matched, {} unmatched",
        summary.segments, summary.matched, summary.unmatched
    );
    for u in &summary.unmatched_segments {
        println!("  unmatched {} ({})", u.seg_id, u.reason.as_str());
    }
    eprintln!("matched in {elapsed:.2} s");
    Ok(())
}

fn report(a: &ReportArgs, cfg: &RunConfig) -> Result<()> {
    let path = RunRecord::find(&a.run, a.run_id.as_deref())?;
    let record = RunRecord::load(&path)?;
    let history = OverrideLog::in_dir(&a.run).read()?;
    let results = apply_overrides(&record.results, &history);
    let out = a.out.clone().unwrap_or_else(|| a.run.clone());
    create_dir(&out)?;
    let coords = OutputCoords::new(record.projection.as_ref());
    let id = &record.run_id;

    let mut files = Vec::new();
    let mut stats = Vec::new();
    for c in CriterionId::ALL {
        files.push((layer_path(&out, id, &format!("rank.{}", c.as_str()), "csv"), csv_bytes(&rank_curve(&results, c)?)?));
        let worst = worst_n(&results, c, cfg.worst_n(c))?;
        files.push((
            layer_path(&out, id, &format!("worst.{}", c.as_str()), "geojson"),
            json_bytes(&worst_layer(&results, &worst, coords)),
        ));
        stats.push(column_stats(&results, c)?);
    }
    let used = record.criterion;
    let mut correlations = BTreeMap::new();
    for other in CriterionId::ALL.into_iter().filter(|&c| c != used) {
        let pairs = correlation_pairs(&results, used, other)?;
        let xy: Vec<(f64, f64)> = pairs.iter().map(|p| (p.used, p.other)).collect();
        correlations.insert(other.as_str(), pearson(&xy));
        files.push((
            layer_path(&out, id, &format!("corr.{}-{}", used.as_str(), other.as_str()), "csv"),
            csv_bytes(&pairs)?,
        ));
    }
    files.extend(render_exports(&results, &out, id, coords)?);
    let summary = lowres_match::matcher::RunSummary::from_results(&results);
    files.push((
        layer_path(&out, id, "report", "json"),
        json_bytes(&json!({
            "run_id": id,
            "criterion_used": used,
            "overrides_applied": history.len(),
            "summary": summary,
            "score_stats": stats,
            "pearson_used_vs_other": correlations,
        })),
    ));
    write_all_atomic(&files)?;
    println!("{id}: wrote {} report files to {}", files.len(), out.display());
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<()> {
    let path = RunRecord::find(&a.run, a.run_id.as_deref())?;
    let state = Arc::new(lowres_match_server::AppState::open(&path, &a.prepared, &a.run)?);
    let app = lowres_match_server::router(state.clone(), a.ui.clone());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        eprintln!(
            "serving run {} on http://{} (overrides in {})",
            state.run.run_id,
            listener.local_addr()?,
            state.log_path().display()
        );
        lowres_match_server::serve(listener, app).await?;
        anyhow::Ok(())
    })
}

fn synth(a: &SynthArgs) -> Result<()> {
    if a.min_span < 1 || a.min_span > a.max_span || a.max_span >= a.size {
        bail!("spans must satisfy 1 <= min-span <= max-span < size");
    }
    if !(a.spacing > 0.0 && a.jitter >= 0.0 && a.jitter < a.spacing / 2.0) {
        bail!("spacing must be positive and jitter within [0, spacing / 2)");
    }
    let spec = GridBenchmark {
        size: a.size,
        spacing_m: a.spacing,
        segments: a.segments,
        min_span: a.min_span,
        max_span: a.max_span,
        jitter_m: a.jitter,
        seed: a.seed,
    };
    let data = spec.generate();
    create_dir(&a.out)?;
    let mut nodes = Vec::new();
    network::write_nodes_csv(&data.network, &mut nodes)?;
    let mut edges = Vec::new();
    network::write_edges_csv(&data.network, &mut edges)?;
    let mut segs = Vec::new();
    network::write_measurements_csv(data.measurements.segments(), &mut segs)?;
    write_all_atomic(&[
        (a.out.join("nodes.csv"), nodes),
        (a.out.join("edges.csv"), edges),
        (a.out.join("measurements.csv"), segs),
        (a.out.join("truth.json"), json_bytes(&data.truth)),
    ])?;
    println!(
        "{}x{} grid, {} segments written to {}",
        a.size,
        a.size,
        a.segments,
        a.out.display()
    );
    Ok(())
}
