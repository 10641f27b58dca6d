//! Files describing a prepared dataset and a finished matching run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criteria::CriterionId;
use crate::error::{Error, Result};
use crate::geometry::LocalProjection;
use crate::matcher::{MatchResult, RunSummary};
use crate::network::{self, consolidate, Coords, MeasurementNetwork, StreetNetwork};
use crate::report::json_bytes;

pub const NODES_FILE: &str = "nodes.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const SEGMENTS_FILE: &str = "segments.csv";
pub const PROJECTION_FILE: &str = "projection.json";
pub const INGEST_REPORT_FILE: &str = "ingest_report.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// Prepared inputs: consolidated street network and split measurement
/// segments in working meters, plus the projection used to get there.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub network: StreetNetwork,
    pub measurements: MeasurementNetwork,
    pub projection: Option<LocalProjection>,
}

/// Contents of the projection file; `null` projection means metric input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFile {
    pub projection: Option<LocalProjection>,
}

/// Counts written next to the prepared files by ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub coords: Coords,
    pub tolerance_m: f64,
    pub nodes_before: usize,
    pub edges_before: usize,
    pub nodes_after: usize,
    pub edges_after: usize,
    pub weak_components_before: usize,
    pub weak_components_after: usize,
    pub segments: usize,
    pub sensors: usize,
}

/// Loads raw inputs, consolidates street nodes within `tolerance` meters
/// and splits measurement polylines into segments.
///
/// Lon/lat inputs are projected about the centre of the street nodes'
/// bounding box and the measurements reuse that projection.
pub fn ingest(
    nodes: &Path,
    edges: &Path,
    measurements: &Path,
    coords: Coords,
    tolerance: f64,
) -> Result<(PreparedData, IngestReport)> {
    let raw = network::load_street_network(nodes, edges, coords)?;
    let projection = raw.projection().copied();
    let segments = network::load_measurements(measurements, coords, projection.as_ref())?;
    let merged = consolidate(&raw, tolerance);
    let mut sensors: Vec<&str> = segments.segments().iter().map(|s| s.sensor_id.as_str()).collect();
    sensors.sort_unstable();
    sensors.dedup();
    let report = IngestReport {
        coords,
        tolerance_m: tolerance,
        nodes_before: raw.node_count(),
        edges_before: raw.edge_count(),
        nodes_after: merged.node_count(),
        edges_after: merged.edge_count(),
        weak_components_before: raw.weak_component_count(),
        weak_components_after: merged.weak_component_count(),
        segments: segments.len(),
        sensors: sensors.len(),
    };
    Ok((
        PreparedData {
            network: merged,
            measurements: segments,
            projection,
        },
        report,
    ))
}

fn csv_into(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

impl PreparedData {
    /// Prepared files for `dir` as `(path, bytes)` pairs.
    pub fn render(&self, dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        vec![
            (dir.join(NODES_FILE), csv_into(|b| network::write_nodes_csv(&self.network, b))),
            (dir.join(EDGES_FILE), csv_into(|b| network::write_edges_csv(&self.network, b))),
            (
                dir.join(SEGMENTS_FILE),
                csv_into(|b| network::write_measurements_csv(self.measurements.segments(), b)),
            ),
            (
                dir.join(PROJECTION_FILE),
                json_bytes(&ProjectionFile {
                    projection: self.projection,
                }),
            ),
        ]
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let proj_path = dir.join(PROJECTION_FILE);
        let text = std::fs::read_to_string(&proj_path).map_err(|e| Error::io(&proj_path, e))?;
        let pf: ProjectionFile = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: proj_path.clone(),
            source: e,
        })?;
        let net = network::load_street_network(&dir.join(NODES_FILE), &dir.join(EDGES_FILE), Coords::Metric)?;
        let net = net.with_projection(pf.projection);
        let seg_path = dir.join(SEGMENTS_FILE);
        let measurements = network::load_measurements(&seg_path, Coords::Metric, None)?.with_projection(pf.projection);
        Ok(PreparedData {
            network: net,
            measurements,
            projection: pf.projection,
        })
    }
}

/// Everything a later step needs from a matching run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub criterion: CriterionId,
    pub k: usize,
    pub projection: Option<LocalProjection>,
    pub street_nodes: usize,
    pub street_edges: usize,
    pub summary: RunSummary,
    pub results: Vec<MatchResult>,
}

impl RunRecord {
    pub fn file_name(run_id: &str) -> String {
        format!("{run_id}.results.json")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    /// Locates the single results file in `dir`, or the one for `run_id`.
    pub fn find(dir: &Path, run_id: Option<&str>) -> Result<PathBuf> {
        if let Some(id) = run_id {
            return Ok(dir.join(Self::file_name(id)));
        }
        let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".results.json")))
            .collect();
        found.sort();
        match found.len() {
            1 => Ok(found.remove(0)),
            0 => Err(Error::schema(dir.display().to_string(), None, "no *.results.json file found")),
            _ => Err(Error::schema(
                dir.display().to_string(),
                None,
                "several results files found; pass a run id",
            )),
        }
    }
}
