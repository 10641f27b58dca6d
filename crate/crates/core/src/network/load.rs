//! File formats for the two networks.
//!
//! * nodes CSV: `node_id,x,y`
//! * edges CSV: `edge_id,from,to,length_m` (length optional)
//! * measurements: GeoJSON `FeatureCollection` of `LineString` /
//!   `MultiLineString` features with a `sensor_id` property, or CSV
//!   `segment_id,sensor_id,ax,ay,bx,by`
//!
//! Coordinates are either metric or lon/lat degrees ([`Coords`]). Lon/lat
//! inputs are projected about the centre of the street nodes' bounding box.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{LocalProjection, Point};

use super::{MeasurementNetwork, MeasurementSegment, RawEdge, RawNode, StreetNetwork};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coords {
    #[default]
    Metric,
    Lonlat,
}

impl FromStr for Coords {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "metric" => Ok(Coords::Metric),
            "lonlat" => Ok(Coords::Lonlat),
            other => Err(format!("unknown coordinate mode {other:?} (expected metric or lonlat)")),
        }
    }
}

#[derive(Deserialize)]
struct NodeRow {
    node_id: String,
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct EdgeRow {
    edge_id: String,
    from: String,
    to: String,
    #[serde(default)]
    length_m: Option<f64>,
}

#[derive(Deserialize)]
struct SegmentRow {
    segment_id: String,
    sensor_id: String,
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R, name: &str) -> Result<Vec<(T, u64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::schema(name, Some(1), e.to_string()))?
        .clone();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line());
            Error::schema(name, row, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::schema(name, Some(line), e.to_string()))?;
        rows.push((row, line));
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn bbox_centre(points: impl Iterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    let mut bounds: Option<(f64, f64, f64, f64)> = None;
    for (x, y) in points {
        bounds = Some(match bounds {
            None => (x, y, x, y),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        });
    }
    bounds.map(|(x0, y0, x1, y1)| ((x0 + x1) / 2.0, (y0 + y1) / 2.0))
}

fn projector(
    name: &str,
    coords: Coords,
    projection: Option<LocalProjection>,
) -> impl Fn(f64, f64, Option<u64>) -> Result<Point> + '_ {
    move |x, y, row| match (coords, projection) {
        (Coords::Lonlat, Some(p)) => p
            .project(x, y)
            .map_err(|e| Error::schema(name, row, e.to_string())),
        _ => Ok(Point::new(x, y)),
    }
}

pub fn read_street_network<N: Read, E: Read>(
    nodes: N,
    nodes_name: &str,
    edges: E,
    edges_name: &str,
    coords: Coords,
) -> Result<StreetNetwork> {
    let node_rows: Vec<(NodeRow, u64)> = read_rows(nodes, nodes_name)?;
    let projection = match coords {
        Coords::Metric => None,
        Coords::Lonlat => bbox_centre(node_rows.iter().map(|(r, _)| (r.x, r.y)))
            .map(|(lon, lat)| LocalProjection::new(lon, lat))
            .transpose()
            .map_err(|e| Error::schema(nodes_name, None, e.to_string()))?,
    };
    let project = projector(nodes_name, coords, projection);
    let raw_nodes = node_rows
        .into_iter()
        .map(|(r, line)| {
            Ok(RawNode {
                point: project(r.x, r.y, Some(line))?,
                id: r.node_id,
                row: Some(line),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let raw_edges = read_rows::<_, EdgeRow>(edges, edges_name)?
        .into_iter()
        .map(|(r, line)| RawEdge {
            id: r.edge_id,
            from: r.from,
            to: r.to,
            length_m: r.length_m,
            row: Some(line),
        })
        .collect();
    StreetNetwork::from_records(nodes_name, edges_name, raw_nodes, raw_edges, projection)
}

pub fn load_street_network(nodes: &Path, edges: &Path, coords: Coords) -> Result<StreetNetwork> {
    read_street_network(
        open(nodes)?,
        &nodes.display().to_string(),
        open(edges)?,
        &edges.display().to_string(),
        coords,
    )
}

/// Reads the CSV measurement form, one straight segment per row.
///
/// With lon/lat coordinates, `projection` should be the street network's so
/// both networks share a frame; without one, the measurements' own bounding
/// box centre is used.
pub fn read_measurements_csv<R: Read>(
    input: R,
    name: &str,
    coords: Coords,
    projection: Option<&LocalProjection>,
) -> Result<MeasurementNetwork> {
    let rows: Vec<(SegmentRow, u64)> = read_rows(input, name)?;
    let projection = resolve_projection(
        name,
        coords,
        projection,
        rows.iter().flat_map(|(r, _)| [(r.ax, r.ay), (r.bx, r.by)]),
    )?;
    let project = projector(name, coords, projection);
    let mut segments = Vec::with_capacity(rows.len());
    for (r, line) in rows {
        let a = project(r.ax, r.ay, Some(line))?;
        let b = project(r.bx, r.by, Some(line))?;
        if r.sensor_id.is_empty() {
            return Err(Error::schema(name, Some(line), "missing sensor_id"));
        }
        if a == b {
            return Err(Error::schema(name, Some(line), "segment endpoints coincide"));
        }
        segments.push(MeasurementSegment::new(r.segment_id, r.sensor_id, a, b));
    }
    MeasurementNetwork::new(name, segments, projection)
}

fn resolve_projection(
    name: &str,
    coords: Coords,
    given: Option<&LocalProjection>,
    points: impl Iterator<Item = (f64, f64)>,
) -> Result<Option<LocalProjection>> {
    match (coords, given) {
        (Coords::Metric, _) => Ok(None),
        (Coords::Lonlat, Some(p)) => Ok(Some(*p)),
        (Coords::Lonlat, None) => bbox_centre(points)
            .map(|(lon, lat)| LocalProjection::new(lon, lat))
            .transpose()
            .map_err(|e| Error::schema(name, None, e.to_string())),
    }
}

fn json_id(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_position(v: &Value) -> Option<(f64, f64)> {
    let arr = v.as_array()?;
    if arr.len() < 2 {
        return None;
    }
    Some((arr[0].as_f64()?, arr[1].as_f64()?))
}

/// Reads a GeoJSON feature collection, splitting every polyline with `m`
/// vertices into `m - 1` segments that inherit the feature's `sensor_id`.
///
/// Segment ids are `{feature}-{j}` where `feature` is the feature's `id`
/// member when present (else its position in the collection) and `j` counts
/// segments within the feature from 0.
pub fn read_measurements_geojson(
    text: &str,
    name: &str,
    coords: Coords,
    projection: Option<&LocalProjection>,
) -> Result<MeasurementNetwork> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::schema(name, Some(e.line() as u64), e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::schema(name, None, "expected a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::schema(name, None, "FeatureCollection without features"))?;

    struct Line {
        fid: String,
        sensor: String,
        parts: Vec<Vec<(f64, f64)>>,
    }
    let mut lines = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let err = |msg: &str| Error::schema(name, None, format!("feature {i}: {msg}"));
        let sensor = f
            .get("properties")
            .and_then(|p| p.get("sensor_id"))
            .and_then(json_id)
            .ok_or_else(|| err("missing sensor_id"))?;
        let geom = f.get("geometry").ok_or_else(|| err("missing geometry"))?;
        let coords_v = geom.get("coordinates").ok_or_else(|| err("geometry without coordinates"))?;
        let parse_line = |v: &Value| -> Result<Vec<(f64, f64)>> {
            let arr = v.as_array().ok_or_else(|| err("malformed coordinates"))?;
            let pts = arr
                .iter()
                .map(|p| parse_position(p).ok_or_else(|| err("malformed position")))
                .collect::<Result<Vec<_>>>()?;
            if pts.len() < 2 {
                return Err(err("line geometry with fewer than 2 vertices"));
            }
            Ok(pts)
        };
        let parts = match geom.get("type").and_then(Value::as_str) {
            Some("LineString") => vec![parse_line(coords_v)?],
            Some("MultiLineString") => coords_v
                .as_array()
                .ok_or_else(|| err("malformed coordinates"))?
                .iter()
                .map(parse_line)
                .collect::<Result<Vec<_>>>()?,
            _ => return Err(err("geometry must be a LineString or MultiLineString")),
        };
        let fid = f.get("id").and_then(json_id).unwrap_or_else(|| i.to_string());
        lines.push(Line { fid, sensor, parts });
    }

    let projection = resolve_projection(
        name,
        coords,
        projection,
        lines.iter().flat_map(|l| l.parts.iter().flatten().copied()),
    )?;
    let project = projector(name, coords, projection);
    let mut segments = Vec::new();
    for line in lines {
        let mut j = 0;
        for part in &line.parts {
            for w in part.windows(2) {
                let a = project(w[0].0, w[0].1, None)?;
                let b = project(w[1].0, w[1].1, None)?;
                if a == b {
                    return Err(Error::schema(
                        name,
                        None,
                        format!("feature {}: repeated vertex", line.fid),
                    ));
                }
                segments.push(MeasurementSegment::new(format!("{}-{j}", line.fid), line.sensor.clone(), a, b));
                j += 1;
            }
        }
    }
    MeasurementNetwork::new(name, segments, projection)
}

/// Loads measurements, choosing the format from the file extension.
pub fn load_measurements(
    path: &Path,
    coords: Coords,
    projection: Option<&LocalProjection>,
) -> Result<MeasurementNetwork> {
    let name = path.display().to_string();
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_measurements_csv(open(path)?, &name, coords, projection)
    } else {
        let mut text = String::new();
        open(path)?
            .read_to_string(&mut text)
            .map_err(|e| Error::io(path, e))?;
        read_measurements_geojson(&text, &name, coords, projection)
    }
}

pub fn write_nodes_csv<W: Write>(net: &StreetNetwork, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "x", "y"])?;
    for n in net.nodes() {
        let p = net.point(n);
        w.write_record([net.node_id(n), &p.x.to_string(), &p.y.to_string()])?;
    }
    w.flush()
}

pub fn write_edges_csv<W: Write>(net: &StreetNetwork, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["edge_id", "from", "to", "length_m"])?;
    for e in net.edges() {
        w.write_record([
            e.id.as_str(),
            net.node_id(e.from),
            net.node_id(e.to),
            &e.length_m.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_measurements_csv<W: Write>(segments: &[MeasurementSegment], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["segment_id", "sensor_id", "ax", "ay", "bx", "by"])?;
    for s in segments {
        w.write_record([
            s.id.as_str(),
            s.sensor_id.as_str(),
            &s.a.x.to_string(),
            &s.a.y.to_string(),
            &s.b.x.to_string(),
            &s.b.y.to_string(),
        ])?;
    }
    w.flush()
}
