//! Post-run analytics and file exports.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::criteria::{CriterionId, CriterionScores};
use crate::error::{Error, Result};
use crate::geometry::{LocalProjection, Point};
use crate::matcher::{MatchResult, MatchStatus};
use crate::network::{MeasurementNetwork, StreetNetwork};

/// Min-max normalization onto `[0, 1]`. A constant (or single-valued) column maps to 0.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    values
        .iter()
        .map(|&v| if range > 0.0 { ((v - min) / range).clamp(0.0, 1.0) } else { 0.0 })
        .collect()
}

fn matched(results: &[MatchResult]) -> impl Iterator<Item = (&MatchResult, CriterionScores)> {
    results
        .iter()
        .filter(|r| r.is_matched())
        .filter_map(|r| r.scores.map(|s| (r, s)))
}

/// One matched segment: raw scores in meters / radians / square meters, the
/// same scores normalized over the matched set, and the two angle criteria
/// in degrees for display.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub seg_id: String,
    pub sensor_id: String,
    pub criterion_used: CriterionId,
    pub lc: f64,
    pub rc: f64,
    pub sc: f64,
    pub ac: f64,
    pub lc_norm: f64,
    pub rc_norm: f64,
    pub sc_norm: f64,
    pub ac_norm: f64,
    pub rc_deg: f64,
    pub sc_deg: f64,
    pub overridden: bool,
}

impl ScoreRow {
    pub fn raw(&self) -> CriterionScores {
        CriterionScores {
            lc: self.lc,
            rc: self.rc,
            sc: self.sc,
            ac: self.ac,
        }
    }

    pub fn normalized(&self) -> CriterionScores {
        CriterionScores {
            lc: self.lc_norm,
            rc: self.rc_norm,
            sc: self.sc_norm,
            ac: self.ac_norm,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// Rows for matched results, in result order.
    pub fn from_results(results: &[MatchResult]) -> Self {
        let picked: Vec<(&MatchResult, CriterionScores)> = matched(results).collect();
        let column = |c: CriterionId| normalize(&picked.iter().map(|(_, s)| s.get(c)).collect::<Vec<_>>());
        let (lc, rc, sc, ac) = (
            column(CriterionId::Lc),
            column(CriterionId::Rc),
            column(CriterionId::Sc),
            column(CriterionId::Ac),
        );
        let rows = picked
            .iter()
            .enumerate()
            .map(|(i, (r, s))| ScoreRow {
                seg_id: r.seg_id.clone(),
                sensor_id: r.sensor_id.clone(),
                criterion_used: r.criterion_used,
                lc: s.lc,
                rc: s.rc,
                sc: s.sc,
                ac: s.ac,
                lc_norm: lc[i],
                rc_norm: rc[i],
                sc_norm: sc[i],
                ac_norm: ac[i],
                rc_deg: s.rc.to_degrees(),
                sc_deg: s.sc.to_degrees(),
                overridden: r.overridden,
            })
            .collect();
        ScoreTable { rows }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(SCORE_COLUMNS).map_err(csv_error)?;
        }
        for row in &self.rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn read_csv<R: Read>(input: R, name: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for (i, rec) in r.deserialize().enumerate() {
            rows.push(rec.map_err(|e| Error::schema(name, Some(i as u64 + 2), e.to_string()))?);
        }
        Ok(ScoreTable { rows })
    }

    /// Rebuilds the table from a matched-segments GeoJSON layer.
    pub fn from_geojson(layer: &Value, name: &str) -> Result<Self> {
        let features = layer["features"]
            .as_array()
            .ok_or_else(|| Error::schema(name, None, "expected a FeatureCollection"))?;
        let rows = features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                serde_json::from_value(f["properties"].clone())
                    .map_err(|e| Error::schema(name, Some(i as u64), format!("feature {i}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(ScoreTable { rows })
    }
}

const SCORE_COLUMNS: [&str; 14] = [
    "seg_id",
    "sensor_id",
    "criterion_used",
    "lc",
    "rc",
    "sc",
    "ac",
    "lc_norm",
    "rc_norm",
    "sc_norm",
    "ac_norm",
    "rc_deg",
    "sc_deg",
    "overridden",
];

fn csv_error(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankPoint {
    pub rank: usize,
    pub seg_id: String,
    pub score: f64,
    pub normalized: f64,
}

/// Matched segments ranked by ascending score under `criterion`, ranks from 1.
pub fn rank_curve(results: &[MatchResult], criterion: CriterionId) -> Result<Vec<RankPoint>> {
    let mut picked: Vec<(&str, f64)> = matched(results).map(|(r, s)| (r.seg_id.as_str(), s.get(criterion))).collect();
    if picked.is_empty() {
        return Err(Error::EmptyRun);
    }
    picked.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(y.0)));
    let norm = normalize(&picked.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(picked
        .into_iter()
        .zip(norm)
        .enumerate()
        .map(|(i, ((seg_id, score), normalized))| RankPoint {
            rank: i + 1,
            seg_id: seg_id.to_string(),
            score,
            normalized,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub seg_id: String,
    pub used: f64,
    pub other: f64,
}

/// Normalized `(used, other)` score pairs, one per matched segment.
///
/// Meant for a run matched with `used` as its criterion; the pairs show how the
/// paths it selected fare under `other`.
pub fn correlation_pairs(results: &[MatchResult], used: CriterionId, other: CriterionId) -> Result<Vec<CorrelationPoint>> {
    let picked: Vec<(&MatchResult, CriterionScores)> = matched(results).collect();
    if picked.is_empty() {
        return Err(Error::EmptyRun);
    }
    let xs = normalize(&picked.iter().map(|(_, s)| s.get(used)).collect::<Vec<_>>());
    let ys = normalize(&picked.iter().map(|(_, s)| s.get(other)).collect::<Vec<_>>());
    Ok(picked
        .iter()
        .zip(xs.into_iter().zip(ys))
        .map(|((r, _), (used, other))| CorrelationPoint {
            seg_id: r.seg_id.clone(),
            used,
            other,
        })
        .collect())
}

/// Pearson correlation coefficient; `None` with fewer than two points or a
/// constant coordinate.
pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstNExtract {
    pub criterion: CriterionId,
    pub n: usize,
    /// Worst first.
    pub seg_ids: Vec<String>,
}

/// Orders matched results worst first under `criterion`; ties by segment id.
pub fn worst_first(results: &[MatchResult], criterion: CriterionId) -> Vec<(&MatchResult, f64)> {
    let mut picked: Vec<(&MatchResult, f64)> = matched(results).map(|(r, s)| (r, s.get(criterion))).collect();
    picked.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.seg_id.cmp(&y.0.seg_id)));
    picked
}

/// The `n` matched segments with the largest raw score under `criterion`.
pub fn worst_n(results: &[MatchResult], criterion: CriterionId, n: usize) -> Result<WorstNExtract> {
    let ranked = worst_first(results, criterion);
    if ranked.is_empty() {
        return Err(Error::EmptyRun);
    }
    Ok(WorstNExtract {
        criterion,
        n,
        seg_ids: ranked.into_iter().take(n).map(|(r, _)| r.seg_id.clone()).collect(),
    })
}

/// Axis-aligned rectangle in output coordinates (lon/lat when a projection is
/// known, working meters otherwise).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Option<Self> {
        let ok = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite()) && min_x <= max_x && min_y <= max_y;
        ok.then_some(BBox { min_x, min_y, max_x, max_y })
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Whether the closed segment `a b` touches the rectangle (Liang-Barsky clip).
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for (p, q) in [
            (-dx, a.x - self.min_x),
            (dx, self.max_x - a.x),
            (-dy, a.y - self.min_y),
            (dy, self.max_y - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

impl std::str::FromStr for BBox {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format!("bbox must be four numbers minx,miny,maxx,maxy, got {s:?}"))?;
        match parts[..] {
            [a, b, c, d] => BBox::new(a, b, c, d).ok_or_else(|| format!("bbox {s:?} is empty or not finite")),
            _ => Err(format!("bbox must be four numbers minx,miny,maxx,maxy, got {s:?}")),
        }
    }
}

/// Converts working coordinates to output coordinates.
#[derive(Clone, Copy, Debug, Default)]
pub struct OutputCoords<'a> {
    pub projection: Option<&'a LocalProjection>,
}

impl<'a> OutputCoords<'a> {
    pub fn new(projection: Option<&'a LocalProjection>) -> Self {
        OutputCoords { projection }
    }

    pub fn point(&self, p: Point) -> Point {
        match self.projection {
            Some(proj) => {
                let (lon, lat) = proj.unproject(p);
                Point::new(lon, lat)
            }
            None => p,
        }
    }

    fn position(&self, xy: [f64; 2]) -> Value {
        let p = self.point(Point::new(xy[0], xy[1]));
        json!([p.x, p.y])
    }

    fn line(&self, coords: &[[f64; 2]]) -> Value {
        json!({
            "type": "LineString",
            "coordinates": coords.iter().map(|&c| self.position(c)).collect::<Vec<_>>(),
        })
    }
}

pub fn feature_collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

fn status_fields(r: &MatchResult) -> (&'static str, Value) {
    match r.status {
        MatchStatus::Matched => ("matched", Value::Null),
        MatchStatus::Unmatched(reason) => ("unmatched", json!(reason.as_str())),
    }
}

/// One feature per matched segment, drawn along its chosen street path.
/// Properties are the score-table row plus status and the matched edge ids.
pub fn matched_layer(results: &[MatchResult], coords: OutputCoords) -> Value {
    let table = ScoreTable::from_results(results);
    let by_id = matched(results).map(|(r, _)| r);
    let features = by_id
        .zip(&table.rows)
        .map(|(r, row)| {
            let mut props = serde_json::to_value(row).expect("score rows serialize");
            let chosen = r.chosen.as_ref().expect("matched results carry a path");
            props["status"] = json!(status_fields(r).0);
            props["street_edges"] = json!(chosen.street_edges);
            props["nodes"] = json!(chosen.nodes);
            props["candidates_evaluated"] = json!(r.candidates_evaluated);
            json!({
                "type": "Feature",
                "id": r.seg_id,
                "geometry": coords.line(&chosen.geometry),
                "properties": props,
            })
        })
        .collect();
    feature_collection(features)
}

/// One feature per unmatched segment, drawn as the measurement segment itself.
pub fn unmatched_layer(results: &[MatchResult], coords: OutputCoords) -> Value {
    let features = results
        .iter()
        .filter(|r| !r.is_matched())
        .map(|r| {
            let (status, reason) = status_fields(r);
            json!({
                "type": "Feature",
                "id": r.seg_id,
                "geometry": coords.line(&r.segment),
                "properties": {
                    "seg_id": r.seg_id,
                    "sensor_id": r.sensor_id,
                    "status": status,
                    "reason": reason,
                    "criterion_used": r.criterion_used,
                    "candidates_evaluated": r.candidates_evaluated,
                    "overridden": r.overridden,
                },
            })
        })
        .collect();
    feature_collection(features)
}

/// The worst segments under one criterion, worst first, along their chosen paths.
pub fn worst_layer(results: &[MatchResult], extract: &WorstNExtract, coords: OutputCoords) -> Value {
    let ranked = worst_first(results, extract.criterion);
    let features = ranked
        .into_iter()
        .take(extract.n)
        .enumerate()
        .map(|(i, (r, score))| {
            let chosen = r.chosen.as_ref().expect("matched results carry a path");
            json!({
                "type": "Feature",
                "id": r.seg_id,
                "geometry": coords.line(&chosen.geometry),
                "properties": {
                    "seg_id": r.seg_id,
                    "sensor_id": r.sensor_id,
                    "criterion": extract.criterion,
                    "worst_rank": i + 1,
                    "score": score,
                    "street_edges": chosen.street_edges,
                    "overridden": r.overridden,
                },
            })
        })
        .collect();
    feature_collection(features)
}

/// Street edges as straight lines between their end nodes, optionally
/// restricted to those touching `bbox`.
pub fn street_layer(net: &StreetNetwork, coords: OutputCoords, bbox: Option<&BBox>) -> Value {
    let features = net
        .edges()
        .iter()
        .filter_map(|e| {
            let a = coords.point(net.point(e.from));
            let b = coords.point(net.point(e.to));
            if bbox.is_some_and(|bb| !bb.intersects_segment(a, b)) {
                return None;
            }
            Some(json!({
                "type": "Feature",
                "id": e.id,
                "geometry": { "type": "LineString", "coordinates": [[a.x, a.y], [b.x, b.y]] },
                "properties": {
                    "edge_id": e.id,
                    "from": net.node_id(e.from),
                    "to": net.node_id(e.to),
                    "length_m": e.length_m,
                },
            }))
        })
        .collect();
    feature_collection(features)
}

/// Measurement segments, optionally restricted to those touching `bbox`.
pub fn measurement_layer(segments: &MeasurementNetwork, coords: OutputCoords, bbox: Option<&BBox>) -> Value {
    let features = segments
        .segments()
        .iter()
        .filter_map(|s| {
            let a = coords.point(s.a);
            let b = coords.point(s.b);
            if bbox.is_some_and(|bb| !bb.intersects_segment(a, b)) {
                return None;
            }
            Some(json!({
                "type": "Feature",
                "id": s.id,
                "geometry": { "type": "LineString", "coordinates": [[a.x, a.y], [b.x, b.y]] },
                "properties": {
                    "seg_id": s.id,
                    "sensor_id": s.sensor_id,
                    "length_m": s.length_m,
                },
            }))
        })
        .collect();
    feature_collection(features)
}

/// Pretty-printed JSON with a trailing newline. Object keys come out sorted,
/// so identical values give identical bytes.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("value serializes");
    out.push(b'\n');
    out
}

/// CSV bytes for any serializable row type, header included.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", std::io::Error::other(e.to_string())))
}

/// `{dir}/{run_id}.{layer}.{ext}`
pub fn layer_path(dir: &Path, run_id: &str, layer: &str, ext: &str) -> PathBuf {
    dir.join(format!("{run_id}.{layer}.{ext}"))
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Writes a set of files only after every one of them has been rendered.
pub fn write_all_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (path, bytes) in files {
        write_atomic(path, bytes)?;
    }
    Ok(())
}

/// Score table and the matched / unmatched layers for one run, as
/// `(path, bytes)` pairs ready for [`write_all_atomic`].
pub fn render_exports(
    results: &[MatchResult],
    dir: &Path,
    run_id: &str,
    coords: OutputCoords,
) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    Ok(vec![
        (layer_path(dir, run_id, "scores", "csv"), ScoreTable::from_results(results).to_csv()?),
        (layer_path(dir, run_id, "matched", "geojson"), json_bytes(&matched_layer(results, coords))),
        (layer_path(dir, run_id, "unmatched", "geojson"), json_bytes(&unmatched_layer(results, coords))),
    ])
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.total_cmp(b)
}

/// Summary statistics of one score column over matched results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub criterion: CriterionId,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn column_stats(results: &[MatchResult], criterion: CriterionId) -> Result<ColumnStats> {
    let mut v: Vec<f64> = matched(results).map(|(_, s)| s.get(criterion)).collect();
    if v.is_empty() {
        return Err(Error::EmptyRun);
    }
    v.sort_by(cmp_f64);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    Ok(ColumnStats {
        criterion,
        min: v[0],
        median,
        max: v[n - 1],
        mean: v.iter().sum::<f64>() / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::{Orientation, PathRecord, UnmatchedReason};
    use proptest::prelude::*;

    fn result(id: &str, lc: f64, rc: f64, sc: f64, ac: f64) -> MatchResult {
        MatchResult {
            seg_id: id.into(),
            sensor_id: format!("S-{id}"),
            segment: [[0.0, 0.0], [100.0, 0.0]],
            status: MatchStatus::Matched,
            criterion_used: CriterionId::Rc,
            candidates_evaluated: 32,
            chosen: Some(PathRecord {
                orientation: Orientation::AtoB,
                nodes: vec!["x".into(), "y".into()],
                street_edges: vec![format!("e-{id}")],
                geometry: vec![[0.0, 1.0], [100.0, 1.0]],
                path_length_m: 100.0,
                anchor_start_m: 1.0,
                anchor_end_m: 1.0,
            }),
            scores: Some(CriterionScores { lc, rc, sc, ac }),
            overridden: false,
        }
    }

    fn unmatched(id: &str) -> MatchResult {
        MatchResult {
            status: MatchStatus::Unmatched(UnmatchedReason::NoPath),
            chosen: None,
            scores: None,
            candidates_evaluated: 0,
            ..result(id, 0.0, 0.0, 0.0, 0.0)
        }
    }

    #[test]
    fn min_max_normalization() {
        assert_eq!(normalize(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize(&[3.0, 3.0, 3.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(normalize(&[7.0]), vec![0.0]);
    }

    #[test]
    fn constant_scores_give_flat_curve() {
        let rs: Vec<_> = (0..5).map(|i| result(&format!("s{i}"), 2.0, 0.0, 0.0, 0.0)).collect();
        let curve = rank_curve(&rs, CriterionId::Lc).unwrap();
        assert!(curve.iter().all(|p| p.normalized == 0.0));
        assert_eq!(curve.iter().map(|p| p.rank).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn rank_curve_sorts_ascending_and_skips_unmatched() {
        let rs = vec![
            result("a", 10.0, 0.0, 0.0, 0.0),
            unmatched("u"),
            result("b", 0.0, 0.0, 0.0, 0.0),
            result("c", 5.0, 0.0, 0.0, 0.0),
        ];
        let curve = rank_curve(&rs, CriterionId::Lc).unwrap();
        let ids: Vec<_> = curve.iter().map(|p| p.seg_id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
        assert_eq!(curve.iter().map(|p| p.normalized).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn empty_run_errors() {
        let rs = vec![unmatched("u")];
        assert!(matches!(rank_curve(&rs, CriterionId::Lc), Err(Error::EmptyRun)));
        assert!(matches!(worst_n(&rs, CriterionId::Lc, 3), Err(Error::EmptyRun)));
        assert!(matches!(
            correlation_pairs(&rs, CriterionId::Lc, CriterionId::Ac),
            Err(Error::EmptyRun)
        ));
    }

    #[test]
    fn worst_n_picks_largest_with_id_ties() {
        let rs = vec![
            result("a", 1.0, 0.0, 0.0, 0.0),
            result("b", 2.0, 0.0, 0.0, 0.0),
            result("c", 3.0, 0.0, 0.0, 0.0),
        ];
        assert_eq!(worst_n(&rs, CriterionId::Lc, 1).unwrap().seg_ids, vec!["c"]);
        assert_eq!(worst_n(&rs, CriterionId::Lc, 10).unwrap().seg_ids.len(), 3);
        let tied = vec![result("z", 1.0, 0.0, 0.0, 0.0), result("y", 1.0, 0.0, 0.0, 0.0)];
        assert_eq!(worst_n(&tied, CriterionId::Lc, 1).unwrap().seg_ids, vec!["y"]);
    }

    #[test]
    fn correlation_on_diagonal_and_proportional() {
        let rs: Vec<_> = (0..6)
            .map(|i| {
                let v = i as f64 * 1.5;
                result(&format!("s{i}"), v, 0.1 * i as f64, 0.0, 20.0 * v)
            })
            .collect();
        let same = correlation_pairs(&rs, CriterionId::Lc, CriterionId::Lc).unwrap();
        assert!(same.iter().all(|p| p.used == p.other));
        let pairs: Vec<(f64, f64)> = correlation_pairs(&rs, CriterionId::Lc, CriterionId::Ac)
            .unwrap()
            .iter()
            .map(|p| (p.used, p.other))
            .collect();
        assert!((pearson(&pairs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_degenerate_inputs() {
        assert_eq!(pearson(&[(1.0, 2.0)]), None);
        assert_eq!(pearson(&[(1.0, 2.0), (1.0, 3.0)]), None);
        let r = pearson(&[(0.0, 1.0), (1.0, 0.0), (2.0, -1.0)]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let mut rs = vec![
            result("a", 0.1, 0.2, 0.3, 0.4),
            result("b", 1.0 / 3.0, 1e-17, 2.5, 1234.5678),
            unmatched("c"),
        ];
        rs[1].overridden = true;
        let table = ScoreTable::from_results(&rs);
        assert_eq!(table.rows.len(), 2);
        let bytes = table.to_csv().unwrap();
        let back = ScoreTable::read_csv(&bytes[..], "scores.csv").unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn empty_table_still_has_header() {
        let bytes = ScoreTable::default().to_csv().unwrap();
        assert!(String::from_utf8(bytes).unwrap().starts_with("seg_id,sensor_id,criterion_used,lc"));
    }

    #[test]
    fn geojson_round_trip_and_shape() {
        let rs = vec![result("a", 0.5, 0.2, 0.3, 0.4), result("b", 1.5, 0.0, 0.0, 9.0), unmatched("c")];
        let layer = matched_layer(&rs, OutputCoords::default());
        assert_eq!(layer["features"].as_array().unwrap().len(), 2);
        let f = &layer["features"][0];
        assert_eq!(f["geometry"]["type"], "LineString");
        assert_eq!(f["properties"]["status"], "matched");
        assert_eq!(f["properties"]["street_edges"], json!(["e-a"]));
        let back = ScoreTable::from_geojson(&layer, "matched").unwrap();
        assert_eq!(back, ScoreTable::from_results(&rs));

        let un = unmatched_layer(&rs, OutputCoords::default());
        assert_eq!(un["features"][0]["properties"]["reason"], "no_path");
    }

    #[test]
    fn empty_run_exports_empty_collections() {
        let layer = matched_layer(&[], OutputCoords::default());
        assert_eq!(layer, json!({ "type": "FeatureCollection", "features": [] }));
        assert_eq!(json_bytes(&layer), json_bytes(&matched_layer(&[], OutputCoords::default())));
    }

    #[test]
    fn projected_output_is_lonlat() {
        let proj = LocalProjection::new(2.35, 48.85).unwrap();
        let rs = vec![result("a", 0.0, 0.0, 0.0, 0.0)];
        let layer = matched_layer(&rs, OutputCoords::new(Some(&proj)));
        let lon = layer["features"][0]["geometry"]["coordinates"][0][0].as_f64().unwrap();
        assert!((lon - 2.35).abs() < 1e-9);
    }

    #[test]
    fn bbox_parsing() {
        assert_eq!("0,1,2,3".parse::<BBox>().unwrap(), BBox::new(0.0, 1.0, 2.0, 3.0).unwrap());
        assert!("0,1,2".parse::<BBox>().is_err());
        assert!("a,b,c,d".parse::<BBox>().is_err());
        assert!("2,0,1,3".parse::<BBox>().is_err());
    }

    #[test]
    fn bbox_segment_intersection() {
        let bb = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let p = Point::new;
        assert!(bb.intersects_segment(p(1.0, 1.0), p(2.0, 2.0)));
        assert!(bb.intersects_segment(p(-5.0, 5.0), p(15.0, 5.0)));
        assert!(bb.intersects_segment(p(10.0, 20.0), p(10.0, -20.0)));
        assert!(!bb.intersects_segment(p(11.0, 0.0), p(20.0, 5.0)));
        assert!(!bb.intersects_segment(p(-1.0, 12.0), p(12.0, 10.5)));
        assert!(bb.intersects_segment(p(-1.0, 9.0), p(1.0, 11.0)));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn normalization_preserves_order(v in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
            let n = normalize(&v);
            for i in 0..v.len() {
                prop_assert!((0.0..=1.0).contains(&n[i]));
                for j in 0..v.len() {
                    if v[i] <= v[j] {
                        prop_assert!(n[i] <= n[j]);
                    }
                }
            }
        }

        #[test]
        fn worst_n_is_nested(scores in proptest::collection::vec(0.0f64..10.0, 1..40), n1 in 1usize..50, extra in 0usize..20) {
            let rs: Vec<_> = scores.iter().enumerate().map(|(i, &s)| result(&format!("s{i:03}"), s, 0.0, 0.0, 0.0)).collect();
            let small = worst_n(&rs, CriterionId::Lc, n1).unwrap();
            let large = worst_n(&rs, CriterionId::Lc, n1 + extra).unwrap();
            prop_assert_eq!(small.seg_ids.len(), n1.min(rs.len()));
            prop_assert!(large.seg_ids.starts_with(&small.seg_ids));
        }

        #[test]
        fn bbox_matches_sampling(ax in -20.0f64..20.0, ay in -20.0f64..20.0, bx in -20.0f64..20.0, by in -20.0f64..20.0) {
            let bb = BBox::new(-5.0, -3.0, 6.0, 4.0).unwrap();
            let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
            let sampled = (0..=2000).any(|i| {
                let t = i as f64 / 2000.0;
                bb.contains(Point::new(ax + t * (bx - ax), ay + t * (by - ay)))
            });
            // sampling can only miss grazing contacts
            if sampled {
                prop_assert!(bb.intersects_segment(a, b));
            }
        }
    }
}
