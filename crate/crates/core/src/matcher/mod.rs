//! Candidate generation and per-segment selection.
//!
//! For a segment `(a, b)` the candidates are one shortest street path from
//! each of the `k` street nodes nearest `a` to each of the `k` nearest `b`,
//! and the same from `b` to `a`, skipping pairs that share a node and pairs
//! with no route. The chosen candidate
//! minimises the configured criterion; all four scores are kept.

mod dijkstra;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{score_all, CriterionId, CriterionScores};
use crate::error::{Error, Result};
use crate::geometry::{DirectedSegment, Point};
use crate::network::{EdgeIx, MeasurementNetwork, MeasurementSegment, NodeIx, SpatialIndex, StreetNetwork};

pub use dijkstra::{RoutedPath, SearchSpace};

/// Number of anchors per segment endpoint used when none is configured.
pub const DEFAULT_K: usize = 4;

/// Which segment endpoint the first path node anchors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "a_to_b")]
    AtoB,
    #[serde(rename = "b_to_a")]
    BtoA,
}

impl Orientation {
    /// `(anchored start, anchored end)` endpoints of the segment.
    pub fn endpoints(self, seg: &MeasurementSegment) -> (Point, Point) {
        match self {
            Orientation::AtoB => (seg.a, seg.b),
            Orientation::BtoA => (seg.b, seg.a),
        }
    }

    /// The segment directed from the anchored start to the anchored end.
    pub fn base(self, seg: &MeasurementSegment) -> Result<DirectedSegment> {
        let (start, end) = self.endpoints(seg);
        DirectedSegment::new(start, end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePath {
    pub orientation: Orientation,
    pub nodes: Vec<NodeIx>,
    pub edges: Vec<EdgeIx>,
    pub path_length_m: f64,
    pub anchor_start_m: f64,
    pub anchor_end_m: f64,
}

impl CandidatePath {
    pub fn new(
        net: &StreetNetwork,
        seg: &MeasurementSegment,
        orientation: Orientation,
        nodes: Vec<NodeIx>,
        edges: Vec<EdgeIx>,
    ) -> Self {
        let (start, end) = orientation.endpoints(seg);
        let path_length_m = edges.iter().map(|&e| net.edge(e).length_m).sum();
        let anchor_start_m = start.distance(net.point(nodes[0]));
        let anchor_end_m = net.point(nodes[nodes.len() - 1]).distance(end);
        CandidatePath {
            orientation,
            nodes,
            edges,
            path_length_m,
            anchor_start_m,
            anchor_end_m,
        }
    }

    pub fn record(&self, net: &StreetNetwork) -> PathRecord {
        PathRecord {
            orientation: self.orientation,
            nodes: self.nodes.iter().map(|&n| net.node_id(n).to_string()).collect(),
            street_edges: self.edges.iter().map(|&e| net.edge(e).id.clone()).collect(),
            geometry: self
                .nodes
                .iter()
                .map(|&n| {
                    let p = net.point(n);
                    [p.x, p.y]
                })
                .collect(),
            path_length_m: self.path_length_m,
            anchor_start_m: self.anchor_start_m,
            anchor_end_m: self.anchor_end_m,
        }
    }
}

/// A candidate path with ids resolved, suitable for storage and export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub orientation: Orientation,
    /// Node ids in path order; doubles as the candidate fingerprint.
    pub nodes: Vec<String>,
    /// Street edge ids in path order: the matched set for the segment.
    pub street_edges: Vec<String>,
    pub geometry: Vec<[f64; 2]>,
    pub path_length_m: f64,
    pub anchor_start_m: f64,
    pub anchor_end_m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub path: CandidatePath,
    pub scores: CriterionScores,
}

/// Mantissa bits dropped by [`tie_key`].
const TIE_BITS: u32 = 20;

/// Rounds a nonnegative value to 32 significant bits, so values differing
/// only by rounding noise (a path and its reverse, say) compare equal.
pub fn tie_key(x: f64) -> f64 {
    if !x.is_finite() || x <= 0.0 {
        return x;
    }
    let bits = x.to_bits() + (1 << (TIE_BITS - 1));
    f64::from_bits(bits >> TIE_BITS << TIE_BITS)
}

/// Total order used to pick among candidates: criterion score, then closer
/// anchors, then fewer edges, then node sequence, then orientation. Scores
/// and anchor sums are compared through [`tie_key`].
pub fn compare_candidates(criterion: CriterionId, x: &ScoredCandidate, y: &ScoredCandidate) -> Ordering {
    let anchors = |c: &ScoredCandidate| tie_key(c.path.anchor_start_m + c.path.anchor_end_m);
    tie_key(x.scores.get(criterion))
        .total_cmp(&tie_key(y.scores.get(criterion)))
        .then_with(|| anchors(x).total_cmp(&anchors(y)))
        .then_with(|| x.path.edges.len().cmp(&y.path.edges.len()))
        .then_with(|| x.path.nodes.cmp(&y.path.nodes))
        .then_with(|| x.path.orientation.cmp(&y.path.orientation))
}

/// Index of the preferred candidate under `criterion`.
pub fn select(criterion: CriterionId, candidates: &[ScoredCandidate]) -> Option<usize> {
    (0..candidates.len()).min_by(|&i, &j| compare_candidates(criterion, &candidates[i], &candidates[j]))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedReason {
    #[default]
    /// No positive-length route exists between any anchor pair.
    NoPath,
    /// A reviewer marked the segment as unmatchable.
    MarkedUnmatchable,
}

impl UnmatchedReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UnmatchedReason::NoPath => "no_path",
            UnmatchedReason::MarkedUnmatchable => "marked_unmatchable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum MatchStatus {
    Matched,
    Unmatched(UnmatchedReason),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub seg_id: String,
    pub sensor_id: String,
    /// Segment endpoints `[a, b]` in working coordinates.
    pub segment: [[f64; 2]; 2],
    #[serde(flatten)]
    pub status: MatchStatus,
    pub criterion_used: CriterionId,
    pub candidates_evaluated: usize,
    pub chosen: Option<PathRecord>,
    pub scores: Option<CriterionScores>,
    #[serde(default)]
    pub overridden: bool,
}

impl MatchResult {
    pub fn is_matched(&self) -> bool {
        self.status == MatchStatus::Matched
    }

    pub fn street_edges(&self) -> &[String] {
        self.chosen.as_ref().map_or(&[], |c| &c.street_edges)
    }
}

/// Candidate generation and selection over one street network.
#[derive(Clone, Copy, Debug)]
pub struct Matcher<'a> {
    net: &'a StreetNetwork,
    index: &'a SpatialIndex,
    k: usize,
}

impl<'a> Matcher<'a> {
    pub fn new(net: &'a StreetNetwork, index: &'a SpatialIndex, k: usize) -> Result<Self> {
        if net.is_empty() || index.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        Ok(Matcher {
            net,
            index,
            k: k.max(1),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn network(&self) -> &'a StreetNetwork {
        self.net
    }

    pub fn search_space(&self) -> SearchSpace {
        SearchSpace::new(self.net.node_count())
    }

    fn anchors(&self, p: Point) -> Vec<NodeIx> {
        self.index
            .knn(p, self.k)
            .expect("index is non-empty")
            .into_iter()
            .map(|(n, _)| n)
            .collect()
    }

    /// All candidate paths, forward (`a -> b`) pairs first, each in anchor order.
    pub fn candidates(&self, seg: &MeasurementSegment, space: &mut SearchSpace) -> Vec<CandidatePath> {
        let near_a = self.anchors(seg.a);
        let near_b = self.anchors(seg.b);
        let mut out = Vec::with_capacity(2 * self.k * self.k);
        for (orientation, sources, targets) in [
            (Orientation::AtoB, &near_a, &near_b),
            (Orientation::BtoA, &near_b, &near_a),
        ] {
            for &s in sources.iter() {
                let wanted: Vec<NodeIx> = targets.iter().copied().filter(|&t| t != s).collect();
                if wanted.is_empty() {
                    continue;
                }
                for path in space.shortest_paths(self.net, s, &wanted).into_iter().flatten() {
                    out.push(CandidatePath::new(self.net, seg, orientation, path.nodes, path.edges));
                }
            }
        }
        out
    }

    /// Candidates with their four scores. Candidates whose geometry is
    /// degenerate (coincident consecutive nodes) cannot be scored and are left out.
    pub fn evaluate(&self, seg: &MeasurementSegment, space: &mut SearchSpace) -> Vec<ScoredCandidate> {
        self.candidates(seg, space)
            .into_iter()
            .filter_map(|path| {
                score_all(self.net, &path, seg)
                    .ok()
                    .map(|scores| ScoredCandidate { path, scores })
            })
            .collect()
    }

    pub fn match_one(&self, seg: &MeasurementSegment, criterion: CriterionId, space: &mut SearchSpace) -> MatchResult {
        let scored = self.evaluate(seg, space);
        self.result_from(seg, criterion, &scored)
    }

    /// Builds the result for an already evaluated candidate set.
    pub fn result_from(&self, seg: &MeasurementSegment, criterion: CriterionId, scored: &[ScoredCandidate]) -> MatchResult {
        let best = select(criterion, scored).map(|i| &scored[i]);
        MatchResult {
            seg_id: seg.id.clone(),
            sensor_id: seg.sensor_id.clone(),
            segment: [[seg.a.x, seg.a.y], [seg.b.x, seg.b.y]],
            status: match best {
                Some(_) => MatchStatus::Matched,
                None => MatchStatus::Unmatched(UnmatchedReason::NoPath),
            },
            criterion_used: criterion,
            candidates_evaluated: scored.len(),
            chosen: best.map(|c| c.path.record(self.net)),
            scores: best.map(|c| c.scores),
            overridden: false,
        }
    }

    /// Matches every segment, in segment-id order, on `threads` worker
    /// threads (`None` lets the pool decide). Output does not depend on the
    /// thread count.
    pub fn match_all(
        &self,
        segments: &MeasurementNetwork,
        criterion: CriterionId,
        threads: Option<usize>,
    ) -> (Vec<MatchResult>, RunSummary) {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n.max(1));
        }
        let pool = builder.build().expect("thread pool");
        let results: Vec<MatchResult> = pool.install(|| {
            segments
                .segments()
                .par_iter()
                .map_init(|| self.search_space(), |space, seg| self.match_one(seg, criterion, space))
                .collect()
        });
        let summary = RunSummary::from_results(&results);
        (results, summary)
    }
}

pub fn generate_candidates(
    net: &StreetNetwork,
    index: &SpatialIndex,
    seg: &MeasurementSegment,
    k: usize,
) -> Result<Vec<CandidatePath>> {
    let m = Matcher::new(net, index, k)?;
    Ok(m.candidates(seg, &mut m.search_space()))
}

pub fn match_one(
    net: &StreetNetwork,
    index: &SpatialIndex,
    seg: &MeasurementSegment,
    k: usize,
    criterion: CriterionId,
) -> Result<MatchResult> {
    let m = Matcher::new(net, index, k)?;
    Ok(m.match_one(seg, criterion, &mut m.search_space()))
}

pub fn match_all(
    net: &StreetNetwork,
    index: &SpatialIndex,
    segments: &MeasurementNetwork,
    k: usize,
    criterion: CriterionId,
    threads: Option<usize>,
) -> Result<(Vec<MatchResult>, RunSummary)> {
    if segments.is_empty() {
        return Ok((Vec::new(), RunSummary::default()));
    }
    Ok(Matcher::new(net, index, k)?.match_all(segments, criterion, threads))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedEntry {
    pub seg_id: String,
    pub reason: UnmatchedReason,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub segments: usize,
    pub matched: usize,
    pub unmatched: usize,
    pub overridden: usize,
    pub unmatched_reasons: BTreeMap<String, usize>,
    pub unmatched_segments: Vec<UnmatchedEntry>,
    /// Street edges claimed by more than one segment, with their counts.
    pub shared_edges: BTreeMap<String, usize>,
    /// Number of street edges claimed by exactly `n` segments, keyed by `n`.
    pub edge_reuse_histogram: BTreeMap<usize, usize>,
}

impl RunSummary {
    pub fn from_results(results: &[MatchResult]) -> Self {
        let mut s = RunSummary {
            segments: results.len(),
            ..Default::default()
        };
        let mut usage: BTreeMap<&str, usize> = BTreeMap::new();
        for r in results {
            if r.overridden {
                s.overridden += 1;
            }
            match r.status {
                MatchStatus::Matched => {
                    s.matched += 1;
                    for e in r.street_edges() {
                        *usage.entry(e).or_default() += 1;
                    }
                }
                MatchStatus::Unmatched(reason) => {
                    s.unmatched += 1;
                    *s.unmatched_reasons.entry(reason.as_str().to_string()).or_default() += 1;
                    s.unmatched_segments.push(UnmatchedEntry {
                        seg_id: r.seg_id.clone(),
                        reason,
                    });
                }
            }
        }
        for (edge, count) in usage {
            *s.edge_reuse_histogram.entry(count).or_default() += 1;
            if count > 1 {
                s.shared_edges.insert(edge.to_string(), count);
            }
        }
        s
    }
}
