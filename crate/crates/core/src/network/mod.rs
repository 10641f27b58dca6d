//! The two input networks and the preprocessing applied to them.
//!
//! Node and edge identifiers are opaque strings. Internally both are stored in
//! ascending identifier order, so comparing dense indices is the same as
//! comparing identifiers. All tie-breaks in the crate rely on this.

mod consolidate;
mod index;
mod load;
mod union_find;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LocalProjection, Point};

pub use consolidate::consolidate;
pub use index::SpatialIndex;
pub use load::{
    load_measurements, load_street_network, read_measurements_csv, read_measurements_geojson,
    read_street_network, write_edges_csv, write_measurements_csv, write_nodes_csv, Coords,
};
pub use union_find::DisjointSet;

/// Stored edge lengths may not undercut the straight-line distance by more than this.
pub const LENGTH_SLACK: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIx(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeIx(pub u32);

impl NodeIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreetEdge {
    pub id: String,
    pub from: NodeIx,
    pub to: NodeIx,
    pub length_m: f64,
}

/// A node record as read from input, before validation.
#[derive(Clone, Debug)]
pub struct RawNode {
    pub id: String,
    pub point: Point,
    pub row: Option<u64>,
}

/// An edge record as read from input, before validation.
#[derive(Clone, Debug)]
pub struct RawEdge {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_m: Option<f64>,
    pub row: Option<u64>,
}

/// The directed high-resolution street network.
#[derive(Clone, Debug)]
pub struct StreetNetwork {
    node_ids: Vec<String>,
    points: Vec<Point>,
    edges: Vec<StreetEdge>,
    out_adj: Vec<Vec<EdgeIx>>,
    in_adj: Vec<Vec<EdgeIx>>,
    node_lookup: HashMap<String, NodeIx>,
    edge_lookup: HashMap<String, EdgeIx>,
    projection: Option<LocalProjection>,
}

impl StreetNetwork {
    /// Validates raw records and builds the network.
    ///
    /// `source` names the input in error messages. Missing edge lengths are
    /// filled with the straight-line distance between the endpoints.
    pub fn from_records(
        source: &str,
        edge_source: &str,
        mut nodes: Vec<RawNode>,
        mut edges: Vec<RawEdge>,
        projection: Option<LocalProjection>,
    ) -> Result<Self> {
        nodes.sort_by(|a, b| a.id.cmp(&b.id).then(a.row.cmp(&b.row)));
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::schema(
                    source,
                    pair[1].row,
                    format!("duplicate node id {:?}", pair[1].id),
                ));
            }
        }
        for node in &nodes {
            if !node.point.is_finite() {
                return Err(Error::schema(source, node.row, "non-finite coordinate"));
            }
        }
        let node_lookup: HashMap<String, NodeIx> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), NodeIx(i as u32)))
            .collect();
        let points: Vec<Point> = nodes.iter().map(|n| n.point).collect();

        edges.sort_by(|a, b| a.id.cmp(&b.id).then(a.row.cmp(&b.row)));
        let mut built = Vec::with_capacity(edges.len());
        for (i, raw) in edges.iter().enumerate() {
            if i > 0 && edges[i - 1].id == raw.id {
                return Err(Error::schema(
                    edge_source,
                    raw.row,
                    format!("duplicate edge id {:?}", raw.id),
                ));
            }
            let endpoint = |id: &str| {
                node_lookup.get(id).copied().ok_or_else(|| {
                    Error::schema(edge_source, raw.row, format!("edge {:?} references unknown node {id:?}", raw.id))
                })
            };
            let from = endpoint(&raw.from)?;
            let to = endpoint(&raw.to)?;
            let straight = points[from.index()].distance(points[to.index()]);
            let length_m = raw.length_m.unwrap_or(straight);
            if length_m <= 0.0 || !length_m.is_finite() {
                return Err(Error::schema(
                    edge_source,
                    raw.row,
                    format!("edge {:?} has nonpositive length {length_m}", raw.id),
                ));
            }
            if length_m < LENGTH_SLACK * straight {
                return Err(Error::schema(
                    edge_source,
                    raw.row,
                    format!(
                        "edge {:?} length {length_m} undercuts straight-line distance {straight}",
                        raw.id
                    ),
                ));
            }
            built.push(StreetEdge {
                id: raw.id.clone(),
                from,
                to,
                length_m,
            });
        }

        Ok(Self::assemble(
            nodes.into_iter().map(|n| n.id).collect(),
            points,
            built,
            projection,
        ))
    }

    /// Builds adjacency and lookups. Ids must already be sorted and unique.
    pub(crate) fn assemble(
        node_ids: Vec<String>,
        points: Vec<Point>,
        edges: Vec<StreetEdge>,
        projection: Option<LocalProjection>,
    ) -> Self {
        debug_assert!(node_ids.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.windows(2).all(|w| w[0].id < w[1].id));
        let mut out_adj = vec![Vec::new(); node_ids.len()];
        let mut in_adj = vec![Vec::new(); node_ids.len()];
        for (i, e) in edges.iter().enumerate() {
            out_adj[e.from.index()].push(EdgeIx(i as u32));
            in_adj[e.to.index()].push(EdgeIx(i as u32));
        }
        let node_lookup = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), NodeIx(i as u32)))
            .collect();
        let edge_lookup = edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), EdgeIx(i as u32)))
            .collect();
        StreetNetwork {
            node_ids,
            points,
            edges,
            out_adj,
            in_adj,
            node_lookup,
            edge_lookup,
            projection,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn node_id(&self, n: NodeIx) -> &str {
        &self.node_ids[n.index()]
    }

    pub fn point(&self, n: NodeIx) -> Point {
        self.points[n.index()]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn edge(&self, e: EdgeIx) -> &StreetEdge {
        &self.edges[e.index()]
    }

    pub fn edges(&self) -> &[StreetEdge] {
        &self.edges
    }

    pub fn out_edges(&self, n: NodeIx) -> &[EdgeIx] {
        &self.out_adj[n.index()]
    }

    pub fn in_edges(&self, n: NodeIx) -> &[EdgeIx] {
        &self.in_adj[n.index()]
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIx> {
        self.node_lookup.get(id).copied()
    }

    pub fn edge_index(&self, id: &str) -> Option<EdgeIx> {
        self.edge_lookup.get(id).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeIx> + '_ {
        (0..self.node_ids.len() as u32).map(NodeIx)
    }

    pub fn projection(&self) -> Option<&LocalProjection> {
        self.projection.as_ref()
    }

    /// Same network tagged with the projection its working coordinates came from.
    pub fn with_projection(mut self, projection: Option<LocalProjection>) -> Self {
        self.projection = projection;
        self
    }

    /// Number of weakly connected components (isolated nodes count as one each).
    pub fn weak_component_count(&self) -> usize {
        let mut sets = DisjointSet::new(self.node_count());
        for e in &self.edges {
            sets.union(e.from.index(), e.to.index());
        }
        sets.set_count()
    }
}

/// One straight low-resolution edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSegment {
    pub id: String,
    pub sensor_id: String,
    pub a: Point,
    pub b: Point,
    pub length_m: f64,
}

impl MeasurementSegment {
    pub fn new(id: impl Into<String>, sensor_id: impl Into<String>, a: Point, b: Point) -> Self {
        MeasurementSegment {
            id: id.into(),
            sensor_id: sensor_id.into(),
            a,
            b,
            length_m: a.distance(b),
        }
    }
}

/// The undirected low-resolution measurement network, as a set of segments.
#[derive(Clone, Debug, Default)]
pub struct MeasurementNetwork {
    segments: Vec<MeasurementSegment>,
    projection: Option<LocalProjection>,
}

impl MeasurementNetwork {
    /// Validates segments and orders them by id.
    pub fn new(
        source: &str,
        mut segments: Vec<MeasurementSegment>,
        projection: Option<LocalProjection>,
    ) -> Result<Self> {
        segments.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in segments.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::schema(source, None, format!("duplicate segment id {:?}", pair[1].id)));
            }
        }
        for s in &segments {
            if s.sensor_id.is_empty() {
                return Err(Error::schema(source, None, format!("segment {:?} has no sensor_id", s.id)));
            }
            if !s.a.is_finite() || !s.b.is_finite() {
                return Err(Error::schema(source, None, format!("segment {:?} has non-finite coordinates", s.id)));
            }
            if s.a == s.b {
                return Err(Error::schema(source, None, format!("segment {:?} has identical endpoints", s.id)));
            }
            let straight = s.a.distance(s.b);
            if s.length_m < straight * LENGTH_SLACK {
                return Err(Error::schema(source, None, format!("segment {:?} is shorter than its chord", s.id)));
            }
        }
        Ok(MeasurementNetwork {
            segments,
            projection,
        })
    }

    pub fn segments(&self) -> &[MeasurementSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&MeasurementSegment> {
        self.segments
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.segments[i])
    }

    pub fn projection(&self) -> Option<&LocalProjection> {
        self.projection.as_ref()
    }

    /// Same network tagged with the projection its working coordinates came from.
    pub fn with_projection(mut self, projection: Option<LocalProjection>) -> Self {
        self.projection = projection;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, x: f64, y: f64) -> RawNode {
        RawNode {
            id: id.into(),
            point: Point::new(x, y),
            row: None,
        }
    }

    fn edge(id: &str, from: &str, to: &str, length: Option<f64>) -> RawEdge {
        RawEdge {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length_m: length,
            row: Some(2),
        }
    }

    #[test]
    fn missing_length_defaults_to_straight_line() {
        let net = StreetNetwork::from_records(
            "n",
            "e",
            vec![node("u", 0.0, 0.0), node("v", 3.0, 4.0)],
            vec![edge("e1", "u", "v", None)],
            None,
        )
        .unwrap();
        assert_eq!(net.edge(EdgeIx(0)).length_m, 5.0);
        assert_eq!(net.out_edges(NodeIx(0)), &[EdgeIx(0)]);
        assert_eq!(net.in_edges(NodeIx(1)), &[EdgeIx(0)]);
    }

    #[test]
    fn rejects_unknown_endpoint() {
        let err = StreetNetwork::from_records(
            "n",
            "edges.csv",
            vec![node("u", 0.0, 0.0)],
            vec![edge("e1", "u", "w", None)],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema { row: Some(2), .. }), "{err}");
    }

    #[test]
    fn rejects_nonpositive_and_undercutting_lengths() {
        let nodes = || vec![node("u", 0.0, 0.0), node("v", 3.0, 4.0)];
        for bad in [0.0, -1.0, 4.0] {
            let err = StreetNetwork::from_records("n", "e", nodes(), vec![edge("e1", "u", "v", Some(bad))], None);
            assert!(matches!(err, Err(Error::Schema { .. })), "length {bad}");
        }
        // slight undercut is tolerated
        assert!(StreetNetwork::from_records("n", "e", nodes(), vec![edge("e1", "u", "v", Some(4.96))], None).is_ok());
    }

    #[test]
    fn rejects_duplicate_node() {
        let mut a = node("u", 0.0, 0.0);
        a.row = Some(2);
        let mut b = node("u", 1.0, 0.0);
        b.row = Some(3);
        let err = StreetNetwork::from_records("nodes.csv", "e", vec![a, b], vec![], None).unwrap_err();
        assert_eq!(err.to_string(), "nodes.csv, row 3: duplicate node id \"u\"");
    }

    #[test]
    fn ids_are_sorted_internally() {
        let net = StreetNetwork::from_records(
            "n",
            "e",
            vec![node("b", 1.0, 0.0), node("a", 0.0, 0.0), node("c", 2.0, 0.0)],
            vec![edge("z", "a", "b", None), edge("y", "b", "c", None)],
            None,
        )
        .unwrap();
        assert_eq!(net.node_id(NodeIx(0)), "a");
        assert_eq!(net.edge(EdgeIx(0)).id, "y");
        assert_eq!(net.node_index("c"), Some(NodeIx(2)));
        assert_eq!(net.weak_component_count(), 1);
    }

    #[test]
    fn counts_weak_components() {
        let net = StreetNetwork::from_records(
            "n",
            "e",
            vec![node("a", 0.0, 0.0), node("b", 1.0, 0.0), node("c", 5.0, 0.0), node("d", 6.0, 0.0)],
            vec![edge("1", "a", "b", None), edge("2", "d", "c", None)],
            None,
        )
        .unwrap();
        assert_eq!(net.weak_component_count(), 2);
    }

    #[test]
    fn measurement_validation() {
        let ok = MeasurementSegment::new("s", "S1", Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        assert!(MeasurementNetwork::new("m", vec![ok.clone()], None).is_ok());
        let dup = MeasurementNetwork::new("m", vec![ok.clone(), ok.clone()], None);
        assert!(dup.is_err());
        let mut no_sensor = ok.clone();
        no_sensor.sensor_id.clear();
        assert!(MeasurementNetwork::new("m", vec![no_sensor], None).is_err());
        let degenerate = MeasurementSegment::new("d", "S", Point::new(1.0, 1.0), Point::new(1.0, 1.0));
        assert!(MeasurementNetwork::new("m", vec![degenerate], None).is_err());
    }
}
