use std::collections::BTreeMap;

use crate::geometry::Point;

use super::{DisjointSet, NodeIx, SpatialIndex, StreetEdge, StreetNetwork};

/// Merges street nodes lying within `tolerance` meters of each other.
///
/// Nodes are clustered by single linkage (any chain of pairs within the
/// tolerance joins one cluster). Each cluster becomes a single node at the
/// centroid of its original members and takes the smallest member id. Merging
/// can bring two centroids within tolerance, so clustering is repeated on the
/// merged nodes until no pair remains within tolerance; this makes the
/// operation idempotent.
///
/// Edges keep their ids and lengths. Edges collapsed onto one node are
/// dropped; parallel edges are kept. A rewired edge whose stored length now
/// undercuts the straight-line distance between its new endpoints is clamped
/// up to that distance.
pub fn consolidate(net: &StreetNetwork, tolerance: f64) -> StreetNetwork {
    let original = net.points();
    // each current node holds its original members in ascending order
    let mut members: Vec<Vec<usize>> = (0..net.node_count()).map(|i| vec![i]).collect();
    let mut positions: Vec<Point> = original.to_vec();

    loop {
        let index = SpatialIndex::from_points(
            positions
                .iter()
                .enumerate()
                .map(|(i, p)| (*p, NodeIx(i as u32))),
        );
        let mut sets = DisjointSet::new(positions.len());
        for (i, p) in positions.iter().enumerate() {
            for (j, _) in index.within(*p, tolerance) {
                sets.union(i, j.index());
            }
        }
        if sets.set_count() == positions.len() {
            break;
        }

        let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, m) in members.iter().enumerate() {
            clusters.entry(sets.find(i)).or_default().extend(m);
        }
        let mut merged: Vec<Vec<usize>> = clusters
            .into_values()
            .map(|mut m| {
                m.sort_unstable();
                m
            })
            .collect();
        merged.sort_unstable_by_key(|m| m[0]);
        positions = merged.iter().map(|m| centroid(original, m)).collect();
        members = merged;
    }

    let mut cluster_of = vec![NodeIx(0); original.len()];
    for (c, m) in members.iter().enumerate() {
        for &i in m {
            cluster_of[i] = NodeIx(c as u32);
        }
    }
    let node_ids = members
        .iter()
        .map(|m| net.node_id(NodeIx(m[0] as u32)).to_string())
        .collect();

    let edges = net
        .edges()
        .iter()
        .filter_map(|e| {
            let from = cluster_of[e.from.index()];
            let to = cluster_of[e.to.index()];
            if from == to {
                return None;
            }
            let rewired = members[from.index()].len() > 1 || members[to.index()].len() > 1;
            let straight = positions[from.index()].distance(positions[to.index()]);
            let length_m = if rewired && e.length_m < straight {
                straight
            } else {
                e.length_m
            };
            Some(StreetEdge {
                id: e.id.clone(),
                from,
                to,
                length_m,
            })
        })
        .collect();

    StreetNetwork::assemble(node_ids, positions, edges, net.projection().copied())
}

fn centroid(points: &[Point], members: &[usize]) -> Point {
    let n = members.len() as f64;
    let (sx, sy) = members
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &i| (sx + points[i].x, sy + points[i].y));
    Point::new(sx / n, sy / n)
}
