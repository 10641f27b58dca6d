//! Static 2-d tree over street nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::Point;

use super::{NodeIx, StreetNetwork};

/// Immutable k-d tree. Items are laid out so that for every range the middle
/// element splits the rest on the range's axis (x at even depth, y at odd).
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    items: Vec<(Point, NodeIx)>,
}

#[derive(PartialEq)]
struct Neighbor {
    dist_sq: f64,
    node: NodeIx,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn coord(p: Point, axis: usize) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

impl SpatialIndex {
    pub fn build(net: &StreetNetwork) -> Self {
        Self::from_points(net.nodes().map(|n| (net.point(n), n)))
    }

    pub fn from_points(points: impl IntoIterator<Item = (Point, NodeIx)>) -> Self {
        let mut items: Vec<_> = points.into_iter().collect();
        build_rec(&mut items, 0);
        SpatialIndex { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The `k` nearest nodes to `x`, ordered by (squared distance, node index).
    pub fn knn(&self, x: Point, k: usize) -> Result<Vec<(NodeIx, f64)>> {
        if self.items.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        let k = k.min(self.items.len());
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(0, self.items.len(), 0, x, k, &mut heap);
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|n| (n.node, n.dist_sq.sqrt()))
            .collect())
    }

    fn knn_rec(&self, lo: usize, hi: usize, axis: usize, q: Point, k: usize, heap: &mut BinaryHeap<Neighbor>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let (p, node) = self.items[mid];
        let cand = Neighbor {
            dist_sq: q.distance_sq(p),
            node,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if heap.peek().is_some_and(|worst| cand < *worst) {
            heap.pop();
            heap.push(cand);
        }

        let diff = coord(q, axis) - coord(p, axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, axis ^ 1, q, k, heap);
        let explore_far = heap.len() < k || heap.peek().is_some_and(|w| diff * diff <= w.dist_sq);
        if explore_far {
            self.knn_rec(far.0, far.1, axis ^ 1, q, k, heap);
        }
    }

    /// All nodes with `x.distance(p) <= radius`, ordered by (distance, node index).
    pub fn within(&self, x: Point, radius: f64) -> Vec<(NodeIx, f64)> {
        let mut out = Vec::new();
        self.within_rec(0, self.items.len(), 0, x, radius, &mut out);
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn within_rec(&self, lo: usize, hi: usize, axis: usize, q: Point, r: f64, out: &mut Vec<(NodeIx, f64)>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let (p, node) = self.items[mid];
        let d = q.distance(p);
        if d <= r {
            out.push((node, d));
        }
        let diff = coord(q, axis) - coord(p, axis);
        if -diff <= r {
            self.within_rec(mid + 1, hi, axis ^ 1, q, r, out);
        }
        if diff <= r {
            self.within_rec(lo, mid, axis ^ 1, q, r, out);
        }
    }
}

fn build_rec(items: &mut [(Point, NodeIx)], axis: usize) {
    if items.len() <= 1 {
        return;
    }
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| {
        coord(a.0, axis)
            .total_cmp(&coord(b.0, axis))
            .then(a.1.cmp(&b.1))
    });
    let (left, rest) = items.split_at_mut(mid);
    build_rec(left, axis ^ 1);
    build_rec(&mut rest[1..], axis ^ 1);
}
