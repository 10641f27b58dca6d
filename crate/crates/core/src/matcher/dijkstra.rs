use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::network::{EdgeIx, NodeIx, StreetNetwork};

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    dist: f64,
    node: NodeIx,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A shortest path as node and edge sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutedPath {
    pub nodes: Vec<NodeIx>,
    pub edges: Vec<EdgeIx>,
}

/// Reusable single-source search state sized for one network.
///
/// Buffers are reset lazily through epoch stamps, so a search only pays for
/// the nodes it touches.
#[derive(Clone, Debug)]
pub struct SearchSpace {
    dist: Vec<f64>,
    reached: Vec<u32>,
    settled: Vec<u32>,
    marked: Vec<u32>,
    epoch: u32,
    mark_epoch: u32,
    heap: BinaryHeap<Entry>,
    stack: Vec<NodeIx>,
}

impl SearchSpace {
    pub fn new(node_count: usize) -> Self {
        SearchSpace {
            dist: vec![f64::INFINITY; node_count],
            reached: vec![0; node_count],
            settled: vec![0; node_count],
            marked: vec![0; node_count],
            epoch: 0,
            mark_epoch: 0,
            heap: BinaryHeap::new(),
            stack: Vec::new(),
        }
    }

    fn dist(&self, n: NodeIx) -> f64 {
        if self.reached[n.index()] == self.epoch {
            self.dist[n.index()]
        } else {
            f64::INFINITY
        }
    }

    fn is_settled(&self, n: NodeIx) -> bool {
        self.settled[n.index()] == self.epoch
    }

    fn is_marked(&self, n: NodeIx) -> bool {
        self.marked[n.index()] == self.mark_epoch
    }

    /// Shortest paths from `source` to each of `targets` (`None` when unreachable).
    ///
    /// The search stops once every target is settled. Among equal-length
    /// shortest paths the one with the lexicographically smallest node
    /// sequence is returned; parallel edges resolve to the smallest edge index.
    pub fn shortest_paths(
        &mut self,
        net: &StreetNetwork,
        source: NodeIx,
        targets: &[NodeIx],
    ) -> Vec<Option<RoutedPath>> {
        self.search(net, source, targets);
        targets.iter().map(|&t| self.extract(net, source, t)).collect()
    }

    fn search(&mut self, net: &StreetNetwork, source: NodeIx, targets: &[NodeIx]) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.reached.fill(0);
            self.settled.fill(0);
            self.epoch = 1;
        }
        self.heap.clear();
        self.reached[source.index()] = self.epoch;
        self.dist[source.index()] = 0.0;
        self.heap.push(Entry {
            dist: 0.0,
            node: source,
        });

        let mut remaining = targets.len();
        let mut seen_targets: Vec<NodeIx> = Vec::with_capacity(targets.len());
        while let Some(Entry { dist, node }) = self.heap.pop() {
            if self.is_settled(node) || dist > self.dist(node) {
                continue;
            }
            self.settled[node.index()] = self.epoch;
            if targets.contains(&node) && !seen_targets.contains(&node) {
                seen_targets.push(node);
                remaining -= targets.iter().filter(|&&t| t == node).count();
                if remaining == 0 {
                    break;
                }
            }
            for &e in net.out_edges(node) {
                let edge = net.edge(e);
                let next = dist + edge.length_m;
                if !self.is_settled(edge.to) && next < self.dist(edge.to) {
                    self.reached[edge.to.index()] = self.epoch;
                    self.dist[edge.to.index()] = next;
                    self.heap.push(Entry {
                        dist: next,
                        node: edge.to,
                    });
                }
            }
        }
    }

    fn tight(&self, net: &StreetNetwork, e: EdgeIx) -> bool {
        let edge = net.edge(e);
        self.is_settled(edge.from) && self.is_settled(edge.to) && self.dist(edge.from) + edge.length_m == self.dist(edge.to)
    }

    fn extract(&mut self, net: &StreetNetwork, source: NodeIx, target: NodeIx) -> Option<RoutedPath> {
        if !self.is_settled(target) {
            return None;
        }
        self.mark_epoch = self.mark_epoch.wrapping_add(1);
        if self.mark_epoch == 0 {
            self.marked.fill(0);
            self.mark_epoch = 1;
        }
        // nodes lying on some shortest source -> target path
        self.marked[target.index()] = self.mark_epoch;
        self.stack.clear();
        self.stack.push(target);
        while let Some(v) = self.stack.pop() {
            for &e in net.in_edges(v) {
                let u = net.edge(e).from;
                if !self.is_marked(u) && self.tight(net, e) {
                    self.marked[u.index()] = self.mark_epoch;
                    self.stack.push(u);
                }
            }
        }
        debug_assert!(self.is_marked(source));

        let mut nodes = vec![source];
        let mut edges = Vec::new();
        let mut at = source;
        while at != target {
            let (next, e) = net
                .out_edges(at)
                .iter()
                .filter(|&&e| self.is_marked(net.edge(e).to) && self.tight(net, e))
                .map(|&e| (net.edge(e).to, e))
                .min()?;
            nodes.push(next);
            edges.push(e);
            at = next;
        }
        Some(RoutedPath { nodes, edges })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::network::{RawEdge, RawNode};

    fn net(nodes: &[(&str, f64, f64)], edges: &[(&str, &str, &str, f64)]) -> StreetNetwork {
        StreetNetwork::from_records(
            "n",
            "e",
            nodes
                .iter()
                .map(|&(id, x, y)| RawNode {
                    id: id.into(),
                    point: Point::new(x, y),
                    row: None,
                })
                .collect(),
            edges
                .iter()
                .map(|&(id, f, t, l)| RawEdge {
                    id: id.into(),
                    from: f.into(),
                    to: t.into(),
                    length_m: Some(l),
                    row: None,
                })
                .collect(),
            None,
        )
        .unwrap()
    }

    fn ids(net: &StreetNetwork, p: &RoutedPath) -> Vec<String> {
        p.nodes.iter().map(|&n| net.node_id(n).to_string()).collect()
    }

    #[test]
    fn picks_lexicographically_smallest_among_ties() {
        // two equal routes s->b->t and s->a->t; a < b
        let n = net(
            &[("a", 1.0, 1.0), ("b", 1.0, -1.0), ("s", 0.0, 0.0), ("t", 2.0, 0.0)],
            &[
                ("1", "s", "b", 2.0),
                ("2", "b", "t", 2.0),
                ("3", "s", "a", 2.0),
                ("4", "a", "t", 2.0),
            ],
        );
        let mut space = SearchSpace::new(n.node_count());
        let s = n.node_index("s").unwrap();
        let t = n.node_index("t").unwrap();
        let p = space.shortest_paths(&n, s, &[t]).remove(0).unwrap();
        assert_eq!(ids(&n, &p), vec!["s", "a", "t"]);
    }

    #[test]
    fn respects_direction_and_reports_unreachable() {
        let n = net(&[("a", 0.0, 0.0), ("b", 1.0, 0.0)], &[("1", "a", "b", 1.0)]);
        let mut space = SearchSpace::new(n.node_count());
        let a = NodeIx(0);
        let b = NodeIx(1);
        assert!(space.shortest_paths(&n, a, &[b])[0].is_some());
        assert!(space.shortest_paths(&n, b, &[a])[0].is_none());
    }

    #[test]
    fn parallel_edges_use_shortest_then_smallest_index() {
        let n = net(
            &[("a", 0.0, 0.0), ("b", 1.0, 0.0)],
            &[("1", "a", "b", 3.0), ("2", "a", "b", 1.0), ("3", "a", "b", 1.0)],
        );
        let mut space = SearchSpace::new(n.node_count());
        let p = space.shortest_paths(&n, NodeIx(0), &[NodeIx(1)]).remove(0).unwrap();
        assert_eq!(p.edges, vec![n.edge_index("2").unwrap()]);
    }

    #[test]
    fn shorter_route_beats_lexicographic_order() {
        let n = net(
            &[("a", 1.0, 1.0), ("b", 1.0, -1.0), ("s", 0.0, 0.0), ("t", 2.0, 0.0)],
            &[
                ("1", "s", "a", 2.0),
                ("2", "a", "t", 2.5),
                ("3", "s", "b", 2.0),
                ("4", "b", "t", 2.0),
            ],
        );
        let mut space = SearchSpace::new(n.node_count());
        let p = space
            .shortest_paths(&n, n.node_index("s").unwrap(), &[n.node_index("t").unwrap()])
            .remove(0)
            .unwrap();
        assert_eq!(ids(&n, &p), vec!["s", "b", "t"]);
    }

    #[test]
    fn reuse_across_searches() {
        let n = net(
            &[("a", 0.0, 0.0), ("b", 1.0, 0.0), ("c", 2.0, 0.0)],
            &[("1", "a", "b", 1.0), ("2", "b", "c", 1.0), ("3", "c", "a", 2.0)],
        );
        let mut space = SearchSpace::new(n.node_count());
        for _ in 0..3 {
            let from_a = space.shortest_paths(&n, NodeIx(0), &[NodeIx(2), NodeIx(1)]);
            assert_eq!(from_a[0].as_ref().unwrap().nodes, vec![NodeIx(0), NodeIx(1), NodeIx(2)]);
            assert_eq!(from_a[1].as_ref().unwrap().nodes, vec![NodeIx(0), NodeIx(1)]);
            let from_c = space.shortest_paths(&n, NodeIx(2), &[NodeIx(1)]);
            assert_eq!(from_c[0].as_ref().unwrap().nodes, vec![NodeIx(2), NodeIx(0), NodeIx(1)]);
        }
    }
}
