//! Quadratic node-consolidation reference and a random network to run it on.

use lowres_match::geometry::Point;
use lowres_match::network::{RawEdge, RawNode, StreetNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quadratic reference: join every pair within tolerance with a plain
/// union-find, replace clusters by centroids of their original members and
/// repeat until no pair is within tolerance. Returns member lists, each
/// sorted, in order of their smallest member.
pub fn reference_clusters(points: &[Point], tol: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    loop {
        let centre = |m: &Vec<usize>| {
            let n = m.len() as f64;
            Point::new(
                m.iter().map(|&i| points[i].x).sum::<f64>() / n,
                m.iter().map(|&i| points[i].y).sum::<f64>() / n,
            )
        };
        let pos: Vec<Point> = clusters.iter().map(centre).collect();
        let mut parent: Vec<usize> = (0..pos.len()).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                i = p[i];
            }
            i
        }
        let mut joined = false;
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                if pos[i].distance(pos[j]) <= tol {
                    let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                        joined = true;
                    }
                }
            }
        }
        if !joined {
            return clusters;
        }
        let mut next: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; pos.len()];
        for (i, members) in clusters.iter().enumerate() {
            let r = root(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = next.len();
                next.push(Vec::new());
            }
            next[slot[r]].extend(members);
        }
        for m in &mut next {
            m.sort_unstable();
        }
        next.sort_by_key(|m| m[0]);
        clusters = next;
    }
}

pub fn random_network(n: usize, extent: f64, seed: u64) -> StreetNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<RawNode> = (0..n)
        .map(|i| RawNode {
            id: format!("v{i:04}"),
            point: Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent)),
            row: None,
        })
        .collect();
    let mut edges = Vec::new();
    for e in 0..2 * n {
        let (f, t) = (rng.random_range(0..n), rng.random_range(0..n));
        if f == t {
            continue;
        }
        let d = nodes[f].point.distance(nodes[t].point);
        edges.push(RawEdge {
            id: format!("e{e:05}"),
            from: nodes[f].id.clone(),
            to: nodes[t].id.clone(),
            length_m: Some(d * 1.1 + 0.01),
            row: None,
        });
    }
    StreetNetwork::from_records("n", "e", nodes, edges, None).unwrap()
}
