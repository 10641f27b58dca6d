//! Seeded synthetic networks with known ground truth.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Point;
use crate::network::{MeasurementNetwork, MeasurementSegment, RawEdge, RawNode, StreetNetwork};

pub fn grid_node_id(i: usize, j: usize) -> String {
    format!("n{i:04}_{j:04}")
}

fn edge_id(from: &str, to: &str) -> String {
    format!("{from}>{to}")
}

/// `size × size` grid with `spacing` meters between neighbours and a directed
/// edge each way along every grid link. Node `(i, j)` sits at
/// `(i * spacing, j * spacing)`.
pub fn grid_network(size: usize, spacing: f64) -> StreetNetwork {
    let mut nodes = Vec::with_capacity(size * size);
    let mut edges = Vec::with_capacity(4 * size * size);
    for i in 0..size {
        for j in 0..size {
            let id = grid_node_id(i, j);
            nodes.push(RawNode {
                id: id.clone(),
                point: Point::new(i as f64 * spacing, j as f64 * spacing),
                row: None,
            });
            for (ni, nj) in [(i + 1, j), (i, j + 1)] {
                if ni < size && nj < size {
                    let other = grid_node_id(ni, nj);
                    for (f, t) in [(&id, &other), (&other, &id)] {
                        edges.push(RawEdge {
                            id: edge_id(f, t),
                            from: f.clone(),
                            to: t.clone(),
                            length_m: None,
                            row: None,
                        });
                    }
                }
            }
        }
    }
    StreetNetwork::from_records("grid", "grid", nodes, edges, None).expect("grid is well formed")
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridBenchmark {
    pub size: usize,
    pub spacing_m: f64,
    pub segments: usize,
    pub min_span: usize,
    pub max_span: usize,
    /// Maximum displacement of each segment endpoint from its grid node.
    pub jitter_m: f64,
    pub seed: u64,
}

impl Default for GridBenchmark {
    fn default() -> Self {
        GridBenchmark {
            size: 30,
            spacing_m: 100.0,
            segments: 500,
            min_span: 3,
            max_span: 10,
            jitter_m: 10.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub network: StreetNetwork,
    pub measurements: MeasurementNetwork,
    /// Ground-truth node sequence (a to b) per segment id.
    pub truth: BTreeMap<String, Vec<String>>,
}

impl GridBenchmark {
    /// Generates the grid and segments spanning `min_span..=max_span` collinear
    /// grid links.
    ///
    /// Each segment is displaced sideways by one common offset and each
    /// endpoint slides independently along the segment direction, both drawn
    /// uniformly from `±jitter/√2`, so no endpoint moves more than `jitter_m`
    /// and the segment stays parallel to its grid line.
    pub fn generate(&self) -> SyntheticData {
        assert!(self.min_span >= 1 && self.min_span <= self.max_span && self.max_span < self.size);
        let network = grid_network(self.size, self.spacing_m);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let half = self.jitter_m / std::f64::consts::SQRT_2;
        let draw = |rng: &mut ChaCha8Rng| if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };

        let mut segments = Vec::with_capacity(self.segments);
        let mut truth = BTreeMap::new();
        for n in 0..self.segments {
            let span = rng.random_range(self.min_span..=self.max_span);
            let horizontal = rng.random_bool(0.5);
            let forward = rng.random_bool(0.5);
            let along = rng.random_range(0..self.size - span);
            let across = rng.random_range(0..self.size);
            let steps: Vec<usize> = if forward {
                (along..=along + span).collect()
            } else {
                (along..=along + span).rev().collect()
            };
            let cells: Vec<(usize, usize)> = steps
                .iter()
                .map(|&s| if horizontal { (s, across) } else { (across, s) })
                .collect();

            let to_point = |(i, j): (usize, usize)| Point::new(i as f64 * self.spacing_m, j as f64 * self.spacing_m);
            let start = to_point(cells[0]);
            let end = to_point(cells[cells.len() - 1]);
            let len = start.distance(end);
            let (ux, uy) = ((end.x - start.x) / len, (end.y - start.y) / len);
            let side = draw(&mut rng);
            let slide_a = draw(&mut rng);
            let slide_b = draw(&mut rng);
            let a = Point::new(start.x + ux * slide_a - uy * side, start.y + uy * slide_a + ux * side);
            let b = Point::new(end.x + ux * slide_b - uy * side, end.y + uy * slide_b + ux * side);

            let id = format!("s{n:05}");
            truth.insert(id.clone(), cells.iter().map(|&(i, j)| grid_node_id(i, j)).collect());
            segments.push(MeasurementSegment::new(id, format!("S{n:05}"), a, b));
        }
        let measurements = MeasurementNetwork::new("grid benchmark", segments, None).expect("generated segments are valid");
        SyntheticData {
            network,
            measurements,
            truth,
        }
    }
}

/// A connected-looking random planar street network with about `side²` nodes.
///
/// Nodes are lattice points perturbed by up to 30% of the spacing. Edges join
/// lattice neighbours plus one diagonal per cell, so no two edges cross; a
/// fraction of links is dropped and the rest are one-way or two-way at random.
/// Lengths exceed the straight-line distance by up to 20%.
pub fn random_planar_network(side: usize, spacing: f64, seed: u64) -> StreetNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |i: usize, j: usize| format!("p{i:03}_{j:03}");
    let mut nodes = Vec::new();
    let mut points = BTreeMap::new();
    for i in 0..side {
        for j in 0..side {
            let p = Point::new(
                (i as f64 + rng.random_range(-0.3..0.3)) * spacing,
                (j as f64 + rng.random_range(-0.3..0.3)) * spacing,
            );
            points.insert((i, j), p);
            nodes.push(RawNode {
                id: id(i, j),
                point: p,
                row: None,
            });
        }
    }
    let mut edges = Vec::new();
    for i in 0..side {
        for j in 0..side {
            let diagonal = if rng.random_bool(0.5) { (i + 1, j + 1) } else { (i + 1, j.wrapping_sub(1)) };
            for (ni, nj) in [(i + 1, j), (i, j + 1), diagonal] {
                if ni >= side || nj >= side {
                    continue;
                }
                if rng.random_bool(0.15) {
                    continue;
                }
                let (u, v) = (id(i, j), id(ni, nj));
                let straight = points[&(i, j)].distance(points[&(ni, nj)]);
                let mut add = |f: &str, t: &str, rng: &mut ChaCha8Rng| {
                    edges.push(RawEdge {
                        id: edge_id(f, t),
                        from: f.to_string(),
                        to: t.to_string(),
                        length_m: Some(straight * rng.random_range(1.0..1.2)),
                        row: None,
                    });
                };
                match rng.random_range(0..4) {
                    0 => add(&u, &v, &mut rng),
                    1 => add(&v, &u, &mut rng),
                    _ => {
                        add(&u, &v, &mut rng);
                        add(&v, &u, &mut rng);
                    }
                }
            }
        }
    }
    StreetNetwork::from_records("planar", "planar", nodes, edges, None).expect("planar network is well formed")
}

/// Random segments with endpoints drawn uniformly over `[0, extent]²`, at
/// least `min_length` apart.
pub fn random_segments(count: usize, extent: f64, min_length: f64, seed: u64) -> MeasurementNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = Vec::with_capacity(count);
    while segments.len() < count {
        let a = Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent));
        let b = Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent));
        if a.distance(b) < min_length {
            continue;
        }
        let n = segments.len();
        segments.push(MeasurementSegment::new(format!("r{n:04}"), format!("R{n:04}"), a, b));
    }
    MeasurementNetwork::new("random segments", segments, None).expect("random segments are valid")
}
