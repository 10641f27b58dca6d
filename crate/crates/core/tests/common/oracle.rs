//! Exhaustive reference matcher: brute-force nearest nodes, quadratic
//! Dijkstra per anchor pair and scores computed from headings.

use std::f64::consts::PI;

use lowres_match::criteria::CriterionId;
use lowres_match::matcher::Orientation;
use lowres_match::network::{MeasurementSegment, NodeIx, StreetNetwork};

#[derive(Clone, Debug)]
pub struct OracleCandidate {
    pub orientation: Orientation,
    pub nodes: Vec<String>,
    pub edges: usize,
    pub anchors: f64,
    /// lc, rc, sc, ac
    pub scores: [f64; 4],
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)).sqrt()
}

fn xy(net: &StreetNetwork, i: usize) -> (f64, f64) {
    let p = net.points()[i];
    (p.x, p.y)
}

pub fn nearest(net: &StreetNetwork, q: (f64, f64), k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = (0..net.node_count())
        .map(|i| {
            let p = xy(net, i);
            ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2), i)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|x| x.1).collect()
}

/// Cheapest arc for every ordered node pair (parallel edges collapsed).
fn arc_matrix(net: &StreetNetwork) -> Vec<Vec<f64>> {
    let n = net.node_count();
    let mut w = vec![vec![f64::INFINITY; n]; n];
    for e in net.edges() {
        let (f, t) = (e.from.index(), e.to.index());
        if e.length_m < w[f][t] {
            w[f][t] = e.length_m;
        }
    }
    w
}

fn dijkstra(w: &[Vec<f64>], source: usize, reverse: bool) -> Vec<f64> {
    let n = w.len();
    let mut d = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    d[source] = 0.0;
    loop {
        let mut u = None;
        for v in 0..n {
            if !done[v] && d[v].is_finite() && u.is_none_or(|x: usize| d[v] < d[x]) {
                u = Some(v);
            }
        }
        let Some(u) = u else { break };
        done[u] = true;
        for v in 0..n {
            let c = if reverse { w[v][u] } else { w[u][v] };
            if d[u] + c < d[v] {
                d[v] = d[u] + c;
            }
        }
    }
    d
}

/// Lexicographically smallest shortest path, walking forward over nodes
/// that keep `from_s + to_t` on the optimum.
fn path(w: &[Vec<f64>], from_s: &[f64], to_t: &[f64], s: usize, t: usize) -> Option<(Vec<usize>, f64)> {
    let best = from_s[t];
    if !best.is_finite() {
        return None;
    }
    let tol = 1e-9 * best.max(1.0);
    let mut nodes = vec![s];
    let mut at = s;
    let mut walked = 0.0;
    while at != t {
        let next = (0..w.len()).find(|&v| w[at][v].is_finite() && (walked + w[at][v] + to_t[v] - best).abs() <= tol)?;
        walked += w[at][next];
        nodes.push(next);
        at = next;
    }
    Some((nodes, walked))
}

fn wrap(a: f64) -> f64 {
    let mut a = a;
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn heading(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1 - a.1).atan2(b.0 - a.0)
}

fn area(points: &[(f64, f64)], a: (f64, f64), b: (f64, f64)) -> f64 {
    let h = heading(a, b);
    let (c, s) = (h.cos(), h.sin());
    let local: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            let (x, y) = (p.0 - a.0, p.1 - a.1);
            (x * c + y * s, -x * s + y * c)
        })
        .collect();
    let mut total = 0.0;
    for w in local.windows(2) {
        let ((u0, v0), (u1, v1)) = (w[0], w[1]);
        let du = (u1 - u0).abs();
        if v0 * v1 < 0.0 {
            let cut = du * v0.abs() / (v0.abs() + v1.abs());
            total += cut * v0.abs() / 2.0 + (du - cut) * v1.abs() / 2.0;
        } else {
            total += du * (v0.abs() + v1.abs()) / 2.0;
        }
    }
    total
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
    }
}

pub fn candidates(net: &StreetNetwork, seg: &MeasurementSegment, k: usize) -> Vec<OracleCandidate> {
    let w = arc_matrix(net);
    let a = (seg.a.x, seg.a.y);
    let b = (seg.b.x, seg.b.y);
    let near_a = nearest(net, a, k);
    let near_b = nearest(net, b, k);
    let mut out = Vec::new();
    let mut to_target: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (orientation, start, end, sources, targets) in [
        (Orientation::AtoB, a, b, &near_a, &near_b),
        (Orientation::BtoA, b, a, &near_b, &near_a),
    ] {
        for &s in sources {
            let from_s = dijkstra(&w, s, false);
            for &t in targets {
                if s == t {
                    continue;
                }
                let to_t = to_target.entry(t).or_insert_with(|| dijkstra(&w, t, true));
                let Some((nodes, length)) = path(&w, &from_s, to_t, s, t) else {
                    continue;
                };
                let pts: Vec<(f64, f64)> = nodes.iter().map(|&i| xy(net, i)).collect();
                let anchor_start = dist(start, pts[0]);
                let anchor_end = dist(*pts.last().unwrap(), end);
                let base = heading(start, end);
                let headings: Vec<f64> = pts.windows(2).map(|p| heading(p[0], p[1])).collect();
                let running: Vec<f64> = headings.windows(2).map(|h| wrap(h[1] - h[0])).collect();
                let straight: Vec<f64> = headings.iter().map(|h| wrap(h - base)).collect();
                out.push(OracleCandidate {
                    orientation,
                    nodes: nodes.iter().map(|&i| net.node_id(NodeIx(i as u32)).to_string()).collect(),
                    edges: nodes.len() - 1,
                    anchors: anchor_start + anchor_end,
                    scores: [
                        (anchor_start + length + anchor_end - seg.length_m).abs(),
                        mean(&running),
                        mean(&straight),
                        area(&pts, start, end),
                    ],
                });
            }
        }
    }
    out
}

fn slot(c: CriterionId) -> usize {
    match c {
        CriterionId::Lc => 0,
        CriterionId::Rc => 1,
        CriterionId::Sc => 2,
        CriterionId::Ac => 3,
    }
}

pub fn score(c: &OracleCandidate, criterion: CriterionId) -> f64 {
    c.scores[slot(criterion)]
}

/// Compares values at 32 significant bits, matching the matcher's notion of a tie.
fn fuzzy_cmp(a: f64, b: f64) -> std::cmp::Ordering {
    let coarse = |v: f64| if v > 0.0 { (v.to_bits() + (1 << 19)) >> 20 } else { 0 };
    coarse(a).cmp(&coarse(b))
}

pub fn best(cands: &[OracleCandidate], criterion: CriterionId) -> Option<&OracleCandidate> {
    let i = slot(criterion);
    cands.iter().min_by(|x, y| {
        fuzzy_cmp(x.scores[i], y.scores[i])
            .then(fuzzy_cmp(x.anchors, y.anchors))
            .then(x.edges.cmp(&y.edges))
            .then(x.nodes.cmp(&y.nodes))
            .then(x.orientation.cmp(&y.orientation))
    })
}
