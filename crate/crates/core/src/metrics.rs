//! Inner-vs-outer distance estimates on point clouds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::linalg::dist;
use crate::polyring::PolySystem;
use crate::rng::stream_rng;
use crate::sampler::{farthest_point_subset, sample_region, Region, SampleError, SampleOptions};

/// Pairs closer than this (relative to the edge radius) are skipped when the
/// ratio is formed, to avoid dividing rounding noise by zero.
const COINCIDENT: f64 = 1e-9;
pub const EXHAUSTIVE_LIMIT: usize = 2000;
pub const LANDMARKS: usize = 64;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("vertex {0} out of range")]
    BadVertex(usize),
    #[error("graph is disconnected: component sizes {0:?}")]
    Disconnected(Vec<usize>),
    #[error("too few points ({0}) to form a pair")]
    TooFewPoints(usize),
    #[error("radii must be positive and increasing")]
    BadRadii,
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Neighbourhood graph: edges join points at Euclidean distance ≤ `eps`.
#[derive(Clone, Debug)]
pub struct MetricGraph {
    pub points: Vec<Vec<f64>>,
    pub eps: f64,
    adj: Vec<Vec<(usize, f64)>>,
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

pub fn build_graph(cloud: &PointCloud, eps: f64) -> MetricGraph {
    build_graph_points(cloud.points.clone(), eps)
}

pub fn build_graph_points(points: Vec<Vec<f64>>, eps: f64) -> MetricGraph {
    let n = points.len();
    let adj: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let d = dist(&points[i], &points[j]);
                    (d <= eps).then_some((j, d))
                })
                .collect()
        })
        .collect();
    let (labels, sizes) = components(&adj);
    MetricGraph { points, eps, adj, labels, sizes }
}

fn components(adj: &[Vec<(usize, f64)>]) -> (Vec<usize>, Vec<usize>) {
    let mut labels = vec![usize::MAX; adj.len()];
    let mut sizes = Vec::new();
    for s in 0..adj.len() {
        if labels[s] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        let mut stack = vec![s];
        labels[s] = c;
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &(w, _) in &adj[v] {
                if labels[w] == usize::MAX {
                    labels[w] = c;
                    stack.push(w);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

#[derive(PartialEq)]
struct State(f64, usize);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MetricGraph {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn num_components(&self) -> usize {
        self.sizes.len()
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn component_of(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    /// Dijkstra distances from `src`; `INFINITY` marks unreachable vertices.
    pub fn shortest_paths(&self, src: usize) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        d[src] = 0.0;
        heap.push(State(0.0, src));
        while let Some(State(dv, v)) = heap.pop() {
            if dv > d[v] {
                continue;
            }
            for &(w, len) in &self.adj[v] {
                let nd = dv + len;
                if nd < d[w] {
                    d[w] = nd;
                    heap.push(State(nd, w));
                }
            }
        }
        d
    }

    /// Subgraph on the vertices of component `c`, with the map back to original ids.
    pub fn component(&self, c: usize) -> (MetricGraph, Vec<usize>) {
        let ids: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == c).collect();
        let pts = ids.iter().map(|&i| self.points[i].clone()).collect();
        (build_graph_points(pts, self.eps), ids)
    }
}

/// Shortest-path length between `i` and `j`, `None` when unreachable.
pub fn inner_distance(g: &MetricGraph, i: usize, j: usize) -> Result<Option<f64>, MetricError> {
    for v in [i, j] {
        if v >= g.len() {
            return Err(MetricError::BadVertex(v));
        }
    }
    let d = g.shortest_paths(i)[j];
    Ok(d.is_finite().then_some(d))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub i: usize,
    pub j: usize,
    pub inner: f64,
    pub outer: f64,
    pub points: [Vec<f64>; 2],
}

/// Largest sampled `d̂_inn / d_outer`. Sampled ratios only bound the true LNE
/// constant from below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LneReport {
    pub ratio_sup: f64,
    pub witness: Option<Witness>,
    pub pairs_evaluated: usize,
    pub exhaustive: bool,
    pub vertices: usize,
    pub edges: usize,
    pub eps: f64,
    pub component_sizes: Vec<usize>,
}

/// Median distance to the nearest other point.
pub fn median_nn_distance(points: &[Vec<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut nn: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| dist(&points[i], q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = nn.len();
    if m % 2 == 1 {
        nn[m / 2]
    } else {
        0.5 * (nn[m / 2 - 1] + nn[m / 2])
    }
}

/// `ε = c · median nearest-neighbour distance`.
pub fn eps_rule(points: &[Vec<f64>], c: f64) -> f64 {
    c * median_nn_distance(points)
}

fn best_from_source(g: &MetricGraph, i: usize, targets: &[usize]) -> (f64, usize, usize, f64, f64) {
    let d = g.shortest_paths(i);
    let floor = COINCIDENT * g.eps.max(f64::MIN_POSITIVE);
    let mut best = (0.0, i, i, 0.0, 0.0);
    for &j in targets {
        if j == i || !d[j].is_finite() {
            continue;
        }
        let outer = dist(&g.points[i], &g.points[j]);
        if outer <= floor {
            continue;
        }
        let r = d[j] / outer;
        if r > best.0 {
            best = (r, i, j, d[j], outer);
        }
    }
    best
}

/// Sup of `d̂_inn / d_outer`: all pairs when `|V| ≤ 2000`, otherwise
/// `pair_budget` random pairs plus all pairs among 64 farthest-point landmarks.
pub fn lne_ratio(g: &MetricGraph, pair_budget: usize, seed: u64) -> Result<LneReport, MetricError> {
    if g.len() < 2 {
        return Err(MetricError::TooFewPoints(g.len()));
    }
    if g.num_components() > 1 {
        return Err(MetricError::Disconnected(g.component_sizes().to_vec()));
    }
    let n = g.len();
    let (best, pairs, exhaustive) = if n <= EXHAUSTIVE_LIMIT {
        let all: Vec<usize> = (0..n).collect();
        let bests: Vec<_> = (0..n)
            .into_par_iter()
            .map(|i| best_from_source(g, i, &all[i + 1..]))
            .collect();
        (reduce(bests), n * (n - 1) / 2, true)
    } else {
        let landmarks = farthest_point_subset(&g.points, LANDMARKS, 0, 0.0);
        let mut jobs: Vec<(usize, Vec<usize>)> =
            landmarks.iter().enumerate().map(|(k, &i)| (i, landmarks[k + 1..].to_vec())).collect();
        let mut rng = stream_rng(seed, 0);
        let mut random: Vec<(usize, usize)> = (0..pair_budget)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .filter(|(a, b)| a != b)
            .collect();
        random.sort_unstable();
        let mut k = 0;
        while k < random.len() {
            let src = random[k].0;
            let mut t = Vec::new();
            while k < random.len() && random[k].0 == src {
                t.push(random[k].1);
                k += 1;
            }
            jobs.push((src, t));
        }
        let pairs = jobs.iter().map(|(_, t)| t.len()).sum();
        let bests: Vec<_> = jobs.par_iter().map(|(i, t)| best_from_source(g, *i, t)).collect();
        (reduce(bests), pairs, false)
    };
    let (ratio, i, j, inner, outer) = best;
    Ok(LneReport {
        ratio_sup: ratio,
        witness: (i != j).then(|| Witness { i, j, inner, outer, points: [g.points[i].clone(), g.points[j].clone()] }),
        pairs_evaluated: pairs,
        exhaustive,
        vertices: n,
        edges: g.num_edges(),
        eps: g.eps,
        component_sizes: g.component_sizes().to_vec(),
    })
}

/// Deterministic maximum: highest ratio, ties broken by the smaller pair.
fn reduce(bests: Vec<(f64, usize, usize, f64, f64)>) -> (f64, usize, usize, f64, f64) {
    bests
        .into_iter()
        .fold((0.0, 0, 0, 0.0, 0.0), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.0 > 0.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a })
}

/// [`lne_ratio`] on each connected component with at least two vertices.
pub fn lne_ratio_per_component(g: &MetricGraph, pair_budget: usize, seed: u64) -> Vec<(Vec<usize>, Result<LneReport, MetricError>)> {
    (0..g.num_components())
        .filter(|&c| g.component_sizes()[c] >= 2)
        .map(|c| {
            let (sub, ids) = g.component(c);
            let mut rep = lne_ratio(&sub, pair_budget, seed.wrapping_add(c as u64));
            if let Ok(r) = &mut rep {
                if let Some(w) = &mut r.witness {
                    w.i = ids[w.i];
                    w.j = ids[w.j];
                }
            }
            (ids, rep)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Plateau,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub trend: Trend,
    pub slope: f64,
    pub r_squared: f64,
    pub spread: f64,
}

/// Divergent if the log-log slope is ≥ 0.5 with R² ≥ 0.9; plateau if
/// max/min ≤ 1.25; otherwise inconclusive.
pub fn classify_trend(radii: &[f64], ratios: &[f64]) -> TrendFit {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(ratios)
        .filter(|(r, q)| **r > 0.0 && **q > 0.0 && q.is_finite())
        .map(|(r, q)| (r.ln(), q.ln()))
        .collect();
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    let (slope, r_squared) = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let r2 = if syy > 0.0 && sxx > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
        (slope, r2)
    } else {
        (0.0, 0.0)
    };
    let trend = if pts.len() >= 2 && slope >= 0.5 && r_squared >= 0.9 {
        Trend::Divergent
    } else if pts.len() == ratios.len() && !ratios.is_empty() && spread <= 1.25 {
        Trend::Plateau
    } else {
        Trend::Inconclusive
    };
    TrendFit { trend, slope, r_squared, spread }
}

/// How `X_{≤R}` is cut out for each scan radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanRegion {
    /// `X ∩ B(0, R)`.
    Ball,
    /// `|x_axes| ≤ R`, for sets that are graphs over those coordinates.
    Cylinder { axes: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub count: usize,
    pub eps_factor: f64,
    pub pair_budget: usize,
    pub region: ScanRegion,
    /// Keep only `⟨normal, x⟩ ≥ 0`, e.g. one nappe of a cone.
    pub half_space: Option<Vec<f64>>,
    /// Add a vertex point such as a cone apex to every cloud.
    pub extra_points: Vec<Vec<f64>>,
    pub sample: SampleOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            count: 2000,
            eps_factor: 3.0,
            pair_budget: 20_000,
            region: ScanRegion::Ball,
            half_space: None,
            extra_points: Vec::new(),
            sample: SampleOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub radius: f64,
    /// Largest ratio over the components (absent when nothing was sampled).
    pub ratio_sup: Option<f64>,
    pub components: Vec<LneReport>,
    pub points: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub entries: Vec<ScanEntry>,
    pub fit: TrendFit,
}

pub fn scan_region(n: usize, radius: f64, opts: &ScanOptions) -> Region {
    let base = match &opts.region {
        ScanRegion::Ball => Region::ball(n, radius),
        ScanRegion::Cylinder { axes } => Region::Cylinder { axes: axes.clone(), radius, height: radius },
    };
    match &opts.half_space {
        Some(normal) => Region::Intersection {
            parts: vec![base, Region::HalfSpace { normal: normal.clone(), offset: 0.0 }],
        },
        None => base,
    }
}

/// Samples `X_{≤R}` for each radius, estimates the ratio per connected
/// component and classifies the trend across radii.
pub fn lne_scan(system: &PolySystem, radii: &[f64], seed: u64, opts: &ScanOptions) -> Result<ScanReport, MetricError> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MetricError::BadRadii);
    }
    let n = system.to_real().map_err(SampleError::from)?.n();
    let mut entries = Vec::with_capacity(radii.len());
    for &radius in radii {
        let region = scan_region(n, radius, opts);
        // one seed for every radius: the same random starts, rescaled
        let out = sample_region(system, &region, opts.count, seed, &opts.sample)?;
        let mut points = out.cloud.points;
        points.extend(opts.extra_points.iter().filter(|p| region.contains(p)).cloned());
        let mut warnings = out.warnings;
        let eps = eps_rule(&points, opts.eps_factor);
        let g = build_graph_points(points, eps);
        if g.num_components() > 1 {
            warnings.push(format!("graph has {} components: sizes {:?}", g.num_components(), g.component_sizes()));
        }
        let mut components = Vec::new();
        for (_, rep) in lne_ratio_per_component(&g, opts.pair_budget, seed) {
            match rep {
                Ok(r) => components.push(r),
                Err(e) => warnings.push(e.to_string()),
            }
        }
        let ratio_sup = components.iter().map(|r| r.ratio_sup).reduce(f64::max);
        entries.push(ScanEntry { radius, ratio_sup, components, points: g.len(), warnings });
    }
    let rs: Vec<f64> = entries.iter().map(|e| e.radius).collect();
    let qs: Vec<f64> = entries.iter().map(|e| e.ratio_sup.unwrap_or(f64::NAN)).collect();
    let fit = classify_trend(&rs, &qs);
    Ok(ScanReport { entries, fit })
}
