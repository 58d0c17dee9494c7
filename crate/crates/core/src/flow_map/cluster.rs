//! Deterministic K-means over 2D velocity samples with elbow selection of k.

use crate::geometry::Vec2;

/// Lloyd iteration cap per k.
pub const MAX_LLOYD_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElbowParams {
    /// Largest cluster count tried (N_c).
    pub max_clusters: usize,
    /// Absolute WSS threshold (WSS_m).
    pub wss_threshold: f64,
    /// A step from k to k+1 whose relative WSS drop is below this is not worth taking.
    pub relative_drop: f64,
}

impl Default for ElbowParams {
    fn default() -> Self {
        Self {
            max_clusters: 4,
            wss_threshold: 0.5,
            relative_drop: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub mean: Vec2,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub clusters: Vec<Cluster>,
    pub wss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElbowResult {
    /// Selected k.
    pub k: usize,
    /// WSS(k) for k = 1..=K, index 0 holding k = 1.
    pub wss_curve: Vec<f64>,
    pub clusters: Vec<Cluster>,
}

fn lex(a: &Vec2, b: &Vec2) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Canonical sample order; every later step depends only on values.
fn canonical(samples: &[Vec2]) -> Vec<Vec2> {
    let mut s = samples.to_vec();
    s.sort_by(lex);
    s
}

fn nearest(p: Vec2, centers: &[Vec2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, &m) in centers.iter().enumerate() {
        let d = (p - m).norm_sq();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations from the given centers until the assignment is a fixpoint.
fn lloyd(samples: &[Vec2], mut centers: Vec<Vec2>) -> (Vec<Vec2>, Vec<usize>) {
    let mut assign: Vec<usize> = samples.iter().map(|&p| nearest(p, &centers).0).collect();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![Vec2::ZERO; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &a) in samples.iter().zip(&assign) {
            sums[a] += *p;
            counts[a] += 1;
        }
        for c in 0..centers.len() {
            if counts[c] > 0 {
                centers[c] = sums[c] * (1.0 / counts[c] as f64);
            }
        }
        let next: Vec<usize> = samples.iter().map(|&p| nearest(p, &centers).0).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    let mut sums = vec![Vec2::ZERO; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (p, &a) in samples.iter().zip(&assign) {
        sums[a] += *p;
        counts[a] += 1;
    }
    for c in 0..centers.len() {
        if counts[c] > 0 {
            centers[c] = sums[c] * (1.0 / counts[c] as f64);
        }
    }
    (centers, assign)
}

fn summarize(samples: &[Vec2], centers: &[Vec2], assign: &[usize]) -> KMeansResult {
    let mut sums = vec![Vec2::ZERO; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (p, &a) in samples.iter().zip(assign) {
        sums[a] += *p;
        counts[a] += 1;
    }
    let clusters: Vec<Cluster> = (0..centers.len())
        .filter(|&c| counts[c] > 0)
        .map(|c| Cluster {
            mean: sums[c] * (1.0 / counts[c] as f64),
            size: counts[c],
        })
        .collect();
    let wss = samples
        .iter()
        .zip(assign)
        .map(|(p, &a)| (*p - sums[a] * (1.0 / counts[a] as f64)).norm_sq())
        .sum();
    KMeansResult { clusters, wss }
}

/// Samples tried as the added center at each k; larger buffers use an even
/// stride through the canonical order plus the farthest sample.
pub const SEED_CANDIDATES: usize = 24;

fn seed_candidates(samples: &[Vec2], centers: &[Vec2]) -> Vec<usize> {
    let n = samples.len();
    if n <= SEED_CANDIDATES {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..SEED_CANDIDATES).map(|c| c * n / SEED_CANDIDATES).collect();
    // farthest point; first in canonical order wins ties
    let mut far = (0, -1.0);
    for (i, &p) in samples.iter().enumerate() {
        let d = nearest(p, centers).1;
        if d > far.1 {
            far = (i, d);
        }
    }
    if !idx.contains(&far.0) {
        idx.push(far.0);
    }
    idx
}

/// K-means for k = 1..=k_max, global-k-means style. The k = 1 solution is the
/// mean; each further k keeps the best k − 1 centers, tries every seed
/// candidate as the new center, runs Lloyd from each and keeps the lowest
/// WSS (earliest candidate on ties). WSS(k) therefore never increases with k
/// and the result depends only on the sample values.
pub fn kmeans_sweep(samples: &[Vec2], k_max: usize) -> Vec<KMeansResult> {
    if samples.is_empty() || k_max == 0 {
        return Vec::new();
    }
    let samples = canonical(samples);
    let k_max = k_max.min(samples.len());
    let mut out = Vec::with_capacity(k_max);
    let (mut centers, assign) = lloyd(&samples, vec![samples[0]]);
    out.push(summarize(&samples, &centers, &assign));
    for _ in 2..=k_max {
        let mut best: Option<(KMeansResult, Vec<Vec2>)> = None;
        for idx in seed_candidates(&samples, &centers) {
            let mut seed = centers.clone();
            seed.push(samples[idx]);
            let (c, assign) = lloyd(&samples, seed);
            let r = summarize(&samples, &c, &assign);
            if best.as_ref().is_none_or(|(b, _)| r.wss < b.wss - 1e-12) {
                best = Some((r, c));
            }
        }
        let (r, c) = best.expect("at least one candidate");
        out.push(r);
        centers = c;
    }
    out
}

/// Elbow rule over a WSS curve (index 0 is k = 1): the smallest k whose WSS is
/// at most the threshold, else the smallest k whose step to k + 1 drops WSS by
/// less than the relative threshold, else the largest k tried.
pub fn select_k(wss_curve: &[f64], params: &ElbowParams) -> usize {
    if let Some(k) = wss_curve.iter().position(|&w| w <= params.wss_threshold) {
        return k + 1;
    }
    for k in 0..wss_curve.len().saturating_sub(1) {
        let drop = (wss_curve[k] - wss_curve[k + 1]) / wss_curve[k];
        if drop < params.relative_drop {
            return k + 1;
        }
    }
    wss_curve.len()
}

/// Clusters one cell's velocity samples, choosing k by the elbow rule.
pub fn cluster_cell(samples: &[Vec2], params: &ElbowParams) -> ElbowResult {
    let sweep = kmeans_sweep(samples, params.max_clusters);
    if sweep.is_empty() {
        return ElbowResult {
            k: 0,
            wss_curve: Vec::new(),
            clusters: Vec::new(),
        };
    }
    let wss_curve: Vec<f64> = sweep.iter().map(|r| r.wss).collect();
    let k = select_k(&wss_curve, params);
    ElbowResult {
        k,
        wss_curve,
        clusters: sweep[k - 1].clusters.clone(),
    }
}
