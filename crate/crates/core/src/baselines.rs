//! Comparison methods: spectral k-means, recursive spectral bisection, two
//! aligned-graph distances, and the consensus speed ratio.

use std::collections::BTreeSet;
use std::io::Write;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cdi::Community;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::optimizer::OptimizationResult;

/// Clusterings are exact partitions of the vertex set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionResult {
    /// Vertex lists, each sorted, ordered by smallest member.
    pub communities: Vec<Vec<usize>>,
    pub method: String,
}

impl PartitionResult {
    fn new(mut communities: Vec<Vec<usize>>, method: &str) -> Self {
        communities.retain(|c| !c.is_empty());
        communities.iter_mut().for_each(|c| c.sort_unstable());
        communities.sort();
        Self {
            communities,
            method: method.to_string(),
        }
    }

    /// Ranked communities for the perturbation optimiser: each led by its
    /// largest `v1` entry and ordered by that entry, descending.
    pub fn ranked(&self, v1: &[f64]) -> Vec<Community> {
        let mut ranked: Vec<(usize, Vec<usize>)> = self
            .communities
            .iter()
            .map(|c| {
                let leader = c
                    .iter()
                    .copied()
                    .reduce(|a, b| if v1[b] > v1[a] { b } else { a })
                    .expect("nonempty");
                (leader, c.clone())
            })
            .collect();
        ranked.sort_by(|a, b| v1[b.0].total_cmp(&v1[a.0]).then(a.0.cmp(&b.0)));
        ranked
            .into_iter()
            .enumerate()
            .map(|(i, (leader, members))| Community {
                rank: i + 1,
                leader,
                members,
            })
            .collect()
    }
}

const KMEANS_RESTARTS: usize = 100;
const LLOYD_ITERATIONS: usize = 300;

/// Ng-Jordan-Weiss spectral clustering on the symmetrised affinity
/// `(A + A^T) / 2`: top-`k` eigenvectors of `D^-1/2 W D^-1/2`, rows scaled to
/// unit length, then k-means++ with the best of up to 100 seeded restarts.
pub fn spectral_kmeans(g: &Graph, k: usize, seed: u64) -> Result<PartitionResult> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= {n}, got {k}")));
    }
    if k == 1 {
        return Ok(PartitionResult::new(vec![(0..n).collect()], "kmeans"));
    }
    let w = g.symmetrized();
    let deg: Vec<f64> = (0..n).map(|i| w.out_degree(i)).collect();
    let scale: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { d.sqrt().recip() } else { 0.0 }).collect();
    let mut m = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for &(j, a) in w.out_edges(i) {
            m[(i, j)] = scale[i] * a * scale[j];
        }
    }
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let u = evd.U();
    // eigenvalues ascend; take the last k columns
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (n - k..n).rev().map(|j| u[(i, j)]).collect())
        .collect();
    for r in &mut rows {
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            r.iter_mut().for_each(|x| *x /= norm);
        }
    }
    let labels = kmeans(&rows, k, seed);
    let mut communities = vec![Vec::new(); k];
    for (v, &l) in labels.iter().enumerate() {
        communities[l].push(v);
    }
    Ok(PartitionResult::new(communities, "kmeans"))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best-inertia Lloyd clustering over seeded k-means++ restarts.
fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (inertia, labels) = lloyd(points, plus_plus(points, k, &mut rng));
        if best.as_ref().is_none_or(|(b, _)| inertia < *b - 1e-12) {
            best = Some((inertia, labels));
        }
    }
    best.expect("at least one restart").1
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centres = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centres.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &centres[centres.len() - 1]));
        }
    }
    centres
}

fn lloyd(points: &[Vec<f64>], mut centres: Vec<Vec<f64>>) -> (f64, Vec<usize>) {
    let k = centres.len();
    let dim = points[0].len();
    let assign = |centres: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                (0..k)
                    .min_by(|&a, &b| dist2(p, &centres[a]).total_cmp(&dist2(p, &centres[b])))
                    .expect("k >= 1")
            })
            .collect()
    };
    let mut labels = assign(&centres);
    for _ in 0..LLOYD_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centres[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // reseed an empty cluster at the point farthest from its centre
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        dist2(&points[a], &centres[labels[a]]).total_cmp(&dist2(&points[b], &centres[labels[b]]))
                    })
                    .expect("points");
                centres[c] = points[far].clone();
            }
        }
        let next = assign(&centres);
        if next == labels {
            break;
        }
        labels = next;
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| dist2(p, &centres[l])).sum();
    (inertia, labels)
}

/// Recursive sign bisection of symmetric-adjacency eigenvectors into
/// `target` (a power of two) parts.
///
/// Each part splits on the sign of the eigenvector of its second-largest
/// adjacency eigenvalue (zeros join the positive side). Disconnected parts
/// split along components instead, balancing sizes greedily. At the final
/// level a split only stands when both sides hold an entry whose magnitude
/// exceeds `threshold`; otherwise the following eigenvectors are tried in
/// turn, and the bisection fails if none qualifies.
pub fn spectral_bisection(g: &Graph, target: usize, threshold: f64) -> Result<PartitionResult> {
    if target == 0 || !target.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "target community count must be a power of two, got {target}"
        )));
    }
    if g.n() < target {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} vertices into {target} communities",
            g.n()
        )));
    }
    let w = g.symmetrized();
    let levels = target.trailing_zeros();
    let mut parts: Vec<Vec<usize>> = vec![(0..g.n()).collect()];
    for level in 1..=levels {
        let last = level == levels;
        let mut next = Vec::with_capacity(parts.len() * 2);
        for part in parts {
            if part.len() < 2 {
                next.push(part);
                continue;
            }
            let (a, b) = bisect(&w, &part, last.then_some(threshold))?;
            next.push(a);
            next.push(b);
        }
        parts = next;
    }
    Ok(PartitionResult::new(parts, "bisection"))
}

fn bisect(w: &Graph, part: &[usize], threshold: Option<f64>) -> Result<(Vec<usize>, Vec<usize>)> {
    let sub = w.induced_subgraph(part);
    let comps = sub.weak_components();
    if comps.len() > 1 {
        let mut comps = comps;
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for c in comps {
            let side = if a.len() <= b.len() { &mut a } else { &mut b };
            side.extend(c.iter().map(|&i| part[i]));
        }
        a.sort_unstable();
        b.sort_unstable();
        return Ok((a, b));
    }
    let m = part.len();
    let mut adj = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        for &(j, x) in sub.out_edges(i) {
            adj[(i, j)] = x;
        }
    }
    let evd = adj
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let u = evd.U();
    // descending algebraic order: column m-1 is the largest
    for col in (0..m - 1).rev() {
        let v: Vec<f64> = (0..m).map(|i| u[(i, col)]).collect();
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| v[i] >= 0.0);
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        if let Some(t) = threshold {
            let clears = |side: &[usize]| side.iter().any(|&i| v[i].abs() > t);
            if !(clears(&pos) && clears(&neg)) {
                continue;
            }
        }
        return Ok((
            pos.into_iter().map(|i| part[i]).collect(),
            neg.into_iter().map(|i| part[i]).collect(),
        ));
    }
    Err(Error::Numerical(format!(
        "no eigenvector splits a part of {m} vertices with both sides above the threshold"
    )))
}

fn check_sizes(g1: &Graph, g2: &Graph) -> Result<()> {
    if g1.n() != g2.n() {
        return Err(Error::DimensionMismatch {
            expected: g1.n(),
            found: g2.n(),
        });
    }
    Ok(())
}

/// `sqrt(sum_ij (A1_ij - A2_ij)^2)` on aligned vertex sets.
pub fn frobenius_distance(g1: &Graph, g2: &Graph) -> Result<f64> {
    check_sizes(g1, g2)?;
    let mut total = 0.0;
    for i in 0..g1.n() {
        let (a, b) = (g1.out_edges(i), g2.out_edges(i));
        let (mut p, mut q) = (0, 0);
        while p < a.len() || q < b.len() {
            let ja = a.get(p).map_or(usize::MAX, |e| e.0);
            let jb = b.get(q).map_or(usize::MAX, |e| e.0);
            let diff = match ja.cmp(&jb) {
                std::cmp::Ordering::Less => {
                    p += 1;
                    a[p - 1].1
                }
                std::cmp::Ordering::Greater => {
                    q += 1;
                    b[q - 1].1
                }
                std::cmp::Ordering::Equal => {
                    p += 1;
                    q += 1;
                    a[p - 1].1 - b[q - 1].1
                }
            };
            total += diff * diff;
        }
    }
    Ok(total.sqrt())
}

/// Simplified edit distance: the number of ordered vertex pairs that are an
/// edge in exactly one of the two aligned graphs (weights ignored).
pub fn edge_edit_distance(g1: &Graph, g2: &Graph) -> Result<usize> {
    check_sizes(g1, g2)?;
    let mut count = 0;
    for i in 0..g1.n() {
        let a: BTreeSet<usize> = g1.out_edges(i).iter().map(|e| e.0).collect();
        let b: BTreeSet<usize> = g2.out_edges(i).iter().map(|e| e.0).collect();
        count += a.symmetric_difference(&b).count();
    }
    Ok(count)
}

/// `candidate.lambda1 / reference.lambda1`.
pub fn consensus_speed_ratio(candidate: &OptimizationResult, reference: &OptimizationResult) -> Result<f64> {
    if !(reference.lambda1 > 0.0) {
        return Err(Error::InvalidArgument(
            "reference rate is zero: some vertex is unreachable from its perturbation".into(),
        ));
    }
    Ok(candidate.lambda1 / reference.lambda1)
}

/// Square similarity matrix as CSV: header `id,<ids...>`, one row per id.
pub fn write_similarity_csv<T: std::fmt::Display>(
    ids: &[String],
    matrix: &[Vec<T>],
    mut w: impl Write,
) -> Result<()> {
    if matrix.len() != ids.len() || matrix.iter().any(|r| r.len() != ids.len()) {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            found: matrix.len(),
        });
    }
    writeln!(w, "id,{}", ids.join(","))?;
    for (id, row) in ids.iter().zip(matrix) {
        write!(w, "{id}")?;
        for x in row {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
