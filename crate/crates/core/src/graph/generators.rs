//! Seeded synthetic graph generators.
//!
//! Every generator draws from a `ChaCha8Rng` seeded with `seed_from_u64`.
//! Positions are drawn first, vertex by vertex and axis by axis, using the
//! 53-bit mantissa construction of `rand`'s standard `f64` sampler; per-vertex
//! degree draws follow in vertex order. The same seed therefore yields the
//! same positions regardless of the degree rule, which is what lets a flock
//! keep its birds fixed while `k` varies.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, Graph, Positions};
use crate::error::{Error, Result};

/// Outdegree rule: fixed `k`, or drawn per vertex uniformly from `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutDegree {
    Fixed(usize),
    Uniform { min: usize, max: usize },
}

impl OutDegree {
    fn max(self) -> usize {
        match self {
            OutDegree::Fixed(k) => k,
            OutDegree::Uniform { max, .. } => max,
        }
    }

    fn validate(self, n: usize) -> Result<()> {
        let (lo, hi) = match self {
            OutDegree::Fixed(k) => (k, k),
            OutDegree::Uniform { min, max } => (min, max),
        };
        if lo < 1 || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "outdegree range [{lo}, {hi}] is empty or below 1"
            )));
        }
        if hi >= n {
            return Err(Error::InvalidArgument(format!(
                "outdegree {hi} requires more than {n} vertices"
            )));
        }
        Ok(())
    }

    fn draw(self, rng: &mut impl Rng) -> usize {
        match self {
            OutDegree::Fixed(k) => k,
            OutDegree::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points uniform in the axis-aligned box `[0, sides[d])`.
pub fn uniform_positions(n: usize, sides: &[f64], rng: &mut impl Rng) -> Result<Positions> {
    if sides.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidArgument("box sides must be positive".into()));
    }
    let coords = (0..n)
        .flat_map(|_| sides.iter().map(|s| s * rng.random::<f64>()).collect::<Vec<_>>())
        .collect();
    Positions::new(sides.len(), coords)
}

/// Directed k-nearest-neighbour graph on fixed positions: vertex `i` gets
/// edges of weight `weight` to its `degrees[i]` nearest vertices. Distance ties
/// go to the lower vertex index.
pub fn knn_graph(positions: &Positions, degrees: &[usize], weight: f64) -> Result<Graph> {
    let n = positions.len();
    if degrees.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: degrees.len(),
        });
    }
    let mut edges = Vec::with_capacity(degrees.iter().sum());
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (i, &k) in degrees.iter().enumerate() {
        if k >= n {
            return Err(Error::InvalidArgument(format!(
                "vertex {i} wants {k} neighbours among {n} vertices"
            )));
        }
        let p = positions.point(i);
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| {
            let d2: f64 = p
                .iter()
                .zip(positions.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, j)
        }));
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k, order);
        }
        edges.extend(cand[..k].iter().map(|&(_, j)| Edge::new(i, j, weight)));
    }
    Graph::from_edges(n, edges, true)?.with_positions(positions.clone())
}

fn knnr(n: usize, degree: OutDegree, sides: &[f64], seed: u64) -> Result<Graph> {
    if !(sides.len() == 2 || sides.len() == 3) {
        return Err(Error::InvalidArgument(format!(
            "k-NNR graphs are 2D or 3D, got {} box sides",
            sides.len()
        )));
    }
    degree.validate(n)?;
    let mut rng = rng_for(seed);
    let positions = uniform_positions(n, sides, &mut rng)?;
    let degrees: Vec<usize> = (0..n).map(|_| degree.draw(&mut rng)).collect();
    knn_graph(&positions, &degrees, 1.0)
}

/// Vertices uniform in the box, each linked to its `k` nearest neighbours.
pub fn generate_knnr(n: usize, k: usize, sides: &[f64], seed: u64) -> Result<Graph> {
    knnr(n, OutDegree::Fixed(k), sides, seed)
}

/// As [`generate_knnr`], with each vertex drawing its own `k` uniformly from
/// `kmin..=kmax`.
pub fn generate_knnr_variable(
    n: usize,
    kmin: usize,
    kmax: usize,
    sides: &[f64],
    seed: u64,
) -> Result<Graph> {
    knnr(n, OutDegree::Uniform { min: kmin, max: kmax }, sides, seed)
}

/// Random directed graph where every vertex picks its outdegree's worth of
/// distinct targets uniformly, excluding itself.
pub fn generate_er_outdegree(n: usize, degree: OutDegree, seed: u64) -> Result<Graph> {
    degree.validate(n)?;
    let mut rng = rng_for(seed);
    let mut edges = Vec::with_capacity(n * degree.max());
    for i in 0..n {
        let k = degree.draw(&mut rng);
        for t in index::sample(&mut rng, n - 1, k).into_iter() {
            let j = if t >= i { t + 1 } else { t };
            edges.push(Edge::new(i, j, 1.0));
        }
    }
    Graph::from_edges(n, edges, true)
}

/// Starling flock model: `n` birds uniform in a `1 x 1 x thickness` prism with
/// k-nearest-neighbour edges. Positions depend only on `(n, thickness, seed)`.
pub fn generate_flock(n: usize, k: usize, thickness: f64, seed: u64) -> Result<Graph> {
    if !(thickness > 0.0 && thickness <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "flock thickness must lie in (0, 1], got {thickness}"
        )));
    }
    if n < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "flock of {n} birds cannot have outdegree {k}"
        )));
    }
    generate_knnr(n, k, &[1.0, 1.0, thickness], seed)
}
