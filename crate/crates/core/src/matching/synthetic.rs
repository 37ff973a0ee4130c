//! Synthetic voxel "subjects" for identification experiments.
//!
//! All subjects live on one grid and share an ellipsoidal population mask;
//! each keeps a random subset of it. Local structure is an undirected
//! k-nearest-neighbour graph over occupied voxels, with unit weights, so
//! subjects look alike locally. What makes a subject individual is a set of
//! heavy "tracts": bundles of parallel edges joining two small balls of voxels.
//! A scan of a subject moves some voxels by one grid step, drops a fraction of
//! voxels, and rebuilds the graph on what is left.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{knn_graph, Edge, Graph, Positions};

pub type Voxel = [i64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectParams {
    /// Grid extent in voxels along each axis.
    pub grid: [usize; 3],
    /// Ellipsoid semi-axes of the population mask, in voxels.
    pub semi_axes: [f64; 3],
    /// Fraction of mask voxels each subject lacks.
    pub subject_dropout: f64,
    /// Nearest neighbours per voxel in the local graph.
    pub k: usize,
    pub tracts: usize,
    /// Radius of each tract end, in voxels.
    pub tract_radius: f64,
    /// Tract weights are drawn uniformly from this range.
    pub tract_weight: (f64, f64),
    /// Smallest distance between the two ends of a tract.
    pub min_tract_length: f64,
}

impl Default for SubjectParams {
    fn default() -> Self {
        Self {
            grid: [20, 18, 16],
            semi_axes: [9.2, 8.2, 7.3],
            subject_dropout: 0.1,
            k: 6,
            tracts: 6,
            tract_radius: 1.5,
            tract_weight: (4.0, 8.0),
            min_tract_length: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tract {
    pub from: Voxel,
    pub to: Voxel,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub params: SubjectParams,
    /// Occupied voxels, sorted.
    pub voxels: Vec<Voxel>,
    pub tracts: Vec<Tract>,
}

/// One scan: the graph (vertex `i` sits at `voxels[i]`) with 3D positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub voxels: Vec<Voxel>,
    pub graph: Graph,
}

/// Voxels of the population mask, sorted.
pub fn population_mask(params: &SubjectParams) -> Vec<Voxel> {
    let centre: Vec<f64> = params.grid.iter().map(|&g| (g as f64 - 1.0) / 2.0).collect();
    let mut out = Vec::new();
    for x in 0..params.grid[0] {
        for y in 0..params.grid[1] {
            for z in 0..params.grid[2] {
                let v = [x as f64, y as f64, z as f64];
                let r: f64 = (0..3)
                    .map(|i| ((v[i] - centre[i]) / params.semi_axes[i]).powi(2))
                    .sum();
                if r <= 1.0 {
                    out.push([x as i64, y as i64, z as i64]);
                }
            }
        }
    }
    out
}

fn dist2(a: &Voxel, b: &Voxel) -> i64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// Draws a subject: a random subset of the mask plus its tracts.
pub fn synthetic_subject(params: &SubjectParams, seed: u64) -> Result<Subject> {
    if !(0.0..1.0).contains(&params.subject_dropout) {
        return Err(Error::InvalidArgument("subject dropout must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = population_mask(params);
    let mut voxels: Vec<Voxel> = mask
        .into_iter()
        .filter(|_| rng.random::<f64>() >= params.subject_dropout)
        .collect();
    voxels.sort_unstable();
    if voxels.len() <= params.k {
        return Err(Error::InvalidArgument("mask too small for the neighbour count".into()));
    }
    let min2 = params.min_tract_length * params.min_tract_length;
    let mut tracts = Vec::with_capacity(params.tracts);
    let mut attempts = 0;
    while tracts.len() < params.tracts {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidArgument("cannot place tracts in the mask".into()));
        }
        let from = voxels[rng.random_range(0..voxels.len())];
        let to = voxels[rng.random_range(0..voxels.len())];
        if (dist2(&from, &to) as f64) < min2 {
            continue;
        }
        let weight = rng.random_range(params.tract_weight.0..=params.tract_weight.1);
        tracts.push(Tract { from, to, weight });
    }
    Ok(Subject {
        params: params.clone(),
        voxels,
        tracts,
    })
}

const STEPS: [Voxel; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

impl Subject {
    /// A scan where each voxel moves one step to a free face neighbour with
    /// probability `jitter` and is then lost with probability `dropout`.
    pub fn scan(&self, jitter: f64, dropout: f64, seed: u64) -> Result<Scan> {
        if !(0.0..=1.0).contains(&jitter) || !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument("jitter in [0, 1] and dropout in [0, 1) required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = self.params.grid;
        let inside = |v: &Voxel| (0..3).all(|i| v[i] >= 0 && (v[i] as usize) < grid[i]);
        let mut occupied: HashSet<Voxel> = self.voxels.iter().copied().collect();
        let mut placed = Vec::with_capacity(self.voxels.len());
        for &v in &self.voxels {
            let mut at = v;
            if rng.random::<f64>() < jitter {
                let mut steps = STEPS;
                steps.shuffle(&mut rng);
                if let Some(to) = steps
                    .iter()
                    .map(|s| [v[0] + s[0], v[1] + s[1], v[2] + s[2]])
                    .find(|t| inside(t) && !occupied.contains(t))
                {
                    occupied.remove(&v);
                    occupied.insert(to);
                    at = to;
                }
            }
            placed.push(at);
        }
        let mut voxels: Vec<Voxel> = placed.into_iter().filter(|_| rng.random::<f64>() >= dropout).collect();
        voxels.sort_unstable();
        if voxels.len() <= self.params.k {
            return Err(Error::InvalidArgument("scan kept too few voxels".into()));
        }
        let graph = self.build(&voxels)?;
        Ok(Scan { voxels, graph })
    }

    fn build(&self, voxels: &[Voxel]) -> Result<Graph> {
        let n = voxels.len();
        let pos = Positions::new(3, voxels.iter().flat_map(|v| v.map(|x| x as f64)).collect())?;
        let knn = knn_graph(&pos, &vec![self.params.k; n], 1.0)?;
        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in knn.edges() {
            pairs.insert((e.src.min(e.dst), e.src.max(e.dst)), 1.0);
        }
        let index: HashMap<Voxel, usize> = voxels.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let r2 = self.params.tract_radius * self.params.tract_radius;
        for t in &self.tracts {
            for (i, v) in voxels.iter().enumerate() {
                if dist2(v, &t.from) as f64 > r2 {
                    continue;
                }
                let target = [
                    v[0] - t.from[0] + t.to[0],
                    v[1] - t.from[1] + t.to[1],
                    v[2] - t.from[2] + t.to[2],
                ];
                if let Some(&j) = index.get(&target) {
                    if i != j {
                        let key = (i.min(j), i.max(j));
                        let w = pairs.entry(key).or_insert(0.0);
                        *w = w.max(t.weight);
                    }
                }
            }
        }
        Graph::undirected_from_pairs(n, pairs.into_iter().map(|((a, b), w)| Edge::new(a, b, w)))?.with_positions(pos)
    }
}

impl Scan {
    /// The same graph indexed by voxel id `x + X (y + Y z)` over the whole
    /// grid, so scans with different vertex sets can be compared edge by edge.
    pub fn grid_graph(&self, grid: [usize; 3]) -> Result<Graph> {
        let id = |v: &Voxel| v[0] as usize + grid[0] * (v[1] as usize + grid[1] * v[2] as usize);
        let total = grid.iter().product();
        let edges = self
            .graph
            .edges()
            .map(|e| Edge::new(id(&self.voxels[e.src]), id(&self.voxels[e.dst]), e.weight));
        Graph::from_edges(total, edges, self.graph.is_directed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SubjectParams {
        SubjectParams {
            grid: [10, 10, 10],
            semi_axes: [4.5, 4.5, 4.5],
            tracts: 2,
            min_tract_length: 4.0,
            ..SubjectParams::default()
        }
    }

    #[test]
    fn subjects_are_deterministic_and_distinct() {
        let a = synthetic_subject(&small(), 1).unwrap();
        assert_eq!(a, synthetic_subject(&small(), 1).unwrap());
        let b = synthetic_subject(&small(), 2).unwrap();
        assert_ne!(a.voxels, b.voxels);
        let mask = population_mask(&small());
        assert!(a.voxels.iter().all(|v| mask.binary_search(v).is_ok()));
        assert!(a.voxels.len() < mask.len());
    }

    #[test]
    fn scan_without_noise_keeps_every_voxel() {
        let s = synthetic_subject(&small(), 3).unwrap();
        let scan = s.scan(0.0, 0.0, 9).unwrap();
        assert_eq!(scan.voxels, s.voxels);
        assert!(!scan.graph.is_directed());
        assert_eq!(scan.graph.positions().unwrap().dims(), 3);
        // tract edges carry their heavy weight
        let heavy = scan.graph.edges().filter(|e| e.weight > 1.0).count();
        assert!(heavy > 0);
    }

    #[test]
    fn jitter_moves_by_one_step_and_dropout_thins() {
        let s = synthetic_subject(&small(), 4).unwrap();
        let scan = s.scan(0.5, 0.3, 5).unwrap();
        let expected = s.voxels.len() as f64 * 0.7;
        assert!((scan.voxels.len() as f64 - expected).abs() < 0.15 * expected);
        let original: HashSet<Voxel> = s.voxels.iter().copied().collect();
        for v in &scan.voxels {
            let close = original.contains(v) || STEPS.iter().any(|d| original.contains(&[v[0] - d[0], v[1] - d[1], v[2] - d[2]]));
            assert!(close);
        }
    }

    #[test]
    fn grid_embedding_aligns_scans() {
        let s = synthetic_subject(&small(), 6).unwrap();
        let a = s.scan(0.0, 0.0, 1).unwrap().grid_graph([10, 10, 10]).unwrap();
        let b = s.scan(0.0, 0.0, 2).unwrap().grid_graph([10, 10, 10]).unwrap();
        assert_eq!(a.n(), 1000);
        assert_eq!(a, b);
    }
}
