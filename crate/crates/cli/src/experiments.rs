//! Experiment building blocks shared by the subcommands and the acceptance
//! suite: graph families, per-item seeds, optimiser methods, the flock sweep
//! and the synthetic subject pool.

use anyhow::{bail, Result};
use cdi_core::baselines::{edge_edit_distance, frobenius_distance, spectral_kmeans};
use cdi_core::cdi::{cdi, CdiResult};
use cdi_core::graph::{
    generate_er_outdegree, generate_flock, generate_knnr, generate_knnr_variable, Graph, OutDegree,
};
use cdi_core::matching::synthetic::{synthetic_subject, Scan, SubjectParams};
use cdi_core::matching::{match_matrix, reduce_all, VoxelCommunity};
use cdi_core::optimizer::{cdi_perturbation_opt, direct_baseline_opt, optimize_communities, OptimizationResult, OptimizerOptions};
use cdi_core::spectra::MatrixKind;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Family, Method, Metric};

/// Seed of one item of a sweep: a SplitMix64 chain over the base seed and
/// the item coordinates, so items are independent of scheduling order.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub family: Family,
    pub n: usize,
    pub k: usize,
    pub kmin: usize,
    pub kmax: usize,
    pub dims: usize,
    pub thickness: f64,
    pub weight: f64,
}

impl GraphSpec {
    pub fn knnr(n: usize, k: usize) -> Self {
        Self {
            family: Family::Knnr,
            n,
            k,
            kmin: 3,
            kmax: 10,
            dims: 2,
            thickness: 0.2,
            weight: 1.0,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Graph> {
        let sides = vec![1.0; self.dims];
        let g = match self.family {
            Family::Knnr => generate_knnr(self.n, self.k, &sides, seed)?,
            Family::KnnrVariable => generate_knnr_variable(self.n, self.kmin, self.kmax, &sides, seed)?,
            Family::Er => generate_er_outdegree(self.n, OutDegree::Fixed(self.k), seed)?,
            Family::ErVariable => generate_er_outdegree(
                self.n,
                OutDegree::Uniform {
                    min: self.kmin,
                    max: self.kmax,
                },
                seed,
            )?,
            Family::Flock => generate_flock(self.n, self.k, self.thickness, seed)?,
        };
        if self.weight == 1.0 {
            Ok(g)
        } else {
            Ok(g.scale_weights(self.weight)?)
        }
    }
}

/// One optimiser run with the number of communities it was seeded from.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub result: OptimizationResult,
    /// Seeding communities (0 for the direct optimiser).
    pub communities: usize,
}

/// Spectral k-means clusters, as many as `cdi` found communities, ranked by
/// the first Laplacian eigenvector and fed to the same optimiser.
pub fn kmeans_seeded_opt(g: &Graph, cdi: &CdiResult, seed: u64) -> Result<OptimizationResult> {
    let v1 = cdi.coords.v1();
    let k = cdi.communities.len().clamp(1, g.n());
    let partition = spectral_kmeans(g, k, seed)?;
    Ok(optimize_communities(
        g,
        &partition.ranked(&v1),
        &v1,
        &OptimizerOptions::default(),
    )?)
}

/// Runs `methods` on `g` in order. k-means takes its cluster count from the
/// influence communities, so CDI runs whenever either is requested.
pub fn run_methods(g: &Graph, methods: &[Method], vectors: usize, multistart: usize, seed: u64) -> Result<Vec<MethodOutcome>> {
    let needs_cdi = methods.iter().any(|m| matches!(m, Method::Cdi | Method::Kmeans));
    let communities = if needs_cdi {
        Some(cdi(g, vectors, MatrixKind::Laplacian)?)
    } else {
        None
    };
    methods
        .iter()
        .map(|&method| {
            let (result, count) = match (method, &communities) {
                (Method::Cdi, Some(c)) => (cdi_perturbation_opt(g, c)?, c.communities.len()),
                (Method::Kmeans, Some(c)) => (kmeans_seeded_opt(g, c, seed)?, c.communities.len()),
                (Method::Direct, _) => (direct_baseline_opt(g, multistart, seed)?, 0),
                _ => unreachable!("communities are computed for community methods"),
            };
            Ok(MethodOutcome {
                method,
                result,
                communities: count,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlockPoint {
    pub k: usize,
    pub lambda1: f64,
    pub communities: usize,
    pub active_communities: usize,
    pub evaluations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub result: OptimizationResult,
}

/// Optimised convergence rate of one flock position set at each outdegree.
pub fn flock_sweep(n: usize, thickness: f64, ks: &[usize], vectors: usize, seed: u64) -> Result<Vec<FlockPoint>> {
    ks.par_iter()
        .map(|&k| {
            let g = generate_flock(n, k, thickness, seed)?;
            let found = cdi(&g, vectors, MatrixKind::Laplacian)?;
            let result = cdi_perturbation_opt(&g, &found)?;
            Ok(FlockPoint {
                k,
                lambda1: result.lambda1,
                communities: found.communities.len(),
                active_communities: result.active_communities.len(),
                evaluations: result.evaluations,
                converged: result.converged,
                result,
            })
        })
        .collect()
}

/// Settings of a synthetic identification pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSpec {
    pub subjects: usize,
    pub params: SubjectParams,
    pub jitter: f64,
    pub dropout: f64,
    pub heavy_subject: Option<usize>,
    pub heavy_dropout: f64,
    pub vectors: usize,
    pub entry_threshold: f64,
    pub seed: u64,
}

/// Two scans of every subject, with their reduced influence communities.
pub struct SubjectPool {
    pub spec: PoolSpec,
    pub first: Vec<Scan>,
    pub second: Vec<Scan>,
    pub first_communities: Vec<Vec<VoxelCommunity>>,
    pub second_communities: Vec<Vec<VoxelCommunity>>,
}

/// Reduced adjacency-CDI communities of a 3D-embedded scan graph.
pub fn scan_communities(g: &Graph, vectors: usize, entry_threshold: f64, scan_id: &str) -> Result<Vec<VoxelCommunity>> {
    let found = cdi(g, vectors, MatrixKind::Adjacency)?;
    Ok(reduce_all(g, &found, entry_threshold, scan_id)?)
}

impl SubjectPool {
    pub fn build(spec: &PoolSpec) -> Result<Self> {
        if let Some(h) = spec.heavy_subject {
            if h >= spec.subjects {
                bail!("heavy subject {h} outside the pool of {}", spec.subjects);
            }
        }
        let per_subject: Vec<_> = (0..spec.subjects)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let subject = synthetic_subject(&spec.params, derive_seed(spec.seed, &[0, i as u64]))?;
                let second_dropout = if spec.heavy_subject == Some(i) {
                    spec.heavy_dropout
                } else {
                    spec.dropout
                };
                let a = subject.scan(spec.jitter, spec.dropout, derive_seed(spec.seed, &[1, i as u64]))?;
                let b = subject.scan(spec.jitter, second_dropout, derive_seed(spec.seed, &[2, i as u64]))?;
                let ca = scan_communities(&a.graph, spec.vectors, spec.entry_threshold, &format!("s{}a", i + 1))?;
                let cb = scan_communities(&b.graph, spec.vectors, spec.entry_threshold, &format!("s{}b", i + 1))?;
                Ok((a, b, ca, cb))
            })
            .collect::<Result<_>>()?;
        let mut pool = SubjectPool {
            spec: spec.clone(),
            first: Vec::new(),
            second: Vec::new(),
            first_communities: Vec::new(),
            second_communities: Vec::new(),
        };
        for (a, b, ca, cb) in per_subject {
            pool.first.push(a);
            pool.second.push(b);
            pool.first_communities.push(ca);
            pool.second_communities.push(cb);
        }
        Ok(pool)
    }

    /// Rows are first scans, columns second scans.
    pub fn matrix(&self, metric: Metric) -> Result<Vec<Vec<f64>>> {
        if metric == Metric::Cdi {
            return Ok(match_matrix(&self.first_communities, &self.second_communities)?);
        }
        let grid = self.spec.params.grid;
        let a: Vec<Graph> = self.first.iter().map(|s| s.grid_graph(grid)).collect::<cdi_core::Result<_>>()?;
        let b: Vec<Graph> = self.second.iter().map(|s| s.grid_graph(grid)).collect::<cdi_core::Result<_>>()?;
        a.par_iter()
            .map(|ga| {
                b.iter()
                    .map(|gb| match metric {
                        Metric::Edit => Ok(edge_edit_distance(ga, gb)? as f64),
                        Metric::Frobenius => Ok(frobenius_distance(ga, gb)?),
                        Metric::Cdi => unreachable!(),
                    })
                    .collect()
            })
            .collect()
    }
}

/// Whether row `i` of a similarity (`higher_is_better`) or distance matrix
/// singles out column `i` strictly.
pub fn identifies(matrix: &[Vec<f64>], i: usize, higher_is_better: bool) -> bool {
    let diag = matrix[i][i];
    matrix[i]
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .all(|(_, &x)| if higher_is_better { diag > x } else { diag < x })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
    }

    #[test]
    fn graph_families_generate() {
        for family in [Family::Knnr, Family::KnnrVariable, Family::Er, Family::ErVariable, Family::Flock] {
            let spec = GraphSpec {
                family,
                k: 4,
                dims: 3,
                ..GraphSpec::knnr(30, 4)
            };
            let g = spec.generate(7).unwrap();
            assert_eq!(g.n(), 30);
            assert!(g.edge_count() >= 30 * 3);
        }
        let heavy = GraphSpec {
            weight: 0.2,
            ..GraphSpec::knnr(20, 3)
        };
        assert!(heavy.generate(1).unwrap().edges().all(|e| e.weight == 0.2));
    }

    #[test]
    fn methods_run_in_order() {
        let g = GraphSpec::knnr(25, 4).generate(3).unwrap();
        let out = run_methods(&g, &[Method::Direct, Method::Cdi, Method::Kmeans], 2, 1, 5).unwrap();
        let names: Vec<Method> = out.iter().map(|o| o.method).collect();
        assert_eq!(names, vec![Method::Direct, Method::Cdi, Method::Kmeans]);
        assert_eq!(out[0].communities, 0);
        assert_eq!(out[1].communities, out[2].communities);
        for o in &out {
            assert!(o.result.lambda1 > 0.0);
            assert!((o.result.c.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identification_checks_the_diagonal() {
        let m = vec![vec![3.0, 1.0], vec![3.0, 2.0]];
        assert!(identifies(&m, 0, true));
        assert!(!identifies(&m, 1, true));
        assert!(identifies(&m, 1, false));
    }
}
