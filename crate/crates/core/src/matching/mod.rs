//! Graph similarity for graphs embedded in a 3D voxel grid.
//!
//! Each detected community is reduced to the vertices carrying a notable
//! entry in some coordinate eigenvector and turned into a voxel cloud. Two
//! clouds overlap where a point of one lies within one voxel diagonal
//! (`sqrt 3` mm) of the other. Two scans are compared by pairing their
//! communities one-to-one in order of decreasing overlap and counting the
//! pairs that clear 50, 60, 70, 80 and 90 percent; the mean of those counts is
//! the similarity.

pub mod synthetic;

use std::collections::HashMap;

use serde::Serialize;

use crate::cdi::{CdiResult, Community};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest distance at which two voxel centres still overlap: the diagonal of
/// a 1 mm voxel.
pub const OVERLAP_RADIUS: f64 = 1.732_050_807_568_877_2;
/// Default eigenvector entry a vertex must exceed to stay in its community.
pub const DEFAULT_ENTRY_THRESHOLD: f64 = 0.01;
/// Overlap percentages at which matches are counted.
pub const MATCH_THRESHOLDS: [f64; 5] = [50.0, 60.0, 70.0, 80.0, 90.0];
const CELL: f64 = 2.0;

/// A reduced community as a cloud of voxel centres (mm).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VoxelCommunity {
    pub points: Vec<[f64; 3]>,
    pub source_rank: usize,
    pub scan_id: String,
}

/// Keeps the members whose entry exceeds `threshold` in any coordinate
/// eigenvector. `None` when nothing survives, which excludes the community
/// from matching.
pub fn reduce_community(
    g: &Graph,
    cdi: &CdiResult,
    community: &Community,
    threshold: f64,
    scan_id: &str,
) -> Result<Option<VoxelCommunity>> {
    let pos = g
        .positions()
        .filter(|p| p.dims() == 3)
        .ok_or_else(|| Error::InvalidGraph("matching needs 3D vertex positions".into()))?;
    if pos.len() != cdi.coords.n() {
        return Err(Error::DimensionMismatch {
            expected: pos.len(),
            found: cdi.coords.n(),
        });
    }
    let points: Vec<[f64; 3]> = community
        .members
        .iter()
        .filter(|&&v| cdi.coords.row(v).iter().any(|&x| x > threshold))
        .map(|&v| {
            let p = pos.point(v);
            [p[0], p[1], p[2]]
        })
        .collect();
    Ok((!points.is_empty()).then(|| VoxelCommunity {
        points,
        source_rank: community.rank,
        scan_id: scan_id.to_string(),
    }))
}

/// Reduces every community of a scan, dropping those left empty.
pub fn reduce_all(g: &Graph, cdi: &CdiResult, threshold: f64, scan_id: &str) -> Result<Vec<VoxelCommunity>> {
    let mut out = Vec::new();
    for c in &cdi.communities {
        if let Some(v) = reduce_community(g, cdi, c, threshold, scan_id)? {
            out.push(v);
        }
    }
    Ok(out)
}

/// Uniform-grid hash of a point cloud for fixed-radius queries.
struct SpatialHash {
    cells: HashMap<[i64; 3], Vec<[f64; 3]>>,
}

impl SpatialHash {
    fn key(p: &[f64; 3]) -> [i64; 3] {
        p.map(|x| (x / CELL).floor() as i64)
    }

    fn new(points: &[[f64; 3]]) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<[f64; 3]>> = HashMap::new();
        for p in points {
            cells.entry(Self::key(p)).or_default().push(*p);
        }
        Self { cells }
    }

    /// Whether some stored point lies within [`OVERLAP_RADIUS`] of `p`; the
    /// radius is below the cell size so the 27 surrounding cells suffice.
    fn near(&self, p: &[f64; 3]) -> bool {
        let r2 = OVERLAP_RADIUS * OVERLAP_RADIUS + 1e-9;
        let k = Self::key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if list.iter().any(|q| {
                            (0..3).map(|i| (p[i] - q[i]) * (p[i] - q[i])).sum::<f64>() <= r2
                        }) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

fn overlap_with(a: &[[f64; 3]], b: &SpatialHash) -> f64 {
    let hits = a.iter().filter(|p| b.near(p)).count();
    100.0 * hits as f64 / a.len() as f64
}

/// Percentage of `a`'s points with a point of `b` within `sqrt 3` mm.
pub fn overlap_percentage(a: &VoxelCommunity, b: &VoxelCommunity) -> Result<f64> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(Error::InvalidArgument("overlap of an empty community".into()));
    }
    Ok(overlap_with(&a.points, &SpatialHash::new(&b.points)))
}

/// Symmetric pair score: the larger of the two directional overlaps.
pub fn pair_score(a: &VoxelCommunity, b: &VoxelCommunity) -> Result<f64> {
    Ok(overlap_percentage(a, b)?.max(overlap_percentage(b, a)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchReport {
    /// One-to-one pairs `(index in A, index in B, score)` with score at or
    /// above the lowest threshold, best first.
    pub pairs: Vec<(usize, usize, f64)>,
    /// `(threshold, matched pairs)` for each threshold.
    pub per_threshold: Vec<(f64, usize)>,
    pub mean_matches: f64,
}

/// Pairs communities greedily by decreasing score (each community used at
/// most once) and averages the match counts over [`MATCH_THRESHOLDS`].
pub fn mean_matching_communities(a: &[VoxelCommunity], b: &[VoxelCommunity]) -> Result<MatchReport> {
    let hash_a: Vec<SpatialHash> = a.iter().map(|c| SpatialHash::new(&c.points)).collect();
    let hash_b: Vec<SpatialHash> = b.iter().map(|c| SpatialHash::new(&c.points)).collect();
    let mut scored = Vec::with_capacity(a.len() * b.len());
    for (i, ca) in a.iter().enumerate() {
        if ca.points.is_empty() {
            return Err(Error::InvalidArgument("empty community in scan A".into()));
        }
        for (j, cb) in b.iter().enumerate() {
            if cb.points.is_empty() {
                return Err(Error::InvalidArgument("empty community in scan B".into()));
            }
            let s = overlap_with(&ca.points, &hash_b[j]).max(overlap_with(&cb.points, &hash_a[i]));
            scored.push((i, j, s));
        }
    }
    // order independent of which scan is called A
    scored.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then(x.0.min(x.1).cmp(&y.0.min(y.1)))
            .then(x.0.max(x.1).cmp(&y.0.max(y.1)))
            .then(x.0.cmp(&y.0))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (i, j, s) in scored {
        if s < MATCH_THRESHOLDS[0] {
            break;
        }
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j, s));
        }
    }
    let per_threshold: Vec<(f64, usize)> = MATCH_THRESHOLDS
        .iter()
        .map(|&t| (t, pairs.iter().filter(|p| p.2 >= t).count()))
        .collect();
    let mean_matches = per_threshold.iter().map(|p| p.1 as f64).sum::<f64>() / MATCH_THRESHOLDS.len() as f64;
    Ok(MatchReport {
        pairs,
        per_threshold,
        mean_matches,
    })
}

/// Mean-matches matrix between two lists of scans: entry `(i, j)` compares
/// `rows[i]` with `cols[j]`.
pub fn match_matrix(rows: &[Vec<VoxelCommunity>], cols: &[Vec<VoxelCommunity>]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|a| {
            cols.iter()
                .map(|b| mean_matching_communities(a, b).map(|r| r.mean_matches))
                .collect()
        })
        .collect()
}
