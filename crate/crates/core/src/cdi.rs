//! Communities of dynamical influence.
//!
//! Each vertex is placed in the coordinate system spanned by the real parts of
//! the first `y` left eigenvectors; `s` is its distance from the origin.
//! Leaders are vertices farther from the origin than every vertex they point
//! to. A vertex joins a leader's community when a directed path from it to the
//! leader climbs strictly in `s` at every hop. Vertices reaching several
//! leaders stay with the one whose position they project onto most strongly,
//! and communities are ranked by the largest first-eigenvector entry they hold.
//!
//! Vertices with tied `s` that point to each other (structurally twin
//! vertices, or a balanced cycle) form a plateau. When nothing leaves a plateau
//! except by descending, the plateau leads as a whole: one vertex is named
//! leader and the rest of the plateau joins through level hops, so the
//! community sets do not depend on how the tie is broken.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::error::Result;
use crate::graph::{Edge, Graph};
use crate::spectra::{influence_coordinates, InfluenceCoordinates, MatrixKind, Solver};

/// Differences in `s` at or below this are ties: a leader must beat every
/// out-neighbour by more, and an ascending hop must climb by more.
pub const INFLUENCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Community {
    /// 1-based influence rank.
    pub rank: usize,
    pub leader: usize,
    /// Sorted member list, leader included.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaders {
    pub vertices: Vec<usize>,
    /// True when some leader does not beat every out-neighbour strictly: it
    /// heads a plateau of tied vertices, or nothing qualified and the argmax
    /// of `s` was elected.
    pub fallback: bool,
}

/// Communities before overlap resolution. `trees[k]` maps each member to its
/// next hop on an ascending path towards `leaders[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCommunities {
    pub leaders: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    trees: Vec<BTreeMap<usize, usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdiResult {
    pub communities: Vec<Community>,
    pub coords: InfluenceCoordinates,
    pub unassigned: Vec<usize>,
    pub kind: MatrixKind,
    pub fallback_leader: bool,
    /// Ascending-path trees keyed by leader.
    trees: BTreeMap<usize, BTreeMap<usize, usize>>,
}

fn ascends(s: &[f64], src: usize, dst: usize) -> bool {
    s[dst] - s[src] > INFLUENCE_TOLERANCE
}

fn tied(s: &[f64], a: usize, b: usize) -> bool {
    (s[a] - s[b]).abs() <= INFLUENCE_TOLERANCE
}

/// Strongly connected classes of the subgraph of edges joining tied vertices.
fn plateaus(g: &Graph, s: &[f64]) -> Vec<Vec<usize>> {
    let ties = g
        .edges()
        .filter(|e| e.src != e.dst && tied(s, e.src, e.dst))
        .map(|e| Edge::new(e.src, e.dst, 1.0));
    Graph::from_edges(g.n(), ties, true)
        .expect("edges of a valid graph")
        .strongly_connected_components()
}

/// The plateau (tied strongly connected class) containing `leader`.
fn plateau_of(g: &Graph, s: &[f64], leader: usize) -> Vec<bool> {
    let inc = g.in_edges();
    let reach = |forward: bool| {
        let mut seen = vec![false; g.n()];
        seen[leader] = true;
        let mut stack = vec![leader];
        while let Some(v) = stack.pop() {
            let next = if forward { g.out_edges(v) } else { &inc[v][..] };
            for &(t, _) in next {
                if !seen[t] && tied(s, v, t) {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    };
    let (down, up) = (reach(true), reach(false));
    down.iter().zip(&up).map(|(a, b)| *a && *b).collect()
}

/// Vertices whose `s` exceeds that of every out-neighbour; vertices without
/// out-neighbours qualify. A plateau of tied vertices whose every outgoing
/// edge descends qualifies as a whole and is represented by its member with
/// the largest first-vector entry (lowest index among ties). Falls back to the
/// argmax of `s` (lowest index on ties) when nothing qualifies.
pub fn find_leaders(g: &Graph, coords: &InfluenceCoordinates) -> Leaders {
    let s = coords.s();
    let v1 = coords.v1();
    let mut vertices = Vec::new();
    let mut fallback = false;
    for plateau in plateaus(g, s) {
        let mut inside = plateau.clone();
        inside.sort_unstable();
        let closed = plateau.iter().all(|&j| {
            g.out_edges(j)
                .iter()
                .all(|&(t, _)| inside.binary_search(&t).is_ok() || ascends(s, t, j))
        });
        if !closed {
            continue;
        }
        let top = inside.iter().map(|&v| v1[v]).fold(f64::NEG_INFINITY, f64::max);
        let head = *inside
            .iter()
            .find(|&&v| v1[v] >= top - INFLUENCE_TOLERANCE)
            .expect("plateau is nonempty");
        fallback |= inside.len() > 1;
        vertices.push(head);
    }
    vertices.sort_unstable();
    if !vertices.is_empty() || g.n() == 0 {
        return Leaders { vertices, fallback };
    }
    let best = (0..g.n())
        .reduce(|a, b| if s[b] > s[a] { b } else { a })
        .expect("nonempty graph");
    Leaders {
        vertices: vec![best],
        fallback: true,
    }
}

/// Reverse breadth-first search from each leader over edges that climb in `s`,
/// plus level hops inside the leader's own plateau.
pub fn assign_communities(g: &Graph, coords: &InfluenceCoordinates, leaders: &[usize]) -> RawCommunities {
    let s = coords.s();
    let inc = g.in_edges();
    let mut members = Vec::with_capacity(leaders.len());
    let mut trees = Vec::with_capacity(leaders.len());
    for &leader in leaders {
        let plateau = plateau_of(g, s, leader);
        let mut tree = BTreeMap::new();
        let mut seen = vec![false; g.n()];
        seen[leader] = true;
        let mut queue = VecDeque::from([leader]);
        let mut list = vec![leader];
        while let Some(w) = queue.pop_front() {
            for &(u, _) in &inc[w] {
                if !seen[u] && (ascends(s, u, w) || (plateau[u] && plateau[w])) {
                    seen[u] = true;
                    tree.insert(u, w);
                    list.push(u);
                    queue.push_back(u);
                }
            }
        }
        list.sort_unstable();
        members.push(list);
        trees.push(tree);
    }
    RawCommunities {
        leaders: leaders.to_vec(),
        members,
        trees,
    }
}

/// Scalar projection of vertex `j` onto leader `beta`: `(e_beta · e_j) / s_beta`.
pub fn projection(coords: &InfluenceCoordinates, beta: usize, j: usize) -> f64 {
    let dot: f64 = coords.row(beta).iter().zip(coords.row(j)).map(|(a, b)| a * b).sum();
    let norm = coords.s()[beta];
    if norm > 0.0 {
        dot / norm
    } else {
        0.0
    }
}

/// Keeps each multiply-assigned vertex only in the community of maximal
/// projection (projections within the tolerance tie; ties go to the leader
/// with the larger first-vector entry, then the larger `s`), then
/// ranks communities by their largest first-vector entry.
pub fn resolve_overlaps(
    raw: RawCommunities,
    coords: &InfluenceCoordinates,
    kind: MatrixKind,
    fallback_leader: bool,
) -> CdiResult {
    let n = coords.n();
    let v1 = coords.v1();
    let RawCommunities {
        leaders,
        members,
        trees,
    } = raw;

    let s = coords.s();
    let leader_order = |a: usize, b: usize| {
        // true when leader slot a outranks slot b: larger first-vector entry,
        // then larger s, then lower index, with differences at or below the
        // tolerance counted as ties
        let (la, lb) = (leaders[a], leaders[b]);
        if !((v1[la] - v1[lb]).abs() <= INFLUENCE_TOLERANCE) {
            return v1[la] > v1[lb];
        }
        if !tied(s, la, lb) {
            return s[la] > s[lb];
        }
        la < lb
    };

    let mut claims: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, list) in members.iter().enumerate() {
        for &v in list {
            claims[v].push(k);
        }
    }
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (v, ks) in claims.iter().enumerate() {
        owner[v] = ks.iter().copied().reduce(|best, k| {
            let (zb, zk) = (projection(coords, leaders[best], v), projection(coords, leaders[k], v));
            if (zk - zb).abs() <= INFLUENCE_TOLERANCE {
                if leader_order(k, best) {
                    k
                } else {
                    best
                }
            } else if zk > zb {
                k
            } else {
                best
            }
        });
    }

    let mut kept: Vec<(usize, Vec<usize>)> = (0..leaders.len())
        .map(|k| {
            let list: Vec<usize> = members[k].iter().copied().filter(|&v| owner[v] == Some(k)).collect();
            (k, list)
        })
        .collect();
    let peak = |list: &[usize]| list.iter().map(|&v| v1[v]).fold(f64::NEG_INFINITY, f64::max);
    kept.sort_by(|(ka, la), (kb, lb)| {
        peak(lb)
            .total_cmp(&peak(la))
            .then(leaders[*ka].cmp(&leaders[*kb]))
    });

    let mut tree_map = BTreeMap::new();
    let mut trees: Vec<Option<BTreeMap<usize, usize>>> = trees.into_iter().map(Some).collect();
    let communities = kept
        .into_iter()
        .enumerate()
        .map(|(r, (k, list))| {
            tree_map.insert(leaders[k], trees[k].take().unwrap_or_default());
            Community {
                rank: r + 1,
                leader: leaders[k],
                members: list,
            }
        })
        .collect();
    let unassigned = (0..n).filter(|&v| owner[v].is_none()).collect();
    CdiResult {
        communities,
        coords: coords.clone(),
        unassigned,
        kind,
        fallback_leader,
        trees: tree_map,
    }
}

/// Full detection from `y` eigenvectors of the chosen matrix.
pub fn cdi(g: &Graph, y: usize, kind: MatrixKind) -> Result<CdiResult> {
    cdi_with(g, y, kind, Solver::Auto)
}

pub fn cdi_with(g: &Graph, y: usize, kind: MatrixKind, solver: Solver) -> Result<CdiResult> {
    let coords = influence_coordinates(g, y, kind, solver)?;
    Ok(cdi_from_coords(g, &coords, kind))
}

/// Detection on precomputed coordinates.
pub fn cdi_from_coords(g: &Graph, coords: &InfluenceCoordinates, kind: MatrixKind) -> CdiResult {
    let leaders = find_leaders(g, coords);
    let raw = assign_communities(g, coords, &leaders.vertices);
    resolve_overlaps(raw, coords, kind, leaders.fallback)
}

#[derive(Serialize)]
struct CommunityJson {
    rank: usize,
    leader: usize,
    members: Vec<usize>,
}

#[derive(Serialize)]
struct CdiJson {
    y: usize,
    matrix: MatrixKind,
    communities: Vec<CommunityJson>,
    unassigned: Vec<usize>,
}

impl CdiResult {
    pub fn y(&self) -> usize {
        self.coords.y()
    }

    pub fn leaders(&self) -> Vec<usize> {
        self.communities.iter().map(|c| c.leader).collect()
    }

    /// Community index (0-based position in `communities`) of each vertex.
    pub fn membership(&self) -> Vec<Option<usize>> {
        let mut m = vec![None; self.coords.n()];
        for (k, c) in self.communities.iter().enumerate() {
            for &v in &c.members {
                m[v] = Some(k);
            }
        }
        m
    }

    /// Ascending path `v, ..., leader` recorded while assigning `v` to
    /// `leader`'s community.
    pub fn witness_path(&self, leader: usize, v: usize) -> Option<Vec<usize>> {
        let tree = self.trees.get(&leader)?;
        let mut path = vec![v];
        let mut cur = v;
        while cur != leader {
            cur = *tree.get(&cur)?;
            path.push(cur);
        }
        Some(path)
    }

    /// JSON with 1-based vertex ids: `{y, matrix, communities: [{rank, leader,
    /// members}], unassigned}`.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = CdiJson {
            y: self.y(),
            matrix: self.kind,
            communities: self
                .communities
                .iter()
                .map(|c| CommunityJson {
                    rank: c.rank,
                    leader: c.leader + 1,
                    members: c.members.iter().map(|v| v + 1).collect(),
                })
                .collect(),
            unassigned: self.unassigned.iter().map(|v| v + 1).collect(),
        };
        serde_json::to_value(doc).expect("serialisable")
    }
}
