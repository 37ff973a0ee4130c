//! Directed weighted graphs, their Laplacians, file I/O and the synthetic
//! generators used by the experiments.
//!
//! Vertices are `0..n`. An edge `i -> j` with weight `a_ij` means vertex `i`
//! listens to vertex `j` in the consensus dynamics, so influence flows
//! against the edge direction.

mod generators;
mod io;

pub use generators::{
    generate_er_outdegree, generate_flock, generate_knnr, generate_knnr_variable, knn_graph,
    uniform_positions, OutDegree,
};
pub use io::{load_graph, load_positions, read_graph, save_graph, write_graph, write_positions};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(src: usize, dst: usize, weight: f64) -> Self {
        Self { src, dst, weight }
    }
}

/// Per-vertex coordinates, all of the same dimensionality (2 or 3).
#[derive(Debug, Clone, PartialEq)]
pub struct Positions {
    dims: usize,
    coords: Vec<f64>,
}

impl Positions {
    pub fn new(dims: usize, coords: Vec<f64>) -> Result<Self> {
        if !(dims == 2 || dims == 3) {
            return Err(Error::InvalidArgument(format!(
                "positions must be 2D or 3D, got {dims} dimensions"
            )));
        }
        if coords.len() % dims != 0 {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: coords.len() % dims,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(Self { dims, coords })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self> {
        Self::new(D, points.iter().flatten().copied().collect())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dims)
    }

    /// Extent (max - min) along each axis.
    pub fn extent(&self) -> Vec<f64> {
        (0..self.dims)
            .map(|d| {
                let (lo, hi) = self.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[d]), hi.max(p[d]))
                });
                if lo.is_finite() {
                    hi - lo
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn select(&self, vertices: &[usize]) -> Self {
        let coords = vertices
            .iter()
            .flat_map(|&v| self.point(v).iter().copied())
            .collect();
        Self {
            dims: self.dims,
            coords,
        }
    }
}

/// Directed weighted graph with optional vertex positions.
///
/// Invariants (checked on construction): weights are finite and strictly
/// positive, there are no self-loops, at most one edge per ordered pair, and
/// an undirected graph stores both `(i, j, w)` and `(j, i, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    out: Vec<Vec<(usize, f64)>>,
    positions: Option<Positions>,
}

impl Graph {
    pub fn from_edges<I>(n: usize, edges: I, directed: bool) -> Result<Self>
    where
        I: IntoIterator<Item = Edge>,
    {
        let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for {n} vertices",
                    e.src, e.dst
                )));
            }
            if e.src == e.dst {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", e.src)));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.src, e.dst, e.weight
                )));
            }
            out[e.src].push((e.dst, e.weight));
        }
        for (i, row) in out.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({i}, {})",
                    w[0].0
                )));
            }
        }
        let g = Self {
            n,
            directed,
            out,
            positions: None,
        };
        if !directed && !g.is_symmetric() {
            return Err(Error::InvalidGraph(
                "undirected graph must store both directions with equal weight".into(),
            ));
        }
        Ok(g)
    }

    /// Builds an undirected graph from unordered pairs; each pair is stored in
    /// both directions.
    pub fn undirected_from_pairs<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = Edge>,
    {
        let edges: Vec<Edge> = pairs
            .into_iter()
            .flat_map(|e| [e, Edge::new(e.dst, e.src, e.weight)])
            .collect();
        Self::from_edges(n, edges, false)
    }

    pub fn with_positions(mut self, positions: Positions) -> Result<Self> {
        if positions.len() != self.n {
            return Err(Error::InvalidGraph(format!(
                "{} positions for {} vertices",
                positions.len(),
                self.n
            )));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn positions(&self) -> Option<&Positions> {
        self.positions.as_ref()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Out-neighbours of `i` with weights, sorted by target.
    pub fn out_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.out[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, w)| Edge::new(i, j, w)))
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.out[i]
            .binary_search_by_key(&j, |&(t, _)| t)
            .ok()
            .map(|idx| self.out[i][idx].1)
    }

    /// Weighted outdegree (row sum of A).
    pub fn out_degree(&self, i: usize) -> f64 {
        self.out[i].iter().map(|&(_, w)| w).sum()
    }

    /// In-neighbour lists: `result[j]` holds `(i, a_ij)` for every edge `i -> j`.
    pub fn in_edges(&self) -> Vec<Vec<(usize, f64)>> {
        let mut inc = vec![Vec::new(); self.n];
        for e in self.edges() {
            inc[e.dst].push((e.src, e.weight));
        }
        inc
    }

    /// True when `a_ij == a_ji` for every pair.
    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|e| self.weight(e.dst, e.src) == Some(e.weight))
    }

    /// Every edge weight multiplied by `factor`.
    pub fn scale_weights(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight scale must be positive, got {factor}"
            )));
        }
        let mut g = self.clone();
        for row in &mut g.out {
            for (_, w) in row.iter_mut() {
                *w *= factor;
            }
        }
        Ok(g)
    }

    /// Undirected graph with weights `(a_ij + a_ji) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut pairs = std::collections::BTreeMap::new();
        for e in self.edges() {
            let key = (e.src.min(e.dst), e.src.max(e.dst));
            *pairs.entry(key).or_insert(0.0) += e.weight / 2.0;
        }
        let edges = pairs
            .into_iter()
            .flat_map(|((i, j), w)| [Edge::new(i, j, w), Edge::new(j, i, w)]);
        let mut g = Self::from_edges(self.n, edges, false).expect("symmetrized graph is valid");
        g.positions = self.positions.clone();
        g
    }

    /// Subgraph induced by `vertices`; vertex `vertices[k]` becomes `k`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Self {
        let mut index = vec![usize::MAX; self.n];
        for (k, &v) in vertices.iter().enumerate() {
            index[v] = k;
        }
        let out = vertices
            .iter()
            .map(|&v| {
                self.out[v]
                    .iter()
                    .filter(|&&(t, _)| index[t] != usize::MAX)
                    .map(|&(t, w)| (index[t], w))
                    .collect::<Vec<_>>()
            })
            .map(|mut row| {
                row.sort_by_key(|&(j, _)| j);
                row
            })
            .collect();
        Self {
            n: vertices.len(),
            directed: self.directed,
            out,
            positions: self.positions.as_ref().map(|p| p.select(vertices)),
        }
    }

    /// Relabels vertex `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: perm.len(),
            });
        }
        let edges = self
            .edges()
            .map(|e| Edge::new(perm[e.src], perm[e.dst], e.weight));
        let mut g = Self::from_edges(self.n, edges, self.directed)?;
        if let Some(p) = &self.positions {
            let mut inverse = vec![0; self.n];
            for (i, &pi) in perm.iter().enumerate() {
                inverse[pi] = i;
            }
            g.positions = Some(p.select(&inverse));
        }
        Ok(g)
    }

    /// Vertices that can reach vertex set `sources` by following edges
    /// backwards, i.e. every `i` with a directed path `i -> ... -> s`.
    pub fn reaching(&self, sources: &[usize]) -> Vec<bool> {
        let inc = self.in_edges();
        let mut seen = vec![false; self.n];
        let mut stack: Vec<usize> = Vec::new();
        for &s in sources {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(v) = stack.pop() {
            for &(u, _) in &inc[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }

    /// Strongly connected components (Tarjan), each sorted ascending, listed
    /// in order of their smallest vertex.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comps = Vec::new();
        let mut counter = 0;
        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            // (vertex, next out-edge position)
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if let Some(&(w, _)) = self.out[v].get(*pos) {
                    *pos += 1;
                    if index[w] == usize::MAX {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
            }
        }
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// Strongly connected components with no edges leaving them. For the
    /// Laplacian these carry the left null space.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let comps = self.strongly_connected_components();
        let mut comp_of = vec![0; self.n];
        for (c, comp) in comps.iter().enumerate() {
            for &v in comp {
                comp_of[v] = c;
            }
        }
        comps
            .iter()
            .enumerate()
            .filter(|(c, comp)| {
                comp.iter()
                    .all(|&v| self.out[v].iter().all(|&(t, _)| comp_of[t] == *c))
            })
            .map(|(_, comp)| comp.clone())
            .collect()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.n > 0 && self.strongly_connected_components().len() == 1
    }

    /// Weakly connected components, each sorted, in order of smallest vertex.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let inc = self.in_edges();
        let mut comp = vec![usize::MAX; self.n];
        let mut comps = Vec::new();
        for root in 0..self.n {
            if comp[root] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![root];
            comp[root] = id;
            let mut k = 0;
            while k < members.len() {
                let v = members[k];
                k += 1;
                for &(w, _) in self.out[v].iter().chain(&inc[v]) {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    pub fn laplacian(&self) -> Laplacian {
        Laplacian::new(self)
    }

    /// Dense adjacency matrix, row-major.
    pub fn adjacency_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for e in self.edges() {
            a[e.src][e.dst] = e.weight;
        }
        a
    }
}

/// Sparse `L = D - A` with `D` the diagonal of weighted outdegrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    degree: Vec<f64>,
    /// Off-diagonal entries `(j, -a_ij)` per row, sorted by column.
    off: Vec<Vec<(usize, f64)>>,
}

impl Laplacian {
    pub fn new(g: &Graph) -> Self {
        let degree = (0..g.n()).map(|i| g.out_degree(i)).collect();
        let off = (0..g.n())
            .map(|i| g.out_edges(i).iter().map(|&(j, w)| (j, -w)).collect())
            .collect();
        Self { degree, off }
    }

    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.degree
    }

    pub fn off_diagonal(&self, i: usize) -> &[(usize, f64)] {
        &self.off[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.degree[i];
        }
        self.off[i]
            .binary_search_by_key(&j, |&(t, _)| t)
            .map(|k| self.off[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.degree
            .iter()
            .zip(&self.off)
            .map(|(d, row)| d + row.iter().map(|&(_, v)| v).sum::<f64>())
            .collect()
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.degree
            .iter()
            .zip(&self.off)
            .map(|(d, row)| d.abs() + row.iter().map(|&(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.degree[i];
            for &(j, v) in &self.off[i] {
                m[i][j] = v;
            }
        }
        m
    }

    /// Row-vector product `v L`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().zip(&self.degree).map(|(x, d)| x * d).collect();
        for (i, row) in self.off.iter().enumerate() {
            for &(j, a) in row {
                out[j] += v[i] * a;
            }
        }
        out
    }

    /// Column-vector product `L x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.degree
            .iter()
            .zip(&self.off)
            .enumerate()
            .map(|(i, (d, row))| d * x[i] + row.iter().map(|&(j, a)| a * x[j]).sum::<f64>())
            .collect()
    }
}
