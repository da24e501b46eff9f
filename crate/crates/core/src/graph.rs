//! Undirected simple graphs and the random generators used by the
//! experiments (Erdős–Rényi, Barabási–Albert preferential attachment).

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Resampling limit for disconnected Erdős–Rényi draws.
pub const DEFAULT_ER_RETRIES: usize = 100;

/// Immutable undirected simple graph on nodes `0..n`.
///
/// Edges are kept both as a sorted `(i, j)` list with `i < j` and as a CSR
/// neighbour structure. The position of `j` inside node `i`'s neighbour
/// slice is the index of the directed pair `(i, j)`, which is how
/// per-pair data (the mismatch matrices) is addressed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list (0-based). Duplicate edges and
    /// self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }

        let mut degree = vec![0usize; n];
        for &(a, b) in &norm {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; offsets[n]];
        for &(a, b) in &norm {
            targets[fill[a]] = b;
            fill[a] += 1;
            targets[fill[b]] = a;
            fill[b] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Ok(Self { n, edges: norm, offsets, targets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges, `i < j`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Index of the first directed pair `(i, ·)`; pairs of node `i` occupy
    /// `pair_offset(i)..pair_offset(i + 1)`.
    pub fn pair_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Number of ordered pairs `(i, j)` with `A_ij = 1`, i.e. `2|E|`.
    pub fn pair_count(&self) -> usize {
        self.targets.len()
    }

    /// Directed pair index of `(i, j)`, if the edge exists.
    pub fn pair_index(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors(i).binary_search(&j).ok().map(|k| self.offsets[i] + k)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).min().unwrap_or(0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.pair_index(i, j).is_some()
    }

    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Combinatorial Laplacian `L = D - A`.
    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            l[(i, i)] = self.degree(i) as f64;
        }
        for &(i, j) in &self.edges {
            l[(i, j)] = -1.0;
            l[(j, i)] = -1.0;
        }
        l
    }

    /// Breadth-first search from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == self.n
    }

    /// Applies a node permutation: node `i` becomes `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidParameter("permutation length mismatch".into()));
        }
        let edges: Vec<_> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Self::from_edges(self.n, &edges)
    }

    /// Edge-list text: `n m` header, then `i j` per line (1-based, `i < j`).
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty edge-list file".into()))?;
        let (n, m) = parse_pair(header)?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let (i, j) = parse_pair(line)?;
            if i == 0 || j == 0 {
                return Err(Error::Parse(format!("node ids are 1-based, got line {line:?}")));
            }
            edges.push((i - 1, j - 1));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("header declares {m} edges, found {}", edges.len())));
        }
        Self::from_edges(n, &edges)
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = || -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse(format!("expected two integers, got {line:?}")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("{e} in line {line:?}")))
    };
    let a = next()?;
    let b = next()?;
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    ErdosRenyi {
        p: f64,
    },
    /// Preferential attachment growing from a single edge; each new node
    /// links to `m0` distinct existing nodes. `m0 = 1` yields a tree.
    BarabasiAlbert {
        m0: usize,
    },
    Explicit {
        edges: Vec<(usize, usize)>,
    },
    Complete,
    Path,
    Star,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecipe {
    pub kind: GraphKind,
    pub n: usize,
    pub seed: u64,
}

impl GraphRecipe {
    pub fn new(kind: GraphKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        match &self.kind {
            GraphKind::ErdosRenyi { p } if !(*p > 0.0 && *p <= 1.0) => {
                Err(Error::InvalidParameter(format!("p must lie in (0, 1], got {p}")))
            }
            GraphKind::BarabasiAlbert { m0 } if *m0 == 0 => Err(Error::InvalidParameter("m0 must be >= 1".into())),
            GraphKind::BarabasiAlbert { .. } if self.n < 2 => {
                Err(Error::InvalidParameter("BA graphs start from a single edge, need n >= 2".into()))
            }
            _ => Ok(()),
        }
    }
}

pub fn generate(recipe: &GraphRecipe) -> Result<Graph> {
    generate_with_retries(recipe, DEFAULT_ER_RETRIES)
}

/// Deterministic in `recipe`. Disconnected Erdős–Rényi samples are
/// rejected and redrawn from the same stream, so the output follows the
/// distribution conditioned on connectivity.
pub fn generate_with_retries(recipe: &GraphRecipe, max_retries: usize) -> Result<Graph> {
    recipe.validate()?;
    let n = recipe.n;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    match &recipe.kind {
        GraphKind::ErdosRenyi { p } => {
            for _ in 0..=max_retries {
                let g = erdos_renyi(n, *p, &mut rng)?;
                if g.is_connected() {
                    return Ok(g);
                }
            }
            Err(Error::Disconnected(max_retries))
        }
        GraphKind::BarabasiAlbert { m0 } => barabasi_albert(n, *m0, &mut rng),
        GraphKind::Explicit { edges } => Graph::from_edges(n, edges),
        GraphKind::Complete => {
            let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
            Graph::from_edges(n, &edges)
        }
        GraphKind::Path => {
            let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            Graph::from_edges(n, &edges)
        }
        GraphKind::Star => {
            let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
            Graph::from_edges(n, &edges)
        }
    }
}

fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Result<Graph> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

fn barabasi_albert(n: usize, m0: usize, rng: &mut impl Rng) -> Result<Graph> {
    let mut degree = vec![0usize; n];
    let mut edges = vec![(0usize, 1usize)];
    degree[0] = 1;
    degree[1] = 1;
    let mut weights = Vec::with_capacity(n);
    for new in 2..n {
        // degrees frozen at the start of the step; chosen nodes drop out
        weights.clear();
        weights.extend(degree[..new].iter().map(|&d| d as f64));
        let links = m0.min(new);
        for _ in 0..links {
            let target = sample_proportional(&weights, rng);
            weights[target] = 0.0;
            edges.push((target, new));
        }
        for &(t, _) in &edges[edges.len() - links..] {
            degree[t] += 1;
        }
        degree[new] = links;
    }
    Graph::from_edges(n, &edges)
}

/// Cumulative-sum inversion over nonnegative weights (at least one positive).
fn sample_proportional(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}
