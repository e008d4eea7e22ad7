//! Undirected communication graphs and the spectral quantities derived from them.
//!
//! Agents are indexed from 0 internally. The JSON form and the generator
//! strings (`ring:5`, `path:2`, `complete:3`) use 1-based agent labels.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold separating zero Laplacian eigenvalues from the rest.
pub const ZERO_EIGEN_RTOL: f64 = 1e-9;

/// An undirected, unweighted graph over `n` agents.
///
/// Edges are stored as `(i, j)` with `i < j`; their order fixes the column
/// order of the incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a connected graph. Edges may be given in either orientation.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let g = Self::structural(n, edges)?;
        if !g.is_connected() {
            return Err(Error::InvalidGraph(format!(
                "graph on {n} agents with {} edges is not connected",
                g.edges.len()
            )));
        }
        Ok(g)
    }

    /// Builds a graph checking only structural validity (range, self-loops,
    /// duplicates). Connectivity is not required.
    pub fn structural(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one agent".into()));
        }
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for {n} agents",
                    a + 1,
                    b + 1
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at agent {}", a + 1)));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.0 + 1,
                    e.1 + 1
                )));
            }
            normalized.push(e);
        }
        Ok(Self { n, edges: normalized })
    }

    /// Cycle `1-2-…-n-1`, edges `(1,2), (2,3), …, (n-1,n), (1,n)`.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph(format!("ring needs n >= 3, got {n}")));
        }
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edges.push((0, n - 1));
        Self::new(n, edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!("path needs n >= 2, got {n}")));
        }
        Self::new(n, (0..n - 1).map(|i| (i, i + 1)).collect())
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!("complete graph needs n >= 2, got {n}")));
        }
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::new(n, edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn is_connected(&self) -> bool {
        let mut visited = vec![false; self.n];
        let mut stack = vec![0];
        visited[0] = true;
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !visited[w] {
                    visited[w] = true;
                    stack.push(w);
                }
            }
        }
        visited.into_iter().all(|v| v)
    }

    /// Oriented incidence matrix, `n × |E|`. Column `ℓ` for edge `(i, j)`
    /// carries `+1` at the lower-indexed endpoint `i` and `-1` at `j`.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.edges.len());
        for (l, &(i, j)) in self.edges.iter().enumerate() {
            d[(i, l)] = 1.0;
            d[(j, l)] = -1.0;
        }
        d
    }

    /// Graph Laplacian assembled as degree minus adjacency.
    ///
    /// Equals `D·Dᵀ` for the incidence `D`; built independently of it.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut lap = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            lap[(i, i)] += 1.0;
            lap[(j, j)] += 1.0;
            lap[(i, j)] -= 1.0;
            lap[(j, i)] -= 1.0;
        }
        lap
    }

    /// Laplacian eigenvalues in ascending order.
    pub fn laplacian_spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest nonzero Laplacian eigenvalue `λ_G`.
    ///
    /// Fails when the second-smallest eigenvalue is numerically zero, i.e.
    /// the graph has more than one component.
    pub fn algebraic_connectivity(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::InvalidGraph(
                "a single agent has no algebraic connectivity".into(),
            ));
        }
        let ev = self.laplacian_spectrum();
        let largest = ev[ev.len() - 1];
        let lambda = ev[1];
        if largest <= 0.0 || lambda <= ZERO_EIGEN_RTOL * largest {
            return Err(Error::Disconnected(lambda));
        }
        Ok(lambda)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "graph(n={}, edges=[", self.n)?;
        for (k, (i, j)) in self.edges.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({}, {})", i + 1, j + 1)?;
        }
        write!(f, "])")
    }
}

/// `P = I − (1/n)𝟙𝟙ᵀ`, the orthogonal projector onto zero-mean vectors.
pub fn consensus_projector(n: usize) -> DMatrix<f64> {
    let inv = 1.0 / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
}

/// Removes the mean of `v`.
pub fn project_to_zero_mean(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

/// JSON form of a graph: `{"n": 5, "edges": [[1,2],[2,3],...]}` with 1-based labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;

    fn try_from(value: GraphJson) -> Result<Self> {
        let mut edges = Vec::with_capacity(value.edges.len());
        for [a, b] in value.edges {
            if a == 0 || b == 0 {
                return Err(Error::InvalidGraph("agent labels are 1-based".into()));
            }
            edges.push((a - 1, b - 1));
        }
        Graph::new(value.n, edges)
    }
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        Self {
            n: g.n,
            edges: g.edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

/// How a graph is specified on the command line or in a config file:
/// either a generator (`ring:5`) or an inline/explicit edge list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Generator(String),
    Explicit(GraphJson),
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        match self {
            GraphSpec::Generator(s) => parse_generator(s),
            GraphSpec::Explicit(j) => Graph::try_from(j.clone()),
        }
    }

    /// Interprets `arg` as a generator string, or else as a path to a JSON graph file.
    pub fn from_arg(arg: &str) -> Result<Self> {
        if parse_generator(arg).is_ok() {
            return Ok(GraphSpec::Generator(arg.to_string()));
        }
        let path = Path::new(arg);
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            let json: GraphJson = serde_json::from_str(&text)?;
            return Ok(GraphSpec::Explicit(json));
        }
        Err(Error::InvalidGraph(format!(
            "`{arg}` is neither a generator (ring:N, path:N, complete:N) nor a graph file"
        )))
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_arg(s)
    }
}

fn parse_generator(s: &str) -> Result<Graph> {
    let (kind, n) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidGraph(format!("bad generator `{s}`")))?;
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| Error::InvalidGraph(format!("bad agent count in `{s}`")))?;
    match kind.trim() {
        "ring" => Graph::ring(n),
        "path" => Graph::path(n),
        "complete" => Graph::complete(n),
        other => Err(Error::InvalidGraph(format!("unknown generator `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_ddt(d: &DMatrix<f64>) -> DMatrix<f64> {
        let n = d.nrows();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (0..d.ncols()).map(|l| d[(i, l)] * d[(j, l)]).sum();
            }
        }
        out
    }

    #[test]
    fn path2_incidence_and_laplacian() {
        let g = Graph::path(2).unwrap();
        assert_eq!(g.incidence().as_slice(), &[1.0, -1.0]);
        let lap = g.laplacian();
        assert_eq!(lap, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert_relative_eq!(g.algebraic_connectivity().unwrap(), 2.0, max_relative = 1e-10);
    }

    #[test]
    fn ring3_incidence_columns() {
        let g = Graph::ring(3).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (0, 2)]);
        let d = g.incidence();
        let expected =
            DMatrix::from_column_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.0, -1.0]);
        assert_eq!(d, expected);
    }

    #[test]
    fn ring5_laplacian_is_circulant() {
        let g = Graph::ring(5).unwrap();
        let row = [2.0, -1.0, 0.0, 0.0, -1.0];
        let circ = DMatrix::from_fn(5, 5, |i, j| row[(j + 5 - i) % 5]);
        assert_eq!(brute_ddt(&g.incidence()), circ);
        assert_eq!(g.laplacian(), circ);
        let expected = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / 5.0).cos();
        assert_relative_eq!(
            g.algebraic_connectivity().unwrap(),
            expected,
            max_relative = 1e-10
        );
        assert_relative_eq!(expected, 1.381966, epsilon = 1e-6);
    }

    #[test]
    fn complete3_laplacian_and_connectivity() {
        let g = Graph::complete(3).unwrap();
        assert_eq!(
            g.laplacian(),
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0])
        );
        assert_relative_eq!(g.algebraic_connectivity().unwrap(), 3.0, max_relative = 1e-10);
    }

    #[test]
    fn incidence_columns_have_one_plus_one_minus() {
        let g = Graph::complete(5).unwrap();
        let d = g.incidence();
        for col in d.column_iter() {
            assert_eq!(col.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(col.iter().filter(|&&x| x == -1.0).count(), 1);
            assert_eq!(col.sum(), 0.0);
        }
    }

    #[test]
    fn malformed_graphs_are_rejected() {
        assert!(Graph::new(3, vec![(0, 0)]).is_err());
        assert!(Graph::new(3, vec![(0, 1), (1, 0), (1, 2)]).is_err());
        assert!(Graph::new(3, vec![(0, 5)]).is_err());
        assert!(Graph::new(4, vec![(0, 1), (2, 3)]).is_err());
    }

    #[test]
    fn disconnected_graph_has_zero_connectivity() {
        let g = Graph::structural(4, vec![(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
        assert!(matches!(g.algebraic_connectivity(), Err(Error::Disconnected(_))));
    }

    #[test]
    fn projector_examples() {
        assert_eq!(consensus_projector(1), DMatrix::from_element(1, 1, 0.0));
        assert_eq!(
            consensus_projector(2),
            DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5])
        );
        let p = consensus_projector(5);
        assert!((&p * &p - &p).amax() < 1e-12);
        assert!((&p * nalgebra::DVector::from_element(5, 1.0)).amax() < 1e-15);
        assert_eq!(p, p.transpose());
    }

    #[test]
    fn zero_mean_projection_examples() {
        assert_eq!(project_to_zero_mean(&[1.0, 1.0, 1.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(project_to_zero_mean(&[1.0, -1.0, 0.0]), vec![1.0, -1.0, 0.0]);
        assert_eq!(project_to_zero_mean(&[3.0, 0.0, 0.0]), vec![2.0, -1.0, -1.0]);
    }

    #[test]
    fn json_and_generator_specs() {
        let g: Graph = serde_json::from_str::<GraphJson>(r#"{"n": 3, "edges": [[1,2],[2,3]]}"#)
            .unwrap()
            .try_into()
            .unwrap();
        assert_eq!(g, Graph::path(3).unwrap());
        assert_eq!(GraphJson::from(&g).edges, vec![[1, 2], [2, 3]]);
        assert_eq!(
            "ring:5".parse::<GraphSpec>().unwrap().build().unwrap(),
            Graph::ring(5).unwrap()
        );
        assert!("star:4".parse::<GraphSpec>().is_err());
        let spec: GraphSpec = serde_json::from_str(r#""complete:4""#).unwrap();
        assert_eq!(spec.build().unwrap().n_edges(), 6);
    }
}
