//! Finite weighted connected graphs with 1-based vertex ids, the canonical
//! families (line, cycle, complete) and the half-weight graph used for
//! meeting-time calculations.

use crate::error::{Error, Result};
use std::fmt::Write as _;

/// An undirected weighted edge. The endpoints are stored in canonical order
/// `v < w`, so "the first endpoint" of an edge is well defined everywhere a
/// designated endpoint is needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub v: usize,
    pub w: usize,
    pub weight: f64,
}

impl Edge {
    pub fn other(&self, x: usize) -> usize {
        if x == self.v {
            self.w
        } else {
            self.v
        }
    }

    pub fn contains(&self, x: usize) -> bool {
        x == self.v || x == self.w
    }
}

/// Index of an edge within a [`WeightedGraph`].
pub type EdgeId = usize;

/// A finite connected graph with strictly positive edge weights.
/// Vertices are `1..=n`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    ring_probs: Vec<f64>,
    incident: Vec<Vec<EdgeId>>,
}

impl WeightedGraph {
    /// Builds a graph from an edge list, validating weights, duplicates,
    /// vertex ranges and connectivity.
    pub fn new(n: usize, raw_edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 1 {
            return Err(Error::GraphTooSmall { min: 1, got: n });
        }
        let mut edges = Vec::with_capacity(raw_edges.len());
        for &(a, b, weight) in raw_edges {
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            for x in [a, b] {
                if x < 1 || x > n {
                    return Err(Error::VertexOutOfRange(x, n));
                }
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::NonPositiveWeight { v: a, w: b, weight });
            }
            let (v, w) = if a < b { (a, b) } else { (b, a) };
            if edges.iter().any(|e: &Edge| e.v == v && e.w == w) {
                return Err(Error::DuplicateEdge(v, w));
            }
            edges.push(Edge { v, w, weight });
        }

        let mut incident = vec![Vec::new(); n + 1];
        for (i, e) in edges.iter().enumerate() {
            incident[e.v].push(i);
            incident[e.w].push(i);
        }

        let g = Self {
            n,
            ring_probs: normalise(&edges),
            edges,
            incident,
        };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// The line graph on `n >= 2` vertices with unit weights.
    pub fn line(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GraphTooSmall { min: 2, got: n });
        }
        let edges: Vec<_> = (1..n).map(|k| (k, k + 1, 1.0)).collect();
        Self::new(n, &edges)
    }

    /// The cycle on `n >= 3` vertices with unit weights.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::GraphTooSmall { min: 3, got: n });
        }
        let mut edges: Vec<_> = (1..n).map(|k| (k, k + 1, 1.0)).collect();
        edges.push((n, 1, 1.0));
        Self::new(n, &edges)
    }

    /// The complete graph on `n >= 2` vertices. Every edge gets
    /// `weight_per_edge`; the default `1/(n-1)` gives the uniform
    /// reshuffling normalisation.
    pub fn complete(n: usize, weight_per_edge: Option<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::GraphTooSmall { min: 2, got: n });
        }
        let w = weight_per_edge.unwrap_or(1.0 / (n as f64 - 1.0));
        let mut edges = Vec::new();
        for v in 1..=n {
            for u in (v + 1)..=n {
                edges.push((v, u, w));
            }
        }
        Self::new(n, &edges)
    }

    /// Same topology with every weight halved. Ring probabilities are
    /// unchanged; in raw-rate time the absolute event rate halves.
    pub fn halve(&self) -> Self {
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| (e.v, e.w, e.weight / 2.0))
            .collect();
        Self::new(self.n, &edges).expect("halving preserves validity")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id]
    }

    pub fn ring_probs(&self) -> &[f64] {
        &self.ring_probs
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Ids of edges incident to vertex `v`.
    pub fn incident(&self, v: usize) -> &[EdgeId] {
        &self.incident[v]
    }

    /// Looks up an edge by its endpoints (in either order).
    pub fn edge_id(&self, a: usize, b: usize) -> Result<EdgeId> {
        let (v, w) = if a < b { (a, b) } else { (b, a) };
        self.edges
            .iter()
            .position(|e| e.v == v && e.w == w)
            .ok_or(Error::EdgeNotInGraph(a, b))
    }

    fn is_connected(&self) -> bool {
        if self.n == 1 {
            return true;
        }
        let mut seen = vec![false; self.n + 1];
        let mut stack = vec![1usize];
        seen[1] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &eid in &self.incident[v] {
                let u = self.edges[eid].other(v);
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    /// Serialises to the line-oriented text format accepted by
    /// [`WeightedGraph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n={}", self.n);
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {:?}", e.v, e.w, e.weight);
        }
        out
    }

    /// Parses the text format: a header line `n=<count>` followed by one
    /// `v w r` line per edge. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("n=") {
                n = Some(rest.trim().parse().map_err(|_| Error::GraphParse {
                    line: line_no,
                    msg: format!("invalid vertex count {rest:?}"),
                })?);
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::GraphParse {
                    line: line_no,
                    msg: format!("expected `v w r`, got {line:?}"),
                });
            }
            let v: usize = fields[0].parse().map_err(|_| Error::GraphParse {
                line: line_no,
                msg: format!("invalid vertex {:?}", fields[0]),
            })?;
            let w: usize = fields[1].parse().map_err(|_| Error::GraphParse {
                line: line_no,
                msg: format!("invalid vertex {:?}", fields[1]),
            })?;
            let r: f64 = fields[2].parse().map_err(|_| Error::GraphParse {
                line: line_no,
                msg: format!("invalid weight {:?}", fields[2]),
            })?;
            edges.push((v, w, r));
        }
        let n = n.ok_or(Error::GraphParse {
            line: 0,
            msg: "missing `n=<count>` header".into(),
        })?;
        Self::new(n, &edges)
    }
}

fn normalise(edges: &[Edge]) -> Vec<f64> {
    let total: f64 = edges.iter().map(|e| e.weight).sum();
    edges.iter().map(|e| e.weight / total).collect()
}
