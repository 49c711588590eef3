//! Communication networks: weighted undirected graphs whose edges are
//! partitioned into delay classes.
//!
//! Agents are numbered `1..=n`. Each undirected edge carries a positive
//! weight and belongs to exactly one delay class in `1..=r`; every class
//! must own at least one edge. The graph Laplacian used throughout is
//! `L = A - V` (adjacency minus valency), so `L` is negative semidefinite,
//! off-diagonal entries are the edge weights and each row sums to zero.
//! Agent states live in `R^d`; the full network operator is `L (x) I_d`,
//! which shares the spectrum of `L` with every eigenvalue repeated `d`
//! times. We therefore store the `n x n` matrix once and record `d` as a
//! multiplicity factor.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::matrix::SquareMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("a network needs at least two agents, got {0}")]
    TooFewAgents(usize),
    #[error("agent state dimension must be at least 1")]
    ZeroDimension,
    #[error("agent index {index} outside 1..={n}")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("self-loop on agent {0} is not allowed")]
    SelfLoop(usize),
    #[error("edge ({u}, {v}) has non-positive weight {weight}")]
    NonPositiveWeight { u: usize, v: usize, weight: f64 },
    #[error("edge ({u}, {v}) listed twice with conflicting weight or class")]
    ConflictingDuplicateEdge { u: usize, v: usize },
    #[error("{r} delay classes exceed the {max} distinct edges of an {n}-agent network")]
    TooManyClasses { r: usize, max: usize, n: usize },
    #[error("delay class {class} in 1..={r} has no edges")]
    ClassGap { class: usize, r: usize },
    #[error("graph has no edges")]
    NoEdges,
}

/// How to assign delay classes in the generated benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayPartition {
    /// One class shared by every edge (a single network-wide delay).
    Uniform,
    /// One class per edge (fully non-uniform delays).
    PerEdge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeData {
    weight: f64,
    class: usize,
}

/// An undirected weighted network with a delay class on every edge.
///
/// Immutable after construction; cheap to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGraph {
    n: usize,
    d: usize,
    // Keyed by the canonical ordered pair (min, max), so the weight
    // symmetry w(x,y) = w(y,x) is structural.
    edges: BTreeMap<(usize, usize), EdgeData>,
    num_classes: usize,
}

impl AgentGraph {
    /// Validates and builds a network from edge records `(u, v, weight, class)`.
    ///
    /// Node indices are 1-based. A pair listed twice is accepted only when
    /// both records agree on weight and class. Classes must form the dense
    /// range `1..=r` with every class used.
    ///
    /// ```
    /// use delay_consensus::AgentGraph;
    ///
    /// let g = AgentGraph::build(3, 2, &[(1, 2, 1.0, 1), (2, 3, 1.0, 1), (1, 3, 1.0, 2)])?;
    /// assert_eq!(g.num_classes(), 2);
    /// # Ok::<(), delay_consensus::GraphError>(())
    /// ```
    pub fn build(
        n: usize,
        d: usize,
        edge_records: &[(usize, usize, f64, usize)],
    ) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        if d == 0 {
            return Err(GraphError::ZeroDimension);
        }
        let mut edges = BTreeMap::new();
        let mut max_class = 0usize;
        for &(u, v, weight, class) in edge_records {
            for index in [u, v] {
                if index == 0 || index > n {
                    return Err(GraphError::NodeOutOfRange { index, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if weight.is_nan() || weight <= 0.0 {
                return Err(GraphError::NonPositiveWeight { u, v, weight });
            }
            let key = (u.min(v), u.max(v));
            let data = EdgeData { weight, class };
            if let Some(prev) = edges.insert(key, data) {
                if prev != data {
                    return Err(GraphError::ConflictingDuplicateEdge { u: key.0, v: key.1 });
                }
            }
            max_class = max_class.max(class);
        }
        if edges.is_empty() {
            return Err(GraphError::NoEdges);
        }
        let max_edges = n * (n - 1) / 2;
        if max_class > max_edges {
            return Err(GraphError::TooManyClasses {
                r: max_class,
                max: max_edges,
                n,
            });
        }
        let mut used = vec![false; max_class + 1];
        for data in edges.values() {
            if data.class == 0 {
                return Err(GraphError::ClassGap {
                    class: 0,
                    r: max_class,
                });
            }
            used[data.class] = true;
        }
        if let Some(class) = used.iter().skip(1).position(|&hit| !hit) {
            return Err(GraphError::ClassGap {
                class: class + 1,
                r: max_class,
            });
        }
        Ok(Self {
            n,
            d,
            edges,
            num_classes: max_class,
        })
    }

    /// Complete graph on `n` agents with uniform weight `delta`.
    pub fn complete(
        n: usize,
        d: usize,
        delta: f64,
        partition: DelayPartition,
    ) -> Result<Self, GraphError> {
        let mut records = Vec::with_capacity(n.saturating_mul(n) / 2);
        let mut class = 0usize;
        for u in 1..=n {
            for v in (u + 1)..=n {
                class += 1;
                let c = match partition {
                    DelayPartition::Uniform => 1,
                    DelayPartition::PerEdge => class,
                };
                records.push((u, v, delta, c));
            }
        }
        Self::build(n, d, &records)
    }

    /// Ring on `n >= 3` agents with uniform weight `delta`.
    pub fn ring(
        n: usize,
        d: usize,
        delta: f64,
        partition: DelayPartition,
    ) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::TooFewAgents(n));
        }
        let records: Vec<_> = (1..=n)
            .map(|u| {
                let v = if u == n { 1 } else { u + 1 };
                let c = match partition {
                    DelayPartition::Uniform => 1,
                    DelayPartition::PerEdge => u,
                };
                (u, v, delta, c)
            })
            .collect();
        Self::build(n, d, &records)
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    /// Dimension of each agent's state vector.
    pub fn state_dim(&self) -> usize {
        self.d
    }

    /// Number of delay classes `r`.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Iterates edges as `(u, v, weight, class)` with `u < v`, in
    /// deterministic (lexicographic) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64, usize)> + '_ {
        self.edges
            .iter()
            .map(|(&(u, v), data)| (u, v, data.weight, data.class))
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.edges.get(&(u.min(v), u.max(v))).map(|e| e.weight)
    }

    pub fn class_of(&self, u: usize, v: usize) -> Option<usize> {
        self.edges.get(&(u.min(v), u.max(v))).map(|e| e.class)
    }

    /// The Laplacian `L = A - V` of the whole network.
    ///
    /// ```
    /// use delay_consensus::AgentGraph;
    ///
    /// let g = AgentGraph::build(2, 1, &[(1, 2, 1.0, 1)])?;
    /// let l = g.laplacian();
    /// assert_eq!(l.entries()[(0, 0)], -1.0);
    /// assert_eq!(l.entries()[(0, 1)], 1.0);
    /// # Ok::<(), delay_consensus::GraphError>(())
    /// ```
    pub fn laplacian(&self) -> LaplacianMatrix {
        let mut entries = SquareMatrix::zeros(self.n);
        for (&(u, v), data) in &self.edges {
            accumulate_edge(&mut entries, u, v, data.weight);
        }
        LaplacianMatrix {
            entries,
            multiplicity_factor: self.d,
        }
    }

    /// One Laplacian per delay class, on the full node set. Their entrywise
    /// sum equals [`AgentGraph::laplacian`].
    pub fn sub_laplacians(&self) -> Vec<LaplacianMatrix> {
        let mut mats = vec![SquareMatrix::zeros(self.n); self.num_classes];
        for (&(u, v), data) in &self.edges {
            accumulate_edge(&mut mats[data.class - 1], u, v, data.weight);
        }
        mats.into_iter()
            .map(|entries| LaplacianMatrix {
                entries,
                multiplicity_factor: self.d,
            })
            .collect()
    }

    /// The subgraph carrying one delay class, as a standalone single-class
    /// network. Useful for checking whether a class leaves agents isolated.
    pub fn class_subgraph(&self, class: usize) -> Option<Self> {
        if class == 0 || class > self.num_classes {
            return None;
        }
        let records: Vec<_> = self
            .edges()
            .filter(|&(_, _, _, c)| c == class)
            .map(|(u, v, w, _)| (u, v, w, 1))
            .collect();
        Self::build(self.n, self.d, &records).ok()
    }

    /// True when every pair of agents is joined by a path.
    pub fn is_connected(&self) -> bool {
        let mut adjacency = vec![Vec::new(); self.n + 1];
        for &(u, v) in self.edges.keys() {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut seen = vec![false; self.n + 1];
        let mut queue = vec![1usize];
        seen[1] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push(v);
                }
            }
        }
        reached == self.n
    }
}

fn accumulate_edge(m: &mut SquareMatrix, u: usize, v: usize, weight: f64) {
    let (i, j) = (u - 1, v - 1);
    m[(i, j)] += weight;
    m[(j, i)] += weight;
    m[(i, i)] -= weight;
    m[(j, j)] -= weight;
}

/// Laplacian of a network (or of one delay class), stored as the `n x n`
/// matrix; the full operator on stacked agent states is this matrix
/// Kronecker the `d x d` identity, recorded via `multiplicity_factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: SquareMatrix,
    multiplicity_factor: usize,
}

impl LaplacianMatrix {
    pub fn order(&self) -> usize {
        self.entries.order()
    }

    pub fn entries(&self) -> &SquareMatrix {
        &self.entries
    }

    /// Spectral multiplicity of every eigenvalue in the full stacked
    /// operator (the per-agent state dimension `d`).
    pub fn multiplicity_factor(&self) -> usize {
        self.multiplicity_factor
    }

    /// Wraps an explicit matrix. The caller is responsible for it actually
    /// being a Laplacian (symmetric, zero row sums).
    pub fn from_matrix(entries: SquareMatrix, multiplicity_factor: usize) -> Self {
        Self {
            entries,
            multiplicity_factor,
        }
    }
}
