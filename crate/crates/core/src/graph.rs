//! Dual graph of a state: voting units with populations, joined by
//! geographic adjacency.
//!
//! Units are identified by their index everywhere inside the crate; the
//! string ids only matter when reading or writing files.
use std::collections::{HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A voting unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub pop: f64,
}

/// Immutable, connected, simple undirected graph of voting units.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGraph {
    units: Vec<Unit>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

/// On-disk shape of a graph file.
#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    units: Vec<Unit>,
    edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PopModel {
    Uniform(f64),
    PerCell(Vec<f64>),
}

/// Parameters of a synthetic lattice state.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub pop_model: PopModel,
}

impl GridSpec {
    pub fn uniform(rows: usize, cols: usize) -> Self {
        GridSpec {
            rows,
            cols,
            pop_model: PopModel::Uniform(1.0),
        }
    }
}

impl DualGraph {
    /// Validates and builds a graph. Edges must satisfy `i < j` and be unique.
    pub fn new(units: Vec<Unit>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = units.len();
        if n == 0 {
            return Err(Error::InvalidParameter("graph has no units".into()));
        }
        let mut ids = HashSet::with_capacity(n);
        for unit in &units {
            if !(unit.pop > 0.0) || !unit.pop.is_finite() {
                return Err(Error::NonpositivePopulation {
                    unit: unit.id.clone(),
                    pop: unit.pop,
                });
            }
            if !ids.insert(unit.id.as_str()) {
                return Err(Error::DuplicateId(unit.id.clone()));
            }
        }

        let mut seen = HashSet::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); n];
        for (index, &(a, b)) in edges.iter().enumerate() {
            let reason = if a >= n || b >= n {
                Some("endpoint out of range")
            } else if a == b {
                Some("self-loop")
            } else if a > b {
                Some("endpoints must satisfy i < j")
            } else if !seen.insert((a, b)) {
                Some("duplicate edge")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::InvalidEdge {
                    index,
                    a,
                    b,
                    reason,
                });
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }

        let graph = DualGraph {
            units,
            edges,
            neighbors,
        };
        graph.check_connected()?;
        Ok(graph)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(missing) => Err(Error::Disconnected {
                root: self.units[0].id.clone(),
                unreachable: self.units[missing].id.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, unit: usize) -> &[usize] {
        &self.neighbors[unit]
    }

    pub fn pop(&self, unit: usize) -> f64 {
        self.units[unit].pop
    }

    pub fn pops(&self) -> impl Iterator<Item = f64> + '_ {
        self.units.iter().map(|u| u.pop)
    }

    pub fn total_pop(&self) -> f64 {
        self.pops().sum()
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    /// All-pairs hop counts by one BFS per source; `n × n`, row-major.
    pub fn shortest_path_lengths(&self) -> HopMatrix {
        let n = self.n();
        let mut hops = vec![u32::MAX; n * n];
        let mut queue = VecDeque::with_capacity(n);
        for src in 0..n {
            let row = &mut hops[src * n..(src + 1) * n];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(u) = queue.pop_front() {
                let next = row[u] + 1;
                for &v in &self.neighbors[u] {
                    if row[v] == u32::MAX {
                        row[v] = next;
                        queue.push_back(v);
                    }
                }
            }
        }
        HopMatrix { n, hops }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            units: self.units.clone(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        };
        serde_json::to_string(&file).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::parse("graph JSON", e))?;
        DualGraph::new(
            file.units,
            file.edges.into_iter().map(|[a, b]| (a, b)).collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DualGraph::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Builds a 4-neighbour `rows × cols` lattice with ids `r{i}c{j}`, row-major.
pub fn make_grid(spec: &GridSpec) -> Result<DualGraph> {
    let GridSpec {
        rows,
        cols,
        ref pop_model,
    } = *spec;
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid {rows}x{cols} needs at least two cells"
        )));
    }
    let n = rows * cols;
    let pops: Vec<f64> = match pop_model {
        PopModel::Uniform(v) => vec![*v; n],
        PopModel::PerCell(list) if list.len() == n => list.clone(),
        PopModel::PerCell(list) => {
            return Err(Error::SizeMismatch {
                expected: n,
                found: list.len(),
            })
        }
    };
    let units = (0..n)
        .map(|v| Unit {
            id: format!("r{}c{}", v / cols, v % cols),
            pop: pops[v],
        })
        .collect();
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    DualGraph::new(units, edges)
}

/// Dense matrix of shortest-path hop counts.
#[derive(Debug, Clone, PartialEq)]
pub struct HopMatrix {
    n: usize,
    hops: Vec<u32>,
}

impl HopMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.hops[i * self.n + j]
    }
}
