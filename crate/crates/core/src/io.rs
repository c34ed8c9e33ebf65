//! JSON graph files.
//!
//! ```json
//! {"n": 3, "k": 2,
//!  "edges": [[1, 2], [2, 3]],
//!  "weights": [[1, 0, 0, 1], [[2, 0.5], [0.5, 1]]],
//!  "timescales": [[1, 1], [1, 1], [1, 1]]}
//! ```
//!
//! Node indices are 1-based. A weight is either a flat row-major list of
//! `k²` numbers or a nested `k × k` list, or a bare number when `k = 1`;
//! files are written flat.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MatrixWeightedGraph;
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRepr {
    Scalar(f64),
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

impl MatrixRepr {
    pub fn to_matrix(&self, k: usize) -> std::result::Result<Mat, String> {
        match self {
            MatrixRepr::Scalar(w) if k == 1 => Ok(Mat::from_element(1, 1, *w)),
            MatrixRepr::Scalar(_) => Err(format!("a bare number needs k = 1, graph has k = {k}")),
            MatrixRepr::Flat(v) if v.len() == k * k => Ok(Mat::from_row_slice(k, k, v)),
            MatrixRepr::Flat(v) => Err(format!("{} entries, expected {}", v.len(), k * k)),
            MatrixRepr::Nested(rows) => {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(format!("expected a {k}x{k} nested array"));
                }
                Ok(Mat::from_fn(k, k, |i, j| rows[i][j]))
            }
        }
    }

    pub fn from_matrix(m: &Mat) -> Self {
        MatrixRepr::Flat((0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub k: usize,
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<MatrixRepr>,
    pub timescales: Vec<Vec<f64>>,
}

impl GraphFile {
    pub fn from_graph(g: &MatrixWeightedGraph) -> Self {
        Self {
            n: g.n(),
            k: g.k(),
            edges: g.edges().iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            weights: g.weights().iter().map(MatrixRepr::from_matrix).collect(),
            timescales: g.timescales().to_vec(),
        }
    }

    pub fn into_graph(self) -> Result<MatrixWeightedGraph> {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| {
                if a == 0 || b == 0 || a > self.n || b > self.n {
                    Err(Error::Parse(format!("edge {} = [{a}, {b}]: node indices are 1-based in 1..={}", e + 1, self.n)))
                } else {
                    Ok((a - 1, b - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if self.weights.len() != edges.len() {
            return Err(Error::Parse(format!("{} weights for {} edges", self.weights.len(), edges.len())));
        }
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(e, w)| w.to_matrix(self.k).map_err(|msg| Error::Parse(format!("weight of edge {} ({:?}): {msg}", e + 1, self.edges[e]))))
            .collect::<Result<Vec<_>>>()?;
        // Report indices as they appear in the file.
        MatrixWeightedGraph::new(self.n, self.k, edges, weights, self.timescales).map_err(|e| match e {
            Error::NonSpdWeight { edge } => {
                Error::Parse(format!("weight of edge {} ({:?}) is not symmetric positive definite", edge + 1, self.edges[edge]))
            }
            Error::NonPositiveScale { node, substate } => {
                Error::Parse(format!("time scale of node {}, substate {} must be positive and finite", node + 1, substate + 1))
            }
            Error::DuplicateEdge(a, b) => Error::Parse(format!("duplicate edge [{}, {}]", a + 1, b + 1)),
            Error::SelfLoop(a) => Error::Parse(format!("self-loop at node {}", a + 1)),
            other => other,
        })
    }
}

pub fn parse_graph(text: &str) -> Result<MatrixWeightedGraph> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    file.into_graph()
}

pub fn read_graph(path: &Path) -> Result<MatrixWeightedGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_graph(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn graph_to_json(g: &MatrixWeightedGraph) -> String {
    serde_json::to_string_pretty(&GraphFile::from_graph(g)).expect("graph file serializes")
}

pub fn write_graph(path: &Path, g: &MatrixWeightedGraph) -> std::io::Result<()> {
    std::fs::write(path, graph_to_json(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_flat_and_nested_weights() {
        let text = r#"{"n": 3, "k": 2, "edges": [[1, 2], [2, 3]],
            "weights": [[1, 0, 0, 1], [[2, 0.5], [0.5, 1]]],
            "timescales": [[1, 1], [1, 2], [3, 1]]}"#;
        let g = parse_graph(text).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.weights()[1][(0, 1)], 0.5);
        assert_eq!(g.timescales()[1][1], 2.0);
    }

    #[test]
    fn malformed_weight_names_edge() {
        let text = r#"{"n": 2, "k": 2, "edges": [[1, 2]], "weights": [[1, 0, 1]], "timescales": [[1, 1], [1, 1]]}"#;
        let err = parse_graph(text).unwrap_err().to_string();
        assert!(err.contains("edge 1"), "{err}");
    }

    #[test]
    fn scalar_weights_need_unit_dimension() {
        let g = parse_graph(r#"{"n": 2, "k": 1, "edges": [[1, 2]], "weights": [2.5], "timescales": [[1], [1]]}"#).unwrap();
        assert_eq!(g.weights()[0][(0, 0)], 2.5);
        let err = parse_graph(r#"{"n": 2, "k": 2, "edges": [[1, 2]], "weights": [2.5], "timescales": [[1, 1], [1, 1]]}"#);
        assert!(matches!(err, Err(Error::Parse(_))));
    }

    #[test]
    fn non_spd_weight_reported_one_based() {
        let text = r#"{"n": 3, "k": 1, "edges": [[1, 2], [2, 3]], "weights": [1, -1], "timescales": [[1], [1], [1]]}"#;
        let err = parse_graph(text).unwrap_err().to_string();
        assert!(err.contains("edge 2 ([2, 3])"), "{err}");
    }

    #[test]
    fn zero_based_index_rejected() {
        let text = r#"{"n": 2, "k": 1, "edges": [[0, 1]], "weights": [[1]], "timescales": [[1], [1]]}"#;
        assert!(matches!(parse_graph(text), Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn json_round_trip(ws in proptest::collection::vec(0.1f64..10.0, 3), eps in proptest::collection::vec(0.1f64..10.0, 4)) {
            let weights = ws.iter().map(|&w| Mat::from_element(1, 1, w)).collect();
            let scales = eps.iter().map(|&e| vec![e]).collect();
            let g = MatrixWeightedGraph::new(4, 1, vec![(0, 1), (1, 2), (1, 3)], weights, scales).unwrap();
            let back = parse_graph(&graph_to_json(&g)).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
