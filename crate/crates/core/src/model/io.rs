use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::PairwiseMrf;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    nodes: Vec<usize>,
    edges: Vec<[usize; 2]>,
    theta_node: Vec<Vec<f64>>,
    theta_edge: Vec<Vec<Vec<f64>>>,
}

/// Parses a model document:
///
/// ```json
/// {"nodes": [2, 2], "edges": [[0, 1]],
///  "theta_node": [[0, 0], [0, 0]], "theta_edge": [[[0, 1], [1, 0]]]}
/// ```
pub fn load_model(bytes: &[u8]) -> Result<PairwiseMrf> {
    let doc: ModelDocument = serde_json::from_slice(bytes).map_err(|e| {
        Error::parse(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let n = doc.nodes.len();
    if n == 0 {
        return Err(Error::parse("nodes", "model has no nodes"));
    }
    for (s, &m) in doc.nodes.iter().enumerate() {
        if m == 0 {
            return Err(Error::parse(
                format!("nodes[{s}]"),
                "cardinality must be positive",
            ));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for (e, &[s, t]) in doc.edges.iter().enumerate() {
        let loc = format!("edges[{e}]");
        if s == t {
            return Err(Error::parse(loc, format!("self-loop on node {s}")));
        }
        if s >= n || t >= n {
            return Err(Error::parse(
                loc,
                format!("dangling node index in [{s}, {t}]"),
            ));
        }
        if s > t {
            return Err(Error::parse(
                loc,
                format!("edge [{s}, {t}] must list the lower index first"),
            ));
        }
        if !seen.insert((s, t)) {
            return Err(Error::parse(loc, format!("duplicate edge [{s}, {t}]")));
        }
    }
    if doc.theta_node.len() != n {
        return Err(Error::parse(
            "theta_node",
            format!(
                "shape mismatch: {} tables for {n} nodes",
                doc.theta_node.len()
            ),
        ));
    }
    for (s, table) in doc.theta_node.iter().enumerate() {
        if table.len() != doc.nodes[s] {
            return Err(Error::parse(
                format!("theta_node[{s}]"),
                format!(
                    "shape mismatch: {} entries, cardinality {}",
                    table.len(),
                    doc.nodes[s]
                ),
            ));
        }
    }
    if doc.theta_edge.len() != doc.edges.len() {
        return Err(Error::parse(
            "theta_edge",
            format!(
                "shape mismatch: {} matrices for {} edges",
                doc.theta_edge.len(),
                doc.edges.len()
            ),
        ));
    }
    let mut theta_edge = Vec::with_capacity(doc.edges.len());
    for (e, rows) in doc.theta_edge.iter().enumerate() {
        let [s, t] = doc.edges[e];
        let (ms, mt) = (doc.nodes[s], doc.nodes[t]);
        if rows.len() != ms || rows.iter().any(|r| r.len() != mt) {
            return Err(Error::parse(
                format!("theta_edge[{e}]"),
                format!("shape mismatch: expected {ms}x{mt} matrix"),
            ));
        }
        theta_edge.push(rows.concat());
    }
    let edges = doc.edges.iter().map(|&[s, t]| (s, t)).collect();
    PairwiseMrf::new(doc.nodes, edges, doc.theta_node, theta_edge)
        .map_err(|e| Error::parse("document", e.to_string()))
}

/// Serializes a model; reals keep full round-trip precision.
pub fn save_model(mrf: &PairwiseMrf) -> Vec<u8> {
    let theta_edge = mrf
        .edges()
        .iter()
        .zip(&mrf.theta().edge)
        .map(|(&(_, t), table)| table.chunks(mrf.card(t)).map(<[f64]>::to_vec).collect())
        .collect();
    let doc = ModelDocument {
        nodes: mrf.cards().to_vec(),
        edges: mrf.edges().iter().map(|&(s, t)| [s, t]).collect(),
        theta_node: mrf.theta().node.clone(),
        theta_edge,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("model document serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = PairwiseMrf::new(
            vec![2, 2, 3],
            vec![(0, 1), (0, 2), (1, 2)],
            vec![
                vec![0.1, -1.0 / 3.0],
                vec![0.0, 1e-300],
                vec![1.0, 2.0, std::f64::consts::PI],
            ],
            vec![
                vec![0.0, 1.0, 1.0, 0.0],
                vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
                vec![-0.7, 0.8, 1.0 / 7.0, 2.0, 3.0, 4.0],
            ],
        )
        .unwrap();
        let back = load_model(&save_model(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn self_loop_rejected() {
        let doc = br#"{"nodes":[2,2],"edges":[[0,0]],"theta_node":[[0,0],[0,0]],"theta_edge":[[[0,0],[0,0]]]}"#;
        let err = load_model(doc).unwrap_err().to_string();
        assert!(err.contains("self-loop"), "{err}");
        assert!(err.contains("edges[0]"), "{err}");
    }

    #[test]
    fn node_shape_rejected() {
        let doc = br#"{"nodes":[2],"edges":[],"theta_node":[[0,0,0]],"theta_edge":[]}"#;
        let err = load_model(doc).unwrap_err().to_string();
        assert!(err.contains("shape"), "{err}");
        assert!(err.contains("theta_node[0]"), "{err}");
    }

    #[test]
    fn malformed_json_has_location() {
        let err = load_model(b"{\"nodes\": [2,\n oops]}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn dangling_edge_rejected() {
        let doc = br#"{"nodes":[2,2],"edges":[[0,5]],"theta_node":[[0,0],[0,0]],"theta_edge":[[[0,0],[0,0]]]}"#;
        assert!(load_model(doc)
            .unwrap_err()
            .to_string()
            .contains("dangling"));
    }
}
