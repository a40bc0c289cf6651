//! Loader for LINQS-layout citation graphs (Cora, Citeseer, and converted
//! Pubmed): a tab-separated `.content` file of `(node_id, F feature fields,
//! label string)` rows and a `.cites` file of `(cited_id, citing_id)` pairs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Entities with feature vectors, one class label each, and citation edges.
/// The shared knowledge base of the compression experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    pub node_ids: Vec<String>,
    /// N x F; binary indicators or TF-IDF reals depending on the corpus.
    pub features: Tensor<f64>,
    /// Dense class indices in [0, C), assigned in first-seen order.
    pub labels: Vec<usize>,
    /// Directed citation pairs over node indices.
    pub edges: Vec<(usize, usize)>,
    pub class_names: Vec<String>,
}

impl KnowledgeGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_features(&self) -> usize {
        if self.num_nodes() == 0 {
            0
        } else {
            self.features.dim(1)
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Node count per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.num_classes()];
        for &l in &self.labels {
            hist[l] += 1;
        }
        hist
    }
}

/// Loads a citation graph; returns the graph and the number of citation
/// rows dropped because an endpoint had no `.content` row.
pub fn load_linqs_citation(
    content_path: impl AsRef<Path>,
    cites_path: impl AsRef<Path>,
) -> Result<(KnowledgeGraph, usize)> {
    let content_path = content_path.as_ref();
    let cites_path = cites_path.as_ref();
    let content_name = content_path.to_string_lossy();
    let cites_name = cites_path.to_string_lossy();

    let content = fs::read_to_string(content_path)?;
    let mut node_ids = Vec::new();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut num_features: Option<usize> = None;

    for (lineno, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::format(
                &content_name,
                format!("line {}", lineno + 1),
                format!("expected (id, features..., label), got {} fields", fields.len()),
            ));
        }
        let f = fields.len() - 2;
        match num_features {
            None => num_features = Some(f),
            Some(expected) if expected != f => {
                return Err(Error::format(
                    &content_name,
                    format!("line {}", lineno + 1),
                    format!("{f} feature fields, expected {expected}"),
                ));
            }
            _ => {}
        }
        let id = fields[0].to_string();
        if index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(Error::format(
                &content_name,
                format!("line {}", lineno + 1),
                format!("duplicate node id {id}"),
            ));
        }
        for (col, raw) in fields[1..=f].iter().enumerate() {
            let v: f64 = raw.parse().map_err(|_| {
                Error::format(
                    &content_name,
                    format!("line {}", lineno + 1),
                    format!("bad feature value {raw:?} in column {}", col + 1),
                )
            })?;
            features.push(v);
        }
        let label = fields[f + 1].to_string();
        let next = class_names.len();
        let class = *class_index.entry(label.clone()).or_insert_with(|| {
            class_names.push(label);
            next
        });
        labels.push(class);
        node_ids.push(id);
    }

    let n = node_ids.len();
    let f = num_features.unwrap_or(0);

    let cites = fs::read_to_string(cites_path)?;
    let mut edges = Vec::new();
    let mut dropped = 0usize;
    for (lineno, line) in cites.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (a, b) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::format(
                    &cites_name,
                    format!("line {}", lineno + 1),
                    "expected two whitespace-separated ids",
                ));
            }
        };
        match (index.get(a), index.get(b)) {
            (Some(&cited), Some(&citing)) => edges.push((cited, citing)),
            _ => dropped += 1,
        }
    }

    Ok((
        KnowledgeGraph {
            node_ids,
            features: Tensor::new(vec![n, f], features)
                .expect("per-row feature count enforced"),
            labels,
            edges,
            class_names,
        },
        dropped,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn write_fixture(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let content = dir.join("tiny.content");
        let cites = dir.join("tiny.cites");
        std::fs::write(
            &content,
            "paper_a\t1\t0\t1\tml\npaper_b\t0\t1\t0\tdb\npaper_c\t1\t1\t0\tml\n",
        )
        .unwrap();
        // one edge kept, one dangling (paper_x has no content row)
        std::fs::write(&cites, "paper_a\tpaper_b\npaper_x\tpaper_c\n").unwrap();
        (content, cites)
    }

    #[test]
    fn three_node_fixture_with_dangling_edge() {
        let dir = tempfile::tempdir().unwrap();
        let (content, cites) = write_fixture(dir.path());
        let (g, dropped) = load_linqs_citation(&content, &cites).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_features(), 3);
        assert_eq!(g.edges, vec![(0, 1)]);
        assert_eq!(dropped, 1);
        // labels mapped in first-seen order: ml=0, db=1
        assert_eq!(g.class_names, vec!["ml", "db"]);
        assert_eq!(g.labels, vec![0, 1, 0]);
        assert_eq!(g.class_histogram(), vec![2, 1]);
    }

    #[test]
    fn loading_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let (content, cites) = write_fixture(dir.path());
        let a = load_linqs_citation(&content, &cites).unwrap();
        let b = load_linqs_citation(&content, &cites).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let content = dir.path().join("bad.content");
        let cites = dir.path().join("bad.cites");
        std::fs::write(&content, "a\t1\t0\tml\nb\tnotanumber\t1\tdb\n").unwrap();
        std::fs::write(&cites, "").unwrap();
        let err = load_linqs_citation(&content, &cites).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");

        std::fs::write(&content, "a\t1\t0\tml\nb\t1\tdb\n").unwrap();
        let err = load_linqs_citation(&content, &cites).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
