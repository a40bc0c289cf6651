//! Converter from the native Pubmed-Diabetes tab distribution to the
//! LINQS-style `.content`/`.cites` layout the citation loader consumes.
//!
//! Native node file: two header lines (size line, then the feature
//! declaration line whose `numeric:<name>:0.0` entries fix the column
//! order), then one line per paper:
//! `<id>\tlabel=<L>\t<name>=<value>...\tsummary=<text>`.
//! Native cites file: two header lines, then
//! `<edge id>\tpaper:<source>\t|\tpaper:<target>` per line.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const NODE_FILE: &str = "Pubmed-Diabetes.NODE.paper.tab";
pub const CITES_FILE: &str = "Pubmed-Diabetes.DIRECTED.cites.tab";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvertStats {
    pub nodes: usize,
    pub edges: usize,
    pub classes: usize,
}

pub fn convert_pubmed(native_dir: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<ConvertStats> {
    let native_dir = native_dir.as_ref();
    let out_dir = out_dir.as_ref();
    let node_path = native_dir.join(NODE_FILE);
    let cites_path = native_dir.join(CITES_FILE);

    let node_text = fs::read_to_string(&node_path)
        .with_context(|| format!("reading {}", node_path.display()))?;
    let mut lines = node_text.lines().enumerate();
    lines.next(); // size header
    let feature_names: Vec<String> = match lines.next() {
        None => Vec::new(),
        Some((_, decl)) => decl
            .split('\t')
            .filter_map(|entry| {
                entry
                    .strip_prefix("numeric:")
                    .and_then(|rest| rest.rsplit_once(':'))
                    .map(|(name, _)| name.to_string())
            })
            .collect(),
    };
    let column: HashMap<&str, usize> = feature_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut content = String::new();
    let mut labels_seen: Vec<String> = Vec::new();
    let mut nodes = 0usize;
    let mut row = vec![0.0f64; feature_names.len()];
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields
            .next()
            .filter(|s| !s.is_empty())
            .with_context(|| format!("{}:{lineno}: missing paper id", node_path.display()))?;
        let label_field = fields
            .next()
            .with_context(|| format!("{}:{lineno}: missing label field", node_path.display()))?;
        let label = label_field.strip_prefix("label=").with_context(|| {
            format!(
                "{}:{lineno}: expected label=<value>, got {label_field:?}",
                node_path.display()
            )
        })?;
        row.fill(0.0);
        for field in fields {
            if field.starts_with("summary=") || field.is_empty() {
                continue;
            }
            let (name, value) = field.split_once('=').with_context(|| {
                format!(
                    "{}:{lineno}: expected name=value, got {field:?}",
                    node_path.display()
                )
            })?;
            let col = *column.get(name).with_context(|| {
                format!("{}:{lineno}: unknown feature {name:?}", node_path.display())
            })?;
            row[col] = value.parse().with_context(|| {
                format!(
                    "{}:{lineno}: bad numeric value {value:?}",
                    node_path.display()
                )
            })?;
        }
        write!(content, "{id}").unwrap();
        for v in &row {
            write!(content, "\t{v}").unwrap();
        }
        writeln!(content, "\t{label}").unwrap();
        if !labels_seen.iter().any(|l| l == label) {
            labels_seen.push(label.to_string());
        }
        nodes += 1;
    }

    let cites_text = fs::read_to_string(&cites_path)
        .with_context(|| format!("reading {}", cites_path.display()))?;
    let mut cites = String::new();
    let mut edges = 0usize;
    for (idx, line) in cites_text.lines().enumerate().skip(2) {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let endpoints: Vec<&str> = line
            .split('\t')
            .filter_map(|f| f.strip_prefix("paper:"))
            .collect();
        if endpoints.len() != 2 {
            bail!(
                "{}:{lineno}: expected two paper:<id> endpoints, got {line:?}",
                cites_path.display()
            );
        }
        writeln!(cites, "{}\t{}", endpoints[0], endpoints[1]).unwrap();
        edges += 1;
    }

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("pubmed.content"), content)?;
    fs::write(out_dir.join("pubmed.cites"), cites)?;
    Ok(ConvertStats {
        nodes,
        edges,
        classes: labels_seen.len(),
    })
}
