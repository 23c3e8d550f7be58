//! The product-space network: co-export proximities, row-normalized
//! weights, the thresholded view used for visualization and its export.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ingest::CodeIndex;
use crate::numfmt::fmt;
use crate::rca::AdvantageMatrix;
use crate::{Error, Result};

/// Symmetric product × product proximities in [0, 1] with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    pub values: DMatrix<f64>,
}

/// Row-normalized proximities. Rows of isolated products are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix {
    pub values: DMatrix<f64>,
}

/// Minimum of the two conditional co-advantage frequencies for every
/// product pair, estimated across the countries of a binary `m`.
pub fn compute_proximity(m: &AdvantageMatrix) -> Result<ProximityMatrix> {
    if !m.is_binary() {
        return Err(Error::InvalidInput(
            "proximity requires a binary advantage matrix".into(),
        ));
    }
    let ubiquity = m.ubiquity();
    let co = m.values.tr_mul(&m.values);
    let n = co.nrows();
    let values = DMatrix::from_fn(n, n, |l, k| {
        let denom = ubiquity[l].max(ubiquity[k]);
        if l == k || ubiquity[l] == 0.0 || ubiquity[k] == 0.0 {
            0.0
        } else {
            // min(co/u_l, co/u_k) == co / max(u_l, u_k)
            co[(l, k)] / denom
        }
    });
    Ok(ProximityMatrix { values })
}

/// Entrywise mean of per-year proximity matrices.
pub fn pool_proximity(yearly: &[ProximityMatrix]) -> Result<ProximityMatrix> {
    let first = yearly
        .first()
        .ok_or_else(|| Error::InvalidInput("no proximity matrices to pool".into()))?;
    let mut sum = DMatrix::zeros(first.values.nrows(), first.values.ncols());
    for y in yearly {
        if y.values.shape() != sum.shape() {
            return Err(Error::InvalidInput(
                "proximity matrices have different shapes".into(),
            ));
        }
        sum += &y.values;
    }
    Ok(ProximityMatrix {
        values: sum / yearly.len() as f64,
    })
}

pub fn normalize_weights(y: &ProximityMatrix) -> PhiMatrix {
    let mut values = y.values.clone();
    for mut row in values.row_iter_mut() {
        let total = row.sum();
        if total > 0.0 {
            row /= total;
        } else {
            row.fill(0.0);
        }
    }
    PhiMatrix { values }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub code: String,
    pub ppi: Option<f64>,
    pub eigenpoverty: Option<f64>,
    /// Share of world exports.
    pub trade_share: Option<f64>,
    pub pci: Option<f64>,
    pub cluster: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Undirected product graph; each edge is stored once with `source < target`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProductSpaceGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// Keeps every product as a node and the pairs with proximity strictly
/// above `threshold` as edges.
pub fn filter_graph(
    y: &ProximityMatrix,
    threshold: f64,
    products: &CodeIndex,
) -> Result<ProductSpaceGraph> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "graph threshold must be nonnegative, got {threshold}"
        )));
    }
    let n = y.values.nrows();
    if products.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} product codes for a {n}x{n} proximity matrix",
            products.len()
        )));
    }
    let nodes = products
        .codes()
        .iter()
        .map(|code| GraphNode {
            code: code.clone(),
            ..Default::default()
        })
        .collect();
    let mut edges = Vec::new();
    for l in 0..n {
        for k in (l + 1)..n {
            let w = y.values[(l, k)];
            if w > threshold {
                edges.push(GraphEdge {
                    source: l,
                    target: k,
                    weight: w,
                });
            }
        }
    }
    Ok(ProductSpaceGraph { nodes, edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    Graphml,
    Dot,
    EdgeCsv,
}

impl GraphFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Graphml => "graphml",
            GraphFormat::Dot => "dot",
            GraphFormat::EdgeCsv => "csv",
        }
    }
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "graphml" => Ok(GraphFormat::Graphml),
            "dot" => Ok(GraphFormat::Dot),
            "csv" | "edge-csv" => Ok(GraphFormat::EdgeCsv),
            other => Err(Error::Config(format!("unknown graph format '{other}'"))),
        }
    }
}

/// Node attributes that can be exported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeAttribute {
    Ppi,
    /// Square root of the PPI, the scale used for heat-map coloring.
    PpiSqrt,
    Eigenpoverty,
    TradeShare,
    Pci,
    Cluster,
}

impl NodeAttribute {
    pub const ALL: [NodeAttribute; 6] = [
        NodeAttribute::Ppi,
        NodeAttribute::PpiSqrt,
        NodeAttribute::Eigenpoverty,
        NodeAttribute::TradeShare,
        NodeAttribute::Pci,
        NodeAttribute::Cluster,
    ];

    pub fn key(self) -> &'static str {
        match self {
            NodeAttribute::Ppi => "ppi",
            NodeAttribute::PpiSqrt => "ppi_sqrt",
            NodeAttribute::Eigenpoverty => "eigenpoverty",
            NodeAttribute::TradeShare => "trade_share",
            NodeAttribute::Pci => "pci",
            NodeAttribute::Cluster => "cluster",
        }
    }

    fn is_numeric(self) -> bool {
        self != NodeAttribute::Cluster
    }

    fn value(self, node: &GraphNode) -> Option<String> {
        match self {
            NodeAttribute::Ppi => node.ppi.map(fmt),
            NodeAttribute::PpiSqrt => node.ppi.map(|v| fmt(v.sqrt())),
            NodeAttribute::Eigenpoverty => node.eigenpoverty.map(fmt),
            NodeAttribute::TradeShare => node.trade_share.map(fmt),
            NodeAttribute::Pci => node.pci.map(fmt),
            NodeAttribute::Cluster => node.cluster.clone(),
        }
    }
}

impl ProductSpaceGraph {
    /// Attributes set on every node.
    pub fn complete_attributes(&self) -> Vec<NodeAttribute> {
        NodeAttribute::ALL
            .into_iter()
            .filter(|a| self.nodes.iter().all(|n| a.value(n).is_some()))
            .collect()
    }

    /// Number of retained edges touching each node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.source] += 1;
            deg[e.target] += 1;
        }
        deg
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Writes the graph with the requested node attributes.
pub fn export_graph<W: Write>(
    g: &ProductSpaceGraph,
    format: GraphFormat,
    attributes: &[NodeAttribute],
    mut w: W,
) -> Result<()> {
    for a in attributes {
        if let Some(node) = g.nodes.iter().find(|n| a.value(n).is_none()) {
            return Err(Error::InvalidInput(format!(
                "attribute '{}' missing on node {}",
                a.key(),
                node.code
            )));
        }
    }
    let text = match format {
        GraphFormat::Graphml => graphml(g, attributes),
        GraphFormat::Dot => dot(g, attributes),
        GraphFormat::EdgeCsv => edge_csv(g),
    };
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io("<graph writer>", e))
}

fn graphml(g: &ProductSpaceGraph, attributes: &[NodeAttribute]) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for a in attributes {
        let ty = if a.is_numeric() { "double" } else { "string" };
        let _ = writeln!(
            s,
            "  <key id=\"{k}\" for=\"node\" attr.name=\"{k}\" attr.type=\"{ty}\"/>",
            k = a.key()
        );
    }
    s.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    s.push_str("  <graph id=\"product_space\" edgedefault=\"undirected\">\n");
    for node in &g.nodes {
        let _ = write!(s, "    <node id=\"{}\">", xml_escape(&node.code));
        for a in attributes {
            let v = a.value(node).unwrap();
            let _ = write!(s, "<data key=\"{}\">{}</data>", a.key(), xml_escape(&v));
        }
        s.push_str("</node>\n");
    }
    for e in &g.edges {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{}</data></edge>",
            xml_escape(&g.nodes[e.source].code),
            xml_escape(&g.nodes[e.target].code),
            fmt(e.weight)
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

fn dot(g: &ProductSpaceGraph, attributes: &[NodeAttribute]) -> String {
    let mut s = String::from("graph product_space {\n");
    for node in &g.nodes {
        let _ = write!(s, "  {}", dot_quote(&node.code));
        if !attributes.is_empty() {
            let attrs: Vec<String> = attributes
                .iter()
                .map(|a| format!("{}={}", a.key(), dot_quote(&a.value(node).unwrap())))
                .collect();
            let _ = write!(s, " [{}]", attrs.join(", "));
        }
        s.push_str(";\n");
    }
    for e in &g.edges {
        let w = fmt(e.weight);
        let _ = writeln!(
            s,
            "  {} -- {} [weight={w}, label=\"{w}\"];",
            dot_quote(&g.nodes[e.source].code),
            dot_quote(&g.nodes[e.target].code)
        );
    }
    s.push_str("}\n");
    s
}

fn edge_csv(g: &ProductSpaceGraph) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["source", "target", "weight"]).unwrap();
    for e in &g.edges {
        wtr.write_record([
            g.nodes[e.source].code.as_str(),
            g.nodes[e.target].code.as_str(),
            &fmt(e.weight),
        ])
        .unwrap();
    }
    String::from_utf8(wtr.into_inner().unwrap()).unwrap()
}
