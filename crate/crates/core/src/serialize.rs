//! Versioned JSON model documents.
//!
//! A document carries a format version, a model kind tag, the input
//! dimension, and either a flat stump list or recursive tree nodes. Floats
//! are written with round-trip precision, so serialization is bit-exact on
//! every stored real.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Stump, StumpEnsemble, TreeEnsemble, TreeNode};

pub const FORMAT_VERSION: u32 = 1;

/// Either kind of ensemble, for code paths that handle both.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Stumps(StumpEnsemble),
    Trees(TreeEnsemble),
}

impl Model {
    pub fn dimension(&self) -> usize {
        match self {
            Model::Stumps(m) => m.dimension(),
            Model::Trees(m) => m.dimension(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Stumps(_) => "stumps",
            Model::Trees(_) => "trees",
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Stumps(m) => m.evaluate(x),
            Model::Trees(m) => m.evaluate(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    kind: String,
    dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stumps: Option<Vec<StumpDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trees: Option<Vec<NodeDoc>>,
}

#[derive(Serialize, Deserialize)]
struct StumpDoc {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeDoc {
    Split { feature: usize, threshold: f64, left: Box<NodeDoc>, right: Box<NodeDoc> },
    Leaf { leaf: f64 },
}

fn node_to_doc(node: &TreeNode) -> NodeDoc {
    match node {
        TreeNode::Leaf { value } => NodeDoc::Leaf { leaf: *value },
        TreeNode::Split { feature, threshold, left, right } => NodeDoc::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(node_to_doc(left)),
            right: Box::new(node_to_doc(right)),
        },
    }
}

fn node_from_doc(doc: NodeDoc) -> TreeNode {
    match doc {
        NodeDoc::Leaf { leaf } => TreeNode::leaf(leaf),
        NodeDoc::Split { feature, threshold, left, right } => {
            TreeNode::split(feature, threshold, node_from_doc(*left), node_from_doc(*right))
        }
    }
}

pub fn serialize_model(model: &Model) -> Result<String> {
    let doc = match model {
        Model::Stumps(ensemble) => ModelDoc {
            format_version: FORMAT_VERSION,
            kind: "stumps".to_owned(),
            dimension: ensemble.dimension(),
            stumps: Some(
                ensemble
                    .stumps()
                    .iter()
                    .map(|s| StumpDoc {
                        feature: s.feature,
                        threshold: s.threshold,
                        left: s.left_value,
                        right: s.right_value,
                    })
                    .collect(),
            ),
            trees: None,
        },
        Model::Trees(ensemble) => ModelDoc {
            format_version: FORMAT_VERSION,
            kind: "trees".to_owned(),
            dimension: ensemble.dimension(),
            stumps: None,
            trees: Some(ensemble.trees().iter().map(node_to_doc).collect()),
        },
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn deserialize_model(text: &str) -> Result<Model> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {}",
            doc.format_version
        )));
    }
    match doc.kind.as_str() {
        "stumps" => {
            if doc.trees.is_some() {
                return Err(Error::ModelFormat("stumps document carries a trees field".into()));
            }
            let stumps = doc
                .stumps
                .ok_or_else(|| Error::ModelFormat("stumps document missing stumps field".into()))?
                .into_iter()
                .map(|s| {
                    Stump::new(s.feature, s.threshold, s.left, s.right)
                        .map_err(|e| Error::ModelFormat(e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            let ensemble = StumpEnsemble::new(doc.dimension, stumps)
                .map_err(|e| Error::ModelFormat(e.to_string()))?;
            Ok(Model::Stumps(ensemble))
        }
        "trees" => {
            if doc.stumps.is_some() {
                return Err(Error::ModelFormat("trees document carries a stumps field".into()));
            }
            let trees = doc
                .trees
                .ok_or_else(|| Error::ModelFormat("trees document missing trees field".into()))?
                .into_iter()
                .map(node_from_doc)
                .collect();
            let ensemble = TreeEnsemble::new(doc.dimension, trees)
                .map_err(|e| Error::ModelFormat(e.to_string()))?;
            Ok(Model::Trees(ensemble))
        }
        other => Err(Error::ModelFormat(format!("unknown model kind {other:?}"))),
    }
}
