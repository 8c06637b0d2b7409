//! Versioned, checksummed model documents.
//!
//! ```json
//! { "format_version": "1.0", "checksum": "<sha256 hex>", "model": { ... } }
//! ```
//!
//! The checksum covers the `model` object serialized with sorted keys, so
//! documents from later 1.x writers that add fields still verify.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{NamedDag, NetworkSchema};
use crate::params::{FamilyPosterior, ParameterPosterior};

pub const MODEL_FORMAT_VERSION: &str = "1.0";
pub const MODEL_FORMAT_MAJOR: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FamilyDoc {
    node: String,
    parents: Vec<String>,
    prior: Vec<f64>,
    counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelBody {
    schema: NetworkSchema,
    dag: NamedDag,
    alpha: f64,
    provenance: Vec<String>,
    families: Vec<FamilyDoc>,
}

fn canonical(model: &Value) -> Result<String> {
    // serde_json's default map is ordered by key
    Ok(serde_json::to_string(model)?)
}

pub fn content_checksum(model: &Value) -> Result<String> {
    Ok(hex::encode(Sha256::digest(canonical(model)?.as_bytes())))
}

fn body_of(post: &ParameterPosterior) -> ModelBody {
    let schema = post.schema();
    ModelBody {
        schema: schema.clone(),
        dag: post.dag().to_named(schema),
        alpha: post.alpha(),
        provenance: post.provenance().to_vec(),
        families: post
            .families()
            .iter()
            .map(|f| FamilyDoc {
                node: schema.name(f.node).to_owned(),
                parents: f.parents.iter().map(|&p| schema.name(p).to_owned()).collect(),
                prior: f.prior.clone(),
                counts: f.counts.clone(),
            })
            .collect(),
    }
}

/// JSON text of the model document.
pub fn save_model(post: &ParameterPosterior) -> Result<String> {
    let model = serde_json::to_value(body_of(post))?;
    let checksum = content_checksum(&model)?;
    let mut doc = serde_json::Map::new();
    doc.insert("format_version".into(), Value::String(MODEL_FORMAT_VERSION.into()));
    doc.insert("checksum".into(), Value::String(checksum));
    doc.insert("model".into(), model);
    Ok(serde_json::to_string_pretty(&Value::Object(doc))?)
}

/// Checksum a saved document would carry, without writing it.
pub fn model_checksum(post: &ParameterPosterior) -> Result<String> {
    content_checksum(&serde_json::to_value(body_of(post))?)
}

pub fn load_model(text: &str) -> Result<ParameterPosterior> {
    let doc: Value = serde_json::from_str(text)?;
    let version = doc
        .get("format_version")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Version {
            found: "<absent>".into(),
            expected: MODEL_FORMAT_MAJOR,
        })?;
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major != Some(MODEL_FORMAT_MAJOR) {
        return Err(Error::Version {
            found: version.to_owned(),
            expected: MODEL_FORMAT_MAJOR,
        });
    }
    let model = doc
        .get("model")
        .ok_or_else(|| Error::contract("model document has no `model` object"))?;
    let stored = doc.get("checksum").and_then(Value::as_str).unwrap_or_default();
    let computed = content_checksum(model)?;
    if stored != computed {
        return Err(Error::Checksum {
            stored: stored.to_owned(),
            computed,
        });
    }
    let body: ModelBody = serde_json::from_value(model.clone())?;
    let schema = body.schema;
    let dag = body.dag.to_dag(&schema)?;
    let families = body
        .families
        .into_iter()
        .map(|f| {
            let node = schema.require(&f.node)?;
            let mut parents = f
                .parents
                .iter()
                .map(|p| schema.require(p))
                .collect::<Result<Vec<_>>>()?;
            parents.sort_unstable();
            Ok(FamilyPosterior {
                node,
                parents,
                cardinality: schema.cardinality(node),
                prior: f.prior,
                counts: f.counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ParameterPosterior::from_parts(schema, dag, body.alpha, families, body.provenance)
}

pub fn save_model_path(path: &Path, post: &ParameterPosterior) -> Result<()> {
    fs::write(path, save_model(post)?).map_err(|e| with_path(e, path))
}

pub fn load_model_path(path: &Path) -> Result<ParameterPosterior> {
    load_model(&fs::read_to_string(path).map_err(|e| with_path(e, path))?)
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}
