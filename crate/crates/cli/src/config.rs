//! Experiment configuration: JSON file, flag overrides and the resolved form
//! embedded in every output.

use std::path::Path;

use ratdyn::bifurcation::FamilySpec;
use ratdyn::RationalMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::exit::Failure;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<RationalMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    /// Seeds every sampler used by the subcommand.
    #[serde(default)]
    pub seed: u64,
    /// JSON report destination; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Subcommand parameters, including tolerance overrides.
    #[serde(default)]
    pub params: Value,
}

impl ExperimentConfig {
    pub fn map(&self) -> Result<&RationalMap, Failure> {
        self.map.as_ref().ok_or_else(|| Failure::usage("config has no \"map\" ({\"p\": [[re, im], ...], \"q\": [...]})"))
    }

    pub fn family(&self) -> Result<&FamilySpec, Failure> {
        self.family.as_ref().ok_or_else(|| Failure::usage("config has no \"family\""))
    }

    /// Typed parameters with defaults filled in.
    pub fn params<P: DeserializeOwned + Serialize>(&self) -> Result<P, Failure> {
        let v = if self.params.is_null() { Value::Object(Map::new()) } else { self.params.clone() };
        let p: P = serde_json::from_value(v.clone()).map_err(|e| Failure::usage(format!("params: {e}")))?;
        // flattened parameter groups cannot deny unknown fields themselves
        let known = serde_json::to_value(&p).expect("parameters serialize");
        if let (Some(given), Some(known)) = (v.as_object(), known.as_object()) {
            if let Some(k) = given.iter().find(|(k, v)| !v.is_null() && !known.contains_key(*k)).map(|(k, _)| k) {
                return Err(Failure::usage(format!("params: unknown field `{k}`")));
            }
        }
        Ok(p)
    }

    /// The config as embedded in outputs: resolved parameters, no output paths.
    pub fn resolved<P: Serialize>(&self, params: &P) -> Value {
        let mut c = self.clone();
        c.out = None;
        c.csv = None;
        c.params = serde_json::to_value(params).expect("parameters serialize");
        serde_json::to_value(c).expect("config serializes")
    }
}

/// Reads the config file (if any) and applies `key=value` overrides, where
/// `key` is a dotted path and `value` is JSON or a bare string.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, Failure> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !root.is_object() {
        return Err(Failure::usage("config must be a JSON object"));
    }
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| Failure::usage(format!("override {o:?} is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut root, key, value)?;
    }
    if root.as_object().is_some_and(Map::is_empty) {
        return Err(Failure::usage("config is empty; pass --config FILE or --set key=value (see --help)"));
    }
    serde_json::from_value(root).map_err(|e| Failure::usage(format!("config: {e}")))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), Failure> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Failure::usage(format!("bad override key {key:?}")));
        }
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
        let Some(obj) = cur.as_object_mut() else {
            return Err(Failure::usage(format!("override {key:?} descends into a non-object")));
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// SHA-256 of the compact JSON form.
pub fn hash(v: &Value) -> String {
    let digest = Sha256::digest(serde_json::to_string(v).expect("value serializes").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
