//! Binary model container.
//!
//! Layout: the magic `GRA1`, a little-endian `u32` format version, a
//! little-endian `u64` manifest length, the JSON manifest, then the payload of
//! little-endian `f32` arrays described by the manifest's array table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::GbtModel;
use crate::error::{Error, Result};
use crate::gra::{Autoencoder, GraModel};
use crate::nn::{LayerSpec, LayerStack};
use crate::preprocess::{FeatureSchema, ScalerParams};

pub const MAGIC: &[u8; 4] = b"GRA1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    /// Byte offset into the payload.
    pub offset: u64,
    /// Length in bytes.
    pub length: u64,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackMeta {
    pub input_shape: Vec<usize>,
    pub specs: Vec<LayerSpec>,
    pub freeze_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub schema: Option<FeatureSchema>,
    pub scaler: Option<ScalerParams>,
    pub stacks: BTreeMap<String, StackMeta>,
    pub arrays: Vec<ArrayEntry>,
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gra(GraModel),
    Gbt(GbtModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Gra(_) => "gra",
            Model::Gbt(_) => "gbt",
        }
    }
}

#[derive(Default)]
struct Payload {
    bytes: Vec<u8>,
    arrays: Vec<ArrayEntry>,
}

impl Payload {
    fn push(&mut self, name: String, shape: Vec<usize>, values: &[f64]) {
        let offset = self.bytes.len() as u64;
        for v in values {
            self.bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        self.arrays.push(ArrayEntry { name, offset, length: 4 * values.len() as u64, shape });
    }

    fn push_stack(&mut self, prefix: &str, stack: &LayerStack, stacks: &mut BTreeMap<String, StackMeta>) {
        for (i, layer) in stack.layers.iter().enumerate() {
            if !layer.params.is_empty() {
                self.push(format!("{prefix}.layer{}", i + 1), vec![layer.params.len()], &layer.params);
            }
        }
        stacks.insert(
            prefix.to_string(),
            StackMeta { input_shape: stack.input_shape.clone(), specs: stack.specs(), freeze_mask: stack.freeze_mask.clone() },
        );
    }
}

#[derive(Serialize, Deserialize)]
struct GraMeta {
    dx_columns: Vec<u64>,
    med_columns: Vec<u64>,
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let mut payload = Payload::default();
    let mut stacks = BTreeMap::new();
    let manifest = match model {
        Model::Gra(m) => {
            for (name, ae) in [("dx_ae", &m.dx_ae), ("med_ae", &m.med_ae)] {
                payload.push_stack(name, &ae.stack, &mut stacks);
                payload.push(format!("{name}.code_mean"), vec![ae.code_mean.len()], &ae.code_mean);
                payload.push(format!("{name}.code_sd"), vec![ae.code_sd.len()], &ae.code_sd);
            }
            payload.push_stack("cnn", &m.cnn, &mut stacks);
            Manifest {
                kind: "gra".into(),
                schema: Some(m.schema.clone()),
                scaler: Some(m.scaler.clone()),
                stacks,
                arrays: payload.arrays,
                meta: serde_json::to_value(GraMeta {
                    dx_columns: m.dx_ae.columns.clone(),
                    med_columns: m.med_ae.columns.clone(),
                })?,
            }
        }
        Model::Gbt(g) => Manifest {
            kind: "gbt".into(),
            schema: None,
            scaler: None,
            stacks,
            arrays: Vec::new(),
            meta: serde_json::to_value(g)?,
        },
    };
    Ok(write_container(&manifest, &payload.bytes))
}

/// Assemble raw container bytes.
pub fn write_container(manifest: &Manifest, payload: &[u8]) -> Vec<u8> {
    let json = serde_json::to_vec(manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    out
}

/// Split container bytes into manifest and payload, checking the header and
/// the array table.
pub fn read_container(bytes: &[u8]) -> Result<(Manifest, Vec<u8>)> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let end = 16usize
        .checked_add(usize::try_from(len).map_err(|_| Error::Format("manifest length overflow".into()))?)
        .filter(|e| *e <= bytes.len())
        .ok_or_else(|| Error::Format("manifest length exceeds file".into()))?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes[16..end]).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let payload = bytes[end..].to_vec();
    check_arrays(&manifest.arrays, payload.len() as u64)?;
    Ok((manifest, payload))
}

fn check_arrays(arrays: &[ArrayEntry], payload_len: u64) -> Result<()> {
    let mut spans: Vec<(u64, u64, &str)> = Vec::with_capacity(arrays.len());
    for a in arrays {
        let n: usize = a.shape.iter().product();
        let end = a.offset.checked_add(a.length);
        if a.length != 4 * n as u64 || end.is_none_or(|e| e > payload_len) {
            return Err(Error::Format(format!(
                "array `{}` at offset {} with length {} does not fit the payload of {payload_len} bytes",
                a.name, a.offset, a.length
            )));
        }
        spans.push((a.offset, a.offset + a.length, &a.name));
    }
    spans.sort();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Format(format!("arrays `{}` and `{}` overlap", w[0].2, w[1].2)));
        }
    }
    if spans.iter().map(|s| s.1 - s.0).sum::<u64>() != payload_len {
        return Err(Error::Format("payload has bytes not covered by the array table".into()));
    }
    Ok(())
}

fn array(manifest: &Manifest, payload: &[u8], name: &str) -> Result<Vec<f64>> {
    let a = manifest
        .arrays
        .iter()
        .find(|a| a.name == name)
        .ok_or_else(|| Error::Format(format!("missing array `{name}`")))?;
    let bytes = &payload[a.offset as usize..(a.offset + a.length) as usize];
    Ok(bytes.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect())
}

fn load_stack(manifest: &Manifest, payload: &[u8], prefix: &str) -> Result<LayerStack> {
    let meta = manifest.stacks.get(prefix).ok_or_else(|| Error::Format(format!("missing stack `{prefix}`")))?;
    let mut params = Vec::with_capacity(meta.specs.len());
    for (i, spec) in meta.specs.iter().enumerate() {
        params.push(if spec.has_params() { array(manifest, payload, &format!("{prefix}.layer{}", i + 1))? } else { Vec::new() });
    }
    let mut stack = LayerStack::from_parts(&meta.specs, &meta.input_shape, params)
        .map_err(|e| Error::Format(format!("stack `{prefix}`: {e}")))?;
    if meta.freeze_mask.len() != stack.len() {
        return Err(Error::Format(format!("stack `{prefix}` freeze mask length")));
    }
    stack.freeze_mask = meta.freeze_mask.clone();
    Ok(stack)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    let (manifest, payload) = read_container(bytes)?;
    match manifest.kind.as_str() {
        "gra" => {
            let meta: GraMeta =
                serde_json::from_value(manifest.meta.clone()).map_err(|e| Error::Format(format!("gra meta: {e}")))?;
            let ae = |name: &str, columns: Vec<u64>| -> Result<Autoencoder> {
                Ok(Autoencoder {
                    stack: load_stack(&manifest, &payload, name)?,
                    columns,
                    code_mean: array(&manifest, &payload, &format!("{name}.code_mean"))?,
                    code_sd: array(&manifest, &payload, &format!("{name}.code_sd"))?,
                })
            };
            let schema = manifest.schema.clone().ok_or_else(|| Error::Format("gra checkpoint without schema".into()))?;
            let scaler = manifest.scaler.clone().ok_or_else(|| Error::Format("gra checkpoint without scaler".into()))?;
            Ok(Model::Gra(GraModel {
                dx_ae: ae("dx_ae", meta.dx_columns)?,
                med_ae: ae("med_ae", meta.med_columns)?,
                cnn: load_stack(&manifest, &payload, "cnn")?,
                schema,
                scaler,
            }))
        }
        "gbt" => {
            let m: GbtModel =
                serde_json::from_value(manifest.meta).map_err(|e| Error::Format(format!("gbt model: {e}")))?;
            m.validate()?;
            Ok(Model::Gbt(m))
        }
        other => Err(Error::Format(format!("unknown model kind `{other}`"))),
    }
}

pub fn save(path: &Path, model: &Model) -> Result<()> {
    std::fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    from_bytes(&std::fs::read(path)?)
}
