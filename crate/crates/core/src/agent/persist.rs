//! Weight files.
//!
//! Binary layout: the 8 magic bytes `QRAMA2C\0`, a little-endian `u32` header length,
//! the UTF-8 JSON header, then every parameter as a little-endian `f64`. Layers are
//! stored in [`LAYER_NAMES`] order, each as its row-major `outputs x inputs` weights
//! followed by its biases. A path ending in `.json` holds the header alone with the
//! same payload bytes base64-encoded under `payload_base64`.

use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::net::{AgentParams, NetShape, LAYER_NAMES};
use crate::error::{QramError, Result};
use crate::problem::{ConfigSpace, ResourceBounds};

pub const MAGIC: &[u8; 8] = b"QRAMA2C\0";
pub const FORMAT_VERSION: u32 = 1;

/// Trained parameters with the action space and the bounds they were trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentModel {
    pub params: AgentParams,
    pub space: ConfigSpace,
    pub training_bounds: ResourceBounds,
}

impl AgentModel {
    pub fn new(params: AgentParams, space: ConfigSpace, training_bounds: ResourceBounds) -> Result<Self> {
        if params.shape.actions != space.len() {
            return Err(QramError::contract(format!(
                "network has {} actions, space has {} configurations",
                params.shape.actions,
                space.len()
            )));
        }
        Ok(AgentModel { params, space, training_bounds })
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    name: String,
    inputs: usize,
    outputs: usize,
    activation: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: u32,
    kind: String,
    shape: NetShape,
    layers: Vec<LayerDoc>,
    config_space: ConfigSpace,
    training_bounds: ResourceBounds,
    payload: String,
    parameter_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload_base64: Option<String>,
}

const KIND: &str = "split-input-actor-critic";
const PAYLOAD: &str = "f64-le";

fn activation(name: &str) -> &'static str {
    match name {
        "policy" | "value" => "linear",
        _ => "relu",
    }
}

fn header(model: &AgentModel) -> Header {
    let layers = LAYER_NAMES
        .iter()
        .zip(model.params.layers())
        .map(|(name, l)| LayerDoc {
            name: name.to_string(),
            inputs: l.inputs,
            outputs: l.outputs,
            activation: activation(name).to_string(),
        })
        .collect();
    Header {
        format: FORMAT_VERSION,
        kind: KIND.to_string(),
        shape: model.params.shape,
        layers,
        config_space: model.space.clone(),
        training_bounds: model.training_bounds.clone(),
        payload: PAYLOAD.to_string(),
        parameter_count: model.params.param_count(),
        payload_base64: None,
    }
}

fn payload(params: &AgentParams) -> Vec<u8> {
    params.params().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn encode_binary(model: &AgentModel) -> Result<Vec<u8>> {
    let head = serde_json::to_vec(&header(model))?;
    let len = u32::try_from(head.len()).map_err(|_| QramError::contract("header too large"))?;
    let mut out = Vec::with_capacity(12 + head.len() + 8 * model.params.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&head);
    out.extend_from_slice(&payload(&model.params));
    Ok(out)
}

pub fn encode_json(model: &AgentModel) -> Result<String> {
    let mut h = header(model);
    h.payload_base64 = Some(base64::engine::general_purpose::STANDARD.encode(payload(&model.params)));
    Ok(serde_json::to_string_pretty(&h)?)
}

fn load_err(msg: impl Into<String>) -> QramError {
    QramError::Load(msg.into())
}

fn rebuild(h: Header, bytes: &[u8]) -> Result<AgentModel> {
    if h.format != FORMAT_VERSION {
        return Err(load_err(format!("unsupported weight format {}", h.format)));
    }
    if h.kind != KIND || h.payload != PAYLOAD {
        return Err(load_err(format!("unknown network kind {:?} / payload {:?}", h.kind, h.payload)));
    }
    if h.shape.actions != h.config_space.len() {
        return Err(load_err(format!(
            "network has {} actions but the stored space has {} configurations",
            h.shape.actions,
            h.config_space.len()
        )));
    }
    let mut params = AgentParams::zeros(h.shape);
    let expected: Vec<(&str, usize, usize)> = LAYER_NAMES.iter().zip(params.layers()).map(|(n, l)| (*n, l.inputs, l.outputs)).collect();
    let stored: Vec<(&str, usize, usize)> = h.layers.iter().map(|l| (l.name.as_str(), l.inputs, l.outputs)).collect();
    if expected != stored || h.layers.iter().any(|l| l.activation != activation(&l.name)) {
        return Err(load_err("layer table does not match the declared shape"));
    }
    let count = params.param_count();
    if h.parameter_count != count || bytes.len() != 8 * count {
        return Err(load_err(format!("expected {count} parameters, payload holds {} bytes", bytes.len())));
    }
    for (slot, chunk) in params.params_mut().zip(bytes.chunks_exact(8)) {
        *slot = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    if params.params().any(|x| !x.is_finite()) {
        return Err(load_err("non-finite weight in payload"));
    }
    Ok(AgentModel { params, space: h.config_space, training_bounds: h.training_bounds })
}

pub fn decode_binary(bytes: &[u8]) -> Result<AgentModel> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(load_err("not a weight file (bad magic)"));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() < len {
        return Err(load_err("truncated header"));
    }
    let h: Header = serde_json::from_slice(&body[..len]).map_err(|e| load_err(format!("bad header: {e}")))?;
    if h.payload_base64.is_some() {
        return Err(load_err("binary file carries an inline payload"));
    }
    rebuild(h, &body[len..])
}

pub fn decode_json(text: &str) -> Result<AgentModel> {
    let mut h: Header = serde_json::from_str(text).map_err(|e| load_err(format!("bad header: {e}")))?;
    let encoded = h.payload_base64.take().ok_or_else(|| load_err("missing payload_base64"))?;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(encoded)
        .map_err(|e| load_err(format!("bad base64 payload: {e}")))?;
    rebuild(h, &bytes)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn save(model: &AgentModel, path: &Path) -> Result<()> {
    if is_json(path) {
        std::fs::write(path, encode_json(model)?)?;
    } else {
        std::fs::write(path, encode_binary(model)?)?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<AgentModel> {
    let bytes = std::fs::read(path)?;
    if is_json(path) {
        let text = std::str::from_utf8(&bytes).map_err(|e| load_err(format!("weight file is not UTF-8: {e}")))?;
        decode_json(text)
    } else {
        decode_binary(&bytes)
    }
}
