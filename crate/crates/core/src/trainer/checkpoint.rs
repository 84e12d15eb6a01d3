//! Versioned JSON checkpoints.
//!
//! ```text
//! { "format_version": 1, "mode": "lwgan", "p": 2, "d": 5,
//!   "encoder":   { "spec": {...}, "params": [{ "name", "shape", "values" }, ...] },
//!   "generator": { ... },
//!   "critic":    { ... } }
//! ```
//!
//! Sections a mode does not use are omitted. Floats are written in
//! shortest round-trip form and parsed exactly, so a save/load cycle is
//! bitwise lossless.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::{AnyModel, LwganModel, Mode, WaeModel, WganModel};
use crate::nn::{Mlp, MlpSpec, Param};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRecord {
    spec: MlpSpec,
    params: Vec<ParamRecord>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    mode: Mode,
    p: usize,
    d: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    encoder: Option<NetworkRecord>,
    generator: NetworkRecord,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    critic: Option<NetworkRecord>,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
}

impl NetworkRecord {
    fn from_mlp(mlp: &Mlp) -> Self {
        Self {
            spec: mlp.spec.clone(),
            params: mlp
                .params
                .iter()
                .map(|p| ParamRecord {
                    name: p.name.clone(),
                    shape: [p.value.rows(), p.value.cols()],
                    values: p.value.values().to_vec(),
                })
                .collect(),
        }
    }

    fn into_mlp(self) -> Result<Mlp> {
        let params = self
            .params
            .into_iter()
            .map(|r| {
                let value = Tensor::from_vec(r.shape[0], r.shape[1], r.values)
                    .map_err(|e| Error::Checkpoint(format!("parameter `{}`: {e}", r.name)))?;
                Ok(Param { name: r.name, value })
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_params(self.spec, params).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

/// Serialises `model` to the checkpoint JSON text.
pub fn to_json(model: &AnyModel) -> Result<String> {
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        mode: model.mode(),
        p: model.p(),
        d: model.d(),
        encoder: model.encoder().map(NetworkRecord::from_mlp),
        generator: NetworkRecord::from_mlp(model.generator()),
        critic: model.critic().map(NetworkRecord::from_mlp),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses checkpoint JSON text.
pub fn from_json(text: &str) -> Result<AnyModel> {
    let header: Header =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed file: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: header.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let file: CheckpointFile =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed file: {e}")))?;
    let missing = |what: &str| Error::Checkpoint(format!("{} checkpoint lacks the {what} section", file.mode));
    let generator = file.generator.into_mlp()?;
    let model = match file.mode {
        Mode::Lwgan => {
            let encoder = file.encoder.ok_or_else(|| missing("encoder"))?.into_mlp()?;
            let critic = file.critic.ok_or_else(|| missing("critic"))?.into_mlp()?;
            AnyModel::Lwgan(LwganModel::from_parts(encoder, generator, critic)?)
        }
        Mode::Wgan => {
            let critic = file.critic.ok_or_else(|| missing("critic"))?.into_mlp()?;
            AnyModel::Wgan(WganModel::from_parts(generator, critic)?)
        }
        Mode::Wae => {
            let encoder = file.encoder.ok_or_else(|| missing("encoder"))?.into_mlp()?;
            AnyModel::Wae(WaeModel::from_parts(encoder, generator)?)
        }
    };
    if (model.p(), model.d()) != (file.p, file.d) {
        return Err(Error::Checkpoint(format!(
            "header says p = {}, d = {} but networks give p = {}, d = {}",
            file.p,
            file.d,
            model.p(),
            model.d()
        )));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &AnyModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AnyModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
