//! Versioned binary model container.
//!
//! ```text
//! magic "RSYNMODL" | version u32 | header length u32 | JSON header
//! | weight count u64 | weights as f32
//! ```
//!
//! All integers and floats are little endian. The JSON header holds the
//! model kind, the architecture and training provenance (weights are not
//! part of it) and free-form metadata.

use radisynth_core::cnn::CnnModel;
use radisynth_core::nn::Network;
use radisynth_core::zprofile::{AeModel, ZCnnModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RSYNMODL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    PixelCnn(CnnModel),
    ZprofileAe(AeModel),
    ZprofileCnn(ZCnnModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PixelCnn,
    ZprofileAe,
    ZprofileCnn,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::PixelCnn => "pixel CNN",
            ModelKind::ZprofileAe => "z-profile autoencoder",
            ModelKind::ZprofileCnn => "z-profile CNN",
        })
    }
}

impl StoredModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            StoredModel::PixelCnn(_) => ModelKind::PixelCnn,
            StoredModel::ZprofileAe(_) => ModelKind::ZprofileAe,
            StoredModel::ZprofileCnn(_) => ModelKind::ZprofileCnn,
        }
    }

    pub fn network(&self) -> &Network {
        match self {
            StoredModel::PixelCnn(m) => &m.net,
            StoredModel::ZprofileAe(m) => &m.net,
            StoredModel::ZprofileCnn(m) => &m.net,
        }
    }

    fn network_mut(&mut self) -> &mut Network {
        match self {
            StoredModel::PixelCnn(m) => &mut m.net,
            StoredModel::ZprofileAe(m) => &mut m.net,
            StoredModel::ZprofileCnn(m) => &mut m.net,
        }
    }

    fn header_model(&self) -> serde_json::Result<serde_json::Value> {
        match self {
            StoredModel::PixelCnn(m) => serde_json::to_value(m),
            StoredModel::ZprofileAe(m) => serde_json::to_value(m),
            StoredModel::ZprofileCnn(m) => serde_json::to_value(m),
        }
    }

    pub fn expect_pixel_cnn(self) -> Result<CnnModel> {
        match self {
            StoredModel::PixelCnn(m) => Ok(m),
            other => Err(wrong_kind(ModelKind::PixelCnn, other.kind())),
        }
    }

    pub fn expect_ae(self) -> Result<AeModel> {
        match self {
            StoredModel::ZprofileAe(m) => Ok(m),
            other => Err(wrong_kind(ModelKind::ZprofileAe, other.kind())),
        }
    }

    pub fn expect_zcnn(self) -> Result<ZCnnModel> {
        match self {
            StoredModel::ZprofileCnn(m) => Ok(m),
            other => Err(wrong_kind(ModelKind::ZprofileCnn, other.kind())),
        }
    }
}

fn wrong_kind(want: ModelKind, got: ModelKind) -> Error {
    Error::Validation(format!("expected a {want} model, found a {got}"))
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    model: serde_json::Value,
    #[serde(default)]
    meta: serde_json::Value,
}

pub fn to_bytes(model: &StoredModel, meta: &serde_json::Value) -> Result<Vec<u8>> {
    let jerr = |e: serde_json::Error| Error::parse("model header", None, e.to_string());
    let header = Header {
        kind: model.kind(),
        model: model.header_model().map_err(jerr)?,
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(jerr)?;
    let params = model.network().flat_params();
    let mut out = Vec::with_capacity(24 + json.len() + 4 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses a container; returns the model with weights loaded and the
/// header metadata.
pub fn from_bytes(bytes: &[u8]) -> Result<(StoredModel, serde_json::Value)> {
    let err = |off: usize, msg: String| Error::parse("model file", Some(off as u64), msg);
    let take = |off: usize, n: usize| -> Result<&[u8]> {
        bytes
            .get(off..off + n)
            .ok_or_else(|| err(bytes.len(), format!("truncated: need {n} bytes at offset {off}")))
    };
    if take(0, 8)? != MAGIC {
        return Err(err(0, "bad magic".into()));
    }
    let version = u32::from_le_bytes(take(8, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(err(8, format!("unsupported container version {version}")));
    }
    let hlen = u32::from_le_bytes(take(12, 4)?.try_into().unwrap()) as usize;
    let header: Header =
        serde_json::from_slice(take(16, hlen)?).map_err(|e| err(16, format!("header JSON: {e}")))?;
    let hv = |e: serde_json::Error| err(16, format!("header model: {e}"));
    let mut model = match header.kind {
        ModelKind::PixelCnn => StoredModel::PixelCnn(serde_json::from_value(header.model).map_err(hv)?),
        ModelKind::ZprofileAe => StoredModel::ZprofileAe(serde_json::from_value(header.model).map_err(hv)?),
        ModelKind::ZprofileCnn => StoredModel::ZprofileCnn(serde_json::from_value(header.model).map_err(hv)?),
    };
    let count_at = 16 + hlen;
    let count = u64::from_le_bytes(take(count_at, 8)?.try_into().unwrap()) as usize;
    let expected = model.network().param_count();
    if count != expected {
        return Err(err(
            count_at,
            format!("payload has {count} weights, architecture needs {expected}"),
        ));
    }
    let payload = take(count_at + 8, 4 * count)?;
    if bytes.len() != count_at + 8 + 4 * count {
        return Err(err(count_at + 8 + 4 * count, "trailing bytes after weights".into()));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    model.network_mut().set_flat_params(&flat)?;
    Ok((model, header.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use radisynth_core::cnn::build;
    use radisynth_core::zprofile::{build_ae, build_zcnn};

    fn rounded(mut m: StoredModel) -> StoredModel {
        m.network_mut().round_to_f32();
        m
    }

    #[test]
    fn every_kind_round_trips() {
        let models = [
            StoredModel::PixelCnn(build(20, 8, 8, 3).unwrap()),
            StoredModel::ZprofileAe(build_ae(16, 4, 3).unwrap()),
            StoredModel::ZprofileCnn(build_zcnn(16, 4, 4, 3).unwrap()),
        ];
        for m in models {
            let meta = serde_json::json!({"tau": 0.5});
            let bytes = to_bytes(&m, &meta).unwrap();
            let (back, meta2) = from_bytes(&bytes).unwrap();
            assert_eq!(back, rounded(m));
            assert_eq!(meta2, meta);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let m = StoredModel::PixelCnn(build(8, 2, 2, 1).unwrap());
        let bytes = to_bytes(&m, &serde_json::Value::Null).unwrap();
        assert!(from_bytes(&bytes[..bytes.len() - 2]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
    }

    #[test]
    fn kind_mismatch_is_a_validation_error() {
        let m = StoredModel::ZprofileAe(build_ae(8, 2, 1).unwrap());
        let e = m.expect_pixel_cnn().unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
