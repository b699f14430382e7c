//! Versioned JSON container for trained parameters, plus the graph and
//! projection needed to embed new subjects.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ModelShape};
use crate::tensor::Matrix;

pub const CHECKPOINT_FORMAT: &str = "mgnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl NamedMatrix {
    pub fn new(name: &str, m: &Matrix) -> Self {
        Self {
            name: name.into(),
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        }
    }

    fn row_vector(name: &str, v: &[f64]) -> Self {
        Self {
            name: name.into(),
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        Matrix::new(self.rows, self.cols, self.data.clone())
            .map_err(|e| Error::data(format!("checkpoint matrix {:?}: {e}", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub nodes: usize,
    pub modalities: usize,
    pub layer_count: usize,
    pub d_out: usize,
    pub dropout_rate: f64,
    pub train_alpha: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Free-form echo of whatever produced the checkpoint.
    pub config: serde_json::Value,
    pub model: ModelMeta,
    pub matrices: Vec<NamedMatrix>,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams, config: serde_json::Value) -> Self {
        let shape = params.shape();
        let mut matrices: Vec<NamedMatrix> = params
            .layers
            .iter()
            .enumerate()
            .map(|(l, w)| NamedMatrix::new(&format!("layer{l}"), w))
            .collect();
        matrices.push(NamedMatrix::row_vector("alpha", &params.alpha));
        matrices.push(NamedMatrix::new("fcn_weights", &params.fcn_weights));
        matrices.push(NamedMatrix::row_vector("fcn_bias", &params.fcn_bias));
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config,
            model: ModelMeta {
                nodes: shape.nodes,
                modalities: shape.modalities,
                layer_count: shape.layer_count,
                d_out: shape.d_out,
                dropout_rate: params.dropout_rate,
                train_alpha: params.train_alpha,
            },
            matrices,
        }
    }

    /// Attaches an extra matrix (e.g. `u1`, `a_hat`), replacing any of the same name.
    pub fn with_matrix(mut self, name: &str, m: &Matrix) -> Self {
        self.matrices.retain(|x| x.name != name);
        self.matrices.push(NamedMatrix::new(name, m));
        self
    }

    pub fn matrix(&self, name: &str) -> Result<Matrix> {
        self.matrices
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::data(format!("checkpoint has no matrix {name:?}")))?
            .to_matrix()
    }

    fn expect_shape(&self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let m = self.matrix(name)?;
        if m.shape() != (rows, cols) {
            return Err(Error::data(format!(
                "checkpoint matrix {name:?} is {}x{}, model expects {rows}x{cols}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(m)
    }

    pub fn params(&self) -> Result<ModelParams> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::data(format!("not a checkpoint (format {:?})", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::data(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let meta = &self.model;
        let shape = ModelShape::new(meta.nodes, meta.modalities, meta.layer_count, meta.d_out);
        let mut layers = Vec::with_capacity(meta.layer_count);
        let mut in_dim = shape.input_features;
        for l in 0..meta.layer_count {
            layers.push(self.expect_shape(&format!("layer{l}"), in_dim, meta.d_out)?);
            in_dim = meta.d_out;
        }
        let alpha = self.expect_shape("alpha", 1, meta.modalities)?.into_data();
        let fcn_weights = self.expect_shape("fcn_weights", shape.classes, meta.nodes * meta.d_out)?;
        let fcn_bias = self.expect_shape("fcn_bias", 1, shape.classes)?.into_data();
        let params = ModelParams {
            layers,
            alpha,
            fcn_weights,
            fcn_bias,
            dropout_rate: meta.dropout_rate,
            train_alpha: meta.train_alpha,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}
