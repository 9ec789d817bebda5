//! On-disk model format: one JSON document holding the encoder grid size and
//! every parameter tensor in f64, independent of the in-memory scalar width.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

use super::gru::{GruCell, GruParams, O_CLASSES, X_CLASSES, Y_CLASSES};
use super::EncoderConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("tensor {name} claims {rows}x{cols} but holds {len} values")]
    BadShape { name: &'static str, rows: usize, cols: usize, len: usize },
    #[error("tensor {name} is {rows}x{cols}, expected {want_rows}x{want_cols}")]
    WrongDims { name: &'static str, rows: usize, cols: usize, want_rows: usize, want_cols: usize },
}

/// One dense tensor; vectors use a single column.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorData {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TensorData {
    fn of_matrix<T: Real>(m: &Array2<T>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().map(|&v| v.to_f64_lossy()).collect(),
        }
    }

    fn of_vector<T: Real>(v: &Array1<T>) -> Self {
        Self { rows: v.len(), cols: 1, data: v.iter().map(|&v| v.to_f64_lossy()).collect() }
    }

    fn check(&self, name: &'static str) -> Result<(), CheckpointError> {
        if self.data.len() != self.rows * self.cols {
            return Err(CheckpointError::BadShape {
                name,
                rows: self.rows,
                cols: self.cols,
                len: self.data.len(),
            });
        }
        Ok(())
    }

    fn expect(
        &self,
        name: &'static str,
        rows: usize,
        cols: usize,
    ) -> Result<(), CheckpointError> {
        self.check(name)?;
        if self.rows != rows || self.cols != cols {
            return Err(CheckpointError::WrongDims {
                name,
                rows: self.rows,
                cols: self.cols,
                want_rows: rows,
                want_cols: cols,
            });
        }
        Ok(())
    }

    fn matrix<T: Real>(&self) -> Array2<T> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.iter().map(|&v| T::of(v)).collect())
            .expect("shape checked before conversion")
    }

    fn vector<T: Real>(&self) -> Array1<T> {
        Array1::from_iter(self.data.iter().map(|&v| T::of(v)))
    }
}

/// The serialized model: dimensions plus all twelve tensors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub grid: usize,
    w_z: TensorData,
    u_z: TensorData,
    b_z: TensorData,
    w_r: TensorData,
    u_r: TensorData,
    b_r: TensorData,
    w_c: TensorData,
    u_c: TensorData,
    b_c: TensorData,
    dec_x: TensorData,
    dec_y: TensorData,
    dec_o: TensorData,
}

impl Checkpoint {
    pub fn from_params<T: Real>(params: &GruParams<T>, enc: &EncoderConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            input_dim: params.input_dim(),
            hidden_dim: params.hidden_dim(),
            grid: enc.grid,
            w_z: TensorData::of_matrix(&params.cell.w_z),
            u_z: TensorData::of_matrix(&params.cell.u_z),
            b_z: TensorData::of_vector(&params.cell.b_z),
            w_r: TensorData::of_matrix(&params.cell.w_r),
            u_r: TensorData::of_matrix(&params.cell.u_r),
            b_r: TensorData::of_vector(&params.cell.b_r),
            w_c: TensorData::of_matrix(&params.cell.w_c),
            u_c: TensorData::of_matrix(&params.cell.u_c),
            b_c: TensorData::of_vector(&params.cell.b_c),
            dec_x: TensorData::of_matrix(&params.dec_x),
            dec_y: TensorData::of_matrix(&params.dec_y),
            dec_o: TensorData::of_matrix(&params.dec_o),
        }
    }

    pub fn to_params<T: Real>(&self) -> Result<(GruParams<T>, EncoderConfig), CheckpointError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(self.version));
        }
        let d = self.input_dim;
        let h = self.hidden_dim;
        self.w_z.expect("w_z", h, d)?;
        self.u_z.expect("u_z", h, h)?;
        self.b_z.expect("b_z", h, 1)?;
        self.w_r.expect("w_r", h, d)?;
        self.u_r.expect("u_r", h, h)?;
        self.b_r.expect("b_r", h, 1)?;
        self.w_c.expect("w_c", h, d)?;
        self.u_c.expect("u_c", h, h)?;
        self.b_c.expect("b_c", h, 1)?;
        self.dec_x.expect("dec_x", X_CLASSES, h)?;
        self.dec_y.expect("dec_y", Y_CLASSES, h)?;
        self.dec_o.expect("dec_o", O_CLASSES, h)?;
        let params = GruParams {
            cell: GruCell {
                w_z: self.w_z.matrix(),
                u_z: self.u_z.matrix(),
                b_z: self.b_z.vector(),
                w_r: self.w_r.matrix(),
                u_r: self.u_r.matrix(),
                b_r: self.b_r.vector(),
                w_c: self.w_c.matrix(),
                u_c: self.u_c.matrix(),
                b_c: self.b_c.vector(),
            },
            dec_x: self.dec_x.matrix(),
            dec_y: self.dec_y.matrix(),
            dec_o: self.dec_o.matrix(),
        };
        Ok((params, EncoderConfig { grid: self.grid }))
    }
}

/// Write a model to `path` as JSON.
pub fn save_checkpoint<T: Real>(
    path: &Path,
    params: &GruParams<T>,
    enc: &EncoderConfig,
) -> Result<(), CheckpointError> {
    let ck = Checkpoint::from_params(params, enc);
    fs::write(path, serde_json::to_string(&ck)?)?;
    Ok(())
}

/// Read a model back; validates version and every tensor shape.
pub fn load_checkpoint<T: Real>(
    path: &Path,
) -> Result<(GruParams<T>, EncoderConfig), CheckpointError> {
    let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
    ck.to_params()
}
