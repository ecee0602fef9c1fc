//! Dense per-cell grids and their binary file format.
//!
//! Layout (all little-endian):
//!
//! | bytes | content                         |
//! |-------|---------------------------------|
//! | 16    | magic `VTS-TENSORGRID\0\x01`    |
//! | 4     | height (i32)                    |
//! | 4     | width (i32)                     |
//! | 4     | channels (i32)                  |
//! | 4·n   | f32 payload, row-major, channel innermost |
//!
//! Values are held as `f64` in memory and stored as `f32`; saving rounds to the
//! nearest `f32`, so any grid that was loaded from disk saves back bit-exactly.

use std::path::Path;

use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 16] = b"VTS-TENSORGRID\0\x01";
const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl TensorGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::contract(format!(
                "grid data length {} != {height}*{width}*{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite grid value at index {i}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &TensorGrid) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    #[inline]
    fn offset(&self, y: usize, x: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    /// Channel vector at cell `(y, x)`.
    #[inline]
    pub fn cell(&self, y: usize, x: usize) -> &[f64] {
        let o = self.offset(y, x);
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn cell_mut(&mut self, y: usize, x: usize) -> &mut [f64] {
        let o = self.offset(y, x);
        let c = self.channels;
        &mut self.data[o..o + c]
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[self.offset(y, x) + ch]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, ch: usize, value: f64) {
        let o = self.offset(y, x) + ch;
        self.data[o] = value;
    }

    /// Serializes to the on-disk byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(GRID_MAGIC);
        for d in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(d as i32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    /// Parses the on-disk layout; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |offset: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            offset: offset as u64,
            message,
        };
        if bytes.len() < 16 || &bytes[..16] != GRID_MAGIC {
            return Err(fail(0, "bad magic".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(fail(bytes.len(), "truncated header".into()));
        }
        let mut dims = [0usize; 3];
        for (i, d) in dims.iter_mut().enumerate() {
            let at = 16 + 4 * i;
            let raw = i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            if raw < 0 {
                return Err(fail(at, format!("negative dimension {raw}")));
            }
            *d = raw as usize;
        }
        let [h, w, c] = dims;
        let count = h
            .checked_mul(w)
            .and_then(|n| n.checked_mul(c))
            .ok_or_else(|| fail(16, "dimension overflow".into()))?;
        let expected = HEADER_LEN + 4 * count;
        if bytes.len() < expected {
            return Err(fail(
                bytes.len(),
                format!("truncated payload: {count} values declared, {} bytes present", bytes.len() - HEADER_LEN),
            ));
        }
        if bytes.len() > expected {
            return Err(fail(expected, "trailing bytes after payload".into()));
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let at = HEADER_LEN + 4 * i;
            let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(fail(at, format!("non-finite value {v}")));
            }
            data.push(v as f64);
        }
        Ok(Self {
            height: h,
            width: w,
            channels: c,
            data,
        })
    }
}

pub fn load_tensor_grid(path: impl AsRef<Path>) -> Result<TensorGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorGrid::from_bytes(&bytes, path)
}

pub fn save_tensor_grid(path: impl AsRef<Path>, grid: &TensorGrid) -> Result<()> {
    super::write_atomic(path.as_ref(), |w| w.write_all(&grid.to_bytes()))
}

/// Per-cell displacement toward the sampling location in the source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        let n = height * width;
        if dx.len() != n || dy.len() != n {
            return Err(Error::contract(format!(
                "flow arrays ({}, {}) do not match {height}x{width}",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::contract("non-finite flow value"));
        }
        Ok(Self { height, width, dx, dy })
    }

    pub fn zero(height: usize, width: usize) -> Self {
        Self::uniform(height, width, 0.0, 0.0)
    }

    pub fn uniform(height: usize, width: usize, dx: f64, dy: f64) -> Self {
        Self {
            height,
            width,
            dx: vec![dx; height * width],
            dy: vec![dy; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn set(&mut self, y: usize, x: usize, dx: f64, dy: f64) {
        let i = y * self.width + x;
        self.dx[i] = dx;
        self.dy[i] = dy;
    }

    pub fn is_zero(&self) -> bool {
        self.dx.iter().chain(&self.dy).all(|v| *v == 0.0)
    }

    /// Two-channel grid `(dx, dy)`; the storage form of a flow file.
    pub fn to_grid(&self) -> TensorGrid {
        let data = self
            .dx
            .iter()
            .zip(&self.dy)
            .flat_map(|(a, b)| [*a, *b])
            .collect();
        TensorGrid {
            height: self.height,
            width: self.width,
            channels: 2,
            data,
        }
    }

    pub fn from_grid(grid: &TensorGrid) -> Result<Self> {
        if grid.channels() != 2 {
            return Err(Error::contract(format!(
                "flow grid needs 2 channels, found {}",
                grid.channels()
            )));
        }
        let (dx, dy) = grid.data().chunks_exact(2).map(|c| (c[0], c[1])).unzip();
        Ok(Self {
            height: grid.height(),
            width: grid.width(),
            dx,
            dy,
        })
    }
}

pub fn load_flow_field(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let grid = load_tensor_grid(path)?;
    FlowField::from_grid(&grid).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        offset: 24,
        message: e.to_string(),
    })
}

pub fn save_flow_field(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    save_tensor_grid(path, &flow.to_grid())
}
