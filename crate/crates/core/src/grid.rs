//! Dense row-major grids and the `WGT1` binary container.
//!
//! Layout of a `WGT1` byte stream, all integers little-endian:
//!
//! ```text
//! "WGT1" | u32 ndim | u32 dims[ndim] | u8 dtype | u8 role | payload
//! ```
//!
//! `dtype` is 0 for f32 and 1 for f64. The payload is the row-major data,
//! innermost dimension last. Two-channel grids (offsets, shifts) are stored
//! as `[rows, cols, 2]` with channel 0 holding x and channel 1 holding y.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WGT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// What a grid carries. Determines which invariants apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    JunctionHeat,
    CenterHeat,
    JunctionOffset,
    CenterOffset,
    ShiftVec,
    Features,
    Depth,
    PlaneLabels,
    Generic,
}

impl Role {
    pub const ALL: [Role; 9] = [
        Role::JunctionHeat,
        Role::CenterHeat,
        Role::JunctionOffset,
        Role::CenterOffset,
        Role::ShiftVec,
        Role::Features,
        Role::Depth,
        Role::PlaneLabels,
        Role::Generic,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_heatmap(self) -> bool {
        matches!(self, Role::JunctionHeat | Role::CenterHeat)
    }

    pub fn is_two_channel(self) -> bool {
        matches!(self, Role::JunctionOffset | Role::CenterOffset | Role::ShiftVec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl GridData {
    pub fn len(&self) -> usize {
        match self {
            GridData::F32(v) => v.len(),
            GridData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            GridData::F32(_) => Dtype::F32,
            GridData::F64(_) => Dtype::F64,
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            GridData::F32(v) => v[i] as f64,
            GridData::F64(v) => v[i],
        }
    }

    fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// A validated dense array with a role tag.
///
/// Equality compares dims, role and the stored bits; two grids that differ
/// only in NaN payloads are still unequal under `bit_eq`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    role: Role,
    data: GridData,
}

impl Grid {
    pub fn new(dims: Vec<usize>, role: Role, data: GridData) -> Result<Self> {
        let grid = Self { dims, role, data };
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_f32(dims: Vec<usize>, role: Role, data: Vec<f32>) -> Result<Self> {
        Self::new(dims, role, GridData::F32(data))
    }

    pub fn from_f64(dims: Vec<usize>, role: Role, data: Vec<f64>) -> Result<Self> {
        Self::new(dims, role, GridData::F64(data))
    }

    pub fn zeros(dims: Vec<usize>, role: Role, dtype: Dtype) -> Result<Self> {
        let n = checked_product(&dims).ok_or_else(|| Error::format("dims", "product overflows"))?;
        let data = match dtype {
            Dtype::F32 => GridData::F32(alloc::vec![0.0; n]),
            Dtype::F64 => GridData::F64(alloc::vec![0.0; n]),
        };
        Self::new(dims, role, data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::invalid("grid", "dims must not be empty"));
        }
        let n = checked_product(&self.dims)
            .ok_or_else(|| Error::invalid("grid", "dims product overflows"))?;
        if n != self.data.len() {
            return Err(Error::invalid(
                "grid",
                format!("dims {:?} need {} values, got {}", self.dims, n, self.data.len()),
            ));
        }
        if self.role.is_two_channel() && (self.dims.len() != 3 || self.dims[2] != 2) {
            return Err(Error::invalid(
                "grid",
                format!("{:?} grid must have dims [rows, cols, 2], got {:?}", self.role, self.dims),
            ));
        }
        if self.role.is_heatmap() {
            if let Some(i) = self.data.iter().position(|v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::invalid(
                    "grid",
                    format!("heatmap value {} at {} outside [0, 1]", self.data.get(i), i),
                ));
            }
        }
        if self.role == Role::Depth {
            if let Some(i) = self.data.iter().position(|v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::invalid(
                    "grid",
                    format!("depth value {} at {} is negative or non-finite", self.data.get(i), i),
                ));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn data(&self) -> &GridData {
        &self.data
    }

    pub fn into_data(self) -> GridData {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(rows, cols)` for grids with at least two dims.
    pub fn rows_cols(&self) -> Option<(usize, usize)> {
        (self.dims.len() >= 2).then(|| (self.dims[0], self.dims[1]))
    }

    /// Channels per cell: the third dim, or 1 for 2D grids.
    pub fn channels(&self) -> usize {
        self.dims.get(2).copied().unwrap_or(1)
    }

    #[inline]
    pub fn value(&self, flat: usize) -> f64 {
        self.data.get(flat)
    }

    /// Value at `(row, col, channel)` of a 2D or 3D grid.
    #[inline]
    pub fn at(&self, row: usize, col: usize, channel: usize) -> f64 {
        let c = self.channels();
        self.data.get((row * self.dims[1] + col) * c + channel)
    }

    /// Length of the byte encoding.
    pub fn encoded_len(&self) -> usize {
        header_len(self.dims.len()) + self.data.len() * self.dtype().size()
    }

    /// Encodes the grid as a `WGT1` byte stream.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::format("dims", format!("{d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.push(self.dtype().code());
        out.push(self.role.code());
        match &self.data {
            GridData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            GridData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        Ok(out)
    }

    /// Decodes a `WGT1` byte stream. The stream must contain exactly one grid.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4, "magic")? != MAGIC {
            return Err(Error::format("magic", "expected \"WGT1\""));
        }
        let ndim = cur.u32("ndim")? as usize;
        if ndim == 0 {
            return Err(Error::format("ndim", "must be at least 1"));
        }
        if ndim > (bytes.len().saturating_sub(8)) / 4 {
            return Err(Error::format("ndim", format!("{ndim} dims cannot fit in {} bytes", bytes.len())));
        }
        let dims = (0..ndim)
            .map(|_| cur.u32("dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let code = cur.take(1, "dtype")?[0];
        let dtype = Dtype::from_code(code).ok_or_else(|| Error::format("dtype", format!("unknown code {code}")))?;
        let code = cur.take(1, "role")?[0];
        let role = Role::from_code(code).ok_or_else(|| Error::format("role", format!("unknown code {code}")))?;
        let count = checked_product(&dims).ok_or_else(|| Error::format("dims", "product overflows"))?;
        let payload_len = count
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::format("dims", "payload size overflows"))?;
        let remaining = bytes.len() - cur.pos;
        if remaining < payload_len {
            return Err(Error::format(
                "payload",
                format!("truncated: header declares {payload_len} bytes, {remaining} present"),
            ));
        }
        if remaining > payload_len {
            return Err(Error::format(
                "payload",
                format!("{} trailing bytes after declared payload", remaining - payload_len),
            ));
        }
        let payload = cur.take(payload_len, "payload")?;
        let data = match dtype {
            Dtype::F32 => GridData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            Dtype::F64 => GridData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
                    .collect(),
            ),
        };
        Grid::new(dims, role, data)
    }

    /// Bitwise equality, treating NaNs with identical payloads as equal.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.role == other.role
            && match (&self.data, &other.data) {
                (GridData::F32(a), GridData::F32(b)) => {
                    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
                }
                (GridData::F64(a), GridData::F64(b)) => {
                    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
                }
                _ => false,
            }
    }
}

pub fn header_len(ndim: usize) -> usize {
    4 + 4 + 4 * ndim + 1 + 1
}

fn checked_product(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(field, format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
