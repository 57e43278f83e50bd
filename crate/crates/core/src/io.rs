//! Tensor and factor files.
//!
//! Tensors come in two encodings of the same content:
//! * text: `TDNS <N> <I1> .. <IN>` followed by the `J_N` values in vec order,
//!   all whitespace-separated;
//! * binary: the bytes `TDNB`, `N` as little-endian `u32`, the dims as
//!   little-endian `u32`, then the values as little-endian `f64` in vec order.
//!
//! Factor files are text: `KRUS <N> <R> <I1> .. <IN>` followed by each factor
//! matrix in column-major order.
//!
//! Decoding is all-or-nothing: a malformed or truncated input yields
//! [`Error::Parse`] with the byte offset of the problem.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::KruskalModel;
use crate::tensor::DenseTensor;

const TEXT_MAGIC: &str = "TDNS";
const BINARY_MAGIC: &[u8; 4] = b"TDNB";
const MODEL_MAGIC: &str = "KRUS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorFormat {
    Text,
    Binary,
}

impl TensorFormat {
    /// `.tdnb` means binary; anything else is text.
    pub fn from_path(path: &Path) -> TensorFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tdnb") => TensorFormat::Binary,
            _ => TensorFormat::Text,
        }
    }
}

pub fn encode_text(t: &DenseTensor) -> String {
    let mut out = String::with_capacity(24 * t.len() + 32);
    write!(out, "{TEXT_MAGIC} {}", t.order()).unwrap();
    for d in t.dims() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    write_values(&mut out, t.values());
    out
}

pub fn encode_binary(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.order() + 8 * t.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(t.order() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes either tensor encoding, chosen by the leading magic bytes.
pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(bytes)
    } else {
        decode_text(bytes)
    }
}

fn decode_binary(bytes: &[u8]) -> Result<DenseTensor> {
    let mut at = BINARY_MAGIC.len();
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        let end = at.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| {
            Error::parse(at as u64, format!("truncated {what}: need {n} bytes, {} left", bytes.len() - at))
        })?;
        let slice = &bytes[at..end];
        at = end;
        Ok(slice)
    };
    let order = u32::from_le_bytes(take(4, "order")?.try_into().unwrap()) as usize;
    if order == 0 {
        return Err(Error::parse(4, "tensor order must be at least 1"));
    }
    let mut dims = Vec::with_capacity(order.min(64));
    let mut len: usize = 1;
    for k in 0..order {
        let offset = 8 + 4 * k;
        let d = u32::from_le_bytes(take(4, "dims")?.try_into().unwrap()) as usize;
        if d == 0 {
            return Err(Error::parse(offset as u64, format!("dim {k} is zero")));
        }
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::parse(offset as u64, "tensor size overflows"))?;
        dims.push(d);
    }
    let payload = take(len.saturating_mul(8), "values")?;
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let end = 8 + 4 * order + 8 * len;
    if end != bytes.len() {
        return Err(Error::parse(end as u64, format!("{} trailing bytes", bytes.len() - end)));
    }
    DenseTensor::new(dims, values)
}

fn decode_text(bytes: &[u8]) -> Result<DenseTensor> {
    let mut tokens = Tokens::new(bytes);
    tokens.expect_magic(TEXT_MAGIC)?;
    let order = tokens.positive("order")?;
    let mut dims = Vec::with_capacity(order.min(64));
    let mut len: usize = 1;
    for k in 0..order {
        let (offset, d) = tokens.positive_at(&format!("dim {k}"))?;
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::parse(offset, "tensor size overflows"))?;
        dims.push(d);
    }
    let values = tokens.floats(len)?;
    tokens.expect_end()?;
    DenseTensor::new(dims, values)
}

pub fn encode_model(model: &KruskalModel) -> String {
    let mut out = String::new();
    write!(out, "{MODEL_MAGIC} {} {}", model.order(), model.rank()).unwrap();
    for d in model.dims() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    for a in model.factors() {
        write_values(&mut out, a.as_slice());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<KruskalModel> {
    let mut tokens = Tokens::new(bytes);
    tokens.expect_magic(MODEL_MAGIC)?;
    let order = tokens.positive("order")?;
    let rank = tokens.positive("rank")?;
    let dims = (0..order)
        .map(|k| tokens.positive(&format!("dim {k}")))
        .collect::<Result<Vec<_>>>()?;
    let factors = dims
        .iter()
        .map(|&d| {
            let n = d.checked_mul(rank).ok_or_else(|| Error::parse(tokens.offset(), "factor size overflows"))?;
            Matrix::from_col_major(d, rank, tokens.floats(n)?)
        })
        .collect::<Result<Vec<_>>>()?;
    tokens.expect_end()?;
    KruskalModel::new(factors)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    decode_tensor(&read(path.as_ref())?)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor, format: TensorFormat) -> Result<()> {
    let bytes = match format {
        TensorFormat::Text => encode_text(t).into_bytes(),
        TensorFormat::Binary => encode_binary(t),
    };
    write(path.as_ref(), &bytes)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<KruskalModel> {
    decode_model(&read(path.as_ref())?)
}

pub fn write_model(path: impl AsRef<Path>, model: &KruskalModel) -> Result<()> {
    write(path.as_ref(), encode_model(model).as_bytes())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Eight values per line in shortest round-trip form.
fn write_values(out: &mut String, values: &[f64]) {
    for row in values.chunks(8) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v:e}").unwrap();
        }
        out.push('\n');
    }
}

/// Whitespace-separated tokens with their byte offsets.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Tokens { bytes, pos: 0 }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn next(&mut self) -> Option<(u64, &'a [u8])> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some((start as u64, &self.bytes[start..self.pos]))
    }

    fn require(&mut self, what: &str) -> Result<(u64, &'a str)> {
        let end = self.bytes.len() as u64;
        let (offset, raw) = self
            .next()
            .ok_or_else(|| Error::parse(end, format!("unexpected end of input, expected {what}")))?;
        let text = std::str::from_utf8(raw).map_err(|_| Error::parse(offset, format!("invalid UTF-8 in {what}")))?;
        Ok((offset, text))
    }

    fn expect_magic(&mut self, magic: &str) -> Result<()> {
        let (offset, tok) = self.require("a header")?;
        if tok != magic {
            return Err(Error::parse(offset, format!("expected header {magic:?}, found {tok:?}")));
        }
        Ok(())
    }

    fn positive_at(&mut self, what: &str) -> Result<(u64, usize)> {
        let (offset, tok) = self.require(what)?;
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok((offset, v)),
            _ => Err(Error::parse(offset, format!("{what} must be a positive integer, found {tok:?}"))),
        }
    }

    fn positive(&mut self, what: &str) -> Result<usize> {
        self.positive_at(what).map(|(_, v)| v)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n.min(1 << 24));
        for k in 0..n {
            let (offset, tok) = self.require(&format!("value {k} of {n}"))?;
            let v = tok
                .parse::<f64>()
                .map_err(|_| Error::parse(offset, format!("invalid number {tok:?}")))?;
            out.push(v);
        }
        Ok(out)
    }

    fn expect_end(&mut self) -> Result<()> {
        match self.next() {
            None => Ok(()),
            Some((offset, _)) => Err(Error::parse(offset, "unexpected data after the last value")),
        }
    }
}
