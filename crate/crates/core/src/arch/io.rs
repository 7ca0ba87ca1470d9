//! Binary model files.
//!
//! Little-endian layout:
//!
//! ```text
//! "MRN1" | version u8 | variant u8 (0=S 1=L 2=M) | precision u8 (4|8)
//!        | input_dim u8 | channels u8 | width u16 | num_stages u16
//! per stage:
//!   band_limit f64 | omega_g f64 | alpha f64 | frozen u8
//!   blob_len u32 (bytes) | blob
//! blob:
//!   layer_count u8, then per layer (first, hidden…, linear):
//!   out_dim u16 | in_dim u16 | weights (row-major) | bias
//! ```
//!
//! Scalars inside blobs are stored at the network precision.

use std::fs;
use std::path::Path;

use super::{MrNet, StageParams, Variant};
use crate::error::{Error, Result};
use crate::nn::{DenseLayer, Precision};

pub const MAGIC: &[u8; 4] = b"MRN1";
pub const VERSION: u8 = 1;

pub fn write_model(net: &MrNet) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + net.count_params() * net.precision().bytes() as usize);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(net.variant().code());
    out.push(net.precision().bytes());
    out.push(net.input_dim() as u8);
    out.push(net.channels() as u8);
    out.extend_from_slice(&(net.width() as u16).to_le_bytes());
    out.extend_from_slice(&(net.num_stages() as u16).to_le_bytes());
    for st in net.stages() {
        out.extend_from_slice(&st.band_limit.to_le_bytes());
        out.extend_from_slice(&st.omega_g.to_le_bytes());
        out.extend_from_slice(&st.alpha.to_le_bytes());
        out.push(st.frozen as u8);
        let blob = stage_blob(st, net.precision());
        out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
        out.extend_from_slice(&blob);
    }
    out
}

fn stage_blob(st: &StageParams, precision: Precision) -> Vec<u8> {
    let mut blob = vec![st.layers().len() as u8];
    for layer in st.layers() {
        blob.extend_from_slice(&(layer.out_dim() as u16).to_le_bytes());
        blob.extend_from_slice(&(layer.in_dim() as u16).to_le_bytes());
        for &v in layer.weights().iter().chain(layer.bias()) {
            match precision {
                Precision::F32 => blob.extend_from_slice(&(v as f32).to_le_bytes()),
                Precision::F64 => blob.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    blob
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let rest = self.buf.len() - self.pos;
        if rest < n {
            return Err(Error::Truncated { offset: self.pos, needed: n - rest });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn scalar(&mut self, p: Precision) -> Result<f64> {
        Ok(match p {
            Precision::F32 => f32::from_le_bytes(self.array()?) as f64,
            Precision::F64 => self.f64()?,
        })
    }
}

pub fn read_model(bytes: &[u8]) -> Result<MrNet> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4).map_err(|_| Error::Format("file too short for a model header".into()))? != MAGIC {
        return Err(Error::Format("bad magic, not an MR-Net model file".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Version { found: version, expected: VERSION });
    }
    let variant = r.u8()?;
    let variant = Variant::from_code(variant).ok_or_else(|| Error::Format(format!("unknown variant code {variant}")))?;
    let precision = r.u8()?;
    let precision =
        Precision::from_bytes(precision).ok_or_else(|| Error::Format(format!("unknown precision tag {precision}")))?;
    let input_dim = r.u8()? as usize;
    let channels = r.u8()? as usize;
    let width = r.u16()? as usize;
    let num_stages = r.u16()? as usize;

    let mut stages = Vec::with_capacity(num_stages);
    for i in 0..num_stages {
        let band_limit = r.f64()?;
        let omega_g = r.f64()?;
        let alpha = r.f64()?;
        let frozen = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("stage {} has frozen flag {other}", i + 1))),
        };
        let blob_len = r.u32()? as usize;
        let blob_start = r.pos;
        let layer_count = r.u8()? as usize;
        let mut layers = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            let out_dim = r.u16()? as usize;
            let in_dim = r.u16()? as usize;
            let weights = (0..out_dim * in_dim).map(|_| r.scalar(precision)).collect::<Result<Vec<_>>>()?;
            let bias = (0..out_dim).map(|_| r.scalar(precision)).collect::<Result<Vec<_>>>()?;
            let layer = DenseLayer::from_parts(in_dim, out_dim, weights, bias)
                .map_err(|e| Error::Format(format!("stage {}: {e}", i + 1)))?;
            layers.push(layer);
        }
        if r.pos - blob_start != blob_len {
            return Err(Error::Format(format!(
                "stage {} blob is {} bytes, header says {blob_len}",
                i + 1,
                r.pos - blob_start
            )));
        }
        let stage = StageParams::new(layers, alpha, frozen, band_limit, omega_g)
            .map_err(|e| Error::Format(format!("stage {}: {e}", i + 1)))?;
        stages.push(stage);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after the last stage", bytes.len() - r.pos)));
    }
    MrNet::from_stages(variant, input_dim, channels, width, precision, stages).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_model(net: &MrNet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_model(net))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MrNet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_model(&bytes)
}
