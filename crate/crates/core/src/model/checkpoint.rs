//! `ZFM1` model checkpoint container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "ZFM1" | u8 scalar width (4 = f32, 8 = f64)
//! | u32 config length | config as `key = value` lines (UTF-8)
//! | u32 blob count
//! | per blob: u16 name length | name | u8 rank | u32 dims[rank] | values
//! ```
//!
//! Convolution weights have shape `[out, in, k, k]`, biases `[out]`.

use std::path::Path;

use super::layers::Conv2d;
use super::network::{FrozenEncoder, ToyModel};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ZFM_MAGIC: &[u8; 4] = b"ZFM1";

fn named_convs<T: Scalar>(model: &ToyModel<T>) -> Vec<(String, &Conv2d<T>)> {
    let p = model.params();
    let mut out = vec![("encoder".to_owned(), model.encoder().conv())];
    out.extend(p.tim.iter().map(|g| (format!("tim.{}", g.modality), &g.conv)));
    out.extend(p.decoder.down.iter().enumerate().map(|(i, c)| (format!("decoder.down.{i}"), c)));
    out.extend(p.decoder.up.iter().enumerate().map(|(i, c)| (format!("decoder.up.{i}"), c)));
    out.push(("decoder.head".to_owned(), &p.decoder.head));
    out
}

fn write_blob<T: Scalar>(out: &mut Vec<u8>, name: &str, dims: &[usize], values: &[T]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    values.iter().for_each(|v| v.write_le(out));
}

pub fn encode_checkpoint<T: Scalar>(model: &ToyModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(ZFM_MAGIC);
    out.push(T::BYTES as u8);
    let cfg = model.config().to_kv();
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    let convs = named_convs(model);
    out.extend_from_slice(&((convs.len() * 2) as u32).to_le_bytes());
    for (name, c) in convs {
        write_blob(
            &mut out,
            &format!("{name}.weight"),
            &[c.out_ch, c.in_ch, c.kernel, c.kernel],
            &c.weight,
        );
        write_blob(&mut out, &format!("{name}.bias"), &[c.out_ch], &c.bias);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "checkpoint truncated at byte {} (need {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<ToyModel<T>> {
    if bytes.len() < 4 || &bytes[..4] != ZFM_MAGIC {
        return Err(Error::Format("missing ZFM1 magic bytes".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let width = r.u8()? as usize;
    if width != T::BYTES {
        return Err(Error::Format(format!(
            "checkpoint stores {width}-byte scalars, loader expects {}",
            T::BYTES
        )));
    }
    let cfg_len = r.u32()? as usize;
    let cfg_text = std::str::from_utf8(r.take(cfg_len)?)
        .map_err(|_| Error::Format("config block is not UTF-8".into()))?;
    let config = ModelConfig::from_kv(cfg_text)?;

    let mut blobs = std::collections::HashMap::new();
    let count = r.u32()?;
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("blob name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u8()? as usize;
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let raw = r.take(n * T::BYTES)?;
        let values: Vec<T> = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        if blobs.insert(name.clone(), (dims, values)).is_some() {
            return Err(Error::Format(format!("duplicate blob `{name}`")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let template = ToyModel::<T>::new(config.clone())?;
    let mut fill = |name: &str, conv: &Conv2d<T>| -> Result<Conv2d<T>> {
        let mut c = conv.clone();
        for (suffix, expected, slot) in [
            ("weight", vec![c.out_ch, c.in_ch, c.kernel, c.kernel], &mut c.weight),
            ("bias", vec![c.out_ch], &mut c.bias),
        ] {
            let key = format!("{name}.{suffix}");
            let (dims, values) = blobs
                .remove(&key)
                .ok_or_else(|| Error::Format(format!("missing blob `{key}`")))?;
            if dims != expected {
                return Err(Error::Shape(format!("blob `{key}` has shape {dims:?}, expected {expected:?}")));
            }
            *slot = values;
        }
        Ok(c)
    };

    let encoder = FrozenEncoder::from_conv(fill("encoder", template.encoder().conv())?);
    let mut params = template.params().clone();
    for g in params.tim.iter_mut() {
        g.conv = fill(&format!("tim.{}", g.modality), &g.conv)?;
    }
    for (i, c) in params.decoder.down.iter_mut().enumerate() {
        *c = fill(&format!("decoder.down.{i}"), c)?;
    }
    for (i, c) in params.decoder.up.iter_mut().enumerate() {
        *c = fill(&format!("decoder.up.{i}"), c)?;
    }
    params.decoder.head = fill("decoder.head", &params.decoder.head)?;
    if let Some(extra) = blobs.keys().next() {
        return Err(Error::Format(format!("unexpected blob `{extra}`")));
    }
    Ok(ToyModel::from_parts(config, encoder, params))
}

pub fn write_checkpoint<T: Scalar>(model: &ToyModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::file(path, e))
}

pub fn read_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<ToyModel<T>> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::file(path, e))?)
}
