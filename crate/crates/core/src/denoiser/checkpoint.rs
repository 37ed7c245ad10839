//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! b"MDIFCKPT" | u32 version | u64 len | config JSON
//! u32 count | count × (u32 name len | name | u32 rank | rank × u64 dim | f64 data)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::model::{check_shapes, Denoiser, DenoiserConfig, DenoiserParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MDIFCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(d: &Denoiser, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let cfg = serde_json::to_vec(&d.config).expect("config serializes");
    w.write_all(&(cfg.len() as u64).to_le_bytes())?;
    w.write_all(&cfg)?;
    w.write_all(&(d.params.len() as u32).to_le_bytes())?;
    for (name, arr) in d.params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&2u32.to_le_bytes())?;
        for dim in arr.shape() {
            w.write_all(&(*dim as u64).to_le_bytes())?;
        }
        for x in arr.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&v| v <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("implausible {what} {v}")))
    }
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Denoiser> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let cfg_len = c.len("config length")?;
    let config: DenoiserConfig = serde_json::from_slice(c.take(cfg_len)?)
        .map_err(|e| Error::Checkpoint(format!("bad config block: {e}")))?;
    let count = c.u32()? as usize;
    let mut names = Vec::with_capacity(count.min(1024));
    let mut arrays = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let nl = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(nl)?)
            .map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?
            .to_string();
        let rank = c.u32()?;
        if rank != 2 {
            return Err(Error::Checkpoint(format!("array {name} has rank {rank}, expected 2")));
        }
        let rows = c.len("row count")?;
        let cols = c.len("column count")?;
        let bytes = c.take(rows.checked_mul(cols).and_then(|x| x.checked_mul(8)).ok_or_else(|| {
            Error::Checkpoint(format!("array {name} is too large"))
        })?)?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        names.push(name);
        arrays.push(Array2::from_shape_vec((rows, cols), data).expect("length matches shape"));
    }
    if c.pos != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} unexpected trailing bytes",
            buf.len() - c.pos
        )));
    }
    let params = DenoiserParams::from_parts(names, arrays);
    config.validate()?;
    check_shapes(&config, &params)?;
    Ok(Denoiser { config, params })
}

pub fn save_checkpoint(d: &Denoiser, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(d, std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Denoiser> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(f)
}
