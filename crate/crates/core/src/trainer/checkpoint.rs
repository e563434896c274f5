//! Binary checkpoint format, little-endian:
//!
//! ```text
//! magic    8 bytes  "LE2FCKPT"
//! version  u32      FORMAT_VERSION
//! ablation u32 len + utf-8 tag
//! print    u64      architecture fingerprint
//! count    u32
//! count × { u32 name len, name, 4 × u64 dims, f64 values }
//! trailer  8 bytes  "LE2F-END"
//! ```

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{FusionError, Result};
use crate::nn::Tensor;
use crate::params::{Ablation, ModelParams};

pub const MAGIC: &[u8; 8] = b"LE2FCKPT";
pub const TRAILER: &[u8; 8] = b"LE2F-END";
pub const FORMAT_VERSION: u32 = 1;

const MAX_NAME: usize = 1 << 10;
const MAX_ELEMS: u64 = 1 << 24;

fn encode(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(params.param_count() * 8 + 4096);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let tag = params.ablation().as_str().as_bytes();
    out.extend_from_slice(&(tag.len() as u32).to_le_bytes());
    out.extend_from_slice(tag);
    out.extend_from_slice(&params.fingerprint().to_le_bytes());
    let tensors: Vec<_> = params.iter().collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(TRAILER);
    out
}

/// Writes through a sibling temp file and renames, so a reader never sees
/// a half-written checkpoint.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let bytes = encode(params);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let write = || -> io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        FusionError::io(path, e)
    })
}

struct Reader<'a> {
    inner: &'a mut dyn Read,
}

impl Reader<'_> {
    fn bytes<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b)?;
        Ok(b)
    }

    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32().map_err(truncated)? as usize;
        if len > MAX_NAME {
            return Err(FusionError::Version(format!("{what} length {len} is implausible")));
        }
        let mut buf = vec![0u8; len];
        self.inner.read_exact(&mut buf).map_err(truncated)?;
        String::from_utf8(buf).map_err(|_| FusionError::Version(format!("{what} is not utf-8")))
    }
}

fn truncated(e: io::Error) -> FusionError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        FusionError::Version("checkpoint is truncated".into())
    } else {
        FusionError::Io {
            path: Default::default(),
            source: e,
        }
    }
}

fn decode(src: &mut dyn Read) -> Result<ModelParams> {
    let mut r = Reader { inner: src };
    let magic: [u8; 8] = r.bytes().map_err(truncated)?;
    if &magic != MAGIC {
        return Err(FusionError::Version("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32().map_err(truncated)?;
    if version != FORMAT_VERSION {
        return Err(FusionError::Version(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let ablation: Ablation = r.string("ablation tag")?.parse().map_err(|_| FusionError::Version("unknown ablation tag".into()))?;
    let stored_print = r.u64().map_err(truncated)?;
    let count = r.u32().map_err(truncated)?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name = r.string("tensor name")?;
        let mut shape = [0usize; 4];
        let mut elems: u64 = 1;
        for d in shape.iter_mut() {
            let v = r.u64().map_err(truncated)?;
            elems = elems.saturating_mul(v);
            *d = v as usize;
        }
        if elems > MAX_ELEMS {
            return Err(FusionError::Version(format!("tensor {name} claims {elems} elements")));
        }
        let mut raw = vec![0u8; elems as usize * 8];
        r.inner.read_exact(&mut raw).map_err(truncated)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.insert(name, Tensor::new(shape, data)?);
    }
    let trailer: [u8; 8] = r.bytes().map_err(truncated)?;
    if &trailer != TRAILER {
        return Err(FusionError::Version("missing checkpoint trailer".into()));
    }
    let expected = ModelParams::expected_fingerprint(ablation);
    if stored_print != expected {
        return Err(FusionError::Fingerprint {
            expected,
            found: stored_print,
        });
    }
    ModelParams::from_tensors(ablation, tensors)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let mut f = std::fs::File::open(path).map_err(|e| FusionError::io(path, e))?;
    decode(&mut f).map_err(|e| match e {
        FusionError::Io { source, .. } => FusionError::io(path, source),
        other => other,
    })
}

/// Loads and checks the architecture against the requested ablation.
pub fn load_checkpoint_for(path: &Path, ablation: Ablation) -> Result<ModelParams> {
    let params = load_checkpoint(path)?;
    let expected = ModelParams::expected_fingerprint(ablation);
    if params.fingerprint() != expected {
        return Err(FusionError::Fingerprint {
            expected,
            found: params.fingerprint(),
        });
    }
    Ok(params)
}
