//! Binary checkpoint format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "BXM1" | version u32 | src_vocab u64 | tgt_vocab u64 | emb u64 | hidden u64 | matching u64
//! | src vocab sha256 [32] | tgt vocab sha256 [32]
//! | config length u32 | config key=value text
//! | epoch u64 | history length u64 | (sum f64, mean f64, examples u64)*
//! | per tensor in declared order: element count u64 | f64*
//! | sha256 of all preceding bytes [32]
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{EpochStats, TrainConfig};
use crate::error::{Error, Result};
use crate::files::write_atomic;
use crate::kv;
use crate::model::{ModelDims, SiameseModel};
use crate::ndiff::Tensor;
use crate::scalar::Scalar;
use crate::text::{hex, Vocabulary};

pub const MAGIC: &[u8; 4] = b"BXM1";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub src_vocab_hash: [u8; 32],
    pub tgt_vocab_hash: [u8; 32],
    pub model: SiameseModel<T>,
    pub config: TrainConfig,
    /// Number of completed epochs.
    pub epoch: usize,
    pub history: Vec<EpochStats>,
}

pub fn vocab_digest(v: &Vocabulary) -> [u8; 32] {
    Sha256::digest(v.to_text().as_bytes()).into()
}

impl<T: Scalar> Checkpoint<T> {
    /// Errors with [`Error::VocabularyMismatch`] unless both vocabularies are the ones trained with.
    pub fn verify_vocabularies(&self, src: &Vocabulary, tgt: &Vocabulary) -> Result<()> {
        for (side, expected, v) in [
            ("source", &self.src_vocab_hash, src),
            ("target", &self.tgt_vocab_hash, tgt),
        ] {
            let got = vocab_digest(v);
            if &got != expected {
                return Err(Error::VocabularyMismatch(format!(
                    "{side} vocabulary hash {} does not match checkpoint {}",
                    hex(&got),
                    hex(expected)
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.model.dims();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in [dims.src_vocab, dims.tgt_vocab, dims.emb, dims.hidden, dims.matching] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.src_vocab_hash);
        out.extend_from_slice(&self.tgt_vocab_hash);
        let config = self.config.to_kv();
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        out.extend_from_slice(&(self.history.len() as u64).to_le_bytes());
        for h in &self.history {
            out.extend_from_slice(&h.sum_loss.to_le_bytes());
            out.extend_from_slice(&h.mean_loss.to_le_bytes());
            out.extend_from_slice(&(h.examples as u64).to_le_bytes());
        }
        for t in self.model.tensors() {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(corrupt("missing BXM1 header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: VERSION,
            });
        }
        if bytes.len() < 8 + 32 {
            return Err(corrupt("truncated"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch (truncated or modified file)"));
        }

        let mut r = Reader { buf: body, pos: 8 };
        let mut dim = || r.u64().map(|v| v as usize);
        let dims = ModelDims {
            src_vocab: dim()?,
            tgt_vocab: dim()?,
            emb: dim()?,
            hidden: dim()?,
            matching: dim()?,
        };
        dims.validate()
            .map_err(|e| corrupt(&format!("bad dimensions: {e}")))?;
        let src_vocab_hash = r.array()?;
        let tgt_vocab_hash = r.array()?;
        let config_len = r.u32()? as usize;
        let config_text = std::str::from_utf8(r.take(config_len)?)
            .map_err(|_| corrupt("config is not UTF-8"))?;
        let config = TrainConfig::from_kv(&kv::parse(config_text)?)
            .map_err(|e| corrupt(&format!("bad config: {e}")))?;
        let epoch = r.u64()? as usize;
        let history_len = r.u64()? as usize;
        let mut history = Vec::new();
        for i in 0..history_len {
            history.push(EpochStats {
                epoch: i,
                sum_loss: r.f64()?,
                mean_loss: r.f64()?,
                examples: r.u64()? as usize,
            });
        }
        let mut tensors = Vec::new();
        for shape in dims.shapes() {
            let n = r.u64()? as usize;
            if n != shape.iter().product::<usize>() {
                return Err(corrupt("parameter block size disagrees with dimensions"));
            }
            let data = (0..n)
                .map(|_| r.f64().map(T::of))
                .collect::<Result<Vec<T>>>()?;
            tensors.push(Tensor::new(shape, data)?);
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Checkpoint {
            src_vocab_hash,
            tgt_vocab_hash,
            model: SiameseModel::from_tensors(dims, tensors)?,
            config,
            epoch,
            history,
        })
    }

    /// Writes through a temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Loads and checks the checkpoint against the vocabularies it will be used with.
    pub fn load_for(path: &Path, src: &Vocabulary, tgt: &Vocabulary) -> Result<Self> {
        let ckpt = Self::load(path)?;
        ckpt.verify_vocabularies(src, tgt)?;
        Ok(ckpt)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptCheckpoint("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}
