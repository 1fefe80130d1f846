//! Versioned binary model file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "VXSTMLP\0"
//! format_version   u32
//! embedder_id      u32 length + UTF-8 bytes
//! metadata         u32 length + UTF-8 bytes
//! input_dim        u64
//! threshold        f64
//! 4 x layer        u64 rows, u64 cols, rows*cols f64 weights, rows f64 bias
//! checksum         32 bytes, SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::mlp::{Dense, MlpParameters};
use super::ModelError;

pub const MAGIC: [u8; 8] = *b"VXSTMLP\0";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode_model(params: &MlpParameters) -> Vec<u8> {
    encode_with_version(params, FORMAT_VERSION)
}

fn encode_with_version(params: &MlpParameters, version: u32) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + params.parameter_count() * 8);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&version.to_le_bytes());
    put_str(&mut buf, &params.embedder_id);
    put_str(&mut buf, &params.metadata);
    buf.extend_from_slice(&(params.input_dim as u64).to_le_bytes());
    buf.extend_from_slice(&params.threshold.to_le_bytes());
    for layer in &params.layers {
        buf.extend_from_slice(&(layer.rows as u64).to_le_bytes());
        buf.extend_from_slice(&(layer.cols as u64).to_le_bytes());
        for v in layer.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelError::Format("unexpected end of model data".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, ModelError> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| ModelError::Format("string field is not UTF-8".into()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpParameters, ModelError> {
    if bytes.len() < CHECKSUM_LEN + MAGIC.len() {
        return Err(ModelError::Checksum);
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(ModelError::Checksum);
    }
    let mut r = Reader { bytes: body, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(ModelError::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let embedder_id = r.string()?;
    let metadata = r.string()?;
    let input_dim = r.u64()? as usize;
    let threshold = r.f64()?;
    if input_dim == 0 {
        return Err(ModelError::Format("input dimension is zero".into()));
    }
    let shapes = MlpParameters::layer_shapes(input_dim);
    let mut layers = Vec::with_capacity(4);
    for (k, &(rows, cols)) in shapes.iter().enumerate() {
        let (r_rows, r_cols) = (r.u64()? as usize, r.u64()? as usize);
        if (r_rows, r_cols) != (rows, cols) {
            return Err(ModelError::Format(format!(
                "layer {k} is {r_rows}x{r_cols}, expected {rows}x{cols} for input dimension {input_dim}"
            )));
        }
        let mut layer = Dense::zeros(rows, cols);
        for v in layer.values_mut() {
            *v = r.f64()?;
        }
        layers.push(layer);
    }
    if r.pos != body.len() {
        return Err(ModelError::Format("trailing bytes after parameter blocks".into()));
    }
    let layers: [Dense; 4] = layers.try_into().expect("four layers");
    let params = MlpParameters {
        input_dim,
        layers,
        threshold,
        embedder_id,
        metadata,
    };
    if !params.is_finite() {
        return Err(ModelError::Format("non-finite parameter".into()));
    }
    Ok(params)
}

pub fn save_model(params: &MlpParameters, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode_model(params)).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<MlpParameters, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> MlpParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut p = MlpParameters::init(10, "hashed:d=10:seed=0", &mut rng);
        p.threshold = 0.5729;
        p.metadata = "vaxstance 0.1.0 config=abc".into();
        p
    }

    #[test]
    fn round_trip_is_bitwise() {
        let p = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&p, &path).unwrap();
        let q = load_model(&path).unwrap();
        assert_eq!(p, q);
        for (a, b) in p.layers.iter().zip(&q.layers) {
            assert!(a.values().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(encode_model(&q), fs::read(&path).unwrap());
    }

    #[test]
    fn truncation_fails_checksum() {
        let bytes = encode_model(&sample());
        for cut in [1, 8, 100, bytes.len() - 1] {
            assert!(matches!(
                decode_model(&bytes[..bytes.len() - cut]),
                Err(ModelError::Checksum)
            ));
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(decode_model(&flipped), Err(ModelError::Checksum)));
    }

    #[test]
    fn newer_version_is_refused() {
        let bytes = encode_with_version(&sample(), FORMAT_VERSION + 1);
        match decode_model(&bytes) {
            Err(e @ ModelError::Version { found, supported }) => {
                assert_eq!((found, supported), (FORMAT_VERSION + 1, FORMAT_VERSION));
                let msg = e.to_string();
                assert!(msg.contains(&found.to_string()) && msg.contains(&supported.to_string()));
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_refused() {
        let mut body = encode_model(&sample());
        body.truncate(body.len() - CHECKSUM_LEN);
        body[0] = b'X';
        let digest = Sha256::digest(&body);
        body.extend_from_slice(&digest);
        assert!(matches!(decode_model(&body), Err(ModelError::Format(_))));
    }
}
