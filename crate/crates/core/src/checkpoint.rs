//! Binary checkpoint of a trained model.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! b"PKGE"                      magic
//! u32                          format version (1)
//! u64 × 4                      n_entities, d, d_s, m
//! f64 × n_entities·d           entity table, row-major
//! f64 × m·(d/d_s)·d_s²         relation blocks, relation-major then
//!                              subspace, each block row-major
//! u64                          FNV-1a 64 over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::procrustes::RelationSet;

pub const MAGIC: &[u8; 4] = b"PKGE";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub entities: EmbeddingTable,
    pub relations: RelationSet,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

impl Checkpoint {
    pub fn new(entities: EmbeddingTable, relations: RelationSet) -> Result<Self> {
        if relations.n_subspaces() != entities.n_subspaces() || relations.d_s() != entities.d_s() {
            return Err(Error::Shape(format!(
                "relations are {} blocks of {}x{}, entities have {} subspaces of width {}",
                relations.n_subspaces(),
                relations.d_s(),
                relations.d_s(),
                entities.n_subspaces(),
                entities.d_s()
            )));
        }
        Ok(Self {
            entities,
            relations,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let e = &self.entities;
        let n_values = e.n_entities() * e.dim() + self.relations.blocks().len() * e.d_s() * e.d_s();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n_values + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for v in [
            e.n_entities(),
            e.dim(),
            e.d_s(),
            self.relations.n_relations(),
        ] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for x in e.to_row_major() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for block in self.relations.blocks() {
            for x in block.as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let sum = fnv1a64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN + 8 {
            return Err(corrupt(format!("file is only {} bytes long", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        let u64_at =
            |off: usize| u64::from_le_bytes(payload[off..off + 8].try_into().expect("8 bytes"));
        let version = u32::from_le_bytes(payload[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported format version {version}")));
        }
        let dims: Vec<usize> = (0..4)
            .map(|i| usize::try_from(u64_at(8 + 8 * i)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| corrupt("dimension does not fit in memory"))?;
        let (n, d, d_s, m) = (dims[0], dims[1], dims[2], dims[3]);
        if d_s == 0 || d % d_s != 0 {
            return Err(corrupt(format!("d = {d} is not a multiple of d_s = {d_s}")));
        }
        let s = d / d_s;
        let n_values = n
            .checked_mul(d)
            .and_then(|a| m.checked_mul(s)?.checked_mul(d_s * d_s)?.checked_add(a))
            .ok_or_else(|| corrupt("dimensions overflow"))?;
        if payload.len() != HEADER_LEN + 8 * n_values {
            return Err(corrupt(format!(
                "payload holds {} bytes, dimensions require {}",
                payload.len() - HEADER_LEN,
                8 * n_values
            )));
        }
        if fnv1a64(payload) != stored {
            return Err(corrupt("checksum mismatch"));
        }

        let floats: Vec<f64> = payload[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let (table_vals, rel_vals) = floats.split_at(n * d);
        let entities = EmbeddingTable::from_row_major(n, d, d_s, table_vals)?;
        let blocks = rel_vals
            .chunks_exact(d_s * d_s)
            .map(|c| DenseMatrix::new(d_s, d_s, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let relations = RelationSet::from_blocks(m, s, d_s, blocks)?;
        Ok(Self {
            entities,
            relations,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let entities = EmbeddingTable::init(6, 8, 4, &mut rng).unwrap();
        let mut relations = RelationSet::identity(3, 2, 4);
        relations.set(1, 1, crate::linalg::random_orthogonal(4, &mut rng).unwrap());
        Checkpoint::new(entities, relations).unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"PKGE");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 6);
        assert_eq!(u64::from_le_bytes(bytes[32..40].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 40 + 8 * (6 * 8 + 3 * 2 * 16) + 8);
    }

    #[test]
    fn truncation_and_bit_flips_are_detected() {
        let bytes = sample().to_bytes();
        for cut in [0, 10, 40, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::from_bytes(&bytes[..cut]),
                Err(Error::CorruptCheckpoint(_))
            ));
        }
        let mut flipped = bytes.clone();
        flipped[100] ^= 0x40;
        assert!(matches!(
            Checkpoint::from_bytes(&flipped),
            Err(Error::CorruptCheckpoint(_))
        ));
        let mut bad_magic = bytes;
        bad_magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad_magic).is_err());
    }
}
