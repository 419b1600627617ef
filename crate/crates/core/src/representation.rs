//! Site vectors: the tf-idf weighted sum of a site's word embeddings.

use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::weighting::SiteDocument;

#[derive(Clone, Debug, PartialEq)]
pub struct SiteVector {
    pub site_id: String,
    pub vec: Vec<f32>,
    /// In-vocabulary terms that were summed.
    pub contributing_terms: usize,
}

impl SiteVector {
    pub fn is_zero(&self) -> bool {
        self.vec.iter().all(|&v| v == 0.0)
    }
}

/// Sums `weights[t] * emb[t]` over the document's unique terms in sorted
/// term order. Out-of-vocabulary terms and terms without a weight are
/// skipped. Accumulation is in `f64`; the result is stored as `f32`.
pub fn compose_site_vector(
    doc: &SiteDocument,
    weights: &BTreeMap<String, f64>,
    emb: &EmbeddingMatrix,
) -> SiteVector {
    let mut acc = vec![0f64; emb.dim()];
    let mut contributing = 0;
    for term in doc.term_counts().keys() {
        let (Some(&w), Some(row)) = (weights.get(term), emb.lookup(term)) else {
            continue;
        };
        contributing += 1;
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += w * v as f64;
        }
    }
    SiteVector {
        site_id: doc.site_id.clone(),
        vec: acc.into_iter().map(|v| v as f32).collect(),
        contributing_terms: contributing,
    }
}

/// Scales `vec` to unit Euclidean norm; zero vectors are left unchanged.
pub fn l2_normalize(vec: &mut [f32]) {
    let norm = vec.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in vec {
            *v = (*v as f64 / norm) as f32;
        }
    }
}

pub const STORE_MAGIC: [u8; 4] = *b"SVEC";
pub const STORE_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a site-vector store (bad magic)")]
    BadMagic,
    #[error("unsupported site-vector store version {0}")]
    BadVersion(u16),
    #[error("record {record}: {message}")]
    Corrupt { record: usize, message: String },
}

/// Writes the site-vector store: magic `SVEC`, `u16` version, then per record
/// a `u32` length-prefixed UTF-8 site id, a `u32` dimension and that many
/// `f32` values. Every integer and float is little-endian.
pub fn write_site_vectors<'a, W, I>(writer: W, records: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [f32])>,
{
    let mut w = BufWriter::new(writer);
    w.write_all(&STORE_MAGIC)?;
    w.write_all(&STORE_VERSION.to_le_bytes())?;
    for (id, vec) in records {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        w.write_all(&(vec.len() as u32).to_le_bytes())?;
        for v in vec {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R, record: usize, eof_ok: bool) -> Result<Option<u32>, StoreError> {
    let mut buf = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 && eof_ok {
                return Ok(None);
            }
            return Err(StoreError::Corrupt {
                record,
                message: "truncated".into(),
            });
        }
        filled += n;
    }
    Ok(Some(u32::from_le_bytes(buf)))
}

pub fn read_site_vectors<R: Read>(reader: R) -> Result<Vec<(String, Vec<f32>)>, StoreError> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| StoreError::BadMagic)?;
    if magic != STORE_MAGIC {
        return Err(StoreError::BadMagic);
    }
    let mut version = [0u8; 2];
    r.read_exact(&mut version).map_err(|_| StoreError::BadMagic)?;
    let version = u16::from_le_bytes(version);
    if version != STORE_VERSION {
        return Err(StoreError::BadVersion(version));
    }
    let corrupt = |record, message: &str| StoreError::Corrupt {
        record,
        message: message.to_string(),
    };
    let mut out = Vec::new();
    loop {
        let record = out.len();
        let Some(id_len) = read_u32(&mut r, record, true)? else {
            break;
        };
        let mut id = vec![0u8; id_len as usize];
        r.read_exact(&mut id).map_err(|_| corrupt(record, "truncated site id"))?;
        let id = String::from_utf8(id).map_err(|_| corrupt(record, "site id is not UTF-8"))?;
        let dim = read_u32(&mut r, record, false)?.expect("eof not allowed") as usize;
        let mut payload = vec![0u8; dim * 4];
        r.read_exact(&mut payload)
            .map_err(|_| corrupt(record, "truncated vector"))?;
        let vec = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        out.push((id, vec));
    }
    Ok(out)
}

pub fn save_site_vectors(path: impl AsRef<Path>, vectors: &[SiteVector]) -> io::Result<()> {
    save_site_vector_records(
        path,
        vectors.iter().map(|s| (s.site_id.as_str(), s.vec.as_slice())),
    )
}

/// Writes the store to a temporary file beside `path`, then renames it over
/// `path`, so readers never observe a partial store.
pub fn save_site_vector_records<'a, I>(path: impl AsRef<Path>, records: I) -> io::Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [f32])>,
{
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write_site_vectors(&mut tmp, records)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn load_site_vectors(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f32>)>, StoreError> {
    read_site_vectors(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb() -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            2,
            vec![("a".into(), vec![1.0, 0.0]), ("b".into(), vec![0.0, 1.0])],
        )
        .unwrap()
    }

    #[test]
    fn two_term_sum() {
        let doc = SiteDocument::from_tokens("s", ["a", "b", "b"]);
        let weights = BTreeMap::from([("a".to_string(), 0.5), ("b".to_string(), 2.0)]);
        let sv = compose_site_vector(&doc, &weights, &emb());
        assert_eq!(sv.vec, vec![0.5, 2.0]);
        assert_eq!(sv.contributing_terms, 2);
    }

    #[test]
    fn all_oov_is_zero() {
        let doc = SiteDocument::from_tokens("s", ["x", "y"]);
        let weights = BTreeMap::from([("x".to_string(), 1.0), ("y".to_string(), 3.0)]);
        let sv = compose_site_vector(&doc, &weights, &emb());
        assert!(sv.is_zero());
        assert_eq!(sv.contributing_terms, 0);
    }

    #[test]
    fn normalize() {
        let mut v = [3.0f32, 4.0];
        l2_normalize(&mut v);
        assert_eq!(v, [0.6, 0.8]);
        let mut z = [0.0f32; 3];
        l2_normalize(&mut z);
        assert_eq!(z, [0.0; 3]);
    }

    #[test]
    fn store_layout() {
        let mut buf = Vec::new();
        write_site_vectors(&mut buf, [("ab", &[1.0f32][..])]).unwrap();
        let mut expected = b"SVEC".to_vec();
        expected.extend(1u16.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(b"ab");
        expected.extend(1u32.to_le_bytes());
        expected.extend(1f32.to_le_bytes());
        assert_eq!(buf, expected);
        assert_eq!(read_site_vectors(&buf[..]).unwrap(), vec![("ab".to_string(), vec![1.0])]);
    }

    #[test]
    fn store_rejects_damage() {
        let mut buf = Vec::new();
        write_site_vectors(&mut buf, [("ab", &[1.0f32, 2.0][..])]).unwrap();
        assert!(matches!(read_site_vectors(&b"XXXX\x01\x00"[..]), Err(StoreError::BadMagic)));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(read_site_vectors(&v2[..]), Err(StoreError::BadVersion(2))));
        buf.pop();
        assert!(matches!(
            read_site_vectors(&buf[..]),
            Err(StoreError::Corrupt { record: 0, .. })
        ));
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.svec");
        let vs = vec![SiteVector {
            site_id: "site.example".into(),
            vec: vec![0.25, -1.5, f32::MAX],
            contributing_terms: 3,
        }];
        save_site_vectors(&path, &vs).unwrap();
        let back = load_site_vectors(&path).unwrap();
        assert_eq!(back[0].0, "site.example");
        assert_eq!(back[0].1, vs[0].vec);
    }
}
