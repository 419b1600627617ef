//! Pre-trained word embeddings in the word2vec binary layout.
//!
//! Layout: an ASCII header `"<vocab_size> <dim>\n"`, then for every entry the
//! term bytes, a single space, and `dim` little-endian `f32` values. Writers
//! commonly append `\n` after each vector; the reader accepts both forms.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header at byte {offset}: {message}")]
    Header { offset: u64, message: String },
    #[error("unexpected end of file at byte {offset} while reading {what} of entry {entry}")]
    Truncated {
        offset: u64,
        entry: usize,
        what: &'static str,
    },
    #[error("duplicate term {term:?} at byte {offset}")]
    DuplicateTerm { term: String, offset: u64 },
    #[error("empty term at byte {offset}")]
    EmptyTerm { offset: u64 },
    #[error("trailing data after {entries} entries at byte {offset}")]
    TrailingData { entries: usize, offset: u64 },
    #[error("invalid embedding: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    /// Load at most this many entries, in file order.
    pub limit: Option<usize>,
    /// Lowercase terms at load time; on collision the first occurrence wins.
    pub fold_case: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            limit: None,
            fold_case: true,
        }
    }
}

/// Vocabulary plus one dense row of `dim` floats per term.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, rows: Vec<(String, Vec<f32>)>) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::Invalid("dimension must be positive".into()));
        }
        let mut m = EmbeddingMatrix {
            dim,
            terms: Vec::with_capacity(rows.len()),
            index: HashMap::with_capacity(rows.len()),
            data: Vec::with_capacity(rows.len() * dim),
        };
        for (term, vec) in rows {
            if vec.len() != dim {
                return Err(EmbeddingError::Invalid(format!(
                    "row {term:?} has {} components, expected {dim}",
                    vec.len()
                )));
            }
            if m.index.contains_key(&term) {
                return Err(EmbeddingError::Invalid(format!("duplicate term {term:?}")));
            }
            m.push(term, &vec);
        }
        Ok(m)
    }

    fn push(&mut self, term: String, vec: &[f32]) {
        self.index.insert(term.clone(), self.terms.len());
        self.terms.push(term);
        self.data.extend_from_slice(vec);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in row order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn row(&self, idx: usize) -> &[f32] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Exact-match lookup; `None` for out-of-vocabulary terms.
    pub fn lookup(&self, term: &str) -> Option<&[f32]> {
        self.index_of(term).map(|i| self.row(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.terms
            .iter()
            .enumerate()
            .map(move |(i, t)| (t.as_str(), self.row(i)))
    }

    /// SHA-256 over dimension, terms and raw vector bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for (term, row) in self.iter() {
            h.update((term.len() as u64).to_le_bytes());
            h.update(term.as_bytes());
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: BufRead> CountingReader<R> {
    fn peek(&mut self) -> io::Result<Option<u8>> {
        Ok(self.inner.fill_buf()?.first().copied())
    }

    fn consume_byte(&mut self) {
        self.inner.consume(1);
        self.offset += 1;
    }

    fn read_until(&mut self, delim: u8, buf: &mut Vec<u8>) -> io::Result<bool> {
        let n = self.inner.read_until(delim, buf)?;
        self.offset += n as u64;
        if buf.last() == Some(&delim) {
            buf.pop();
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> io::Result<bool> {
        let mut filled = 0;
        while filled < buf.len() {
            let n = self.inner.read(&mut buf[filled..])?;
            if n == 0 {
                self.offset += filled as u64;
                return Ok(false);
            }
            filled += n;
        }
        self.offset += filled as u64;
        Ok(true)
    }
}

fn parse_header<R: BufRead>(r: &mut CountingReader<R>) -> Result<(usize, usize), EmbeddingError> {
    let mut line = Vec::new();
    if !r.read_until(b'\n', &mut line)? {
        return Err(EmbeddingError::Header {
            offset: r.offset,
            message: "missing newline after header".into(),
        });
    }
    let text = String::from_utf8_lossy(&line);
    let mut parts = text.split_ascii_whitespace();
    let mut field = |name: &str| -> Result<usize, EmbeddingError> {
        parts
            .next()
            .ok_or_else(|| EmbeddingError::Header {
                offset: 0,
                message: format!("missing {name}"),
            })?
            .parse()
            .map_err(|e| EmbeddingError::Header {
                offset: 0,
                message: format!("bad {name}: {e}"),
            })
    };
    let vocab = field("vocabulary size")?;
    let dim = field("dimension")?;
    if parts.next().is_some() {
        return Err(EmbeddingError::Header {
            offset: 0,
            message: "extra fields".into(),
        });
    }
    if dim == 0 {
        return Err(EmbeddingError::Header {
            offset: 0,
            message: "dimension must be positive".into(),
        });
    }
    Ok((vocab, dim))
}

/// Reads a word2vec binary stream.
pub fn read_word2vec_binary<R: BufRead>(
    reader: R,
    opts: LoadOptions,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut r = CountingReader {
        inner: reader,
        offset: 0,
    };
    let (vocab, dim) = parse_header(&mut r)?;
    let take = opts.limit.map_or(vocab, |l| l.min(vocab));

    let mut m = EmbeddingMatrix {
        dim,
        terms: Vec::with_capacity(take),
        index: HashMap::with_capacity(take),
        data: Vec::with_capacity(take * dim),
    };
    // Raw (unfolded) terms seen so far, for duplicate detection.
    let mut raw_seen: std::collections::HashSet<Vec<u8>> = Default::default();
    let mut term_buf = Vec::new();
    let mut payload = vec![0u8; dim * 4];
    let mut vec = vec![0f32; dim];

    for entry in 0..take {
        while r.peek()? == Some(b'\n') {
            r.consume_byte();
        }
        let term_offset = r.offset;
        term_buf.clear();
        if !r.read_until(b' ', &mut term_buf)? {
            return Err(EmbeddingError::Truncated {
                offset: r.offset,
                entry,
                what: "term",
            });
        }
        if term_buf.is_empty() {
            return Err(EmbeddingError::EmptyTerm {
                offset: term_offset,
            });
        }
        if !r.read_exact(&mut payload)? {
            return Err(EmbeddingError::Truncated {
                offset: r.offset,
                entry,
                what: "vector",
            });
        }
        for (v, chunk) in vec.iter_mut().zip(payload.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
        if !raw_seen.insert(term_buf.clone()) {
            return Err(EmbeddingError::DuplicateTerm {
                term: String::from_utf8_lossy(&term_buf).into_owned(),
                offset: term_offset,
            });
        }
        let mut term = String::from_utf8_lossy(&term_buf).into_owned();
        if opts.fold_case {
            term = term.to_lowercase();
            if m.index.contains_key(&term) {
                continue;
            }
        }
        m.push(term, &vec);
    }

    if take == vocab {
        loop {
            match r.peek()? {
                None => break,
                Some(b) if b.is_ascii_whitespace() => r.consume_byte(),
                Some(_) => {
                    return Err(EmbeddingError::TrailingData {
                        entries: vocab,
                        offset: r.offset,
                    })
                }
            }
        }
    }
    Ok(m)
}

pub fn load_word2vec_binary(
    path: impl AsRef<Path>,
    opts: LoadOptions,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    let file = File::open(path)?;
    read_word2vec_binary(BufReader::new(file), opts)
}

/// Writes `matrix` in the word2vec binary layout.
pub fn write_word2vec_binary<W: Write>(
    matrix: &EmbeddingMatrix,
    writer: W,
    trailing_newline: bool,
) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{} {}", matrix.len(), matrix.dim())?;
    for (term, row) in matrix.iter() {
        w.write_all(term.as_bytes())?;
        w.write_all(b" ")?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
        if trailing_newline {
            w.write_all(b"\n")?;
        }
    }
    w.flush()
}

pub fn save_word2vec_binary(
    matrix: &EmbeddingMatrix,
    path: impl AsRef<Path>,
    trailing_newline: bool,
) -> io::Result<()> {
    write_word2vec_binary(matrix, File::create(path)?, trailing_newline)
}
