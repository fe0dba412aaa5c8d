//! Little-endian binary vector files.
//!
//! ```text
//! dense  "MLEV" | version u32 | count u64 | dim u32 | dtype u8 | ids | count*dim f32
//! token  "MLTV" | version u32 | count u64 | dim u32 | dtype u8 | per record: id, ntok u32, ntok*dim f32
//! sparse "MLSV" | version u32 | count u64 | vocab u32 | per record: id, nnz u32, nnz*(u32, f32)
//! id     u16 byte length | UTF-8 bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DENSE_MAGIC: &[u8; 4] = b"MLEV";
pub const TOKEN_MAGIC: &[u8; 4] = b"MLTV";
pub const SPARSE_MAGIC: &[u8; 4] = b"MLSV";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

/// Dense rows as read from or written to an `MLEV` file.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRecords {
    pub dim: usize,
    pub ids: Vec<String>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenRecords {
    pub dim: usize,
    pub ids: Vec<String>,
    /// Row-major token vectors per record.
    pub tokens: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRecords {
    pub vocab_size: u32,
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<(u32, f32)>>,
}

pub(crate) struct Reader<R> {
    inner: R,
    kind: &'static str,
}

impl<R: Read> Reader<R> {
    pub(crate) fn new(inner: R, kind: &'static str) -> Self {
        Reader { inner, kind }
    }

    pub(crate) fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::format(self.kind, format!("truncated input: {e}")))?;
        Ok(buf)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::format(self.kind, format!("truncated input: {e}")))?;
        Ok(buf)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.bytes(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub(crate) fn id(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let raw = self.bytes(len)?;
        String::from_utf8(raw).map_err(|_| Error::format(self.kind, "id is not valid UTF-8"))
    }

    pub(crate) fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let found = self.array::<4>()?;
        if &found != magic {
            return Err(Error::format(self.kind, "bad magic"));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(
                self.kind,
                format!("unsupported version {version}"),
            ));
        }
        Ok(())
    }

    pub(crate) fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::format(self.kind, "trailing bytes after payload")),
            Err(e) => Err(Error::format(self.kind, e.to_string())),
        }
    }

    fn count(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::format(self.kind, "record count overflow"))
    }

    fn dtype(&mut self) -> Result<()> {
        match self.u8()? {
            DTYPE_F32 => Ok(()),
            other => Err(Error::format(self.kind, format!("unsupported dtype {other}"))),
        }
    }
}

pub(crate) fn put_id(out: &mut Vec<u8>, id: &str) -> Result<()> {
    let len = u16::try_from(id.len())
        .map_err(|_| Error::InvalidArgument(format!("id longer than 65535 bytes: {id:.32}...")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(id.as_bytes());
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn save(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn dim_u32(dim: usize) -> Result<u32> {
    u32::try_from(dim).map_err(|_| Error::InvalidArgument("dimension overflows u32".into()))
}

pub fn encode_dense(records: &DenseRecords) -> Result<Vec<u8>> {
    if records.data.len() != records.ids.len() * records.dim {
        return Err(Error::Dimension {
            expected: records.ids.len() * records.dim,
            found: records.data.len(),
        });
    }
    let mut out = Vec::with_capacity(21 + records.data.len() * 4);
    out.extend_from_slice(DENSE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.ids.len() as u64).to_le_bytes());
    out.extend_from_slice(&dim_u32(records.dim)?.to_le_bytes());
    out.push(DTYPE_F32);
    for id in &records.ids {
        put_id(&mut out, id)?;
    }
    put_f32s(&mut out, &records.data);
    Ok(out)
}

pub fn decode_dense(reader: impl Read) -> Result<DenseRecords> {
    let mut r = Reader::new(reader, "dense vector");
    r.header(DENSE_MAGIC)?;
    let count = r.count()?;
    let dim = r.u32()? as usize;
    r.dtype()?;
    let ids = (0..count).map(|_| r.id()).collect::<Result<Vec<_>>>()?;
    let data = r.f32s(count * dim)?;
    r.expect_eof()?;
    Ok(DenseRecords { dim, ids, data })
}

pub fn write_dense(path: &Path, records: &DenseRecords) -> Result<()> {
    save(path, &encode_dense(records)?)
}

pub fn read_dense(path: &Path) -> Result<DenseRecords> {
    decode_dense(open(path)?)
}

pub fn encode_tokens(records: &TokenRecords) -> Result<Vec<u8>> {
    if records.ids.len() != records.tokens.len() {
        return Err(Error::InvalidArgument("ids and token lists differ in length".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(TOKEN_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.ids.len() as u64).to_le_bytes());
    out.extend_from_slice(&dim_u32(records.dim)?.to_le_bytes());
    out.push(DTYPE_F32);
    for (id, toks) in records.ids.iter().zip(&records.tokens) {
        if records.dim == 0 || toks.len() % records.dim != 0 {
            return Err(Error::Dimension {
                expected: records.dim,
                found: toks.len(),
            });
        }
        put_id(&mut out, id)?;
        out.extend_from_slice(&((toks.len() / records.dim) as u32).to_le_bytes());
        put_f32s(&mut out, toks);
    }
    Ok(out)
}

pub fn decode_tokens(reader: impl Read) -> Result<TokenRecords> {
    let mut r = Reader::new(reader, "token vector");
    r.header(TOKEN_MAGIC)?;
    let count = r.count()?;
    let dim = r.u32()? as usize;
    r.dtype()?;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    let mut tokens = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        ids.push(r.id()?);
        let ntok = r.u32()? as usize;
        tokens.push(r.f32s(ntok * dim)?);
    }
    r.expect_eof()?;
    Ok(TokenRecords { dim, ids, tokens })
}

pub fn write_tokens(path: &Path, records: &TokenRecords) -> Result<()> {
    save(path, &encode_tokens(records)?)
}

pub fn read_tokens(path: &Path) -> Result<TokenRecords> {
    decode_tokens(open(path)?)
}

pub fn encode_sparse(records: &SparseRecords) -> Result<Vec<u8>> {
    if records.ids.len() != records.vectors.len() {
        return Err(Error::InvalidArgument("ids and vectors differ in length".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(SPARSE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.ids.len() as u64).to_le_bytes());
    out.extend_from_slice(&records.vocab_size.to_le_bytes());
    for (id, vector) in records.ids.iter().zip(&records.vectors) {
        put_id(&mut out, id)?;
        out.extend_from_slice(&(vector.len() as u32).to_le_bytes());
        for (index, weight) in vector {
            out.extend_from_slice(&index.to_le_bytes());
            out.extend_from_slice(&weight.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_sparse(reader: impl Read) -> Result<SparseRecords> {
    let mut r = Reader::new(reader, "sparse vector");
    r.header(SPARSE_MAGIC)?;
    let count = r.count()?;
    let vocab_size = r.u32()?;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    let mut vectors = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        ids.push(r.id()?);
        let nnz = r.u32()? as usize;
        let mut v = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            v.push((r.u32()?, r.f32()?));
        }
        vectors.push(v);
    }
    r.expect_eof()?;
    Ok(SparseRecords {
        vocab_size,
        ids,
        vectors,
    })
}

pub fn write_sparse(path: &Path, records: &SparseRecords) -> Result<()> {
    save(path, &encode_sparse(records)?)
}

pub fn read_sparse(path: &Path) -> Result<SparseRecords> {
    decode_sparse(open(path)?)
}
