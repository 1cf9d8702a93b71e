//! OFAEMB: little-endian embedding table files.
//!
//! ```text
//! "OFAE"  u32 version=1  u32 dim  u64 count
//! count x [u32 key_len][key utf-8][dim x f32]
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OFAE";
pub const VERSION: u32 = 1;

pub fn write_emb<W: Write>(table: &EmbeddingTable, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(table.dim() as u32).to_le_bytes())?;
    w.write_all(&(table.len() as u64).to_le_bytes())?;
    for (key, vec) in table.iter() {
        w.write_all(&(key.len() as u32).to_le_bytes())?;
        w.write_all(key.as_bytes())?;
        for v in vec {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn write_emb_file(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_emb(table, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::EmbFormat(format!(
                "truncated: {what} needs {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn parse_emb(bytes: &[u8]) -> Result<EmbeddingTable> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic").ok() != Some(MAGIC.as_slice()) {
        return Err(Error::EmbFormat("bad magic".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::EmbFormat(format!("unsupported version {version}")));
    }
    let dim = c.u32("dim")? as usize;
    if dim == 0 {
        return Err(Error::EmbFormat("dimension zero".into()));
    }
    let count = c.u64("count")?;
    let mut entries = BTreeMap::new();
    for i in 0..count {
        let klen = c.u32("key length")? as usize;
        let key = std::str::from_utf8(c.take(klen, "key")?)
            .map_err(|_| Error::EmbFormat(format!("record {i}: key is not utf-8")))?
            .to_string();
        let raw = c.take(dim * 4, "vector")?;
        let vec: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::EmbFormat(format!("record {i}: non-finite component")));
        }
        if entries.insert(key.clone(), vec).is_some() {
            return Err(Error::EmbFormat(format!("duplicate key {key:?}")));
        }
    }
    if c.pos != bytes.len() {
        return Err(Error::EmbFormat(format!(
            "{} trailing bytes after {count} records",
            bytes.len() - c.pos
        )));
    }
    EmbeddingTable::from_entries(dim, entries)
}

pub fn read_emb<R: Read>(mut r: R) -> Result<EmbeddingTable> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::EmbFormat(e.to_string()))?;
    parse_emb(&buf)
}

pub fn read_emb_file(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_emb(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bytes_of(t: &EmbeddingTable) -> Vec<u8> {
        let mut out = Vec::new();
        write_emb(t, &mut out).unwrap();
        out
    }

    #[test]
    fn exact_layout() {
        let mut t = EmbeddingTable::new(2);
        t.insert("ab".into(), vec![1.0, -2.5]).unwrap();
        let b = bytes_of(&t);
        let mut want = Vec::new();
        want.extend_from_slice(b"OFAE");
        want.extend_from_slice(&1u32.to_le_bytes());
        want.extend_from_slice(&2u32.to_le_bytes());
        want.extend_from_slice(&1u64.to_le_bytes());
        want.extend_from_slice(&2u32.to_le_bytes());
        want.extend_from_slice(b"ab");
        want.extend_from_slice(&1.0f32.to_le_bytes());
        want.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(b, want);
    }

    #[test]
    fn rejects_bad_magic_truncation_and_duplicates() {
        let mut t = EmbeddingTable::new(3);
        t.insert("k".into(), vec![0.0, 1.0, 2.0]).unwrap();
        let good = bytes_of(&t);

        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(parse_emb(&bad).unwrap_err().to_string().contains("bad magic"));

        let mut short = good.clone();
        short[12..20].copy_from_slice(&2u64.to_le_bytes());
        assert!(parse_emb(&short).unwrap_err().to_string().contains("truncated"));

        let mut dup = good.clone();
        dup[12..20].copy_from_slice(&2u64.to_le_bytes());
        dup.extend_from_slice(&good[20..]);
        assert!(parse_emb(&dup).unwrap_err().to_string().contains("duplicate key"));

        assert!(parse_emb(b"OF").unwrap_err().to_string().contains("bad magic"));
    }

    #[test]
    fn empty_table_round_trips() {
        let t = EmbeddingTable::new(5);
        let back = parse_emb(&bytes_of(&t)).unwrap();
        assert_eq!(back, t);
        assert_eq!(bytes_of(&t).len(), 20);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            dim in 1usize..8,
            rows in prop::collection::btree_map("[a-z ]{0,10}", prop::collection::vec(-1e6f32..1e6, 8), 0..12),
        ) {
            let mut t = EmbeddingTable::new(dim);
            for (k, v) in rows {
                t.insert(k, v[..dim].to_vec()).unwrap();
            }
            let b = bytes_of(&t);
            let back = parse_emb(&b).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(bytes_of(&back), b);
        }
    }
}
