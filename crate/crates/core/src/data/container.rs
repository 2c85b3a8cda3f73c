//! The `UWNO` binary container: a flat list of named little-endian arrays.
//!
//! ```text
//! "UWNO" | version u16 | count u32 | record*
//! record = name_len u16 | name utf-8 | dtype u8 (0 f64, 1 i64) | ndim u8 | shape u64* | payload
//! ```

use std::collections::HashSet;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"UWNO";
pub const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic at byte 0 (expected \"UWNO\")")]
    BadMagic,
    #[error("unsupported container version {found} at byte 4 (expected {VERSION})")]
    BadVersion { found: u16 },
    #[error("truncated {what} at byte {offset}{}", record.as_ref().map(|r| format!(" in record {r:?}")).unwrap_or_default())]
    Truncated {
        offset: usize,
        what: &'static str,
        record: Option<String>,
    },
    #[error("invalid {what} at byte {offset}{}", record.as_ref().map(|r| format!(" in record {r:?}")).unwrap_or_default())]
    Invalid {
        offset: usize,
        what: String,
        record: Option<String>,
    },
    #[error("{0} trailing bytes after the last record")]
    Trailing(usize),
    #[error("duplicate record name {0:?}")]
    DuplicateName(String),
    #[error("record {name:?}: {msg}")]
    Record { name: String, msg: String },
    #[error("missing record {0:?}")]
    Missing(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    I64(Vec<i64>),
}

/// One named array.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

impl Record {
    pub fn f64(name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> Record {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "record shape/data mismatch");
        Record {
            name: name.into(),
            shape: shape.to_vec(),
            data: ArrayData::F64(data),
        }
    }

    pub fn i64(name: impl Into<String>, shape: &[usize], data: Vec<i64>) -> Record {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "record shape/data mismatch");
        Record {
            name: name.into(),
            shape: shape.to_vec(),
            data: ArrayData::I64(data),
        }
    }

    /// Text stored as an i64 array of bytes.
    pub fn text(name: impl Into<String>, text: &str) -> Record {
        let bytes: Vec<i64> = text.bytes().map(i64::from).collect();
        let n = bytes.len();
        Record::i64(name, &[n], bytes)
    }

    pub fn scalar_i64(name: impl Into<String>, value: i64) -> Record {
        Record::i64(name, &[1], vec![value])
    }

    pub fn as_f64(&self) -> Result<&[f64], ContainerError> {
        match &self.data {
            ArrayData::F64(v) => Ok(v),
            ArrayData::I64(_) => Err(self.err("expected f64 data")),
        }
    }

    pub fn as_i64(&self) -> Result<&[i64], ContainerError> {
        match &self.data {
            ArrayData::I64(v) => Ok(v),
            ArrayData::F64(_) => Err(self.err("expected i64 data")),
        }
    }

    pub fn as_text(&self) -> Result<String, ContainerError> {
        let bytes = self
            .as_i64()?
            .iter()
            .map(|&b| u8::try_from(b).map_err(|_| self.err("text byte out of range")))
            .collect::<Result<Vec<u8>, _>>()?;
        String::from_utf8(bytes).map_err(|_| self.err("text is not UTF-8"))
    }

    pub fn as_scalar_i64(&self) -> Result<i64, ContainerError> {
        match self.as_i64()? {
            [v] => Ok(*v),
            _ => Err(self.err("expected a single i64")),
        }
    }

    fn err(&self, msg: &str) -> ContainerError {
        ContainerError::Record {
            name: self.name.clone(),
            msg: msg.to_string(),
        }
    }

    fn len(&self) -> usize {
        match &self.data {
            ArrayData::F64(v) => v.len(),
            ArrayData::I64(v) => v.len(),
        }
    }
}

/// Looks a record up by name.
pub fn find<'a>(records: &'a [Record], name: &str) -> Result<&'a Record, ContainerError> {
    records
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| ContainerError::Missing(name.to_string()))
}

pub fn encode(records: &[Record]) -> Result<Vec<u8>, ContainerError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(records.len()).map_err(|_| ContainerError::Invalid {
        offset: 6,
        what: "record count".into(),
        record: None,
    })?;
    out.extend_from_slice(&count.to_le_bytes());
    for r in records {
        if !seen.insert(r.name.as_str()) {
            return Err(ContainerError::DuplicateName(r.name.clone()));
        }
        if r.shape.iter().product::<usize>() != r.len() {
            return Err(r.err("shape does not match payload length"));
        }
        let name_len = u16::try_from(r.name.len()).map_err(|_| r.err("name longer than 65535 bytes"))?;
        let ndim = u8::try_from(r.shape.len()).map_err(|_| r.err("more than 255 dimensions"))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.push(match r.data {
            ArrayData::F64(_) => 0,
            ArrayData::I64(_) => 1,
        });
        out.push(ndim);
        for &d in &r.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &r.data {
            ArrayData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    record: Option<String>,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ContainerError> {
        if self.buf.len() - self.pos < n {
            return Err(ContainerError::Truncated {
                offset: self.pos,
                what,
                record: self.record.clone(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], ContainerError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<Record>, ContainerError> {
    let mut r = Reader { buf, pos: 0, record: None };
    if r.take(4, "magic").map_err(|_| ContainerError::BadMagic)? != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let version = u16::from_le_bytes(r.array("version")?);
    if version != VERSION {
        return Err(ContainerError::BadVersion { found: version });
    }
    let count = u32::from_le_bytes(r.array("record count")?);
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for _ in 0..count {
        r.record = None;
        let name_len = u16::from_le_bytes(r.array("name length")?) as usize;
        let name_at = r.pos;
        let name = std::str::from_utf8(r.take(name_len, "record name")?)
            .map_err(|_| ContainerError::Invalid {
                offset: name_at,
                what: "UTF-8 record name".into(),
                record: None,
            })?
            .to_string();
        r.record = Some(name.clone());
        if !seen.insert(name.clone()) {
            return Err(ContainerError::DuplicateName(name));
        }
        let dtype_at = r.pos;
        let [dtype] = r.array::<1>("dtype")?;
        if dtype > 1 {
            return Err(ContainerError::Invalid {
                offset: dtype_at,
                what: format!("dtype code {dtype}"),
                record: Some(name),
            });
        }
        let [ndim] = r.array::<1>("ndim")?;
        let mut shape = Vec::with_capacity(ndim as usize);
        let mut numel: usize = 1;
        for _ in 0..ndim {
            let at = r.pos;
            let d = u64::from_le_bytes(r.array("shape")?);
            let d = usize::try_from(d).ok().filter(|&d| numel.checked_mul(d).is_some());
            let Some(d) = d else {
                return Err(ContainerError::Invalid {
                    offset: at,
                    what: "shape extent".into(),
                    record: Some(name),
                });
            };
            numel *= d;
            shape.push(d);
        }
        let payload_at = r.pos;
        let bytes = numel.checked_mul(8).ok_or_else(|| ContainerError::Invalid {
            offset: payload_at,
            what: "payload size".into(),
            record: Some(name.clone()),
        })?;
        let payload = r.take(bytes, "payload")?;
        let words = payload.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).expect("8 bytes"));
        let data = if dtype == 0 {
            ArrayData::F64(words.map(f64::from_le_bytes).collect())
        } else {
            ArrayData::I64(words.map(i64::from_le_bytes).collect())
        };
        records.push(Record { name, shape, data });
    }
    if r.pos != buf.len() {
        return Err(ContainerError::Trailing(buf.len() - r.pos));
    }
    Ok(records)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ContainerError + '_ {
    move |source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn container_write(path: impl AsRef<Path>, records: &[Record]) -> Result<(), ContainerError> {
    let path = path.as_ref();
    let bytes = encode(records)?;
    // Write beside the target and rename so readers never see a partial file.
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn container_read(path: impl AsRef<Path>) -> Result<Vec<Record>, ContainerError> {
    let path = path.as_ref();
    decode(&std::fs::read(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_ten_bytes() {
        let bytes = encode(&[]).unwrap();
        assert_eq!(bytes.len(), 10);
        assert_eq!(&bytes[..4], b"UWNO");
        assert!(decode(&bytes).unwrap().is_empty());
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let recs = vec![
            Record::f64("x", &[2, 2], vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300]),
            Record::i64("n", &[3], vec![-1, i64::MAX, 0]),
            Record::text("meta", "{\"k\":1}"),
            Record::f64("s", &[], vec![2.5]),
        ];
        let back = decode(&encode(&recs).unwrap()).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            if let (ArrayData::F64(x), ArrayData::F64(y)) = (&a.data, &b.data) {
                assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }
        assert_eq!(find(&back, "meta").unwrap().as_text().unwrap(), "{\"k\":1}");
        assert_eq!(find(&back, "n").unwrap().as_i64().unwrap()[1], i64::MAX);
    }

    #[test]
    fn corrupted_length_names_record() {
        let mut bytes = encode(&[Record::f64("weights", &[4], vec![1.0; 4])]).unwrap();
        // name_len(2) + "weights"(7) + dtype + ndim, then the first extent
        let extent_at = 10 + 2 + 7 + 2;
        bytes[extent_at] = 9;
        let err = decode(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("weights") && msg.contains("byte"), "{msg}");
        assert!(matches!(err, ContainerError::Truncated { what: "payload", .. }));
    }

    #[test]
    fn bad_header_detected() {
        let mut bytes = encode(&[]).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(ContainerError::BadMagic)));
        let mut bytes = encode(&[]).unwrap();
        bytes[4] = 7;
        assert!(matches!(decode(&bytes), Err(ContainerError::BadVersion { found: 7 })));
        assert!(matches!(decode(b"UW"), Err(ContainerError::BadMagic)));
        let mut bytes = encode(&[]).unwrap();
        bytes.push(0);
        assert!(matches!(decode(&bytes), Err(ContainerError::Trailing(1))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let r = Record::f64("a", &[1], vec![1.0]);
        assert!(matches!(encode(&[r.clone(), r]), Err(ContainerError::DuplicateName(_))));
    }
}
