//! Exact per-entity binary field dumps.
//!
//! Layout (little endian): the magic `FITDUMP1`, 32 raw fingerprint bytes,
//! `t` and `omega` as f64, a u32 array count, then per array a u16 name length,
//! the UTF-8 name, a kind byte (0 real, 1 complex), a u64 length and the values
//! (complex values as interleaved re/im pairs).

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::FieldSnapshot;

use super::output::write_atomic;

const MAGIC: &[u8; 8] = b"FITDUMP1";

#[derive(Debug, Clone, PartialEq)]
pub enum DumpArray {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    /// Hex SHA-256 grid fingerprint.
    pub fingerprint: String,
    pub t: f64,
    /// Zero for time-domain data.
    pub omega: f64,
    pub arrays: Vec<(String, DumpArray)>,
}

impl FieldDump {
    pub fn from_snapshot(fingerprint: &str, s: &FieldSnapshot) -> Self {
        Self {
            fingerprint: fingerprint.to_string(),
            t: s.t,
            omega: 0.0,
            arrays: vec![
                ("e_total".into(), DumpArray::Real(s.e_total.clone())),
                ("e_irr".into(), DumpArray::Real(s.e_irr.clone())),
                ("e_rem".into(), DumpArray::Real(s.e_rem.clone())),
                ("b".into(), DumpArray::Real(s.b.clone())),
            ],
        }
    }

    pub fn to_snapshot(&self, path: &str) -> Result<FieldSnapshot> {
        Ok(FieldSnapshot {
            t: self.t,
            e_total: self.real("e_total", path)?.to_vec(),
            e_irr: self.real("e_irr", path)?.to_vec(),
            e_rem: self.real("e_rem", path)?.to_vec(),
            b: self.real("b", path)?.to_vec(),
        })
    }

    fn find(&self, name: &str, path: &str) -> Result<&DumpArray> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
            .ok_or_else(|| Error::Format {
                path: path.to_string(),
                reason: format!("array `{name}` missing"),
            })
    }

    pub fn real(&self, name: &str, path: &str) -> Result<&[f64]> {
        match self.find(name, path)? {
            DumpArray::Real(v) => Ok(v),
            DumpArray::Complex(_) => Err(Error::Format {
                path: path.to_string(),
                reason: format!("array `{name}` is complex"),
            }),
        }
    }

    pub fn complex(&self, name: &str, path: &str) -> Result<&[Complex64]> {
        match self.find(name, path)? {
            DumpArray::Complex(v) => Ok(v),
            DumpArray::Real(_) => Err(Error::Format {
                path: path.to_string(),
                reason: format!("array `{name}` is real"),
            }),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let fp = decode_hex(&self.fingerprint).ok_or_else(|| {
            Error::Config(format!("fingerprint `{}` is not 64 hex digits", self.fingerprint))
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&fp);
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&self.omega.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, arr) in &self.arrays {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len()).map_err(|_| Error::Config(format!("array name `{name}` too long")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(bytes);
            match arr {
                DumpArray::Real(v) => {
                    out.push(0);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                DumpArray::Complex(v) => {
                    out.push(1);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v {
                        out.extend_from_slice(&x.re.to_le_bytes());
                        out.extend_from_slice(&x.im.to_le_bytes());
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8], path: &str) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(8)? != MAGIC {
            return Err(r.fail("not a FITDUMP1 file"));
        }
        let fingerprint: String = r.take(32)?.iter().map(|b| format!("{b:02x}")).collect();
        let t = r.f64()?;
        let omega = r.f64()?;
        let count = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        let mut arrays = Vec::new();
        for _ in 0..count {
            let len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(r.take(len)?).map(str::to_string).ok();
            let name = name.ok_or_else(|| r.fail("array name is not UTF-8"))?;
            let kind = r.take(1)?[0];
            let n = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
            let n = usize::try_from(n).map_err(|_| r.fail("array too long"))?;
            let width = match kind {
                0 => 8,
                1 => 16,
                k => return Err(r.fail(&format!("unknown array kind {k}"))),
            };
            if n.checked_mul(width).is_none_or(|b| b > r.remaining()) {
                return Err(r.fail(&format!("array `{name}` truncated")));
            }
            let arr = if kind == 0 {
                DumpArray::Real((0..n).map(|_| r.f64()).collect::<Result<_>>()?)
            } else {
                DumpArray::Complex(
                    (0..n)
                        .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
                        .collect::<Result<_>>()?,
                )
            };
            arrays.push((name, arr));
        }
        if r.remaining() != 0 {
            return Err(r.fail("trailing bytes"));
        }
        Ok(Self {
            fingerprint,
            t,
            omega,
            arrays,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.encode()?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, &path.display().to_string())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl Reader<'_> {
    fn fail(&self, reason: &str) -> Error {
        Error::Format {
            path: self.path.to_string(),
            reason: format!("{reason} (at byte {})", self.pos),
        }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.remaining() < n {
            return Err(self.fail("unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode_hex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = u8::from_str_radix(s.get(2 * i..2 * i + 2)?, 16).ok()?;
    }
    Some(out)
}
