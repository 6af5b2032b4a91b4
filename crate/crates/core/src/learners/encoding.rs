//! Canonical byte encoding of hypotheses.
//!
//! Layout: one kind byte, a fixed little-endian header, then the payload bits
//! packed least-significant-bit first and padded to a whole byte.
//!
//! | kind | tag | header | payload bits per unit |
//! |------|-----|--------|-----------------------|
//! | Constant | 0 | none | 1 (the output) |
//! | LinearThreshold | 1 | weight kind `u8` (0 sign, 1 real), `d: u32`, threshold `f64` | 1 per sign weight or 64 per real weight |
//! | ProjectedQuantizedThreshold | 2 | `d: u32`, `ell: u32`, `frac: u8`, `int: u8`, threshold `f64` | `1 + int + frac` per kept coordinate |
//! | MajorityThreshold | 3 | `d: u32`, `t: u32`, threshold `f64` | 1 per coordinate |
//! | SubsetMatchThreshold | 4 | `d: u32`, `ell: u32`, threshold `f64` | `ceil(log2 d)` index bits + 1 sign bit per entry |
//!
//! A sign bit of 1 means `+1` for weights and means negative for quantized magnitudes.

use super::{Hypothesis, Weights};
use crate::error::{invalid, Result};

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("byte") |= 1 << (self.len % 8);
        }
        self.len += 1;
    }

    fn push_bits(&mut self, value: u64, width: u32) {
        for i in 0..width {
            self.push(value >> i & 1 == 1);
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn bit(&mut self) -> Result<bool> {
        let Some(&b) = self.bytes.get(self.pos / 8) else {
            return invalid("encoding truncated");
        };
        let v = b >> (self.pos % 8) & 1 == 1;
        self.pos += 1;
        Ok(v)
    }

    fn bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for i in 0..width {
            if self.bit()? {
                v |= 1 << i;
            }
        }
        Ok(v)
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return invalid("encoding truncated");
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn payload(&self) -> BitReader<'a> {
        BitReader { bytes: &self.bytes[self.pos..], pos: 0 }
    }
}

/// Bits needed to index `d` coordinates.
pub fn index_bits(d: usize) -> u32 {
    if d <= 1 {
        0
    } else {
        usize::BITS - (d - 1).leading_zeros()
    }
}

fn sign_bit(s: i8) -> bool {
    s > 0
}

fn bit_sign(b: bool) -> i8 {
    if b {
        1
    } else {
        -1
    }
}

pub fn encode(h: &Hypothesis) -> Vec<u8> {
    let mut out = Vec::new();
    let mut w = BitWriter::default();
    match h {
        Hypothesis::Constant { value } => {
            out.push(0);
            w.push(*value);
        }
        Hypothesis::LinearThreshold { weights, threshold } => {
            out.push(1);
            match weights {
                Weights::Sign(s) => {
                    out.push(0);
                    out.extend((s.len() as u32).to_le_bytes());
                    out.extend(threshold.to_le_bytes());
                    s.iter().for_each(|&x| w.push(sign_bit(x)));
                }
                Weights::Real(v) => {
                    out.push(1);
                    out.extend((v.len() as u32).to_le_bytes());
                    out.extend(threshold.to_le_bytes());
                    v.iter().for_each(|x| w.push_bits(x.to_bits(), 64));
                }
            }
        }
        Hypothesis::ProjectedQuantizedThreshold { d, frac_bits, int_bits, codes, threshold } => {
            out.push(2);
            out.extend((*d as u32).to_le_bytes());
            out.extend((codes.len() as u32).to_le_bytes());
            out.push(*frac_bits);
            out.push(*int_bits);
            out.extend(threshold.to_le_bytes());
            let width = u32::from(*frac_bits) + u32::from(*int_bits);
            for &c in codes {
                w.push(c < 0);
                w.push_bits(c.unsigned_abs(), width);
            }
        }
        Hypothesis::MajorityThreshold { d, signs, threshold } => {
            out.push(3);
            out.extend((*d as u32).to_le_bytes());
            out.extend((signs.len() as u32).to_le_bytes());
            out.extend(threshold.to_le_bytes());
            signs.iter().for_each(|&x| w.push(sign_bit(x)));
        }
        Hypothesis::SubsetMatchThreshold { d, indices, signs, threshold } => {
            out.push(4);
            out.extend((*d as u32).to_le_bytes());
            out.extend((indices.len() as u32).to_le_bytes());
            out.extend(threshold.to_le_bytes());
            let width = index_bits(*d);
            for (&i, &s) in indices.iter().zip(signs) {
                w.push_bits(u64::from(i), width);
                w.push(sign_bit(s));
            }
        }
    }
    out.extend(w.bytes);
    out
}

pub fn decode(bytes: &[u8]) -> Result<Hypothesis> {
    let Some((&tag, rest)) = bytes.split_first() else {
        return invalid("empty encoding");
    };
    let mut hd = Header { bytes: rest, pos: 0 };
    let h = match tag {
        0 => Hypothesis::Constant { value: hd.payload().bit()? },
        1 => {
            let kind = hd.u8()?;
            let d = hd.u32()? as usize;
            let threshold = hd.f64()?;
            let mut r = hd.payload();
            let weights = match kind {
                0 => Weights::Sign((0..d).map(|_| r.bit().map(bit_sign)).collect::<Result<_>>()?),
                1 => Weights::Real(
                    (0..d).map(|_| r.bits(64).map(f64::from_bits)).collect::<Result<_>>()?,
                ),
                _ => return invalid("unknown weight kind"),
            };
            Hypothesis::LinearThreshold { weights, threshold }
        }
        2 => {
            let d = hd.u32()? as usize;
            let ell = hd.u32()? as usize;
            let frac_bits = hd.u8()?;
            let int_bits = hd.u8()?;
            let threshold = hd.f64()?;
            let width = u32::from(frac_bits) + u32::from(int_bits);
            if width > 62 {
                return invalid("quantization width too large");
            }
            let mut r = hd.payload();
            let mut codes = Vec::with_capacity(ell);
            for _ in 0..ell {
                let neg = r.bit()?;
                let m = r.bits(width)? as i64;
                codes.push(if neg { -m } else { m });
            }
            Hypothesis::ProjectedQuantizedThreshold { d, frac_bits, int_bits, codes, threshold }
        }
        3 => {
            let d = hd.u32()? as usize;
            let t = hd.u32()? as usize;
            let threshold = hd.f64()?;
            let mut r = hd.payload();
            let signs = (0..t).map(|_| r.bit().map(bit_sign)).collect::<Result<_>>()?;
            Hypothesis::MajorityThreshold { d, signs, threshold }
        }
        4 => {
            let d = hd.u32()? as usize;
            let ell = hd.u32()? as usize;
            let threshold = hd.f64()?;
            let width = index_bits(d);
            let mut r = hd.payload();
            let mut indices = Vec::with_capacity(ell);
            let mut signs = Vec::with_capacity(ell);
            for _ in 0..ell {
                indices.push(r.bits(width)? as u32);
                signs.push(bit_sign(r.bit()?));
            }
            Hypothesis::SubsetMatchThreshold { d, indices, signs, threshold }
        }
        _ => return invalid(format!("unknown hypothesis tag {tag}")),
    };
    h.validate()?;
    Ok(h)
}
