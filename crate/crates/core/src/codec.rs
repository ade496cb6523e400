// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Canonical binary encoding.
//!
//! Fields are written in declaration order. Integers are big-endian and fixed
//! width, variable-length values carry a `u32` big-endian length prefix, and
//! floats are written as their IEEE-754 bit pattern. Decoding is strict: the
//! reader rejects truncated input, out-of-range tags and trailing bytes, so a
//! value has exactly one encoding.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("unexpected end of input (needed {needed} bytes, {remaining} left)")]
    Truncated { needed: usize, remaining: usize },
    #[error("{0} trailing bytes after value")]
    Trailing(usize),
    #[error("invalid tag {tag} for {what}")]
    InvalidTag { what: &'static str, tag: u8 },
    #[error("invalid utf-8 string")]
    Utf8,
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Default, Debug)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_bool(&mut self, v: bool) {
        self.put_u8(v as u8);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.put_u64(v.to_bits());
    }

    pub fn put_fixed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_bytes(&mut self, bytes: &[u8]) {
        let len = u32::try_from(bytes.len()).expect("field longer than u32::MAX bytes");
        self.put_u32(len);
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_bytes(s.as_bytes());
    }

    pub fn put_seq<T: Canonical>(&mut self, items: &[T]) {
        let len = u32::try_from(items.len()).expect("sequence longer than u32::MAX");
        self.put_u32(len);
        for item in items {
            item.encode_into(self);
        }
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated {
                needed: n,
                remaining: self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn get_u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn get_bool(&mut self) -> Result<bool, CodecError> {
        match self.get_u8()? {
            0 => Ok(false),
            1 => Ok(true),
            tag => Err(CodecError::InvalidTag { what: "bool", tag }),
        }
    }

    pub fn get_u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64, CodecError> {
        let b = self.take(8)?;
        Ok(u64::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn get_f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_bits(self.get_u64()?))
    }

    pub fn get_fixed<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn get_bytes(&mut self) -> Result<Vec<u8>, CodecError> {
        let len = self.get_u32()? as usize;
        Ok(self.take(len)?.to_vec())
    }

    pub fn get_str(&mut self) -> Result<String, CodecError> {
        String::from_utf8(self.get_bytes()?).map_err(|_| CodecError::Utf8)
    }

    pub fn get_seq<T: Canonical>(&mut self) -> Result<Vec<T>, CodecError> {
        let len = self.get_u32()? as usize;
        // Every element occupies at least one byte, which bounds the allocation.
        if len > self.remaining() {
            return Err(CodecError::Truncated {
                needed: len,
                remaining: self.remaining(),
            });
        }
        (0..len).map(|_| T::decode_from(self)).collect()
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(CodecError::Trailing(n)),
        }
    }
}

pub trait Canonical: Sized {
    fn encode_into(&self, w: &mut Writer);
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError>;

    fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_into(&mut w);
        w.into_bytes()
    }

    fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

impl Canonical for u64 {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u64(*self);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.get_u64()
    }
}

impl Canonical for f64 {
    fn encode_into(&self, w: &mut Writer) {
        w.put_f64(*self);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.get_f64()
    }
}

impl Canonical for String {
    fn encode_into(&self, w: &mut Writer) {
        w.put_str(self);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.get_str()
    }
}

impl Canonical for Vec<u8> {
    fn encode_into(&self, w: &mut Writer) {
        w.put_bytes(self);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.get_bytes()
    }
}

impl<T: Canonical> Canonical for Option<T> {
    fn encode_into(&self, w: &mut Writer) {
        match self {
            None => w.put_u8(0),
            Some(v) => {
                w.put_u8(1);
                v.encode_into(w);
            }
        }
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.get_u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::decode_from(r)?)),
            tag => Err(CodecError::InvalidTag { what: "option", tag }),
        }
    }
}

impl<A: Canonical, B: Canonical> Canonical for (A, B) {
    fn encode_into(&self, w: &mut Writer) {
        self.0.encode_into(w);
        self.1.encode_into(w);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok((A::decode_from(r)?, B::decode_from(r)?))
    }
}

/// Maps are written in key order; decoding rejects unsorted or duplicate keys.
impl<K: Canonical + Ord, V: Canonical> Canonical for BTreeMap<K, V> {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u32(self.len() as u32);
        for (k, v) in self {
            k.encode_into(w);
            v.encode_into(w);
        }
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let len = r.get_u32()? as usize;
        let mut out = BTreeMap::new();
        for _ in 0..len {
            let k = K::decode_from(r)?;
            if out.last_key_value().is_some_and(|(last, _)| *last >= k) {
                return Err(CodecError::Invalid("map keys not strictly increasing".into()));
            }
            let v = V::decode_from(r)?;
            out.insert(k, v);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strict_decoding() {
        let bytes = "hello".to_string().to_canonical_bytes();
        assert_eq!(bytes, [0, 0, 0, 5, b'h', b'e', b'l', b'l', b'o']);
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(String::from_canonical_bytes(&extra), Err(CodecError::Trailing(1)));
        assert!(matches!(
            String::from_canonical_bytes(&bytes[..4]),
            Err(CodecError::Truncated { .. })
        ));
        assert!(matches!(
            Option::<u64>::from_canonical_bytes(&[2]),
            Err(CodecError::InvalidTag { .. })
        ));
    }

    proptest! {
        #[test]
        fn map_round_trip(m in proptest::collection::btree_map(".{0,8}", any::<f64>(), 0..6)) {
            let bytes = m.to_canonical_bytes();
            let back = BTreeMap::<String, f64>::from_canonical_bytes(&bytes).unwrap();
            prop_assert_eq!(back.len(), m.len());
            prop_assert_eq!(back.to_canonical_bytes(), bytes);
        }
    }
}
