//! OSC 1.0 message encoding.
//!
//! Supported argument types are `i` (int32), `f` (float32), `s` (string) and
//! `b` (blob). Bundles are not supported. Strings and blobs are zero-padded to
//! a four-byte boundary and numbers are big-endian, so every encoded message
//! is a multiple of four bytes long.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone)]
pub enum OscArg {
    Int(i32),
    Float(f32),
    Str(String),
    Blob(Vec<u8>),
}

impl OscArg {
    pub fn type_tag(&self) -> u8 {
        match self {
            OscArg::Int(_) => b'i',
            OscArg::Float(_) => b'f',
            OscArg::Str(_) => b's',
            OscArg::Blob(_) => b'b',
        }
    }

    pub fn as_int(&self) -> Option<i32> {
        match self {
            OscArg::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_blob(&self) -> Option<&[u8]> {
        match self {
            OscArg::Blob(v) => Some(v),
            _ => None,
        }
    }
}

// Floats compare by bit pattern so that decode(encode(m)) == m holds for NaN
// payloads too.
impl PartialEq for OscArg {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (OscArg::Int(a), OscArg::Int(b)) => a == b,
            (OscArg::Float(a), OscArg::Float(b)) => a.to_bits() == b.to_bits(),
            (OscArg::Str(a), OscArg::Str(b)) => a == b,
            (OscArg::Blob(a), OscArg::Blob(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for OscArg {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OscMessage {
    pub address: String,
    pub args: Vec<OscArg>,
}

impl OscMessage {
    pub fn new(address: impl Into<String>, args: Vec<OscArg>) -> Self {
        OscMessage { address: address.into(), args }
    }

    /// Type-tag string without the leading comma, e.g. `"ii"`.
    pub fn type_tags(&self) -> String {
        self.args.iter().map(|a| a.type_tag() as char).collect()
    }
}

impl fmt::Display for OscMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ,{}", self.address, self.type_tags())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("address {0:?} must start with '/'")]
    InvalidAddress(String),
    #[error("strings cannot contain NUL bytes")]
    EmbeddedNul,
    #[error("blob of {0} bytes exceeds the int32 size field")]
    BlobTooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("buffer truncated")]
    Truncated,
    #[error("non-zero padding byte")]
    BadPadding,
    #[error("unsupported type tag {0:?}")]
    UnsupportedType(char),
    #[error("missing type-tag string")]
    MissingTypeTags,
    #[error("address must start with '/'")]
    InvalidAddress,
    #[error("OSC bundles are not supported")]
    Bundle,
    #[error("string is not valid UTF-8")]
    InvalidString,
    #[error("negative blob size")]
    NegativeBlobSize,
    #[error("{0} trailing bytes after the last argument")]
    TrailingBytes(usize),
}

#[inline]
fn padded(len: usize) -> usize {
    (len + 3) & !3
}

fn put_string(out: &mut Vec<u8>, s: &str) -> Result<(), EncodeError> {
    if s.as_bytes().contains(&0) {
        return Err(EncodeError::EmbeddedNul);
    }
    out.extend_from_slice(s.as_bytes());
    out.resize(out.len() + padded(s.len() + 1) - s.len(), 0);
    Ok(())
}

pub fn encode(m: &OscMessage) -> Result<Vec<u8>, EncodeError> {
    if !m.address.starts_with('/') {
        return Err(EncodeError::InvalidAddress(m.address.clone()));
    }
    let mut out = Vec::with_capacity(64);
    put_string(&mut out, &m.address)?;
    put_string(&mut out, &format!(",{}", m.type_tags()))?;
    for arg in &m.args {
        match arg {
            OscArg::Int(v) => out.extend_from_slice(&v.to_be_bytes()),
            OscArg::Float(v) => out.extend_from_slice(&v.to_bits().to_be_bytes()),
            OscArg::Str(s) => put_string(&mut out, s)?,
            OscArg::Blob(b) => {
                let size = i32::try_from(b.len()).map_err(|_| EncodeError::BlobTooLarge(b.len()))?;
                out.extend_from_slice(&size.to_be_bytes());
                out.extend_from_slice(b);
                out.resize(out.len() + padded(b.len()) - b.len(), 0);
            }
        }
    }
    debug_assert_eq!(out.len() % 4, 0);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn word(&mut self) -> Result<[u8; 4], DecodeError> {
        let b = self.take(4)?;
        Ok([b[0], b[1], b[2], b[3]])
    }

    fn padding(&mut self, n: usize) -> Result<(), DecodeError> {
        if self.take(n)?.iter().any(|&b| b != 0) {
            return Err(DecodeError::BadPadding);
        }
        Ok(())
    }

    fn string(&mut self) -> Result<&'a str, DecodeError> {
        let rest = &self.buf[self.pos..];
        let len = rest.iter().position(|&b| b == 0).ok_or(DecodeError::Truncated)?;
        let bytes = self.take(len)?;
        self.padding(padded(len + 1) - len)?;
        std::str::from_utf8(bytes).map_err(|_| DecodeError::InvalidString)
    }
}

/// Parses one message. Never panics, whatever the input.
pub fn decode(bytes: &[u8]) -> Result<OscMessage, DecodeError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if bytes.first() == Some(&b'#') {
        return Err(DecodeError::Bundle);
    }
    let address = r.string()?;
    if !address.starts_with('/') {
        return Err(DecodeError::InvalidAddress);
    }
    if r.remaining() == 0 {
        return Err(DecodeError::MissingTypeTags);
    }
    let tags = r.string()?;
    let tags = tags.strip_prefix(',').ok_or(DecodeError::MissingTypeTags)?;

    let mut args = Vec::with_capacity(tags.len());
    for tag in tags.chars() {
        let arg = match tag {
            'i' => OscArg::Int(i32::from_be_bytes(r.word()?)),
            'f' => OscArg::Float(f32::from_bits(u32::from_be_bytes(r.word()?))),
            's' => OscArg::Str(r.string()?.to_owned()),
            'b' => {
                let size = i32::from_be_bytes(r.word()?);
                let size = usize::try_from(size).map_err(|_| DecodeError::NegativeBlobSize)?;
                let data = r.take(size)?.to_vec();
                r.padding(padded(size) - size)?;
                OscArg::Blob(data)
            }
            other => return Err(DecodeError::UnsupportedType(other)),
        };
        args.push(arg);
    }
    if r.remaining() != 0 {
        return Err(DecodeError::TrailingBytes(r.remaining()));
    }
    Ok(OscMessage { address: address.to_owned(), args })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ping() {
        let bytes = encode(&OscMessage::new("/ping", vec![])).unwrap();
        assert_eq!(bytes, [0x2F, 0x70, 0x69, 0x6E, 0x67, 0, 0, 0, 0x2C, 0, 0, 0]);
        assert_eq!(decode(&bytes).unwrap(), OscMessage::new("/ping", vec![]));
    }

    #[test]
    fn note_on_layout() {
        let m = OscMessage::new("/noteon", vec![OscArg::Int(60), OscArg::Int(100)]);
        let bytes = encode(&m).unwrap();
        let mut expected = b"/noteon\0,ii\0".to_vec();
        expected.extend_from_slice(&[0, 0, 0, 60, 0, 0, 0, 100]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn address_of_exactly_four_bytes_gets_a_full_pad_word() {
        let bytes = encode(&OscMessage::new("/abc", vec![])).unwrap();
        assert_eq!(&bytes[..8], b"/abc\0\0\0\0");
    }

    #[test]
    fn decode_errors() {
        assert_eq!(decode(b"/ab"), Err(DecodeError::Truncated));
        assert_eq!(decode(b""), Err(DecodeError::Truncated));
        assert_eq!(decode(b"/a\0\0,q\0\0"), Err(DecodeError::UnsupportedType('q')));
        assert_eq!(decode(b"/a\0\0"), Err(DecodeError::MissingTypeTags));
        assert_eq!(decode(b"/a\0\0i\0\0\0"), Err(DecodeError::MissingTypeTags));
        assert_eq!(decode(b"/a\0x,\0\0\0"), Err(DecodeError::BadPadding));
        assert_eq!(decode(b"ab\0\0,\0\0\0"), Err(DecodeError::InvalidAddress));
        assert_eq!(decode(b"#bundle\0"), Err(DecodeError::Bundle));
        assert_eq!(decode(b"/a\0\0,i\0\0\0\0"), Err(DecodeError::Truncated));
        assert_eq!(decode(b"/a\0\0,\0\0\0\0\0\0\0"), Err(DecodeError::TrailingBytes(4)));
        assert_eq!(decode(b"/a\0\0,b\0\0\xff\xff\xff\xff"), Err(DecodeError::NegativeBlobSize));
        assert_eq!(decode(b"/a\0\0,b\0\0\0\0\0\x08abcd"), Err(DecodeError::Truncated));
    }

    #[test]
    fn encode_errors() {
        assert!(matches!(encode(&OscMessage::new("ping", vec![])), Err(EncodeError::InvalidAddress(_))));
        assert_eq!(encode(&OscMessage::new("/a", vec![OscArg::Str("x\0y".into())])), Err(EncodeError::EmbeddedNul));
    }

    fn arg() -> impl Strategy<Value = OscArg> {
        prop_oneof![
            any::<i32>().prop_map(OscArg::Int),
            any::<u32>().prop_map(|b| OscArg::Float(f32::from_bits(b))),
            "[^\u{0}]{0,12}".prop_map(OscArg::Str),
            proptest::collection::vec(any::<u8>(), 0..20).prop_map(OscArg::Blob),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(addr in "/[a-z/]{0,15}", args in proptest::collection::vec(arg(), 0..6)) {
            let m = OscMessage::new(addr, args);
            let bytes = encode(&m).unwrap();
            prop_assert_eq!(bytes.len() % 4, 0);
            prop_assert_eq!(decode(&bytes).unwrap(), m);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode(&bytes);
        }
    }
}
