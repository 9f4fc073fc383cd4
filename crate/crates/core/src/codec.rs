//! Length-prefixed field framing shared by the wire formats.
//!
//! Each field is a 4-byte big-endian length followed by that many bytes.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("truncated input")]
    Truncated,
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
}

#[derive(Debug, Default, Clone)]
pub struct FieldWriter {
    buf: Vec<u8>,
}

impl FieldWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn put_u64(&mut self, v: u64) -> &mut Self {
        self.put(&v.to_be_bytes())
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

#[derive(Debug, Clone)]
pub struct FieldReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> FieldReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        FieldReader { bytes, pos: 0 }
    }

    /// Offset of the next unread byte.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn next_field(&mut self) -> Result<&'a [u8], CodecError> {
        let rest = &self.bytes[self.pos..];
        if rest.len() < 4 {
            return Err(CodecError::Truncated);
        }
        let len = u32::from_be_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
        if rest.len() - 4 < len {
            return Err(CodecError::Truncated);
        }
        self.pos += 4 + len;
        Ok(&rest[4..4 + len])
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let bytes = FieldWriter::new().put(b"abc").put(&[]).put_u64(7).finish();
        let mut r = FieldReader::new(&bytes);
        assert_eq!(r.next_field().unwrap(), b"abc");
        assert_eq!(r.next_field().unwrap(), b"");
        assert_eq!(r.next_field().unwrap(), 7u64.to_be_bytes());
        assert_eq!(r.next_field(), Err(CodecError::Truncated));
        r.finish().unwrap();

        let mut r = FieldReader::new(&bytes[..5]);
        assert_eq!(r.next_field(), Err(CodecError::Truncated));
        let mut extra = bytes.clone();
        extra.push(0);
        let mut r = FieldReader::new(&extra);
        for _ in 0..3 {
            r.next_field().unwrap();
        }
        assert_eq!(r.finish(), Err(CodecError::TrailingBytes(1)));
    }
}
