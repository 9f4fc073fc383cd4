//! SHA-256 based hash utilities with domain separation.
//!
//! Every hash input is `tag || field_1 || field_2 || ...` where each field is
//! prefixed by its length as a 4-byte big-endian integer.

use sha2::{Digest as _, Sha256};

use super::scalar::{Scalar, ScalarField};

/// Byte length of the identity bit-string space (n = 128 bits).
pub const ID_BYTES: usize = 16;

/// An n-bit string, used for real identities and the masked pseudonym part.
pub type IdBits = [u8; ID_BYTES];

pub const TAG_H0: &[u8] = b"H0:";
pub const TAG_H1: &[u8] = b"H1:";
pub const TAG_H2: &[u8] = b"H2:";
pub const TAG_H3: &[u8] = b"H3:";

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Digest([u8; 32]);

impl Digest {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// Builder for length-prefixed hash material.
#[derive(Clone, Debug, Default)]
pub struct HashInput {
    buf: Vec<u8>,
}

impl HashInput {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, bytes: &[u8]) -> Self {
        self.buf.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn u64_field(self, v: u64) -> Self {
        self.field(&v.to_be_bytes())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }
}

pub fn digest(domain_tag: &[u8], material: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(domain_tag);
    h.update(material);
    Digest(h.finalize().into())
}

/// Plain SHA-256 of a byte string, no tag.
pub fn sha256(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

pub fn hash_to_scalar(field: &ScalarField, domain_tag: &[u8], material: &[u8]) -> Scalar {
    field.from_digest(&digest(domain_tag, material))
}

/// Truncates the tagged digest to n = 128 bits.
pub fn hash_to_bits(domain_tag: &[u8], material: &[u8]) -> IdBits {
    let d = digest(domain_tag, material);
    let mut out = [0u8; ID_BYTES];
    out.copy_from_slice(&d.as_bytes()[..ID_BYTES]);
    out
}

pub fn xor_bits(a: &IdBits, b: &IdBits) -> IdBits {
    let mut out = [0u8; ID_BYTES];
    for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b.iter())) {
        *o = x ^ y;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn framing_is_length_prefixed() {
        let input = HashInput::new().field(b"ab").u64_field(5);
        assert_eq!(
            input.as_bytes(),
            &[0, 0, 0, 2, b'a', b'b', 0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0, 5]
        );
        // "a","bc" and "ab","c" frame differently
        let x = HashInput::new().field(b"a").field(b"bc");
        let y = HashInput::new().field(b"ab").field(b"c");
        assert_ne!(x.as_bytes(), y.as_bytes());
    }

    #[test]
    fn domain_tags_decouple_outputs() {
        let field = ScalarField::new(BigUint::parse_bytes(
            b"FFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551",
            16,
        ).unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut m = [0u8; 40];
            rng.fill_bytes(&mut m);
            let h1 = hash_to_scalar(&field, TAG_H1, &m);
            let h2 = hash_to_scalar(&field, TAG_H2, &m);
            assert_ne!(h1, h2);
            assert_eq!(h1, hash_to_scalar(&field, TAG_H1, &m));
            assert!(!h1.is_zero());
        }
    }

    #[test]
    fn bits_mask_is_an_involution() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut x = [0u8; ID_BYTES];
            rng.fill_bytes(&mut x);
            let mask = hash_to_bits(TAG_H0, b"material");
            assert_eq!(mask.len() * 8, 128);
            assert_eq!(xor_bits(&xor_bits(&x, &mask), &mask), x);
        }
        assert_eq!(hash_to_bits(TAG_H0, b"m"), hash_to_bits(TAG_H0, b"m"));
    }
}
