use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;

use super::hash::Digest;
use super::GroupError;

/// An integer modulo the group order `q`.
///
/// Values are always reduced; the only way to build one is through a
/// [`ScalarField`], which owns the modulus.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.0)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Arithmetic in `Z_q` for a prime `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarField {
    order: BigUint,
    byte_len: usize,
    top_mask: u8,
}

impl ScalarField {
    pub fn new(order: BigUint) -> Self {
        assert!(order > BigUint::one(), "scalar field order must exceed 1");
        let bits = order.bits() as usize;
        let byte_len = bits.div_ceil(8);
        let spare = byte_len * 8 - bits;
        ScalarField {
            order,
            byte_len,
            top_mask: 0xffu8 >> spare,
        }
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }

    /// Width of the canonical big-endian encoding.
    pub fn byte_len(&self) -> usize {
        self.byte_len
    }

    pub fn reduce(&self, v: &BigUint) -> Scalar {
        Scalar(v % &self.order)
    }

    pub fn from_u64(&self, v: u64) -> Scalar {
        self.reduce(&BigUint::from(v))
    }

    pub fn zero(&self) -> Scalar {
        Scalar(BigUint::zero())
    }

    pub fn one(&self) -> Scalar {
        self.from_u64(1)
    }

    pub fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.reduce(&(&a.0 + &b.0))
    }

    pub fn sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        if a.0 >= b.0 {
            Scalar(&a.0 - &b.0)
        } else {
            Scalar(&self.order - (&b.0 - &a.0))
        }
    }

    pub fn mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.reduce(&(&a.0 * &b.0))
    }

    pub fn neg(&self, a: &Scalar) -> Scalar {
        self.sub(&self.zero(), a)
    }

    /// Uniform draw from `[1, q-1]` by rejection sampling.
    pub fn random_nonzero<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar {
        let mut buf = vec![0u8; self.byte_len];
        loop {
            rng.fill_bytes(&mut buf);
            buf[0] &= self.top_mask;
            let v = BigUint::from_bytes_be(&buf);
            if !v.is_zero() && v < self.order {
                return Scalar(v);
            }
        }
    }

    /// Interprets a digest as a big-endian integer, reduces it modulo `q`
    /// and maps zero to one so the result lies in `Z_q^*`.
    pub fn from_digest(&self, digest: &Digest) -> Scalar {
        let s = self.reduce(&BigUint::from_bytes_be(digest.as_bytes()));
        if s.is_zero() {
            self.one()
        } else {
            s
        }
    }

    /// Fixed-width big-endian encoding.
    pub fn encode(&self, s: &Scalar) -> Vec<u8> {
        let raw = s.0.to_bytes_be();
        let mut out = vec![0u8; self.byte_len];
        if !s.is_zero() {
            out[self.byte_len - raw.len()..].copy_from_slice(&raw);
        }
        out
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<Scalar, GroupError> {
        if bytes.len() != self.byte_len {
            return Err(GroupError::MalformedScalar("wrong length"));
        }
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.order {
            return Err(GroupError::MalformedScalar("not reduced modulo the group order"));
        }
        Ok(Scalar(v))
    }
}
