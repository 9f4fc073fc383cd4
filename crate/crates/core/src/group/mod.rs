//! Prime-order elliptic-curve groups, scalar arithmetic modulo the group
//! order, canonical encodings and domain-separated hashing.
//!
//! Two backends implement [`Group`]: [`WeierstrassCurve`] (affine arithmetic
//! over arbitrary validated parameters, including the 19-point toy curve) and
//! [`P256Group`] for production-size work.

mod hash;
mod p256;
mod scalar;
mod weierstrass;

use std::fmt;

use rand::RngCore;

pub use self::hash::{
    digest, hash_to_bits, hash_to_scalar, sha256, xor_bits, Digest, HashInput, IdBits, ID_BYTES, TAG_H0,
    TAG_H1, TAG_H2, TAG_H3,
};
pub use self::p256::P256Group;
pub use self::scalar::{Scalar, ScalarField};
pub use self::weierstrass::{AffinePoint, CurveSpec, WeierstrassCurve};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("element does not belong to this group")]
    ContextMismatch,
    #[error("malformed element: {0}")]
    MalformedElement(&'static str),
    #[error("malformed scalar: {0}")]
    MalformedScalar(&'static str),
    #[error("curve spec line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A cyclic group of prime order `q` written additively.
///
/// Arithmetic methods trust their inputs; use [`Group::point_add`] or
/// [`Group::decode_element`] at trust boundaries.
pub trait Group: Clone + fmt::Debug + Send + Sync {
    type Element: Clone + PartialEq + Eq + fmt::Debug + Send + Sync;

    fn name(&self) -> &str;
    fn scalars(&self) -> &ScalarField;
    fn generator(&self) -> Self::Element;
    fn identity(&self) -> Self::Element;
    fn is_identity(&self, e: &Self::Element) -> bool;

    /// True if `e` is a valid element of this group.
    fn contains(&self, e: &Self::Element) -> bool;

    fn add(&self, lhs: &Self::Element, rhs: &Self::Element) -> Self::Element;
    fn negate(&self, e: &Self::Element) -> Self::Element;
    fn mul(&self, k: &Scalar, e: &Self::Element) -> Self::Element;

    /// Canonical uncompressed encoding: `0x04 || x || y` with fixed-width
    /// big-endian coordinates, or the single byte `0x00` for the identity.
    fn encode_element(&self, e: &Self::Element) -> Vec<u8>;
    fn decode_element(&self, bytes: &[u8]) -> Result<Self::Element, GroupError>;

    /// Encoded length of a non-identity element.
    fn element_len(&self) -> usize;

    /// Checks the group parameters themselves.
    fn validate(&self) -> Result<(), GroupError>;

    fn mul_generator(&self, k: &Scalar) -> Self::Element {
        self.mul(k, &self.generator())
    }

    /// Checked addition for elements of uncertain origin.
    fn point_add(&self, lhs: &Self::Element, rhs: &Self::Element) -> Result<Self::Element, GroupError> {
        if !self.contains(lhs) || !self.contains(rhs) {
            return Err(GroupError::ContextMismatch);
        }
        Ok(self.add(lhs, rhs))
    }

    fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar {
        self.scalars().random_nonzero(rng)
    }

    fn hash_to_scalar(&self, domain_tag: &[u8], material: &[u8]) -> Scalar {
        hash_to_scalar(self.scalars(), domain_tag, material)
    }
}
