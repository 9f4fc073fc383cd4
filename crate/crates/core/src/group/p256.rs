//! NIST P-256 backed by the RustCrypto `p256` crate.

use p256::elliptic_curve::ff::PrimeField;
use p256::elliptic_curve::group::Group as _;
use p256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use p256::{AffinePoint, EncodedPoint, FieldBytes, ProjectivePoint};

use super::scalar::{Scalar, ScalarField};
use super::weierstrass::CurveSpec;
use super::{Group, GroupError};

const ELEMENT_LEN: usize = 65;

#[derive(Clone, Debug)]
pub struct P256Group {
    scalars: ScalarField,
}

impl Default for P256Group {
    fn default() -> Self {
        Self::new()
    }
}

impl P256Group {
    pub fn new() -> Self {
        P256Group {
            scalars: ScalarField::new(CurveSpec::p256().order),
        }
    }

    fn to_native(&self, k: &Scalar) -> p256::Scalar {
        let mut repr = FieldBytes::default();
        repr.copy_from_slice(&self.scalars.encode(k));
        Option::from(p256::Scalar::from_repr(repr))
            .expect("scalars are reduced modulo the P-256 order")
    }
}

impl Group for P256Group {
    type Element = ProjectivePoint;

    fn name(&self) -> &str {
        "p256"
    }

    fn scalars(&self) -> &ScalarField {
        &self.scalars
    }

    fn generator(&self) -> ProjectivePoint {
        ProjectivePoint::GENERATOR
    }

    fn identity(&self) -> ProjectivePoint {
        ProjectivePoint::IDENTITY
    }

    fn is_identity(&self, e: &ProjectivePoint) -> bool {
        bool::from(e.is_identity())
    }

    fn contains(&self, _e: &ProjectivePoint) -> bool {
        // the type only represents valid points of the prime-order group
        true
    }

    fn add(&self, lhs: &ProjectivePoint, rhs: &ProjectivePoint) -> ProjectivePoint {
        lhs + rhs
    }

    fn negate(&self, e: &ProjectivePoint) -> ProjectivePoint {
        -e
    }

    fn mul(&self, k: &Scalar, e: &ProjectivePoint) -> ProjectivePoint {
        e * &self.to_native(k)
    }

    fn encode_element(&self, e: &ProjectivePoint) -> Vec<u8> {
        e.to_affine().to_encoded_point(false).as_bytes().to_vec()
    }

    fn decode_element(&self, bytes: &[u8]) -> Result<ProjectivePoint, GroupError> {
        match bytes {
            [0] => Ok(ProjectivePoint::IDENTITY),
            [4, ..] if bytes.len() == ELEMENT_LEN => {
                let ep = EncodedPoint::from_bytes(bytes)
                    .map_err(|_| GroupError::MalformedElement("bad SEC1 encoding"))?;
                Option::<AffinePoint>::from(AffinePoint::from_encoded_point(&ep))
                    .map(ProjectivePoint::from)
                    .ok_or(GroupError::MalformedElement("point is not on the curve"))
            }
            [] => Err(GroupError::MalformedElement("empty encoding")),
            [0 | 4, ..] => Err(GroupError::MalformedElement("wrong length")),
            _ => Err(GroupError::MalformedElement("unknown flag byte")),
        }
    }

    fn element_len(&self) -> usize {
        ELEMENT_LEN
    }

    fn validate(&self) -> Result<(), GroupError> {
        let g = self.generator();
        let q_minus_one = self.scalars.neg(&self.scalars.one());
        if self.is_identity(&g) || !self.is_identity(&(self.mul(&q_minus_one, &g) + g)) {
            return Err(GroupError::InvalidCurve("P-256 generator self-check failed".into()));
        }
        Ok(())
    }
}
