//! Envelope wire format: ten length-prefixed fields in the order
//! `m, AID1, AID2, T_i, theta, X, U, eta, A, t`. Elements and scalars use
//! the group's canonical encodings; timestamps are 8-byte big-endian.

use std::ops::Range;

use super::{verify, PublicKey, Pseudonym, RejectReason, SignedEnvelope, SystemParams, Verdict};
use crate::codec::{CodecError, FieldReader, FieldWriter};
use crate::group::{Group, GroupError, ID_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvelopeField {
    Message,
    Aid1,
    Aid2,
    IssueTime,
    Theta,
    X,
    U,
    Eta,
    A,
    Timestamp,
}

impl EnvelopeField {
    pub const ALL: [EnvelopeField; 10] = [
        EnvelopeField::Message,
        EnvelopeField::Aid1,
        EnvelopeField::Aid2,
        EnvelopeField::IssueTime,
        EnvelopeField::Theta,
        EnvelopeField::X,
        EnvelopeField::U,
        EnvelopeField::Eta,
        EnvelopeField::A,
        EnvelopeField::Timestamp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnvelopeField::Message => "m",
            EnvelopeField::Aid1 => "aid1",
            EnvelopeField::Aid2 => "aid2",
            EnvelopeField::IssueTime => "T_i",
            EnvelopeField::Theta => "theta",
            EnvelopeField::X => "X",
            EnvelopeField::U => "U",
            EnvelopeField::Eta => "eta",
            EnvelopeField::A => "A",
            EnvelopeField::Timestamp => "t",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error(transparent)]
    Framing(#[from] CodecError),
    #[error("field {0} has the wrong width")]
    Width(&'static str),
    #[error("field {field}: {source}")]
    Value {
        field: &'static str,
        source: GroupError,
    },
}

pub fn encode_envelope<G: Group>(group: &G, env: &SignedEnvelope<G::Element>) -> Vec<u8> {
    let f = group.scalars();
    FieldWriter::new()
        .put(&env.m)
        .put(&group.encode_element(&env.aid.aid1))
        .put(&env.aid.aid2)
        .put_u64(env.aid.t_issue)
        .put(&f.encode(&env.theta))
        .put(&group.encode_element(&env.pk.x))
        .put(&group.encode_element(&env.pk.u))
        .put(&f.encode(&env.eta))
        .put(&group.encode_element(&env.a))
        .put_u64(env.t)
        .finish()
}

fn u64_field(bytes: &[u8], name: &'static str) -> Result<u64, WireError> {
    let arr: [u8; 8] = bytes.try_into().map_err(|_| WireError::Width(name))?;
    Ok(u64::from_be_bytes(arr))
}

pub fn decode_envelope<G: Group>(group: &G, bytes: &[u8]) -> Result<SignedEnvelope<G::Element>, WireError> {
    let f = group.scalars();
    let elem = |b: &[u8], field| group.decode_element(b).map_err(|source| WireError::Value { field, source });
    let scalar = |b: &[u8], field| f.decode(b).map_err(|source| WireError::Value { field, source });

    let mut r = FieldReader::new(bytes);
    let m = r.next_field()?.to_vec();
    let aid1 = elem(r.next_field()?, "aid1")?;
    let aid2: [u8; ID_BYTES] = r.next_field()?.try_into().map_err(|_| WireError::Width("aid2"))?;
    let t_issue = u64_field(r.next_field()?, "T_i")?;
    let theta = scalar(r.next_field()?, "theta")?;
    let x = elem(r.next_field()?, "X")?;
    let u = elem(r.next_field()?, "U")?;
    let eta = scalar(r.next_field()?, "eta")?;
    let a = elem(r.next_field()?, "A")?;
    let t = u64_field(r.next_field()?, "t")?;
    r.finish()?;
    Ok(SignedEnvelope {
        m,
        aid: Pseudonym { aid1, aid2, t_issue },
        theta,
        pk: PublicKey { x, u },
        eta,
        a,
        t,
    })
}

/// Byte ranges of each field's payload (excluding its length prefix) in a
/// well-framed envelope.
pub fn field_ranges(bytes: &[u8]) -> Result<Vec<(EnvelopeField, Range<usize>)>, WireError> {
    let mut r = FieldReader::new(bytes);
    let mut out = Vec::with_capacity(EnvelopeField::ALL.len());
    for field in EnvelopeField::ALL {
        let start = r.position() + 4;
        let len = r.next_field()?.len();
        out.push((field, start..start + len));
    }
    r.finish()?;
    Ok(out)
}

/// Decodes and verifies; undecodable input is `Reject(Malformed)`.
pub fn verify_wire<G: Group>(
    params: &SystemParams<G>,
    bytes: &[u8],
    now: u64,
) -> (Verdict, Option<SignedEnvelope<G::Element>>) {
    match decode_envelope(&params.group, bytes) {
        Ok(env) => (verify(params, &env, now), Some(env)),
        Err(_) => (Verdict::Reject(RejectReason::Malformed), None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clpa::{extract_usk, replenish_pseudonyms, setup, sign, ProtocolConfig, RealIdentity};
    use crate::group::P256Group;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn envelope_round_trip_and_layout() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let (params, mut tra, mut kgc) = setup(P256Group::new(), ProtocolConfig::default(), &mut rng).unwrap();
        let rid = RealIdentity::from_name("dave").unwrap();
        tra.register(rid);
        let (aid, psk) = replenish_pseudonyms(&params, &mut tra, &mut kgc, &rid, 1, &mut rng, 3).unwrap().remove(0);
        let kp = extract_usk(&params, &aid, &psk, &mut rng).unwrap();
        let env = sign(&params, &aid, &kp, &[7u8; 40], 9, &mut rng);
        let bytes = encode_envelope(&params.group, &env);
        assert_eq!(decode_envelope(&params.group, &bytes).unwrap(), env);
        // 10 prefixes + m + 4 elements + aid2 + 2 scalars + 2 timestamps
        assert_eq!(bytes.len(), 40 + 40 + 4 * 65 + 16 + 2 * 32 + 2 * 8);

        let ranges = field_ranges(&bytes).unwrap();
        assert_eq!(ranges[0].1, 4..44);
        assert_eq!(ranges.last().unwrap().1.len(), 8);

        let mut trailing = bytes.clone();
        trailing.push(1);
        assert!(decode_envelope(&params.group, &trailing).is_err());
        assert!(decode_envelope(&params.group, &bytes[..bytes.len() - 1]).is_err());
        assert_eq!(
            verify_wire(&params, &bytes[..10], 9).0,
            Verdict::Reject(RejectReason::Malformed)
        );
    }
}
