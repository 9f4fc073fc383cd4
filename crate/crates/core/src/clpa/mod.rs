//! Certificateless pseudonym authentication.
//!
//! A tracing authority (TRA, master secret `alpha`) issues pseudonyms
//! `AID = {AID1 = rP, AID2 = RID xor H0(alpha*AID1, T_pub, T_i), T_i}`.
//! A key generation center (KGC, master secret `beta`) issues partial keys
//! `(lambda, U)` bound to a pseudonym, and the holder adds a secret value `mu`
//! to obtain the full key pair. Messages are signed with a Schnorr-like
//! two-challenge signature `(eta, A)` checked against
//! `A = eta*P + h1*X + h2*U + (h2*theta)*P_pub`.

mod authority;
mod protocol;
mod replay;
mod wire;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::group::{Group, GroupError, IdBits, Scalar, ID_BYTES};

pub use self::authority::{setup, setup_from_spec, IssuanceList, IssueRecord, Kgc, Tra, TraSnapshot, TraceOutcome};
pub use self::protocol::{
    challenges, extract_usk, replenish_pseudonyms, request_pseudonym, sign, sign_with_nonce, theta, verify,
    IssuedPseudonym,
};
pub use self::replay::Verifier;
pub use self::wire::{decode_envelope, encode_envelope, field_ranges, verify_wire, EnvelopeField, WireError};

/// Default envelope freshness window, simulated seconds.
pub const DEFAULT_FRESHNESS_WINDOW: u64 = 300;
/// Default pseudonym lifetime, simulated seconds (24 h).
pub const DEFAULT_PSEUDONYM_LIFETIME: u64 = 24 * 3600;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ClpaError {
    #[error("setup failed: {0}")]
    Setup(GroupError),
    #[error("real identity `{0}` is not registered")]
    UnregisteredIdentity(RealIdentity),
    #[error("pseudonym was not issued by the tracing authority")]
    UnknownPseudonym,
    #[error("partial secret key failed the consistency check, session closed")]
    InvalidPartialKey,
    #[error("invalid group element: {0}")]
    InvalidElement(&'static str),
    #[error("identity name must be at most {ID_BYTES} bytes, got {0}")]
    IdentityTooLong(usize),
    #[error("malformed pseudonym encoding")]
    MalformedPseudonym,
    #[error("malformed authority snapshot: {0}")]
    Snapshot(String),
}

/// Freshness policy shared by every verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Maximum `|now - t|` for a message timestamp.
    pub freshness_window: u64,
    /// Maximum age of a pseudonym's issuance timestamp.
    pub pseudonym_lifetime: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            freshness_window: DEFAULT_FRESHNESS_WINDOW,
            pseudonym_lifetime: DEFAULT_PSEUDONYM_LIFETIME,
        }
    }
}

/// Public system parameters: the group (with its generator `P`), the TRA
/// public key `T_pub = alpha*P` and the KGC public key `P_pub = beta*P`.
#[derive(Debug, Clone)]
pub struct SystemParams<G: Group> {
    pub group: G,
    pub t_pub: G::Element,
    pub p_pub: G::Element,
    pub config: ProtocolConfig,
}

impl<G: Group> SystemParams<G> {
    pub fn generator(&self) -> G::Element {
        self.group.generator()
    }

    /// Byte serialization of the published parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(self.group.name().as_bytes());
        out.extend_from_slice(&self.group.encode_element(&self.generator()));
        out.extend_from_slice(&self.group.encode_element(&self.t_pub));
        out.extend_from_slice(&self.group.encode_element(&self.p_pub));
        out.extend_from_slice(&self.config.freshness_window.to_be_bytes());
        out.extend_from_slice(&self.config.pseudonym_lifetime.to_be_bytes());
        out
    }

    /// `AID1 encoding || AID2 || T_i (8 bytes, big-endian)`.
    pub fn encode_aid(&self, aid: &Pseudonym<G::Element>) -> Vec<u8> {
        let mut out = self.group.encode_element(&aid.aid1);
        out.extend_from_slice(&aid.aid2);
        out.extend_from_slice(&aid.t_issue.to_be_bytes());
        out
    }

    pub fn decode_aid(&self, bytes: &[u8]) -> Result<Pseudonym<G::Element>, ClpaError> {
        let tail = ID_BYTES + 8;
        if bytes.len() <= tail {
            return Err(ClpaError::MalformedPseudonym);
        }
        let (elem, rest) = bytes.split_at(bytes.len() - tail);
        let aid1 = self
            .group
            .decode_element(elem)
            .map_err(|_| ClpaError::MalformedPseudonym)?;
        if self.group.is_identity(&aid1) {
            return Err(ClpaError::MalformedPseudonym);
        }
        let mut aid2 = [0u8; ID_BYTES];
        aid2.copy_from_slice(&rest[..ID_BYTES]);
        let t_issue = u64::from_be_bytes(rest[ID_BYTES..].try_into().expect("8 bytes"));
        Ok(Pseudonym { aid1, aid2, t_issue })
    }

    /// `X encoding || U encoding`.
    pub fn encode_pk(&self, pk: &PublicKey<G::Element>) -> Vec<u8> {
        let mut out = self.group.encode_element(&pk.x);
        out.extend_from_slice(&self.group.encode_element(&pk.u));
        out
    }
}

/// A real identity: a UTF-8 name zero-padded to 128 bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RealIdentity(IdBits);

impl RealIdentity {
    pub fn from_name(name: &str) -> Result<Self, ClpaError> {
        let raw = name.as_bytes();
        if raw.len() > ID_BYTES {
            return Err(ClpaError::IdentityTooLong(raw.len()));
        }
        let mut bits = [0u8; ID_BYTES];
        bits[..raw.len()].copy_from_slice(raw);
        Ok(RealIdentity(bits))
    }

    pub fn from_bits(bits: IdBits) -> Self {
        RealIdentity(bits)
    }

    pub fn bits(&self) -> &IdBits {
        &self.0
    }

    /// The name with padding stripped, or hex if the bits are not UTF-8.
    pub fn name(&self) -> String {
        let end = self.0.iter().rposition(|b| *b != 0).map_or(0, |i| i + 1);
        match std::str::from_utf8(&self.0[..end]) {
            Ok(s) => s.to_string(),
            Err(_) => format!("0x{}", hex::encode(self.0)),
        }
    }
}

impl fmt::Display for RealIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl fmt::Debug for RealIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealIdentity({})", self.name())
    }
}

impl Serialize for RealIdentity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.bits()))
    }
}

impl<'de> Deserialize<'de> for RealIdentity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let bits = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("identity must be 16 bytes"))?;
        Ok(RealIdentity::from_bits(bits))
    }
}

/// Anonymized identity `{AID1, AID2, T_i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pseudonym<E> {
    pub aid1: E,
    pub aid2: IdBits,
    pub t_issue: u64,
}

/// Public key `PK = {X, U}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey<E> {
    pub x: E,
    pub u: E,
}

/// KGC-issued partial key `{lambda, U}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSecretKey<E> {
    pub lambda: Scalar,
    pub u: E,
}

/// Full key material held by a participant after extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullKeyPair<E> {
    mu: Scalar,
    lambda: Scalar,
    pub pk: PublicKey<E>,
    pub theta: Scalar,
}

impl<E> FullKeyPair<E> {
    pub(crate) fn new(mu: Scalar, lambda: Scalar, pk: PublicKey<E>, theta: Scalar) -> Self {
        FullKeyPair { mu, lambda, pk, theta }
    }

    pub fn mu(&self) -> &Scalar {
        &self.mu
    }

    pub fn lambda(&self) -> &Scalar {
        &self.lambda
    }
}

/// The broadcast tuple `(m, AID, theta, PK, (eta, A), t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedEnvelope<E> {
    pub m: Vec<u8>,
    pub aid: Pseudonym<E>,
    pub theta: Scalar,
    pub pk: PublicKey<E>,
    pub eta: Scalar,
    pub a: E,
    pub t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Stale,
    ThetaMismatch,
    EquationFailure,
    Malformed,
    Replay,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Stale => "stale",
            RejectReason::ThetaMismatch => "theta-mismatch",
            RejectReason::EquationFailure => "equation-failure",
            RejectReason::Malformed => "malformed",
            RejectReason::Replay => "replay",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match self {
            Verdict::Accept => None,
            Verdict::Reject(r) => Some(*r),
        }
    }
}
