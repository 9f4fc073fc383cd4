//! Certificate-based baseline: a CA issues X.509-style certificates and
//! subjects sign messages with EC-Schnorr over the same group. Receivers
//! check the certificate signature, the validity window, message freshness
//! and then the message signature.

use rand::RngCore;

use crate::codec::{CodecError, FieldReader, FieldWriter};
use crate::group::{sha256, Group, HashInput, Scalar};

/// ecSchnorr-SHA256 (BSI TR-03111), DER.
pub const SIG_ALG_OID: &[u8] = &[0x06, 0x0A, 0x04, 0x00, 0x7F, 0x00, 0x07, 0x01, 0x01, 0x04, 0x03, 0x03];
/// id-ecPublicKey, DER.
pub const EC_PUBLIC_KEY_OID: &[u8] = &[0x06, 0x07, 0x2A, 0x86, 0x48, 0xCE, 0x3D, 0x02, 0x01];
/// prime256v1, DER.
pub const PRIME256V1_OID: &[u8] = &[0x06, 0x08, 0x2A, 0x86, 0x48, 0xCE, 0x3D, 0x03, 0x01, 0x07];

const TAG_SCHNORR: &[u8] = b"SCH:";
const CERT_VERSION_V3: u8 = 2;
/// keyUsage digitalSignature.
const KEY_USAGE_DIGITAL_SIGNATURE: u16 = 0x8000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchnorrSig<E> {
    pub r: E,
    pub s: Scalar,
}

fn challenge<G: Group>(group: &G, r: &G::Element, pk: &G::Element, msg: &[u8]) -> Scalar {
    let input = HashInput::new()
        .field(&group.encode_element(r))
        .field(&group.encode_element(pk))
        .field(msg);
    group.hash_to_scalar(TAG_SCHNORR, input.as_bytes())
}

/// `R = kP`, `e = H(R, pk, msg)`, `s = k + e*sk`.
pub fn schnorr_sign<G: Group, R: RngCore + ?Sized>(
    group: &G,
    sk: &Scalar,
    pk: &G::Element,
    msg: &[u8],
    rng: &mut R,
) -> SchnorrSig<G::Element> {
    let f = group.scalars();
    let k = group.random_scalar(rng);
    let r = group.mul_generator(&k);
    let e = challenge(group, &r, pk, msg);
    SchnorrSig {
        s: f.add(&k, &f.mul(&e, sk)),
        r,
    }
}

/// Checks `sP = R + e*pk`.
pub fn schnorr_verify<G: Group>(group: &G, pk: &G::Element, msg: &[u8], sig: &SchnorrSig<G::Element>) -> bool {
    for e in [pk, &sig.r] {
        if !group.contains(e) || group.is_identity(e) {
            return false;
        }
    }
    let e = challenge(group, &sig.r, pk, msg);
    let lhs = group.mul_generator(&sig.s);
    let rhs = group.add(&sig.r, &group.mul(&e, pk));
    lhs == rhs
}

/// 160-bit key identifier: leading bytes of SHA-256 over the encoded key.
pub fn key_identifier<G: Group>(group: &G, pk: &G::Element) -> [u8; 20] {
    let d = sha256(&group.encode_element(pk));
    let mut out = [0u8; 20];
    out.copy_from_slice(&d.as_bytes()[..20]);
    out
}

fn curve_identifier<G: Group>(group: &G) -> Vec<u8> {
    match group.name() {
        "p256" => PRIME256V1_OID.to_vec(),
        other => other.as_bytes().to_vec(),
    }
}

/// Field set of an RFC 5280 end-entity certificate, framed with the crate's
/// length-prefixed codec instead of DER.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate<E> {
    pub serial: [u8; 16],
    pub issuer: String,
    pub not_before: u64,
    pub not_after: u64,
    pub subject: String,
    pub subject_pk: E,
    pub authority_key_id: [u8; 20],
    pub subject_key_id: [u8; 20],
    pub key_usage: u16,
    pub is_ca: bool,
    pub signature: SchnorrSig<E>,
}

impl<E> Certificate<E> {
    pub fn tbs_bytes<G: Group<Element = E>>(&self, group: &G) -> Vec<u8> {
        FieldWriter::new()
            .put(&[CERT_VERSION_V3])
            .put(&self.serial)
            .put(SIG_ALG_OID)
            .put(self.issuer.as_bytes())
            .put_u64(self.not_before)
            .put_u64(self.not_after)
            .put(self.subject.as_bytes())
            .put(EC_PUBLIC_KEY_OID)
            .put(&curve_identifier(group))
            .put(&group.encode_element(&self.subject_pk))
            .put(&self.authority_key_id)
            .put(&self.subject_key_id)
            .put(&self.key_usage.to_be_bytes())
            .put(&[self.is_ca as u8])
            .finish()
    }

    pub fn to_bytes<G: Group<Element = E>>(&self, group: &G) -> Vec<u8> {
        FieldWriter::new()
            .put(&self.tbs_bytes(group))
            .put(SIG_ALG_OID)
            .put(&group.encode_element(&self.signature.r))
            .put(&group.scalars().encode(&self.signature.s))
            .finish()
    }

    pub fn from_bytes<G: Group<Element = E>>(group: &G, bytes: &[u8]) -> Result<Self, PkiReject> {
        let mut outer = FieldReader::new(bytes);
        let tbs = outer.next_field()?;
        if outer.next_field()? != SIG_ALG_OID {
            return Err(PkiReject::Malformed);
        }
        let r = group.decode_element(outer.next_field()?)?;
        let s = group.scalars().decode(outer.next_field()?)?;
        outer.finish()?;

        let mut t = FieldReader::new(tbs);
        if t.next_field()? != [CERT_VERSION_V3] {
            return Err(PkiReject::Malformed);
        }
        let serial = fixed::<16>(t.next_field()?)?;
        if t.next_field()? != SIG_ALG_OID {
            return Err(PkiReject::Malformed);
        }
        let issuer = utf8(t.next_field()?)?;
        let not_before = u64::from_be_bytes(fixed::<8>(t.next_field()?)?);
        let not_after = u64::from_be_bytes(fixed::<8>(t.next_field()?)?);
        let subject = utf8(t.next_field()?)?;
        if t.next_field()? != EC_PUBLIC_KEY_OID || t.next_field()? != curve_identifier(group).as_slice() {
            return Err(PkiReject::Malformed);
        }
        let subject_pk = group.decode_element(t.next_field()?)?;
        let authority_key_id = fixed::<20>(t.next_field()?)?;
        let subject_key_id = fixed::<20>(t.next_field()?)?;
        let key_usage = u16::from_be_bytes(fixed::<2>(t.next_field()?)?);
        let is_ca = match t.next_field()? {
            [0] => false,
            [1] => true,
            _ => return Err(PkiReject::Malformed),
        };
        t.finish()?;
        Ok(Certificate {
            serial,
            issuer,
            not_before,
            not_after,
            subject,
            subject_pk,
            authority_key_id,
            subject_key_id,
            key_usage,
            is_ca,
            signature: SchnorrSig { r, s },
        })
    }
}

fn fixed<const N: usize>(b: &[u8]) -> Result<[u8; N], PkiReject> {
    b.try_into().map_err(|_| PkiReject::Malformed)
}

fn utf8(b: &[u8]) -> Result<String, PkiReject> {
    String::from_utf8(b.to_vec()).map_err(|_| PkiReject::Malformed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PkiReject {
    #[error("malformed")]
    Malformed,
    #[error("cert-signature")]
    CertSignature,
    #[error("expired")]
    Expired,
    #[error("stale")]
    Stale,
    #[error("message-signature")]
    MessageSignature,
}

impl PkiReject {
    pub fn as_str(&self) -> &'static str {
        match self {
            PkiReject::Malformed => "malformed",
            PkiReject::CertSignature => "cert-signature",
            PkiReject::Expired => "expired",
            PkiReject::Stale => "stale",
            PkiReject::MessageSignature => "message-signature",
        }
    }
}

impl From<CodecError> for PkiReject {
    fn from(_: CodecError) -> Self {
        PkiReject::Malformed
    }
}

impl From<crate::group::GroupError> for PkiReject {
    fn from(_: crate::group::GroupError) -> Self {
        PkiReject::Malformed
    }
}

#[derive(Debug, Clone)]
pub struct CertificateAuthority<G: Group> {
    pub name: String,
    sk: Scalar,
    pub pk: G::Element,
}

impl<G: Group> CertificateAuthority<G> {
    pub fn new<R: RngCore + ?Sized>(group: &G, name: &str, rng: &mut R) -> Self {
        let sk = group.random_scalar(rng);
        CertificateAuthority {
            name: name.to_string(),
            pk: group.mul_generator(&sk),
            sk,
        }
    }

    pub fn issue<R: RngCore + ?Sized>(
        &self,
        group: &G,
        subject: &str,
        subject_pk: &G::Element,
        not_before: u64,
        not_after: u64,
        rng: &mut R,
    ) -> Certificate<G::Element> {
        let mut serial = [0u8; 16];
        rng.fill_bytes(&mut serial);
        serial[0] &= 0x7f;
        let mut cert = Certificate {
            serial,
            issuer: self.name.clone(),
            not_before,
            not_after,
            subject: subject.to_string(),
            subject_pk: subject_pk.clone(),
            authority_key_id: key_identifier(group, &self.pk),
            subject_key_id: key_identifier(group, subject_pk),
            key_usage: KEY_USAGE_DIGITAL_SIGNATURE,
            is_ca: false,
            signature: SchnorrSig {
                r: group.generator(),
                s: group.scalars().one(),
            },
        };
        cert.signature = schnorr_sign(group, &self.sk, &self.pk, &cert.tbs_bytes(group), rng);
        cert
    }
}

/// A certificate holder.
#[derive(Debug, Clone)]
pub struct PkiSubject<G: Group> {
    sk: Scalar,
    pub cert: Certificate<G::Element>,
}

impl<G: Group> PkiSubject<G> {
    pub fn enroll<R: RngCore + ?Sized>(
        group: &G,
        ca: &CertificateAuthority<G>,
        subject: &str,
        not_before: u64,
        not_after: u64,
        rng: &mut R,
    ) -> Self {
        let sk = group.random_scalar(rng);
        let pk = group.mul_generator(&sk);
        let cert = ca.issue(group, subject, &pk, not_before, not_after, rng);
        PkiSubject { sk, cert }
    }

    pub fn sign<R: RngCore + ?Sized>(&self, group: &G, m: &[u8], t: u64, rng: &mut R) -> PkiMessage<G::Element> {
        let sig = schnorr_sign(group, &self.sk, &self.cert.subject_pk, &signed_content(m, t), rng);
        PkiMessage {
            m: m.to_vec(),
            cert: self.cert.clone(),
            t,
            sig,
        }
    }
}

fn signed_content(m: &[u8], t: u64) -> Vec<u8> {
    FieldWriter::new().put(m).put_u64(t).finish()
}

/// `(m, certificate, t, R, s)` as sent on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PkiMessage<E> {
    pub m: Vec<u8>,
    pub cert: Certificate<E>,
    pub t: u64,
    pub sig: SchnorrSig<E>,
}

impl<E> PkiMessage<E> {
    pub fn to_bytes<G: Group<Element = E>>(&self, group: &G) -> Vec<u8> {
        FieldWriter::new()
            .put(&self.m)
            .put(&self.cert.to_bytes(group))
            .put_u64(self.t)
            .put(&group.encode_element(&self.sig.r))
            .put(&group.scalars().encode(&self.sig.s))
            .finish()
    }

    pub fn from_bytes<G: Group<Element = E>>(group: &G, bytes: &[u8]) -> Result<Self, PkiReject> {
        let mut r = FieldReader::new(bytes);
        let m = r.next_field()?.to_vec();
        let cert = Certificate::from_bytes(group, r.next_field()?)?;
        let t = u64::from_be_bytes(fixed::<8>(r.next_field()?)?);
        let sig_r = group.decode_element(r.next_field()?)?;
        let s = group.scalars().decode(r.next_field()?)?;
        r.finish()?;
        Ok(PkiMessage {
            m,
            cert,
            t,
            sig: SchnorrSig { r: sig_r, s },
        })
    }
}

/// Certificate signature, validity window, freshness, message signature.
pub fn baseline_verify<G: Group>(
    group: &G,
    ca_pk: &G::Element,
    msg: &PkiMessage<G::Element>,
    now: u64,
    freshness_window: u64,
) -> Result<(), PkiReject> {
    let cert = &msg.cert;
    if !schnorr_verify(group, ca_pk, &cert.tbs_bytes(group), &cert.signature) {
        return Err(PkiReject::CertSignature);
    }
    if now < cert.not_before || now > cert.not_after {
        return Err(PkiReject::Expired);
    }
    if now.abs_diff(msg.t) > freshness_window {
        return Err(PkiReject::Stale);
    }
    if !schnorr_verify(group, &cert.subject_pk, &signed_content(&msg.m, msg.t), &msg.sig) {
        return Err(PkiReject::MessageSignature);
    }
    Ok(())
}

/// Decodes then verifies; undecodable input is `Malformed`.
pub fn baseline_verify_wire<G: Group>(
    group: &G,
    ca_pk: &G::Element,
    bytes: &[u8],
    now: u64,
    freshness_window: u64,
) -> Result<(), PkiReject> {
    let msg = PkiMessage::from_bytes(group, bytes)?;
    baseline_verify(group, ca_pk, &msg, now, freshness_window)
}
