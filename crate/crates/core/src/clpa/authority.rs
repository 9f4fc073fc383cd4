//! The two trusted authorities: TRA (pseudonyms and tracing) and KGC
//! (partial secret keys).

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::protocol::{h0_mask, theta};
use super::{ClpaError, PartialSecretKey, ProtocolConfig, Pseudonym, RealIdentity, SystemParams};
use crate::group::{xor_bits, CurveSpec, Group, Scalar, ScalarField, WeierstrassCurve};

/// Runs system setup: draws `alpha` and `beta` independently from `Z_q^*`
/// and publishes `T_pub = alpha*P`, `P_pub = beta*P`.
pub fn setup<G: Group, R: RngCore + ?Sized>(
    group: G,
    config: ProtocolConfig,
    rng: &mut R,
) -> Result<(SystemParams<G>, Tra, Kgc), ClpaError> {
    group.validate().map_err(ClpaError::Setup)?;
    let alpha = group.random_scalar(rng);
    let beta = group.random_scalar(rng);
    let t_pub = group.mul_generator(&alpha);
    let p_pub = group.mul_generator(&beta);
    let params = SystemParams {
        group,
        t_pub,
        p_pub,
        config,
    };
    Ok((params, Tra::new(alpha), Kgc::new(beta)))
}

/// Setup over curve parameters given as data, e.g. loaded from a file.
pub fn setup_from_spec<R: RngCore + ?Sized>(
    spec: CurveSpec,
    config: ProtocolConfig,
    rng: &mut R,
) -> Result<(SystemParams<WeierstrassCurve>, Tra, Kgc), ClpaError> {
    let curve = WeierstrassCurve::new(spec, "custom").map_err(ClpaError::Setup)?;
    setup(curve, config, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub rid: RealIdentity,
    pub t_issue: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOutcome {
    Identified(RealIdentity),
    /// The unmasked bits do not name any registered identity.
    Untraceable,
}

/// Encoded pseudonyms the TRA has issued, handed to the KGC over the
/// trusted upper-level channel. Carries no real identities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IssuanceList(BTreeSet<Vec<u8>>);

impl IssuanceList {
    pub fn contains(&self, aid_bytes: &[u8]) -> bool {
        self.0.contains(aid_bytes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Tracing authority state.
#[derive(Debug, Clone)]
pub struct Tra {
    alpha: Scalar,
    roster: BTreeSet<RealIdentity>,
    issued: BTreeMap<Vec<u8>, IssueRecord>,
}

/// Serializable TRA state, used to trace pseudonyms after a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraSnapshot {
    pub curve: String,
    /// Master secret, fixed-width big-endian hex.
    pub alpha: String,
    pub roster: Vec<RealIdentity>,
}

impl Tra {
    fn new(alpha: Scalar) -> Self {
        Tra {
            alpha,
            roster: BTreeSet::new(),
            issued: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, rid: RealIdentity) {
        self.roster.insert(rid);
    }

    pub fn load_roster(&mut self, rids: impl IntoIterator<Item = RealIdentity>) {
        self.roster.extend(rids);
    }

    pub fn is_registered(&self, rid: &RealIdentity) -> bool {
        self.roster.contains(rid)
    }

    /// Masks `rid` under `H0(alpha*AID1, T_pub, now)` and records the result.
    pub fn issue_pseudonym<G: Group>(
        &mut self,
        params: &SystemParams<G>,
        rid: &RealIdentity,
        aid1: &G::Element,
        now: u64,
    ) -> Result<Pseudonym<G::Element>, ClpaError> {
        let group = &params.group;
        if !group.contains(aid1) {
            return Err(ClpaError::InvalidElement("AID1 is not a group element"));
        }
        if group.is_identity(aid1) {
            return Err(ClpaError::InvalidElement("AID1 is the identity"));
        }
        if !self.is_registered(rid) {
            return Err(ClpaError::UnregisteredIdentity(*rid));
        }
        let shared = group.mul(&self.alpha, aid1);
        let mask = h0_mask(params, &shared, now);
        let aid = Pseudonym {
            aid1: aid1.clone(),
            aid2: xor_bits(rid.bits(), &mask),
            t_issue: now,
        };
        self.issued
            .insert(params.encode_aid(&aid), IssueRecord { rid: *rid, t_issue: now });
        Ok(aid)
    }

    /// Recovers the real identity behind a pseudonym. Only identities in the
    /// roster count as a hit.
    pub fn trace<G: Group>(&self, params: &SystemParams<G>, aid: &Pseudonym<G::Element>) -> TraceOutcome {
        let group = &params.group;
        if !group.contains(&aid.aid1) || group.is_identity(&aid.aid1) {
            return TraceOutcome::Untraceable;
        }
        let shared = group.mul(&self.alpha, &aid.aid1);
        let mask = h0_mask(params, &shared, aid.t_issue);
        let rid = RealIdentity::from_bits(xor_bits(&aid.aid2, &mask));
        if self.roster.contains(&rid) {
            TraceOutcome::Identified(rid)
        } else {
            TraceOutcome::Untraceable
        }
    }

    /// True if `alpha*P` equals the published `T_pub`.
    pub fn matches_public_key<G: Group>(&self, params: &SystemParams<G>) -> bool {
        params.group.mul_generator(&self.alpha) == params.t_pub
    }

    /// Audit record for an encoded pseudonym, if this TRA issued it.
    pub fn issued_record(&self, aid_bytes: &[u8]) -> Option<&IssueRecord> {
        self.issued.get(aid_bytes)
    }

    pub fn issued_count(&self) -> usize {
        self.issued.len()
    }

    pub fn issuance_list(&self) -> IssuanceList {
        IssuanceList(self.issued.keys().cloned().collect())
    }

    pub fn snapshot(&self, curve: &str, field: &ScalarField) -> TraSnapshot {
        TraSnapshot {
            curve: curve.to_string(),
            alpha: hex::encode(field.encode(&self.alpha)),
            roster: self.roster.iter().copied().collect(),
        }
    }

    /// Rebuilds a TRA able to trace; the issuance audit log is not restored.
    pub fn restore(snapshot: &TraSnapshot, field: &ScalarField) -> Result<Self, ClpaError> {
        let raw = hex::decode(&snapshot.alpha).map_err(|e| ClpaError::Snapshot(e.to_string()))?;
        let alpha = field.decode(&raw).map_err(|e| ClpaError::Snapshot(e.to_string()))?;
        if alpha.is_zero() {
            return Err(ClpaError::Snapshot("zero master secret".into()));
        }
        let mut tra = Tra::new(alpha);
        tra.load_roster(snapshot.roster.iter().copied());
        Ok(tra)
    }
}

/// Key generation center state.
#[derive(Debug, Clone)]
pub struct Kgc {
    beta: Scalar,
    known: BTreeSet<Vec<u8>>,
}

impl Kgc {
    fn new(beta: Scalar) -> Self {
        Kgc {
            beta,
            known: BTreeSet::new(),
        }
    }

    /// Accepts the TRA's current issuance list.
    pub fn import_issuance(&mut self, list: &IssuanceList) {
        self.known.extend(list.0.iter().cloned());
    }

    pub fn knows<G: Group>(&self, params: &SystemParams<G>, aid: &Pseudonym<G::Element>) -> bool {
        self.known.contains(&params.encode_aid(aid))
    }

    /// The master secret `beta`. Exposed so a master-key-holding adversary
    /// can be modeled.
    pub fn master_secret(&self) -> &Scalar {
        &self.beta
    }

    /// Issues `{lambda, U}` with `U = kP`, `lambda = k + H1(AID, U, P_pub)*beta`.
    pub fn issue_psk<G: Group, R: RngCore + ?Sized>(
        &self,
        params: &SystemParams<G>,
        aid: &Pseudonym<G::Element>,
        rng: &mut R,
    ) -> Result<PartialSecretKey<G::Element>, ClpaError> {
        let k = params.group.random_scalar(rng);
        self.issue_psk_with_nonce(params, aid, &k)
    }

    /// [`Kgc::issue_psk`] with a caller-chosen nonce `k`, which must be a
    /// fresh uniform draw from `Z_q^*` outside of tests.
    pub fn issue_psk_with_nonce<G: Group>(
        &self,
        params: &SystemParams<G>,
        aid: &Pseudonym<G::Element>,
        k: &Scalar,
    ) -> Result<PartialSecretKey<G::Element>, ClpaError> {
        if !self.knows(params, aid) {
            return Err(ClpaError::UnknownPseudonym);
        }
        let group = &params.group;
        let f = group.scalars();
        let u = group.mul_generator(k);
        let th = theta(params, aid, &u);
        let lambda = f.add(k, &f.mul(&th, &self.beta));
        Ok(PartialSecretKey { lambda, u })
    }
}
