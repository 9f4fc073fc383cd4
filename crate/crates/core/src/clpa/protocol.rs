use rand::RngCore;

use super::{
    ClpaError, FullKeyPair, Kgc, PartialSecretKey, Pseudonym, PublicKey, RealIdentity, RejectReason, SignedEnvelope,
    SystemParams, Tra, Verdict,
};
use crate::group::{hash_to_bits, Group, HashInput, IdBits, Scalar, TAG_H0, TAG_H1, TAG_H2, TAG_H3};

/// `H0(alpha*AID1, T_pub, T_i)`.
pub(crate) fn h0_mask<G: Group>(params: &SystemParams<G>, shared: &G::Element, t_issue: u64) -> IdBits {
    let g = &params.group;
    let input = HashInput::new()
        .field(&g.encode_element(shared))
        .field(&g.encode_element(&params.t_pub))
        .u64_field(t_issue);
    hash_to_bits(TAG_H0, input.as_bytes())
}

/// `theta = H1(AID, U, P_pub)`.
pub fn theta<G: Group>(params: &SystemParams<G>, aid: &Pseudonym<G::Element>, u: &G::Element) -> Scalar {
    let g = &params.group;
    let input = HashInput::new()
        .field(&params.encode_aid(aid))
        .field(&g.encode_element(u))
        .field(&g.encode_element(&params.p_pub));
    g.hash_to_scalar(TAG_H1, input.as_bytes())
}

/// The two signature challenges
/// `h1 = H2(m, AID, PK, A, P_pub, t)` and `h2 = H3(m, AID, PK, A, P_pub, h1)`.
pub fn challenges<G: Group>(
    params: &SystemParams<G>,
    m: &[u8],
    aid: &Pseudonym<G::Element>,
    pk: &PublicKey<G::Element>,
    a: &G::Element,
    t: u64,
) -> (Scalar, Scalar) {
    let g = &params.group;
    let prefix = HashInput::new()
        .field(m)
        .field(&params.encode_aid(aid))
        .field(&params.encode_pk(pk))
        .field(&g.encode_element(a))
        .field(&g.encode_element(&params.p_pub));
    let h1 = g.hash_to_scalar(TAG_H2, prefix.clone().u64_field(t).as_bytes());
    let h2 = g.hash_to_scalar(TAG_H3, prefix.field(&g.scalars().encode(&h1)).as_bytes());
    (h1, h2)
}

/// Pseudonym request: draws `r` from `Z_q^*` and returns `(r, AID1 = rP)`.
pub fn request_pseudonym<G: Group, R: RngCore + ?Sized>(params: &SystemParams<G>, rng: &mut R) -> (Scalar, G::Element) {
    let r = params.group.random_scalar(rng);
    let aid1 = params.group.mul_generator(&r);
    (r, aid1)
}

/// Checks `lambda*P = U + H1(AID, U, P_pub)*P_pub`, then draws the secret
/// value `mu` and forms `PK = {X = mu*P, U}`.
pub fn extract_usk<G: Group, R: RngCore + ?Sized>(
    params: &SystemParams<G>,
    aid: &Pseudonym<G::Element>,
    psk: &PartialSecretKey<G::Element>,
    rng: &mut R,
) -> Result<FullKeyPair<G::Element>, ClpaError> {
    let g = &params.group;
    if !g.contains(&psk.u) || g.is_identity(&psk.u) {
        return Err(ClpaError::InvalidPartialKey);
    }
    let th = theta(params, aid, &psk.u);
    let lhs = g.mul_generator(&psk.lambda);
    let rhs = g.add(&psk.u, &g.mul(&th, &params.p_pub));
    if lhs != rhs {
        return Err(ClpaError::InvalidPartialKey);
    }
    let mu = g.random_scalar(rng);
    let x = g.mul_generator(&mu);
    Ok(FullKeyPair::new(
        mu,
        psk.lambda.clone(),
        PublicKey { x, u: psk.u.clone() },
        th,
    ))
}

pub fn sign<G: Group, R: RngCore + ?Sized>(
    params: &SystemParams<G>,
    aid: &Pseudonym<G::Element>,
    kp: &FullKeyPair<G::Element>,
    m: &[u8],
    t: u64,
    rng: &mut R,
) -> SignedEnvelope<G::Element> {
    let a = params.group.random_scalar(rng);
    sign_with_nonce(params, aid, kp, m, t, &a)
}

/// Deterministic core of [`sign`]. Reusing a nonce across two messages
/// reveals the key; outside of tests `a` must be a fresh draw.
pub fn sign_with_nonce<G: Group>(
    params: &SystemParams<G>,
    aid: &Pseudonym<G::Element>,
    kp: &FullKeyPair<G::Element>,
    m: &[u8],
    t: u64,
    a: &Scalar,
) -> SignedEnvelope<G::Element> {
    let g = &params.group;
    let f = g.scalars();
    let big_a = g.mul_generator(a);
    let (h1, h2) = challenges(params, m, aid, &kp.pk, &big_a, t);
    let eta = f.sub(&f.sub(a, &f.mul(&h1, kp.mu())), &f.mul(&h2, kp.lambda()));
    SignedEnvelope {
        m: m.to_vec(),
        aid: aid.clone(),
        theta: kp.theta.clone(),
        pk: kp.pk.clone(),
        eta,
        a: big_a,
        t,
    }
}

fn is_fresh<G: Group>(params: &SystemParams<G>, env: &SignedEnvelope<G::Element>, now: u64) -> bool {
    let cfg = &params.config;
    let message_fresh = now.abs_diff(env.t) <= cfg.freshness_window;
    let pseudonym_fresh = env.aid.t_issue <= now.saturating_add(cfg.freshness_window)
        && now.saturating_sub(env.aid.t_issue) <= cfg.pseudonym_lifetime;
    message_fresh && pseudonym_fresh
}

/// Stateless verification: freshness, theta consistency, then the
/// verification equation `A = eta*P + h1*X + h2*U + (h2*theta)*P_pub`.
pub fn verify<G: Group>(params: &SystemParams<G>, env: &SignedEnvelope<G::Element>, now: u64) -> Verdict {
    let g = &params.group;
    let f = g.scalars();
    for e in [&env.aid.aid1, &env.pk.x, &env.pk.u, &env.a] {
        if !g.contains(e) || g.is_identity(e) {
            return Verdict::Reject(RejectReason::Malformed);
        }
    }
    if env.theta.value() >= f.order() || env.eta.value() >= f.order() {
        return Verdict::Reject(RejectReason::Malformed);
    }
    if !is_fresh(params, env, now) {
        return Verdict::Reject(RejectReason::Stale);
    }
    if env.theta != theta(params, &env.aid, &env.pk.u) {
        return Verdict::Reject(RejectReason::ThetaMismatch);
    }
    let (h1, h2) = challenges(params, &env.m, &env.aid, &env.pk, &env.a, env.t);
    let terms = [
        g.mul_generator(&env.eta),
        g.mul(&h1, &env.pk.x),
        g.mul(&h2, &env.pk.u),
        g.mul(&f.mul(&h2, &env.theta), &params.p_pub),
    ];
    let rhs = terms[1..].iter().fold(terms[0].clone(), |acc, t| g.add(&acc, t));
    if rhs == env.a {
        Verdict::Accept
    } else {
        Verdict::Reject(RejectReason::EquationFailure)
    }
}

/// A pseudonym together with its KGC-issued partial key.
pub type IssuedPseudonym<E> = (Pseudonym<E>, PartialSecretKey<E>);

/// Issues `count` fresh pseudonyms with partial keys for a registered
/// identity.
pub fn replenish_pseudonyms<G: Group, R: RngCore + ?Sized>(
    params: &SystemParams<G>,
    tra: &mut Tra,
    kgc: &mut Kgc,
    rid: &RealIdentity,
    count: usize,
    rng: &mut R,
    now: u64,
) -> Result<Vec<IssuedPseudonym<G::Element>>, ClpaError> {
    let mut aids = Vec::with_capacity(count);
    for _ in 0..count {
        let (_, aid1) = request_pseudonym(params, rng);
        aids.push(tra.issue_pseudonym(params, rid, &aid1, now)?);
    }
    if count > 0 {
        kgc.import_issuance(&tra.issuance_list());
    }
    aids.into_iter()
        .map(|aid| {
            let psk = kgc.issue_psk(params, &aid, rng)?;
            Ok((aid, psk))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clpa::{setup, ProtocolConfig, TraceOutcome};
    use crate::group::{P256Group, WeierstrassCurve};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture<G: Group> {
        params: SystemParams<G>,
        tra: Tra,
        kgc: Kgc,
        rng: ChaCha20Rng,
    }

    fn fixture<G: Group>(group: G, seed: u64) -> Fixture<G> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (params, mut tra, kgc) = setup(group, ProtocolConfig::default(), &mut rng).unwrap();
        tra.register(RealIdentity::from_name("alice").unwrap());
        tra.register(RealIdentity::from_name("bob").unwrap());
        Fixture { params, tra, kgc, rng }
    }

    fn enroll<G: Group>(fx: &mut Fixture<G>, name: &str, now: u64) -> (Pseudonym<G::Element>, FullKeyPair<G::Element>) {
        let rid = RealIdentity::from_name(name).unwrap();
        let (aid, psk) = replenish_pseudonyms(&fx.params, &mut fx.tra, &mut fx.kgc, &rid, 1, &mut fx.rng, now)
            .unwrap()
            .pop()
            .unwrap();
        let kp = extract_usk(&fx.params, &aid, &psk, &mut fx.rng).unwrap();
        (aid, kp)
    }

    #[test]
    fn honest_signature_verifies() {
        let mut fx = fixture(P256Group::new(), 11);
        let (aid, kp) = enroll(&mut fx, "alice", 100);
        let env = sign(&fx.params, &aid, &kp, b"model update", 150, &mut fx.rng);
        assert_eq!(verify(&fx.params, &env, 150), Verdict::Accept);
        assert_eq!(fx.params.group.mul_generator(kp.mu()), kp.pk.x);
    }

    #[test]
    fn randomized_signatures_differ_and_verify() {
        let mut fx = fixture(P256Group::new(), 12);
        let (aid, kp) = enroll(&mut fx, "alice", 0);
        let e1 = sign(&fx.params, &aid, &kp, b"m", 5, &mut fx.rng);
        let e2 = sign(&fx.params, &aid, &kp, b"m", 5, &mut fx.rng);
        assert_ne!((&e1.eta, &e1.a), (&e2.eta, &e2.a));
        assert!(verify(&fx.params, &e1, 5).is_accept());
        assert!(verify(&fx.params, &e2, 5).is_accept());
    }

    #[test]
    fn stale_envelope_rejected() {
        let mut fx = fixture(P256Group::new(), 13);
        let (aid, kp) = enroll(&mut fx, "alice", 0);
        let env = sign(&fx.params, &aid, &kp, b"m", 1000, &mut fx.rng);
        let w = fx.params.config.freshness_window;
        assert!(verify(&fx.params, &env, 1000 + w).is_accept());
        assert_eq!(verify(&fx.params, &env, 1000 + w + 1), Verdict::Reject(RejectReason::Stale));
        // pseudonym past its lifetime
        let late = fx.params.config.pseudonym_lifetime + 1;
        let env = sign(&fx.params, &aid, &kp, b"m", late, &mut fx.rng);
        assert_eq!(verify(&fx.params, &env, late), Verdict::Reject(RejectReason::Stale));
    }

    #[test]
    fn theta_mismatch_rejected() {
        let mut fx = fixture(P256Group::new(), 14);
        let (aid, kp) = enroll(&mut fx, "alice", 0);
        let mut env = sign(&fx.params, &aid, &kp, b"m", 1, &mut fx.rng);
        let f = fx.params.group.scalars();
        env.theta = f.add(&env.theta, &f.one());
        assert_eq!(verify(&fx.params, &env, 1), Verdict::Reject(RejectReason::ThetaMismatch));
    }

    #[test]
    fn identity_elements_are_malformed() {
        let mut fx = fixture(P256Group::new(), 15);
        let (aid, kp) = enroll(&mut fx, "alice", 0);
        let mut env = sign(&fx.params, &aid, &kp, b"m", 1, &mut fx.rng);
        env.a = fx.params.group.identity();
        assert_eq!(verify(&fx.params, &env, 1), Verdict::Reject(RejectReason::Malformed));
    }

    #[test]
    fn perturbed_lambda_fails_extraction() {
        let mut fx = fixture(P256Group::new(), 16);
        let rid = RealIdentity::from_name("alice").unwrap();
        let (aid, mut psk) =
            replenish_pseudonyms(&fx.params, &mut fx.tra, &mut fx.kgc, &rid, 1, &mut fx.rng, 0).unwrap().pop().unwrap();
        let f = fx.params.group.scalars();
        psk.lambda = f.add(&psk.lambda, &f.one());
        assert!(matches!(
            extract_usk(&fx.params, &aid, &psk, &mut fx.rng),
            Err(ClpaError::InvalidPartialKey)
        ));
    }

    #[test]
    fn replenish_edge_cases() {
        let mut fx = fixture(WeierstrassCurve::toy(), 17);
        let rid = RealIdentity::from_name("bob").unwrap();
        let none = replenish_pseudonyms(&fx.params, &mut fx.tra, &mut fx.kgc, &rid, 0, &mut fx.rng, 0).unwrap();
        assert!(none.is_empty());
        let unknown = RealIdentity::from_name("eve").unwrap();
        assert!(replenish_pseudonyms(&fx.params, &mut fx.tra, &mut fx.kgc, &unknown, 1, &mut fx.rng, 0).is_err());
    }

    #[test]
    fn trace_round_trip_and_wrong_key() {
        let mut fx = fixture(P256Group::new(), 18);
        let (aid, _) = enroll(&mut fx, "bob", 42);
        let bob = RealIdentity::from_name("bob").unwrap();
        assert_eq!(fx.tra.trace(&fx.params, &aid), TraceOutcome::Identified(bob));

        let mut other = fixture(P256Group::new(), 19);
        other.tra.register(bob);
        assert_eq!(other.tra.trace(&fx.params, &aid), TraceOutcome::Untraceable);

        let mut shifted = aid.clone();
        shifted.t_issue += 1;
        assert_eq!(fx.tra.trace(&fx.params, &shifted), TraceOutcome::Untraceable);
    }

    #[test]
    fn zero_identity_aid2_is_the_mask() {
        let mut fx = fixture(WeierstrassCurve::toy(), 20);
        let zero = RealIdentity::from_bits([0u8; 16]);
        fx.tra.register(zero);
        let (_, aid1) = request_pseudonym(&fx.params, &mut fx.rng);
        let aid = fx.tra.issue_pseudonym(&fx.params, &zero, &aid1, 1000).unwrap();
        let shared = fx.params.group.mul(&fx.tra_alpha(), &aid1);
        assert_eq!(aid.aid2, h0_mask(&fx.params, &shared, 1000));
    }

    impl<G: Group> Fixture<G> {
        fn tra_alpha(&self) -> Scalar {
            let snap = self.tra.snapshot("", self.params.group.scalars());
            self.params.group.scalars().decode(&hex::decode(snap.alpha).unwrap()).unwrap()
        }
    }
}
