//! Scripted forging strategies.
//!
//! Each function builds the envelope an attacker with the stated knowledge
//! can produce. None of them holds both a KGC-issued partial key and the
//! matching secret value, so an honest verifier must reject every output.

use rand::{Rng, RngCore};

use crate::clpa::{sign, theta, FullKeyPair, Pseudonym, PublicKey, SignedEnvelope, SystemParams};
use crate::group::{Group, Scalar, ID_BYTES};

/// A pseudonym and key pair minted without the TRA or the KGC.
#[derive(Debug, Clone)]
pub struct SelfMinted<E> {
    pub aid: Pseudonym<E>,
    pub keys: FullKeyPair<E>,
}

/// Mints a pseudonym with random `AID2` and a "partial key" `lambda = k`
/// that lacks the `theta*beta` term.
pub fn self_minted_identity<G: Group, R: RngCore + ?Sized>(
    params: &SystemParams<G>,
    now: u64,
    rng: &mut R,
) -> SelfMinted<G::Element> {
    let g = &params.group;
    let mut aid2 = [0u8; ID_BYTES];
    rng.fill_bytes(&mut aid2);
    let aid = Pseudonym {
        aid1: g.mul_generator(&g.random_scalar(rng)),
        aid2,
        t_issue: now,
    };
    let k = g.random_scalar(rng);
    let u = g.mul_generator(&k);
    let th = theta(params, &aid, &u);
    let mu = g.random_scalar(rng);
    let pk = PublicKey { x: g.mul_generator(&mu), u };
    SelfMinted {
        aid,
        keys: FullKeyPair::new(mu, k, pk, th),
    }
}

pub fn sign_self_minted<G: Group, R: RngCore + ?Sized>(
    params: &SystemParams<G>,
    ident: &SelfMinted<G::Element>,
    m: &[u8],
    t: u64,
    rng: &mut R,
) -> SignedEnvelope<G::Element> {
    sign(params, &ident.aid, &ident.keys, m, t, rng)
}

/// Public-key replacement without the master key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A1Strategy {
    /// Fresh `U' = k'P`, `X' = mu'P`, honest `theta'`, `lambda' = k'`.
    RecomputedTheta,
    /// Fresh keys but the victim's `theta` left in place.
    StaleTheta,
    /// `U' = k'P - theta_guess*P_pub`, hoping `theta'` equals the guess.
    CancellingCommitment,
    /// Victim's `U` kept, `X` replaced, `lambda` guessed at random.
    GuessedPartialKey,
}

impl A1Strategy {
    pub const ALL: [A1Strategy; 4] = [
        A1Strategy::RecomputedTheta,
        A1Strategy::StaleTheta,
        A1Strategy::CancellingCommitment,
        A1Strategy::GuessedPartialKey,
    ];
}

pub fn forge_a1<G: Group, R: RngCore + ?Sized>(
    params: &SystemParams<G>,
    victim: &SignedEnvelope<G::Element>,
    strategy: A1Strategy,
    m: &[u8],
    t: u64,
    rng: &mut R,
) -> SignedEnvelope<G::Element> {
    let g = &params.group;
    let aid = &victim.aid;
    let mu = g.random_scalar(rng);
    let x = g.mul_generator(&mu);
    let k = g.random_scalar(rng);
    let (u, lambda, th) = match strategy {
        A1Strategy::RecomputedTheta => {
            let u = g.mul_generator(&k);
            let th = theta(params, aid, &u);
            (u, k, th)
        }
        A1Strategy::StaleTheta => (g.mul_generator(&k), k, victim.theta.clone()),
        A1Strategy::CancellingCommitment => {
            let guess = theta(params, aid, &g.mul_generator(&k));
            let u = g.add(&g.mul_generator(&k), &g.negate(&g.mul(&guess, &params.p_pub)));
            let th = theta(params, aid, &u);
            (u, k, th)
        }
        A1Strategy::GuessedPartialKey => (victim.pk.u.clone(), g.random_scalar(rng), victim.theta.clone()),
    };
    let keys = FullKeyPair::new(mu, lambda, PublicKey { x, u }, th);
    sign(params, aid, &keys, m, t, rng)
}

/// Master-key holder that cannot replace the victim's public key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A2Strategy {
    /// Uniform `eta` and `A`.
    RandomEta,
    /// `(eta, A)` lifted from an honest envelope onto a new message.
    ReusedCommitment,
    /// `eta = a - h2*theta*beta`, i.e. signing with `beta` alone.
    SecretlessRearrangement,
    /// `A` built from guessed challenges `h1', h2'`.
    HashRearrangement,
}

impl A2Strategy {
    pub const ALL: [A2Strategy; 4] = [
        A2Strategy::RandomEta,
        A2Strategy::ReusedCommitment,
        A2Strategy::SecretlessRearrangement,
        A2Strategy::HashRearrangement,
    ];
}

pub fn forge_a2<G: Group, R: RngCore + ?Sized>(
    params: &SystemParams<G>,
    beta: &Scalar,
    victim: &SignedEnvelope<G::Element>,
    strategy: A2Strategy,
    m: &[u8],
    t: u64,
    rng: &mut R,
) -> SignedEnvelope<G::Element> {
    let g = &params.group;
    let f = g.scalars();
    let mut env = SignedEnvelope {
        m: m.to_vec(),
        aid: victim.aid.clone(),
        theta: victim.theta.clone(),
        pk: victim.pk.clone(),
        eta: victim.eta.clone(),
        a: victim.a.clone(),
        t,
    };
    match strategy {
        A2Strategy::RandomEta => {
            env.eta = g.random_scalar(rng);
            env.a = g.mul_generator(&g.random_scalar(rng));
        }
        A2Strategy::ReusedCommitment => {}
        A2Strategy::SecretlessRearrangement => {
            let a = g.random_scalar(rng);
            env.a = g.mul_generator(&a);
            let (_, h2) = crate::clpa::challenges(params, m, &env.aid, &env.pk, &env.a, t);
            env.eta = f.sub(&a, &f.mul(&f.mul(&h2, &env.theta), beta));
        }
        A2Strategy::HashRearrangement => {
            let eta = g.random_scalar(rng);
            let h1 = g.random_scalar(rng);
            let h2 = g.random_scalar(rng);
            let terms = [
                g.mul_generator(&eta),
                g.mul(&h1, &env.pk.x),
                g.mul(&h2, &env.pk.u),
                g.mul(&f.mul(&h2, &env.theta), &params.p_pub),
            ];
            env.a = terms[1..].iter().fold(terms[0].clone(), |acc, t| g.add(&acc, t));
            env.eta = eta;
        }
    }
    env
}

/// Flips one uniformly chosen bit.
pub fn flip_random_bit<R: Rng + ?Sized>(bytes: &mut [u8], rng: &mut R) -> usize {
    let bit = rng.random_range(0..bytes.len() * 8);
    bytes[bit / 8] ^= 1 << (bit % 8);
    bit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clpa::{
        extract_usk, replenish_pseudonyms, setup, verify, ProtocolConfig, RealIdentity, RejectReason, Verdict,
    };
    use crate::group::P256Group;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    type Env = SignedEnvelope<<P256Group as Group>::Element>;

    fn honest() -> (SystemParams<P256Group>, Scalar, Env, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let (params, mut tra, mut kgc) = setup(P256Group::new(), ProtocolConfig::default(), &mut rng).unwrap();
        let rid = RealIdentity::from_name("victim").unwrap();
        tra.register(rid);
        let (aid, psk) = replenish_pseudonyms(&params, &mut tra, &mut kgc, &rid, 1, &mut rng, 100)
            .unwrap()
            .remove(0);
        let kp = extract_usk(&params, &aid, &psk, &mut rng).unwrap();
        let env = sign(&params, &aid, &kp, b"honest", 120, &mut rng);
        assert_eq!(verify(&params, &env, 120), Verdict::Accept);
        let beta = kgc.master_secret().clone();
        (params, beta, env, rng)
    }

    #[test]
    fn self_minted_fails_the_equation() {
        let (params, _, _, mut rng) = honest();
        let ident = self_minted_identity(&params, 120, &mut rng);
        let env = sign_self_minted(&params, &ident, b"global", 120, &mut rng);
        assert_eq!(verify(&params, &env, 121), Verdict::Reject(RejectReason::EquationFailure));
    }

    #[test]
    fn a1_strategies_rejected() {
        let (params, _, victim, mut rng) = honest();
        for s in A1Strategy::ALL {
            for _ in 0..5 {
                let env = forge_a1(&params, &victim, s, b"poison", 120, &mut rng);
                let v = verify(&params, &env, 121);
                let want = if s == A1Strategy::StaleTheta {
                    RejectReason::ThetaMismatch
                } else {
                    RejectReason::EquationFailure
                };
                assert_eq!(v, Verdict::Reject(want), "{s:?}");
            }
        }
    }

    #[test]
    fn a2_strategies_rejected() {
        let (params, beta, victim, mut rng) = honest();
        for s in A2Strategy::ALL {
            for _ in 0..5 {
                let env = forge_a2(&params, &beta, &victim, s, b"poison", 120, &mut rng);
                assert_eq!(env.pk, victim.pk);
                assert_eq!(verify(&params, &env, 121), Verdict::Reject(RejectReason::EquationFailure), "{s:?}");
            }
        }
    }

    #[test]
    fn bit_flip_changes_one_bit() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let orig = vec![0u8; 32];
        let mut b = orig.clone();
        let bit = flip_random_bit(&mut b, &mut rng);
        let diff: u32 = orig.iter().zip(&b).map(|(x, y)| (x ^ y).count_ones()).sum();
        assert_eq!(diff, 1);
        assert_eq!(b[bit / 8], 1 << (bit % 8));
    }
}
