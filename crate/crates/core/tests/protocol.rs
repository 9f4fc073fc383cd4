mod common;

use clfl_core::clpa::{
    challenges, decode_envelope, encode_envelope, extract_usk, field_ranges, request_pseudonym, sign, sign_with_nonce,
    verify, verify_wire, ClpaError, EnvelopeField, PartialSecretKey, RealIdentity, RejectReason, TraceOutcome, Verdict,
    Verifier,
};
use clfl_core::group::{Group, P256Group, WeierstrassCurve};
use clfl_core::sim::adversary::{self_minted_identity, sign_self_minted};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use common::{fixture, NOW};

fn lp(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

// Frozen from a run of the toy fixture below; the hash framing is cross-checked
// independently in the same test.
const GOLDEN_TOY_ENVELOPE: &str = "0000000568656c6c6f0000000304000600000010827c009dd542d91fbe8bfaf299dd5c4400000008000000006553f1000000000101000000030403010000000304070b00000001120000000304000600000008000000006553f100";

#[test]
fn golden_toy_envelope() {
    let mut fx = fixture(WeierstrassCurve::toy(), 42);
    let (aid, kp) = fx.enroll("golden");
    let params = &fx.params;
    let g = &params.group;
    let f = g.scalars();
    let env = sign_with_nonce(params, &aid, &kp, b"hello", NOW, &f.from_u64(7));
    let bytes = encode_envelope(g, &env);
    // toy elements are 3 bytes, scalars 1 byte
    assert_eq!(bytes.len(), 5 + 40 + 2 + 4 * 3 + 16 + 16);
    assert_eq!(hex::encode(&bytes), GOLDEN_TOY_ENVELOPE);
    assert_eq!(verify(params, &decode_envelope(g, &bytes).unwrap(), NOW), Verdict::Accept);

    // h1 recomputed from raw SHA-256 and the framing rules
    let mut material = b"H2:".to_vec();
    lp(&mut material, b"hello");
    lp(&mut material, &params.encode_aid(&aid));
    lp(&mut material, &params.encode_pk(&kp.pk));
    lp(&mut material, &g.encode_element(&env.a));
    lp(&mut material, &g.encode_element(&params.p_pub));
    lp(&mut material, &NOW.to_be_bytes());
    let d = Sha256::digest(&material);
    let mut expect = BigUint::from_bytes_be(&d) % 19u32;
    if expect == BigUint::ZERO {
        expect = BigUint::from(1u32);
    }
    let (h1, _) = challenges(params, b"hello", &aid, &kp.pk, &env.a, NOW);
    assert_eq!(h1.value(), &expect);
}

#[test]
fn tamper_sweep_rejects_every_single_bit_flip() {
    let mut fx = fixture(P256Group::new(), 3);
    let (aid, kp) = fx.enroll("user-0001");
    let fields = [
        EnvelopeField::Message,
        EnvelopeField::Eta,
        EnvelopeField::A,
        EnvelopeField::X,
        EnvelopeField::U,
        EnvelopeField::Aid2,
        EnvelopeField::Timestamp,
    ];
    for field in fields {
        for trial in 0..25 {
            let m = format!("model update {trial}");
            let env = sign(&fx.params, &aid, &kp, m.as_bytes(), NOW, &mut fx.rng);
            let mut bytes = encode_envelope(&fx.params.group, &env);
            let range = field_ranges(&bytes)
                .unwrap()
                .into_iter()
                .find(|(f, _)| *f == field)
                .unwrap()
                .1;
            let bit = fx.rng.random_range(0..range.len() * 8);
            bytes[range.start + bit / 8] ^= 1 << (bit % 8);
            let (verdict, _) = verify_wire(&fx.params, &bytes, NOW);
            assert!(!verdict.is_accept(), "{} trial {trial} bit {bit}", field.name());
        }
    }
}

#[test]
fn psk_check_accepts_honest_and_rejects_tampered() {
    let mut fx = fixture(P256Group::new(), 8);
    let mut rng2 = ChaCha20Rng::seed_from_u64(80);
    let (_, _, mut other_kgc) = clfl_core::clpa::setup(P256Group::new(), Default::default(), &mut rng2).unwrap();
    let rid = RealIdentity::from_name("psk-check").unwrap();
    fx.tra.register(rid);
    let f = fx.params.group.scalars().clone();
    for _ in 0..50 {
        let (_, aid1) = request_pseudonym(&fx.params, &mut fx.rng);
        let aid = fx.tra.issue_pseudonym(&fx.params, &rid, &aid1, NOW).unwrap();
        fx.kgc.import_issuance(&fx.tra.issuance_list());
        other_kgc.import_issuance(&fx.tra.issuance_list());

        let psk = fx.kgc.issue_psk(&fx.params, &aid, &mut fx.rng).unwrap();
        assert!(extract_usk(&fx.params, &aid, &psk, &mut fx.rng).is_ok());

        let delta = fx.params.group.random_scalar(&mut fx.rng);
        let bent = PartialSecretKey {
            lambda: f.add(&psk.lambda, &delta),
            u: psk.u,
        };
        assert!(matches!(
            extract_usk(&fx.params, &aid, &bent, &mut fx.rng),
            Err(ClpaError::InvalidPartialKey)
        ));

        let foreign = other_kgc.issue_psk(&fx.params, &aid, &mut fx.rng).unwrap();
        assert!(extract_usk(&fx.params, &aid, &foreign, &mut fx.rng).is_err());
    }
}

#[test]
fn issued_pseudonyms_trace_and_minted_ones_do_not() {
    let mut fx = fixture(P256Group::new(), 12);
    let rids: Vec<_> = (0..10)
        .map(|i| RealIdentity::from_name(&format!("user-{i:04}")).unwrap())
        .collect();
    fx.tra.load_roster(rids.iter().copied());
    for n in 0..100 {
        let rid = rids[n % rids.len()];
        let (_, aid1) = request_pseudonym(&fx.params, &mut fx.rng);
        let aid = fx.tra.issue_pseudonym(&fx.params, &rid, &aid1, NOW + n as u64).unwrap();
        assert_eq!(fx.tra.trace(&fx.params, &aid), TraceOutcome::Identified(rid));
    }
    for _ in 0..20 {
        let minted = self_minted_identity(&fx.params, NOW, &mut fx.rng);
        assert_eq!(fx.tra.trace(&fx.params, &minted.aid), TraceOutcome::Untraceable);
        let env = sign_self_minted(&fx.params, &minted, b"x", NOW, &mut fx.rng);
        assert_eq!(verify(&fx.params, &env, NOW), Verdict::Reject(RejectReason::EquationFailure));
    }
}

#[test]
fn pseudonyms_of_one_identity_share_no_public_field() {
    let mut fx = fixture(P256Group::new(), 21);
    let rid = RealIdentity::from_name("user-0042").unwrap();
    fx.tra.register(rid);
    let g = fx.params.group.clone();
    let mut seen = std::collections::HashSet::new();
    for _ in 0..40 {
        let (_, aid1) = request_pseudonym(&fx.params, &mut fx.rng);
        let aid = fx.tra.issue_pseudonym(&fx.params, &rid, &aid1, NOW).unwrap();
        assert!(seen.insert(g.encode_element(&aid.aid1)));
        assert!(seen.insert(aid.aid2.to_vec()));
        assert_ne!(&aid.aid2, rid.bits());
    }
}

#[test]
fn replay_cache_and_freshness_window() {
    let mut fx = fixture(P256Group::new(), 30);
    let (aid, kp) = fx.enroll("user-0001");
    let env = sign(&fx.params, &aid, &kp, b"m", NOW, &mut fx.rng);
    let mut v = Verifier::new();
    assert_eq!(v.check(&fx.params, &env, NOW), Verdict::Accept);
    assert_eq!(v.check(&fx.params, &env, NOW + 1), Verdict::Reject(RejectReason::Replay));
    let w = fx.params.config.freshness_window;
    assert_eq!(verify(&fx.params, &env, NOW + w), Verdict::Accept);
    assert_eq!(verify(&fx.params, &env, NOW + w + 1), Verdict::Reject(RejectReason::Stale));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sign_verify_round_trip(seed in any::<u64>(), m in proptest::collection::vec(any::<u8>(), 0..256), dt in 0u64..=300) {
        let mut fx = fixture(P256Group::new(), seed);
        let (aid, kp) = fx.enroll("prop");
        let env = sign(&fx.params, &aid, &kp, &m, NOW, &mut fx.rng);
        prop_assert_eq!(verify(&fx.params, &env, NOW + dt), Verdict::Accept);
        let bytes = encode_envelope(&fx.params.group, &env);
        prop_assert_eq!(bytes.len(), m.len() + 396);
        prop_assert_eq!(decode_envelope(&fx.params.group, &bytes).unwrap(), env);
    }

    #[test]
    fn toy_signatures_verify_for_any_message(seed in any::<u64>(), m in proptest::collection::vec(any::<u8>(), 0..64)) {
        let mut fx = fixture(WeierstrassCurve::toy(), seed);
        let (aid, kp) = fx.enroll("prop");
        let env = sign(&fx.params, &aid, &kp, &m, NOW, &mut fx.rng);
        prop_assert_eq!(verify(&fx.params, &env, NOW), Verdict::Accept);
    }

    #[test]
    fn wrong_message_rejected(seed in any::<u64>(), a in proptest::collection::vec(any::<u8>(), 1..64), b in proptest::collection::vec(any::<u8>(), 1..64)) {
        prop_assume!(a != b);
        let mut fx = fixture(P256Group::new(), seed);
        let (aid, kp) = fx.enroll("prop");
        let mut env = sign(&fx.params, &aid, &kp, &a, NOW, &mut fx.rng);
        env.m = b;
        prop_assert_eq!(verify(&fx.params, &env, NOW), Verdict::Reject(RejectReason::EquationFailure));
    }

    #[test]
    fn trace_inverts_issuance(seed in any::<u64>(), name in "[a-z0-9-]{1,16}", t in 0u64..u32::MAX as u64) {
        let mut fx = fixture(P256Group::new(), seed);
        let rid = RealIdentity::from_name(&name).unwrap();
        fx.tra.register(rid);
        let (_, aid1) = request_pseudonym(&fx.params, &mut fx.rng);
        let aid = fx.tra.issue_pseudonym(&fx.params, &rid, &aid1, t).unwrap();
        prop_assert_eq!(fx.tra.trace(&fx.params, &aid), TraceOutcome::Identified(rid));
        let bytes = fx.params.encode_aid(&aid);
        prop_assert_eq!(fx.params.decode_aid(&bytes).unwrap(), aid);
    }
}
