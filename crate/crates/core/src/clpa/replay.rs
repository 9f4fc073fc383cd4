use std::collections::HashMap;

use super::{verify, RejectReason, SignedEnvelope, SystemParams, Verdict};
use crate::group::{sha256, Digest, Group};

/// A verifier with a replay cache.
///
/// Remembers `(AID, t, H(m))` of every envelope accepted inside the
/// freshness window; an exact duplicate is rejected even while still fresh.
/// Only accepted envelopes enter the cache.
#[derive(Debug, Clone, Default)]
pub struct Verifier {
    seen: HashMap<(Vec<u8>, u64, Digest), u64>,
}

impl Verifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check<G: Group>(&mut self, params: &SystemParams<G>, env: &SignedEnvelope<G::Element>, now: u64) -> Verdict {
        let window = params.config.freshness_window;
        self.seen.retain(|_, t| now.abs_diff(*t) <= window);

        let verdict = verify(params, env, now);
        if !verdict.is_accept() {
            return verdict;
        }
        let key = (params.encode_aid(&env.aid), env.t, sha256(&env.m));
        if self.seen.contains_key(&key) {
            return Verdict::Reject(RejectReason::Replay);
        }
        self.seen.insert(key, env.t);
        Verdict::Accept
    }

    pub fn cached(&self) -> usize {
        self.seen.len()
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
    fn duplicate_rejected_and_cache_pruned() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let (params, mut tra, mut kgc) = setup(P256Group::new(), ProtocolConfig::default(), &mut rng).unwrap();
        let rid = RealIdentity::from_name("erin").unwrap();
        tra.register(rid);
        let (aid, psk) = replenish_pseudonyms(&params, &mut tra, &mut kgc, &rid, 1, &mut rng, 0).unwrap().remove(0);
        let kp = extract_usk(&params, &aid, &psk, &mut rng).unwrap();
        let env = sign(&params, &aid, &kp, b"payload", 100, &mut rng);

        let mut v = Verifier::new();
        assert_eq!(v.check(&params, &env, 100), Verdict::Accept);
        assert_eq!(v.check(&params, &env, 101), Verdict::Reject(RejectReason::Replay));
        // a different message at the same time is fine
        let other = sign(&params, &aid, &kp, b"payload-2", 100, &mut rng);
        assert_eq!(v.check(&params, &other, 101), Verdict::Accept);
        assert_eq!(v.cached(), 2);
        // past the window the duplicate is stale, and the cache empties
        assert_eq!(v.check(&params, &env, 401), Verdict::Reject(RejectReason::Stale));
        assert_eq!(v.cached(), 0);
    }
}
