#![allow(dead_code)]

use clfl_core::clpa::{
    extract_usk, replenish_pseudonyms, setup, FullKeyPair, Kgc, ProtocolConfig, Pseudonym, RealIdentity, SystemParams,
    Tra,
};
use clfl_core::group::Group;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const NOW: u64 = 1_700_000_000;

pub struct Fixture<G: Group> {
    pub params: SystemParams<G>,
    pub tra: Tra,
    pub kgc: Kgc,
    pub rng: ChaCha20Rng,
}

pub fn fixture<G: Group>(group: G, seed: u64) -> Fixture<G> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (params, tra, kgc) = setup(group, ProtocolConfig::default(), &mut rng).unwrap();
    Fixture { params, tra, kgc, rng }
}

impl<G: Group> Fixture<G> {
    /// Registers `name` and returns one extracted pseudonym key pair.
    pub fn enroll(&mut self, name: &str) -> (Pseudonym<G::Element>, FullKeyPair<G::Element>) {
        let rid = RealIdentity::from_name(name).unwrap();
        self.tra.register(rid);
        let (aid, psk) = replenish_pseudonyms(&self.params, &mut self.tra, &mut self.kgc, &rid, 1, &mut self.rng, NOW)
            .unwrap()
            .remove(0);
        let kp = extract_usk(&self.params, &aid, &psk, &mut self.rng).unwrap();
        (aid, kp)
    }
}

/// Schoolbook arithmetic on y^2 = x^3 + 2x + 2 over F_17, written from
/// scratch with machine integers.
pub mod toy {
    use clfl_core::group::{AffinePoint, Scalar};
    use num_bigint::BigUint;

    pub const P: i64 = 17;
    pub const Q: u64 = 19;

    pub type Pt = Option<(i64, i64)>;

    pub fn md(v: i64) -> i64 {
        v.rem_euclid(P)
    }

    pub fn inv(v: i64) -> i64 {
        (1..P).find(|c| md(v * c) == 1).expect("invertible")
    }

    pub fn oracle_add(a: Pt, b: Pt) -> Pt {
        let ((x1, y1), (x2, y2)) = match (a, b) {
            (None, _) => return b,
            (_, None) => return a,
            (Some(p), Some(q)) => (p, q),
        };
        let s = if x1 == x2 {
            if md(y1 + y2) == 0 {
                return None;
            }
            md((3 * x1 * x1 + 2) * inv(2 * y1))
        } else {
            md((y2 - y1) * inv(x2 - x1))
        };
        let x3 = md(s * s - x1 - x2);
        Some((x3, md(s * (x1 - x3) - y1)))
    }

    pub fn multiples() -> Vec<Pt> {
        let g = Some((5, 1));
        let mut out = vec![None];
        for k in 1..Q as usize {
            out.push(oracle_add(out[k - 1], g));
        }
        out
    }

    pub fn to_affine(p: Pt) -> AffinePoint {
        match p {
            None => AffinePoint::Identity,
            Some((x, y)) => AffinePoint::new(x as u32, y as u32),
        }
    }

    pub fn small(s: &Scalar) -> u64 {
        small_big(s.value())
    }

    pub fn small_big(v: &BigUint) -> u64 {
        v.to_u64_digits().first().copied().unwrap_or(0)
    }

    /// Discrete log of a toy point via the multiples table.
    pub fn dlog(e: &AffinePoint) -> u64 {
        let pt = match e {
            AffinePoint::Identity => None,
            AffinePoint::Finite { x, y } => Some((small_big(x) as i64, small_big(y) as i64)),
        };
        multiples().iter().position(|p| *p == pt).expect("toy point") as u64
    }
}
