//! Wall-clock latency of sign and verify for both schemes.

use std::time::Instant;

use rand::RngCore;
use serde::Serialize;

use super::baseline::{baseline_verify, CertificateAuthority, PkiSubject};
use crate::clpa::{extract_usk, replenish_pseudonyms, setup, sign, verify, ProtocolConfig, RealIdentity};
use crate::group::Group;

pub const WARMUP_CALLS: usize = 10;
pub const MIN_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("at least {MIN_ITERATIONS} iterations are required, got {0}")]
    TooFewIterations(usize),
    #[error("benchmark setup failed: {0}")]
    Setup(String),
    #[error("an honest signature failed to verify during measurement")]
    Verification,
}

/// Median and quartiles in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub median_us: f64,
    pub p25_us: f64,
    pub p75_us: f64,
    pub iterations: usize,
}

impl LatencyStats {
    pub fn iqr_us(&self) -> f64 {
        self.p75_us - self.p25_us
    }

    /// Linear-interpolated quartiles of `samples`.
    pub fn from_samples(samples: &mut [f64]) -> Self {
        assert!(!samples.is_empty(), "no samples");
        samples.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (samples.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            samples[lo] + (samples[hi] - samples[lo]) * (pos - lo as f64)
        };
        LatencyStats {
            median_us: q(0.5),
            p25_us: q(0.25),
            p75_us: q(0.75),
            iterations: samples.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeTiming {
    pub scheme: &'static str,
    pub sign: LatencyStats,
    pub verify: LatencyStats,
}

fn time_calls(iterations: usize, mut call: impl FnMut() -> bool) -> Result<LatencyStats, BenchError> {
    for _ in 0..WARMUP_CALLS {
        if !call() {
            return Err(BenchError::Verification);
        }
    }
    let mut samples = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        let ok = call();
        samples.push(start.elapsed().as_secs_f64() * 1e6);
        if !ok {
            return Err(BenchError::Verification);
        }
    }
    Ok(LatencyStats::from_samples(&mut samples))
}

/// Times the certificateless scheme on a fixed payload of `payload_len` bytes.
pub fn time_certificateless<G: Group, R: RngCore>(
    group: G,
    iterations: usize,
    payload_len: usize,
    rng: &mut R,
) -> Result<SchemeTiming, BenchError> {
    if iterations < MIN_ITERATIONS {
        return Err(BenchError::TooFewIterations(iterations));
    }
    let setup_err = |e: crate::clpa::ClpaError| BenchError::Setup(e.to_string());
    let (params, mut tra, mut kgc) = setup(group, ProtocolConfig::default(), rng).map_err(setup_err)?;
    let rid = RealIdentity::from_name("bench").map_err(setup_err)?;
    tra.register(rid);
    let now = 1_000;
    let (aid, psk) = replenish_pseudonyms(&params, &mut tra, &mut kgc, &rid, 1, rng, now)
        .map_err(setup_err)?
        .remove(0);
    let kp = extract_usk(&params, &aid, &psk, rng).map_err(setup_err)?;
    let payload = vec![0x5a; payload_len];

    let sign_stats = time_calls(iterations, || {
        std::hint::black_box(sign(&params, &aid, &kp, &payload, now, rng));
        true
    })?;
    let env = sign(&params, &aid, &kp, &payload, now, rng);
    let verify_stats = time_calls(iterations, || std::hint::black_box(verify(&params, &env, now)).is_accept())?;
    Ok(SchemeTiming {
        scheme: "certificateless",
        sign: sign_stats,
        verify: verify_stats,
    })
}

/// Times the certificate baseline on the same payload size.
pub fn time_pki<G: Group, R: RngCore>(
    group: G,
    iterations: usize,
    payload_len: usize,
    rng: &mut R,
) -> Result<SchemeTiming, BenchError> {
    if iterations < MIN_ITERATIONS {
        return Err(BenchError::TooFewIterations(iterations));
    }
    let ca = CertificateAuthority::new(&group, "CN=clfl-ca", rng);
    let subject = PkiSubject::enroll(&group, &ca, "CN=user-0001", 0, 1 << 40, rng);
    let payload = vec![0x5a; payload_len];
    let now = 1_000;

    let sign_stats = time_calls(iterations, || {
        std::hint::black_box(subject.sign(&group, &payload, now, rng));
        true
    })?;
    let msg = subject.sign(&group, &payload, now, rng);
    let verify_stats = time_calls(iterations, || {
        std::hint::black_box(baseline_verify(&group, &ca.pk, &msg, now, 300)).is_ok()
    })?;
    Ok(SchemeTiming {
        scheme: "pki",
        sign: sign_stats,
        verify: verify_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::WeierstrassCurve;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn quartiles_of_known_samples() {
        let mut s = vec![5.0, 1.0, 3.0, 2.0, 4.0];
        let st = LatencyStats::from_samples(&mut s);
        assert_eq!((st.p25_us, st.median_us, st.p75_us), (2.0, 3.0, 4.0));
        assert_eq!(st.iqr_us(), 2.0);
        let mut even = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(LatencyStats::from_samples(&mut even).median_us, 2.5);
    }

    #[test]
    fn iteration_floor() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert_eq!(
            time_pki(WeierstrassCurve::toy(), 99, 8, &mut rng).unwrap_err(),
            BenchError::TooFewIterations(99)
        );
        let t = time_certificateless(WeierstrassCurve::toy(), 100, 8, &mut rng).unwrap();
        assert_eq!(t.sign.iterations, 100);
        assert!(t.verify.median_us > 0.0);
    }
}
