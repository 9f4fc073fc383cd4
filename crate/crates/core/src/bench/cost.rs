//! Communication cost model and the per-scheme comparison table.

use rand::RngCore;
use serde::Serialize;

use super::baseline::{baseline_verify, CertificateAuthority, PkiSubject};
use super::counting::CountingGroup;
use super::timing::{BenchError, SchemeTiming};
use crate::clpa::{
    encode_envelope, extract_usk, replenish_pseudonyms, setup, sign, verify, ProtocolConfig, RealIdentity,
};
use crate::group::Group;

/// Structural profile of one scheme, measured from its wire format and an
/// instrumented verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeShape {
    pub scheme: String,
    pub bytes_per_message: usize,
    pub sign_ops_per_message: usize,
    /// Verification equations evaluated per received message.
    pub verify_ops_per_message: usize,
    pub verify_scalar_mults: usize,
}

/// Signs one `payload_len`-byte message with each scheme over `group` and
/// counts the bytes sent and the work done to verify it.
pub fn scheme_shapes<G: Group, R: RngCore>(
    group: G,
    payload_len: usize,
    rng: &mut R,
) -> Result<(SchemeShape, SchemeShape), BenchError> {
    let payload = vec![0xa5; payload_len];
    let now = 1_000;

    let cg = CountingGroup::new(group.clone());
    let setup_err = |e: crate::clpa::ClpaError| BenchError::Setup(e.to_string());
    let (params, mut tra, mut kgc) = setup(cg.clone(), ProtocolConfig::default(), rng).map_err(setup_err)?;
    let rid = RealIdentity::from_name("shape").map_err(setup_err)?;
    tra.register(rid);
    let (aid, psk) = replenish_pseudonyms(&params, &mut tra, &mut kgc, &rid, 1, rng, now)
        .map_err(setup_err)?
        .remove(0);
    let kp = extract_usk(&params, &aid, &psk, rng).map_err(setup_err)?;
    let env = sign(&params, &aid, &kp, &payload, now, rng);
    let cl_bytes = encode_envelope(&params.group, &env).len();
    cg.counter().reset();
    if !verify(&params, &env, now).is_accept() {
        return Err(BenchError::Verification);
    }
    let cl_ops = cg.counter().snapshot();

    let pg = CountingGroup::new(group);
    let ca = CertificateAuthority::new(&pg, "CN=clfl-ca", rng);
    let subject = PkiSubject::enroll(&pg, &ca, "CN=user-0001", 0, 1 << 40, rng);
    let msg = subject.sign(&pg, &payload, now, rng);
    let pki_bytes = msg.to_bytes(&pg).len();
    pg.counter().reset();
    if baseline_verify(&pg, &ca.pk, &msg, now, 300).is_err() {
        return Err(BenchError::Verification);
    }
    let pki_ops = pg.counter().snapshot();

    Ok((
        SchemeShape {
            scheme: "certificateless".into(),
            bytes_per_message: cl_bytes,
            sign_ops_per_message: 1,
            verify_ops_per_message: cl_ops.equation_checks,
            verify_scalar_mults: cl_ops.scalar_mults,
        },
        SchemeShape {
            scheme: "pki".into(),
            bytes_per_message: pki_bytes,
            sign_ops_per_message: 1,
            verify_ops_per_message: pki_ops.equation_checks,
            verify_scalar_mults: pki_ops.scalar_mults,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeProfile {
    pub shape: SchemeShape,
    pub t_sign_us: f64,
    pub t_veri_us: f64,
}

impl SchemeProfile {
    /// Combines a structural shape with medians from a timing run.
    pub fn measured(shape: SchemeShape, timing: &SchemeTiming) -> Self {
        SchemeProfile {
            shape,
            t_sign_us: timing.sign.median_us,
            t_veri_us: timing.verify.median_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostModelInput {
    /// Training rounds `N`.
    pub rounds: u64,
    /// User-to-user messages `M`.
    pub messages: u64,
    pub pairs: u64,
    pub poisson_lambda: f64,
    pub schemes: Vec<SchemeProfile>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid cost model input: {0}")]
pub struct CostError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub scheme: String,
    pub bytes_per_message: usize,
    pub sign_ops_per_message: usize,
    pub verify_ops_per_message: usize,
    pub t_sign_us: f64,
    pub t_veri_us: f64,
    pub rounds: u64,
    pub messages: u64,
    /// `N * (T_sign + T_veri)` for one entity.
    pub training_cost_us: f64,
    /// `M * (T_sign + T_veri)`.
    pub messaging_cost_us: f64,
    /// Training cost summed over all `2P` users.
    pub training_cost_all_users_us: f64,
    pub total_cost_us: f64,
    /// `N * lambda`, the expected total waiting latency.
    pub expected_waiting: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
}

pub const COST_CSV_HEADER: &str = "scheme,bytes_per_message,sign_ops_per_message,verify_ops_per_message,\
t_sign_us,t_veri_us,rounds,messages,training_cost_us,messaging_cost_us,training_cost_all_users_us,\
total_cost_us,expected_waiting";

impl CostReport {
    pub fn row(&self, scheme: &str) -> Option<&CostRow> {
        self.rows.iter().find(|r| r.scheme == scheme)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(COST_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scheme,
                r.bytes_per_message,
                r.sign_ops_per_message,
                r.verify_ops_per_message,
                r.t_sign_us,
                r.t_veri_us,
                r.rounds,
                r.messages,
                r.training_cost_us,
                r.messaging_cost_us,
                r.training_cost_all_users_us,
                r.total_cost_us,
                r.expected_waiting
            ));
        }
        out
    }
}

pub fn cost_model(input: &CostModelInput) -> Result<CostReport, CostError> {
    let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
    if !finite_nonneg(input.poisson_lambda) {
        return Err(CostError("poisson_lambda must be finite and non-negative".into()));
    }
    let mut rows = Vec::with_capacity(input.schemes.len());
    for s in &input.schemes {
        if !finite_nonneg(s.t_sign_us) || !finite_nonneg(s.t_veri_us) {
            return Err(CostError(format!("{}: latencies must be finite and non-negative", s.shape.scheme)));
        }
        let per_message = s.t_sign_us + s.t_veri_us;
        let training = input.rounds as f64 * per_message;
        let messaging = input.messages as f64 * per_message;
        rows.push(CostRow {
            scheme: s.shape.scheme.clone(),
            bytes_per_message: s.shape.bytes_per_message,
            sign_ops_per_message: s.shape.sign_ops_per_message,
            verify_ops_per_message: s.shape.verify_ops_per_message,
            t_sign_us: s.t_sign_us,
            t_veri_us: s.t_veri_us,
            rounds: input.rounds,
            messages: input.messages,
            training_cost_us: training,
            messaging_cost_us: messaging,
            training_cost_all_users_us: training * (2 * input.pairs) as f64,
            total_cost_us: training + messaging,
            expected_waiting: input.rounds as f64 * input.poisson_lambda,
        });
    }
    Ok(CostReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{P256Group, WeierstrassCurve};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn profile(name: &str, ts: f64, tv: f64) -> SchemeProfile {
        SchemeProfile {
            shape: SchemeShape {
                scheme: name.into(),
                bytes_per_message: 0,
                sign_ops_per_message: 1,
                verify_ops_per_message: 1,
                verify_scalar_mults: 4,
            },
            t_sign_us: ts,
            t_veri_us: tv,
        }
    }

    #[test]
    fn formula_examples() {
        let input = CostModelInput {
            rounds: 10,
            messages: 0,
            pairs: 1,
            poisson_lambda: 4.0,
            schemes: vec![profile("x", 2.0, 3.0)],
        };
        let r = cost_model(&input).unwrap();
        assert_eq!(r.rows[0].training_cost_us, 50.0);
        assert_eq!(r.rows[0].training_cost_all_users_us, 100.0);
        assert_eq!(r.rows[0].expected_waiting, 40.0);

        let zero = CostModelInput {
            rounds: 0,
            messages: 0,
            ..input.clone()
        };
        let r = cost_model(&zero).unwrap();
        assert_eq!((r.rows[0].training_cost_us, r.rows[0].messaging_cost_us, r.rows[0].total_cost_us), (0.0, 0.0, 0.0));

        let bad = CostModelInput {
            schemes: vec![profile("x", -1.0, 3.0)],
            ..input
        };
        assert!(cost_model(&bad).is_err());
    }

    #[test]
    fn shapes_on_p256() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (cl, pki) = scheme_shapes(P256Group::new(), 40, &mut rng).unwrap();
        assert_eq!(cl.bytes_per_message, 40 + 396);
        assert_eq!(pki.bytes_per_message, 40 + 500);
        assert_eq!((cl.verify_ops_per_message, pki.verify_ops_per_message), (1, 2));
        assert_eq!((cl.verify_scalar_mults, pki.verify_scalar_mults), (4, 4));
    }

    #[test]
    fn shapes_on_toy_curve() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (cl, pki) = scheme_shapes(WeierstrassCurve::toy(), 8, &mut rng).unwrap();
        assert!(cl.bytes_per_message < pki.bytes_per_message);
        assert_eq!((cl.verify_ops_per_message, pki.verify_ops_per_message), (1, 2));
    }
}
