//! Certificate-based baseline, latency measurement and the communication
//! cost model.

pub mod baseline;
pub mod cost;
pub mod counting;
pub mod timing;

pub use self::baseline::{
    baseline_verify, baseline_verify_wire, schnorr_sign, schnorr_verify, Certificate, CertificateAuthority,
    PkiMessage, PkiReject, PkiSubject, SchnorrSig,
};
pub use self::cost::{cost_model, scheme_shapes, CostModelInput, CostReport, CostRow, SchemeProfile, SchemeShape};
pub use self::counting::{CountingGroup, OpCounts};
pub use self::timing::{time_certificateless, time_pki, BenchError, LatencyStats, SchemeTiming};
