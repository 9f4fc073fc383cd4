use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::transcript::Transcript;
use super::{ScenarioKind, SimConfig};
use crate::clpa::{ProtocolConfig, TraSnapshot};
use crate::fl::{aggregate_uniform, ModelVector};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    pub mse: f64,
    pub bytes_sent: u64,
    pub accepted: usize,
    pub rejected: usize,
    pub accepted_from: Vec<String>,
    pub accepted_updates: Vec<ModelVector>,
    pub global: ModelVector,
    /// Every user ended the round holding the CS's global model.
    pub users_consistent: bool,
}

/// TRA state plus the public values needed to trace offline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraExport {
    #[serde(flatten)]
    pub tra: TraSnapshot,
    pub t_pub: String,
    pub p_pub: String,
    pub protocol: ProtocolConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// CS plus users.
    pub entities: usize,
    /// Also counting the TRA and KGC.
    pub entities_with_authorities: usize,
    pub envelopes: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub discarded: usize,
    pub rejects_by_reason: BTreeMap<String, usize>,
    pub bytes_per_round: BTreeMap<u32, u64>,
    pub adversarial: usize,
    pub adversarial_rejected: usize,
    /// Rejected adversarial envelopes over all adversarial envelopes;
    /// absent when the run had none.
    pub detection_rate: Option<f64>,
}

pub fn summarize(transcript: &Transcript, pairs: usize) -> Summary {
    let mut s = Summary {
        entities: 2 * pairs + 1,
        entities_with_authorities: 2 * pairs + 3,
        envelopes: 0,
        accepted: 0,
        rejected: 0,
        discarded: 0,
        rejects_by_reason: BTreeMap::new(),
        bytes_per_round: BTreeMap::new(),
        adversarial: 0,
        adversarial_rejected: 0,
        detection_rate: None,
    };
    for e in transcript.events().iter().filter(|e| e.kind.is_envelope()) {
        s.envelopes += 1;
        *s.bytes_per_round.entry(e.round).or_default() += e.bytes.unwrap_or(0) as u64;
        match e.verdict.as_deref() {
            Some("accept") => s.accepted += 1,
            Some("reject") => {
                s.rejected += 1;
                let reason = e.reason.clone().unwrap_or_default();
                *s.rejects_by_reason.entry(reason).or_default() += 1;
            }
            _ => s.discarded += 1,
        }
        if e.adversarial {
            s.adversarial += 1;
            s.adversarial_rejected += e.is_reject() as usize;
        }
    }
    if s.adversarial > 0 {
        s.detection_rate = Some(s.adversarial_rejected as f64 / s.adversarial as f64);
    }
    s
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub config: SimConfig,
    pub transcript: Transcript,
    pub rounds: Vec<RoundRecord>,
    pub summary: Summary,
    pub tra_export: TraExport,
    /// Test MSE of least squares on the pooled training data.
    pub pooled_mse: f64,
    pub final_mse: f64,
    /// Transcript indices where a rejected TRA-issued pseudonym did not
    /// trace back to its holder.
    pub accountability_failures: Vec<u64>,
    pub issued_pseudonyms: usize,
}

impl SimOutcome {
    /// `round,mse,bytes_sent,accepted,rejected` rows.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("round,mse,bytes_sent,accepted,rejected\n");
        for r in &self.rounds {
            out.push_str(&format!("{},{:.9e},{},{},{}\n", r.round, r.mse, r.bytes_sent, r.accepted, r.rejected));
        }
        out
    }

    /// Checks the run's invariants and scenario expectations; returns one
    /// message per violation.
    pub fn assertion_failures(&self) -> Vec<String> {
        let mut fails = Vec::new();
        let mut previous = ModelVector::zeros(self.config.fl.dimension);
        for r in &self.rounds {
            let expected = if r.accepted_updates.is_empty() {
                previous.weights.clone()
            } else {
                aggregate_uniform(&r.accepted_updates)
                    .map(|m| m.weights)
                    .unwrap_or_default()
            };
            if expected != r.global.weights {
                fails.push(format!("round {}: global model differs from the accepted-set aggregate", r.round));
            }
            if r.accepted_from.iter().any(|f| f == "ADV") {
                fails.push(format!("round {}: an injected update was aggregated", r.round));
            }
            if !r.users_consistent {
                fails.push(format!("round {}: a user holds a model other than the CS's", r.round));
            }
            previous = r.global.clone();
        }
        if !self.accountability_failures.is_empty() {
            fails.push(format!(
                "{} rejected envelopes did not trace to their pseudonym holder",
                self.accountability_failures.len()
            ));
        }
        let s = &self.summary;
        match self.config.scenario.kind {
            ScenarioKind::None => {
                if s.rejected + s.discarded > 0 {
                    fails.push(format!("honest run had {} rejections", s.rejected + s.discarded));
                }
            }
            kind => match s.detection_rate {
                Some(rate) if rate < 1.0 => fails.push(format!("{kind}: detection rate {rate} below 1")),
                Some(_) => {}
                None => fails.push(format!("{kind}: the adversary never acted")),
            },
        }
        if let Some(limit) = self.config.max_mse_ratio {
            let ratio = self.final_mse / self.pooled_mse;
            if ratio.is_nan() || ratio > limit {
                fails.push(format!("final MSE is {ratio:.4}x the pooled least-squares MSE (limit {limit})"));
            }
        }
        fails
    }
}
