use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::clpa::ProtocolConfig;
use crate::fl::FlConfig;
use crate::latency::PoissonDelay;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CurveChoice {
    /// The 19-point curve; forgeries succeed with probability about 1/19,
    /// so attack runs on it are demonstrations only.
    Toy,
    #[default]
    Prod,
}

impl FromStr for CurveChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "toy" => Ok(CurveChoice::Toy),
            "prod" | "p256" => Ok(CurveChoice::Prod),
            other => Err(format!("unknown curve `{other}` (expected toy or prod)")),
        }
    }
}

impl fmt::Display for CurveChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveChoice::Toy => "toy",
            CurveChoice::Prod => "prod",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    None,
    FakeServer,
    ClientModification,
    Replay,
    A1PkReplacement,
    A2MasterKey,
}

impl ScenarioKind {
    pub const ATTACKS: [ScenarioKind; 5] = [
        ScenarioKind::FakeServer,
        ScenarioKind::ClientModification,
        ScenarioKind::Replay,
        ScenarioKind::A1PkReplacement,
        ScenarioKind::A2MasterKey,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::None => "none",
            ScenarioKind::FakeServer => "fake_server",
            ScenarioKind::ClientModification => "client_modification",
            ScenarioKind::Replay => "replay",
            ScenarioKind::A1PkReplacement => "a1_pk_replacement",
            ScenarioKind::A2MasterKey => "a2_master_key",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" | "honest" => Ok(ScenarioKind::None),
            "fake_server" => Ok(ScenarioKind::FakeServer),
            "client_modification" | "modification" => Ok(ScenarioKind::ClientModification),
            "replay" => Ok(ScenarioKind::Replay),
            "a1_pk_replacement" => Ok(ScenarioKind::A1PkReplacement),
            "a2_master_key" => Ok(ScenarioKind::A2MasterKey),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub kind: ScenarioKind,
    /// First round in which the adversary acts (1-based).
    pub target_round: u32,
    /// User index the adversary is or impersonates. Ignored by fake_server.
    pub target_user: usize,
    /// Forgeries per firing for the key-replacement and master-key attacks.
    pub attempts: usize,
}

impl Default for AttackScenario {
    fn default() -> Self {
        AttackScenario {
            kind: ScenarioKind::None,
            target_round: 1,
            target_user: 0,
            attempts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Sender/receiver user pairs; the run has `2 * pairs` users plus the CS.
    pub pairs: usize,
    pub fl: FlConfig,
    pub scenario: AttackScenario,
    /// Mean of the per-round Poisson waiting latency, seconds.
    pub poisson_lambda: f64,
    pub seed: u64,
    pub curve: CurveChoice,
    pub protocol: ProtocolConfig,
    pub start_time: u64,
    pub round_interval: u64,
    pub link_delay: u64,
    pub u2u_payload_bytes: usize,
    /// Pseudonyms issued per request to the TRA.
    pub pseudonym_batch: usize,
    /// Optional convergence gate: final MSE over the pooled least-squares MSE.
    pub max_mse_ratio: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::with_pairs(5)
    }
}

impl SimConfig {
    /// Defaults with every user participating in every round.
    pub fn with_pairs(pairs: usize) -> Self {
        SimConfig {
            pairs,
            fl: FlConfig {
                total_clients: 2 * pairs,
                participation: 2 * pairs,
                ..FlConfig::default()
            },
            scenario: AttackScenario::default(),
            poisson_lambda: 4.0,
            seed: 1,
            curve: CurveChoice::Prod,
            protocol: ProtocolConfig::default(),
            start_time: 1_700_000_000,
            round_interval: 60,
            link_delay: 1,
            u2u_payload_bytes: 64,
            pseudonym_batch: 2,
            max_mse_ratio: None,
        }
    }

    pub fn users(&self) -> usize {
        2 * self.pairs
    }

    /// Protocol entities: the CS plus all users.
    pub fn entity_count(&self) -> usize {
        2 * self.pairs + 1
    }

    /// Seconds of pseudonym lifetime kept in reserve before rotating.
    pub(crate) fn rotation_margin(&self) -> u64 {
        self.round_interval + 2 * self.protocol.freshness_window + (10.0 * self.poisson_lambda).ceil() as u64 + 10
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if self.pairs == 0 {
            return bad("pairs must be at least 1".into());
        }
        if self.fl.total_clients != self.users() {
            return bad(format!(
                "FL clients ({}) must equal the number of users ({})",
                self.fl.total_clients,
                self.users()
            ));
        }
        self.fl.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
        PoissonDelay::new(self.poisson_lambda).map_err(|e| SimError::Invalid(e.to_string()))?;
        if self.round_interval == 0 {
            return bad("round_interval must be positive".into());
        }
        if 2 * self.link_delay >= self.protocol.freshness_window {
            return bad("link_delay must be well inside the freshness window".into());
        }
        if self.pseudonym_batch == 0 {
            return bad("pseudonym_batch must be at least 1".into());
        }
        if self.protocol.pseudonym_lifetime <= 2 * self.rotation_margin() {
            return bad(format!(
                "pseudonym_lifetime must exceed {} seconds for this round timing",
                2 * self.rotation_margin()
            ));
        }
        if let Some(r) = self.max_mse_ratio {
            if !(r.is_finite() && r > 0.0) {
                return bad("max_mse_ratio must be positive".into());
            }
        }
        let s = &self.scenario;
        if s.kind != ScenarioKind::None {
            if s.target_round == 0 || s.target_round > self.fl.rounds {
                return bad(format!("target_round {} is outside 1..={}", s.target_round, self.fl.rounds));
            }
            if s.target_user >= self.users() {
                return bad(format!("target_user {} does not exist", s.target_user));
            }
            if s.attempts == 0 {
                return bad("attempts must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines. `#` starts a comment. Unknown or repeated
    /// keys are errors, reported with their line number.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut cfg = SimConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        let mut participation = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| SimError::Config { line, msg };
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }

            fn num<T: FromStr>(value: &str, key: &str, line: usize) -> Result<T, SimError>
            where
                T::Err: fmt::Display,
            {
                value.parse().map_err(|e: T::Err| SimError::Config {
                    line,
                    msg: format!("bad value for `{key}`: {e}"),
                })
            }

            match key {
                "pairs" => cfg.pairs = num(value, key, line)?,
                "rounds" => cfg.fl.rounds = num(value, key, line)?,
                "participation" => participation = Some(num(value, key, line)?),
                "local_epochs" => cfg.fl.local_epochs = num(value, key, line)?,
                "learning_rate" => cfg.fl.learning_rate = num(value, key, line)?,
                "dimension" => cfg.fl.dimension = num(value, key, line)?,
                "points_per_client" => cfg.fl.points_per_client = num(value, key, line)?,
                "test_points" => cfg.fl.test_points = num(value, key, line)?,
                "noise_std" => cfg.fl.noise_std = num(value, key, line)?,
                "data_seed" => cfg.fl.data_seed = num(value, key, line)?,
                "heterogeneous" => cfg.fl.heterogeneous = num(value, key, line)?,
                "poisson_lambda" => cfg.poisson_lambda = num(value, key, line)?,
                "seed" => cfg.seed = num(value, key, line)?,
                "curve" => cfg.curve = value.parse().map_err(err)?,
                "scenario" => cfg.scenario.kind = value.parse().map_err(err)?,
                "target_round" => cfg.scenario.target_round = num(value, key, line)?,
                "target_user" => cfg.scenario.target_user = num(value, key, line)?,
                "attempts" => cfg.scenario.attempts = num(value, key, line)?,
                "freshness_window" => cfg.protocol.freshness_window = num(value, key, line)?,
                "pseudonym_lifetime" => cfg.protocol.pseudonym_lifetime = num(value, key, line)?,
                "start_time" => cfg.start_time = num(value, key, line)?,
                "round_interval" => cfg.round_interval = num(value, key, line)?,
                "link_delay" => cfg.link_delay = num(value, key, line)?,
                "u2u_payload_bytes" => cfg.u2u_payload_bytes = num(value, key, line)?,
                "pseudonym_batch" => cfg.pseudonym_batch = num(value, key, line)?,
                "max_mse_ratio" => cfg.max_mse_ratio = Some(num(value, key, line)?),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.fl.total_clients = cfg.users();
        cfg.fl.participation = participation.unwrap_or(cfg.users());
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inverse of [`SimConfig::parse`].
    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let mut lines = vec![
            format!("pairs = {}", self.pairs),
            format!("rounds = {}", self.fl.rounds),
            format!("participation = {}", self.fl.participation),
            format!("local_epochs = {}", self.fl.local_epochs),
            format!("learning_rate = {}", self.fl.learning_rate),
            format!("dimension = {}", self.fl.dimension),
            format!("points_per_client = {}", self.fl.points_per_client),
            format!("test_points = {}", self.fl.test_points),
            format!("noise_std = {}", self.fl.noise_std),
            format!("data_seed = {}", self.fl.data_seed),
            format!("heterogeneous = {}", self.fl.heterogeneous),
            format!("poisson_lambda = {}", self.poisson_lambda),
            format!("seed = {}", self.seed),
            format!("curve = {}", self.curve),
            format!("scenario = {}", s.kind),
            format!("target_round = {}", s.target_round),
            format!("target_user = {}", s.target_user),
            format!("attempts = {}", s.attempts),
            format!("freshness_window = {}", self.protocol.freshness_window),
            format!("pseudonym_lifetime = {}", self.protocol.pseudonym_lifetime),
            format!("start_time = {}", self.start_time),
            format!("round_interval = {}", self.round_interval),
            format!("link_delay = {}", self.link_delay),
            format!("u2u_payload_bytes = {}", self.u2u_payload_bytes),
            format!("pseudonym_batch = {}", self.pseudonym_batch),
        ];
        if let Some(r) = self.max_mse_ratio {
            lines.push(format!("max_mse_ratio = {r}"));
        }
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
        assert_eq!(SimConfig::with_pairs(1).entity_count(), 3);
    }

    #[test]
    fn parse_round_trip() {
        let mut cfg = SimConfig::with_pairs(3);
        cfg.fl.participation = 4;
        cfg.scenario = AttackScenario {
            kind: ScenarioKind::Replay,
            target_round: 2,
            target_user: 5,
            attempts: 3,
        };
        cfg.max_mse_ratio = Some(1.5);
        cfg.curve = CurveChoice::Toy;
        assert_eq!(SimConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let cases = [
            ("pairs = 2\nbogus = 1\n", 2),
            ("# c\n\nrounds = x\n", 3),
            ("seed = 1\nseed = 2\n", 2),
            ("pairs 2\n", 1),
            ("scenario = teleport\n", 1),
        ];
        for (text, want) in cases {
            match SimConfig::parse(text) {
                Err(SimError::Config { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn semantic_errors() {
        assert!(matches!(
            SimConfig::parse("pairs = 2\nparticipation = 5\n"),
            Err(SimError::Invalid(_))
        ));
        assert!(matches!(
            SimConfig::parse("rounds = 3\nscenario = replay\ntarget_round = 4\n"),
            Err(SimError::Invalid(_))
        ));
        assert!(matches!(
            SimConfig::parse("pseudonym_lifetime = 100\n"),
            Err(SimError::Invalid(_))
        ));
    }

    #[test]
    fn comments_and_aliases() {
        let cfg = SimConfig::parse("scenario = modification # inline\ncurve=toy\n").unwrap();
        assert_eq!(cfg.scenario.kind, ScenarioKind::ClientModification);
        assert_eq!(cfg.curve, CurveChoice::Toy);
    }
}
