use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Setup,
    Register,
    Pseudonym,
    PartialKey,
    Extract,
    ModelInit,
    TrainError,
    Update,
    Global,
    U2u,
}

impl EventKind {
    /// True for signed traffic on the adversary-observable channel.
    pub fn is_envelope(&self) -> bool {
        matches!(self, EventKind::Update | EventKind::Global | EventKind::U2u)
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One transcript line. Optional fields are omitted when empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub time: u64,
    pub round: u32,
    pub from: String,
    pub to: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// SHA-256 of the delivered wire bytes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes: Option<usize>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub adversarial: bool,
    /// Encoded pseudonym, hex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aid: Option<String>,
    /// TRA trace of a rejected envelope's pseudonym.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traced: Option<String>,
}

impl Event {
    pub fn is_reject(&self) -> bool {
        self.verdict.as_deref() == Some("reject")
    }

    pub fn is_accept(&self) -> bool {
        self.verdict.as_deref() == Some("accept")
    }
}

/// Append-only event log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, mut event: Event) {
        event.seq = self.events.len() as u64;
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, (usize, serde_json::Error)> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(line).map_err(|e| (i + 1, e))?);
        }
        Ok(Transcript { events })
    }
}
