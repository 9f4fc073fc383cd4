use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::adversary::{self, A1Strategy, A2Strategy, SelfMinted};
use super::metrics::{summarize, RoundRecord, SimOutcome, TraExport};
use super::transcript::{Event, EventKind, Transcript};
use super::{ScenarioKind, SimConfig, SimError};
use crate::clpa::{
    decode_envelope, encode_envelope, extract_usk, replenish_pseudonyms, setup, sign, FullKeyPair, Kgc,
    PartialSecretKey, Pseudonym, RealIdentity, RejectReason, SignedEnvelope, SystemParams, TraceOutcome, Tra,
    Verdict, Verifier,
};
use crate::fl::{
    aggregate_uniform, decode_update, encode_update, evaluate, local_train, make_task, pooled_least_squares,
    select_participants, ModelVector, Task,
};
use crate::group::{sha256, Group};
use crate::latency::PoissonDelay;

/// A protocol participant on the simulated network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Cs,
    User(usize),
}

impl Node {
    pub fn label(&self) -> String {
        match self {
            Node::Cs => "CS".to_string(),
            Node::User(i) => format!("U{i}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Delivery {
    time: u64,
    seq: u64,
    from: String,
    to: Node,
    kind: EventKind,
    bytes: Vec<u8>,
    adversarial: bool,
}

impl PartialEq for Delivery {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Delivery {}

impl PartialOrd for Delivery {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Delivery {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

type Stock<E> = Vec<(Pseudonym<E>, PartialSecretKey<E>)>;

#[derive(Debug)]
struct Entity<G: Group> {
    rid: RealIdentity,
    stock: Stock<G::Element>,
    aid: Pseudonym<G::Element>,
    keys: FullKeyPair<G::Element>,
    verifier: Verifier,
}

#[derive(Debug)]
struct AdversaryState<E> {
    fired: bool,
    fake_server: Option<SelfMinted<E>>,
}

fn stream(seed: u64, n: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng
}

/// Weights an attacker tries to push into the aggregate.
fn poisoned_model(dimension: usize, round: u32) -> ModelVector {
    ModelVector {
        weights: vec![100.0; dimension],
        round,
    }
}

/// Full simulation state over one group backend.
#[derive(Debug)]
pub struct SimState<G: Group> {
    config: SimConfig,
    params: SystemParams<G>,
    tra: Tra,
    kgc: Kgc,
    cs: Entity<G>,
    users: Vec<Entity<G>>,
    task: Task,
    global: ModelVector,
    user_models: Vec<ModelVector>,
    clock: u64,
    round: u32,
    queue: BinaryHeap<Reverse<Delivery>>,
    next_delivery: u64,
    proto_rng: ChaCha20Rng,
    latency_rng: ChaCha20Rng,
    select_rng: ChaCha20Rng,
    adv_rng: ChaCha20Rng,
    delay: PoissonDelay,
    transcript: Transcript,
    rounds: Vec<RoundRecord>,
    accepted_this_round: Vec<(String, ModelVector)>,
    adversary: AdversaryState<G::Element>,
    accountability_failures: Vec<u64>,
}

impl<G: Group> SimState<G> {
    /// System setup, registration, pseudonym and partial-key issuance, key
    /// extraction and model initialization.
    pub fn build(config: &SimConfig, group: G) -> Result<Self, SimError> {
        config.validate()?;
        let build_err = |step: &'static str| move |e: crate::clpa::ClpaError| SimError::Build { step, detail: e.to_string() };

        let mut proto_rng = stream(config.seed, 0);
        let (params, mut tra, mut kgc) = setup(group, config.protocol, &mut proto_rng).map_err(build_err("setup"))?;
        let mut transcript = Transcript::new();
        let now = config.start_time;
        let mut log = |from: &str, to: &str, kind: EventKind, aid: Option<String>| {
            transcript.push(Event {
                seq: 0,
                time: now,
                round: 0,
                from: from.into(),
                to: to.into(),
                kind,
                verdict: None,
                reason: None,
                digest: None,
                bytes: None,
                adversarial: false,
                aid,
                traced: None,
            })
        };
        log("TRA", "ALL", EventKind::Setup, None);
        log("KGC", "ALL", EventKind::Setup, None);

        let nodes: Vec<Node> = std::iter::once(Node::Cs)
            .chain((0..config.users()).map(Node::User))
            .collect();
        let rid_of = |n: Node| match n {
            Node::Cs => RealIdentity::from_name("server"),
            Node::User(i) => RealIdentity::from_name(&format!("user-{i:04}")),
        };
        for &n in &nodes {
            let rid = rid_of(n).map_err(build_err("register"))?;
            tra.register(rid);
            log(&n.label(), "TRA", EventKind::Register, None);
        }

        let mut entities = Vec::with_capacity(nodes.len());
        for &n in &nodes {
            let rid = rid_of(n).map_err(build_err("register"))?;
            let mut stock = replenish_pseudonyms(
                &params,
                &mut tra,
                &mut kgc,
                &rid,
                config.pseudonym_batch,
                &mut proto_rng,
                now,
            )
            .map_err(build_err("pseudonym issuance"))?;
            for (aid, _) in &stock {
                let aid_hex = Some(hex::encode(params.encode_aid(aid)));
                log("TRA", &n.label(), EventKind::Pseudonym, aid_hex.clone());
                log("KGC", &n.label(), EventKind::PartialKey, aid_hex);
            }
            stock.reverse();
            let (aid, psk) = stock.pop().expect("batch is non-empty");
            let keys = extract_usk(&params, &aid, &psk, &mut proto_rng).map_err(build_err("key extraction"))?;
            log(&n.label(), &n.label(), EventKind::Extract, Some(hex::encode(params.encode_aid(&aid))));
            entities.push(Entity {
                rid,
                stock,
                aid,
                keys,
                verifier: Verifier::new(),
            });
        }

        let task = make_task(&config.fl, &mut ChaCha20Rng::seed_from_u64(config.fl.data_seed))
            .map_err(|e| SimError::Build {
                step: "task",
                detail: e.to_string(),
            })?;
        let global = ModelVector::zeros(config.fl.dimension);
        log("CS", "ALL", EventKind::ModelInit, None);

        let mut entities = entities.into_iter();
        let cs = entities.next().expect("CS entity");
        let users: Vec<_> = entities.collect();
        Ok(SimState {
            config: config.clone(),
            params,
            tra,
            kgc,
            cs,
            user_models: vec![global.clone(); users.len()],
            users,
            task,
            global,
            clock: now,
            round: 0,
            queue: BinaryHeap::new(),
            next_delivery: 0,
            proto_rng,
            latency_rng: stream(config.seed, 1),
            select_rng: stream(config.seed, 2),
            adv_rng: stream(config.seed, 3),
            delay: PoissonDelay::new(config.poisson_lambda).map_err(|e| SimError::Invalid(e.to_string()))?,
            transcript,
            rounds: Vec::new(),
            accepted_this_round: Vec::new(),
            adversary: AdversaryState {
                fired: false,
                fake_server: None,
            },
            accountability_failures: Vec::new(),
        })
    }

    pub fn params(&self) -> &SystemParams<G> {
        &self.params
    }

    pub fn tra(&self) -> &Tra {
        &self.tra
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn global(&self) -> &ModelVector {
        &self.global
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Installs the adversary described by `scenario`. Re-arms a previously
    /// fired one-shot attack.
    pub fn inject(&mut self, scenario: super::AttackScenario) -> Result<(), SimError> {
        let mut cfg = self.config.clone();
        cfg.scenario = scenario;
        cfg.validate()?;
        self.config = cfg;
        self.adversary = AdversaryState {
            fired: false,
            fake_server: None,
        };
        Ok(())
    }

    pub fn run_rounds(&mut self, n: u32) -> Result<(), SimError> {
        for _ in 0..n {
            self.step_round()?;
        }
        Ok(())
    }

    fn entity_mut(&mut self, node: Node) -> &mut Entity<G> {
        match node {
            Node::Cs => &mut self.cs,
            Node::User(i) => &mut self.users[i],
        }
    }

    fn log_plain(&mut self, from: &str, to: &str, kind: EventKind, aid: Option<String>) {
        self.transcript.push(Event {
            seq: 0,
            time: self.clock,
            round: self.round,
            from: from.into(),
            to: to.into(),
            kind,
            verdict: None,
            reason: None,
            digest: None,
            bytes: None,
            adversarial: false,
            aid,
            traced: None,
        });
    }

    /// Swaps in a fresh pseudonym before the active one gets close to expiry.
    fn rotate_if_needed(&mut self, node: Node) -> Result<(), SimError> {
        let lifetime = self.config.protocol.pseudonym_lifetime;
        let margin = self.config.rotation_margin();
        let now = self.clock;
        let usable = |aid_t: u64| now.saturating_sub(aid_t) + margin < lifetime;
        if usable(self.entity_mut(node).aid.t_issue) {
            return Ok(());
        }
        let err = |step: &'static str| move |e: crate::clpa::ClpaError| SimError::Build { step, detail: e.to_string() };

        let label = node.label();
        let mut stock = std::mem::take(&mut self.entity_mut(node).stock);
        stock.retain(|(aid, _)| usable(aid.t_issue));
        if stock.is_empty() {
            let rid = self.entity_mut(node).rid;
            let mut fresh = replenish_pseudonyms(
                &self.params,
                &mut self.tra,
                &mut self.kgc,
                &rid,
                self.config.pseudonym_batch,
                &mut self.proto_rng,
                now,
            )
            .map_err(err("pseudonym rotation"))?;
            for (aid, _) in &fresh {
                let aid_hex = Some(hex::encode(self.params.encode_aid(aid)));
                self.log_plain("TRA", &label, EventKind::Pseudonym, aid_hex.clone());
                self.log_plain("KGC", &label, EventKind::PartialKey, aid_hex);
            }
            fresh.reverse();
            stock = fresh;
        }
        let (aid, psk) = stock.pop().expect("stock refilled");
        let keys = extract_usk(&self.params, &aid, &psk, &mut self.proto_rng).map_err(err("key extraction"))?;
        self.log_plain(&label, &label, EventKind::Extract, Some(hex::encode(self.params.encode_aid(&aid))));
        let e = self.entity_mut(node);
        e.stock = stock;
        e.aid = aid;
        e.keys = keys;
        Ok(())
    }

    fn sign_as(&mut self, node: Node, m: &[u8]) -> SignedEnvelope<G::Element> {
        let now = self.clock;
        let (aid, keys) = match node {
            Node::Cs => (&self.cs.aid, &self.cs.keys),
            Node::User(i) => (&self.users[i].aid, &self.users[i].keys),
        };
        sign(&self.params, aid, keys, m, now, &mut self.proto_rng)
    }

    fn schedule(&mut self, time: u64, from: String, to: Node, kind: EventKind, bytes: Vec<u8>, adversarial: bool) {
        let seq = self.next_delivery;
        self.next_delivery += 1;
        self.queue.push(Reverse(Delivery {
            time,
            seq,
            from,
            to,
            kind,
            bytes,
            adversarial,
        }));
    }

    /// Puts an honest envelope on the channel, where the configured
    /// adversary may tamper with, drop, duplicate or add to it.
    fn transmit(&mut self, from: Node, to: Node, kind: EventKind, env: SignedEnvelope<G::Element>) {
        let bytes = encode_envelope(&self.params.group, &env);
        let arrive = self.clock + self.config.link_delay;
        let scenario = self.config.scenario;
        let from_target = from == Node::User(scenario.target_user) && self.round >= scenario.target_round;
        let label = from.label();
        let dimension = self.config.fl.dimension;

        match scenario.kind {
            ScenarioKind::ClientModification if from_target => {
                let mut tampered = bytes;
                adversary::flip_random_bit(&mut tampered, &mut self.adv_rng);
                self.schedule(arrive, label, to, kind, tampered, true);
            }
            ScenarioKind::Replay if from_target && kind == EventKind::Update && !self.adversary.fired => {
                self.adversary.fired = true;
                let stale_at = env.t + self.params.config.freshness_window + 1;
                self.schedule(arrive, label, to, kind, bytes.clone(), false);
                self.schedule(arrive + 1, "ADV".into(), to, kind, bytes.clone(), true);
                self.schedule(stale_at, "ADV".into(), to, kind, bytes, true);
            }
            ScenarioKind::A1PkReplacement if from_target && kind == EventKind::Update && !self.adversary.fired => {
                // intercepted: the honest update never arrives
                self.adversary.fired = true;
                let m = encode_update(&poisoned_model(dimension, self.round));
                for i in 0..scenario.attempts {
                    let s = A1Strategy::ALL[i % A1Strategy::ALL.len()];
                    let forged = adversary::forge_a1(&self.params, &env, s, &m, env.t, &mut self.adv_rng);
                    let b = encode_envelope(&self.params.group, &forged);
                    self.schedule(arrive, "ADV".into(), to, kind, b, true);
                }
            }
            ScenarioKind::A2MasterKey if from_target && kind == EventKind::Update && !self.adversary.fired => {
                self.adversary.fired = true;
                self.schedule(arrive, label, to, kind, bytes, false);
                let m = encode_update(&poisoned_model(dimension, self.round));
                let beta = self.kgc.master_secret().clone();
                for i in 0..scenario.attempts {
                    let s = A2Strategy::ALL[i % A2Strategy::ALL.len()];
                    let forged = adversary::forge_a2(&self.params, &beta, &env, s, &m, env.t, &mut self.adv_rng);
                    let b = encode_envelope(&self.params.group, &forged);
                    self.schedule(arrive, "ADV".into(), to, kind, b, true);
                }
            }
            _ => self.schedule(arrive, label, to, kind, bytes, false),
        }
    }

    /// Delivers every queued message in `(time, seq)` order.
    fn drain(&mut self) {
        while let Some(Reverse(d)) = self.queue.pop() {
            self.clock = self.clock.max(d.time);
            self.deliver(d);
        }
    }

    fn deliver(&mut self, d: Delivery) {
        let now = d.time;
        let decoded = decode_envelope(&self.params.group, &d.bytes).ok();
        let verdict = match &decoded {
            Some(env) => {
                let params = &self.params;
                match d.to {
                    Node::Cs => self.cs.verifier.check(params, env, now),
                    Node::User(i) => self.users[i].verifier.check(params, env, now),
                }
            }
            None => Verdict::Reject(RejectReason::Malformed),
        };

        let mut verdict_str = if verdict.is_accept() { "accept" } else { "reject" };
        let mut reason = verdict.reason().map(|r| r.as_str().to_string());
        if let (Verdict::Accept, Some(env)) = (&verdict, &decoded) {
            if let Err(why) = self.consume(&d, env) {
                verdict_str = "discard";
                reason = Some(why.into());
            }
        }

        let aid_bytes = decoded.as_ref().map(|env| self.params.encode_aid(&env.aid));
        let mut traced = None;
        if let (Verdict::Reject(_), Some(env), Some(bytes)) = (&verdict, &decoded, &aid_bytes) {
            let outcome = self.tra.trace(&self.params, &env.aid);
            traced = Some(match outcome {
                TraceOutcome::Identified(rid) => rid.name(),
                TraceOutcome::Untraceable => "untraceable".to_string(),
            });
            if let Some(record) = self.tra.issued_record(bytes) {
                if outcome != TraceOutcome::Identified(record.rid) {
                    self.accountability_failures.push(self.transcript.len() as u64);
                }
            }
        }

        self.transcript.push(Event {
            seq: 0,
            time: now,
            round: self.round,
            from: d.from,
            to: d.to.label(),
            kind: d.kind,
            verdict: Some(verdict_str.into()),
            reason,
            digest: Some(sha256(&d.bytes).to_hex()),
            bytes: Some(d.bytes.len()),
            adversarial: d.adversarial,
            aid: aid_bytes.map(hex::encode),
            traced,
        });
    }

    /// Applies an authenticated payload.
    fn consume(&mut self, d: &Delivery, env: &SignedEnvelope<G::Element>) -> Result<(), &'static str> {
        match (d.kind, d.to) {
            (EventKind::Update, Node::Cs) => {
                let update = decode_update(&env.m).map_err(|_| "bad-payload")?;
                if update.round != self.round || update.dimension() != self.config.fl.dimension {
                    return Err("bad-payload");
                }
                self.accepted_this_round.push((d.from.clone(), update));
                Ok(())
            }
            (EventKind::Global, Node::User(i)) => {
                let model = decode_update(&env.m).map_err(|_| "bad-payload")?;
                if model.round != self.round || model.dimension() != self.config.fl.dimension {
                    return Err("bad-payload");
                }
                self.user_models[i] = model;
                Ok(())
            }
            (EventKind::U2u, Node::User(_)) => Ok(()),
            _ => Err("misrouted"),
        }
    }

    fn step_round(&mut self) -> Result<(), SimError> {
        self.round += 1;
        let r = self.round;
        let wait = self.delay.sample(&mut self.latency_rng);
        self.clock += self.config.round_interval + wait;
        let first_event = self.transcript.len();

        self.rotate_if_needed(Node::Cs)?;
        for i in 0..self.users.len() {
            self.rotate_if_needed(Node::User(i))?;
        }

        // S2U uplink: local training and signed updates
        let participants = select_participants(self.users.len(), self.config.fl.participation, &mut self.select_rng);
        for &i in &participants {
            let trained = local_train(
                &self.user_models[i],
                &self.task.shards[i],
                self.config.fl.local_epochs,
                self.config.fl.learning_rate,
            );
            match trained {
                Ok(update) => {
                    let env = self.sign_as(Node::User(i), &encode_update(&update));
                    self.transmit(Node::User(i), Node::Cs, EventKind::Update, env);
                }
                Err(_) => self.log_plain(&Node::User(i).label(), "CS", EventKind::TrainError, None),
            }
        }
        self.drain();

        // aggregation over the accepted set only
        let accepted = std::mem::take(&mut self.accepted_this_round);
        let updates: Vec<ModelVector> = accepted.iter().map(|(_, u)| u.clone()).collect();
        self.global = if updates.is_empty() {
            ModelVector {
                weights: self.global.weights.clone(),
                round: r,
            }
        } else {
            aggregate_uniform(&updates).map_err(|e| SimError::Invalid(e.to_string()))?
        };

        // S2U downlink: signed global model
        let payload = encode_update(&self.global);
        for i in 0..self.users.len() {
            let env = self.sign_as(Node::Cs, &payload);
            self.transmit(Node::Cs, Node::User(i), EventKind::Global, env);
        }
        if self.config.scenario.kind == ScenarioKind::FakeServer && r == self.config.scenario.target_round {
            self.inject_fake_global();
        }
        self.drain();

        // U2U: one signed application payload per pair
        for p in 0..self.config.pairs {
            let mut m = vec![0u8; self.config.u2u_payload_bytes];
            self.proto_rng.fill_bytes(&mut m);
            let env = self.sign_as(Node::User(2 * p), &m);
            self.transmit(Node::User(2 * p), Node::User(2 * p + 1), EventKind::U2u, env);
        }
        self.drain();

        let mse = evaluate(&self.global, &self.task.test).map_err(|e| SimError::Invalid(e.to_string()))?;
        let round_events = &self.transcript.events()[first_event..];
        let envelopes = round_events.iter().filter(|e| e.kind.is_envelope());
        let (mut bytes_sent, mut ok, mut rejected) = (0u64, 0usize, 0usize);
        for e in envelopes {
            bytes_sent += e.bytes.unwrap_or(0) as u64;
            ok += e.is_accept() as usize;
            rejected += e.is_reject() as usize;
        }
        self.rounds.push(RoundRecord {
            round: r,
            mse,
            bytes_sent,
            accepted: ok,
            rejected,
            accepted_from: accepted.into_iter().map(|(from, _)| from).collect(),
            accepted_updates: updates,
            global: self.global.clone(),
            users_consistent: self.user_models.iter().all(|m| *m == self.global),
        });
        Ok(())
    }

    fn inject_fake_global(&mut self) {
        let now = self.clock;
        let ident = match self.adversary.fake_server.take() {
            Some(id) => id,
            None => adversary::self_minted_identity(&self.params, now, &mut self.adv_rng),
        };
        let m = encode_update(&poisoned_model(self.config.fl.dimension, self.round));
        for i in 0..self.users.len() {
            let env = adversary::sign_self_minted(&self.params, &ident, &m, now, &mut self.adv_rng);
            let bytes = encode_envelope(&self.params.group, &env);
            self.schedule(now + self.config.link_delay, "FS".into(), Node::User(i), EventKind::Global, bytes, true);
        }
        self.adversary.fake_server = Some(ident);
    }

    /// Closes the run and computes metrics and exports.
    pub fn finish(self) -> Result<SimOutcome, SimError> {
        let pooled = pooled_least_squares(&self.task.shards).map_err(|e| SimError::Invalid(e.to_string()))?;
        let pooled_mse = evaluate(
            &ModelVector {
                weights: pooled,
                round: 0,
            },
            &self.task.test,
        )
        .map_err(|e| SimError::Invalid(e.to_string()))?;
        let final_mse = evaluate(&self.global, &self.task.test).map_err(|e| SimError::Invalid(e.to_string()))?;
        let g = &self.params.group;
        let tra_export = TraExport {
            tra: self.tra.snapshot(g.name(), g.scalars()),
            t_pub: hex::encode(g.encode_element(&self.params.t_pub)),
            p_pub: hex::encode(g.encode_element(&self.params.p_pub)),
            protocol: self.params.config,
        };
        let summary = summarize(&self.transcript, self.config.pairs);
        Ok(SimOutcome {
            config: self.config,
            transcript: self.transcript,
            rounds: self.rounds,
            summary,
            tra_export,
            pooled_mse,
            final_mse,
            accountability_failures: self.accountability_failures,
            issued_pseudonyms: self.tra.issued_count(),
        })
    }
}
