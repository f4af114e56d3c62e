use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::{derive_seed, Key128};
use crate::error::{Error, Result};
use crate::identity::{Imsi, Pseudonym};
use crate::kset::{AssistantPool, KSetWire, PoolSource};

use super::hss::{Hss, SubscriberId};
use super::messages::{AuthChallenge, Message};
use super::mme::Mme;
use super::ue::{AttachMode, Ue};
use super::{AuthFailure, TxId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Ue(usize),
    Mme,
    Hss,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Ue(i) => write!(f, "ue{i}"),
            Node::Mme => f.write_str("mme"),
            Node::Hss => f.write_str("hss"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub t: u64,
    pub from: Node,
    pub to: Node,
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

impl TranscriptEntry {
    pub fn to_line(&self) -> String {
        format!(
            "{:08} {}->{} {} {}",
            self.t,
            self.from,
            self.to,
            self.name,
            hex::encode(&self.bytes)
        )
    }
}

/// A k-set as an eavesdropper on the radio link sees it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireObservation {
    pub t: u64,
    pub ue: usize,
    pub kset: KSetWire,
    /// Ground truth for scoring; not part of what the adversary sees.
    pub live: Pseudonym,
}

/// Active interference on the MME to UE leg of the next attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelFault {
    /// The UE's previous challenge is delivered in place of the fresh one.
    ReplayChallenge,
    /// One MAC bit of the challenge is flipped.
    TamperMac,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttemptOutcome {
    Success {
        tx: TxId,
        mode: AttachMode,
        next: Pseudonym,
    },
    Failed {
        tx: TxId,
        mode: AttachMode,
        cause: AuthFailure,
    },
}

impl AttemptOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, AttemptOutcome::Success { .. })
    }

    pub fn mode(&self) -> AttachMode {
        match self {
            AttemptOutcome::Success { mode, .. } | AttemptOutcome::Failed { mode, .. } => *mode,
        }
    }

    pub fn failure(&self) -> Option<AuthFailure> {
        match self {
            AttemptOutcome::Failed { cause, .. } => Some(*cause),
            AttemptOutcome::Success { .. } => None,
        }
    }
}

/// Both sides of step 7 without a network in between.
pub fn post_auth_update(ue: &mut Ue, hss: &mut Hss, tx: TxId) -> Result<Pseudonym> {
    let next = ue.post_auth_update()?;
    hss.post_auth_update(tx, true)?;
    Ok(next)
}

/// Single-threaded discrete-event world: one HSS, one MME, many UEs.
/// Messages travel as encoded bytes through a FIFO queue on a logical clock.
pub struct Network {
    clock: u64,
    next_tx: TxId,
    queue: VecDeque<(Node, Node, Vec<u8>)>,
    hss: Hss,
    mme: Mme,
    ues: Vec<Ue>,
    subscriber_of: Vec<SubscriberId>,
    ue_rngs: Vec<ChaCha8Rng>,
    hss_rng: ChaCha8Rng,
    route: HashMap<TxId, usize>,
    imsis: HashSet<Pseudonym>,
    last_challenge: Vec<Option<AuthChallenge>>,
    armed: Vec<Option<ChannelFault>>,
    outcome: Option<AttemptOutcome>,
    pending_live: Option<Pseudonym>,
    assistant_count: usize,
    record_transcript: bool,
    transcript: Vec<TranscriptEntry>,
    observations: Vec<WireObservation>,
    messages: u64,
    imsi_exposures: u64,
    seed: u64,
}

impl Network {
    pub const HSS_ID: u32 = 1;
    pub const SN_ID: u32 = 0x0046_0001;

    pub fn new(seed: u64) -> Self {
        Network {
            clock: 0,
            next_tx: 1,
            queue: VecDeque::new(),
            hss: Hss::new(Self::HSS_ID, [Self::SN_ID]),
            mme: Mme::new(Self::SN_ID, [Self::HSS_ID]),
            ues: Vec::new(),
            subscriber_of: Vec::new(),
            ue_rngs: Vec::new(),
            hss_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "hss", 0)),
            route: HashMap::new(),
            imsis: HashSet::new(),
            last_challenge: Vec::new(),
            armed: Vec::new(),
            outcome: None,
            pending_live: None,
            assistant_count: 16,
            record_transcript: false,
            transcript: Vec::new(),
            observations: Vec::new(),
            messages: 0,
            imsi_exposures: 0,
            seed,
        }
    }

    /// How many other subscribers' pseudonyms the HSS hands a UE after
    /// each success.
    pub fn set_assistant_count(&mut self, n: usize) {
        self.assistant_count = n;
    }

    pub fn record_transcript(&mut self, on: bool) {
        self.record_transcript = on;
    }

    /// Provisions a subscriber on both the HSS and a new UE.
    pub fn add_subscriber(&mut self, key: Key128, imsi: Imsi) -> usize {
        let i = self.ues.len();
        let sub = self.hss.register(key, imsi);
        self.ues.push(Ue::new(key, imsi, Self::HSS_ID, Self::SN_ID));
        self.subscriber_of.push(sub);
        self.ue_rngs
            .push(ChaCha8Rng::seed_from_u64(derive_seed(self.seed, "ue", i as u64)));
        self.imsis.insert(imsi.as_pseudonym());
        self.last_challenge.push(None);
        self.armed.push(None);
        i
    }

    pub fn ue(&self, i: usize) -> &Ue {
        &self.ues[i]
    }

    pub fn ue_count(&self) -> usize {
        self.ues.len()
    }

    pub fn hss(&self) -> &Hss {
        &self.hss
    }

    pub fn mme(&self) -> &Mme {
        &self.mme
    }

    pub fn subscriber_of(&self, ue: usize) -> SubscriberId {
        self.subscriber_of[ue]
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn write_transcript<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.transcript {
            writeln!(out, "{}", e.to_line())?;
        }
        Ok(())
    }

    pub fn observations(&self) -> &[WireObservation] {
        &self.observations
    }

    pub fn message_count(&self) -> u64 {
        self.messages
    }

    /// Attach requests whose k-set carried some subscriber's real IMSI.
    pub fn imsi_exposures(&self) -> u64 {
        self.imsi_exposures
    }

    /// UE and HSS agree on the live pseudonym, index and counters.
    pub fn in_sync(&self, ue: usize) -> bool {
        let u = self.ues[ue].chain();
        let h = &self.hss.subscriber(self.subscriber_of[ue]).chain;
        u.current() == h.current()
            && u.index() == h.index()
            && u.sqn_p0() == h.sqn_p0()
            && u.anchor() == h.anchor()
            && u.count() == h.count()
    }

    /// HSS forgets the UE's current shared pseudonym.
    pub fn inject_hss_loss(&mut self, ue: usize) {
        self.hss.lose_pseudonym(self.subscriber_of[ue]);
    }

    /// UE miscomputes its current shared pseudonym.
    pub fn inject_ue_mismatch(&mut self, ue: usize) {
        self.ues[ue].chain_mut().corrupt_current(1);
    }

    /// Arms `fault` for the UE's next attempt only.
    pub fn arm(&mut self, ue: usize, fault: ChannelFault) {
        self.armed[ue] = Some(fault);
    }

    /// Runs one complete attach of UE `ue` with k-sets of size `k`.
    pub fn authenticate(&mut self, ue: usize, k: usize) -> Result<AttemptOutcome> {
        let tx = self.next_tx;
        self.next_tx += 1;
        let req = self.ues[ue].initiate(tx, k, &mut self.ue_rngs[ue])?;
        self.route.insert(tx, ue);
        self.outcome = None;
        self.pending_live = self.ues[ue].pending_kset().map(|s| *s.live());
        self.send(Node::Ue(ue), Node::Mme, &Message::Attach(req));
        while let Some((from, to, bytes)) = self.queue.pop_front() {
            self.clock += 1;
            if self.record_transcript {
                let name = Message::decode(&bytes).map(|m| m.name()).unwrap_or("?");
                self.transcript.push(TranscriptEntry {
                    t: self.clock,
                    from,
                    to,
                    name,
                    bytes: bytes.clone(),
                });
            }
            let msg = Message::decode(&bytes)?;
            match to {
                Node::Ue(i) => self.at_ue(i, msg)?,
                Node::Mme => self.at_mme(from, msg)?,
                Node::Hss => self.at_hss(msg)?,
            }
        }
        self.route.remove(&tx);
        self.armed[ue] = None;
        self.outcome
            .take()
            .ok_or_else(|| Error::InvalidParameter("attempt ended without an outcome".into()))
    }

    /// Anchor attach after an identification failure. Refused when nothing
    /// failed.
    pub fn recover(&mut self, ue: usize, k: usize) -> Result<AttemptOutcome> {
        if !self.ues[ue].needs_recovery() {
            return Err(Error::InvalidParameter(
                "recovery requested without a prior identification failure".into(),
            ));
        }
        self.authenticate(ue, k)
    }

    fn send(&mut self, from: Node, to: Node, msg: &Message) {
        self.messages += 1;
        self.queue.push_back((from, to, msg.encode()));
    }

    fn ue_for(&self, tx: TxId) -> Result<usize> {
        self.route
            .get(&tx)
            .copied()
            .ok_or_else(|| Error::MalformedMessage(format!("unknown transaction {tx}")))
    }

    fn at_mme(&mut self, from: Node, msg: Message) -> Result<()> {
        match msg {
            Message::Attach(req) => {
                let Node::Ue(ue) = from else {
                    return Err(Error::MalformedMessage("attach not from a UE".into()));
                };
                if let Some(live) = self.pending_live.take() {
                    self.observations.push(WireObservation {
                        t: self.clock,
                        ue,
                        kset: req.kset.clone(),
                        live,
                    });
                }
                if req.kset.members().iter().any(|m| self.imsis.contains(m)) {
                    self.imsi_exposures += 1;
                }
                let fwd = self.mme.forward(&req)?;
                self.send(Node::Mme, Node::Hss, &Message::Forward(fwd));
            }
            Message::IdentificationFailed { tx } => {
                let ue = self.ue_for(tx)?;
                let cause = AuthFailure::Identification;
                self.send(Node::Mme, Node::Ue(ue), &Message::Reject { tx, cause });
            }
            Message::Vector { tx, av } => {
                let ue = self.ue_for(tx)?;
                let mut ch = self.mme.challenge(tx, av);
                match self.armed[ue] {
                    Some(ChannelFault::ReplayChallenge) => {
                        if let Some(old) = self.last_challenge[ue] {
                            ch = AuthChallenge { tx, ..old };
                        }
                    }
                    Some(ChannelFault::TamperMac) => ch.auth.mac[7] ^= 1,
                    None => {}
                }
                self.send(Node::Mme, Node::Ue(ue), &Message::Challenge(ch));
            }
            Message::Response { tx, res } => {
                let ue = self.ue_for(tx)?;
                match self.mme.verify_res(tx, &res) {
                    Ok(_) => {
                        self.send(Node::Mme, Node::Ue(ue), &Message::Complete { tx });
                        self.send(Node::Mme, Node::Hss, &Message::Confirm { tx, accepted: true });
                    }
                    Err(cause) => {
                        self.send(Node::Mme, Node::Ue(ue), &Message::Reject { tx, cause });
                        self.send(Node::Mme, Node::Hss, &Message::Confirm { tx, accepted: false });
                    }
                }
            }
            Message::Abort { tx, .. } => {
                self.mme.abandon(tx);
                self.send(Node::Mme, Node::Hss, &Message::Confirm { tx, accepted: false });
            }
            other => {
                return Err(Error::MalformedMessage(format!("mme got {}", other.name())));
            }
        }
        Ok(())
    }

    fn at_hss(&mut self, msg: Message) -> Result<()> {
        match msg {
            Message::Forward(fwd) => {
                let tx = fwd.tx;
                let found = if self.hss.accepts_serving_network(fwd.sn_id) {
                    self.hss.identify(&fwd.kset, &fwd.h0)
                } else {
                    None
                };
                match found {
                    Some((sub, mode)) => {
                        let av = self
                            .hss
                            .generate_av(tx, sub, mode, fwd.sn_id, &mut self.hss_rng)?;
                        self.send(Node::Hss, Node::Mme, &Message::Vector { tx, av });
                    }
                    None => self.send(Node::Hss, Node::Mme, &Message::IdentificationFailed { tx }),
                }
            }
            Message::Confirm { tx, accepted } => {
                if let Some(sub) = self.hss.post_auth_update(tx, accepted)? {
                    let ue = self.ue_for(tx)?;
                    let available = self.hss.active_count_excluding(sub);
                    let n = self.assistant_count.min(available);
                    if n > 0 {
                        let pool = self.hss.assign_assistants(sub, n, &mut self.hss_rng)?;
                        let members = KSetWire::new(pool.entries().to_vec());
                        self.send(Node::Hss, Node::Ue(ue), &Message::Assistants { tx, members });
                    }
                }
            }
            other => {
                return Err(Error::MalformedMessage(format!("hss got {}", other.name())));
            }
        }
        Ok(())
    }

    fn at_ue(&mut self, i: usize, msg: Message) -> Result<()> {
        let ue = &mut self.ues[i];
        match msg {
            Message::Challenge(ch) => {
                let tx = ch.tx;
                let mode = ue.pending_mode().unwrap_or(AttachMode::Imsi);
                match ue.verify_challenge(&ch) {
                    Ok(res) => {
                        self.last_challenge[i] = Some(ch);
                        self.send(Node::Ue(i), Node::Mme, &Message::Response { tx, res });
                    }
                    Err(cause) => {
                        ue.on_failure(cause);
                        self.outcome = Some(AttemptOutcome::Failed { tx, mode, cause });
                        self.send(Node::Ue(i), Node::Mme, &Message::Abort { tx, cause });
                    }
                }
            }
            Message::Complete { tx } => {
                let mode = ue.pending_mode().unwrap_or(AttachMode::Imsi);
                let next = ue.post_auth_update()?;
                self.outcome = Some(AttemptOutcome::Success { tx, mode, next });
            }
            Message::Reject { tx, cause } => {
                let mode = ue.pending_mode().unwrap_or(AttachMode::Imsi);
                ue.on_failure(cause);
                self.outcome = Some(AttemptOutcome::Failed { tx, mode, cause });
            }
            Message::Assistants { members, .. } => {
                ue.set_assistants(AssistantPool::new(
                    members.members().iter().copied(),
                    PoolSource::HssProvided,
                ));
            }
            other => {
                return Err(Error::MalformedMessage(format!("ue got {}", other.name())));
            }
        }
        Ok(())
    }
}
