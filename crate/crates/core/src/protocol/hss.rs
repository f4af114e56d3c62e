use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::crypto::{encode_sqn, hmac, milenage, Digest, Key128, SQN_MAX};
use crate::error::{Error, Result};
use crate::identity::{ChainRecord, IdentityKind, Imsi, Pseudonym, PseudonymChain};
use crate::kset::{hss_assign_assistants, AssistantPool, KSetWire, PseudonymDirectory};

use super::messages::{AuthToken, AuthVector};
use super::ue::AttachMode;
use super::{derive_k_asme, TxId, AMF};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubscriberId(pub usize);

#[derive(Clone, Debug)]
pub struct SubscriberRecord {
    pub chain: PseudonymChain,
    /// Highest SQN placed in any AV for this subscriber.
    pub sqn_issued: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingAuth {
    pub subscriber: SubscriberId,
    pub mode: AttachMode,
    pub sqn: u64,
}

/// Home subscription server: keys, chains, and a lookup from every live
/// identity value (IMSI, current `P_i`, current `P_0`) to its subscriber.
#[derive(Clone, Debug)]
pub struct Hss {
    id: u32,
    serving_networks: BTreeSet<u32>,
    subscribers: Vec<SubscriberRecord>,
    index: HashMap<Pseudonym, (SubscriberId, IdentityKind)>,
    pending: HashMap<TxId, PendingAuth>,
}

impl Hss {
    pub fn new(id: u32, serving_networks: impl IntoIterator<Item = u32>) -> Self {
        Hss {
            id,
            serving_networks: serving_networks.into_iter().collect(),
            subscribers: Vec::new(),
            index: HashMap::new(),
            pending: HashMap::new(),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn register(&mut self, key: Key128, imsi: Imsi) -> SubscriberId {
        self.insert_chain(PseudonymChain::new(key, imsi), 0)
    }

    fn insert_chain(&mut self, chain: PseudonymChain, sqn_issued: u64) -> SubscriberId {
        let id = SubscriberId(self.subscribers.len());
        self.subscribers.push(SubscriberRecord { chain, sqn_issued });
        self.reindex(id);
        id
    }

    /// Restores subscribers from persisted chain records.
    pub fn from_records(id: u32, serving_networks: impl IntoIterator<Item = u32>, records: &[ChainRecord]) -> Result<Self> {
        let mut hss = Hss::new(id, serving_networks);
        for rec in records {
            let chain = PseudonymChain::from_record(rec)?;
            let issued = chain.sqn_p0().max(chain.sqn_imsi());
            hss.insert_chain(chain, issued);
        }
        Ok(hss)
    }

    pub fn records(&self) -> Vec<ChainRecord> {
        self.subscribers.iter().map(|s| s.chain.to_record()).collect()
    }

    pub fn subscriber(&self, id: SubscriberId) -> &SubscriberRecord {
        &self.subscribers[id.0]
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.len()
    }

    pub fn pending(&self, tx: TxId) -> Option<&PendingAuth> {
        self.pending.get(&tx)
    }

    /// Identity values currently mapped to `id`.
    pub fn indexed_identities(&self, id: SubscriberId) -> Vec<(Pseudonym, IdentityKind)> {
        let mut v: Vec<_> = self
            .index
            .iter()
            .filter(|(_, (s, _))| *s == id)
            .map(|(p, (_, kind))| (*p, *kind))
            .collect();
        v.sort_by_key(|(p, _)| *p);
        v
    }

    pub fn lookup(&self, identity: &Pseudonym) -> Option<(SubscriberId, IdentityKind)> {
        self.index.get(identity).copied()
    }

    fn reindex(&mut self, id: SubscriberId) {
        self.index.retain(|_, (s, _)| *s != id);
        let chain = &self.subscribers[id.0].chain;
        let imsi = chain.imsi().as_pseudonym();
        self.index.insert(imsi, (id, IdentityKind::RealImsi));
        if chain.is_active() && chain.has_epoch() {
            self.index
                .insert(*chain.current(), (id, IdentityKind::SharedPseudonym));
        }
        if let Some(anchor) = chain.anchor() {
            self.index.insert(*anchor, (id, IdentityKind::Anchor));
        }
    }

    pub fn accepts_serving_network(&self, sn_id: u32) -> bool {
        self.serving_networks.contains(&sn_id)
    }

    /// First member, in order, whose key reproduces `h0`.
    /// Members with no registered key are skipped.
    pub fn identify(&self, kset: &KSetWire, h0: &Digest) -> Option<(SubscriberId, AttachMode)> {
        kset.members().iter().find_map(|member| {
            let (id, kind) = self.lookup(member)?;
            let key = self.subscribers[id.0].chain.key();
            if hmac(key, &member.encode()) != *h0 {
                return None;
            }
            let mode = match kind {
                IdentityKind::RealImsi => AttachMode::Imsi,
                IdentityKind::SharedPseudonym => AttachMode::Pseudonym,
                IdentityKind::Anchor => AttachMode::Anchor,
                IdentityKind::Assistant => return None,
            };
            Some((id, mode))
        })
    }

    /// Fresh RAND, next SQN, Milenage under the subscriber key.
    pub fn generate_av<R: Rng + ?Sized>(
        &mut self,
        tx: TxId,
        subscriber: SubscriberId,
        mode: AttachMode,
        sn_id: u32,
        rng: &mut R,
    ) -> Result<AuthVector> {
        let rec = &mut self.subscribers[subscriber.0];
        let sqn = rec
            .sqn_issued
            .checked_add(1)
            .filter(|&s| s <= SQN_MAX)
            .ok_or(Error::ChainExhausted)?;
        rec.sqn_issued = sqn;
        let rand: [u8; 16] = rng.gen();
        let out = milenage(rec.chain.key(), &rand, sqn, AMF);
        let sqn_bytes = encode_sqn(sqn);
        let auth = AuthToken {
            concealed_sqn: std::array::from_fn(|i| sqn_bytes[i] ^ out.ak[i]),
            amf: AMF,
            mac: out.mac,
        };
        self.pending.insert(
            tx,
            PendingAuth {
                subscriber,
                mode,
                sqn,
            },
        );
        Ok(AuthVector {
            rand,
            xres: out.res,
            k_asme: derive_k_asme(&out.ck, &out.ik, sn_id),
            auth,
        })
    }

    /// Commits the pending authentication `tx` when
    /// `accepted`, re-keying the lookup to the new `P_i` and `P_0`.
    pub fn post_auth_update(&mut self, tx: TxId, accepted: bool) -> Result<Option<SubscriberId>> {
        let Some(p) = self.pending.remove(&tx) else {
            return Ok(None);
        };
        if !accepted {
            return Ok(None);
        }
        let chain = &mut self.subscribers[p.subscriber.0].chain;
        match p.mode {
            AttachMode::Imsi => chain.commit_first_auth(p.sqn)?,
            AttachMode::Pseudonym => chain.commit_auth(p.sqn)?,
            AttachMode::Anchor => chain.commit_recovery(p.sqn)?,
        };
        self.reindex(p.subscriber);
        Ok(Some(p.subscriber))
    }

    /// Assistants for `requester`: other subscribers' current shared pseudonyms.
    pub fn assign_assistants<R: Rng + ?Sized>(
        &self,
        requester: SubscriberId,
        n: usize,
        rng: &mut R,
    ) -> Result<AssistantPool> {
        hss_assign_assistants(self, requester, n, rng)
    }

    /// Subscribers other than `id` with an active chain.
    pub fn active_count_excluding(&self, id: SubscriberId) -> usize {
        self.subscribers
            .iter()
            .enumerate()
            .filter(|(i, s)| *i != id.0 && s.chain.is_active() && s.chain.has_epoch())
            .count()
    }

    /// Forgets the current shared pseudonym of `id` (memory loss). IMSI,
    /// key, SQNs and the anchor survive.
    pub fn lose_pseudonym(&mut self, id: SubscriberId) {
        self.subscribers[id.0].chain.drop_epoch();
        self.reindex(id);
    }

    /// Drops every trace of the shared pseudonym chain including the anchor.
    /// Recovery is impossible afterwards.
    pub fn lose_everything(&mut self, id: SubscriberId) {
        let rec = &mut self.subscribers[id.0];
        rec.chain = PseudonymChain::new(*rec.chain.key(), *rec.chain.imsi());
        self.reindex(id);
    }
}

impl PseudonymDirectory for Hss {
    type SubscriberId = SubscriberId;

    fn active_pseudonyms(&self) -> Vec<(SubscriberId, Pseudonym)> {
        self.subscribers
            .iter()
            .enumerate()
            .filter(|(_, s)| s.chain.is_active() && s.chain.has_epoch())
            .map(|(i, s)| (SubscriberId(i), *s.chain.current()))
            .collect()
    }
}
