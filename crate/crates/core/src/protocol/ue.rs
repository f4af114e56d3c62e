use rand::Rng;

use crate::crypto::{hmac, Key128, Milenage, DEFAULT_OP};
use crate::error::{Error, Result};
use crate::identity::{Imsi, Pseudonym, PseudonymChain};
use crate::kset::{build_set, self_generate_assistants, AssistantPool, KSet};

use super::messages::{AttachRequest, AuthChallenge};
use super::{derive_k_asme, AuthFailure, TxId, SQN_WINDOW};

/// Which identity the UE attaches with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttachMode {
    /// First access: the real IMSI, in the stored set if one exists.
    Imsi,
    /// Shared pseudonym `P_i`.
    Pseudonym,
    /// Anchor `P_0` after an identification failure under `P_i`.
    Anchor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UePhase {
    Idle,
    AwaitingChallenge,
    AwaitingCompletion,
}

#[derive(Clone, Debug)]
struct Pending {
    tx: TxId,
    mode: AttachMode,
    kset: KSet,
    sqn: Option<u64>,
    k_asme: Option<[u8; 32]>,
}

/// User equipment.
#[derive(Clone, Debug)]
pub struct Ue {
    chain: PseudonymChain,
    hss_id: u32,
    sn_id: u32,
    last_sqn: u64,
    phase: UePhase,
    pending: Option<Pending>,
    /// `{IMSI}` kept until the IMSI is authenticated; retries resend it verbatim.
    stored_imsi_set: Option<KSet>,
    needs_recovery: bool,
    assistants: Option<AssistantPool>,
    self_gen_counter: u64,
    k_asme: Option<[u8; 32]>,
}

impl Ue {
    pub fn new(key: Key128, imsi: Imsi, hss_id: u32, sn_id: u32) -> Self {
        Ue {
            chain: PseudonymChain::new(key, imsi),
            hss_id,
            sn_id,
            last_sqn: 0,
            phase: UePhase::Idle,
            pending: None,
            stored_imsi_set: None,
            needs_recovery: false,
            assistants: None,
            self_gen_counter: 0,
            k_asme: None,
        }
    }

    pub fn chain(&self) -> &PseudonymChain {
        &self.chain
    }

    pub fn chain_mut(&mut self) -> &mut PseudonymChain {
        &mut self.chain
    }

    pub fn phase(&self) -> UePhase {
        self.phase
    }

    pub fn last_sqn(&self) -> u64 {
        self.last_sqn
    }

    pub fn needs_recovery(&self) -> bool {
        self.needs_recovery
    }

    pub fn stored_imsi_set(&self) -> Option<&KSet> {
        self.stored_imsi_set.as_ref()
    }

    /// `K_ASME` from the last completed authentication.
    pub fn k_asme(&self) -> Option<&[u8; 32]> {
        self.k_asme.as_ref()
    }

    pub fn pending_tx(&self) -> Option<TxId> {
        self.pending.as_ref().map(|p| p.tx)
    }

    pub fn pending_mode(&self) -> Option<AttachMode> {
        self.pending.as_ref().map(|p| p.mode)
    }

    pub fn pending_kset(&self) -> Option<&KSet> {
        self.pending.as_ref().map(|p| &p.kset)
    }

    pub fn set_assistants(&mut self, pool: AssistantPool) {
        self.assistants = Some(pool);
    }

    pub fn next_mode(&self) -> AttachMode {
        if self.needs_recovery {
            AttachMode::Anchor
        } else if self.chain.is_active() {
            AttachMode::Pseudonym
        } else {
            AttachMode::Imsi
        }
    }

    fn live_identity(&self, mode: AttachMode) -> Result<Pseudonym> {
        match mode {
            AttachMode::Imsi => Ok(self.chain.imsi().as_pseudonym()),
            AttachMode::Pseudonym => Ok(*self.chain.current()),
            AttachMode::Anchor => self.chain.anchor().copied().ok_or(Error::ChainInactive),
        }
    }

    fn fresh_set<R: Rng + ?Sized>(&mut self, live: Pseudonym, k: usize, rng: &mut R) -> Result<KSet> {
        if let Some(pool) = &self.assistants {
            if let Ok(set) = build_set(live, pool, k, rng) {
                return Ok(set);
            }
        }
        let imsi = *self.chain.imsi();
        let pool = self_generate_assistants(
            self.chain.key(),
            self.self_gen_counter,
            (imsi.mcc(), imsi.mnc()),
            k.saturating_sub(1).max(1),
            &[live, imsi.as_pseudonym()],
        )?;
        self.self_gen_counter += 1;
        build_set(live, &pool, k, rng)
    }

    /// Builds (or reuses) the k-set and `H0` for the next attach.
    pub fn initiate<R: Rng + ?Sized>(&mut self, tx: TxId, k: usize, rng: &mut R) -> Result<AttachRequest> {
        let mode = self.next_mode();
        let live = self.live_identity(mode)?;
        let kset = match (&self.stored_imsi_set, mode) {
            (Some(stored), AttachMode::Imsi) => stored.clone(),
            _ => {
                let set = self.fresh_set(live, k, rng)?;
                if mode == AttachMode::Imsi {
                    self.stored_imsi_set = Some(set.clone());
                }
                set
            }
        };
        let h0 = hmac(self.chain.key(), &live.encode());
        let req = AttachRequest {
            tx,
            kset: kset.wire(),
            h0,
            dest_id: self.hss_id,
        };
        self.pending = Some(Pending {
            tx,
            mode,
            kset,
            sqn: None,
            k_asme: None,
        });
        self.phase = UePhase::AwaitingChallenge;
        Ok(req)
    }

    /// Verifies MAC and SQN freshness, returns `RES`.
    pub fn verify_challenge(&mut self, ch: &AuthChallenge) -> Result<[u8; 8], AuthFailure> {
        let m = Milenage::with_op(self.chain.key(), &DEFAULT_OP);
        let (res, ck, ik, ak) = m.f2345(&ch.rand);
        let sqn = ch.auth.reveal_sqn(&ak);
        if m.f1(&ch.rand, sqn, ch.auth.amf) != ch.auth.mac {
            return Err(AuthFailure::Mac);
        }
        if sqn <= self.last_sqn || sqn > self.last_sqn + SQN_WINDOW {
            return Err(AuthFailure::Sqn);
        }
        self.last_sqn = sqn;
        if let Some(p) = self.pending.as_mut() {
            p.sqn = Some(sqn);
            p.k_asme = Some(derive_k_asme(&ck, &ik, self.sn_id));
        }
        self.phase = UePhase::AwaitingCompletion;
        Ok(res)
    }

    /// Advances the chain according to how this attach
    /// identified the UE.
    pub fn post_auth_update(&mut self) -> Result<Pseudonym> {
        let p = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidParameter("no pending authentication".into()))?;
        let sqn = p
            .sqn
            .ok_or_else(|| Error::InvalidParameter("challenge never accepted".into()))?;
        let next = match p.mode {
            AttachMode::Imsi => {
                self.stored_imsi_set = None;
                self.chain.commit_first_auth(sqn)?
            }
            AttachMode::Pseudonym => self.chain.commit_auth(sqn)?,
            AttachMode::Anchor => {
                self.needs_recovery = false;
                self.chain.commit_recovery(sqn)?
            }
        };
        self.k_asme = p.k_asme;
        self.phase = UePhase::Idle;
        Ok(next)
    }

    /// Records a failed attempt. An identification failure under `P_i`
    /// switches the next attach to the anchor.
    pub fn on_failure(&mut self, cause: AuthFailure) {
        let mode = self.pending.take().map(|p| p.mode);
        if cause == AuthFailure::Identification && mode == Some(AttachMode::Pseudonym) {
            self.needs_recovery = true;
        }
        self.phase = UePhase::Idle;
    }
}
