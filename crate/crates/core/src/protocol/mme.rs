use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

use super::messages::{AttachRequest, AuthChallenge, AuthVector, ForwardedRequest};
use super::{AuthFailure, TxId};

/// Serving-network relay. Honest but curious: it follows the flow and sees
/// everything it relays.
#[derive(Clone, Debug)]
pub struct Mme {
    sn_id: u32,
    known_hss: BTreeSet<u32>,
    pending: HashMap<TxId, (AuthVector, u8)>,
    next_ksi: u8,
    agreed: HashMap<TxId, [u8; 32]>,
}

impl Mme {
    pub fn new(sn_id: u32, known_hss: impl IntoIterator<Item = u32>) -> Self {
        Mme {
            sn_id,
            known_hss: known_hss.into_iter().collect(),
            pending: HashMap::new(),
            next_ksi: 0,
            agreed: HashMap::new(),
        }
    }

    pub fn sn_id(&self) -> u32 {
        self.sn_id
    }

    /// Passes the set and `H0` through, replacing `HSS_ID` with `SN_ID`.
    pub fn forward(&self, req: &AttachRequest) -> Result<ForwardedRequest> {
        if !self.known_hss.contains(&req.dest_id) {
            return Err(Error::UnknownHss(req.dest_id));
        }
        Ok(ForwardedRequest {
            tx: req.tx,
            kset: req.kset.clone(),
            h0: req.h0,
            sn_id: self.sn_id,
        })
    }

    /// Keeps the AV, assigns a KSI (0..=6; 7 means "no key") and builds
    /// the challenge.
    pub fn challenge(&mut self, tx: TxId, av: AuthVector) -> AuthChallenge {
        let ksi = self.next_ksi;
        self.next_ksi = (self.next_ksi + 1) % 7;
        self.pending.insert(tx, (av, ksi));
        AuthChallenge {
            tx,
            rand: av.rand,
            auth: av.auth,
            ksi_asme: ksi,
        }
    }

    /// Checks `RES == XRES`. On success returns the agreed `K_ASME`.
    pub fn verify_res(&mut self, tx: TxId, res: &[u8; 8]) -> Result<[u8; 32], AuthFailure> {
        let (av, _) = self.pending.remove(&tx).ok_or(AuthFailure::ResMismatch)?;
        if av.xres != *res {
            return Err(AuthFailure::ResMismatch);
        }
        self.agreed.insert(tx, av.k_asme);
        Ok(av.k_asme)
    }

    pub fn abandon(&mut self, tx: TxId) {
        self.pending.remove(&tx);
    }

    pub fn agreed_key(&self, tx: TxId) -> Option<&[u8; 32]> {
        self.agreed.get(&tx)
    }

    pub fn has_pending(&self, tx: TxId) -> bool {
        self.pending.contains_key(&tx)
    }
}
