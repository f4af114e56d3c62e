//! UE / MME / HSS authentication flow.
//!
//! 1. UE sends `{k-set, H0, HSS_ID}`; `H0 = HMAC_Key(live identity)`.
//! 2. MME swaps `HSS_ID` for its `SN_ID` and forwards.
//! 3. HSS finds the member whose key reproduces `H0` and returns an AV.
//! 4. MME keeps `XRES`/`K_ASME`, sends `RAND || AUTH || KSI_ASME`.
//! 5. UE checks MAC and SQN freshness, answers `RES`.
//! 6. MME compares `RES` with `XRES`.
//! 7. On success both ends advance their pseudonym chains; on an
//!    identification failure under `P_i` the UE falls back to the anchor `P_0`.

mod hss;
mod messages;
mod mme;
mod network;
mod ue;

pub use hss::{Hss, PendingAuth, SubscriberId, SubscriberRecord};
pub use messages::{
    AttachRequest, AuthChallenge, AuthToken, AuthVector, ForwardedRequest, Message,
};
pub use mme::Mme;
pub use network::{
    post_auth_update, AttemptOutcome, ChannelFault, Network, Node, TranscriptEntry, WireObservation,
};
pub use ue::{AttachMode, Ue, UePhase};

use crate::crypto::prng_expand;

/// Authentication management field placed in every AUTH token.
pub const AMF: u16 = 0x8000;

/// A challenge SQN is fresh iff `last < sqn <= last + SQN_WINDOW`.
pub const SQN_WINDOW: u64 = 32;

pub type TxId = u64;

/// Why an authentication attempt stopped. Each cause is observable on its own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, thiserror::Error)]
pub enum AuthFailure {
    #[error("no k-set member matched H0")]
    Identification,
    #[error("network MAC did not verify")]
    Mac,
    #[error("SQN replayed or outside the acceptance window")]
    Sqn,
    #[error("RES did not match XRES")]
    ResMismatch,
}

impl AuthFailure {
    pub fn code(self) -> u8 {
        match self {
            AuthFailure::Identification => 1,
            AuthFailure::Mac => 2,
            AuthFailure::Sqn => 3,
            AuthFailure::ResMismatch => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => AuthFailure::Identification,
            2 => AuthFailure::Mac,
            3 => AuthFailure::Sqn,
            4 => AuthFailure::ResMismatch,
            _ => return None,
        })
    }
}

/// `K_ASME = PRNG(CK || IK || SN_ID)`, 32 octets.
pub fn derive_k_asme(ck: &[u8; 16], ik: &[u8; 16], sn_id: u32) -> [u8; 32] {
    let mut seed = [0u8; 36];
    seed[..16].copy_from_slice(ck);
    seed[16..32].copy_from_slice(ik);
    seed[32..].copy_from_slice(&sn_id.to_be_bytes());
    prng_expand(&seed, 32).try_into().unwrap()
}
