//! Basic k-pseudonym challenge-response with a static real identity.
//!
//! `M1 = HMAC_Key(N1 || N2 || C || Key || kset)`, `M2 = HMAC_Key(N2 || Key)`,
//! `SK = PRNG(Key ^ N1 ^ N2)`. Serves as the attack baseline.

use std::collections::HashMap;

use rand::Rng;

use crate::crypto::{hmac, prng_expand, Digest, Key128};
use crate::identity::Pseudonym;
use crate::kset::KSetWire;

pub type Nonce = [u8; 16];

pub fn compute_m1(
    n1: &Nonce,
    n2: &Nonce,
    identity: &Pseudonym,
    key: &Key128,
    kset: &KSetWire,
) -> Digest {
    let mut msg = Vec::with_capacity(32 + 11 + 16 + 2 + 11 * kset.k());
    msg.extend_from_slice(n1);
    msg.extend_from_slice(n2);
    msg.extend_from_slice(&identity.encode());
    msg.extend_from_slice(key);
    msg.extend_from_slice(&kset.encode());
    hmac(key, &msg)
}

/// Walks the set in order and returns the first member whose registered key
/// reproduces `m1`. Members without a key are skipped.
pub fn server_find_identity(
    n1: &Nonce,
    n2: &Nonce,
    kset: &KSetWire,
    m1: &Digest,
    key_db: &HashMap<Pseudonym, Key128>,
) -> Option<Pseudonym> {
    kset.members().iter().find_map(|id| {
        let key = key_db.get(id)?;
        (compute_m1(n1, n2, id, key, kset) == *m1).then_some(*id)
    })
}

pub fn compute_m2(n2: &Nonce, key: &Key128) -> Digest {
    let mut msg = [0u8; 32];
    msg[..16].copy_from_slice(n2);
    msg[16..].copy_from_slice(key);
    hmac(key, &msg)
}

pub fn session_key(key: &Key128, n1: &Nonce, n2: &Nonce) -> [u8; 16] {
    let seed: [u8; 16] = std::array::from_fn(|i| key[i] ^ n1[i] ^ n2[i]);
    prng_expand(&seed, 16).try_into().unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Requested,
    Challenged,
    Responded,
    Mutual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BaselineFailure {
    #[error("no set member verified M1")]
    UserNotAuthenticated,
    #[error("M2 mismatch: server not authenticated")]
    ServerNotAuthenticated,
    #[error("step out of order")]
    OutOfOrder,
}

/// One run of the protocol, as seen by an observer holding both ends.
#[derive(Clone, Debug)]
pub struct BaselineSession {
    kset: KSetWire,
    phase: Phase,
    n1: Option<Nonce>,
    n2: Option<Nonce>,
    m1: Option<Digest>,
    m2: Option<Digest>,
    sk: Option<[u8; 16]>,
}

impl BaselineSession {
    pub fn request(kset: KSetWire) -> Self {
        BaselineSession {
            kset,
            phase: Phase::Requested,
            n1: None,
            n2: None,
            m1: None,
            m2: None,
            sk: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn kset(&self) -> &KSetWire {
        &self.kset
    }

    pub fn session_key(&self) -> Option<&[u8; 16]> {
        self.sk.as_ref()
    }

    fn expect(&self, phase: Phase) -> Result<(), BaselineFailure> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(BaselineFailure::OutOfOrder)
        }
    }

    pub fn challenge(&mut self, n1: Nonce) -> Result<(), BaselineFailure> {
        self.expect(Phase::Requested)?;
        self.n1 = Some(n1);
        self.phase = Phase::Challenged;
        Ok(())
    }

    pub fn respond(&mut self, n2: Nonce, m1: Digest) -> Result<(), BaselineFailure> {
        self.expect(Phase::Challenged)?;
        self.n2 = Some(n2);
        self.m1 = Some(m1);
        self.phase = Phase::Responded;
        Ok(())
    }

    /// Records `M2` once the user has checked it, and fixes the session key.
    pub fn complete(&mut self, m2: Digest, sk: [u8; 16]) -> Result<(), BaselineFailure> {
        self.expect(Phase::Responded)?;
        self.m2 = Some(m2);
        self.sk = Some(sk);
        self.phase = Phase::Mutual;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BaselineClient {
    pub identity: Pseudonym,
    pub key: Key128,
}

#[derive(Clone, Debug, Default)]
pub struct BaselineServer {
    pub key_db: HashMap<Pseudonym, Key128>,
}

/// Outcome of [`run_session`]: the session plus which identity the server found.
#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub session: BaselineSession,
    pub found: Pseudonym,
    pub server_sk: [u8; 16],
}

/// Runs the four messages end to end.
pub fn run_session<R: Rng + ?Sized>(
    client: &BaselineClient,
    server: &BaselineServer,
    kset: KSetWire,
    rng: &mut R,
) -> Result<BaselineOutcome, BaselineFailure> {
    let mut session = BaselineSession::request(kset);
    let n1: Nonce = rng.gen();
    session.challenge(n1)?;
    let n2: Nonce = rng.gen();
    let m1 = compute_m1(&n1, &n2, &client.identity, &client.key, session.kset());
    session.respond(n2, m1)?;

    let found = server_find_identity(&n1, &n2, session.kset(), &m1, &server.key_db)
        .ok_or(BaselineFailure::UserNotAuthenticated)?;
    let server_key = server.key_db[&found];
    let m2 = compute_m2(&n2, &server_key);
    let server_sk = session_key(&server_key, &n1, &n2);

    if compute_m2(&n2, &client.key) != m2 {
        return Err(BaselineFailure::ServerNotAuthenticated);
    }
    let sk = session_key(&client.key, &n1, &n2);
    session.complete(m2, sk)?;
    Ok(BaselineOutcome {
        session,
        found,
        server_sk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::IdentityKind;

    fn id(msin: u64) -> Pseudonym {
        Pseudonym::new(460, 1, msin, IdentityKind::RealImsi).unwrap()
    }

    #[test]
    fn phases_move_forward_only() {
        let mut s = BaselineSession::request(KSetWire::new(vec![id(1)]));
        assert_eq!(s.complete(Digest([0; 32]), [0; 16]), Err(BaselineFailure::OutOfOrder));
        s.challenge([1; 16]).unwrap();
        assert_eq!(s.challenge([1; 16]), Err(BaselineFailure::OutOfOrder));
        s.respond([2; 16], Digest([0; 32])).unwrap();
        assert!(s.session_key().is_none());
        s.complete(Digest([0; 32]), [3; 16]).unwrap();
        assert_eq!(s.phase(), Phase::Mutual);
        assert_eq!(s.session_key(), Some(&[3; 16]));
    }

    #[test]
    fn position_independent() {
        let key = [9u8; 16];
        let mut db = HashMap::new();
        db.insert(id(1), key);
        for members in [vec![id(1), id(2), id(3)], vec![id(2), id(3), id(1)]] {
            let k = KSetWire::new(members);
            let m1 = compute_m1(&[1; 16], &[2; 16], &id(1), &key, &k);
            assert_eq!(server_find_identity(&[1; 16], &[2; 16], &k, &m1, &db), Some(id(1)));
        }
    }

    #[test]
    fn unknown_members_yield_none() {
        let k = KSetWire::new(vec![id(5), id(6)]);
        let m1 = compute_m1(&[1; 16], &[2; 16], &id(5), &[1; 16], &k);
        assert_eq!(server_find_identity(&[1; 16], &[2; 16], &k, &m1, &HashMap::new()), None);
    }

    #[test]
    fn order_sensitive_m1() {
        let key = [4u8; 16];
        let a = KSetWire::new(vec![id(1), id(2)]);
        let b = KSetWire::new(vec![id(2), id(1)]);
        assert_ne!(
            compute_m1(&[0; 16], &[0; 16], &id(1), &key, &a),
            compute_m1(&[0; 16], &[0; 16], &id(1), &key, &b)
        );
    }

    #[test]
    fn session_key_symmetry() {
        let (k, n1, n2) = ([1u8; 16], [2u8; 16], [3u8; 16]);
        assert_eq!(session_key(&k, &n1, &n2), session_key(&k, &n1, &n2));
        let x: [u8; 16] = std::array::from_fn(|i| (k[i] ^ n1[i]) ^ n2[i]);
        let y: [u8; 16] = std::array::from_fn(|i| (k[i] ^ n2[i]) ^ n1[i]);
        assert_eq!(x, y);
        assert_ne!(compute_m2(&n2, &k), compute_m2(&n2, &[5; 16]));
    }
}
