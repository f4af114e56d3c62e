//! Variable k-pseudonym sets: one live identity hidden among k-1 assistants.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::crypto::{encode_sqn, hash, Key128};
use crate::error::{Error, Result};
use crate::identity::{expand_words_40, IdentityKind, Pseudonym, IDENTITY_LEN};
use crate::zuc::ZucState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolSource {
    HssProvided,
    SelfGenerated,
}

/// Distinct assistant identities available to one UE.
#[derive(Clone, Debug)]
pub struct AssistantPool {
    entries: Vec<Pseudonym>,
    source: PoolSource,
}

impl AssistantPool {
    /// Keeps the first occurrence of each identity, in order.
    pub fn new(entries: impl IntoIterator<Item = Pseudonym>, source: PoolSource) -> Self {
        let mut seen = HashSet::new();
        let entries = entries
            .into_iter()
            .filter(|p| seen.insert(*p))
            .map(|p| p.with_kind(IdentityKind::Assistant))
            .collect();
        AssistantPool { entries, source }
    }

    pub fn entries(&self) -> &[Pseudonym] {
        &self.entries
    }

    pub fn source(&self) -> PoolSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Members as sent on the wire: order preserved, no hint of which is live.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KSetWire {
    members: Vec<Pseudonym>,
}

impl KSetWire {
    pub fn new(members: Vec<Pseudonym>) -> Self {
        KSetWire { members }
    }

    pub fn members(&self) -> &[Pseudonym] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, p: &Pseudonym) -> bool {
        self.members.contains(p)
    }

    /// `k` as a big-endian u16, then `k` encoded identities.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + IDENTITY_LEN * self.members.len());
        out.extend_from_slice(&(self.members.len() as u16).to_be_bytes());
        for m in &self.members {
            out.extend_from_slice(&m.encode());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 2 {
            return Err(Error::MalformedIdentity("k-set shorter than its header".into()));
        }
        let k = usize::from(u16::from_be_bytes([bytes[0], bytes[1]]));
        let body = &bytes[2..];
        if body.len() != k * IDENTITY_LEN {
            return Err(Error::MalformedIdentity(format!(
                "k-set of {k} needs {} octets, got {}",
                k * IDENTITY_LEN,
                body.len()
            )));
        }
        let members = body
            .chunks_exact(IDENTITY_LEN)
            .map(Pseudonym::decode)
            .collect::<Result<_>>()?;
        Ok(KSetWire { members })
    }
}

/// A built set. `live_index` stays with the builder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KSet {
    members: Vec<Pseudonym>,
    live_index: usize,
}

impl KSet {
    pub fn members(&self) -> &[Pseudonym] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn live_index(&self) -> usize {
        self.live_index
    }

    pub fn live(&self) -> &Pseudonym {
        &self.members[self.live_index]
    }

    pub fn wire(&self) -> KSetWire {
        KSetWire {
            members: self.members.clone(),
        }
    }
}

/// Samples `k - 1` assistants without replacement and places `live` at a
/// uniformly random position. Pool entries equal to `live` are never used.
pub fn build_set<R: Rng + ?Sized>(
    live: Pseudonym,
    pool: &AssistantPool,
    k: usize,
    rng: &mut R,
) -> Result<KSet> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !live.kind().is_live() {
        return Err(Error::InvalidParameter(
            "live identity cannot be an assistant".into(),
        ));
    }
    let usable: Vec<&Pseudonym> = pool.entries.iter().filter(|p| **p != live).collect();
    let needed = k - 1;
    if usable.len() < needed {
        return Err(Error::InsufficientPool {
            needed,
            available: usable.len(),
        });
    }
    let mut members: Vec<Pseudonym> = sample(rng, usable.len(), needed)
        .into_iter()
        .map(|i| usable[i].with_kind(IdentityKind::Assistant))
        .collect();
    let live_index = rng.gen_range(0..k);
    members.insert(live_index, live);
    Ok(KSet {
        members,
        live_index,
    })
}

/// UE-local assistant generation: the same keystream mechanism as the chain,
/// but keyed from a separate context (`H("assistant" || counter)` as IV), so
/// it never consumes or mirrors the shared chain's keystream.
pub fn self_generate_assistants(
    key: &Key128,
    counter: u64,
    prefix: (u16, u16),
    n: usize,
    exclude: &[Pseudonym],
) -> Result<AssistantPool> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let mut ctx = b"assistant".to_vec();
    ctx.extend_from_slice(&encode_sqn(counter));
    let iv: [u8; 16] = hash(&ctx).0[..16].try_into().unwrap();
    let mut zuc = ZucState::new(key, &iv);
    let mut seen: HashSet<Pseudonym> = exclude.iter().copied().collect();
    let mut entries = Vec::with_capacity(n);
    while entries.len() < n {
        let msin = expand_words_40(zuc.next_word(), zuc.next_word());
        let p = Pseudonym::new(prefix.0, prefix.1, msin, IdentityKind::Assistant)?;
        if seen.insert(p) {
            entries.push(p);
        }
    }
    Ok(AssistantPool {
        entries,
        source: PoolSource::SelfGenerated,
    })
}

/// View of the HSS registry needed to hand out assistants.
pub trait PseudonymDirectory {
    type SubscriberId: PartialEq + Copy;

    /// `(subscriber, current shared pseudonym)` for every subscriber whose
    /// chain is active, in a stable order.
    fn active_pseudonyms(&self) -> Vec<(Self::SubscriberId, Pseudonym)>;
}

/// Draws `n` current shared pseudonyms of subscribers other than `requester`.
pub fn hss_assign_assistants<D, R>(
    directory: &D,
    requester: D::SubscriberId,
    n: usize,
    rng: &mut R,
) -> Result<AssistantPool>
where
    D: PseudonymDirectory + ?Sized,
    R: Rng + ?Sized,
{
    let others: Vec<Pseudonym> = directory
        .active_pseudonyms()
        .into_iter()
        .filter(|(id, _)| *id != requester)
        .map(|(_, p)| p)
        .collect();
    if others.len() < n {
        return Err(Error::InsufficientSubscribers {
            needed: n,
            available: others.len(),
        });
    }
    let picked = sample(rng, others.len(), n).into_iter().map(|i| others[i]);
    Ok(AssistantPool::new(picked, PoolSource::HssProvided))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool(n: u64) -> AssistantPool {
        AssistantPool::new(
            (0..n).map(|i| Pseudonym::new(1, 1, 1000 + i, IdentityKind::Assistant).unwrap()),
            PoolSource::HssProvided,
        )
    }

    fn live() -> Pseudonym {
        Pseudonym::new(1, 1, 7, IdentityKind::SharedPseudonym).unwrap()
    }

    #[test]
    fn degenerate_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = build_set(live(), &pool(0), 1, &mut rng).unwrap();
        assert_eq!(s.members(), &[live()]);
        assert_eq!(s.live_index(), 0);
    }

    #[test]
    fn set_contains_live_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = build_set(live(), &pool(100), 4, &mut rng).unwrap();
        assert_eq!(s.k(), 4);
        assert_eq!(s.members().iter().filter(|m| **m == live()).count(), 1);
        let distinct: HashSet<_> = s.members().iter().collect();
        assert_eq!(distinct.len(), 4);
        assert_eq!(s.live().kind(), IdentityKind::SharedPseudonym);
    }

    #[test]
    fn pool_too_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = build_set(live(), &pool(2), 4, &mut rng).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientPool {
                needed: 3,
                available: 2
            }
        ));
        // live itself in the pool does not count
        let with_live = AssistantPool::new(
            pool(2).entries().iter().copied().chain([live()]),
            PoolSource::HssProvided,
        );
        assert!(build_set(live(), &with_live, 4, &mut rng).is_err());
    }

    #[test]
    fn wire_codec() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = build_set(live(), &pool(10), 5, &mut rng).unwrap();
        let bytes = s.wire().encode();
        assert_eq!(bytes.len(), 2 + 5 * IDENTITY_LEN);
        assert_eq!(KSetWire::decode(&bytes).unwrap(), s.wire());
        assert!(KSetWire::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(KSetWire::decode(&[0]).is_err());
    }

    #[test]
    fn self_generated_pool() {
        assert!(self_generate_assistants(&[1; 16], 0, (1, 1), 0, &[]).is_err());
        let one = self_generate_assistants(&[1; 16], 0, (1, 1), 1, &[]).unwrap();
        assert_eq!(one.len(), 1);
        let a = self_generate_assistants(&[1; 16], 9, (1, 1), 20, &[]).unwrap();
        let b = self_generate_assistants(&[1; 16], 9, (1, 1), 20, &[]).unwrap();
        assert_eq!(a.entries(), b.entries());
        assert_eq!(a.source(), PoolSource::SelfGenerated);
        let c = self_generate_assistants(&[1; 16], 10, (1, 1), 20, &[]).unwrap();
        assert_ne!(a.entries(), c.entries());
        // excluded identities are skipped
        let first = a.entries()[0];
        let d = self_generate_assistants(&[1; 16], 9, (1, 1), 20, &[first]).unwrap();
        assert!(!d.entries().contains(&first));
    }

    struct Dir(Vec<(usize, Pseudonym)>);

    impl PseudonymDirectory for Dir {
        type SubscriberId = usize;
        fn active_pseudonyms(&self) -> Vec<(usize, Pseudonym)> {
            self.0.clone()
        }
    }

    #[test]
    fn hss_assignment_excludes_requester() {
        let dir = Dir(pool(5)
            .entries()
            .iter()
            .enumerate()
            .map(|(i, p)| (i, *p))
            .collect());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let got = hss_assign_assistants(&dir, 2, 4, &mut rng).unwrap();
        assert_eq!(got.len(), 4);
        assert!(!got.entries().contains(&dir.0[2].1));
        assert!(matches!(
            hss_assign_assistants(&dir, 2, 5, &mut rng),
            Err(Error::InsufficientSubscribers { .. })
        ));
    }
}
