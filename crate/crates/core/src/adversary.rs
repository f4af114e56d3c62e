//! Passive adversary: intersection and mark attacks over observed k-sets,
//! plus Monte Carlo estimation of their success.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crypto::{derive_seed, Key128};
use crate::error::{Error, Result};
use crate::identity::{derive_iv, expand_words_40, Imsi, Pseudonym, PseudonymChain, MSIN_MASK};
use crate::kset::{build_set, AssistantPool, KSetWire, PoolSource};
use crate::zuc::ZucState;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub t: u64,
    pub members: Vec<Pseudonym>,
}

/// Append-only record of the k-sets linked to one target.
#[derive(Clone, Debug, Default)]
pub struct ObservationLog {
    records: Vec<Observation>,
}

impl ObservationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, kset: &KSetWire, t: u64) {
        self.records.push(Observation {
            t,
            members: kset.members().to_vec(),
        });
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Identities the adversary can recognize as its own.
#[derive(Clone, Debug, Default)]
pub struct MarkedPool {
    marked: HashSet<Pseudonym>,
}

impl MarkedPool {
    pub fn new(marked: impl IntoIterator<Item = Pseudonym>) -> Self {
        MarkedPool {
            marked: marked.into_iter().collect(),
        }
    }

    /// Marks drawn from `pool`; refuses to mark every entry.
    pub fn within(pool: &AssistantPool, marked: impl IntoIterator<Item = Pseudonym>) -> Result<Self> {
        let m = Self::new(marked);
        if !pool.is_empty() && pool.entries().iter().all(|p| m.contains(p)) {
            return Err(Error::AllMarked);
        }
        Ok(m)
    }

    pub fn insert(&mut self, p: Pseudonym) {
        self.marked.insert(p);
    }

    pub fn contains(&self, p: &Pseudonym) -> bool {
        self.marked.contains(p)
    }

    pub fn len(&self) -> usize {
        self.marked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marked.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    candidates: BTreeSet<Pseudonym>,
    /// Number of observations that produced this set.
    round: usize,
}

impl CandidateSet {
    pub fn new(candidates: impl IntoIterator<Item = Pseudonym>, round: usize) -> Self {
        CandidateSet {
            candidates: candidates.into_iter().collect(),
            round,
        }
    }

    pub fn candidates(&self) -> &BTreeSet<Pseudonym> {
        &self.candidates
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, p: &Pseudonym) -> bool {
        self.candidates.contains(p)
    }

    /// `{live}` exactly.
    pub fn identifies(&self, live: &Pseudonym) -> bool {
        self.candidates.len() == 1 && self.candidates.contains(live)
    }

    /// Uniform pick among the candidates.
    pub fn guess<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Pseudonym> {
        if self.candidates.is_empty() {
            return None;
        }
        self.candidates.iter().nth(rng.gen_range(0..self.candidates.len())).copied()
    }
}

/// Intersection of every observed set.
pub fn intersection_attack(log: &ObservationLog) -> Result<CandidateSet> {
    let (first, rest) = log.records.split_first().ok_or(Error::EmptyLog)?;
    let mut cands: BTreeSet<Pseudonym> = first.members.iter().copied().collect();
    for obs in rest {
        let seen: HashSet<&Pseudonym> = obs.members.iter().collect();
        cands.retain(|p| seen.contains(p));
    }
    Ok(CandidateSet::new(cands, log.len()))
}

/// Intersection that restarts from the newest set whenever the running
/// intersection empties: the adversary's best reading of a log whose sets
/// may not share the live identity. One candidate set per prefix of the log.
pub fn linked_intersection(log: &ObservationLog) -> Vec<CandidateSet> {
    let mut out = Vec::with_capacity(log.len());
    let mut cands: BTreeSet<Pseudonym> = BTreeSet::new();
    for (i, obs) in log.records.iter().enumerate() {
        let seen: BTreeSet<Pseudonym> = obs.members.iter().copied().collect();
        let next: BTreeSet<Pseudonym> = if i == 0 {
            seen.clone()
        } else {
            cands.intersection(&seen).copied().collect()
        };
        cands = if next.is_empty() { seen } else { next };
        out.push(CandidateSet::new(cands.iter().copied(), i + 1));
    }
    out
}

/// Observed members minus the marked ones.
pub fn mark_attack(observed: &KSetWire, pool: &MarkedPool) -> CandidateSet {
    CandidateSet::new(
        observed.members().iter().filter(|p| !pool.contains(p)).copied(),
        1,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Fixed real identity in every set, assistants from a static pool.
    StaticBaseline,
    /// Rotating shared pseudonyms; assistants are other subscribers' current
    /// pseudonyms.
    Variable,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::StaticBaseline => "baseline",
            Scheme::Variable => "variable",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" | "static" | "static-baseline" => Ok(Scheme::StaticBaseline),
            "variable" => Ok(Scheme::Variable),
            _ => Err(Error::InvalidParameter(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Attack {
    Intersection,
    Mark,
}

impl Attack {
    pub fn as_str(self) -> &'static str {
        match self {
            Attack::Intersection => "intersection",
            Attack::Mark => "mark",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "intersection" => Ok(Attack::Intersection),
            "mark" => Ok(Attack::Mark),
            _ => Err(Error::InvalidParameter(format!("unknown attack {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackParams {
    pub scheme: Scheme,
    pub attack: Attack,
    pub k: usize,
    /// Assistant pool size (static pool, or number of other subscribers).
    pub pool: usize,
    pub marked_fraction: f64,
    pub rounds: usize,
    pub trials: u64,
    pub seed: u64,
}

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("rounds must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.marked_fraction) {
            return Err(Error::InvalidParameter("marked fraction outside [0, 1]".into()));
        }
        if self.pool + 1 < self.k {
            return Err(Error::InsufficientPool {
                needed: self.k - 1,
                available: self.pool,
            });
        }
        if self.marked_count() >= self.pool && self.pool > 0 {
            return Err(Error::AllMarked);
        }
        Ok(())
    }

    pub fn marked_count(&self) -> usize {
        (self.marked_fraction * self.pool as f64).round() as usize
    }
}

/// Per-round tallies across trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundStat {
    /// Uniform guess from the candidates hit the live identity.
    pub guessed: u64,
    /// Candidates were exactly `{live}`.
    pub unique: u64,
    pub candidate_total: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub params: AttackParams,
    pub per_round: Vec<RoundStat>,
}

impl Estimate {
    pub fn trials(&self) -> u64 {
        self.params.trials
    }

    fn last(&self) -> &RoundStat {
        self.per_round.last().expect("rounds >= 1")
    }

    /// Guess success at the final round.
    pub fn success_rate(&self) -> f64 {
        self.last().guessed as f64 / self.trials() as f64
    }

    pub fn ci(&self) -> (f64, f64) {
        wilson_interval(self.last().guessed, self.trials(), 1.96)
    }

    pub fn unique_rate(&self) -> f64 {
        self.last().unique as f64 / self.trials() as f64
    }

    pub fn mean_candidate_size(&self) -> f64 {
        self.last().candidate_total as f64 / self.trials() as f64
    }

    /// Guess success at round `r` (1-based).
    pub fn round_rate(&self, r: usize) -> f64 {
        self.per_round[r - 1].guessed as f64 / self.trials() as f64
    }

    pub fn round_unique_rate(&self, r: usize) -> f64 {
        self.per_round[r - 1].unique as f64 / self.trials() as f64
    }

    /// Pooled two-proportion z statistic for "round `r` beats round 1".
    pub fn improvement_z(&self, r: usize) -> f64 {
        let n = self.trials() as f64;
        two_proportion_z(self.per_round[r - 1].guessed as f64 / n, self.per_round[0].guessed as f64 / n, n, n)
    }
}

/// 95% (for `z = 1.96`) Wilson score interval.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn two_proportion_z(p1: f64, p2: f64, n1: f64, n2: f64) -> f64 {
    let pooled = (p1 * n1 + p2 * n2) / (n1 + n2);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (p1 - p2) / se
}

fn random_imsi<R: Rng + ?Sized>(rng: &mut R) -> Imsi {
    Imsi::new(460, 1, rng.gen::<u64>() & MSIN_MASK).expect("masked MSIN")
}

/// Other subscribers whose chains rotate once per round, materialized only
/// when sampled.
struct RotatingPool {
    trial_seed: u64,
    members: Vec<Option<PseudonymChain>>,
}

impl RotatingPool {
    fn new(trial_seed: u64, n: usize) -> Self {
        RotatingPool {
            trial_seed,
            members: vec![None; n],
        }
    }

    /// Member `j`'s pseudonym during round `round` (1-based).
    fn at(&mut self, j: usize, round: u64) -> Result<Pseudonym> {
        let seed = self.trial_seed;
        let chain = self.members[j].get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "member", j as u64));
            let key: Key128 = rng.gen();
            PseudonymChain::new(key, random_imsi(&mut rng))
        });
        if !chain.is_active() {
            chain.start_epoch(1);
            chain.next_pseudonym()?;
        }
        while chain.index() < round {
            chain.next_pseudonym()?;
        }
        Ok(*chain.current())
    }
}

fn score<R: Rng + ?Sized>(stat: &mut RoundStat, cands: &CandidateSet, live: &Pseudonym, rng: &mut R) {
    if cands.guess(rng).as_ref() == Some(live) {
        stat.guessed += 1;
    }
    if cands.identifies(live) {
        stat.unique += 1;
    }
    stat.candidate_total += cands.len() as u64;
}

/// One trial: the target attaches `rounds` times; the adversary scores
/// itself after each observation.
pub fn run_trial(params: &AttackParams, trial_seed: u64) -> Result<Vec<RoundStat>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, "target", 0));
    let mut guess_rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, "adversary", 0));
    let n_marked = params.marked_count();
    let key: Key128 = rng.gen();
    let imsi = random_imsi(&mut rng);
    let mut log = ObservationLog::new();
    let mut marked = MarkedPool::default();
    let mut stats = vec![RoundStat::default(); params.rounds];

    let static_pool = match params.scheme {
        Scheme::StaticBaseline => {
            let entries: Vec<Pseudonym> = (0..params.pool)
                .map(|_| random_imsi(&mut rng).as_pseudonym())
                .filter(|p| *p != imsi.as_pseudonym())
                .collect();
            for p in &entries[..n_marked.min(entries.len())] {
                marked.insert(*p);
            }
            Some(AssistantPool::new(entries, PoolSource::SelfGenerated))
        }
        Scheme::Variable => None,
    };
    let mut others = RotatingPool::new(trial_seed, params.pool);
    let mut chain = PseudonymChain::new(key, imsi);
    let mut sqn = 0u64;

    for (r, stat) in stats.iter_mut().enumerate() {
        let round = r as u64 + 1;
        let (live, pool) = match &static_pool {
            Some(pool) => (imsi.as_pseudonym(), pool.clone()),
            None => {
                let live = *chain.current();
                let picks = rand::seq::index::sample(&mut rng, params.pool, params.k - 1);
                let mut entries = Vec::with_capacity(params.k - 1);
                for j in picks {
                    let p = others.at(j, round)?;
                    if j < n_marked {
                        marked.insert(p);
                    }
                    entries.push(p);
                }
                (live, AssistantPool::new(entries, PoolSource::HssProvided))
            }
        };
        let set = build_set(live, &pool, params.k, &mut rng)?;
        log.observe(&set.wire(), round);
        let cands = match params.attack {
            Attack::Intersection => linked_intersection(&log).pop().expect("non-empty log"),
            Attack::Mark => mark_attack(&set.wire(), &marked),
        };
        score(stat, &cands, &live, &mut guess_rng);

        if static_pool.is_none() {
            sqn += 1;
            if chain.is_active() {
                chain.commit_auth(sqn)?;
            } else {
                chain.commit_first_auth(sqn)?;
            }
        }
    }
    Ok(stats)
}

/// `trials` independent trials, each seeded from `(seed, trial index)`.
/// Trials run in parallel; the result does not depend on scheduling.
pub fn estimate_success(params: &AttackParams) -> Result<Estimate> {
    params.validate()?;
    let per_trial: Vec<Vec<RoundStat>> = (0..params.trials)
        .into_par_iter()
        .map(|t| run_trial(params, derive_seed(params.seed, "trial", t)))
        .collect::<Result<_>>()?;
    let mut per_round = vec![RoundStat::default(); params.rounds];
    for trial in &per_trial {
        for (acc, s) in per_round.iter_mut().zip(trial) {
            acc.guessed += s.guessed;
            acc.unique += s.unique;
            acc.candidate_total += s.candidate_total;
        }
    }
    Ok(Estimate {
        params: *params,
        per_round,
    })
}

/// Mark attack conditioned on exactly `m` marked assistants in every set of
/// size `k`. Returns the empirical guess success.
pub fn mark_success_given(k: usize, m: usize, trials: u64, seed: u64) -> Result<(u64, u64)> {
    if k == 0 || m >= k {
        return Err(Error::InvalidParameter(format!("need m < k, got m={m} k={k}")));
    }
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mark", t));
            let live = random_imsi(&mut rng).as_pseudonym();
            let mut assistants: Vec<Pseudonym> = Vec::with_capacity(k - 1);
            while assistants.len() < k - 1 {
                let p = random_imsi(&mut rng).as_pseudonym();
                if p != live && !assistants.contains(&p) {
                    assistants.push(p);
                }
            }
            assistants.shuffle(&mut rng);
            let marked = MarkedPool::new(assistants[..m].iter().copied());
            let pool = AssistantPool::new(assistants, PoolSource::HssProvided);
            let set = build_set(live, &pool, k, &mut rng)?;
            let cands = mark_attack(&set.wire(), &marked);
            Ok(u64::from(cands.guess(&mut rng) == Some(live)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok((hits, trials))
}

/// Toy MSIN width used for exhaustive posterior checks.
pub const TOY_BITS: u32 = 8;

/// Toy pseudonym: top 8 bits of `K_s` XORed onto an 8-bit MSIN.
pub fn toy_pseudonym(key: &Key128, sqn: u64, msin: u8) -> u8 {
    msin ^ toy_pad(key, sqn)
}

fn toy_pad(key: &Key128, sqn: u64) -> u8 {
    let mut zuc = ZucState::new(key, &derive_iv(key, sqn));
    let ks = expand_words_40(zuc.next_word(), zuc.next_word());
    (ks >> (40 - TOY_BITS)) as u8
}

/// Keyless brute force: for each of `trials` uniformly guessed keys, the
/// MSIN that would explain `observed`. Returns the 256-bin histogram.
pub fn toy_posterior(observed: u8, sqn: u64, trials: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = vec![0u64; 1 << TOY_BITS];
    for _ in 0..trials {
        let key: Key128 = rng.gen();
        hist[(observed ^ toy_pad(&key, sqn)) as usize] += 1;
    }
    hist
}

/// Pearson statistic against the uniform distribution.
pub fn chi_square_uniform(hist: &[u64]) -> f64 {
    let total: u64 = hist.iter().sum();
    let expected = total as f64 / hist.len() as f64;
    hist.iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::IdentityKind;

    fn id(msin: u64) -> Pseudonym {
        Pseudonym::new(460, 1, msin, IdentityKind::Assistant).unwrap()
    }

    fn wire(ms: &[u64]) -> KSetWire {
        KSetWire::new(ms.iter().map(|&m| id(m)).collect())
    }

    #[test]
    fn empty_log() {
        assert!(matches!(intersection_attack(&ObservationLog::new()), Err(Error::EmptyLog)));
    }

    #[test]
    fn observe_keeps_order() {
        let mut log = ObservationLog::new();
        log.observe(&wire(&[3, 1, 2]), 5);
        log.observe(&wire(&[9]), 6);
        assert_eq!(log.records()[0].members, wire(&[3, 1, 2]).members());
        assert_eq!(log.records()[1].t, 6);
    }

    #[test]
    fn linked_restarts() {
        let mut log = ObservationLog::new();
        log.observe(&wire(&[1, 2, 3]), 1);
        log.observe(&wire(&[1, 2, 4]), 2);
        log.observe(&wire(&[5, 6, 7]), 3);
        let runs = linked_intersection(&log);
        assert_eq!(runs[1], CandidateSet::new([id(1), id(2)], 2));
        assert_eq!(runs[2].len(), 3);
        assert!(intersection_attack(&log).unwrap().is_empty());
    }

    #[test]
    fn all_marked_rejected() {
        let pool = AssistantPool::new([id(1), id(2)], PoolSource::HssProvided);
        assert!(matches!(MarkedPool::within(&pool, [id(1), id(2)]), Err(Error::AllMarked)));
        assert!(MarkedPool::within(&pool, [id(1)]).is_ok());
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 10, 1.96).0, 0.0);
    }

    #[test]
    fn estimate_is_deterministic() {
        let p = AttackParams {
            scheme: Scheme::Variable,
            attack: Attack::Intersection,
            k: 4,
            pool: 20,
            marked_fraction: 0.0,
            rounds: 3,
            trials: 50,
            seed: 9,
        };
        assert_eq!(estimate_success(&p).unwrap(), estimate_success(&p).unwrap());
    }

    #[test]
    fn validation() {
        let mut p = AttackParams {
            scheme: Scheme::StaticBaseline,
            attack: Attack::Mark,
            k: 4,
            pool: 10,
            marked_fraction: 1.0,
            rounds: 1,
            trials: 1,
            seed: 0,
        };
        assert!(matches!(p.validate(), Err(Error::AllMarked)));
        p.marked_fraction = 0.5;
        p.pool = 2;
        assert!(matches!(p.validate(), Err(Error::InsufficientPool { .. })));
    }
}
