//! One pass/fail line per acceptance criterion. Exits non-zero if any fail.

use std::collections::{BTreeSet, HashMap};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use vkp_core::adversary::{
    chi_square_uniform, estimate_success, intersection_attack, mark_attack, mark_success_given,
    toy_posterior, Attack, AttackParams, MarkedPool, ObservationLog, Scheme,
};
use vkp_core::baseline::{compute_m1, compute_m2, run_session, server_find_identity, BaselineClient, BaselineServer};
use vkp_core::conformance;
use vkp_core::kset::PoolSource;
use vkp_core::protocol::{AttachMode, AuthFailure, ChannelFault, Network};
use vkp_core::{AssistantPool, IdentityKind, Imsi, KSetWire, Pseudonym};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn id(msin: u64) -> Pseudonym {
    Pseudonym::new(460, 1, msin, IdentityKind::Assistant).unwrap()
}

fn set(ids: &[u64]) -> KSetWire {
    KSetWire::new(ids.iter().map(|&m| id(m)).collect())
}

fn names(c: &BTreeSet<Pseudonym>) -> BTreeSet<u64> {
    c.iter().map(|p| p.msin()).collect()
}

const IMSI: u64 = 1;
const B: u64 = 2;
const C: u64 = 3;
const D: u64 = 4;
const E: u64 = 5;
const F: u64 = 6;
const G: u64 = 7;
const H: u64 = 8;

fn conformance_check() -> Outcome {
    let start = Instant::now();
    let checks = conformance::run_all();
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    outcome(
        failed.is_empty() && secs < 1.0,
        format!("{} vectors, failed {:?}, {:.3}s (limit 1s)", checks.len(), failed, secs),
    )
}

fn intersection_example() -> Outcome {
    let mut log = ObservationLog::new();
    log.observe(&set(&[IMSI, B, C, D]), 1);
    log.observe(&set(&[IMSI, B, E, F]), 2);
    let two = names(intersection_attack(&log).unwrap().candidates());
    log.observe(&set(&[IMSI, D, G, H]), 3);
    let three = names(intersection_attack(&log).unwrap().candidates());
    let mut var = ObservationLog::new();
    var.observe(&set(&[IMSI, B, C, D]), 1);
    var.observe(&set(&[100, B, E, F]), 2);
    let v = names(intersection_attack(&var).unwrap().candidates());
    outcome(
        two == BTreeSet::from([IMSI, B]) && three == BTreeSet::from([IMSI]) && v == BTreeSet::from([B]),
        format!("two sets {two:?}, three sets {three:?}, variable {v:?}"),
    )
}

fn mark_example() -> Outcome {
    let pool_ids: Vec<u64> = [B, C, D].into_iter().chain(100..197).collect();
    let pool = AssistantPool::new(pool_ids.iter().map(|&m| id(m)), PoolSource::HssProvided);
    let observed = set(&[IMSI, B, C, D]);
    let marked20: Vec<Pseudonym> = [B, C].into_iter().chain(100..118).map(id).collect();
    let a = MarkedPool::within(&pool, marked20).unwrap();
    let first = names(mark_attack(&observed, &a).candidates());
    let marked21: Vec<Pseudonym> = [B, C, D].into_iter().chain(100..118).map(id).collect();
    let b = MarkedPool::within(&pool, marked21).unwrap();
    let second = names(mark_attack(&observed, &b).candidates());
    outcome(
        pool.len() == 100 && first == BTreeSet::from([IMSI, D]) && second == BTreeSet::from([IMSI]),
        format!("B,C marked {first:?}; B,C,D marked {second:?}"),
    )
}

fn synchrony() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = Network::new(4);
    for _ in 0..10 {
        let key: [u8; 16] = rng.gen();
        net.add_subscriber(key, Imsi::new(460, 1, rng.gen::<u64>() & ((1 << 40) - 1)).unwrap());
    }
    let (mut failures, mut divergent) = (0, 0);
    for _ in 0..1000 {
        let ue = rng.gen_range(0..10);
        if !net.authenticate(ue, 4).unwrap().is_success() {
            failures += 1;
        }
        if !(0..10).all(|u| net.in_sync(u)) {
            divergent += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && divergent == 0 && secs < 30.0,
        format!("1000 auths over 10 subscribers: {failures} failures, {divergent} divergent, {secs:.2}s (limit 30s)"),
    )
}

/// Injects `fault`, then counts identification failures and recovery
/// attaches until the UE is back in step.
fn recovery_drill(inject: fn(&mut Network, usize)) -> (usize, bool, Vec<Pseudonym>) {
    let mut net = Network::new(5);
    for i in 0..4 {
        net.add_subscriber([i as u8 + 20; 16], Imsi::new(460, 1, 300 + i as u64).unwrap());
    }
    for _ in 0..3 {
        for ue in 0..4 {
            net.authenticate(ue, 4).unwrap();
        }
    }
    let mut ident_failures = 0;
    let mut anchors = Vec::new();
    let mut ok = true;
    for _ in 0..2 {
        inject(&mut net, 0);
        let out = net.authenticate(0, 4).unwrap();
        if out.failure() == Some(AuthFailure::Identification) {
            ident_failures += 1;
        }
        let rec = net.recover(0, 4).unwrap();
        ok &= rec.is_success() && rec.mode() == AttachMode::Anchor && net.in_sync(0);
        let obs = net.observations().last().unwrap();
        ok &= obs.kset.contains(&obs.live);
        anchors.push(obs.live);
        ok &= net.authenticate(0, 4).unwrap().is_success();
    }
    (ident_failures, ok, anchors)
}

fn recovery() -> Outcome {
    let (hf, hok, ha) = recovery_drill(|n, u| n.inject_hss_loss(u));
    let (uf, uok, ua) = recovery_drill(|n, u| n.inject_ue_mismatch(u));
    let distinct = ha[0] != ha[1] && ua[0] != ua[1];
    outcome(
        hf == 2 && uf == 2 && hok && uok && distinct,
        format!(
            "hss-loss: {hf}/2 single failures recovered={hok}; ue-mismatch: {uf}/2 recovered={uok}; successive P0 distinct={distinct}"
        ),
    )
}

fn attack_statistics() -> Outcome {
    let base = AttackParams {
        scheme: Scheme::StaticBaseline,
        attack: Attack::Intersection,
        k: 4,
        pool: 100,
        marked_fraction: 0.0,
        rounds: 10,
        trials: 1000,
        seed: 6,
    };
    let stat = estimate_success(&base).unwrap();
    let unique10 = stat.round_unique_rate(10);
    let var = estimate_success(&AttackParams {
        scheme: Scheme::Variable,
        trials: 10_000,
        ..base
    })
    .unwrap();
    let q = 1.0 / 4.0;
    let rates: Vec<f64> = (1..=10).map(|r| var.round_rate(r)).collect();
    let worst = rates.iter().map(|r| (r - q).abs()).fold(0.0, f64::max);
    let z = var.improvement_z(10);
    outcome(
        unique10 >= 0.95 && worst <= 0.02 && z < 1.645,
        format!(
            "static unique rate by round 10 = {unique10:.4} (need >= 0.95); variable per-round rates {:.4}..{:.4}, max |rate - 1/4| = {worst:.4} (limit 0.02); round 10 vs 1 z = {z:.3} (limit 1.645)",
            rates.iter().cloned().fold(f64::INFINITY, f64::min),
            rates.iter().cloned().fold(0.0, f64::max),
        ),
    )
}

fn mark_bound() -> Outcome {
    let k = 4;
    let mut pass = true;
    let mut parts = Vec::new();
    for m in 0..=3 {
        let (hits, n) = mark_success_given(k, m, 10_000, 70 + m as u64).unwrap();
        let rate = hits as f64 / n as f64;
        let expected = 1.0 / (k - m) as f64;
        pass &= (rate - expected).abs() <= 0.02;
        parts.push(format!("m={m} {rate:.4} vs {expected:.4}"));
    }
    outcome(pass, parts.join(", "))
}

fn toy_anonymity() -> Outcome {
    let hist = toy_posterior(0x5c, 1234, 10_000, 8);
    let stat = chi_square_uniform(&hist);
    let p = ChiSquared::new(255.0).unwrap().sf(stat);
    let covered = hist.iter().filter(|&&c| c > 0).count();
    outcome(
        p > 0.01 && covered == 256,
        format!("chi-square {stat:.1} on 255 dof, p = {p:.4} (need > 0.01), {covered}/256 MSIN values consistent"),
    )
}

fn replay_and_tamper() -> Outcome {
    let mut net = Network::new(9);
    for i in 0..4 {
        net.add_subscriber([i as u8 + 50; 16], Imsi::new(460, 1, 900 + i as u64).unwrap());
    }
    for ue in 0..4 {
        net.authenticate(ue, 2).unwrap();
    }
    let (mut replay_rejected, mut tamper_rejected, mut honest_ok) = (0, 0, 0);
    let trials = 10_000;
    for t in 0..trials {
        let ue = t % 4;
        net.arm(ue, ChannelFault::ReplayChallenge);
        if net.authenticate(ue, 2).unwrap().failure() == Some(AuthFailure::Sqn) {
            replay_rejected += 1;
        }
        net.arm(ue, ChannelFault::TamperMac);
        if net.authenticate(ue, 2).unwrap().failure() == Some(AuthFailure::Mac) {
            tamper_rejected += 1;
        }
        if net.authenticate(ue, 2).unwrap().is_success() {
            honest_ok += 1;
        }
    }
    outcome(
        replay_rejected == trials && tamper_rejected == trials && honest_ok == trials,
        format!("replay rejected {replay_rejected}/{trials}, tamper rejected {tamper_rejected}/{trials}, honest after fault {honest_ok}/{trials}"),
    )
}

fn baseline_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let clients: Vec<BaselineClient> = (0..50)
        .map(|i| BaselineClient {
            identity: Imsi::new(460, 1, 5000 + i).unwrap().as_pseudonym(),
            key: rng.gen(),
        })
        .collect();
    let server = BaselineServer {
        key_db: clients.iter().map(|c| (c.identity, c.key)).collect::<HashMap<_, _>>(),
    };
    let sessions = 10_000;
    let mut complete = 0;
    for i in 0..sessions {
        let c = &clients[i % clients.len()];
        let mut members: Vec<Pseudonym> = (0..3).map(|j| clients[(i + 7 * j + 1) % clients.len()].identity).collect();
        members.insert(rng.gen_range(0..4), c.identity);
        members.dedup();
        if let Ok(out) = run_session(c, &server, KSetWire::new(members), &mut rng) {
            if out.found == c.identity && Some(&out.server_sk) == out.session.session_key() {
                complete += 1;
            }
        }
    }
    let attempts = 100_000;
    let mut forged = 0;
    for i in 0..attempts {
        let victim = &clients[i % clients.len()];
        let kset = KSetWire::new(vec![victim.identity, clients[(i + 1) % clients.len()].identity]);
        let (n1, n2): ([u8; 16], [u8; 16]) = (rng.gen(), rng.gen());
        let guess_key: [u8; 16] = rng.gen();
        let m1 = if i % 2 == 0 {
            compute_m1(&n1, &n2, &victim.identity, &guess_key, &kset)
        } else {
            vkp_core::Digest(rng.gen())
        };
        if server_find_identity(&n1, &n2, &kset, &m1, &server.key_db).is_some() {
            forged += 1;
        }
        if compute_m2(&n2, &guess_key) == compute_m2(&n2, &victim.key) {
            forged += 1;
        }
    }
    outcome(
        complete == sessions && forged == 0,
        format!("completeness {complete}/{sessions}, forgeries {forged}/{attempts} keyless attempts (M1 and M2)"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("conformance", conformance_check),
        ("intersection example", intersection_example),
        ("mark example", mark_example),
        ("synchrony", synchrony),
        ("recovery", recovery),
        ("attack statistics", attack_statistics),
        ("mark-attack bound", mark_bound),
        ("toy anonymity", toy_anonymity),
        ("replay and tamper", replay_and_tamper),
        ("baseline protocol", baseline_protocol),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        all &= o.pass;
        println!("criterion {:>2} {:<22} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
