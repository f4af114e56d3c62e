//! Subscriber identities and the synchronized shared-pseudonym chain.
//!
//! A chain is seeded by `(key, SQN)`: the SQN is hashed into a Milenage RAND,
//! `CK0`/`IK0` give the ZUC IV, and every pseudonym update consumes two
//! keystream words. UE and HSS each hold a chain and stay in step as long as
//! they apply the same sequence of commits.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::crypto::{encode_sqn, hash, hmac40, Key128, Milenage, DEFAULT_OP, SQN_MAX};
use crate::error::{Error, Result};
use crate::zuc::ZucState;

pub const MSIN_BITS: u32 = 40;
pub const MSIN_MASK: u64 = (1 << MSIN_BITS) - 1;

/// Encoded identity: 3 ASCII MCC digits, 3 ASCII MNC digits, 5-octet MSIN.
pub const IDENTITY_LEN: usize = 11;

fn check_prefix(mcc: u16, mnc: u16) -> Result<()> {
    if mcc > 999 || mnc > 999 {
        return Err(Error::InvalidIdentity(format!(
            "MCC/MNC must be three decimal digits, got {mcc}/{mnc}"
        )));
    }
    Ok(())
}

fn check_msin(msin: u64) -> Result<()> {
    if msin > MSIN_MASK {
        return Err(Error::InvalidIdentity(format!(
            "MSIN {msin:#x} exceeds 40 bits"
        )));
    }
    Ok(())
}

/// Permanent subscriber identity `MCC || MNC || MSIN`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Imsi {
    mcc: u16,
    mnc: u16,
    msin: u64,
}

impl Imsi {
    pub fn new(mcc: u16, mnc: u16, msin: u64) -> Result<Self> {
        check_prefix(mcc, mnc)?;
        check_msin(msin)?;
        Ok(Imsi { mcc, mnc, msin })
    }

    pub fn mcc(&self) -> u16 {
        self.mcc
    }

    pub fn mnc(&self) -> u16 {
        self.mnc
    }

    pub fn msin(&self) -> u64 {
        self.msin
    }

    pub fn as_pseudonym(&self) -> Pseudonym {
        Pseudonym {
            mcc: self.mcc,
            mnc: self.mnc,
            msin: self.msin,
            kind: IdentityKind::RealImsi,
        }
    }
}

impl fmt::Display for Imsi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03}{:03}:{:010x}", self.mcc, self.mnc, self.msin)
    }
}

/// What role an identity plays for its owner. Never transmitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IdentityKind {
    RealImsi,
    SharedPseudonym,
    Anchor,
    Assistant,
}

impl IdentityKind {
    /// Real IMSI, shared pseudonym or anchor: something a UE authenticates with.
    pub fn is_live(self) -> bool {
        !matches!(self, IdentityKind::Assistant)
    }
}

/// An identity as it appears on the wire, plus a local role tag.
///
/// Equality, ordering and hashing look only at `(mcc, mnc, msin)`.
#[derive(Clone, Copy, Debug)]
pub struct Pseudonym {
    mcc: u16,
    mnc: u16,
    msin: u64,
    kind: IdentityKind,
}

impl Pseudonym {
    pub fn new(mcc: u16, mnc: u16, msin: u64, kind: IdentityKind) -> Result<Self> {
        check_prefix(mcc, mnc)?;
        check_msin(msin)?;
        Ok(Pseudonym {
            mcc,
            mnc,
            msin,
            kind,
        })
    }

    pub fn mcc(&self) -> u16 {
        self.mcc
    }

    pub fn mnc(&self) -> u16 {
        self.mnc
    }

    /// The (possibly encrypted) MSIN field.
    pub fn msin(&self) -> u64 {
        self.msin
    }

    pub fn kind(&self) -> IdentityKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: IdentityKind) -> Self {
        self.kind = kind;
        self
    }

    fn key(&self) -> (u16, u16, u64) {
        (self.mcc, self.mnc, self.msin)
    }

    pub fn encode(&self) -> [u8; IDENTITY_LEN] {
        let mut out = [0u8; IDENTITY_LEN];
        let digits = format!("{:03}{:03}", self.mcc, self.mnc);
        out[..6].copy_from_slice(digits.as_bytes());
        out[6..].copy_from_slice(&self.msin.to_be_bytes()[3..]);
        out
    }

    /// Decodes a wire identity. The kind is not carried on the wire, so the
    /// result is tagged as an assistant.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != IDENTITY_LEN {
            return Err(Error::MalformedIdentity(format!(
                "expected {IDENTITY_LEN} octets, got {}",
                bytes.len()
            )));
        }
        let digits = |field: &[u8], name: &str| -> Result<u16> {
            if !field.iter().all(u8::is_ascii_digit) {
                return Err(Error::MalformedIdentity(format!("{name} is not decimal")));
            }
            Ok(field
                .iter()
                .fold(0u16, |acc, d| acc * 10 + u16::from(d - b'0')))
        };
        let mcc = digits(&bytes[..3], "MCC")?;
        let mnc = digits(&bytes[3..6], "MNC")?;
        let msin = bytes[6..]
            .iter()
            .fold(0u64, |acc, &b| (acc << 8) | u64::from(b));
        Ok(Pseudonym {
            mcc,
            mnc,
            msin,
            kind: IdentityKind::Assistant,
        })
    }
}

impl PartialEq for Pseudonym {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Pseudonym {}

impl Hash for Pseudonym {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for Pseudonym {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pseudonym {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03}{:03}:{:010x}", self.mcc, self.mnc, self.msin)
    }
}

impl From<Imsi> for Pseudonym {
    fn from(imsi: Imsi) -> Self {
        imsi.as_pseudonym()
    }
}

/// ZUC IV for a chain epoch: `high64(CK0) || low64(IK0)` where
/// `CK0, IK0 = f3, f4(key, RAND)` and `RAND` is the top 128 bits of `H(SQN)`.
pub fn derive_iv(key: &Key128, sqn: u64) -> [u8; 16] {
    let digest = hash(&encode_sqn(sqn));
    let rand: [u8; 16] = digest.0[..16].try_into().unwrap();
    let (_, ck, ik, _) = Milenage::with_op(key, &DEFAULT_OP).f2345(&rand);
    let mut iv = [0u8; 16];
    iv[..8].copy_from_slice(&ck[..8]);
    iv[8..].copy_from_slice(&ik[8..]);
    iv
}

/// High 40 bits of the 64-bit concatenation `w1 || w2`.
pub fn expand_words_40(w1: u32, w2: u32) -> u64 {
    (u64::from(w1) << 8) | u64::from(w2 >> 24)
}

/// `MCC || MNC || (MSIN ^ HMAC40(key, SQN))`.
pub fn anchor_pseudonym(key: &Key128, imsi: &Imsi, sqn: u64) -> Pseudonym {
    let mask = hmac40(key, &encode_sqn(sqn));
    Pseudonym {
        mcc: imsi.mcc,
        mnc: imsi.mnc,
        msin: imsi.msin ^ mask,
        kind: IdentityKind::Anchor,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqnCounter {
    Imsi,
    P0,
}

/// Per-subscriber pseudonym state shared (by computation, not by transfer)
/// between UE and HSS.
#[derive(Clone, Debug)]
pub struct PseudonymChain {
    key: Key128,
    imsi: Imsi,
    sqn_imsi: u64,
    sqn_p0: u64,
    /// SQN that seeded the running ZUC epoch.
    epoch_sqn: u64,
    count: u64,
    index: u64,
    current: Pseudonym,
    anchor: Option<Pseudonym>,
    zuc: Option<ZucState>,
}

impl PseudonymChain {
    /// Fresh chain: index 0, the live identity is the real IMSI.
    pub fn new(key: Key128, imsi: Imsi) -> Self {
        PseudonymChain {
            key,
            imsi,
            sqn_imsi: 0,
            sqn_p0: 0,
            epoch_sqn: 0,
            count: 0,
            index: 0,
            current: imsi.as_pseudonym(),
            anchor: None,
            zuc: None,
        }
    }

    pub fn key(&self) -> &Key128 {
        &self.key
    }

    pub fn imsi(&self) -> &Imsi {
        &self.imsi
    }

    pub fn sqn_imsi(&self) -> u64 {
        self.sqn_imsi
    }

    pub fn sqn_p0(&self) -> u64 {
        self.sqn_p0
    }

    pub fn epoch_sqn(&self) -> u64 {
        self.epoch_sqn
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn is_active(&self) -> bool {
        self.index >= 1
    }

    /// Live identity: the IMSI before the first authentication, `P_i` after.
    pub fn current(&self) -> &Pseudonym {
        &self.current
    }

    pub fn anchor(&self) -> Option<&Pseudonym> {
        self.anchor.as_ref()
    }

    /// Re-initializes ZUC from `(key, derive_iv(key, seed_sqn))`.
    pub fn start_epoch(&mut self, seed_sqn: u64) {
        self.zuc = Some(ZucState::new(&self.key, &derive_iv(&self.key, seed_sqn)));
        self.epoch_sqn = seed_sqn;
        self.count = 0;
    }

    /// Drops the keystream and the live pseudonym's backing state, as after
    /// an unexpected memory cleanup.
    pub fn drop_epoch(&mut self) {
        self.zuc = None;
    }

    pub fn has_epoch(&self) -> bool {
        self.zuc.is_some()
    }

    /// Draws two keystream words and returns the 40-bit `K_s`.
    pub fn expand_keystream_40(&mut self) -> Result<u64> {
        let zuc = self.zuc.as_mut().ok_or(Error::ChainInactive)?;
        let w1 = zuc.next_word();
        let w2 = zuc.next_word();
        self.count += 2;
        debug_assert_eq!(self.count, zuc.words_emitted());
        Ok(expand_words_40(w1, w2))
    }

    /// `P_{i+1} = MCC || MNC || (MSIN ^ K_s)`.
    pub fn next_pseudonym(&mut self) -> Result<Pseudonym> {
        let ks = self.expand_keystream_40()?;
        let p = Pseudonym {
            mcc: self.imsi.mcc,
            mnc: self.imsi.mnc,
            msin: self.imsi.msin ^ ks,
            kind: IdentityKind::SharedPseudonym,
        };
        self.current = p;
        self.index += 1;
        Ok(p)
    }

    pub fn advance_sqn(&mut self, which: SqnCounter) -> Result<u64> {
        let next = self.sqn(which).checked_add(1).filter(|&v| v <= SQN_MAX);
        let next = next.ok_or(Error::ChainExhausted)?;
        *self.sqn_mut(which) = next;
        Ok(next)
    }

    /// Raises a counter to `value`. Counters never decrease.
    pub fn raise_sqn(&mut self, which: SqnCounter, value: u64) -> Result<()> {
        if value > SQN_MAX {
            return Err(Error::ChainExhausted);
        }
        let current = self.sqn(which);
        if value < current {
            return Err(Error::SqnRegression {
                current,
                requested: value,
            });
        }
        *self.sqn_mut(which) = value;
        Ok(())
    }

    pub fn sqn(&self, which: SqnCounter) -> u64 {
        match which {
            SqnCounter::Imsi => self.sqn_imsi,
            SqnCounter::P0 => self.sqn_p0,
        }
    }

    fn sqn_mut(&mut self, which: SqnCounter) -> &mut u64 {
        match which {
            SqnCounter::Imsi => &mut self.sqn_imsi,
            SqnCounter::P0 => &mut self.sqn_p0,
        }
    }

    fn refresh_anchor(&mut self) {
        self.anchor = Some(anchor_pseudonym(&self.key, &self.imsi, self.sqn_p0));
    }

    /// Completion of the IMSI authentication carrying `SQN_IMSI = sqn`:
    /// seeds the first epoch, derives `P_1`, and the anchor from `SQN_IMSI`.
    pub fn commit_first_auth(&mut self, sqn: u64) -> Result<Pseudonym> {
        self.raise_sqn(SqnCounter::Imsi, sqn)?;
        self.raise_sqn(SqnCounter::P0, sqn)?;
        self.start_epoch(sqn);
        let p = self.next_pseudonym()?;
        self.refresh_anchor();
        Ok(p)
    }

    /// Completion of an authentication under `P_i`: next pseudonym from the
    /// running keystream, anchor re-derived from the advanced `SQN_P0`.
    pub fn commit_auth(&mut self, sqn: u64) -> Result<Pseudonym> {
        self.raise_sqn(SqnCounter::P0, sqn)?;
        let p = self.next_pseudonym()?;
        self.refresh_anchor();
        Ok(p)
    }

    /// Completion of an anchor (recovery) authentication: a new epoch seeded
    /// from the advanced `SQN_P0`.
    pub fn commit_recovery(&mut self, sqn: u64) -> Result<Pseudonym> {
        self.raise_sqn(SqnCounter::P0, sqn)?;
        self.start_epoch(sqn);
        let p = self.next_pseudonym()?;
        self.refresh_anchor();
        Ok(p)
    }

    /// Flips bits of the live pseudonym's MSIN without touching the keystream.
    /// Models a UE-side miscalculation.
    pub fn corrupt_current(&mut self, flip: u64) {
        self.current.msin ^= flip & MSIN_MASK;
    }

    pub fn to_record(&self) -> ChainRecord {
        ChainRecord {
            key: self.key,
            mcc: self.imsi.mcc,
            mnc: self.imsi.mnc,
            msin: self.imsi.msin,
            sqn_imsi: self.sqn_imsi,
            sqn_p0: self.sqn_p0,
            count: self.count,
            index: self.index,
            epoch_sqn: self.epoch_sqn,
        }
    }

    /// Rebuilds a chain by replaying its epoch from the seed SQN.
    pub fn from_record(rec: &ChainRecord) -> Result<Self> {
        let imsi = Imsi::new(rec.mcc, rec.mnc, rec.msin)?;
        let mut chain = PseudonymChain::new(rec.key, imsi);
        chain.sqn_imsi = rec.sqn_imsi;
        chain.sqn_p0 = rec.sqn_p0;
        if rec.index == 0 {
            if rec.count != 0 {
                return Err(Error::InvalidParameter(
                    "inactive chain with consumed keystream".into(),
                ));
            }
            return Ok(chain);
        }
        if rec.count < 2 || !rec.count.is_multiple_of(2) || rec.count / 2 > rec.index {
            return Err(Error::InvalidParameter(format!(
                "count {} inconsistent with index {}",
                rec.count, rec.index
            )));
        }
        chain.start_epoch(rec.epoch_sqn);
        if let Some(zuc) = chain.zuc.as_mut() {
            zuc.skip(rec.count - 2);
        }
        chain.count = rec.count - 2;
        chain.next_pseudonym()?;
        chain.index = rec.index;
        chain.refresh_anchor();
        Ok(chain)
    }
}

/// Flat persisted form of a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainRecord {
    pub key: Key128,
    pub mcc: u16,
    pub mnc: u16,
    pub msin: u64,
    pub sqn_imsi: u64,
    pub sqn_p0: u64,
    pub count: u64,
    pub index: u64,
    pub epoch_sqn: u64,
}

impl ChainRecord {
    /// Space-separated hex fields:
    /// `key mcc mnc msin sqn_imsi sqn_p0 count index epoch_sqn`.
    pub fn to_line(&self) -> String {
        format!(
            "{} {:04x} {:04x} {:010x} {:012x} {:012x} {:016x} {:016x} {:012x}",
            hex::encode(self.key),
            self.mcc,
            self.mnc,
            self.msin,
            self.sqn_imsi,
            self.sqn_p0,
            self.count,
            self.index,
            self.epoch_sqn
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let bad = |reason: String| Error::RegistryFormat {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(bad(format!("expected 9 fields, found {}", fields.len())));
        }
        let key: Key128 = hex::decode(fields[0])
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| bad("key must be 32 hex digits".into()))?;
        let num = |i: usize, name: &str| -> Result<u64> {
            u64::from_str_radix(fields[i], 16).map_err(|e| bad(format!("{name}: {e}")))
        };
        let small = |i: usize, name: &str| -> Result<u16> {
            u16::try_from(num(i, name)?).map_err(|_| bad(format!("{name} out of range")))
        };
        let rec = ChainRecord {
            key,
            mcc: small(1, "mcc")?,
            mnc: small(2, "mnc")?,
            msin: num(3, "msin")?,
            sqn_imsi: num(4, "sqn_imsi")?,
            sqn_p0: num(5, "sqn_p0")?,
            count: num(6, "count")?,
            index: num(7, "index")?,
            epoch_sqn: num(8, "epoch_sqn")?,
        };
        Imsi::new(rec.mcc, rec.mnc, rec.msin).map_err(|e| bad(e.to_string()))?;
        for (v, name) in [
            (rec.sqn_imsi, "sqn_imsi"),
            (rec.sqn_p0, "sqn_p0"),
            (rec.epoch_sqn, "epoch_sqn"),
        ] {
            if v > SQN_MAX {
                return Err(bad(format!("{name} exceeds 48 bits")));
            }
        }
        Ok(rec)
    }
}

pub fn write_registry<W: Write>(mut out: W, records: &[ChainRecord]) -> Result<()> {
    for rec in records {
        writeln!(out, "{}", rec.to_line())?;
    }
    Ok(())
}

/// Reads line-delimited records; blank lines and `#` comments are skipped.
pub fn read_registry<R: BufRead>(input: R) -> Result<Vec<ChainRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(ChainRecord::parse_line(trimmed, i + 1)?);
    }
    Ok(out)
}

pub fn save_registry(path: &Path, records: &[ChainRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_registry(&mut w, records)?;
    w.flush()?;
    Ok(())
}

pub fn load_registry(path: &Path) -> Result<Vec<ChainRecord>> {
    let file = std::fs::File::open(path)?;
    read_registry(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imsi() -> Imsi {
        Imsi::new(460, 1, 0x01_2345_6789).unwrap()
    }

    #[test]
    fn imsi_bounds() {
        assert!(Imsi::new(1000, 1, 0).is_err());
        assert!(Imsi::new(1, 1000, 0).is_err());
        assert!(Imsi::new(1, 1, 1 << 40).is_err());
        assert!(Imsi::new(999, 999, MSIN_MASK).is_ok());
    }

    #[test]
    fn expansion_rule() {
        assert_eq!(expand_words_40(0, 0), 0);
        assert_eq!(expand_words_40(u32::MAX, u32::MAX), 0xff_ffff_ffff);
        assert_eq!(expand_words_40(0x1234_5678, 0x9abc_def0), 0x12_3456_789a);
    }

    #[test]
    fn equality_ignores_kind() {
        let a = Pseudonym::new(1, 2, 3, IdentityKind::Assistant).unwrap();
        let b = a.with_kind(IdentityKind::SharedPseudonym);
        assert_eq!(a, b);
        assert_ne!(a, Pseudonym::new(1, 2, 4, IdentityKind::Assistant).unwrap());
    }

    #[test]
    fn codec_errors() {
        let p = imsi().as_pseudonym();
        let enc = p.encode();
        assert_eq!(&enc[..6], b"460001");
        assert_eq!(Pseudonym::decode(&enc).unwrap(), p);
        assert!(matches!(
            Pseudonym::decode(&enc[..10]),
            Err(Error::MalformedIdentity(_))
        ));
        let mut bad = enc;
        bad[1] = b'x';
        assert!(Pseudonym::decode(&bad).is_err());
    }

    #[test]
    fn inactive_chain_has_no_keystream() {
        let mut c = PseudonymChain::new([1; 16], imsi());
        assert_eq!(c.index(), 0);
        assert_eq!(c.current().kind(), IdentityKind::RealImsi);
        assert!(matches!(c.next_pseudonym(), Err(Error::ChainInactive)));
    }

    #[test]
    fn count_tracks_updates() {
        let mut c = PseudonymChain::new([1; 16], imsi());
        c.commit_first_auth(7).unwrap();
        assert_eq!((c.count(), c.index()), (2, 1));
        c.commit_auth(8).unwrap();
        c.commit_auth(9).unwrap();
        assert_eq!((c.count(), c.index()), (6, 3));
        c.commit_recovery(10).unwrap();
        assert_eq!((c.count(), c.index()), (2, 4));
        assert_eq!(c.epoch_sqn(), 10);
    }

    #[test]
    fn sqn_counters() {
        let mut c = PseudonymChain::new([1; 16], imsi());
        c.raise_sqn(SqnCounter::P0, 5).unwrap();
        assert_eq!(c.advance_sqn(SqnCounter::P0).unwrap(), 6);
        c.advance_sqn(SqnCounter::P0).unwrap();
        c.advance_sqn(SqnCounter::P0).unwrap();
        assert_eq!(c.sqn_p0(), 8);
        assert!(matches!(
            c.raise_sqn(SqnCounter::P0, 3),
            Err(Error::SqnRegression { .. })
        ));
        c.raise_sqn(SqnCounter::Imsi, SQN_MAX).unwrap();
        assert!(matches!(
            c.advance_sqn(SqnCounter::Imsi),
            Err(Error::ChainExhausted)
        ));
        assert_eq!(c.sqn_imsi(), SQN_MAX);
    }

    #[test]
    fn anchor_keeps_prefix() {
        let p0 = anchor_pseudonym(&[5; 16], &imsi(), 42);
        assert_eq!((p0.mcc(), p0.mnc()), (460, 1));
        assert_eq!(p0.kind(), IdentityKind::Anchor);
        assert_eq!(p0.msin() ^ hmac40(&[5; 16], &encode_sqn(42)), imsi().msin());
    }

    #[test]
    fn record_line_round_trip() {
        let mut c = PseudonymChain::new([0xab; 16], imsi());
        c.commit_first_auth(3).unwrap();
        c.commit_auth(4).unwrap();
        let rec = c.to_record();
        let line = rec.to_line();
        assert_eq!(ChainRecord::parse_line(&line, 1).unwrap(), rec);
        assert!(ChainRecord::parse_line("00 01", 3).is_err());
        let rebuilt = PseudonymChain::from_record(&rec).unwrap();
        assert_eq!(rebuilt.current(), c.current());
        assert_eq!(rebuilt.anchor(), c.anchor());
    }
}
