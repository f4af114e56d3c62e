//! Hash, HMAC, Milenage and the keyed expansion PRNG.
//!
//! One hash for the whole build: SHA-256. Everything here is a pure function.

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;
use hmac::{Hmac, Mac};
use sha2::{Digest as _, Sha256};

type HmacSha256 = Hmac<Sha256>;

pub type Key128 = [u8; 16];

/// Largest 48-bit value; SQNs live in `0..=SQN_MAX`.
pub const SQN_MAX: u64 = (1 << 48) - 1;

/// OP from the first 3GPP Milenage conformance test set. Fixed for the build.
pub const DEFAULT_OP: [u8; 16] = [
    0xcd, 0xc2, 0x02, 0xd5, 0x12, 0x3e, 0x20, 0xf6, 0x2b, 0x6d, 0x67, 0x6a, 0xc7, 0x2c, 0xb3, 0x18,
];

/// SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn hash(message: &[u8]) -> Digest {
    Digest(Sha256::digest(message).into())
}

pub fn hmac(key: &[u8], message: &[u8]) -> Digest {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(key).expect("HMAC accepts keys of any length");
    mac.update(message);
    Digest(mac.finalize().into_bytes().into())
}

/// Most-significant 40 bits of `hmac(key, message)`, read big-endian.
pub fn hmac40(key: &[u8], message: &[u8]) -> u64 {
    top40(&hmac(key, message).0)
}

pub(crate) fn top40(bytes: &[u8]) -> u64 {
    bytes[..5].iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b))
}

/// 48-bit big-endian SQN encoding used in every hash and Milenage input.
///
/// Bits above 48 are dropped.
pub fn encode_sqn(sqn: u64) -> [u8; 6] {
    let b = sqn.to_be_bytes();
    [b[2], b[3], b[4], b[5], b[6], b[7]]
}

pub fn decode_sqn(bytes: [u8; 6]) -> u64 {
    bytes.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b))
}

/// Counter-mode expansion: block `i` (from 1) is `HMAC(seed, i as u32 BE)`,
/// concatenated and cut to `out_len`. Shorter outputs are prefixes of longer ones.
pub fn prng_expand(seed: &[u8], out_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(out_len + Digest::LEN);
    let mut counter = 1u32;
    while out.len() < out_len {
        out.extend_from_slice(&hmac(seed, &counter.to_be_bytes()).0);
        counter += 1;
    }
    out.truncate(out_len);
    out
}

/// Child seed for stream `label`/`index` under `parent`: the first eight
/// bytes of `H(parent || label || index)`.
pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let mut msg = Vec::with_capacity(16 + label.len());
    msg.extend_from_slice(&parent.to_be_bytes());
    msg.extend_from_slice(label.as_bytes());
    msg.extend_from_slice(&index.to_be_bytes());
    u64::from_be_bytes(hash(&msg).0[..8].try_into().unwrap())
}

/// f1..f5 outputs for one `(key, rand, sqn, amf)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MilenageOutput {
    pub mac: [u8; 8],
    pub res: [u8; 8],
    pub ck: [u8; 16],
    pub ik: [u8; 16],
    pub ak: [u8; 6],
}

/// Milenage keyed with a subscriber key and an operator variant.
#[derive(Clone)]
pub struct Milenage {
    cipher: Aes128,
    opc: [u8; 16],
}

fn xor16(a: &[u8; 16], b: &[u8; 16]) -> [u8; 16] {
    std::array::from_fn(|i| a[i] ^ b[i])
}

/// Rotates a 128-bit block left by `bytes` octets.
fn rot(block: &[u8; 16], bytes: usize) -> [u8; 16] {
    std::array::from_fn(|i| block[(i + bytes) % 16])
}

impl Milenage {
    pub fn with_op(key: &Key128, op: &[u8; 16]) -> Self {
        let cipher = Aes128::new(GenericArray::from_slice(key));
        let mut m = Milenage {
            cipher,
            opc: [0; 16],
        };
        m.opc = xor16(&m.encrypt(op), op);
        m
    }

    pub fn with_opc(key: &Key128, opc: &[u8; 16]) -> Self {
        Milenage {
            cipher: Aes128::new(GenericArray::from_slice(key)),
            opc: *opc,
        }
    }

    pub fn opc(&self) -> &[u8; 16] {
        &self.opc
    }

    fn encrypt(&self, input: &[u8; 16]) -> [u8; 16] {
        let mut block = GenericArray::clone_from_slice(input);
        self.cipher.encrypt_block(&mut block);
        block.into()
    }

    fn temp(&self, rand: &[u8; 16]) -> [u8; 16] {
        self.encrypt(&xor16(rand, &self.opc))
    }

    /// OUT1 = E_K(TEMP ^ rot(IN1 ^ OPc, r1=64) ^ c1) ^ OPc
    fn out1(&self, rand: &[u8; 16], sqn: u64, amf: u16) -> [u8; 16] {
        let temp = self.temp(rand);
        let sqn = encode_sqn(sqn);
        let amf = amf.to_be_bytes();
        let mut in1 = [0u8; 16];
        in1[..6].copy_from_slice(&sqn);
        in1[6..8].copy_from_slice(&amf);
        in1[8..14].copy_from_slice(&sqn);
        in1[14..].copy_from_slice(&amf);
        let input = xor16(&rot(&xor16(&in1, &self.opc), 8), &temp);
        xor16(&self.encrypt(&input), &self.opc)
    }

    /// OUTn = E_K(rot(TEMP ^ OPc, r) ^ c) ^ OPc for n in 2..=5, where the
    /// constant `c` has its single set bit at `c_bit` of the last octet.
    fn out_n(&self, temp: &[u8; 16], rot_bytes: usize, c_bit: u8) -> [u8; 16] {
        let mut input = rot(&xor16(temp, &self.opc), rot_bytes);
        input[15] ^= c_bit;
        xor16(&self.encrypt(&input), &self.opc)
    }

    /// Network authentication code MAC-A.
    pub fn f1(&self, rand: &[u8; 16], sqn: u64, amf: u16) -> [u8; 8] {
        self.out1(rand, sqn, amf)[..8].try_into().unwrap()
    }

    /// Resynchronisation code MAC-S.
    pub fn f1_star(&self, rand: &[u8; 16], sqn: u64, amf: u16) -> [u8; 8] {
        self.out1(rand, sqn, amf)[8..].try_into().unwrap()
    }

    /// `(RES, CK, IK, AK)`.
    pub fn f2345(&self, rand: &[u8; 16]) -> ([u8; 8], [u8; 16], [u8; 16], [u8; 6]) {
        let temp = self.temp(rand);
        let out2 = self.out_n(&temp, 0, 1);
        let ck = self.out_n(&temp, 4, 2);
        let ik = self.out_n(&temp, 8, 4);
        (
            out2[8..].try_into().unwrap(),
            ck,
            ik,
            out2[..6].try_into().unwrap(),
        )
    }

    pub fn f5_star(&self, rand: &[u8; 16]) -> [u8; 6] {
        let temp = self.temp(rand);
        self.out_n(&temp, 12, 8)[..6].try_into().unwrap()
    }

    pub fn compute(&self, rand: &[u8; 16], sqn: u64, amf: u16) -> MilenageOutput {
        let (res, ck, ik, ak) = self.f2345(rand);
        MilenageOutput {
            mac: self.f1(rand, sqn, amf),
            res,
            ck,
            ik,
            ak,
        }
    }
}

/// All five functions under the build's fixed OP.
pub fn milenage(key: &Key128, rand: &[u8; 16], sqn: u64, amf: u16) -> MilenageOutput {
    Milenage::with_op(key, &DEFAULT_OP).compute(rand, sqn, amf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_empty() {
        assert_eq!(
            hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn hmac40_is_prefix() {
        let d = hmac(b"k", b"m");
        let top = hmac40(b"k", b"m");
        assert_eq!(top, u64::from_be_bytes([0, 0, 0, d.0[0], d.0[1], d.0[2], d.0[3], d.0[4]]));
        assert_eq!(top40(&[0x12, 0x34, 0x56, 0x78, 0x9a, 0xbc]), 0x12_3456_789a);
        assert_eq!(top40(&[0; 8]), 0);
    }

    #[test]
    fn sqn_codec() {
        assert_eq!(encode_sqn(0x0102_0304_0506), [1, 2, 3, 4, 5, 6]);
        assert_eq!(decode_sqn(encode_sqn(SQN_MAX)), SQN_MAX);
    }

    #[test]
    fn prng_prefix_and_length() {
        let long = prng_expand(b"seed", 70);
        assert_eq!(long.len(), 70);
        assert_eq!(&long[..16], &prng_expand(b"seed", 16)[..]);
        assert_eq!(&long[..32], &prng_expand(b"seed", 32)[..]);
        assert_ne!(prng_expand(b"seed", 16), prng_expand(b"seee", 16));
    }

    #[test]
    fn ak_conceals_sqn() {
        let out = milenage(&[1; 16], &[2; 16], 0x1234, 0x8000);
        let sqn = encode_sqn(0x1234);
        let concealed: [u8; 6] = std::array::from_fn(|i| sqn[i] ^ out.ak[i]);
        let back: [u8; 6] = std::array::from_fn(|i| concealed[i] ^ out.ak[i]);
        assert_eq!(decode_sqn(back), 0x1234);
    }
}
