//! ZUC-128 keystream generator.
//!
//! Three layers: a 16-cell LFSR over GF(2^31 - 1), a bit-reorganization step
//! that draws four 32-bit words from eight cells, and the nonlinear function
//! F with two 32-bit memory cells. Only the raw keystream is exposed.

const MASK31: u32 = 0x7fff_ffff;

/// Key-loading constants (15 bits each).
const KEY_LOAD_D: [u32; 16] = [
    0x44d7, 0x26bc, 0x626b, 0x135e, 0x5789, 0x35e2, 0x7135, 0x09af, 0x4d78, 0x2f13, 0x6bc4,
    0x1af1, 0x5e26, 0x3c4d, 0x789a, 0x47ac,
];

const S0: [u8; 256] = [
    0x3e, 0x72, 0x5b, 0x47, 0xca, 0xe0, 0x00, 0x33, 0x04, 0xd1, 0x54, 0x98, 0x09, 0xb9, 0x6d, 0xcb,
    0x7b, 0x1b, 0xf9, 0x32, 0xaf, 0x9d, 0x6a, 0xa5, 0xb8, 0x2d, 0xfc, 0x1d, 0x08, 0x53, 0x03, 0x90,
    0x4d, 0x4e, 0x84, 0x99, 0xe4, 0xce, 0xd9, 0x91, 0xdd, 0xb6, 0x85, 0x48, 0x8b, 0x29, 0x6e, 0xac,
    0xcd, 0xc1, 0xf8, 0x1e, 0x73, 0x43, 0x69, 0xc6, 0xb5, 0xbd, 0xfd, 0x39, 0x63, 0x20, 0xd4, 0x38,
    0x76, 0x7d, 0xb2, 0xa7, 0xcf, 0xed, 0x57, 0xc5, 0xf3, 0x2c, 0xbb, 0x14, 0x21, 0x06, 0x55, 0x9b,
    0xe3, 0xef, 0x5e, 0x31, 0x4f, 0x7f, 0x5a, 0xa4, 0x0d, 0x82, 0x51, 0x49, 0x5f, 0xba, 0x58, 0x1c,
    0x4a, 0x16, 0xd5, 0x17, 0xa8, 0x92, 0x24, 0x1f, 0x8c, 0xff, 0xd8, 0xae, 0x2e, 0x01, 0xd3, 0xad,
    0x3b, 0x4b, 0xda, 0x46, 0xeb, 0xc9, 0xde, 0x9a, 0x8f, 0x87, 0xd7, 0x3a, 0x80, 0x6f, 0x2f, 0xc8,
    0xb1, 0xb4, 0x37, 0xf7, 0x0a, 0x22, 0x13, 0x28, 0x7c, 0xcc, 0x3c, 0x89, 0xc7, 0xc3, 0x96, 0x56,
    0x07, 0xbf, 0x7e, 0xf0, 0x0b, 0x2b, 0x97, 0x52, 0x35, 0x41, 0x79, 0x61, 0xa6, 0x4c, 0x10, 0xfe,
    0xbc, 0x26, 0x95, 0x88, 0x8a, 0xb0, 0xa3, 0xfb, 0xc0, 0x18, 0x94, 0xf2, 0xe1, 0xe5, 0xe9, 0x5d,
    0xd0, 0xdc, 0x11, 0x66, 0x64, 0x5c, 0xec, 0x59, 0x42, 0x75, 0x12, 0xf5, 0x74, 0x9c, 0xaa, 0x23,
    0x0e, 0x86, 0xab, 0xbe, 0x2a, 0x02, 0xe7, 0x67, 0xe6, 0x44, 0xa2, 0x6c, 0xc2, 0x93, 0x9f, 0xf1,
    0xf6, 0xfa, 0x36, 0xd2, 0x50, 0x68, 0x9e, 0x62, 0x71, 0x15, 0x3d, 0xd6, 0x40, 0xc4, 0xe2, 0x0f,
    0x8e, 0x83, 0x77, 0x6b, 0x25, 0x05, 0x3f, 0x0c, 0x30, 0xea, 0x70, 0xb7, 0xa1, 0xe8, 0xa9, 0x65,
    0x8d, 0x27, 0x1a, 0xdb, 0x81, 0xb3, 0xa0, 0xf4, 0x45, 0x7a, 0x19, 0xdf, 0xee, 0x78, 0x34, 0x60,
];

const S1: [u8; 256] = [
    0x55, 0xc2, 0x63, 0x71, 0x3b, 0xc8, 0x47, 0x86, 0x9f, 0x3c, 0xda, 0x5b, 0x29, 0xaa, 0xfd, 0x77,
    0x8c, 0xc5, 0x94, 0x0c, 0xa6, 0x1a, 0x13, 0x00, 0xe3, 0xa8, 0x16, 0x72, 0x40, 0xf9, 0xf8, 0x42,
    0x44, 0x26, 0x68, 0x96, 0x81, 0xd9, 0x45, 0x3e, 0x10, 0x76, 0xc6, 0xa7, 0x8b, 0x39, 0x43, 0xe1,
    0x3a, 0xb5, 0x56, 0x2a, 0xc0, 0x6d, 0xb3, 0x05, 0x22, 0x66, 0xbf, 0xdc, 0x0b, 0xfa, 0x62, 0x48,
    0xdd, 0x20, 0x11, 0x06, 0x36, 0xc9, 0xc1, 0xcf, 0xf6, 0x27, 0x52, 0xbb, 0x69, 0xf5, 0xd4, 0x87,
    0x7f, 0x84, 0x4c, 0xd2, 0x9c, 0x57, 0xa4, 0xbc, 0x4f, 0x9a, 0xdf, 0xfe, 0xd6, 0x8d, 0x7a, 0xeb,
    0x2b, 0x53, 0xd8, 0x5c, 0xa1, 0x14, 0x17, 0xfb, 0x23, 0xd5, 0x7d, 0x30, 0x67, 0x73, 0x08, 0x09,
    0xee, 0xb7, 0x70, 0x3f, 0x61, 0xb2, 0x19, 0x8e, 0x4e, 0xe5, 0x4b, 0x93, 0x8f, 0x5d, 0xdb, 0xa9,
    0xad, 0xf1, 0xae, 0x2e, 0xcb, 0x0d, 0xfc, 0xf4, 0x2d, 0x46, 0x6e, 0x1d, 0x97, 0xe8, 0xd1, 0xe9,
    0x4d, 0x37, 0xa5, 0x75, 0x5e, 0x83, 0x9e, 0xab, 0x82, 0x9d, 0xb9, 0x1c, 0xe0, 0xcd, 0x49, 0x89,
    0x01, 0xb6, 0xbd, 0x58, 0x24, 0xa2, 0x5f, 0x38, 0x78, 0x99, 0x15, 0x90, 0x50, 0xb8, 0x95, 0xe4,
    0xd0, 0x91, 0xc7, 0xce, 0xed, 0x0f, 0xb4, 0x6f, 0xa0, 0xcc, 0xf0, 0x02, 0x4a, 0x79, 0xc3, 0xde,
    0xa3, 0xef, 0xea, 0x51, 0xe6, 0x6b, 0x18, 0xec, 0x1b, 0x2c, 0x80, 0xf7, 0x74, 0xe7, 0xff, 0x21,
    0x5a, 0x6a, 0x54, 0x1e, 0x41, 0x31, 0x92, 0x35, 0xc4, 0x33, 0x07, 0x0a, 0xba, 0x7e, 0x0e, 0x34,
    0x88, 0xb1, 0x98, 0x7c, 0xf3, 0x3d, 0x60, 0x6c, 0x7b, 0xca, 0xd3, 0x1f, 0x32, 0x65, 0x04, 0x28,
    0x64, 0xbe, 0x85, 0x9b, 0x2f, 0x59, 0x8a, 0xd7, 0xb0, 0x25, 0xac, 0xaf, 0x12, 0x03, 0xe2, 0xf2,
];

#[inline]
fn add_mod31(a: u32, b: u32) -> u32 {
    let c = a.wrapping_add(b);
    (c & MASK31) + (c >> 31)
}

#[inline]
fn rot31(a: u32, k: u32) -> u32 {
    ((a << k) | (a >> (31 - k))) & MASK31
}

#[inline]
fn l1(x: u32) -> u32 {
    x ^ x.rotate_left(2) ^ x.rotate_left(10) ^ x.rotate_left(18) ^ x.rotate_left(24)
}

#[inline]
fn l2(x: u32) -> u32 {
    x ^ x.rotate_left(8) ^ x.rotate_left(14) ^ x.rotate_left(22) ^ x.rotate_left(30)
}

#[inline]
fn sbox(x: u32) -> u32 {
    let b = x.to_be_bytes();
    u32::from_be_bytes([
        S0[b[0] as usize],
        S1[b[1] as usize],
        S0[b[2] as usize],
        S1[b[3] as usize],
    ])
}

/// Internal state of one ZUC instance.
///
/// Single-owner; clone it to fork a keystream.
#[derive(Clone, PartialEq, Eq)]
pub struct ZucState {
    lfsr: [u32; 16],
    r1: u32,
    r2: u32,
    words_emitted: u64,
}

impl std::fmt::Debug for ZucState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // key-derived material stays out of logs
        f.debug_struct("ZucState")
            .field("words_emitted", &self.words_emitted)
            .finish_non_exhaustive()
    }
}

impl ZucState {
    /// Loads `key` and `iv` and runs the 32 initialization rounds plus the
    /// discarded first working step.
    pub fn new(key: &[u8; 16], iv: &[u8; 16]) -> Self {
        let mut lfsr = [0u32; 16];
        for (i, cell) in lfsr.iter_mut().enumerate() {
            *cell = (u32::from(key[i]) << 23) | (KEY_LOAD_D[i] << 8) | u32::from(iv[i]);
        }
        let mut state = ZucState {
            lfsr,
            r1: 0,
            r2: 0,
            words_emitted: 0,
        };
        for _ in 0..32 {
            let [x0, x1, x2, _] = state.bit_reorganization();
            let w = state.nonlinear_f(x0, x1, x2);
            state.lfsr_step(Some(w >> 1));
        }
        let [x0, x1, x2, _] = state.bit_reorganization();
        state.nonlinear_f(x0, x1, x2);
        state.lfsr_step(None);
        state
    }

    /// Emits the next keystream word `Z = W ^ X3`.
    pub fn next_word(&mut self) -> u32 {
        let [x0, x1, x2, x3] = self.bit_reorganization();
        let z = self.nonlinear_f(x0, x1, x2) ^ x3;
        self.lfsr_step(None);
        self.words_emitted += 1;
        z
    }

    /// Emits `n` successive keystream words.
    pub fn keystream(&mut self, n: usize) -> Vec<u32> {
        (0..n).map(|_| self.next_word()).collect()
    }

    /// Discards `n` words.
    pub fn skip(&mut self, n: u64) {
        for _ in 0..n {
            self.next_word();
        }
    }

    pub fn words_emitted(&self) -> u64 {
        self.words_emitted
    }

    pub fn lfsr(&self) -> &[u32; 16] {
        &self.lfsr
    }

    fn bit_reorganization(&self) -> [u32; 4] {
        let s = &self.lfsr;
        [
            ((s[15] & 0x7fff_8000) << 1) | (s[14] & 0xffff),
            ((s[11] & 0xffff) << 16) | (s[9] >> 15),
            ((s[7] & 0xffff) << 16) | (s[5] >> 15),
            ((s[2] & 0xffff) << 16) | (s[0] >> 15),
        ]
    }

    fn nonlinear_f(&mut self, x0: u32, x1: u32, x2: u32) -> u32 {
        let w = (x0 ^ self.r1).wrapping_add(self.r2);
        let w1 = self.r1.wrapping_add(x1);
        let w2 = self.r2 ^ x2;
        self.r1 = sbox(l1((w1 << 16) | (w2 >> 16)));
        self.r2 = sbox(l2((w2 << 16) | (w1 >> 16)));
        w
    }

    /// One LFSR clock. `Some(u)` is initialization mode (feedback plus `u`).
    fn lfsr_step(&mut self, u: Option<u32>) {
        let s = &mut self.lfsr;
        let mut v = s[0];
        v = add_mod31(v, rot31(s[0], 8));
        v = add_mod31(v, rot31(s[4], 20));
        v = add_mod31(v, rot31(s[10], 21));
        v = add_mod31(v, rot31(s[13], 17));
        v = add_mod31(v, rot31(s[15], 15));
        if let Some(u) = u {
            v = add_mod31(v, u);
        }
        if v == 0 {
            v = MASK31;
        }
        s.copy_within(1.., 0);
        s[15] = v;
    }
}

impl Iterator for ZucState {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        Some(self.next_word())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex16(s: &str) -> [u8; 16] {
        hex::decode(s).unwrap().try_into().unwrap()
    }

    #[test]
    fn all_zero_vector() {
        let mut z = ZucState::new(&[0; 16], &[0; 16]);
        assert_eq!(z.keystream(2), vec![0x27bede74, 0x018082da]);
    }

    #[test]
    fn all_ones_vector() {
        let mut z = ZucState::new(&[0xff; 16], &[0xff; 16]);
        assert_eq!(z.keystream(2), vec![0x0657cfa0, 0x7096398b]);
    }

    #[test]
    fn random_key_vector() {
        let key = hex16("3d4c4be96a82fdaeb58f641db17b455b");
        let iv = hex16("84319aa8de6915ca1f6bda6bfbd8c766");
        let mut z = ZucState::new(&key, &iv);
        assert_eq!(z.keystream(2), vec![0x14f1c272, 0x3279c419]);
    }

    #[test]
    fn long_vector() {
        let key = hex16("4d320bfad4c285bfd6b8bd00f39d8b41");
        let iv = hex16("52959daba0bf176ece2dc315049eb574");
        let mut z = ZucState::new(&key, &iv);
        let ks = z.keystream(2000);
        assert_eq!(ks[0], 0xed4400e7);
        assert_eq!(ks[1], 0x0633e5c5);
        assert_eq!(ks[1999], 0x7a574cdb);
    }

    #[test]
    fn counter_and_determinism() {
        let a = ZucState::new(&[7; 16], &[9; 16]);
        let mut b = a.clone();
        assert_eq!(a, ZucState::new(&[7; 16], &[9; 16]));
        assert_eq!(b.words_emitted(), 0);
        let w1 = b.next_word();
        assert_eq!(b.words_emitted(), 1);
        let w2 = b.next_word();
        assert_eq!(b.words_emitted(), 2);
        assert_ne!(w1, w2);
    }

    #[test]
    fn keystream_matches_repeated_next() {
        let mut a = ZucState::new(&[3; 16], &[4; 16]);
        let mut b = a.clone();
        assert!(a.clone().keystream(0).is_empty());
        let batch = a.keystream(3);
        assert_eq!(batch, vec![b.next_word(), b.next_word(), b.next_word()]);
    }
}
