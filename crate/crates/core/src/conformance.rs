//! Published test vectors and a runner that checks this crate against them.

use crate::crypto::{decode_sqn, hash, hmac, Milenage};
use crate::zuc::ZucState;

pub struct ZucVector {
    pub name: &'static str,
    pub key: &'static str,
    pub iv: &'static str,
    /// `(word index, expected word)`.
    pub words: &'static [(usize, u32)],
}

pub const ZUC_VECTORS: &[ZucVector] = &[
    ZucVector {
        name: "all-zero",
        key: "00000000000000000000000000000000",
        iv: "00000000000000000000000000000000",
        words: &[(0, 0x27bede74), (1, 0x018082da)],
    },
    ZucVector {
        name: "all-ones",
        key: "ffffffffffffffffffffffffffffffff",
        iv: "ffffffffffffffffffffffffffffffff",
        words: &[(0, 0x0657cfa0), (1, 0x7096398b)],
    },
    ZucVector {
        name: "random",
        key: "3d4c4be96a82fdaeb58f641db17b455b",
        iv: "84319aa8de6915ca1f6bda6bfbd8c766",
        words: &[(0, 0x14f1c272), (1, 0x3279c419)],
    },
    ZucVector {
        name: "long",
        key: "4d320bfad4c285bfd6b8bd00f39d8b41",
        iv: "52959daba0bf176ece2dc315049eb574",
        words: &[(0, 0xed4400e7), (1, 0x0633e5c5), (1999, 0x7a574cdb)],
    },
];

pub struct MilenageVector {
    pub set: u8,
    pub k: &'static str,
    pub op: &'static str,
    pub opc: &'static str,
    pub rand: &'static str,
    pub sqn: &'static str,
    pub amf: &'static str,
    pub mac: &'static str,
    pub mac_s: &'static str,
    pub res: &'static str,
    pub ck: &'static str,
    pub ik: &'static str,
    pub ak: &'static str,
    pub ak_s: &'static str,
}

pub const MILENAGE_VECTORS: &[MilenageVector] = &[
    MilenageVector {
        set: 1,
        k: "465b5ce8b199b49faa5f0a2ee238a6bc",
        op: "cdc202d5123e20f62b6d676ac72cb318",
        opc: "cd63cb71954a9f4e48a5994e37a02baf",
        rand: "23553cbe9637a89d218ae64dae47bf35",
        sqn: "ff9bb4d0b607",
        amf: "b9b9",
        mac: "4a9ffac354dfafb3",
        mac_s: "01cfaf9ec4e871e9",
        res: "a54211d5e3ba50bf",
        ck: "b40ba9a3c58b2a05bbf0d987b21bf8cb",
        ik: "f769bcd751044604127672711c6d3441",
        ak: "aa689c648370",
        ak_s: "451e8beca43b",
    },
    MilenageVector {
        set: 2,
        k: "0396eb317b6d1c36f19c1c84cd6ffd16",
        op: "ff53bade17df5d4e793073ce9d7579fa",
        opc: "53c15671c60a4b731c55b4a441c0bde2",
        rand: "c00d603103dcee52c4478119494202e8",
        sqn: "fd8eef40df7d",
        amf: "af17",
        mac: "5df5b31807e258b0",
        mac_s: "a8c016e51ef4a343",
        res: "d3a628ed988620f0",
        ck: "58c433ff7a7082acd424220f2b67c556",
        ik: "21a8c1f929702adb3e738488b9f5c5da",
        ak: "c47783995f72",
        ak_s: "30f1197061c1",
    },
    MilenageVector {
        set: 3,
        k: "fec86ba6eb707ed08905757b1bb44b8f",
        op: "dbc59adcb6f9a0ef735477b7fadf8374",
        opc: "1006020f0a478bf6b699f15c062e42b3",
        rand: "9f7c8d021accf4db213ccff0c7f71a6a",
        sqn: "9d0277595ffc",
        amf: "725c",
        mac: "9cabc3e99baf7281",
        mac_s: "95814ba2b3044324",
        res: "8011c48c0c214ed2",
        ck: "5dbdbb2954e8f3cde665b046179a5098",
        ik: "59a92d3b476a0443487055cf88b2307b",
        ak: "33484dc2136b",
        ak_s: "deacdd848cc6",
    },
    MilenageVector {
        set: 4,
        k: "9e5944aea94b81165c82fbf9f32db751",
        op: "223014c5806694c007ca1eeef57f004f",
        opc: "a64a507ae1a2a98bb88eb4210135dc87",
        rand: "ce83dbc54ac0274a157c17f80d017bd6",
        sqn: "0b604a81eca8",
        amf: "9e09",
        mac: "74a58220cba84c49",
        mac_s: "ac2cc74a96871837",
        res: "f365cd683cd92e96",
        ck: "e203edb3971574f5a94b0d61b816345d",
        ik: "0c4524adeac041c4dd830d20854fc46b",
        ak: "f0b9c08ad02e",
        ak_s: "6085a86c6f63",
    },
    MilenageVector {
        set: 5,
        k: "4ab1deb05ca6ceb051fc98e77d026a84",
        op: "2d16c5cd1fdf6b22383584e3bef2a8d8",
        opc: "dcf07cbd51855290b92a07a9891e523e",
        rand: "74b0cd6031a1c8339b2b6ce2b8c4a186",
        sqn: "e880a1b580b6",
        amf: "9f07",
        mac: "49e785dd12626ef2",
        mac_s: "9e85790336bb3fa2",
        res: "5860fc1bce351e7e",
        ck: "7657766b373d1c2138f307e3de9242f9",
        ik: "1c42e960d89b8fa99f2744e0708ccb53",
        ak: "31e11a609118",
        ak_s: "fe2555e54aa9",
    },
    MilenageVector {
        set: 6,
        k: "6c38a116ac280c454f59332ee35c8c4f",
        op: "1ba00a1a7c6700ac8c3ff3e96ad08725",
        opc: "3803ef5363b947c6aaa225e58fae3934",
        rand: "ee6466bc96202c5a557abbeff8babf63",
        sqn: "414b98222181",
        amf: "4464",
        mac: "078adfb488241a57",
        mac_s: "80246b8d0186bcf1",
        res: "16c8233f05a0ac28",
        ck: "3f8c7587fe8e4b233af676aede30ba3b",
        ik: "a7466cc1e6b2a1337d49d3b66e95d7b4",
        ak: "45b0f69ab06c",
        ak_s: "1f53cd2b1113",
    },
];

pub struct HmacVector {
    pub name: &'static str,
    pub key: &'static [u8],
    pub data: &'static [u8],
    pub mac: &'static str,
}

pub const HMAC_VECTORS: &[HmacVector] = &[
    HmacVector {
        name: "rfc4231-1",
        key: &[0x0b; 20],
        data: b"Hi There",
        mac: "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7",
    },
    HmacVector {
        name: "rfc4231-2",
        key: b"Jefe",
        data: b"what do ya want for nothing?",
        mac: "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843",
    },
    HmacVector {
        name: "rfc4231-3",
        key: &[0xaa; 20],
        data: &[0xdd; 50],
        mac: "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe",
    },
    HmacVector {
        name: "rfc4231-4",
        key: &[
            1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24,
            25,
        ],
        data: &[0xcd; 50],
        mac: "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b",
    },
];

pub const SHA256_ABC: &str = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

fn arr<const N: usize>(h: &str) -> [u8; N] {
    hex::decode(h)
        .expect("vector hex")
        .try_into()
        .expect("vector length")
}

pub fn check_zuc(v: &ZucVector) -> bool {
    let mut z = ZucState::new(&arr(v.key), &arr(v.iv));
    let last = v.words.iter().map(|w| w.0).max().unwrap_or(0);
    let ks = z.keystream(last + 1);
    v.words.iter().all(|&(i, w)| ks[i] == w)
}

pub fn check_milenage(v: &MilenageVector) -> bool {
    let m = Milenage::with_op(&arr(v.k), &arr(v.op));
    let rand = arr(v.rand);
    let sqn = decode_sqn(arr(v.sqn));
    let amf = u16::from_be_bytes(arr(v.amf));
    let (res, ck, ik, ak) = m.f2345(&rand);
    *m.opc() == arr::<16>(v.opc)
        && m.f1(&rand, sqn, amf) == arr::<8>(v.mac)
        && m.f1_star(&rand, sqn, amf) == arr::<8>(v.mac_s)
        && res == arr::<8>(v.res)
        && ck == arr::<16>(v.ck)
        && ik == arr::<16>(v.ik)
        && ak == arr::<6>(v.ak)
        && m.f5_star(&rand) == arr::<6>(v.ak_s)
}

pub fn check_hmac(v: &HmacVector) -> bool {
    hmac(v.key, v.data).to_hex() == v.mac
}

/// Every vector, in a fixed order.
pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    for v in ZUC_VECTORS {
        out.push(Check {
            name: format!("zuc/{}", v.name),
            pass: check_zuc(v),
        });
    }
    for v in MILENAGE_VECTORS {
        out.push(Check {
            name: format!("milenage/set{}", v.set),
            pass: check_milenage(v),
        });
    }
    out.push(Check {
        name: "sha256/abc".into(),
        pass: hash(b"abc").to_hex() == SHA256_ABC,
    });
    for v in HMAC_VECTORS {
        out.push(Check {
            name: format!("hmac-sha256/{}", v.name),
            pass: check_hmac(v),
        });
    }
    out
}
