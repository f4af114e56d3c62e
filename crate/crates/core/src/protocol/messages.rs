//! Fixed binary layouts: one tag octet, the transaction id (u64), then the
//! fields in declaration order, big-endian, fixed widths. A k-set is `k` as
//! u16 followed by `k` 11-octet identities.

use crate::crypto::{decode_sqn, Digest};
use crate::error::{Error, Result};
use crate::identity::IDENTITY_LEN;
use crate::kset::KSetWire;

use super::{AuthFailure, TxId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttachRequest {
    pub tx: TxId,
    pub kset: KSetWire,
    pub h0: Digest,
    pub dest_id: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardedRequest {
    pub tx: TxId,
    pub kset: KSetWire,
    pub h0: Digest,
    pub sn_id: u32,
}

/// `(SQN ^ AK) || AMF || MAC`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthToken {
    pub concealed_sqn: [u8; 6],
    pub amf: u16,
    pub mac: [u8; 8],
}

impl AuthToken {
    pub const LEN: usize = 16;

    pub fn encode(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..6].copy_from_slice(&self.concealed_sqn);
        out[6..8].copy_from_slice(&self.amf.to_be_bytes());
        out[8..].copy_from_slice(&self.mac);
        out
    }

    pub fn decode(bytes: &[u8; 16]) -> Self {
        AuthToken {
            concealed_sqn: bytes[..6].try_into().unwrap(),
            amf: u16::from_be_bytes([bytes[6], bytes[7]]),
            mac: bytes[8..].try_into().unwrap(),
        }
    }

    /// Recovers SQN given the anonymity key.
    pub fn reveal_sqn(&self, ak: &[u8; 6]) -> u64 {
        decode_sqn(std::array::from_fn(|i| self.concealed_sqn[i] ^ ak[i]))
    }
}

/// `RAND || XRES || K_ASME || AUTH`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthVector {
    pub rand: [u8; 16],
    pub xres: [u8; 8],
    pub k_asme: [u8; 32],
    pub auth: AuthToken,
}

impl AuthVector {
    pub const LEN: usize = 16 + 8 + 32 + AuthToken::LEN;

    pub fn encode(&self) -> [u8; Self::LEN] {
        let mut out = [0u8; Self::LEN];
        out[..16].copy_from_slice(&self.rand);
        out[16..24].copy_from_slice(&self.xres);
        out[24..56].copy_from_slice(&self.k_asme);
        out[56..].copy_from_slice(&self.auth.encode());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::LEN {
            return Err(Error::MalformedMessage(format!(
                "AV is {} octets, got {}",
                Self::LEN,
                bytes.len()
            )));
        }
        Ok(AuthVector {
            rand: bytes[..16].try_into().unwrap(),
            xres: bytes[16..24].try_into().unwrap(),
            k_asme: bytes[24..56].try_into().unwrap(),
            auth: AuthToken::decode(bytes[56..].try_into().unwrap()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthChallenge {
    pub tx: TxId,
    pub rand: [u8; 16],
    pub auth: AuthToken,
    /// 3-bit key set identifier.
    pub ksi_asme: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Attach(AttachRequest),
    Forward(ForwardedRequest),
    Vector { tx: TxId, av: AuthVector },
    IdentificationFailed { tx: TxId },
    Challenge(AuthChallenge),
    Response { tx: TxId, res: [u8; 8] },
    Complete { tx: TxId },
    Reject { tx: TxId, cause: AuthFailure },
    Abort { tx: TxId, cause: AuthFailure },
    Confirm { tx: TxId, accepted: bool },
    Assistants { tx: TxId, members: KSetWire },
}

const TAG_ATTACH: u8 = 1;
const TAG_FORWARD: u8 = 2;
const TAG_VECTOR: u8 = 3;
const TAG_IDENT_FAILED: u8 = 4;
const TAG_CHALLENGE: u8 = 5;
const TAG_RESPONSE: u8 = 6;
const TAG_COMPLETE: u8 = 7;
const TAG_REJECT: u8 = 8;
const TAG_ABORT: u8 = 9;
const TAG_CONFIRM: u8 = 10;
const TAG_ASSISTANTS: u8 = 11;

impl Message {
    pub fn tx(&self) -> TxId {
        match self {
            Message::Attach(m) => m.tx,
            Message::Forward(m) => m.tx,
            Message::Challenge(m) => m.tx,
            Message::Vector { tx, .. }
            | Message::IdentificationFailed { tx }
            | Message::Response { tx, .. }
            | Message::Complete { tx }
            | Message::Reject { tx, .. }
            | Message::Abort { tx, .. }
            | Message::Confirm { tx, .. }
            | Message::Assistants { tx, .. } => *tx,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Attach(_) => "attach",
            Message::Forward(_) => "forward",
            Message::Vector { .. } => "vector",
            Message::IdentificationFailed { .. } => "ident-failed",
            Message::Challenge(_) => "challenge",
            Message::Response { .. } => "response",
            Message::Complete { .. } => "complete",
            Message::Reject { .. } => "reject",
            Message::Abort { .. } => "abort",
            Message::Confirm { .. } => "confirm",
            Message::Assistants { .. } => "assistants",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        let head = |out: &mut Vec<u8>, tag: u8, tx: TxId| {
            out.push(tag);
            out.extend_from_slice(&tx.to_be_bytes());
        };
        match self {
            Message::Attach(m) => {
                head(&mut out, TAG_ATTACH, m.tx);
                out.extend_from_slice(&m.kset.encode());
                out.extend_from_slice(m.h0.as_bytes());
                out.extend_from_slice(&m.dest_id.to_be_bytes());
            }
            Message::Forward(m) => {
                head(&mut out, TAG_FORWARD, m.tx);
                out.extend_from_slice(&m.kset.encode());
                out.extend_from_slice(m.h0.as_bytes());
                out.extend_from_slice(&m.sn_id.to_be_bytes());
            }
            Message::Vector { tx, av } => {
                head(&mut out, TAG_VECTOR, *tx);
                out.extend_from_slice(&av.encode());
            }
            Message::IdentificationFailed { tx } => head(&mut out, TAG_IDENT_FAILED, *tx),
            Message::Challenge(c) => {
                head(&mut out, TAG_CHALLENGE, c.tx);
                out.extend_from_slice(&c.rand);
                out.extend_from_slice(&c.auth.encode());
                out.push(c.ksi_asme);
            }
            Message::Response { tx, res } => {
                head(&mut out, TAG_RESPONSE, *tx);
                out.extend_from_slice(res);
            }
            Message::Complete { tx } => head(&mut out, TAG_COMPLETE, *tx),
            Message::Reject { tx, cause } => {
                head(&mut out, TAG_REJECT, *tx);
                out.push(cause.code());
            }
            Message::Abort { tx, cause } => {
                head(&mut out, TAG_ABORT, *tx);
                out.push(cause.code());
            }
            Message::Confirm { tx, accepted } => {
                head(&mut out, TAG_CONFIRM, *tx);
                out.push(u8::from(*accepted));
            }
            Message::Assistants { tx, members } => {
                head(&mut out, TAG_ASSISTANTS, *tx);
                out.extend_from_slice(&members.encode());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let tag = r.u8()?;
        let tx = u64::from_be_bytes(r.array()?);
        let msg = match tag {
            TAG_ATTACH => Message::Attach(AttachRequest {
                tx,
                kset: r.kset()?,
                h0: Digest(r.array()?),
                dest_id: u32::from_be_bytes(r.array()?),
            }),
            TAG_FORWARD => Message::Forward(ForwardedRequest {
                tx,
                kset: r.kset()?,
                h0: Digest(r.array()?),
                sn_id: u32::from_be_bytes(r.array()?),
            }),
            TAG_VECTOR => Message::Vector {
                tx,
                av: AuthVector::decode(r.take(AuthVector::LEN)?)?,
            },
            TAG_IDENT_FAILED => Message::IdentificationFailed { tx },
            TAG_CHALLENGE => {
                let rand = r.array()?;
                let auth = AuthToken::decode(&r.array()?);
                let ksi_asme = r.u8()?;
                if ksi_asme > 7 {
                    return Err(Error::MalformedMessage("KSI_ASME exceeds 3 bits".into()));
                }
                Message::Challenge(AuthChallenge {
                    tx,
                    rand,
                    auth,
                    ksi_asme,
                })
            }
            TAG_RESPONSE => Message::Response {
                tx,
                res: r.array()?,
            },
            TAG_COMPLETE => Message::Complete { tx },
            TAG_REJECT => Message::Reject {
                tx,
                cause: r.cause()?,
            },
            TAG_ABORT => Message::Abort {
                tx,
                cause: r.cause()?,
            },
            TAG_CONFIRM => Message::Confirm {
                tx,
                accepted: match r.u8()? {
                    0 => false,
                    1 => true,
                    v => return Err(Error::MalformedMessage(format!("confirm flag {v}"))),
                },
            },
            TAG_ASSISTANTS => Message::Assistants {
                tx,
                members: r.kset()?,
            },
            other => return Err(Error::MalformedMessage(format!("unknown tag {other}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::MalformedMessage(format!(
                "{} trailing octets",
                bytes.len() - r.pos
            )));
        }
        Ok(msg)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::MalformedMessage("truncated".into()));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn kset(&mut self) -> Result<KSetWire> {
        let k = usize::from(u16::from_be_bytes(self.array()?));
        self.pos -= 2;
        KSetWire::decode(self.take(2 + k * IDENTITY_LEN)?)
    }

    fn cause(&mut self) -> Result<AuthFailure> {
        let code = self.u8()?;
        AuthFailure::from_code(code)
            .ok_or_else(|| Error::MalformedMessage(format!("unknown failure cause {code}")))
    }
}
