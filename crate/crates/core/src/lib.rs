//! Variable k-pseudonym anonymous access authentication.
//!
//! UE and HSS derive a synchronized sequence of shared pseudonyms from a ZUC
//! keystream keyed by the subscriber key and seeded by an AKA sequence number.
//! The UE hides its live pseudonym in a set of k identities; the HSS finds it
//! by keyed-hash traversal. The crate also carries the static k-pseudonym
//! baseline and a passive adversary (intersection and mark attacks) for
//! comparing the two.

pub mod adversary;
pub mod baseline;
pub mod conformance;
pub mod crypto;
pub mod error;
pub mod identity;
pub mod kset;
pub mod protocol;
pub mod sim;
pub mod zuc;

pub use crate::crypto::{Digest, Key128, MilenageOutput};
pub use crate::error::{Error, Result};
pub use crate::identity::{IdentityKind, Imsi, Pseudonym, PseudonymChain};
pub use crate::kset::{AssistantPool, KSet, KSetWire};
pub use crate::zuc::ZucState;
