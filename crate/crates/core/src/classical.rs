//! Classical channel: a toy keyed stream cipher and a readable transcript.
//!
//! Every party shares a 64-bit secret key with the trusted server (parties
//! share no key with each other). Messages are encrypted with a keystream
//! XOR derived from the splitmix64 finalizer; the cipher is deliberately a
//! toy. It gives deterministic, involutive encryption for testing, not
//! security — the threat model grants or denies the eavesdropper plaintext
//! access by configuration, never by cryptanalysis.
//!
//! The transcript is append-only and stores ciphertext. The eavesdropper can
//! read every entry but cannot modify or remove one.

use alloc::vec::Vec;

use crate::rng::{mix64, GOLDEN_GAMMA};

/// Symmetric key shared between one party and the trusted server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecretKey(pub u64);

/// Protocol participants that can appear on the classical channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Alice,
    Bob,
    /// The trusted server distributing tamper specs and photon streams.
    Server,
}

impl Party {
    pub fn code(self) -> u8 {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
            Party::Server => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Party> {
        match code {
            0 => Some(Party::Alice),
            1 => Some(Party::Bob),
            2 => Some(Party::Server),
            _ => None,
        }
    }
}

/// Keystream XOR transform.
///
/// The keystream is generated 8 bytes at a time as
/// `mix64(key XOR nonce XOR (counter * GOLDEN_GAMMA))` with the counter
/// running 1, 2, 3, ... and each word emitted little-endian; with key and
/// nonce zero this is exactly the splitmix64 output stream from state 0.
/// XOR makes the transform involutive: applying it twice with the same
/// `(key, nonce)` restores the input.
pub fn keystream_transform(key: SecretKey, nonce: u64, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    let seed = key.0 ^ nonce;
    let mut counter: u64 = 0;
    for chunk in data.chunks(8) {
        counter += 1;
        let word = mix64(seed ^ counter.wrapping_mul(GOLDEN_GAMMA));
        let ks = word.to_le_bytes();
        for (i, &b) in chunk.iter().enumerate() {
            out.push(b ^ ks[i]);
        }
    }
    out
}

/// One encrypted message on the classical channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalMessage {
    pub sender: Party,
    pub receiver: Party,
    pub nonce: u64,
    pub ciphertext: Vec<u8>,
}

/// Append-only record of every classical message in one protocol run.
///
/// This is also the eavesdropper's view: she sees sender, receiver, nonce and
/// ciphertext of every entry, in order, but cannot alter them.
#[derive(Debug, Default, Clone)]
pub struct ChannelTranscript {
    messages: Vec<ClassicalMessage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TranscriptError {
    #[error("no message at transcript index {0}")]
    NoSuchMessage(usize),
}

impl ChannelTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Encrypt `plaintext` under `key` and append it. Returns the entry index.
    pub fn send(
        &mut self,
        sender: Party,
        receiver: Party,
        key: SecretKey,
        nonce: u64,
        plaintext: &[u8],
    ) -> usize {
        let ciphertext = keystream_transform(key, nonce, plaintext);
        self.messages.push(ClassicalMessage { sender, receiver, nonce, ciphertext });
        self.messages.len() - 1
    }

    /// Decrypt the entry at `index` with `key`.
    ///
    /// A wrong key is not detectable here — the stream cipher has no
    /// integrity — so the result is garbled plaintext that surfaces as a
    /// parse failure in the caller.
    pub fn receive(&self, index: usize, key: SecretKey) -> Result<Vec<u8>, TranscriptError> {
        let msg = self
            .messages
            .get(index)
            .ok_or(TranscriptError::NoSuchMessage(index))?;
        Ok(keystream_transform(key, msg.nonce, &msg.ciphertext))
    }

    /// Read-only view of all messages in send order (ciphertext form).
    pub fn messages(&self) -> &[ClassicalMessage] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// Field-list plaintext framing: `u32` field count, then each field as a
/// `u32` byte length followed by its bytes, all integers little-endian.
pub fn encode_fields(fields: &[&[u8]]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for field in fields {
        out.extend_from_slice(&(field.len() as u32).to_le_bytes());
        out.extend_from_slice(field);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FieldDecodeError {
    #[error("message truncated")]
    Truncated,
    #[error("message has trailing bytes")]
    TrailingBytes,
    #[error("implausible field count {0}")]
    ImplausibleCount(u32),
}

pub fn decode_fields(bytes: &[u8]) -> Result<Vec<Vec<u8>>, FieldDecodeError> {
    let mut cursor = bytes;
    let count = read_u32(&mut cursor)?;
    // Each field needs at least a length prefix.
    if count as usize > bytes.len() / 4 {
        return Err(FieldDecodeError::ImplausibleCount(count));
    }
    let mut fields = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut cursor)? as usize;
        if cursor.len() < len {
            return Err(FieldDecodeError::Truncated);
        }
        fields.push(cursor[..len].to_vec());
        cursor = &cursor[len..];
    }
    if !cursor.is_empty() {
        return Err(FieldDecodeError::TrailingBytes);
    }
    Ok(fields)
}

fn read_u32(cursor: &mut &[u8]) -> Result<u32, FieldDecodeError> {
    if cursor.len() < 4 {
        return Err(FieldDecodeError::Truncated);
    }
    let (head, rest) = cursor.split_at(4);
    *cursor = rest;
    Ok(u32::from_le_bytes(head.try_into().unwrap()))
}

/// Session-opening request: the initiator asks the server for an
/// authentication exchange with `peer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthRequest {
    pub initiator: Party,
    pub peer: Party,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RequestDecodeError {
    #[error(transparent)]
    Frame(#[from] FieldDecodeError),
    #[error("request must carry exactly two single-byte fields")]
    BadShape,
    #[error("unknown party code {0}")]
    UnknownParty(u8),
}

impl AuthRequest {
    pub fn encode(&self) -> Vec<u8> {
        encode_fields(&[&[self.initiator.code()], &[self.peer.code()]])
    }

    pub fn decode(bytes: &[u8]) -> Result<AuthRequest, RequestDecodeError> {
        let fields = decode_fields(bytes)?;
        let [initiator, peer] = fields.as_slice() else {
            return Err(RequestDecodeError::BadShape);
        };
        if initiator.len() != 1 || peer.len() != 1 {
            return Err(RequestDecodeError::BadShape);
        }
        Ok(AuthRequest {
            initiator: Party::from_code(initiator[0])
                .ok_or(RequestDecodeError::UnknownParty(initiator[0]))?,
            peer: Party::from_code(peer[0]).ok_or(RequestDecodeError::UnknownParty(peer[0]))?,
        })
    }
}
