//! Deterministic randomness shared by every generator in the crate.
//!
//! Two primitives live here:
//!
//! * [`extract`] turns a password and a public salt into a [`Seed`] using
//!   HKDF-SHA256 with a fixed context label.
//! * [`RandomStream`] expands a seed into a ChaCha20 keystream. Every draw
//!   helper consumes exactly eight bytes so that generated layouts stay stable
//!   across platforms and implementations.
//!
//! The byte-level layout is pinned in `FORMATS.md` at the repository root.

use std::fmt;

use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use thiserror::Error;

/// Default security parameter in bits.
pub const DEFAULT_SEED_BITS: usize = 256;
/// Smallest accepted seed length in bits.
pub const MIN_SEED_BITS: usize = 128;
/// Largest accepted seed length in bits.
pub const MAX_SEED_BITS: usize = 512;

/// HKDF `info` for the password extractor.
pub const EXTRACT_LABEL: &[u8] = b"gotcha/v1/extract";
/// Label of the general purpose stream returned by [`RandomStream::from_seed`].
pub const STREAM_LABEL: &[u8] = b"gotcha/v1/stream";

/// Bytes consumed by every fixed-width draw.
pub const DRAW_BYTES: u64 = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeedError {
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("seed length {0} bits is not a multiple of 8 in [{MIN_SEED_BITS}, {MAX_SEED_BITS}]")]
    InvalidLength(usize),
    #[error("seed is not valid hex: {0}")]
    InvalidHex(String),
}

/// A fixed-length random or derived bit string.
///
/// The `Debug` impl never prints the bytes; seeds double as key material.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Seed(Vec<u8>);

impl Seed {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Result<Self, SeedError> {
        let bytes = bytes.into();
        check_bits(bytes.len() * 8)?;
        Ok(Seed(bytes))
    }

    pub fn from_hex(text: &str) -> Result<Self, SeedError> {
        let bytes = hex::decode(text.trim()).map_err(|e| SeedError::InvalidHex(e.to_string()))?;
        Self::from_bytes(bytes)
    }

    /// Fresh seed of `bits` bits from a cryptographic generator.
    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R, bits: usize) -> Result<Self, SeedError> {
        check_bits(bits)?;
        let mut bytes = vec![0u8; bits / 8];
        rng.fill_bytes(&mut bytes);
        Ok(Seed(bytes))
    }

    /// Fresh seed drawn from a stream; used where generation must be replayable.
    pub fn from_stream(stream: &mut RandomStream, bits: usize) -> Result<Self, SeedError> {
        check_bits(bits)?;
        let mut bytes = vec![0u8; bits / 8];
        stream.fill_bytes(&mut bytes);
        Ok(Seed(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn bits(&self) -> usize {
        self.0.len() * 8
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed(<{} bits>)", self.bits())
    }
}

fn check_bits(bits: usize) -> Result<(), SeedError> {
    if bits % 8 != 0 || !(MIN_SEED_BITS..=MAX_SEED_BITS).contains(&bits) {
        return Err(SeedError::InvalidLength(bits));
    }
    Ok(())
}

/// Password extractor: `HKDF-SHA256(salt = public_salt, ikm = password, info = EXTRACT_LABEL)`.
///
/// The output has the same length as `public_salt`, so both carry the
/// configured security parameter.
pub fn extract(password: &str, public_salt: &Seed) -> Result<Seed, SeedError> {
    if password.is_empty() {
        return Err(SeedError::EmptyPassword);
    }
    let hk = Hkdf::<Sha256>::new(Some(public_salt.as_bytes()), password.as_bytes());
    let mut out = vec![0u8; public_salt.as_bytes().len()];
    hk.expand(EXTRACT_LABEL, &mut out)
        .expect("seed lengths are far below the HKDF output limit");
    Ok(Seed(out))
}

/// Counter-mode pseudorandom stream over a seed.
///
/// The keystream is ChaCha20 (20 rounds, zero nonce, block counter from zero)
/// keyed with `HMAC-SHA256(key = seed, msg = label)`. Distinct labels give
/// independent streams from one seed.
#[derive(Clone)]
pub struct RandomStream {
    rng: ChaCha20Rng,
    consumed: u64,
}

impl RandomStream {
    /// `stream_from`: the general purpose stream of a seed, positioned at draw 0.
    pub fn from_seed(seed: &Seed) -> Self {
        Self::derive(seed, STREAM_LABEL)
    }

    /// Stream for a labelled purpose.
    pub fn derive(seed: &Seed, label: &[u8]) -> Self {
        let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(seed.as_bytes())
            .expect("HMAC accepts keys of any length");
        mac.update(label);
        let key: [u8; 32] = mac.finalize().into_bytes().into();
        RandomStream {
            rng: ChaCha20Rng::from_seed(key),
            consumed: 0,
        }
    }

    /// Number of keystream bytes handed out so far.
    pub fn bytes_consumed(&self) -> u64 {
        self.consumed
    }

    /// Number of eight-byte draws handed out so far (partial draws round down).
    pub fn draw_index(&self) -> u64 {
        self.consumed / DRAW_BYTES
    }

    pub fn fill_bytes(&mut self, buf: &mut [u8]) {
        self.rng.fill_bytes(buf);
        self.consumed += buf.len() as u64;
    }

    /// Eight keystream bytes read little-endian.
    pub fn next_u64(&mut self) -> u64 {
        let mut buf = [0u8; 8];
        self.fill_bytes(&mut buf);
        u64::from_le_bytes(buf)
    }

    /// Integer in `0..bound` via a 64x64 multiply-high of one draw.
    ///
    /// No rejection loop, so consumption is always eight bytes. The bias is
    /// below `bound / 2^64`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Real in `[0, 1)` from the top 53 bits of one draw.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Rotation angle in `[0, pi)`.
    pub fn angle(&mut self) -> f64 {
        self.unit() * std::f64::consts::PI
    }

    /// Index into a palette of `len` colors.
    pub fn color_index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Bernoulli trial with success probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

impl fmt::Debug for RandomStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RandomStream").field("consumed", &self.consumed).finish()
    }
}
