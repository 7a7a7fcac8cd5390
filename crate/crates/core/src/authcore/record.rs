use std::sync::atomic::{AtomicU64, Ordering};

use pbkdf2::pbkdf2_hmac;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::AuthError;
use crate::gotcha::PuzzleParams;
use crate::matching::{enumerate_close, Permutation};
use crate::seedcore::Seed;

/// Domain label that opens every account hash input.
pub const ACCOUNT_HASH_LABEL: &[u8] = b"gotcha/v1/account-hash";
/// Domain label that opens every open-challenge hash input.
pub const CHALLENGE_HASH_LABEL: &[u8] = b"gotcha/v1/challenge-hash";
pub const DIGEST_BYTES: usize = 32;

/// Work factor of the slow hash: PBKDF2-HMAC-SHA256 with `2^level` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HashCost(u8);

impl HashCost {
    pub const MIN: HashCost = HashCost(0);
    pub const MAX: HashCost = HashCost(31);
    /// Service default. A `k = 10, alpha = 5` login then costs 13,264 x 256 iterations.
    pub const DEFAULT: HashCost = HashCost(8);
    /// Level used for published challenges.
    pub const HIGH: HashCost = HashCost(15);

    pub fn new(level: u8) -> Result<Self, AuthError> {
        if level > Self::MAX.0 {
            return Err(AuthError::InvalidHashCost(level));
        }
        Ok(HashCost(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn iterations(self) -> u32 {
        1u32 << self.0
    }
}

impl Default for HashCost {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn push_field(buf: &mut Vec<u8>, field: &[u8]) {
    buf.extend_from_slice(&(field.len() as u32).to_be_bytes());
    buf.extend_from_slice(field);
}

/// Unambiguous hash input: each byte-string field length-prefixed with a
/// big-endian u32, then `k` as one byte and the one-based permutation
/// entries as one byte each.
pub fn encode_hash_input(label: &[u8], fields: &[&[u8]], perm: &Permutation) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + fields.iter().map(|f| f.len() + 4).sum::<usize>());
    push_field(&mut buf, label);
    for f in fields {
        push_field(&mut buf, f);
    }
    buf.push(perm.len() as u8);
    buf.extend_from_slice(&perm.one_based_bytes());
    buf
}

/// `PBKDF2-HMAC-SHA256(password = input, salt, 2^cost iterations, 32 bytes)`.
pub fn slow_hash(input: &[u8], salt: &Seed, cost: HashCost) -> [u8; DIGEST_BYTES] {
    let mut out = [0u8; DIGEST_BYTES];
    pbkdf2_hmac::<Sha256>(input, salt.as_bytes(), cost.iterations(), &mut out);
    out
}

/// `h(u, s, pw, pi(1), ..., pi(k))` for stored accounts.
pub fn account_hash(username: &str, salt: &Seed, password: &str, perm: &Permutation, cost: HashCost) -> [u8; DIGEST_BYTES] {
    let input = encode_hash_input(
        ACCOUNT_HASH_LABEL,
        &[username.as_bytes(), salt.as_bytes(), password.as_bytes()],
        perm,
    );
    slow_hash(&input, salt, cost)
}

/// `h(pw, s, pi(1), ..., pi(k))` for open challenges (no username).
pub fn challenge_hash(password: &str, salt: &Seed, perm: &Permutation, cost: HashCost) -> [u8; DIGEST_BYTES] {
    let input = encode_hash_input(CHALLENGE_HASH_LABEL, &[password.as_bytes(), salt.as_bytes()], perm);
    slow_hash(&input, salt, cost)
}

pub(crate) fn digests_equal(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// The stored tuple `(u, r', s, h_pw, labels in presentation order)`.
///
/// Neither the password nor the presentation order is stored; the order
/// only exists inside `password_hash`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountRecord {
    pub username: String,
    pub extractor_salt: Seed,
    pub hash_salt: Seed,
    pub password_hash: Vec<u8>,
    pub permuted_labels: Vec<String>,
    pub params: PuzzleParams,
    pub hash_cost: HashCost,
}

/// Result of checking a login response against a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoginCheck {
    pub accepted: bool,
    pub hash_evaluations: u64,
}

impl AccountRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn create(
        username: &str,
        password: &str,
        extractor_salt: Seed,
        hash_salt: Seed,
        order: &Permutation,
        permuted_labels: Vec<String>,
        params: PuzzleParams,
        hash_cost: HashCost,
    ) -> Result<Self, AuthError> {
        params.validate()?;
        if order.len() != params.k {
            return Err(AuthError::LabelCount { expected: params.k, got: order.len() });
        }
        if permuted_labels.len() != params.k {
            return Err(AuthError::LabelCount { expected: params.k, got: permuted_labels.len() });
        }
        let password_hash = account_hash(username, &hash_salt, password, order, hash_cost).to_vec();
        Ok(AccountRecord {
            username: username.to_string(),
            extractor_salt,
            hash_salt,
            password_hash,
            permuted_labels,
            params,
            hash_cost,
        })
    }

    /// One slow-hash evaluation of a candidate order.
    pub fn check_candidate(&self, password: &str, candidate: &Permutation) -> bool {
        let h = account_hash(&self.username, &self.hash_salt, password, candidate, self.hash_cost);
        digests_equal(&h, &self.password_hash)
    }

    /// Evaluates the whole radius-`alpha` ball around `response`.
    ///
    /// Every candidate is hashed even after a match, so the evaluation
    /// count is always the ball size.
    pub fn verify_response(&self, password: &str, response: &Permutation) -> Result<LoginCheck, AuthError> {
        if response.len() != self.params.k {
            return Err(AuthError::ResponseSize { expected: self.params.k, got: response.len() });
        }
        let ball = enumerate_close(response, self.params.alpha)?;
        let calls = AtomicU64::new(0);
        let hits = ball
            .par_iter()
            .filter(|candidate| {
                calls.fetch_add(1, Ordering::Relaxed);
                self.check_candidate(password, candidate)
            })
            .count();
        Ok(LoginCheck { accepted: hits > 0, hash_evaluations: calls.into_inner() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(b: u8) -> Seed {
        Seed::from_bytes(vec![b; 32]).unwrap()
    }

    #[test]
    fn encoding_is_unambiguous() {
        let p = Permutation::identity(2).unwrap();
        let a = encode_hash_input(ACCOUNT_HASH_LABEL, &[b"ab", b"c"], &p);
        let b = encode_hash_input(ACCOUNT_HASH_LABEL, &[b"a", b"bc"], &p);
        assert_ne!(a, b);
        let tail = &a[a.len() - 3..];
        assert_eq!(tail, &[2, 1, 2]);
    }

    #[test]
    fn slow_hash_matches_pbkdf2_reference() {
        // RFC 6070-style vector recomputed for SHA-256: P="password", S="salt", c=1.
        let mut out = [0u8; 32];
        pbkdf2_hmac::<Sha256>(b"password", b"salt", 1, &mut out);
        assert_eq!(hex::encode(out), "120fb6cffcf8b32c43e7225256c4f837a86548c92ccc35480805987cb70be17b");
        let s = Seed::from_bytes(b"0123456789abcdef".to_vec()).unwrap();
        let direct = {
            let mut o = [0u8; 32];
            pbkdf2_hmac::<Sha256>(b"input", s.as_bytes(), 4, &mut o);
            o
        };
        assert_eq!(slow_hash(b"input", &s, HashCost::new(2).unwrap()), direct);
    }

    #[test]
    fn hash_binds_every_field() {
        let p = Permutation::from_one_based(&[2, 1, 3]).unwrap();
        let q = Permutation::identity(3).unwrap();
        let c = HashCost::MIN;
        let base = account_hash("u", &seed(1), "pw", &p, c);
        assert_ne!(base, account_hash("v", &seed(1), "pw", &p, c));
        assert_ne!(base, account_hash("u", &seed(2), "pw", &p, c));
        assert_ne!(base, account_hash("u", &seed(1), "pw2", &p, c));
        assert_ne!(base, account_hash("u", &seed(1), "pw", &q, c));
        assert_ne!(base, account_hash("u", &seed(1), "pw", &p, HashCost::new(1).unwrap()));
        assert_ne!(challenge_hash("pw", &seed(1), &p, c), base);
    }

    #[test]
    fn cost_bounds() {
        assert!(HashCost::new(31).is_ok());
        assert!(HashCost::new(32).is_err());
        assert_eq!(HashCost::new(3).unwrap().iterations(), 8);
    }

    #[test]
    fn verify_counts_whole_ball() {
        let params = PuzzleParams::new(4, 2).unwrap();
        let order = Permutation::from_one_based(&[3, 1, 4, 2]).unwrap();
        let labels: Vec<String> = (0..4).map(|i| format!("l{i}")).collect();
        let rec = AccountRecord::create("u", "pw", seed(1), seed(2), &order, labels, params, HashCost::MIN).unwrap();
        let exact = rec.verify_response("pw", &order).unwrap();
        assert_eq!(exact, LoginCheck { accepted: true, hash_evaluations: 7 });
        let wrong = rec.verify_response("nope", &order).unwrap();
        assert_eq!(wrong, LoginCheck { accepted: false, hash_evaluations: 7 });
        assert!(rec.verify_response("pw", &Permutation::identity(3).unwrap()).is_err());
    }
}
