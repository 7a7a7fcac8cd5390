//! Open cracking challenges: publishable tuples, verification and a bounded brute-force solver.
//!
//! A challenge hides a numeric password drawn from a public range and a
//! presentation order. The published tuple carries the hash salt, the digest
//! `h(pw, s, order)` and the labels a human wrote for the inkblots of `pw`.
//! Inkblots are derived with a fixed public extractor salt so the tuple is
//! self-contained.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::authcore::{challenge_hash, HashCost, DIGEST_BYTES};
use crate::gotcha::{normalize_labels, GotchaError, InkblotSet};
use crate::inkblot::InkblotImage;
use crate::matching::{factorial, random_permutation, MatchingError, Permutation};
use crate::seedcore::{extract, RandomStream, Seed, SeedError, DEFAULT_SEED_BITS};
use crate::PROTOCOL_VERSION;

pub const CHALLENGE_FORMAT: &str = "gotcha-challenge";
/// Default cap on hash evaluations for [`brute_force_solve`].
pub const DEFAULT_SOLVE_BUDGET: u128 = 1_000_000;
/// Passwords handed to workers per round of the parallel sweep.
const SWEEP_BATCH: u64 = 64;

/// Public extractor salt for challenge inkblots: `SHA-256("gotcha/v1/open-challenge")`.
pub fn challenge_extractor_salt() -> Seed {
    Seed::from_bytes(Sha256::digest(b"gotcha/v1/open-challenge").to_vec()).expect("32-byte digest")
}

#[derive(Debug, Error)]
pub enum ChallengeError {
    #[error("password space is empty")]
    EmptySpace,
    #[error("search needs {needed} hash evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("unsupported challenge document: {0}")]
    Format(String),
    #[error(transparent)]
    Labels(#[from] GotchaError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Half-open range of numeric passwords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasswordSpace {
    pub start: u64,
    pub end: u64,
}

impl PasswordSpace {
    pub fn new(range: Range<u64>) -> Result<Self, ChallengeError> {
        if range.is_empty() {
            return Err(ChallengeError::EmptySpace);
        }
        Ok(PasswordSpace { start: range.start, end: range.end })
    }

    pub fn len(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(text).map_err(serde::de::Error::custom)
    }
}

/// The published part of a challenge. Serializes to the challenge file schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeTuple {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub hash_cost: HashCost,
    pub space: PasswordSpace,
    #[serde(with = "hex_bytes")]
    pub salt: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub digest: Vec<u8>,
    pub permuted_labels: Vec<String>,
}

/// The held-back answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeSecret {
    pub password: u64,
    pub permutation: Permutation,
}

impl ChallengeSecret {
    /// Inkblots in the order they are shown for labelling.
    pub fn labelling_inkblots(&self) -> Result<Vec<InkblotImage>, ChallengeError> {
        let r1 = extract(&self.password.to_string(), &challenge_extractor_salt())?;
        Ok(InkblotSet::presented(r1, self.permutation.clone()).render_all())
    }
}

impl ChallengeTuple {
    pub fn salt_seed(&self) -> Result<Seed, ChallengeError> {
        Ok(Seed::from_bytes(self.salt.clone())?)
    }

    pub fn to_json(&self) -> Result<String, ChallengeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ChallengeError> {
        let t: ChallengeTuple = serde_json::from_str(text)?;
        if t.format != CHALLENGE_FORMAT || t.version != PROTOCOL_VERSION {
            return Err(ChallengeError::Format(format!("{} v{}", t.format, t.version)));
        }
        if t.permuted_labels.len() != t.k || t.digest.len() != DIGEST_BYTES || t.space.is_empty() {
            return Err(ChallengeError::Format("inconsistent fields".into()));
        }
        t.salt_seed()?;
        Ok(t)
    }

    /// Canonical-order inkblots for a password guess.
    pub fn inkblots_for(&self, password: &str) -> Result<Vec<InkblotImage>, ChallengeError> {
        let r1 = extract(password, &challenge_extractor_salt())?;
        Ok(InkblotSet::canonical(self.k, r1).render_all())
    }
}

/// Draws a password from `space`, an order and a salt from `rng`, and hashes them.
///
/// `labels` are the human's labels for the inkblots as presented, i.e. in the
/// order [`ChallengeSecret::labelling_inkblots`] returns them. Draw order is
/// password, permutation, salt.
pub fn generate_challenge(
    space: PasswordSpace,
    k: usize,
    labels: &[String],
    hash_cost: HashCost,
    rng: &mut RandomStream,
) -> Result<(ChallengeTuple, ChallengeSecret), ChallengeError> {
    if space.is_empty() {
        return Err(ChallengeError::EmptySpace);
    }
    let (labels, _) = normalize_labels(labels, k)?;
    let password = space.start + rng.below(space.len());
    let permutation = random_permutation(k, rng)?;
    let salt = Seed::from_stream(rng, DEFAULT_SEED_BITS)?;
    let digest = challenge_hash(&password.to_string(), &salt, &permutation, hash_cost);
    let tuple = ChallengeTuple {
        format: CHALLENGE_FORMAT.into(),
        version: PROTOCOL_VERSION,
        k,
        hash_cost,
        space,
        salt: salt.as_bytes().to_vec(),
        digest: digest.to_vec(),
        permuted_labels: labels,
    };
    Ok((tuple, ChallengeSecret { password, permutation }))
}

/// True iff `h(pw, s, pi)` equals the published digest.
pub fn verify_solution(tuple: &ChallengeTuple, password: &str, permutation: &Permutation) -> bool {
    let Ok(salt) = tuple.salt_seed() else { return false };
    if permutation.len() != tuple.k {
        return false;
    }
    let h = challenge_hash(password, &salt, permutation, tuple.hash_cost);
    crate::authcore::digests_equal(&h, &tuple.digest)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveReport {
    pub solution: Option<ChallengeSecret>,
    /// Evaluations a sequential sweep makes up to and including the hit
    /// (or the whole space on a miss).
    pub hash_calls: u128,
    /// Evaluations actually performed, including work past the hit in the final batch.
    pub total_evaluations: u128,
}

/// Expected [`SolveReport::hash_calls`] for a planted solution: `(rank(pw) - 1) k! + rank(pi)`.
pub fn predicted_hash_calls(space: PasswordSpace, secret: &ChallengeSecret, k: usize) -> u128 {
    (secret.password - space.start) as u128 * factorial(k) + secret.permutation.lex_rank()
}

/// Sweeps passwords ascending and, per password, permutations in lexicographic order.
///
/// Refuses up front when `|space| * k!` exceeds `budget`. Batches of
/// passwords are searched in parallel; per-password call counts are
/// measured and summed in sweep order so the reported count is exact.
pub fn brute_force_solve(tuple: &ChallengeTuple, budget: u128) -> Result<SolveReport, ChallengeError> {
    let per_password = factorial(tuple.k);
    let needed = tuple.space.len() as u128 * per_password;
    if needed > budget {
        return Err(ChallengeError::BudgetExceeded { needed, budget });
    }
    let salt = tuple.salt_seed()?;
    let total = AtomicU64::new(0);
    let mut hash_calls = 0u128;
    let mut pw = tuple.space.start;
    while pw < tuple.space.end {
        let batch_end = (pw + SWEEP_BATCH).min(tuple.space.end);
        let results: Vec<(u128, Option<Permutation>)> = (pw..batch_end)
            .into_par_iter()
            .map(|candidate| {
                let text = candidate.to_string();
                let mut calls = 0u128;
                for perm in Permutation::all(tuple.k).expect("k validated") {
                    calls += 1;
                    total.fetch_add(1, Ordering::Relaxed);
                    let h = challenge_hash(&text, &salt, &perm, tuple.hash_cost);
                    if crate::authcore::digests_equal(&h, &tuple.digest) {
                        return (calls, Some(perm));
                    }
                }
                (calls, None)
            })
            .collect();
        for (offset, (calls, hit)) in results.into_iter().enumerate() {
            hash_calls += calls;
            if let Some(permutation) = hit {
                return Ok(SolveReport {
                    solution: Some(ChallengeSecret { password: pw + offset as u64, permutation }),
                    hash_calls,
                    total_evaluations: total.load(Ordering::Relaxed) as u128,
                });
            }
        }
        pw = batch_end;
    }
    Ok(SolveReport { solution: None, hash_calls, total_evaluations: total.load(Ordering::Relaxed) as u128 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("shape {i}")).collect()
    }

    fn stream(b: u8) -> RandomStream {
        RandomStream::from_seed(&Seed::from_bytes(vec![b; 32]).unwrap())
    }

    #[test]
    fn generated_tuple_verifies() {
        let space = PasswordSpace::new(42..43).unwrap();
        let (t, s) = generate_challenge(space, 3, &labels(3), HashCost::MIN, &mut stream(1)).unwrap();
        assert_eq!(s.password, 42);
        assert!(verify_solution(&t, "42", &s.permutation));
    }

    #[test]
    fn generation_is_deterministic() {
        let space = PasswordSpace::new(0..1000).unwrap();
        let a = generate_challenge(space, 3, &labels(3), HashCost::MIN, &mut stream(2)).unwrap();
        let b = generate_challenge(space, 3, &labels(3), HashCost::MIN, &mut stream(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_order_or_password_fails() {
        let space = PasswordSpace::new(0..10).unwrap();
        let (t, s) = generate_challenge(space, 3, &labels(3), HashCost::MIN, &mut stream(3)).unwrap();
        for perm in Permutation::all(3).unwrap() {
            assert_eq!(verify_solution(&t, &s.password.to_string(), &perm), perm == s.permutation);
        }
        for pw in (0..10).filter(|&p| p != s.password) {
            for perm in Permutation::all(3).unwrap() {
                assert!(!verify_solution(&t, &pw.to_string(), &perm));
            }
        }
        assert!(!verify_solution(&t, &s.password.to_string(), &Permutation::identity(4).unwrap()));
    }

    #[test]
    fn empty_space_rejected() {
        assert!(matches!(PasswordSpace::new(5..5), Err(ChallengeError::EmptySpace)));
        let bad = PasswordSpace { start: 3, end: 3 };
        assert!(generate_challenge(bad, 3, &labels(3), HashCost::MIN, &mut stream(1)).is_err());
    }

    #[test]
    fn solver_recovers_plant_with_exact_count() {
        let space = PasswordSpace::new(0..100).unwrap();
        for b in 0..5 {
            let (t, s) = generate_challenge(space, 3, &labels(3), HashCost::MIN, &mut stream(10 + b)).unwrap();
            let r = brute_force_solve(&t, DEFAULT_SOLVE_BUDGET).unwrap();
            assert_eq!(r.solution.as_ref(), Some(&s));
            assert_eq!(r.hash_calls, predicted_hash_calls(space, &s, 3));
            assert!(r.hash_calls <= 600);
            assert!(r.total_evaluations >= r.hash_calls);
        }
    }

    #[test]
    fn random_digest_not_found() {
        let space = PasswordSpace::new(0..100).unwrap();
        let (mut t, _) = generate_challenge(space, 3, &labels(3), HashCost::MIN, &mut stream(4)).unwrap();
        t.digest = vec![0xA5; 32];
        let r = brute_force_solve(&t, DEFAULT_SOLVE_BUDGET).unwrap();
        assert!(r.solution.is_none());
        assert_eq!(r.hash_calls, 600);
    }

    #[test]
    fn full_scale_refused() {
        let space = PasswordSpace::new(0..10_000_000).unwrap();
        let (t, _) = generate_challenge(space, 10, &labels(10), HashCost::HIGH, &mut stream(5)).unwrap();
        assert!(matches!(brute_force_solve(&t, DEFAULT_SOLVE_BUDGET), Err(ChallengeError::BudgetExceeded { .. })));
    }

    #[test]
    fn json_schema_round_trip() {
        let space = PasswordSpace::new(0..100).unwrap();
        let (t, s) = generate_challenge(space, 3, &labels(3), HashCost::MIN, &mut stream(6)).unwrap();
        let text = t.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format"], "gotcha-challenge");
        assert_eq!(v["space"]["end"], 100);
        assert_eq!(v["salt"].as_str().unwrap().len(), 64);
        assert_eq!(ChallengeTuple::from_json(&text).unwrap(), t);
        let secret_json = serde_json::to_string(&s).unwrap();
        assert!(secret_json.contains("\"permutation\":["));
        let mut bad = v.clone();
        bad["version"] = 9.into();
        assert!(ChallengeTuple::from_json(&bad.to_string()).is_err());
    }

    #[test]
    fn inkblots_follow_password() {
        let space = PasswordSpace::new(0..100).unwrap();
        let (t, s) = generate_challenge(space, 2, &labels(2), HashCost::MIN, &mut stream(7)).unwrap();
        let shown = s.labelling_inkblots().unwrap();
        let canon = t.inkblots_for(&s.password.to_string()).unwrap();
        for i in 0..2 {
            assert!(shown[i].same_raster(&canon[s.permutation.get(i)]));
        }
    }
}
