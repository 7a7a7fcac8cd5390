//! Permutations, the positional mismatch distance, and tolerant matching balls.
//!
//! A [`Permutation`] of size `k` maps label positions to image indices. The
//! distance between two permutations counts the positions where they
//! disagree; it is never exactly 1. The ball of radius `alpha` around a pivot
//! is generated directly from mismatch sets and derangements, so a
//! `k = 10, alpha = 5` ball costs 13,264 candidates rather than a filter over
//! all `10!` permutations.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::inkblot::InkblotImage;
use crate::seedcore::RandomStream;

/// Largest supported permutation size. Keeps `k!` and every ball count in `u128`.
pub const MAX_K: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchingError {
    #[error("permutation size must be in 1..={MAX_K}, got {0}")]
    InvalidSize(usize),
    #[error("not a permutation of 1..={k}: {entries:?}")]
    NotBijective { k: usize, entries: Vec<usize> },
    #[error("permutations have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("tolerance {alpha} exceeds permutation size {k}")]
    AlphaTooLarge { k: usize, alpha: usize },
    #[error("challenge has {images} images but {labels} labels")]
    ChallengeShape { images: usize, labels: usize },
}

/// A bijection `[k] -> [k]`, stored zero-based. Serializes as a one-based array.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<u8>,
}

impl Permutation {
    pub fn identity(k: usize) -> Result<Self, MatchingError> {
        check_size(k)?;
        Ok(Permutation { map: (0..k as u8).collect() })
    }

    /// Builds from one-based entries, e.g. `[2, 1, 3]`.
    pub fn from_one_based(entries: &[usize]) -> Result<Self, MatchingError> {
        let k = entries.len();
        check_size(k)?;
        let mut seen = vec![false; k];
        let mut map = Vec::with_capacity(k);
        for &e in entries {
            if e == 0 || e > k || seen[e - 1] {
                return Err(MatchingError::NotBijective { k, entries: entries.to_vec() });
            }
            seen[e - 1] = true;
            map.push((e - 1) as u8);
        }
        Ok(Permutation { map })
    }

    /// Builds from zero-based entries.
    pub fn from_zero_based(entries: &[usize]) -> Result<Self, MatchingError> {
        let one: Vec<usize> = entries.iter().map(|&e| e + 1).collect();
        Self::from_one_based(&one)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Zero-based image of zero-based position `i`.
    pub fn get(&self, i: usize) -> usize {
        self.map[i] as usize
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|&v| v as usize + 1).collect()
    }

    pub fn to_zero_based(&self) -> Vec<usize> {
        self.map.iter().map(|&v| v as usize).collect()
    }

    /// One-based entries as single bytes, the hash input encoding.
    pub fn one_based_bytes(&self) -> Vec<u8> {
        self.map.iter().map(|&v| v + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u8; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v as usize] = i as u8;
        }
        Permutation { map: inv }
    }

    /// `self ∘ other`: position `i` maps to `self(other(i))`.
    pub fn compose(&self, other: &Self) -> Result<Self, MatchingError> {
        if self.len() != other.len() {
            return Err(MatchingError::SizeMismatch(self.len(), other.len()));
        }
        Ok(Permutation {
            map: other.map.iter().map(|&o| self.map[o as usize]).collect(),
        })
    }

    /// Applies the permutation to a slice: output position `i` holds `items[self(i)]`.
    pub fn arrange<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.map.iter().map(|&v| items[v as usize].clone()).collect()
    }

    /// One-based rank in lexicographic order of the one-based arrays.
    pub fn lex_rank(&self) -> u128 {
        let k = self.map.len();
        let mut rank = 0u128;
        for i in 0..k {
            let smaller_after = self.map[i + 1..].iter().filter(|&&v| v < self.map[i]).count() as u128;
            rank += smaller_after * factorial(k - 1 - i);
        }
        rank + 1
    }

    /// Every permutation of size `k` in lexicographic order.
    pub fn all(k: usize) -> Result<LexPermutations, MatchingError> {
        check_size(k)?;
        Ok(LexPermutations { next: Some((0..k as u8).collect()) })
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.to_one_based())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_one_based().iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_one_based().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let entries = Vec::<usize>::deserialize(deserializer)?;
        Permutation::from_one_based(&entries).map_err(serde::de::Error::custom)
    }
}

/// Iterator over `S_k` in lexicographic order.
pub struct LexPermutations {
    next: Option<Vec<u8>>,
}

impl Iterator for LexPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation { map: current })
    }
}

fn next_lexicographic(v: &mut [u8]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn check_size(k: usize) -> Result<(), MatchingError> {
    if k == 0 || k > MAX_K {
        return Err(MatchingError::InvalidSize(k));
    }
    Ok(())
}

fn check_alpha(k: usize, alpha: usize) -> Result<(), MatchingError> {
    check_size(k)?;
    if alpha > k {
        return Err(MatchingError::AlphaTooLarge { k, alpha });
    }
    Ok(())
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc = 1u128;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of fixed-point-free permutations of `n` elements.
pub fn derangements(n: usize) -> u128 {
    // D(n) = (n - 1) (D(n-1) + D(n-2)), D(0) = 1, D(1) = 0
    let (mut prev, mut cur) = (1u128, 0u128);
    if n == 0 {
        return 1;
    }
    for m in 2..=n {
        let next = (m as u128 - 1) * (cur + prev);
        prev = cur;
        cur = next;
    }
    cur
}

/// Number of positions where two permutations disagree.
pub fn distance(a: &Permutation, b: &Permutation) -> Result<usize, MatchingError> {
    if a.len() != b.len() {
        return Err(MatchingError::SizeMismatch(a.len(), b.len()));
    }
    Ok(a.map.iter().zip(&b.map).filter(|(x, y)| x != y).count())
}

/// Exact size of the radius-`alpha` ball in `S_k`: `sum_{i <= alpha} C(k, i) D(i)`.
pub fn count_close(k: usize, alpha: usize) -> Result<u128, MatchingError> {
    check_alpha(k, alpha)?;
    Ok((0..=alpha).map(|i| binomial(k, i) * derangements(i)).sum())
}

/// The looser bound `1 + sum_{i=2}^{alpha} C(k, i) i!`.
pub fn count_close_upper_bound(k: usize, alpha: usize) -> Result<u128, MatchingError> {
    check_alpha(k, alpha)?;
    Ok(1 + (2..=alpha).map(|i| binomial(k, i) * factorial(i)).sum::<u128>())
}

/// Every permutation within distance `alpha` of `pivot`, pivot first.
///
/// Candidates are grouped by exact distance `0, 2, 3, ...`; within a group
/// the mismatch sets come in lexicographic order, each followed by its
/// derangements in lexicographic order.
pub fn enumerate_close(pivot: &Permutation, alpha: usize) -> Result<Vec<Permutation>, MatchingError> {
    let k = pivot.len();
    check_alpha(k, alpha)?;
    let mut out = Vec::with_capacity(count_close(k, alpha)? as usize);
    out.push(pivot.clone());
    for size in 2..=alpha {
        let patterns = derangement_patterns(size);
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            for pattern in &patterns {
                let mut map = pivot.map.clone();
                for (slot, &src) in pattern.iter().enumerate() {
                    map[subset[slot]] = pivot.map[subset[src as usize]];
                }
                out.push(Permutation { map });
            }
            if !next_combination(&mut subset, k) {
                break;
            }
        }
    }
    Ok(out)
}

// All derangements of 0..n in lexicographic order.
fn derangement_patterns(n: usize) -> Vec<Vec<u8>> {
    let mut v: Vec<u8> = (0..n as u8).collect();
    let mut out = Vec::new();
    loop {
        if v.iter().enumerate().all(|(i, &x)| i as u8 != x) {
            out.push(v.clone());
        }
        if !next_lexicographic(&mut v) {
            break;
        }
    }
    out
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let r = subset.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if subset[i] < n - r + i {
            subset[i] += 1;
            for j in i + 1..r {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Uniform permutation by a back-to-front Fisher-Yates shuffle.
///
/// For `i = k-1` down to `1` one draw `j = below(i + 1)` swaps positions `i`
/// and `j`, so exactly `8 (k - 1)` stream bytes are consumed.
pub fn random_permutation(k: usize, stream: &mut RandomStream) -> Result<Permutation, MatchingError> {
    check_size(k)?;
    let mut map: Vec<u8> = (0..k as u8).collect();
    for i in (1..k).rev() {
        let j = stream.below(i as u64 + 1) as usize;
        map.swap(i, j);
    }
    Ok(Permutation { map })
}

/// Uniform member of the radius-`alpha` ball around `pivot`.
pub fn random_close(pivot: &Permutation, alpha: usize, stream: &mut RandomStream) -> Result<Permutation, MatchingError> {
    let mut ball = enumerate_close(pivot, alpha)?;
    let idx = stream.below(ball.len() as u64) as usize;
    Ok(ball.swap_remove(idx))
}

/// Images in canonical order paired with labels in permuted order.
///
/// The correct answer maps label position `i` to the image that label was
/// written for.
#[derive(Debug, Clone)]
pub struct MatchingChallenge {
    images: Vec<InkblotImage>,
    labels: Vec<String>,
}

impl MatchingChallenge {
    pub fn new(images: Vec<InkblotImage>, labels: Vec<String>) -> Result<Self, MatchingError> {
        if images.len() != labels.len() || images.is_empty() {
            return Err(MatchingError::ChallengeShape { images: images.len(), labels: labels.len() });
        }
        Ok(MatchingChallenge { images, labels })
    }

    pub fn k(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[InkblotImage] {
        &self.images
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seedcore::Seed;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn p(v: &[usize]) -> Permutation {
        Permutation::from_one_based(v).unwrap()
    }

    // Oracle: positional recount written independently of `distance`.
    fn naive_distance(a: &[usize], b: &[usize]) -> usize {
        let mut n = 0;
        for i in 0..a.len() {
            if a[i] != b[i] {
                n += 1;
            }
        }
        n
    }

    // Oracle: filter all of S_k via Heap's algorithm (independent generator).
    fn all_perms_heap(k: usize) -> Vec<Vec<usize>> {
        fn heap(n: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if n == 1 {
                out.push(a.clone());
                return;
            }
            for i in 0..n - 1 {
                heap(n - 1, a, out);
                if n % 2 == 0 {
                    a.swap(i, n - 1);
                } else {
                    a.swap(0, n - 1);
                }
            }
            heap(n - 1, a, out);
        }
        let mut a: Vec<usize> = (1..=k).collect();
        let mut out = Vec::new();
        heap(k, &mut a, &mut out);
        out
    }

    #[test]
    fn distance_examples() {
        let id = Permutation::identity(10).unwrap();
        assert_eq!(distance(&id, &id).unwrap(), 0);
        let swapped = p(&[2, 1, 3, 4, 5, 6, 7, 8, 9, 10]);
        assert_eq!(distance(&id, &swapped).unwrap(), 2);
        assert!(matches!(
            distance(&id, &Permutation::identity(3).unwrap()),
            Err(MatchingError::SizeMismatch(10, 3))
        ));
    }

    #[test]
    fn distance_matches_recount_k6() {
        let mut s = RandomStream::from_seed(&Seed::from_bytes(vec![3u8; 32]).unwrap());
        for _ in 0..500 {
            let a = random_permutation(6, &mut s).unwrap();
            let b = random_permutation(6, &mut s).unwrap();
            let d = distance(&a, &b).unwrap();
            assert_eq!(d, naive_distance(&a.to_one_based(), &b.to_one_based()));
            assert_ne!(d, 1);
        }
    }

    #[test]
    fn derangement_numbers() {
        let expected = [1u128, 0, 1, 2, 9, 44, 265, 1854, 14833];
        for (n, &d) in expected.iter().enumerate() {
            assert_eq!(derangements(n), d);
        }
    }

    #[test]
    fn table_counts_k10() {
        assert_eq!(count_close(10, 0).unwrap(), 1);
        assert_eq!(count_close(10, 2).unwrap(), 46);
        assert_eq!(count_close(10, 3).unwrap(), 286);
        assert_eq!(count_close(10, 4).unwrap(), 2176);
        assert_eq!(count_close(10, 5).unwrap(), 13_264);
        assert_eq!(count_close_upper_bound(10, 5).unwrap(), 36_091);
        assert_eq!(count_close_upper_bound(7, 0).unwrap(), 1);
        assert_eq!(count_close(10, 10).unwrap(), factorial(10));
    }

    #[test]
    fn alpha_above_k_rejected() {
        assert_eq!(count_close(3, 4), Err(MatchingError::AlphaTooLarge { k: 3, alpha: 4 }));
        assert!(count_close_upper_bound(3, 4).is_err());
        assert!(enumerate_close(&Permutation::identity(3).unwrap(), 4).is_err());
    }

    #[test]
    fn counts_match_exhaustive_filter_k_le_7() {
        for k in 1..=7 {
            let all = all_perms_heap(k);
            let pivot: Vec<usize> = all[all.len() / 3].clone();
            for alpha in 0..=k {
                let brute = all.iter().filter(|q| naive_distance(q, &pivot) <= alpha).count() as u128;
                assert_eq!(count_close(k, alpha).unwrap(), brute, "k={k} alpha={alpha}");
                assert!(count_close_upper_bound(k, alpha).unwrap() >= brute);
            }
        }
    }

    #[test]
    fn small_balls() {
        let id3 = Permutation::identity(3).unwrap();
        assert_eq!(enumerate_close(&id3, 0).unwrap(), vec![id3.clone()]);
        let full: HashSet<_> = enumerate_close(&id3, 3).unwrap().into_iter().collect();
        assert_eq!(full.len(), 6);
    }

    #[test]
    fn enumerate_matches_filter_k6() {
        let mut s = RandomStream::from_seed(&Seed::from_bytes(vec![8u8; 32]).unwrap());
        let all = all_perms_heap(6);
        for _ in 0..5 {
            let pivot = random_permutation(6, &mut s).unwrap();
            let ball: HashSet<Vec<usize>> =
                enumerate_close(&pivot, 3).unwrap().iter().map(|q| q.to_one_based()).collect();
            let expected: HashSet<Vec<usize>> = all
                .iter()
                .filter(|q| naive_distance(q, &pivot.to_one_based()) <= 3)
                .cloned()
                .collect();
            assert_eq!(ball, expected);
        }
    }

    #[test]
    fn lex_order_and_rank() {
        let all: Vec<_> = Permutation::all(4).unwrap().collect();
        assert_eq!(all.len(), 24);
        for (i, q) in all.iter().enumerate() {
            assert_eq!(q.lex_rank(), i as u128 + 1);
        }
        for w in all.windows(2) {
            assert!(w[0].to_one_based() < w[1].to_one_based());
        }
    }

    #[test]
    fn shuffle_k1_and_determinism() {
        let seed = Seed::from_bytes(vec![1u8; 32]).unwrap();
        let mut a = RandomStream::from_seed(&seed);
        assert_eq!(random_permutation(1, &mut a).unwrap(), Permutation::identity(1).unwrap());
        assert_eq!(a.bytes_consumed(), 0);
        let mut a = RandomStream::from_seed(&seed);
        let mut b = RandomStream::from_seed(&seed);
        assert_eq!(random_permutation(10, &mut a).unwrap(), random_permutation(10, &mut b).unwrap());
        assert_eq!(a.bytes_consumed(), 72);
    }

    #[test]
    fn shuffle_uniform_over_s4() {
        let mut s = RandomStream::from_seed(&Seed::from_bytes(vec![77u8; 32]).unwrap());
        let n = 100_000u64;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(random_permutation(4, &mut s).unwrap().lex_rank()).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 24);
        let pr = 1.0 / 24.0;
        let mean = n as f64 * pr;
        let sigma = (n as f64 * pr * (1.0 - pr)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - mean).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn serde_is_one_based() {
        let q = p(&[3, 1, 2]);
        assert_eq!(serde_json::to_string(&q).unwrap(), "[3,1,2]");
        assert_eq!(serde_json::from_str::<Permutation>("[3,1,2]").unwrap(), q);
        assert!(serde_json::from_str::<Permutation>("[0,1,2]").is_err());
        assert!(serde_json::from_str::<Permutation>("[1,1,2]").is_err());
    }

    #[test]
    fn challenge_shape_checked() {
        assert!(MatchingChallenge::new(vec![], vec![]).is_err());
    }

    fn perm_strategy(max_k: usize) -> impl Strategy<Value = Permutation> {
        (1..=max_k).prop_flat_map(|k| Just((0..k).collect::<Vec<usize>>()).prop_shuffle())
            .prop_map(|v| Permutation::from_zero_based(&v).unwrap())
    }

    fn same_size_triple(max_k: usize) -> impl Strategy<Value = (Permutation, Permutation, Permutation)> {
        (1..=max_k).prop_flat_map(|k| {
            let base = Just((0..k).collect::<Vec<usize>>());
            (base.clone().prop_shuffle(), base.clone().prop_shuffle(), base.prop_shuffle())
        })
        .prop_map(|(a, b, c)| {
            (
                Permutation::from_zero_based(&a).unwrap(),
                Permutation::from_zero_based(&b).unwrap(),
                Permutation::from_zero_based(&c).unwrap(),
            )
        })
    }

    proptest! {
        #[test]
        fn distance_is_a_metric((a, b, c) in same_size_triple(6)) {
            let ab = distance(&a, &b).unwrap();
            prop_assert_eq!(ab, distance(&b, &a).unwrap());
            prop_assert_eq!(ab == 0, a == b);
            prop_assert_ne!(ab, 1);
            prop_assert!(distance(&a, &c).unwrap() <= ab + distance(&b, &c).unwrap());
        }

        #[test]
        fn ball_has_no_duplicates_and_respects_radius(pivot in perm_strategy(6), alpha in 0usize..=6) {
            let alpha = alpha.min(pivot.len());
            let ball = enumerate_close(&pivot, alpha).unwrap();
            let set: HashSet<_> = ball.iter().cloned().collect();
            prop_assert_eq!(set.len(), ball.len());
            prop_assert_eq!(ball.len() as u128, count_close(pivot.len(), alpha).unwrap());
            prop_assert!(ball.iter().all(|q| distance(q, &pivot).unwrap() <= alpha));
            prop_assert!(set.contains(&pivot));
        }

        #[test]
        fn ball_commutes_with_conjugation((pivot, sigma, _) in same_size_triple(6), alpha in 0usize..=6) {
            let alpha = alpha.min(pivot.len());
            let conj = |q: &Permutation| sigma.compose(&q.compose(&sigma.inverse()).unwrap()).unwrap();
            let lhs: HashSet<_> = enumerate_close(&conj(&pivot), alpha).unwrap().into_iter().collect();
            let rhs: HashSet<_> = enumerate_close(&pivot, alpha).unwrap().iter().map(conj).collect();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn one_based_round_trip(q in perm_strategy(12)) {
            prop_assert_eq!(Permutation::from_one_based(&q.to_one_based()).unwrap(), q.clone());
            prop_assert_eq!(q.compose(&q.inverse()).unwrap(), Permutation::identity(q.len()).unwrap());
        }
    }
}
