//! The inkblot puzzle system: G1 produces the labelling task, G2 the matching challenge.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inkblot::{generate_inkblot_image, generate_inkblot_images, InkblotError, InkblotImage};
use crate::matching::{random_permutation, MatchingChallenge, MatchingError, Permutation, MAX_K};
use crate::seedcore::{RandomStream, Seed, DEFAULT_SEED_BITS, MAX_SEED_BITS, MIN_SEED_BITS};

/// Label of the stream that orders the presented inkblots.
pub const PERMUTATION_LABEL: &[u8] = b"gotcha/v1/permutation";
/// Longest accepted label, in UTF-8 bytes after trimming.
pub const MAX_LABEL_BYTES: usize = 128;

#[derive(Debug, Error)]
pub enum GotchaError {
    #[error("invalid puzzle parameters: {0}")]
    Params(String),
    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("label {index} is empty")]
    EmptyLabel { index: usize },
    #[error("label {index} is {len} bytes, limit is {MAX_LABEL_BYTES}")]
    LabelTooLong { index: usize, len: usize },
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Inkblot(#[from] InkblotError),
}

/// Puzzle parameters. `epsilon`, `delta` and `mu` are declared security
/// levels; nothing here measures them, the attack lab only reads them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleParams {
    pub k: usize,
    pub alpha: usize,
    pub seed_bits: usize,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    /// Min-entropy of wrong-password responses in bits; `None` means the uniform value.
    #[serde(default)]
    pub mu: Option<f64>,
}

impl Default for PuzzleParams {
    fn default() -> Self {
        PuzzleParams { k: 10, alpha: 5, seed_bits: DEFAULT_SEED_BITS, epsilon: 0.0, delta: 0.0, mu: None }
    }
}

impl PuzzleParams {
    pub fn new(k: usize, alpha: usize) -> Result<Self, GotchaError> {
        let p = PuzzleParams { k, alpha, ..Default::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GotchaError> {
        if self.k == 0 || self.k > MAX_K {
            return Err(GotchaError::Params(format!("k must be in 1..={MAX_K}, got {}", self.k)));
        }
        if self.alpha > self.k {
            return Err(GotchaError::Params(format!("alpha {} exceeds k {}", self.alpha, self.k)));
        }
        if self.seed_bits % 8 != 0 || !(MIN_SEED_BITS..=MAX_SEED_BITS).contains(&self.seed_bits) {
            return Err(GotchaError::Params(format!("unsupported seed size {}", self.seed_bits)));
        }
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GotchaError::Params(format!("{name} must be a probability, got {v}")));
            }
        }
        if let Some(mu) = self.mu {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(GotchaError::Params(format!("mu must be non-negative, got {mu}")));
            }
        }
        Ok(())
    }
}

/// Presentation order derived from `r2`.
pub fn presentation_order(k: usize, r2: &Seed) -> Result<Permutation, GotchaError> {
    let mut stream = RandomStream::derive(r2, PERMUTATION_LABEL);
    Ok(random_permutation(k, &mut stream)?)
}

/// Output of G1: images in presentation order plus the order itself.
///
/// Position `i` shows canonical image `order(i)`. The order stays on the
/// server; it is only ever bound into the password hash.
#[derive(Debug, Clone)]
pub struct LabellingTask {
    pub images: Vec<InkblotImage>,
    pub order: Permutation,
}

/// G1: images from `r1`, presentation order from `r2`.
pub fn g1(k: usize, r1: &Seed, r2: &Seed) -> Result<LabellingTask, GotchaError> {
    let order = presentation_order(k, r2)?;
    let canonical = generate_inkblot_images(k, r1)?;
    Ok(LabellingTask { images: order.arrange(&canonical), order })
}

/// G2: canonical images from `r1` paired with labels stored in presentation order.
pub fn g2(k: usize, r1: &Seed, labels: &[String]) -> Result<MatchingChallenge, GotchaError> {
    if labels.len() != k {
        return Err(GotchaError::LabelCount { expected: k, got: labels.len() });
    }
    let images = generate_inkblot_images(k, r1)?;
    Ok(MatchingChallenge::new(images, labels.to_vec())?)
}

/// Lazily rendered image set: the secrets needed to draw a challenge on demand.
#[derive(Clone)]
pub struct InkblotSet {
    seed: Seed,
    order: Option<Permutation>,
    k: usize,
}

impl std::fmt::Debug for InkblotSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InkblotSet").field("k", &self.k).finish_non_exhaustive()
    }
}

impl InkblotSet {
    /// Canonical order, as shown by G2.
    pub fn canonical(k: usize, seed: Seed) -> Self {
        InkblotSet { seed, order: None, k }
    }

    /// Presentation order, as shown by G1.
    pub fn presented(seed: Seed, order: Permutation) -> Self {
        InkblotSet { k: order.len(), seed, order: Some(order) }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// One-based canonical index of the image shown at one-based position `j`.
    ///
    /// This is what a person learns by recognising the picture, without drawing it.
    pub fn source_index(&self, j: usize) -> Option<usize> {
        if j == 0 || j > self.k {
            return None;
        }
        Some(match &self.order {
            Some(order) => order.get(j - 1) + 1,
            None => j,
        })
    }

    /// Image at one-based position `j`.
    pub fn render(&self, j: usize) -> Option<InkblotImage> {
        Some(generate_inkblot_image(&self.seed, self.source_index(j)?))
    }

    pub fn render_all(&self) -> Vec<InkblotImage> {
        use rayon::prelude::*;
        (1..=self.k).into_par_iter().map(|j| self.render(j).expect("index in range")).collect()
    }
}

/// Trims a label and enforces the byte cap. Case and interior spacing are kept.
pub fn normalize_label(raw: &str, index: usize) -> Result<String, GotchaError> {
    let t = raw.trim();
    if t.is_empty() {
        return Err(GotchaError::EmptyLabel { index });
    }
    if t.len() > MAX_LABEL_BYTES {
        return Err(GotchaError::LabelTooLong { index, len: t.len() });
    }
    Ok(t.to_string())
}

/// Normalizes `k` labels. The second value lists positions whose label repeats an earlier one;
/// duplicates are allowed but worth a warning in a UI.
pub fn normalize_labels(raw: &[String], k: usize) -> Result<(Vec<String>, Vec<usize>), GotchaError> {
    if raw.len() != k {
        return Err(GotchaError::LabelCount { expected: k, got: raw.len() });
    }
    let labels = raw
        .iter()
        .enumerate()
        .map(|(i, l)| normalize_label(l, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    let duplicates = (0..k).filter(|&i| labels[..i].contains(&labels[i])).map(|i| i + 1).collect();
    Ok((labels, duplicates))
}

/// Display order for labels: alphabetical ignoring case, ties by bytes then position.
/// Entry `d` is the zero-based wire position of the `d`-th displayed label.
pub fn alphabetical_order(labels: &[String]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.sort_by(|&a, &b| {
        labels[a]
            .to_lowercase()
            .cmp(&labels[b].to_lowercase())
            .then_with(|| labels[a].cmp(&labels[b]))
            .then(a.cmp(&b))
    });
    idx
}
