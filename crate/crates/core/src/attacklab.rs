//! Offline attack cost laboratory.
//!
//! An attacker holding a stolen account record is modelled as a strategy
//! that may only call two oracles: `verify_hash(pw, pi)`, which runs the
//! same tolerant check a login runs, and a human who labels-and-matches the
//! inkblots regenerated from a password guess. Every call is counted and
//! priced, so reports carry exact `n_h c_h + n_H c_H` costs that can be held
//! against the lower bound `gamma |D| 2^mu c_h + n_H c_H`.
//!
//! The same module prices the pre-generated CAPTCHA database alternative.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::authcore::{AccountRecord, AuthError, HashCost};
use crate::gotcha::PuzzleParams;
use crate::matching::{count_close, factorial, random_close, random_permutation, MatchingError, Permutation};
use crate::seedcore::{extract, RandomStream, Seed, SeedError};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("strategy broke the oracle boundary: {0}")]
    ContractViolation(String),
    #[error("query budget exhausted")]
    BudgetExhausted,
    #[error("invalid attack setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Seed(#[from] SeedError),
}

/// Per-query prices `c_h` (one `verify_hash` call) and `c_H` (one human solve).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostModel {
    pub hash_query_cost: f64,
    pub human_query_cost: f64,
}

impl CostModel {
    pub fn new(hash_query_cost: f64, human_query_cost: f64) -> Result<Self, AttackError> {
        for v in [hash_query_cost, human_query_cost] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AttackError::Setup(format!("costs must be finite and non-negative, got {v}")));
            }
        }
        Ok(CostModel { hash_query_cost, human_query_cost })
    }
}

/// Exact query counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QueryCounts {
    pub hash_queries: u64,
    pub human_queries: u64,
}

impl QueryCounts {
    pub fn cost(&self, model: &CostModel) -> f64 {
        self.hash_queries as f64 * model.hash_query_cost + self.human_queries as f64 * model.human_query_cost
    }
}

/// A simulated solver.
///
/// Shown the inkblots of the real password it answers, with probability
/// `beta`, uniformly within distance `alpha` of the true order; otherwise
/// uniformly over all orders. Shown inkblots of any other password it
/// answers uniformly over all orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulatedHuman {
    pub beta: f64,
    pub alpha: usize,
}

impl Default for SimulatedHuman {
    fn default() -> Self {
        SimulatedHuman { beta: 0.69, alpha: 5 }
    }
}

impl SimulatedHuman {
    pub fn respond(
        &self,
        truth: &Permutation,
        sees_real_inkblots: bool,
        stream: &mut RandomStream,
    ) -> Result<Permutation, AttackError> {
        let k = truth.len();
        if sees_real_inkblots && stream.chance(self.beta) {
            return Ok(random_close(truth, self.alpha.min(k), stream)?);
        }
        Ok(random_permutation(k, stream)?)
    }
}

/// What a strategy may ask the human about.
#[derive(Debug, Clone)]
pub enum HumanQuery {
    /// The inkblots regenerated from a password guess.
    PasswordGuess(String),
    /// Inkblots from arbitrary generation randomness. Always refused.
    RawSeed(Seed),
}

/// Everything a strategy can touch.
///
/// The account record, the true order and the generation seeds are private
/// fields; a strategy sees only public parameters, the stored labels and the
/// two oracles.
pub struct OracleBoundary<'a> {
    record: &'a AccountRecord,
    true_seed: Seed,
    true_order: &'a Permutation,
    human: &'a SimulatedHuman,
    human_stream: &'a mut RandomStream,
    costs: CostModel,
    budget: Option<f64>,
    counts: QueryCounts,
    cracked: bool,
}

impl<'a> OracleBoundary<'a> {
    pub fn k(&self) -> usize {
        self.record.params.k
    }

    pub fn alpha(&self) -> usize {
        self.record.params.alpha
    }

    pub fn labels(&self) -> &[String] {
        &self.record.permuted_labels
    }

    pub fn counts(&self) -> QueryCounts {
        self.counts
    }

    pub fn spent(&self) -> f64 {
        self.counts.cost(&self.costs)
    }

    fn charge(&self, price: f64) -> Result<(), AttackError> {
        match self.budget {
            Some(b) if self.spent() + price > b => Err(AttackError::BudgetExhausted),
            _ => Ok(()),
        }
    }

    /// One black-box hash check, expanded to the tolerant ball exactly as a login does.
    pub fn verify_hash(&mut self, password: &str, response: &Permutation) -> Result<bool, AttackError> {
        self.charge(self.costs.hash_query_cost)?;
        self.counts.hash_queries += 1;
        let ok = !password.is_empty() && self.record.verify_response(password, response)?.accepted;
        self.cracked |= ok;
        Ok(ok)
    }

    pub fn ask_human(&mut self, query: HumanQuery) -> Result<Permutation, AttackError> {
        let password = match query {
            HumanQuery::PasswordGuess(p) => p,
            HumanQuery::RawSeed(_) => {
                return Err(AttackError::ContractViolation(
                    "human queries must be about inkblots derived from a password guess".into(),
                ))
            }
        };
        self.charge(self.costs.human_query_cost)?;
        self.counts.human_queries += 1;
        let sees_real = !password.is_empty() && extract(&password, &self.record.extractor_salt)? == self.true_seed;
        self.human.respond(self.true_order, sees_real, self.human_stream)
    }
}

/// An offline attack against one record.
pub trait AttackStrategy: Sync {
    fn name(&self) -> String;

    /// Returns the recovered password if the strategy believes it found one.
    fn run(&self, dictionary: &[String], oracle: &mut OracleBoundary<'_>) -> Result<Option<String>, AttackError>;
}

/// The built-in strategies.
#[derive(Debug, Clone)]
pub enum Strategy {
    /// Every guess against every order, lexicographically. No human.
    BruteForce,
    /// One human solve per guess, then one hash check with the human's answer.
    HumanPerGuess,
    /// Human solves for the guesses in `subset` only; optionally brute force the rest.
    HumanOnSubset { subset: Vec<String>, sweep_rest: bool },
}

fn sweep_all_orders(pw: &str, oracle: &mut OracleBoundary<'_>) -> Result<bool, AttackError> {
    for perm in Permutation::all(oracle.k())? {
        if oracle.verify_hash(pw, &perm)? {
            return Ok(true);
        }
    }
    Ok(false)
}

fn ask_then_check(pw: &str, oracle: &mut OracleBoundary<'_>) -> Result<bool, AttackError> {
    let answer = oracle.ask_human(HumanQuery::PasswordGuess(pw.to_string()))?;
    oracle.verify_hash(pw, &answer)
}

impl AttackStrategy for Strategy {
    fn name(&self) -> String {
        match self {
            Strategy::BruteForce => "brute-force".into(),
            Strategy::HumanPerGuess => "human-per-guess".into(),
            Strategy::HumanOnSubset { subset, sweep_rest } => {
                format!("human-on-subset(|D'|={}{})", subset.len(), if *sweep_rest { ",sweep" } else { "" })
            }
        }
    }

    fn run(&self, dictionary: &[String], oracle: &mut OracleBoundary<'_>) -> Result<Option<String>, AttackError> {
        match self {
            Strategy::BruteForce => {
                for pw in dictionary {
                    if sweep_all_orders(pw, oracle)? {
                        return Ok(Some(pw.clone()));
                    }
                }
            }
            Strategy::HumanPerGuess => {
                for pw in dictionary {
                    if ask_then_check(pw, oracle)? {
                        return Ok(Some(pw.clone()));
                    }
                }
            }
            Strategy::HumanOnSubset { subset, sweep_rest } => {
                for pw in subset {
                    if ask_then_check(pw, oracle)? {
                        return Ok(Some(pw.clone()));
                    }
                }
                if *sweep_rest {
                    let asked: HashSet<&String> = subset.iter().collect();
                    for pw in dictionary.iter().filter(|p| !asked.contains(p)) {
                        if sweep_all_orders(pw, oracle)? {
                            return Ok(Some(pw.clone()));
                        }
                    }
                }
            }
        }
        Ok(None)
    }
}

/// Everything a sweep point needs besides the strategy.
#[derive(Debug, Clone)]
pub struct AttackSetup {
    pub dictionary: Vec<String>,
    pub params: PuzzleParams,
    pub hash_cost: HashCost,
    pub costs: CostModel,
    /// Spending cap per trial; queries beyond it are refused.
    pub budget: Option<f64>,
    pub human: SimulatedHuman,
    pub trials: usize,
    pub seed: u64,
}

impl AttackSetup {
    pub fn new(dictionary: Vec<String>, params: PuzzleParams, costs: CostModel) -> Self {
        AttackSetup {
            dictionary,
            params,
            hash_cost: HashCost::MIN,
            costs,
            budget: None,
            human: SimulatedHuman::default(),
            trials: 1000,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), AttackError> {
        if self.dictionary.is_empty() {
            return Err(AttackError::Setup("dictionary is empty".into()));
        }
        if self.dictionary.iter().any(String::is_empty) {
            return Err(AttackError::Setup("dictionary contains an empty password".into()));
        }
        if self.trials == 0 {
            return Err(AttackError::Setup("at least one trial is required".into()));
        }
        if !(0.0..=1.0).contains(&self.human.beta) {
            return Err(AttackError::Setup(format!("beta must be a probability, got {}", self.human.beta)));
        }
        self.params.validate().map_err(|e| AttackError::Setup(e.to_string()))
    }
}

/// Aggregate of one strategy over many trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub strategy: String,
    pub dictionary_size: usize,
    pub k: usize,
    pub alpha: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Totals over all trials.
    pub counts: QueryCounts,
    /// Largest per-trial counts.
    pub max_hash_queries: u64,
    pub max_human_queries: u64,
    pub total_cost: f64,
    pub max_trial_cost: f64,
    pub costs: CostModel,
    pub budget: Option<f64>,
    /// Declared distinguishing advantages, reported as slack.
    pub epsilon: f64,
    pub delta: f64,
}

impl AttackReport {
    pub fn mean_human_queries(&self) -> f64 {
        self.counts.human_queries as f64 / self.trials as f64
    }

    pub fn mean_hash_queries(&self) -> f64 {
        self.counts.hash_queries as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    cracked: bool,
    counts: QueryCounts,
}

fn trial_stream(seed: u64, trial: usize, purpose: &[u8]) -> RandomStream {
    let root = Seed::from_bytes(Sha256::digest(seed.to_le_bytes()).to_vec()).expect("32 bytes");
    let mut label = b"gotcha/v1/attacklab/".to_vec();
    label.extend_from_slice(purpose);
    label.extend_from_slice(&(trial as u64).to_be_bytes());
    RandomStream::derive(&root, &label)
}

/// Ground truth of one trial: the record plus the secrets it hides.
pub struct PlantedAccount {
    pub record: AccountRecord,
    pub password: String,
    pub order: Permutation,
}

/// Plants an account with a password drawn uniformly from the dictionary.
pub fn plant_account(setup: &AttackSetup, stream: &mut RandomStream) -> Result<PlantedAccount, AttackError> {
    let password = setup.dictionary[stream.below(setup.dictionary.len() as u64) as usize].clone();
    let extractor_salt = Seed::from_stream(stream, setup.params.seed_bits)?;
    let hash_salt = Seed::from_stream(stream, setup.params.seed_bits)?;
    let order = random_permutation(setup.params.k, stream)?;
    let labels = (1..=setup.params.k).map(|i| format!("label {i}")).collect();
    let record = AccountRecord::create(
        "victim",
        &password,
        extractor_salt,
        hash_salt,
        &order,
        labels,
        setup.params.clone(),
        setup.hash_cost,
    )?;
    Ok(PlantedAccount { record, password, order })
}

/// Runs `strategy` against a single planted account.
pub fn attack_account(
    setup: &AttackSetup,
    planted: &PlantedAccount,
    strategy: &dyn AttackStrategy,
    human_stream: &mut RandomStream,
) -> Result<(bool, QueryCounts), AttackError> {
    let true_seed = extract(&planted.password, &planted.record.extractor_salt)?;
    let mut oracle = OracleBoundary {
        record: &planted.record,
        true_seed,
        true_order: &planted.order,
        human: &setup.human,
        human_stream,
        costs: setup.costs,
        budget: setup.budget,
        counts: QueryCounts::default(),
        cracked: false,
    };
    match strategy.run(&setup.dictionary, &mut oracle) {
        Ok(_) | Err(AttackError::BudgetExhausted) => Ok((oracle.cracked, oracle.counts)),
        Err(e) => Err(e),
    }
}

/// Monte Carlo over `setup.trials` independently planted accounts. Trials run in parallel; counts merge exactly.
pub fn run_attack(setup: &AttackSetup, strategy: &dyn AttackStrategy) -> Result<AttackReport, AttackError> {
    setup.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..setup.trials)
        .into_par_iter()
        .map(|t| {
            let mut plant_stream = trial_stream(setup.seed, t, b"plant/");
            let mut human_stream = trial_stream(setup.seed, t, b"human/");
            let planted = plant_account(setup, &mut plant_stream)?;
            let (cracked, counts) = attack_account(setup, &planted, strategy, &mut human_stream)?;
            Ok(TrialOutcome { cracked, counts })
        })
        .collect::<Result<_, AttackError>>()?;

    let mut counts = QueryCounts::default();
    let (mut max_h, mut max_hh, mut max_cost, mut successes) = (0, 0, 0.0f64, 0);
    for o in &outcomes {
        counts.hash_queries += o.counts.hash_queries;
        counts.human_queries += o.counts.human_queries;
        max_h = max_h.max(o.counts.hash_queries);
        max_hh = max_hh.max(o.counts.human_queries);
        max_cost = max_cost.max(o.counts.cost(&setup.costs));
        successes += o.cracked as usize;
    }
    Ok(AttackReport {
        strategy: strategy.name(),
        dictionary_size: setup.dictionary.len(),
        k: setup.params.k,
        alpha: setup.params.alpha,
        trials: setup.trials,
        successes,
        success_rate: successes as f64 / setup.trials as f64,
        counts,
        max_hash_queries: max_h,
        max_human_queries: max_hh,
        total_cost: counts.cost(&setup.costs),
        max_trial_cost: max_cost,
        costs: setup.costs,
        budget: setup.budget,
        epsilon: setup.params.epsilon,
        delta: setup.params.delta,
    })
}

/// Min-entropy in bits of a uniform answer, measured against a check that
/// accepts a whole radius-`alpha` ball: `log2(k! / |ball|)`. Equals `log2 k!` at `alpha = 0`.
pub fn uniform_min_entropy(k: usize, alpha: usize) -> Result<f64, AttackError> {
    Ok((factorial(k) as f64 / count_close(k, alpha)? as f64).log2())
}

/// Smallest budget at which success probability `gamma` is not ruled out:
/// `gamma |D| 2^mu c_h + n_H c_H`.
pub fn theorem1_bound(mu_bits: f64, costs: &CostModel, dictionary_size: usize, gamma: f64, human_queries: u64) -> f64 {
    gamma * dictionary_size as f64 * mu_bits.exp2() * costs.hash_query_cost
        + human_queries as f64 * costs.human_query_cost
}

/// The largest `gamma` a given spend can buy: inverse of [`theorem1_bound`], clamped at 0.
pub fn gamma_for_budget(mu_bits: f64, costs: &CostModel, dictionary_size: usize, spend: f64, human_queries: u64) -> f64 {
    let hash_part = spend - human_queries as f64 * costs.human_query_cost;
    let denom = dictionary_size as f64 * mu_bits.exp2() * costs.hash_query_cost;
    if denom == 0.0 {
        return if hash_part >= 0.0 { 1.0 } else { 0.0 };
    }
    (hash_part / denom).max(0.0)
}

/// Comparison of a report with the cost bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub mu_bits: f64,
    /// `gamma` bought by the worst-case per-trial spend.
    pub gamma: f64,
    /// `gamma + n_H / |D| + slack`
    pub ceiling: f64,
    pub success_rate: f64,
    pub holds: bool,
}

/// Holds a report against the bound using worst-case per-trial spend and human queries.
pub fn check_against_bound(report: &AttackReport, mu_bits: f64, slack: f64) -> BoundCheck {
    let gamma = gamma_for_budget(
        mu_bits,
        &report.costs,
        report.dictionary_size,
        report.max_trial_cost,
        report.max_human_queries,
    );
    let ceiling = gamma + report.max_human_queries as f64 / report.dictionary_size as f64 + slack;
    BoundCheck { mu_bits, gamma, ceiling, success_rate: report.success_rate, holds: report.success_rate <= ceiling }
}

/// Cost of buying solutions to a whole pre-generated CAPTCHA database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HospReport {
    pub database_size: u128,
    pub full_solve_cost: Decimal,
    pub half_solve_cost: Decimal,
}

/// `|D| = total_bytes / captcha_bytes` (integer division); costs `|D| C_H` and `|D| C_H / 2`.
pub fn hosp_economics(total_bytes: u128, captcha_bytes: u128, human_cost: Decimal) -> Result<HospReport, AttackError> {
    if captcha_bytes == 0 {
        return Err(AttackError::Setup("captcha size must be positive".into()));
    }
    if human_cost.is_sign_negative() {
        return Err(AttackError::Setup("human cost must be non-negative".into()));
    }
    let database_size = total_bytes / captcha_bytes;
    let size = Decimal::from_i128_with_scale(
        i128::try_from(database_size).map_err(|_| AttackError::Setup("database too large".into()))?,
        0,
    );
    let full = size.checked_mul(human_cost).ok_or_else(|| AttackError::Setup("cost overflow".into()))?;
    Ok(HospReport { database_size, full_solve_cost: full.normalize(), half_solve_cost: (full / Decimal::TWO).normalize() })
}

/// Plain-text table of reports, one row per strategy.
pub fn render_table(reports: &[AttackReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:>6} {:>3} {:>5} {:>7} {:>9} {:>10} {:>10} {:>12} {:>12}",
        "strategy", "|D|", "k", "alpha", "trials", "success", "n_h", "n_H", "total_cost", "max_cost"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<28} {:>6} {:>3} {:>5} {:>7} {:>9.4} {:>10} {:>10} {:>12.3} {:>12.3}",
            r.strategy,
            r.dictionary_size,
            r.k,
            r.alpha,
            r.trials,
            r.success_rate,
            r.counts.hash_queries,
            r.counts.human_queries,
            r.total_cost,
            r.max_trial_cost
        );
    }
    out
}
