//! Command-line front end. Each subcommand parses arguments, calls one
//! library operation and prints the result as text or, with `--json`, JSON.

use std::fs;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rust_decimal::Decimal;
use serde_json::json;
use thiserror::Error;

use crate::attacklab::{
    check_against_bound, hosp_economics, render_table, run_attack, uniform_min_entropy, AttackError, AttackSetup,
    CostModel, SimulatedHuman, Strategy,
};
use crate::authcore::{AccountStore, AuthConfig, AuthError, Authenticator, HashCost, StoreError};
use crate::authservice::{serve, ServiceConfig, ServiceError};
use crate::challengekit::{
    brute_force_solve, generate_challenge, verify_solution, ChallengeError, ChallengeSecret,
    ChallengeTuple, PasswordSpace, DEFAULT_SOLVE_BUDGET,
};
use crate::gotcha::{GotchaError, InkblotSet, PuzzleParams};
use crate::inkblot::{export_png, InkblotError, InkblotImage};
use crate::matching::{count_close, count_close_upper_bound, factorial, MatchingError, Permutation};
use crate::seedcore::{extract, RandomStream, Seed, SeedError};

/// Process exit codes. Documented in docs/CLI.md.
pub mod exit {
    pub const OK: i32 = 0;
    /// The operation ran but the answer is no: login denied, solution wrong, nothing found.
    pub const NEGATIVE: i32 = 1;
    /// Bad flags or arguments (clap's own code).
    pub const USAGE: i32 = 2;
    pub const INVALID_INPUT: i32 = 3;
    pub const IO: i32 = 4;
    pub const STORE: i32 = 5;
    pub const AUTH: i32 = 6;
    pub const BUDGET: i32 = 7;
    pub const SERVICE: i32 = 8;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Negative(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Auth(AuthError),
    #[error(transparent)]
    Challenge(ChallengeError),
    #[error(transparent)]
    Attack(AttackError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Negative(_) => exit::NEGATIVE,
            CliError::Invalid(_) => exit::INVALID_INPUT,
            CliError::Io { .. } => exit::IO,
            CliError::Store(_) | CliError::Auth(AuthError::Store(_)) => exit::STORE,
            CliError::Auth(
                AuthError::DuplicateUser(_)
                | AuthError::LockedOut { .. }
                | AuthError::SessionExpired
                | AuthError::SessionNotFound,
            ) => exit::AUTH,
            CliError::Auth(_) => exit::INVALID_INPUT,
            CliError::Challenge(ChallengeError::BudgetExceeded { .. }) => exit::BUDGET,
            CliError::Challenge(_) | CliError::Attack(_) => exit::INVALID_INPUT,
            CliError::Service(ServiceError::Store(_)) => exit::STORE,
            CliError::Service(_) => exit::SERVICE,
        }
    }
}

impl From<AuthError> for CliError {
    fn from(e: AuthError) -> Self {
        match e {
            AuthError::Store(s) => CliError::Store(s),
            other => CliError::Auth(other),
        }
    }
}

impl From<ChallengeError> for CliError {
    fn from(e: ChallengeError) -> Self {
        CliError::Challenge(e)
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        CliError::Attack(e)
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        }
    )*};
}

invalid_from!(GotchaError, MatchingError, SeedError, InkblotError);

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(name = "gotcha", version, about = "Inkblot password hardening toolkit")]
pub struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Allow fixed seeds. Never use for real accounts.
    #[arg(long, global = true)]
    pub test_mode: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct PuzzleArgs {
    /// Number of inkblots per account.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Tolerated number of mismatched positions at login.
    #[arg(long, default_value_t = 5)]
    pub alpha: usize,
}

impl PuzzleArgs {
    fn params(&self) -> Result<PuzzleParams, CliError> {
        Ok(PuzzleParams::new(self.k, self.alpha)?)
    }
}

/// Hash cost as `min`, `default`, `high` or a level 0..=31 (2^level iterations).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostArg(pub HashCost);

impl FromStr for CostArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let c = match s {
            "min" => HashCost::MIN,
            "default" => HashCost::DEFAULT,
            "high" => HashCost::HIGH,
            n => {
                let level: u8 = n.parse().map_err(|_| format!("expected min, default, high or 0..=31, got {n:?}"))?;
                HashCost::new(level).map_err(|e| e.to_string())?
            }
        };
        Ok(CostArg(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    BruteForce,
    HumanPerGuess,
    HumanOnSubset,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP authentication service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Account store file; omitted means in-memory.
        #[arg(long)]
        store: Option<PathBuf>,
        /// JSON-lines audit log file.
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Browser origin allowed by CORS, e.g. http://localhost:5173.
        #[arg(long)]
        cors_origin: Option<String>,
        #[command(flatten)]
        puzzle: PuzzleArgs,
        #[arg(long, default_value = "default")]
        hash_cost: CostArg,
    },
    /// Write k inkblot PNGs in canonical order.
    InkblotGen {
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Generation seed r1 as hex. Requires --test-mode.
        #[arg(long, conflicts_with_all = ["password", "salt"])]
        seed: Option<String>,
        /// Derive r1 from this password and --salt.
        #[arg(long, requires = "salt")]
        password: Option<String>,
        /// Public salt r' as hex.
        #[arg(long, requires = "password")]
        salt: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Register an account interactively. Images are written as PNG files.
    Register {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        username: String,
        /// Read from stdin when omitted.
        #[arg(long)]
        password: Option<String>,
        #[command(flatten)]
        puzzle: PuzzleArgs,
        #[arg(long, default_value = "default")]
        hash_cost: CostArg,
        /// Directory for the inkblot files; a fresh temporary directory by default.
        #[arg(long)]
        images_dir: Option<PathBuf>,
    },
    /// Log in interactively against a store file.
    Login {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        username: String,
        #[arg(long)]
        password: Option<String>,
        #[arg(long)]
        images_dir: Option<PathBuf>,
    },
    /// Publish an open challenge over a numeric password space.
    ChallengeGen {
        /// Passwords 0..N.
        #[arg(long)]
        space: u64,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "high")]
        cost: CostArg,
        /// Comma-separated labels for the images in presentation order. Asked interactively when omitted.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        /// RNG seed as hex. Requires --test-mode.
        #[arg(long)]
        seed: Option<String>,
        /// Challenge file to write.
        #[arg(long)]
        out: PathBuf,
        /// Where to keep the answer.
        #[arg(long)]
        secret_out: Option<PathBuf>,
        /// Where to write the labelling inkblots.
        #[arg(long)]
        images_dir: Option<PathBuf>,
    },
    /// Check a proposed solution against a challenge file.
    ChallengeVerify {
        #[arg(long)]
        challenge: PathBuf,
        #[arg(long)]
        password: String,
        /// One-based permutation, e.g. 3,1,2.
        #[arg(long, value_delimiter = ',')]
        permutation: Vec<usize>,
    },
    /// Brute-force a challenge file without a human.
    ChallengeSolve {
        #[arg(long)]
        challenge: PathBuf,
        /// Largest number of hash evaluations allowed.
        #[arg(long, default_value_t = DEFAULT_SOLVE_BUDGET)]
        budget: u128,
    },
    /// Monte Carlo offline attack simulation.
    AttackSim {
        #[arg(long, value_enum, default_value_t = StrategyArg::BruteForce)]
        strategy: StrategyArg,
        /// One password per line.
        #[arg(long, conflicts_with = "dict_size")]
        dictionary: Option<PathBuf>,
        /// Synthetic dictionary of this many passwords.
        #[arg(long, default_value_t = 16)]
        dict_size: usize,
        /// For human-on-subset: how many guesses get a human solve.
        #[arg(long, default_value_t = 0)]
        subset_size: usize,
        /// For human-on-subset: brute force the remaining guesses.
        #[arg(long)]
        sweep_rest: bool,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        alpha: usize,
        /// Price of one hash oracle call.
        #[arg(long, default_value_t = 1.0)]
        hash_price: f64,
        /// Price of one human solve.
        #[arg(long, default_value_t = 1000.0)]
        human_price: f64,
        /// Per-trial spending cap.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value_t = 0.69)]
        beta: f64,
        /// Distance within which an accurate human answers.
        #[arg(long, default_value_t = 5)]
        human_alpha: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Added to the bound ceiling as Monte Carlo slack.
        #[arg(long, default_value_t = 0.05)]
        slack: f64,
    },
    /// Price solving a stored CAPTCHA database.
    HospEcon {
        /// Total storage in bytes.
        #[arg(long, default_value_t = 8_000_000_000_000)]
        total_bytes: u128,
        #[arg(long, default_value_t = 8_000)]
        captcha_bytes: u128,
        /// Dollars per human solve.
        #[arg(long, default_value = "0.001")]
        human_cost: String,
    },
    /// Size of the tolerance ball around a permutation.
    CountPerms {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alpha: usize,
    },
}

/// Terminal I/O for interactive commands.
pub struct Io<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
}

impl Io<'_> {
    fn say(&mut self, text: impl AsRef<str>) -> Result<(), CliError> {
        writeln!(self.out, "{}", text.as_ref()).map_err(io_err("stdout"))
    }

    fn ask(&mut self, prompt: &str) -> Result<String, CliError> {
        write!(self.out, "{prompt}").map_err(io_err("stdout"))?;
        self.out.flush().map_err(io_err("stdout"))?;
        let mut line = String::new();
        if self.input.read_line(&mut line).map_err(io_err("stdin"))? == 0 {
            return Err(CliError::Invalid("unexpected end of input".into()));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    }
}

fn write_pngs(dir: &Path, images: &[InkblotImage]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(format!("create {}", dir.display())))?;
    images
        .iter()
        .enumerate()
        .map(|(pos, img)| {
            // Named by position shown; the canonical index would reveal the presentation order.
            let path = dir.join(format!("inkblot-{:02}.png", pos + 1));
            fs::write(&path, export_png(img)?).map_err(io_err(format!("write {}", path.display())))?;
            Ok(path)
        })
        .collect()
}

fn images_dir(explicit: Option<PathBuf>) -> Result<PathBuf, CliError> {
    match explicit {
        Some(d) => Ok(d),
        None => {
            let mut seed = [0u8; 8];
            rand::RngCore::fill_bytes(&mut rand::rng(), &mut seed);
            Ok(std::env::temp_dir().join(format!("gotcha-{}", hex::encode(seed))))
        }
    }
}

fn test_seed(hex_seed: Option<&str>, test_mode: bool) -> Result<Option<Seed>, CliError> {
    match hex_seed {
        None => Ok(None),
        Some(_) if !test_mode => Err(CliError::Invalid("--seed is only accepted with --test-mode".into())),
        Some(h) => Ok(Some(Seed::from_hex(h)?)),
    }
}

fn fresh_seed() -> Result<Seed, CliError> {
    Ok(Seed::random(&mut rand::rng(), 256)?)
}

fn read_password(io: &mut Io<'_>, given: Option<String>) -> Result<String, CliError> {
    match given {
        Some(p) => Ok(p),
        None => io.ask("password: "),
    }
}

fn parse_choice(text: &str, k: usize) -> Result<usize, CliError> {
    match text.trim().parse::<usize>() {
        Ok(n) if (1..=k).contains(&n) => Ok(n),
        _ => Err(CliError::Invalid(format!("expected an image number 1..={k}, got {text:?}"))),
    }
}

/// Runs one parsed command.
pub fn run(cli: Cli, io: &mut Io<'_>) -> Result<(), CliError> {
    let json = cli.json;
    match cli.command {
        Command::Serve { bind, store, audit, cors_origin, puzzle, hash_cost } => {
            let config = ServiceConfig {
                bind,
                store_path: store,
                audit_path: audit,
                auth: AuthConfig { params: puzzle.params()?, hash_cost: hash_cost.0, ..AuthConfig::default() },
                cors_origin,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(io_err("start runtime"))?;
            runtime.block_on(serve(config))?;
            Ok(())
        }
        Command::InkblotGen { k, seed, password, salt, out } => {
            let r1 = match (test_seed(seed.as_deref(), cli.test_mode)?, password, salt) {
                (Some(s), _, _) => s,
                (None, Some(pw), Some(salt)) => extract(&pw, &Seed::from_hex(&salt)?)?,
                _ => fresh_seed()?,
            };
            PuzzleParams::new(k, 0)?;
            let paths = write_pngs(&out, &InkblotSet::canonical(k, r1).render_all())?;
            if json {
                io.say(json!({ "files": paths }).to_string())
            } else {
                paths.iter().try_for_each(|p| io.say(p.display().to_string()))
            }
        }
        Command::Register { store, username, password, puzzle, hash_cost, images_dir: dir } => {
            let config = AuthConfig { params: puzzle.params()?, hash_cost: hash_cost.0, ..AuthConfig::default() };
            let auth = Authenticator::builder(config).store(AccountStore::open(&store)?).build()?;
            let password = read_password(io, password)?;
            let dir = images_dir(dir)?;
            let mut ticket = auth.begin_registration(&username, &password)?;
            let labels = loop {
                let paths = write_pngs(&dir, &ticket.inkblots.render_all())?;
                io.say("Give each inkblot a short creative title. Enter :reject to get new inkblots.")?;
                let mut labels = Vec::with_capacity(paths.len());
                let mut rejected = false;
                for path in &paths {
                    let answer = io.ask(&format!("{}: ", path.display()))?;
                    if answer.trim() == ":reject" {
                        rejected = true;
                        break;
                    }
                    labels.push(answer);
                }
                if !rejected {
                    break labels;
                }
                ticket = auth.reject_registration(&ticket.token)?;
            };
            let done = auth.complete_registration(&ticket.token, &labels)?;
            if json {
                io.say(json!({ "registered": done.record.username, "duplicate_labels": done.duplicate_labels }).to_string())
            } else {
                if !done.duplicate_labels.is_empty() {
                    io.say(format!("warning: repeated labels at positions {:?}", done.duplicate_labels))?;
                }
                io.say(format!("registered {}", done.record.username))
            }
        }
        Command::Login { store, username, password, images_dir: dir } => {
            let auth = Authenticator::builder(AuthConfig::default()).store(AccountStore::open(&store)?).build()?;
            let password = read_password(io, password)?;
            let ticket = auth.begin_login(&username, &password)?;
            let k = ticket.labels.len();
            let paths = write_pngs(&images_dir(dir)?, &ticket.inkblots.render_all())?;
            for (j, p) in paths.iter().enumerate() {
                io.say(format!("image {}: {}", j + 1, p.display()))?;
            }
            io.say("For each title, enter the number of the matching image.")?;
            let mut choices = Vec::with_capacity(k);
            for &w in &ticket.display_order {
                choices.push(parse_choice(&io.ask(&format!("{}: ", ticket.labels[w]))?, k)?);
            }
            let response = ticket.response_from_display(&choices)?;
            let outcome = auth.complete_login(&ticket.token, &response)?;
            if json {
                io.say(json!({ "accepted": outcome.accepted }).to_string())?;
            } else {
                io.say(if outcome.accepted { "accepted" } else { "denied" })?;
            }
            if outcome.accepted {
                Ok(())
            } else {
                Err(CliError::Negative("login denied".into()))
            }
        }
        Command::ChallengeGen { space, k, cost, labels, seed, out, secret_out, images_dir: dir } => {
            let root = match test_seed(seed.as_deref(), cli.test_mode)? {
                Some(s) => s,
                None => fresh_seed()?,
            };
            let space = PasswordSpace::new(0..space)?;
            let mut stream = RandomStream::from_seed(&root);
            // Same draws twice: once to learn the inkblots, once with the human's labels.
            let placeholders: Vec<String> = (1..=k).map(|i| format!("image {i}")).collect();
            let (_, preview) = generate_challenge(space, k, &placeholders, cost.0, &mut stream.clone())?;
            let images = preview.labelling_inkblots()?;
            let paths = match dir {
                Some(d) => write_pngs(&d, &images)?,
                None if labels.is_none() => write_pngs(&images_dir(None)?, &images)?,
                None => Vec::new(),
            };
            let labels = match labels {
                Some(l) => l,
                None => paths.iter().map(|p| io.ask(&format!("{}: ", p.display()))).collect::<Result<_, _>>()?,
            };
            let (tuple, secret) = generate_challenge(space, k, &labels, cost.0, &mut stream)?;
            fs::write(&out, tuple.to_json()?).map_err(io_err(format!("write {}", out.display())))?;
            if let Some(p) = &secret_out {
                let text = serde_json::to_string_pretty(&secret).map_err(ChallengeError::from)?;
                fs::write(p, text).map_err(io_err(format!("write {}", p.display())))?;
            }
            if json {
                io.say(json!({ "challenge": out, "secret": secret_out, "images": paths }).to_string())
            } else {
                io.say(format!("wrote {}", out.display()))
            }
        }
        Command::ChallengeVerify { challenge, password, permutation } => {
            let tuple = load_challenge(&challenge)?;
            let perm = Permutation::from_one_based(&permutation)?;
            let ok = verify_solution(&tuple, &password, &perm);
            if json {
                io.say(json!({ "valid": ok }).to_string())?;
            } else {
                io.say(if ok { "valid" } else { "invalid" })?;
            }
            if ok {
                Ok(())
            } else {
                Err(CliError::Negative("solution does not match".into()))
            }
        }
        Command::ChallengeSolve { challenge, budget } => {
            let tuple = load_challenge(&challenge)?;
            let report = brute_force_solve(&tuple, budget)?;
            if json {
                io.say(serde_json::to_string(&report).map_err(ChallengeError::from)?)?;
            } else {
                match &report.solution {
                    Some(ChallengeSecret { password, permutation }) => io.say(format!(
                        "password {password} permutation {} after {} hash calls",
                        join(&permutation.to_one_based()),
                        report.hash_calls
                    ))?,
                    None => io.say(format!("no solution after {} hash calls", report.hash_calls))?,
                }
            }
            match report.solution {
                Some(_) => Ok(()),
                None => Err(CliError::Negative("no solution in the password space".into())),
            }
        }
        Command::AttackSim {
            strategy,
            dictionary,
            dict_size,
            subset_size,
            sweep_rest,
            k,
            alpha,
            hash_price,
            human_price,
            budget,
            beta,
            human_alpha,
            trials,
            seed,
            slack,
        } => {
            let dictionary = match dictionary {
                Some(path) => fs::read_to_string(&path)
                    .map_err(io_err(format!("read {}", path.display())))?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect(),
                None => (0..dict_size).map(|i| format!("password{i}")).collect::<Vec<_>>(),
            };
            let strategy = match strategy {
                StrategyArg::BruteForce => Strategy::BruteForce,
                StrategyArg::HumanPerGuess => Strategy::HumanPerGuess,
                StrategyArg::HumanOnSubset => Strategy::HumanOnSubset {
                    subset: dictionary.iter().take(subset_size).cloned().collect(),
                    sweep_rest,
                },
            };
            let mut setup = AttackSetup::new(dictionary, PuzzleParams::new(k, alpha)?, CostModel::new(hash_price, human_price)?);
            setup.budget = budget;
            setup.human = SimulatedHuman { beta, alpha: human_alpha };
            setup.trials = trials;
            setup.seed = seed;
            let report = run_attack(&setup, &strategy)?;
            let mu = uniform_min_entropy(k, alpha)?;
            let check = check_against_bound(&report, mu, slack);
            if json {
                io.say(json!({ "report": report, "bound": check }).to_string())
            } else {
                io.say(render_table(std::slice::from_ref(&report)).trim_end())?;
                io.say(format!(
                    "mu {:.3} bits, gamma bought {:.4}, ceiling {:.4}, observed {:.4}: {}",
                    check.mu_bits,
                    check.gamma,
                    check.ceiling,
                    check.success_rate,
                    if check.holds { "within bound" } else { "ABOVE BOUND" }
                ))
            }
        }
        Command::HospEcon { total_bytes, captcha_bytes, human_cost } => {
            let cost = Decimal::from_str(&human_cost).map_err(|e| CliError::Invalid(format!("human cost: {e}")))?;
            let r = hosp_economics(total_bytes, captcha_bytes, cost)?;
            if json {
                io.say(serde_json::to_string(&r).expect("report serializes"))
            } else {
                io.say(format!("database size {}", r.database_size))?;
                io.say(format!("full solve ${}", r.full_solve_cost))?;
                io.say(format!("half solve ${}", r.half_solve_cost))?;
                io.say("note: total bytes is the whole storage; 8e12 means two 4 TB drives")
            }
        }
        Command::CountPerms { k, alpha } => {
            let count = count_close(k, alpha)?;
            let bound = count_close_upper_bound(k, alpha)?;
            let fraction = count as f64 / factorial(k) as f64;
            if json {
                io.say(json!({ "k": k, "alpha": alpha, "count": count.to_string(), "bound": bound.to_string(), "fraction": fraction }).to_string())
            } else {
                io.say(format!("{count} (bound {bound}, fraction {fraction:.2e})"))
            }
        }
    }
}

fn load_challenge(path: &Path) -> Result<ChallengeTuple, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("read {}", path.display())))?;
    Ok(ChallengeTuple::from_json(&text)?)
}

fn join(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn run_args(args: &[&str], stdin: &str) -> (Result<(), CliError>, String) {
        let cli = Cli::try_parse_from(std::iter::once("gotcha").chain(args.iter().copied())).unwrap();
        let mut input = Cursor::new(stdin.as_bytes().to_vec());
        let mut out = Vec::new();
        let r = run(cli, &mut Io { input: &mut input, out: &mut out });
        (r, String::from_utf8(out).unwrap())
    }

    #[test]
    fn count_perms_matches_published_line() {
        let (r, out) = run_args(&["count-perms", "--k", "10", "--alpha", "5"], "");
        r.unwrap();
        assert_eq!(out.trim(), "13264 (bound 36091, fraction 3.66e-3)");
    }

    #[test]
    fn seed_needs_test_mode() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (r, _) = run_args(&["inkblot-gen", "--k", "2", "--seed", &"11".repeat(32), "--out", out], "");
        assert_eq!(r.unwrap_err().exit_code(), exit::INVALID_INPUT);
        let (r, _) = run_args(&["--test-mode", "inkblot-gen", "--k", "2", "--seed", &"11".repeat(32), "--out", out], "");
        r.unwrap();
        assert!(dir.path().join("inkblot-02.png").exists());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let e = Cli::try_parse_from(["gotcha", "count-perms", "--bogus"]).unwrap_err();
        assert_eq!(e.exit_code(), exit::USAGE);
    }

    #[test]
    fn hosp_econ_text() {
        let (r, out) = run_args(&["hosp-econ"], "");
        r.unwrap();
        assert!(out.contains("database size 1000000000"));
        assert!(out.contains("full solve $1000000"));
        assert!(out.contains("half solve $500000"));
    }

    #[test]
    fn challenge_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ch = dir.path().join("c.json");
        let secret = dir.path().join("s.json");
        let (r, _) = run_args(
            &[
                "--test-mode", "challenge-gen", "--space", "100", "--k", "3", "--cost", "min", "--labels", "a,b,c",
                "--seed", &"07".repeat(32), "--out", ch.to_str().unwrap(), "--secret-out", secret.to_str().unwrap(),
            ],
            "",
        );
        r.unwrap();
        let s: ChallengeSecret = serde_json::from_str(&fs::read_to_string(&secret).unwrap()).unwrap();
        let (r, out) = run_args(&["challenge-solve", "--challenge", ch.to_str().unwrap()], "");
        r.unwrap();
        assert!(out.starts_with(&format!("password {} permutation {}", s.password, join(&s.permutation.to_one_based()))));
        let (r, _) = run_args(&["challenge-solve", "--challenge", ch.to_str().unwrap(), "--budget", "10"], "");
        assert_eq!(r.unwrap_err().exit_code(), exit::BUDGET);
        let (r, _) = run_args(
            &["challenge-verify", "--challenge", ch.to_str().unwrap(), "--password", "100000", "--permutation", "1,2,3"],
            "",
        );
        assert_eq!(r.unwrap_err().exit_code(), exit::NEGATIVE);
    }

    #[test]
    fn interactive_register_and_login() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("accounts.tsv");
        let imgs = dir.path().join("reg");
        let (r, _) = run_args(
            &[
                "register", "--store", store.to_str().unwrap(), "--username", "cy", "--k", "3", "--alpha", "0",
                "--hash-cost", "min", "--images-dir", imgs.to_str().unwrap(),
            ],
            "pw\n:reject\npear\nfig\nkiwi\n",
        );
        r.unwrap();
        let presented: Vec<Vec<u8>> =
            (1..=3).map(|j| fs::read(imgs.join(format!("inkblot-{j:02}.png"))).unwrap()).collect();

        // Solve the login by matching image bytes to what was labelled.
        let login_dir = dir.path().join("login");
        let cli = Cli::try_parse_from([
            "gotcha", "login", "--store", store.to_str().unwrap(), "--username", "cy", "--password", "pw",
            "--images-dir", login_dir.to_str().unwrap(),
        ])
        .unwrap();
        // Answers are needed before the images exist, so derive them from a dry run of begin_login.
        let auth = Authenticator::builder(AuthConfig::default()).store(AccountStore::open(&store).unwrap()).build().unwrap();
        let ticket = auth.begin_login("cy", "pw").unwrap();
        let canonical: Vec<Vec<u8>> = ticket.inkblots.render_all().iter().map(|i| export_png(i).unwrap()).collect();
        let label_to_image = |label: &str| {
            let wire = ["pear", "fig", "kiwi"].iter().position(|l| *l == label).unwrap();
            canonical.iter().position(|c| *c == presented[wire]).unwrap() + 1
        };
        let answers: String =
            ticket.display_order.iter().map(|&w| format!("{}\n", label_to_image(&ticket.labels[w]))).collect();
        let mut input = Cursor::new(answers.into_bytes());
        let mut out = Vec::new();
        run(cli, &mut Io { input: &mut input, out: &mut out }).unwrap();
        assert!(String::from_utf8(out).unwrap().trim_end().ends_with("accepted"));

        let (r, _) = run_args(
            &["login", "--store", store.to_str().unwrap(), "--username", "cy", "--password", "nope",
              "--images-dir", login_dir.to_str().unwrap()],
            "1\n2\n3\n",
        );
        assert_eq!(r.unwrap_err().exit_code(), exit::NEGATIVE);
    }

    #[test]
    fn attack_sim_reports_bound() {
        let (r, out) = run_args(&["attack-sim", "--trials", "50", "--dict-size", "8"], "");
        r.unwrap();
        assert!(out.contains("within bound"), "{out}");
    }
}
