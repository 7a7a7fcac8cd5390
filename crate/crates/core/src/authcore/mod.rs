//! Account creation and authentication.
//!
//! Registration runs in two rounds. [`Authenticator::begin_registration`]
//! draws a fresh public extractor salt `r'` and order seed `r2`, derives
//! `r1 = extract(pw, r')`, and returns the inkblots in presentation order.
//! [`Authenticator::complete_registration`] takes the user's labels (in that
//! same order), draws the hash salt `s`, and stores
//! `(u, r', s, h(u, s, pw, order), labels)`.
//!
//! Login also runs in two rounds. [`Authenticator::begin_login`] regenerates
//! the inkblots from the submitted password and pairs them with the stored
//! labels. [`Authenticator::complete_login`] hashes every permutation within
//! distance `alpha` of the user's answer and accepts if any hash matches.

mod audit;
mod record;
mod session;
mod store;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use hkdf::Hkdf;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use thiserror::Error;

pub use audit::{AuditEntry, AuditLog, AuditOutcome};
pub use record::{
    account_hash, challenge_hash, encode_hash_input, slow_hash, AccountRecord, HashCost, LoginCheck,
    ACCOUNT_HASH_LABEL, CHALLENGE_HASH_LABEL, DIGEST_BYTES,
};
pub(crate) use record::digests_equal;
pub use session::{Clock, InvalidToken, ManualClock, SessionToken, SystemClock};
pub use store::{decode_line, encode_line, AccountStore, StoreError, STORE_HEADER};

use crate::gotcha::{alphabetical_order, normalize_labels, presentation_order, GotchaError, InkblotSet, PuzzleParams};
use crate::inkblot::InkblotImage;
use crate::matching::{random_permutation, MatchingError, Permutation};
use crate::seedcore::{extract, RandomStream, Seed, SeedError};
use session::{LoginSession, LoginTarget, RegistrationSession};

pub const MAX_USERNAME_BYTES: usize = 64;

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("username {0:?} is already registered")]
    DuplicateUser(String),
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("invalid username: {0}")]
    InvalidUsername(String),
    #[error("no such session")]
    SessionNotFound,
    #[error("session expired")]
    SessionExpired,
    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("response has size {got}, challenge has {expected} images")]
    ResponseSize { expected: usize, got: usize },
    #[error("account locked for {remaining_secs} more seconds")]
    LockedOut { remaining_secs: u64 },
    #[error("image index {0} out of range")]
    ImageIndex(usize),
    #[error("hash cost level {0} is out of range")]
    InvalidHashCost(u8),
    #[error("invalid label: {0}")]
    Label(#[source] GotchaError),
    #[error(transparent)]
    Params(GotchaError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<SeedError> for AuthError {
    fn from(e: SeedError) -> Self {
        match e {
            SeedError::EmptyPassword => AuthError::EmptyPassword,
            other => AuthError::Params(GotchaError::Params(other.to_string())),
        }
    }
}

impl From<GotchaError> for AuthError {
    fn from(e: GotchaError) -> Self {
        match e {
            GotchaError::LabelCount { expected, got } => AuthError::LabelCount { expected, got },
            GotchaError::EmptyLabel { .. } | GotchaError::LabelTooLong { .. } => AuthError::Label(e),
            GotchaError::Matching(m) => AuthError::Matching(m),
            other => AuthError::Params(other),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuthConfig {
    pub params: PuzzleParams,
    pub hash_cost: HashCost,
    pub session_ttl: Duration,
    /// Consecutive denied logins before the account is locked.
    pub max_strikes: u32,
    pub lockout: Duration,
}

impl Default for AuthConfig {
    fn default() -> Self {
        AuthConfig {
            params: PuzzleParams::default(),
            hash_cost: HashCost::DEFAULT,
            session_ttl: Duration::from_secs(15 * 60),
            max_strikes: 10,
            lockout: Duration::from_secs(4 * 60 * 60),
        }
    }
}

/// Handed back by registration: the token and the images to label.
#[derive(Debug, Clone)]
pub struct RegistrationTicket {
    pub token: SessionToken,
    pub expires_at: Duration,
    /// Images in presentation order. Holds `r1`; keep it server-side.
    pub inkblots: InkblotSet,
}

#[derive(Debug, Clone)]
pub struct Registered {
    pub record: AccountRecord,
    /// One-based positions whose label repeats an earlier label.
    pub duplicate_labels: Vec<usize>,
}

/// Handed back by login: the challenge labels and the regenerated images.
#[derive(Debug, Clone)]
pub struct LoginTicket {
    pub token: SessionToken,
    pub expires_at: Duration,
    /// Stored labels in wire (presentation) order.
    pub labels: Vec<String>,
    /// `display_order[d]` is the wire index of the `d`-th label shown alphabetically.
    pub display_order: Vec<usize>,
    /// Images in canonical order. Holds `r1'`; keep it server-side.
    pub inkblots: InkblotSet,
}

impl LoginTicket {
    /// Converts per-displayed-label image choices (one-based) into a wire-order response.
    pub fn response_from_display(&self, display_choices: &[usize]) -> Result<Permutation, AuthError> {
        response_from_display(&self.display_order, display_choices)
    }
}

/// Wire-order response from choices made against alphabetically displayed labels.
pub fn response_from_display(display_order: &[usize], display_choices: &[usize]) -> Result<Permutation, AuthError> {
    if display_choices.len() != display_order.len() {
        return Err(AuthError::ResponseSize { expected: display_order.len(), got: display_choices.len() });
    }
    let mut wire = vec![0usize; display_order.len()];
    for (d, &w) in display_order.iter().enumerate() {
        wire[w] = display_choices[d];
    }
    Ok(Permutation::from_one_based(&wire)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoginOutcome {
    pub accepted: bool,
    pub hash_evaluations: u64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Strikes {
    failures: u32,
    locked_until: Option<Duration>,
}

const DECOY_WORDS: [&str; 32] = [
    "anchor", "badger", "cactus", "dancer", "ember", "falcon", "glacier", "harbor", "iris", "jester", "kettle",
    "lantern", "meadow", "nebula", "orchid", "pebble", "quill", "raven", "saddle", "thistle", "umbrella",
    "violin", "walrus", "yonder", "zephyr", "bonfire", "crown", "dragon", "feather", "goblet", "hermit", "island",
];

pub struct AuthenticatorBuilder {
    config: AuthConfig,
    store: AccountStore,
    rng: Option<Box<dyn CryptoRng + Send>>,
    clock: Arc<dyn Clock>,
    audit: AuditLog,
    decoy_secret: Option<[u8; 32]>,
}

impl AuthenticatorBuilder {
    pub fn store(mut self, store: AccountStore) -> Self {
        self.store = store;
        self
    }

    /// Source of fresh randomness (`r'`, `r2`, `s`, tokens). Inject a seeded generator for replayable runs.
    pub fn rng<R: RngCore + CryptoRng + Send + 'static>(mut self, rng: R) -> Self {
        self.rng = Some(Box::new(rng));
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn audit(mut self, audit: AuditLog) -> Self {
        self.audit = audit;
        self
    }

    pub fn decoy_secret(mut self, secret: [u8; 32]) -> Self {
        self.decoy_secret = Some(secret);
        self
    }

    pub fn build(self) -> Result<Authenticator, AuthError> {
        self.config.params.validate()?;
        let mut rng = self.rng.unwrap_or_else(|| Box::new(ChaCha20Rng::from_os_rng()));
        let decoy_secret = self.decoy_secret.unwrap_or_else(|| {
            let mut s = [0u8; 32];
            rng.fill_bytes(&mut s);
            s
        });
        Ok(Authenticator {
            config: self.config,
            store: Mutex::new(self.store),
            registrations: Mutex::default(),
            logins: Mutex::default(),
            strikes: Mutex::default(),
            rng: Mutex::new(rng),
            decoy_secret,
            clock: self.clock,
            audit: self.audit,
        })
    }
}

/// Server side of both protocols. All methods take `&self`; shared state sits
/// behind per-table mutexes and hashing runs outside every lock.
pub struct Authenticator {
    config: AuthConfig,
    store: Mutex<AccountStore>,
    registrations: Mutex<HashMap<SessionToken, RegistrationSession>>,
    logins: Mutex<HashMap<SessionToken, LoginSession>>,
    strikes: Mutex<HashMap<String, Strikes>>,
    rng: Mutex<Box<dyn CryptoRng + Send>>,
    decoy_secret: [u8; 32],
    clock: Arc<dyn Clock>,
    audit: AuditLog,
}

impl Authenticator {
    pub fn builder(config: AuthConfig) -> AuthenticatorBuilder {
        AuthenticatorBuilder {
            config,
            store: AccountStore::in_memory(),
            rng: None,
            clock: Arc::new(SystemClock),
            audit: AuditLog::default(),
            decoy_secret: None,
        }
    }

    pub fn config(&self) -> &AuthConfig {
        &self.config
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn account(&self, username: &str) -> Option<AccountRecord> {
        self.store.lock().unwrap().get(username).cloned()
    }

    pub fn account_count(&self) -> usize {
        self.store.lock().unwrap().len()
    }

    pub fn store_path(&self) -> Option<std::path::PathBuf> {
        self.store.lock().unwrap().path().map(Path::to_path_buf)
    }

    /// Number of registration and login sessions currently held.
    pub fn live_sessions(&self) -> (usize, usize) {
        self.purge_expired();
        (self.registrations.lock().unwrap().len(), self.logins.lock().unwrap().len())
    }

    fn fresh_seed(&self) -> Seed {
        let mut rng = self.rng.lock().unwrap();
        Seed::random(&mut **rng, self.config.params.seed_bits).expect("validated seed size")
    }

    fn fresh_token(&self) -> SessionToken {
        SessionToken::random(&mut **self.rng.lock().unwrap())
    }

    fn purge_expired(&self) {
        let now = self.clock.now();
        self.registrations.lock().unwrap().retain(|_, s| s.expires_at > now);
        self.logins.lock().unwrap().retain(|_, s| s.expires_at > now);
    }

    fn start_registration(&self, username: String, password: String) -> Result<RegistrationTicket, AuthError> {
        let extractor_salt = self.fresh_seed();
        let r1 = extract(&password, &extractor_salt)?;
        let r2 = self.fresh_seed();
        let order = presentation_order(self.config.params.k, &r2)?;
        let inkblots = InkblotSet::presented(r1, order.clone());
        let token = self.fresh_token();
        let expires_at = self.clock.now() + self.config.session_ttl;
        let session = RegistrationSession {
            username,
            password,
            extractor_salt,
            order,
            inkblots: inkblots.clone(),
            expires_at,
        };
        self.registrations.lock().unwrap().insert(token, session);
        Ok(RegistrationTicket { token, expires_at, inkblots })
    }

    pub fn begin_registration(&self, username: &str, password: &str) -> Result<RegistrationTicket, AuthError> {
        let username = validate_username(username)?;
        if password.is_empty() {
            return Err(AuthError::EmptyPassword);
        }
        if self.store.lock().unwrap().contains(&username) {
            return Err(AuthError::DuplicateUser(username));
        }
        self.purge_expired();
        self.start_registration(username, password.to_string())
    }

    fn take_registration(&self, token: &SessionToken) -> Result<RegistrationSession, AuthError> {
        let session = self.registrations.lock().unwrap().remove(token).ok_or(AuthError::SessionNotFound)?;
        if session.expires_at <= self.clock.now() {
            return Err(AuthError::SessionExpired);
        }
        Ok(session)
    }

    /// Discards a confusing set of inkblots and starts over with fresh `r'` and `r2`.
    pub fn reject_registration(&self, token: &SessionToken) -> Result<RegistrationTicket, AuthError> {
        let session = self.take_registration(token)?;
        self.start_registration(session.username, session.password)
    }

    /// Stores the account. `labels` are in the order the images were presented.
    pub fn complete_registration(&self, token: &SessionToken, labels: &[String]) -> Result<Registered, AuthError> {
        let (labels, duplicate_labels) = {
            let regs = self.registrations.lock().unwrap();
            let session = regs.get(token).ok_or(AuthError::SessionNotFound)?;
            if session.expires_at <= self.clock.now() {
                drop(regs);
                self.registrations.lock().unwrap().remove(token);
                return Err(AuthError::SessionExpired);
            }
            normalize_labels(labels, session.order.len())?
        };
        let session = self.take_registration(token)?;
        let hash_salt = self.fresh_seed();
        let record = AccountRecord::create(
            &session.username,
            &session.password,
            session.extractor_salt,
            hash_salt,
            &session.order,
            labels,
            self.config.params.clone(),
            self.config.hash_cost,
        )?;
        {
            let mut store = self.store.lock().unwrap();
            if store.contains(&record.username) {
                return Err(AuthError::DuplicateUser(record.username));
            }
            store.insert(record.clone())?;
        }
        self.audit.record(AuditEntry {
            timestamp_ms: self.clock.now().as_millis() as u64,
            username: record.username.clone(),
            outcome: AuditOutcome::Registered,
            hash_evaluations: 1,
        });
        Ok(Registered { record, duplicate_labels })
    }

    /// One-based image `j` of a live registration session, in presentation order.
    pub fn registration_inkblot(&self, token: &SessionToken, j: usize) -> Result<InkblotImage, AuthError> {
        let set = {
            let regs = self.registrations.lock().unwrap();
            let s = regs.get(token).ok_or(AuthError::SessionNotFound)?;
            if s.expires_at <= self.clock.now() {
                return Err(AuthError::SessionExpired);
            }
            s.inkblots.clone()
        };
        set.render(j).ok_or(AuthError::ImageIndex(j))
    }

    /// Decoy record for an unknown user, stable per username and server secret.
    fn decoy_record(&self, username: &str) -> AccountRecord {
        let params = self.config.params.clone();
        let hk = Hkdf::<Sha256>::new(Some(b"gotcha/v1/decoy"), &self.decoy_secret);
        let derive = |label: &str, len: usize| {
            let mut out = vec![0u8; len];
            let info = [label.as_bytes(), b"/", username.as_bytes()].concat();
            hk.expand(&info, &mut out).expect("short expansion");
            out
        };
        let seed_len = params.seed_bits / 8;
        let extractor_salt = Seed::from_bytes(derive("extractor-salt", seed_len)).expect("valid size");
        let hash_salt = Seed::from_bytes(derive("hash-salt", seed_len)).expect("valid size");
        let label_seed = Seed::from_bytes(derive("labels", 32)).expect("valid size");
        let mut stream = RandomStream::from_seed(&label_seed);
        let words = random_permutation(DECOY_WORDS.len(), &mut stream).expect("fixed size");
        let permuted_labels = (0..params.k).map(|i| DECOY_WORDS[words.get(i)].to_string()).collect();
        AccountRecord {
            username: username.to_string(),
            extractor_salt,
            hash_salt,
            password_hash: derive("hash", DIGEST_BYTES),
            permuted_labels,
            params,
            hash_cost: self.config.hash_cost,
        }
    }

    /// Regenerates the inkblots from `password` and pairs them with the stored labels.
    ///
    /// Unknown usernames get a decoy challenge of the same shape; the caller
    /// cannot tell the difference until the login is denied.
    pub fn begin_login(&self, username: &str, password: &str) -> Result<LoginTicket, AuthError> {
        let username = validate_username(username)?;
        if password.is_empty() {
            return Err(AuthError::EmptyPassword);
        }
        self.purge_expired();
        let target = match self.store.lock().unwrap().get(&username) {
            Some(r) => LoginTarget::Account(r.clone()),
            None => LoginTarget::Decoy(self.decoy_record(&username)),
        };
        let (labels, k, r1) = {
            let record = match &target {
                LoginTarget::Account(r) | LoginTarget::Decoy(r) => r,
            };
            (record.permuted_labels.clone(), record.params.k, extract(password, &record.extractor_salt)?)
        };
        let inkblots = InkblotSet::canonical(k, r1);
        let token = self.fresh_token();
        let expires_at = self.clock.now() + self.config.session_ttl;
        self.logins.lock().unwrap().insert(
            token,
            LoginSession {
                username,
                password: password.to_string(),
                target,
                inkblots: inkblots.clone(),
                expires_at,
            },
        );
        let display_order = alphabetical_order(&labels);
        Ok(LoginTicket { token, expires_at, labels, display_order, inkblots })
    }

    /// One-based canonical image `j` of a live login session.
    pub fn login_inkblot(&self, token: &SessionToken, j: usize) -> Result<InkblotImage, AuthError> {
        let set = {
            let logins = self.logins.lock().unwrap();
            let s = logins.get(token).ok_or(AuthError::SessionNotFound)?;
            if s.expires_at <= self.clock.now() {
                return Err(AuthError::SessionExpired);
            }
            s.inkblots.clone()
        };
        set.render(j).ok_or(AuthError::ImageIndex(j))
    }

    /// Labels of a live login session in wire order, with the alphabetical display order.
    pub fn login_labels(&self, token: &SessionToken) -> Result<(Vec<String>, Vec<usize>), AuthError> {
        let logins = self.logins.lock().unwrap();
        let s = logins.get(token).ok_or(AuthError::SessionNotFound)?;
        if s.expires_at <= self.clock.now() {
            return Err(AuthError::SessionExpired);
        }
        let labels = s.record().permuted_labels.clone();
        let order = alphabetical_order(&labels);
        Ok((labels, order))
    }

    /// Checks the answer. The session is consumed whatever the outcome.
    pub fn complete_login(&self, token: &SessionToken, response: &Permutation) -> Result<LoginOutcome, AuthError> {
        let session = self.logins.lock().unwrap().remove(token).ok_or(AuthError::SessionNotFound)?;
        let now = self.clock.now();
        let audit = |outcome, hash_evaluations| {
            self.audit.record(AuditEntry {
                timestamp_ms: now.as_millis() as u64,
                username: session.username.clone(),
                outcome,
                hash_evaluations,
            })
        };
        if session.expires_at <= now {
            audit(AuditOutcome::Expired, 0);
            return Err(AuthError::SessionExpired);
        }
        let is_real = matches!(session.target, LoginTarget::Account(_));
        if is_real {
            if let Some(until) = self.strikes.lock().unwrap().get(&session.username).and_then(|s| s.locked_until) {
                if until > now {
                    audit(AuditOutcome::LockedOut, 0);
                    return Err(AuthError::LockedOut { remaining_secs: (until - now).as_secs() });
                }
            }
        }
        let check = session.record().verify_response(&session.password, response)?;
        let accepted = check.accepted && is_real;
        if is_real {
            let mut strikes = self.strikes.lock().unwrap();
            let entry = strikes.entry(session.username.clone()).or_default();
            if accepted {
                *entry = Strikes::default();
            } else {
                entry.failures += 1;
                if entry.failures >= self.config.max_strikes {
                    entry.failures = 0;
                    entry.locked_until = Some(now + self.config.lockout);
                }
            }
        }
        audit(if accepted { AuditOutcome::Accepted } else { AuditOutcome::Denied }, check.hash_evaluations);
        Ok(LoginOutcome { accepted, hash_evaluations: check.hash_evaluations })
    }
}

fn validate_username(raw: &str) -> Result<String, AuthError> {
    let u = raw.trim();
    if u.is_empty() {
        return Err(AuthError::InvalidUsername("empty".into()));
    }
    if u.len() > MAX_USERNAME_BYTES {
        return Err(AuthError::InvalidUsername(format!("longer than {MAX_USERNAME_BYTES} bytes")));
    }
    if u.chars().any(char::is_control) {
        return Err(AuthError::InvalidUsername("control characters".into()));
    }
    Ok(u.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{count_close, enumerate_close};

    fn auth(k: usize, alpha: usize, seed: u64) -> (Authenticator, Arc<ManualClock>) {
        auth_with_strikes(k, alpha, seed, 3)
    }

    fn auth_with_strikes(k: usize, alpha: usize, seed: u64, max_strikes: u32) -> (Authenticator, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(Duration::from_secs(1_000_000)));
        let config = AuthConfig {
            params: PuzzleParams::new(k, alpha).unwrap(),
            hash_cost: HashCost::MIN,
            max_strikes,
            ..Default::default()
        };
        let a = Authenticator::builder(config)
            .rng(ChaCha20Rng::seed_from_u64(seed))
            .clock(clock.clone())
            .build()
            .unwrap();
        (a, clock)
    }

    fn labels(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("blot {i}")).collect()
    }

    fn register(a: &Authenticator, u: &str, pw: &str) -> Permutation {
        let t = a.begin_registration(u, pw).unwrap();
        let order = a.registrations.lock().unwrap().get(&t.token).unwrap().order.clone();
        a.complete_registration(&t.token, &labels(a.config.params.k)).unwrap();
        order
    }

    #[test]
    fn happy_path_exact_answer() {
        let (a, _) = auth(3, 0, 1);
        let order = register(&a, "alice", "pw");
        let t = a.begin_login("alice", "pw").unwrap();
        let out = a.complete_login(&t.token, &order).unwrap();
        assert!(out.accepted);
        assert_eq!(out.hash_evaluations, 1);
    }

    #[test]
    fn registration_is_reproducible_with_injected_rng() {
        let (a, _) = auth(2, 0, 9);
        let (b, _) = auth(2, 0, 9);
        let ta = a.begin_registration("u", "pw").unwrap();
        let tb = b.begin_registration("u", "pw").unwrap();
        assert_eq!(ta.token, tb.token);
        assert_eq!(ta.inkblots.render_all(), tb.inkblots.render_all());
    }

    #[test]
    fn same_password_fresh_salt_new_images() {
        let (a, _) = auth(1, 0, 2);
        let first = a.begin_registration("u1", "pw").unwrap().inkblots.render(1).unwrap();
        for i in 0..5 {
            let other = a.begin_registration(&format!("v{i}"), "pw").unwrap().inkblots.render(1).unwrap();
            assert!(!first.same_raster(&other));
        }
    }

    #[test]
    fn duplicate_user_and_empty_password() {
        let (a, _) = auth(2, 0, 3);
        register(&a, "bob", "pw");
        assert!(matches!(a.begin_registration("bob", "x"), Err(AuthError::DuplicateUser(_))));
        assert!(matches!(a.begin_registration("carol", ""), Err(AuthError::EmptyPassword)));
        assert!(matches!(a.begin_registration("  ", "x"), Err(AuthError::InvalidUsername(_))));
    }

    #[test]
    fn reject_regenerates() {
        let (a, _) = auth(1, 0, 4);
        let t1 = a.begin_registration("u", "pw").unwrap();
        let img1 = t1.inkblots.render(1).unwrap();
        let t2 = a.reject_registration(&t1.token).unwrap();
        assert_ne!(t1.token, t2.token);
        assert!(!img1.same_raster(&t2.inkblots.render(1).unwrap()));
        assert!(matches!(a.complete_registration(&t1.token, &labels(1)), Err(AuthError::SessionNotFound)));
        a.complete_registration(&t2.token, &labels(1)).unwrap();
    }

    #[test]
    fn label_count_mismatch_keeps_session() {
        let (a, _) = auth(3, 0, 5);
        let t = a.begin_registration("u", "pw").unwrap();
        assert!(matches!(a.complete_registration(&t.token, &labels(2)), Err(AuthError::LabelCount { .. })));
        a.complete_registration(&t.token, &labels(3)).unwrap();
    }

    #[test]
    fn record_holds_no_secrets() {
        let (a, _) = auth(4, 0, 6);
        let pw = "correct horse battery";
        let t = a.begin_registration("dave", pw).unwrap();
        let order = a.registrations.lock().unwrap().get(&t.token).unwrap().order.clone();
        let rec = a.complete_registration(&t.token, &labels(4)).unwrap().record;
        let line = encode_line(&rec);
        assert!(!line.contains(pw));
        assert!(!line.contains(&order.to_string()));
        assert!(!format!("{rec:?}").contains(pw));
        assert_eq!(a.live_sessions(), (0, 0));
    }

    #[test]
    fn login_images_follow_password() {
        let (a, _) = auth(2, 0, 7);
        let t = a.begin_registration("erin", "pw").unwrap();
        let order = a.registrations.lock().unwrap().get(&t.token).unwrap().order.clone();
        let reg_images = t.inkblots.render_all();
        a.complete_registration(&t.token, &labels(2)).unwrap();
        let good = a.begin_login("erin", "pw").unwrap();
        let canon = good.inkblots.render_all();
        for i in 0..2 {
            assert!(reg_images[i].same_raster(&canon[order.get(i)]));
        }
        for n in 0..20 {
            let bad = a.begin_login("erin", &format!("wrong{n}")).unwrap();
            assert!(!bad.inkblots.render(1).unwrap().same_raster(&canon[0]));
        }
    }

    #[test]
    fn distance_alpha_boundary() {
        let (a, _) = auth(5, 2, 8);
        let order = register(&a, "f", "pw");
        // Distance exactly alpha accepts.
        let swap = order.compose(&Permutation::from_one_based(&[2, 1, 3, 4, 5]).unwrap()).unwrap();
        let t = a.begin_login("f", "pw").unwrap();
        let out = a.complete_login(&t.token, &swap).unwrap();
        assert!(out.accepted);
        assert_eq!(out.hash_evaluations as u128, count_close(5, 2).unwrap());
        // Distance alpha + 1 (a 3-cycle) denies.
        let cycle = order.compose(&Permutation::from_one_based(&[2, 3, 1, 4, 5]).unwrap()).unwrap();
        let t = a.begin_login("f", "pw").unwrap();
        assert!(!a.complete_login(&t.token, &cycle).unwrap().accepted);
    }

    #[test]
    fn wrong_password_denied_for_every_response() {
        let (a, _) = auth_with_strikes(3, 3, 10, 100);
        register(&a, "g", "pw");
        for resp in Permutation::all(3).unwrap() {
            let t = a.begin_login("g", "pw-wrong").unwrap();
            assert!(!a.complete_login(&t.token, &resp).unwrap().accepted);
        }
        let t = a.begin_login("g", "pw").unwrap();
        let anything = Permutation::identity(3).unwrap();
        assert_eq!(enumerate_close(&anything, 3).unwrap().len(), 6);
        assert!(a.complete_login(&t.token, &anything).unwrap().accepted);
    }

    #[test]
    fn replay_and_expiry() {
        let (a, clock) = auth(2, 0, 11);
        let order = register(&a, "h", "pw");
        let t = a.begin_login("h", "pw").unwrap();
        a.complete_login(&t.token, &order).unwrap();
        assert!(matches!(a.complete_login(&t.token, &order), Err(AuthError::SessionNotFound)));
        let t = a.begin_login("h", "pw").unwrap();
        clock.advance(Duration::from_secs(16 * 60));
        assert!(a.complete_login(&t.token, &order).is_err());
        let t = a.begin_registration("i", "pw").unwrap();
        clock.advance(Duration::from_secs(16 * 60));
        assert!(a.complete_registration(&t.token, &labels(2)).is_err());
    }

    #[test]
    fn strikes_lock_account() {
        let (a, clock) = auth(2, 0, 12);
        let order = register(&a, "j", "pw");
        for _ in 0..3 {
            let t = a.begin_login("j", "bad").unwrap();
            assert!(!a.complete_login(&t.token, &order).unwrap().accepted);
        }
        let t = a.begin_login("j", "pw").unwrap();
        assert!(matches!(a.complete_login(&t.token, &order), Err(AuthError::LockedOut { .. })));
        clock.advance(Duration::from_secs(5 * 60 * 60));
        let t = a.begin_login("j", "pw").unwrap();
        assert!(a.complete_login(&t.token, &order).unwrap().accepted);
    }

    #[test]
    fn unknown_user_gets_stable_decoy() {
        let (a, _) = auth(4, 2, 13);
        register(&a, "real", "pw");
        let real = a.begin_login("real", "pw").unwrap();
        let d1 = a.begin_login("ghost", "pw").unwrap();
        let d2 = a.begin_login("ghost", "other").unwrap();
        assert_eq!(d1.labels.len(), real.labels.len());
        assert_eq!(d1.labels, d2.labels);
        let out = a.complete_login(&d1.token, &Permutation::identity(4).unwrap()).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.hash_evaluations as u128, count_close(4, 2).unwrap());
        assert!(a.account("ghost").is_none());
    }

    #[test]
    fn display_translation() {
        let order = vec![2, 0, 1];
        // Display label d sits at wire position order[d].
        let resp = response_from_display(&order, &[3, 1, 2]).unwrap();
        assert_eq!(resp.to_one_based(), vec![1, 2, 3]);
        assert!(response_from_display(&order, &[1, 1, 2]).is_err());
    }

    #[test]
    fn audit_has_no_secrets() {
        let (a, _) = auth(2, 0, 14);
        let order = register(&a, "k", "hunter2");
        let t = a.begin_login("k", "hunter2").unwrap();
        a.complete_login(&t.token, &order).unwrap();
        let entries = a.audit().entries();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].outcome, AuditOutcome::Accepted);
        assert!(!serde_json::to_string(&entries).unwrap().contains("hunter2"));
    }
}
