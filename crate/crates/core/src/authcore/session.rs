use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::RngCore;

use super::record::AccountRecord;
use crate::gotcha::InkblotSet;
use crate::matching::Permutation;
use crate::seedcore::Seed;

/// 128-bit bearer token naming one in-flight protocol run.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionToken([u8; 16]);

impl SessionToken {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut b = [0u8; 16];
        rng.fill_bytes(&mut b);
        SessionToken(b)
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        SessionToken(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Display for SessionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for SessionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionToken({})", &hex::encode(self.0)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidToken;

impl fmt::Display for InvalidToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("session token must be 32 hex characters")
    }
}

impl std::error::Error for InvalidToken {}

impl FromStr for SessionToken {
    type Err = InvalidToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|_| InvalidToken)?;
        let arr: [u8; 16] = bytes.try_into().map_err(|_| InvalidToken)?;
        Ok(SessionToken(arr))
    }
}

/// Wall-clock source, replaceable in tests.
pub trait Clock: Send + Sync {
    /// Time since the Unix epoch.
    fn now(&self) -> Duration;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default()
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(Mutex<Duration>);

impl ManualClock {
    pub fn new(start: Duration) -> Self {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        *self.0.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.0.lock().unwrap()
    }
}

pub(crate) struct RegistrationSession {
    pub username: String,
    pub password: String,
    pub extractor_salt: Seed,
    pub order: Permutation,
    pub inkblots: InkblotSet,
    pub expires_at: Duration,
}

pub(crate) enum LoginTarget {
    Account(AccountRecord),
    Decoy(AccountRecord),
}

pub(crate) struct LoginSession {
    pub username: String,
    pub password: String,
    pub target: LoginTarget,
    pub inkblots: InkblotSet,
    pub expires_at: Duration,
}

impl LoginSession {
    pub fn record(&self) -> &AccountRecord {
        match &self.target {
            LoginTarget::Account(r) | LoginTarget::Decoy(r) => r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_hex_round_trip() {
        let mut rng = rand::rng();
        let t = SessionToken::random(&mut rng);
        let s = t.to_string();
        assert_eq!(s.len(), 32);
        assert_eq!(s.parse::<SessionToken>().unwrap(), t);
        assert!("abc".parse::<SessionToken>().is_err());
        assert!("zz".repeat(16).parse::<SessionToken>().is_err());
    }

    #[test]
    fn manual_clock_advances() {
        let c = ManualClock::new(Duration::from_secs(10));
        c.advance(Duration::from_secs(5));
        assert_eq!(c.now(), Duration::from_secs(15));
    }
}
