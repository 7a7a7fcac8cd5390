//! C ABI for the gotcha library.
//!
//! Every function returns a [`GotchaStatus`]. On failure a message is kept
//! per thread and can be read with [`gotcha_last_error_message`]. Byte
//! results come back in a [`GotchaBuffer`] that the caller releases with
//! [`gotcha_buffer_free`]. Authenticators are opaque handles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gotcha::authcore::{AccountStore, AuthConfig, AuthError, Authenticator, HashCost, SessionToken};
use gotcha::gotcha::{InkblotSet, PuzzleParams};
use gotcha::inkblot::export_png;
use gotcha::matching::{count_close, count_close_upper_bound, Permutation};
use gotcha::seedcore::Seed;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GotchaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Overflow = 4,
    DuplicateUser = 5,
    SessionNotFound = 6,
    SessionExpired = 7,
    LockedOut = 8,
    Store = 9,
    Panic = 255,
}

/// Heap bytes owned by the library until passed to [`gotcha_buffer_free`].
#[repr(C)]
#[derive(Debug)]
pub struct GotchaBuffer {
    pub data: *mut u8,
    pub len: usize,
}

impl GotchaBuffer {
    fn from_vec(bytes: Vec<u8>) -> Self {
        let boxed = bytes.into_boxed_slice();
        let len = boxed.len();
        GotchaBuffer { data: Box::into_raw(boxed) as *mut u8, len }
    }
}

/// A 128-bit session token.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GotchaToken {
    pub bytes: [u8; 16],
}

impl From<SessionToken> for GotchaToken {
    fn from(t: SessionToken) -> Self {
        GotchaToken { bytes: *t.as_bytes() }
    }
}

impl From<GotchaToken> for SessionToken {
    fn from(t: GotchaToken) -> Self {
        SessionToken::from_bytes(t.bytes)
    }
}

/// Opaque authenticator handle.
pub struct GotchaAuthenticator {
    inner: Authenticator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(GotchaStatus, String);

impl From<AuthError> for Failure {
    fn from(e: AuthError) -> Self {
        let status = match &e {
            AuthError::DuplicateUser(_) => GotchaStatus::DuplicateUser,
            AuthError::SessionNotFound => GotchaStatus::SessionNotFound,
            AuthError::SessionExpired => GotchaStatus::SessionExpired,
            AuthError::LockedOut { .. } => GotchaStatus::LockedOut,
            AuthError::Store(_) => GotchaStatus::Store,
            _ => GotchaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure(GotchaStatus::InvalidArgument, e.to_string())
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GotchaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GotchaStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GotchaStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure(GotchaStatus::NullPointer, format!("{name} is null")));
    }
    Ok(())
}

/// # Safety
/// `p` must be null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|_| Failure(GotchaStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

/// # Safety
/// `p` must be null or valid for `len` bytes.
unsafe fn read_bytes<'a>(p: *const u8, len: usize, name: &str) -> Result<&'a [u8], Failure> {
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

fn handle<'a>(auth: *const GotchaAuthenticator) -> Result<&'a Authenticator, Failure> {
    non_null(auth, "authenticator")?;
    // SAFETY: non-null handles come from gotcha_authenticator_new and live until freed.
    Ok(unsafe { &(*auth).inner })
}

/// Message for the last failed call on this thread, or null. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gotcha_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a buffer. A zeroed buffer is ignored.
///
/// # Safety
/// `buffer` must have been filled by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn gotcha_buffer_free(buffer: GotchaBuffer) {
    if buffer.data.is_null() {
        return;
    }
    drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buffer.data, buffer.len)));
}

fn write_u64(out: *mut u64, value: u128) -> Result<(), Failure> {
    non_null(out, "out")?;
    let v = u64::try_from(value).map_err(|_| Failure(GotchaStatus::Overflow, format!("{value} does not fit in 64 bits")))?;
    // SAFETY: checked non-null; caller provides a writable u64.
    unsafe { *out = v };
    Ok(())
}

/// Number of orders within distance `alpha` of a fixed order of `k` items.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_count_close(k: usize, alpha: usize, out: *mut u64) -> GotchaStatus {
    guard(|| write_u64(out, count_close(k, alpha).map_err(invalid)?))
}

/// The loose upper bound on [`gotcha_count_close`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_count_close_upper_bound(k: usize, alpha: usize, out: *mut u64) -> GotchaStatus {
    guard(|| write_u64(out, count_close_upper_bound(k, alpha).map_err(invalid)?))
}

fn write_buffer(out: *mut GotchaBuffer, bytes: Vec<u8>) -> Result<(), Failure> {
    non_null(out, "out")?;
    // SAFETY: checked non-null; caller provides a writable buffer struct.
    unsafe { *out = GotchaBuffer::from_vec(bytes) };
    Ok(())
}

/// PNG of canonical inkblot `j` (one-based) for generation seed `seed`.
///
/// # Safety
/// `seed` must be valid for `seed_len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_inkblot_png(seed: *const u8, seed_len: usize, j: usize, out: *mut GotchaBuffer) -> GotchaStatus {
    guard(|| {
        let seed = Seed::from_bytes(read_bytes(seed, seed_len, "seed")?.to_vec()).map_err(invalid)?;
        let image = InkblotSet::canonical(j.max(1), seed).render(j).ok_or_else(|| invalid("image index starts at 1"))?;
        write_buffer(out, export_png(&image).map_err(invalid)?)
    })
}

/// Creates an authenticator. `store_path` may be null for an in-memory store.
///
/// # Safety
/// `store_path` must be null or a valid string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_authenticator_new(
    k: usize,
    alpha: usize,
    hash_cost: u8,
    store_path: *const c_char,
    out: *mut *mut GotchaAuthenticator,
) -> GotchaStatus {
    guard(|| {
        non_null(out, "out")?;
        let config = AuthConfig {
            params: PuzzleParams::new(k, alpha).map_err(invalid)?,
            hash_cost: HashCost::new(hash_cost)?,
            ..AuthConfig::default()
        };
        let store = if store_path.is_null() {
            AccountStore::in_memory()
        } else {
            let path = read_str(store_path, "store_path")?;
            AccountStore::open(path).map_err(|e| Failure(GotchaStatus::Store, e.to_string()))?
        };
        let inner = Authenticator::builder(config).store(store).build()?;
        *out = Box::into_raw(Box::new(GotchaAuthenticator { inner }));
        Ok(())
    })
}

/// Destroys a handle. Null is ignored.
///
/// # Safety
/// `auth` must be null or a handle from [`gotcha_authenticator_new`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn gotcha_authenticator_free(auth: *mut GotchaAuthenticator) {
    if !auth.is_null() {
        drop(Box::from_raw(auth));
    }
}

fn write_token(out: *mut GotchaToken, token: SessionToken) -> Result<(), Failure> {
    non_null(out, "token")?;
    // SAFETY: checked non-null.
    unsafe { *out = token.into() };
    Ok(())
}

/// Starts a registration; the token names the session.
///
/// # Safety
/// Strings must be valid; `token` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_register_begin(
    auth: *const GotchaAuthenticator,
    username: *const c_char,
    password: *const c_char,
    token: *mut GotchaToken,
) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        let ticket = auth.begin_registration(read_str(username, "username")?, read_str(password, "password")?)?;
        write_token(token, ticket.token)
    })
}

/// Discards the current inkblots; `token` is replaced by the new session's token.
///
/// # Safety
/// `token` must be readable and writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_register_reject(auth: *const GotchaAuthenticator, token: *mut GotchaToken) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        non_null(token, "token")?;
        let ticket = auth.reject_registration(&(*token).into())?;
        write_token(token, ticket.token)
    })
}

/// PNG of registration image `j` (one-based, as presented).
///
/// # Safety
/// `token` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_register_inkblot_png(
    auth: *const GotchaAuthenticator,
    token: *const GotchaToken,
    j: usize,
    out: *mut GotchaBuffer,
) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        non_null(token, "token")?;
        let image = auth.registration_inkblot(&(*token).into(), j)?;
        write_buffer(out, export_png(&image).map_err(invalid)?)
    })
}

/// Stores the account with `count` labels given in presentation order.
///
/// # Safety
/// `labels` must point to `count` valid strings.
#[no_mangle]
pub unsafe extern "C" fn gotcha_register_complete(
    auth: *const GotchaAuthenticator,
    token: *const GotchaToken,
    labels: *const *const c_char,
    count: usize,
) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        non_null(token, "token")?;
        non_null(labels, "labels")?;
        let labels = std::slice::from_raw_parts(labels, count)
            .iter()
            .map(|&p| read_str(p, "label").map(String::from))
            .collect::<Result<Vec<_>, _>>()?;
        auth.complete_registration(&(*token).into(), &labels)?;
        Ok(())
    })
}

/// Starts a login and reports the number of images.
///
/// # Safety
/// Strings must be valid; `token` and `k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_login_begin(
    auth: *const GotchaAuthenticator,
    username: *const c_char,
    password: *const c_char,
    token: *mut GotchaToken,
    k: *mut usize,
) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        non_null(k, "k")?;
        let ticket = auth.begin_login(read_str(username, "username")?, read_str(password, "password")?)?;
        *k = ticket.labels.len();
        write_token(token, ticket.token)
    })
}

/// UTF-8 bytes of wire label `i` (zero-based), without a terminator.
///
/// # Safety
/// `token` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_login_label(
    auth: *const GotchaAuthenticator,
    token: *const GotchaToken,
    i: usize,
    out: *mut GotchaBuffer,
) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        non_null(token, "token")?;
        let (labels, _) = auth.login_labels(&(*token).into())?;
        let label = labels.get(i).ok_or_else(|| invalid(format!("label index {i} out of range")))?;
        write_buffer(out, label.as_bytes().to_vec())
    })
}

/// Writes the alphabetical display order: `order[d]` is the zero-based wire index of the `d`-th label shown.
///
/// # Safety
/// `order` must be writable for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn gotcha_login_display_order(
    auth: *const GotchaAuthenticator,
    token: *const GotchaToken,
    order: *mut usize,
    len: usize,
) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        non_null(token, "token")?;
        non_null(order, "order")?;
        let (_, display) = auth.login_labels(&(*token).into())?;
        if len != display.len() {
            return Err(invalid(format!("expected room for {} entries, got {len}", display.len())));
        }
        std::slice::from_raw_parts_mut(order, len).copy_from_slice(&display);
        Ok(())
    })
}

/// PNG of login image `j` (one-based, canonical).
///
/// # Safety
/// `token` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_login_inkblot_png(
    auth: *const GotchaAuthenticator,
    token: *const GotchaToken,
    j: usize,
    out: *mut GotchaBuffer,
) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        non_null(token, "token")?;
        let image = auth.login_inkblot(&(*token).into(), j)?;
        write_buffer(out, export_png(&image).map_err(invalid)?)
    })
}

/// Answers the login. `assignment[i]` is the one-based image chosen for wire label `i`.
///
/// # Safety
/// `assignment` must be readable for `len` elements; `accepted` writable.
#[no_mangle]
pub unsafe extern "C" fn gotcha_login_complete(
    auth: *const GotchaAuthenticator,
    token: *const GotchaToken,
    assignment: *const u32,
    len: usize,
    accepted: *mut bool,
) -> GotchaStatus {
    guard(|| {
        let auth = handle(auth)?;
        non_null(token, "token")?;
        non_null(assignment, "assignment")?;
        non_null(accepted, "accepted")?;
        let values: Vec<usize> = std::slice::from_raw_parts(assignment, len).iter().map(|&v| v as usize).collect();
        let response = Permutation::from_one_based(&values).map_err(invalid)?;
        let outcome = auth.complete_login(&(*token).into(), &response)?;
        *accepted = outcome.accepted;
        Ok(())
    })
}
