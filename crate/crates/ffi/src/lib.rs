//! C bindings for `rydberg-nqs`.
//!
//! Objects cross the boundary as opaque handles created by `rnqs_*_new` or
//! returned through out-parameters, and released with the matching
//! `rnqs_*_free`. Every fallible call returns an [`RnqsStatus`]; on failure
//! [`rnqs_last_error`] describes the problem. Panics are caught at the
//! boundary and reported as `RNQS_STATUS_PANIC`.
//!
//! Configurations are passed as `n_sites` bytes of 0/1 in row-major site
//! order. Basis indices use bit `j` for site `j`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rydberg_nqs::exact::{self, BornSampler, SpectrumResult, StateVector};
use rydberg_nqs::lattice::{self, Configuration, LatticeGeometry, RydbergModel};
use rydberg_nqs::rng::{stream_rng, Stream};
use rydberg_nqs::rnn::{self, GradientEstimator, RnnWavefunction, VmcOptions};
use rydberg_nqs::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnqsStatus {
    Ok = 0,
    InvalidArgument = 1,
    LengthMismatch = 2,
    TooLarge = 3,
    NotConverged = 4,
    Parse = 5,
    NoCrossing = 6,
    Io = 7,
    NullPointer = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Rydberg Hamiltonian on a square array.
pub struct RnqsModel {
    inner: RydbergModel,
}

/// Lowest levels and eigenvectors from exact diagonalization.
pub struct RnqsSpectrum {
    inner: SpectrumResult,
}

/// Dense state vector over the `2^N` basis.
pub struct RnqsState {
    inner: StateVector,
}

/// Autoregressive GRU wavefunction.
pub struct RnqsRnn {
    inner: RnnWavefunction,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let clean: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("nul bytes removed"));
}

struct Failure(RnqsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => RnqsStatus::InvalidArgument,
            Error::LengthMismatch { .. } => RnqsStatus::LengthMismatch,
            Error::TooLarge { .. } => RnqsStatus::TooLarge,
            Error::NotConverged { .. } => RnqsStatus::NotConverged,
            Error::Parse { .. } => RnqsStatus::Parse,
            Error::NoCrossing => RnqsStatus::NoCrossing,
            Error::Io(_) => RnqsStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RnqsStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RnqsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            RnqsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            RnqsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn configuration(bits: *const u8, n_sites: usize) -> Result<Configuration, Failure> {
    if bits.is_null() {
        return Err(null("bits"));
    }
    Ok(Configuration::new(
        std::slice::from_raw_parts(bits, n_sites).to_vec(),
    )?)
}

unsafe fn fill(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < src.len() {
        return Err(Failure(
            RnqsStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the most recent failure on this thread, empty after a success.
/// The pointer stays valid until the next `rnqs_*` call on the same thread.
#[no_mangle]
pub extern "C" fn rnqs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rnqs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds `H = −(Ω/2) Σ σˣ − δ Σ n + Σ V₀/r⁶ n n` on an `lx × ly` array,
/// keeping interactions up to neighbor shell `cutoff` (1 to 3).
#[no_mangle]
pub unsafe extern "C" fn rnqs_model_new(
    lx: usize,
    ly: usize,
    omega: f64,
    delta: f64,
    v0: f64,
    cutoff: usize,
    out: *mut *mut RnqsModel,
) -> RnqsStatus {
    guard(|| {
        let inner = RydbergModel::new(LatticeGeometry::new(lx, ly)?, omega, delta, v0, cutoff)?;
        write(out, boxed(RnqsModel { inner }), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rnqs_model_free(model: *mut RnqsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rnqs_model_n_sites(
    model: *const RnqsModel,
    out: *mut usize,
) -> RnqsStatus {
    guard(|| write(out, get(model, "model")?.inner.n_sites(), "out"))
}

/// Diagonal matrix element `⟨σ|H|σ⟩`.
#[no_mangle]
pub unsafe extern "C" fn rnqs_model_diagonal_energy(
    model: *const RnqsModel,
    bits: *const u8,
    n_sites: usize,
    out: *mut f64,
) -> RnqsStatus {
    guard(|| {
        let m = &get(model, "model")?.inner;
        let sigma = configuration(bits, n_sites)?;
        write(out, lattice::diagonal_energy(&sigma, m)?, "out")
    })
}

/// Lowest `n_states` levels by exact diagonalization.
#[no_mangle]
pub unsafe extern "C" fn rnqs_solve_spectrum(
    model: *const RnqsModel,
    n_states: usize,
    out: *mut *mut RnqsSpectrum,
) -> RnqsStatus {
    guard(|| {
        let inner = exact::solve_spectrum(&get(model, "model")?.inner, n_states)?;
        write(out, boxed(RnqsSpectrum { inner }), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rnqs_spectrum_free(spectrum: *mut RnqsSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rnqs_spectrum_e0(
    spectrum: *const RnqsSpectrum,
    out: *mut f64,
) -> RnqsStatus {
    guard(|| write(out, get(spectrum, "spectrum")?.inner.e0, "out"))
}

/// `e1 − e0`, or NaN when only one level was computed.
#[no_mangle]
pub unsafe extern "C" fn rnqs_spectrum_gap(
    spectrum: *const RnqsSpectrum,
    out: *mut f64,
) -> RnqsStatus {
    guard(|| {
        write(
            out,
            get(spectrum, "spectrum")?.inner.gap.unwrap_or(f64::NAN),
            "out",
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn rnqs_spectrum_n_levels(
    spectrum: *const RnqsSpectrum,
    out: *mut usize,
) -> RnqsStatus {
    guard(|| write(out, get(spectrum, "spectrum")?.inner.energies.len(), "out"))
}

/// Copies the computed levels, ascending, into `buf`.
#[no_mangle]
pub unsafe extern "C" fn rnqs_spectrum_energies(
    spectrum: *const RnqsSpectrum,
    buf: *mut f64,
    len: usize,
) -> RnqsStatus {
    guard(|| fill(&get(spectrum, "spectrum")?.inner.energies, buf, len))
}

/// New handle holding a copy of the ground state.
#[no_mangle]
pub unsafe extern "C" fn rnqs_spectrum_ground_state(
    spectrum: *const RnqsSpectrum,
    out: *mut *mut RnqsState,
) -> RnqsStatus {
    guard(|| {
        let inner = get(spectrum, "spectrum")?.inner.ground.clone();
        write(out, boxed(RnqsState { inner }), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rnqs_state_free(state: *mut RnqsState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rnqs_state_dim(state: *const RnqsState, out: *mut usize) -> RnqsStatus {
    guard(|| write(out, get(state, "state")?.inner.dim(), "out"))
}

/// Born probabilities `|ψ(σ)|²` in basis-index order.
#[no_mangle]
pub unsafe extern "C" fn rnqs_state_probabilities(
    state: *const RnqsState,
    buf: *mut f64,
    len: usize,
) -> RnqsStatus {
    guard(|| fill(&get(state, "state")?.inner.probabilities(), buf, len))
}

/// `⟨|N|⟩` with `N = (1/N) Σ (−1)^{x+y} Sᶻ`.
#[no_mangle]
pub unsafe extern "C" fn rnqs_state_staggered_magnetization(
    state: *const RnqsState,
    model: *const RnqsModel,
    out: *mut f64,
) -> RnqsStatus {
    guard(|| {
        let s = &get(state, "state")?.inner;
        let m = &get(model, "model")?.inner;
        write(out, exact::staggered_magnetization(s, m.geometry())?, "out")
    })
}

/// `|⟨a|b⟩|²`.
#[no_mangle]
pub unsafe extern "C" fn rnqs_state_fidelity(
    a: *const RnqsState,
    b: *const RnqsState,
    out: *mut f64,
) -> RnqsStatus {
    guard(|| {
        let f = exact::fidelity(&get(a, "a")?.inner, &get(b, "b")?.inner)?;
        write(out, f, "out")
    })
}

/// Draws `n_samples` computational-basis outcomes as basis indices.
#[no_mangle]
pub unsafe extern "C" fn rnqs_state_sample(
    state: *const RnqsState,
    n_samples: usize,
    seed: u64,
    indices: *mut u64,
) -> RnqsStatus {
    guard(|| {
        let s = &get(state, "state")?.inner;
        if indices.is_null() {
            return Err(null("indices"));
        }
        let sampler = BornSampler::new(&s.probabilities());
        let mut rng = stream_rng(seed, Stream::Measurements, 0);
        let out = std::slice::from_raw_parts_mut(indices, n_samples);
        for o in out {
            *o = sampler.draw(&mut rng);
        }
        Ok(())
    })
}

/// Glorot-initialized GRU wavefunction on the model's lattice (snake order).
#[no_mangle]
pub unsafe extern "C" fn rnqs_rnn_new(
    model: *const RnqsModel,
    n_hidden: usize,
    seed: u64,
    out: *mut *mut RnqsRnn,
) -> RnqsStatus {
    guard(|| {
        if n_hidden == 0 {
            return Err(Failure(
                RnqsStatus::InvalidArgument,
                "n_hidden must be positive".into(),
            ));
        }
        let m = &get(model, "model")?.inner;
        let inner = RnnWavefunction::for_lattice(m.geometry(), n_hidden, seed);
        write(out, boxed(RnqsRnn { inner }), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rnqs_rnn_free(rnn: *mut RnqsRnn) {
    if !rnn.is_null() {
        drop(Box::from_raw(rnn));
    }
}

/// `log ψ(σ)`.
#[no_mangle]
pub unsafe extern "C" fn rnqs_rnn_log_psi(
    rnn: *const RnqsRnn,
    bits: *const u8,
    n_sites: usize,
    out: *mut f64,
) -> RnqsStatus {
    guard(|| {
        let wf = &get(rnn, "rnn")?.inner;
        let sigma = configuration(bits, n_sites)?;
        write(out, wf.log_psi(&sigma)?, "out")
    })
}

/// Variational Monte Carlo with Adam and the baseline-subtracted gradient.
/// `energies`, if not null, receives the sampled energy of every epoch and
/// must hold `epochs` values.
#[no_mangle]
pub unsafe extern "C" fn rnqs_rnn_train(
    rnn: *mut RnqsRnn,
    model: *const RnqsModel,
    n_samples: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    energies: *mut f64,
) -> RnqsStatus {
    guard(|| {
        let wf = &mut get_mut(rnn, "rnn")?.inner;
        let m = &get(model, "model")?.inner;
        let opts = VmcOptions {
            n_samples,
            epochs,
            learning_rate,
            seed,
            estimator: GradientEstimator::Baseline,
        };
        let history = rnn::train(wf, m, &opts)?;
        if !energies.is_null() {
            let e: Vec<f64> = history.epochs.iter().map(|e| e.energy).collect();
            ptr::copy_nonoverlapping(e.as_ptr(), energies, e.len());
        }
        Ok(())
    })
}

/// Exact `⟨ψ|H|ψ⟩` by enumeration (at most 16 sites).
#[no_mangle]
pub unsafe extern "C" fn rnqs_rnn_exact_energy(
    rnn: *const RnqsRnn,
    model: *const RnqsModel,
    out: *mut f64,
) -> RnqsStatus {
    guard(|| {
        let e = rnn::exact_energy(&get(rnn, "rnn")?.inner, &get(model, "model")?.inner)?;
        write(out, e, "out")
    })
}
