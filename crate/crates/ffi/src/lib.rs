//! C ABI over `dvd-core`.
//!
//! Every fallible function returns a [`DvdStatus`]; on failure the message is
//! kept per thread and can be read with [`dvd_last_error_message`]. Objects
//! are opaque handles created by `*_new` and released by the matching
//! `*_free`. Panics never cross the boundary; they surface as
//! [`DvdStatus::Panic`].

use std::cell::RefCell;
use std::ffi::CStr;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use dvd_core::bandit::BanditState;
use dvd_core::es::Trainer;
use dvd_core::exp::{run_seeds, threads_from_env, RunConfig};
use dvd_core::kernels::{grad_logdet_embeddings, gram, KernelKind, KernelSpec};
use dvd_core::DvdError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Runtime = 5,
    Io = 6,
    Panic = 7,
}

/// Kernel kinds in the order of their numeric codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvdKernelKind {
    SquaredExponential = 0,
    Exponential = 1,
    LinearNormalized = 2,
    RationalQuadratic = 3,
    Matern32 = 4,
    Matern52 = 5,
}

impl From<DvdKernelKind> for KernelKind {
    fn from(k: DvdKernelKind) -> Self {
        match k {
            DvdKernelKind::SquaredExponential => KernelKind::SquaredExponential,
            DvdKernelKind::Exponential => KernelKind::Exponential,
            DvdKernelKind::LinearNormalized => KernelKind::LinearNormalized,
            DvdKernelKind::RationalQuadratic => KernelKind::RationalQuadratic,
            DvdKernelKind::Matern32 => KernelKind::Matern32,
            DvdKernelKind::Matern52 => KernelKind::Matern52,
        }
    }
}

/// Opaque kernel handle.
pub struct DvdKernel(KernelSpec);

/// Opaque Thompson-sampling bandit handle.
pub struct DvdBandit(BanditState);

/// Opaque single-seed training loop.
pub struct DvdTrainer(Trainer);

/// One iteration's summary as returned by [`dvd_trainer_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvdStepResult {
    pub iteration: u64,
    pub best_reward: f64,
    pub lambda_used: f64,
    pub diversity: f64,
    /// 0 or 1, or -1 when no bandit update happened.
    pub bandit_signal: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &DvdError) -> DvdStatus {
    match e {
        DvdError::Config(_) => DvdStatus::Config,
        DvdError::NonFinite(_) | DvdError::RankDeficient => DvdStatus::Numerical,
        DvdError::Io(_) => DvdStatus::Io,
        DvdError::Rollout { .. } | DvdError::Sensing { .. } | DvdError::Iteration { .. } => {
            DvdStatus::Runtime
        }
        _ => DvdStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard<F: FnOnce() -> Result<(), (DvdStatus, String)>>(f: F) -> DvdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DvdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside dvd".into());
            DvdStatus::Panic
        }
    }
}

fn core(e: DvdError) -> (DvdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DvdStatus, String) {
    (DvdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DvdStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DvdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn rows(
    data: *const f64,
    m: usize,
    dim: usize,
) -> Result<Vec<Vec<f64>>, (DvdStatus, String)> {
    if m == 0 || dim == 0 {
        return Err((
            DvdStatus::InvalidArgument,
            "m and dim must be positive".into(),
        ));
    }
    if data.is_null() {
        return Err(null("embeddings"));
    }
    Ok(slice::from_raw_parts(data, m * dim)
        .chunks(dim)
        .map(|c| c.to_vec())
        .collect())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, excluding
/// the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dvd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn dvd_kernel_new(
    kind: DvdKernelKind,
    length_scale: f64,
    rq_alpha: f64,
    out: *mut *mut DvdKernel,
) -> DvdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = KernelSpec::new(kind.into(), length_scale)
            .and_then(|s| s.with_rq_alpha(rq_alpha))
            .map_err(core)?;
        *out = Box::into_raw(Box::new(DvdKernel(spec)));
        Ok(())
    })
}

/// # Safety
/// `kernel` must be null or a handle from [`dvd_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dvd_kernel_free(kernel: *mut DvdKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// `k(x, y)` for two vectors of length `dim`.
///
/// # Safety
/// `x` and `y` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dvd_kernel_eval(
    kernel: *const DvdKernel,
    x: *const f64,
    y: *const f64,
    dim: usize,
    out: *mut f64,
) -> DvdStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if x.is_null() || y.is_null() || out.is_null() {
            return Err(null("x, y or out"));
        }
        let v =
            k.0.eval(slice::from_raw_parts(x, dim), slice::from_raw_parts(y, dim))
                .map_err(core)?;
        *out = v;
        Ok(())
    })
}

/// Determinant of the kernel matrix of `m` embeddings stored row-major.
///
/// # Safety
/// `embeddings` must point to `m * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dvd_diversity(
    kernel: *const DvdKernel,
    embeddings: *const f64,
    m: usize,
    dim: usize,
    out: *mut f64,
) -> DvdStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = rows(embeddings, m, dim)?;
        *out = gram(&k.0, &e).map_err(core)?.det();
        Ok(())
    })
}

/// Gradient of `log det K` with respect to every embedding, written
/// row-major into `out` (`m * dim` doubles).
///
/// # Safety
/// `embeddings` and `out` must each point to `m * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn dvd_grad_logdet(
    kernel: *const DvdKernel,
    embeddings: *const f64,
    m: usize,
    dim: usize,
    out: *mut f64,
) -> DvdStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = rows(embeddings, m, dim)?;
        let g = grad_logdet_embeddings(&k.0, &e).map_err(core)?;
        let dst = slice::from_raw_parts_mut(out, m * dim);
        for (chunk, row) in dst.chunks_mut(dim).zip(&g) {
            chunk.copy_from_slice(row);
        }
        Ok(())
    })
}

/// # Safety
/// `lambdas` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dvd_bandit_new(
    lambdas: *const f64,
    n: usize,
    seed: u64,
    out: *mut *mut DvdBandit,
) -> DvdStatus {
    guard(|| {
        if lambdas.is_null() || out.is_null() {
            return Err(null("lambdas or out"));
        }
        let state = BanditState::new(slice::from_raw_parts(lambdas, n), seed).map_err(core)?;
        *out = Box::into_raw(Box::new(DvdBandit(state)));
        Ok(())
    })
}

/// # Safety
/// `bandit` must be null or a handle from [`dvd_bandit_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dvd_bandit_free(bandit: *mut DvdBandit) {
    if !bandit.is_null() {
        drop(Box::from_raw(bandit));
    }
}

/// Samples an arm; writes its index and trade-off value.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dvd_bandit_sample(
    bandit: *mut DvdBandit,
    arm: *mut usize,
    lambda: *mut f64,
) -> DvdStatus {
    guard(|| {
        let b = bandit.as_mut().ok_or_else(|| null("bandit"))?;
        if arm.is_null() || lambda.is_null() {
            return Err(null("arm or lambda"));
        }
        let (i, l) = b.0.sample_lambda();
        *arm = i;
        *lambda = l;
        Ok(())
    })
}

/// Updates the most recently sampled arm.
///
/// # Safety
/// `bandit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dvd_bandit_update(
    bandit: *mut DvdBandit,
    arm: usize,
    success: bool,
) -> DvdStatus {
    guard(|| {
        let b = bandit.as_mut().ok_or_else(|| null("bandit"))?;
        b.0.update(arm, success).map_err(core)
    })
}

/// Reads the Beta posterior of one arm.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dvd_bandit_posterior(
    bandit: *const DvdBandit,
    arm: usize,
    alpha: *mut f64,
    beta: *mut f64,
) -> DvdStatus {
    guard(|| {
        let b = bandit.as_ref().ok_or_else(|| null("bandit"))?;
        if alpha.is_null() || beta.is_null() {
            return Err(null("alpha or beta"));
        }
        let a = b.0.arms().get(arm).ok_or_else(|| {
            core(DvdError::IndexOutOfRange {
                index: arm,
                len: b.0.arms().len(),
            })
        })?;
        *alpha = a.alpha;
        *beta = a.beta;
        Ok(())
    })
}

/// Builds a training loop from config text for one seed. Worker count
/// follows `DVD_THREADS`.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dvd_trainer_new(
    config: *const c_char,
    seed: u64,
    out: *mut *mut DvdTrainer,
) -> DvdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = RunConfig::parse(c_str(config, "config")?).map_err(core)?;
        cfg.validate().map_err(core)?;
        let mut es = cfg.es.clone();
        es.seed = seed;
        let trainer = Trainer::new(es, cfg.build_env(), threads_from_env()).map_err(core)?;
        *out = Box::into_raw(Box::new(DvdTrainer(trainer)));
        Ok(())
    })
}

/// # Safety
/// `trainer` must be null or a handle from [`dvd_trainer_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dvd_trainer_free(trainer: *mut DvdTrainer) {
    if !trainer.is_null() {
        drop(Box::from_raw(trainer));
    }
}

/// Runs one iteration.
///
/// # Safety
/// `trainer` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dvd_trainer_step(
    trainer: *mut DvdTrainer,
    out: *mut DvdStepResult,
) -> DvdStatus {
    guard(|| {
        let t = trainer.as_mut().ok_or_else(|| null("trainer"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = t.0.step().map_err(core)?;
        *out = DvdStepResult {
            iteration: r.iteration as u64,
            best_reward: r.best_reward,
            lambda_used: r.lambda_used,
            diversity: r.diversity,
            bandit_signal: r.bandit_signal.map_or(-1, i32::from),
        };
        Ok(())
    })
}

/// Number of policy parameters per agent.
///
/// # Safety
/// `trainer` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dvd_trainer_param_count(
    trainer: *const DvdTrainer,
    out: *mut usize,
) -> DvdStatus {
    guard(|| {
        let t = trainer.as_ref().ok_or_else(|| null("trainer"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = t.0.arch().param_count();
        Ok(())
    })
}

/// Copies agent `agent`'s parameters into `out` (`len` doubles, which must
/// equal the parameter count).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dvd_trainer_params(
    trainer: *const DvdTrainer,
    agent: usize,
    out: *mut f64,
    len: usize,
) -> DvdStatus {
    guard(|| {
        let t = trainer.as_ref().ok_or_else(|| null("trainer"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let pop = t.0.population();
        let p = pop.get(agent).ok_or_else(|| {
            core(DvdError::IndexOutOfRange {
                index: agent,
                len: pop.len(),
            })
        })?;
        if p.len() != len {
            return Err(core(DvdError::DimensionMismatch {
                expected: p.len(),
                got: len,
            }));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// Runs every seed in the config, writing logs to `out_dir` (or the config's
/// own `out` when null).
///
/// # Safety
/// `config` must be a NUL-terminated string; `out_dir` null or one.
#[no_mangle]
pub unsafe extern "C" fn dvd_run_config(
    config: *const c_char,
    out_dir: *const c_char,
) -> DvdStatus {
    guard(|| {
        let cfg = RunConfig::parse(c_str(config, "config")?).map_err(core)?;
        let out = if out_dir.is_null() {
            cfg.out.clone()
        } else {
            Path::new(c_str(out_dir, "out_dir")?).to_path_buf()
        };
        run_seeds(&cfg, &out, threads_from_env())
            .map(|_| ())
            .map_err(core)
    })
}
