//! C ABI for the migsim simulator.
//!
//! Machine configurations are opaque handles created with
//! [`migsim_config_new`] and released with [`migsim_config_free`]. Every
//! fallible call returns a [`MigsimStatus`]; on failure a description is
//! available from [`migsim_last_error`] until the next call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use migsim::kernels::{
    self, laplacian_csr, ChaseConfig, KernelError, LaplacianSpec, Permutation, SpawnStrategy, SpmvConfig,
    SpmvLayout, StreamConfig,
};
use migsim::model::{self, InstructionMix};
use migsim::{MachineConfig, SimStats, Word};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    RunError = 4,
    Timeout = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigsimStrategy {
    SerialSpawn = 0,
    RecursiveSpawn = 1,
    SerialRemoteSpawn = 2,
    RecursiveRemoteSpawn = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigsimPermutation {
    Ordered = 0,
    IntraBlockShuffle = 1,
    BlockShuffle = 2,
    FullBlockShuffle = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigsimLayout {
    Local = 0,
    Striped1d = 1,
    Rows2d = 2,
}

/// Headline numbers of one simulated run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MigsimRunSummary {
    pub bandwidth_mb_per_sec: f64,
    pub sim_cycles: u64,
    pub bytes_moved: u64,
    pub migrations: u64,
    pub spawns: u64,
    pub threads: u64,
    pub verified: bool,
}

/// Opaque machine configuration.
pub struct MigsimConfig {
    inner: MachineConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, mapping panics to [`MigsimStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), (MigsimStatus, String)>) -> MigsimStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MigsimStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MigsimStatus::Panic
        }
    }
}

fn kernel_err(e: KernelError) -> (MigsimStatus, String) {
    let status = match e {
        KernelError::Timeout(_) => MigsimStatus::Timeout,
        KernelError::Config(_) => MigsimStatus::ConfigError,
        _ => MigsimStatus::RunError,
    };
    (status, e.to_string())
}

fn config_ref<'a>(cfg: *const MigsimConfig) -> Result<&'a MachineConfig, (MigsimStatus, String)> {
    // SAFETY: callers pass either null or a handle from `migsim_config_new`.
    unsafe { cfg.as_ref() }
        .map(|c| &c.inner)
        .ok_or((MigsimStatus::NullPointer, "config handle is null".into()))
}

fn out_ref<'a, T>(out: *mut T) -> Result<&'a mut T, (MigsimStatus, String)> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { out.as_mut() }.ok_or((MigsimStatus::NullPointer, "output pointer is null".into()))
}

fn summarize(stats: &SimStats, verified: bool) -> MigsimRunSummary {
    MigsimRunSummary {
        bandwidth_mb_per_sec: stats.bandwidth_mb_per_sec(),
        sim_cycles: stats.sim_cycles,
        bytes_moved: stats.bytes_moved,
        migrations: stats.total_migrations(),
        spawns: stats.total_spawns(),
        threads: stats.thread_count,
        verified,
    }
}

impl From<MigsimStrategy> for SpawnStrategy {
    fn from(s: MigsimStrategy) -> Self {
        match s {
            MigsimStrategy::SerialSpawn => SpawnStrategy::SerialSpawn,
            MigsimStrategy::RecursiveSpawn => SpawnStrategy::RecursiveSpawn,
            MigsimStrategy::SerialRemoteSpawn => SpawnStrategy::SerialRemoteSpawn,
            MigsimStrategy::RecursiveRemoteSpawn => SpawnStrategy::RecursiveRemoteSpawn,
        }
    }
}

impl From<MigsimPermutation> for Permutation {
    fn from(p: MigsimPermutation) -> Self {
        match p {
            MigsimPermutation::Ordered => Permutation::Ordered,
            MigsimPermutation::IntraBlockShuffle => Permutation::IntraBlockShuffle,
            MigsimPermutation::BlockShuffle => Permutation::BlockShuffle,
            MigsimPermutation::FullBlockShuffle => Permutation::FullBlockShuffle,
        }
    }
}

impl From<MigsimLayout> for SpmvLayout {
    fn from(l: MigsimLayout) -> Self {
        match l {
            MigsimLayout::Local => SpmvLayout::Local,
            MigsimLayout::Striped1d => SpmvLayout::Striped1D,
            MigsimLayout::Rows2d => SpmvLayout::Rows2D,
        }
    }
}

/// Creates a configuration holding the default 8-node, 64-nodelet machine.
#[no_mangle]
pub extern "C" fn migsim_config_new() -> *mut MigsimConfig {
    Box::into_raw(Box::new(MigsimConfig {
        inner: MachineConfig::default(),
    }))
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must be null or a handle from [`migsim_config_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn migsim_config_free(cfg: *mut MigsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets one parameter by name, e.g. `("nodes", "1")`. The change is
/// rejected if it would make the configuration invalid.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn migsim_config_set(
    cfg: *mut MigsimConfig,
    key: *const c_char,
    value: *const c_char,
) -> MigsimStatus {
    guard(|| {
        if key.is_null() || value.is_null() {
            return Err((MigsimStatus::NullPointer, "key or value is null".into()));
        }
        let cfg = out_ref(cfg)?;
        let key = CStr::from_ptr(key)
            .to_str()
            .map_err(|_| (MigsimStatus::InvalidArgument, "key is not UTF-8".to_string()))?;
        let value = CStr::from_ptr(value)
            .to_str()
            .map_err(|_| (MigsimStatus::InvalidArgument, "value is not UTF-8".to_string()))?;
        let mut next = cfg.inner.clone();
        next.set(key, value)
            .and_then(|()| next.validate())
            .map_err(|e| (MigsimStatus::ConfigError, e.to_string()))?;
        cfg.inner = next;
        Ok(())
    })
}

/// Total nodelets of the configured machine, or 0 for a null handle.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn migsim_config_total_nodelets(cfg: *const MigsimConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.inner.total_nodelets())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn migsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Runs STREAM ADD over `2^scale` elements.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn migsim_run_stream(
    cfg: *const MigsimConfig,
    scale: u32,
    threads: usize,
    strategy: MigsimStrategy,
    out: *mut MigsimRunSummary,
) -> MigsimStatus {
    guard(|| {
        let machine = config_ref(cfg)?;
        let out = out_ref(out)?;
        if scale > 40 {
            return Err((MigsimStatus::InvalidArgument, format!("scale {scale} is too large")));
        }
        let sc = StreamConfig {
            scale,
            threads,
            strategy: strategy.into(),
            ..StreamConfig::default()
        };
        let r = kernels::stream_add(machine, &sc).map_err(kernel_err)?;
        *out = summarize(&r.stats, r.verified);
        Ok(())
    })
}

/// Runs the pointer chase with one chain per thread.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn migsim_run_chase(
    cfg: *const MigsimConfig,
    elements: u64,
    block_size: u64,
    permutation: MigsimPermutation,
    seed: u64,
    threads: usize,
    out: *mut MigsimRunSummary,
) -> MigsimStatus {
    guard(|| {
        let machine = config_ref(cfg)?;
        let out = out_ref(out)?;
        let cc = ChaseConfig {
            n: elements,
            block_size,
            permutation: permutation.into(),
            seed,
            threads,
            ..ChaseConfig::default()
        };
        let r = kernels::chase(machine, &cc).map_err(kernel_err)?;
        *out = summarize(&r.stats, r.verified);
        Ok(())
    })
}

/// Runs SpMV on the `n × n` five-point Laplacian with `x[i] = i mod 7 - 3`.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn migsim_run_spmv_laplacian(
    cfg: *const MigsimConfig,
    n: usize,
    layout: MigsimLayout,
    threads: usize,
    out: *mut MigsimRunSummary,
) -> MigsimStatus {
    guard(|| {
        let machine = config_ref(cfg)?;
        let out = out_ref(out)?;
        let a = laplacian_csr(LaplacianSpec { n }).map_err(|e| (MigsimStatus::InvalidArgument, e.to_string()))?;
        let x: Vec<Word> = (0..a.n_cols as Word).map(|i| i % 7 - 3).collect();
        let sc = SpmvConfig {
            layout: layout.into(),
            threads,
            ..SpmvConfig::default()
        };
        let r = kernels::spmv(machine, &a, &x, &sc).map_err(kernel_err)?;
        *out = summarize(&r.stats, r.verified);
        Ok(())
    })
}

/// Issue-limited bandwidth of one core in MB/s.
///
/// # Safety
/// `out_mb_per_sec` must be writable.
#[no_mangle]
pub unsafe extern "C" fn migsim_peak_core_bw(
    freq_hz: u64,
    mem_ops: u64,
    total_insts: u64,
    word_bytes: u64,
    out_mb_per_sec: *mut f64,
) -> MigsimStatus {
    guard(|| {
        let out = out_ref(out_mb_per_sec)?;
        let bw = model::peak_core_bw(freq_hz, mem_ops, total_insts, word_bytes)
            .map_err(|e| (MigsimStatus::InvalidArgument, e.to_string()))?;
        *out = bw.mb_per_sec();
        Ok(())
    })
}

/// Aggregate channel bandwidth of the configured machine in MB/s.
///
/// # Safety
/// `cfg` must be a live handle and `out_mb_per_sec` writable.
#[no_mangle]
pub unsafe extern "C" fn migsim_ncdimm_peak(cfg: *const MigsimConfig, out_mb_per_sec: *mut f64) -> MigsimStatus {
    guard(|| {
        let machine = config_ref(cfg)?;
        *out_ref(out_mb_per_sec)? = model::ncdimm_peak(machine).mb_per_sec();
        Ok(())
    })
}

/// Cores per nodelet needed to saturate a channel with the given mix.
///
/// # Safety
/// `cfg` must be a live handle and `out_cores` writable.
#[no_mangle]
pub unsafe extern "C" fn migsim_what_if_cores(
    cfg: *const MigsimConfig,
    mem_ops: u64,
    total_insts: u64,
    out_cores: *mut u64,
) -> MigsimStatus {
    guard(|| {
        let machine = config_ref(cfg)?;
        let out = out_ref(out_cores)?;
        *out = model::what_if_cores(machine, InstructionMix { mem_ops, total_insts })
            .map_err(|e| (MigsimStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn migsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
