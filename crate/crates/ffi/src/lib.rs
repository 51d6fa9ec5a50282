//! C ABI over the `cvhssr` engine.
//!
//! Every function returns a [`CvhssrStatus`]. On failure a description is
//! available from [`cvhssr_last_error`] on the same thread. Images cross the
//! boundary as planar RGB `f32` buffers of length `3·H·W` (channel-major,
//! then row-major) with values nominally in `[0, 1]`.
//!
//! Models are opaque: create one with [`cvhssr_model_init`] or
//! [`cvhssr_model_load`] and release it with [`cvhssr_model_free`]. A model
//! may be used from several threads at once as long as none of them calls
//! [`cvhssr_model_set_tlc`] or [`cvhssr_model_free`] concurrently.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvhssr::blocks::PoolWindow;
use cvhssr::metrics::{psnr, ssim};
use cvhssr::model::DEFAULT_TLC_WINDOW;
use cvhssr::{init_parameters, param_count, Error, ImageError, Model, ModelConfig, Preset, StereoPair, Tensor};

pub const CVHSSR_PRESET_TINY: u32 = 0;
pub const CVHSSR_PRESET_SMALL: u32 = 1;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CvhssrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Io = 4,
    Format = 5,
    Panic = 6,
}

/// Opaque model handle.
pub struct CvhssrModel {
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (CvhssrStatus, String);

fn classify(e: Error) -> Failure {
    let status = match &e {
        Error::Shape { .. } => CvhssrStatus::Shape,
        Error::InvalidArgument(_) => CvhssrStatus::InvalidArgument,
        Error::Io { .. } | Error::Image(ImageError::NotFound(_)) => CvhssrStatus::Io,
        _ => CvhssrStatus::Format,
    };
    (status, e.to_string())
}

fn null(what: &str) -> Failure {
    (CvhssrStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    (CvhssrStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CvhssrStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return CvhssrStatus::Ok,
        Ok(Err(failure)) => failure,
        Err(_) => (CvhssrStatus::Panic, "internal panic".to_string()),
    };
    set_last_error(&msg);
    status
}

fn preset_from(code: u32) -> Result<Preset, Failure> {
    match code {
        CVHSSR_PRESET_TINY => Ok(Preset::Tiny),
        CVHSSR_PRESET_SMALL => Ok(Preset::Small),
        other => Err(invalid(format!("unknown preset code {other}"))),
    }
}

fn image_len(height: usize, width: usize) -> Result<usize, Failure> {
    height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(3))
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(format!("invalid image size {height}x{width}")))
}

/// # Safety
/// `data` must point to `3·height·width` readable floats.
unsafe fn read_image(data: *const f32, height: usize, width: usize, what: &str) -> Result<Tensor, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    let n = image_len(height, width)?;
    let slice = std::slice::from_raw_parts(data, n);
    Tensor::new(3, height, width, slice.to_vec()).map_err(classify)
}

/// Message for the most recent failure on the calling thread, or null if
/// none. The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn cvhssr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a randomly initialized model for `preset` (a `CVHSSR_PRESET_*`
/// code) and `scale` (2 or 4).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cvhssr_model_init(
    preset: u32,
    scale: u32,
    seed: u64,
    out: *mut *mut CvhssrModel,
) -> CvhssrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ModelConfig::preset(preset_from(preset)?, scale as usize).map_err(classify)?;
        let model = Model::new(config, &init_parameters(&config, seed)).map_err(classify)?;
        *out = Box::into_raw(Box::new(CvhssrModel { model }));
        Ok(())
    })
}

/// Loads a model from a weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer to
/// writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cvhssr_model_load(path: *const c_char, out: *mut *mut CvhssrModel) -> CvhssrStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let (config, store) = cvhssr::io::read_weights(path).map_err(classify)?;
        let model = Model::new(config, &store).map_err(classify)?;
        *out = Box::into_raw(Box::new(CvhssrModel { model }));
        Ok(())
    })
}

/// Releases a handle. Null is accepted and ignored.
///
/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvhssr_model_free(model: *mut CvhssrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Switches channel-attention pooling between global (`enabled = false`)
/// and local. A zero `window_height` or `window_width` selects the default
/// window.
///
/// # Safety
/// `model` must be a live handle not used concurrently by other threads.
#[no_mangle]
pub unsafe extern "C" fn cvhssr_model_set_tlc(
    model: *mut CvhssrModel,
    enabled: bool,
    window_height: u32,
    window_width: u32,
) -> CvhssrStatus {
    guard(|| {
        let handle = model.as_mut().ok_or_else(|| null("model"))?;
        let window = if window_height == 0 || window_width == 0 {
            DEFAULT_TLC_WINDOW
        } else {
            PoolWindow::new(window_height as usize, window_width as usize)
        };
        handle.model = handle.model.clone().with_tlc(enabled, window).map_err(classify)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvhssr_model_scale(model: *const CvhssrModel, out: *mut u32) -> CvhssrStatus {
    guard(|| {
        let handle = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = handle.model.scale() as u32;
        Ok(())
    })
}

/// Super-resolves a stereo pair of `height × width` images. Each output
/// buffer must hold `out_len = 3·(s·height)·(s·width)` floats, `s` being
/// the model scale.
///
/// # Safety
/// `left` and `right` must point to `3·height·width` readable floats;
/// `out_left` and `out_right` to `out_len` writable floats each.
#[no_mangle]
pub unsafe extern "C" fn cvhssr_model_forward(
    model: *const CvhssrModel,
    left: *const f32,
    right: *const f32,
    height: usize,
    width: usize,
    out_left: *mut f32,
    out_right: *mut f32,
    out_len: usize,
) -> CvhssrStatus {
    guard(|| {
        let handle = model.as_ref().ok_or_else(|| null("model"))?;
        if out_left.is_null() {
            return Err(null("out_left"));
        }
        if out_right.is_null() {
            return Err(null("out_right"));
        }
        let s = handle.model.scale();
        let expected = image_len(height.saturating_mul(s), width.saturating_mul(s))?;
        if out_len != expected {
            return Err((
                CvhssrStatus::Shape,
                format!("out_len is {out_len}, expected {expected} for {height}x{width} at scale {s}"),
            ));
        }
        let pair = StereoPair::new(
            read_image(left, height, width, "left")?,
            read_image(right, height, width, "right")?,
        )
        .map_err(classify)?;
        let sr = handle.model.forward(&pair).map_err(classify)?;
        std::slice::from_raw_parts_mut(out_left, out_len).copy_from_slice(sr.left().data());
        std::slice::from_raw_parts_mut(out_right, out_len).copy_from_slice(sr.right().data());
        Ok(())
    })
}

/// Number of learnable scalars for a preset and scale.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvhssr_param_count(preset: u32, scale: u32, out: *mut u64) -> CvhssrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ModelConfig::preset(preset_from(preset)?, scale as usize).map_err(classify)?;
        *out = param_count(&config) as u64;
        Ok(())
    })
}

unsafe fn compare(
    a: *const f32,
    b: *const f32,
    height: usize,
    width: usize,
    out: *mut f64,
    metric: fn(&Tensor, &Tensor) -> cvhssr::Result<f64>,
) -> CvhssrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = read_image(a, height, width, "a")?;
        let b = read_image(b, height, width, "b")?;
        *out = metric(&a, &b).map_err(classify)?;
        Ok(())
    })
}

/// PSNR in dB of two RGB images with peak 1; `+inf` when identical.
///
/// # Safety
/// `a` and `b` must point to `3·height·width` readable floats and `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvhssr_psnr(
    a: *const f32,
    b: *const f32,
    height: usize,
    width: usize,
    out: *mut f64,
) -> CvhssrStatus {
    compare(a, b, height, width, out, psnr)
}

/// Gaussian-window SSIM of two RGB images, averaged over channels. Both
/// sides must be at least 11 pixels.
///
/// # Safety
/// As for [`cvhssr_psnr`].
#[no_mangle]
pub unsafe extern "C" fn cvhssr_ssim(
    a: *const f32,
    b: *const f32,
    height: usize,
    width: usize,
    out: *mut f64,
) -> CvhssrStatus {
    compare(a, b, height, width, out, ssim)
}
