//! C ABI over the outline-refine toolkit.
//!
//! Glyphs cross the boundary as opaque [`OlrGlyph`] handles. Every function
//! returns an [`OlrStatus`]; on failure a human-readable message is kept per
//! thread and can be read with [`olr_last_error_message`]. Results are written
//! through out-pointers, and every handle or string handed out must be
//! released with the matching `*_free` function.
//!
//! Labeling, refinement and metrics work in EM units. Glyphs parsed with a
//! design grid are scaled down for the computation and refined glyphs are
//! scaled back to the same grid.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use outline_refine::continuity::{junction_sites, label_glyph, line_sites, Thresholds};
use outline_refine::metrics::{chamfer_re, iou, Sampling};
use outline_refine::model::{normalize_glyph, Glyph};
use outline_refine::raster::{rasterize, FillRule, ViewBox};
use outline_refine::refine::{refine_glyph, ClassProbs};
use outline_refine::svg_io::{parse_path_data, serialize_path_data};

/// Result code of every `olr_*` call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OlrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Path data could not be parsed.
    Parse = 3,
    /// An argument was out of range or a buffer had the wrong length.
    InvalidArgument = 4,
    /// The glyph cannot be used for the requested operation.
    Glyph = 5,
    /// Refinement rejected the predictions.
    Refine = 6,
    /// A metric could not be computed.
    Metric = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// Opaque glyph handle.
pub struct OlrGlyph {
    glyph: Glyph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(OlrStatus, String);

fn fail<T>(status: OlrStatus, message: impl ToString) -> Result<T, Failure> {
    Err(Failure(status, message.to_string()))
}

/// Runs `body`, translating failures and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OlrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OlrStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            OlrStatus::Panic
        }
    }
}

unsafe fn glyph_ref<'a>(g: *const OlrGlyph, name: &str) -> Result<&'a Glyph, Failure> {
    match g.as_ref() {
        Some(h) => Ok(&h.glyph),
        None => fail(OlrStatus::NullPointer, format!("`{name}` is null")),
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(OlrStatus::NullPointer, format!("`{name}` is null")),
    }
}

/// A slice from a pointer and length; a null pointer is accepted for length 0.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        fail(OlrStatus::NullPointer, format!("`{name}` is null"))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

fn em(glyph: &Glyph) -> Result<Glyph, Failure> {
    glyph.to_em_units().or_else(|e| fail(OlrStatus::Glyph, e))
}

fn boxed(glyph: Glyph) -> *mut OlrGlyph {
    Box::into_raw(Box::new(OlrGlyph { glyph }))
}

/// Parses SVG path data into a glyph on a grid of `units_per_em` units.
///
/// # Safety
/// `path_data` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_parse(
    path_data: *const c_char,
    units_per_em: f64,
    out: *mut *mut OlrGlyph,
) -> OlrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if path_data.is_null() {
            return fail(OlrStatus::NullPointer, "`path_data` is null");
        }
        if !(units_per_em > 0.0 && units_per_em.is_finite()) {
            return fail(OlrStatus::InvalidArgument, format!("units_per_em must be positive, got {units_per_em}"));
        }
        let text = CStr::from_ptr(path_data).to_str().or_else(|e| fail(OlrStatus::InvalidUtf8, e))?;
        let paths = parse_path_data(text).or_else(|e| fail(OlrStatus::Parse, e))?;
        *out = boxed(Glyph::new(paths, units_per_em));
        Ok(())
    })
}

/// Releases a glyph. Null is ignored.
///
/// # Safety
/// `glyph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_free(glyph: *mut OlrGlyph) {
    if !glyph.is_null() {
        drop(Box::from_raw(glyph));
    }
}

/// Number of paths (contours) in the glyph.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_path_count(glyph: *const OlrGlyph, out: *mut usize) -> OlrStatus {
    guard(|| {
        *out_ref(out, "out")? = glyph_ref(glyph, "glyph")?.paths.len();
        Ok(())
    })
}

/// Scales to EM units and centers the bounding box on the origin, returning
/// a new handle.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_normalize(glyph: *const OlrGlyph, out: *mut *mut OlrGlyph) -> OlrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let g = normalize_glyph(glyph_ref(glyph, "glyph")?).or_else(|e| fail(OlrStatus::Glyph, e))?;
        *out = boxed(g);
        Ok(())
    })
}

/// Serializes the glyph as SVG path data with `precision` decimal places
/// (at most 17). Free the string with [`olr_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_to_svg(glyph: *const OlrGlyph, precision: u32, out: *mut *mut c_char) -> OlrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let g = glyph_ref(glyph, "glyph")?;
        if precision > 17 {
            return fail(OlrStatus::InvalidArgument, "precision must be at most 17");
        }
        let text = serialize_path_data(&g.paths, precision as usize);
        *out = CString::new(text).expect("path data has no nul bytes").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn olr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of junction sites and line sites, which size the label and
/// prediction buffers.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_site_counts(
    glyph: *const OlrGlyph,
    junctions: *mut usize,
    lines: *mut usize,
) -> OlrStatus {
    guard(|| {
        let g = glyph_ref(glyph, "glyph")?;
        *out_ref(junctions, "junctions")? = junction_sites(g).len();
        *out_ref(lines, "lines")? = line_sites(g).len();
        Ok(())
    })
}

/// Writes continuity codes (0 = C0, 1 = G1, 2 = C1) and alignment codes
/// (0 = H, 1 = V, 2 = none) with the default thresholds. Buffer lengths must
/// equal the site counts.
///
/// # Safety
/// Each buffer must hold at least its stated length.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_label(
    glyph: *const OlrGlyph,
    continuity: *mut u8,
    continuity_len: usize,
    alignment: *mut u8,
    alignment_len: usize,
) -> OlrStatus {
    guard(|| {
        let g = em(glyph_ref(glyph, "glyph")?)?;
        let labels = label_glyph(&g, &Thresholds::default());
        let (cont, align) = (labels.continuity_codes(), labels.alignment_codes());
        if cont.len() != continuity_len || align.len() != alignment_len {
            return fail(
                OlrStatus::InvalidArgument,
                format!("buffers must hold {} continuity and {} alignment codes", cont.len(), align.len()),
            );
        }
        if continuity_len > 0 {
            if continuity.is_null() {
                return fail(OlrStatus::NullPointer, "`continuity` is null");
            }
            std::slice::from_raw_parts_mut(continuity, continuity_len).copy_from_slice(&cont);
        }
        if alignment_len > 0 {
            if alignment.is_null() {
                return fail(OlrStatus::NullPointer, "`alignment` is null");
            }
            std::slice::from_raw_parts_mut(alignment, alignment_len).copy_from_slice(&align);
        }
        Ok(())
    })
}

fn class_probs(flat: &[f64], what: &str) -> Result<Vec<ClassProbs>, Failure> {
    flat.chunks_exact(3)
        .map(|c| ClassProbs::new([c[0], c[1], c[2]]).or_else(|e| fail(OlrStatus::InvalidArgument, format!("{what}: {e}"))))
        .collect()
}

fn refine_into(g: &Glyph, jp: &[ClassProbs], ap: &[ClassProbs], confidence: f64) -> Result<Glyph, Failure> {
    if !(0.0..1.0).contains(&confidence) {
        return fail(OlrStatus::InvalidArgument, format!("confidence must lie in [0, 1), got {confidence}"));
    }
    let em_glyph = em(g)?;
    let out = refine_glyph(&em_glyph, jp, ap, confidence).or_else(|e| fail(OlrStatus::Refine, e))?;
    Ok(match g.units_per_em {
        Some(upm) if !g.normalized => out.glyph.from_em_units(upm),
        _ => out.glyph,
    })
}

/// Refines with per-site class probabilities laid out row-major, three per
/// site: `{C0, G1, C1}` for junctions and `{H, V, none}` for lines. A site is
/// repaired only when its most likely class has probability above
/// `confidence`.
///
/// # Safety
/// Each probability buffer must hold `3 * count` values.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_refine(
    glyph: *const OlrGlyph,
    junction_probs: *const f64,
    junction_count: usize,
    line_probs: *const f64,
    line_count: usize,
    confidence: f64,
    out: *mut *mut OlrGlyph,
) -> OlrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let g = glyph_ref(glyph, "glyph")?;
        let jp = class_probs(slice(junction_probs, 3 * junction_count, "junction_probs")?, "junction")?;
        let ap = class_probs(slice(line_probs, 3 * line_count, "line_probs")?, "line")?;
        *out = boxed(refine_into(g, &jp, &ap, confidence)?);
        Ok(())
    })
}

/// Refines toward the glyph's own labels, which never lowers a label.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn olr_glyph_refine_oracle(glyph: *const OlrGlyph, out: *mut *mut OlrGlyph) -> OlrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let g = glyph_ref(glyph, "glyph")?;
        let labels = label_glyph(&em(g)?, &Thresholds::default());
        let hot = |codes: Vec<u8>| codes.into_iter().map(|c| ClassProbs::one_hot(c as usize)).collect::<Vec<_>>();
        let jp = hot(labels.continuity_codes());
        let ap = hot(labels.alignment_codes());
        *out = boxed(refine_into(g, &jp, &ap, outline_refine::refine::DEFAULT_CONFIDENCE)?);
        Ok(())
    })
}

/// Raster IoU of two glyphs at `resolution` over the default EM view box
/// with the nonzero rule. Normalize both glyphs first for a centered frame.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn olr_iou(a: *const OlrGlyph, b: *const OlrGlyph, resolution: usize, out: *mut f64) -> OlrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let (ga, gb) = (em(glyph_ref(a, "a")?)?, em(glyph_ref(b, "b")?)?);
        let raster = |g: &Glyph| {
            rasterize(g, resolution, FillRule::NonZero, ViewBox::default()).or_else(|e| fail(OlrStatus::Metric, e))
        };
        *out = iou(&raster(&ga)?, &raster(&gb)?).or_else(|e| fail(OlrStatus::Metric, e))?;
        Ok(())
    })
}

/// Symmetric Chamfer distance between outlines sampled at `n_per_segment`
/// parameter-uniform points per segment, in EM units.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn olr_chamfer(
    a: *const OlrGlyph,
    b: *const OlrGlyph,
    n_per_segment: usize,
    out: *mut f64,
) -> OlrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if n_per_segment < 2 {
            return fail(OlrStatus::InvalidArgument, "n_per_segment must be at least 2");
        }
        let (ga, gb) = (em(glyph_ref(a, "a")?)?, em(glyph_ref(b, "b")?)?);
        *out = chamfer_re(&ga, &gb, n_per_segment, Sampling::Parameter).or_else(|e| fail(OlrStatus::Metric, e))?;
        Ok(())
    })
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn olr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn olr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
