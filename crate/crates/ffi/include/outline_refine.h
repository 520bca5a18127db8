#ifndef OUTLINE_REFINE_H
#define OUTLINE_REFINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every `olr_*` call.
 */
typedef enum OlrStatus {
  OLR_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  OLR_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  OLR_STATUS_INVALID_UTF8 = 2,
  /**
   * Path data could not be parsed.
   */
  OLR_STATUS_PARSE = 3,
  /**
   * An argument was out of range or a buffer had the wrong length.
   */
  OLR_STATUS_INVALID_ARGUMENT = 4,
  /**
   * The glyph cannot be used for the requested operation.
   */
  OLR_STATUS_GLYPH = 5,
  /**
   * Refinement rejected the predictions.
   */
  OLR_STATUS_REFINE = 6,
  /**
   * A metric could not be computed.
   */
  OLR_STATUS_METRIC = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  OLR_STATUS_PANIC = 8,
} OlrStatus;

/**
 * Opaque glyph handle.
 */
typedef struct OlrGlyph OlrGlyph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses SVG path data into a glyph on a grid of `units_per_em` units.
 *
 * # Safety
 * `path_data` must be a nul-terminated string and `out` a valid pointer.
 */
enum OlrStatus olr_glyph_parse(const char *path_data, double units_per_em, struct OlrGlyph **out);

/**
 * Releases a glyph. Null is ignored.
 *
 * # Safety
 * `glyph` must come from this library and not be used afterwards.
 */
void olr_glyph_free(struct OlrGlyph *glyph);

/**
 * Number of paths (contours) in the glyph.
 *
 * # Safety
 * Pointers must be valid.
 */
enum OlrStatus olr_glyph_path_count(const struct OlrGlyph *glyph, size_t *out);

/**
 * Scales to EM units and centers the bounding box on the origin, returning
 * a new handle.
 *
 * # Safety
 * Pointers must be valid.
 */
enum OlrStatus olr_glyph_normalize(const struct OlrGlyph *glyph, struct OlrGlyph **out);

/**
 * Serializes the glyph as SVG path data with `precision` decimal places
 * (at most 17). Free the string with [`olr_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum OlrStatus olr_glyph_to_svg(const struct OlrGlyph *glyph, uint32_t precision, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void olr_string_free(char *s);

/**
 * Number of junction sites and line sites, which size the label and
 * prediction buffers.
 *
 * # Safety
 * Pointers must be valid.
 */
enum OlrStatus olr_glyph_site_counts(const struct OlrGlyph *glyph,
                                     size_t *junctions,
                                     size_t *lines);

/**
 * Writes continuity codes (0 = C0, 1 = G1, 2 = C1) and alignment codes
 * (0 = H, 1 = V, 2 = none) with the default thresholds. Buffer lengths must
 * equal the site counts.
 *
 * # Safety
 * Each buffer must hold at least its stated length.
 */
enum OlrStatus olr_glyph_label(const struct OlrGlyph *glyph,
                               uint8_t *continuity,
                               size_t continuity_len,
                               uint8_t *alignment,
                               size_t alignment_len);

/**
 * Refines with per-site class probabilities laid out row-major, three per
 * site: `{C0, G1, C1}` for junctions and `{H, V, none}` for lines. A site is
 * repaired only when its most likely class has probability above
 * `confidence`.
 *
 * # Safety
 * Each probability buffer must hold `3 * count` values.
 */
enum OlrStatus olr_glyph_refine(const struct OlrGlyph *glyph,
                                const double *junction_probs,
                                size_t junction_count,
                                const double *line_probs,
                                size_t line_count,
                                double confidence,
                                struct OlrGlyph **out);

/**
 * Refines toward the glyph's own labels, which never lowers a label.
 *
 * # Safety
 * Pointers must be valid.
 */
enum OlrStatus olr_glyph_refine_oracle(const struct OlrGlyph *glyph, struct OlrGlyph **out);

/**
 * Raster IoU of two glyphs at `resolution` over the default EM view box
 * with the nonzero rule. Normalize both glyphs first for a centered frame.
 *
 * # Safety
 * Pointers must be valid.
 */
enum OlrStatus olr_iou(const struct OlrGlyph *a,
                       const struct OlrGlyph *b,
                       size_t resolution,
                       double *out);

/**
 * Symmetric Chamfer distance between outlines sampled at `n_per_segment`
 * parameter-uniform points per segment, in EM units.
 *
 * # Safety
 * Pointers must be valid.
 */
enum OlrStatus olr_chamfer(const struct OlrGlyph *a,
                           const struct OlrGlyph *b,
                           size_t n_per_segment,
                           double *out);

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *olr_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *olr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OUTLINE_REFINE_H */
