#ifndef BILLIARD_COUNTING_H
#define BILLIARD_COUNTING_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum BcStatus {
  BC_STATUS_OK = 0,
  BC_STATUS_NULL_POINTER = 1,
  // Malformed text or JSON.
  BC_STATUS_SCHEMA = 2,
  // Invalid polygon, point or parameter.
  BC_STATUS_VALIDATION = 3,
  // The beam cap was reached before the computation finished.
  BC_STATUS_BUDGET_EXCEEDED = 4,
  // Exceptional base point or direction.
  BC_STATUS_EXCEPTIONAL = 5,
  BC_STATUS_INTERNAL = 6,
} BcStatus;

typedef enum BcAverageKind {
  // Integral of `gd_θ(n)` over directions, divided by `2π`.
  BC_AVERAGE_KIND_DIRECTION_MAP = 0,
  // Integral of `gc_z(l)` over the table, divided by the area.
  BC_AVERAGE_KIND_POSITION_FLOW = 1,
} BcAverageKind;

// A complexity function.
typedef struct BcComplexity BcComplexity;

// A validated billiard table.
typedef struct BcPolygon BcPolygon;

// A counting function: singular orbits sorted by abscissa.
typedef struct BcSeries BcSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. Valid until the next failing call.
const char *bc_last_error_message(void);

// Library version as a static string.
const char *bc_version(void);

// Parses and validates a polygon file body.
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum BcStatus bc_polygon_from_json(const char *json, struct BcPolygon **out);

// # Safety
// `p` must be null or a handle from [`bc_polygon_from_json`] not yet freed.
void bc_polygon_free(struct BcPolygon *p);

// Number of corners, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live polygon handle.
size_t bc_polygon_corner_count(const struct BcPolygon *p);

// # Safety
// `p` must be a live polygon handle and `out` a valid pointer.
enum BcStatus bc_polygon_area(const struct BcPolygon *p, double *out);

// Flow counting function `gc_z(l)`; `max_tiles = 0` selects the default cap. A series that hit the
// cap is still returned, with [`bc_series_is_complete`] false.
//
// # Safety
// `p` must be a live polygon handle, `z` must point to `z_len` doubles and `out` must be valid.
enum BcStatus bc_count_position(const struct BcPolygon *p,
                                const double *z,
                                size_t z_len,
                                double max_length,
                                size_t max_tiles,
                                struct BcSeries **out);

// Map counting function `gd_θ(n)` on a planar polygon.
//
// # Safety
// `p` must be a live polygon handle and `out` a valid pointer.
enum BcStatus bc_count_direction(const struct BcPolygon *p,
                                 double theta,
                                 size_t max_steps,
                                 size_t max_tiles,
                                 struct BcSeries **out);

// # Safety
// `s` must be null or a series handle not yet freed.
void bc_series_free(struct BcSeries *s);

// Number of records, or 0 for a null handle.
//
// # Safety
// `s` must be null or a live series handle.
size_t bc_series_len(const struct BcSeries *s);

// # Safety
// `s` must be null or a live series handle.
bool bc_series_is_complete(const struct BcSeries *s);

// Value of the counting function at `x`, or 0 for a null handle.
//
// # Safety
// `s` must be null or a live series handle.
size_t bc_series_count(const struct BcSeries *s, double x);

// Corner, length and step count of record `index`.
//
// # Safety
// `s` must be a live series handle; the output pointers must be valid.
enum BcStatus bc_series_record(const struct BcSeries *s,
                               size_t index,
                               size_t *corner,
                               double *length,
                               size_t *steps);

// Serializes the series as JSON; release the string with [`bc_string_free`].
//
// # Safety
// `s` must be a live series handle and `out` a valid pointer.
enum BcStatus bc_series_to_json(const struct BcSeries *s, char **out);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void bc_string_free(char *s);

// Position complexity `h_z(l)`.
//
// # Safety
// `p` must be a live polygon handle, `z` must point to `z_len` doubles and `out` must be valid.
enum BcStatus bc_complexity_position(const struct BcPolygon *p,
                                     const double *z,
                                     size_t z_len,
                                     double max_length,
                                     size_t max_tiles,
                                     struct BcComplexity **out);

// Value of the complexity function at `x`, or 0 for a null handle.
//
// # Safety
// `c` must be null or a live complexity handle.
size_t bc_complexity_value(const struct BcComplexity *c, double x);

// # Safety
// `c` must be null or a complexity handle not yet freed.
void bc_complexity_free(struct BcComplexity *c);

// Closed-form normalized average, comparable with a sample mean; `kind` is a [`BcAverageKind`].
//
// # Safety
// `p` must be a live polygon handle and `out` a valid pointer.
enum BcStatus bc_closed_form_average(const struct BcPolygon *p,
                                     uint32_t kind,
                                     double arg,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BILLIARD_COUNTING_H */
