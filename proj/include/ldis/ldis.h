#ifndef LDIS_LDIS_H
#define LDIS_LDIS_H

#include <stddef.h>
#include <stdint.h>

#if defined(LDIS_BUILDING_LIBRARY)
#define LDIS_API __attribute__((visibility("default")))
#else
#define LDIS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  LDIS_OK = 0,
  LDIS_ERR_INVALID_ARGUMENT = 1,
  LDIS_ERR_IO = 2,
  LDIS_ERR_FORMAT = 3,
  LDIS_ERR_DIMENSION_MISMATCH = 4,
  LDIS_ERR_NON_FINITE = 5,
  LDIS_ERR_DEGENERATE = 6,
  LDIS_ERR_INTERNAL = 7
} ldis_status;

typedef struct ldis_image ldis_image;
typedef struct ldis_fit_config ldis_fit_config;
typedef struct ldis_fit_result ldis_fit_result;

/* Message of the last failed call on this thread; empty after success. */
LDIS_API const char* ldis_last_error(void);
LDIS_API const char* ldis_version(void);

/* Strings returned through char** are owned by the caller. */
LDIS_API void ldis_string_free(char* s);

/* RGB images, row-major, interleaved, values in [0,1]. */
LDIS_API ldis_status ldis_image_load(const char* path, ldis_image** out);
LDIS_API ldis_status ldis_image_from_rgb(int width, int height, const double* rgb,
                                         ldis_image** out);
LDIS_API ldis_status ldis_image_save(const ldis_image* img, const char* path);
LDIS_API int ldis_image_width(const ldis_image* img);
LDIS_API int ldis_image_height(const ldis_image* img);
LDIS_API void ldis_image_free(ldis_image* img);

/* Defaults, overridden by the keys present in `json` (may be NULL). */
LDIS_API ldis_status ldis_fit_config_create(const char* json, ldis_fit_config** out);
LDIS_API ldis_status ldis_fit_config_to_json(const ldis_fit_config* cfg, char** out);
LDIS_API void ldis_fit_config_free(ldis_fit_config* cfg);

/* LDIS_ERR_DEGENERATE when every restart ends with no valid pixel. */
LDIS_API ldis_status ldis_fit(const ldis_image* frame1, const ldis_image* frame2,
                              const ldis_fit_config* cfg, ldis_fit_result** out);
LDIS_API double ldis_fit_result_loss(const ldis_fit_result* r);
LDIS_API int ldis_fit_result_restart(const ldis_fit_result* r);
LDIS_API int ldis_fit_result_iterations(const ldis_fit_result* r);
/* Six affine coefficients of layer 1 (top) or 2, normalized coordinates. */
LDIS_API ldis_status ldis_fit_result_params(const ldis_fit_result* r, int layer, double out[6]);
/* Top-layer mask, width*height bytes of 0/1, row-major. */
LDIS_API ldis_status ldis_fit_result_mask(const ldis_fit_result* r, uint8_t* out, size_t size);
LDIS_API ldis_status ldis_fit_result_to_json(const ldis_fit_result* r, char** out);
LDIS_API void ldis_fit_result_free(ldis_fit_result* r);

/* Finite-difference gradient suite; options JSON may be NULL. Sets
   *all_passed and returns the report as JSON. */
LDIS_API ldis_status ldis_gradcheck(const char* options_json, char** report_json,
                                    int* all_passed);

/* Runs a CLI subcommand from a run configuration document and returns its
   exit code: 0 ok, 1 check failure, 2 usage, 3 I/O, 4 degenerate fit.
   Results go to stdout, progress and errors to stderr. */
LDIS_API int ldis_run_command(const char* run_config_json);

#ifdef __cplusplus
}
#endif

#endif
