/* C interface to the two-species kinetic / fluid limit library.
 *
 * Every call returns a vpb_status. On failure the message is available from
 * vpb_last_error() on the same thread until the next call. Strings returned
 * through char** out-parameters are owned by the caller and released with
 * vpb_free_string(). */
#ifndef VPB_VPB_H
#define VPB_VPB_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define VPB_API __declspec(dllexport)
#else
#define VPB_API __attribute__((visibility("default")))
#endif

typedef enum vpb_status {
  VPB_OK = 0,
  VPB_ERR_USAGE = 1,
  VPB_ERR_NUMERICAL = 2,
  VPB_ERR_IO = 3
} vpb_status;

typedef struct vpb_config vpb_config;
typedef struct vpb_model vpb_model;

VPB_API const char* vpb_version(void);
VPB_API const char* vpb_last_error(void);
VPB_API void vpb_free_string(char* s);

/* Flat key = value configuration. */
VPB_API vpb_status vpb_config_create(vpb_config** out);
VPB_API vpb_status vpb_config_load_file(vpb_config* cfg, const char* path);
VPB_API vpb_status vpb_config_parse(vpb_config* cfg, const char* text);
VPB_API vpb_status vpb_config_set(vpb_config* cfg, const char* key, const char* value);
VPB_API void vpb_config_destroy(vpb_config* cfg);

/* Velocity model (basis, collision operators, transport coefficients) built
 * from K, quad_order, cross_section and cache in the configuration. */
VPB_API vpb_status vpb_model_build(const vpb_config* cfg, vpb_model** out);
VPB_API void vpb_model_destroy(vpb_model* model);

/* Coefficients and operator diagnostics as JSON. */
VPB_API vpb_status vpb_model_coefficients_json(const vpb_model* model, char** json_out);
/* Eigenvalue spectra of L1 and L2 as CSV. */
VPB_API vpb_status vpb_model_write_spectra(const vpb_model* model, const char* path);
/* (radius, alpha, beta) sample table as CSV. */
VPB_API vpb_status vpb_model_write_alpha_beta(const vpb_model* model, const char* path);

/* Whole runs. Files go into out_dir; the JSON summary is returned. */
VPB_API vpb_status vpb_simulate(const vpb_model* model, const vpb_config* cfg, const char* out_dir, char** json_out);
VPB_API vpb_status vpb_fluid(const vpb_model* model, const vpb_config* cfg, const char* out_dir, char** json_out);
/* threads <= 0 keeps the configured value. */
VPB_API vpb_status vpb_sweep(const vpb_model* model, const vpb_config* cfg, const char* out_dir, int threads,
                             char** json_out);
/* failures_out receives the number of failed checks; the status is VPB_OK even
 * when checks fail. */
VPB_API vpb_status vpb_selftest(const vpb_model* model, char** json_out, int* failures_out);

#ifdef __cplusplus
}
#endif

#endif
