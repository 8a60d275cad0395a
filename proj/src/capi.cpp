#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vpb/vpb.h>

#include "error.hpp"
#include "runs.hpp"

struct vpb_config {
  vpb::KeyValueConfig kv;
};

struct vpb_model {
  std::shared_ptr<const vpb::VelocityModel> model;
};

namespace {

thread_local std::string last_error;

template <class F>
vpb_status guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return VPB_OK;
  } catch (const vpb::Error& e) {
    last_error = e.what();
    return static_cast<vpb_status>(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return VPB_ERR_NUMERICAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return VPB_ERR_NUMERICAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) vpb::usage_error(std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void merge(vpb::KeyValueConfig& into, const vpb::KeyValueConfig& from) {
  for (const auto& [k, v] : from.entries()) into.set(k, v);
}

// A copy, so that key-use tracking in one run never leaks into the next.
vpb::KeyValueConfig fresh(const vpb_config* cfg) { return cfg->kv; }

}  // namespace

extern "C" {

const char* vpb_version(void) { return "0.1.0"; }

const char* vpb_last_error(void) { return last_error.c_str(); }

void vpb_free_string(char* s) { std::free(s); }

vpb_status vpb_config_create(vpb_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new vpb_config();
  });
}

vpb_status vpb_config_load_file(vpb_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    merge(cfg->kv, vpb::KeyValueConfig::parse_file(path));
  });
}

vpb_status vpb_config_parse(vpb_config* cfg, const char* text) {
  return guarded([&] {
    require(cfg, "config");
    require(text, "text");
    merge(cfg->kv, vpb::KeyValueConfig::parse_string(text));
  });
}

vpb_status vpb_config_set(vpb_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->kv.set(key, value);
  });
}

void vpb_config_destroy(vpb_config* cfg) { delete cfg; }

vpb_status vpb_model_build(const vpb_config* cfg, vpb_model** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    auto kv = fresh(cfg);
    auto model = vpb::build_model(vpb::model_settings_from(kv));
    *out = new vpb_model{std::move(model)};
  });
}

void vpb_model_destroy(vpb_model* model) { delete model; }

vpb_status vpb_model_coefficients_json(const vpb_model* model, char** json_out) {
  return guarded([&] {
    require(model, "model");
    require(json_out, "json_out");
    *json_out = dup(vpb::coefficients_json(*model->model));
  });
}

vpb_status vpb_model_write_spectra(const vpb_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    vpb::write_spectra_csv(*model->model->ops, path);
  });
}

vpb_status vpb_model_write_alpha_beta(const vpb_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    vpb::write_alpha_beta_table(*model->model, path);
  });
}

vpb_status vpb_simulate(const vpb_model* model, const vpb_config* cfg, const char* out_dir, char** json_out) {
  return guarded([&] {
    require(model, "model");
    require(cfg, "config");
    require(out_dir, "out_dir");
    auto kv = fresh(cfg);
    const auto r = vpb::simulate(model->model, kv, out_dir);
    if (json_out) *json_out = dup(r.summary);
  });
}

vpb_status vpb_fluid(const vpb_model* model, const vpb_config* cfg, const char* out_dir, char** json_out) {
  return guarded([&] {
    require(model, "model");
    require(cfg, "config");
    require(out_dir, "out_dir");
    auto kv = fresh(cfg);
    const auto r = vpb::fluid_run(model->model, kv, out_dir);
    if (json_out) *json_out = dup(r.summary);
  });
}

vpb_status vpb_sweep(const vpb_model* model, const vpb_config* cfg, const char* out_dir, int threads,
                     char** json_out) {
  return guarded([&] {
    require(model, "model");
    require(cfg, "config");
    require(out_dir, "out_dir");
    auto kv = fresh(cfg);
    const auto r = vpb::sweep(model->model, kv, out_dir, threads);
    if (json_out) *json_out = dup(r.summary);
  });
}

vpb_status vpb_selftest(const vpb_model* model, char** json_out, int* failures_out) {
  return guarded([&] {
    require(model, "model");
    int failures = 0;
    const std::string report = vpb::selftest(model->model, failures);
    if (failures_out) *failures_out = failures;
    if (json_out) *json_out = dup(report);
  });
}

}  // extern "C"
