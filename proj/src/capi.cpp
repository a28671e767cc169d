#include "swjd/swjd.h"

#include "swjd/config.hpp"
#include "swjd/examples.hpp"
#include "swjd/parallel.hpp"
#include "swjd/runner.hpp"
#include "swjd/simulate.hpp"

#include <filesystem>
#include <new>
#include <string>

struct swjd_model {
  swjd::LoadedModel loaded;
};

struct swjd_result {
  swjd::CommandOutput output;
};

namespace {

thread_local std::string last_error;

swjd_status fail(swjd_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <class F>
swjd_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const swjd::InvalidInput& e) {
    return fail(SWJD_INVALID_ARGUMENT, e.what());
  } catch (const swjd::TruncationError& e) {
    return fail(SWJD_TRUNCATION, e.what());
  } catch (const swjd::NumericError& e) {
    return fail(SWJD_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SWJD_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SWJD_INTERNAL, e.what());
  } catch (...) {
    return fail(SWJD_INTERNAL, "unknown exception");
  }
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& e : v) s += (s.empty() ? "" : " ") + e;
  return s;
}

}  // namespace

extern "C" {

const char* swjd_version(void) { return "1.0.0"; }

const char* swjd_status_string(swjd_status status) {
  switch (status) {
    case SWJD_OK: return "ok";
    case SWJD_INVALID_ARGUMENT: return "invalid argument";
    case SWJD_UNKNOWN_MODEL: return "unknown model";
    case SWJD_TRUNCATION: return "truncation failure";
    case SWJD_NUMERIC: return "numeric failure";
    case SWJD_IO: return "i/o error";
    case SWJD_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* swjd_last_error(void) { return last_error.c_str(); }

const char* swjd_builtin_names(void) {
  static const std::string s = join(swjd::builtin_names());
  return s.c_str();
}

const char* swjd_command_names(void) {
  static const std::string s = join(swjd::command_names());
  return s.c_str();
}

swjd_status swjd_set_threads(int n) {
  if (n < 0) return fail(SWJD_INVALID_ARGUMENT, "thread count must be >= 0");
  return guarded([&] {
    swjd::set_thread_count(n);
    return SWJD_OK;
  });
}

int swjd_get_threads(void) { return swjd::thread_count(); }

swjd_status swjd_model_load(const char* name_or_path, swjd_model** out) {
  if (!name_or_path || !out) return fail(SWJD_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  const std::string name = name_or_path;
  if (!swjd::is_builtin_name(name)) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(name, ec)) {
      return fail(SWJD_UNKNOWN_MODEL, "unknown model '" + name + "' (not a built-in and no such config file); built-ins: " +
                                          join(swjd::builtin_names()));
    }
  }
  return guarded([&] {
    auto* m = new swjd_model{swjd::load_model(name)};
    *out = m;
    return SWJD_OK;
  });
}

swjd_status swjd_model_from_json(const char* json_text, swjd_model** out) {
  if (!json_text || !out) return fail(SWJD_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new swjd_model{swjd::parse_model_config(json_text)};
    return SWJD_OK;
  });
}

void swjd_model_free(swjd_model* model) { delete model; }

int swjd_model_dim(const swjd_model* model) { return model ? model->loaded.spec.dim : 0; }

const char* swjd_model_name(const swjd_model* model) { return model ? model->loaded.spec.name.c_str() : ""; }

const char* swjd_model_config(const swjd_model* model) { return model ? model->loaded.resolved_json.c_str() : ""; }

swjd_status swjd_run(const swjd_model* model, const char* command, const char* params_json, swjd_result** out) {
  if (!model || !command || !out) return fail(SWJD_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new swjd_result{swjd::run_command(model->loaded, command, params_json ? params_json : "")};
    return SWJD_OK;
  });
}

const char* swjd_result_json(const swjd_result* result) { return result ? result->output.json.c_str() : ""; }

const char* swjd_result_summary(const swjd_result* result) { return result ? result->output.summary.c_str() : ""; }

int swjd_result_passed(const swjd_result* result) { return result && result->output.passed ? 1 : 0; }

size_t swjd_result_artifact_count(const swjd_result* result) { return result ? result->output.artifacts.size() : 0; }

const char* swjd_result_artifact_name(const swjd_result* result, size_t index) {
  if (!result || index >= result->output.artifacts.size()) return nullptr;
  return result->output.artifacts[index].name.c_str();
}

const void* swjd_result_artifact_data(const swjd_result* result, size_t index, size_t* size) {
  if (!result || index >= result->output.artifacts.size()) {
    if (size) *size = 0;
    return nullptr;
  }
  const std::string& d = result->output.artifacts[index].data;
  if (size) *size = d.size();
  return d.data();
}

void swjd_result_free(swjd_result* result) { delete result; }

swjd_status swjd_simulate(const swjd_model* model, const double* x, int k, double t, double h, uint64_t seed,
                          double* x_out, int* k_out, int* exited) {
  if (!model || !x || !x_out || !k_out) return fail(SWJD_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const swjd::ModelSpec& spec = model->loaded.spec;
    swjd::Vector v(spec.dim);
    for (int i = 0; i < spec.dim; ++i) v(i) = x[i];
    swjd::IntegratorConfig cfg;
    cfg.horizon = t;
    cfg.step = h;
    cfg.record_stride = 0;
    cfg.record_events = false;
    if (model->loaded.regime_rel_tol) cfg.regime_rel_tol = *model->loaded.regime_rel_tol;
    const swjd::PathRecord p = swjd::simulate_path(spec, swjd::HybridState(v, k), cfg, seed);
    for (int i = 0; i < spec.dim; ++i) x_out[i] = p.terminal.x(i);
    *k_out = p.terminal.k;
    if (exited) *exited = p.exited() ? 1 : 0;
    return SWJD_OK;
  });
}

}  // extern "C"
