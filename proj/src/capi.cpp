#include "ldis/ldis.h"

#include <cstring>
#include <iostream>
#include <string>

#include "ldis/commands.hpp"
#include "ldis/fit.hpp"
#include "ldis/json_io.hpp"
#include "ldis/oracle.hpp"

using nlohmann::json;

struct ldis_image {
  ldis::Image img;
};

struct ldis_fit_config {
  ldis::FitConfig cfg;
};

struct ldis_fit_result {
  ldis::FitResult result;
  ldis::FitConfig cfg;
};

namespace {

thread_local std::string last_error;

ldis_status fail(ldis_status code, const char* what) {
  last_error = what;
  return code;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
ldis_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return LDIS_OK;
  } catch (const ldis::Error& e) {
    return fail(static_cast<ldis_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(LDIS_ERR_FORMAT, e.what());
  } catch (const std::exception& e) {
    return fail(LDIS_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* ldis_last_error(void) { return last_error.c_str(); }

const char* ldis_version(void) { return "1.0.0"; }

void ldis_string_free(char* s) { delete[] s; }

ldis_status ldis_image_load(const char* path, ldis_image** out) {
  if (!path || !out) return fail(LDIS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = new ldis_image{ldis::load_image(path)}; });
}

ldis_status ldis_image_from_rgb(int width, int height, const double* rgb, ldis_image** out) {
  if (!rgb || !out || width <= 0 || height <= 0) {
    return fail(LDIS_ERR_INVALID_ARGUMENT, "invalid image arguments");
  }
  return guarded([&] {
    ldis::Image img(width, height);
    std::memcpy(img.raw().data(), rgb, img.raw().size() * sizeof(double));
    *out = new ldis_image{std::move(img)};
  });
}

ldis_status ldis_image_save(const ldis_image* img, const char* path) {
  if (!img || !path) return fail(LDIS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { ldis::save_image(img->img, path); });
}

int ldis_image_width(const ldis_image* img) { return img ? img->img.width() : 0; }

int ldis_image_height(const ldis_image* img) { return img ? img->img.height() : 0; }

void ldis_image_free(ldis_image* img) { delete img; }

ldis_status ldis_fit_config_create(const char* text, ldis_fit_config** out) {
  if (!out) return fail(LDIS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    ldis::FitConfig cfg;
    if (text) json::parse(text).get_to(cfg);
    cfg.validate();
    *out = new ldis_fit_config{cfg};
  });
}

ldis_status ldis_fit_config_to_json(const ldis_fit_config* cfg, char** out) {
  if (!cfg || !out) return fail(LDIS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = dup_string(json(cfg->cfg).dump(2)); });
}

void ldis_fit_config_free(ldis_fit_config* cfg) { delete cfg; }

ldis_status ldis_fit(const ldis_image* frame1, const ldis_image* frame2,
                     const ldis_fit_config* cfg, ldis_fit_result** out) {
  if (!frame1 || !frame2 || !out) return fail(LDIS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const ldis::FitConfig c = cfg ? cfg->cfg : ldis::FitConfig{};
    *out = new ldis_fit_result{ldis::fit_pair(frame1->img, frame2->img, c), c};
  });
}

double ldis_fit_result_loss(const ldis_fit_result* r) { return r ? r->result.final_loss : 0.0; }

int ldis_fit_result_restart(const ldis_fit_result* r) { return r ? r->result.restart : -1; }

int ldis_fit_result_iterations(const ldis_fit_result* r) { return r ? r->result.iterations : 0; }

ldis_status ldis_fit_result_params(const ldis_fit_result* r, int layer, double out[6]) {
  if (!r || !out || (layer != 1 && layer != 2)) {
    return fail(LDIS_ERR_INVALID_ARGUMENT, "layer must be 1 or 2");
  }
  const ldis::AffineParams& p = layer == 1 ? r->result.latents.params1 : r->result.latents.params2;
  std::memcpy(out, p.a.data(), 6 * sizeof(double));
  last_error.clear();
  return LDIS_OK;
}

ldis_status ldis_fit_result_mask(const ldis_fit_result* r, uint8_t* out, size_t size) {
  if (!r || !out) return fail(LDIS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const ldis::Mask m = ldis::layer_mask(r->result.latents, r->cfg.tau_end, r->cfg.threshold);
    if (size != m.pixel_count()) {
      throw ldis::Error(ldis::ErrorCode::dimension_mismatch, "mask buffer size mismatch");
    }
    std::memcpy(out, m.raw().data(), size);
  });
}

ldis_status ldis_fit_result_to_json(const ldis_fit_result* r, char** out) {
  if (!r || !out) return fail(LDIS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto& f = r->result;
    json j{{"final_loss", f.final_loss},   {"initial_loss", f.initial_loss},
           {"restart", f.restart},         {"iterations", f.iterations},
           {"degenerate", f.degenerate},   {"final_tau", f.final_tau},
           {"params1", f.latents.params1}, {"params2", f.latents.params2}};
    *out = dup_string(j.dump(2));
  });
}

void ldis_fit_result_free(ldis_fit_result* r) { delete r; }

ldis_status ldis_gradcheck(const char* options_json, char** report_json, int* all_passed) {
  if (!report_json || !all_passed) return fail(LDIS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    ldis::oracle::GradCheckOptions opts;
    if (options_json) {
      const json j = json::parse(options_json);
      opts.tolerance = j.value("tolerance", opts.tolerance);
      opts.trials = j.value("trials", opts.trials);
      opts.step = j.value("step", opts.step);
      opts.seed = j.value("seed", opts.seed);
    }
    const json report = ldis::oracle::to_json(ldis::oracle::gradcheck_suite(opts));
    *all_passed = report.at("all_passed").get<bool>() ? 1 : 0;
    *report_json = dup_string(report.dump(2));
  });
}

int ldis_run_command(const char* run_config_json) {
  if (!run_config_json) return static_cast<int>(ldis::ExitCode::usage);
  json rc;
  try {
    rc = json::parse(run_config_json);
  } catch (const json::exception& e) {
    std::cerr << "error: run configuration is not valid JSON: " << e.what() << "\n";
    return static_cast<int>(ldis::ExitCode::usage);
  }
  return static_cast<int>(ldis::run_command(rc, std::cout, std::cerr));
}

}  // extern "C"
