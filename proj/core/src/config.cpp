#include "wholescan/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "wholescan/error.hpp"

namespace wholescan {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const char* section, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(section) + " must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) {
      throw ConfigError(std::string("unknown key '") + key + "' in " + section);
    }
  }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void GateConfig::validate() const {
  if (!in_unit(confidence_min)) throw ConfigError("confidence_min must lie in [0, 1]");
  if (!in_unit(dsc_min)) throw ConfigError("dsc_min must lie in [0, 1]");
  if (!(dsc_binarize_at >= 0.0 && dsc_binarize_at < 1.0)) {
    throw ConfigError("dsc_binarize_at must lie in [0, 1)");
  }
  if (!(in_unit(head_ecc_min) && in_unit(head_ecc_max) && head_ecc_min <= head_ecc_max)) {
    throw ConfigError("head eccentricity range must be an ordered pair in [0, 1]");
  }
  if (!in_unit(abdomen_ecc_max)) throw ConfigError("abdomen_ecc_max must lie in [0, 1]");
}

void GeometryConfig::validate() const {
  if (!(kernel_sigma_px > 0.0)) throw ConfigError("kernel_sigma_px must be positive");
  if (!(intensity_floor > 0.0 && intensity_floor < 1.0)) {
    throw ConfigError("intensity_floor must lie in (0, 1)");
  }
  if (!(min_separation_px >= 0.0)) throw ConfigError("min_separation_px must be >= 0");
  if (!(peak_floor >= 0.0 && peak_floor < 1.0)) throw ConfigError("peak_floor must lie in [0, 1)");
}

void RunConfig::validate() const {
  gates.validate();
  estimator.validate();
  geometry.validate();
  try {
    ticks.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunConfig run_config_from_json(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  check_keys(j, "config", {"ga", "strict", "gates", "estimator", "geometry", "ticks"});

  RunConfig cfg;
  if (const auto it = j.find("ga"); it != j.end()) {
    if (it->is_number_integer()) {
      cfg.ga = GestationalAge::from_days(it->get<int>());
    } else if (it->is_string()) {
      cfg.ga = GestationalAge::parse(it->get<std::string>());
    } else {
      throw ConfigError("ga must be a string like \"20w3d\" or a day count");
    }
  }
  read_into(j, "strict", cfg.strict);

  if (const auto it = j.find("gates"); it != j.end()) {
    check_keys(*it, "gates",
               {"confidence_min", "dsc_min", "dsc_binarize_at", "head_eccentricity",
                "abdomen_eccentricity_max"});
    read_into(*it, "confidence_min", cfg.gates.confidence_min);
    read_into(*it, "dsc_min", cfg.gates.dsc_min);
    read_into(*it, "dsc_binarize_at", cfg.gates.dsc_binarize_at);
    read_into(*it, "abdomen_eccentricity_max", cfg.gates.abdomen_ecc_max);
    std::vector<double> head;
    read_into(*it, "head_eccentricity", head);
    if (!head.empty()) {
      if (head.size() != 2) throw ConfigError("head_eccentricity must be [min, max]");
      cfg.gates.head_ecc_min = head[0];
      cfg.gates.head_ecc_max = head[1];
    }
  }
  if (const auto it = j.find("estimator"); it != j.end()) {
    check_keys(*it, "estimator", {"p_t0", "w0", "w_mu0", "w_var0", "ci_multiplier"});
    read_into(*it, "p_t0", cfg.estimator.p_t0);
    read_into(*it, "w0", cfg.estimator.w0);
    read_into(*it, "w_mu0", cfg.estimator.w_mu0);
    read_into(*it, "w_var0", cfg.estimator.w_var0);
    read_into(*it, "ci_multiplier", cfg.estimator.ci_multiplier);
  }
  if (const auto it = j.find("geometry"); it != j.end()) {
    check_keys(*it, "geometry",
               {"kernel_sigma_px", "intensity_floor", "min_separation_px", "peak_floor"});
    read_into(*it, "kernel_sigma_px", cfg.geometry.kernel_sigma_px);
    read_into(*it, "intensity_floor", cfg.geometry.intensity_floor);
    read_into(*it, "min_separation_px", cfg.geometry.min_separation_px);
    read_into(*it, "peak_floor", cfg.geometry.peak_floor);
  }
  if (const auto it = j.find("ticks"); it != j.end()) {
    check_keys(*it, "ticks", {"major_mm", "minor_mm"});
    read_into(*it, "major_mm", cfg.ticks.major_mm);
    read_into(*it, "minor_mm", cfg.ticks.minor_mm);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  if (cfg.ga) j["ga"] = cfg.ga->to_string();
  j["strict"] = cfg.strict;
  j["gates"] = {{"confidence_min", cfg.gates.confidence_min},
                {"dsc_min", cfg.gates.dsc_min},
                {"dsc_binarize_at", cfg.gates.dsc_binarize_at},
                {"head_eccentricity", {cfg.gates.head_ecc_min, cfg.gates.head_ecc_max}},
                {"abdomen_eccentricity_max", cfg.gates.abdomen_ecc_max}};
  j["estimator"] = {{"p_t0", cfg.estimator.p_t0},
                    {"w0", cfg.estimator.w0},
                    {"w_mu0", cfg.estimator.w_mu0},
                    {"w_var0", cfg.estimator.w_var0},
                    {"ci_multiplier", cfg.estimator.ci_multiplier}};
  j["geometry"] = {{"kernel_sigma_px", cfg.geometry.kernel_sigma_px},
                   {"intensity_floor", cfg.geometry.intensity_floor},
                   {"min_separation_px", cfg.geometry.min_separation_px},
                   {"peak_floor", cfg.geometry.peak_floor}};
  j["ticks"] = {{"major_mm", cfg.ticks.major_mm}, {"minor_mm", cfg.ticks.minor_mm}};
  return j.dump(2);
}

}  // namespace wholescan
