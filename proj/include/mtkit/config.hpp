#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "mtkit/backend.hpp"
#include "mtkit/http_backend.hpp"
#include "mtkit/metrics.hpp"
#include "mtkit/prompting.hpp"

namespace mtkit::config {

class ConfigKeyError : public std::runtime_error {
 public:
  ConfigKeyError(const std::string& key, const std::string& why)
      : std::runtime_error("config key '" + key + "': " + why), key(key) {}
  std::string key;
};

struct PipelineConfig {
  nlohmann::json raw = nlohmann::json::object();
  uint64_t seed = 0;
  size_t jobs = 1;
  std::string out_root = "out";

  nlohmann::json section(const std::string& name) const {
    return raw.value(name, nlohmann::json::object());
  }

  static PipelineConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigKeyError(path, "cannot open config file");
    PipelineConfig cfg;
    try {
      cfg.raw = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
      throw ConfigKeyError(path, std::string("invalid JSON: ") + e.what());
    }
    cfg.seed = cfg.raw.value("seed", 0);
    cfg.jobs = cfg.raw.value("jobs", 1);
    cfg.out_root = cfg.raw.value("out", "out");
    return cfg;
  }
};

// Backend selection: config section {"kind": "mock"|"http", ...}; env vars
// override the http fields (see HttpBackendConfig::from_env).
inline std::unique_ptr<backend::Backend> make_backend(const nlohmann::json& sec,
                                                      uint64_t seed) {
  const std::string kind = sec.value("kind", "mock");
  if (kind == "mock")
    return std::make_unique<backend::MockBackend>(sec.value("seed", seed));
  if (kind == "http") {
    auto cfg = backend::HttpBackendConfig::from_env();
    if (sec.contains("url")) cfg.base_url = sec.at("url").get<std::string>();
    if (sec.contains("max_in_flight"))
      cfg.max_in_flight = sec.at("max_in_flight").get<size_t>();
    if (sec.contains("max_attempts"))
      cfg.max_attempts = sec.at("max_attempts").get<size_t>();
    return std::make_unique<backend::HttpBackend>(cfg);
  }
  throw ConfigKeyError("backend.kind", "unknown kind '" + kind + "'");
}

inline metrics::MqmWeightTable mqm_weights_from(const nlohmann::json& sec) {
  metrics::MqmWeightTable w;
  w.non_translation = sec.value("non_translation", w.non_translation);
  w.major = sec.value("major", w.major);
  w.minor = sec.value("minor", w.minor);
  w.minor_fluency_punctuation =
      sec.value("minor_fluency_punctuation", w.minor_fluency_punctuation);
  w.validate();
  return w;
}

inline prompting::LangRegistry registry_from(const nlohmann::json& sec) {
  std::string path = sec.value("registry", "data/languages.csv");
  return prompting::load_registry_file(path);
}

}  // namespace mtkit::config
