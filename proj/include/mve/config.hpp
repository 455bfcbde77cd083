#pragma once

#include <cstdint>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mve/error.hpp"
#include "mve/graph.hpp"

namespace mve {

enum class ViewSampling { uniform, proportional };

// All hyperparameters of a training run. Defaults are the reference settings
// (d=100, N=5, rho0=0.025, eta=0.05, T=10^7).
struct TrainConfig {
  std::size_t dim = 100;
  std::size_t negatives = 5;
  std::uint64_t samples_per_iter = 10'000'000;
  std::size_t iterations = 10;
  double eta = 0.05;
  double lr = 0.025;
  std::uint64_t seed = 1;
  bool no_attention = false;
  bool no_collaboration = false;
  std::size_t workers = 1;
  ViewSampling view_sampling = ViewSampling::uniform;

  std::size_t attention_epochs = 200;
  double attention_step = 0.1;
  double attention_tolerance = 1e-6;
  double classifier_step = 0.01;

  std::vector<ViewSource> views;
  std::filesystem::path labels;
  std::filesystem::path pairs;
  std::filesystem::path out;

  void validate() const {
    if (dim < 1) throw InputError("config: dim must be >= 1");
    if (negatives < 1) throw InputError("config: negatives must be >= 1");
    if (!(eta >= 0.0)) throw InputError("config: eta must be >= 0");
    if (!(lr > 0.0)) throw InputError("config: lr must be > 0");
    if (workers < 1) throw InputError("config: workers must be >= 1");
    if (!(attention_step > 0.0)) throw InputError("config: attention_step must be > 0");
    if (!(classifier_step > 0.0)) throw InputError("config: classifier_step must be > 0");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InputError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else {
      if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
      // Accept scientific notation for counts, e.g. samples_per_iter=1e6.
      const double d = std::stod(v, &used);
      if (d != static_cast<double>(static_cast<std::uint64_t>(d))) throw std::invalid_argument("fraction");
      out = static_cast<T>(d);
    }
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw InputError("config: bad value '" + v + "' for '" + key + "'");
  }
}

}  // namespace detail

// "NAME=PATH[:directed|:undirected]"
inline ViewSource parse_view_source(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size())
    throw InputError("view spec '" + std::string(text) + "' must be NAME=PATH[:directed]");
  ViewSource src;
  src.name = std::string(text.substr(0, eq));
  std::string path(text.substr(eq + 1));
  for (const auto* suffix : {":directed", ":undirected"}) {
    const std::string_view sfx(suffix);
    if (path.size() > sfx.size() && path.compare(path.size() - sfx.size(), sfx.size(), sfx) == 0) {
      src.directedness = sfx == ":directed" ? Directedness::directed : Directedness::undirected;
      path.resize(path.size() - sfx.size());
      break;
    }
  }
  src.path = path;
  return src;
}

// Applies one key=value setting. Unknown keys are rejected.
inline void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "d" || key == "dim") cfg.dim = parse_number<std::size_t>(key, value);
  else if (key == "negatives") cfg.negatives = parse_number<std::size_t>(key, value);
  else if (key == "samples_per_iter" || key == "samples") cfg.samples_per_iter = parse_number<std::uint64_t>(key, value);
  else if (key == "iterations") cfg.iterations = parse_number<std::size_t>(key, value);
  else if (key == "eta") cfg.eta = parse_number<double>(key, value);
  else if (key == "lr") cfg.lr = parse_number<double>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "workers") cfg.workers = parse_number<std::size_t>(key, value);
  else if (key == "no_attention") cfg.no_attention = parse_bool(key, value);
  else if (key == "no_collab" || key == "no_collaboration") cfg.no_collaboration = parse_bool(key, value);
  else if (key == "attention_epochs") cfg.attention_epochs = parse_number<std::size_t>(key, value);
  else if (key == "attention_step") cfg.attention_step = parse_number<double>(key, value);
  else if (key == "classifier_step") cfg.classifier_step = parse_number<double>(key, value);
  else if (key == "attention_tolerance") cfg.attention_tolerance = parse_number<double>(key, value);
  else if (key == "view_sampling") {
    if (value == "uniform") cfg.view_sampling = ViewSampling::uniform;
    else if (value == "proportional") cfg.view_sampling = ViewSampling::proportional;
    else throw InputError("config: view_sampling must be uniform or proportional");
  } else if (key == "view") cfg.views.push_back(parse_view_source(value));
  else if (key == "labels") cfg.labels = value;
  else if (key == "pairs") cfg.pairs = value;
  else if (key == "out") cfg.out = value;
  else throw InputError("config: unknown key '" + key + "'");
}

// Flat key=value text; '#' starts a comment line. Relative view/label paths
// resolve against base_dir.
inline TrainConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {},
                                TrainConfig cfg = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw InputError("config: line " + std::to_string(line_no) + " is not key=value");
    const auto key = detail::trim(std::string_view(text).substr(0, eq));
    const auto value = detail::trim(std::string_view(text).substr(eq + 1));
    apply_setting(cfg, key, value);
    if (!base_dir.empty()) {
      auto rebase = [&](std::filesystem::path& p) {
        if (!p.empty() && p.is_relative()) p = base_dir / p;
      };
      if (key == "view") rebase(cfg.views.back().path);
      else if (key == "labels") rebase(cfg.labels);
      else if (key == "pairs") rebase(cfg.pairs);
    }
  }
  return cfg;
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig defaults = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path(), std::move(defaults));
}

}  // namespace mve
