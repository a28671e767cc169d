#pragma once

#include "swjd/generator.hpp"
#include "swjd/model.hpp"

#include <functional>
#include <optional>
#include <string>

namespace swjd {

/// A model resolved from a built-in name or a JSON config file.
struct LoadedModel {
  ModelSpec spec;
  /// Built-in name or config path, as given.
  std::string source;
  /// The config after defaults were applied, as compact JSON.
  std::string resolved_json;
  /// Truncation tolerance requested by the config; integrator default otherwise.
  std::optional<double> regime_rel_tol;
};

/// Built-in names go through builtin_model(); anything else is read as a config file.
LoadedModel load_model(const std::string& name_or_path);
/// Parses a model config held in memory. `origin` names it in error messages.
LoadedModel parse_model_config(const std::string& json_text, const std::string& origin = "<config>");

/// f(x, k) from an expression in x1..xd (or x when d = 1) and k. Derivatives by central differences.
TestFunction expression_function(const std::string& text, int dim, std::optional<double> sup_norm = {});
/// g(r) from an expression in r.
std::function<double(double)> expression_of_r(const std::string& text);

}  // namespace swjd
