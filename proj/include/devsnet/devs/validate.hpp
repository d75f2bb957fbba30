#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "devsnet/devs/model.hpp"

namespace devsnet::devs {

struct StructuralError {
  /// Path of the coupled model holding the offending element.
  std::string path;
  std::string message;

  std::string str() const { return path + ": " + message; }
};

namespace detail {

inline bool valid_name(std::string_view n) {
  return !n.empty() && std::none_of(n.begin(), n.end(), [](char c) {
           return c == ' ' || c == '\t' || c == '\n' || c == '\r';
         });
}

inline const Port* component_port(const Component& c, std::string_view port, PortDirection dir) {
  return c.is_atomic() ? c.atomic().ports().find(port, dir) : c.coupled().find_port(port, dir);
}

inline std::string endpoint_label(std::string_view comp, std::string_view port) {
  return comp.empty() ? "self." + std::string(port) : std::string(comp) + "." + std::string(port);
}

inline void validate_into(const CoupledSpec& model, const std::string& path,
                          std::vector<StructuralError>& errors) {
  auto err = [&](std::string msg) { errors.push_back({path, std::move(msg)}); };

  std::set<std::string> names;
  for (const auto& c : model.components()) {
    if (!valid_name(c.name)) err("invalid component name '" + c.name + "'");
    if (!names.insert(c.name).second) err("duplicate component name '" + c.name + "'");
  }
  std::set<std::string> own_port_names;
  for (const auto& p : model.ports()) {
    if (!valid_name(p.name)) err("invalid port name '" + p.name + "'");
    if (!own_port_names.insert(p.name).second) err("duplicate port name '" + p.name + "'");
  }

  {
    auto order = model.select_order();
    std::sort(order.begin(), order.end());
    std::vector<std::string> expected(names.begin(), names.end());
    if (order != expected || model.select_order().size() != model.components().size()) {
      err("select_order does not cover every component exactly once");
    }
  }

  // Resolves one endpoint; returns nullptr after reporting an error.
  auto resolve = [&](const std::string& comp, const std::string& port, PortDirection dir,
                     const Coupling& cpl) -> const Port* {
    const Port* p = nullptr;
    if (comp.empty()) {
      p = model.find_port(port, dir);
    } else {
      const Component* c = model.find(comp);
      if (c == nullptr) {
        err("coupling " + endpoint_label(cpl.from, cpl.from_port) + " -> " +
            endpoint_label(cpl.to, cpl.to_port) + " names missing component '" + comp + "'");
        return nullptr;
      }
      p = component_port(*c, port, dir);
    }
    if (p == nullptr) {
      err("coupling " + endpoint_label(cpl.from, cpl.from_port) + " -> " +
          endpoint_label(cpl.to, cpl.to_port) + " names missing " +
          std::string(to_string(dir)) + " port " + endpoint_label(comp, port));
    }
    return p;
  };

  auto check_schema = [&](const Coupling& cpl, const Port* a, const Port* b) {
    if (a != nullptr && b != nullptr && a->schema != b->schema) {
      err("schema mismatch between " + endpoint_label(cpl.from, cpl.from_port) + " (" +
          a->schema + ") and " + endpoint_label(cpl.to, cpl.to_port) + " (" + b->schema + ")");
    }
  };

  for (const auto& cpl : model.eic()) {
    if (!cpl.from.empty()) {
      err("external input coupling must originate at the model itself, found '" + cpl.from + "'");
      continue;
    }
    if (cpl.to.empty()) {
      err("direct feedthrough from self." + cpl.from_port + " to self." + cpl.to_port);
      continue;
    }
    check_schema(cpl, resolve("", cpl.from_port, PortDirection::input, cpl),
                 resolve(cpl.to, cpl.to_port, PortDirection::input, cpl));
  }
  for (const auto& cpl : model.eoc()) {
    if (!cpl.to.empty()) {
      err("external output coupling must end at the model itself, found '" + cpl.to + "'");
      continue;
    }
    if (cpl.from.empty()) {
      err("direct feedthrough from self." + cpl.from_port + " to self." + cpl.to_port);
      continue;
    }
    check_schema(cpl, resolve(cpl.from, cpl.from_port, PortDirection::output, cpl),
                 resolve("", cpl.to_port, PortDirection::output, cpl));
  }
  for (const auto& cpl : model.ic()) {
    if (cpl.from.empty() || cpl.to.empty()) {
      err("internal coupling " + endpoint_label(cpl.from, cpl.from_port) + " -> " +
          endpoint_label(cpl.to, cpl.to_port) + " must join two components");
      continue;
    }
    if (cpl.from == cpl.to) {
      err("internal coupling " + endpoint_label(cpl.from, cpl.from_port) + " -> " +
          endpoint_label(cpl.to, cpl.to_port) + " couples a component to itself");
      continue;
    }
    check_schema(cpl, resolve(cpl.from, cpl.from_port, PortDirection::output, cpl),
                 resolve(cpl.to, cpl.to_port, PortDirection::input, cpl));
  }

  for (const auto& c : model.components()) {
    if (!c.is_atomic()) validate_into(c.coupled(), path + "/" + c.name, errors);
  }
}

}  // namespace detail

/// Structural checks over the whole hierarchy; empty iff the model is well formed.
inline std::vector<StructuralError> validate_coupling(const CoupledSpec& model) {
  std::vector<StructuralError> errors;
  if (!detail::valid_name(model.name())) {
    errors.push_back({model.name(), "invalid model name"});
  }
  detail::validate_into(model, model.name(), errors);
  return errors;
}

/// Raised by build_root when validation fails.
class ModelError : public std::runtime_error {
public:
  explicit ModelError(std::vector<StructuralError> errors)
      : std::runtime_error(summarize(errors)), errors_(std::move(errors)) {}

  const std::vector<StructuralError>& errors() const { return errors_; }

private:
  static std::string summarize(const std::vector<StructuralError>& errors) {
    std::string s = "invalid model";
    for (const auto& e : errors) s += "\n  " + e.str();
    return s;
  }
  std::vector<StructuralError> errors_;
};

}  // namespace devsnet::devs
