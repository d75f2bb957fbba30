#pragma once

#include <set>
#include <string>
#include <vector>

#include "devsnet/devs/model.hpp"
#include "devsnet/devs/validate.hpp"

namespace devsnet::devs {

namespace detail {

struct FlatTarget {
  std::string component;  // empty for a root output port
  std::string port;
  auto operator<=>(const FlatTarget&) const = default;
};

struct Frame {
  const CoupledSpec* spec;
  std::string prefix;  // path of this spec's components relative to the root, with trailing '/'
  std::string name_in_parent;
};

inline void descend(const CoupledSpec& spec, const std::string& prefix, const std::string& comp,
                    const std::string& port, std::vector<FlatTarget>& out) {
  const Component* c = spec.find(comp);
  if (c == nullptr) return;
  if (c->is_atomic()) {
    out.push_back({prefix + comp, port});
    return;
  }
  const CoupledSpec& sub = c->coupled();
  for (const auto& e : sub.eic()) {
    if (e.from_port == port) descend(sub, prefix + comp + "/", e.to, e.to_port, out);
  }
}

inline void route_up(const std::vector<Frame>& chain, std::size_t level, const std::string& comp,
                     const std::string& port, std::vector<FlatTarget>& out) {
  const Frame& f = chain[level];
  for (const auto& c : f.spec->ic()) {
    if (c.from == comp && c.from_port == port) descend(*f.spec, f.prefix, c.to, c.to_port, out);
  }
  for (const auto& c : f.spec->eoc()) {
    if (c.from != comp || c.from_port != port) continue;
    if (level == 0) {
      out.push_back({"", c.to_port});
    } else {
      route_up(chain, level - 1, f.name_in_parent, c.to_port, out);
    }
  }
}

inline void collect_leaves(std::vector<Frame>& chain, CoupledSpec& flat,
                           std::vector<Coupling>& ic, std::vector<Coupling>& eoc,
                           std::set<Coupling>& seen) {
  const Frame f = chain.back();
  for (const auto& c : f.spec->components()) {
    if (!c.is_atomic()) {
      chain.push_back({&c.coupled(), f.prefix + c.name + "/", c.name});
      collect_leaves(chain, flat, ic, eoc, seen);
      chain.pop_back();
      continue;
    }
    const std::string leaf = f.prefix + c.name;
    flat.add(leaf, std::get<std::shared_ptr<const Atomic>>(c.model));
    for (const auto& p : c.atomic().ports().all()) {
      if (p.direction != PortDirection::output) continue;
      std::vector<FlatTarget> targets;
      route_up(chain, chain.size() - 1, c.name, p.name, targets);
      for (const auto& t : targets) {
        Coupling cpl{leaf, p.name, t.component, t.port};
        if (!seen.insert(cpl).second) continue;
        (t.component.empty() ? eoc : ic).push_back(std::move(cpl));
      }
    }
  }
}

inline void select_order_dfs(const CoupledSpec& spec, const std::string& prefix,
                             std::vector<std::string>& out) {
  for (const auto& name : spec.select_order()) {
    const Component* c = spec.find(name);
    if (c == nullptr) continue;
    if (c->is_atomic()) out.push_back(prefix + name);
    else select_order_dfs(c->coupled(), prefix + name + "/", out);
  }
}

}  // namespace detail

/// Closure under coupling: an equivalent single-level model whose components
/// are the atomics of the hierarchy, named by their '/'-joined relative path.
/// Couplings are composed through every intermediate coupled model and the
/// select order is the depth-first order of the original.
inline CoupledSpec flatten(const CoupledSpec& model) {
  if (auto errors = validate_coupling(model); !errors.empty()) {
    throw ModelError(std::move(errors));
  }
  CoupledSpec flat(model.name());
  for (const auto& p : model.ports()) {
    if (p.direction == PortDirection::input) flat.add_input(p.name, p.schema);
    else flat.add_output(p.name, p.schema);
  }

  std::vector<detail::Frame> chain{{&model, "", ""}};
  std::vector<Coupling> ic;
  std::vector<Coupling> eoc;
  std::set<Coupling> seen;
  detail::collect_leaves(chain, flat, ic, eoc, seen);

  for (const auto& e : model.eic()) {
    std::vector<detail::FlatTarget> targets;
    detail::descend(model, "", e.to, e.to_port, targets);
    for (const auto& t : targets) {
      Coupling cpl{"", e.from_port, t.component, t.port};
      if (seen.insert(cpl).second) flat.couple_input(e.from_port, t.component, t.port);
    }
  }
  for (auto& c : ic) flat.couple(c.from, c.from_port, c.to, c.to_port);
  for (auto& c : eoc) flat.couple_output(c.from, c.from_port, c.to_port);

  std::vector<std::string> order;
  detail::select_order_dfs(model, "", order);
  flat.set_select_order(std::move(order));
  return flat;
}

}  // namespace devsnet::devs
