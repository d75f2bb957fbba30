#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "devsnet/core/bytes.hpp"
#include "devsnet/core/time.hpp"

namespace devsnet::devs {

enum class PortDirection { input, output };

inline std::string_view to_string(PortDirection d) {
  return d == PortDirection::input ? "input" : "output";
}

struct Port {
  std::string name;
  PortDirection direction = PortDirection::input;
  /// Payload schema tag; events crossing the port must carry the same tag.
  std::string schema;

  bool operator==(const Port&) const = default;
};

/// Timestamped, schema-tagged message on a named port.
struct EventMsg {
  std::string port;
  std::string schema;
  Bytes payload;
  SimTime time;

  std::uint64_t digest() const { return fnv1a64(payload); }
  bool operator==(const EventMsg&) const = default;
};

/// Declared ports of a model, unique by name.
class PortSet {
public:
  void add(Port p) {
    if (p.name.empty()) throw std::invalid_argument("port name must not be empty");
    if (index_.contains(p.name)) {
      throw std::invalid_argument("duplicate port '" + p.name + "'");
    }
    index_.emplace(p.name, ports_.size());
    ports_.push_back(std::move(p));
  }

  const Port* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &ports_[it->second];
  }
  const Port* find(std::string_view name, PortDirection dir) const {
    const Port* p = find(name);
    return (p != nullptr && p->direction == dir) ? p : nullptr;
  }

  const std::vector<Port>& all() const { return ports_; }

private:
  std::vector<Port> ports_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Classic DEVS atomic model.
///
/// The kernel calls output() immediately before internal_transition() and
/// never otherwise. external_transition() receives the time elapsed since the
/// last transition, which is at most time_advance() of the pre-state.
class Atomic {
public:
  virtual ~Atomic() = default;

  virtual std::unique_ptr<Atomic> clone() const = 0;

  virtual void internal_transition() = 0;
  virtual void external_transition(SimTime elapsed, std::span<const EventMsg> bag) = 0;
  virtual SimTime time_advance() const = 0;
  virtual std::vector<EventMsg> output() const = 0;

  const PortSet& ports() const { return ports_; }

protected:
  Atomic() = default;
  Atomic(const Atomic&) = default;
  Atomic& operator=(const Atomic&) = default;

  void add_input(std::string name, std::string schema) {
    ports_.add({std::move(name), PortDirection::input, std::move(schema)});
  }
  void add_output(std::string name, std::string schema) {
    ports_.add({std::move(name), PortDirection::output, std::move(schema)});
  }

  /// Builds an output message stamped with the port's declared schema.
  EventMsg emit(std::string_view port, Bytes payload) const {
    const Port* p = ports_.find(port, PortDirection::output);
    if (p == nullptr) {
      throw std::logic_error("emit on undeclared output port '" + std::string(port) + "'");
    }
    return EventMsg{p->name, p->schema, std::move(payload), SimTime::zero()};
  }

private:
  PortSet ports_;
};

/// CRTP helper supplying clone() through the derived copy constructor.
template <typename Derived>
class AtomicModel : public Atomic {
public:
  std::unique_ptr<Atomic> clone() const override {
    return std::make_unique<Derived>(static_cast<const Derived&>(*this));
  }
};

/// A coupling endpoint pair. An empty component name denotes the enclosing
/// coupled model itself (used by external input and external output couplings).
struct Coupling {
  std::string from;
  std::string from_port;
  std::string to;
  std::string to_port;

  auto operator<=>(const Coupling&) const = default;
};

class CoupledSpec;

using ComponentModel =
    std::variant<std::shared_ptr<const Atomic>, std::shared_ptr<const CoupledSpec>>;

struct Component {
  std::string name;
  ComponentModel model;

  bool is_atomic() const {
    return std::holds_alternative<std::shared_ptr<const Atomic>>(model);
  }
  const Atomic& atomic() const { return *std::get<std::shared_ptr<const Atomic>>(model); }
  const CoupledSpec& coupled() const {
    return *std::get<std::shared_ptr<const CoupledSpec>>(model);
  }
};

/// Hierarchical composition of models.
///
/// Atomic components are held as immutable prototypes; each simulator leaf
/// built from the spec owns a fresh clone, so a spec can be built any number
/// of times.
class CoupledSpec {
public:
  explicit CoupledSpec(std::string name) : name_(std::move(name)) {}

  CoupledSpec& add(std::string name, std::shared_ptr<const Atomic> model) {
    select_order_.push_back(name);
    components_.push_back({std::move(name), std::move(model)});
    return *this;
  }
  CoupledSpec& add(std::string name, CoupledSpec model) {
    select_order_.push_back(name);
    components_.push_back(
        {std::move(name), std::make_shared<const CoupledSpec>(std::move(model))});
    return *this;
  }
  template <typename T, typename... Args>
  CoupledSpec& emplace(std::string name, Args&&... args) {
    return add(std::move(name), std::make_shared<const T>(std::forward<Args>(args)...));
  }

  CoupledSpec& add_input(std::string name, std::string schema) {
    ports_.push_back({std::move(name), PortDirection::input, std::move(schema)});
    return *this;
  }
  CoupledSpec& add_output(std::string name, std::string schema) {
    ports_.push_back({std::move(name), PortDirection::output, std::move(schema)});
    return *this;
  }

  /// External input coupling: own input port -> component input port.
  CoupledSpec& couple_input(std::string own_port, std::string to, std::string to_port) {
    eic_.push_back({"", std::move(own_port), std::move(to), std::move(to_port)});
    return *this;
  }
  /// External output coupling: component output port -> own output port.
  CoupledSpec& couple_output(std::string from, std::string from_port, std::string own_port) {
    eoc_.push_back({std::move(from), std::move(from_port), "", std::move(own_port)});
    return *this;
  }
  /// Internal coupling between two components.
  CoupledSpec& couple(std::string from, std::string from_port, std::string to,
                      std::string to_port) {
    ic_.push_back({std::move(from), std::move(from_port), std::move(to), std::move(to_port)});
    return *this;
  }

  CoupledSpec& set_select_order(std::vector<std::string> order) {
    select_order_ = std::move(order);
    return *this;
  }

  // Raw coupling lists, used by flatten() and by tests that build malformed specs.
  std::vector<Coupling>& mutable_eic() { return eic_; }
  std::vector<Coupling>& mutable_eoc() { return eoc_; }
  std::vector<Coupling>& mutable_ic() { return ic_; }

  const std::string& name() const { return name_; }
  const std::vector<Component>& components() const { return components_; }
  const std::vector<Port>& ports() const { return ports_; }
  const std::vector<Coupling>& eic() const { return eic_; }
  const std::vector<Coupling>& eoc() const { return eoc_; }
  const std::vector<Coupling>& ic() const { return ic_; }
  const std::vector<std::string>& select_order() const { return select_order_; }

  const Component* find(std::string_view name) const {
    auto it = std::find_if(components_.begin(), components_.end(),
                           [&](const Component& c) { return c.name == name; });
    return it == components_.end() ? nullptr : &*it;
  }
  const Port* find_port(std::string_view name, PortDirection dir) const {
    auto it = std::find_if(ports_.begin(), ports_.end(), [&](const Port& p) {
      return p.name == name && p.direction == dir;
    });
    return it == ports_.end() ? nullptr : &*it;
  }

private:
  std::string name_;
  std::vector<Component> components_;
  std::vector<Port> ports_;
  std::vector<Coupling> eic_;
  std::vector<Coupling> eoc_;
  std::vector<Coupling> ic_;
  std::vector<std::string> select_order_;
};

}  // namespace devsnet::devs
