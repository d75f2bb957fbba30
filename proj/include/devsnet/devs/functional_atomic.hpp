#pragma once

#include <functional>
#include <span>
#include <vector>

#include "devsnet/devs/model.hpp"

namespace devsnet::devs {

/// Atomic model assembled from plain functions over a value-typed state.
template <typename State>
struct AtomicSpec {
  State state{};
  std::function<State(const State&)> delta_int;
  std::function<State(const State&, SimTime, std::span<const EventMsg>)> delta_ext;
  std::function<SimTime(const State&)> time_advance;
  std::function<std::vector<EventMsg>(const State&)> output_fn;
  std::vector<Port> ports;
};

template <typename State>
class FunctionalAtomic : public AtomicModel<FunctionalAtomic<State>> {
public:
  explicit FunctionalAtomic(AtomicSpec<State> spec) : spec_(std::move(spec)) {
    for (const auto& p : spec_.ports) {
      if (p.direction == PortDirection::input) this->add_input(p.name, p.schema);
      else this->add_output(p.name, p.schema);
    }
  }

  void internal_transition() override { spec_.state = spec_.delta_int(spec_.state); }
  void external_transition(SimTime elapsed, std::span<const EventMsg> bag) override {
    spec_.state = spec_.delta_ext(spec_.state, elapsed, bag);
  }
  SimTime time_advance() const override { return spec_.time_advance(spec_.state); }
  std::vector<EventMsg> output() const override { return spec_.output_fn(spec_.state); }

  const State& state() const { return spec_.state; }

private:
  AtomicSpec<State> spec_;
};

template <typename State>
std::shared_ptr<const Atomic> make_atomic(AtomicSpec<State> spec) {
  return std::make_shared<const FunctionalAtomic<State>>(std::move(spec));
}

}  // namespace devsnet::devs
