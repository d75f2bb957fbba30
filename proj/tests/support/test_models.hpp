#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "devsnet/devs/model.hpp"

namespace devsnet::testing {

using devs::AtomicModel;
using devs::EventMsg;

/// Emits "tick" every period.
class Generator : public AtomicModel<Generator> {
public:
  explicit Generator(SimTime period) : period_(period) { add_output("out", "text"); }

  void internal_transition() override { ++emitted_; }
  void external_transition(SimTime, std::span<const EventMsg>) override {}
  SimTime time_advance() const override { return period_; }
  std::vector<EventMsg> output() const override { return {emit("out", to_bytes("tick"))}; }

  std::uint64_t emitted() const { return emitted_; }

private:
  SimTime period_;
  std::uint64_t emitted_ = 0;
};

/// Passive; counts received messages and remembers the elapsed times seen.
class Counter : public AtomicModel<Counter> {
public:
  Counter() { add_input("in", "text"); }

  void internal_transition() override {}
  void external_transition(SimTime elapsed, std::span<const EventMsg> bag) override {
    count_ += bag.size();
    elapsed_.push_back(elapsed);
    for (const auto& m : bag) last_payload_ = m.payload;
  }
  SimTime time_advance() const override { return kInfinity; }
  std::vector<EventMsg> output() const override { return {}; }

  std::uint64_t count() const { return count_; }
  const std::vector<SimTime>& elapsed() const { return elapsed_; }
  const Bytes& last_payload() const { return last_payload_; }

private:
  std::uint64_t count_ = 0;
  std::vector<SimTime> elapsed_;
  Bytes last_payload_;
};

/// Holds a token for `hold`, then passes it on; passive while not holding.
class PingPong : public AtomicModel<PingPong> {
public:
  PingPong(bool has_token, SimTime hold) : holding_(has_token), hold_(hold) {
    add_input("in", "token");
    add_output("out", "token");
  }

  void internal_transition() override {
    holding_ = false;
    ++sent_;
  }
  void external_transition(SimTime, std::span<const EventMsg>) override { holding_ = true; }
  SimTime time_advance() const override { return holding_ ? hold_ : kInfinity; }
  std::vector<EventMsg> output() const override {
    return {emit("out", to_bytes("token" + std::to_string(sent_)))};
  }

  std::uint64_t sent() const { return sent_; }

private:
  bool holding_;
  SimTime hold_;
  std::uint64_t sent_ = 0;
};

/// Emits its own name once after `delay`, then stays passive.
class OneShot : public AtomicModel<OneShot> {
public:
  OneShot(std::string tag, SimTime delay) : tag_(std::move(tag)), delay_(delay) {
    add_input("in", "text");
    add_output("out", "text");
  }
  void internal_transition() override { fired_ = true; }
  void external_transition(SimTime, std::span<const EventMsg> bag) override {
    received_ += bag.size();
  }
  SimTime time_advance() const override { return fired_ ? kInfinity : delay_; }
  std::vector<EventMsg> output() const override { return {emit("out", to_bytes(tag_))}; }

  bool fired() const { return fired_; }
  std::uint64_t received() const { return received_; }

private:
  std::string tag_;
  SimTime delay_;
  bool fired_ = false;
  std::uint64_t received_ = 0;
};

}  // namespace devsnet::testing
