#pragma once

#include <memory>
#include <string>
#include <vector>

#include "devsnet/devs/model.hpp"
#include "devsnet/devs/root.hpp"
#include "devsnet/manet/aodv.hpp"
#include "devsnet/manet/channel.hpp"

namespace devsnet::testing {

/// Routers plus a channel, without upper layers. Top-level inputs "send<i>"
/// feed router i and "pos" feeds the channel; top-level outputs "ctl",
/// "data", "deliver<i>", "drop" and "route" collect what the routers emit.
inline devs::CoupledSpec aodv_network(const std::vector<manet::NodeState>& nodes,
                                      manet::ChannelParams channel, manet::AodvParams params,
                                      std::uint64_t seed = 1) {
  devs::CoupledSpec net("net");
  net.add("channel", std::make_shared<manet::Channel>(nodes, channel, Rng::stream(seed, "channel")));
  net.add_output("ctl", std::string(manet::schema::packet));
  net.add_output("data", std::string(manet::schema::packet));
  net.add_output("drop", std::string(manet::schema::app_record));
  net.add_output("route", std::string(manet::schema::route));
  net.add_input("pos", std::string(manet::schema::position));
  net.couple_input("pos", "channel", "pos");
  net.couple_output("channel", "drop_loss", "drop");
  for (const auto& n : nodes) {
    const auto i = std::to_string(n.node_id);
    const std::string r = "r" + i;
    net.add(r, std::make_shared<manet::AodvRouter>(n.node_id, params));
    net.add_input("send" + i, std::string(manet::schema::app_record));
    net.add_input("ctl" + i, std::string(manet::schema::control));
    net.add_output("deliver" + i, std::string(manet::schema::app_record));
    net.couple_input("send" + i, r, "app_in");
    net.couple_input("ctl" + i, r, "control");
    net.couple("channel", manet::rx_port(n.node_id), r, "rx");
    net.couple(r, "tx_data", "channel", "tx");
    net.couple(r, "tx_ctl", "channel", "tx");
    net.couple_output(r, "tx_ctl", "ctl");
    net.couple_output(r, "tx_data", "data");
    net.couple_output(r, "deliver", "deliver" + i);
    net.couple_output(r, "route", "route");
    for (const char* d : {"drop_ttl", "drop_buffer", "drop_noroute", "drop_disabled"}) {
      net.couple_output(r, d, "drop");
    }
  }
  return net;
}

inline devs::EventMsg send_msg(manet::NodeId src, manet::NodeId dst, SimTime at,
                               std::uint32_t seq = 0, std::size_t len = 32) {
  manet::AppRecord rec{src, 9, dst, 9, seq, Bytes(len, static_cast<std::uint8_t>(seq))};
  return {"send" + std::to_string(src), std::string(manet::schema::app_record), manet::encode(rec),
          at};
}

inline std::vector<manet::NodeState> line_nodes(std::size_t n, double spacing) {
  std::vector<manet::NodeState> out;
  for (std::size_t i = 0; i < n; ++i) {
    manet::NodeState s;
    s.node_id = static_cast<manet::NodeId>(i);
    s.position = {spacing * static_cast<double>(i), 0};
    out.push_back(s);
  }
  return out;
}

inline std::vector<manet::NodeState> grid_nodes(std::size_t cols, std::size_t rows,
                                                double spacing) {
  std::vector<manet::NodeState> out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      manet::NodeState s;
      s.node_id = static_cast<manet::NodeId>(out.size());
      s.position = {spacing * static_cast<double>(c), spacing * static_cast<double>(r)};
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace devsnet::testing
