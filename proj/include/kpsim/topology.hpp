#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kpsim/common.hpp"

namespace kpsim {

enum class DeviceKind : std::uint8_t { Gpu, Cpu, Nic, Ssd };
enum class LinkType : std::uint8_t { NvLink, Pcie, Qpi };

const char* to_string(DeviceKind k);
const char* to_string(LinkType t);

struct DeviceId {
  DeviceKind kind = DeviceKind::Gpu;
  std::uint32_t index = 0;

  auto operator<=>(const DeviceId&) const = default;
};

std::string to_string(const DeviceId& d);
// Parses "gpu0", "cpu12", ... Returns nullopt on malformed tokens.
std::optional<DeviceId> parse_device(const std::string& token);

struct LinkSpec {
  DeviceId a;
  DeviceId b;
  LinkType type = LinkType::Pcie;
  double bandwidth = 0.0;  // bytes per second
};

class TopologyError : public Error {
 public:
  explicit TopologyError(const std::string& what) : Error(what) {}
};

struct Diagnostic {
  int line = 0;  // 0 when not tied to a document line
  std::string message;
};

// Immutable after construction; safe to share across concurrent readers.
class TopologyGraph {
 public:
  TopologyGraph() = default;
  TopologyGraph(std::vector<DeviceId> devices, std::vector<LinkSpec> links,
                std::map<std::uint32_t, std::uint32_t> gpu_socket);

  const std::vector<DeviceId>& devices() const { return devices_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  bool has_device(const DeviceId& d) const;
  // Gpu device indices, ascending.
  const std::vector<std::uint32_t>& accelerators() const { return gpus_; }
  // Socket cpu index for a gpu, if declared.
  std::optional<std::uint32_t> socket_cpu(std::uint32_t gpu_index) const;

  // Best (max) bandwidth among parallel links of `type` between a and b.
  std::optional<double> link_bandwidth(const DeviceId& a, const DeviceId& b,
                                       LinkType type) const;
  // Neighbor gpu indices connected to `gpu` by at least one NvLink.
  std::vector<std::uint32_t> nvlink_neighbors(std::uint32_t gpu_index) const;

 private:
  std::vector<DeviceId> devices_;
  std::vector<LinkSpec> links_;
  std::map<std::uint32_t, std::uint32_t> gpu_socket_;
  std::vector<std::uint32_t> gpus_;
  // (a, b, type) -> max bandwidth; both orientations stored
  std::map<std::tuple<DeviceId, DeviceId, LinkType>, double> best_bw_;
};

enum class RouteMode : std::uint8_t { Direct, TwoPhase, HostRouted };
const char* to_string(RouteMode m);

struct Route {
  std::vector<DeviceId> hops;            // length >= 1; [src] for self routes
  std::vector<double> link_bandwidths;   // size hops.size() - 1
  RouteMode mode = RouteMode::Direct;    // self routes are Direct with no links
  double bottleneck_bandwidth = std::numeric_limits<double>::infinity();
};

struct CommPlan {
  // ordered (src gpu index, dst gpu index) -> route; includes (a, a)
  std::map<std::pair<std::uint32_t, std::uint32_t>, Route> routes;

  const Route& route(std::uint32_t src, std::uint32_t dst) const;
};

enum class TimingModel : std::uint8_t { StoreAndForward, Pipelined };

// Parses the line-oriented topology document. Collects every problem before
// failing; diagnostics carry 1-based line numbers.
//   device <gpu|cpu|nic|ssd> <index>
//   socket <cpu-index> gpus <gpu-index>...
//   link <devA> <devB> <nvlink|pcie|qpi> <bandwidth-bytes-per-sec>
TopologyGraph build_topology(const std::string& document);
TopologyGraph load_topology(const std::string& path);
// Non-throwing variant used by `validate`.
std::vector<Diagnostic> lint_topology(const std::string& document);

// NvLink-first planner: Direct if an NvLink connects src and dst, else
// TwoPhase through the forwarder gpu maximizing min(bw(src,f), bw(f,dst))
// (ties to the lowest forwarder index), else the host-routed fallback.
Route plan_route(const TopologyGraph& g, const DeviceId& src,
                 const DeviceId& dst);
// Host-routed baseline: src gpu -> socket cpu -> (qpi path) -> dst gpu,
// ignoring NvLink entirely.
Route naive_route(const TopologyGraph& g, const DeviceId& src,
                  const DeviceId& dst);
CommPlan plan_all_pairs(const TopologyGraph& g);

// Store-and-forward: sum over links of bytes/bandwidth. Pipelined:
// bytes/bottleneck. Zero bytes or zero links -> 0.
double transfer_time(const Route& r, std::uint64_t bytes,
                     TimingModel model = TimingModel::StoreAndForward);

// The 8-gpu example node shipped with the repo (same document as
// data/gpu_node.topo): two sockets of four gpus, double-bridge NvLink inside
// each quad on (0,2)/(1,3)-style pairs, one cross-socket NvLink per gpu.
const std::string& example_topology_document();

}  // namespace kpsim
