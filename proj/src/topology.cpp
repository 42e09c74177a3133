#include "kpsim/topology.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace kpsim {

const char* to_string(DeviceKind k) {
  switch (k) {
    case DeviceKind::Gpu: return "gpu";
    case DeviceKind::Cpu: return "cpu";
    case DeviceKind::Nic: return "nic";
    case DeviceKind::Ssd: return "ssd";
  }
  return "?";
}

const char* to_string(LinkType t) {
  switch (t) {
    case LinkType::NvLink: return "nvlink";
    case LinkType::Pcie: return "pcie";
    case LinkType::Qpi: return "qpi";
  }
  return "?";
}

const char* to_string(RouteMode m) {
  switch (m) {
    case RouteMode::Direct: return "direct";
    case RouteMode::TwoPhase: return "two_phase";
    case RouteMode::HostRouted: return "host_routed";
  }
  return "?";
}

std::string to_string(const DeviceId& d) {
  return std::string(to_string(d.kind)) + std::to_string(d.index);
}

std::optional<DeviceId> parse_device(const std::string& token) {
  static const std::pair<const char*, DeviceKind> kinds[] = {
      {"gpu", DeviceKind::Gpu},
      {"cpu", DeviceKind::Cpu},
      {"nic", DeviceKind::Nic},
      {"ssd", DeviceKind::Ssd},
  };
  for (const auto& [prefix, kind] : kinds) {
    const std::size_t n = std::string(prefix).size();
    if (token.rfind(prefix, 0) == 0 && token.size() > n) {
      const std::string digits = token.substr(n);
      if (!std::all_of(digits.begin(), digits.end(),
                       [](unsigned char c) { return std::isdigit(c); }))
        return std::nullopt;
      return DeviceId{kind, static_cast<std::uint32_t>(std::stoul(digits))};
    }
  }
  return std::nullopt;
}

static std::optional<DeviceKind> parse_kind(const std::string& s) {
  if (s == "gpu") return DeviceKind::Gpu;
  if (s == "cpu") return DeviceKind::Cpu;
  if (s == "nic") return DeviceKind::Nic;
  if (s == "ssd") return DeviceKind::Ssd;
  return std::nullopt;
}

static std::optional<LinkType> parse_link_type(const std::string& s) {
  if (s == "nvlink") return LinkType::NvLink;
  if (s == "pcie") return LinkType::Pcie;
  if (s == "qpi") return LinkType::Qpi;
  return std::nullopt;
}

TopologyGraph::TopologyGraph(std::vector<DeviceId> devices,
                             std::vector<LinkSpec> links,
                             std::map<std::uint32_t, std::uint32_t> gpu_socket)
    : devices_(std::move(devices)),
      links_(std::move(links)),
      gpu_socket_(std::move(gpu_socket)) {
  std::sort(devices_.begin(), devices_.end());
  for (const auto& d : devices_)
    if (d.kind == DeviceKind::Gpu) gpus_.push_back(d.index);
  for (const auto& l : links_) {
    for (auto key : {std::make_tuple(l.a, l.b, l.type),
                     std::make_tuple(l.b, l.a, l.type)}) {
      auto [it, inserted] = best_bw_.emplace(key, l.bandwidth);
      if (!inserted) it->second = std::max(it->second, l.bandwidth);
    }
  }
}

bool TopologyGraph::has_device(const DeviceId& d) const {
  return std::binary_search(devices_.begin(), devices_.end(), d);
}

std::optional<std::uint32_t> TopologyGraph::socket_cpu(
    std::uint32_t gpu_index) const {
  auto it = gpu_socket_.find(gpu_index);
  if (it == gpu_socket_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> TopologyGraph::link_bandwidth(const DeviceId& a,
                                                    const DeviceId& b,
                                                    LinkType type) const {
  auto it = best_bw_.find(std::make_tuple(a, b, type));
  if (it == best_bw_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint32_t> TopologyGraph::nvlink_neighbors(
    std::uint32_t gpu_index) const {
  std::set<std::uint32_t> out;
  const DeviceId me{DeviceKind::Gpu, gpu_index};
  for (const auto& l : links_) {
    if (l.type != LinkType::NvLink) continue;
    if (l.a == me && l.b.kind == DeviceKind::Gpu) out.insert(l.b.index);
    if (l.b == me && l.a.kind == DeviceKind::Gpu) out.insert(l.a.index);
  }
  return {out.begin(), out.end()};
}

namespace {

struct ParseState {
  std::vector<DeviceId> devices;
  std::vector<LinkSpec> links;
  std::map<std::uint32_t, std::uint32_t> gpu_socket;
  std::vector<Diagnostic> diags;
};

void parse_document(const std::string& document, ParseState& st) {
  std::istringstream in(document);
  std::string raw;
  int lineno = 0;
  std::set<DeviceId> seen;
  auto fail = [&](int line, std::string msg) {
    st.diags.push_back({line, std::move(msg)});
  };

  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::string word;
    if (!(ls >> word)) continue;

    if (word == "device") {
      std::string kind_s;
      long long idx = -1;
      if (!(ls >> kind_s >> idx) || idx < 0) {
        fail(lineno, "malformed device line");
        continue;
      }
      auto kind = parse_kind(kind_s);
      if (!kind) {
        fail(lineno, "unknown device kind '" + kind_s + "'");
        continue;
      }
      DeviceId d{*kind, static_cast<std::uint32_t>(idx)};
      if (!seen.insert(d).second) {
        fail(lineno, "duplicate device " + to_string(d));
        continue;
      }
      st.devices.push_back(d);
    } else if (word == "socket") {
      long long cpu = -1;
      std::string gpus_word;
      if (!(ls >> cpu >> gpus_word) || gpus_word != "gpus" || cpu < 0) {
        fail(lineno, "malformed socket line (expected: socket <cpu> gpus <i>...)");
        continue;
      }
      long long g;
      while (ls >> g) {
        if (g < 0) {
          fail(lineno, "negative gpu index in socket line");
          break;
        }
        auto [it, inserted] = st.gpu_socket.emplace(
            static_cast<std::uint32_t>(g), static_cast<std::uint32_t>(cpu));
        if (!inserted)
          fail(lineno, "gpu" + std::to_string(g) + " assigned to two sockets");
      }
    } else if (word == "link") {
      std::string a_s, b_s, type_s;
      double bw = 0.0;
      if (!(ls >> a_s >> b_s >> type_s >> bw)) {
        fail(lineno, "malformed link line");
        continue;
      }
      auto a = parse_device(a_s), b = parse_device(b_s);
      auto type = parse_link_type(type_s);
      if (!a || !b) {
        fail(lineno, "bad device token in link line");
        continue;
      }
      if (!type) {
        fail(lineno, "unknown link type '" + type_s + "'");
        continue;
      }
      if (*a == *b) {
        fail(lineno, "self-loop link on " + to_string(*a));
        continue;
      }
      if (!(bw > 0.0)) {
        fail(lineno, "non-positive bandwidth");
        continue;
      }
      st.links.push_back({*a, *b, *type, bw});
    } else {
      fail(lineno, "unknown directive '" + word + "'");
    }
  }

  // referential checks
  for (const auto& l : st.links) {
    for (const auto& end : {l.a, l.b})
      if (!seen.count(end))
        st.diags.push_back({0, "link references undeclared device " +
                                   to_string(end)});
  }
  for (const auto& [g, c] : st.gpu_socket) {
    if (!seen.count({DeviceKind::Gpu, g}))
      st.diags.push_back({0, "socket references undeclared gpu" +
                                 std::to_string(g)});
    if (!seen.count({DeviceKind::Cpu, c}))
      st.diags.push_back({0, "socket references undeclared cpu" +
                                 std::to_string(c)});
  }
}

// Union-find style reachability over an arbitrary device subset.
bool connected(const std::vector<DeviceId>& members,
               const std::vector<LinkSpec>& links) {
  if (members.size() <= 1) return true;
  std::map<DeviceId, DeviceId> parent;
  for (const auto& d : members) parent[d] = d;
  std::function<DeviceId(DeviceId)> find = [&](DeviceId d) {
    while (parent[d] != d) d = parent[d] = parent[parent[d]];
    return d;
  };
  for (const auto& l : links) {
    if (parent.count(l.a) && parent.count(l.b)) parent[find(l.a)] = find(l.b);
  }
  const DeviceId root = find(members.front());
  return std::all_of(members.begin(), members.end(),
                     [&](const DeviceId& d) { return find(d) == root; });
}

void check_connectivity(const ParseState& st, std::vector<Diagnostic>& diags) {
  // every gpu reachable from every other gpu, through any device
  std::vector<DeviceId> gpus;
  for (const auto& d : st.devices)
    if (d.kind == DeviceKind::Gpu) gpus.push_back(d);
  if (gpus.size() > 1) {
    // gpu reachability may pass through any device
    std::map<DeviceId, std::vector<DeviceId>> adj;
    for (const auto& l : st.links) {
      adj[l.a].push_back(l.b);
      adj[l.b].push_back(l.a);
    }
    std::set<DeviceId> visited;
    std::deque<DeviceId> q{gpus.front()};
    visited.insert(gpus.front());
    while (!q.empty()) {
      DeviceId d = q.front();
      q.pop_front();
      for (const auto& n : adj[d])
        if (visited.insert(n).second) q.push_back(n);
    }
    for (const auto& g : gpus)
      if (!visited.count(g))
        diags.push_back({0, to_string(g) + " unreachable from " +
                                to_string(gpus.front())});
  }
  // per-socket connectivity: cpu plus its gpus
  std::map<std::uint32_t, std::vector<DeviceId>> sockets;
  for (const auto& [g, c] : st.gpu_socket)
    sockets[c].push_back({DeviceKind::Gpu, g});
  for (auto& [c, members] : sockets) {
    members.push_back({DeviceKind::Cpu, c});
    if (!connected(members, st.links))
      diags.push_back({0, "socket cpu" + std::to_string(c) +
                              " devices are not connected"});
  }
}

}  // namespace

std::vector<Diagnostic> lint_topology(const std::string& document) {
  ParseState st;
  parse_document(document, st);
  if (st.diags.empty()) check_connectivity(st, st.diags);
  return st.diags;
}

TopologyGraph build_topology(const std::string& document) {
  ParseState st;
  parse_document(document, st);
  if (st.diags.empty()) check_connectivity(st, st.diags);
  if (!st.diags.empty()) {
    std::string msg = "topology document invalid:";
    for (const auto& d : st.diags) {
      msg += "\n  ";
      if (d.line > 0) msg += "line " + std::to_string(d.line) + ": ";
      msg += d.message;
    }
    throw TopologyError(msg);
  }
  return TopologyGraph(std::move(st.devices), std::move(st.links),
                       std::move(st.gpu_socket));
}

TopologyGraph load_topology(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw TopologyError("cannot open topology file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return build_topology(ss.str());
}

namespace {

Route self_route(const DeviceId& d) {
  Route r;
  r.hops = {d};
  r.mode = RouteMode::Direct;
  r.bottleneck_bandwidth = std::numeric_limits<double>::infinity();
  return r;
}

void require_gpu(const TopologyGraph& g, const DeviceId& d) {
  if (d.kind != DeviceKind::Gpu)
    throw TopologyError(to_string(d) + " is not an accelerator");
  if (!g.has_device(d))
    throw TopologyError(to_string(d) + " not present in topology");
}

Route finalize(std::vector<DeviceId> hops, std::vector<double> bws,
               RouteMode mode) {
  Route r;
  r.hops = std::move(hops);
  r.link_bandwidths = std::move(bws);
  r.mode = mode;
  r.bottleneck_bandwidth = std::numeric_limits<double>::infinity();
  for (double b : r.link_bandwidths)
    r.bottleneck_bandwidth = std::min(r.bottleneck_bandwidth, b);
  return r;
}

// Shortest cpu-to-cpu path over qpi links (bfs, ties by device order).
std::optional<std::vector<std::uint32_t>> qpi_path(const TopologyGraph& g,
                                                   std::uint32_t from,
                                                   std::uint32_t to) {
  if (from == to) return std::vector<std::uint32_t>{from};
  std::map<std::uint32_t, std::uint32_t> prev;
  std::set<std::uint32_t> visited{from};
  std::deque<std::uint32_t> q{from};
  while (!q.empty()) {
    std::uint32_t c = q.front();
    q.pop_front();
    std::set<std::uint32_t> nexts;
    for (const auto& l : g.links()) {
      if (l.type != LinkType::Qpi) continue;
      if (l.a == DeviceId{DeviceKind::Cpu, c} && l.b.kind == DeviceKind::Cpu)
        nexts.insert(l.b.index);
      if (l.b == DeviceId{DeviceKind::Cpu, c} && l.a.kind == DeviceKind::Cpu)
        nexts.insert(l.a.index);
    }
    for (std::uint32_t n : nexts) {
      if (!visited.insert(n).second) continue;
      prev[n] = c;
      if (n == to) {
        std::vector<std::uint32_t> path{to};
        while (path.back() != from) path.push_back(prev[path.back()]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      q.push_back(n);
    }
  }
  return std::nullopt;
}

}  // namespace

Route naive_route(const TopologyGraph& g, const DeviceId& src,
                  const DeviceId& dst) {
  require_gpu(g, src);
  require_gpu(g, dst);
  if (src == dst) return self_route(src);

  auto cpu_a = g.socket_cpu(src.index);
  auto cpu_b = g.socket_cpu(dst.index);
  if (!cpu_a || !cpu_b)
    throw TopologyError("host route needs socket declarations for " +
                        to_string(src) + " and " + to_string(dst));
  auto up = g.link_bandwidth(src, {DeviceKind::Cpu, *cpu_a}, LinkType::Pcie);
  auto down = g.link_bandwidth({DeviceKind::Cpu, *cpu_b}, dst, LinkType::Pcie);
  if (!up || !down)
    throw TopologyError("missing pcie link between gpu and socket cpu for " +
                        to_string(src) + "->" + to_string(dst));

  std::vector<DeviceId> hops{src};
  std::vector<double> bws{*up};
  auto cpus = qpi_path(g, *cpu_a, *cpu_b);
  if (!cpus)
    throw TopologyError("no qpi path between cpu" + std::to_string(*cpu_a) +
                        " and cpu" + std::to_string(*cpu_b));
  for (std::size_t i = 0; i < cpus->size(); ++i) {
    hops.push_back({DeviceKind::Cpu, (*cpus)[i]});
    if (i + 1 < cpus->size()) {
      auto bw = g.link_bandwidth({DeviceKind::Cpu, (*cpus)[i]},
                                 {DeviceKind::Cpu, (*cpus)[i + 1]},
                                 LinkType::Qpi);
      bws.push_back(*bw);
    }
  }
  hops.push_back(dst);
  bws.push_back(*down);
  return finalize(std::move(hops), std::move(bws), RouteMode::HostRouted);
}

Route plan_route(const TopologyGraph& g, const DeviceId& src,
                 const DeviceId& dst) {
  require_gpu(g, src);
  require_gpu(g, dst);
  if (src == dst) return self_route(src);

  if (auto direct = g.link_bandwidth(src, dst, LinkType::NvLink))
    return finalize({src, dst}, {*direct}, RouteMode::Direct);

  // forwarder with NvLink to both endpoints, max bottleneck then lowest index
  std::optional<std::uint32_t> best;
  double best_bw = 0.0;
  for (std::uint32_t f : g.accelerators()) {
    if (f == src.index || f == dst.index) continue;
    const DeviceId fd{DeviceKind::Gpu, f};
    auto b1 = g.link_bandwidth(src, fd, LinkType::NvLink);
    auto b2 = g.link_bandwidth(fd, dst, LinkType::NvLink);
    if (!b1 || !b2) continue;
    const double bw = std::min(*b1, *b2);
    if (!best || bw > best_bw) {  // accelerators() ascends, so ties keep the
      best = f;                   // lowest index
      best_bw = bw;
    }
  }
  if (best) {
    const DeviceId fd{DeviceKind::Gpu, *best};
    return finalize({src, fd, dst},
                    {*g.link_bandwidth(src, fd, LinkType::NvLink),
                     *g.link_bandwidth(fd, dst, LinkType::NvLink)},
                    RouteMode::TwoPhase);
  }
  return naive_route(g, src, dst);
}

CommPlan plan_all_pairs(const TopologyGraph& g) {
  CommPlan plan;
  for (std::uint32_t a : g.accelerators())
    for (std::uint32_t b : g.accelerators())
      plan.routes.emplace(std::make_pair(a, b),
                          plan_route(g, {DeviceKind::Gpu, a},
                                     {DeviceKind::Gpu, b}));
  return plan;
}

const Route& CommPlan::route(std::uint32_t src, std::uint32_t dst) const {
  auto it = routes.find({src, dst});
  if (it == routes.end())
    throw TopologyError("no planned route for gpu" + std::to_string(src) +
                        "->gpu" + std::to_string(dst));
  return it->second;
}

double transfer_time(const Route& r, std::uint64_t bytes, TimingModel model) {
  if (bytes == 0 || r.link_bandwidths.empty()) return 0.0;
  if (model == TimingModel::Pipelined)
    return static_cast<double>(bytes) / r.bottleneck_bandwidth;
  double t = 0.0;
  for (double bw : r.link_bandwidths) t += static_cast<double>(bytes) / bw;
  return t;
}

const std::string& example_topology_document() {
  static const std::string doc = R"(# Example 8-gpu node, two sockets of four.
# NvLink adjacency: double bridge on (0,2),(1,3),(4,6),(5,7); single bridge on
# the remaining in-quad pairs; one cross-socket NvLink per gpu on
# (0,4),(1,5),(2,6),(3,7). The cross-socket pairs are one declared choice of
# wiring consistent with the double/single bridge split; the planner itself
# reads whatever adjacency the document states.
# Bandwidth units: bytes/second. NvLink single bridge 10e9, double 20e9,
# pcie/qpi 1e9.
device gpu 0
device gpu 1
device gpu 2
device gpu 3
device gpu 4
device gpu 5
device gpu 6
device gpu 7
device cpu 0
device cpu 1
device cpu 2
device cpu 3
device nic 0
device nic 1
device nic 2
device ssd 0
device ssd 1
device ssd 2
device ssd 3
device ssd 4
device ssd 5
device ssd 6
device ssd 7

socket 0 gpus 0 1 2 3
socket 1 gpus 4 5 6 7

# in-quad NvLink, socket 0
link gpu0 gpu2 nvlink 20e9
link gpu1 gpu3 nvlink 20e9
link gpu0 gpu1 nvlink 10e9
link gpu0 gpu3 nvlink 10e9
link gpu1 gpu2 nvlink 10e9
link gpu2 gpu3 nvlink 10e9
# in-quad NvLink, socket 1
link gpu4 gpu6 nvlink 20e9
link gpu5 gpu7 nvlink 20e9
link gpu4 gpu5 nvlink 10e9
link gpu4 gpu7 nvlink 10e9
link gpu5 gpu6 nvlink 10e9
link gpu6 gpu7 nvlink 10e9
# cross-socket NvLink
link gpu0 gpu4 nvlink 10e9
link gpu1 gpu5 nvlink 10e9
link gpu2 gpu6 nvlink 10e9
link gpu3 gpu7 nvlink 10e9

# pcie to socket cpus
link gpu0 cpu0 pcie 1e9
link gpu1 cpu0 pcie 1e9
link gpu2 cpu0 pcie 1e9
link gpu3 cpu0 pcie 1e9
link gpu4 cpu1 pcie 1e9
link gpu5 cpu1 pcie 1e9
link gpu6 cpu1 pcie 1e9
link gpu7 cpu1 pcie 1e9
link nic0 cpu0 pcie 1e9
link nic1 cpu0 pcie 1e9
link nic2 cpu1 pcie 1e9
link ssd0 cpu2 pcie 1e9
link ssd1 cpu2 pcie 1e9
link ssd2 cpu2 pcie 1e9
link ssd3 cpu2 pcie 1e9
link ssd4 cpu3 pcie 1e9
link ssd5 cpu3 pcie 1e9
link ssd6 cpu3 pcie 1e9
link ssd7 cpu3 pcie 1e9

# qpi mesh between the four cpus
link cpu0 cpu1 qpi 1e9
link cpu0 cpu2 qpi 1e9
link cpu0 cpu3 qpi 1e9
link cpu1 cpu2 qpi 1e9
link cpu1 cpu3 qpi 1e9
link cpu2 cpu3 qpi 1e9
)";
  return doc;
}

}  // namespace kpsim
