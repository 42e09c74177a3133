#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kpsim/experiment.hpp"

namespace py = pybind11;
using namespace kpsim;

namespace {

std::vector<std::string> route_hops(const Route& r) {
  std::vector<std::string> out;
  for (const auto& h : r.hops) out.push_back(to_string(h));
  return out;
}

GradientOracle oracle_from_python(py::function grad_fn,
                                  py::object true_grad_fn, py::object loss_fn,
                                  std::size_t dim) {
  GradientOracle o;
  o.dim = dim;
  o.evaluate = [grad_fn, dim](std::size_t worker, std::span<const double> x,
                              std::mt19937_64& rng, std::span<double> out) {
    // hands the callable d iid U(0,1) draws from the worker's stream
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> noise(dim);
    for (auto& v : noise) v = u01(rng);
    const py::gil_scoped_acquire gil;
    const auto result =
        grad_fn(worker, std::vector<double>(x.begin(), x.end()), noise)
            .cast<std::vector<double>>();
    if (result.size() != dim)
      throw Error("python gradient returned the wrong dimension");
    std::copy(result.begin(), result.end(), out.begin());
  };
  if (!true_grad_fn.is_none()) {
    auto fn = true_grad_fn.cast<py::function>();
    o.true_gradient = [fn, dim](std::span<const double> x,
                                std::span<double> out) {
      const py::gil_scoped_acquire gil;
      const auto result = fn(std::vector<double>(x.begin(), x.end()))
                              .cast<std::vector<double>>();
      if (result.size() != dim)
        throw Error("python true_gradient returned the wrong dimension");
      std::copy(result.begin(), result.end(), out.begin());
    };
  }
  if (!loss_fn.is_none()) {
    auto fn = loss_fn.cast<py::function>();
    o.loss = [fn](std::span<const double> x) {
      const py::gil_scoped_acquire gil;
      return fn(std::vector<double>(x.begin(), x.end())).cast<double>();
    };
  }
  return o;
}

py::dict trajectory_to_dict(const Trajectory& traj) {
  py::list steps, merged, loss, metric, a3;
  for (const auto& s : traj.steps) {
    steps.append(s.step);
    merged.append(s.merged);
    loss.append(s.loss);
    metric.append(s.metric);
    a3.append(s.a3_increment);
  }
  py::dict d;
  d["step"] = steps;
  d["merged"] = merged;
  d["loss"] = loss;
  d["metric"] = metric;
  d["a3"] = a3;
  d["x_bar_final"] = traj.steps.empty() ? std::vector<double>{}
                                        : traj.steps.back().x_bar;
  d["dim"] = traj.dim;
  d["workers"] = traj.workers;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "desk-scale k-step training simulator core";

  // translators run newest-first, so the base class registers first
  py::register_exception<Error>(m, "KpsimError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  // ---- optimizer ----
  py::class_<AdamHyper>(m, "AdamHyper")
      .def(py::init<>())
      .def_readwrite("alpha", &AdamHyper::alpha)
      .def_readwrite("beta1", &AdamHyper::beta1)
      .def_readwrite("beta2", &AdamHyper::beta2)
      .def_readwrite("epsilon", &AdamHyper::epsilon)
      .def_readwrite("k", &AdamHyper::k)
      .def_readwrite("reset_local_v", &AdamHyper::reset_local_v);

  py::class_<WorkerState>(m, "WorkerState")
      .def_static(
          "init",
          [](const std::vector<double>& x0, double eps) {
            return WorkerState::init(x0, eps);
          },
          py::arg("x0"), py::arg("epsilon"))
      .def_readwrite("x", &WorkerState::x)
      .def_readwrite("m", &WorkerState::m)
      .def_readwrite("v", &WorkerState::v)
      .def_readwrite("v_bar", &WorkerState::v_bar)
      .def_readonly("t", &WorkerState::t);

  py::class_<GradientOracle>(m, "GradientOracle");

  m.def(
      "local_adam_step",
      [](WorkerState& s, const std::vector<double>& g, const AdamHyper& h) {
        local_adam_step(s, g, h);
        return s;
      },
      py::arg("state"), py::arg("gradient"), py::arg("hyper"));
  m.def(
      "global_merge",
      [](std::vector<WorkerState> states, const AdamHyper& h) {
        global_merge(states, h);
        return states;
      },
      py::arg("states"), py::arg("hyper"));
  m.def(
      "adagrad_sparse_update",
      [](std::vector<double> w, std::vector<double> acc,
         const std::vector<double>& g, double lr) {
        adagrad_sparse_update(w, acc, g, lr);
        return py::make_tuple(w, acc);
      },
      py::arg("weight"), py::arg("accumulator"), py::arg("gradient"),
      py::arg("lr"));

  m.def("quadratic_oracle", &make_quadratic_oracle, py::arg("center"),
        py::arg("noise") = 0.0);
  m.def("benchmark_oracle", &make_benchmark_oracle, py::arg("dim"),
        py::arg("seed"), py::arg("noise") = 0.5,
        py::arg("bump_amplitude") = 0.5, py::arg("bump_frequency") = 3.0);
  m.def("oracle_from_python", &oracle_from_python, py::arg("gradient"),
        py::arg("true_gradient") = py::none(), py::arg("loss") = py::none(),
        py::arg("dim") = 1);

  m.def(
      "run_kstep_adam",
      [](const GradientOracle& oracle, const AdamHyper& h, std::size_t workers,
         std::uint64_t steps, const std::vector<double>& x0,
         std::uint64_t seed) {
        return trajectory_to_dict(
            run_kstep_adam(oracle, h, workers, steps, x0, seed));
      },
      py::arg("oracle"), py::arg("hyper"), py::arg("workers"),
      py::arg("steps"), py::arg("x0"), py::arg("seed"));

  m.def(
      "check_gradient",
      [](const GradientOracle& oracle, const std::vector<double>& x,
         double h) { return check_gradient(oracle, x, h); },
      py::arg("oracle"), py::arg("x"), py::arg("h") = 1e-5);

  // ---- topology ----
  py::class_<Route>(m, "Route")
      .def_property_readonly("hops", &route_hops)
      .def_property_readonly(
          "mode", [](const Route& r) { return std::string(to_string(r.mode)); })
      .def_readonly("bottleneck_bandwidth", &Route::bottleneck_bandwidth)
      .def_readonly("link_bandwidths", &Route::link_bandwidths);

  py::class_<TopologyGraph>(m, "Topology")
      .def_property_readonly("gpus", &TopologyGraph::accelerators)
      .def(
          "plan_route",
          [](const TopologyGraph& g, std::uint32_t src, std::uint32_t dst) {
            return plan_route(g, {DeviceKind::Gpu, src},
                              {DeviceKind::Gpu, dst});
          },
          py::arg("src"), py::arg("dst"))
      .def(
          "naive_route",
          [](const TopologyGraph& g, std::uint32_t src, std::uint32_t dst) {
            return naive_route(g, {DeviceKind::Gpu, src},
                               {DeviceKind::Gpu, dst});
          },
          py::arg("src"), py::arg("dst"))
      .def("two_phase_ratio_uniform",
           [](const TopologyGraph& g, std::uint64_t bytes) {
             WorkloadMatrix w;
             for (std::uint32_t a : g.accelerators())
               for (std::uint32_t b : g.accelerators())
                 if (a != b) w[{a, b}] = bytes;
             return two_phase_ratio(g, w);
           },
           py::arg("bytes") = 1 << 20);

  m.def("parse_topology", &build_topology, py::arg("document"));
  m.def("load_topology", &load_topology, py::arg("path"));
  m.def("example_topology", [] { return example_topology_document(); });
  m.def(
      "transfer_time",
      [](const Route& r, std::uint64_t bytes, bool pipelined) {
        return transfer_time(r, bytes,
                             pipelined ? TimingModel::Pipelined
                                       : TimingModel::StoreAndForward);
      },
      py::arg("route"), py::arg("bytes"), py::arg("pipelined") = false);

  // ---- store ----
  py::class_<TieredStore>(m, "TieredStore")
      .def(py::init([](std::size_t cache_capacity, const std::string& cold_dir,
                       std::size_t embedding_dim) {
             TierConfig t;
             t.cache_capacity = cache_capacity;
             t.cold_path = cold_dir;
             return std::make_unique<TieredStore>(t, embedding_dim);
           }),
           py::arg("cache_capacity"), py::arg("cold_dir"),
           py::arg("embedding_dim"))
      .def("pull",
           [](TieredStore& s, const std::vector<ParameterKey>& keys) {
             const auto got = s.pull_batch(
                 std::set<ParameterKey>(keys.begin(), keys.end()));
             py::dict out;
             for (const auto& [key, e] : got)
               out[py::int_(key)] = py::make_tuple(e.weights, e.adagrad_acc);
             return out;
           },
           py::arg("keys"))
      .def("push",
           [](TieredStore& s,
              const std::map<ParameterKey, std::vector<double>>& updates,
              double lr) { s.push_updates(updates, lr); },
           py::arg("updates"), py::arg("lr"))
      .def("evict", &TieredStore::evict)
      .def("flush", &TieredStore::flush)
      .def_property_readonly("cache_size", &TieredStore::cache_size);

  // ---- data + eval ----
  m.def(
      "generate_synthetic",
      [](std::uint64_t seed, std::uint64_t n, std::uint64_t vocab,
         double nnz_mean) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.n_instances = n;
        spec.vocab = vocab;
        spec.nnz_mean = nnz_mean;
        py::list out;
        for (const auto& b : generate_synthetic_ctr(spec, n))
          for (const auto& inst : b.instances)
            out.append(py::make_tuple(inst.label, inst.feature_ids));
        return out;
      },
      py::arg("seed"), py::arg("n"), py::arg("vocab"), py::arg("nnz_mean"));

  m.def(
      "compute_auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels)
          -> py::object {
        const auto auc = compute_auc(scores, labels);
        if (!auc) return py::none();
        return py::float_(*auc);
      },
      py::arg("scores"), py::arg("labels"));

  // ---- experiments ----
  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::string& out_dir) {
        ExperimentConfig config = ExperimentConfig::from_json_text(config_json);
        if (!out_dir.empty()) config.out_dir = out_dir;
        const auto r = run_experiment(config, nullptr);
        py::dict d;
        d["out_dir"] = r.out_dir;
        d["merge_events"] = r.merge_events;
        d["minibatch_steps"] = r.minibatch_steps;
        d["cumulative_auc"] = r.cumulative_auc
                                  ? py::object(py::float_(*r.cumulative_auc))
                                  : py::object(py::none());
        d["final_metric_avg"] =
            r.final_metric_avg ? py::object(py::float_(*r.final_metric_avg))
                               : py::object(py::none());
        return d;
      },
      py::arg("config_json") = "{}", py::arg("out_dir") = "");
  m.def("default_config", [] { return ExperimentConfig::defaults().to_json(); });
  m.def(
      "validate_config",
      [](const std::string& config_json) {
        return ExperimentConfig::from_json_text(config_json).validate();
      },
      py::arg("config_json"));
}
