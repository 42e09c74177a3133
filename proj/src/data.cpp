#include "kpsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace kpsim {

SyntheticCtr::SyntheticCtr(const SyntheticSpec& spec)
    : spec_(spec), rng_(splitmix64(spec.seed ^ 0xC7E1A9D3ULL)) {
  if (spec_.vocab < 1 || spec_.nnz_mean < 1.0 ||
      spec_.nnz_mean > static_cast<double>(spec_.vocab))
    throw ConfigError("synthetic data: need vocab >= nnz_mean >= 1");
  feature_weight_.resize(spec_.vocab);
  std::mt19937_64 wrng(splitmix64(spec_.seed ^ 0x5D1E66F2ULL));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& w : feature_weight_) w = u(wrng);
}

double SyntheticCtr::planted_logit(const Instance& inst) const {
  double s = 0.0;
  for (ParameterKey f : inst.feature_ids) s += feature_weight_[f];
  return spec_.signal_scale * s / std::sqrt(spec_.nnz_mean);
}

Instance SyntheticCtr::next() {
  std::poisson_distribution<std::uint64_t> nnz_dist(spec_.nnz_mean);
  std::uniform_int_distribution<ParameterKey> feat(0, spec_.vocab - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const std::uint64_t nnz =
      std::clamp<std::uint64_t>(nnz_dist(rng_), 1, spec_.vocab);
  std::set<ParameterKey> ids;
  while (ids.size() < nnz) ids.insert(feat(rng_));
  Instance inst;
  inst.feature_ids.assign(ids.begin(), ids.end());
  const double logit = planted_logit(inst);
  const double p = 1.0 / (1.0 + std::exp(-logit));
  inst.label = u01(rng_) < p ? 1 : 0;
  return inst;
}

std::vector<Batch> generate_synthetic_ctr(const SyntheticSpec& spec,
                                          std::uint64_t batch_size) {
  SyntheticCtr gen(spec);
  std::vector<Instance> all;
  all.reserve(spec.n_instances);
  for (std::uint64_t i = 0; i < spec.n_instances; ++i) all.push_back(gen.next());
  return make_batches(std::move(all), batch_size);
}

std::vector<Batch> make_batches(std::vector<Instance> instances,
                                std::uint64_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<Batch> batches;
  Batch current;
  current.id = 0;
  for (auto& inst : instances) {
    current.instances.push_back(std::move(inst));
    if (current.instances.size() == batch_size) {
      batches.push_back(std::move(current));
      current = Batch{};
      current.id = batches.size();
    }
  }
  if (!current.instances.empty()) batches.push_back(std::move(current));
  return batches;
}

std::vector<Instance> read_instances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open instance file: " + path);
  std::vector<Instance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error("instance file line " + std::to_string(lineno) +
                  ": missing tab separator");
    const std::string label_s = line.substr(0, tab);
    if (label_s != "0" && label_s != "1")
      throw Error("instance file line " + std::to_string(lineno) +
                  ": label must be 0 or 1");
    Instance inst;
    inst.label = label_s == "1" ? 1 : 0;
    std::stringstream ids(line.substr(tab + 1));
    std::string tok;
    std::set<ParameterKey> seen;
    while (std::getline(ids, tok, ',')) {
      if (tok.empty()) continue;
      try {
        seen.insert(std::stoull(tok));
      } catch (const std::exception&) {
        throw Error("instance file line " + std::to_string(lineno) +
                    ": bad feature id '" + tok + "'");
      }
    }
    if (seen.empty())
      throw Error("instance file line " + std::to_string(lineno) +
                  ": no feature ids");
    inst.feature_ids.assign(seen.begin(), seen.end());
    out.push_back(std::move(inst));
  }
  return out;
}

void write_instances(const std::string& path,
                     const std::vector<Instance>& instances) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write instance file: " + path);
  for (const auto& inst : instances) {
    out << inst.label << '\t';
    for (std::size_t i = 0; i < inst.feature_ids.size(); ++i) {
      if (i > 0) out << ',';
      out << inst.feature_ids[i];
    }
    out << '\n';
  }
}

}  // namespace kpsim
