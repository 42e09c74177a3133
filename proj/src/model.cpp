#include "kpsim/model.hpp"

#include <cmath>
#include <random>

namespace kpsim {

void ModelConfig::validate() const {
  if (vocab < 1) throw ConfigError("model: vocab must be >= 1");
  if (embedding_dim < 1) throw ConfigError("model: embedding_dim must be >= 1");
  for (std::size_t h : hidden)
    if (h < 1) throw ConfigError("model: hidden widths must be >= 1");
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + s + "' (relu|tanh)");
}

Pooling pooling_from_string(const std::string& s) {
  if (s == "sum") return Pooling::Sum;
  if (s == "mean") return Pooling::Mean;
  throw ConfigError("unknown pooling '" + s + "' (sum|mean)");
}

const char* to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "tanh";
}
const char* to_string(Pooling p) { return p == Pooling::Sum ? "sum" : "mean"; }

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// stable softplus(z) = log(1 + e^z)
double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double act_forward(Activation a, double z) {
  return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double act_derivative(Activation a, double z, double y) {
  return a == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

}  // namespace

CtrModel::CtrModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  widths_.push_back(config_.embedding_dim);
  for (std::size_t h : config_.hidden) widths_.push_back(h);
  widths_.push_back(1);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    w_off_.push_back(dense_dim_);
    dense_dim_ += widths_[l] * widths_[l + 1];
    b_off_.push_back(dense_dim_);
    dense_dim_ += widths_[l + 1];
  }
}

std::vector<double> CtrModel::init_dense(std::uint64_t seed) const {
  std::vector<double> dense(dense_dim_);
  std::mt19937_64 rng(splitmix64(seed ^ 0xD15EA5E0ULL));
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& w : dense) w = u(rng);
  return dense;
}

CtrModel::Forward CtrModel::forward(std::span<const double> dense,
                                    const EmbeddingSource& embeddings,
                                    const std::vector<Instance>& minibatch) const {
  if (dense.size() != dense_dim_)
    throw Error("forward: dense parameter size mismatch");
  const std::size_t e = config_.embedding_dim;
  const std::size_t layers = widths_.size() - 1;
  Forward out;
  out.instances = &minibatch;
  out.predictions.reserve(minibatch.size());
  out.logits.reserve(minibatch.size());

  for (const auto& inst : minibatch) {
    std::vector<double> pooled(e, 0.0);
    for (ParameterKey f : inst.feature_ids) {
      const auto emb = embeddings(f);
      if (emb.size() != e) throw Error("forward: embedding dim mismatch");
      for (std::size_t j = 0; j < e; ++j) pooled[j] += emb[j];
    }
    if (config_.pooling == Pooling::Mean) {
      const double inv = 1.0 / static_cast<double>(inst.feature_ids.size());
      for (auto& p : pooled) p *= inv;
    }

    std::vector<std::vector<double>> pre(layers), act(layers);
    const std::vector<double>* input = &pooled;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in_w = widths_[l], out_w = widths_[l + 1];
      pre[l].assign(out_w, 0.0);
      act[l].assign(out_w, 0.0);
      for (std::size_t o = 0; o < out_w; ++o) {
        double z = dense[b_off_[l] + o];
        const double* w = dense.data() + w_off_[l] + o * in_w;
        for (std::size_t i = 0; i < in_w; ++i) z += w[i] * (*input)[i];
        pre[l][o] = z;
        // last layer is the linear logit head
        act[l][o] = (l + 1 == layers) ? z : act_forward(config_.activation, z);
      }
      input = &act[l];
    }
    const double logit = act[layers - 1][0];
    out.logits.push_back(logit);
    out.predictions.push_back(sigmoid(logit));
    out.pooled.push_back(std::move(pooled));
    out.pre.push_back(std::move(pre));
    out.act.push_back(std::move(act));
  }
  return out;
}

double CtrModel::mean_bce(const Forward& fwd) {
  const auto& instances = *fwd.instances;
  double loss = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const double z = fwd.logits[i];
    const double y = static_cast<double>(instances[i].label);
    loss += softplus(z) - y * z;  // = -(y log p + (1-y) log(1-p))
  }
  return loss / static_cast<double>(instances.size());
}

CtrModel::Backward CtrModel::backward(std::span<const double> dense,
                                      const Forward& cache) const {
  if (cache.instances == nullptr) throw Error("backward: stale forward cache");
  const auto& instances = *cache.instances;
  const std::size_t n = instances.size();
  const std::size_t layers = widths_.size() - 1;

  Backward out;
  out.dense_grad.assign(dense_dim_, 0.0);
  out.loss = mean_bce(cache);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = instances[i];
    if (inst.label != 0 && inst.label != 1)
      throw Error("backward: label outside {0,1}");
    // d(mean bce)/d logit
    double upstream = (cache.predictions[i] -
                       static_cast<double>(inst.label)) /
                      static_cast<double>(n);

    std::vector<double> delta{upstream};  // gradient wrt layer output
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in_w = widths_[l], out_w = widths_[l + 1];
      const std::vector<double>& input =
          (l == 0) ? cache.pooled[i] : cache.act[i][l - 1];
      std::vector<double> next_delta(in_w, 0.0);
      for (std::size_t o = 0; o < out_w; ++o) {
        double dz = delta[o];
        if (l + 1 != layers)
          dz *= act_derivative(config_.activation, cache.pre[i][l][o],
                               cache.act[i][l][o]);
        out.dense_grad[b_off_[l] + o] += dz;
        double* wg = out.dense_grad.data() + w_off_[l] + o * in_w;
        const double* w = dense.data() + w_off_[l] + o * in_w;
        for (std::size_t j = 0; j < in_w; ++j) {
          wg[j] += dz * input[j];
          next_delta[j] += dz * w[j];
        }
      }
      delta = std::move(next_delta);
    }

    // delta now holds d loss / d pooled
    const double coeff = config_.pooling == Pooling::Mean
                             ? 1.0 / static_cast<double>(inst.feature_ids.size())
                             : 1.0;
    for (ParameterKey f : inst.feature_ids) {
      auto [it, inserted] = out.sparse_grads.try_emplace(
          f, std::vector<double>(config_.embedding_dim, 0.0));
      for (std::size_t j = 0; j < config_.embedding_dim; ++j)
        it->second[j] += coeff * delta[j];
    }
  }
  return out;
}

}  // namespace kpsim
