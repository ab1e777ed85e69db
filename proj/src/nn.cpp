#include "psc/nn.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "psc/errors.hpp"
#include "psc/rng.hpp"

namespace psc::nn {

namespace {

constexpr double kProbEps = 1e-7;

void need_at_least_one(std::int64_t v, const char* what) {
  if (v < 1)
    raise(ErrorKind::BadConfig,
          std::string(what) + " must be at least 1, got " + std::to_string(v));
}

// Reuses the tensor when the shape already matches.
void ensure_shape(Tensor& t, std::vector<std::size_t> shape) {
  if (t.shape() != shape) t = Tensor(std::move(shape));
}

}  // namespace

void ModelConfig::validate() const {
  need_at_least_one(vocab_size, "vocab_size");
  need_at_least_one(embed_dim, "embed_dim");
  need_at_least_one(conv1_filters, "conv1_filters");
  need_at_least_one(conv2_filters, "conv2_filters");
  need_at_least_one(conv3_filters, "conv3_filters");
  need_at_least_one(pool1_window, "pool1_window");
  need_at_least_one(pool2_window, "pool2_window");
  need_at_least_one(input_len, "input_len");
  if (conv1_len() < 1 || conv2_len() < 1)
    raise(ErrorKind::BadConfig, "input_len " + std::to_string(input_len) +
                                    " too short for the kernel-3 convolutions");
  if (pool1_len() < 1)
    raise(ErrorKind::BadConfig, "conv2 output " + std::to_string(conv2_len()) +
                                    " shorter than pool1_window " + std::to_string(pool1_window));
  if (conv3_len() < 1)
    raise(ErrorKind::BadConfig, "pool1 output " + std::to_string(pool1_len()) +
                                    " too short for the kernel-5 convolution");
  if (pool2_len() < 1)
    raise(ErrorKind::BadConfig, "conv3 output " + std::to_string(conv3_len()) +
                                    " shorter than pool2_window " + std::to_string(pool2_window));
}

std::int64_t ModelConfig::count_parameters() const {
  validate();
  const std::int64_t V = vocab_size, d = embed_dim;
  const std::int64_t f1 = conv1_filters, f2 = conv2_filters, f3 = conv3_filters;
  return (V + 1) * d + f1 * (3 * d + 1) + f2 * (3 * f1 + 1) + f3 * (5 * f2 + 1) +
         (flatten_dim() + 1);
}

const std::array<const char*, Parameters::kTensors>& Parameters::names() {
  static const std::array<const char*, kTensors> n = {"E",  "W1", "b1", "W2", "b2",
                                                      "W3", "b3", "Wd", "bd"};
  return n;
}

std::array<Tensor*, Parameters::kTensors> Parameters::tensors() {
  return {&E, &W1, &b1, &W2, &b2, &W3, &b3, &Wd, &bd};
}

std::array<const Tensor*, Parameters::kTensors> Parameters::tensors() const {
  return {&E, &W1, &b1, &W2, &b2, &W3, &b3, &Wd, &bd};
}

Parameters Parameters::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto f1 = static_cast<std::size_t>(cfg.conv1_filters);
  const auto f2 = static_cast<std::size_t>(cfg.conv2_filters);
  const auto f3 = static_cast<std::size_t>(cfg.conv3_filters);
  Parameters p;
  p.E = Tensor{V + 1, d};
  p.W1 = Tensor{3, d, f1};
  p.b1 = Tensor{f1};
  p.W2 = Tensor{3, f1, f2};
  p.b2 = Tensor{f2};
  p.W3 = Tensor{5, f2, f3};
  p.b3 = Tensor{f3};
  p.Wd = Tensor{static_cast<std::size_t>(cfg.flatten_dim()), 1};
  p.bd = Tensor{1};
  return p;
}

Parameters Parameters::glorot(const ModelConfig& cfg, std::uint64_t seed) {
  Parameters p = zeros(cfg);
  Rng rng = Rng::derive(seed, 0);
  auto draw = [&rng](Tensor& t, double limit) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_real(-limit, limit);
  };
  draw(p.E, 0.05);
  const double d = cfg.embed_dim, f1 = cfg.conv1_filters, f2 = cfg.conv2_filters;
  const double f3 = cfg.conv3_filters, flat = cfg.flatten_dim();
  draw(p.W1, std::sqrt(6.0 / (3.0 * d + 3.0 * f1)));
  draw(p.W2, std::sqrt(6.0 / (3.0 * f1 + 3.0 * f2)));
  draw(p.W3, std::sqrt(6.0 / (5.0 * f2 + 5.0 * f3)));
  draw(p.Wd, std::sqrt(6.0 / (flat + 1.0)));
  return p;
}

std::size_t Parameters::total_values() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

bool Parameters::same_shapes(const Parameters& other) const {
  auto a = tensors();
  auto b = other.tensors();
  for (std::size_t i = 0; i < kTensors; ++i)
    if (!a[i]->same_shape(*b[i])) return false;
  return true;
}

void Parameters::scale(double factor) {
  for (Tensor* t : tensors())
    for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] *= factor;
}

void Parameters::fill(double value) {
  for (Tensor* t : tensors()) t->fill(value);
}

void Parameters::add(const Parameters& other) {
  if (!same_shapes(other)) raise(ErrorKind::ShapeMismatch, "parameter addition shape mismatch");
  auto mine = tensors();
  auto theirs = other.tensors();
  for (std::size_t i = 0; i < kTensors; ++i) {
    Tensor& a = *mine[i];
    const Tensor& b = *theirs[i];
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  }
}

BackwardScratch::BackwardScratch(const ModelConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto f1 = static_cast<std::size_t>(cfg.conv1_filters);
  const auto f2 = static_cast<std::size_t>(cfg.conv2_filters);
  const auto f3 = static_cast<std::size_t>(cfg.conv3_filters);
  dp2 = Tensor{static_cast<std::size_t>(cfg.pool2_len()), f3};
  da3 = Tensor{static_cast<std::size_t>(cfg.conv3_len()), f3};
  dp1 = Tensor{static_cast<std::size_t>(cfg.pool1_len()), f2};
  da2 = Tensor{static_cast<std::size_t>(cfg.conv2_len()), f2};
  da1 = Tensor{static_cast<std::size_t>(cfg.conv1_len()), f1};
  dx0 = Tensor{static_cast<std::size_t>(cfg.input_len), d};
  w1_t.assign(3 * f1 * d, 0.0);
  w2_t.assign(3 * f2 * f1, 0.0);
  w3_t.assign(5 * f3 * f2, 0.0);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_loss(double p, double y) {
  if (p < kProbEps) p = kProbEps;
  if (p > 1.0 - kProbEps) p = 1.0 - kProbEps;
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

double forward(const ModelConfig& cfg, const Parameters& params,
               std::span<const std::int32_t> indices, ForwardCache& cache) {
  const auto L = static_cast<std::size_t>(cfg.input_len);
  if (indices.size() != L)
    raise(ErrorKind::ShapeMismatch, "sample length " + std::to_string(indices.size()) +
                                        ", model expects " + std::to_string(cfg.input_len));
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto f1 = static_cast<std::size_t>(cfg.conv1_filters);
  const auto f2 = static_cast<std::size_t>(cfg.conv2_filters);
  const auto f3 = static_cast<std::size_t>(cfg.conv3_filters);
  const auto t1 = static_cast<std::size_t>(cfg.conv1_len());
  const auto t2 = static_cast<std::size_t>(cfg.conv2_len());
  const auto q1 = static_cast<std::size_t>(cfg.pool1_len());
  const auto t3 = static_cast<std::size_t>(cfg.conv3_len());
  const auto q2 = static_cast<std::size_t>(cfg.pool2_len());

  ensure_shape(cache.x0, {L, d});
  ensure_shape(cache.a1, {t1, f1});
  ensure_shape(cache.a2, {t2, f2});
  ensure_shape(cache.p1, {q1, f2});
  ensure_shape(cache.a3, {t3, f3});
  ensure_shape(cache.p2, {q2, f3});
  cache.i1.resize(q1 * f2);
  cache.i2.resize(q2 * f3);
  cache.indices.assign(indices.begin(), indices.end());

  const double* E = params.E.data();
  double* x0 = cache.x0.data();
  for (std::size_t t = 0; t < L; ++t) {
    const std::int32_t idx = indices[t];
    if (idx < 0 || idx > cfg.vocab_size)
      raise(ErrorKind::IndexOutOfVocab, "token index " + std::to_string(idx) +
                                            " outside [0, " + std::to_string(cfg.vocab_size) +
                                            "] at position " + std::to_string(t));
    std::memcpy(x0 + t * d, E + static_cast<std::size_t>(idx) * d, d * sizeof(double));
  }

  const kernels::Table& K = kernels::active();
  const kernels::ConvShape s1{L, d, f1, 3};
  const kernels::ConvShape s2{t1, f1, f2, 3};
  const kernels::ConvShape s3{q1, f2, f3, 5};
  K.conv_forward(x0, params.W1.data(), params.b1.data(), cache.a1.data(), s1, true);
  K.conv_forward(cache.a1.data(), params.W2.data(), params.b2.data(), cache.a2.data(), s2, true);
  K.maxpool_forward(cache.a2.data(), t2, f2, static_cast<std::size_t>(cfg.pool1_window),
                    cache.p1.data(), cache.i1.data());
  K.conv_forward(cache.p1.data(), params.W3.data(), params.b3.data(), cache.a3.data(), s3, true);
  K.maxpool_forward(cache.a3.data(), t3, f3, static_cast<std::size_t>(cfg.pool2_window),
                    cache.p2.data(), cache.i2.data());

  double z = params.bd[0];
  const double* flat = cache.p2.data();
  const double* wd = params.Wd.data();
  const std::size_t flatten = q2 * f3;
  for (std::size_t j = 0; j < flatten; ++j) z += flat[j] * wd[j];
  cache.z = z;
  cache.p = sigmoid(z);
  return cache.p;
}

void backward(const ModelConfig& cfg, const Parameters& params, const ForwardCache& cache,
              double y, Parameters& grads, BackwardScratch& scratch) {
  const auto L = static_cast<std::size_t>(cfg.input_len);
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto f1 = static_cast<std::size_t>(cfg.conv1_filters);
  const auto f2 = static_cast<std::size_t>(cfg.conv2_filters);
  const auto f3 = static_cast<std::size_t>(cfg.conv3_filters);
  const auto t1 = static_cast<std::size_t>(cfg.conv1_len());
  const auto t2 = static_cast<std::size_t>(cfg.conv2_len());
  const auto q1 = static_cast<std::size_t>(cfg.pool1_len());
  const auto t3 = static_cast<std::size_t>(cfg.conv3_len());
  const auto q2 = static_cast<std::size_t>(cfg.pool2_len());

  const bool cache_ok = cache.indices.size() == L &&
                        cache.x0.shape() == std::vector<std::size_t>{L, d} &&
                        cache.a1.shape() == std::vector<std::size_t>{t1, f1} &&
                        cache.a2.shape() == std::vector<std::size_t>{t2, f2} &&
                        cache.p1.shape() == std::vector<std::size_t>{q1, f2} &&
                        cache.a3.shape() == std::vector<std::size_t>{t3, f3} &&
                        cache.p2.shape() == std::vector<std::size_t>{q2, f3} &&
                        cache.i1.size() == q1 * f2 && cache.i2.size() == q2 * f3;
  if (!cache_ok) raise(ErrorKind::StaleCache, "forward cache does not match the model config");
  if (!grads.same_shapes(params))
    raise(ErrorKind::ShapeMismatch, "gradient shapes do not match the parameters");

  const kernels::Table& K = kernels::active();
  const double dz = cache.p - y;

  grads.bd[0] += dz;
  {
    const double* flat = cache.p2.data();
    double* dwd = grads.Wd.data();
    const double* wd = params.Wd.data();
    double* dp2 = scratch.dp2.data();
    const std::size_t flatten = q2 * f3;
    for (std::size_t j = 0; j < flatten; ++j) {
      dwd[j] += dz * flat[j];
      dp2[j] = dz * wd[j];
    }
  }

  // pool2: route each output gradient to its recorded input row
  scratch.da3.fill(0.0);
  {
    double* da3 = scratch.da3.data();
    const double* dp2 = scratch.dp2.data();
    for (std::size_t e = 0; e < q2 * f3; ++e) {
      const std::size_t row = static_cast<std::size_t>(cache.i2[e]);
      da3[row * f3 + e % f3] += dp2[e];
    }
    const double* a3 = cache.a3.data();
    for (std::size_t i = 0; i < t3 * f3; ++i)
      if (a3[i] <= 0.0) da3[i] = 0.0;
  }
  const kernels::ConvShape s3{q1, f2, f3, 5};
  K.conv_backward(cache.p1.data(), params.W3.data(), scratch.da3.data(), scratch.dp1.data(),
                  grads.W3.data(), grads.b3.data(), scratch.w3_t.data(), s3);

  scratch.da2.fill(0.0);
  {
    double* da2 = scratch.da2.data();
    const double* dp1 = scratch.dp1.data();
    for (std::size_t e = 0; e < q1 * f2; ++e) {
      const std::size_t row = static_cast<std::size_t>(cache.i1[e]);
      da2[row * f2 + e % f2] += dp1[e];
    }
    const double* a2 = cache.a2.data();
    for (std::size_t i = 0; i < t2 * f2; ++i)
      if (a2[i] <= 0.0) da2[i] = 0.0;
  }
  const kernels::ConvShape s2{t1, f1, f2, 3};
  K.conv_backward(cache.a1.data(), params.W2.data(), scratch.da2.data(), scratch.da1.data(),
                  grads.W2.data(), grads.b2.data(), scratch.w2_t.data(), s2);

  {
    double* da1 = scratch.da1.data();
    const double* a1 = cache.a1.data();
    for (std::size_t i = 0; i < t1 * f1; ++i)
      if (a1[i] <= 0.0) da1[i] = 0.0;
  }
  const kernels::ConvShape s1{L, d, f1, 3};
  K.conv_backward(cache.x0.data(), params.W1.data(), scratch.da1.data(), scratch.dx0.data(),
                  grads.W1.data(), grads.b1.data(), scratch.w1_t.data(), s1);

  {
    double* dE = grads.E.data();
    const double* dx0 = scratch.dx0.data();
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t row = static_cast<std::size_t>(cache.indices[t]);
      for (std::size_t c = 0; c < d; ++c) dE[row * d + c] += dx0[t * d + c];
    }
  }
}

AdadeltaState AdadeltaState::init(const ModelConfig& cfg, double rho, double lr,
                                  double epsilon) {
  AdadeltaState state;
  state.eg2 = Parameters::zeros(cfg);
  state.edx2 = Parameters::zeros(cfg);
  state.rho = rho;
  state.lr = lr;
  state.epsilon = epsilon;
  return state;
}

void adadelta_step(Parameters& params, const Parameters& grads, AdadeltaState& state) {
  if (!params.same_shapes(grads) || !params.same_shapes(state.eg2) ||
      !params.same_shapes(state.edx2))
    raise(ErrorKind::ShapeMismatch, "optimizer state shapes do not match the parameters");

  auto gs = grads.tensors();
  for (std::size_t i = 0; i < Parameters::kTensors; ++i) {
    const Tensor& g = *gs[i];
    for (std::size_t j = 0; j < g.size(); ++j)
      if (!std::isfinite(g[j]))
        raise(ErrorKind::NonFiniteGradient,
              std::string("non-finite gradient in ") + Parameters::names()[i]);
  }

  const kernels::Table& K = kernels::active();
  auto ps = params.tensors();
  auto e1 = state.eg2.tensors();
  auto e2 = state.edx2.tensors();
  for (std::size_t i = 0; i < Parameters::kTensors; ++i)
    K.adadelta_step(ps[i]->data(), gs[i]->data(), e1[i]->data(), e2[i]->data(), ps[i]->size(),
                    state.rho, state.lr, state.epsilon);
}

}  // namespace psc::nn
