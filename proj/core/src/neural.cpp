#include "sharednav/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "sharednav/error.hpp"
#include "sharednav/random.hpp"

namespace sharednav {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

const char* behaviour_name(Behaviour b) {
  switch (b) {
    case Behaviour::Left:
      return "Left";
    case Behaviour::Right:
      return "Right";
    case Behaviour::Straight:
      return "Straight";
  }
  return "?";
}

Behaviour parse_behaviour(const std::string& name) {
  for (Behaviour b : kBehaviours)
    if (name == behaviour_name(b)) return b;
  throw InvalidArgument("unknown behaviour class '" + name + "'");
}

Behaviour ConfidenceVector::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return static_cast<Behaviour>(best);
}

ConfidenceVector softmax(const std::array<double, 3>& logits) {
  const double m = std::max({logits[0], logits[1], logits[2]});
  ConfidenceVector out;
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    out.p[i] = std::exp(logits[i] - m);
    sum += out.p[i];
  }
  for (auto& v : out.p) v /= sum;
  return out;
}

// Layers.

namespace {

void glorot(Matrix& w, double fan_in, double fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
}

class Dense final : public Layer {
 public:
  Dense(int in, int out, std::mt19937_64& rng) : w_(out, in), b_(Matrix::Zero(out, 1)) { glorot(w_, in, out, rng); }

  Matrix forward(const Matrix& x) const override {
    Matrix y = w_ * x;
    y.colwise() += b_.col(0);
    return y;
  }
  Matrix backward(const Matrix& x, const Matrix&, const Matrix& dy, std::span<Matrix> grads) const override {
    grads[0].noalias() += dy * x.transpose();
    grads[1] += dy.rowwise().sum();
    return w_.transpose() * dy;
  }
  std::vector<Matrix*> params() override { return {&w_, &b_}; }
  std::vector<const Matrix*> params() const override { return {&w_, &b_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  Matrix w_, b_;
};

// Stride-1 convolution over the time axis with zero padding that preserves length.
// Weight column i*k + j multiplies input channel i at offset j. The plain layer reads
// x[t + j - pad]; the transposed layer reads x[t + pad - j], which is the gather form of
// a stride-1 transposed convolution whose weight[i][o][j] is stored at (o, i*k + j).
class Conv1d final : public Layer {
 public:
  Conv1d(int in, int out, int k, int n, bool transposed, std::mt19937_64& rng)
      : in_(in), k_(k), n_(n), pad_((k - 1) / 2), transposed_(transposed), w_(out, in * k), b_(Matrix::Zero(out, 1)) {
    glorot(w_, static_cast<double>(in) * k, static_cast<double>(out) * k, rng);
  }

  Matrix forward(const Matrix& x) const override {
    Matrix y = w_ * im2col(x);
    y.colwise() += b_.col(0);
    return y;
  }
  Matrix backward(const Matrix& x, const Matrix&, const Matrix& dy, std::span<Matrix> grads) const override {
    grads[0].noalias() += dy * im2col(x).transpose();
    grads[1] += dy.rowwise().sum();
    const Matrix dcol = w_.transpose() * dy;
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    const Eigen::Index batch = x.cols() / n_;
    for (Eigen::Index b = 0; b < batch; ++b)
      for (int t = 0; t < n_; ++t)
        for (int j = 0; j < k_; ++j) {
          const int src = source(t, j);
          if (src < 0 || src >= n_) continue;
          for (int i = 0; i < in_; ++i) dx(i, b * n_ + src) += dcol(i * k_ + j, b * n_ + t);
        }
    return dx;
  }
  std::vector<Matrix*> params() override { return {&w_, &b_}; }
  std::vector<const Matrix*> params() const override { return {&w_, &b_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1d>(*this); }

 private:
  int source(int t, int j) const { return transposed_ ? t + pad_ - j : t + j - pad_; }

  Matrix im2col(const Matrix& x) const {
    if (x.rows() != in_ || x.cols() % n_ != 0) throw InvalidArgument("Conv1d: input shape mismatch");
    const Eigen::Index batch = x.cols() / n_;
    Matrix col = Matrix::Zero(static_cast<Eigen::Index>(in_) * k_, x.cols());
    for (Eigen::Index b = 0; b < batch; ++b)
      for (int t = 0; t < n_; ++t)
        for (int j = 0; j < k_; ++j) {
          const int src = source(t, j);
          if (src < 0 || src >= n_) continue;
          for (int i = 0; i < in_; ++i) col(i * k_ + j, b * n_ + t) = x(i, b * n_ + src);
        }
    return col;
  }

  int in_, k_, n_, pad_;
  bool transposed_;
  Matrix w_, b_;
};

class Relu final : public Layer {
 public:
  Matrix forward(const Matrix& x) const override { return x.cwiseMax(0.0); }
  Matrix backward(const Matrix&, const Matrix& y, const Matrix& dy, std::span<Matrix>) const override {
    return (y.array() > 0.0).select(dy, 0.0);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
};

// Reinterprets the column-major buffer with `rows` rows.
class Reshape final : public Layer {
 public:
  explicit Reshape(Eigen::Index rows) : rows_(rows) {}
  Matrix forward(const Matrix& x) const override {
    if (x.size() % rows_ != 0) throw InvalidArgument("Reshape: size mismatch");
    return Eigen::Map<const Matrix>(x.data(), rows_, x.size() / rows_);
  }
  Matrix backward(const Matrix& x, const Matrix&, const Matrix& dy, std::span<Matrix>) const override {
    return Eigen::Map<const Matrix>(dy.data(), x.rows(), x.cols());
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  Eigen::Index rows_;
};

void add_activation(Sequential& net, Activation a) {
  if (a == Activation::ReLU) net.add(std::make_unique<Relu>());
}

void check_config(const AutoencoderConfig& c) {
  if (c.window < 2 || c.kernel < 1 || c.kernel % 2 == 0 || c.latent < 1)
    throw InvalidArgument("AutoencoderConfig: window >= 2, odd kernel and positive latent size required");
  for (int ch : c.conv_channels)
    if (ch < 1) throw InvalidArgument("AutoencoderConfig: channel counts must be positive");
  for (int h : c.hidden)
    if (h < 1) throw InvalidArgument("AutoencoderConfig: hidden widths must be positive");
}

}  // namespace

// Sequential.

Sequential::Sequential(const Sequential& other) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    layers_.clear();
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  return *this;
}

Matrix Sequential::forward(const Matrix& x) const {
  Matrix a = x;
  for (const auto& l : layers_) a = l->forward(a);
  return a;
}

std::vector<Matrix> Sequential::forward_tape(const Matrix& x) const {
  std::vector<Matrix> tape;
  tape.reserve(layers_.size() + 1);
  tape.push_back(x);
  for (const auto& l : layers_) tape.push_back(l->forward(tape.back()));
  return tape;
}

Matrix Sequential::backward(const std::vector<Matrix>& tape, const Matrix& dy, std::vector<Matrix>& grads) const {
  grads.clear();
  for (const Matrix* p : params()) grads.push_back(Matrix::Zero(p->rows(), p->cols()));
  std::size_t offset = grads.size();
  Matrix d = dy;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = *layers_[li];
    const std::size_t blocks = l.params().size();
    offset -= blocks;
    d = l.backward(tape[li], tape[li + 1], d, std::span<Matrix>(grads.data() + offset, blocks));
  }
  return d;
}

std::vector<Matrix*> Sequential::params() {
  std::vector<Matrix*> out;
  for (auto& l : layers_)
    for (Matrix* p : l->params()) out.push_back(p);
  return out;
}

std::vector<const Matrix*> Sequential::params() const {
  std::vector<const Matrix*> out;
  for (const auto& l : layers_)
    for (const Matrix* p : std::as_const(*l).params()) out.push_back(p);
  return out;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* p : params()) n += static_cast<std::size_t>(p->size());
  return n;
}

double& Sequential::parameter(std::size_t i) {
  for (Matrix* p : params()) {
    const auto size = static_cast<std::size_t>(p->size());
    if (i < size) return p->data()[i];
    i -= size;
  }
  throw InvalidArgument("Sequential::parameter: index out of range");
}

// Encoder / decoder.

Matrix stack_windows(std::span<const FeatureWindow> windows, std::span<const std::size_t> order) {
  const std::size_t count = order.empty() ? windows.size() : order.size();
  if (count == 0) throw InvalidArgument("stack_windows: no windows");
  const Eigen::Index n = windows[order.empty() ? 0 : order[0]].cols();
  Matrix out(kFeatureRows, n * static_cast<Eigen::Index>(count));
  for (std::size_t b = 0; b < count; ++b) {
    const auto& w = windows[order.empty() ? b : order[b]];
    if (w.cols() != n) throw InvalidArgument("stack_windows: windows differ in length");
    out.middleCols(static_cast<Eigen::Index>(b) * n, n) = w;
  }
  return out;
}

Encoder::Encoder(const AutoencoderConfig& config, std::uint64_t seed) : config_(config) {
  check_config(config);
  std::mt19937_64 rng(seed);
  const int n = config.window;
  int in = kFeatureRows;
  for (int ch : config.conv_channels) {
    net_.add(std::make_unique<Conv1d>(in, ch, config.kernel, n, false, rng));
    add_activation(net_, config.activation);
    in = ch;
  }
  net_.add(std::make_unique<Reshape>(static_cast<Eigen::Index>(in) * n));
  int width = in * n;
  for (int h : config.hidden) {
    net_.add(std::make_unique<Dense>(width, h, rng));
    add_activation(net_, config.activation);
    width = h;
  }
  net_.add(std::make_unique<Dense>(width, config.latent, rng));
}

Matrix Encoder::encode_batch(const Matrix& x) const {
  if (x.rows() != kFeatureRows || x.cols() % config_.window != 0)
    throw InvalidArgument("encode: expected a 5 x n*B batch with n = " + std::to_string(config_.window));
  return net_.forward(x);
}

Vector Encoder::encode(const FeatureWindow& w) const {
  if (w.cols() != config_.window)
    throw InvalidArgument("encode: window has " + std::to_string(w.cols()) + " samples, model expects " +
                          std::to_string(config_.window));
  return encode_batch(w).col(0);
}

Decoder::Decoder(const AutoencoderConfig& config, std::uint64_t seed) : config_(config) {
  check_config(config);
  std::mt19937_64 rng(seed);
  const int n = config.window;
  const int c_last = config.conv_channels.back();
  int width = config.latent;
  for (auto it = config.hidden.rbegin(); it != config.hidden.rend(); ++it) {
    net_.add(std::make_unique<Dense>(width, *it, rng));
    add_activation(net_, config.activation);
    width = *it;
  }
  net_.add(std::make_unique<Dense>(width, c_last * n, rng));
  add_activation(net_, config.activation);
  net_.add(std::make_unique<Reshape>(c_last));
  // Mirror of the encoder's channel sequence: 32 -> 32 -> 16 -> 5.
  const std::array<int, 4> chain{config.conv_channels[2], config.conv_channels[1], config.conv_channels[0], kFeatureRows};
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    net_.add(std::make_unique<Conv1d>(chain[i], chain[i + 1], config.kernel, n, true, rng));
    if (i + 2 < chain.size()) add_activation(net_, config.activation);
  }
}

Matrix Decoder::decode_batch(const Matrix& z) const {
  if (z.rows() != config_.latent) throw InvalidArgument("decode: latent size mismatch");
  return net_.forward(z);
}

FeatureWindow Decoder::decode(const Vector& z) const { return decode_batch(z); }

// Classifier head.

std::array<double, 3> ClassifierHead::logits(const Vector& z) const {
  if (z.size() != weights.cols()) throw InvalidArgument("classify: latent size mismatch");
  const Vector l = weights * z + bias;
  return {l(0), l(1), l(2)};
}

ConfidenceVector ClassifierHead::classify(const Vector& z) const { return softmax(logits(z)); }

// Training.

Split split_indices(std::size_t count, double train_fraction, std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("split_indices: empty dataset");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw InvalidArgument("split_indices: bad train fraction");
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 1));
  // Fisher-Yates with our own index draw so the permutation does not depend on the
  // standard library's shuffle algorithm.
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  Split s;
  if (count == 1) {
    s.train = perm;
    s.validation = perm;
    return s;
  }
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  n_train = std::clamp<std::size_t>(n_train, 1, count - 1);
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return s;
}

Adam::Adam(const TrainConfig& config, const std::vector<Matrix*>& params)
    : lr_(config.learning_rate), b1_(config.beta1), b2_(config.beta2), eps_(config.epsilon) {
  for (const Matrix* p : params) {
    m_.push_back(Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grads[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i].cwiseProduct(grads[i]);
    params[i]->array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

namespace {

void check_finite(double loss, const char* what, int epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw DivergenceError(std::string(what) + ": non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(batch));
}

}  // namespace

double reconstruction_loss(const Encoder& enc, const Decoder& dec, const Matrix& batch) {
  const Matrix y = dec.decode_batch(enc.encode_batch(batch));
  return (y - batch).squaredNorm() / static_cast<double>(batch.size());
}

double autoencoder_gradients(const Encoder& enc, const Decoder& dec, const Matrix& batch, std::vector<Matrix>& grads) {
  const auto tape_e = enc.net().forward_tape(batch);
  const auto tape_d = dec.net().forward_tape(tape_e.back());
  const Matrix diff = tape_d.back() - batch;
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<Matrix> ge, gd;
  const Matrix dz = dec.net().backward(tape_d, 2.0 * scale * diff, gd);
  enc.net().backward(tape_e, dz, ge);
  grads = std::move(ge);
  for (auto& g : gd) grads.push_back(std::move(g));
  return diff.squaredNorm() * scale;
}

std::array<double, 5> per_row_rmse(const Encoder& enc, const Decoder& dec, std::span<const FeatureWindow> windows) {
  const Matrix x = stack_windows(windows);
  const Matrix y = dec.decode_batch(enc.encode_batch(x));
  std::array<double, 5> out{};
  for (int r = 0; r < kFeatureRows; ++r)
    out[static_cast<std::size_t>(r)] = std::sqrt((y.row(r) - x.row(r)).squaredNorm() / static_cast<double>(x.cols()));
  return out;
}

AutoencoderResult train_autoencoder(std::span<const FeatureWindow> windows, const AutoencoderConfig& config,
                                    const TrainConfig& train, const ProgressFn& progress) {
  if (windows.empty()) throw InvalidArgument("train_autoencoder: empty dataset");
  for (const auto& w : windows)
    if (w.cols() != config.window) throw InvalidArgument("train_autoencoder: window length differs from config");
  if (train.batch_size < 1 || train.epochs < 1) throw InvalidArgument("train_autoencoder: bad batch size or epochs");

  AutoencoderResult result;
  result.split = split_indices(windows.size(), train.train_fraction, train.seed);
  Encoder enc(config, derive_seed(train.seed, 2));
  Decoder dec(config, derive_seed(train.seed, 3));
  std::vector<Matrix*> params = enc.net().params();
  for (Matrix* p : dec.net().params()) params.push_back(p);
  Adam adam(train, params);
  std::mt19937_64 rng(derive_seed(train.seed, 4));

  const Matrix val = stack_windows(windows, result.split.validation);
  std::vector<std::size_t> order = result.split.train;
  double best = std::numeric_limits<double>::infinity();
  Encoder best_enc = enc;
  Decoder best_dec = dec;
  std::vector<Matrix> grads;
  const auto bs = static_cast<std::size_t>(train.batch_size);
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    shuffle(order, rng);
    double sum = 0.0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += bs, ++batch) {
      const std::size_t len = std::min(bs, order.size() - start);
      const Matrix x = stack_windows(windows, std::span<const std::size_t>(order.data() + start, len));
      const double loss = autoencoder_gradients(enc, dec, x, grads);
      check_finite(loss, "train_autoencoder", epoch, batch);
      sum += loss * static_cast<double>(len);
      adam.step(params, grads);
    }
    const double train_loss = sum / static_cast<double>(order.size());
    const double val_loss = reconstruction_loss(enc, dec, val);
    check_finite(val_loss, "train_autoencoder (validation)", epoch, 0);
    if (val_loss < best) {
      best = val_loss;
      best_enc = enc;
      best_dec = dec;
      result.best_epoch = epoch;
    }
    result.history.push_back({epoch, train_loss, val_loss, best});
    if (progress) progress(epoch, train_loss, val_loss);
  }
  result.encoder = std::move(best_enc);
  result.decoder = std::move(best_dec);
  std::vector<FeatureWindow> val_windows;
  for (std::size_t i : result.split.validation) val_windows.push_back(windows[i]);
  result.val_rmse = per_row_rmse(result.encoder, result.decoder, val_windows);
  return result;
}

double head_gradients(const ClassifierHead& head, const Matrix& latents, std::span<const Behaviour> labels,
                      Matrix& grad_w, Vector& grad_b) {
  if (latents.cols() != static_cast<Eigen::Index>(labels.size()) || latents.rows() != head.weights.cols())
    throw InvalidArgument("head_gradients: shape mismatch");
  Matrix logits = head.weights * latents;
  logits.colwise() += head.bias;
  const auto n = static_cast<double>(labels.size());
  double loss = 0.0;
  Matrix d(3, latents.cols());
  for (Eigen::Index j = 0; j < latents.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const Eigen::Vector3d e = (logits.col(j).array() - m).exp();
    const double sum = e.sum();
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(j)]);
    loss -= (logits(y, j) - m) - std::log(sum);
    d.col(j) = e / sum;
    d(y, j) -= 1.0;
  }
  d /= n;
  grad_w = d * latents.transpose();
  grad_b = d.rowwise().sum();
  return loss / n;
}

ClassifierMetrics evaluate_head(const ClassifierHead& head, const Matrix& latents, std::span<const Behaviour> labels) {
  ClassifierMetrics m;
  std::array<int, 3> total{};
  int correct = 0;
  for (Eigen::Index j = 0; j < latents.cols(); ++j) {
    const auto truth = static_cast<std::size_t>(labels[static_cast<std::size_t>(j)]);
    const auto pred = static_cast<std::size_t>(head.classify(latents.col(j)).argmax());
    ++m.confusion[truth][pred];
    ++total[truth];
    if (truth == pred) ++correct;
  }
  for (std::size_t c = 0; c < 3; ++c)
    m.class_accuracy[c] = total[c] > 0 ? static_cast<double>(m.confusion[c][c]) / total[c] : 0.0;
  m.accuracy = latents.cols() > 0 ? static_cast<double>(correct) / static_cast<double>(latents.cols()) : 0.0;
  return m;
}

ClassifierResult train_head(const Matrix& latents, std::span<const Behaviour> labels, const TrainConfig& train,
                            const ProgressFn& progress) {
  if (latents.cols() == 0) throw InvalidArgument("train_head: empty dataset");
  if (latents.cols() != static_cast<Eigen::Index>(labels.size())) throw InvalidArgument("train_head: label count mismatch");
  ClassifierResult result;
  result.split = split_indices(labels.size(), train.train_fraction, train.seed);
  auto gather = [&](const std::vector<std::size_t>& idx, Matrix& z, std::vector<Behaviour>& y) {
    z.resize(latents.rows(), static_cast<Eigen::Index>(idx.size()));
    y.clear();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      z.col(static_cast<Eigen::Index>(i)) = latents.col(static_cast<Eigen::Index>(idx[i]));
      y.push_back(labels[idx[i]]);
    }
  };
  Matrix val_z;
  std::vector<Behaviour> val_y;
  gather(result.split.validation, val_z, val_y);

  std::mt19937_64 init(derive_seed(train.seed, 5));
  Matrix w(3, latents.rows());
  glorot(w, static_cast<double>(latents.rows()), 3.0, init);
  Matrix b = Matrix::Zero(3, 1);
  const std::vector<Matrix*> params{&w, &b};
  Adam adam(train, params);
  std::mt19937_64 rng(derive_seed(train.seed, 6));
  auto as_head = [&] {
    ClassifierHead h;
    h.weights = w;
    h.bias = b.col(0);
    return h;
  };

  std::vector<std::size_t> order = result.split.train;
  double best = std::numeric_limits<double>::infinity();
  ClassifierHead best_head = as_head();
  const auto bs = static_cast<std::size_t>(std::max(1, train.batch_size));
  Matrix z;
  std::vector<Behaviour> y;
  Matrix gw;
  Vector gb;
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    shuffle(order, rng);
    double sum = 0.0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += bs, ++batch) {
      const std::size_t len = std::min(bs, order.size() - start);
      gather(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                      order.begin() + static_cast<std::ptrdiff_t>(start + len)),
             z, y);
      const double loss = head_gradients(as_head(), z, y, gw, gb);
      check_finite(loss, "train_classifier", epoch, batch);
      sum += loss * static_cast<double>(len);
      adam.step(params, {gw, Matrix(gb)});
    }
    const ClassifierHead head = as_head();
    Matrix vgw;
    Vector vgb;
    const double val_loss = head_gradients(head, val_z, val_y, vgw, vgb);
    check_finite(val_loss, "train_classifier (validation)", epoch, 0);
    const auto metrics = evaluate_head(head, val_z, val_y);
    if (val_loss < best) {
      best = val_loss;
      best_head = head;
      result.best_epoch = epoch;
    }
    const double train_loss = sum / static_cast<double>(order.size());
    result.history.push_back({epoch, train_loss, val_loss, metrics.class_accuracy, metrics.accuracy});
    if (progress) progress(epoch, train_loss, val_loss);
  }
  result.head = best_head;
  result.validation = evaluate_head(result.head, val_z, val_y);
  return result;
}

ClassifierResult train_classifier(const Encoder& encoder, std::span<const FeatureWindow> windows,
                                  std::span<const Behaviour> labels, const TrainConfig& train,
                                  const ProgressFn& progress) {
  if (windows.size() != labels.size()) throw InvalidArgument("train_classifier: label count mismatch");
  if (windows.empty()) throw InvalidArgument("train_classifier: empty dataset");
  const Matrix latents = encoder.encode_batch(stack_windows(windows));
  return train_head(latents, labels, train, progress);
}

// Model files.

namespace {

constexpr char kMagic[8] = {'S', 'N', 'A', 'V', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kKindAutoencoder = 1;
constexpr std::uint32_t kKindHead = 2;

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_params(const std::vector<const Matrix*>& params) {
    for (const Matrix* m : params) buf_.append(reinterpret_cast<const char*>(m->data()), sizeof(double) * static_cast<std::size_t>(m->size()));
  }
  void save(const std::filesystem::path& path) {
    const std::uint64_t sum = fnv1a(buf_.data(), buf_.size());
    put(sum);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("model: cannot write " + path.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw FormatError("model: write failed for " + path.string());
  }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : name_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("model: cannot open " + name_);
    std::stringstream ss;
    ss << in.rdbuf();
    buf_ = ss.str();
    if (buf_.size() < sizeof(kMagic) + sizeof(std::uint64_t)) throw FormatError("model: truncated file " + name_);
    if (std::memcmp(buf_.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("model: not a model file: " + name_);
    std::uint64_t stored;
    std::memcpy(&stored, buf_.data() + buf_.size() - sizeof(stored), sizeof(stored));
    end_ = buf_.size() - sizeof(stored);
    pos_ = sizeof(kMagic);
    if (fnv1a(buf_.data(), end_) != stored) throw FormatError("model: corrupt or truncated file " + name_);
  }
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > end_) throw FormatError("model: truncated file " + name_);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_params(const std::vector<Matrix*>& params) {
    for (Matrix* m : params) {
      const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m->size());
      if (pos_ + bytes > end_) throw FormatError("model: truncated parameters in " + name_);
      std::memcpy(m->data(), buf_.data() + pos_, bytes);
      pos_ += bytes;
    }
  }
  void finish() const {
    if (pos_ != end_) throw FormatError("model: trailing bytes in " + name_);
  }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::string buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

void write_header(Writer& w, std::uint32_t kind) {
  for (char c : kMagic) w.put(c);
  w.put(kModelVersion);
  w.put(kind);
}

void read_header(Reader& r, std::uint32_t kind) {
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion)
    throw FormatError("model: unsupported format version " + std::to_string(version) + " in " + r.name());
  if (r.get<std::uint32_t>() != kind) throw FormatError("model: wrong model kind in " + r.name());
}

}  // namespace

void save_autoencoder(const std::filesystem::path& path, const Encoder& enc, const Decoder& dec) {
  if (!(enc.config() == dec.config())) throw InvalidArgument("save_autoencoder: encoder and decoder configs differ");
  const auto& c = enc.config();
  Writer w;
  write_header(w, kKindAutoencoder);
  for (int v : {c.window, c.conv_channels[0], c.conv_channels[1], c.conv_channels[2], c.kernel, c.hidden[0], c.hidden[1],
                c.latent, c.activation == Activation::ReLU ? 0 : 1})
    w.put(static_cast<std::int32_t>(v));
  w.put(static_cast<std::uint64_t>(enc.net().parameter_count() + dec.net().parameter_count()));
  w.put_params(enc.net().params());
  w.put_params(dec.net().params());
  w.save(path);
}

std::pair<Encoder, Decoder> load_autoencoder(const std::filesystem::path& path) {
  Reader r(path);
  read_header(r, kKindAutoencoder);
  AutoencoderConfig c;
  c.window = r.get<std::int32_t>();
  for (auto& ch : c.conv_channels) ch = r.get<std::int32_t>();
  c.kernel = r.get<std::int32_t>();
  for (auto& h : c.hidden) h = r.get<std::int32_t>();
  c.latent = r.get<std::int32_t>();
  c.activation = r.get<std::int32_t>() == 0 ? Activation::ReLU : Activation::Identity;
  Encoder enc;
  Decoder dec;
  try {
    enc = Encoder(c, 0);
    dec = Decoder(c, 0);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model: bad architecture in ") + r.name() + ": " + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  if (count != enc.net().parameter_count() + dec.net().parameter_count())
    throw FormatError("model: parameter count does not match architecture in " + r.name());
  r.get_params(enc.net().params());
  r.get_params(dec.net().params());
  r.finish();
  return {std::move(enc), std::move(dec)};
}

void save_head(const std::filesystem::path& path, const ClassifierHead& head) {
  Writer w;
  write_header(w, kKindHead);
  w.put(static_cast<std::int32_t>(head.weights.cols()));
  const Matrix b = head.bias;
  w.put_params({&head.weights, &b});
  w.save(path);
}

ClassifierHead load_head(const std::filesystem::path& path) {
  Reader r(path);
  read_header(r, kKindHead);
  const auto latent = r.get<std::int32_t>();
  if (latent < 1 || latent > 4096) throw FormatError("model: bad latent size in " + r.name());
  ClassifierHead h;
  h.weights = Matrix::Zero(3, latent);
  Matrix b = Matrix::Zero(3, 1);
  r.get_params({&h.weights, &b});
  r.finish();
  h.bias = b.col(0);
  return h;
}

std::uint64_t fingerprint(const Encoder& enc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Matrix* p : enc.net().params()) h = fnv1a(p->data(), sizeof(double) * static_cast<std::size_t>(p->size()), h);
  return h;
}

std::uint64_t fingerprint(const ClassifierHead& head) {
  std::uint64_t h = fnv1a(head.weights.data(), sizeof(double) * static_cast<std::size_t>(head.weights.size()));
  return fnv1a(head.bias.data(), sizeof(double) * static_cast<std::size_t>(head.bias.size()), h);
}

void write_autoencoder_metrics_csv(const std::filesystem::path& path, const std::vector<AutoencoderEpoch>& history) {
  std::ofstream out(path);
  if (!out) throw FormatError("metrics: cannot write " + path.string());
  out.precision(17);
  out << "epoch,train_loss,val_loss,best_val_loss\n";
  for (const auto& e : history) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.best_val_loss << '\n';
}

void write_classifier_metrics_csv(const std::filesystem::path& path, const std::vector<ClassifierEpoch>& history) {
  std::ofstream out(path);
  if (!out) throw FormatError("metrics: cannot write " + path.string());
  out.precision(17);
  out << "epoch,train_loss,val_loss,val_acc_left,val_acc_right,val_acc_straight,val_acc\n";
  for (const auto& e : history)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_class_accuracy[0] << ','
        << e.val_class_accuracy[1] << ',' << e.val_class_accuracy[2] << ',' << e.val_accuracy << '\n';
}

}  // namespace sharednav
