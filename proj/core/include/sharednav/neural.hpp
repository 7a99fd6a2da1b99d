#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sharednav/features.hpp"

namespace sharednav {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Behaviour : int { Left = 0, Right = 1, Straight = 2 };
inline constexpr int kBehaviourCount = 3;
inline constexpr std::array<Behaviour, 3> kBehaviours{Behaviour::Left, Behaviour::Right, Behaviour::Straight};

const char* behaviour_name(Behaviour b);
/// Parses "Left", "Right" or "Straight"; throws InvalidArgument otherwise.
Behaviour parse_behaviour(const std::string& name);

/// Softmax output over {Left, Right, Straight}.
struct ConfidenceVector {
  std::array<double, 3> p{1.0 / 3, 1.0 / 3, 1.0 / 3};

  double operator[](Behaviour b) const { return p[static_cast<std::size_t>(b)]; }
  Behaviour argmax() const;
};

ConfidenceVector softmax(const std::array<double, 3>& logits);

enum class Activation { ReLU, Identity };

// Layers operate on batches. Convolution stages hold a (channels x n*B) matrix whose
// column b*n + t is time step t of sample b; dense stages hold (features x B). With
// column-major storage the flatten between the two is a pure reshape, and the
// flattened feature index is t * channels + c.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix forward(const Matrix& x) const = 0;
  /// Given the layer's input x, output y and dL/dy, returns dL/dx and adds parameter
  /// gradients to `grads` (one entry per parameter block, same order as params()).
  virtual Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy, std::span<Matrix> grads) const = 0;
  virtual std::vector<Matrix*> params() { return {}; }
  virtual std::vector<const Matrix*> params() const { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Matrix forward(const Matrix& x) const;
  /// Forward pass keeping every intermediate activation (size = layers + 1).
  std::vector<Matrix> forward_tape(const Matrix& x) const;
  /// Backpropagates dL/d(output); returns dL/d(input) and fills `grads` (zeroed here).
  Matrix backward(const std::vector<Matrix>& tape, const Matrix& dy, std::vector<Matrix>& grads) const;

  std::vector<Matrix*> params();
  std::vector<const Matrix*> params() const;
  std::size_t parameter_count() const;
  /// Flat access across all parameter blocks (column-major inside each block).
  double& parameter(std::size_t i);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct AutoencoderConfig {
  int window = 12;  // samples per window (n)
  std::array<int, 3> conv_channels{16, 32, 32};
  int kernel = 3;
  std::array<int, 2> hidden{64, 32};
  int latent = 5;
  Activation activation = Activation::ReLU;

  friend bool operator==(const AutoencoderConfig&, const AutoencoderConfig&) = default;
};

/// Stacks windows (5 x n each) into a (5 x n*B) batch matrix.
Matrix stack_windows(std::span<const FeatureWindow> windows, std::span<const std::size_t> order = {});

class Encoder {
 public:
  Encoder() = default;
  /// Glorot-uniform weights drawn from `seed`, zero biases.
  Encoder(const AutoencoderConfig& config, std::uint64_t seed);

  const AutoencoderConfig& config() const { return config_; }
  Sequential& net() { return net_; }
  const Sequential& net() const { return net_; }

  /// Latent vector of one window; throws InvalidArgument on shape mismatch.
  Vector encode(const FeatureWindow& w) const;
  /// (5 x n*B) batch to (latent x B).
  Matrix encode_batch(const Matrix& x) const;

 private:
  AutoencoderConfig config_;
  Sequential net_;
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const AutoencoderConfig& config, std::uint64_t seed);

  const AutoencoderConfig& config() const { return config_; }
  Sequential& net() { return net_; }
  const Sequential& net() const { return net_; }

  FeatureWindow decode(const Vector& z) const;
  /// (latent x B) to (5 x n*B).
  Matrix decode_batch(const Matrix& z) const;

 private:
  AutoencoderConfig config_;
  Sequential net_;
};

/// Single fully-connected layer latent -> 3 logits.
struct ClassifierHead {
  Matrix weights = Matrix::Zero(3, 5);
  Vector bias = Vector::Zero(3);

  std::array<double, 3> logits(const Vector& z) const;
  ConfidenceVector classify(const Vector& z) const;
  std::size_t parameter_count() const { return static_cast<std::size_t>(weights.size() + bias.size()); }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 64;
  int epochs = 300;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;  // initialisation, split and shuffling
};

/// Deterministic train/validation split: a seeded permutation, first fraction for training.
/// The validation part is never empty; with a single item both parts hold it.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
Split split_indices(std::size_t count, double train_fraction, std::uint64_t seed);

/// Adam state for a list of parameter blocks.
class Adam {
 public:
  Adam(const TrainConfig& config, const std::vector<Matrix*>& params);
  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads);

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct AutoencoderEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;  // validation loss of the checkpoint kept so far
};

struct AutoencoderResult {
  Encoder encoder;
  Decoder decoder;
  std::vector<AutoencoderEpoch> history;
  int best_epoch = 0;
  std::array<double, 5> val_rmse{};  // per feature row, best checkpoint
  Split split;
};

using ProgressFn = std::function<void(int epoch, double train_loss, double val_loss)>;

/// Mean squared reconstruction error over all entries.
double reconstruction_loss(const Encoder& enc, const Decoder& dec, const Matrix& batch);
/// Loss and gradients for both networks (encoder blocks first, then decoder blocks).
double autoencoder_gradients(const Encoder& enc, const Decoder& dec, const Matrix& batch, std::vector<Matrix>& grads);
std::array<double, 5> per_row_rmse(const Encoder& enc, const Decoder& dec, std::span<const FeatureWindow> windows);

/// Adam on the mean squared reconstruction error, keeping the best-validation checkpoint.
/// Throws DivergenceError when a loss becomes non-finite.
AutoencoderResult train_autoencoder(std::span<const FeatureWindow> windows, const AutoencoderConfig& config,
                                    const TrainConfig& train, const ProgressFn& progress = {});

struct ClassifierEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::array<double, 3> val_class_accuracy{};
  double val_accuracy = 0.0;
};

struct ClassifierMetrics {
  std::array<double, 3> class_accuracy{};  // per true class
  double accuracy = 0.0;                   // fraction of all samples classified correctly
  std::array<std::array<int, 3>, 3> confusion{};  // [true][predicted]
};

struct ClassifierResult {
  ClassifierHead head;
  std::vector<ClassifierEpoch> history;
  int best_epoch = 0;
  ClassifierMetrics validation;
  Split split;
};

/// Mean cross-entropy of the head over latent columns and its gradients (weights, bias).
double head_gradients(const ClassifierHead& head, const Matrix& latents, std::span<const Behaviour> labels,
                      Matrix& grad_w, Vector& grad_b);
ClassifierMetrics evaluate_head(const ClassifierHead& head, const Matrix& latents, std::span<const Behaviour> labels);

/// Trains only the head on fixed latents (one column per sample).
ClassifierResult train_head(const Matrix& latents, std::span<const Behaviour> labels, const TrainConfig& train,
                            const ProgressFn& progress = {});
/// Encodes the windows with the frozen encoder, then trains the head.
ClassifierResult train_classifier(const Encoder& encoder, std::span<const FeatureWindow> windows,
                                  std::span<const Behaviour> labels, const TrainConfig& train,
                                  const ProgressFn& progress = {});

// Model files: little-endian binary with a magic tag, format version and architecture.

void save_autoencoder(const std::filesystem::path& path, const Encoder& enc, const Decoder& dec);
std::pair<Encoder, Decoder> load_autoencoder(const std::filesystem::path& path);
void save_head(const std::filesystem::path& path, const ClassifierHead& head);
ClassifierHead load_head(const std::filesystem::path& path);

/// FNV-1a hash over the raw parameter bytes; identifies a trained model.
std::uint64_t fingerprint(const Encoder& enc);
std::uint64_t fingerprint(const ClassifierHead& head);

void write_autoencoder_metrics_csv(const std::filesystem::path& path, const std::vector<AutoencoderEpoch>& history);
void write_classifier_metrics_csv(const std::filesystem::path& path, const std::vector<ClassifierEpoch>& history);

}  // namespace sharednav
