#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ipp {

/// Dueling Q-network topology: three strided 3x3 conv stages, a fully
/// connected trunk, then value and advantage heads.
struct QNetworkSpec {
  int channels = 5;
  int height = 58;
  int width = 38;
  std::array<int, 3> conv{16, 32, 64};
  int kernel = 3;
  int stride = 2;
  int padding = 1;
  int fc_width = 256;
  int fc_layers = 3;
  int actions = 8;

  int input_size() const noexcept { return channels * height * width; }
  /// Spatial size after conv stage `i` (0-based), as {rows, cols}.
  std::array<int, 2> conv_output(int i) const;
  int flat_size() const;
  std::size_t parameter_count() const;
  /// FNV-1a over the topology fields; stored in checkpoints.
  std::uint64_t hash() const;
};

/// Forward/backward over a batch of observations. Parameters live in one flat
/// vector: conv (W, b) x3, fc (W, b) x fc_layers, value (W, b), advantage (W, b).
/// Weight matrices are row-major by output unit.
template <typename Scalar>
class QNetwork {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit QNetwork(QNetworkSpec spec = {});

  const QNetworkSpec& spec() const noexcept { return spec_; }
  std::span<Scalar> params() noexcept { return params_; }
  std::span<const Scalar> params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init(std::mt19937_64& rng);

  /// `input` holds `batch` observations back to back (each channels x H x W).
  /// Returns Q as actions x batch; `value` (1 x batch) is filled when given.
  /// Activations are cached for a following backward().
  const Matrix& forward(std::span<const Scalar> input, int batch, Matrix* value = nullptr);

  /// Gradient of a loss w.r.t. the parameters given dLoss/dQ (actions x batch)
  /// from the most recent forward(). Overwrites `grad`.
  void backward(const Matrix& dq, std::span<Scalar> grad);

 private:
  struct ConvShape {
    int cin, hin, win, cout, hout, wout;
    std::size_t w_off, b_off;
    std::vector<int> gather;  // per-sample source offset of each im2col entry; cin*hin*win marks padding
  };
  struct DenseShape {
    int in, out;
    std::size_t w_off, b_off;
  };

  // im2col / col2im over samples [b0, b0 + nb); the column buffer holds only that chunk.
  void im2col(const Scalar* src, const ConvShape& s, int b0, int nb, Matrix& cols) const;
  void col2im(const Matrix& dcols, const ConvShape& s, int b0, int nb, Matrix& dsrc) const;
  int chunk(const ConvShape& s) const;

  QNetworkSpec spec_;
  std::vector<ConvShape> conv_;
  std::vector<DenseShape> fc_;
  DenseShape value_{}, adv_{};
  std::vector<Scalar> params_;

  // Forward cache.
  int batch_ = 0;
  std::vector<Scalar> input_;
  Matrix cols_, dcols_;
  std::vector<Matrix> conv_out_;  // post-ReLU, C x (B*H*W)
  Matrix flat_;  // flat_size x B
  std::vector<Matrix> fc_out_;  // post-ReLU
  Matrix v_, a_, q_;
};

extern template class QNetwork<float>;
extern template class QNetwork<double>;

/// Adam on a flat parameter vector.
struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n, AdamConfig cfg = {});
  void step(std::span<float> params, std::span<const float> grad);
  std::uint64_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<float> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace ipp
