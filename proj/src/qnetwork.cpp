#include "ipp/qnetwork.hpp"

#include <algorithm>
#include <cmath>

#include "ipp/errors.hpp"

namespace ipp {

std::array<int, 2> QNetworkSpec::conv_output(int i) const {
  int h = height, w = width;
  for (int k = 0; k <= i; ++k) {
    h = (h + 2 * padding - kernel) / stride + 1;
    w = (w + 2 * padding - kernel) / stride + 1;
  }
  return {h, w};
}

int QNetworkSpec::flat_size() const {
  const auto [h, w] = conv_output(2);
  return conv[2] * h * w;
}

std::size_t QNetworkSpec::parameter_count() const {
  std::size_t n = 0;
  int cin = channels;
  for (int c : conv) {
    n += static_cast<std::size_t>(c) * cin * kernel * kernel + c;
    cin = c;
  }
  int in = flat_size();
  for (int i = 0; i < fc_layers; ++i) {
    n += static_cast<std::size_t>(fc_width) * in + fc_width;
    in = fc_width;
  }
  n += static_cast<std::size_t>(in) + 1;
  n += static_cast<std::size_t>(actions) * in + actions;
  return n;
}

std::uint64_t QNetworkSpec::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](std::int64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<std::uint64_t>(v >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  for (int v : {channels, height, width, conv[0], conv[1], conv[2], kernel, stride, padding, fc_width, fc_layers, actions})
    mix(v);
  return h;
}

template <typename Scalar>
QNetwork<Scalar>::QNetwork(QNetworkSpec spec) : spec_(spec) {
  if (spec_.channels < 1 || spec_.height < 1 || spec_.width < 1 || spec_.kernel < 1 || spec_.stride < 1 ||
      spec_.padding < 0 || spec_.fc_width < 1 || spec_.fc_layers < 1 || spec_.actions < 1)
    throw ConfigError("invalid network spec");
  std::size_t off = 0;
  int cin = spec_.channels, h = spec_.height, w = spec_.width;
  for (int i = 0; i < 3; ++i) {
    const auto [ho, wo] = spec_.conv_output(i);
    if (ho < 1 || wo < 1) throw ConfigError("input too small for the conv stack");
    ConvShape s{cin, h, w, spec_.conv[i], ho, wo, 0, 0, {}};
    // The network input is channel-planar; later stages are channel-fastest.
    const bool planar = i == 0;
    const int k = spec_.kernel;
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int c = 0; c < cin; ++c)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int y = oy * spec_.stride - spec_.padding + ky;
              const int x = ox * spec_.stride - spec_.padding + kx;
              if (y < 0 || y >= h || x < 0 || x >= w)
                s.gather.push_back(cin * h * w);
              else
                s.gather.push_back(planar ? (c * h + y) * w + x : (y * w + x) * cin + c);
            }
    s.w_off = off;
    off += static_cast<std::size_t>(s.cout) * cin * spec_.kernel * spec_.kernel;
    s.b_off = off;
    off += s.cout;
    conv_.push_back(s);
    cin = s.cout;
    h = ho;
    w = wo;
  }
  int in = spec_.flat_size();
  auto dense = [&](int out) {
    DenseShape d{in, out, off, 0};
    off += static_cast<std::size_t>(in) * out;
    d.b_off = off;
    off += out;
    return d;
  };
  for (int i = 0; i < spec_.fc_layers; ++i) {
    fc_.push_back(dense(spec_.fc_width));
    in = spec_.fc_width;
  }
  value_ = dense(1);
  adv_ = dense(spec_.actions);
  params_.assign(off, Scalar(0));
}

template <typename Scalar>
void QNetwork<Scalar>::init(std::mt19937_64& rng) {
  auto fill = [&](std::size_t w_off, std::size_t b_off, std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = w_off; i < b_off + count; ++i) params_[i] = static_cast<Scalar>(u(rng));
  };
  const int kk = spec_.kernel * spec_.kernel;
  for (const auto& s : conv_) fill(s.w_off, s.b_off, s.cout, s.cin * kk);
  for (const auto& d : fc_) fill(d.w_off, d.b_off, d.out, d.in);
  fill(value_.w_off, value_.b_off, 1, value_.in);
  fill(adv_.w_off, adv_.b_off, adv_.out, adv_.in);
}

template <typename Scalar>
int QNetwork<Scalar>::chunk(const ConvShape& s) const {
  constexpr std::size_t kChunkBytes = 512 * 1024;
  return static_cast<int>(std::max<std::size_t>(1, kChunkBytes / (s.gather.size() * sizeof(Scalar))));
}

template <typename Scalar>
void QNetwork<Scalar>::im2col(const Scalar* src, const ConvShape& s, int b0, int nb, Matrix& cols) const {
  const std::size_t per = s.gather.size();
  const std::size_t bs = static_cast<std::size_t>(s.hin) * s.win * s.cin;
  cols.resize(static_cast<Eigen::Index>(s.cin) * spec_.kernel * spec_.kernel,
              static_cast<Eigen::Index>(nb) * s.hout * s.wout);
  // Padding entries index one past the sample, which the scratch copy holds as zero.
  thread_local std::vector<Scalar> scratch;
  scratch.resize(bs + 1);
  scratch[bs] = Scalar(0);
  Scalar* out = cols.data();
  const int* g = s.gather.data();
  for (int b = b0; b < b0 + nb; ++b, out += per) {
    std::copy_n(src + b * bs, bs, scratch.data());
    const Scalar* base = scratch.data();
    for (std::size_t i = 0; i < per; ++i) out[i] = base[g[i]];
  }
}

template <typename Scalar>
void QNetwork<Scalar>::col2im(const Matrix& dcols, const ConvShape& s, int b0, int nb, Matrix& dsrc) const {
  const std::size_t per = s.gather.size();
  const std::size_t bs = static_cast<std::size_t>(s.hin) * s.win * s.cin;
  const Scalar* in = dcols.data();
  const int* g = s.gather.data();
  thread_local std::vector<Scalar> scratch;
  scratch.assign(bs + 1, Scalar(0));
  for (int b = b0; b < b0 + nb; ++b, in += per) {
    Scalar* base = dsrc.data() + b * bs;
    for (std::size_t i = 0; i < per; ++i) scratch[g[i]] += in[i];
    for (std::size_t i = 0; i < bs; ++i) base[i] += scratch[i];
    std::fill(scratch.begin(), scratch.end(), Scalar(0));
  }
}

template <typename Scalar>
const typename QNetwork<Scalar>::Matrix& QNetwork<Scalar>::forward(std::span<const Scalar> input, int batch,
                                                                   Matrix* value) {
  if (batch < 1 || input.size() != static_cast<std::size_t>(batch) * spec_.input_size())
    throw ContractError("observation batch does not match the network input shape");
  batch_ = batch;
  input_.assign(input.begin(), input.end());
  conv_out_.resize(conv_.size());
  const Scalar* src = input_.data();
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const auto& s = conv_[i];
    const Eigen::Index pix = static_cast<Eigen::Index>(s.hout) * s.wout;
    Eigen::Map<const Matrix> wt(params_.data() + s.w_off, static_cast<Eigen::Index>(s.gather.size()) / pix, s.cout);
    Eigen::Map<const Vector> bias(params_.data() + s.b_off, s.cout);
    conv_out_[i].resize(s.cout, batch * pix);
    const int cb = chunk(s);
    for (int b0 = 0; b0 < batch; b0 += cb) {
      const int nb = std::min(cb, batch - b0);
      im2col(src, s, b0, nb, cols_);
      auto out = conv_out_[i].middleCols(b0 * pix, nb * pix);
      out.noalias() = wt.transpose() * cols_;
      out.colwise() += bias;
      out = out.cwiseMax(Scalar(0));
    }
    src = conv_out_[i].data();
  }
  // Flatten: each sample's conv output is already contiguous (channel fastest).
  flat_ = Eigen::Map<const Matrix>(conv_out_.back().data(), spec_.flat_size(), batch);

  fc_out_.resize(fc_.size());
  const Matrix* x = &flat_;
  for (std::size_t i = 0; i < fc_.size(); ++i) {
    const auto& d = fc_[i];
    Eigen::Map<const Matrix> wt(params_.data() + d.w_off, d.in, d.out);
    Eigen::Map<const Vector> b(params_.data() + d.b_off, d.out);
    fc_out_[i].noalias() = wt.transpose() * *x;
    fc_out_[i].colwise() += b;
    fc_out_[i] = fc_out_[i].cwiseMax(Scalar(0));
    x = &fc_out_[i];
  }
  auto head = [&](const DenseShape& d, Matrix& out) {
    Eigen::Map<const Matrix> wt(params_.data() + d.w_off, d.in, d.out);
    Eigen::Map<const Vector> b(params_.data() + d.b_off, d.out);
    out.noalias() = wt.transpose() * *x;
    out.colwise() += b;
  };
  head(value_, v_);
  head(adv_, a_);
  const auto mean_a = a_.colwise().mean();
  q_ = a_;
  q_.rowwise() += v_.row(0) - mean_a;
  if (value) *value = v_;
  return q_;
}

template <typename Scalar>
void QNetwork<Scalar>::backward(const Matrix& dq, std::span<Scalar> grad) {
  if (batch_ == 0) throw ContractError("backward without a forward pass");
  if (dq.rows() != spec_.actions || dq.cols() != batch_) throw ContractError("dQ shape does not match the last forward");
  if (grad.size() != params_.size()) throw ContractError("gradient buffer has the wrong size");
  std::fill(grad.begin(), grad.end(), Scalar(0));

  auto dense_back = [&](const DenseShape& d, const Matrix& x, const Matrix& dy, Matrix* dx) {
    Eigen::Map<Matrix> gw(grad.data() + d.w_off, d.in, d.out);
    Eigen::Map<Vector> gb(grad.data() + d.b_off, d.out);
    gw.noalias() = x * dy.transpose();
    gb = dy.rowwise().sum();
    if (dx) {
      Eigen::Map<const Matrix> wt(params_.data() + d.w_off, d.in, d.out);
      dx->noalias() += wt * dy;
    }
  };

  const Matrix dv = dq.colwise().sum();
  Matrix da = dq;
  da.rowwise() -= dq.colwise().mean();

  const Matrix& top = fc_out_.back();
  Matrix dx = Matrix::Zero(top.rows(), top.cols());
  dense_back(value_, top, dv, &dx);
  dense_back(adv_, top, da, &dx);

  for (std::size_t i = fc_.size(); i-- > 0;) {
    dx = (fc_out_[i].array() > Scalar(0)).select(dx, Scalar(0));
    const Matrix& in = i == 0 ? flat_ : fc_out_[i - 1];
    Matrix dprev = Matrix::Zero(in.rows(), in.cols());
    dense_back(fc_[i], in, dx, &dprev);
    dx = std::move(dprev);
  }

  // dx is flat_size x B; view it as the last conv output's layout.
  Matrix dout = Eigen::Map<const Matrix>(dx.data(), conv_.back().cout,
                                         static_cast<Eigen::Index>(batch_) * conv_.back().hout * conv_.back().wout);
  for (std::size_t i = conv_.size(); i-- > 0;) {
    const auto& s = conv_[i];
    const Eigen::Index pix = static_cast<Eigen::Index>(s.hout) * s.wout;
    const Eigen::Index rows = static_cast<Eigen::Index>(s.gather.size()) / pix;
    dout = (conv_out_[i].array() > Scalar(0)).select(dout, Scalar(0));
    Eigen::Map<Matrix> gw(grad.data() + s.w_off, rows, s.cout);
    Eigen::Map<Vector> gb(grad.data() + s.b_off, s.cout);
    Eigen::Map<const Matrix> wt(params_.data() + s.w_off, rows, s.cout);
    gb = dout.rowwise().sum();
    const Scalar* src = i == 0 ? input_.data() : conv_out_[i - 1].data();
    Matrix dsrc;
    if (i > 0) dsrc.setZero(s.cin, static_cast<Eigen::Index>(batch_) * s.hin * s.win);
    const int cb = chunk(s);
    for (int b0 = 0; b0 < batch_; b0 += cb) {
      const int nb = std::min(cb, batch_ - b0);
      const auto dblk = dout.middleCols(b0 * pix, nb * pix);
      im2col(src, s, b0, nb, cols_);
      gw.noalias() += cols_ * dblk.transpose();
      if (i == 0) continue;
      dcols_.noalias() = wt * dblk;
      col2im(dcols_, s, b0, nb, dsrc);
    }
    if (i == 0) break;
    dout = std::move(dsrc);
  }
}

template class QNetwork<float>;
template class QNetwork<double>;

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0f), v_(n, 0.0f) {}

void Adam::step(std::span<float> params, std::span<const float> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ContractError("Adam state size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
  const float step = static_cast<float>(cfg_.lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(cfg_.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0f - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0f - b2) * grad[i] * grad[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps);
  }
}

}  // namespace ipp
