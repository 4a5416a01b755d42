#include "wss/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>
#include <string>

namespace wss {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using FlatBatch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::span<const double> view(const ParamArray& p) {
  return {p.values.data(), static_cast<std::size_t>(p.values.size())};
}

std::span<double> view(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::size_t kernel_index(int ky, int kx, std::size_t ci, std::size_t co, std::size_t cin, std::size_t cout) {
  return ((static_cast<std::size_t>(ky) * 3 + static_cast<std::size_t>(kx)) * cin + ci) * cout + co;
}

// Per-sample values needed by the backward pass.
struct FrontCache {
  ChannelStack input;
  AttentionState attention;
  ChannelStack conv_pre;
};

void check_input(const Architecture& arch, const ChannelStack& x) {
  if (static_cast<std::size_t>(x.rows()) != arch.L ||
      static_cast<std::size_t>(x.cols()) != arch.N * arch.input_channels) {
    throw std::invalid_argument("network input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                                ", expected " + std::to_string(arch.L) + "x" +
                                std::to_string(arch.N * arch.input_channels));
  }
}

// Attention module (if present), conv layer and ReLU; writes the flattened
// activation into `flat`.
void front_forward(const Model& model, const ChannelStack& x, FrontCache* cache, Eigen::Ref<Eigen::RowVectorXd> flat) {
  const auto& arch = model.arch;
  const std::size_t C = arch.attention_channels;
  ChannelStack conv_pre;
  if (arch.variant == Variant::kCaWssNet) {
    AttentionState attn = ca_module(x, model);
    conv_pre = conv2d_zp(attn.output, C, view(model[Param::kConvKernel]), view(model[Param::kConvBias]), C);
    if (cache) cache->attention = std::move(attn);
  } else {
    conv_pre = conv2d_zp(x, arch.input_channels, view(model[Param::kConvKernel]), view(model[Param::kConvBias]), C);
  }
  flatten_maps(conv_pre.cwiseMax(0.0), C, flat);
  if (cache) {
    cache->input = x;
    cache->conv_pre = std::move(conv_pre);
  }
}

void front_backward(const Model& model, const FrontCache& cache, const Eigen::Ref<const Eigen::RowVectorXd>& d_flat,
                    Gradients& g, const LayerSet& layers) {
  const auto& arch = model.arch;
  const std::size_t C = arch.attention_channels;
  ChannelStack d_conv(cache.conv_pre.rows(), cache.conv_pre.cols());
  unflatten_maps(d_flat, C, d_conv);
  d_conv = (cache.conv_pre.array() > 0.0).select(d_conv, 0.0);

  const bool ca = arch.variant == Variant::kCaWssNet;
  const bool need_attn = ca && layers.contains(1);
  const ChannelStack& conv_in = ca ? cache.attention.output : cache.input;
  const std::size_t conv_cin = arch.conv_in_channels();

  ChannelStack d_attn_out;
  if (need_attn) d_attn_out = ChannelStack::Zero(conv_in.rows(), conv_in.cols());
  if (layers.contains(2) || need_attn) {
    Eigen::VectorXd dk = Eigen::VectorXd::Zero(model[Param::kConvKernel].size());
    Eigen::VectorXd db = Eigen::VectorXd::Zero(model[Param::kConvBias].size());
    conv2d_zp_backward(conv_in, conv_cin, view(model[Param::kConvKernel]), C, d_conv, view(dk), view(db),
                       need_attn ? &d_attn_out : nullptr);
    if (layers.contains(2)) {
      g[static_cast<std::size_t>(Param::kConvKernel)] += dk;
      g[static_cast<std::size_t>(Param::kConvBias)] += db;
    }
  }
  if (!need_attn) return;

  const auto& st = cache.attention;
  const double scale = 1.0 / std::sqrt(static_cast<double>(arch.L));
  // out = V·Mᵀ with Mᵀ stored; logitsᵀ = KᵀQ·scale.
  Eigen::MatrixXd d_value;
  d_value.noalias() = d_attn_out * st.map_t.transpose();
  Eigen::MatrixXd d_logits_t;
  d_logits_t.noalias() = st.value.transpose() * d_attn_out;
  for (Eigen::Index i = 0; i < d_logits_t.cols(); ++i) {
    auto d = d_logits_t.col(i);
    const auto m = st.map_t.col(i);
    const double dot = d.dot(m);
    d.array() = m.array() * (d.array() - dot);
  }
  Eigen::MatrixXd d_query;
  d_query.noalias() = st.key * d_logits_t;
  d_query *= scale;
  Eigen::MatrixXd d_key;
  d_key.noalias() = st.query * d_logits_t.transpose();
  d_key *= scale;

  const auto conv_grad = [&](Param kernel, Param bias, const Eigen::MatrixXd& d_out) {
    conv2d_zp_backward(cache.input, arch.input_channels, view(model[kernel]), C, d_out,
                       view(g[static_cast<std::size_t>(kernel)]), view(g[static_cast<std::size_t>(bias)]), nullptr);
  };
  conv_grad(Param::kQueryKernel, Param::kQueryBias, d_query);
  conv_grad(Param::kKeyKernel, Param::kKeyBias, d_key);
  conv_grad(Param::kValueKernel, Param::kValueBias, d_value);
}

struct HeadForward {
  Eigen::MatrixXd hidden_pre;  // B×fc
  Eigen::MatrixXd hidden;      // B×fc after ReLU
  Eigen::MatrixXd probs;       // B×L
};

HeadForward head_forward(const Model& model, const FlatBatch& flat) {
  const auto& arch = model.arch;
  const auto F = static_cast<Eigen::Index>(arch.flat_size());
  const auto H = static_cast<Eigen::Index>(arch.fc_width);
  const auto L = static_cast<Eigen::Index>(arch.L);
  RowMajorMap w3(model[Param::kFcWeight].values.data(), F, H);
  RowMajorMap w4(model[Param::kOutWeight].values.data(), H, L);
  HeadForward hf;
  hf.hidden_pre.noalias() = flat * w3;
  hf.hidden_pre.rowwise() += model[Param::kFcBias].values.transpose();
  hf.hidden = hf.hidden_pre.cwiseMax(0.0);
  Eigen::MatrixXd logits;
  logits.noalias() = hf.hidden * w4;
  logits.rowwise() += model[Param::kOutBias].values.transpose();
  hf.probs = (1.0 + (-logits.array()).exp()).inverse().matrix();
  return hf;
}

}  // namespace

ChannelStack to_channel_stack(const FeatureTensor& x) {
  const std::size_t L = x.rows();
  const std::size_t N = x.cols();
  ChannelStack s(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(2 * N));
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < 2; ++c)
        s(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c * N + n)) = x.at(l, n, c);
  return s;
}

ChannelStack to_channel_stack(std::span<const float> features, std::size_t L, std::size_t N) {
  if (features.size() != L * N * 2) throw std::invalid_argument("to_channel_stack: feature size mismatch");
  ChannelStack s(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(2 * N));
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < 2; ++c)
        s(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c * N + n)) =
            static_cast<double>(features[(l * N + n) * 2 + c]);
  return s;
}

namespace {

constexpr Eigen::Index kConvBlock = 64;

// Zero-padded copies of every input plane, one per row shift dy ∈ {−1, 0, 1}.
// Each plane gets one zero column on either side, so tap (dy, dx) of output
// position p (column-major) reads shifted(dy)[p + dx·H] without bounds checks.
class PaddedPlanes {
 public:
  PaddedPlanes(const ChannelStack& in, std::size_t channels)
      : H_(in.rows()), W_(in.cols() / static_cast<Eigen::Index>(channels)), channels_(channels) {
    const Eigen::Index stride = plane_stride();
    for (int ky = 0; ky < 3; ++ky) {
      auto& buf = bufs_[static_cast<std::size_t>(ky)];
      buf.assign(static_cast<std::size_t>(stride) * channels, 0.0);
      const Eigen::Index dy = ky - 1;
      const Eigen::Index rows = H_ - std::abs(dy);
      if (rows <= 0) continue;
      const Eigen::Index r0 = std::max<Eigen::Index>(0, -dy);
      for (std::size_t c = 0; c < channels; ++c) {
        Eigen::Map<Eigen::MatrixXd> dst(buf.data() + static_cast<Eigen::Index>(c) * stride + H_, H_, W_);
        dst.middleRows(r0, rows) = in.middleCols(static_cast<Eigen::Index>(c) * W_, W_).middleRows(r0 + dy, rows);
      }
    }
  }

  Eigen::Index plane_stride() const { return (W_ + 2) * H_; }
  Eigen::Index rows() const { return H_; }
  Eigen::Index cols() const { return W_; }
  std::size_t channels() const { return channels_; }

  // Pointer p such that p[pos] is the input seen by tap (ky, kx) at output pos.
  const double* tap(int ky, int kx, std::size_t c) const {
    return bufs_[static_cast<std::size_t>(ky)].data() + static_cast<Eigen::Index>(c) * plane_stride() + H_ +
           (kx - 1) * H_;
  }

 private:
  Eigen::Index H_;
  Eigen::Index W_;
  std::size_t channels_;
  std::array<std::vector<double>, 3> bufs_;
};

// out[co] (+)= bias[co] + Σ kernel · taps, computed in position blocks so the
// accumulators stay in L1.
void conv_accumulate(const PaddedPlanes& in, std::span<const double> kernel, std::span<const double> bias,
                     std::size_t out_channels, double* out) {
  const std::size_t cin = in.channels();
  const Eigen::Index plane = in.rows() * in.cols();
  std::vector<double> acc(out_channels * kConvBlock);
  for (Eigen::Index p0 = 0; p0 < plane; p0 += kConvBlock) {
    const Eigen::Index len = std::min(kConvBlock, plane - p0);
    for (std::size_t co = 0; co < out_channels; ++co) {
      const double b = bias.empty() ? 0.0 : bias[co];
      std::fill_n(acc.data() + co * kConvBlock, len, b);
    }
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* src = in.tap(ky, kx, ci) + p0;
          const double* w = kernel.data() + kernel_index(ky, kx, ci, 0, cin, out_channels);
          for (std::size_t co = 0; co < out_channels; ++co) {
            const double wc = w[co];
            if (wc == 0.0) continue;
            double* a = acc.data() + co * kConvBlock;
            for (Eigen::Index i = 0; i < len; ++i) a[i] += wc * src[i];
          }
        }
      }
    }
    for (std::size_t co = 0; co < out_channels; ++co) {
      double* dst = out + static_cast<Eigen::Index>(co) * plane + p0;
      const double* a = acc.data() + co * kConvBlock;
      for (Eigen::Index i = 0; i < len; ++i) dst[i] += a[i];
    }
  }
}

}  // namespace

ChannelStack conv2d_zp(const ChannelStack& in, std::size_t in_channels, std::span<const double> kernel,
                       std::span<const double> bias, std::size_t out_channels) {
  if (in_channels == 0 || in.cols() % static_cast<Eigen::Index>(in_channels) != 0) {
    throw std::invalid_argument("conv2d_zp: input width is not a multiple of the channel count");
  }
  if (kernel.size() != 9 * in_channels * out_channels || bias.size() != out_channels) {
    throw std::invalid_argument("conv2d_zp: kernel or bias size mismatch");
  }
  const Eigen::Index W = in.cols() / static_cast<Eigen::Index>(in_channels);
  ChannelStack out = ChannelStack::Zero(in.rows(), W * static_cast<Eigen::Index>(out_channels));
  conv_accumulate(PaddedPlanes(in, in_channels), kernel, bias, out_channels, out.data());
  return out;
}

void conv2d_zp_backward(const ChannelStack& in, std::size_t in_channels, std::span<const double> kernel,
                        std::size_t out_channels, const ChannelStack& d_out, std::span<double> d_kernel,
                        std::span<double> d_bias, ChannelStack* d_in) {
  const Eigen::Index H = in.rows();
  const Eigen::Index W = in.cols() / static_cast<Eigen::Index>(in_channels);
  const Eigen::Index plane = H * W;
  if (d_out.rows() != H || d_out.cols() != W * static_cast<Eigen::Index>(out_channels)) {
    throw std::invalid_argument("conv2d_zp_backward: output gradient shape mismatch");
  }
  if (d_in && (d_in->rows() != in.rows() || d_in->cols() != in.cols())) {
    throw std::invalid_argument("conv2d_zp_backward: input gradient shape mismatch");
  }
  for (std::size_t co = 0; co < out_channels; ++co)
    d_bias[co] += d_out.middleCols(static_cast<Eigen::Index>(co) * W, W).sum();

  const PaddedPlanes padded(in, in_channels);
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      for (std::size_t ci = 0; ci < in_channels; ++ci) {
        const Eigen::Map<const Eigen::VectorXd> src(padded.tap(ky, kx, ci), plane);
        for (std::size_t co = 0; co < out_channels; ++co) {
          const Eigen::Map<const Eigen::VectorXd> g(d_out.data() + static_cast<Eigen::Index>(co) * plane, plane);
          d_kernel[kernel_index(ky, kx, ci, co, in_channels, out_channels)] += src.dot(g);
        }
      }
    }
  }
  if (!d_in) return;

  // The input gradient is a same-size convolution of d_out with the kernel
  // flipped spatially and with its channel roles swapped.
  std::vector<double> flipped(kernel.size());
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx)
      for (std::size_t ci = 0; ci < in_channels; ++ci)
        for (std::size_t co = 0; co < out_channels; ++co)
          flipped[kernel_index(2 - ky, 2 - kx, co, ci, out_channels, in_channels)] =
              kernel[kernel_index(ky, kx, ci, co, in_channels, out_channels)];
  conv_accumulate(PaddedPlanes(d_out, out_channels), flipped, {}, in_channels, d_in->data());
}

AttentionState ca_module(const ChannelStack& x, const Model& model) {
  const auto& arch = model.arch;
  if (arch.variant != Variant::kCaWssNet) throw std::invalid_argument("ca_module: model has no attention module");
  check_input(arch, x);
  const std::size_t cin = arch.input_channels;
  const std::size_t C = arch.attention_channels;
  AttentionState st;
  st.query = conv2d_zp(x, cin, view(model[Param::kQueryKernel]), view(model[Param::kQueryBias]), C);
  st.key = conv2d_zp(x, cin, view(model[Param::kKeyKernel]), view(model[Param::kKeyBias]), C);
  st.value = conv2d_zp(x, cin, view(model[Param::kValueKernel]), view(model[Param::kValueBias]), C);
  const double scale = 1.0 / std::sqrt(static_cast<double>(arch.L));
  st.map_t.noalias() = st.key.transpose() * st.query;
  for (Eigen::Index i = 0; i < st.map_t.cols(); ++i) {
    auto c = st.map_t.col(i);
    const double mx = c.maxCoeff();
    c.array() = ((c.array() - mx) * scale).exp();
    c /= c.sum();
  }
  st.output.noalias() = st.value * st.map_t;
  return st;
}

void flatten_maps(const ChannelStack& maps, std::size_t channels, Eigen::Ref<Eigen::RowVectorXd> flat) {
  const Eigen::Index L = maps.rows();
  const auto C = static_cast<Eigen::Index>(channels);
  const Eigen::Index N = maps.cols() / C;
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index c = 0; c < C; ++c) flat((l * N + n) * C + c) = maps(l, c * N + n);
}

void unflatten_maps(const Eigen::Ref<const Eigen::RowVectorXd>& flat, std::size_t channels, ChannelStack& maps) {
  const Eigen::Index L = maps.rows();
  const auto C = static_cast<Eigen::Index>(channels);
  const Eigen::Index N = maps.cols() / C;
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index c = 0; c < C; ++c) maps(l, c * N + n) = flat((l * N + n) * C + c);
}

Eigen::MatrixXd forward_batch(const Model& model, std::span<const ChannelStack> inputs) {
  validate_model(model);
  const auto B = static_cast<Eigen::Index>(inputs.size());
  FlatBatch flat(B, static_cast<Eigen::Index>(model.arch.flat_size()));
  for (Eigen::Index b = 0; b < B; ++b) {
    check_input(model.arch, inputs[static_cast<std::size_t>(b)]);
    front_forward(model, inputs[static_cast<std::size_t>(b)], nullptr, flat.row(b));
  }
  return head_forward(model, flat).probs;
}

Eigen::VectorXd forward(const Model& model, const FeatureTensor& x) {
  if (x.rows() != model.arch.L || x.cols() != model.arch.N) {
    throw std::invalid_argument("forward: feature tensor shape does not match the architecture");
  }
  const ChannelStack s = to_channel_stack(x);
  return forward_batch(model, std::span<const ChannelStack>(&s, 1)).row(0).transpose();
}

double bce_loss(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& labels) {
  if (probs.rows() != labels.rows() || probs.cols() != labels.cols()) {
    throw std::invalid_argument("bce_loss: prediction and label shapes differ");
  }
  if (probs.rows() == 0) return 0.0;
  const Eigen::ArrayXXd p = probs.array().max(kBceClip).min(1.0 - kBceClip);
  const Eigen::ArrayXXd o = labels.array();
  const double total = (o * p.log() + (1.0 - o) * (1.0 - p).log()).sum();
  return -total / static_cast<double>(probs.rows());
}

Gradients zero_gradients(const Model& model) {
  Gradients g;
  for (std::size_t i = 0; i < kNumParams; ++i) g[i] = Eigen::VectorXd::Zero(model.params[i].size());
  return g;
}

LayerSet LayerSet::only(std::initializer_list<int> layers) {
  LayerSet s;
  s.on.fill(false);
  for (int l : layers) {
    if (l < 1 || l > 4) throw std::invalid_argument("layer index must be in 1..4");
    s.on[static_cast<std::size_t>(l)] = true;
  }
  return s;
}

double loss_and_gradients(const Model& model, std::span<const ChannelStack> inputs, const Eigen::MatrixXd& labels,
                          Gradients& grads, const LayerSet& layers) {
  validate_model(model);
  const auto& arch = model.arch;
  const auto B = static_cast<Eigen::Index>(inputs.size());
  if (labels.rows() != B || labels.cols() != static_cast<Eigen::Index>(arch.L)) {
    throw std::invalid_argument("loss_and_gradients: label matrix shape mismatch");
  }
  grads = zero_gradients(model);
  if (B == 0) return 0.0;

  const bool need_front = layers.contains(1) || layers.contains(2);
  std::vector<FrontCache> caches(need_front ? inputs.size() : 0);
  FlatBatch flat(B, static_cast<Eigen::Index>(arch.flat_size()));
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto i = static_cast<std::size_t>(b);
    check_input(arch, inputs[i]);
    front_forward(model, inputs[i], need_front ? &caches[i] : nullptr, flat.row(b));
  }
  const HeadForward hf = head_forward(model, flat);
  const double loss = bce_loss(hf.probs, labels);

  // dJ/dlogit = (p − o)/B inside the clip window, zero where clipping is active.
  const double inv_b = 1.0 / static_cast<double>(B);
  const Eigen::MatrixXd d_logits =
      ((hf.probs.array() > kBceClip && hf.probs.array() < 1.0 - kBceClip)
           .select((hf.probs - labels).array() * inv_b, 0.0))
          .matrix();

  const auto F = static_cast<Eigen::Index>(arch.flat_size());
  const auto H = static_cast<Eigen::Index>(arch.fc_width);
  const auto L = static_cast<Eigen::Index>(arch.L);
  RowMajorMap w3(model[Param::kFcWeight].values.data(), F, H);
  RowMajorMap w4(model[Param::kOutWeight].values.data(), H, L);

  if (layers.contains(4)) {
    RowMajorMutMap(grads[static_cast<std::size_t>(Param::kOutWeight)].data(), H, L).noalias() =
        hf.hidden.transpose() * d_logits;
    grads[static_cast<std::size_t>(Param::kOutBias)] = d_logits.colwise().sum().transpose();
  }
  const bool need_hidden = layers.contains(3) || need_front;
  if (need_hidden) {
    Eigen::MatrixXd d_hidden;
    d_hidden.noalias() = d_logits * w4.transpose();
    d_hidden = (hf.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
    if (layers.contains(3)) {
      RowMajorMutMap(grads[static_cast<std::size_t>(Param::kFcWeight)].data(), F, H).noalias() =
          flat.transpose() * d_hidden;
      grads[static_cast<std::size_t>(Param::kFcBias)] = d_hidden.colwise().sum().transpose();
    }
    if (need_front) {
      FlatBatch d_flat;
      d_flat.noalias() = d_hidden * w3.transpose();
      for (Eigen::Index b = 0; b < B; ++b)
        front_backward(model, caches[static_cast<std::size_t>(b)], d_flat.row(b), grads, layers);
    }
  }

  for (std::size_t i = 0; i < kNumParams; ++i) grads[i].array() *= model.params[i].mask.array();
  return loss;
}

Gradients backward(const Model& model, const FeatureTensor& x, const Eigen::VectorXd& labels) {
  if (x.rows() != model.arch.L || x.cols() != model.arch.N) {
    throw std::invalid_argument("backward: feature tensor shape does not match the architecture");
  }
  const ChannelStack s = to_channel_stack(x);
  Gradients g;
  loss_and_gradients(model, std::span<const ChannelStack>(&s, 1), labels.transpose(), g);
  return g;
}

}  // namespace wss
