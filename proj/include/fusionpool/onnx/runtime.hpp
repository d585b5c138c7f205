// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reference interpreter for inference-only ONNX graphs built from the
// operators typical of convolutional backbones. Float32 throughout; integer
// tensors exist only for shape arithmetic (Shape, Gather, Reshape, ...).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fusionpool/detail/binary_io.hpp"
#include "fusionpool/error.hpp"
#include "fusionpool/onnx/proto.hpp"

namespace fusionpool::onnx {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;
  std::vector<std::int64_t> ints;
  bool integer = false;

  static Tensor floats(std::vector<std::int64_t> shape, std::vector<float> values) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
  }
  static Tensor int64s(std::vector<std::int64_t> shape, std::vector<std::int64_t> values) {
    Tensor t;
    t.shape = std::move(shape);
    t.ints = std::move(values);
    t.integer = true;
    return t;
  }

  std::int64_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                           std::multiplies<>());
  }
  std::size_t size() const { return integer ? ints.size() : data.size(); }
  std::size_t rank() const { return shape.size(); }

  // Integer view of either storage (used for shape-like operands).
  std::vector<std::int64_t> as_ints() const {
    if (integer) return ints;
    std::vector<std::int64_t> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = static_cast<std::int64_t>(data[i]);
    return out;
  }
  std::vector<float> as_floats() const {
    if (!integer) return data;
    std::vector<float> out(ints.size());
    for (std::size_t i = 0; i < ints.size(); ++i) out[i] = static_cast<float>(ints[i]);
    return out;
  }
};

namespace detail_rt {

[[noreturn]] inline void bad_model(const std::string& why) {
  fail(ErrorCode::kFormat, "ONNX graph: " + why);
}

template <typename T>
std::vector<T> raw_as(const std::string& raw) {
  if (raw.size() % sizeof(T) != 0) bad_model("raw_data size not a multiple of element size");
  std::vector<T> out(raw.size() / sizeof(T));
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

inline Tensor from_proto(const TensorProto& p) {
  if (p.external) bad_model("tensor '" + p.name + "' uses external data (unsupported)");
  Tensor t;
  t.shape = p.dims;
  switch (p.data_type) {
    case DataType::kFloat:
      t.data = p.raw_data.empty() ? p.float_data : raw_as<float>(p.raw_data);
      break;
    case DataType::kDouble: {
      const auto d = p.raw_data.empty() ? p.double_data : raw_as<double>(p.raw_data);
      t.data.assign(d.begin(), d.end());
      break;
    }
    case DataType::kInt64:
      t.integer = true;
      t.ints = p.raw_data.empty() ? p.int64_data : raw_as<std::int64_t>(p.raw_data);
      break;
    case DataType::kInt32: {
      t.integer = true;
      const auto v = p.raw_data.empty() ? p.int32_data : raw_as<std::int32_t>(p.raw_data);
      t.ints.assign(v.begin(), v.end());
      break;
    }
    case DataType::kUint8:
    case DataType::kInt8:
    case DataType::kBool: {
      t.integer = true;
      if (!p.raw_data.empty()) {
        for (char c : p.raw_data) {
          t.ints.push_back(p.data_type == DataType::kInt8
                               ? static_cast<std::int64_t>(static_cast<std::int8_t>(c))
                               : static_cast<std::int64_t>(static_cast<std::uint8_t>(c)));
        }
      } else {
        t.ints.assign(p.int32_data.begin(), p.int32_data.end());
      }
      break;
    }
    default:
      bad_model("tensor '" + p.name + "' has unsupported data type " +
                std::to_string(static_cast<int>(p.data_type)));
  }
  if (static_cast<std::int64_t>(t.size()) != t.numel()) {
    bad_model("tensor '" + p.name + "' element count does not match its dims");
  }
  return t;
}

inline std::int64_t attr_int(const NodeProto& n, std::string_view key, std::int64_t fallback) {
  const auto* a = n.attribute(key);
  return a ? a->i : fallback;
}
inline float attr_float(const NodeProto& n, std::string_view key, float fallback) {
  const auto* a = n.attribute(key);
  return a ? a->f : fallback;
}
inline std::vector<std::int64_t> attr_ints(const NodeProto& n, std::string_view key) {
  const auto* a = n.attribute(key);
  return a ? a->ints : std::vector<std::int64_t>{};
}
inline std::string attr_string(const NodeProto& n, std::string_view key, std::string fallback) {
  const auto* a = n.attribute(key);
  return a ? a->s : fallback;
}

inline std::int64_t norm_axis(std::int64_t axis, std::size_t rank) {
  const auto r = static_cast<std::int64_t>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= std::max<std::int64_t>(r, 1)) bad_model("axis out of range");
  return axis;
}

inline std::vector<std::int64_t> strides_of(const std::vector<std::int64_t>& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * shape[i + 1];
  return s;
}

inline std::vector<std::int64_t> broadcast_shape(const std::vector<std::int64_t>& a,
                                                 const std::vector<std::int64_t>& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  std::vector<std::int64_t> out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) bad_model("operands not broadcastable");
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// Maps each flat index of `out_shape` to the flat index of a broadcast operand.
inline std::vector<std::int64_t> broadcast_index(const std::vector<std::int64_t>& operand,
                                                 const std::vector<std::int64_t>& out_shape) {
  const std::size_t rank = out_shape.size();
  std::vector<std::int64_t> padded(rank, 1);
  std::copy(operand.begin(), operand.end(), padded.begin() + (rank - operand.size()));
  const auto in_strides = strides_of(padded);
  std::int64_t total = 1;
  for (auto d : out_shape) total *= d;
  std::vector<std::int64_t> index(static_cast<std::size_t>(total));
  std::vector<std::int64_t> coord(rank, 0);
  for (std::int64_t flat = 0; flat < total; ++flat) {
    std::int64_t src = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      if (padded[d] != 1) src += coord[d] * in_strides[d];
    }
    index[static_cast<std::size_t>(flat)] = src;
    for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
      if (++coord[d] < out_shape[d]) break;
      coord[d] = 0;
    }
  }
  return index;
}

template <typename FloatOp, typename IntOp>
Tensor binary(const Tensor& a, const Tensor& b, FloatOp fop, IntOp iop) {
  const auto shape = broadcast_shape(a.shape, b.shape);
  const bool same = a.shape == b.shape;
  const auto ia = same ? std::vector<std::int64_t>{} : broadcast_index(a.shape, shape);
  const auto ib = same ? std::vector<std::int64_t>{} : broadcast_index(b.shape, shape);
  std::int64_t total = 1;
  for (auto d : shape) total *= d;
  if (a.integer && b.integer) {
    std::vector<std::int64_t> out(static_cast<std::size_t>(total));
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = iop(a.ints[same ? i : ia[i]], b.ints[same ? i : ib[i]]);
    }
    return Tensor::int64s(shape, std::move(out));
  }
  const auto fa = a.as_floats();
  const auto fb = b.as_floats();
  std::vector<float> out(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fop(fa[same ? i : ia[i]], fb[same ? i : ib[i]]);
  }
  return Tensor::floats(shape, std::move(out));
}

template <typename Op>
Tensor unary(const Tensor& x, Op op) {
  Tensor out = Tensor::floats(x.shape, x.as_floats());
  for (float& v : out.data) v = op(v);
  return out;
}

struct Window2d {
  std::int64_t kh = 1, kw = 1, sh = 1, sw = 1, dh = 1, dw = 1;
  std::int64_t pt = 0, pl = 0, pb = 0, pr = 0;
  std::int64_t out_h = 0, out_w = 0;
};

inline Window2d window(const NodeProto& n, std::int64_t in_h, std::int64_t in_w,
                       std::int64_t kh, std::int64_t kw, bool allow_ceil) {
  Window2d w;
  w.kh = kh;
  w.kw = kw;
  const auto strides = attr_ints(n, "strides");
  const auto dil = attr_ints(n, "dilations");
  const auto pads = attr_ints(n, "pads");
  if (strides.size() == 2) {
    w.sh = strides[0];
    w.sw = strides[1];
  }
  if (dil.size() == 2) {
    w.dh = dil[0];
    w.dw = dil[1];
  }
  if (pads.size() == 4) {
    w.pt = pads[0];
    w.pl = pads[1];
    w.pb = pads[2];
    w.pr = pads[3];
  }
  const auto ekh = (kh - 1) * w.dh + 1;
  const auto ekw = (kw - 1) * w.dw + 1;
  const auto auto_pad = attr_string(n, "auto_pad", "NOTSET");
  if (auto_pad == "SAME_UPPER" || auto_pad == "SAME_LOWER") {
    w.out_h = (in_h + w.sh - 1) / w.sh;
    w.out_w = (in_w + w.sw - 1) / w.sw;
    const auto th = std::max<std::int64_t>(0, (w.out_h - 1) * w.sh + ekh - in_h);
    const auto tw = std::max<std::int64_t>(0, (w.out_w - 1) * w.sw + ekw - in_w);
    const bool upper = auto_pad == "SAME_UPPER";
    w.pt = upper ? th / 2 : th - th / 2;
    w.pb = th - w.pt;
    w.pl = upper ? tw / 2 : tw - tw / 2;
    w.pr = tw - w.pl;
    return w;
  }
  if (auto_pad == "VALID") {
    w.pt = w.pl = w.pb = w.pr = 0;
  } else if (auto_pad != "NOTSET") {
    bad_model("unsupported auto_pad '" + auto_pad + "'");
  }
  const bool ceil_mode = allow_ceil && attr_int(n, "ceil_mode", 0) != 0;
  auto extent = [&](std::int64_t in, std::int64_t pb, std::int64_t pe, std::int64_t ek,
                    std::int64_t s) {
    const auto span = in + pb + pe - ek;
    if (span < 0) bad_model("window larger than padded input");
    std::int64_t out = (ceil_mode ? (span + s - 1) / s : span / s) + 1;
    if (ceil_mode && (out - 1) * s >= in + pb) --out;
    return out;
  };
  w.out_h = extent(in_h, w.pt, w.pb, ekh, w.sh);
  w.out_w = extent(in_w, w.pl, w.pr, ekw, w.sw);
  return w;
}

inline Tensor conv(const NodeProto& n, const Tensor& x, const Tensor& weight, const Tensor* bias) {
  if (x.rank() != 4 || weight.rank() != 4) bad_model("Conv supports 2-D (NCHW) inputs only");
  const auto N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const auto M = weight.shape[0], CG = weight.shape[1];
  const auto group = attr_int(n, "group", 1);
  if (group <= 0 || C % group != 0 || M % group != 0 || CG != C / group) {
    bad_model("Conv channel/group mismatch");
  }
  const auto win = window(n, H, W, weight.shape[2], weight.shape[3], false);
  const auto OH = win.out_h, OW = win.out_w;
  const auto MG = M / group;
  Tensor out = Tensor::floats({N, M, OH, OW},
                              std::vector<float>(static_cast<std::size_t>(N * M * OH * OW), 0.0f));
  const float* xin = x.data.data();
  const float* wt = weight.data.data();
  for (std::int64_t b = 0; b < N; ++b) {
    for (std::int64_t m = 0; m < M; ++m) {
      float* plane = out.data.data() + (b * M + m) * OH * OW;
      if (bias) std::fill(plane, plane + OH * OW, bias->data[static_cast<std::size_t>(m)]);
      const auto g = m / MG;
      for (std::int64_t cg = 0; cg < CG; ++cg) {
        const auto c = g * CG + cg;
        const float* in_plane = xin + (b * C + c) * H * W;
        for (std::int64_t ky = 0; ky < win.kh; ++ky) {
          for (std::int64_t kx = 0; kx < win.kw; ++kx) {
            const float wv = wt[((m * CG + cg) * win.kh + ky) * win.kw + kx];
            if (wv == 0.0f) continue;
            const auto off_x = kx * win.dw - win.pl;
            // ox range with 0 <= ox*sw + off_x < W
            std::int64_t ox_lo = off_x >= 0 ? 0 : (-off_x + win.sw - 1) / win.sw;
            std::int64_t ox_hi = W - 1 - off_x < 0 ? -1 : (W - 1 - off_x) / win.sw;
            ox_hi = std::min(ox_hi, OW - 1);
            if (ox_lo > ox_hi) continue;
            for (std::int64_t oy = 0; oy < OH; ++oy) {
              const auto iy = oy * win.sh + ky * win.dh - win.pt;
              if (iy < 0 || iy >= H) continue;
              const float* row = in_plane + iy * W + off_x;
              float* orow = plane + oy * OW;
              if (win.sw == 1) {
                for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * row[ox];
              } else {
                for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox) {
                  orow[ox] += wv * row[ox * win.sw];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

inline Tensor pool(const NodeProto& n, const Tensor& x, bool is_max) {
  if (x.rank() != 4) bad_model(n.op_type + " supports 2-D (NCHW) inputs only");
  const auto kernel = attr_ints(n, "kernel_shape");
  if (kernel.size() != 2) bad_model(n.op_type + " needs a 2-D kernel_shape");
  const auto N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const auto win = window(n, H, W, kernel[0], kernel[1], true);
  const bool include_pad = attr_int(n, "count_include_pad", 0) != 0;
  Tensor out = Tensor::floats({N, C, win.out_h, win.out_w},
                              std::vector<float>(static_cast<std::size_t>(N * C * win.out_h * win.out_w)));
  for (std::int64_t p = 0; p < N * C; ++p) {
    const float* in = x.data.data() + p * H * W;
    float* o = out.data.data() + p * win.out_h * win.out_w;
    for (std::int64_t oy = 0; oy < win.out_h; ++oy) {
      for (std::int64_t ox = 0; ox < win.out_w; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        double sum = 0.0;
        std::int64_t count = 0, padded = 0;
        for (std::int64_t ky = 0; ky < win.kh; ++ky) {
          const auto iy = oy * win.sh + ky * win.dh - win.pt;
          for (std::int64_t kx = 0; kx < win.kw; ++kx) {
            const auto ix = ox * win.sw + kx * win.dw - win.pl;
            if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
              if (iy < H + win.pb && ix < W + win.pr) ++padded;
              continue;
            }
            const float v = in[iy * W + ix];
            best = std::max(best, v);
            sum += v;
            ++count;
          }
        }
        if (is_max) {
          o[oy * win.out_w + ox] = best;
        } else {
          const auto denom = include_pad ? count + padded : count;
          o[oy * win.out_w + ox] = denom > 0 ? static_cast<float>(sum / denom) : 0.0f;
        }
      }
    }
  }
  return out;
}

inline Tensor global_pool(const Tensor& x, bool is_max) {
  if (x.rank() < 3) bad_model("global pooling needs rank >= 3");
  const auto N = x.shape[0], C = x.shape[1];
  std::int64_t spatial = 1;
  for (std::size_t d = 2; d < x.rank(); ++d) spatial *= x.shape[d];
  std::vector<std::int64_t> shape(x.rank(), 1);
  shape[0] = N;
  shape[1] = C;
  std::vector<float> out(static_cast<std::size_t>(N * C));
  for (std::int64_t p = 0; p < N * C; ++p) {
    const float* in = x.data.data() + p * spatial;
    if (is_max) {
      out[p] = *std::max_element(in, in + spatial);
    } else {
      double s = 0.0;
      for (std::int64_t i = 0; i < spatial; ++i) s += in[i];
      out[p] = static_cast<float>(s / static_cast<double>(spatial));
    }
  }
  return Tensor::floats(shape, std::move(out));
}

inline Tensor transpose(const Tensor& x, std::vector<std::int64_t> perm) {
  const auto rank = x.rank();
  if (perm.empty()) {
    perm.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) perm[i] = static_cast<std::int64_t>(rank - 1 - i);
  }
  if (perm.size() != rank) bad_model("Transpose perm rank mismatch");
  std::vector<std::int64_t> shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = x.shape[static_cast<std::size_t>(perm[i])];
  const auto in_strides = strides_of(x.shape);
  const auto total = x.numel();
  std::vector<std::int64_t> coord(rank, 0);
  Tensor out;
  out.shape = shape;
  out.integer = x.integer;
  if (x.integer) {
    out.ints.resize(static_cast<std::size_t>(total));
  } else {
    out.data.resize(static_cast<std::size_t>(total));
  }
  for (std::int64_t flat = 0; flat < total; ++flat) {
    std::int64_t src = 0;
    for (std::size_t d = 0; d < rank; ++d) src += coord[d] * in_strides[static_cast<std::size_t>(perm[d])];
    if (x.integer) {
      out.ints[flat] = x.ints[src];
    } else {
      out.data[flat] = x.data[src];
    }
    for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
      if (++coord[d] < shape[d]) break;
      coord[d] = 0;
    }
  }
  return out;
}

inline Tensor concat(const std::vector<const Tensor*>& parts, std::int64_t axis_attr) {
  if (parts.empty()) bad_model("Concat without inputs");
  const auto rank = parts[0]->rank();
  const auto axis = norm_axis(axis_attr, rank);
  auto shape = parts[0]->shape;
  shape[axis] = 0;
  const bool integer = std::all_of(parts.begin(), parts.end(), [](auto* p) { return p->integer; });
  for (auto* p : parts) {
    if (p->rank() != rank) bad_model("Concat rank mismatch");
    for (std::size_t d = 0; d < rank; ++d) {
      if (static_cast<std::int64_t>(d) != axis && p->shape[d] != parts[0]->shape[d]) {
        bad_model("Concat shape mismatch");
      }
    }
    shape[axis] += p->shape[axis];
  }
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < rank; ++d) inner *= shape[d];
  Tensor out;
  out.shape = shape;
  out.integer = integer;
  std::vector<float> fv;
  std::vector<std::int64_t> iv;
  for (std::int64_t o = 0; o < outer; ++o) {
    for (auto* p : parts) {
      const auto chunk = p->shape[axis] * inner;
      if (integer) {
        iv.insert(iv.end(), p->ints.begin() + o * chunk, p->ints.begin() + (o + 1) * chunk);
      } else {
        const auto src = p->as_floats();
        fv.insert(fv.end(), src.begin() + o * chunk, src.begin() + (o + 1) * chunk);
      }
    }
  }
  out.data = std::move(fv);
  out.ints = std::move(iv);
  return out;
}

inline Tensor reshape_to(Tensor x, std::vector<std::int64_t> shape) {
  x.shape = std::move(shape);
  if (x.numel() != static_cast<std::int64_t>(x.size())) bad_model("reshape changes element count");
  return x;
}

inline std::vector<std::int64_t> resolve_reshape(const std::vector<std::int64_t>& in,
                                                 std::vector<std::int64_t> target,
                                                 bool allow_zero) {
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0 && !allow_zero) {
      if (i >= in.size()) bad_model("Reshape copies a missing dimension");
      target[i] = in[i];
    }
    if (target[i] == -1) {
      if (infer >= 0) bad_model("Reshape with more than one -1");
      infer = static_cast<int>(i);
    } else {
      known *= target[i];
    }
  }
  const auto total = std::accumulate(in.begin(), in.end(), std::int64_t{1}, std::multiplies<>());
  if (infer >= 0) {
    if (known == 0 || total % known != 0) bad_model("Reshape cannot infer dimension");
    target[static_cast<std::size_t>(infer)] = total / known;
  }
  return target;
}

inline Tensor gemm(const Tensor& a, const Tensor& b, const Tensor* c, bool ta, bool tb,
                   float alpha, float beta) {
  if (a.rank() != 2 || b.rank() != 2) bad_model("Gemm/MatMul supports 2-D operands only");
  const auto fa = a.as_floats();
  const auto fb = b.as_floats();
  const auto M = ta ? a.shape[1] : a.shape[0];
  const auto K = ta ? a.shape[0] : a.shape[1];
  const auto Kb = tb ? b.shape[1] : b.shape[0];
  const auto Nn = tb ? b.shape[0] : b.shape[1];
  if (K != Kb) bad_model("Gemm inner dimension mismatch");
  std::vector<float> out(static_cast<std::size_t>(M * Nn), 0.0f);
  for (std::int64_t i = 0; i < M; ++i) {
    for (std::int64_t k = 0; k < K; ++k) {
      const float av = ta ? fa[k * a.shape[1] + i] : fa[i * K + k];
      for (std::int64_t j = 0; j < Nn; ++j) {
        const float bv = tb ? fb[j * b.shape[1] + k] : fb[k * Nn + j];
        out[i * Nn + j] += av * bv;
      }
    }
  }
  for (auto& v : out) v *= alpha;
  Tensor result = Tensor::floats({M, Nn}, std::move(out));
  if (c) {
    Tensor scaled = unary(*c, [beta](float v) { return v * beta; });
    result = binary(result, scaled, std::plus<float>(), std::plus<std::int64_t>());
  }
  return result;
}

}  // namespace detail_rt

// A loaded graph plus the machinery to evaluate it.
class Graph {
 public:
  explicit Graph(ModelProto model) : model_(std::move(model)) {
    for (const auto& init : model_.graph.initializers) {
      constants_.emplace(init.name, detail_rt::from_proto(init));
    }
    for (std::size_t i = 0; i < model_.graph.nodes.size(); ++i) {
      for (const auto& in : model_.graph.nodes[i].inputs) last_use_[in] = i;
    }
    for (const auto& out : model_.graph.outputs) last_use_[out.name] = model_.graph.nodes.size();
  }

  static Graph load(const std::string& path) {
    const auto bytes = fusionpool::detail::read_file(path);
    if (bytes.empty()) fail(ErrorCode::kFormat, "model file '" + path + "' is empty");
    return Graph(parse_model(bytes));
  }

  const ModelProto& model() const { return model_; }

  // Graph inputs that are not initializers.
  std::vector<ValueInfoProto> runtime_inputs() const {
    std::vector<ValueInfoProto> out;
    for (const auto& in : model_.graph.inputs) {
      if (!constants_.contains(in.name)) out.push_back(in);
    }
    return out;
  }
  const std::vector<ValueInfoProto>& outputs() const { return model_.graph.outputs; }

  std::unordered_map<std::string, Tensor> run(
      std::unordered_map<std::string, Tensor> feeds) const {
    std::unordered_map<std::string, Tensor> values = std::move(feeds);
    auto lookup = [&](const std::string& name) -> const Tensor* {
      if (name.empty()) return nullptr;
      if (auto it = values.find(name); it != values.end()) return &it->second;
      if (auto it = constants_.find(name); it != constants_.end()) return &it->second;
      detail_rt::bad_model("value '" + name + "' used before definition");
    };
    const auto& nodes = model_.graph.nodes;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& node = nodes[i];
      std::vector<const Tensor*> ins;
      for (const auto& name : node.inputs) ins.push_back(lookup(name));
      auto outs = evaluate(node, ins);
      for (std::size_t o = 0; o < outs.size() && o < node.outputs.size(); ++o) {
        if (!node.outputs[o].empty()) values[node.outputs[o]] = std::move(outs[o]);
      }
      for (const auto& name : node.inputs) {
        auto it = last_use_.find(name);
        if (it != last_use_.end() && it->second == i) values.erase(name);
      }
    }
    std::unordered_map<std::string, Tensor> result;
    for (const auto& out : model_.graph.outputs) {
      const Tensor* t = lookup(out.name);
      result.emplace(out.name, *t);
    }
    return result;
  }

 private:
  static std::vector<Tensor> evaluate(const NodeProto& n, const std::vector<const Tensor*>& in) {
    using namespace detail_rt;
    const auto& op = n.op_type;
    auto arg = [&](std::size_t i) -> const Tensor& {
      if (i >= in.size() || !in[i]) bad_model(op + " is missing input " + std::to_string(i));
      return *in[i];
    };
    auto opt = [&](std::size_t i) -> const Tensor* { return i < in.size() ? in[i] : nullptr; };
    if (!n.domain.empty() && n.domain != "ai.onnx") {
      bad_model("operator domain '" + n.domain + "' unsupported");
    }

    if (op == "Conv") return {conv(n, arg(0), arg(1), opt(2))};
    if (op == "Relu") return {unary(arg(0), [](float v) { return v > 0.0f ? v : 0.0f; })};
    if (op == "LeakyRelu") {
      const float alpha = attr_float(n, "alpha", 0.01f);
      return {unary(arg(0), [alpha](float v) { return v >= 0.0f ? v : alpha * v; })};
    }
    if (op == "Sigmoid") {
      return {unary(arg(0), [](float v) { return 1.0f / (1.0f + std::exp(-v)); })};
    }
    if (op == "Tanh") return {unary(arg(0), [](float v) { return std::tanh(v); })};
    if (op == "HardSigmoid" || op == "HardSwish") {
      const float alpha = op == "HardSwish" ? 1.0f / 6.0f : attr_float(n, "alpha", 0.2f);
      const float beta = op == "HardSwish" ? 0.5f : attr_float(n, "beta", 0.5f);
      const bool swish = op == "HardSwish";
      return {unary(arg(0), [=](float v) {
        const float h = std::clamp(alpha * v + beta, 0.0f, 1.0f);
        return swish ? v * h : h;
      })};
    }
    if (op == "Clip") {
      float lo = attr_float(n, "min", -std::numeric_limits<float>::infinity());
      float hi = attr_float(n, "max", std::numeric_limits<float>::infinity());
      if (const auto* t = opt(1)) lo = t->as_floats().at(0);
      if (const auto* t = opt(2)) hi = t->as_floats().at(0);
      return {unary(arg(0), [lo, hi](float v) { return std::min(std::max(v, lo), hi); })};
    }
    if (op == "Add") return {binary(arg(0), arg(1), std::plus<float>(), std::plus<std::int64_t>())};
    if (op == "Sub") return {binary(arg(0), arg(1), std::minus<float>(), std::minus<std::int64_t>())};
    if (op == "Mul") {
      return {binary(arg(0), arg(1), std::multiplies<float>(), std::multiplies<std::int64_t>())};
    }
    if (op == "Div") {
      return {binary(arg(0), arg(1), std::divides<float>(), [](std::int64_t a, std::int64_t b) {
        if (b == 0) bad_model("integer division by zero");
        return a / b;
      })};
    }
    if (op == "Max" || op == "Min") {
      const bool mx = op == "Max";
      Tensor acc = arg(0);
      for (std::size_t i = 1; i < in.size(); ++i) {
        acc = binary(acc, arg(i),
                     [mx](float a, float b) { return mx ? std::max(a, b) : std::min(a, b); },
                     [mx](std::int64_t a, std::int64_t b) { return mx ? std::max(a, b) : std::min(a, b); });
      }
      return {acc};
    }
    if (op == "BatchNormalization") {
      const auto& x = arg(0);
      const auto scale = arg(1).as_floats(), bias = arg(2).as_floats();
      const auto mean = arg(3).as_floats(), var = arg(4).as_floats();
      const float eps = attr_float(n, "epsilon", 1e-5f);
      if (x.rank() < 2) bad_model("BatchNormalization needs rank >= 2");
      const auto C = x.shape[1];
      std::int64_t inner = 1;
      for (std::size_t d = 2; d < x.rank(); ++d) inner *= x.shape[d];
      Tensor out = Tensor::floats(x.shape, x.as_floats());
      for (std::int64_t b = 0; b < x.shape[0]; ++b) {
        for (std::int64_t c = 0; c < C; ++c) {
          const float k = scale[c] / std::sqrt(var[c] + eps);
          const float s = bias[c] - mean[c] * k;
          float* p = out.data.data() + (b * C + c) * inner;
          for (std::int64_t i = 0; i < inner; ++i) p[i] = p[i] * k + s;
        }
      }
      return {out};
    }
    if (op == "MaxPool") return {pool(n, arg(0), true)};
    if (op == "AveragePool") return {pool(n, arg(0), false)};
    if (op == "GlobalAveragePool") return {global_pool(arg(0), false)};
    if (op == "GlobalMaxPool") return {global_pool(arg(0), true)};
    if (op == "Concat") {
      std::vector<const Tensor*> parts;
      for (std::size_t i = 0; i < in.size(); ++i) parts.push_back(&arg(i));
      return {concat(parts, attr_int(n, "axis", 0))};
    }
    if (op == "Flatten") {
      const auto& x = arg(0);
      const auto axis = attr_int(n, "axis", 1) < 0
                            ? attr_int(n, "axis", 1) + static_cast<std::int64_t>(x.rank())
                            : attr_int(n, "axis", 1);
      std::int64_t outer = 1;
      for (std::int64_t d = 0; d < axis; ++d) outer *= x.shape[d];
      return {reshape_to(x, {outer, x.numel() / std::max<std::int64_t>(outer, 1)})};
    }
    if (op == "Reshape") {
      const auto& x = arg(0);
      const auto shape =
          resolve_reshape(x.shape, arg(1).as_ints(), attr_int(n, "allowzero", 0) != 0);
      return {reshape_to(x, shape)};
    }
    if (op == "Squeeze" || op == "Unsqueeze") {
      const auto& x = arg(0);
      auto axes = opt(1) ? opt(1)->as_ints() : attr_ints(n, "axes");
      auto shape = x.shape;
      if (op == "Squeeze") {
        std::vector<bool> drop(shape.size(), axes.empty());
        if (axes.empty()) {
          for (std::size_t d = 0; d < shape.size(); ++d) drop[d] = shape[d] == 1;
        }
        for (auto a : axes) drop[static_cast<std::size_t>(norm_axis(a, shape.size()))] = true;
        std::vector<std::int64_t> kept;
        for (std::size_t d = 0; d < shape.size(); ++d) {
          if (!drop[d]) kept.push_back(shape[d]);
        }
        return {reshape_to(x, kept)};
      }
      const auto out_rank = shape.size() + axes.size();
      for (auto& a : axes) a = norm_axis(a, out_rank);
      std::sort(axes.begin(), axes.end());
      for (auto a : axes) shape.insert(shape.begin() + a, 1);
      return {reshape_to(x, shape)};
    }
    if (op == "Transpose") return {transpose(arg(0), attr_ints(n, "perm"))};
    if (op == "Identity" || op == "Dropout") return {arg(0)};
    if (op == "Constant") {
      if (const auto* a = n.attribute("value"); a && !a->t.empty()) return {from_proto(a->t[0])};
      if (const auto* a = n.attribute("value_float")) return {Tensor::floats({}, {a->f})};
      if (const auto* a = n.attribute("value_floats")) {
        return {Tensor::floats({static_cast<std::int64_t>(a->floats.size())}, a->floats)};
      }
      if (const auto* a = n.attribute("value_int")) return {Tensor::int64s({}, {a->i})};
      if (const auto* a = n.attribute("value_ints")) {
        return {Tensor::int64s({static_cast<std::int64_t>(a->ints.size())}, a->ints)};
      }
      bad_model("Constant without a supported value attribute");
    }
    if (op == "Shape") {
      const auto& x = arg(0);
      return {Tensor::int64s({static_cast<std::int64_t>(x.rank())}, x.shape)};
    }
    if (op == "Gather") {
      const auto& data = arg(0);
      const auto indices = arg(1).as_ints();
      const auto axis = norm_axis(attr_int(n, "axis", 0), data.rank());
      std::int64_t outer = 1, inner = 1;
      for (std::int64_t d = 0; d < axis; ++d) outer *= data.shape[d];
      for (std::size_t d = axis + 1; d < data.rank(); ++d) inner *= data.shape[d];
      const auto dim = data.shape[axis];
      std::vector<std::int64_t> shape(data.shape.begin(), data.shape.begin() + axis);
      shape.insert(shape.end(), arg(1).shape.begin(), arg(1).shape.end());
      shape.insert(shape.end(), data.shape.begin() + axis + 1, data.shape.end());
      Tensor out;
      out.shape = shape;
      out.integer = data.integer;
      for (std::int64_t o = 0; o < outer; ++o) {
        for (auto idx : indices) {
          if (idx < 0) idx += dim;
          if (idx < 0 || idx >= dim) bad_model("Gather index out of range");
          for (std::int64_t i = 0; i < inner; ++i) {
            const auto src = (o * dim + idx) * inner + i;
            if (data.integer) {
              out.ints.push_back(data.ints[src]);
            } else {
              out.data.push_back(data.data[src]);
            }
          }
        }
      }
      return {out};
    }
    if (op == "Slice") {
      const auto& x = arg(0);
      const auto starts = arg(1).as_ints();
      const auto ends = arg(2).as_ints();
      std::vector<std::int64_t> axes;
      if (opt(3)) {
        axes = opt(3)->as_ints();
      } else {
        for (std::size_t i = 0; i < starts.size(); ++i) axes.push_back(static_cast<std::int64_t>(i));
      }
      const auto steps = opt(4) ? opt(4)->as_ints() : std::vector<std::int64_t>(starts.size(), 1);
      if (ends.size() != starts.size() || axes.size() != starts.size() || steps.size() != starts.size()) {
        bad_model("Slice argument lengths differ");
      }
      const auto rank = x.rank();
      std::vector<std::int64_t> first(rank, 0), step(rank, 1), shape = x.shape;
      for (std::size_t i = 0; i < starts.size(); ++i) {
        const auto a = static_cast<std::size_t>(norm_axis(axes[i], rank));
        const auto dim = x.shape[a];
        const auto st = steps[i];
        if (st == 0) bad_model("Slice step is zero");
        auto b = starts[i] < 0 ? starts[i] + dim : starts[i];
        auto e = ends[i] < 0 ? ends[i] + dim : ends[i];
        if (st > 0) {
          b = std::clamp<std::int64_t>(b, 0, dim);
          e = std::clamp<std::int64_t>(e, 0, dim);
          shape[a] = e > b ? (e - b + st - 1) / st : 0;
        } else {
          b = std::clamp<std::int64_t>(b, -1, dim - 1);
          e = std::clamp<std::int64_t>(e, -1, dim - 1);
          shape[a] = b > e ? (b - e - st - 1) / -st : 0;
        }
        first[a] = b;
        step[a] = st;
      }
      const auto in_strides = strides_of(x.shape);
      const auto count = std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
      Tensor out;
      out.shape = shape;
      out.integer = x.integer;
      std::vector<std::int64_t> coord(rank, 0);
      for (std::int64_t flat = 0; flat < count; ++flat) {
        std::int64_t src = 0;
        for (std::size_t d = 0; d < rank; ++d) src += (first[d] + coord[d] * step[d]) * in_strides[d];
        if (x.integer) {
          out.ints.push_back(x.ints[static_cast<std::size_t>(src)]);
        } else {
          out.data.push_back(x.data[static_cast<std::size_t>(src)]);
        }
        for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
          if (++coord[d] < shape[d]) break;
          coord[d] = 0;
        }
      }
      return {out};
    }
    if (op == "ConstantOfShape") {
      const auto shape = arg(0).as_ints();
      const auto count = std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
      Tensor value = Tensor::floats({}, {0.0f});
      if (const auto* a = n.attribute("value"); a && !a->t.empty()) value = from_proto(a->t[0]);
      if (value.integer) {
        return {Tensor::int64s(shape, std::vector<std::int64_t>(static_cast<std::size_t>(count), value.ints.at(0)))};
      }
      return {Tensor::floats(shape, std::vector<float>(static_cast<std::size_t>(count), value.data.at(0)))};
    }
    if (op == "Cast") {
      const auto to = static_cast<DataType>(attr_int(n, "to", 1));
      const auto& x = arg(0);
      if (to == DataType::kFloat || to == DataType::kDouble) return {Tensor::floats(x.shape, x.as_floats())};
      return {Tensor::int64s(x.shape, x.as_ints())};
    }
    if (op == "ReduceMean") {
      const auto& x = arg(0);
      auto axes = opt(1) ? opt(1)->as_ints() : attr_ints(n, "axes");
      const bool keep = attr_int(n, "keepdims", 1) != 0;
      std::vector<bool> reduce(x.rank(), axes.empty());
      for (auto a : axes) reduce[static_cast<std::size_t>(norm_axis(a, x.rank()))] = true;
      std::vector<std::int64_t> out_shape, keep_shape;
      for (std::size_t d = 0; d < x.rank(); ++d) {
        keep_shape.push_back(reduce[d] ? 1 : x.shape[d]);
        if (!reduce[d]) out_shape.push_back(x.shape[d]);
        else if (keep) out_shape.push_back(1);
      }
      const auto out_strides = strides_of(keep_shape);
      std::vector<double> acc(static_cast<std::size_t>(
          std::accumulate(keep_shape.begin(), keep_shape.end(), std::int64_t{1}, std::multiplies<>())));
      const auto src = x.as_floats();
      std::vector<std::int64_t> coord(x.rank(), 0);
      for (std::size_t flat = 0; flat < src.size(); ++flat) {
        std::int64_t dst = 0;
        for (std::size_t d = 0; d < x.rank(); ++d) {
          if (!reduce[d]) dst += coord[d] * out_strides[d];
        }
        acc[static_cast<std::size_t>(dst)] += src[flat];
        for (int d = static_cast<int>(x.rank()) - 1; d >= 0; --d) {
          if (++coord[d] < x.shape[d]) break;
          coord[d] = 0;
        }
      }
      const double count = static_cast<double>(src.size()) / static_cast<double>(acc.size());
      std::vector<float> out(acc.size());
      for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / count);
      return {Tensor::floats(out_shape, std::move(out))};
    }
    if (op == "Pad") {
      const auto& x = arg(0);
      const auto pads = opt(1) ? opt(1)->as_ints() : attr_ints(n, "pads");
      const float value = opt(2) ? opt(2)->as_floats().at(0) : attr_float(n, "value", 0.0f);
      if (attr_string(n, "mode", "constant") != "constant") bad_model("Pad supports constant mode only");
      const auto rank = x.rank();
      if (pads.size() != 2 * rank) bad_model("Pad expects 2*rank pad values");
      std::vector<std::int64_t> shape(rank);
      for (std::size_t d = 0; d < rank; ++d) shape[d] = x.shape[d] + pads[d] + pads[d + rank];
      Tensor out = Tensor::floats(shape, std::vector<float>(static_cast<std::size_t>(
          std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>())), value));
      const auto src = x.as_floats();
      const auto out_strides = strides_of(shape);
      std::vector<std::int64_t> coord(rank, 0);
      for (std::size_t flat = 0; flat < src.size(); ++flat) {
        std::int64_t dst = 0;
        bool inside = true;
        for (std::size_t d = 0; d < rank; ++d) {
          const auto c = coord[d] + pads[d];
          if (c < 0 || c >= shape[d]) inside = false;
          dst += c * out_strides[d];
        }
        if (inside) out.data[static_cast<std::size_t>(dst)] = src[flat];
        for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
          if (++coord[d] < x.shape[d]) break;
          coord[d] = 0;
        }
      }
      return {out};
    }
    if (op == "Gemm") {
      return {gemm(arg(0), arg(1), opt(2), attr_int(n, "transA", 0) != 0,
                   attr_int(n, "transB", 0) != 0, attr_float(n, "alpha", 1.0f),
                   attr_float(n, "beta", 1.0f))};
    }
    if (op == "MatMul") return {gemm(arg(0), arg(1), nullptr, false, false, 1.0f, 0.0f)};
    bad_model("unsupported operator '" + op + "'");
  }

  ModelProto model_;
  std::unordered_map<std::string, Tensor> constants_;
  std::unordered_map<std::string, std::size_t> last_use_;
};

}  // namespace fusionpool::onnx
