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

// Minimal protobuf wire-format codec for the subset of onnx.proto needed to
// run frozen feature-extraction graphs: ModelProto, GraphProto, NodeProto,
// AttributeProto, TensorProto and ValueInfoProto. Unknown fields are skipped.

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionpool/error.hpp"

namespace fusionpool::onnx {

enum class DataType : std::int32_t {
  kUndefined = 0,
  kFloat = 1,
  kUint8 = 2,
  kInt8 = 3,
  kInt32 = 6,
  kInt64 = 7,
  kBool = 9,
  kDouble = 11,
};

struct TensorProto {
  std::string name;
  std::vector<std::int64_t> dims;
  DataType data_type = DataType::kUndefined;
  std::vector<float> float_data;
  std::vector<std::int64_t> int64_data;
  std::vector<double> double_data;
  std::vector<std::int32_t> int32_data;
  std::string raw_data;
  bool external = false;
};

enum class AttributeType : std::int32_t {
  kUndefined = 0,
  kFloat = 1,
  kInt = 2,
  kString = 3,
  kTensor = 4,
  kFloats = 6,
  kInts = 7,
  kStrings = 8,
};

struct AttributeProto {
  std::string name;
  AttributeType type = AttributeType::kUndefined;
  float f = 0.0f;
  std::int64_t i = 0;
  std::string s;
  std::vector<TensorProto> t;  // zero or one element
  std::vector<float> floats;
  std::vector<std::int64_t> ints;
};

struct NodeProto {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string name;
  std::string op_type;
  std::string domain;
  std::vector<AttributeProto> attributes;

  const AttributeProto* attribute(std::string_view key) const {
    for (const auto& a : attributes) {
      if (a.name == key) return &a;
    }
    return nullptr;
  }
};

// A declared tensor: element type plus shape. Symbolic or missing
// dimensions are recorded as -1.
struct ValueInfoProto {
  std::string name;
  DataType elem_type = DataType::kUndefined;
  std::vector<std::int64_t> shape;
  bool has_shape = false;
};

struct GraphProto {
  std::string name;
  std::vector<NodeProto> nodes;
  std::vector<TensorProto> initializers;
  std::vector<ValueInfoProto> inputs;
  std::vector<ValueInfoProto> outputs;
};

struct OpsetImport {
  std::string domain;
  std::int64_t version = 0;
};

struct ModelProto {
  std::int64_t ir_version = 0;
  std::vector<OpsetImport> opsets;
  std::string producer_name;
  GraphProto graph;

  // Default-domain opset version, 0 when absent.
  std::int64_t opset() const {
    for (const auto& o : opsets) {
      if (o.domain.empty() || o.domain == "ai.onnx") return o.version;
    }
    return 0;
  }
};

namespace wire {

enum WireType : std::uint32_t { kVarint = 0, kFixed64 = 1, kLength = 2, kFixed32 = 5 };

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ >= data_.size(); }

  std::uint64_t varint() {
    std::uint64_t value = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= data_.size()) corrupt("truncated varint");
      const std::uint8_t b = data_[pos_++];
      value |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if ((b & 0x80) == 0) return value;
    }
    corrupt("varint too long");
  }
  std::uint32_t fixed32() {
    std::uint32_t v;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }
  std::uint64_t fixed64() {
    std::uint64_t v;
    std::memcpy(&v, take(8).data(), 8);
    return v;
  }
  std::span<const std::uint8_t> length_delimited() {
    const auto n = varint();
    if (n > data_.size() - pos_) corrupt("length-delimited field overruns buffer");
    return take(static_cast<std::size_t>(n));
  }
  std::string string() {
    auto s = length_delimited();
    return {reinterpret_cast<const char*>(s.data()), s.size()};
  }
  void tag(std::uint32_t& field, std::uint32_t& type) {
    const auto key = varint();
    field = static_cast<std::uint32_t>(key >> 3);
    type = static_cast<std::uint32_t>(key & 7);
    if (field == 0) corrupt("field number 0");
  }
  void skip(std::uint32_t type) {
    switch (type) {
      case kVarint: varint(); break;
      case kFixed64: take(8); break;
      case kLength: length_delimited(); break;
      case kFixed32: take(4); break;
      default: corrupt("unsupported wire type " + std::to_string(type));
    }
  }

  [[noreturn]] static void corrupt(const std::string& why) {
    fail(ErrorCode::kFormat, "corrupt ONNX model: " + why);
  }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > data_.size() - pos_) corrupt("unexpected end of message");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// Repeated scalar that may be packed (length-delimited) or not.
template <typename T, typename Decode>
void repeated(Reader& r, std::uint32_t type, std::uint32_t element_type,
              std::vector<T>& out, Decode decode) {
  if (type == kLength) {
    Reader packed(r.length_delimited());
    while (!packed.done()) out.push_back(decode(packed));
  } else if (type == element_type) {
    out.push_back(decode(r));
  } else {
    Reader::corrupt("unexpected wire type for repeated field");
  }
}

inline float as_float(Reader& r) {
  const std::uint32_t bits = r.fixed32();
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}
inline double as_double(Reader& r) {
  const std::uint64_t bits = r.fixed64();
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}
inline std::int64_t as_int64(Reader& r) { return static_cast<std::int64_t>(r.varint()); }
inline std::int32_t as_int32(Reader& r) { return static_cast<std::int32_t>(r.varint()); }

inline TensorProto parse_tensor(std::span<const std::uint8_t> bytes) {
  TensorProto t;
  Reader r(bytes);
  while (!r.done()) {
    std::uint32_t field, type;
    r.tag(field, type);
    switch (field) {
      case 1: repeated(r, type, kVarint, t.dims, as_int64); break;
      case 2: t.data_type = static_cast<DataType>(r.varint()); break;
      case 4: repeated(r, type, kFixed32, t.float_data, as_float); break;
      case 5: repeated(r, type, kVarint, t.int32_data, as_int32); break;
      case 7: repeated(r, type, kVarint, t.int64_data, as_int64); break;
      case 8: t.name = r.string(); break;
      case 9: t.raw_data = r.string(); break;
      case 10: repeated(r, type, kFixed64, t.double_data, as_double); break;
      case 14: t.external = r.varint() == 1; break;
      default: r.skip(type);
    }
  }
  return t;
}

inline AttributeProto parse_attribute(std::span<const std::uint8_t> bytes) {
  AttributeProto a;
  Reader r(bytes);
  while (!r.done()) {
    std::uint32_t field, type;
    r.tag(field, type);
    switch (field) {
      case 1: a.name = r.string(); break;
      case 2: a.f = as_float(r); break;
      case 3: a.i = as_int64(r); break;
      case 4: a.s = r.string(); break;
      case 5: a.t.push_back(parse_tensor(r.length_delimited())); break;
      case 7: repeated(r, type, kFixed32, a.floats, as_float); break;
      case 8: repeated(r, type, kVarint, a.ints, as_int64); break;
      case 20: a.type = static_cast<AttributeType>(r.varint()); break;
      default: r.skip(type);
    }
  }
  return a;
}

inline NodeProto parse_node(std::span<const std::uint8_t> bytes) {
  NodeProto n;
  Reader r(bytes);
  while (!r.done()) {
    std::uint32_t field, type;
    r.tag(field, type);
    switch (field) {
      case 1: n.inputs.push_back(r.string()); break;
      case 2: n.outputs.push_back(r.string()); break;
      case 3: n.name = r.string(); break;
      case 4: n.op_type = r.string(); break;
      case 5: n.attributes.push_back(parse_attribute(r.length_delimited())); break;
      case 7: n.domain = r.string(); break;
      default: r.skip(type);
    }
  }
  return n;
}

inline void parse_shape(std::span<const std::uint8_t> bytes, ValueInfoProto& v) {
  Reader r(bytes);
  v.has_shape = true;
  while (!r.done()) {
    std::uint32_t field, type;
    r.tag(field, type);
    if (field != 1) {
      r.skip(type);
      continue;
    }
    std::int64_t dim = -1;
    Reader d(r.length_delimited());
    while (!d.done()) {
      std::uint32_t f2, t2;
      d.tag(f2, t2);
      if (f2 == 1) {
        dim = as_int64(d);
      } else {
        d.skip(t2);
      }
    }
    v.shape.push_back(dim);
  }
}

inline ValueInfoProto parse_value_info(std::span<const std::uint8_t> bytes) {
  ValueInfoProto v;
  Reader r(bytes);
  while (!r.done()) {
    std::uint32_t field, type;
    r.tag(field, type);
    if (field == 1) {
      v.name = r.string();
    } else if (field == 2) {
      // TypeProto.tensor_type
      Reader tp(r.length_delimited());
      while (!tp.done()) {
        std::uint32_t f2, t2;
        tp.tag(f2, t2);
        if (f2 != 1) {
          tp.skip(t2);
          continue;
        }
        Reader tt(tp.length_delimited());
        while (!tt.done()) {
          std::uint32_t f3, t3;
          tt.tag(f3, t3);
          if (f3 == 1) {
            v.elem_type = static_cast<DataType>(tt.varint());
          } else if (f3 == 2) {
            parse_shape(tt.length_delimited(), v);
          } else {
            tt.skip(t3);
          }
        }
      }
    } else {
      r.skip(type);
    }
  }
  return v;
}

inline GraphProto parse_graph(std::span<const std::uint8_t> bytes) {
  GraphProto g;
  Reader r(bytes);
  while (!r.done()) {
    std::uint32_t field, type;
    r.tag(field, type);
    switch (field) {
      case 1: g.nodes.push_back(parse_node(r.length_delimited())); break;
      case 2: g.name = r.string(); break;
      case 5: g.initializers.push_back(parse_tensor(r.length_delimited())); break;
      case 11: g.inputs.push_back(parse_value_info(r.length_delimited())); break;
      case 12: g.outputs.push_back(parse_value_info(r.length_delimited())); break;
      default: r.skip(type);
    }
  }
  return g;
}

}  // namespace wire

inline ModelProto parse_model(std::span<const std::uint8_t> bytes) {
  ModelProto m;
  bool has_graph = false;
  wire::Reader r(bytes);
  while (!r.done()) {
    std::uint32_t field, type;
    r.tag(field, type);
    switch (field) {
      case 1: m.ir_version = wire::as_int64(r); break;
      case 2: m.producer_name = r.string(); break;
      case 7:
        m.graph = wire::parse_graph(r.length_delimited());
        has_graph = true;
        break;
      case 8: {
        OpsetImport o;
        wire::Reader op(r.length_delimited());
        while (!op.done()) {
          std::uint32_t f2, t2;
          op.tag(f2, t2);
          if (f2 == 1) {
            o.domain = op.string();
          } else if (f2 == 2) {
            o.version = wire::as_int64(op);
          } else {
            op.skip(t2);
          }
        }
        m.opsets.push_back(o);
        break;
      }
      default: r.skip(type);
    }
  }
  if (!has_graph) wire::Reader::corrupt("model has no graph");
  return m;
}

// Encoder for the same subset; used to author small graphs in code.
namespace wire {

class Writer {
 public:
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      out_.push_back(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void tag(std::uint32_t field, std::uint32_t type) { varint((field << 3) | type); }
  void int_field(std::uint32_t field, std::int64_t v) {
    tag(field, kVarint);
    varint(static_cast<std::uint64_t>(v));
  }
  void bytes_field(std::uint32_t field, std::string_view s) {
    tag(field, kLength);
    varint(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void message_field(std::uint32_t field, const Writer& m) {
    tag(field, kLength);
    varint(m.out_.size());
    out_.insert(out_.end(), m.out_.begin(), m.out_.end());
  }
  void float_field(std::uint32_t field, float f) {
    tag(field, kFixed32);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void packed_floats(std::uint32_t field, std::span<const float> values) {
    Writer p;
    for (float f : values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int i = 0; i < 4; ++i) p.out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    message_field(field, p);
  }
  void packed_ints(std::uint32_t field, std::span<const std::int64_t> values) {
    Writer p;
    for (auto v : values) p.varint(static_cast<std::uint64_t>(v));
    message_field(field, p);
  }
  const std::vector<std::uint8_t>& bytes() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

inline Writer encode_tensor(const TensorProto& t) {
  Writer w;
  if (!t.dims.empty()) w.packed_ints(1, t.dims);
  w.int_field(2, static_cast<std::int64_t>(t.data_type));
  if (!t.float_data.empty()) w.packed_floats(4, t.float_data);
  if (!t.int64_data.empty()) w.packed_ints(7, t.int64_data);
  if (!t.name.empty()) w.bytes_field(8, t.name);
  if (!t.raw_data.empty()) w.bytes_field(9, t.raw_data);
  return w;
}

inline Writer encode_attribute(const AttributeProto& a) {
  Writer w;
  w.bytes_field(1, a.name);
  switch (a.type) {
    case AttributeType::kFloat: w.float_field(2, a.f); break;
    case AttributeType::kInt: w.int_field(3, a.i); break;
    case AttributeType::kString: w.bytes_field(4, a.s); break;
    case AttributeType::kTensor: w.message_field(5, encode_tensor(a.t.at(0))); break;
    case AttributeType::kFloats: w.packed_floats(7, a.floats); break;
    case AttributeType::kInts: w.packed_ints(8, a.ints); break;
    default: break;
  }
  w.int_field(20, static_cast<std::int64_t>(a.type));
  return w;
}

inline Writer encode_value_info(const ValueInfoProto& v) {
  Writer shape;
  for (auto d : v.shape) {
    Writer dim;
    if (d >= 0) {
      dim.int_field(1, d);
    } else {
      dim.bytes_field(2, "N");
    }
    shape.message_field(1, dim);
  }
  Writer tensor_type;
  tensor_type.int_field(1, static_cast<std::int64_t>(v.elem_type));
  if (v.has_shape) tensor_type.message_field(2, shape);
  Writer type;
  type.message_field(1, tensor_type);
  Writer w;
  w.bytes_field(1, v.name);
  w.message_field(2, type);
  return w;
}

}  // namespace wire

inline std::vector<std::uint8_t> serialize_model(const ModelProto& m) {
  wire::Writer graph;
  for (const auto& n : m.graph.nodes) {
    wire::Writer node;
    for (const auto& s : n.inputs) node.bytes_field(1, s);
    for (const auto& s : n.outputs) node.bytes_field(2, s);
    if (!n.name.empty()) node.bytes_field(3, n.name);
    node.bytes_field(4, n.op_type);
    for (const auto& a : n.attributes) node.message_field(5, wire::encode_attribute(a));
    if (!n.domain.empty()) node.bytes_field(7, n.domain);
    graph.message_field(1, node);
  }
  if (!m.graph.name.empty()) graph.bytes_field(2, m.graph.name);
  for (const auto& t : m.graph.initializers) graph.message_field(5, wire::encode_tensor(t));
  for (const auto& v : m.graph.inputs) graph.message_field(11, wire::encode_value_info(v));
  for (const auto& v : m.graph.outputs) graph.message_field(12, wire::encode_value_info(v));

  wire::Writer model;
  model.int_field(1, m.ir_version);
  if (!m.producer_name.empty()) model.bytes_field(2, m.producer_name);
  model.message_field(7, graph);
  for (const auto& o : m.opsets) {
    wire::Writer op;
    if (!o.domain.empty()) op.bytes_field(1, o.domain);
    op.int_field(2, o.version);
    model.message_field(8, op);
  }
  return model.bytes();
}

}  // namespace fusionpool::onnx
