// Copyright 2026 The LCNN Authors. All Rights Reserved.
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

#include "lcnn/serialize.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

namespace lcnn {

namespace {

using Json = nlohmann::json;
constexpr char kMagic[8] = {'L', 'C', 'N', 'N', 'M', 'D', 'L', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(const std::vector<float>& v) {
    for (const float x : v) f32(x);
  }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      u8(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    u8(static_cast<std::uint8_t>(v));
  }
  void bits(const std::vector<bool>& b) {
    std::vector<std::uint8_t> packed((b.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    bytes(packed);
  }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::size_t remaining() const { return b_.size() - pos_; }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::vector<float> f32s(std::size_t n) {
    need(n * 4);
    std::vector<float> v(n);
    for (float& x : v) x = f32();
    return v;
  }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t byte = u8();
      v |= std::uint64_t(byte & 0x7f) << shift;
      if (!(byte & 0x80)) return v;
    }
    fail(ErrorKind::kFormat, "varint too long");
  }
  std::vector<bool> bits(std::size_t n) {
    const std::size_t nb = (n + 7) / 8;
    need(nb);
    std::vector<bool> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (b_[pos_ + i / 8] >> (i % 8)) & 1u;
    for (std::size_t i = n; i < nb * 8; ++i)
      require(!((b_[pos_ + i / 8] >> (i % 8)) & 1u), ErrorKind::kFormat, "bitset padding not zero");
    pos_ += nb;
    return out;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    require(n <= remaining(), ErrorKind::kFormat, "model file truncated");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

Json shape_json(const Shape3& s) { return Json::array({s.channels, s.width, s.height}); }

Shape3 shape_from(const Json& j) {
  require(j.is_array() && j.size() == 3, ErrorKind::kFormat, "bad shape in model header");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

Json geom_json(const ConvGeom& g) {
  return Json{{"m", g.m},           {"n", g.n},     {"kh", g.kh},     {"kw", g.kw},
              {"stride", g.stride}, {"pad", g.pad}, {"in_w", g.in_w}, {"in_h", g.in_h}};
}

ConvGeom geom_from(const Json& j) {
  return ConvGeom::make(j.at("m"), j.at("n"), j.at("kh"), j.at("kw"), j.at("stride"),
                        j.at("pad"), j.at("in_w"), j.at("in_h"));
}

Json header_json(const LcnnModel<float>& model) {
  Json layers = Json::array();
  for (const auto& l : model.layers) {
    Json j{{"name", l.name},
           {"kind", to_string(l.kind)},
           {"block", l.block},
           {"in", shape_json(l.in)},
           {"out", shape_json(l.out)},
           {"hyper", {{"sigma", l.hyper.sigma}, {"epsilon", l.hyper.epsilon},
                      {"lambda", l.hyper.lambda}}}};
    if (l.kind == LayerKind::kMaxPool)
      j["pool"] = {{"kernel", l.pool.kernel}, {"stride", l.pool.stride}, {"pad", l.pool.pad}};
    if (l.lcnn) {
      const auto& lc = *l.lcnn;
      j["geom"] = geom_json(lc.geom);
      j["k"] = lc.dict.k;
      j["frozen"] = lc.dict.frozen;
      j["mode"] = lc.mode() == LayerMode::kTraining ? "training" : "inference";
      if (lc.mode() == LayerMode::kTraining && lc.combiner().s_max)
        j["s_max"] = *lc.combiner().s_max;
    } else if (l.dense) {
      j["geom"] = geom_json(l.dense->geom);
    }
    layers.push_back(std::move(j));
  }
  return Json{{"format_version", kModelFormatVersion},
              {"arch", model.arch},
              {"input", shape_json(model.input)},
              {"num_classes", model.num_classes},
              {"sparsity", to_string(model.sparsity)},
              {"s_max", model.s_max},
              {"c", model.c},
              {"lambda_prime", model.lambda_prime},
              {"layers", std::move(layers)}};
}

void write_chunk(Writer& w, const Layer<float>& l) {
  Writer body;
  if (l.lcnn) {
    const auto& lc = *l.lcnn;
    body.f32s(lc.dict.data);
    body.f32s(lc.bias);
    if (lc.mode() == LayerMode::kTraining) {
      const auto& comb = lc.combiner();
      const auto& p = comb.p.data();
      body.f32s(p);
      std::vector<bool> nz(p.size()), pinned(p.size());
      for (std::size_t e = 0; e < p.size(); ++e) {
        nz[e] = p[e] != 0.0f;
        pinned[e] = comb.frozen_zero[e] != 0;
      }
      body.bits(nz);
      body.bits(pinned);
    } else {
      const auto& t = lc.tables();
      for (std::size_t i = 0; i + 1 < t.offsets().size(); ++i)
        body.varint(t.offsets()[i + 1] - t.offsets()[i]);
      for (const std::uint32_t idx : t.all_indices()) body.u32(idx);
      body.f32s(t.all_coeffs());
    }
  } else if (l.dense) {
    body.f32s(l.dense->w.data());
    body.f32s(l.dense->bias);
  }
  w.u32(static_cast<std::uint32_t>(l.kind));
  w.u64(body.buffer().size());
  w.bytes(body.buffer());
}

Layer<float> read_layer(const Json& j, LayerKind kind, std::span<const std::uint8_t> body_bytes) {
  Layer<float> l;
  l.kind = kind;
  l.name = j.at("name").get<std::string>();
  l.block = j.at("block").get<std::string>();
  l.in = shape_from(j.at("in"));
  l.out = shape_from(j.at("out"));
  const Json& h = j.at("hyper");
  l.hyper = {h.at("sigma").get<double>(), h.at("epsilon").get<double>(),
             h.at("lambda").get<double>()};
  if (j.contains("pool")) {
    const Json& p = j["pool"];
    l.pool = {p.at("kernel").get<std::size_t>(), p.at("stride").get<std::size_t>(),
              p.at("pad").get<std::size_t>()};
  }
  Reader r(body_bytes);
  if (is_lcnn(kind)) {
    const ConvGeom g = geom_from(j.at("geom"));
    const std::size_t k = j.at("k");
    Dictionary<float> dict(k, g.m, r.f32s(k * g.m), j.at("frozen").get<bool>());
    std::vector<float> bias = r.f32s(g.n);
    std::variant<SparseCombiner<float>, LookupTables<float>> repr;
    const std::string mode = j.at("mode");
    if (mode == "training") {
      SparseCombiner<float> comb(Tensor4<float>(g.n, k, g.kh, g.kw, r.f32s(g.n * k * g.taps())));
      const auto nz = r.bits(comb.p.size());
      const auto pinned = r.bits(comb.p.size());
      for (std::size_t e = 0; e < comb.p.size(); ++e) {
        require(nz[e] == (comb.p.data()[e] != 0.0f), ErrorKind::kFormat,
                "nonzero bitset disagrees with P values in layer '" + l.name + "'");
        require(!pinned[e] || comb.p.data()[e] == 0.0f, ErrorKind::kFormat,
                "pinned entry is nonzero in layer '" + l.name + "'");
        comb.frozen_zero[e] = pinned[e] ? 1 : 0;
      }
      if (j.contains("s_max")) comb.s_max = j["s_max"].get<std::size_t>();
      repr = std::move(comb);
    } else {
      require(mode == "inference", ErrorKind::kFormat, "unknown layer mode '" + mode + "'");
      const std::size_t taps = g.n * g.taps();
      std::vector<std::size_t> offsets(taps + 1, 0);
      for (std::size_t t = 0; t < taps; ++t) {
        const std::uint64_t len = r.varint();
        require(len <= k, ErrorKind::kFormat, "lookup list longer than the dictionary");
        offsets[t + 1] = offsets[t] + len;
      }
      std::vector<std::uint32_t> idx(offsets.back());
      for (auto& v : idx) v = r.u32();
      std::vector<float> coeffs = r.f32s(offsets.back());
      repr = LookupTables<float>::from_raw(g.n, g.kh, g.kw, k, std::move(offsets), std::move(idx),
                                           std::move(coeffs));
    }
    l.lcnn = LcnnConvLayer<float>::make(g, std::move(dict), std::move(repr), std::move(bias));
  } else if (is_dense(kind)) {
    const ConvGeom g = geom_from(j.at("geom"));
    Tensor4<float> w(g.n, g.m, g.kh, g.kw, r.f32s(g.n * g.m * g.taps()));
    l.dense = DenseConvLayer<float>{g, std::move(w), r.f32s(g.n)};
  }
  require(r.remaining() == 0, ErrorKind::kFormat,
          "chunk for layer '" + l.name + "' has trailing bytes");
  return l;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const LcnnModel<float>& model) {
  Writer w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 8));
  const std::string header = header_json(model).dump();
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(header.data()), header.size()));
  for (const auto& l : model.layers) write_chunk(w, l);
  auto& buf = w.buffer();
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), buf.data() + 8, static_cast<uInt>(buf.size() - 8));
  w.u32(static_cast<std::uint32_t>(crc));
  return std::move(buf);
}

LcnnModel<float> deserialize_model(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 16 && std::memcmp(bytes.data(), kMagic, 8) == 0, ErrorKind::kFormat,
          "not a model file (bad magic)");
  const std::size_t payload = bytes.size() - 12;
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), bytes.data() + 8, static_cast<uInt>(payload));
  Reader tail(bytes.subspan(bytes.size() - 4));
  require(tail.u32() == static_cast<std::uint32_t>(crc), ErrorKind::kFormat,
          "model file checksum mismatch");

  Reader r(bytes.subspan(8, payload));
  const std::uint32_t hlen = r.u32();
  const auto hbytes = r.take(hlen);
  Json header;
  try {
    header = Json::parse(hbytes.begin(), hbytes.end());
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, std::string("model header is not valid JSON: ") + e.what());
  }
  LcnnModel<float> model;
  try {
    require(header.at("format_version").get<std::uint32_t>() == kModelFormatVersion,
            ErrorKind::kFormat, "unsupported model format version");
    model.arch = header.at("arch").get<std::string>();
    model.input = shape_from(header.at("input"));
    model.num_classes = header.at("num_classes");
    model.sparsity = sparsity_mode_from_string(header.at("sparsity"));
    model.s_max = header.at("s_max");
    model.c = header.at("c");
    model.lambda_prime = header.at("lambda_prime");
    for (const Json& lj : header.at("layers")) {
      const std::uint32_t tag = r.u32();
      const LayerKind kind = layer_kind_from_string(lj.at("kind").get<std::string>());
      require(tag == static_cast<std::uint32_t>(kind), ErrorKind::kFormat,
              "chunk kind does not match header for layer '" +
                  lj.at("name").get<std::string>() + "'");
      const std::uint64_t len = r.u64();
      require(len <= r.remaining(), ErrorKind::kFormat, "model file truncated");
      model.layers.push_back(read_layer(lj, kind, r.take(len)));
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, std::string("model header field error: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kFormat) throw;
    fail(ErrorKind::kFormat, std::string("invalid model file: ") + e.what());
  }
  require(r.remaining() == 0, ErrorKind::kFormat,
          "header layer count does not match chunk count");
  return model;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kIo, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::kIo, "write to '" + path + "' failed");
}

void save_model(const LcnnModel<float>& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

LcnnModel<float> load_model(const std::string& path) { return deserialize_model(read_file(path)); }

}  // namespace lcnn
