#include "edp/checkpoint.hpp"

#include "binary_io.hpp"
#include "edp/errors.hpp"

namespace edp {

namespace {

constexpr char kMagic[4] = {'E', 'D', 'P', 'C'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::uint64_t CheckpointData::scalar(const std::string& name) const {
  for (const auto& [k, v] : scalars) {
    if (k == name) return v;
  }
  throw ParameterError("checkpoint has no scalar '" + name + "'");
}

const std::string& CheckpointData::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw ParameterError("checkpoint has no metadata key '" + key + "'");
}

bool CheckpointData::has_block(const std::string& name) const {
  for (const auto& [k, v] : blocks) {
    if (k == name) return true;
  }
  return false;
}

const Params& CheckpointData::block(const std::string& name) const {
  for (const auto& [k, v] : blocks) {
    if (k == name) return v;
  }
  throw ParameterError("checkpoint has no block '" + name + "'");
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  detail::ByteWriter w;
  w.bytes(kMagic, 4);
  w.uint(kVersion);
  w.uint(std::uint16_t{0});
  w.uint(data.step);
  w.uint(static_cast<std::uint32_t>(data.scalars.size()));
  for (const auto& [name, value] : data.scalars) {
    w.str16(name);
    w.uint(value);
  }
  w.uint(static_cast<std::uint32_t>(data.meta.size()));
  for (const auto& [key, value] : data.meta) {
    w.str16(key);
    w.str32(value);
  }
  w.uint(static_cast<std::uint32_t>(data.blocks.size()));
  for (const auto& [name, p] : data.blocks) {
    w.str16(name);
    w.uint(static_cast<std::uint32_t>(p.layers.size()));
    for (const Layer& l : p.layers) {
      w.uint(static_cast<std::uint32_t>(l.weight.rows()));
      w.uint(static_cast<std::uint32_t>(l.weight.cols()));
    }
  }
  for (const auto& [name, p] : data.blocks) {
    for (const Layer& l : p.layers) {
      for (Index i = 0; i < l.weight.size(); ++i) w.f32(l.weight.data()[i]);
      for (Index i = 0; i < l.bias.size(); ++i) w.f32(l.bias(i));
    }
  }
  detail::write_file_atomic(path, w.data());
}

CheckpointData read_checkpoint(const std::string& path) {
  const std::vector<unsigned char> buf = detail::read_file(path);
  detail::ByteReader r(buf, "checkpoint '" + path + "'");
  if (r.raw(4, "magic") != std::string(kMagic, 4)) r.fail("bad magic", 0);
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kVersion) {
    r.fail("unsupported version " + std::to_string(version), 4);
  }
  r.uint<std::uint16_t>("reserved");
  CheckpointData out;
  out.step = r.uint<std::uint64_t>("step");
  const auto n_scalars = r.uint<std::uint32_t>("scalar count");
  for (std::uint32_t i = 0; i < n_scalars; ++i) {
    std::string name = r.str16("scalar name");
    out.scalars.emplace_back(std::move(name), r.uint<std::uint64_t>("scalar"));
  }
  const auto n_meta = r.uint<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = r.str16("metadata key");
    out.meta.emplace_back(std::move(key), r.str32("metadata value"));
  }
  const auto n_blocks = r.uint<std::uint32_t>("block count");
  for (std::uint32_t b = 0; b < n_blocks; ++b) {
    std::string name = r.str16("block name");
    const auto n_layers = r.uint<std::uint32_t>("layer count");
    Params p;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
      const auto rows = r.uint<std::uint32_t>("layer shape");
      const auto cols = r.uint<std::uint32_t>("layer shape");
      if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) {
        r.fail("implausible layer shape", r.offset() - 8);
      }
      p.layers.push_back({Matrix(rows, cols), Vector(rows)});
    }
    out.blocks.emplace_back(std::move(name), std::move(p));
  }
  for (auto& [name, p] : out.blocks) {
    for (Layer& l : p.layers) {
      r.need(4 * static_cast<std::size_t>(l.weight.size() + l.bias.size()),
             "parameter payload");
      for (Index i = 0; i < l.weight.size(); ++i) {
        l.weight.data()[i] = r.f32("weight");
      }
      for (Index i = 0; i < l.bias.size(); ++i) l.bias(i) = r.f32("bias");
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes", r.offset());
  return out;
}

}  // namespace edp
