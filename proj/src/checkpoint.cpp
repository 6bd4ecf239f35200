#include "gaitwave/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <iterator>
#include <fstream>
#include <vector>

#include "gaitwave/errors.hpp"
#include "json.hpp"

namespace gaitwave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint32_t le(uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

}  // namespace

void save_checkpoint(const fs::path& path, const nn::ParameterStore& store,
                     const std::map<std::string, nn::Tensor>& extras) {
  std::vector<std::pair<std::string, const nn::Tensor*>> entries;
  for (const auto& p : store.parameters()) entries.emplace_back(p.name, &p.var.value());
  for (const auto& b : store.buffers()) entries.emplace_back(b.name, b.tensor);
  for (const auto& [name, t] : extras) entries.emplace_back(name, &t);

  json index = json::array();
  std::vector<uint32_t> payload;
  for (const auto& [name, t] : entries) {
    index.push_back({{"name", name},
                     {"shape", t->shape()},
                     {"dtype", "f32"},
                     {"offset", payload.size() * sizeof(uint32_t)}});
    for (double v : t->values()) payload.push_back(le(std::bit_cast<uint32_t>(static_cast<float>(v))));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const std::string header = json{{"version", 1}, {"tensors", index}}.dump() + "\n";
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(uint32_t)));
  if (!os) throw Error("failed writing " + path.string());
}

std::map<std::string, nn::Tensor> load_checkpoint(const fs::path& path, nn::ParameterStore& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw FormatError(path.string() + ": missing index line");
  json index;
  try {
    index = json::parse(line);
  } catch (const json::exception&) {
    throw FormatError(path.string() + ": index is not valid JSON");
  }
  if (index.value("version", 0) != 1) throw FormatError(path.string() + ": unsupported checkpoint version");

  std::vector<char> bytes{std::istreambuf_iterator<char>(is), {}};
  std::map<std::string, nn::Tensor> tensors;
  try {
    for (const auto& e : index.at("tensors")) {
      if (e.at("dtype").get<std::string>() != "f32") throw FormatError(path.string() + ": unsupported dtype");
      const auto shape = e.at("shape").get<nn::Shape>();
      const auto offset = e.at("offset").get<size_t>();
      nn::Tensor t(shape);
      const size_t need = offset + static_cast<size_t>(t.numel()) * sizeof(uint32_t);
      if (need > bytes.size()) throw TruncationError(path.string() + ": payload ends inside " + e.at("name").get<std::string>());
      for (int64_t i = 0; i < t.numel(); ++i) {
        uint32_t raw = 0;
        std::memcpy(&raw, bytes.data() + offset + static_cast<size_t>(i) * sizeof(uint32_t), sizeof raw);
        t[i] = std::bit_cast<float>(le(raw));
      }
      tensors.emplace(e.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& ex) {
    throw FormatError(path.string() + ": malformed index: " + ex.what());
  }

  auto take = [&](const std::string& name, nn::Tensor& dst) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError(path.string() + ": missing tensor " + name);
    if (it->second.shape() != dst.shape()) {
      throw FormatError(path.string() + ": tensor " + name + " has shape " + nn::shape_str(it->second.shape()) +
                        ", model expects " + nn::shape_str(dst.shape()));
    }
    dst = std::move(it->second);
    tensors.erase(it);
  };
  for (const auto& p : store.parameters()) {
    nn::Var handle = p.var;
    take(p.name, handle.mutable_value());
  }
  for (const auto& b : store.buffers()) take(b.name, *b.tensor);
  return tensors;
}

}  // namespace gaitwave
