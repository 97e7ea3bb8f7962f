#include "pqmotion/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace pqmotion {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "PQCK1\n";

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, size_t& offset, const char* what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4)
    throw FormatError(std::string("unexpected end of file in ") + what, offset);
  offset += 4;
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  json manifest;
  manifest["version"] = ck.version;
  manifest["stage"] = ck.stage;
  manifest["config"] = ck.config;
  manifest["seed"] = ck.seed;
  json tensors = json::array();
  int64_t offset = 0;
  for (const TensorBlob& t : ck.tensors) {
    const int64_t bytes = t.element_count() * 4;
    if (static_cast<int64_t>(t.data.size()) != t.element_count())
      throw std::runtime_error("tensor '" + t.name +
                               "' data does not match its shape");
    tensors.push_back({{"name", t.name},
                       {"dtype", "f32"},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"length", bytes}});
    offset += bytes;
  }
  manifest["tensors"] = tensors;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMagic, 6);
  std::string text = manifest.dump();
  put_u32(os, static_cast<uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const TensorBlob& t : ck.tensors) {
    for (float f : t.data) {
      uint32_t v;
      std::memcpy(&v, &f, 4);
      put_u32(os, v);
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path, 0);
  size_t offset = 0;

  char magic[6];
  is.read(magic, 6);
  if (is.gcount() != 6 || std::memcmp(magic, kMagic, 6) != 0)
    throw FormatError("bad checkpoint magic", 0);
  offset += 6;

  uint32_t hlen = get_u32(is, offset, "header length");
  if (hlen == 0 || hlen > (1u << 26))
    throw FormatError("implausible manifest length", offset - 4);
  std::string text(hlen, '\0');
  is.read(text.data(), hlen);
  if (static_cast<uint32_t>(is.gcount()) != hlen)
    throw FormatError("truncated manifest", offset);
  offset += hlen;

  json manifest = json::parse(text, nullptr, false);
  if (manifest.is_discarded())
    throw FormatError("manifest is not valid JSON", offset - hlen);

  Checkpoint ck;
  try {
    ck.version = manifest.at("version").get<int>();
    ck.stage = manifest.at("stage").get<std::string>();
    ck.config = manifest.at("config");
    ck.seed = manifest.at("seed").get<uint64_t>();
    for (const json& tj : manifest.at("tensors")) {
      TensorBlob t;
      t.name = tj.at("name").get<std::string>();
      if (tj.at("dtype").get<std::string>() != "f32")
        throw FormatError("unsupported tensor dtype in '" + t.name + "'",
                          offset);
      t.shape = tj.at("shape").get<std::vector<int64_t>>();
      const int64_t bytes = tj.at("length").get<int64_t>();
      if (bytes != t.element_count() * 4)
        throw FormatError("tensor '" + t.name + "' length disagrees with shape",
                          offset);
      ck.tensors.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest missing field: ") + e.what(),
                      offset - hlen);
  }

  for (TensorBlob& t : ck.tensors) {
    t.data.resize(static_cast<size_t>(t.element_count()));
    for (float& f : t.data) {
      uint32_t v = get_u32(is, offset, "tensor payload");
      std::memcpy(&f, &v, 4);
    }
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after tensor payload", offset);
  return ck;
}

Checkpoint load_checkpoint(const std::string& path,
                           const std::string& expected_stage) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.stage != expected_stage)
    throw StageMismatchError(expected_stage, ck.stage);
  return ck;
}

}  // namespace pqmotion
