#include "geoprobe/tensor_io.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace geoprobe {
namespace {

using json = nlohmann::json;
constexpr char kMagic[4] = {'A', 'C', 'T', '1'};

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t GetU32(const std::string& in, size_t pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

TensorFormatError Fail(TensorFormatError::Kind kind, const std::string& msg) {
  return TensorFormatError(kind, "tensor: " + msg);
}

}  // namespace

void ActivationMatrix::Validate() const {
  if (static_cast<size_t>(data.rows()) != element_ids.size())
    throw InvalidArgument("activation matrix has " + std::to_string(data.rows()) +
                          " rows but " + std::to_string(element_ids.size()) +
                          " element ids");
  std::unordered_set<std::string> seen;
  for (const auto& id : element_ids)
    if (!seen.insert(id).second)
      throw InvalidArgument("duplicate element id '" + id + "'");
  if (layer_index < 0) throw InvalidArgument("negative layer index");
  if (!data.allFinite()) throw InvalidArgument("activation matrix has non-finite entries");
}

std::optional<Eigen::Index> ActivationMatrix::FindRow(const std::string& id) const {
  for (size_t i = 0; i < element_ids.size(); ++i)
    if (element_ids[i] == id) return static_cast<Eigen::Index>(i);
  return std::nullopt;
}

std::string EncodeTensor(const ActivationMatrix& matrix) {
  matrix.Validate();
  json header = {
      {"dtype", "f32"},
      {"shape", {matrix.rows(), matrix.cols()}},
      {"element_ids", matrix.element_ids},
      {"layer", matrix.layer_index},
      {"checkpoint_words", matrix.checkpoint_words ? json(*matrix.checkpoint_words)
                                                   : json(nullptr)},
      {"model", matrix.source_model},
  };
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  PutU32(out, static_cast<uint32_t>(text.size()));
  out += text;
  const Eigen::Index count = matrix.data.size();
  out.reserve(out.size() + 4 * count);
  const float* values = matrix.data.data();
  for (Eigen::Index i = 0; i < count; ++i)
    PutU32(out, std::bit_cast<uint32_t>(values[i]));
  return out;
}

ActivationMatrix DecodeTensor(const std::string& bytes) {
  using K = TensorFormatError::Kind;
  if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0)
    throw Fail(K::kBadMagic, "missing ACT1 magic");
  if (bytes.size() < 8) throw Fail(K::kTruncated, "header length field truncated");
  const size_t header_len = GetU32(bytes, 4);
  if (bytes.size() < 8 + header_len)
    throw Fail(K::kTruncated, "header declares " + std::to_string(header_len) +
                                  " bytes but file is shorter");
  json header;
  try {
    header = json::parse(bytes.substr(8, header_len));
  } catch (const json::exception& e) {
    throw Fail(K::kHeader, std::string("header is not valid JSON: ") + e.what());
  }

  ActivationMatrix m;
  int64_t n = 0, k = 0;
  try {
    if (header.at("dtype").get<std::string>() != "f32")
      throw Fail(K::kHeader, "unsupported dtype " + header.at("dtype").dump());
    const auto& shape = header.at("shape");
    if (!shape.is_array() || shape.size() != 2)
      throw Fail(K::kHeader, "shape must be [n, k]");
    n = shape[0].get<int64_t>();
    k = shape[1].get<int64_t>();
    if (n < 0 || k < 0) throw Fail(K::kHeader, "negative shape");
    m.element_ids = header.at("element_ids").get<std::vector<std::string>>();
    m.layer_index = header.at("layer").get<int>();
    if (header.contains("checkpoint_words") && !header["checkpoint_words"].is_null())
      m.checkpoint_words = header["checkpoint_words"].get<int64_t>();
    m.source_model = header.value("model", std::string());
  } catch (const json::exception& e) {
    throw Fail(K::kHeader, std::string("bad header field: ") + e.what());
  }
  if (static_cast<int64_t>(m.element_ids.size()) != n)
    throw Fail(K::kShapeMismatch, "shape declares " + std::to_string(n) + " rows but " +
                                      std::to_string(m.element_ids.size()) +
                                      " element ids are listed");

  const size_t payload = bytes.size() - 8 - header_len;
  if (payload % 4 != 0)
    throw Fail(K::kTruncated, "payload of " + std::to_string(payload) +
                                  " bytes is not a whole number of float32 values");
  const size_t values = payload / 4;
  if (values != static_cast<size_t>(n * k))
    throw Fail(K::kShapeMismatch, "shape [" + std::to_string(n) + "," + std::to_string(k) +
                                      "] needs " + std::to_string(n * k) +
                                      " values but payload has " + std::to_string(values));

  m.data.resize(n, k);
  float* out = m.data.data();
  const size_t base = 8 + header_len;
  for (size_t i = 0; i < values; ++i) {
    out[i] = std::bit_cast<float>(GetU32(bytes, base + 4 * i));
    if (!std::isfinite(out[i]))
      throw Fail(K::kNonFinite, "non-finite value at row " + std::to_string(i / k) +
                                    ", column " + std::to_string(i % k));
  }
  try {
    m.Validate();
  } catch (const InvalidArgument& e) {
    throw Fail(K::kHeader, e.what());
  }
  return m;
}

ActivationMatrix ReadTensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw TensorFormatError(TensorFormatError::Kind::kIo,
                            "tensor: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return DecodeTensor(buf.str());
  } catch (const TensorFormatError& e) {
    throw TensorFormatError(e.kind(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

void WriteTensor(const ActivationMatrix& matrix, const std::filesystem::path& path) {
  const std::string bytes = EncodeTensor(matrix);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw TensorFormatError(TensorFormatError::Kind::kIo,
                            "tensor: cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw TensorFormatError(TensorFormatError::Kind::kIo,
                            "tensor: write failed for " + path.string());
}

}  // namespace geoprobe
