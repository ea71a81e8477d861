// Copyright 2026 The trajdiff Authors.
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

#include "trajdiff/tensor/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "trajdiff/errors.h"

namespace trajdiff::tensor {
namespace {

constexpr char kMagic[8] = {'T', 'R', 'A', 'J', 'D', 'I', 'F', 'F'};

class Writer {
 public:
  void Bytes(const void* data, size_t n) {
    const auto* p = static_cast<const char*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }
  void U8(uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
  void U32(uint32_t v) {
    for (int i = 0; i < 4; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void U64(uint64_t v) {
    for (int i = 0; i < 8; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void String(std::string_view s) {
    U32(static_cast<uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  const std::vector<char>& buffer() const { return buffer_; }

 private:
  std::vector<char> buffer_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  const char* Take(size_t n) {
    if (pos_ + n > data_.size()) {
      throw DataError("checkpoint " + path_ + " is truncated at byte " +
                      std::to_string(pos_));
    }
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  uint8_t U8() { return static_cast<uint8_t>(*Take(1)); }
  uint32_t U32() {
    const auto* p = reinterpret_cast<const unsigned char*>(Take(4));
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
  }
  uint64_t U64() {
    const auto* p = reinterpret_cast<const unsigned char*>(Take(8));
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
  }
  std::string String() {
    const uint32_t n = U32();
    return std::string(Take(n), n);
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

const Array* Checkpoint::Find(std::string_view name) const {
  for (const auto& [n, a] : records) {
    if (n == name) return &a;
  }
  return nullptr;
}

void WriteCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  Writer w;
  w.Bytes(kMagic, sizeof(kMagic));
  w.U32(kCheckpointVersion);
  w.String(checkpoint.manifest.dump());
  w.U32(static_cast<uint32_t>(checkpoint.records.size()));
  for (const auto& [name, array] : checkpoint.records) {
    w.String(name);
    w.U8(kDtypeFloat64);
    w.U32(static_cast<uint32_t>(array.rank()));
    for (int64_t d : array.shape()) w.U64(static_cast<uint64_t>(d));
    for (double v : array.values()) w.U64(std::bit_cast<uint64_t>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint ReadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  Reader r(std::move(data), path);
  if (std::memcmp(r.Take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path + " is not a trajdiff checkpoint");
  }
  const uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version) + " in " + path);
  }
  Checkpoint ckpt;
  try {
    ckpt.manifest = nlohmann::json::parse(r.String());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint manifest in " + path + ": " + e.what());
  }
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.String();
    const uint8_t dtype = r.U8();
    if (dtype != kDtypeFloat64) {
      throw DataError("record " + name + " has unsupported dtype tag " +
                      std::to_string(dtype));
    }
    const uint32_t rank = r.U32();
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int64_t>(r.U64());
    }
    std::vector<double> values(static_cast<size_t>(NumElements(shape)));
    for (double& v : values) v = std::bit_cast<double>(r.U64());
    ckpt.records.emplace_back(std::move(name),
                              Array(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw DataError("trailing bytes in checkpoint " + path);
  return ckpt;
}

void AppendStore(std::string_view prefix, const ParameterStore& store,
                 Checkpoint& checkpoint) {
  const std::string p(prefix);
  for (const std::string& name : store.Names()) {
    const ParameterStore::Entry& e = store.entry(name);
    checkpoint.records.emplace_back(p + "/param/" + name, *e.value);
    checkpoint.records.emplace_back(p + "/m/" + name, e.first_moment);
    checkpoint.records.emplace_back(p + "/v/" + name, e.second_moment);
  }
  checkpoint.manifest[p + ".step"] = store.step();
}

void LoadStore(std::string_view prefix, const Checkpoint& checkpoint,
               ParameterStore& store) {
  const std::string p(prefix);
  for (const std::string& name : store.Names()) {
    ParameterStore::Entry& e = store.mutable_entry(name);
    const Array* value = checkpoint.Find(p + "/param/" + name);
    if (value == nullptr) {
      throw ConfigError("checkpoint lacks parameter " + p + "/" + name +
                        "; architecture does not match the config");
    }
    if (value->shape() != e.value->shape()) {
      throw ConfigError("parameter " + p + "/" + name + " has shape " +
                        ShapeToString(value->shape()) +
                        " in the checkpoint but " +
                        ShapeToString(e.value->shape()) + " in the config");
    }
    *e.value = *value;
    if (const Array* m = checkpoint.Find(p + "/m/" + name)) e.first_moment = *m;
    if (const Array* v = checkpoint.Find(p + "/v/" + name)) e.second_moment = *v;
  }
  if (auto it = checkpoint.manifest.find(p + ".step");
      it != checkpoint.manifest.end()) {
    store.set_step(it->get<int64_t>());
  }
}

}  // namespace trajdiff::tensor
