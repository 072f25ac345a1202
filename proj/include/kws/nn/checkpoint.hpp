// Copyright 2026 The kws Authors.
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

// SCNN checkpoints:
//
//   "SCNN" | version u8 (=1) | u32 spec length | spec text | SCFT tensor...
//
// Tensors follow Model::state() order: per layer, parameters then buffers.

#pragma once

#include <filesystem>
#include <string>

#include "kws/error.hpp"
#include "kws/io.hpp"
#include "kws/nn/model.hpp"
#include "kws/scft.hpp"

namespace kws::nn {

constexpr std::uint8_t kCheckpointVersion = 1;

inline io::Bytes encode_checkpoint(Model<float>& model) {
  io::Bytes out;
  io::put_tag(out, "SCNN");
  out.push_back(kCheckpointVersion);
  const std::string text = model.spec().to_text();
  io::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (auto* t : model.state()) {
    std::vector<std::uint32_t> dims(t->shape.begin(), t->shape.end());
    append_scft(out, FeatureKind::tensor, dims, t->data);
  }
  return out;
}

inline Model<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (!io::tag_equals(bytes, 0, "SCNN") || bytes.size() < 9) throw Error(ErrorCode::ParseError, "missing SCNN magic");
  if (bytes[4] != kCheckpointVersion) {
    throw Error(ErrorCode::ParseError, "unsupported checkpoint version " + std::to_string(bytes[4]));
  }
  const std::uint32_t len = io::get_u32(bytes, 5);
  if (bytes.size() < 9 + static_cast<std::size_t>(len)) throw Error(ErrorCode::ParseError, "truncated model spec");
  const std::string text(bytes.begin() + 9, bytes.begin() + 9 + len);
  Model<float> model(ModelSpec::from_text(text));
  std::size_t offset = 9 + len;
  for (auto* t : model.state()) {
    ScftTensor s = decode_scft(bytes, offset);
    if (!std::equal(s.dims.begin(), s.dims.end(), t->shape.begin(), t->shape.end())) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint tensor does not match model layout");
    }
    t->data = std::move(s.data);
  }
  if (offset != bytes.size()) throw Error(ErrorCode::ParseError, "trailing bytes in checkpoint");
  return model;
}

inline void save_checkpoint(const std::filesystem::path& path, Model<float>& model) {
  io::write_file(path, encode_checkpoint(model));
}

inline Model<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace kws::nn
