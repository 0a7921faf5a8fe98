// Copyright 2026 The t2v Authors. All Rights Reserved.
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

#ifndef T2V_FEATUREIO_HPP
#define T2V_FEATUREIO_HPP

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2v/errors.hpp"
#include "t2v/ops.hpp"
#include "t2v/tensor.hpp"

namespace t2v {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Raw float32 blobs: little-endian, row-major, no header.

inline std::vector<char> encode_f32_le(std::span<const float> values) {
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return bytes;
}

inline float decode_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= std::uint32_t(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

/// Writes a matrix as float32. Values are rounded to float first.
template <class Real>
void save_tensor_blob(const fs::path& path, const Tensor<Real>& t) {
  std::vector<float> vals(t.data().begin(), t.data().end());
  const auto bytes = encode_f32_le(vals);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open blob for writing: " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing blob: " + path.string());
}

template <class Real>
Tensor<Real> load_tensor_blob(const fs::path& path, std::size_t rows, std::size_t cols) {
  const std::uintmax_t expected = std::uintmax_t(rows) * cols * 4;
  std::error_code ec;
  const auto actual = fs::file_size(path, ec);
  if (ec) throw DataError("cannot stat blob " + path.string() + ": " + ec.message());
  if (actual != expected) {
    throw DataError("blob " + path.string() + " has " + std::to_string(actual) +
                    " bytes, expected " + std::to_string(expected) + " (" +
                    std::to_string(rows) + "x" + std::to_string(cols) + " float32)");
  }
  std::vector<char> bytes(expected);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open blob: " + path.string());
  is.read(bytes.data(), static_cast<std::streamsize>(expected));
  if (!is && expected) throw DataError("short read on blob: " + path.string());
  Tensor<Real> out({rows, cols});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<Real>(decode_f32_le(&bytes[i * 4]));
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct ExpertSpec {
  std::string name;
  std::size_t dim = 0;
  std::size_t max_segments = 0;
  friend bool operator==(const ExpertSpec&, const ExpertSpec&) = default;
};

/// How caption blobs are encoded. Embeddings are tokens x dim float matrices;
/// token ids are tokens x 1 matrices holding integral ids below `vocab`.
struct TextSpec {
  std::string kind = "embeddings";
  std::size_t dim = 0;
  std::size_t vocab = 0;
  bool token_ids() const { return kind == "token_ids"; }
  std::size_t blob_cols() const { return token_ids() ? 1 : dim; }
  friend bool operator==(const TextSpec&, const TextSpec&) = default;
};

struct FeatureRef {
  std::string path;
  std::size_t segments = 0;  // 0: expert unavailable for this video
  friend bool operator==(const FeatureRef&, const FeatureRef&) = default;
};

struct CaptionRef {
  std::string caption_id;
  std::string path;
  std::size_t tokens = 0;
  friend bool operator==(const CaptionRef&, const CaptionRef&) = default;
};

struct ItemRef {
  std::string video_id;
  std::vector<FeatureRef> features;  // aligned with DatasetManifest::experts
  std::vector<CaptionRef> captions;
  friend bool operator==(const ItemRef&, const ItemRef&) = default;
};

struct DatasetManifest {
  int version = 1;
  std::vector<ExpertSpec> experts;
  TextSpec text;
  std::vector<ItemRef> items;
  fs::path base_dir;  // blob paths resolve against this; not serialized

  std::size_t expert_index(const std::string& name) const {
    for (std::size_t i = 0; i < experts.size(); ++i)
      if (experts[i].name == name) return i;
    throw DataError("unknown expert '" + name + "'");
  }

  std::size_t item_index(const std::string& video_id) const {
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].video_id == video_id) return i;
    throw DataError("unknown video id '" + video_id + "'");
  }

  bool same_content(const DatasetManifest& o) const {
    return version == o.version && experts == o.experts && text == o.text && items == o.items;
  }
};

inline ordered_json manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["version"] = m.version;
  j["experts"] = ordered_json::array();
  for (const auto& e : m.experts)
    j["experts"].push_back({{"name", e.name}, {"dim", e.dim}, {"max_segments", e.max_segments}});
  ordered_json text{{"kind", m.text.kind}};
  if (m.text.token_ids()) text["vocab"] = m.text.vocab;
  else text["dim"] = m.text.dim;
  j["text"] = text;
  j["items"] = ordered_json::array();
  for (const auto& it : m.items) {
    ordered_json item;
    item["video_id"] = it.video_id;
    item["features"] = ordered_json::object();
    for (std::size_t e = 0; e < m.experts.size(); ++e) {
      const auto& f = it.features[e];
      if (f.segments == 0) continue;
      item["features"][m.experts[e].name] = {{"path", f.path}, {"segments", f.segments}};
    }
    item["captions"] = ordered_json::array();
    for (const auto& c : it.captions)
      item["captions"].push_back({{"caption_id", c.caption_id}, {"path", c.path}, {"tokens", c.tokens}});
    j["items"].push_back(std::move(item));
  }
  return j;
}

inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open manifest for writing: " + path.string());
  os << manifest_to_json(m).dump(2) << '\n';
}

namespace detail {

inline const ordered_json& field(const ordered_json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline std::size_t positive(const ordered_json& j, const char* key, const std::string& where,
                            bool allow_zero = false) {
  const auto& v = field(j, key, where);
  if (!v.is_number_integer() || v.get<long long>() < (allow_zero ? 0 : 1)) {
    throw DataError(where + ": field '" + key + "' must be a " +
                    (allow_zero ? "non-negative" : "positive") + " integer");
  }
  return v.get<std::size_t>();
}

inline std::string string_field(const ordered_json& j, const char* key, const std::string& where) {
  const auto& v = field(j, key, where);
  if (!v.is_string()) throw DataError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline void check_blob(const fs::path& path, std::size_t rows, std::size_t cols,
                       const std::string& where) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw DataError(where + ": missing blob file " + path.string());
  const std::uintmax_t expected = std::uintmax_t(rows) * cols * 4;
  if (size != expected) {
    throw DataError(where + ": blob " + path.string() + " has " + std::to_string(size) +
                    " bytes, expected " + std::to_string(expected));
  }
}

}  // namespace detail

/// Parses and validates a manifest. When `check_blobs` is set (the default),
/// every referenced blob must exist with the exact byte length implied by
/// the declared shape.
inline DatasetManifest parse_manifest(const ordered_json& j, const fs::path& base_dir,
                                      bool check_blobs = true) {
  DatasetManifest m;
  m.base_dir = base_dir;
  const std::string top = "manifest";
  const auto& version = detail::field(j, "version", top);
  if (!version.is_number_integer()) throw DataError("manifest: version must be an integer");
  m.version = version.get<int>();
  if (m.version != 1) throw DataError("manifest: unsupported version " + std::to_string(m.version));

  const auto& experts = detail::field(j, "experts", top);
  if (!experts.is_array() || experts.empty()) throw DataError("manifest: experts must be a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < experts.size(); ++i) {
    const std::string where = "experts[" + std::to_string(i) + "]";
    ExpertSpec e{detail::string_field(experts[i], "name", where),
                 detail::positive(experts[i], "dim", where),
                 detail::positive(experts[i], "max_segments", where)};
    if (!names.insert(e.name).second) throw DataError(where + ": duplicate expert name '" + e.name + "'");
    m.experts.push_back(std::move(e));
  }

  if (j.contains("text")) {
    const auto& t = j.at("text");
    m.text.kind = detail::string_field(t, "kind", "text");
    if (m.text.kind == "embeddings") {
      m.text.dim = detail::positive(t, "dim", "text");
    } else if (m.text.kind == "token_ids") {
      m.text.vocab = detail::positive(t, "vocab", "text");
    } else {
      throw DataError("text: unknown kind '" + m.text.kind + "'");
    }
  } else {
    throw DataError("manifest: missing field 'text'");
  }

  const auto& items = detail::field(j, "items", top);
  if (!items.is_array()) throw DataError("manifest: items must be an array");
  std::set<std::string> video_ids, caption_ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& ji = items[i];
    ItemRef item;
    item.video_id = detail::string_field(ji, "video_id", "items[" + std::to_string(i) + "]");
    const std::string where = "item '" + item.video_id + "'";
    if (!video_ids.insert(item.video_id).second) throw DataError(where + ": duplicate video id");
    item.features.resize(m.experts.size());
    const auto& feats = detail::field(ji, "features", where);
    if (!feats.is_object()) throw DataError(where + ": features must be an object");
    for (const auto& [name, jf] : feats.items()) {
      if (!names.count(name)) throw DataError(where + ": references undeclared expert '" + name + "'");
      const std::size_t e = m.expert_index(name);
      const std::string fwhere = where + " expert '" + name + "'";
      FeatureRef f{detail::string_field(jf, "path", fwhere),
                   detail::positive(jf, "segments", fwhere, /*allow_zero=*/true)};
      if (f.segments > m.experts[e].max_segments) {
        throw DataError(fwhere + ": " + std::to_string(f.segments) + " segments exceed max_segments " +
                        std::to_string(m.experts[e].max_segments));
      }
      if (f.segments > 0 && check_blobs)
        detail::check_blob(base_dir / f.path, f.segments, m.experts[e].dim, fwhere);
      if (f.segments == 0) f.path.clear();
      item.features[e] = std::move(f);
    }
    const auto& caps = detail::field(ji, "captions", where);
    if (!caps.is_array() || caps.empty()) throw DataError(where + ": captions must be a non-empty array");
    for (std::size_t c = 0; c < caps.size(); ++c) {
      const std::string cwhere = where + " captions[" + std::to_string(c) + "]";
      CaptionRef cap{detail::string_field(caps[c], "caption_id", cwhere),
                     detail::string_field(caps[c], "path", cwhere),
                     detail::positive(caps[c], "tokens", cwhere)};
      if (!caption_ids.insert(cap.caption_id).second)
        throw DataError(cwhere + ": duplicate caption id '" + cap.caption_id + "'");
      if (check_blobs) detail::check_blob(base_dir / cap.path, cap.tokens, m.text.blob_cols(), cwhere);
      item.captions.push_back(std::move(cap));
    }
    m.items.push_back(std::move(item));
  }
  return m;
}

inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_manifest(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// In-memory features

/// Segment features for one video, padded to each expert's max_segments.
template <class Real>
struct ExpertFeatureSet {
  std::vector<Tensor<Real>> features;  // per expert: max_segments x dim
  std::vector<Mask> masks;             // per expert: max_segments
  std::vector<std::uint8_t> available;

  std::size_t num_experts() const { return features.size(); }
  std::size_t num_available() const { return mask_count(available); }
};

/// One caption, padded to max_tokens. Exactly one of `embeddings` and
/// `token_ids` is populated, per the manifest's TextSpec.
template <class Real>
struct TextFeatureSet {
  Tensor<Real> embeddings;             // max_tokens x dim
  std::vector<std::size_t> token_ids;  // max_tokens (0 on padding)
  Mask mask;
  bool truncated = false;
  std::size_t original_tokens = 0;

  std::size_t length() const { return mask.size(); }
};

struct PaddingConfig {
  std::size_t max_tokens = 32;
};

template <class Real>
ExpertFeatureSet<Real> load_video_features(const DatasetManifest& m, std::size_t item) {
  const auto& ref = m.items.at(item);
  ExpertFeatureSet<Real> out;
  for (std::size_t e = 0; e < m.experts.size(); ++e) {
    const auto& spec = m.experts[e];
    const auto& f = ref.features[e];
    Tensor<Real> padded({spec.max_segments, spec.dim});
    Mask mask(spec.max_segments, 0);
    if (f.segments > 0) {
      auto raw = load_tensor_blob<Real>(m.base_dir / f.path, f.segments, spec.dim);
      std::copy(raw.data().begin(), raw.data().end(), padded.data().begin());
      std::fill_n(mask.begin(), f.segments, 1);
    }
    out.features.push_back(std::move(padded));
    out.masks.push_back(std::move(mask));
    out.available.push_back(f.segments > 0 ? 1 : 0);
  }
  return out;
}

/// Pads a raw tokens x blob_cols caption to `pad.max_tokens`. Over-length
/// captions keep their earliest tokens.
template <class Real>
TextFeatureSet<Real> make_text_features(const Tensor<Real>& raw, const TextSpec& spec, const PaddingConfig& pad,
                                        const std::string& what) {
  if (raw.rank() != 2 || raw.cols() != spec.blob_cols())
    throw DataError(what + ": expected " + std::to_string(spec.blob_cols()) + " columns per token, got shape " +
                    shape_str(raw.shape()));
  const std::size_t tokens = raw.rows();
  const std::size_t keep = std::min(tokens, pad.max_tokens);
  TextFeatureSet<Real> out;
  out.original_tokens = tokens;
  out.truncated = tokens > pad.max_tokens;
  out.mask.assign(pad.max_tokens, 0);
  std::fill_n(out.mask.begin(), keep, 1);
  if (spec.token_ids()) {
    out.token_ids.assign(pad.max_tokens, 0);
    for (std::size_t t = 0; t < keep; ++t) {
      const Real v = raw[t];
      if (v < 0 || v != std::floor(v) || static_cast<std::size_t>(v) >= spec.vocab) {
        throw DataError(what + ": token " + std::to_string(t) + " is not a valid id below vocab " +
                        std::to_string(spec.vocab));
      }
      out.token_ids[t] = static_cast<std::size_t>(v);
    }
  } else {
    out.embeddings = Tensor<Real>({pad.max_tokens, spec.dim});
    std::copy_n(raw.data().begin(), keep * spec.dim, out.embeddings.data().begin());
  }
  return out;
}

template <class Real>
TextFeatureSet<Real> load_caption(const DatasetManifest& m, std::size_t item, std::size_t caption,
                                  const PaddingConfig& pad) {
  const auto& c = m.items.at(item).captions.at(caption);
  auto raw = load_tensor_blob<Real>(m.base_dir / c.path, c.tokens, m.text.blob_cols());
  return make_text_features(raw, m.text, pad, "caption '" + c.caption_id + "'");
}

/// A fully materialized dataset: every video and caption in memory.
template <class Real>
struct Dataset {
  DatasetManifest manifest;
  PaddingConfig padding;
  std::vector<ExpertFeatureSet<Real>> videos;
  std::vector<std::vector<TextFeatureSet<Real>>> captions;
  std::size_t truncated_captions = 0;

  std::size_t size() const { return videos.size(); }
};

template <class Real>
Dataset<Real> load_dataset(DatasetManifest manifest, const PaddingConfig& pad) {
  Dataset<Real> d;
  d.padding = pad;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    d.videos.push_back(load_video_features<Real>(manifest, i));
    std::vector<TextFeatureSet<Real>> caps;
    for (std::size_t c = 0; c < manifest.items[i].captions.size(); ++c) {
      caps.push_back(load_caption<Real>(manifest, i, c, pad));
      if (caps.back().truncated) ++d.truncated_captions;
    }
    d.captions.push_back(std::move(caps));
  }
  d.manifest = std::move(manifest);
  return d;
}

}  // namespace t2v

#endif  // T2V_FEATUREIO_HPP
