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

// Dataset manifests, frame sampling and frame preprocessing.
//
// Manifest format (UTF-8, one record per line):
//
//   # comment
//   !dataset=<name>         optional, defaults to the file stem
//   !task=<id>              optional, must agree with the records
//   !interval=<k>           sampling interval in frames, default 10
//   !exclude=<path>[@<n>]   drop a whole clip, or frame n of a clip
//   <media_path>\t<class_name>\t<task_id>
//
// A media path names either one pre-extracted image or a directory of frame
// images (taken in lexicographic order). Relative paths resolve against the
// manifest's directory.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fusionpool/backbone_spec.hpp"
#include "fusionpool/detail/binary_io.hpp"
#include "fusionpool/error.hpp"
#include "fusionpool/image.hpp"

namespace fusionpool {

inline constexpr int kDefaultSamplingInterval = 10;

struct ManifestEntry {
  std::string media_path;
  std::string class_name;

  bool operator==(const ManifestEntry&) const = default;
};

// A clip-level (frame < 0) or frame-level exclusion from the cleaning pass.
struct Exclusion {
  std::string media_path;
  std::int64_t frame = -1;

  auto operator<=>(const Exclusion&) const = default;
};

struct DatasetManifest {
  std::string dataset_name;
  std::uint32_t task_id = 0;
  std::vector<ManifestEntry> entries;
  int sampling_interval = kDefaultSamplingInterval;
  std::set<Exclusion> excluded;
  // Directory relative media paths are resolved against.
  std::string base_dir;

  bool operator==(const DatasetManifest& o) const {
    return dataset_name == o.dataset_name && task_id == o.task_id &&
           entries == o.entries && sampling_interval == o.sampling_interval &&
           excluded == o.excluded;
  }

  bool is_excluded(std::string_view media_path, std::int64_t frame) const {
    return excluded.contains({std::string(media_path), -1}) ||
           excluded.contains({std::string(media_path), frame});
  }
};

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

inline DatasetManifest parse_manifest(std::string_view text, std::string dataset_name,
                                      std::string_view origin = "<manifest>") {
  DatasetManifest manifest;
  manifest.dataset_name = std::move(dataset_name);
  bool task_declared = false;
  bool task_seen = false;
  std::unordered_set<std::string> seen_paths;

  auto malformed = [&](std::size_t line_no, const std::string& why) {
    fail(ErrorCode::kFormat,
         std::string(origin) + ":" + std::to_string(line_no) + ": " + why);
  };
  auto set_task = [&](std::size_t line_no, std::uint32_t id) {
    if ((task_declared || task_seen) && id != manifest.task_id) {
      malformed(line_no, "task id " + std::to_string(id) + " conflicts with task id " +
                             std::to_string(manifest.task_id));
    }
    manifest.task_id = id;
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (nl == text.size()) break;
      continue;
    }

    if (line.front() == '!') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) malformed(line_no, "directive without '='");
      const auto key = line.substr(1, eq - 1);
      const auto value = line.substr(eq + 1);
      if (key == "interval") {
        int k = 0;
        if (!detail::parse_int(value, k) || k < 1) {
          malformed(line_no, "sampling interval must be a positive integer");
        }
        manifest.sampling_interval = k;
      } else if (key == "dataset") {
        if (value.empty()) malformed(line_no, "empty dataset name");
        manifest.dataset_name = std::string(value);
      } else if (key == "task") {
        std::uint32_t id = 0;
        if (!detail::parse_int(value, id)) malformed(line_no, "bad task id");
        set_task(line_no, id);
        task_declared = true;
      } else if (key == "exclude") {
        Exclusion ex;
        const auto at = value.rfind('@');
        std::int64_t frame = -1;
        if (at != std::string_view::npos && detail::parse_int(value.substr(at + 1), frame) &&
            frame >= 0) {
          ex.media_path = std::string(value.substr(0, at));
          ex.frame = frame;
        } else {
          ex.media_path = std::string(value);
        }
        if (ex.media_path.empty()) malformed(line_no, "empty exclusion path");
        manifest.excluded.insert(std::move(ex));
      } else {
        malformed(line_no, "unknown directive '" + std::string(key) + "'");
      }
      if (nl == text.size()) break;
      continue;
    }

    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3) {
      malformed(line_no, "expected 3 tab-separated fields, got " +
                             std::to_string(fields.size()));
    }
    if (fields[0].empty()) malformed(line_no, "empty media path");
    if (fields[1].empty()) malformed(line_no, "empty class name");
    std::uint32_t task = 0;
    if (!detail::parse_int(std::string_view(fields[2]), task)) {
      malformed(line_no, "bad task id '" + fields[2] + "'");
    }
    set_task(line_no, task);
    task_seen = true;
    if (!seen_paths.insert(fields[0]).second) {
      fail(ErrorCode::kDuplicate, std::string(origin) + ":" + std::to_string(line_no) +
                                      ": duplicate media path '" + fields[0] + "'");
    }
    manifest.entries.push_back({fields[0], fields[1]});
    if (nl == text.size()) break;
  }
  return manifest;
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "manifest '" + path + "' not found");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::filesystem::path p(path);
  auto manifest = parse_manifest(buffer.str(), p.stem().string(), path);
  manifest.base_dir = p.parent_path().string();
  return manifest;
}

inline std::string format_manifest(const DatasetManifest& manifest) {
  std::ostringstream out;
  out << "!dataset=" << manifest.dataset_name << '\n';
  out << "!task=" << manifest.task_id << '\n';
  out << "!interval=" << manifest.sampling_interval << '\n';
  for (const auto& ex : manifest.excluded) {
    out << "!exclude=" << ex.media_path;
    if (ex.frame >= 0) out << '@' << ex.frame;
    out << '\n';
  }
  for (const auto& e : manifest.entries) {
    out << e.media_path << '\t' << e.class_name << '\t' << manifest.task_id << '\n';
  }
  return out.str();
}

inline void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  const auto text = format_manifest(manifest);
  detail::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// Indices {0, k, 2k, ...} below frame_count.
inline std::vector<std::int64_t> sample_frames(std::int64_t frame_count, int interval) {
  if (interval < 1) {
    fail(ErrorCode::kInvalidArgument, "sampling interval must be >= 1");
  }
  if (frame_count < 0) {
    fail(ErrorCode::kInvalidArgument, "frame count must be non-negative");
  }
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>((frame_count + interval - 1) / interval));
  for (std::int64_t i = 0; i < frame_count; i += interval) out.push_back(i);
  return out;
}

// sample_id = FNV-1a-64 over: dataset name, 0x00, media path, 0x00,
// frame index as u64 little-endian.
inline std::uint64_t make_sample_id(std::string_view dataset_name,
                                    std::string_view media_path,
                                    std::uint64_t frame_index) {
  detail::Fnv1a64 h;
  const std::uint8_t zero = 0;
  h.update(dataset_name).update_pod(zero).update(media_path).update_pod(zero);
  h.update_pod(frame_index);
  return h.digest();
}

// One preprocessed frame, height × width × channels interleaved.
struct FrameTensor {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> values;
  std::uint64_t source_id = 0;

  float at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const FrameTensor&) const = default;
};

inline constexpr std::array<double, 3> kImagenetMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImagenetStd = {0.229, 0.224, 0.225};

inline double normalize_sample(double raw, int channel, Normalization scheme) {
  if (scheme == Normalization::kScalePm1) return raw / 127.5 - 1.0;
  return (raw / 255.0 - kImagenetMean[channel]) / kImagenetStd[channel];
}

// Bilinear resize to the backbone's square input, then the backbone's
// normalization. Grey images are replicated to three channels and a fourth
// (alpha) channel is dropped.
inline FrameTensor preprocess_frame(const RgbImage& raw, const BackboneSpec& spec,
                                    std::uint64_t source_id = 0) {
  if (raw.width <= 0 || raw.height <= 0) {
    fail(ErrorCode::kInvalidArgument, "zero-dimension image");
  }
  if (raw.channels != 1 && raw.channels != 3 && raw.channels != 4) {
    fail(ErrorCode::kInvalidArgument,
         "unsupported channel count " + std::to_string(raw.channels));
  }
  if (raw.pixels.size() != static_cast<std::size_t>(raw.width) * raw.height * raw.channels) {
    fail(ErrorCode::kInvalidArgument, "image buffer size does not match its dimensions");
  }
  std::vector<double> rgb(static_cast<std::size_t>(raw.width) * raw.height * 3);
  for (std::size_t p = 0; p < static_cast<std::size_t>(raw.width) * raw.height; ++p) {
    for (int c = 0; c < 3; ++c) {
      const int src_c = raw.channels == 1 ? 0 : c;
      rgb[p * 3 + c] = raw.pixels[p * raw.channels + src_c];
    }
  }
  const int size = spec.input_size;
  const auto resized = resize_bilinear(rgb, raw.width, raw.height, 3, size, size);

  FrameTensor out;
  out.height = size;
  out.width = size;
  out.channels = 3;
  out.source_id = source_id;
  out.values.resize(resized.size());
  for (std::size_t i = 0; i < resized.size(); ++i) {
    out.values[i] =
        static_cast<float>(normalize_sample(resized[i], static_cast<int>(i % 3), spec.normalization));
  }
  return out;
}

// Frame files behind a media path: the file itself, or the sorted image
// files of a directory.
inline std::vector<std::string> list_frame_files(const std::string& media_path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_regular_file(media_path, ec)) return {media_path};
  if (!fs::is_directory(media_path, ec)) {
    fail(ErrorCode::kIo, "media path '" + media_path + "' not found");
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(media_path)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = detail::ascii_fold(entry.path().extension().string());
    if (ext == ".png") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// One frame selected for extraction.
struct SampledFrame {
  std::uint64_t sample_id = 0;
  std::string media_path;  // as written in the manifest
  std::int64_t frame_index = 0;
  std::string frame_file;  // resolved file to decode
  std::string class_name;
  std::uint32_t task_id = 0;
};

inline std::string resolve_media_path(const DatasetManifest& manifest,
                                      const std::string& media_path) {
  const std::filesystem::path p(media_path);
  if (p.is_absolute() || manifest.base_dir.empty()) return media_path;
  return (std::filesystem::path(manifest.base_dir) / p).string();
}

// Maps a resolved media path to the path holding its frames.
using MediaLocator = std::function<std::string(const std::string&)>;

// Applies sampling and the exclusion list to every manifest entry.
inline std::vector<SampledFrame> plan_frames(const DatasetManifest& manifest,
                                             const MediaLocator& locate = {}) {
  std::vector<SampledFrame> out;
  for (const auto& entry : manifest.entries) {
    if (manifest.is_excluded(entry.media_path, -1)) continue;
    auto media = resolve_media_path(manifest, entry.media_path);
    if (locate) media = locate(media);
    const auto files = list_frame_files(media);
    for (auto index : sample_frames(static_cast<std::int64_t>(files.size()),
                                    manifest.sampling_interval)) {
      if (manifest.is_excluded(entry.media_path, index)) continue;
      SampledFrame f;
      f.sample_id = make_sample_id(manifest.dataset_name, entry.media_path,
                                   static_cast<std::uint64_t>(index));
      f.media_path = entry.media_path;
      f.frame_index = index;
      f.frame_file = files[static_cast<std::size_t>(index)];
      f.class_name = entry.class_name;
      f.task_id = manifest.task_id;
      out.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace fusionpool
