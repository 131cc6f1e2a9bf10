#include "sentinel/frame_store.hpp"

#include "sentinel/error.hpp"
#include "text_util.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace sentinel {

namespace fs = std::filesystem;

double Frame::mean() const {
  if (luminance.empty()) return 0.0;
  const std::uint64_t sum = std::accumulate(luminance.begin(), luminance.end(), std::uint64_t{0});
  return static_cast<double>(sum) / static_cast<double>(luminance.size());
}

void validate_frame(const Frame& frame) {
  if (frame.width < kMinFrameSide || frame.height < kMinFrameSide)
    throw Error(fmt::format("frame {} is {}x{}, smaller than the {}x{} minimum", frame.frame_index,
                            frame.width, frame.height, kMinFrameSide, kMinFrameSide));
  if (frame.luminance.size() != static_cast<std::size_t>(frame.width) * frame.height)
    throw Error(fmt::format("frame {} holds {} pixels, expected {}", frame.frame_index,
                            frame.luminance.size(), frame.width * frame.height));
}

std::optional<std::size_t> FrameManifest::position_of(std::int64_t frame_index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), frame_index,
                             [](const ManifestEntry& e, std::int64_t v) { return e.frame_index < v; });
  if (it == entries.end() || it->frame_index != frame_index) return std::nullopt;
  return static_cast<std::size_t>(it - entries.begin());
}

namespace {

void apply_directive(FrameManifest& m, std::string_view comment, const std::string& source, int line) {
  comment.remove_prefix(1);
  for (auto token : text::split_ws(comment)) {
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    auto bad = [&] { return ParseError(source, line, fmt::format("bad value for {}", key)); };
    if (key == "width" || key == "height") {
      int v = 0;
      if (!text::parse_number(value, v) || v < kMinFrameSide) throw bad();
      (key == "width" ? m.width : m.height) = v;
    } else if (key == "effective_fps") {
      double v = 0;
      if (!text::parse_number(value, v) || !(v > 0)) throw bad();
      m.effective_fps = v;
    } else if (key == "video_id") {
      m.video_id = std::string(value);
    }
  }
}

}  // namespace

FrameManifest load_manifest(const fs::path& path) {
  const std::string source = path.string();
  const std::string content = text::read_file(path, "manifest");
  FrameManifest m;
  m.base_dir = path.parent_path();
  m.video_id = path.parent_path().filename().string();

  std::vector<int> line_of;  // parallel to m.entries
  for (const auto& line : text::lines(content, /*keep_comments=*/true)) {
    if (line.content.front() == '#') {
      apply_directive(m, line.content, source, line.number);
      continue;
    }
    const auto fields = text::split_ws(line.content);
    if (fields.size() != 3)
      throw ParseError(source, line.number, "expected `<frame_index> <timestamp_s> <relative_path>`");
    ManifestEntry e;
    if (!text::parse_number(fields[0], e.frame_index) || e.frame_index < 0)
      throw ParseError(source, line.number, "bad frame index");
    if (!text::parse_number(fields[1], e.timestamp_s) || !std::isfinite(e.timestamp_s))
      throw ParseError(source, line.number, "bad timestamp");
    e.file = fs::path(std::string(fields[2]));
    m.entries.push_back(std::move(e));
    line_of.push_back(line.number);
  }

  std::vector<std::size_t> order(m.entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return m.entries[a].frame_index < m.entries[b].frame_index;
  });
  std::vector<ManifestEntry> sorted;
  sorted.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& e = m.entries[order[i]];
    if (i > 0) {
      const auto& prev = m.entries[order[i - 1]];
      if (prev.frame_index == e.frame_index)
        throw ParseError(source, std::max(line_of[order[i]], line_of[order[i - 1]]),
                         fmt::format("duplicate frame index {}", e.frame_index));
      if (!(e.timestamp_s > prev.timestamp_s))
        throw ParseError(source, line_of[order[i]],
                         fmt::format("timestamp {} does not increase with frame index {}", e.timestamp_s,
                                     e.frame_index));
    }
    sorted.push_back(e);
  }
  m.entries = std::move(sorted);
  return m;
}

void write_manifest(const FrameManifest& manifest, const fs::path& path) {
  std::string out = "# frame_index timestamp_s relative_path\n";
  out += fmt::format("# effective_fps={}", manifest.effective_fps);
  if (manifest.width) out += fmt::format(" width={}", *manifest.width);
  if (manifest.height) out += fmt::format(" height={}", *manifest.height);
  if (!manifest.video_id.empty()) out += fmt::format(" video_id={}", manifest.video_id);
  out += '\n';
  for (const auto& e : manifest.entries)
    out += fmt::format("{} {} {}\n", e.frame_index, e.timestamp_s, e.file.generic_string());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write manifest: " + path.string());
  f << out;
  if (!f) throw Error("cannot write manifest: " + path.string());
}

// ---------------------------------------------------------------------------
// PNM

namespace {

class PnmHeaderReader {
 public:
  PnmHeaderReader(const std::string& data, const std::string& source) : data_(data), source_(source) {}

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) throw Error("truncated image header: " + source_);
    return data_.substr(start, pos_ - start);
  }

  int integer() {
    int v = 0;
    const auto t = token();
    if (!text::parse_number(std::string_view(t), v) || v <= 0) throw Error("bad image header: " + source_);
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() const { return pos_ + 1; }

 private:
  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      if (std::isspace(static_cast<unsigned char>(data_[pos_]))) {
        ++pos_;
      } else if (data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& data_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage read_pnm(const fs::path& path) {
  const std::string source = path.string();
  const std::string data = text::read_file(path, "image file");
  PnmHeaderReader header(data, source);
  const std::string magic = header.token();
  if (magic != "P5" && magic != "P6") throw Error("unsupported image format " + magic + ": " + source);
  GrayImage img;
  img.width = header.integer();
  img.height = header.integer();
  if (header.integer() != 255) throw Error("only maxval 255 is supported: " + source);
  const std::size_t channels = magic == "P6" ? 3 : 1;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  const std::size_t offset = header.raster_offset();
  if (data.size() < offset + n * channels) throw Error("truncated raster: " + source);
  img.pixels.resize(n);
  const auto* raster = reinterpret_cast<const std::uint8_t*>(data.data() + offset);
  if (channels == 1) {
    std::copy(raster, raster + n, img.pixels.begin());
  } else {
    for (std::size_t i = 0; i < n; ++i)
      img.pixels[i] = luma(raster[3 * i], raster[3 * i + 1], raster[3 * i + 2]);
  }
  return img;
}

void write_pgm(const fs::path& path, int width, int height, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw Error("pixel count does not match image size for " + path.string());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write image: " + path.string());
  f << "P5\n" << width << ' ' << height << "\n255\n";
  f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!f) throw Error("cannot write image: " + path.string());
}

// ---------------------------------------------------------------------------

Frame read_frame_at(const FrameManifest& manifest, std::size_t position) {
  if (position >= manifest.entries.size())
    throw Error(fmt::format("manifest position {} out of range", position));
  const auto& e = manifest.entries[position];
  GrayImage img = read_pnm(manifest.base_dir / e.file);
  if ((manifest.width && *manifest.width != img.width) || (manifest.height && *manifest.height != img.height))
    throw Error(fmt::format("frame {} is {}x{} but the manifest declares {}x{}", e.frame_index, img.width,
                            img.height, manifest.width.value_or(img.width), manifest.height.value_or(img.height)));
  Frame frame{img.width, img.height, std::move(img.pixels), e.frame_index, e.timestamp_s};
  validate_frame(frame);
  return frame;
}

Frame read_frame(const FrameManifest& manifest, std::int64_t frame_index) {
  const auto pos = manifest.position_of(frame_index);
  if (!pos) throw Error(fmt::format("frame index {} is not in the manifest", frame_index));
  return read_frame_at(manifest, *pos);
}

FrameManifest filter_corrupted(const FrameManifest& manifest, double mean_threshold, double sample_period_s) {
  if (!(mean_threshold >= 0.0 && mean_threshold <= 255.0))
    throw Error(fmt::format("mean_threshold {} outside [0,255]", mean_threshold));
  if (!(sample_period_s > 0.0)) throw Error(fmt::format("sample_period_s {} must be positive", sample_period_s));

  FrameManifest out = manifest;
  out.entries.clear();
  std::size_t i = 0;
  const auto& entries = manifest.entries;
  while (i < entries.size()) {
    const auto window = static_cast<std::int64_t>(std::floor(entries[i].timestamp_s / sample_period_s));
    std::size_t end = i;
    while (end < entries.size() &&
           static_cast<std::int64_t>(std::floor(entries[end].timestamp_s / sample_period_s)) == window)
      ++end;
    const bool corrupted = read_frame_at(manifest, i).mean() < mean_threshold;
    if (!corrupted) out.entries.insert(out.entries.end(), entries.begin() + i, entries.begin() + end);
    i = end;
  }
  return out;
}

}  // namespace sentinel
