#pragma once

#include "sentinel/frame_store.hpp"

#include <fmt/format.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace support {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "sentinel_test_XXXXXX").string();
    if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline sentinel::Frame flat_frame(int w, int h, std::uint8_t value, std::int64_t index = 0) {
  sentinel::Frame f;
  f.width = w;
  f.height = h;
  f.luminance.assign(static_cast<std::size_t>(w) * h, value);
  f.frame_index = index;
  f.timestamp_s = static_cast<double>(index);
  return f;
}

/// Writes one PGM per frame plus manifest.txt (1 fps) and returns the loaded manifest.
inline sentinel::FrameManifest write_video(const fs::path& dir, const std::vector<sentinel::Frame>& frames) {
  fs::create_directories(dir / "frames");
  std::string manifest = "# frame_index timestamp_s relative_path\n";
  for (const auto& f : frames) {
    const auto name = fmt::format("frames/f_{:06d}.pgm", f.frame_index);
    sentinel::write_pgm(dir / name, f.width, f.height, f.luminance);
    manifest += fmt::format("{} {} {}\n", f.frame_index, f.timestamp_s, name);
  }
  write_text(dir / "manifest.txt", manifest);
  return sentinel::load_manifest(dir / "manifest.txt");
}

/// Video of n frames whose pixel values come from value(frame, x, y).
inline sentinel::FrameManifest synthetic_video(const fs::path& dir, int w, int h, int n,
                                               const std::function<std::uint8_t(int, int, int)>& value) {
  std::vector<sentinel::Frame> frames;
  for (int t = 0; t < n; ++t) {
    auto f = flat_frame(w, h, 0, t);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) f.luminance[static_cast<std::size_t>(y) * w + x] = value(t, x, y);
    frames.push_back(std::move(f));
  }
  return write_video(dir, frames);
}

/// Absolute path of the CLI binary, passed in by the build.
inline std::string cli_path() {
#ifdef SENTINEL_CLI
  return SENTINEL_CLI;
#else
  return "stall_sentinel";
#endif
}

}  // namespace support
