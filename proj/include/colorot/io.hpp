#pragma once

// File formats of the command-line front end: CSV signals, 8-bit PNG images,
// PNG frame sequences, raw float64 dumps and the JSON run manifest.
//
// Images are stored as (width, height, 3) or (width, height) arrays, x fastest.

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "colorot/engine.hpp"
#include "colorot/grid.hpp"

#ifndef COLOROT_VERSION_STRING
#define COLOROT_VERSION_STRING "0.0.0"
#endif

namespace colorot::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kVersion = COLOROT_VERSION_STRING;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class InputMode { SignalCsv, ImagePng };
enum class FrameFormat { PngSeq, RawF64 };

inline const char* to_string(InputMode mode) noexcept {
  return mode == InputMode::SignalCsv ? "signal_csv" : "image_png";
}
inline const char* to_string(FrameFormat format) noexcept {
  return format == FrameFormat::PngSeq ? "png_seq" : "raw_f64";
}

inline InputMode input_mode_from_string(const std::string& name) {
  if (name == "signal_csv" || name == "csv") return InputMode::SignalCsv;
  if (name == "image_png" || name == "png") return InputMode::ImagePng;
  throw std::invalid_argument("unknown input mode '" + name + "'");
}

inline FrameFormat frame_format_from_string(const std::string& name) {
  if (name == "png_seq" || name == "png") return FrameFormat::PngSeq;
  if (name == "raw_f64" || name == "raw") return FrameFormat::RawF64;
  throw std::invalid_argument("unknown frame format '" + name + "' (expected png_seq or raw_f64)");
}

/// Guess from the extension: .csv and .txt are signals, everything else PNG.
inline InputMode guess_input_mode(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" || ext == ".txt" ? InputMode::SignalCsv : InputMode::ImagePng;
}

// CSV ----------------------------------------------------------------------

/// One real per line; blank lines are skipped.
inline std::vector<double> parse_signal_csv(const std::string& text, const std::string& where = "csv") {
  std::vector<double> values;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r,");
    const char* begin = line.data() + first;
    const char* end = line.data() + last + 1;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) {
      throw IoError(where + ":" + std::to_string(number) + ": not a number: '" + line + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw IoError(where + ": no values");
  return values;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline NdArray<double> load_signal_csv(const fs::path& path) {
  std::vector<double> v = parse_signal_csv(read_text(path), path.string());
  const std::size_t n = v.size();
  return NdArray<double>({n}, std::move(v));
}

// PNG ----------------------------------------------------------------------

struct PngHeader {
  std::uint32_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
};

inline PngHeader read_png_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char head[26] = {};
  in.read(reinterpret_cast<char*>(head), sizeof head);
  if (in.gcount() != static_cast<std::streamsize>(sizeof head) || png_sig_cmp(head, 0, 8) != 0 ||
      std::string(reinterpret_cast<char*>(head + 12), 4) != "IHDR") {
    throw IoError(path.string() + ": not a PNG file");
  }
  auto be32 = [&](int at) {
    return (std::uint32_t{head[at]} << 24) | (std::uint32_t{head[at + 1]} << 16) |
           (std::uint32_t{head[at + 2]} << 8) | std::uint32_t{head[at + 3]};
  };
  return {be32(16), be32(20), head[24], head[25]};
}

/// Reads an 8-bit PNG. Grey and grey+alpha give (width, height); every other
/// colour type gives (width, height, 3). Alpha is ignored.
inline NdArray<double> load_png(const fs::path& path) {
  const PngHeader header = read_png_header(path);
  if (header.bit_depth != 8) {
    throw IoError(path.string() + ": only 8-bit PNG channels are supported, got " +
                  std::to_string(header.bit_depth) + "-bit");
  }
  const bool gray = header.color_type == PNG_COLOR_TYPE_GRAY ||
                    header.color_type == PNG_COLOR_TYPE_GRAY_ALPHA;
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError(path.string() + ": " + image.message);
  }
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const std::size_t w = image.width, h = image.height, channels = gray ? 1 : 3;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + message);
  }
  Extents extents = gray ? Extents{w, h} : Extents{w, h, 3};
  std::vector<double> values(w * h * channels);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        values[x + w * (y + h * c)] = buffer[(y * w + x) * channels + c] / 255.0;
      }
    }
  }
  return NdArray<double>(std::move(extents), std::move(values));
}

inline std::uint8_t quantize(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

/// Writes a (w), (w, h) or (w, h, 3) array as an 8-bit PNG, clamped to [0, 1].
inline void save_png(const NdArray<double>& frame, const fs::path& path) {
  const Extents& e = frame.extents();
  if (e.empty() || e.size() > 3 || (e.size() == 3 && e[2] != 3)) {
    throw ShapeError("save_png: cannot write an array of shape " + format_extents(e));
  }
  const std::size_t w = e[0], h = e.size() > 1 ? e[1] : 1, channels = e.size() == 3 ? 3 : 1;
  std::vector<png_byte> buffer(w * h * channels);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        buffer[(y * w + x) * channels + c] = quantize(frame[x + w * (y + h * c)]);
      }
    }
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}

// Inputs -------------------------------------------------------------------

/// Rescales both endpoints to the mean of their masses: f_i * (m0 + m1) / (2 m_i).
inline void equalize_mass(NdArray<double>& f0, NdArray<double>& f1) {
  auto total = [](const NdArray<double>& f) {
    double s = 0.0;
    for (double v : f.storage()) s += v;
    return s;
  };
  const double m0 = total(f0), m1 = total(f1);
  if (!(m0 > 0.0) || !(m1 > 0.0)) {
    throw std::invalid_argument("mass equalization needs two inputs of positive mass");
  }
  const double target = 0.5 * (m0 + m1);
  for (double& v : f0.storage()) v = v / m0 * target;
  for (double& v : f1.storage()) v = v / m1 * target;
}

struct LoadedInputs {
  NdArray<double> f0, f1;
  GridSpec grid;
};

/// Loads both endpoints and derives the grid. `grid_template` supplies the
/// time steps and boundary kinds.
inline LoadedInputs load_inputs(const fs::path& path0, const fs::path& path1, InputMode mode,
                                bool equalize = false, const GridSpec& grid_template = {}) {
  for (const auto& p : {path0, path1}) {
    if (!fs::exists(p)) throw IoError("input file not found: " + p.string());
  }
  LoadedInputs in;
  if (mode == InputMode::SignalCsv) {
    in.f0 = load_signal_csv(path0);
    in.f1 = load_signal_csv(path1);
  } else {
    in.f0 = load_png(path0);
    in.f1 = load_png(path1);
  }
  if (in.f0.extents() != in.f1.extents()) {
    throw ShapeError("inputs differ in shape: " + format_extents(in.f0.extents()) + " vs " +
                     format_extents(in.f1.extents()));
  }
  if (equalize) equalize_mass(in.f0, in.f1);
  in.grid = grid_template;
  in.grid.spatial_dims = in.f0.extents();
  in.grid.validate();
  return in;
}

// Outputs ------------------------------------------------------------------

inline std::string frame_name(std::size_t index, const char* stem = "frame",
                              const char* ext = ".png") {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%s_%04zu%s", stem, index, ext);
  return buffer;
}

/// (R + G + B) / 3 of an RGB frame.
inline NdArray<double> intensity(const NdArray<double>& frame) {
  const Extents& e = frame.extents();
  if (e.size() != 3 || e[2] != 3) throw ShapeError("intensity needs an RGB frame");
  const std::size_t plane = e[0] * e[1];
  std::vector<double> out(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    out[i] = (frame[i] + frame[i + plane] + frame[i + 2 * plane]) / 3.0;
  }
  return NdArray<double>({e[0], e[1]}, std::move(out));
}

inline void write_binary_f64(const fs::path& path, const std::vector<const NdArray<double>*>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto* frame : frames) {
    for (double v : frame->storage()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      unsigned char bytes[8];
      for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(bits >> (8 * k));
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
  }
  if (!out) throw IoError("short write to " + path.string());
}

inline void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

/// Writes the frames; returns the file names relative to out_dir.
/// png_seq: frame_0000.png ... frame_P.png (plus intensity_XXXX.png for RGB
/// when requested). raw_f64: frames.f64 with all frames back to back and the
/// sidecar frames.json.
inline std::vector<std::string> emit_frames(const std::vector<NdArray<double>>& frames,
                                            const fs::path& out_dir, FrameFormat format,
                                            bool with_intensity = false) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  if (frames.empty()) throw std::invalid_argument("emit_frames: no frames");
  std::vector<std::string> names;
  if (format == FrameFormat::PngSeq) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      names.push_back(frame_name(i));
      save_png(frames[i], out_dir / names.back());
    }
  } else {
    std::vector<const NdArray<double>*> ptrs;
    for (const auto& f : frames) ptrs.push_back(&f);
    write_binary_f64(out_dir / "frames.f64", ptrs);
    Extents shape = frames.front().extents();
    shape.push_back(frames.size());
    json sidecar = {{"file", "frames.f64"},
                    {"dtype", "float64"},
                    {"endianness", "little"},
                    {"shape", shape},
                    {"order", "column-major, first axis fastest"},
                    {"axes", frames.front().rank() == 1
                                 ? json::array({"x", "frame"})
                                 : frames.front().rank() == 2 ? json::array({"x", "y", "frame"})
                                                              : json::array({"x", "y", "channel", "frame"})}};
    write_json(out_dir / "frames.json", sidecar);
    names = {"frames.f64", "frames.json"};
  }
  if (with_intensity && frames.front().rank() == 3) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      names.push_back(frame_name(i, "intensity"));
      save_png(intensity(frames[i]), out_dir / names.back());
    }
  }
  return names;
}

/// Reads back a raw_f64 dump written by emit_frames.
inline std::vector<NdArray<double>> load_raw_frames(const fs::path& dir) {
  const json sidecar = json::parse(read_text(dir / "frames.json"));
  Extents shape = sidecar.at("shape").get<Extents>();
  if (shape.size() < 2) throw IoError("frames.json: bad shape");
  const std::size_t count = shape.back();
  shape.pop_back();
  const std::size_t per_frame = element_count(shape);
  const std::string bytes = read_text(dir / sidecar.at("file").get<std::string>());
  if (bytes.size() != per_frame * count * 8) {
    throw IoError((dir / "frames.f64").string() + ": expected " +
                  std::to_string(per_frame * count * 8) + " bytes, got " + std::to_string(bytes.size()));
  }
  std::vector<NdArray<double>> frames;
  for (std::size_t f = 0; f < count; ++f) {
    std::vector<double> values(per_frame);
    for (std::size_t i = 0; i < per_frame; ++i) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) {
        bits |= std::uint64_t{static_cast<unsigned char>(bytes[(f * per_frame + i) * 8 + k])} << (8 * k);
      }
      values[i] = std::bit_cast<double>(bits);
    }
    frames.emplace_back(shape, std::move(values));
  }
  return frames;
}

// Manifest -----------------------------------------------------------------

/// Everything needed to rerun a job.
struct RunRequest {
  fs::path input0, input1;
  InputMode mode = InputMode::ImagePng;
  bool equalize = false;
  GridSpec grid;  // spatial_dims is filled in from the inputs
  SolverConfig config;
  fs::path out_dir = "out";
  FrameFormat format = FrameFormat::PngSeq;
  bool intensity = false;
};

inline json config_to_json(const SolverConfig& c) {
  json j = {{"model", to_string(c.model)},
            {"lambda", c.lambda},
            {"p", c.p},
            {"theta", c.theta},
            {"sigma", c.sigma},
            {"tau", c.tau},
            {"iterations", c.iterations},
            {"tv_gamma", c.tv_gamma},
            {"tv_mode", c.tv_mode == TvMode::Anisotropic ? "anisotropic" : "isotropic"},
            {"gamut_clamp", c.gamut_clamp},
            {"stop_tolerance", c.stop_tolerance},
            {"penalized_method", to_string(c.penalized_method)}};
  j["dual_seed"] = c.dual_seed ? json(*c.dual_seed) : json(nullptr);
  return j;
}

inline SolverConfig config_from_json(const json& j) {
  SolverConfig c;
  c.model = model_from_string(j.at("model").get<std::string>());
  c.lambda = j.at("lambda").get<double>();
  c.p = j.at("p").get<double>();
  c.theta = j.at("theta").get<double>();
  c.sigma = j.at("sigma").get<double>();
  c.tau = j.at("tau").get<double>();
  c.iterations = j.at("iterations").get<std::size_t>();
  c.tv_gamma = j.at("tv_gamma").get<double>();
  const std::string tv_mode = j.value("tv_mode", std::string("anisotropic"));
  if (tv_mode == "isotropic") {
    c.tv_mode = TvMode::Isotropic;
  } else if (tv_mode != "anisotropic") {
    throw std::invalid_argument("unknown tv_mode '" + tv_mode + "'");
  }
  c.gamut_clamp = j.at("gamut_clamp").get<bool>();
  c.stop_tolerance = j.value("stop_tolerance", 0.0);
  const std::string method = j.value("penalized_method", std::string("auto"));
  c.penalized_method = penalized_method_from_string(method);
  if (j.contains("dual_seed") && !j["dual_seed"].is_null()) {
    c.dual_seed = j["dual_seed"].get<std::uint64_t>();
  }
  return c;
}

inline json grid_to_json(const GridSpec& g) {
  return {{"spatial_dims", g.spatial_dims},
          {"time_steps", g.time_steps},
          {"spatial_boundary", to_string(g.spatial_boundary)},
          {"color_boundary", to_string(g.color_boundary)}};
}

inline GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.spatial_dims = j.at("spatial_dims").get<Extents>();
  g.time_steps = j.at("time_steps").get<std::size_t>();
  g.spatial_boundary = boundary_from_string(j.at("spatial_boundary").get<std::string>());
  g.color_boundary = boundary_from_string(j.at("color_boundary").get<std::string>());
  return g;
}

/// The manifest holds no timing so that reruns reproduce it byte for byte;
/// wall time goes to timing.json.
inline json make_manifest(const RunRequest& request, const GridSpec& grid,
                          const std::vector<std::string>& files, const RunReport& report) {
  return {{"software", {{"name", "colorot"}, {"version", kVersion}}},
          {"inputs",
           {{"f0", request.input0.string()},
            {"f1", request.input1.string()},
            {"mode", to_string(request.mode)}}},
          {"normalization", request.equalize ? "equalize_mass" : "none"},
          {"grid", grid_to_json(grid)},
          {"config", config_to_json(request.config)},
          {"output",
           {{"dir", request.out_dir.string()},
            {"format", to_string(request.format)},
            {"intensity", request.intensity},
            {"files", files}}},
          {"report",
           {{"iterations", report.iterations},
            {"energy", report.energy_trace},
            {"residual", report.residual_trace},
            {"dual_residual", report.dual_residual_trace}}}};
}

inline RunRequest request_from_manifest(const json& m) {
  RunRequest r;
  r.input0 = m.at("inputs").at("f0").get<std::string>();
  r.input1 = m.at("inputs").at("f1").get<std::string>();
  r.mode = input_mode_from_string(m.at("inputs").at("mode").get<std::string>());
  r.equalize = m.at("normalization").get<std::string>() == "equalize_mass";
  r.grid = grid_from_json(m.at("grid"));
  r.config = config_from_json(m.at("config"));
  r.out_dir = m.at("output").at("dir").get<std::string>();
  r.format = frame_format_from_string(m.at("output").at("format").get<std::string>());
  r.intensity = m.at("output").value("intensity", false);
  return r;
}

inline bool all_finite(const Solution& s) {
  for (const auto& frame : s.frames) {
    for (double v : frame.storage()) {
      if (!std::isfinite(v)) return false;
    }
  }
  for (const auto& block : s.momentum.blocks) {
    for (double v : block.storage()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

struct RunOutcome {
  Solution solution;
  GridSpec grid;
  json manifest;
  bool finite = false;
};

/// Loads, solves and writes frames, manifest.json and timing.json.
inline RunOutcome execute(const RunRequest& request, const ProgressSink& sink = {}) {
  LoadedInputs in = load_inputs(request.input0, request.input1, request.mode, request.equalize,
                                request.grid);
  RunOutcome outcome;
  outcome.grid = in.grid;
  outcome.solution = solve(in.f0, in.f1, in.grid, request.config, sink);
  outcome.finite = all_finite(outcome.solution);
  const auto files = emit_frames(outcome.solution.frames, request.out_dir, request.format,
                                 request.intensity);
  outcome.manifest = make_manifest(request, in.grid, files, outcome.solution.report);
  write_json(request.out_dir / "manifest.json", outcome.manifest);
  write_json(request.out_dir / "timing.json",
             {{"wall_time_seconds", outcome.solution.report.wall_time}});
  return outcome;
}

}  // namespace colorot::io
