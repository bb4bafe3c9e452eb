// colorot-morph: transport between two signals or images.
//
//   colorot-morph a.png b.png --out frames
//   colorot-morph a.csv b.csv --model penalized --lambda 10 --format raw_f64
//   colorot-morph --replay frames/manifest.json --out again

#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "colorot/io.hpp"

namespace io = colorot::io;

int main(int argc, char** argv) {
  CLI::App app{"Dynamic optimal transport between two signals or colour images"};
  app.set_version_flag("--version", std::string(io::kVersion));

  std::string input0, input1, replay, mode = "auto";
  std::string model = "constrained", boundary = "mirror", color_boundary = "periodic";
  std::string format = "png_seq", out_dir = "out", method = "auto";
  double lambda = 1.0, p = 2.0, sigma = 50.0, theta = 1.0, gamma = 0.0, stop_tol = 0.0;
  std::optional<double> tau;
  std::size_t time_steps = 32, iterations = 2000, progress = 0;
  bool equalize = false, intensity = false, clamp = false;

  app.add_option("f0", input0, "Start signal (.csv) or image (.png)");
  app.add_option("f1", input1, "End signal (.csv) or image (.png)");
  app.add_option("--replay", replay, "Rerun the job described by a manifest.json")
      ->check(CLI::ExistingFile);
  app.add_option("--input-mode", mode, "auto, signal_csv or image_png")->capture_default_str();
  app.add_option("--model", model, "constrained or penalized")
      ->check(CLI::IsMember({"constrained", "penalized"}))
      ->capture_default_str();
  app.add_option("--lambda", lambda, "Penalty weight of the penalized model")->capture_default_str();
  app.add_option("--p", p, "Exponent of the transport cost, in (1, 2]")->capture_default_str();
  app.add_option("--time-steps", time_steps, "Number of time steps P")->capture_default_str();
  app.add_option("--iters", iterations, "Primal-dual iterations")->capture_default_str();
  app.add_option("--sigma", sigma, "Dual step size")->capture_default_str();
  app.add_option("--tau", tau, "Primal step size (default 0.99 / sigma)");
  app.add_option("--theta", theta, "Extrapolation parameter in (0, 1]")->capture_default_str();
  app.add_option("--boundary", boundary, "Spatial boundary: mirror or periodic")
      ->check(CLI::IsMember({"mirror", "periodic"}))
      ->capture_default_str();
  app.add_option("--color-boundary", color_boundary, "Colour axis boundary: mirror or periodic")
      ->check(CLI::IsMember({"mirror", "periodic"}))
      ->capture_default_str();
  app.add_option("--tv", gamma, "Weight of the anisotropic TV term")->capture_default_str();
  app.add_option("--stop-tol", stop_tol, "Stop once the dual residual is below this (0 = never)")
      ->capture_default_str();
  app.add_option("--penalized-solver", method, "auto, schur, woodbury or cg")
      ->check(CLI::IsMember({"auto", "schur", "woodbury", "cg"}))
      ->capture_default_str();
  app.add_flag("--equalize-mass", equalize, "Rescale both inputs to their mean mass");
  app.add_flag("--gamut-clamp", clamp, "Clamp the returned frames to [0, 1]");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--format", format, "png_seq or raw_f64")
      ->check(CLI::IsMember({"png_seq", "raw_f64"}))
      ->capture_default_str();
  app.add_flag("--intensity", intensity, "Also write (R+G+B)/3 frames for colour inputs");
  app.add_option("--progress", progress, "Print diagnostics every N iterations");

  CLI11_PARSE(app, argc, argv);

  try {
    io::RunRequest request;
    if (!replay.empty()) {
      request = io::request_from_manifest(io::json::parse(io::read_text(replay)));
      if (app.count("--out") > 0) request.out_dir = out_dir;
    } else {
      if (input0.empty() || input1.empty()) {
        std::cerr << "error: need two inputs (or --replay)\n" << app.help();
        return 2;
      }
      request.input0 = input0;
      request.input1 = input1;
      request.mode = mode == "auto" ? io::guess_input_mode(input0) : io::input_mode_from_string(mode);
      request.equalize = equalize;
      request.grid.time_steps = time_steps;
      request.grid.spatial_boundary = colorot::boundary_from_string(boundary);
      request.grid.color_boundary = colorot::boundary_from_string(color_boundary);
      colorot::SolverConfig& c = request.config;
      c.model = colorot::model_from_string(model);
      c.lambda = lambda;
      c.p = p;
      c.theta = theta;
      c.sigma = sigma;
      c.tau = tau.value_or(0.99 / sigma);
      c.iterations = iterations;
      c.tv_gamma = gamma;
      c.gamut_clamp = clamp;
      c.stop_tolerance = stop_tol;
      c.penalized_method = colorot::penalized_method_from_string(method);
      request.out_dir = out_dir;
      request.format = io::frame_format_from_string(format);
      request.intensity = intensity;
    }

    colorot::ProgressSink sink;
    if (progress > 0) {
      sink = [progress](const colorot::IterationRecord& r) {
        if (r.iteration % progress == 0) {
          std::fprintf(stderr, "iter %6zu  energy %.6e  residual %.3e  dual %.3e\n", r.iteration,
                       r.energy, r.residual, r.dual_residual);
        }
      };
    }
    const io::RunOutcome outcome = io::execute(request, sink);
    const auto& report = outcome.solution.report;
    std::printf("%zu frames written to %s (%zu iterations, residual %.3e, %.2f s)\n",
                outcome.solution.frames.size(), request.out_dir.string().c_str(),
                report.iterations, report.residual_trace.back(), report.wall_time);
    if (!outcome.finite) {
      std::cerr << "error: solution contains non-finite values\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
