// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "treeshrink/measurement.hpp"
#include "treeshrink/sampler.hpp"
#include "treeshrink/transform.hpp"

namespace treeshrink::app {

/// Bad flags, unreadable inputs and the like; maps to exit code 1.
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitCheck = 2;

std::string version();

struct RunManifest {
  std::string command;  // cs | denoise
  ExperimentSpec spec;
  std::string version;
  double seconds = 0.0;
  std::vector<std::string> outputs;  // file names relative to the manifest
  double psnr = 0.0;
  double input_psnr = 0.0;  // denoise only
  double noise_std = 0.0;
  double acceptance_rate = 0.0;
  double spike_recall = 0.0;  // denoise only
  int iterations = 0;
};

void write_manifest(std::ostream& out, const RunManifest& manifest);
RunManifest read_manifest(std::istream& in);

/// Basis layout for an image of the given size.
LayoutPtr make_layout(const ExperimentSpec& spec, std::size_t height, std::size_t width);

/// Runs the inference selected by spec.method ("mcmc", "avb", "vb:<s>", "em").
PosteriorSummary run_inference(std::span<const double> y, const SensingOperator& op, const ExperimentSpec& spec,
                               bool spiky);

/// Compressive sensing recovery. With ablation set, runs the tree and the flat
/// model on the same measurements and returns both manifests.
std::vector<RunManifest> cmd_cs(const ExperimentSpec& spec, const std::filesystem::path& out_dir, bool ablation);

/// Denoising with the spiky component: H = identity, Gaussian plus spiky noise.
std::vector<RunManifest> cmd_denoise(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                     bool ablation);

struct PriorSampleSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  Basis basis = Basis::Daub4;
  int levels = 0;
  int count = 4;
  std::uint64_t seed = 1;
};

struct PriorSampleReport {
  std::vector<std::string> outputs;
  /// Per draw and tree level: sum of the increment lengths gamma_tilde.
  std::vector<std::vector<double>> increment_sums;
  /// Excess kurtosis of the detail coefficients per level, pooled over draws.
  std::vector<double> level_kurtosis;
};

PriorSampleReport cmd_prior_sample(const PriorSampleSpec& spec, const std::filesystem::path& out_dir);

struct CheckResult {
  std::string name;
  double tolerance = 0.0;
  double value = 0.0;
  bool passed = false;
};

struct CheckOptions {
  /// Filter used by the transform checks; a corrupted filter must fail them.
  WaveletFilter filter = WaveletFilter::daub4();
};

std::vector<CheckResult> run_checks(const CheckOptions& options = {});
void print_checks(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace treeshrink::app
