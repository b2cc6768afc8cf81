// Copyright 2026 The spincorr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPINCORR_PIPELINE_H
#define SPINCORR_PIPELINE_H

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spincorr/bayes.h"
#include "spincorr/efield.h"
#include "spincorr/fitting.h"
#include "spincorr/noise_model.h"
#include "spincorr/noise_synth.h"
#include "spincorr/ramsey.h"
#include "spincorr/spectral.h"

namespace spincorr {

/// Process exit codes of the CLI.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitData = 3,
    kExitThreshold = 4,
};

/// Channel meaning of the rate-noise model.
enum class NoiseBasis {
    /// (d nu_A, d nu_B[, d J]).
    Rates,
    /// (d Sigma, d Delta[, d J]); d nu_A = (dS + dD) / 2, d nu_B = (dS - dD) / 2.
    SumDifference,
};

struct FieldModelConfig {
    NoiseModel noise{2};
    Susceptibility G;
};

struct SpectraConfig {
    /// "estimate" (the rate trace) or "truth" (the campaign's per-round truth).
    std::string source = "estimate";
    /// Unset: BatchingPlan::scaled over the analyzed trace length.
    std::optional<BatchingPlan> plan;
    Window window = Window::Rectangular;
    MergeScheme merge;
    FloorOptions floor;
    NormalizationOptions normalization;
    std::vector<std::pair<std::string, std::string>> pairs = {{"nu_A", "nu_B"}, {"nu_A", "J"}, {"nu_B", "J"}};
};

struct FitJob {
    std::string series;
    FitModel model;
    FitParams init{};
    FitOptions options;
    /// Fit the floor-corrected spectrum (true) or the raw one.
    bool corrected = true;
};

struct T2Config {
    bool enabled = true;
    double integration_time = 100;
    double f_max = std::numeric_limits<double>::infinity();
};

struct Thresholds {
    /// Maximum fraction of trace rows with a degenerate posterior.
    double max_degenerate_fraction = 0.05;
    /// Maximum fraction of cross entries flagged unresolvable, per pair.
    double max_unresolvable_fraction = 0.5;
};

/// Series shown in each figure-style table.
struct PlotSpec {
    std::vector<std::string> fig1c = {"nu_A", "nu_B"};
    std::pair<std::string, std::string> fig2 = {"nu_A", "nu_B"};
    std::pair<std::string, std::string> fig3 = {"Sigma", "Delta"};
};

struct RunConfig {
    nlohmann::json source;
    uint64_t seed = 0;
    std::filesystem::path output_dir = "spincorr-out";
    TwoQubitParams params;
    std::optional<NoiseModel> noise;
    NoiseBasis basis = NoiseBasis::Rates;
    std::optional<FieldModelConfig> field;
    SynthOptions synth;
    MeasurementModel measurement;
    size_t rounds = 4096;
    Fidelity fidelity = Fidelity::RoundResolved;
    EstimatorConfig estimator;
    SpectraConfig spectra;
    std::vector<FitJob> fits;
    T2Config t2;
    /// Susceptibilities used by the efield stage (defaults to the field model's).
    std::optional<Susceptibility> efield;
    Thresholds thresholds;
    PlotSpec plot;
};

/// Validates and parses a run configuration. Every error is a ConfigError naming the key.
RunConfig run_config_from_json(const nlohmann::json &j);
RunConfig load_run_config(const std::filesystem::path &file);

enum class Stage { Synth, Simulate, Estimate, Spectra, Fit, Efield, Pipeline };
const char *stage_name(Stage s);
Stage stage_from_name(const std::string &s);

struct StageReport {
    Stage stage = Stage::Synth;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    double seconds = 0;
    /// Set when a numerical-failure rate exceeds its threshold; outputs are still written.
    std::vector<std::string> threshold_violations;
};

struct RunOptions {
    /// 0: all available cores.
    int workers = 0;
    bool verbose = false;
    /// Progress log (stderr when null and verbose).
    std::ostream *log = nullptr;
};

/// Runs one stage (Pipeline: all in order) against cfg.output_dir, reading upstream
/// artifacts written by earlier stages and updating `manifest.json`. Throws ConfigError,
/// DataError or NumericalError.
std::vector<StageReport> run_stage(const RunConfig &cfg, Stage stage, const RunOptions &opt = {});

/// Exit code for a completed run: kExitThreshold when any report carries a violation.
int exit_code(const std::vector<StageReport> &reports);

/// Everything the figure-style tables are built from. Missing members leave the
/// corresponding table out.
struct PlotInputs {
    /// Floor-corrected auto spectra by series name.
    std::map<std::string, PsdPosterior> psd;
    /// Cross posteriors keyed "a:b" in the configured normalization, and raw-normalized.
    std::map<std::string, CrossPosterior> cross;
    std::map<std::string, CrossPosterior> cross_raw;
    /// Fit results by series name.
    std::map<std::string, FitResult> fits;
    std::optional<PredictionSet> prediction;
};

/// Writes fig1c.csv (auto spectra and fit curves), fig2.csv (|c| and Arg c intervals with
/// a raw/corrected mode column), fig3.csv (Sigma, Delta and the Sigma - Delta difference of
/// posterior means) and fig4.csv (measured vs field-model exchange quantities) into `dir`.
/// A table whose series are requested but absent raises ConfigError naming the plot key.
/// Returns the written files.
std::vector<std::filesystem::path> emit_plotdata(const std::filesystem::path &dir, const PlotInputs &in,
                                                 const PlotSpec &spec);

/// Hex SHA-256 of a file's bytes or of a string.
std::string sha256_file(const std::filesystem::path &file);
std::string sha256_hex(const std::string &data);

/// Library version string.
const char *version();

}  // namespace spincorr

#endif
