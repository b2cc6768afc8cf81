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

// spincorr: command-line driver for the noise-correlation pipeline.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spincorr/errors.h"
#include "spincorr/pipeline.h"

int main(int argc, char **argv) {
    using namespace spincorr;
    CLI::App app{"Two-qubit noise-correlation spectroscopy: synth, simulate, estimate, spectra, fit, efield"};
    std::string config;
    std::string stage = "pipeline";
    std::string out;
    long long seed_override = -1;
    int workers = 0;
    bool verbose = false;
    app.add_option("--config", config, "Run configuration (JSON)")->required();
    app.add_option("--stage", stage, "synth | simulate | estimate | spectra | fit | efield | pipeline");
    app.add_option("--out", out, "Output directory (overrides output_dir)");
    app.add_option("--seed-override", seed_override, "Replace the master seed")->check(CLI::NonNegativeNumber);
    app.add_option("--workers", workers, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("--verbose,-v", verbose, "Log stage progress to stderr");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        nlohmann::json j;
        {
            std::ifstream in(config);
            if (!in) throw ConfigError(config, "cannot open config file");
            try {
                in >> j;
            } catch (const nlohmann::json::exception &e) {
                throw ConfigError(config, e.what());
            }
        }
        if (seed_override >= 0) j["seed"] = static_cast<uint64_t>(seed_override);
        if (!out.empty()) j["output_dir"] = out;
        RunConfig cfg = run_config_from_json(j);
        RunOptions opt;
        opt.workers = workers;
        opt.verbose = verbose;
        auto reports = run_stage(cfg, stage_from_name(stage), opt);
        int rc = exit_code(reports);
        for (const auto &r : reports) {
            for (const auto &v : r.threshold_violations) std::cerr << "spincorr: " << stage_name(r.stage) << ": " << v << "\n";
        }
        return rc;
    } catch (const ConfigError &e) {
        std::cerr << "spincorr: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError &e) {
        std::cerr << "spincorr: data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError &e) {
        std::cerr << "spincorr: numerical error: " << e.what() << "\n";
        return kExitThreshold;
    } catch (const std::exception &e) {
        std::cerr << "spincorr: error: " << e.what() << "\n";
        return kExitFailure;
    }
}
