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

#include "spincorr/fft.h"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace spincorr {

namespace {
std::mutex &planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

RealFft::RealFft(size_t n) : n_(n) {
    if (n < 2) {
        throw std::invalid_argument("RealFft: length must be >= 2");
    }
    std::lock_guard<std::mutex> lock(planner_mutex());
    real_ = fftw_alloc_real(n);
    auto *spec = fftw_alloc_complex(n / 2 + 1);
    spec_ = spec;
    plan_fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_, spec, FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real_, FFTW_ESTIMATE);
    if (!plan_fwd_ || !plan_inv_) {
        throw std::runtime_error("RealFft: FFTW planning failed");
    }
}

RealFft::~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
    fftw_free(real_);
    fftw_free(spec_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    if (in.size() != n_ || out.size() != n_ / 2 + 1) {
        throw std::invalid_argument("RealFft::forward: size mismatch");
    }
    std::memcpy(real_, in.data(), n_ * sizeof(double));
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    std::memcpy(out.data(), spec_, (n_ / 2 + 1) * sizeof(fftw_complex));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    if (in.size() != n_ / 2 + 1 || out.size() != n_) {
        throw std::invalid_argument("RealFft::inverse: size mismatch");
    }
    // c2r destroys its input, so it always works on the private copy.
    std::memcpy(spec_, in.data(), (n_ / 2 + 1) * sizeof(fftw_complex));
    fftw_execute(static_cast<fftw_plan>(plan_inv_));
    std::memcpy(out.data(), real_, n_ * sizeof(double));
}

const char *fft_backend_version() {
    return fftw_version;
}

}  // namespace spincorr
