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

#ifndef SPINCORR_FFT_H
#define SPINCORR_FFT_H

#include <complex>
#include <cstddef>
#include <span>

namespace spincorr {

/// Real <-> half-complex transforms of a fixed length, backed by FFTW.
///
/// forward: X_k = sum_m x_m exp(-2 pi i k m / n), k = 0..n/2.
/// inverse: x_m = sum_k X_k exp(+2 pi i k m / n) over the full Hermitian spectrum (unnormalized).
///
/// Plans use FFTW_ESTIMATE on internally aligned buffers so results do not depend on
/// caller buffer alignment or planner timing. Instances are not shareable across threads.
class RealFft {
   public:
    explicit RealFft(size_t n);
    ~RealFft();
    RealFft(const RealFft &) = delete;
    RealFft &operator=(const RealFft &) = delete;

    size_t size() const {
        return n_;
    }
    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

   private:
    size_t n_;
    double *real_ = nullptr;
    void *spec_ = nullptr;
    void *plan_fwd_ = nullptr;
    void *plan_inv_ = nullptr;
};

/// Version string of the FFT backend.
const char *fft_backend_version();

}  // namespace spincorr

#endif
