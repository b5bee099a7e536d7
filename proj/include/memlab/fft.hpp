#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace memlab::fft {

// Thin wrapper around FFTW double-precision 2-D complex transforms.
// Plans are cached per (n1, n2, sign) and executed with the new-array
// interface; FFTW_UNALIGNED keeps plans valid for any vector storage.
// Planning is serialized (FFTW planner is not thread-safe), execution is not.

namespace detail {

struct PlanCache {
    std::mutex mu;
    std::map<std::tuple<int, int, int>, fftw_plan> plans;

    ~PlanCache() {
        for (auto& [key, p] : plans) fftw_destroy_plan(p);
    }

    fftw_plan get(int n1, int n2, int sign) {
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_tuple(n1, n2, sign);
        auto it = plans.find(key);
        if (it != plans.end()) return it->second;
        std::vector<std::complex<double>> scratch(static_cast<size_t>(n1) * n2);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan p = fftw_plan_dft_2d(n1, n2, buf, buf, sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!p) throw std::runtime_error("fftw_plan_dft_2d failed");
        plans.emplace(key, p);
        return p;
    }
};

inline PlanCache& cache() {
    static PlanCache c;
    return c;
}

}  // namespace detail

// In-place unnormalized forward transform (exp(-i k.x) convention).
inline void forward(std::complex<double>* data, int n1, int n2) {
    fftw_plan p = detail::cache().get(n1, n2, FFTW_FORWARD);
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(p, buf, buf);
}

// In-place unnormalized backward transform (exp(+i k.x)).
inline void backward(std::complex<double>* data, int n1, int n2) {
    fftw_plan p = detail::cache().get(n1, n2, FFTW_BACKWARD);
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(p, buf, buf);
}

}  // namespace memlab::fft
