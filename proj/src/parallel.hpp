#pragma once

#include <cstddef>
#include <exception>

namespace isingmfg::detail {

/// OpenMP loop over [0, n) that forwards the first exception thrown by a body.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(isingmfg_parallel_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace isingmfg::detail
