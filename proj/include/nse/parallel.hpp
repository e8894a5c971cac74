#pragma once

#include <cstddef>
#include <functional>

namespace nse {

/// Number of worker threads used by parallel_for. 0 means hardware concurrency.
void set_worker_count(std::size_t n) noexcept;
std::size_t worker_count() noexcept;

/// Calls body(i) for i in [0, n). Work items are claimed dynamically, so
/// callers must write results into slot i and reduce in index order afterwards.
/// The first exception (lowest index) is rethrown once all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nse
