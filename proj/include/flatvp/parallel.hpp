#pragma once
#include <cstddef>
#include <functional>
#include <vector>

namespace flatvp {

/// Maximum number of worker threads used by parallel loops (>= 1).
void set_num_threads(unsigned n);
unsigned num_threads();

/// Runs body(chunk, begin, end) for every chunk of [0, count) of fixed size
/// `chunk_size`. The chunk decomposition depends only on `count` and
/// `chunk_size`, never on the thread count, so per-chunk partial results
/// combined in chunk order are bit-identical for any number of threads.
void parallel_chunks(std::size_t count, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t num_chunks(std::size_t count, std::size_t chunk_size)
{
    return (count + chunk_size - 1) / chunk_size;
}

/// Deterministic sum of f(i) over [0, count): fixed-size chunks, each summed
/// sequentially, then combined by pairwise summation in chunk order.
double deterministic_sum(std::size_t count, const std::function<double(std::size_t)>& f,
                         std::size_t chunk_size = 4096);

/// Pairwise (cascade) summation of a vector.
double pairwise_sum(const double* data, std::size_t n);

}  // namespace flatvp
