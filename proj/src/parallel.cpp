#include "flatvp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace flatvp {

namespace {
std::atomic<unsigned> g_threads{std::max(1u, std::thread::hardware_concurrency())};
}

void set_num_threads(unsigned n) { g_threads = std::max(1u, n); }

unsigned num_threads() { return g_threads.load(); }

void parallel_chunks(std::size_t count, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body)
{
    if(count == 0) return;
    chunk_size = std::max<std::size_t>(chunk_size, 1);
    const std::size_t chunks = num_chunks(count, chunk_size);
    const std::size_t workers = std::min<std::size_t>(num_threads(), chunks);
    auto run_chunk = [&](std::size_t c) {
        const std::size_t begin = c * chunk_size;
        body(c, begin, std::min(count, begin + chunk_size));
    };
    if(workers <= 1) {
        for(std::size_t c = 0; c < chunks; ++c) run_chunk(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for(;;) {
            const std::size_t c = next.fetch_add(1);
            if(c >= chunks) return;
            try {
                run_chunk(c);
            } catch(...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if(!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for(std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for(auto& th : pool) th.join();
    if(failure) std::rethrow_exception(failure);
}

double pairwise_sum(const double* data, std::size_t n)
{
    if(n <= 16) {
        double s = 0;
        for(std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

double deterministic_sum(std::size_t count, const std::function<double(std::size_t)>& f,
                         std::size_t chunk_size)
{
    std::vector<double> partial(num_chunks(count, chunk_size), 0.0);
    parallel_chunks(count, chunk_size, [&](std::size_t c, std::size_t b, std::size_t e) {
        double s = 0;
        for(std::size_t i = b; i < e; ++i) s += f(i);
        partial[c] = s;
    });
    return pairwise_sum(partial.data(), partial.size());
}

}  // namespace flatvp
