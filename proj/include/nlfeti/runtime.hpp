#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nlfeti/decomposition.hpp"
#include "nlfeti/error.hpp"

namespace nlfeti {

/// Per-worker dual vectors; slot n holds the entries of worker n's dual list.
using DualVector = std::vector<std::vector<double>>;

/// Dual entries shared between a worker and one neighbor. `mine[k]` and
/// `theirs[k]` are the positions of the same constraint in the two lists.
struct SharedIndices {
    int neighbor = 0;
    std::vector<int> mine;
    std::vector<int> theirs;
};

struct Topology {
    int N = 0;
    int z = 0;
    std::vector<std::size_t> dual_sizes;
    std::vector<std::vector<SharedIndices>> shared; // per worker, ordered by neighbor id

    /// Slot of `n` in the shared list of `k`.
    int slot_of(int k, int n) const {
        const auto& list = shared[static_cast<std::size_t>(k)];
        for (std::size_t s = 0; s < list.size(); ++s)
            if (list[s].neighbor == n)
                return static_cast<int>(s);
        return -1;
    }
};

inline Topology make_topology(const Decomposition& d, const ConstraintSet& cs) {
    Topology t;
    t.N = d.N;
    t.z = d.N;
    t.dual_sizes.resize(static_cast<std::size_t>(d.N));
    t.shared.resize(static_cast<std::size_t>(d.N));
    for (int n = 0; n < d.N; ++n)
        t.dual_sizes[static_cast<std::size_t>(n)] = cs.per_subdomain[static_cast<std::size_t>(n)].size();

    // Position of each global dual index in both endpoint lists.
    std::vector<int> pos_first(cs.size(), -1), pos_second(cs.size(), -1);
    for (int n = 0; n < d.N; ++n) {
        const auto& list = cs.per_subdomain[static_cast<std::size_t>(n)];
        for (std::size_t k = 0; k < list.size(); ++k) {
            auto g = static_cast<std::size_t>(list[k].global);
            (list[k].sign > 0 ? pos_first[g] : pos_second[g]) = static_cast<int>(k);
        }
    }
    for (auto [a, b] : d.neighbor_graph) {
        SharedIndices ab{b, {}, {}}, ba{a, {}, {}};
        for (const DualEntry& e : cs.per_subdomain[static_cast<std::size_t>(a)])
            if (e.partner == b) {
                auto g = static_cast<std::size_t>(e.global);
                ab.mine.push_back(pos_first[g]);
                ab.theirs.push_back(pos_second[g]);
                ba.mine.push_back(pos_second[g]);
                ba.theirs.push_back(pos_first[g]);
            }
        t.shared[static_cast<std::size_t>(a)].push_back(std::move(ab));
        t.shared[static_cast<std::size_t>(b)].push_back(std::move(ba));
    }
    for (auto& list : t.shared)
        std::sort(list.begin(), list.end(),
                  [](const SharedIndices& x, const SharedIndices& y) { return x.neighbor < y.neighbor; });
    return t;
}

enum class Backend { serial, threaded };

inline std::string to_string(Backend b) { return b == Backend::serial ? "serial" : "threaded"; }

namespace detail {

// Persistent pool; worker n always runs on thread n mod T.
class WorkerPool {
public:
    WorkerPool(int threads, std::optional<std::uint64_t> jitter_seed)
        : jitter_(jitter_seed.has_value()), rng_(jitter_seed.value_or(0)) {
        for (int t = 0; t < threads; ++t)
            threads_.emplace_back([this, t, threads] { loop(t, threads); });
    }

    ~WorkerPool() {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& th : threads_)
            th.join();
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    int threads() const { return static_cast<int>(threads_.size()); }

    void run(int workers, const std::function<void(int)>& fn) {
        std::unique_lock lock(mu_);
        task_ = &fn;
        workers_ = workers;
        pending_ = threads();
        error_ = nullptr;
        delays_.assign(static_cast<std::size_t>(workers), 0);
        if (jitter_) {
            std::uniform_int_distribution<int> dist(0, 50);
            for (auto& v : delays_)
                v = dist(rng_);
        }
        ++generation_;
        cv_.notify_all();
        done_.wait(lock, [this] { return pending_ == 0; });
        task_ = nullptr;
        if (error_)
            std::rethrow_exception(error_);
    }

private:
    void loop(int t, int T) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* task;
            int workers;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (stop_)
                    return;
                task = task_;
                workers = workers_;
            }
            std::exception_ptr err;
            for (int n = t; n < workers; n += T) {
                if (jitter_ && delays_[static_cast<std::size_t>(n)] > 0)
                    std::this_thread::sleep_for(std::chrono::microseconds(delays_[static_cast<std::size_t>(n)]));
                try {
                    (*task)(n);
                } catch (...) {
                    if (!err)
                        err = std::current_exception();
                }
            }
            {
                std::lock_guard lock(mu_);
                if (err && !error_)
                    error_ = err;
                if (--pending_ == 0)
                    done_.notify_one();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_, done_;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
    const std::function<void(int)>* task_ = nullptr;
    int workers_ = 0;
    int pending_ = 0;
    std::exception_ptr error_;
    bool jitter_;
    std::mt19937_64 rng_;
    std::vector<int> delays_;
};

} // namespace detail

/// Bulk-synchronous worker runtime. Local phases run through
/// for_each_worker; collectives combine the per-worker results. Every
/// reduction sums in worker order 0..N-1, so results do not depend on the
/// backend or on the thread schedule.
class Runtime {
public:
    static Runtime serial(int workers) { return Runtime(workers, Backend::serial, 1, std::nullopt); }

    /// `threads` <= 0 picks min(workers, hardware threads). A jitter seed
    /// injects random per-worker delays to scramble completion order.
    static Runtime threaded(int workers, int threads = 0,
                            std::optional<std::uint64_t> jitter_seed = std::nullopt) {
        if (threads <= 0)
            threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        threads = std::max(1, std::min(threads, workers));
        return Runtime(workers, Backend::threaded, threads, jitter_seed);
    }

    int workers() const { return workers_; }
    Backend backend() const { return backend_; }
    int threads() const { return pool_ ? pool_->threads() : 1; }

    /// Runs fn(n) for every worker n and waits for all of them.
    void for_each_worker(const std::function<void(int)>& fn) const {
        if (pool_)
            pool_->run(workers_, fn);
        else
            for (int n = 0; n < workers_; ++n)
                fn(n);
    }

    /// For every shared dual entry, the value the partner worker holds.
    /// Non-shared entries come back as zero.
    DualVector neighbor_exchange(const Topology& topo, const DualVector& v) const {
        check(topo, v);
        // Outgoing snapshots: outbox[n][s] is what n sends to its s-th neighbor.
        std::vector<std::vector<std::vector<double>>> outbox(static_cast<std::size_t>(workers_));
        for_each_worker([&](int n) {
            const auto& list = topo.shared[static_cast<std::size_t>(n)];
            auto& out = outbox[static_cast<std::size_t>(n)];
            out.resize(list.size());
            for (std::size_t s = 0; s < list.size(); ++s) {
                out[s].reserve(list[s].mine.size());
                for (int i : list[s].mine)
                    out[s].push_back(v[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)]);
            }
        });
        DualVector received(static_cast<std::size_t>(workers_));
        for_each_worker([&](int n) {
            auto& in = received[static_cast<std::size_t>(n)];
            in.assign(v[static_cast<std::size_t>(n)].size(), 0.0);
            for (const SharedIndices& sh : topo.shared[static_cast<std::size_t>(n)]) {
                const auto& msg = outbox[static_cast<std::size_t>(sh.neighbor)]
                                        [static_cast<std::size_t>(topo.slot_of(sh.neighbor, n))];
                for (std::size_t k = 0; k < sh.mine.size(); ++k)
                    in[static_cast<std::size_t>(sh.mine[k])] = msg[k];
            }
        });
        return received;
    }

    /// Shared entries become the sum of both owners' values.
    void halo_exchange(const Topology& topo, DualVector& v) const {
        DualVector received = neighbor_exchange(topo, v);
        for_each_worker([&](int n) {
            auto& mine = v[static_cast<std::size_t>(n)];
            const auto& theirs = received[static_cast<std::size_t>(n)];
            for (const SharedIndices& sh : topo.shared[static_cast<std::size_t>(n)])
                for (int i : sh.mine)
                    mine[static_cast<std::size_t>(i)] += theirs[static_cast<std::size_t>(i)];
        });
    }

    /// Sum of the per-worker contributions, replicated to every worker.
    std::vector<double> coarse_reduce(const std::vector<std::vector<double>>& contributions) const {
        if (contributions.size() != static_cast<std::size_t>(workers_))
            throw Error(ErrorCode::topology_mismatch, "coarse_reduce: one contribution per worker");
        std::vector<double> sum(contributions.empty() ? 0 : contributions[0].size(), 0.0);
        for (const auto& c : contributions) {
            if (c.size() != sum.size())
                throw Error(ErrorCode::topology_mismatch, "coarse_reduce: length mismatch");
            for (std::size_t i = 0; i < sum.size(); ++i)
                sum[i] += c[i];
        }
        return sum;
    }

    double scalar_allreduce(std::span<const double> values) const {
        if (values.size() != static_cast<std::size_t>(workers_))
            throw Error(ErrorCode::topology_mismatch, "scalar_allreduce: one value per worker");
        double s = 0.0;
        for (double v : values)
            s += v;
        return s;
    }

private:
    Runtime(int workers, Backend backend, int threads, std::optional<std::uint64_t> jitter)
        : workers_(workers), backend_(backend) {
        if (workers < 1)
            throw Error(ErrorCode::config_error, "runtime needs at least one worker");
        if (backend == Backend::threaded)
            pool_ = std::make_shared<detail::WorkerPool>(threads, jitter);
    }

    void check(const Topology& topo, const DualVector& v) const {
        if (topo.N != workers_ || v.size() != static_cast<std::size_t>(workers_))
            throw Error(ErrorCode::topology_mismatch, "worker count does not match topology");
        for (std::size_t n = 0; n < v.size(); ++n)
            if (v[n].size() != topo.dual_sizes[n])
                throw Error(ErrorCode::topology_mismatch,
                            "worker " + std::to_string(n) + " holds " + std::to_string(v[n].size()) +
                                " dual entries, topology expects " +
                                std::to_string(topo.dual_sizes[n]));
    }

    int workers_;
    Backend backend_;
    std::shared_ptr<detail::WorkerPool> pool_;
};

} // namespace nlfeti
