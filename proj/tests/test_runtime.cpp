#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "oracles.hpp"

using namespace nlfeti;

namespace {

struct Fixture {
    Decomposition d;
    ConstraintSet cs;
    Topology topo;
};

Fixture make_setup(int L, int m, int p) {
    Fixture s{partition(build_lattice(L, m), p), {}, {}};
    s.cs = enumerate_constraints(s.d);
    s.topo = make_topology(s.d, s.cs);
    return s;
}

DualVector random_dual(const Topology& t, std::mt19937_64& rng) {
    DualVector v(static_cast<std::size_t>(t.N));
    for (int n = 0; n < t.N; ++n)
        v[static_cast<std::size_t>(n)] = oracle::random_vector(t.dual_sizes[static_cast<std::size_t>(n)], rng);
    return v;
}

bool bit_equal(const DualVector& a, const DualVector& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t n = 0; n < a.size(); ++n)
        if (a[n].size() != b[n].size() ||
            std::memcmp(a[n].data(), b[n].data(), a[n].size() * sizeof(double)) != 0)
            return false;
    return true;
}

} // namespace

TEST(Topology, SharedMapsAreInverseConsistent) {
    Fixture s = make_setup(16, 2, 4);
    for (int n = 0; n < s.topo.N; ++n)
        for (const SharedIndices& sh : s.topo.shared[static_cast<std::size_t>(n)]) {
            int slot = s.topo.slot_of(sh.neighbor, n);
            ASSERT_GE(slot, 0);
            const SharedIndices& back = s.topo.shared[static_cast<std::size_t>(sh.neighbor)][static_cast<std::size_t>(slot)];
            EXPECT_EQ(back.mine, sh.theirs);
            EXPECT_EQ(back.theirs, sh.mine);
            for (std::size_t k = 0; k < sh.mine.size(); ++k)
                EXPECT_EQ(s.cs.per_subdomain[n][static_cast<std::size_t>(sh.mine[k])].global,
                          s.cs.per_subdomain[static_cast<std::size_t>(sh.neighbor)][static_cast<std::size_t>(sh.theirs[k])].global);
        }
}

TEST(HaloExchange, SumsSharedEntries) {
    Fixture s = make_setup(12, 2, 3);
    Runtime rt = Runtime::serial(s.d.N);
    std::mt19937_64 rng(1);
    DualVector v = random_dual(s.topo, rng);
    DualVector out = v;
    rt.halo_exchange(s.topo, out);
    // Global view: each constraint's two copies.
    std::vector<double> first(s.cs.size()), second(s.cs.size());
    for (int n = 0; n < s.d.N; ++n)
        for (std::size_t k = 0; k < s.cs.per_subdomain[n].size(); ++k) {
            const DualEntry& e = s.cs.per_subdomain[n][k];
            (e.sign > 0 ? first : second)[static_cast<std::size_t>(e.global)] = v[n][k];
        }
    for (int n = 0; n < s.d.N; ++n)
        for (std::size_t k = 0; k < s.cs.per_subdomain[n].size(); ++k) {
            auto g = static_cast<std::size_t>(s.cs.per_subdomain[n][k].global);
            EXPECT_EQ(out[n][k], first[g] + second[g]);
        }
    DualVector zero = random_dual(s.topo, rng);
    for (auto& x : zero)
        std::fill(x.begin(), x.end(), 0.0);
    rt.halo_exchange(s.topo, zero);
    for (auto& x : zero)
        EXPECT_EQ(norm_inf(x), 0.0);
}

TEST(HaloExchange, TwiceDoublesRelativeToOnce) {
    Fixture s = make_setup(12, 2, 3);
    Runtime rt = Runtime::serial(s.d.N);
    std::mt19937_64 rng(2);
    DualVector once = random_dual(s.topo, rng);
    rt.halo_exchange(s.topo, once);
    DualVector twice = once;
    rt.halo_exchange(s.topo, twice);
    for (std::size_t n = 0; n < once.size(); ++n)
        for (std::size_t k = 0; k < once[n].size(); ++k)
            EXPECT_EQ(twice[n][k], 2.0 * once[n][k]);
}

TEST(HaloExchange, LinearToRoundoff) {
    Fixture s = make_setup(16, 3, 4);
    Runtime rt = Runtime::serial(s.d.N);
    std::mt19937_64 rng(3);
    DualVector u = random_dual(s.topo, rng), v = random_dual(s.topo, rng);
    DualVector uv = u;
    for (std::size_t n = 0; n < u.size(); ++n)
        for (std::size_t k = 0; k < u[n].size(); ++k)
            uv[n][k] += v[n][k];
    rt.halo_exchange(s.topo, u);
    rt.halo_exchange(s.topo, v);
    rt.halo_exchange(s.topo, uv);
    for (std::size_t n = 0; n < u.size(); ++n)
        for (std::size_t k = 0; k < u[n].size(); ++k)
            EXPECT_LE(std::abs(uv[n][k] - (u[n][k] + v[n][k])), 4 * std::numeric_limits<double>::epsilon() * 4);
}

TEST(HaloExchange, RejectsMismatchedLengths) {
    Fixture s = make_setup(8, 2, 2);
    Runtime rt = Runtime::serial(s.d.N);
    std::mt19937_64 rng(4);
    DualVector v = random_dual(s.topo, rng);
    v[1].push_back(0.0);
    try {
        rt.halo_exchange(s.topo, v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::topology_mismatch);
    }
    Runtime wrong = Runtime::serial(3);
    DualVector ok = random_dual(s.topo, rng);
    EXPECT_THROW(wrong.halo_exchange(s.topo, ok), Error);
}

TEST(Collectives, CoarseReduceAndAllreduce) {
    Runtime one = Runtime::serial(1);
    EXPECT_EQ(one.coarse_reduce({{1.5, -2.0}}), (std::vector<double>{1.5, -2.0}));
    Runtime rt = Runtime::serial(5);
    std::vector<std::vector<double>> unit(5, std::vector<double>(5, 0.0));
    for (int n = 0; n < 5; ++n)
        unit[static_cast<std::size_t>(n)][static_cast<std::size_t>(n)] = 1.0;
    EXPECT_EQ(rt.coarse_reduce(unit), std::vector<double>(5, 1.0));
    std::vector<double> ones(5, 1.0);
    EXPECT_EQ(rt.scalar_allreduce(ones), 5.0);
    std::vector<double> single{0, 0, 3.25, 0, 0};
    EXPECT_EQ(rt.scalar_allreduce(single), 3.25);
    EXPECT_THROW(rt.scalar_allreduce(std::vector<double>(4, 1.0)), Error);
}

TEST(Backends, BitIdenticalCollectives) {
    Fixture s = make_setup(16, 2, 4);
    Runtime serial = Runtime::serial(s.d.N);
    std::mt19937_64 rng(7);
    for (int threads : {1, 3, 16}) {
        for (std::uint64_t jitter : {0ull, 99ull}) {
            Runtime threaded = Runtime::threaded(s.d.N, threads, jitter ? std::optional<std::uint64_t>(jitter) : std::nullopt);
            for (int t = 0; t < 5; ++t) {
                DualVector v = random_dual(s.topo, rng);
                DualVector a = v, b = v;
                serial.halo_exchange(s.topo, a);
                threaded.halo_exchange(s.topo, b);
                EXPECT_TRUE(bit_equal(a, b));
                EXPECT_TRUE(bit_equal(serial.neighbor_exchange(s.topo, v), threaded.neighbor_exchange(s.topo, v)));

                std::vector<std::vector<double>> contrib(static_cast<std::size_t>(s.d.N));
                std::vector<double> scal(static_cast<std::size_t>(s.d.N));
                threaded.for_each_worker([&](int n) {
                    std::mt19937_64 local(static_cast<std::uint64_t>(1000 * t + n));
                    contrib[static_cast<std::size_t>(n)] = oracle::random_vector(16, local);
                    scal[static_cast<std::size_t>(n)] = contrib[static_cast<std::size_t>(n)][0] * 1e10;
                });
                auto ca = serial.coarse_reduce(contrib), cb = threaded.coarse_reduce(contrib);
                EXPECT_EQ(std::memcmp(ca.data(), cb.data(), ca.size() * sizeof(double)), 0);
                const double sa = serial.scalar_allreduce(scal), sb = threaded.scalar_allreduce(scal);
                EXPECT_EQ(std::memcmp(&sa, &sb, sizeof(double)), 0);
            }
        }
    }
}

TEST(Backends, AdversarialSchedulingKeepsBits) {
    // Worker results written in scrambled completion order still reduce to
    // the same bits as the serial order.
    const int N = 16;
    Runtime serial = Runtime::serial(N);
    std::vector<double> ref;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        Runtime rt = Runtime::threaded(N, 4, seed);
        std::vector<std::vector<double>> contrib(N);
        rt.for_each_worker([&](int n) {
            std::mt19937_64 local(static_cast<std::uint64_t>(n));
            std::vector<double> v(8);
            for (auto& x : v)
                x = std::ldexp(std::uniform_real_distribution<double>(-1, 1)(local), n * 3 - 20);
            contrib[static_cast<std::size_t>(n)] = v;
        });
        auto sum = rt.coarse_reduce(contrib);
        if (ref.empty())
            ref = serial.coarse_reduce(contrib);
        EXPECT_EQ(std::memcmp(sum.data(), ref.data(), ref.size() * sizeof(double)), 0);
    }
}

TEST(Backends, StressTenThousandCollectives) {
    Fixture s = make_setup(16, 1, 4);
    ASSERT_EQ(s.d.N, 16);
    Runtime rt = Runtime::threaded(16, 4);
    std::mt19937_64 rng(12);
    DualVector v = random_dual(s.topo, rng);
    std::vector<double> scal(16, 1.0);
    std::vector<std::vector<double>> contrib(16, std::vector<double>(4, 0.25));
    double acc = 0.0;
    for (int k = 0; k < 10000; ++k) {
        switch (k % 3) {
        case 0:
            v = rt.neighbor_exchange(s.topo, v);
            break;
        case 1:
            acc += rt.scalar_allreduce(scal);
            break;
        default:
            acc += rt.coarse_reduce(contrib)[0];
            break;
        }
    }
    EXPECT_GT(acc, 0.0);
}

TEST(Backends, WorkerExceptionsPropagate) {
    Runtime rt = Runtime::threaded(6, 3);
    EXPECT_THROW(rt.for_each_worker([](int n) {
        if (n == 4)
            throw Error(ErrorCode::config_error, "boom");
    }),
                 Error);
    int count = 0;
    Runtime::threaded(6, 1).for_each_worker([&](int) { ++count; });
    EXPECT_EQ(count, 6);
}
