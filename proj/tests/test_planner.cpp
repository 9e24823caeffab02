#include <doctest.h>

#include <algorithm>
#include <set>

#include "adafsnet/error.hpp"
#include "adafsnet/planner.hpp"

using namespace adafsnet;

namespace {

// Independent brute-force oracle: triple loop over the cartesian product.
std::set<int> brute_force_coverage(const std::vector<int>& p1, const std::vector<int>& p2,
                                   const std::vector<int>& p3) {
    std::set<int> rfs;
    for (int a : p1)
        for (int b : p2)
            for (int c : p3) rfs.insert(a + b + c - 2);
    return rfs;
}

}  // namespace

TEST_CASE("sieve_primes basics") {
    CHECK(sieve_primes(10) == std::vector<int>{2, 3, 5, 7});
    CHECK(sieve_primes(2) == std::vector<int>{2});
    CHECK(sieve_primes(100).size() == 25);
    CHECK_THROWS_AS(sieve_primes(1), UsageError);
}

TEST_CASE("goldbach_pair basics") {
    CHECK(goldbach_pair(4) == std::pair<int, int>{2, 2});
    CHECK(goldbach_pair(10) == std::pair<int, int>{3, 7});
    CHECK_THROWS_AS(goldbach_pair(7), UsageError);
    CHECK_THROWS_AS(goldbach_pair(2), UsageError);
}

TEST_CASE("goldbach pairs exist for every even in [4, 20000]") {
    const std::vector<int> primes = sieve_primes(20000);
    std::vector<bool> is_prime(20001, false);
    for (int p : primes) is_prime[static_cast<std::size_t>(p)] = true;
    for (int e = 4; e <= 20000; e += 2) {
        bool found = false;
        for (int p : primes) {
            if (p > e / 2) break;
            if (is_prime[static_cast<std::size_t>(e - p)]) {
                found = true;
                break;
            }
        }
        REQUIRE(found);
    }
}

TEST_CASE("receptive_field arithmetic") {
    CHECK(receptive_field({3, 3, 3, 3}) == 9);
    CHECK(receptive_field({5}) == 5);
    CHECK(receptive_field({1, 1, 2}) == 2);
    CHECK_THROWS_AS(receptive_field({}), UsageError);
}

TEST_CASE("build_kernel_sets composition") {
    std::vector<int> p1, p2, p3;
    build_kernel_sets(7, false, p1, p2, p3);
    CHECK(p1 == std::vector<int>{1, 2, 3, 5, 7});
    CHECK(p2 == p1);
    CHECK(p3 == std::vector<int>{1, 2});

    build_kernel_sets(2, false, p1, p2, p3);
    CHECK(p1 == std::vector<int>{1, 2});

    build_kernel_sets(13, false, p1, p2, p3);
    CHECK(p1.size() == 7);  // {1,2,3,5,7,11,13}

    build_kernel_sets(7, true, p1, p2, p3);
    CHECK(p3 == std::vector<int>{2});

    CHECK_THROWS_AS(build_kernel_sets(9, false, p1, p2, p3), UsageError);
}

TEST_CASE("coverage_set matches enumeration examples") {
    const std::vector<int> p12{1, 2, 3, 5, 7};
    const std::vector<int> p3{1, 2};
    const std::vector<int> cover = coverage_set(p12, p12, p3);
    for (int rf = 1; rf <= 14; ++rf) {
        CHECK(std::binary_search(cover.begin(), cover.end(), rf));
    }
    CHECK(coverage_set({1, 2}, {1, 2}, {1, 2}) == std::vector<int>{1, 2, 3, 4});
    CHECK(coverage_set({1}, {1}, {1}) == std::vector<int>{1});
}

TEST_CASE("coverage_set equals the brute-force oracle for every prime up to 97") {
    for (int p : sieve_primes(97)) {
        std::vector<int> p1, p2, p3;
        build_kernel_sets(p, false, p1, p2, p3);
        const std::vector<int> got = coverage_set(p1, p2, p3);
        const std::set<int> oracle = brute_force_coverage(p1, p2, p3);
        CHECK(std::vector<int>(oracle.begin(), oracle.end()) == got);
    }
}

TEST_CASE("coverage monotonicity over consecutive primes") {
    const std::vector<int> primes = sieve_primes(97);
    for (std::size_t i = 0; i + 1 < primes.size(); ++i) {
        std::vector<int> a1, a2, a3, b1, b2, b3;
        build_kernel_sets(primes[i], false, a1, a2, a3);
        build_kernel_sets(primes[i + 1], false, b1, b2, b3);
        const std::vector<int> small = coverage_set(a1, a2, a3);
        const std::vector<int> big = coverage_set(b1, b2, b3);
        CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    }
}

TEST_CASE("select_pk certified examples") {
    const KernelPlan plan14 = select_pk(14, 48);
    CHECK(plan14.p_k == 7);
    CHECK(verify_coverage(plan14).ok);

    CHECK(select_pk(4, 48).p_k == 2);
    CHECK(select_pk(2, 48).p_k == 2);
    CHECK_THROWS_AS(select_pk(1, 48), UsageError);
}

TEST_CASE("p_k=5 misses target 14 with odd gaps from 11 up") {
    const KernelPlan plan = make_plan(5, 14);
    const CoverageReport report = verify_coverage(plan);
    CHECK_FALSE(report.ok);
    CHECK(std::find(report.missing.begin(), report.missing.end(), 11) != report.missing.end());
    CHECK(std::find(report.missing.begin(), report.missing.end(), 13) != report.missing.end());
    // max reachable RF is 5+5+2-2 = 10, so everything in [11,14] is missing
    CHECK(report.missing == std::vector<int>{11, 12, 13, 14});
}

TEST_CASE("bounded-part decompositions genuinely fail for some primes") {
    // 20 has no two-prime decomposition with both parts <= 11 (3+17, 7+13 need
    // larger primes), so a plan on p_k=11 cannot reach RF 20 and the planner
    // must advance to 13 for a target of 22.
    const KernelPlan plan11 = make_plan(11, 22);
    const CoverageReport report = verify_coverage(plan11);
    CHECK_FALSE(report.ok);
    CHECK(std::find(report.missing.begin(), report.missing.end(), 20) != report.missing.end());
    CHECK(select_pk(22, 48).p_k == 13);
}

TEST_CASE("select_pk minimality: no smaller prime passes verification") {
    for (int target : {2, 4, 8, 14, 20, 24, 30, 48}) {
        const KernelPlan chosen = select_pk(target, 64);
        for (int p : sieve_primes(chosen.p_k)) {
            if (p == chosen.p_k) continue;
            CHECK_FALSE(verify_coverage(make_plan(p, target)).ok);
        }
    }
}

TEST_CASE("select_pk honors rf_cap") {
    const KernelPlan plan = select_pk(500, 14);
    CHECK(plan.target_rf == 14);
    CHECK(plan.p_k == 7);
}

TEST_CASE("literal P3={2} never covers RF 1") {
    const KernelPlan plan = make_plan(7, 14, true);
    const CoverageReport report = verify_coverage(plan);
    CHECK_FALSE(report.ok);
    CHECK(report.missing.front() == 1);
    CHECK_THROWS_AS(select_pk(14, 48, true), NumericError);
}

TEST_CASE("plan invariants: paths, attribution of coverage, target 1") {
    const KernelPlan plan = select_pk(14, 48);
    CHECK(plan.paths.size() == plan.p1.size() * plan.p2.size() * plan.p3.size());
    std::set<std::array<int, 3>> unique(plan.paths.begin(), plan.paths.end());
    CHECK(unique.size() == plan.paths.size());
    for (const auto& path : plan.paths) {
        const int rf = path[0] + path[1] + path[2] - 2;
        CHECK(std::binary_search(plan.coverage.begin(), plan.coverage.end(), rf));
    }
    // any plan containing (1,1,1) covers a target of 1
    KernelPlan tiny = make_plan(2, 1);
    CHECK(verify_coverage(tiny).ok);
}

TEST_CASE("coverage certificate lists one witness per RF") {
    const KernelPlan plan = select_pk(6, 48);
    const std::string cert = coverage_certificate(plan);
    CHECK(cert.find("RF 1: 1-1-1") != std::string::npos);
    CHECK(cert.find("coverage OK [1..6]") != std::string::npos);
}
