#include "adafsnet/planner.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "adafsnet/error.hpp"

namespace adafsnet {

std::vector<int> sieve_primes(int n) {
    if (n < 2) throw UsageError("sieve_primes: n must be >= 2, got " + std::to_string(n));
    std::vector<bool> composite(static_cast<std::size_t>(n) + 1, false);
    std::vector<int> primes;
    for (int i = 2; i <= n; ++i) {
        if (composite[static_cast<std::size_t>(i)]) continue;
        primes.push_back(i);
        for (long long j = static_cast<long long>(i) * i; j <= n; j += i) {
            composite[static_cast<std::size_t>(j)] = true;
        }
    }
    return primes;
}

std::pair<int, int> goldbach_pair(int e) {
    if (e < 4 || e % 2 != 0) {
        throw UsageError("goldbach_pair: need an even integer >= 4, got " + std::to_string(e));
    }
    const std::vector<int> primes = sieve_primes(e);
    std::vector<bool> is_prime(static_cast<std::size_t>(e) + 1, false);
    for (int p : primes) is_prime[static_cast<std::size_t>(p)] = true;
    for (int p : primes) {
        if (p > e / 2) break;
        if (is_prime[static_cast<std::size_t>(e - p)]) return {p, e - p};
    }
    throw NumericError("goldbach_pair: no two-prime decomposition found for " + std::to_string(e));
}

int receptive_field(const std::vector<int>& kernels) {
    if (kernels.empty()) throw UsageError("receptive_field: empty kernel list");
    int rf = 1;
    for (int k : kernels) {
        if (k < 1) throw UsageError("receptive_field: kernel sizes must be >= 1");
        rf += k - 1;
    }
    return rf;
}

void build_kernel_sets(int p_k, bool literal, std::vector<int>& p1, std::vector<int>& p2,
                       std::vector<int>& p3) {
    if (p_k < 2) throw UsageError("build_kernel_sets: p_k must be a prime >= 2");
    const std::vector<int> primes = sieve_primes(p_k);
    if (std::find(primes.begin(), primes.end(), p_k) == primes.end()) {
        throw UsageError("build_kernel_sets: " + std::to_string(p_k) + " is not prime");
    }
    p1 = {1, 2};
    for (int p : primes) {
        if (p % 2 == 1) p1.push_back(p);
    }
    p2 = p1;
    p3 = literal ? std::vector<int>{2} : std::vector<int>{1, 2};
}

std::vector<int> coverage_set(const std::vector<int>& p1, const std::vector<int>& p2,
                              const std::vector<int>& p3) {
    if (p1.empty() || p2.empty() || p3.empty()) {
        throw UsageError("coverage_set: kernel size sets must be nonempty");
    }
    std::set<int> cover;
    for (int k1 : p1) {
        for (int k2 : p2) {
            for (int k3 : p3) cover.insert(k1 + k2 + k3 - 2);
        }
    }
    return {cover.begin(), cover.end()};
}

KernelPlan make_plan(int p_k, int target_rf, bool literal) {
    KernelPlan plan;
    plan.p_k = p_k;
    plan.target_rf = target_rf;
    plan.p3_literal = literal;
    build_kernel_sets(p_k, literal, plan.p1, plan.p2, plan.p3);
    for (int k1 : plan.p1) {
        for (int k2 : plan.p2) {
            for (int k3 : plan.p3) plan.paths.push_back({k1, k2, k3});
        }
    }
    plan.coverage = coverage_set(plan.p1, plan.p2, plan.p3);
    return plan;
}

CoverageReport verify_coverage(const KernelPlan& plan) {
    CoverageReport report;
    std::set<int> cover(plan.coverage.begin(), plan.coverage.end());
    for (int rf = 1; rf <= plan.target_rf; ++rf) {
        if (!cover.count(rf)) report.missing.push_back(rf);
    }
    report.ok = report.missing.empty();
    return report;
}

KernelPlan select_pk(int series_length, int rf_cap, bool literal) {
    if (series_length < 2) {
        throw UsageError("select_pk: series length must be >= 2, got " + std::to_string(series_length));
    }
    if (rf_cap < 1) throw UsageError("select_pk: rf_cap must be >= 1");
    const int target = std::min(series_length, rf_cap);
    // Unbounded-parts Goldbach pairs exist well below this bound, so a
    // verified plan is always found in practice; failure is reported.
    const std::vector<int> candidates = sieve_primes(2 * target + 3);
    std::vector<int> last_missing;
    for (int p : candidates) {
        KernelPlan plan = make_plan(p, target, literal);
        CoverageReport report = verify_coverage(plan);
        if (report.ok) return plan;
        last_missing = std::move(report.missing);
    }
    std::ostringstream msg;
    msg << "select_pk: no prime <= " << candidates.back() << " covers [1," << target << "]";
    if (!last_missing.empty()) {
        msg << "; still missing";
        for (std::size_t i = 0; i < std::min<std::size_t>(last_missing.size(), 8); ++i) {
            msg << ' ' << last_missing[i];
        }
    }
    throw NumericError(msg.str());
}

std::string coverage_certificate(const KernelPlan& plan) {
    // Smallest witness path per covered RF, preferring lexicographic order.
    std::map<int, std::array<int, 3>> witness;
    for (const auto& path : plan.paths) {
        const int rf = path[0] + path[1] + path[2] - 2;
        if (!witness.count(rf)) witness[rf] = path;
    }
    std::ostringstream out;
    for (const auto& [rf, path] : witness) {
        if (rf > plan.target_rf) continue;
        out << "RF " << rf << ": " << path[0] << "-" << path[1] << "-" << path[2] << "\n";
    }
    const CoverageReport report = verify_coverage(plan);
    if (report.ok) {
        out << "coverage OK [1.." << plan.target_rf << "]\n";
    } else {
        out << "coverage INCOMPLETE, missing";
        for (int rf : report.missing) out << ' ' << rf;
        out << "\n";
    }
    return out.str();
}

}  // namespace adafsnet
