#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace adafsnet {

// Primes up to and including n (n >= 2).
std::vector<int> sieve_primes(int n);

// Lexicographically smallest (p, q), p <= q, p + q = e. Throws if no
// decomposition exists below e (never observed; reported, not assumed away).
std::pair<int, int> goldbach_pair(int e);

// Receptive field of a stride-1 stack: 1 + sum(k - 1).
int receptive_field(const std::vector<int>& kernels);

struct KernelPlan {
    int p_k = 0;
    std::vector<int> p1, p2, p3;            // per-layer kernel size sets, sorted
    std::vector<std::array<int, 3>> paths;  // p1 x p2 x p3 in lexicographic order
    std::vector<int> coverage;              // sorted set of reachable RF sizes
    int target_rf = 0;
    bool p3_literal = false;
};

// P1 = P2 = {1,2} U {odd primes <= p_k}; P3 = {1,2}, or {2} in literal mode.
void build_kernel_sets(int p_k, bool literal, std::vector<int>& p1, std::vector<int>& p2,
                       std::vector<int>& p3);

// Exact set { k1 + k2 + k3 - 2 } over the cartesian product.
std::vector<int> coverage_set(const std::vector<int>& p1, const std::vector<int>& p2,
                              const std::vector<int>& p3);

// Assembles sets, paths and coverage for a given prime and target.
KernelPlan make_plan(int p_k, int target_rf, bool literal = false);

struct CoverageReport {
    bool ok = false;
    std::vector<int> missing;  // [1, target_rf] \ coverage
};

CoverageReport verify_coverage(const KernelPlan& plan);

// Smallest prime whose verified coverage contains [1, min(series_length, rf_cap)].
KernelPlan select_pk(int series_length, int rf_cap = 48, bool literal = false);

// "RF <n>: <k1>-<k2>-<k3>" lines, one per covered RF, plus a summary line.
std::string coverage_certificate(const KernelPlan& plan);

}  // namespace adafsnet
