#include "dan/stats.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "dan/errors.hpp"
#include "dan/rng.hpp"

namespace dan {

double mean(std::span<const double> v) {
  if (v.empty()) throw ValidationError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::span<const double> v) {
  if (v.empty()) throw ValidationError("median of an empty sample");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

namespace {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > cap) return cap + 1;
  }
  return r;
}

}  // namespace

double permutation_p_value(std::span<const double> a, std::span<const double> b, std::uint64_t seed,
                           std::uint64_t max_exact, std::uint64_t samples) {
  if (a.empty() || b.empty()) throw ValidationError("permutation test needs two non-empty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), na = a.size();
  const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
  auto diff = [&](double sum_a) {
    return sum_a / static_cast<double>(na) - (total - sum_a) / static_cast<double>(n - na);
  };
  const double observed = diff(std::accumulate(a.begin(), a.end(), 0.0));
  const double tol = 1e-12 * std::max(1.0, std::abs(observed));

  std::uint64_t hits = 0, count = 0;
  if (binomial(n, na, max_exact) <= max_exact) {
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), true);
    // prev_permutation on a sorted-descending mask enumerates every subset once.
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) s += pooled[i];
      hits += diff(s) >= observed - tol;
      ++count;
    } while (std::prev_permutation(pick.begin(), pick.end()));
  } else {
    Rng rng(derive_seed(seed, "permutation"));
    std::vector<std::size_t> idx(n);
    for (std::uint64_t k = 0; k < samples; ++k) {
      std::iota(idx.begin(), idx.end(), 0);
      double s = 0.0;
      for (std::size_t i = 0; i < na; ++i) {
        const std::size_t j = i + rng.uniform_int(n - i);
        std::swap(idx[i], idx[j]);
        s += pooled[idx[i]];
      }
      hits += diff(s) >= observed - tol;
      ++count;
    }
    // Count the observed labelling so the p-value is never zero.
    ++hits;
    ++count;
  }
  return static_cast<double>(hits) / static_cast<double>(count);
}

}  // namespace dan
