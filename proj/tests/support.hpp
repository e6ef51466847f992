#ifndef HOLMES_TESTS_SUPPORT_HPP
#define HOLMES_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "holmes/inference.hpp"
#include "holmes/likelihood.hpp"

namespace holmes::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("holmes-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Restricted growth string: first-appearance relabeling of a label sequence.
template <typename T>
std::vector<int> canonical_partition(const std::vector<T>& labels) {
  std::map<T, int> seen;
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const auto it = seen.emplace(l, static_cast<int>(seen.size())).first;
    out.push_back(it->second);
  }
  return out;
}

inline void enumerate_partitions(std::size_t n, std::vector<int>& current, int blocks,
                                 std::vector<std::vector<int>>& out) {
  if (current.size() == n) {
    out.push_back(current);
    return;
  }
  for (int b = 0; b <= blocks; ++b) {
    current.push_back(b);
    enumerate_partitions(n, current, std::max(blocks, b + 1), out);
    current.pop_back();
  }
}

inline std::vector<std::vector<int>> all_partitions(std::size_t n) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  enumerate_partitions(n, current, 0, out);
  return out;
}

/// Exact posterior over set partitions of the columns of `data`: CRP prior
/// times a Beta-Bernoulli marginal per block over the masked rows.
inline std::map<std::vector<int>, double> exact_partition_posterior(const ObservationMatrix& data,
                                                                    double alpha, double omega,
                                                                    const FeatureMask& mask) {
  const auto log_beta = [](double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  };
  const auto n = static_cast<std::size_t>(data.cols());
  std::map<std::vector<int>, double> log_post;
  double peak = -INFINITY;
  for (const auto& part : all_partitions(n)) {
    const int blocks = *std::max_element(part.begin(), part.end()) + 1;
    double lp = 0.0;
    for (std::size_t i = 0; i < n; ++i) lp -= std::log(alpha + static_cast<double>(i));
    for (int b = 0; b < blocks; ++b) {
      int size = 0;
      for (int x : part) size += x == b;
      lp += std::log(alpha) + std::lgamma(static_cast<double>(size));
      for (Eigen::Index f = 0; f < data.rows(); ++f) {
        if (!mask.contains(f)) continue;
        int ones = 0, zeros = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (part[i] != b) continue;
          (data(f, static_cast<Eigen::Index>(i)) ? ones : zeros) += 1;
        }
        lp += log_beta(omega + ones, omega + zeros) - log_beta(omega, omega);
      }
    }
    log_post[part] = lp;
    peak = std::max(peak, lp);
  }
  double total = 0.0;
  for (auto& [p, lp] : log_post) total += (lp = std::exp(lp - peak));
  for (auto& [p, w] : log_post) w /= total;
  return log_post;
}

/// Partition distribution of the final particles' traced histories.
inline std::map<std::vector<int>, double> empirical_partition_posterior(const RunResult& run) {
  const auto lineages = trace_lineages(run);
  std::map<std::vector<int>, double> out;
  if (run.trials.empty()) return out;
  const std::size_t particles = lineages.front().size();
  for (std::size_t j = 0; j < particles; ++j) {
    std::vector<NodeId> ids;
    for (std::size_t t = 0; t < run.trials.size(); ++t) {
      ids.push_back(run.trials[t].proposals[static_cast<std::size_t>(lineages[t][j])][0]);
    }
    out[canonical_partition(ids)] += 1.0 / static_cast<double>(particles);
  }
  return out;
}

inline double total_variation(const std::map<std::vector<int>, double>& p,
                              const std::map<std::vector<int>, double>& q) {
  std::map<std::vector<int>, double> diff = p;
  for (const auto& [k, v] : q) diff[k] -= v;
  double tv = 0.0;
  for (const auto& [k, v] : diff) tv += std::abs(v);
  return 0.5 * tv;
}

inline ObservationMatrix oracle_stream() {
  ObservationMatrix data(2, 4);
  data << 1, 1, 0, 0,
          1, 1, 0, 1;
  return data;
}

}  // namespace holmes::testing

#endif  // HOLMES_TESTS_SUPPORT_HPP
