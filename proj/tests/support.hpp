// Copyright 2026 The voxtag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Helpers shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "voxtag/autodiff.hpp"
#include "voxtag/rng.hpp"

namespace voxtag::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("voxtag_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<double> normal_values(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline ad::Tensor random_parameter(ad::Shape shape, Rng& rng, double scale = 1.0) {
  const std::size_t n = ad::numel(shape);
  return ad::Tensor::parameter(std::move(shape), normal_values(n, rng, scale));
}

/// |analytic - numeric| / max(|analytic|, |numeric|, floor). Gradients whose
/// magnitude is below `floor` are compared at that scale.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Largest relative error between backward() and central differences of
/// `loss` over every element of `params`.
inline double gradient_check(const std::vector<ad::Tensor>& params,
                             const std::function<ad::Tensor()>& loss, double eps = 1e-4) {
  for (auto p : params) p.zero_grad();
  ad::backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    std::vector<double> g(p.grad().begin(), p.grad().end());
    g.resize(p.size(), 0.0);
    analytic.push_back(std::move(g));
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor p = params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values()[i];
      p.mutable_values()[i] = saved + eps;
      const double up = loss().item();
      p.mutable_values()[i] = saved - eps;
      const double down = loss().item();
      p.mutable_values()[i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace voxtag::testing
