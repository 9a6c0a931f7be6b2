// tests/gradcheck.hpp

// Copyright 2026  The cif-align Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Central finite-difference gradient checks and the catalogue of
// differentiable operations they cover.

#ifndef CIF_TESTS_GRADCHECK_HPP_
#define CIF_TESTS_GRADCHECK_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cif/tensor.hpp"

namespace cif::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-4;
// Denominator floor of the relative error, so that gradients that vanish
// analytically are compared absolutely at this scale.
inline constexpr double kFdFloor = 1e-6;

// One random instance: parameters and a scalar function of them. Only the
// listed coordinates are probed (all when empty).
struct GradInstance {
  std::vector<Tensor> params;
  std::function<Tensor(const std::vector<Tensor>&)> loss;
  std::vector<std::pair<std::size_t, std::size_t>> probes;
};

struct GradReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "param[i]: analytic vs numeric"
};

GradReport grad_check(GradInstance& inst, double step = kFdStep);

struct GradCase {
  std::string name;
  // Instance for `seed`; nullopt when the draw lands too close to a kink
  // and must be redrawn.
  std::function<std::optional<GradInstance>(std::uint64_t seed)> make;
};

const std::vector<GradCase>& gradient_cases();

struct CaseReport {
  std::string name;
  std::size_t instances = 0;
  GradReport worst;
};

// Runs `instances` accepted draws of one case.
CaseReport run_case(const GradCase& c, std::size_t instances, std::uint64_t seed);

}  // namespace cif::testing

#endif  // CIF_TESTS_GRADCHECK_HPP_
