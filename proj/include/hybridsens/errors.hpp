// Copyright 2026 The hybridsens Authors
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

#ifndef HYBRIDSENS_ERRORS_HPP_
#define HYBRIDSENS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace hybridsens {

// Base of every error raised by the library. `kind()` is the stable name
// printed by the command-line tool (e.g. "GrazingDetected").
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define HYBRIDSENS_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(#Name, what) {}      \
  };

// Model / configuration problems.
HYBRIDSENS_DEFINE_ERROR(ConfigError)
HYBRIDSENS_DEFINE_ERROR(DegenerateMass)
HYBRIDSENS_DEFINE_ERROR(RankDeficient)
HYBRIDSENS_DEFINE_ERROR(Infeasible)

// Integration failures.
HYBRIDSENS_DEFINE_ERROR(DriftExceeded)
HYBRIDSENS_DEFINE_ERROR(StepUnderflow)
HYBRIDSENS_DEFINE_ERROR(NoConvergence)

// Admissibility failures (the trajectory leaves the class where outcomes are
// differentiable).
HYBRIDSENS_DEFINE_ERROR(GrazingDetected)
HYBRIDSENS_DEFINE_ERROR(ZenoGuard)

// Sensitivity failures.
HYBRIDSENS_DEFINE_ERROR(GrazingDenominator)
HYBRIDSENS_DEFINE_ERROR(UnrealizableOrdering)
HYBRIDSENS_DEFINE_ERROR(DecouplingViolated)
HYBRIDSENS_DEFINE_ERROR(TerminalAtEvent)

#undef HYBRIDSENS_DEFINE_ERROR

// True for errors that mean "this initial condition has no admissible
// trajectory" rather than "the caller did something wrong".
inline bool is_admissibility_error(const Error& e) {
  const std::string& k = e.kind();
  return k == "GrazingDetected" || k == "ZenoGuard" ||
         k == "GrazingDenominator" || k == "UnrealizableOrdering" ||
         k == "TerminalAtEvent" || k == "Infeasible" ||
         k == "DriftExceeded" || k == "StepUnderflow" ||
         k == "NoConvergence" || k == "RankDeficient" ||
         k == "DegenerateMass" || k == "DecouplingViolated";
}

}  // namespace hybridsens

#endif  // HYBRIDSENS_ERRORS_HPP_
