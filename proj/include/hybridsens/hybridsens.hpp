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

#ifndef HYBRIDSENS_HYBRIDSENS_HPP_
#define HYBRIDSENS_HYBRIDSENS_HPP_

#include "hybridsens/contact_dynamics.hpp"
#include "hybridsens/dopri.hpp"
#include "hybridsens/errors.hpp"
#include "hybridsens/hybrid_flow.hpp"
#include "hybridsens/model.hpp"
#include "hybridsens/sensitivity.hpp"
#include "hybridsens/validation.hpp"
#include "hybridsens/zoo.hpp"

#endif  // HYBRIDSENS_HYBRIDSENS_HPP_
