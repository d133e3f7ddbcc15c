// Copyright 2026 The malascale Authors.
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

#ifndef MALASCALE_MALASCALE_HPP_
#define MALASCALE_MALASCALE_HPP_

#include "malascale/config.hpp"
#include "malascale/diagnostics.hpp"
#include "malascale/errors.hpp"
#include "malascale/experiments.hpp"
#include "malascale/limit.hpp"
#include "malascale/model.hpp"
#include "malascale/normal.hpp"
#include "malascale/quadrature.hpp"
#include "malascale/rng.hpp"
#include "malascale/sampler.hpp"
#include "malascale/validate.hpp"

#endif  // MALASCALE_MALASCALE_HPP_
