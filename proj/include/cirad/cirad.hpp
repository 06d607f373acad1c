// SPDX-License-Identifier: Apache-2.0
//
// cirad: compressive illumination radar simulation and sparse recovery
// Copyright (C) 2026 The cirad authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CIRAD_CIRAD_HPP
#define CIRAD_CIRAD_HPP

#include "adcg.hpp"
#include "config.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "illumination.hpp"
#include "lasso.hpp"
#include "linear_operator.hpp"
#include "metrics.hpp"
#include "random.hpp"
#include "scene.hpp"
#include "sensing.hpp"

#endif // CIRAD_CIRAD_HPP
