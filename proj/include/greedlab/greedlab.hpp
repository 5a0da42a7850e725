/*
 * Copyright 2026 The greedlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "greedlab/autodiff.hpp"
#include "greedlab/config.hpp"
#include "greedlab/data.hpp"
#include "greedlab/errors.hpp"
#include "greedlab/losses.hpp"
#include "greedlab/metrics.hpp"
#include "greedlab/nn.hpp"
#include "greedlab/oracle.hpp"
#include "greedlab/plot.hpp"
#include "greedlab/regularizer.hpp"
#include "greedlab/rng.hpp"
#include "greedlab/tensor.hpp"
#include "greedlab/trainer.hpp"
