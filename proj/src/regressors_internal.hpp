/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/regressors_internal.hpp
 *
 * Copyright 2026 The cephalo authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "cephalo/regressors.hpp"

#include <vector>

namespace cephalo::regressors::detail {

/// Ground truth rows repeated once per initialization of each image.
Eigen::MatrixXd replicated_targets(const detection::RegionTrainSet& trainset, std::size_t per_image);

std::vector<features::RegionFrame> training_frames(const detection::RegionTrainSet& trainset,
                                                   const features::FrameParams& params, int jobs);

} // namespace cephalo::regressors::detail
