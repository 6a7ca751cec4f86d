/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/pipeline.hpp
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

#include "cephalo/core.hpp"
#include "cephalo/detection.hpp"
#include "cephalo/imaging.hpp"
#include "cephalo/regressors.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace cephalo::pipeline {

/// The three compared detectors: region-specialized, whole-face descent, whole-face trees.
enum class DetectorKind { hr, sd, ert };

std::string_view kind_name(DetectorKind kind);
/// Accepts "hr", "sd" and "ert"; throws cephalo::Error otherwise.
DetectorKind parse_kind(std::string_view name);

/// Landmarks predicted by the detector of one region, in canonical order.
const std::vector<LandmarkId>& region_assignment(detection::RegionKind kind);

/// Landmarks assigned to more than one region.
std::vector<LandmarkId> shared_landmarks();

/// Throws cephalo::Error unless the assignments cover all 28 landmarks and the
/// shared set is exactly {zy_l, zy_r, go_l, go_r, gn}.
void check_assignment();

enum class FusionMode { average, priority };

struct FusionRule {
    FusionMode mode = FusionMode::average;
    std::vector<detection::RegionKind> priority{detection::RegionKind::face, detection::RegionKind::eyes,
                                                detection::RegionKind::mouth, detection::RegionKind::nose};

    /// Priority lists must name each of the four regions exactly once.
    void validate() const;

    friend bool operator==(const FusionRule&, const FusionRule&) = default;
};

/// Combines per-region predictions. Averaging takes the unweighted mean of every
/// region predicting a landmark; priority takes the first listed region that has it.
Shape fuse(const std::map<detection::RegionKind, Shape>& predictions, const FusionRule& rule);

enum class Engine { sdm, ert };

struct HrModel {
    std::map<detection::RegionKind, regressors::RegionDetectorModel> regions;
    detection::RegionFractions fractions;
    FusionRule fusion;

    /// Throws cephalo::Error unless all four regions are present with their assigned landmarks.
    void validate() const;
};

/// Trains one regressor per region on images that carry a face box.
HrModel hr_train(std::span<const detection::LabeledImage> images, const regressors::TrainConfig& cfg,
                 const detection::RegionFractions& fractions, const FusionRule& fusion = {},
                 Engine engine = Engine::sdm, int jobs = 1);

/// All 28 landmarks in image pixels; `img` is preprocessed.
Shape hr_detect(const HrModel& model, const imaging::GrayImage& img, const detection::RegionBox& face);

/// Whole-face model over all 28 landmarks: sd trains descent, ert trains trees.
/// Throws cephalo::Error for the hr kind.
regressors::RegionDetectorModel baseline_train(std::span<const detection::LabeledImage> images,
                                               const regressors::TrainConfig& cfg, DetectorKind kind, int jobs = 1);

/// A trained detector of any kind.
struct Detector {
    DetectorKind kind = DetectorKind::hr;
    std::variant<HrModel, regressors::RegionDetectorModel> model;

    Shape detect(const imaging::GrayImage& preprocessed, const detection::RegionBox& face) const;
};

Detector train_detector(std::span<const detection::LabeledImage> images, const regressors::TrainConfig& cfg,
                        DetectorKind kind, const detection::RegionFractions& fractions = {},
                        const FusionRule& fusion = {}, int jobs = 1);

inline constexpr const char* kBundleMagic = "cephalo-bundle";
inline constexpr int kBundleSchemaVersion = 1;

/// Writes bundle.json plus one model file per region into `dir`.
void save_bundle(const Detector& detector, const std::filesystem::path& dir);
/// Throws SchemaError on a wrong magic string, schema version or preprocessing tag.
Detector load_bundle(const std::filesystem::path& dir);

} // namespace cephalo::pipeline
