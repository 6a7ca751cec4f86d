/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/synthgen.hpp
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
#include "cephalo/imaging.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>

namespace cephalo::synthgen {

/// Geometry and shading of one synthetic frontal face. Lengths are in pixels.
struct FaceParams {
    int width = 480;
    int height = 640;
    // face outline: upper half-ellipse, lower half-superellipse
    double center_x = 240.0;
    double center_y = 330.0;
    double half_width = 125.0;
    double upper_height = 165.0;
    double lower_height = 160.0;
    double jaw_exponent = 2.3;
    // eyes; offsets are from the midline to each eye center
    double eye_dy = -20.0;
    double eye_offset_l = 52.0;
    double eye_offset_r = 52.0;
    double eye_rx = 22.0;
    double eye_ry = 10.0;
    double iris_radius = 9.0;
    double pupil_radius = 3.5;
    double gaze = 0.0;
    double brow_thickness = 4.0;
    // nose: base below the eye line, wings as an ellipse
    double nose_length = 62.0;
    double nose_width = 44.0;
    // mouth
    double mouth_dy = 82.0;
    double mouth_width = 64.0;
    double upper_lip = 9.0;
    double lower_lip = 11.0;
    // shading
    double background = 40.0;
    double skin = 170.0;
    double brow = 70.0;
    double sclera = 235.0;
    double iris = 90.0;
    double pupil = 15.0;
    double nose = 145.0;
    double nostril = 60.0;
    double lip = 105.0;
    double noise_sigma = 2.5;
    std::uint64_t seed = 0;

    /// Throws cephalo::Error when a part leaves the canvas or its parent part,
    /// parts collide, or the eye offsets differ by more than 10%.
    void validate() const;

    friend bool operator==(const FaceParams&, const FaceParams&) = default;
};

/// A mean and a half-width of uniform jitter.
struct Range {
    double mean = 0.0;
    double jitter = 0.0;
};

/// Sampling ranges. Lengths are drawn around their means and then multiplied by
/// one common draw of `scale`.
struct FaceDistribution {
    int width = 480;
    int height = 640;
    Range center_x{240.0, 20.0};
    Range center_y{330.0, 20.0};
    Range scale{1.0, 0.1};
    Range half_width{125.0, 10.0};
    Range upper_height{165.0, 10.0};
    Range lower_height{160.0, 12.0};
    Range jaw_exponent{2.4, 0.6};
    Range eye_dy{-20.0, 12.0};
    Range eye_offset{52.0, 8.0};
    /// Relative left/right difference of the eye offsets.
    Range eye_asymmetry{0.0, 0.05};
    Range eye_rx{22.0, 3.0};
    Range eye_ry{10.0, 2.0};
    Range iris_radius{9.0, 1.0};
    Range pupil_radius{3.5, 0.5};
    Range gaze{0.0, 4.0};
    Range brow_thickness{4.0, 1.0};
    Range nose_length{62.0, 10.0};
    Range nose_width{44.0, 5.0};
    Range mouth_dy{85.0, 12.0};
    Range mouth_width{64.0, 12.0};
    Range upper_lip{9.0, 2.0};
    Range lower_lip{11.0, 2.0};
    /// Added to every default shade.
    Range shade_offset{0.0, 15.0};
    Range noise_sigma{2.5, 0.0};
};

/// Deterministic for a fixed seed. Rejection-samples until validate() passes;
/// throws cephalo::Error after 100 failed attempts.
FaceParams sample_params(const FaceDistribution& dist, std::uint64_t seed);

/// Closed-form landmarks of the geometry.
Shape landmarks(const FaceParams& params);

/// Tight box of the face outline.
Box face_box(const FaceParams& params);

struct SyntheticSample {
    imaging::GrayImage image;
    Shape truth;
    Box face_box;
    FaceParams params;
};

/// Anti-aliased (4x4 supersampled) rendering plus seeded Gaussian noise.
SyntheticSample render(const FaceParams& params);

nlohmann::ordered_json to_json(const FaceParams& params);
FaceParams face_params_from_json(const nlohmann::json& j);

/// Writes images/NNNN.pgm, annotations/NNNN.txt, params/NNNN.json and manifest.json
/// under `out_dir`. Sample i uses the sub-seed derive_seed(seed, i).
DatasetManifest generate_corpus(std::size_t n, const FaceDistribution& dist, std::uint64_t seed,
                                const std::filesystem::path& out_dir, int jobs = 1);

} // namespace cephalo::synthgen
