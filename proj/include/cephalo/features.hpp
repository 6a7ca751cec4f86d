/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/features.hpp
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

#include <span>
#include <vector>

namespace cephalo::features {

struct HogParams {
    int patch_size = 32;
    int cells_per_side = 4;
    int bins = 9;
    double epsilon = 1e-5;

    /// Throws cephalo::Error unless patch_size % cells_per_side == 0, bins >= 2, epsilon > 0.
    void validate() const;
    std::size_t patch_length() const
    {
        return static_cast<std::size_t>(cells_per_side) * cells_per_side * bins;
    }

    friend bool operator==(const HogParams&, const HogParams&) = default;
};

/// Unsigned-orientation HOG of the square patch centered at `center`.
///
/// Sample points sit at center + (i - (P-1)/2, j - (P-1)/2) and read the gradient
/// bilinearly, so the patch is exactly symmetric about its center. Samples outside
/// the field contribute nothing. Bin b is centered on orientation b*pi/bins and
/// votes are split linearly between the two nearest bins. Layout is
/// (cell_y, cell_x, bin); the whole patch is L2-normalized with an epsilon floor.
std::vector<double> hog_patch(const imaging::GradientField& field, Point2 center, const HogParams& params);

/// Writes hog_patch at each center plus a trailing 1 (bias) into `out`,
/// which must hold centers.size() * patch_length() + 1 values.
void hog_features(const imaging::GradientField& field, std::span<const Point2> centers, const HogParams& params,
                  std::span<double> out);

/// Descriptors at every present landmark in canonical order, bias appended.
std::vector<double> shape_features(const imaging::GradientField& field, const Shape& shape, const HogParams& params);

/// Index of a descriptor entry after mirroring image and shape: landmark block
/// l -> mirror(l), cell_x -> cells-1-cell_x, bin b -> (bins-b) % bins.
std::size_t mirrored_feature_index(std::size_t index, std::span<const LandmarkId> landmarks, const HogParams& params);

/// Resolution of the raster a region box is resampled into.
struct FrameParams {
    /// Frame pixels along the longer side of the box.
    double pixels_per_unit = 128.0;
    /// Extra border on every side, as a fraction of the longer side.
    double margin = 0.25;

    void validate() const;

    friend bool operator==(const FrameParams&, const FrameParams&) = default;
};

/// A region box resampled onto a raster with one scale on both axes.
///
/// Normalized coordinates put the region box on the unit square. The raster keeps
/// the aspect ratio of the box: its longer side spans pixels_per_unit frame pixels,
/// so descriptors see the same geometry whatever the size of the face and gradient
/// orientations are not skewed.
class RegionFrame {
public:
    RegionFrame(const imaging::GrayImage& img, const Box& box, const FrameParams& params);

    const Box& box() const { return box_; }
    const FrameParams& params() const { return params_; }
    const imaging::FloatImage& intensity() const { return intensity_; }
    const imaging::GradientField& field() const { return field_; }
    /// Frame pixels per image pixel.
    double scale() const { return scale_; }

    Point2 to_frame(Point2 normalized) const;
    Point2 to_image(Point2 normalized) const;
    Point2 to_normalized(Point2 image) const;

private:
    Box box_;
    FrameParams params_;
    double scale_ = 1.0;
    double border_ = 0.0;  // image pixels
    imaging::FloatImage intensity_;
    imaging::GradientField field_;
};

} // namespace cephalo::features
