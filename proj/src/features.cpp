/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/features.cpp
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
#include "cephalo/features.hpp"

#include <cmath>
#include <numbers>

namespace cephalo::features {

namespace {

struct GradientSample {
    double gx = 0.0;
    double gy = 0.0;
};

// Bilinear gradient; points outside [0, w-1] x [0, h-1] are missing.
bool sample_gradient(const imaging::GradientField& f, double x, double y, GradientSample& out)
{
    if (x < 0.0 || y < 0.0 || x > f.width - 1 || y > f.height - 1) {
        return false;
    }
    const int x0 = std::min(static_cast<int>(x), f.width - 2 < 0 ? 0 : f.width - 2);
    const int y0 = std::min(static_cast<int>(y), f.height - 2 < 0 ? 0 : f.height - 2);
    const double ax = x - x0;
    const double ay = y - y0;
    const int x1 = std::min(x0 + 1, f.width - 1);
    const int y1 = std::min(y0 + 1, f.height - 1);
    const std::size_t i00 = f.index(x0, y0);
    const std::size_t i10 = f.index(x1, y0);
    const std::size_t i01 = f.index(x0, y1);
    const std::size_t i11 = f.index(x1, y1);
    const double w00 = (1.0 - ax) * (1.0 - ay);
    const double w10 = ax * (1.0 - ay);
    const double w01 = (1.0 - ax) * ay;
    const double w11 = ax * ay;
    out.gx = w00 * f.gx[i00] + w10 * f.gx[i10] + w01 * f.gx[i01] + w11 * f.gx[i11];
    out.gy = w00 * f.gy[i00] + w10 * f.gy[i10] + w01 * f.gy[i01] + w11 * f.gy[i11];
    return true;
}

void hog_patch_into(const imaging::GradientField& field, Point2 center, const HogParams& params, std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    const int patch = params.patch_size;
    const int cell = patch / params.cells_per_side;
    const int bins = params.bins;
    const double bin_width = std::numbers::pi / bins;
    const double half = 0.5 * (patch - 1);

    for (int j = 0; j < patch; ++j) {
        const double y = center.y + (j - half);
        const int cy = j / cell;
        for (int i = 0; i < patch; ++i) {
            GradientSample g;
            if (!sample_gradient(field, center.x + (i - half), y, g)) {
                continue;
            }
            const double magnitude = std::sqrt(g.gx * g.gx + g.gy * g.gy);
            if (magnitude == 0.0) {
                continue;
            }
            const double t = imaging::wrap_half_turn(std::atan2(g.gy, g.gx)) / bin_width;
            const int b0 = static_cast<int>(t);
            const double frac = t - b0;
            const std::size_t base = (static_cast<std::size_t>(cy) * params.cells_per_side + i / cell) * bins;
            out[base + b0 % bins] += (1.0 - frac) * magnitude;
            out[base + (b0 + 1) % bins] += frac * magnitude;
        }
    }

    double sq = 0.0;
    for (double v : out) {
        sq += v * v;
    }
    const double scale = 1.0 / std::sqrt(sq + params.epsilon * params.epsilon);
    for (double& v : out) {
        v *= scale;
    }
}

} // namespace

void HogParams::validate() const
{
    if (patch_size < 1 || cells_per_side < 1 || patch_size % cells_per_side != 0) {
        throw Error("HOG patch_size must be a positive multiple of cells_per_side");
    }
    if (bins < 2) {
        throw Error("HOG needs at least 2 orientation bins");
    }
    if (!(epsilon > 0.0)) {
        throw Error("HOG epsilon must be positive");
    }
}

std::vector<double> hog_patch(const imaging::GradientField& field, Point2 center, const HogParams& params)
{
    params.validate();
    std::vector<double> out(params.patch_length());
    hog_patch_into(field, center, params, out);
    return out;
}

void hog_features(const imaging::GradientField& field, std::span<const Point2> centers, const HogParams& params,
                  std::span<double> out)
{
    const std::size_t len = params.patch_length();
    if (out.size() != centers.size() * len + 1) {
        throw Error("feature buffer has the wrong length");
    }
    for (std::size_t l = 0; l < centers.size(); ++l) {
        hog_patch_into(field, centers[l], params, out.subspan(l * len, len));
    }
    out.back() = 1.0;
}

std::vector<double> shape_features(const imaging::GradientField& field, const Shape& shape, const HogParams& params)
{
    params.validate();
    std::vector<Point2> centers;
    for (LandmarkId id : shape.ids()) {
        centers.push_back(shape.at(id));
    }
    std::vector<double> out(centers.size() * params.patch_length() + 1);
    hog_features(field, centers, params, out);
    return out;
}

std::size_t mirrored_feature_index(std::size_t index, std::span<const LandmarkId> landmarks, const HogParams& params)
{
    const std::size_t len = params.patch_length();
    if (index == landmarks.size() * len) {
        return index;  // bias
    }
    const std::size_t l = index / len;
    std::size_t rest = index % len;
    const std::size_t bins = static_cast<std::size_t>(params.bins);
    const std::size_t cells = static_cast<std::size_t>(params.cells_per_side);
    const std::size_t b = rest % bins;
    rest /= bins;
    const std::size_t cx = rest % cells;
    const std::size_t cy = rest / cells;

    const LandmarkId partner = mirror(landmarks[l]);
    std::size_t ml = l;
    for (std::size_t k = 0; k < landmarks.size(); ++k) {
        if (landmarks[k] == partner) {
            ml = k;
        }
    }
    const std::size_t mb = (bins - b) % bins;
    const std::size_t mcx = cells - 1 - cx;
    return ml * len + (cy * cells + mcx) * bins + mb;
}

void FrameParams::validate() const
{
    if (!(pixels_per_unit >= 4.0) || !(margin >= 0.0)) {
        throw Error("frame needs pixels_per_unit >= 4 and a non-negative margin");
    }
}

RegionFrame::RegionFrame(const imaging::GrayImage& img, const Box& box, const FrameParams& params)
    : box_(box), params_(params)
{
    params_.validate();
    if (!(box.w > 0.0) || !(box.h > 0.0)) {
        throw Error("region frame needs a box with positive size");
    }
    const double longer = std::max(box.w, box.h);
    scale_ = params_.pixels_per_unit / longer;
    border_ = params_.margin * longer;
    const int nx = static_cast<int>(std::ceil((box.w + 2.0 * border_) * scale_));
    const int ny = static_cast<int>(std::ceil((box.h + 2.0 * border_) * scale_));
    const double step = 1.0 / scale_;
    // Supersample when the frame is coarser than the image, averaging k x k points.
    const int k = std::max(1, static_cast<int>(std::ceil(step - 1e-9)));
    intensity_ = imaging::FloatImage(nx, ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double cx = box.x - border_ + i * step;
            const double cy = box.y - border_ + j * step;
            double acc = 0.0;
            for (int sy = 0; sy < k; ++sy) {
                const double y = cy + ((sy + 0.5) / k - 0.5) * step;
                for (int sx = 0; sx < k; ++sx) {
                    const double x = cx + ((sx + 0.5) / k - 0.5) * step;
                    acc += imaging::sample_bilinear(img, x, y);
                }
            }
            intensity_.at(i, j) = static_cast<float>(acc / (k * k));
        }
    }
    field_ = imaging::gradients(intensity_);
}

Point2 RegionFrame::to_frame(Point2 normalized) const
{
    return {(normalized.x * box_.w + border_) * scale_, (normalized.y * box_.h + border_) * scale_};
}

Point2 RegionFrame::to_image(Point2 normalized) const
{
    return {box_.x + normalized.x * box_.w, box_.y + normalized.y * box_.h};
}

Point2 RegionFrame::to_normalized(Point2 image) const
{
    return {(image.x - box_.x) / box_.w, (image.y - box_.y) / box_.h};
}

} // namespace cephalo::features
