/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/imaging.hpp
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

#include "cephalo/error.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cephalo::imaging {

/// Row-major single-channel raster.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(checked_size(width, height), fill)
    {
    }
    Image(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data))
    {
        if (data_.size() != checked_size(width, height)) {
            throw Error("image data length does not match its dimensions");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }

    T& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    /// Pixel with coordinates clamped to the raster (border replication).
    const T& clamped(int x, int y) const
    {
        x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
        y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
        return at(x, y);
    }

    std::span<T> pixels() { return data_; }
    std::span<const T> pixels() const { return data_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    static std::size_t checked_size(int width, int height)
    {
        if (width < 1 || height < 1) {
            throw Error("image dimensions must be at least 1x1");
        }
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using GrayImage = Image<std::uint8_t>;
using FloatImage = Image<float>;

/// Fixed luminance weights applied to color inputs.
inline double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

/// Decodes binary 8-bit PGM (P5) or PNG; color is reduced with luminance().
GrayImage load_image(const std::filesystem::path& path);
GrayImage decode_image(std::span<const std::uint8_t> bytes);
void save_pgm(const GrayImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);

/// Global histogram equalization, level(v) = floor(255 * cdf(v) / N).
GrayImage preprocess(const GrayImage& img);

/// Tag stored in model files so training and inference preprocessing agree.
inline constexpr const char* kPreprocessingTag = "gray-histeq-v1";

/// (w+1) x (h+1) table of cumulative pixel sums; first row and column are zero.
class IntegralImage {
public:
    IntegralImage() = default;
    IntegralImage(int width, int height, std::vector<std::int64_t> table)
        : width_(width), height_(height), table_(std::move(table))
    {
    }

    int width() const { return width_; }
    int height() const { return height_; }

    /// Table entry (i, j): sum of pixels with x < i and y < j.
    std::int64_t entry(int i, int j) const { return table_[static_cast<std::size_t>(j) * (width_ + 1) + i]; }

    /// Sum of the w x h rectangle at (x, y); four lookups.
    std::int64_t rect_sum(int x, int y, int w, int h) const
    {
        return entry(x + w, y + h) - entry(x, y + h) - entry(x + w, y) + entry(x, y);
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::int64_t> table_;
};

IntegralImage integral(const GrayImage& img);
/// Integral of squared intensities, used for window variance normalization.
IntegralImage integral_squared(const GrayImage& img);

/// Per-pixel gradient; orientation is unsigned, in [0, pi).
struct GradientField {
    int width = 0;
    int height = 0;
    std::vector<float> gx;
    std::vector<float> gy;
    std::vector<float> magnitude;
    std::vector<float> orientation;

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

/// Central differences in the interior, replicated border.
GradientField gradients(const GrayImage& img);
GradientField gradients(const FloatImage& img);

/// Wraps an angle into [0, pi).
double wrap_half_turn(double angle);

/// Bilinear interpolation with pixel centers at integer coordinates; border replicated.
template <typename T>
double sample_bilinear(const Image<T>& img, double x, double y)
{
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double ax = x - fx;
    const double ay = y - fy;
    const double top = (1.0 - ax) * img.clamped(x0, y0) + ax * img.clamped(x0 + 1, y0);
    const double bottom = (1.0 - ax) * img.clamped(x0, y0 + 1) + ax * img.clamped(x0 + 1, y0 + 1);
    return (1.0 - ay) * top + ay * bottom;
}

GrayImage mirror_horizontal(const GrayImage& img);

} // namespace cephalo::imaging
