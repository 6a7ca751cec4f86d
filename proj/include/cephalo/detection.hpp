/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/detection.hpp
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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cephalo::detection {

enum class RegionKind { face, eyes, nose, mouth };

std::string_view region_name(RegionKind kind);
RegionKind parse_region(std::string_view name);

struct RegionBox {
    RegionKind kind = RegionKind::face;
    Box box;
};

/// Sub-box of the face box as fractions (x0, x1, y0, y1) of its width and height.
struct Fraction {
    double x0 = 0.0;
    double x1 = 1.0;
    double y0 = 0.0;
    double y1 = 1.0;

    friend bool operator==(const Fraction&, const Fraction&) = default;
};

struct RegionFractions {
    Fraction eyes{0.00, 1.00, 0.15, 0.60};
    Fraction nose{0.20, 0.80, 0.35, 0.80};
    Fraction mouth{0.10, 0.90, 0.55, 1.00};

    /// Fractions of `kind`; the face kind maps to the identity fraction.
    Fraction of(RegionKind kind) const;
    void validate() const;

    friend bool operator==(const RegionFractions&, const RegionFractions&) = default;
};

/// Scales the face box by the fractions of one kind, rounds to integer pixels and
/// clamps to the face box (and to the image when its size is given).
/// Throws cephalo::Error when the result has zero area.
RegionBox region_box(const RegionBox& face, RegionKind kind, const RegionFractions& fractions,
                     std::optional<std::pair<int, int>> image_size = std::nullopt);

/// Eyes, nose and mouth boxes of a detected face.
std::map<RegionKind, RegionBox> subdivide_face(const RegionBox& face, const RegionFractions& fractions,
                                               std::optional<std::pair<int, int>> image_size = std::nullopt);

// ---------------------------------------------------------------------------
// Haar cascade

/// Weighted rectangle in window coordinates.
struct HaarRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
    double weight = 1.0;
};

struct Stump {
    std::vector<HaarRect> feature;
    double threshold = 0.0;
    double left = 0.0;   // value when feature < threshold
    double right = 0.0;  // value otherwise
};

struct Stage {
    double threshold = 0.0;
    std::vector<Stump> stumps;
};

struct CascadeModel {
    int window_w = 24;
    int window_h = 24;
    std::vector<Stage> stages;

    /// Throws ParseError when a rectangle leaves the window or a stage is empty.
    void validate() const;
};

CascadeModel parse_cascade(std::string_view json_text);
CascadeModel load_cascade(const std::filesystem::path& path);
std::string format_cascade(const CascadeModel& model);

/// Pixel rectangle of `rect` for a window scaled by `scale`, clipped to the window.
struct PixelRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};
PixelRect scale_rect(const HaarRect& rect, double scale, int window_w, int window_h);
int scaled_extent(int size, double scale);

/// Lower bound on the window standard deviation used for normalization.
inline constexpr double kMinWindowStddev = 1.0;

struct WindowResult {
    bool passed = false;
    /// Sum over stages of (stage sum - stage threshold), skipping infinite thresholds.
    double margin = 0.0;
    std::vector<double> stage_sums;
};

/// Integral tables of one image, shared by every window of a scan.
class CascadeScanner {
public:
    explicit CascadeScanner(const imaging::GrayImage& img);

    /// Evaluates every stage on the window at (x, y); no early exit.
    WindowResult evaluate(const CascadeModel& model, int x, int y, double scale) const;
    /// Normalized Haar feature value, sum(weight * rect_sum) / (area * stddev).
    double feature_value(const std::vector<HaarRect>& feature, int x, int y, double scale, int window_w,
                         int window_h) const;
    double window_stddev(int x, int y, int w, int h) const;

    int width() const { return sums_.width(); }
    int height() const { return sums_.height(); }

private:
    imaging::IntegralImage sums_;
    imaging::IntegralImage squares_;
};

double intersection_over_union(const Box& a, const Box& b);

/// Sliding-window face detection over a scale pyramid.
///
/// Windows start at `min_size` pixels wide and grow by `scale_step`; passing windows
/// are grouped greedily by IoU >= 0.5 against each group's running average box and
/// the group with most members (then larger total margin) is returned.
/// Throws NoFaceError when no window passes.
RegionBox detect_face(const imaging::GrayImage& img, const CascadeModel& model, double scale_step, int min_size);

// ---------------------------------------------------------------------------
// Region training sets

enum class BoxSource { manifest, cascade, none };
std::string_view box_source_name(BoxSource source);

/// A preprocessed image with its ground truth and resolved face box.
struct LabeledImage {
    std::string id;
    std::shared_ptr<const imaging::GrayImage> image;
    Shape truth;
    std::optional<Box> face;
    BoxSource source = BoxSource::none;
};

struct CascadeOptions {
    CascadeModel model;
    double scale_step = 1.2;
    int min_size = 0;  // 0: use the window width
};

/// Loads and preprocesses the given manifest entries (all when `indices` is empty).
/// The manifest box wins; otherwise the cascade runs, and a failed detection leaves
/// `face` empty. Without a box and without a cascade this throws cephalo::Error.
std::vector<LabeledImage> load_labeled_images(const DatasetManifest& manifest, std::span<const std::size_t> indices,
                                              const CascadeOptions* cascade, int jobs = 1);

struct RegionSample {
    std::size_t source = 0;  // index into the LabeledImage span
    std::shared_ptr<const imaging::GrayImage> image;
    Box region;
    std::vector<Point2> truth;  // normalized region coordinates, in `landmarks` order
};

struct RegionTrainSet {
    RegionKind kind = RegionKind::face;
    std::vector<LandmarkId> landmarks;
    std::vector<RegionSample> samples;
    std::size_t excluded = 0;
};

/// Normalized coordinates map the region box onto the unit square.
Point2 to_region(const Box& region, Point2 image_point);
Point2 from_region(const Box& region, Point2 normalized);

/// Tolerated containment: normalized coordinates within [-0.25, 1.25] (1.5x box).
inline constexpr double kContainmentSlack = 0.25;

/// Region training samples for one kind. Images without a face box, without every
/// assigned landmark, or with a landmark outside 1.5x the region box are excluded
/// and counted. Throws cephalo::Error when nothing remains.
RegionTrainSet build_region_trainset(std::span<const LabeledImage> images, RegionKind kind,
                                     std::span<const LandmarkId> assignment, const RegionFractions& fractions);

} // namespace cephalo::detection
