/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/evaluation.hpp
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
#include "cephalo/pipeline.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cephalo::evaluation {

/// ||pred - gt|| divided by the distance between the ground-truth exocanthions.
/// Throws cephalo::Error when ex_l or ex_r is missing or they coincide.
double normalized_error(Point2 pred, Point2 gt, const Shape& gt_shape);

struct EvalRecord {
    std::string image_id;
    LandmarkId landmark = LandmarkId::g_pt;
    pipeline::DetectorKind algorithm = pipeline::DetectorKind::hr;
    double normalized_distance = 0.0;
    int fold = 0;
    /// Set when the image had no face box; such records carry distance 0 and are
    /// left out of every statistic.
    bool flagged = false;
    detection::BoxSource box_source = detection::BoxSource::manifest;
};

/// One trained detector per fold of a plan.
struct FoldDetectors {
    pipeline::DetectorKind kind = pipeline::DetectorKind::hr;
    std::vector<pipeline::Detector> folds;
};

/// Predicts every test image of every fold with that fold's detector of each kind.
/// `images` is indexed like the plan. Records are ordered by fold, test position,
/// algorithm (in `models` order) and canonical landmark.
std::vector<EvalRecord> evaluate(std::span<const FoldDetectors> models, std::span<const detection::LabeledImage> images,
                                 const FoldPlan& plan, int jobs = 1);

/// Mean normalized distance of unflagged records.
double mean_distance(std::span<const EvalRecord> records, pipeline::DetectorKind kind);

/// Ranks of the values, 1 for the smallest, ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct RankInstance {
    std::string image_id;
    LandmarkId landmark = LandmarkId::g_pt;
    std::vector<double> distances;  // in `algorithms` order
    std::vector<double> ranks;
};

struct RankTable {
    std::vector<pipeline::DetectorKind> algorithms;
    std::vector<RankInstance> instances;
    std::vector<double> average;  // in `algorithms` order
};

/// Ranks algorithms per (image, landmark) instance over unflagged records.
/// Algorithms are taken in order of first appearance. Throws cephalo::Error when an
/// instance lacks a record for one of them, or an algorithm repeats on an instance.
RankTable rank(std::span<const EvalRecord> records);

/// Per-instance values of one algorithm from a rank table.
std::vector<double> rank_column(const RankTable& table, pipeline::DetectorKind kind, bool distances = false);

enum class WilcoxonMode { automatic, exact, normal };

struct WilcoxonResult {
    double statistic = 0.0;    // min(W+, W-)
    double w_plus = 0.0;
    double w_minus = 0.0;
    std::size_t n = 0;         // non-zero differences
    double p_two_sided = 1.0;
    bool exact = false;
};

/// Largest sample size handled by the exact null distribution in automatic mode.
inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Paired signed-rank test of a - b. Zero differences are discarded and the rest
/// ranked by magnitude with average ranks for ties. Exact mode counts the null
/// distribution of W+ over all sign assignments; normal mode uses the tie-corrected
/// variance with a continuity correction. Throws cephalo::Error on unequal or
/// empty input and when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMode mode = WilcoxonMode::automatic);

// ---------------------------------------------------------------------------
// Inter-expert dispersion

struct ExpertImage {
    std::string id;
    std::map<int, Shape> experts;  // expert id -> complete shape
};

struct DispersionRecord {
    std::string image_id;
    LandmarkId landmark = LandmarkId::g_pt;
    int expert = 0;
    double normalized_distance = 0.0;
};

struct DispersionResult {
    std::vector<DispersionRecord> records;
    std::vector<Shape> centroids;  // one per image
    /// Mean of the records.
    double mean = 0.0;
    /// Mean normalized distance over all expert pairs, for comparison with pairwise studies.
    double mean_pairwise = 0.0;
};

/// Per-landmark centroid of the experts' points.
Shape centroid_shape(const ExpertImage& image);

/// Distances of each expert to the centroid, normalized by the centroid's
/// inter-exocanthion distance. Throws cephalo::Error for fewer than two experts,
/// incomplete shapes or coincident centroid exocanthions.
DispersionResult expert_dispersion(std::span<const ExpertImage> images);

// ---------------------------------------------------------------------------
// Kernel density summaries

inline constexpr double kMinBandwidth = 0.5;
inline constexpr double kFullRegionDensity = 1e-12;

struct KdeSummary {
    double bandwidth = 0.0;
    double x0 = 0.0;  // center of cell (0, 0)
    double y0 = 0.0;
    double cell = 0.0;
    int nx = 0;
    int ny = 0;
    std::vector<double> density;  // row-major, ny rows of nx
    double level50 = 0.0;
    double level100 = kFullRegionDensity;

    double at(int i, int j) const { return density[static_cast<std::size_t>(j) * nx + i]; }
    /// Sum of density times cell area.
    double mass() const;
    /// Grid density of the cell containing p (0 outside the grid).
    double lookup(Point2 p) const;
};

/// Isotropic Gaussian KDE on a square-celled grid spanning the points +-5 bandwidths,
/// with `resolution` cells along the longer side. The bandwidth follows Silverman's
/// rule, sigma * n^(-1/6) with sigma pooled over both axes; kMinBandwidth replaces it
/// when the points coincide.
/// level50 is the density bounding the smallest superlevel set holding half the
/// grid mass. Throws cephalo::Error for fewer than two points.
KdeSummary kde_summary(std::span<const Point2> points, int resolution = 128);

/// Fraction of points whose grid density reaches `level`.
double fraction_within(const KdeSummary& kde, std::span<const Point2> points, double level);

// ---------------------------------------------------------------------------
// Reports

struct BoxStats {
    std::size_t n = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double whisker_low = 0.0;
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

/// Linear-interpolation quantiles (q1, median, q3), whiskers at the most extreme
/// values within 1.5 IQR of the quartiles, and the values beyond them.
BoxStats box_stats(std::vector<double> values);

struct NamedTest {
    std::string name;
    std::string input;  // "ranks" or "distances"
    WilcoxonResult result;
};

struct ReportInput {
    std::span<const EvalRecord> records;
    const RankTable* ranks = nullptr;
    std::span<const NamedTest> tests;
    const DispersionResult* dispersion = nullptr;
    /// Named KDE grids, written one file each.
    std::span<const std::pair<std::string, KdeSummary>> kde;
};

/// Writes records.csv, table2_ranking.{txt,csv} (with two or more algorithms),
/// table3_landmarks.{txt,csv}, table3_sides.csv, table4_experts.{txt,csv},
/// boxplot.csv, wilcoxon.csv (when tests are given), dispersion.csv and kde_*.csv
/// into `out_dir`. Throws cephalo::Error for an empty record list.
void report(const ReportInput& input, const std::filesystem::path& out_dir);

/// dispersion.csv, table4_experts.{txt,csv} with the experts column only, and kde_*.csv.
void report_dispersion(const DispersionResult& dispersion,
                       std::span<const std::pair<std::string, KdeSummary>> kde, const std::filesystem::path& out_dir);

/// Shortest round-trip text of a double.
std::string format_number(double v);

} // namespace cephalo::evaluation
