/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/core.hpp
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

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cephalo {

/// The 28 cephalometric landmarks, in canonical serialization order.
///
/// Medial landmarks come first, then the bilateral pairs. The `_l`/`_r` suffixes
/// refer to image coordinates: `_l` is the point with the smaller x on a frontal
/// photograph, which is the subject's right side.
enum class LandmarkId : std::uint8_t {
    g_pt, n_pt, sn, ls, sto, li, gn, m,
    en_l, en_r, ex_l, ex_r, il_l, il_r, im_l, im_r, pu_l, pu_r,
    zy_l, zy_r, al_l, al_r, go_l, go_r, ch_l, ch_r, cph_l, cph_r,
};

inline constexpr std::size_t kLandmarkCount = 28;

/// All landmarks in canonical order.
const std::array<LandmarkId, kLandmarkCount>& all_landmarks();

std::string_view landmark_name(LandmarkId id);
std::optional<LandmarkId> parse_landmark(std::string_view name);

/// Mirror partner of a bilateral landmark; medial landmarks map to themselves.
LandmarkId mirror(LandmarkId id);
bool is_bilateral(LandmarkId id);

/// Name with the side suffix stripped ("ex_l" -> "ex"); used for merged tables.
std::string_view landmark_group(LandmarkId id);

constexpr std::size_t index_of(LandmarkId id) { return static_cast<std::size_t>(id); }

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
double distance(Point2 a, Point2 b);

/// A (possibly partial) set of landmark positions for one image.
class Shape {
public:
    bool has(LandmarkId id) const { return present_.test(index_of(id)); }
    /// Throws cephalo::Error when the landmark is absent.
    const Point2& at(LandmarkId id) const;
    void set(LandmarkId id, Point2 p);
    void erase(LandmarkId id);

    std::size_t size() const { return present_.count(); }
    bool empty() const { return present_.none(); }
    bool complete() const { return present_.all(); }
    /// Present landmarks in canonical order.
    std::vector<LandmarkId> ids() const;

    friend bool operator==(const Shape&, const Shape&);

private:
    std::array<Point2, kLandmarkCount> points_{};
    std::bitset<kLandmarkCount> present_;
};

/// Reads a `name x y` per-line annotation file.
Shape load_annotation(const std::filesystem::path& path);
Shape parse_annotation(std::string_view text);
/// Writes the shape in canonical order; coordinates use shortest round-trip notation.
void save_annotation(const Shape& shape, const std::filesystem::path& path);
std::string format_annotation(const Shape& shape);

/// Axis-aligned pixel box (x, y = top-left corner).
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    friend bool operator==(const Box&, const Box&) = default;
};

struct ManifestEntry {
    std::string image;       // relative to the manifest directory
    std::string annotation;  // relative to the manifest directory
    std::optional<Box> face_box;
    std::string sex;
    std::string age_group;
    std::optional<int> fold;
};

struct DatasetManifest {
    std::filesystem::path base_dir;
    std::vector<ManifestEntry> entries;

    std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
};

/// Loads a manifest and checks that every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    friend bool operator==(const FoldSplit&, const FoldSplit&) = default;
};

struct FoldPlan {
    std::size_t n_items = 0;
    std::size_t k = 0;
    std::size_t test_size = 0;
    std::uint64_t seed = 0;
    std::vector<FoldSplit> splits;

    friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

/// Draws k pairwise-disjoint test sets of `test_size` items from a seeded permutation.
/// The train set of a split is the complement of its test set, truncated to
/// `train_size` items when given.
FoldPlan make_fold_plan(std::size_t n_items, std::size_t k, std::size_t test_size, std::uint64_t seed,
                        std::optional<std::size_t> train_size = std::nullopt);

void save_fold_plan(const FoldPlan& plan, const std::filesystem::path& path);
FoldPlan load_fold_plan(const std::filesystem::path& path);

/// Writes a text file, throwing cephalo::Error when the path is not writable.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace cephalo
