/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/core.cpp
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
#include "cephalo/core.hpp"

#include "cephalo/error.hpp"
#include "cephalo/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace cephalo {

namespace {

constexpr std::array<std::string_view, kLandmarkCount> kNames = {
    "g_pt", "n_pt", "sn", "ls", "sto", "li", "gn", "m",
    "en_l", "en_r", "ex_l", "ex_r", "il_l", "il_r", "im_l", "im_r", "pu_l", "pu_r",
    "zy_l", "zy_r", "al_l", "al_r", "go_l", "go_r", "ch_l", "ch_r", "cph_l", "cph_r",
};

constexpr std::size_t kFirstBilateral = index_of(LandmarkId::en_l);

std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::optional<double> parse_double(std::string_view token)
{
    if (!token.empty() && token.front() == '+') {
        token.remove_prefix(1);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::vector<std::string_view> split_ws(std::string_view line)
{
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        if (i > start) {
            tokens.push_back(line.substr(start, i - start));
        }
    }
    return tokens;
}

} // namespace

const std::array<LandmarkId, kLandmarkCount>& all_landmarks()
{
    static const auto ids = [] {
        std::array<LandmarkId, kLandmarkCount> a{};
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            a[i] = static_cast<LandmarkId>(i);
        }
        return a;
    }();
    return ids;
}

std::string_view landmark_name(LandmarkId id) { return kNames[index_of(id)]; }

std::optional<LandmarkId> parse_landmark(std::string_view name)
{
    const auto it = std::find(kNames.begin(), kNames.end(), name);
    if (it == kNames.end()) {
        return std::nullopt;
    }
    return static_cast<LandmarkId>(it - kNames.begin());
}

bool is_bilateral(LandmarkId id) { return index_of(id) >= kFirstBilateral; }

LandmarkId mirror(LandmarkId id)
{
    if (!is_bilateral(id)) {
        return id;
    }
    // Pairs are stored as (l, r) at consecutive indices starting from an even offset.
    const std::size_t i = index_of(id);
    return static_cast<LandmarkId>(i % 2 == 0 ? i + 1 : i - 1);
}

std::string_view landmark_group(LandmarkId id)
{
    const std::string_view name = landmark_name(id);
    if (!is_bilateral(id)) {
        return name;
    }
    return name.substr(0, name.size() - 2);
}

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

const Point2& Shape::at(LandmarkId id) const
{
    if (!has(id)) {
        throw Error("shape has no landmark '" + std::string(landmark_name(id)) + "'");
    }
    return points_[index_of(id)];
}

void Shape::set(LandmarkId id, Point2 p)
{
    points_[index_of(id)] = p;
    present_.set(index_of(id));
}

void Shape::erase(LandmarkId id)
{
    points_[index_of(id)] = {};
    present_.reset(index_of(id));
}

std::vector<LandmarkId> Shape::ids() const
{
    std::vector<LandmarkId> out;
    out.reserve(size());
    for (LandmarkId id : all_landmarks()) {
        if (has(id)) {
            out.push_back(id);
        }
    }
    return out;
}

bool operator==(const Shape& a, const Shape& b)
{
    if (a.present_ != b.present_) {
        return false;
    }
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        if (a.present_.test(i) && !(a.points_[i] == b.points_[i])) {
            return false;
        }
    }
    return true;
}

Shape parse_annotation(std::string_view text)
{
    Shape shape;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        const auto tokens = split_ws(line);
        if (tokens.empty()) {
            continue;
        }
        const std::string where = "annotation line " + std::to_string(line_no);
        if (tokens.size() != 3) {
            throw ParseError(where + ": expected 'name x y'");
        }
        const auto id = parse_landmark(tokens[0]);
        if (!id) {
            throw ParseError(where + ": unknown landmark name '" + std::string(tokens[0]) + "'");
        }
        if (shape.has(*id)) {
            throw ParseError(where + ": duplicate landmark '" + std::string(tokens[0]) + "'");
        }
        const auto x = parse_double(tokens[1]);
        const auto y = parse_double(tokens[2]);
        if (!x || !y) {
            throw ParseError(where + ": malformed coordinate");
        }
        shape.set(*id, {*x, *y});
    }
    if (shape.empty()) {
        throw ParseError("annotation contains no landmarks");
    }
    return shape;
}

Shape load_annotation(const std::filesystem::path& path)
{
    try {
        return parse_annotation(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string format_annotation(const Shape& shape)
{
    if (shape.empty()) {
        throw Error("cannot write an empty shape");
    }
    std::string out;
    for (LandmarkId id : shape.ids()) {
        const Point2& p = shape.at(id);
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error("landmark '" + std::string(landmark_name(id)) + "' has a non-finite coordinate");
        }
        out += landmark_name(id);
        out += ' ';
        out += format_double(p.x);
        out += ' ';
        out += format_double(p.y);
        out += '\n';
    }
    return out;
}

void save_annotation(const Shape& shape, const std::filesystem::path& path)
{
    write_text_file(path, format_annotation(shape));
}

void write_text_file(const std::filesystem::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error("failed writing '" + path.string() + "'");
    }
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest load_manifest(const std::filesystem::path& path)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    DatasetManifest manifest;
    manifest.base_dir = path.parent_path();
    try {
        for (const auto& e : doc.at("entries")) {
            ManifestEntry entry;
            entry.image = e.at("image").get<std::string>();
            entry.annotation = e.at("annotation").get<std::string>();
            if (e.contains("face_box") && !e.at("face_box").is_null()) {
                const auto b = e.at("face_box").get<std::vector<double>>();
                if (b.size() != 4) {
                    throw ParseError("face_box must have 4 numbers");
                }
                if (!(b[2] > 0.0) || !(b[3] > 0.0)) {
                    throw ParseError("face_box of '" + entry.image + "' has non-positive size");
                }
                entry.face_box = Box{b[0], b[1], b[2], b[3]};
            }
            entry.sex = e.value("sex", "");
            entry.age_group = e.value("age_group", "");
            if (e.contains("fold") && !e.at("fold").is_null()) {
                entry.fold = e.at("fold").get<int>();
            }
            for (const auto* rel : {&entry.image, &entry.annotation}) {
                if (!std::filesystem::exists(manifest.resolve(*rel))) {
                    throw ParseError("referenced file does not exist: " + manifest.resolve(*rel).string());
                }
            }
            manifest.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path)
{
    nlohmann::ordered_json doc;
    doc["entries"] = nlohmann::ordered_json::array();
    for (const auto& entry : manifest.entries) {
        nlohmann::ordered_json e;
        e["image"] = entry.image;
        e["annotation"] = entry.annotation;
        if (entry.face_box) {
            const Box& b = *entry.face_box;
            e["face_box"] = {b.x, b.y, b.w, b.h};
        }
        e["sex"] = entry.sex;
        e["age_group"] = entry.age_group;
        if (entry.fold) {
            e["fold"] = *entry.fold;
        }
        doc["entries"].push_back(std::move(e));
    }
    write_text_file(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Folds

FoldPlan make_fold_plan(std::size_t n_items, std::size_t k, std::size_t test_size, std::uint64_t seed,
                        std::optional<std::size_t> train_size)
{
    if (k == 0 || test_size == 0) {
        throw Error("fold plan needs k >= 1 and test_size >= 1");
    }
    if (k * test_size > n_items) {
        throw Error("cannot draw " + std::to_string(k) + " disjoint test sets of " + std::to_string(test_size) +
                    " from " + std::to_string(n_items) + " items");
    }
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    FoldPlan plan;
    plan.n_items = n_items;
    plan.k = k;
    plan.test_size = test_size;
    plan.seed = seed;
    for (std::size_t f = 0; f < k; ++f) {
        FoldSplit split;
        split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(f * test_size),
                          order.begin() + static_cast<std::ptrdiff_t>((f + 1) * test_size));
        std::sort(split.test.begin(), split.test.end());
        std::vector<bool> in_test(n_items, false);
        for (std::size_t i : split.test) {
            in_test[i] = true;
        }
        // Train order follows the shuffled permutation so truncation stays a random subset.
        for (std::size_t i : order) {
            if (!in_test[i]) {
                split.train.push_back(i);
            }
        }
        if (train_size && *train_size < split.train.size()) {
            split.train.resize(*train_size);
        }
        std::sort(split.train.begin(), split.train.end());
        plan.splits.push_back(std::move(split));
    }
    return plan;
}

void save_fold_plan(const FoldPlan& plan, const std::filesystem::path& path)
{
    nlohmann::ordered_json doc;
    doc["n_items"] = plan.n_items;
    doc["k"] = plan.k;
    doc["test_size"] = plan.test_size;
    doc["seed"] = plan.seed;
    doc["splits"] = nlohmann::ordered_json::array();
    for (const auto& s : plan.splits) {
        doc["splits"].push_back({{"train", s.train}, {"test", s.test}});
    }
    write_text_file(path, doc.dump(1) + "\n");
}

FoldPlan load_fold_plan(const std::filesystem::path& path)
{
    try {
        const auto doc = nlohmann::json::parse(read_text_file(path));
        FoldPlan plan;
        plan.n_items = doc.at("n_items").get<std::size_t>();
        plan.k = doc.at("k").get<std::size_t>();
        plan.test_size = doc.at("test_size").get<std::size_t>();
        plan.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& s : doc.at("splits")) {
            plan.splits.push_back({s.at("train").get<std::vector<std::size_t>>(),
                                   s.at("test").get<std::vector<std::size_t>>()});
        }
        if (plan.splits.size() != plan.k) {
            throw ParseError("fold plan lists " + std::to_string(plan.splits.size()) + " splits, expected k");
        }
        return plan;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace cephalo
