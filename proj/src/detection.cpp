/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/detection.cpp
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
#include "cephalo/detection.hpp"

#include "cephalo/log.hpp"
#include "cephalo/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cephalo::detection {

namespace {

double json_threshold(const nlohmann::json& v)
{
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf") {
            return std::numeric_limits<double>::infinity();
        }
        if (s == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
        throw ParseError("bad threshold '" + s + "'");
    }
    return v.get<double>();
}

nlohmann::ordered_json threshold_json(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return v;
}

} // namespace

std::string_view region_name(RegionKind kind)
{
    switch (kind) {
    case RegionKind::face: return "face";
    case RegionKind::eyes: return "eyes";
    case RegionKind::nose: return "nose";
    case RegionKind::mouth: return "mouth";
    }
    return "face";
}

RegionKind parse_region(std::string_view name)
{
    for (RegionKind k : {RegionKind::face, RegionKind::eyes, RegionKind::nose, RegionKind::mouth}) {
        if (region_name(k) == name) {
            return k;
        }
    }
    throw ParseError("unknown region kind '" + std::string(name) + "'");
}

Fraction RegionFractions::of(RegionKind kind) const
{
    switch (kind) {
    case RegionKind::eyes: return eyes;
    case RegionKind::nose: return nose;
    case RegionKind::mouth: return mouth;
    case RegionKind::face: break;
    }
    return Fraction{};
}

void RegionFractions::validate() const
{
    for (const Fraction* f : {&eyes, &nose, &mouth}) {
        if (!(0.0 <= f->x0 && f->x0 < f->x1 && f->x1 <= 1.0 && 0.0 <= f->y0 && f->y0 < f->y1 && f->y1 <= 1.0)) {
            throw Error("region fractions must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1");
        }
    }
}

RegionBox region_box(const RegionBox& face, RegionKind kind, const RegionFractions& fractions,
                     std::optional<std::pair<int, int>> image_size)
{
    const Box& f = face.box;
    if (!(f.w > 0.0) || !(f.h > 0.0)) {
        throw Error("face box must have positive size");
    }
    if (kind == RegionKind::face) {
        return {kind, f};
    }
    const Fraction fr = fractions.of(kind);
    double x0 = std::round(f.x + fr.x0 * f.w);
    double x1 = std::round(f.x + fr.x1 * f.w);
    double y0 = std::round(f.y + fr.y0 * f.h);
    double y1 = std::round(f.y + fr.y1 * f.h);
    x0 = std::max(x0, std::ceil(f.x));
    y0 = std::max(y0, std::ceil(f.y));
    x1 = std::min(x1, std::floor(f.x + f.w));
    y1 = std::min(y1, std::floor(f.y + f.h));
    if (image_size) {
        x0 = std::max(x0, 0.0);
        y0 = std::max(y0, 0.0);
        x1 = std::min(x1, static_cast<double>(image_size->first));
        y1 = std::min(y1, static_cast<double>(image_size->second));
    }
    if (!(x1 > x0) || !(y1 > y0)) {
        throw Error("region '" + std::string(region_name(kind)) + "' has zero area after rounding");
    }
    return {kind, {x0, y0, x1 - x0, y1 - y0}};
}

std::map<RegionKind, RegionBox> subdivide_face(const RegionBox& face, const RegionFractions& fractions,
                                               std::optional<std::pair<int, int>> image_size)
{
    fractions.validate();
    std::map<RegionKind, RegionBox> out;
    for (RegionKind k : {RegionKind::eyes, RegionKind::nose, RegionKind::mouth}) {
        out.emplace(k, region_box(face, k, fractions, image_size));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cascade file format

void CascadeModel::validate() const
{
    if (window_w < 1 || window_h < 1) {
        throw ParseError("cascade window must be at least 1x1");
    }
    if (stages.empty()) {
        throw ParseError("cascade has no stages");
    }
    for (const auto& stage : stages) {
        if (stage.stumps.empty()) {
            throw ParseError("cascade stage has no stumps");
        }
        for (const auto& stump : stage.stumps) {
            if (stump.feature.empty()) {
                throw ParseError("cascade stump has no rectangles");
            }
            for (const auto& r : stump.feature) {
                if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1 || r.x + r.w > window_w || r.y + r.h > window_h) {
                    throw ParseError("cascade rectangle lies outside the window");
                }
            }
        }
    }
}

CascadeModel parse_cascade(std::string_view json_text)
{
    CascadeModel model;
    try {
        const auto doc = nlohmann::json::parse(json_text);
        model.window_w = doc.at("window").at(0).get<int>();
        model.window_h = doc.at("window").at(1).get<int>();
        for (const auto& s : doc.at("stages")) {
            Stage stage;
            stage.threshold = json_threshold(s.at("threshold"));
            for (const auto& t : s.at("stumps")) {
                Stump stump;
                for (const auto& r : t.at("feature")) {
                    stump.feature.push_back({r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(),
                                             r.at(3).get<int>(), r.at(4).get<double>()});
                }
                stump.threshold = json_threshold(t.at("threshold"));
                stump.left = t.at("left").get<double>();
                stump.right = t.at("right").get<double>();
                stage.stumps.push_back(std::move(stump));
            }
            model.stages.push_back(std::move(stage));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("cascade: ") + e.what());
    }
    model.validate();
    return model;
}

CascadeModel load_cascade(const std::filesystem::path& path)
{
    try {
        return parse_cascade(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string format_cascade(const CascadeModel& model)
{
    nlohmann::ordered_json doc;
    doc["window"] = {model.window_w, model.window_h};
    doc["stages"] = nlohmann::ordered_json::array();
    for (const auto& stage : model.stages) {
        nlohmann::ordered_json s;
        s["threshold"] = threshold_json(stage.threshold);
        s["stumps"] = nlohmann::ordered_json::array();
        for (const auto& stump : stage.stumps) {
            nlohmann::ordered_json t;
            t["feature"] = nlohmann::ordered_json::array();
            for (const auto& r : stump.feature) {
                t["feature"].push_back({r.x, r.y, r.w, r.h, r.weight});
            }
            t["threshold"] = threshold_json(stump.threshold);
            t["left"] = stump.left;
            t["right"] = stump.right;
            s["stumps"].push_back(std::move(t));
        }
        doc["stages"].push_back(std::move(s));
    }
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Window evaluation

int scaled_extent(int size, double scale) { return std::max(1, static_cast<int>(std::lround(size * scale))); }

PixelRect scale_rect(const HaarRect& rect, double scale, int window_w, int window_h)
{
    const int ww = scaled_extent(window_w, scale);
    const int wh = scaled_extent(window_h, scale);
    PixelRect p;
    p.x = std::min(static_cast<int>(std::lround(rect.x * scale)), ww - 1);
    p.y = std::min(static_cast<int>(std::lround(rect.y * scale)), wh - 1);
    p.w = std::clamp(static_cast<int>(std::lround(rect.w * scale)), 1, ww - p.x);
    p.h = std::clamp(static_cast<int>(std::lround(rect.h * scale)), 1, wh - p.y);
    return p;
}

CascadeScanner::CascadeScanner(const imaging::GrayImage& img)
    : sums_(imaging::integral(img)), squares_(imaging::integral_squared(img))
{
}

double CascadeScanner::window_stddev(int x, int y, int w, int h) const
{
    const double n = static_cast<double>(w) * h;
    const double mean = static_cast<double>(sums_.rect_sum(x, y, w, h)) / n;
    const double var = static_cast<double>(squares_.rect_sum(x, y, w, h)) / n - mean * mean;
    return std::max(std::sqrt(std::max(var, 0.0)), kMinWindowStddev);
}

double CascadeScanner::feature_value(const std::vector<HaarRect>& feature, int x, int y, double scale,
                                     int window_w, int window_h) const
{
    const int ww = scaled_extent(window_w, scale);
    const int wh = scaled_extent(window_h, scale);
    double acc = 0.0;
    for (const auto& r : feature) {
        const PixelRect p = scale_rect(r, scale, window_w, window_h);
        acc += r.weight * static_cast<double>(sums_.rect_sum(x + p.x, y + p.y, p.w, p.h));
    }
    return acc / (static_cast<double>(ww) * wh * window_stddev(x, y, ww, wh));
}

WindowResult CascadeScanner::evaluate(const CascadeModel& model, int x, int y, double scale) const
{
    WindowResult result;
    result.passed = true;
    for (const auto& stage : model.stages) {
        double sum = 0.0;
        for (const auto& stump : stage.stumps) {
            const double f = feature_value(stump.feature, x, y, scale, model.window_w, model.window_h);
            sum += f < stump.threshold ? stump.left : stump.right;
        }
        result.stage_sums.push_back(sum);
        if (!(sum >= stage.threshold)) {
            result.passed = false;
        }
        if (std::isfinite(stage.threshold)) {
            result.margin += sum - stage.threshold;
        }
    }
    return result;
}

double intersection_over_union(const Box& a, const Box& b)
{
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

RegionBox detect_face(const imaging::GrayImage& img, const CascadeModel& model, double scale_step, int min_size)
{
    if (!(scale_step > 1.0)) {
        throw Error("scale_step must exceed 1");
    }
    if (min_size < model.window_w) {
        throw Error("min_size must be at least the cascade window width");
    }
    const CascadeScanner scanner(img);

    struct Group {
        Box sum;
        Box average;
        std::size_t support = 0;
        double margin = 0.0;
    };
    std::vector<Group> groups;

    for (double scale = static_cast<double>(min_size) / model.window_w;; scale *= scale_step) {
        const int ww = scaled_extent(model.window_w, scale);
        const int wh = scaled_extent(model.window_h, scale);
        if (ww > img.width() || wh > img.height()) {
            break;
        }
        const int stride = std::max(1, static_cast<int>(std::lround(0.5 * scale)));
        for (int y = 0; y + wh <= img.height(); y += stride) {
            for (int x = 0; x + ww <= img.width(); x += stride) {
                const WindowResult r = scanner.evaluate(model, x, y, scale);
                if (!r.passed) {
                    continue;
                }
                const Box window{static_cast<double>(x), static_cast<double>(y), static_cast<double>(ww),
                                 static_cast<double>(wh)};
                auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
                    return intersection_over_union(g.average, window) >= 0.5;
                });
                if (it == groups.end()) {
                    groups.push_back({});
                    it = std::prev(groups.end());
                }
                it->sum = {it->sum.x + window.x, it->sum.y + window.y, it->sum.w + window.w, it->sum.h + window.h};
                ++it->support;
                it->margin += r.margin;
                const double n = static_cast<double>(it->support);
                it->average = {it->sum.x / n, it->sum.y / n, it->sum.w / n, it->sum.h / n};
            }
        }
    }
    if (groups.empty()) {
        throw NoFaceError("no face found: no window passed every cascade stage");
    }
    const auto best = std::max_element(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        return a.support != b.support ? a.support < b.support : a.margin < b.margin;
    });
    return {RegionKind::face, best->average};
}

// ---------------------------------------------------------------------------
// Region training sets

std::string_view box_source_name(BoxSource source)
{
    switch (source) {
    case BoxSource::manifest: return "manifest";
    case BoxSource::cascade: return "cascade";
    case BoxSource::none: return "none";
    }
    return "none";
}

std::vector<LabeledImage> load_labeled_images(const DatasetManifest& manifest, std::span<const std::size_t> indices,
                                              const CascadeOptions* cascade, int jobs)
{
    std::vector<std::size_t> which(indices.begin(), indices.end());
    if (which.empty()) {
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
            which.push_back(i);
        }
    }
    for (std::size_t i : which) {
        if (i >= manifest.entries.size()) {
            throw Error("manifest index out of range");
        }
        if (!manifest.entries[i].face_box && cascade == nullptr) {
            throw Error("entry '" + manifest.entries[i].image + "' has no face box and no cascade was given");
        }
    }
    std::vector<LabeledImage> out(which.size());
    parallel_for(which.size(), jobs, [&](std::size_t k) {
        const ManifestEntry& entry = manifest.entries[which[k]];
        LabeledImage& li = out[k];
        li.id = std::filesystem::path(entry.image).stem().string();
        auto pre = std::make_shared<imaging::GrayImage>(imaging::preprocess(imaging::load_image(manifest.resolve(entry.image))));
        li.truth = load_annotation(manifest.resolve(entry.annotation));
        if (entry.face_box) {
            li.face = entry.face_box;
            li.source = BoxSource::manifest;
        } else {
            try {
                const int min_size = cascade->min_size > 0 ? cascade->min_size : cascade->model.window_w;
                li.face = detect_face(*pre, cascade->model, cascade->scale_step, min_size).box;
                li.source = BoxSource::cascade;
            } catch (const NoFaceError&) {
                li.source = BoxSource::none;
            }
        }
        li.image = std::move(pre);
    });
    return out;
}

Point2 to_region(const Box& region, Point2 p) { return {(p.x - region.x) / region.w, (p.y - region.y) / region.h}; }

Point2 from_region(const Box& region, Point2 u) { return {region.x + u.x * region.w, region.y + u.y * region.h}; }

RegionTrainSet build_region_trainset(std::span<const LabeledImage> images, RegionKind kind,
                                     std::span<const LandmarkId> assignment, const RegionFractions& fractions)
{
    if (assignment.empty()) {
        throw Error("region assignment is empty");
    }
    RegionTrainSet set;
    set.kind = kind;
    set.landmarks.assign(assignment.begin(), assignment.end());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const LabeledImage& li = images[i];
        if (!li.face) {
            ++set.excluded;
            continue;
        }
        const std::pair<int, int> size{li.image->width(), li.image->height()};
        RegionSample sample;
        try {
            sample.region = region_box({RegionKind::face, *li.face}, kind, fractions, size).box;
        } catch (const Error&) {
            ++set.excluded;
            continue;
        }
        bool ok = true;
        for (LandmarkId id : assignment) {
            if (!li.truth.has(id)) {
                ok = false;
                break;
            }
            const Point2 u = to_region(sample.region, li.truth.at(id));
            if (u.x < -kContainmentSlack || u.x > 1.0 + kContainmentSlack || u.y < -kContainmentSlack ||
                u.y > 1.0 + kContainmentSlack) {
                ok = false;
                break;
            }
            sample.truth.push_back(u);
        }
        if (!ok) {
            ++set.excluded;
            continue;
        }
        sample.source = i;
        sample.image = li.image;
        set.samples.push_back(std::move(sample));
    }
    if (set.excluded > 0) {
        log_info("region '" + std::string(region_name(kind)) + "': excluded " + std::to_string(set.excluded) +
                 " of " + std::to_string(images.size()) + " images");
    }
    if (set.samples.empty()) {
        throw Error("region '" + std::string(region_name(kind)) + "' training set is empty");
    }
    return set;
}

} // namespace cephalo::detection
