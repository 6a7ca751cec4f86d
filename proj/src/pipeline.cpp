/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/pipeline.cpp
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
#include "cephalo/pipeline.hpp"

#include "cephalo/error.hpp"
#include "cephalo/log.hpp"

#include <algorithm>
#include <set>

namespace cephalo::pipeline {

using detection::RegionKind;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr RegionKind kRegions[] = {RegionKind::face, RegionKind::eyes, RegionKind::nose, RegionKind::mouth};

std::vector<LandmarkId> canonical(std::initializer_list<std::string_view> groups)
{
    std::vector<LandmarkId> out;
    for (LandmarkId id : all_landmarks()) {
        if (std::find(groups.begin(), groups.end(), landmark_group(id)) != groups.end()) {
            out.push_back(id);
        }
    }
    return out;
}

} // namespace

std::string_view kind_name(DetectorKind kind)
{
    switch (kind) {
    case DetectorKind::hr:
        return "hr";
    case DetectorKind::sd:
        return "sd";
    case DetectorKind::ert:
        return "ert";
    }
    return "?";
}

DetectorKind parse_kind(std::string_view name)
{
    for (DetectorKind k : {DetectorKind::hr, DetectorKind::sd, DetectorKind::ert}) {
        if (kind_name(k) == name) {
            return k;
        }
    }
    throw Error("unknown detector kind '" + std::string(name) + "' (expected hr, sd or ert)");
}

const std::vector<LandmarkId>& region_assignment(RegionKind kind)
{
    static const std::vector<LandmarkId> eyes = canonical({"g_pt", "n_pt", "m", "en", "ex", "il", "im", "zy", "pu"});
    static const std::vector<LandmarkId> mouth = canonical({"ls", "sto", "li", "gn", "ch", "go", "cph"});
    static const std::vector<LandmarkId> face = canonical({"gn", "zy", "go"});
    static const std::vector<LandmarkId> nose = canonical({"sn", "al"});
    switch (kind) {
    case RegionKind::eyes:
        return eyes;
    case RegionKind::mouth:
        return mouth;
    case RegionKind::nose:
        return nose;
    case RegionKind::face:
        break;
    }
    return face;
}

std::vector<LandmarkId> shared_landmarks()
{
    std::vector<LandmarkId> out;
    for (LandmarkId id : all_landmarks()) {
        int count = 0;
        for (RegionKind k : kRegions) {
            const auto& a = region_assignment(k);
            count += std::find(a.begin(), a.end(), id) != a.end() ? 1 : 0;
        }
        if (count > 1) {
            out.push_back(id);
        }
    }
    return out;
}

void check_assignment()
{
    std::set<LandmarkId> covered;
    for (RegionKind k : kRegions) {
        const auto& a = region_assignment(k);
        covered.insert(a.begin(), a.end());
    }
    if (covered.size() != kLandmarkCount) {
        throw Error("region assignment does not cover every landmark");
    }
    const std::set<LandmarkId> expected{LandmarkId::zy_l, LandmarkId::zy_r, LandmarkId::go_l, LandmarkId::go_r,
                                        LandmarkId::gn};
    const auto shared = shared_landmarks();
    if (std::set<LandmarkId>(shared.begin(), shared.end()) != expected) {
        throw Error("region assignment overlap differs from {zy_l, zy_r, go_l, go_r, gn}");
    }
}

void FusionRule::validate() const
{
    if (mode != FusionMode::priority) {
        return;
    }
    const std::set<RegionKind> named(priority.begin(), priority.end());
    if (priority.size() != 4 || named.size() != 4) {
        throw Error("fusion priority must list face, eyes, nose and mouth exactly once");
    }
}

Shape fuse(const std::map<RegionKind, Shape>& predictions, const FusionRule& rule)
{
    Shape out;
    if (rule.mode == FusionMode::priority) {
        rule.validate();
        for (RegionKind k : rule.priority) {
            const auto it = predictions.find(k);
            if (it == predictions.end()) {
                continue;
            }
            for (LandmarkId id : it->second.ids()) {
                if (!out.has(id)) {
                    out.set(id, it->second.at(id));
                }
            }
        }
        return out;
    }
    for (LandmarkId id : all_landmarks()) {
        Point2 sum;
        int count = 0;
        for (const auto& [kind, shape] : predictions) {
            if (shape.has(id)) {
                sum = sum + shape.at(id);
                ++count;
            }
        }
        if (count > 0) {
            out.set(id, (1.0 / count) * sum);
        }
    }
    return out;
}

void HrModel::validate() const
{
    check_assignment();
    fusion.validate();
    fractions.validate();
    for (RegionKind k : kRegions) {
        const auto it = regions.find(k);
        if (it == regions.end()) {
            throw Error("region model '" + std::string(detection::region_name(k)) + "' is missing");
        }
        if (it->second.region() != k || it->second.landmarks() != region_assignment(k)) {
            throw Error("region model '" + std::string(detection::region_name(k)) +
                        "' does not match its landmark assignment");
        }
    }
}

namespace {

regressors::RegionDetectorModel train_engine(const detection::RegionTrainSet& set, const regressors::TrainConfig& cfg,
                                             Engine engine, int jobs)
{
    if (engine == Engine::sdm) {
        return {regressors::sdm_train(set, cfg, jobs)};
    }
    return {regressors::ert_train(set, cfg, jobs)};
}

} // namespace

HrModel hr_train(std::span<const detection::LabeledImage> images, const regressors::TrainConfig& cfg,
                 const detection::RegionFractions& fractions, const FusionRule& fusion, Engine engine, int jobs)
{
    check_assignment();
    fractions.validate();
    fusion.validate();
    HrModel model;
    model.fractions = fractions;
    model.fusion = fusion;
    for (RegionKind k : kRegions) {
        const auto set = detection::build_region_trainset(images, k, region_assignment(k), fractions);
        model.regions.emplace(k, train_engine(set, cfg, engine, jobs));
    }
    model.validate();
    return model;
}

Shape hr_detect(const HrModel& model, const imaging::GrayImage& img, const detection::RegionBox& face)
{
    const std::pair<int, int> size{img.width(), img.height()};
    std::map<RegionKind, Shape> predictions;
    for (const auto& [kind, regressor] : model.regions) {
        const auto box = detection::region_box(face, kind, model.fractions, size);
        predictions.emplace(kind, regressor.predict(img, box.box));
    }
    return fuse(predictions, model.fusion);
}

regressors::RegionDetectorModel baseline_train(std::span<const detection::LabeledImage> images,
                                               const regressors::TrainConfig& cfg, DetectorKind kind, int jobs)
{
    if (kind == DetectorKind::hr) {
        throw Error("baseline_train trains whole-face models only; use hr_train for hr");
    }
    const auto& all = all_landmarks();
    const std::vector<LandmarkId> landmarks(all.begin(), all.end());
    const auto set = detection::build_region_trainset(images, RegionKind::face, landmarks, {});
    return train_engine(set, cfg, kind == DetectorKind::sd ? Engine::sdm : Engine::ert, jobs);
}

Shape Detector::detect(const imaging::GrayImage& preprocessed, const detection::RegionBox& face) const
{
    if (const auto* hr = std::get_if<HrModel>(&model)) {
        return hr_detect(*hr, preprocessed, face);
    }
    return std::get<regressors::RegionDetectorModel>(model).predict(preprocessed, face.box);
}

Detector train_detector(std::span<const detection::LabeledImage> images, const regressors::TrainConfig& cfg,
                        DetectorKind kind, const detection::RegionFractions& fractions, const FusionRule& fusion,
                        int jobs)
{
    Detector d;
    d.kind = kind;
    if (kind == DetectorKind::hr) {
        d.model = hr_train(images, cfg, fractions, fusion, Engine::sdm, jobs);
    } else {
        d.model = baseline_train(images, cfg, kind, jobs);
    }
    return d;
}

namespace {

ordered_json fraction_json(const detection::Fraction& f)
{
    return ordered_json::array({f.x0, f.x1, f.y0, f.y1});
}

detection::Fraction fraction_from(const json& j)
{
    if (!j.is_array() || j.size() != 4) {
        throw SchemaError("a region fraction must be [x0, x1, y0, y1]");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

std::string model_file(RegionKind kind)
{
    return std::string(detection::region_name(kind)) + ".model.json";
}

} // namespace

void save_bundle(const Detector& detector, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    ordered_json j;
    j["magic"] = kBundleMagic;
    j["schema_version"] = kBundleSchemaVersion;
    j["kind"] = std::string(kind_name(detector.kind));
    j["preprocessing"] = imaging::kPreprocessingTag;
    ordered_json models = ordered_json::object();
    if (const auto* hr = std::get_if<HrModel>(&detector.model)) {
        j["fractions"] = {{"eyes", fraction_json(hr->fractions.eyes)},
                          {"nose", fraction_json(hr->fractions.nose)},
                          {"mouth", fraction_json(hr->fractions.mouth)}};
        ordered_json priority = ordered_json::array();
        for (RegionKind k : hr->fusion.priority) {
            priority.push_back(std::string(detection::region_name(k)));
        }
        j["fusion"] = {{"rule", hr->fusion.mode == FusionMode::average ? "average" : "priority"},
                       {"priority", std::move(priority)}};
        for (const auto& [kind, m] : hr->regions) {
            models[std::string(detection::region_name(kind))] = model_file(kind);
            regressors::save_model(m, dir / model_file(kind));
        }
    } else {
        const auto& m = std::get<regressors::RegionDetectorModel>(detector.model);
        models["face"] = model_file(RegionKind::face);
        regressors::save_model(m, dir / model_file(RegionKind::face));
    }
    j["models"] = std::move(models);
    write_text_file(dir / "bundle.json", j.dump(2) + "\n");
}

Detector load_bundle(const std::filesystem::path& dir)
{
    json j;
    try {
        j = json::parse(read_text_file(dir / "bundle.json"));
    } catch (const json::parse_error& e) {
        throw ParseError((dir / "bundle.json").string() + ": " + e.what());
    }
    if (!j.is_object() || j.value("magic", std::string()) != kBundleMagic) {
        throw SchemaError((dir / "bundle.json").string() + " is not a cephalo bundle");
    }
    if (j.value("schema_version", -1) != kBundleSchemaVersion) {
        throw SchemaError("unsupported bundle schema version");
    }
    if (j.value("preprocessing", std::string()) != imaging::kPreprocessingTag) {
        throw SchemaError("bundle was trained with a different preprocessing");
    }
    Detector d;
    try {
        d.kind = parse_kind(j.at("kind").get<std::string>());
        const json& models = j.at("models");
        if (d.kind == DetectorKind::hr) {
            HrModel hr;
            const json& f = j.at("fractions");
            hr.fractions.eyes = fraction_from(f.at("eyes"));
            hr.fractions.nose = fraction_from(f.at("nose"));
            hr.fractions.mouth = fraction_from(f.at("mouth"));
            const json& fusion = j.at("fusion");
            const std::string rule = fusion.at("rule").get<std::string>();
            if (rule != "average" && rule != "priority") {
                throw SchemaError("unknown fusion rule '" + rule + "'");
            }
            hr.fusion.mode = rule == "average" ? FusionMode::average : FusionMode::priority;
            hr.fusion.priority.clear();
            for (const auto& name : fusion.at("priority")) {
                hr.fusion.priority.push_back(detection::parse_region(name.get<std::string>()));
            }
            for (RegionKind k : kRegions) {
                const std::string file = models.at(std::string(detection::region_name(k))).get<std::string>();
                hr.regions.emplace(k, regressors::load_model(dir / file));
            }
            hr.validate();
            d.model = std::move(hr);
        } else {
            auto m = regressors::load_model(dir / models.at("face").get<std::string>());
            if (m.is_sdm() != (d.kind == DetectorKind::sd) || m.landmarks().size() != kLandmarkCount) {
                throw SchemaError("bundle model does not match its detector kind");
            }
            d.model = std::move(m);
        }
    } catch (const json::exception& e) {
        throw SchemaError("malformed bundle: " + std::string(e.what()));
    }
    return d;
}

} // namespace cephalo::pipeline
