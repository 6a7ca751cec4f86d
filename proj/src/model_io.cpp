/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/model_io.cpp
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
#include "cephalo/error.hpp"
#include "cephalo/regressors.hpp"

namespace cephalo::regressors {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
T require(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key)) {
        throw SchemaError(std::string("missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("field '") + key + "': " + e.what());
    }
}

const json& require_node(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key)) {
        throw SchemaError(std::string("missing field '") + key + "'");
    }
    return j.at(key);
}

ordered_json matrix_to_json(const Eigen::MatrixXd& m)
{
    ordered_json data = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            data.push_back(m(r, c));
        }
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j)
{
    const auto rows = require<Eigen::Index>(j, "rows");
    const auto cols = require<Eigen::Index>(j, "cols");
    const auto data = require<std::vector<double>>(j, "data");
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
        throw SchemaError("matrix data does not match its shape");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
        }
    }
    return m;
}

ordered_json points_to_json(const std::vector<Point2>& pts)
{
    ordered_json out = ordered_json::array();
    for (const auto& p : pts) {
        out.push_back({p.x, p.y});
    }
    return out;
}

std::vector<Point2> points_from_json(const json& j)
{
    if (!j.is_array()) {
        throw SchemaError("expected an array of points");
    }
    std::vector<Point2> out;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2) {
            throw SchemaError("a point must be [x, y]");
        }
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

ordered_json landmarks_to_json(const std::vector<LandmarkId>& ids)
{
    ordered_json out = ordered_json::array();
    for (auto id : ids) {
        out.push_back(std::string(landmark_name(id)));
    }
    return out;
}

std::vector<LandmarkId> landmarks_from_json(const json& j)
{
    std::vector<LandmarkId> out;
    for (const auto& name : require<std::vector<std::string>>(json{{"l", j}}, "l")) {
        const auto id = parse_landmark(name);
        if (!id) {
            throw SchemaError("unknown landmark '" + name + "'");
        }
        out.push_back(*id);
    }
    return out;
}

ordered_json tree_to_json(const RegressionTree& tree)
{
    ordered_json nodes = ordered_json::array();
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) {
            nodes.push_back({{"delta", n.delta}});
        } else {
            nodes.push_back({{"a", n.feature_a}, {"b", n.feature_b}, {"threshold", n.threshold},
                             {"left", n.left}, {"right", n.right}});
        }
    }
    return nodes;
}

RegressionTree tree_from_json(const json& j, std::size_t pool_size, std::size_t shape_size)
{
    if (!j.is_array() || j.empty()) {
        throw SchemaError("a tree must be a non-empty node array");
    }
    RegressionTree tree;
    const auto count = static_cast<int>(j.size());
    for (const auto& node : j) {
        TreeNode n;
        if (node.contains("delta")) {
            n.delta = require<std::vector<double>>(node, "delta");
            if (n.delta.size() != shape_size) {
                throw SchemaError("leaf increment has the wrong length");
            }
        } else {
            n.feature_a = require<int>(node, "a");
            n.feature_b = require<int>(node, "b");
            n.threshold = require<double>(node, "threshold");
            n.left = require<int>(node, "left");
            n.right = require<int>(node, "right");
            const int self = static_cast<int>(tree.nodes.size());
            if (n.feature_a < 0 || n.feature_b < 0 || static_cast<std::size_t>(n.feature_a) >= pool_size ||
                static_cast<std::size_t>(n.feature_b) >= pool_size || n.left <= self || n.right <= self ||
                n.left >= count || n.right >= count) {
                throw SchemaError("tree node references are out of range");
            }
        }
        tree.nodes.push_back(std::move(n));
    }
    return tree;
}

} // namespace

ordered_json to_json(const TrainConfig& cfg)
{
    return {
        {"n_stages", cfg.n_stages},
        {"ridge_lambda", cfg.ridge_lambda},
        {"n_perturbations", cfg.n_perturbations},
        {"perturbation_scale", cfg.perturbation_scale},
        {"seed", cfg.seed},
        {"n_cascades", cfg.n_cascades},
        {"n_trees", cfg.n_trees},
        {"tree_depth", cfg.tree_depth},
        {"learning_rate", cfg.learning_rate},
        {"n_candidate_splits", cfg.n_candidate_splits},
        {"n_pool_pixels", cfg.n_pool_pixels},
        {"pool_radius", cfg.pool_radius},
        {"hog",
         {{"patch_size", cfg.hog.patch_size},
          {"cells_per_side", cfg.hog.cells_per_side},
          {"bins", cfg.hog.bins},
          {"epsilon", cfg.hog.epsilon}}},
        {"frame", {{"pixels_per_unit", cfg.frame.pixels_per_unit}, {"margin", cfg.frame.margin}}},
    };
}

TrainConfig train_config_from_json(const json& j)
{
    if (!j.is_object()) {
        throw SchemaError("train config must be an object");
    }
    TrainConfig cfg;
    const auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) {
            field = require<std::decay_t<decltype(field)>>(j, key);
        }
    };
    opt("n_stages", cfg.n_stages);
    opt("ridge_lambda", cfg.ridge_lambda);
    opt("n_perturbations", cfg.n_perturbations);
    opt("perturbation_scale", cfg.perturbation_scale);
    opt("seed", cfg.seed);
    opt("n_cascades", cfg.n_cascades);
    opt("n_trees", cfg.n_trees);
    opt("tree_depth", cfg.tree_depth);
    opt("learning_rate", cfg.learning_rate);
    opt("n_candidate_splits", cfg.n_candidate_splits);
    opt("n_pool_pixels", cfg.n_pool_pixels);
    opt("pool_radius", cfg.pool_radius);
    if (j.contains("hog")) {
        const json& h = j.at("hog");
        if (h.contains("patch_size")) cfg.hog.patch_size = require<int>(h, "patch_size");
        if (h.contains("cells_per_side")) cfg.hog.cells_per_side = require<int>(h, "cells_per_side");
        if (h.contains("bins")) cfg.hog.bins = require<int>(h, "bins");
        if (h.contains("epsilon")) cfg.hog.epsilon = require<double>(h, "epsilon");
    }
    if (j.contains("frame")) {
        const json& f = j.at("frame");
        if (f.contains("pixels_per_unit")) cfg.frame.pixels_per_unit = require<double>(f, "pixels_per_unit");
        if (f.contains("margin")) cfg.frame.margin = require<double>(f, "margin");
    }
    try {
        cfg.validate();
    } catch (const SchemaError&) {
        throw;
    } catch (const Error& e) {
        throw SchemaError(std::string("invalid train config: ") + e.what());
    }
    return cfg;
}

detection::RegionKind RegionDetectorModel::region() const
{
    return std::visit([](const auto& m) { return m.region; }, engine);
}

const std::vector<LandmarkId>& RegionDetectorModel::landmarks() const
{
    return std::visit([](const auto& m) -> const std::vector<LandmarkId>& { return m.landmarks; }, engine);
}

const std::vector<Point2>& RegionDetectorModel::mean_shape() const
{
    return std::visit([](const auto& m) -> const std::vector<Point2>& { return m.mean_shape; }, engine);
}

Shape RegionDetectorModel::predict(const imaging::GrayImage& preprocessed, const Box& region) const
{
    if (const auto* sdm = std::get_if<SdmModel>(&engine)) {
        return sdm_predict(*sdm, preprocessed, region);
    }
    return ert_predict(std::get<ErtModel>(engine), preprocessed, region);
}

ordered_json to_json(const RegionDetectorModel& model)
{
    ordered_json j;
    j["magic"] = kModelMagic;
    j["schema_version"] = kModelSchemaVersion;
    j["preprocessing"] = imaging::kPreprocessingTag;
    j["engine"] = model.is_sdm() ? "sdm" : "ert";
    j["region"] = std::string(detection::region_name(model.region()));
    j["landmarks"] = landmarks_to_json(model.landmarks());
    j["mean_shape"] = points_to_json(model.mean_shape());
    if (const auto* sdm = std::get_if<SdmModel>(&model.engine)) {
        j["config"] = to_json(sdm->config);
        ordered_json stages = ordered_json::array();
        for (const auto& R : sdm->stages) {
            stages.push_back(matrix_to_json(R));
        }
        j["stages"] = std::move(stages);
        j["training_rmse"] = sdm->training_rmse;
    } else {
        const auto& ert = std::get<ErtModel>(model.engine);
        j["config"] = to_json(ert.config);
        ordered_json cascades = ordered_json::array();
        for (const auto& c : ert.cascades) {
            ordered_json pool = ordered_json::array();
            for (const auto& p : c.pool) {
                pool.push_back({p.anchor, p.du, p.dv});
            }
            ordered_json trees = ordered_json::array();
            for (const auto& t : c.trees) {
                trees.push_back(tree_to_json(t));
            }
            cascades.push_back({{"pool", std::move(pool)}, {"trees", std::move(trees)}});
        }
        j["cascades"] = std::move(cascades);
        j["training_mse"] = ert.training_mse;
    }
    return j;
}

RegionDetectorModel model_from_json(const json& j)
{
    if (!j.is_object() || require<std::string>(j, "magic") != kModelMagic) {
        throw SchemaError("not a cephalo model file");
    }
    const int version = require<int>(j, "schema_version");
    if (version != kModelSchemaVersion) {
        throw SchemaError("unsupported model schema version " + std::to_string(version) + " (expected " +
                          std::to_string(kModelSchemaVersion) + ")");
    }
    if (require<std::string>(j, "preprocessing") != imaging::kPreprocessingTag) {
        throw SchemaError("model was trained with a different preprocessing");
    }
    const std::string engine = require<std::string>(j, "engine");
    detection::RegionKind region;
    try {
        region = detection::parse_region(require<std::string>(j, "region"));
    } catch (const SchemaError&) {
        throw;
    } catch (const Error& e) {
        throw SchemaError(e.what());
    }
    auto landmarks = landmarks_from_json(require_node(j, "landmarks"));
    auto mean = points_from_json(require_node(j, "mean_shape"));
    if (landmarks.empty() || mean.size() != landmarks.size()) {
        throw SchemaError("mean shape does not match the landmark list");
    }
    const TrainConfig cfg = train_config_from_json(require_node(j, "config"));
    const std::size_t shape_size = 2 * landmarks.size();

    if (engine == "sdm") {
        SdmModel m;
        m.region = region;
        m.landmarks = std::move(landmarks);
        m.mean_shape = std::move(mean);
        m.config = cfg;
        const auto dim = static_cast<Eigen::Index>(m.landmarks.size() * cfg.hog.patch_length() + 1);
        for (const auto& s : require_node(j, "stages")) {
            Eigen::MatrixXd R = matrix_from_json(s);
            if (R.rows() != static_cast<Eigen::Index>(shape_size) || R.cols() != dim) {
                throw SchemaError("stage matrix has the wrong shape");
            }
            m.stages.push_back(std::move(R));
        }
        if (j.contains("training_rmse")) {
            m.training_rmse = require<std::vector<double>>(j, "training_rmse");
        }
        return {std::move(m)};
    }
    if (engine == "ert") {
        ErtModel m;
        m.region = region;
        m.landmarks = std::move(landmarks);
        m.mean_shape = std::move(mean);
        m.config = cfg;
        for (const auto& c : require_node(j, "cascades")) {
            TreeCascade cascade;
            for (const auto& p : require_node(c, "pool")) {
                if (!p.is_array() || p.size() != 3) {
                    throw SchemaError("a pool point must be [anchor, du, dv]");
                }
                PoolPoint pt{p[0].get<int>(), p[1].get<double>(), p[2].get<double>()};
                if (pt.anchor < 0 || static_cast<std::size_t>(pt.anchor) >= m.landmarks.size()) {
                    throw SchemaError("pool anchor out of range");
                }
                cascade.pool.push_back(pt);
            }
            for (const auto& t : require_node(c, "trees")) {
                cascade.trees.push_back(tree_from_json(t, cascade.pool.size(), shape_size));
            }
            m.cascades.push_back(std::move(cascade));
        }
        if (j.contains("training_mse")) {
            m.training_mse = require<std::vector<double>>(j, "training_mse");
        }
        return {std::move(m)};
    }
    throw SchemaError("unknown engine '" + engine + "'");
}

void save_model(const RegionDetectorModel& model, const std::filesystem::path& path)
{
    write_text_file(path, to_json(model).dump() + "\n");
}

RegionDetectorModel load_model(const std::filesystem::path& path)
{
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace cephalo::regressors
