/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/regressors.hpp
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
#include "cephalo/features.hpp"
#include "cephalo/imaging.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace cephalo::regressors {

/// Hyperparameters of both engines; stored verbatim in every model file.
struct TrainConfig {
    // cascaded linear regression
    int n_stages = 5;
    double ridge_lambda = 100.0;
    // shared sample generation
    int n_perturbations = 10;
    double perturbation_scale = 0.05;
    std::uint64_t seed = 1;
    // tree ensemble
    int n_cascades = 10;
    int n_trees = 50;
    int tree_depth = 4;
    double learning_rate = 0.1;
    int n_candidate_splits = 20;
    int n_pool_pixels = 400;
    double pool_radius = 0.1;
    // descriptors
    features::HogParams hog;
    features::FrameParams frame;

    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Closed-form ridge regression

/// Returns R (targets x features) minimizing ||Y - X R^T||^2 + lambda ||R||^2.
///
/// Solves the regularized normal equations in whichever of the primal
/// (features x features) or dual (samples x samples) form is smaller.
/// Throws cephalo::Error for lambda == 0 with more features than samples, and
/// when the factorization fails or produces non-finite values.
Eigen::MatrixXd solve_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double lambda);

// ---------------------------------------------------------------------------
// Cascaded linear regression (supervised descent)

/// Shape-indexed features phi(sample, x); shapes are interleaved (x0, y0, x1, y1, ...).
class DescentFeatures {
public:
    virtual ~DescentFeatures() = default;
    virtual std::size_t dimension() const = 0;
    virtual void extract(std::size_t sample, std::span<const double> shape, std::span<double> out) const = 0;
};

struct DescentResult {
    std::vector<Eigen::MatrixXd> stages;
    /// rmse[0] is the initial error, rmse[k] the error after stage k.
    std::vector<double> rmse;
    Eigen::MatrixXd final_shapes;
};

/// Per-point RMSE between row-wise interleaved shape matrices.
double shape_rmse(const Eigen::MatrixXd& shapes, const Eigen::MatrixXd& targets);

/// Learns one descent map per stage: R_k = ridge(phi(x^k) -> x* - x^k), then
/// x^{k+1} = x^k + R_k phi(x^k).
DescentResult train_descent(const DescentFeatures& features, const Eigen::MatrixXd& initial,
                            const Eigen::MatrixXd& targets, int n_stages, double lambda, int jobs = 1);

struct SdmModel {
    detection::RegionKind region = detection::RegionKind::face;
    std::vector<LandmarkId> landmarks;
    std::vector<Point2> mean_shape;  // normalized region coordinates
    TrainConfig config;
    std::vector<Eigen::MatrixXd> stages;
    std::vector<double> training_rmse;
};

/// Training initializations: the mean shape, then n_perturbations copies shifted by a
/// global translation and per-landmark offsets, both uniform in [-s, s]^2.
Eigen::MatrixXd perturbed_initializations(std::span<const Point2> mean, std::size_t n_images,
                                          const TrainConfig& cfg);

std::vector<Point2> mean_normalized_shape(const detection::RegionTrainSet& trainset);

SdmModel sdm_train(const detection::RegionTrainSet& trainset, const TrainConfig& cfg, int jobs = 1);

/// Predicts the model's landmarks inside `region` of a preprocessed image (image pixels).
Shape sdm_predict(const SdmModel& model, const imaging::GrayImage& img, const Box& region);
std::vector<Point2> sdm_predict_normalized(const SdmModel& model, const features::RegionFrame& frame);

// ---------------------------------------------------------------------------
// Ensemble of regression trees

/// Pixel probe placed relative to one landmark of the current shape (normalized units).
struct PoolPoint {
    int anchor = 0;
    double du = 0.0;
    double dv = 0.0;
};

/// Intensities at pool points of the current shape of a sample.
class PixelFeatures {
public:
    virtual ~PixelFeatures() = default;
    virtual void sample(std::size_t sample, std::span<const double> shape, std::span<const PoolPoint> pool,
                        std::span<double> out) const = 0;
};

struct TreeNode {
    int feature_a = -1;
    int feature_b = -1;
    double threshold = 0.0;
    int left = -1;   // taken when value(a) - value(b) < threshold
    int right = -1;
    std::vector<double> delta;  // leaf increment

    bool is_leaf() const { return left < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const std::vector<double>& evaluate(std::span<const double> pool_values) const;
    int depth() const;
};

struct TreeCascade {
    std::vector<PoolPoint> pool;
    std::vector<RegressionTree> trees;
};

struct TreeEnsembleResult {
    std::vector<TreeCascade> cascades;
    /// mse[0] is the initial error, then one entry per appended tree.
    std::vector<double> mse;
    Eigen::MatrixXd final_shapes;
};

/// Gradient boosting on shape residuals. Each node keeps the best of
/// n_candidate_splits random (pixel pair, threshold) splits by residual sum of
/// squares; a split leaving a child empty is rejected and a node with no valid
/// candidate becomes a leaf. Leaves hold learning_rate * mean residual.
TreeEnsembleResult train_tree_ensemble(const PixelFeatures& pixels, const Eigen::MatrixXd& initial,
                                       const Eigen::MatrixXd& targets, const TrainConfig& cfg, int jobs = 1);

struct ErtModel {
    detection::RegionKind region = detection::RegionKind::face;
    std::vector<LandmarkId> landmarks;
    std::vector<Point2> mean_shape;
    TrainConfig config;
    std::vector<TreeCascade> cascades;
    std::vector<double> training_mse;
};

ErtModel ert_train(const detection::RegionTrainSet& trainset, const TrainConfig& cfg, int jobs = 1);
Shape ert_predict(const ErtModel& model, const imaging::GrayImage& img, const Box& region);
std::vector<Point2> ert_predict_normalized(const ErtModel& model, const features::RegionFrame& frame);

// ---------------------------------------------------------------------------

/// A trained per-region shape regressor of either engine.
struct RegionDetectorModel {
    std::variant<SdmModel, ErtModel> engine;

    detection::RegionKind region() const;
    const std::vector<LandmarkId>& landmarks() const;
    const std::vector<Point2>& mean_shape() const;
    bool is_sdm() const { return std::holds_alternative<SdmModel>(engine); }

    Shape predict(const imaging::GrayImage& preprocessed, const Box& region) const;
};

inline constexpr const char* kModelMagic = "cephalo-model";
inline constexpr int kModelSchemaVersion = 1;

nlohmann::ordered_json to_json(const RegionDetectorModel& model);
/// Throws SchemaError on a wrong magic string or schema version.
RegionDetectorModel model_from_json(const nlohmann::json& j);
void save_model(const RegionDetectorModel& model, const std::filesystem::path& path);
RegionDetectorModel load_model(const std::filesystem::path& path);

} // namespace cephalo::regressors
