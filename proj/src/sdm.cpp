/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/sdm.cpp
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
#include "regressors_internal.hpp"

#include "cephalo/error.hpp"
#include "cephalo/log.hpp"
#include "cephalo/parallel.hpp"
#include "cephalo/random.hpp"
#include "cephalo/regressors.hpp"

#include <cmath>
#include <optional>

namespace cephalo::regressors {

namespace {

class FrameHogFeatures final : public DescentFeatures {
public:
    FrameHogFeatures(const std::vector<features::RegionFrame>& frames, std::size_t per_image, std::size_t n_landmarks,
                     const features::HogParams& hog)
        : frames_(frames), per_image_(per_image), n_landmarks_(n_landmarks), hog_(hog)
    {
    }

    std::size_t dimension() const override { return n_landmarks_ * hog_.patch_length() + 1; }

    void extract(std::size_t sample, std::span<const double> shape, std::span<double> out) const override
    {
        const features::RegionFrame& frame = frames_[sample / per_image_];
        std::vector<Point2> centers(n_landmarks_);
        for (std::size_t l = 0; l < n_landmarks_; ++l) {
            centers[l] = frame.to_frame({shape[2 * l], shape[2 * l + 1]});
        }
        features::hog_features(frame.field(), centers, hog_, out);
    }

private:
    const std::vector<features::RegionFrame>& frames_;
    std::size_t per_image_;
    std::size_t n_landmarks_;
    features::HogParams hog_;
};

} // namespace

void TrainConfig::validate() const
{
    if (n_stages < 1 || n_perturbations < 0 || n_cascades < 1 || n_trees < 1 || tree_depth < 1 ||
        n_candidate_splits < 1 || n_pool_pixels < 2) {
        throw Error("train config counts must be at least 1 (pool at least 2, perturbations at least 0)");
    }
    if (!(ridge_lambda >= 0.0)) {
        throw Error("ridge_lambda must be non-negative");
    }
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw Error("learning_rate must lie in (0, 1]");
    }
    if (!(perturbation_scale >= 0.0) || !(pool_radius >= 0.0)) {
        throw Error("perturbation_scale and pool_radius must be non-negative");
    }
    hog.validate();
    frame.validate();
}

double shape_rmse(const Eigen::MatrixXd& shapes, const Eigen::MatrixXd& targets)
{
    const double points = static_cast<double>(shapes.rows()) * static_cast<double>(shapes.cols()) / 2.0;
    if (points <= 0.0) {
        return 0.0;
    }
    return std::sqrt((shapes - targets).squaredNorm() / points);
}

DescentResult train_descent(const DescentFeatures& features, const Eigen::MatrixXd& initial,
                            const Eigen::MatrixXd& targets, int n_stages, double lambda, int jobs)
{
    if (initial.rows() == 0 || initial.rows() != targets.rows() || initial.cols() != targets.cols()) {
        throw Error("descent training needs matching, non-empty initial and target shapes");
    }
    const Eigen::Index n = initial.rows();
    const Eigen::Index d = static_cast<Eigen::Index>(features.dimension());
    DescentResult result;
    result.final_shapes = initial;
    result.rmse.push_back(shape_rmse(result.final_shapes, targets));

    Eigen::MatrixXd X(n, d);
    for (int stage = 0; stage < n_stages; ++stage) {
        parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t i) {
            const auto row = static_cast<Eigen::Index>(i);
            const Eigen::VectorXd shape = result.final_shapes.row(row).transpose();
            Eigen::VectorXd phi(d);
            features.extract(i, std::span<const double>(shape.data(), shape.size()),
                             std::span<double>(phi.data(), phi.size()));
            X.row(row) = phi.transpose();
        });
        const Eigen::MatrixXd R = solve_ridge(X, targets - result.final_shapes, lambda);
        result.final_shapes += X * R.transpose();
        result.stages.push_back(R);
        result.rmse.push_back(shape_rmse(result.final_shapes, targets));
    }
    return result;
}

std::vector<Point2> mean_normalized_shape(const detection::RegionTrainSet& trainset)
{
    if (trainset.samples.empty()) {
        throw Error("cannot average an empty training set");
    }
    std::vector<Point2> mean(trainset.landmarks.size());
    for (const auto& s : trainset.samples) {
        for (std::size_t l = 0; l < mean.size(); ++l) {
            mean[l] = mean[l] + s.truth[l];
        }
    }
    const double inv = 1.0 / static_cast<double>(trainset.samples.size());
    for (auto& p : mean) {
        p = inv * p;
    }
    return mean;
}

Eigen::MatrixXd perturbed_initializations(std::span<const Point2> mean, std::size_t n_images, const TrainConfig& cfg)
{
    const std::size_t per_image = static_cast<std::size_t>(cfg.n_perturbations) + 1;
    const std::size_t n_landmarks = mean.size();
    Eigen::MatrixXd init(static_cast<Eigen::Index>(n_images * per_image), static_cast<Eigen::Index>(2 * n_landmarks));
    const double s = cfg.perturbation_scale;
    for (std::size_t i = 0; i < n_images; ++i) {
        Rng rng(derive_seed(cfg.seed, i));
        for (std::size_t p = 0; p < per_image; ++p) {
            const auto row = static_cast<Eigen::Index>(i * per_image + p);
            double tx = 0.0;
            double ty = 0.0;
            if (p > 0) {
                tx = rng.uniform(-s, s);
                ty = rng.uniform(-s, s);
            }
            for (std::size_t l = 0; l < n_landmarks; ++l) {
                double ox = 0.0;
                double oy = 0.0;
                if (p > 0) {
                    ox = rng.uniform(-s, s);
                    oy = rng.uniform(-s, s);
                }
                init(row, static_cast<Eigen::Index>(2 * l)) = mean[l].x + tx + ox;
                init(row, static_cast<Eigen::Index>(2 * l + 1)) = mean[l].y + ty + oy;
            }
        }
    }
    return init;
}

namespace detail {

Eigen::MatrixXd replicated_targets(const detection::RegionTrainSet& trainset, std::size_t per_image)
{
    const std::size_t n_landmarks = trainset.landmarks.size();
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(trainset.samples.size() * per_image),
                            static_cast<Eigen::Index>(2 * n_landmarks));
    for (std::size_t i = 0; i < trainset.samples.size(); ++i) {
        for (std::size_t p = 0; p < per_image; ++p) {
            const auto row = static_cast<Eigen::Index>(i * per_image + p);
            for (std::size_t l = 0; l < n_landmarks; ++l) {
                targets(row, static_cast<Eigen::Index>(2 * l)) = trainset.samples[i].truth[l].x;
                targets(row, static_cast<Eigen::Index>(2 * l + 1)) = trainset.samples[i].truth[l].y;
            }
        }
    }
    return targets;
}

std::vector<features::RegionFrame> training_frames(const detection::RegionTrainSet& trainset,
                                                   const features::FrameParams& params, int jobs)
{
    std::vector<std::optional<features::RegionFrame>> frames(trainset.samples.size());
    parallel_for(frames.size(), jobs, [&](std::size_t i) {
        frames[i].emplace(*trainset.samples[i].image, trainset.samples[i].region, params);
    });
    std::vector<features::RegionFrame> out;
    out.reserve(frames.size());
    for (auto& f : frames) {
        out.push_back(std::move(*f));
    }
    return out;
}

} // namespace detail

SdmModel sdm_train(const detection::RegionTrainSet& trainset, const TrainConfig& cfg, int jobs)
{
    cfg.validate();
    if (trainset.samples.empty()) {
        throw Error("sdm_train: empty training set");
    }
    SdmModel model;
    model.region = trainset.kind;
    model.landmarks = trainset.landmarks;
    model.config = cfg;
    model.mean_shape = mean_normalized_shape(trainset);

    const std::size_t per_image = static_cast<std::size_t>(cfg.n_perturbations) + 1;
    const auto frames = detail::training_frames(trainset, cfg.frame, jobs);
    const Eigen::MatrixXd initial = perturbed_initializations(model.mean_shape, trainset.samples.size(), cfg);
    const Eigen::MatrixXd targets = detail::replicated_targets(trainset, per_image);

    const FrameHogFeatures phi(frames, per_image, model.landmarks.size(), cfg.hog);
    DescentResult result = train_descent(phi, initial, targets, cfg.n_stages, cfg.ridge_lambda, jobs);
    model.stages = std::move(result.stages);
    model.training_rmse = std::move(result.rmse);

    std::string trace;
    for (double r : model.training_rmse) {
        trace += " " + std::to_string(r);
    }
    log_info("sdm '" + std::string(detection::region_name(model.region)) + "' trained on " +
             std::to_string(trainset.samples.size()) + " images; rmse" + trace);
    return model;
}

std::vector<Point2> sdm_predict_normalized(const SdmModel& model, const features::RegionFrame& frame)
{
    const std::size_t n_landmarks = model.landmarks.size();
    const features::HogParams& hog = model.config.hog;
    Eigen::VectorXd x(static_cast<Eigen::Index>(2 * n_landmarks));
    for (std::size_t l = 0; l < n_landmarks; ++l) {
        x(static_cast<Eigen::Index>(2 * l)) = model.mean_shape[l].x;
        x(static_cast<Eigen::Index>(2 * l + 1)) = model.mean_shape[l].y;
    }
    Eigen::VectorXd phi(static_cast<Eigen::Index>(n_landmarks * hog.patch_length() + 1));
    std::vector<Point2> centers(n_landmarks);
    for (const auto& R : model.stages) {
        for (std::size_t l = 0; l < n_landmarks; ++l) {
            centers[l] = frame.to_frame({x(static_cast<Eigen::Index>(2 * l)), x(static_cast<Eigen::Index>(2 * l + 1))});
        }
        features::hog_features(frame.field(), centers, hog, std::span<double>(phi.data(), phi.size()));
        x += R * phi;
    }
    std::vector<Point2> out(n_landmarks);
    for (std::size_t l = 0; l < n_landmarks; ++l) {
        out[l] = {x(static_cast<Eigen::Index>(2 * l)), x(static_cast<Eigen::Index>(2 * l + 1))};
    }
    return out;
}

Shape sdm_predict(const SdmModel& model, const imaging::GrayImage& img, const Box& region)
{
    const features::RegionFrame frame(img, region, model.config.frame);
    const auto normalized = sdm_predict_normalized(model, frame);
    Shape out;
    for (std::size_t l = 0; l < model.landmarks.size(); ++l) {
        out.set(model.landmarks[l], frame.to_image(normalized[l]));
    }
    return out;
}

} // namespace cephalo::regressors
