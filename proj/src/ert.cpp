/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/ert.cpp
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

#include <algorithm>
#include <limits>

namespace cephalo::regressors {

namespace {

// Sub-seed offsets keep pool and tree draws apart from the initialization draws.
constexpr std::uint64_t kPoolStream = 0x5000'0000ULL;
constexpr std::uint64_t kTreeStream = 0x7000'0000ULL;

class FramePixels final : public PixelFeatures {
public:
    FramePixels(std::span<const features::RegionFrame> frames, std::size_t per_image)
        : frames_(frames), per_image_(per_image)
    {
    }

    void sample(std::size_t sample, std::span<const double> shape, std::span<const PoolPoint> pool,
                std::span<double> out) const override
    {
        const features::RegionFrame& frame = frames_[sample / per_image_];
        for (std::size_t k = 0; k < pool.size(); ++k) {
            const auto a = static_cast<std::size_t>(pool[k].anchor);
            const Point2 u{shape[2 * a] + pool[k].du, shape[2 * a + 1] + pool[k].dv};
            const Point2 f = frame.to_frame(u);
            out[k] = imaging::sample_bilinear(frame.intensity(), f.x, f.y);
        }
    }

private:
    std::span<const features::RegionFrame> frames_;
    std::size_t per_image_;
};

std::vector<PoolPoint> draw_pool(std::size_t n_landmarks, const TrainConfig& cfg, int cascade)
{
    Rng rng(derive_seed(cfg.seed, kPoolStream + static_cast<std::uint64_t>(cascade)));
    std::vector<PoolPoint> pool(static_cast<std::size_t>(cfg.n_pool_pixels));
    for (auto& p : pool) {
        p.anchor = static_cast<int>(rng.index(n_landmarks));
        p.du = rng.uniform(-cfg.pool_radius, cfg.pool_radius);
        p.dv = rng.uniform(-cfg.pool_radius, cfg.pool_radius);
    }
    return pool;
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<double>& values, std::size_t n_pool, const Eigen::MatrixXd& residual,
                const TrainConfig& cfg, Rng& rng)
        : values_(values), n_pool_(n_pool), residual_(residual), cfg_(cfg), rng_(rng)
    {
    }

    RegressionTree build()
    {
        std::vector<Eigen::Index> all(static_cast<std::size_t>(residual_.rows()));
        for (std::size_t i = 0; i < all.size(); ++i) {
            all[i] = static_cast<Eigen::Index>(i);
        }
        tree_.nodes.clear();
        grow(all, 0);
        return std::move(tree_);
    }

private:
    double value(Eigen::Index sample, int feature) const
    {
        return values_[static_cast<std::size_t>(sample) * n_pool_ + static_cast<std::size_t>(feature)];
    }

    Eigen::RowVectorXd residual_sum(const std::vector<Eigen::Index>& idx) const
    {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(residual_.cols());
        for (auto i : idx) {
            sum += residual_.row(i);
        }
        return sum;
    }

    int grow(const std::vector<Eigen::Index>& idx, int depth)
    {
        const int self = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const Eigen::RowVectorXd total = residual_sum(idx);

        int best_a = -1;
        int best_b = -1;
        double best_threshold = 0.0;
        double best_score = -std::numeric_limits<double>::infinity();
        if (depth < cfg_.tree_depth && idx.size() >= 2) {
            std::vector<double> diff(idx.size());
            for (int c = 0; c < cfg_.n_candidate_splits; ++c) {
                const int a = static_cast<int>(rng_.index(n_pool_));
                int b = static_cast<int>(rng_.index(n_pool_ - 1));
                if (b >= a) {
                    ++b;
                }
                const double u = rng_.uniform();
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    diff[k] = value(idx[k], a) - value(idx[k], b);
                    lo = std::min(lo, diff[k]);
                    hi = std::max(hi, diff[k]);
                }
                const double threshold = lo + u * (hi - lo);
                Eigen::RowVectorXd left_sum = Eigen::RowVectorXd::Zero(residual_.cols());
                std::size_t n_left = 0;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    if (diff[k] < threshold) {
                        left_sum += residual_.row(idx[k]);
                        ++n_left;
                    }
                }
                const std::size_t n_right = idx.size() - n_left;
                if (n_left == 0 || n_right == 0) {
                    continue;
                }
                const double score = left_sum.squaredNorm() / static_cast<double>(n_left) +
                                     (total - left_sum).squaredNorm() / static_cast<double>(n_right);
                if (score > best_score) {
                    best_score = score;
                    best_a = a;
                    best_b = b;
                    best_threshold = threshold;
                }
            }
        }

        if (best_a < 0) {
            const Eigen::RowVectorXd delta = cfg_.learning_rate / static_cast<double>(idx.size()) * total;
            tree_.nodes[static_cast<std::size_t>(self)].delta.assign(delta.data(), delta.data() + delta.size());
            return self;
        }

        std::vector<Eigen::Index> left;
        std::vector<Eigen::Index> right;
        for (auto i : idx) {
            (value(i, best_a) - value(i, best_b) < best_threshold ? left : right).push_back(i);
        }
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        TreeNode& node = tree_.nodes[static_cast<std::size_t>(self)];
        node.feature_a = best_a;
        node.feature_b = best_b;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return self;
    }

    const std::vector<double>& values_;
    std::size_t n_pool_;
    const Eigen::MatrixXd& residual_;
    const TrainConfig& cfg_;
    Rng& rng_;
    RegressionTree tree_;
};

double shape_mse(const Eigen::MatrixXd& shapes, const Eigen::MatrixXd& targets)
{
    const double r = shape_rmse(shapes, targets);
    return r * r;
}

} // namespace

const std::vector<double>& RegressionTree::evaluate(std::span<const double> pool_values) const
{
    if (nodes.empty()) {
        throw Error("cannot evaluate an empty regression tree");
    }
    std::size_t n = 0;
    while (!nodes[n].is_leaf()) {
        const TreeNode& node = nodes[n];
        const double d = pool_values[static_cast<std::size_t>(node.feature_a)] -
                         pool_values[static_cast<std::size_t>(node.feature_b)];
        n = static_cast<std::size_t>(d < node.threshold ? node.left : node.right);
    }
    return nodes[n].delta;
}

int RegressionTree::depth() const
{
    if (nodes.empty()) {
        return 0;
    }
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        deepest = std::max(deepest, level[n]);
        if (!nodes[n].is_leaf()) {
            level[static_cast<std::size_t>(nodes[n].left)] = level[n] + 1;
            level[static_cast<std::size_t>(nodes[n].right)] = level[n] + 1;
        }
    }
    return deepest;
}

TreeEnsembleResult train_tree_ensemble(const PixelFeatures& pixels, const Eigen::MatrixXd& initial,
                                       const Eigen::MatrixXd& targets, const TrainConfig& cfg, int jobs)
{
    cfg.validate();
    if (initial.rows() == 0 || initial.rows() != targets.rows() || initial.cols() != targets.cols() ||
        initial.cols() % 2 != 0) {
        throw Error("tree ensemble training needs matching, non-empty initial and target shapes");
    }
    const auto n = static_cast<std::size_t>(initial.rows());
    const auto n_landmarks = static_cast<std::size_t>(initial.cols() / 2);
    const auto n_pool = static_cast<std::size_t>(cfg.n_pool_pixels);

    TreeEnsembleResult result;
    result.final_shapes = initial;
    result.mse.push_back(shape_mse(result.final_shapes, targets));

    std::vector<double> values(n * n_pool);
    for (int c = 0; c < cfg.n_cascades; ++c) {
        TreeCascade cascade;
        cascade.pool = draw_pool(n_landmarks, cfg, c);
        parallel_for(n, jobs, [&](std::size_t i) {
            const Eigen::VectorXd shape = result.final_shapes.row(static_cast<Eigen::Index>(i)).transpose();
            pixels.sample(i, std::span<const double>(shape.data(), shape.size()), cascade.pool,
                          std::span<double>(values.data() + i * n_pool, n_pool));
        });
        for (int t = 0; t < cfg.n_trees; ++t) {
            Rng rng(derive_seed(cfg.seed, kTreeStream + static_cast<std::uint64_t>(c) * 100003ULL +
                                              static_cast<std::uint64_t>(t)));
            const Eigen::MatrixXd residual = targets - result.final_shapes;
            RegressionTree tree = TreeBuilder(values, n_pool, residual, cfg, rng).build();
            for (std::size_t i = 0; i < n; ++i) {
                const auto& delta = tree.evaluate(std::span<const double>(values.data() + i * n_pool, n_pool));
                result.final_shapes.row(static_cast<Eigen::Index>(i)) +=
                    Eigen::Map<const Eigen::RowVectorXd>(delta.data(), static_cast<Eigen::Index>(delta.size()));
            }
            cascade.trees.push_back(std::move(tree));
            result.mse.push_back(shape_mse(result.final_shapes, targets));
        }
        result.cascades.push_back(std::move(cascade));
    }
    return result;
}

ErtModel ert_train(const detection::RegionTrainSet& trainset, const TrainConfig& cfg, int jobs)
{
    cfg.validate();
    if (trainset.samples.empty()) {
        throw Error("ert_train: empty training set");
    }
    ErtModel model;
    model.region = trainset.kind;
    model.landmarks = trainset.landmarks;
    model.config = cfg;
    model.mean_shape = mean_normalized_shape(trainset);

    const std::size_t per_image = static_cast<std::size_t>(cfg.n_perturbations) + 1;
    const auto frames = detail::training_frames(trainset, cfg.frame, jobs);
    const Eigen::MatrixXd initial = perturbed_initializations(model.mean_shape, trainset.samples.size(), cfg);
    const Eigen::MatrixXd targets = detail::replicated_targets(trainset, per_image);

    const FramePixels pixels(frames, per_image);
    TreeEnsembleResult result = train_tree_ensemble(pixels, initial, targets, cfg, jobs);
    model.cascades = std::move(result.cascades);
    model.training_mse = std::move(result.mse);
    log_info("ert '" + std::string(detection::region_name(model.region)) + "' trained on " +
             std::to_string(trainset.samples.size()) + " images; mse " + std::to_string(model.training_mse.front()) +
             " -> " + std::to_string(model.training_mse.back()));
    return model;
}

std::vector<Point2> ert_predict_normalized(const ErtModel& model, const features::RegionFrame& frame)
{
    const std::size_t n_landmarks = model.landmarks.size();
    std::vector<double> shape(2 * n_landmarks);
    for (std::size_t l = 0; l < n_landmarks; ++l) {
        shape[2 * l] = model.mean_shape[l].x;
        shape[2 * l + 1] = model.mean_shape[l].y;
    }
    const FramePixels pixels(std::span<const features::RegionFrame>(&frame, 1), 1);
    std::vector<double> values;
    for (const auto& cascade : model.cascades) {
        values.assign(cascade.pool.size(), 0.0);
        pixels.sample(0, shape, cascade.pool, values);
        for (const auto& tree : cascade.trees) {
            const auto& delta = tree.evaluate(values);
            for (std::size_t k = 0; k < shape.size(); ++k) {
                shape[k] += delta[k];
            }
        }
    }
    std::vector<Point2> out(n_landmarks);
    for (std::size_t l = 0; l < n_landmarks; ++l) {
        out[l] = {shape[2 * l], shape[2 * l + 1]};
    }
    return out;
}

Shape ert_predict(const ErtModel& model, const imaging::GrayImage& img, const Box& region)
{
    const features::RegionFrame frame(img, region, model.config.frame);
    const auto normalized = ert_predict_normalized(model, frame);
    Shape out;
    for (std::size_t l = 0; l < model.landmarks.size(); ++l) {
        out.set(model.landmarks[l], frame.to_image(normalized[l]));
    }
    return out;
}

} // namespace cephalo::regressors
