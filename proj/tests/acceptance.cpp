/*
 * cephalo: Region-specialized facial landmark detection
 * File: tests/acceptance.cpp
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
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include "cephalo/core.hpp"
#include "cephalo/detection.hpp"
#include "cephalo/evaluation.hpp"
#include "cephalo/imaging.hpp"
#include "cephalo/log.hpp"
#include "cephalo/pipeline.hpp"
#include "cephalo/random.hpp"
#include "cephalo/regressors.hpp"
#include "cephalo/synthgen.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

using namespace cephalo;
using detection::RegionKind;
using pipeline::DetectorKind;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool ok, const std::string& detail)
{
    std::cout << "criterion " << id << ": " << (ok ? "PASS" : "FAIL") << "  " << detail << std::endl;
    if (!ok) {
        ++failures;
    }
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937& gen)
{
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = n(gen);
    }
    return m;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// ---------------------------------------------------------------------------

void metric_correctness()
{
    const auto t0 = Clock::now();
    bool ok = true;
    Shape s;
    s.set(LandmarkId::ex_l, {0, 0});
    s.set(LandmarkId::ex_r, {100, 0});
    const double hand = evaluation::normalized_error({10, 0}, {0, 0}, s);
    ok = ok && std::abs(hand - 0.1) <= 1e-9;

    std::mt19937 gen(1001);
    std::uniform_real_distribution<double> u(-200, 200);
    std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi);
    std::uniform_real_distribution<double> scale(0.05, 20);
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        Shape gt;
        gt.set(LandmarkId::ex_l, {u(gen), u(gen)});
        gt.set(LandmarkId::ex_r, {u(gen), u(gen)});
        const Point2 pred{u(gen), u(gen)};
        const Point2 truth{u(gen), u(gen)};
        const double base = evaluation::normalized_error(pred, truth, gt);
        const double a = angle(gen);
        const double k = scale(gen);
        const Point2 shift{u(gen), u(gen)};
        auto map = [&](Point2 p) {
            return Point2{k * (std::cos(a) * p.x - std::sin(a) * p.y) + shift.x,
                          k * (std::sin(a) * p.x + std::cos(a) * p.y) + shift.y};
        };
        Shape moved;
        moved.set(LandmarkId::ex_l, map(gt.at(LandmarkId::ex_l)));
        moved.set(LandmarkId::ex_r, map(gt.at(LandmarkId::ex_r)));
        const double after = evaluation::normalized_error(map(pred), map(truth), moved);
        worst = std::max(worst, std::abs(after - base) / std::max(1.0, base));
    }
    ok = ok && worst <= 1e-9;
    const double secs = seconds_since(t0);
    ok = ok && secs < 1.0;
    verdict(1, ok,
            "hand case " + fmt("%.12g", hand) + ", worst similarity drift " + fmt("%.2e", worst) + ", " +
                fmt("%.3f", secs) + " s");
}

// ---------------------------------------------------------------------------

double enumerated_p(const std::vector<double>& d)
{
    std::vector<double> nz;
    for (double v : d) {
        if (v != 0.0) {
            nz.push_back(v);
        }
    }
    std::vector<double> mags;
    for (double v : nz) {
        mags.push_back(std::abs(v));
    }
    const auto ranks = evaluation::average_ranks(mags);
    double total = 0;
    double w_plus = 0;
    for (std::size_t i = 0; i < nz.size(); ++i) {
        total += ranks[i];
        if (nz[i] > 0) {
            w_plus += ranks[i];
        }
    }
    const double observed = std::min(w_plus, total - w_plus);
    const std::size_t n = nz.size();
    std::size_t extreme = 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double w = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1) {
                w += ranks[i];
            }
        }
        if (std::min(w, total - w) <= observed + 1e-9) {
            ++extreme;
        }
    }
    return static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << n);
}

void statistics_oracles()
{
    const auto t0 = Clock::now();
    std::mt19937 gen(2002);
    double worst = 0;
    int datasets = 0;
    for (std::size_t n = 1; n <= 12; ++n) {
        for (int t = 0; t < 40; ++t) {
            std::vector<double> a(n);
            std::vector<double> b(n);
            std::uniform_int_distribution<int> coarse(-4, 4);
            std::normal_distribution<double> fine(0, 1);
            for (std::size_t i = 0; i < n; ++i) {
                // half the datasets use small integers so ties and zeros occur
                a[i] = t % 2 ? coarse(gen) : fine(gen);
                b[i] = t % 2 ? coarse(gen) : fine(gen);
            }
            std::vector<double> d(n);
            bool any = false;
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = a[i] - b[i];
                any = any || d[i] != 0.0;
            }
            if (!any) {
                continue;
            }
            const auto r = evaluation::wilcoxon_signed_rank(a, b, evaluation::WilcoxonMode::exact);
            worst = std::max(worst, std::abs(r.p_two_sided - enumerated_p(d)));
            ++datasets;
        }
    }
    bool ok = worst <= 1e-12;

    const std::vector<double> pos = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const std::vector<double> zero(10, 0.0);
    const double p10 = evaluation::wilcoxon_signed_rank(pos, zero).p_two_sided;
    ok = ok && std::abs(p10 - 0.001953125) <= 1e-15;

    bool rank_sums = true;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + gen() % 30;
        std::vector<double> v(n);
        std::uniform_int_distribution<int> small(0, 5);
        std::normal_distribution<double> cont(0, 1);
        for (auto& x : v) {
            x = t % 2 ? small(gen) : cont(gen);
        }
        const auto r = evaluation::average_ranks(v);
        double sum = 0;
        for (double x : r) {
            sum += x;
        }
        rank_sums = rank_sums && std::abs(sum - n * (n + 1) / 2.0) <= 1e-9;
    }
    ok = ok && rank_sums;
    const double secs = seconds_since(t0);
    ok = ok && secs < 10.0;
    verdict(2, ok,
            "exact vs enumeration max |dp| " + fmt("%.2e", worst) + " over " + std::to_string(datasets) +
                " datasets, n=10 all-positive p " + fmt("%.9f", p10) + ", rank-sum identity " +
                (rank_sums ? "holds" : "broken") + ", " + fmt("%.2f", secs) + " s");
}

// ---------------------------------------------------------------------------

double brute_feature(const imaging::GrayImage& img, const std::vector<detection::HaarRect>& feature, int x, int y,
                     double scale, int ww0, int wh0)
{
    const int ww = detection::scaled_extent(ww0, scale);
    const int wh = detection::scaled_extent(wh0, scale);
    double sum = 0;
    double sq = 0;
    for (int yy = y; yy < y + wh; ++yy) {
        for (int xx = x; xx < x + ww; ++xx) {
            sum += img.at(xx, yy);
            sq += static_cast<double>(img.at(xx, yy)) * img.at(xx, yy);
        }
    }
    const double n = static_cast<double>(ww) * wh;
    const double mean = sum / n;
    const double sd = std::max(std::sqrt(std::max(sq / n - mean * mean, 0.0)), detection::kMinWindowStddev);
    double acc = 0;
    for (const auto& r : feature) {
        const auto p = detection::scale_rect(r, scale, ww0, wh0);
        double s = 0;
        for (int yy = 0; yy < p.h; ++yy) {
            for (int xx = 0; xx < p.w; ++xx) {
                s += img.at(x + p.x + xx, y + p.y + yy);
            }
        }
        acc += r.weight * s;
    }
    return acc / (n * sd);
}

imaging::GrayImage random_image(int w, int h, std::mt19937& gen)
{
    imaging::GrayImage img(w, h);
    std::uniform_int_distribution<int> v(0, 255);
    for (auto& p : img.pixels()) {
        p = static_cast<std::uint8_t>(v(gen));
    }
    return img;
}

void imaging_oracles()
{
    std::mt19937 gen(3003);
    long mismatches = 0;
    long checked = 0;
    for (int t = 0; t < 100; ++t) {
        const auto img = random_image(50, 50, gen);
        const auto table = imaging::integral(img);
        for (int k = 0; k < 200; ++k) {
            const int x = static_cast<int>(gen() % 50);
            const int y = static_cast<int>(gen() % 50);
            const int w = 1 + static_cast<int>(gen() % (50 - x));
            const int h = 1 + static_cast<int>(gen() % (50 - y));
            std::int64_t brute = 0;
            for (int yy = y; yy < y + h; ++yy) {
                for (int xx = x; xx < x + w; ++xx) {
                    brute += img.at(xx, yy);
                }
            }
            mismatches += table.rect_sum(x, y, w, h) != brute;
            ++checked;
        }
    }

    detection::CascadeModel m;
    m.window_w = 20;
    m.window_h = 16;
    std::uniform_int_distribution<int> rx(0, 19);
    std::uniform_int_distribution<int> ry(0, 15);
    std::uniform_real_distribution<double> w(-2, 2);
    for (int s = 0; s < 3; ++s) {
        detection::Stage stage;
        stage.threshold = w(gen);
        for (int k = 0; k < 4; ++k) {
            detection::Stump stump;
            for (int r = 0; r < 3; ++r) {
                const int x = rx(gen);
                const int y = ry(gen);
                stump.feature.push_back({x, y, 1 + rx(gen) % (20 - x), 1 + ry(gen) % (16 - y), w(gen)});
            }
            stump.threshold = 0.1 * w(gen);
            stump.left = w(gen);
            stump.right = w(gen);
            stage.stumps.push_back(stump);
        }
        m.stages.push_back(stage);
    }
    double worst = 0;
    bool decisions = true;
    for (int t = 0; t < 20; ++t) {
        const auto img = random_image(70, 60, gen);
        const detection::CascadeScanner scanner(img);
        for (double scale : {1.0, 1.3, 2.2}) {
            const int ww = detection::scaled_extent(20, scale);
            const int wh = detection::scaled_extent(16, scale);
            for (int k = 0; k < 10; ++k) {
                const int x = static_cast<int>(gen() % (70 - ww + 1));
                const int y = static_cast<int>(gen() % (60 - wh + 1));
                const auto r = scanner.evaluate(m, x, y, scale);
                bool passed = true;
                for (std::size_t s = 0; s < m.stages.size(); ++s) {
                    double sum = 0;
                    for (const auto& stump : m.stages[s].stumps) {
                        const double f = brute_feature(img, stump.feature, x, y, scale, 20, 16);
                        sum += f < stump.threshold ? stump.left : stump.right;
                    }
                    worst = std::max(worst, std::abs(r.stage_sums[s] - sum));
                    passed = passed && sum >= m.stages[s].threshold;
                }
                decisions = decisions && r.passed == passed;
            }
        }
    }
    const bool ok = mismatches == 0 && worst <= 1e-6 && decisions;
    verdict(3, ok,
            std::to_string(mismatches) + " integral mismatches in " + std::to_string(checked) +
                " rectangles, cascade stage sums max |d| " + fmt("%.2e", worst));
}

// ---------------------------------------------------------------------------

class LinearFeatures : public regressors::DescentFeatures {
public:
    LinearFeatures(Eigen::MatrixXd targets, Eigen::MatrixXd B) : targets_(std::move(targets)), B_(std::move(B)) {}
    std::size_t dimension() const override { return static_cast<std::size_t>(B_.rows()); }
    void extract(std::size_t sample, std::span<const double> shape, std::span<double> out) const override
    {
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(shape.data(), static_cast<Eigen::Index>(shape.size()));
        const Eigen::VectorXd d = targets_.row(static_cast<Eigen::Index>(sample)).transpose() - x;
        Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = B_ * d;
    }

private:
    Eigen::MatrixXd targets_;
    Eigen::MatrixXd B_;
};

std::vector<detection::LabeledImage> synthetic_faces(std::size_t n, std::uint64_t seed)
{
    std::vector<detection::LabeledImage> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto sample = synthgen::render(synthgen::sample_params({}, derive_seed(seed, i)));
        detection::LabeledImage li;
        li.id = std::to_string(i);
        li.image = std::make_shared<const imaging::GrayImage>(imaging::preprocess(sample.image));
        li.truth = sample.truth;
        li.face = sample.face_box;
        li.source = detection::BoxSource::manifest;
        out.push_back(std::move(li));
    }
    return out;
}

template <typename Seq>
bool non_increasing(const Seq& v, double slack)
{
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k] > v[k - 1] + slack) {
            return false;
        }
    }
    return true;
}

void regression_engines()
{
    std::mt19937 gen(4004);
    const int n = 200;
    const int dim = 10;
    const Eigen::MatrixXd targets = random_matrix(n, dim, gen);
    const Eigen::MatrixXd initial = targets + 0.3 * random_matrix(n, dim, gen);
    const Eigen::MatrixXd B = random_matrix(dim, dim, gen) + 3.0 * Eigen::MatrixXd::Identity(dim, dim);
    const auto d = regressors::train_descent(LinearFeatures(targets, B), initial, targets, 1, 1e-8);
    const double reduction = 1.0 - d.rmse[1] / d.rmse[0];

    bool monotone = true;
    const std::vector<RegionKind> kinds = {RegionKind::nose, RegionKind::eyes, RegionKind::mouth};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto faces = synthetic_faces(8, 400 + seed);
        regressors::TrainConfig cfg;
        cfg.n_stages = 4;
        cfg.n_perturbations = 3;
        cfg.n_cascades = 3;
        cfg.n_trees = 10;
        cfg.n_pool_pixels = 100;
        cfg.frame.pixels_per_unit = 64;
        cfg.hog.patch_size = 16;
        cfg.seed = seed;
        const RegionKind kind = kinds[seed - 1];
        const auto set = detection::build_region_trainset(faces, kind, pipeline::region_assignment(kind), {});
        const auto sdm = regressors::sdm_train(set, cfg, jobs());
        const auto ert = regressors::ert_train(set, cfg, jobs());
        monotone = monotone && non_increasing(sdm.training_rmse, 1e-12) && non_increasing(ert.training_mse, 1e-15);
    }

    const Eigen::MatrixXd X = random_matrix(5, 5, gen);
    const Eigen::MatrixXd Y = random_matrix(5, 3, gen);
    const double lambda = 0.5;
    const Eigen::MatrixXd R = regressors::solve_ridge(X, Y, lambda);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(3, 5);
    const double lipschitz = 2.0 * ((X.transpose() * X).eigenvalues().real().maxCoeff() + lambda);
    for (int it = 0; it < 200000; ++it) {
        const Eigen::MatrixXd grad = -2.0 * (Y - X * G.transpose()).transpose() * X + 2.0 * lambda * G;
        G -= grad / lipschitz;
    }
    const double ridge_gap = (R - G).cwiseAbs().maxCoeff();

    const bool ok = reduction >= 0.99 && monotone && ridge_gap <= 1e-4;
    verdict(4, ok,
            "linear oracle stage-1 RMSE reduction " + fmt("%.4f", 100 * reduction) + "%, SDM/ERT training error " +
                (monotone ? "non-increasing" : "increased") + ", ridge vs gradient descent " + fmt("%.2e", ridge_gap));
}

// ---------------------------------------------------------------------------

struct Comparison {
    double mean_hr = 0;
    double mean_sd = 0;
    double mean_ert = 0;
    std::vector<double> avg_rank;  // hr, sd, ert
    double p_hr_sd = 1;
    double p_hr_ert = 1;
    double seconds = 0;
};

Comparison run_comparison(const fs::path& dir)
{
    const auto t0 = Clock::now();
    const auto manifest = synthgen::generate_corpus(300, {}, 42, dir / "corpus", jobs());
    const FoldPlan plan = make_fold_plan(manifest.entries.size(), 3, 100, 42);
    const auto images = detection::load_labeled_images(manifest, {}, nullptr, jobs());
    const regressors::TrainConfig cfg;

    std::vector<evaluation::FoldDetectors> models;
    for (DetectorKind kind : {DetectorKind::hr, DetectorKind::sd, DetectorKind::ert}) {
        evaluation::FoldDetectors fd;
        fd.kind = kind;
        for (const auto& split : plan.splits) {
            std::vector<detection::LabeledImage> train;
            for (std::size_t i : split.train) {
                train.push_back(images[i]);
            }
            fd.folds.push_back(pipeline::train_detector(train, cfg, kind, {}, {}, jobs()));
        }
        models.push_back(std::move(fd));
    }
    const auto records = evaluation::evaluate(models, images, plan, jobs());
    const auto ranks = evaluation::rank(records);
    std::vector<evaluation::NamedTest> tests;
    for (DetectorKind other : {DetectorKind::sd, DetectorKind::ert}) {
        evaluation::NamedTest t;
        t.name = "hr_vs_" + std::string(pipeline::kind_name(other));
        t.input = "ranks";
        t.result = evaluation::wilcoxon_signed_rank(evaluation::rank_column(ranks, DetectorKind::hr),
                                                    evaluation::rank_column(ranks, other));
        tests.push_back(t);
    }
    evaluation::ReportInput in;
    in.records = records;
    in.ranks = &ranks;
    in.tests = tests;
    evaluation::report(in, dir / "report");

    Comparison c;
    c.mean_hr = evaluation::mean_distance(records, DetectorKind::hr);
    c.mean_sd = evaluation::mean_distance(records, DetectorKind::sd);
    c.mean_ert = evaluation::mean_distance(records, DetectorKind::ert);
    c.avg_rank = ranks.average;
    c.p_hr_sd = tests[0].result.p_two_sided;
    c.p_hr_ert = tests[1].result.p_two_sided;
    c.seconds = seconds_since(t0);
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void end_to_end(const fs::path& root)
{
    const Comparison a = run_comparison(root / "run_a");
    const bool best_rank = a.avg_rank[0] < a.avg_rank[1] && a.avg_rank[0] < a.avg_rank[2];
    const bool ok = a.mean_hr < a.mean_sd && best_rank && a.mean_hr <= 0.05 && a.p_hr_sd < 0.01;
    verdict(5, ok,
            "mean error HR " + fmt("%.5f", a.mean_hr) + " SD " + fmt("%.5f", a.mean_sd) + " ERT " +
                fmt("%.5f", a.mean_ert) + ", average rank HR " + fmt("%.3f", a.avg_rank[0]) + " SD " +
                fmt("%.3f", a.avg_rank[1]) + " ERT " + fmt("%.3f", a.avg_rank[2]) + ", Wilcoxon HR-SD p " +
                fmt("%.3g", a.p_hr_sd) + " HR-ERT p " + fmt("%.3g", a.p_hr_ert) + ", " + fmt("%.0f", a.seconds) +
                " s");
}

void rerun_identical(const fs::path& root)
{
    if (!fs::exists(root / "run_a" / "report")) {
        run_comparison(root / "run_a");
    }
    run_comparison(root / "run_b");
    std::size_t files = 0;
    std::vector<std::string> differing;
    for (const auto& e : fs::directory_iterator(root / "run_a" / "report")) {
        const fs::path other = root / "run_b" / "report" / e.path().filename();
        ++files;
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
            differing.push_back(e.path().filename().string());
        }
    }
    for (const auto& e : fs::directory_iterator(root / "run_b" / "report")) {
        if (!fs::exists(root / "run_a" / "report" / e.path().filename())) {
            differing.push_back(e.path().filename().string());
        }
    }
    std::string detail = std::to_string(files) + " report files compared, " + std::to_string(differing.size()) +
                         " differ";
    for (const auto& d : differing) {
        detail += " " + d;
    }
    verdict(7, differing.empty() && files > 0, detail);
}

// ---------------------------------------------------------------------------

void dispersion_pipeline()
{
    const double sigma = 2.0;
    const int n_experts = 12;
    const std::size_t n_images = 100;
    std::vector<evaluation::ExpertImage> images;
    double expected = 0;
    // Deviation from the centroid of m noisy copies has per-axis variance
    // sigma^2 (1 - 1/m); its norm is Rayleigh distributed.
    const double rayleigh_mean = sigma * std::sqrt(1.0 - 1.0 / n_experts) * std::sqrt(std::numbers::pi / 2.0);
    for (std::size_t i = 0; i < n_images; ++i) {
        const Shape truth = synthgen::landmarks(synthgen::sample_params({}, derive_seed(6006, i)));
        const double inter_ex = distance(truth.at(LandmarkId::ex_l), truth.at(LandmarkId::ex_r));
        expected += rayleigh_mean / inter_ex / n_images;
        evaluation::ExpertImage img{std::to_string(i), {}};
        for (int e = 1; e <= n_experts; ++e) {
            Rng rng(derive_seed(derive_seed(6007, i), static_cast<std::uint64_t>(e)));
            Shape s;
            for (LandmarkId id : all_landmarks()) {
                const double dx = sigma * rng.normal();
                const double dy = sigma * rng.normal();
                s.set(id, truth.at(id) + Point2{dx, dy});
            }
            img.experts[e] = s;
        }
        images.push_back(std::move(img));
    }
    const auto r = evaluation::expert_dispersion(images);
    const double rel = std::abs(r.mean - expected) / expected;

    // Each landmark's deviations are scored against that landmark's own density grid.
    std::size_t inside = 0;
    std::size_t total = 0;
    double capture_min = 1;
    double capture_max = 0;
    double worst_mass = 0;
    for (LandmarkId id : all_landmarks()) {
        std::vector<Point2> dev;
        for (std::size_t i = 0; i < images.size(); ++i) {
            for (const auto& [e, s] : images[i].experts) {
                dev.push_back(s.at(id) - r.centroids[i].at(id));
            }
        }
        const auto k = evaluation::kde_summary(dev);
        const double f = evaluation::fraction_within(k, dev, k.level50);
        inside += static_cast<std::size_t>(std::lround(f * static_cast<double>(dev.size())));
        total += dev.size();
        capture_min = std::min(capture_min, f);
        capture_max = std::max(capture_max, f);
        worst_mass = std::max(worst_mass, std::abs(k.mass() - 1.0));
    }
    const double capture = static_cast<double>(inside) / static_cast<double>(total);
    const bool ok = rel <= 0.10 && std::abs(capture - 0.5) <= 0.05 && worst_mass <= 0.01;
    verdict(6, ok,
            "mean dispersion " + fmt("%.5f", r.mean) + " vs analytic " + fmt("%.5f", expected) + " (" +
                fmt("%.2f", 100 * rel) + "% off), KDE 50% regions capture " + fmt("%.3f", capture) + " of " +
                std::to_string(total) + " deviations (per landmark " + fmt("%.3f", capture_min) + ".." +
                fmt("%.3f", capture_max) + "), worst |mass - 1| " + fmt("%.2e", worst_mass));
}

} // namespace

int main(int argc, char** argv)
{
    const fs::path root = argc > 1 ? fs::path(argv[1])
                                   : fs::temp_directory_path() / ("cephalo_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(root);
    log_enabled() = false;

    const auto guarded = [](int id, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            verdict(id, false, std::string("threw: ") + e.what());
        }
    };
    guarded(1, metric_correctness);
    guarded(2, statistics_oracles);
    guarded(3, imaging_oracles);
    guarded(4, regression_engines);
    guarded(5, [&] { end_to_end(root); });
    guarded(6, dispersion_pipeline);
    guarded(7, [&] { rerun_identical(root); });

    if (argc <= 1) {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
