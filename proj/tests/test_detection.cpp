/*
 * cephalo: Region-specialized facial landmark detection
 * File: tests/test_detection.cpp
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

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace cephalo;
using namespace cephalo::detection;
using imaging::GrayImage;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One stump: bright upper half minus dark lower half of a 24x24 window.
CascadeModel half_contrast_cascade(double threshold)
{
    CascadeModel m;
    m.window_w = 24;
    m.window_h = 24;
    Stump s;
    s.feature = {{0, 0, 24, 12, 1.0}, {0, 12, 24, 12, -1.0}};
    s.threshold = threshold;
    s.left = 0.0;
    s.right = 1.0;
    m.stages.push_back({1.0, {s}});
    return m;
}

GrayImage image_with_pattern(int px, int py, std::mt19937& gen)
{
    GrayImage img(120, 100);
    std::uniform_int_distribution<int> noise(120, 136);
    for (auto& p : img.pixels()) {
        p = static_cast<std::uint8_t>(noise(gen));
    }
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 24; ++x) {
            img.at(px + x, py + y) = y < 12 ? 220 : 40;
        }
    }
    return img;
}

// Feature value by direct per-pixel summation.
double brute_feature(const GrayImage& img, const std::vector<HaarRect>& feature, int x, int y, double scale, int ww0,
                     int wh0)
{
    const int ww = scaled_extent(ww0, scale);
    const int wh = scaled_extent(wh0, scale);
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
    const double sd = std::max(std::sqrt(std::max(sq / n - mean * mean, 0.0)), kMinWindowStddev);
    double acc = 0;
    for (const auto& r : feature) {
        const PixelRect p = scale_rect(r, scale, ww0, wh0);
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

Box center_of(const Box& b) { return {b.x + b.w / 2, b.y + b.h / 2, 0, 0}; }

} // namespace

TEST(RegionBoxTest, EyesFractionsOfSquareFace)
{
    const RegionBox eyes = region_box({RegionKind::face, {0, 0, 200, 200}}, RegionKind::eyes, RegionFractions{});
    EXPECT_EQ(eyes.kind, RegionKind::eyes);
    EXPECT_EQ(eyes.box, (Box{0, 30, 200, 90}));
}

TEST(RegionBoxTest, IdentityFractionsReturnFaceBox)
{
    RegionFractions f;
    f.nose = {0, 1, 0, 1};
    EXPECT_EQ(region_box({RegionKind::face, {10, 20, 150, 170}}, RegionKind::nose, f).box,
              (Box{10, 20, 150, 170}));
}

TEST(RegionBoxTest, ZeroWidthAfterRoundingFails)
{
    RegionFractions f;
    f.mouth = {0.2, 0.3, 0.0, 1.0};
    EXPECT_THROW(region_box({RegionKind::face, {0, 0, 1, 10}}, RegionKind::mouth, f), Error);
}

TEST(RegionBoxTest, SubBoxesStayInsideFaceAndImage)
{
    std::mt19937 gen(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 500; ++trial) {
        const Box face{-20 + 200 * u(gen), -20 + 200 * u(gen), 5 + 300 * u(gen), 5 + 300 * u(gen)};
        RegionFractions f;
        for (Fraction* fr : {&f.eyes, &f.nose, &f.mouth}) {
            const double a = u(gen), b = u(gen), c = u(gen), d = u(gen);
            *fr = {std::min(a, b), std::max(a, b) + 1e-3, std::min(c, d), std::max(c, d) + 1e-3};
            fr->x1 = std::min(fr->x1, 1.0);
            fr->y1 = std::min(fr->y1, 1.0);
        }
        try {
            for (const auto& [kind, rb] : subdivide_face({RegionKind::face, face}, f, std::pair{250, 250})) {
                EXPECT_GE(rb.box.x, face.x);
                EXPECT_GE(rb.box.y, face.y);
                EXPECT_LE(rb.box.x + rb.box.w, face.x + face.w + 1e-9);
                EXPECT_LE(rb.box.y + rb.box.h, face.y + face.h + 1e-9);
                EXPECT_GE(rb.box.x, 0.0);
                EXPECT_LE(rb.box.x + rb.box.w, 250.0);
                EXPECT_GT(rb.box.w, 0.0);
                EXPECT_GT(rb.box.h, 0.0);
            }
        } catch (const Error&) {
            // degenerate rounding is allowed to fail
        }
    }
}

TEST(RegionFractionsTest, ValidationRejectsInvertedRanges)
{
    RegionFractions f;
    EXPECT_NO_THROW(f.validate());
    f.eyes = {0.5, 0.4, 0.0, 1.0};
    EXPECT_THROW(f.validate(), Error);
    f.eyes = {0.0, 1.2, 0.0, 1.0};
    EXPECT_THROW(f.validate(), Error);
}

TEST(Cascade, JsonRoundTripIncludingInfiniteThresholds)
{
    CascadeModel m = half_contrast_cascade(0.5);
    m.stages.push_back({-kInf, m.stages[0].stumps});
    const CascadeModel back = parse_cascade(format_cascade(m));
    ASSERT_EQ(back.stages.size(), 2u);
    EXPECT_EQ(back.stages[1].threshold, -kInf);
    EXPECT_EQ(back.stages[0].stumps[0].feature[1].weight, -1.0);
    EXPECT_EQ(format_cascade(back), format_cascade(m));
}

TEST(Cascade, InvalidDocumentsAreRejected)
{
    EXPECT_THROW(parse_cascade("{"), ParseError);
    EXPECT_THROW(parse_cascade(R"({"window":[24,24],"stages":[]})"), ParseError);
    EXPECT_THROW(parse_cascade(R"({"window":[24,24],"stages":[{"threshold":0,"stumps":[]}]})"), ParseError);
    EXPECT_THROW(
        parse_cascade(
            R"({"window":[24,24],"stages":[{"threshold":0,"stumps":[{"feature":[[20,0,10,5,1]],"threshold":0,"left":0,"right":1}]}]})"),
        ParseError);
}

TEST(Cascade, WindowEvaluationMatchesBruteForce)
{
    std::mt19937 gen(22);
    CascadeModel m;
    m.window_w = 20;
    m.window_h = 16;
    std::uniform_int_distribution<int> rx(0, 19);
    std::uniform_int_distribution<int> ry(0, 15);
    std::uniform_real_distribution<double> w(-2, 2);
    for (int s = 0; s < 3; ++s) {
        Stage stage;
        stage.threshold = w(gen);
        for (int k = 0; k < 4; ++k) {
            Stump stump;
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
    m.validate();
    for (int trial = 0; trial < 10; ++trial) {
        const GrayImage img = cephalo::testing::random_image(70, 60, gen);
        const CascadeScanner scanner(img);
        for (double scale : {1.0, 1.3, 2.2}) {
            const int ww = scaled_extent(20, scale);
            const int wh = scaled_extent(16, scale);
            for (int k = 0; k < 10; ++k) {
                const int x = static_cast<int>(gen() % (70 - ww + 1));
                const int y = static_cast<int>(gen() % (60 - wh + 1));
                const WindowResult r = scanner.evaluate(m, x, y, scale);
                bool passed = true;
                for (std::size_t s = 0; s < m.stages.size(); ++s) {
                    double sum = 0;
                    for (const auto& stump : m.stages[s].stumps) {
                        const double f = brute_feature(img, stump.feature, x, y, scale, 20, 16);
                        EXPECT_NEAR(scanner.feature_value(stump.feature, x, y, scale, 20, 16), f, 1e-6);
                        sum += f < stump.threshold ? stump.left : stump.right;
                    }
                    EXPECT_NEAR(r.stage_sums[s], sum, 1e-6);
                    passed = passed && sum >= m.stages[s].threshold;
                }
                EXPECT_EQ(r.passed, passed);
            }
        }
    }
}

TEST(DetectFace, AlwaysPassCascadeReturnsABoxInsideTheImage)
{
    std::mt19937 gen(23);
    CascadeModel m = half_contrast_cascade(0.0);
    m.stages[0].threshold = -kInf;
    const GrayImage img = cephalo::testing::random_image(60, 50, gen);
    const RegionBox face = detect_face(img, m, 1.25, 24);
    EXPECT_EQ(face.kind, RegionKind::face);
    EXPECT_GE(face.box.x, 0.0);
    EXPECT_GE(face.box.y, 0.0);
    EXPECT_LE(face.box.x + face.box.w, 60.0);
    EXPECT_LE(face.box.y + face.box.h, 50.0);
}

TEST(DetectFace, ImpossibleCascadeRaisesNoFace)
{
    std::mt19937 gen(24);
    CascadeModel m = half_contrast_cascade(0.0);
    m.stages[0].threshold = kInf;
    EXPECT_THROW(detect_face(cephalo::testing::random_image(60, 50, gen), m, 1.25, 24), NoFaceError);
}

TEST(DetectFace, BadScanParametersFail)
{
    const GrayImage img(60, 50, 1);
    EXPECT_THROW(detect_face(img, half_contrast_cascade(0.5), 1.0, 24), Error);
    EXPECT_THROW(detect_face(img, half_contrast_cascade(0.5), 1.2, 10), Error);
}

TEST(DetectFace, OneStumpCascadeFindsTheBrightDarkPattern)
{
    std::mt19937 gen(25);
    const int px = 53;
    const int py = 31;
    const GrayImage img = image_with_pattern(px, py, gen);
    const CascadeModel probe = half_contrast_cascade(0.0);

    // Brute force over all windows at unit scale.
    double best = -kInf;
    int bx = -1;
    int by = -1;
    for (int y = 0; y + 24 <= img.height(); ++y) {
        for (int x = 0; x + 24 <= img.width(); ++x) {
            const double f = brute_feature(img, probe.stages[0].stumps[0].feature, x, y, 1.0, 24, 24);
            if (f > best) {
                best = f;
                bx = x;
                by = y;
            }
        }
    }
    EXPECT_EQ(bx, px);
    EXPECT_EQ(by, py);

    const RegionBox face = detect_face(img, half_contrast_cascade(0.9 * best), 100.0, 24);
    const Box c = center_of(face.box);
    EXPECT_NEAR(c.x, px + 12, 2.0);
    EXPECT_NEAR(c.y, py + 12, 2.0);
}

TEST(DetectFace, TranslationMovesTheBox)
{
    std::mt19937 gen(26);
    const CascadeModel m = half_contrast_cascade(0.85);
    const RegionBox a = detect_face(image_with_pattern(30, 20, gen), m, 100.0, 24);
    for (auto [dx, dy] : {std::pair{7, 3}, std::pair{41, 50}, std::pair{-13, 11}}) {
        const RegionBox b = detect_face(image_with_pattern(30 + dx, 20 + dy, gen), m, 100.0, 24);
        EXPECT_NEAR(b.box.x - a.box.x, dx, 1.0);
        EXPECT_NEAR(b.box.y - a.box.y, dy, 1.0);
        EXPECT_NEAR(b.box.w, a.box.w, 1.0);
    }
}

TEST(Iou, KnownValues)
{
    EXPECT_DOUBLE_EQ(intersection_over_union({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
    EXPECT_DOUBLE_EQ(intersection_over_union({0, 0, 10, 10}, {5, 0, 10, 10}), 50.0 / 150.0);
    EXPECT_DOUBLE_EQ(intersection_over_union({0, 0, 10, 10}, {20, 20, 5, 5}), 0.0);
}

TEST(RegionCoordinates, CenterAndCorner)
{
    const Box r{10, 20, 40, 80};
    EXPECT_EQ(to_region(r, {30, 60}), (Point2{0.5, 0.5}));
    EXPECT_EQ(to_region(r, {10, 20}), (Point2{0.0, 0.0}));
    const Point2 p = from_region(r, to_region(r, {17.3, 91.1}));
    EXPECT_NEAR(p.x, 17.3, 1e-12);
    EXPECT_NEAR(p.y, 91.1, 1e-12);
}

namespace {

std::vector<LabeledImage> labeled_faces(std::size_t n, std::mt19937& gen)
{
    std::uniform_real_distribution<double> u(0, 1);
    auto img = std::make_shared<const GrayImage>(400, 400, 100);
    std::vector<LabeledImage> out;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledImage li;
        li.id = std::to_string(i);
        li.image = img;
        const Box face{20 + 40 * u(gen), 30 + 40 * u(gen), 150 + 100 * u(gen), 180 + 100 * u(gen)};
        li.face = face;
        li.source = BoxSource::manifest;
        for (LandmarkId id : all_landmarks()) {
            li.truth.set(id, {face.x + face.w * u(gen), face.y + face.h * u(gen)});
        }
        out.push_back(li);
    }
    return out;
}

} // namespace

TEST(RegionTrainSetTest, NormalizedTruthMatchesAffineRecomputation)
{
    std::mt19937 gen(27);
    const auto images = labeled_faces(10, gen);
    const std::vector<LandmarkId> ids = {LandmarkId::sn, LandmarkId::al_l, LandmarkId::al_r};
    RegionFractions f;
    f.nose = {0, 1, 0, 1};
    const RegionTrainSet set = build_region_trainset(images, RegionKind::nose, ids, f);
    ASSERT_EQ(set.samples.size(), 10u);
    EXPECT_EQ(set.excluded, 0u);
    for (const auto& s : set.samples) {
        const LabeledImage& li = images[s.source];
        // identity fractions: integer pixels inside the face box
        const double x0 = std::ceil(li.face->x);
        const double y0 = std::ceil(li.face->y);
        const double w = std::floor(li.face->x + li.face->w) - x0;
        const double h = std::floor(li.face->y + li.face->h) - y0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const Point2 p = li.truth.at(ids[k]);
            EXPECT_NEAR(s.truth[k].x, (p.x - s.region.x) / s.region.w, 1e-12);
            EXPECT_NEAR(s.truth[k].y, (p.y - s.region.y) / s.region.h, 1e-12);
            EXPECT_EQ(s.region.x, x0);
            EXPECT_EQ(s.region.y, y0);
            EXPECT_EQ(s.region.w, w);
            EXPECT_EQ(s.region.h, h);
        }
    }
}

TEST(RegionTrainSetTest, ExcludesMissingBoxesAndFarLandmarks)
{
    std::mt19937 gen(28);
    auto images = labeled_faces(6, gen);
    images[1].face.reset();
    images[1].source = BoxSource::none;
    images[2].truth.set(LandmarkId::sn, {images[2].face->x + 3 * images[2].face->w, images[2].face->y});
    images[3].truth.erase(LandmarkId::al_l);
    const std::vector<LandmarkId> ids = {LandmarkId::sn, LandmarkId::al_l, LandmarkId::al_r};
    RegionFractions f;
    f.nose = {0, 1, 0, 1};
    const RegionTrainSet set = build_region_trainset(images, RegionKind::nose, ids, f);
    EXPECT_EQ(set.excluded, 3u);
    EXPECT_EQ(set.samples.size(), 3u);
    for (const auto& s : set.samples) {
        EXPECT_NE(s.source, 1u);
        EXPECT_NE(s.source, 2u);
        EXPECT_NE(s.source, 3u);
    }
    images.resize(2);
    images[0].face.reset();
    EXPECT_THROW(build_region_trainset(std::span(images).subspan(0, 2), RegionKind::nose, ids, f), Error);
}

TEST(LoadLabeled, ManifestBoxWinsAndCascadeFillsGaps)
{
    cephalo::testing::TempDir dir("labeled");
    std::mt19937 gen(29);
    const GrayImage img = image_with_pattern(40, 30, gen);
    imaging::save_pgm(img, dir / "a.pgm");
    Shape s;
    s.set(LandmarkId::sn, {50, 40});
    save_annotation(s, dir / "a.txt");
    DatasetManifest m;
    m.base_dir = dir.path();
    m.entries.push_back({"a.pgm", "a.txt", Box{1, 2, 50, 60}, "", "", std::nullopt});
    m.entries.push_back({"a.pgm", "a.txt", std::nullopt, "", "", std::nullopt});

    CascadeOptions cascade;
    cascade.model = half_contrast_cascade(0.5);
    cascade.scale_step = 100.0;
    const auto loaded = load_labeled_images(m, {}, &cascade);
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].source, BoxSource::manifest);
    EXPECT_EQ(*loaded[0].face, (Box{1, 2, 50, 60}));
    EXPECT_EQ(loaded[1].source, BoxSource::cascade);
    EXPECT_EQ(*loaded[0].image, imaging::preprocess(img));

    cascade.model.stages[0].threshold = kInf;
    const auto missed = load_labeled_images(m, {}, &cascade);
    EXPECT_FALSE(missed[1].face.has_value());
    EXPECT_THROW(load_labeled_images(m, {}, nullptr), Error);
}
