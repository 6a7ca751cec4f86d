/*
 * cephalo: Region-specialized facial landmark detection
 * File: tests/test_synthgen.cpp
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
#include "cephalo/synthgen.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cephalo;
using namespace cephalo::synthgen;

namespace {

// Landmarks re-derived from the documented face geometry.
Shape reference_landmarks(const FaceParams& p)
{
    const double cx = p.center_x;
    const double eye_y = p.center_y + p.eye_dy;
    const double forehead = eye_y - (p.center_y - p.upper_height);
    const double left_eye = cx - p.eye_offset_l;
    const double right_eye = cx + p.eye_offset_r;
    const double nose_base = eye_y + p.nose_length;
    const double mouth_y = p.center_y + p.mouth_dy;
    const double t = (mouth_y - p.center_y) / p.lower_height;
    const double jaw = p.half_width * std::pow(1.0 - std::pow(t, p.jaw_exponent), 1.0 / p.jaw_exponent);

    Shape s;
    s.set(LandmarkId::g_pt, {cx, eye_y - 0.18 * forehead});
    s.set(LandmarkId::n_pt, {cx, eye_y - 0.09 * forehead});
    s.set(LandmarkId::m, {cx, eye_y});
    s.set(LandmarkId::sn, {cx, nose_base});
    s.set(LandmarkId::ls, {cx, mouth_y - p.upper_lip});
    s.set(LandmarkId::sto, {cx, mouth_y});
    s.set(LandmarkId::li, {cx, mouth_y + p.lower_lip});
    s.set(LandmarkId::gn, {cx, p.center_y + p.lower_height});
    s.set(LandmarkId::ex_l, {left_eye - p.eye_rx, eye_y});
    s.set(LandmarkId::en_l, {left_eye + p.eye_rx, eye_y});
    s.set(LandmarkId::en_r, {right_eye - p.eye_rx, eye_y});
    s.set(LandmarkId::ex_r, {right_eye + p.eye_rx, eye_y});
    for (auto [pu, il, im, center, outward] :
         {std::tuple{LandmarkId::pu_l, LandmarkId::il_l, LandmarkId::im_l, left_eye, -1.0},
          std::tuple{LandmarkId::pu_r, LandmarkId::il_r, LandmarkId::im_r, right_eye, 1.0}}) {
        const double x = center + p.gaze;
        s.set(pu, {x, eye_y});
        s.set(il, {x + outward * p.iris_radius, eye_y});
        s.set(im, {x - outward * p.iris_radius, eye_y});
    }
    s.set(LandmarkId::zy_l, {cx - p.half_width, p.center_y});
    s.set(LandmarkId::zy_r, {cx + p.half_width, p.center_y});
    const double wing_y = nose_base - 0.22 * p.nose_width;
    s.set(LandmarkId::al_l, {cx - p.nose_width / 2, wing_y});
    s.set(LandmarkId::al_r, {cx + p.nose_width / 2, wing_y});
    s.set(LandmarkId::go_l, {cx - jaw, mouth_y});
    s.set(LandmarkId::go_r, {cx + jaw, mouth_y});
    s.set(LandmarkId::ch_l, {cx - p.mouth_width / 2, mouth_y});
    s.set(LandmarkId::ch_r, {cx + p.mouth_width / 2, mouth_y});
    s.set(LandmarkId::cph_l, {cx - p.mouth_width / 4, mouth_y - 0.75 * p.upper_lip});
    s.set(LandmarkId::cph_r, {cx + p.mouth_width / 4, mouth_y - 0.75 * p.upper_lip});
    return s;
}

FaceDistribution no_jitter()
{
    FaceDistribution d;
    for (Range* r : {&d.center_x, &d.center_y, &d.scale, &d.half_width, &d.upper_height, &d.lower_height,
                     &d.jaw_exponent, &d.eye_dy, &d.eye_offset, &d.eye_asymmetry, &d.eye_rx, &d.eye_ry,
                     &d.iris_radius, &d.pupil_radius, &d.gaze, &d.brow_thickness, &d.nose_length, &d.nose_width,
                     &d.mouth_dy, &d.mouth_width, &d.upper_lip, &d.lower_lip, &d.shade_offset, &d.noise_sigma}) {
        r->jitter = 0.0;
    }
    return d;
}

} // namespace

TEST(SampleParams, DeterministicPerSeed)
{
    EXPECT_EQ(sample_params(FaceDistribution{}, 3), sample_params(FaceDistribution{}, 3));
    EXPECT_NE(sample_params(FaceDistribution{}, 3), sample_params(FaceDistribution{}, 4));
}

TEST(SampleParams, ZeroJitterGivesTheMeans)
{
    const FaceDistribution d = no_jitter();
    const FaceParams p = sample_params(d, 11);
    const FaceParams defaults;
    EXPECT_EQ(p.center_x, d.center_x.mean);
    EXPECT_EQ(p.half_width, d.half_width.mean);
    EXPECT_EQ(p.jaw_exponent, d.jaw_exponent.mean);
    EXPECT_EQ(p.eye_offset_l, d.eye_offset.mean);
    EXPECT_EQ(p.eye_offset_r, d.eye_offset.mean);
    EXPECT_EQ(p.gaze, 0.0);
    EXPECT_EQ(p.mouth_dy, d.mouth_dy.mean);
    EXPECT_EQ(p.lower_lip, d.lower_lip.mean);
    EXPECT_EQ(p.skin, defaults.skin);
    EXPECT_EQ(p.noise_sigma, d.noise_sigma.mean);
}

TEST(SampleParams, InfeasibleRangesFail)
{
    FaceDistribution d = no_jitter();
    d.eye_rx.mean = 200.0;  // eye wider than the face
    EXPECT_THROW(sample_params(d, 1), Error);
}

TEST(SampleParams, SampledFacesSatisfyTheirInvariants)
{
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const FaceParams p = sample_params(FaceDistribution{}, seed);
        EXPECT_NO_THROW(p.validate());
        EXPECT_LE(std::abs(p.eye_offset_l - p.eye_offset_r) / std::min(p.eye_offset_l, p.eye_offset_r), 0.1);
        const Box b = face_box(p);
        EXPECT_GT(b.x, 0.0);
        EXPECT_GT(b.y, 0.0);
        EXPECT_LT(b.x + b.w, p.width);
        EXPECT_LT(b.y + b.h, p.height);
    }
}

TEST(Render, SymmetricParamsGiveMirrorSymmetricTruth)
{
    const FaceParams p;
    const Shape s = render(p).truth;
    for (LandmarkId id : all_landmarks()) {
        const Point2 a = s.at(id);
        const Point2 b = s.at(mirror(id));
        EXPECT_NEAR(a.x - p.center_x, p.center_x - b.x, 1e-12) << landmark_name(id);
        EXPECT_EQ(a.y, b.y);
    }
}

TEST(Render, PupilIsTheIrisCenter)
{
    FaceParams p;
    p.gaze = 3.0;
    const Shape s = render(p).truth;
    EXPECT_EQ(s.at(LandmarkId::pu_l).x, p.center_x - p.eye_offset_l + 3.0);
    EXPECT_EQ(s.at(LandmarkId::pu_l).x, 0.5 * (s.at(LandmarkId::il_l).x + s.at(LandmarkId::im_l).x));
    EXPECT_EQ(s.at(LandmarkId::pu_r).y, p.center_y + p.eye_dy);
}

TEST(Render, TruthMatchesIndependentGeometry)
{
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const FaceParams p = sample_params(FaceDistribution{}, seed);
        const Shape got = landmarks(p);
        const Shape want = reference_landmarks(p);
        ASSERT_TRUE(got.complete());
        for (LandmarkId id : all_landmarks()) {
            EXPECT_NEAR(got.at(id).x, want.at(id).x, 1e-9) << landmark_name(id);
            EXPECT_NEAR(got.at(id).y, want.at(id).y, 1e-9) << landmark_name(id);
        }
    }
}

TEST(Render, FaceBoxIsTheOutlineBox)
{
    const FaceParams p = sample_params(FaceDistribution{}, 9);
    const SyntheticSample s = render(p);
    EXPECT_EQ(s.face_box, (Box{p.center_x - p.half_width, p.center_y - p.upper_height, 2 * p.half_width,
                               p.upper_height + p.lower_height}));
    EXPECT_EQ(s.face_box.y + s.face_box.h, s.truth.at(LandmarkId::gn).y);
    EXPECT_EQ(s.face_box.x, s.truth.at(LandmarkId::zy_l).x);
    EXPECT_EQ(s.image.width(), 480);
    EXPECT_EQ(s.image.height(), 640);
}

TEST(Render, LandmarkNeighborhoodsCarryGradientEnergy)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SyntheticSample s = render(sample_params(FaceDistribution{}, seed));
        for (LandmarkId id : all_landmarks()) {
            const int cx = static_cast<int>(std::lround(s.truth.at(id).x));
            const int cy = static_cast<int>(std::lround(s.truth.at(id).y));
            double energy = 0;
            for (int y = cy - 8; y < cy + 8; ++y) {
                for (int x = cx - 8; x < cx + 8; ++x) {
                    const double gx = s.image.clamped(x + 1, y) - s.image.clamped(x - 1, y);
                    const double gy = s.image.clamped(x, y + 1) - s.image.clamped(x, y - 1);
                    energy += gx * gx + gy * gy;
                }
            }
            EXPECT_GT(energy, 0.0) << landmark_name(id);
        }
    }
}

TEST(Render, SameParamsRenderIdentically)
{
    const FaceParams p = sample_params(FaceDistribution{}, 21);
    EXPECT_EQ(render(p).image, render(p).image);
}

TEST(Render, InterExocanthionDistanceStaysInRange)
{
    const FaceDistribution d;
    const double lo = (d.scale.mean - d.scale.jitter) *
                      (2 * (d.eye_offset.mean - d.eye_offset.jitter) + 2 * (d.eye_rx.mean - d.eye_rx.jitter));
    const double hi = (d.scale.mean + d.scale.jitter) *
                      (2 * (d.eye_offset.mean + d.eye_offset.jitter) + 2 * (d.eye_rx.mean + d.eye_rx.jitter));
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const Shape s = landmarks(sample_params(d, seed));
        const double ex = distance(s.at(LandmarkId::ex_l), s.at(LandmarkId::ex_r));
        EXPECT_GE(ex, lo - 1e-9);
        EXPECT_LE(ex, hi + 1e-9);
    }
}

TEST(ParamsJson, RoundTrip)
{
    const FaceParams p = sample_params(FaceDistribution{}, 5);
    EXPECT_EQ(face_params_from_json(to_json(p)), p);
}

TEST(Corpus, SingleSampleManifestLoads)
{
    cephalo::testing::TempDir dir("corpus1");
    generate_corpus(1, FaceDistribution{}, 42, dir.path());
    const DatasetManifest m = load_manifest(dir / "manifest.json");
    ASSERT_EQ(m.entries.size(), 1u);
    ASSERT_TRUE(m.entries[0].face_box.has_value());
    EXPECT_TRUE(load_annotation(m.resolve(m.entries[0].annotation)).complete());
    EXPECT_EQ(imaging::load_image(m.resolve(m.entries[0].image)).width(), 480);
}

TEST(Corpus, StoredParamsReproduceStoredAnnotations)
{
    cephalo::testing::TempDir dir("corpus_params");
    const DatasetManifest m = generate_corpus(6, FaceDistribution{}, 8, dir.path(), 2);
    ASSERT_EQ(m.entries.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "params/%04zu.json", i);
        const FaceParams p = face_params_from_json(nlohmann::json::parse(read_text_file(dir / name)));
        const Shape stored = load_annotation(m.resolve(m.entries[i].annotation));
        const Shape derived = reference_landmarks(p);
        for (LandmarkId id : all_landmarks()) {
            EXPECT_NEAR(stored.at(id).x, derived.at(id).x, 1e-9);
            EXPECT_NEAR(stored.at(id).y, derived.at(id).y, 1e-9);
        }
    }
}

TEST(Corpus, SameSeedGivesIdenticalFiles)
{
    cephalo::testing::TempDir a("corpus_a");
    cephalo::testing::TempDir b("corpus_b");
    generate_corpus(4, FaceDistribution{}, 77, a.path(), 1);
    generate_corpus(4, FaceDistribution{}, 77, b.path(), 3);
    for (const char* f : {"annotations/0000.txt", "annotations/0003.txt", "images/0002.pgm", "manifest.json"}) {
        EXPECT_EQ(read_text_file(a / f), read_text_file(b / f)) << f;
    }
}

TEST(Corpus, ThreeHundredSamples)
{
    cephalo::testing::TempDir dir("corpus300");
    const DatasetManifest m = generate_corpus(300, FaceDistribution{}, 42, dir.path(), 4);
    EXPECT_EQ(m.entries.size(), 300u);
    std::size_t images = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "images")) {
        images += e.path().extension() == ".pgm" ? 1 : 0;
    }
    EXPECT_EQ(images, 300u);
    const DatasetManifest back = load_manifest(dir / "manifest.json");
    EXPECT_EQ(back.entries.size(), 300u);
    EXPECT_EQ(back.entries[299].annotation, m.entries[299].annotation);
    EXPECT_TRUE(load_annotation(back.resolve(back.entries[150].annotation)).complete());
}

TEST(Corpus, UnwritableDirectoryFails)
{
    cephalo::testing::TempDir dir("corpus_bad");
    write_text_file(dir / "file", "x");
    EXPECT_THROW(generate_corpus(1, FaceDistribution{}, 1, dir / "file" / "sub"), Error);
}
