/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/synthgen.cpp
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

#include "cephalo/error.hpp"
#include "cephalo/parallel.hpp"
#include "cephalo/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

namespace cephalo::synthgen {

namespace {

constexpr std::pair<const char*, double FaceParams::*> kRealFields[] = {
    {"center_x", &FaceParams::center_x},
    {"center_y", &FaceParams::center_y},
    {"half_width", &FaceParams::half_width},
    {"upper_height", &FaceParams::upper_height},
    {"lower_height", &FaceParams::lower_height},
    {"jaw_exponent", &FaceParams::jaw_exponent},
    {"eye_dy", &FaceParams::eye_dy},
    {"eye_offset_l", &FaceParams::eye_offset_l},
    {"eye_offset_r", &FaceParams::eye_offset_r},
    {"eye_rx", &FaceParams::eye_rx},
    {"eye_ry", &FaceParams::eye_ry},
    {"iris_radius", &FaceParams::iris_radius},
    {"pupil_radius", &FaceParams::pupil_radius},
    {"gaze", &FaceParams::gaze},
    {"brow_thickness", &FaceParams::brow_thickness},
    {"nose_length", &FaceParams::nose_length},
    {"nose_width", &FaceParams::nose_width},
    {"mouth_dy", &FaceParams::mouth_dy},
    {"mouth_width", &FaceParams::mouth_width},
    {"upper_lip", &FaceParams::upper_lip},
    {"lower_lip", &FaceParams::lower_lip},
    {"background", &FaceParams::background},
    {"skin", &FaceParams::skin},
    {"brow", &FaceParams::brow},
    {"sclera", &FaceParams::sclera},
    {"iris", &FaceParams::iris},
    {"pupil", &FaceParams::pupil},
    {"nose", &FaceParams::nose},
    {"nostril", &FaceParams::nostril},
    {"lip", &FaceParams::lip},
    {"noise_sigma", &FaceParams::noise_sigma},
};

// Derived layout shared by validation, landmarks and rendering.
struct Layout {
    double top;
    double eye_y;
    double glabella_y;
    double nasion_y;
    double eye_l;  // eye center x, smaller image x
    double eye_r;
    double nose_base;
    double wing_height;
    double mouth_y;
};

Layout layout(const FaceParams& p)
{
    Layout l{};
    l.top = p.center_y - p.upper_height;
    l.eye_y = p.center_y + p.eye_dy;
    const double d = l.eye_y - l.top;
    l.glabella_y = l.eye_y - 0.18 * d;
    l.nasion_y = l.eye_y - 0.09 * d;
    l.eye_l = p.center_x - p.eye_offset_l;
    l.eye_r = p.center_x + p.eye_offset_r;
    l.nose_base = l.eye_y + p.nose_length;
    l.wing_height = 0.22 * p.nose_width;
    l.mouth_y = p.center_y + p.mouth_dy;
    return l;
}

/// Half-width of the face outline at height y (0 outside).
double contour_half_width(const FaceParams& p, double y)
{
    if (y <= p.center_y) {
        const double t = (y - p.center_y) / p.upper_height;
        return t <= -1.0 ? 0.0 : p.half_width * std::sqrt(1.0 - t * t);
    }
    const double t = (y - p.center_y) / p.lower_height;
    if (t >= 1.0) {
        return 0.0;
    }
    return p.half_width * std::pow(1.0 - std::pow(t, p.jaw_exponent), 1.0 / p.jaw_exponent);
}

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry)
{
    const double u = (x - cx) / rx;
    const double v = (y - cy) / ry;
    return u * u + v * v <= 1.0;
}

double draw(Rng& rng, const Range& r)
{
    return r.jitter > 0.0 ? rng.uniform(r.mean - r.jitter, r.mean + r.jitter) : r.mean;
}

class Canvas {
public:
    Canvas(int w, int h, double value) : w_(w), h_(h), v_(static_cast<std::size_t>(w) * h, value) {}

    template <typename Inside>
    void fill(double x0, double y0, double x1, double y1, double shade, Inside inside)
    {
        const int ix0 = std::max(0, static_cast<int>(std::floor(x0)) - 1);
        const int iy0 = std::max(0, static_cast<int>(std::floor(y0)) - 1);
        const int ix1 = std::min(w_ - 1, static_cast<int>(std::ceil(x1)) + 1);
        const int iy1 = std::min(h_ - 1, static_cast<int>(std::ceil(y1)) + 1);
        for (int y = iy0; y <= iy1; ++y) {
            for (int x = ix0; x <= ix1; ++x) {
                int hits = 0;
                for (int sy = 0; sy < 4; ++sy) {
                    for (int sx = 0; sx < 4; ++sx) {
                        hits += inside(x + (sx + 0.5) / 4.0 - 0.5, y + (sy + 0.5) / 4.0 - 0.5) ? 1 : 0;
                    }
                }
                if (hits > 0) {
                    const double c = hits / 16.0;
                    double& v = v_[static_cast<std::size_t>(y) * w_ + x];
                    v = (1.0 - c) * v + c * shade;
                }
            }
        }
    }

    imaging::GrayImage finish(double sigma, std::uint64_t seed) const
    {
        imaging::GrayImage img(w_, h_);
        Rng rng(seed);
        for (int y = 0; y < h_; ++y) {
            for (int x = 0; x < w_; ++x) {
                double v = v_[static_cast<std::size_t>(y) * w_ + x];
                if (sigma > 0.0) {
                    v += sigma * rng.normal();
                }
                img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
        return img;
    }

private:
    int w_;
    int h_;
    std::vector<double> v_;
};

} // namespace

void FaceParams::validate() const
{
    const auto fail = [](const std::string& what) { throw Error("invalid face parameters: " + what); };
    if (width < 16 || height < 16) {
        fail("canvas too small");
    }
    for (const auto& [name, field] : kRealFields) {
        if (!std::isfinite(this->*field)) {
            fail(std::string(name) + " is not finite");
        }
    }
    for (double v : {half_width, upper_height, lower_height, eye_offset_l, eye_offset_r, eye_rx, eye_ry, iris_radius,
                     pupil_radius, brow_thickness, nose_length, nose_width, mouth_width, upper_lip, lower_lip}) {
        if (!(v > 0.0)) {
            fail("lengths must be positive");
        }
    }
    if (jaw_exponent < 1.5 || jaw_exponent > 4.0) {
        fail("jaw_exponent outside [1.5, 4]");
    }
    for (double v : {background, skin, brow, sclera, iris, pupil, nose, nostril, lip}) {
        if (v < 0.0 || v > 255.0) {
            fail("shades must lie in [0, 255]");
        }
    }
    if (noise_sigma < 0.0) {
        fail("noise_sigma is negative");
    }
    const Box b = face_box(*this);
    if (b.x < 2.0 || b.y < 2.0 || b.x + b.w > width - 2.0 || b.y + b.h > height - 2.0) {
        fail("face leaves the canvas");
    }
    const double mean_offset = 0.5 * (eye_offset_l + eye_offset_r);
    if (std::abs(eye_offset_l - eye_offset_r) > 0.1 * mean_offset) {
        fail("eye asymmetry above 10%");
    }
    const Layout l = layout(*this);
    if (eye_dy >= 0.0 || -eye_dy >= upper_height) {
        fail("eye line must lie in the upper half of the face");
    }
    const double eye_room = contour_half_width(*this, l.eye_y - eye_ry);
    if (std::max(eye_offset_l, eye_offset_r) + eye_rx > 0.9 * eye_room) {
        fail("eyes leave the face");
    }
    if (std::min(eye_offset_l, eye_offset_r) - eye_rx < 0.35 * nose_width) {
        fail("eyes overlap the nose");
    }
    if (pupil_radius >= iris_radius || std::abs(gaze) + iris_radius >= eye_rx) {
        fail("iris or pupil does not fit the eye");
    }
    if (l.glabella_y + 2.0 * brow_thickness > l.eye_y - eye_ry - 2.0) {
        fail("brows overlap the eyes");
    }
    if (l.nose_base - 2.0 * l.wing_height < l.eye_y + eye_ry) {
        fail("nose wings reach the eye line");
    }
    if (mouth_dy <= 0.0 || l.nose_base + 4.0 > l.mouth_y - upper_lip) {
        fail("mouth must lie below the nose and the face center");
    }
    if (l.mouth_y + lower_lip + 6.0 > center_y + lower_height) {
        fail("mouth reaches the chin");
    }
    if (0.5 * mouth_width > 0.8 * contour_half_width(*this, l.mouth_y + lower_lip)) {
        fail("mouth wider than the jaw");
    }
    if (0.5 * nose_width > 0.5 * half_width) {
        fail("nose wider than half the face");
    }
}

Box face_box(const FaceParams& p)
{
    return {p.center_x - p.half_width, p.center_y - p.upper_height, 2.0 * p.half_width,
            p.upper_height + p.lower_height};
}

Shape landmarks(const FaceParams& p)
{
    const Layout l = layout(p);
    const double cx = p.center_x;
    const double half_mouth = 0.5 * p.mouth_width;
    const double go = contour_half_width(p, l.mouth_y);
    const double pu_l = l.eye_l + p.gaze;
    const double pu_r = l.eye_r + p.gaze;
    Shape s;
    s.set(LandmarkId::g_pt, {cx, l.glabella_y});
    s.set(LandmarkId::n_pt, {cx, l.nasion_y});
    s.set(LandmarkId::m, {cx, l.eye_y});
    s.set(LandmarkId::sn, {cx, l.nose_base});
    s.set(LandmarkId::ls, {cx, l.mouth_y - p.upper_lip});
    s.set(LandmarkId::sto, {cx, l.mouth_y});
    s.set(LandmarkId::li, {cx, l.mouth_y + p.lower_lip});
    s.set(LandmarkId::gn, {cx, p.center_y + p.lower_height});
    s.set(LandmarkId::en_l, {l.eye_l + p.eye_rx, l.eye_y});
    s.set(LandmarkId::en_r, {l.eye_r - p.eye_rx, l.eye_y});
    s.set(LandmarkId::ex_l, {l.eye_l - p.eye_rx, l.eye_y});
    s.set(LandmarkId::ex_r, {l.eye_r + p.eye_rx, l.eye_y});
    s.set(LandmarkId::il_l, {pu_l - p.iris_radius, l.eye_y});
    s.set(LandmarkId::il_r, {pu_r + p.iris_radius, l.eye_y});
    s.set(LandmarkId::im_l, {pu_l + p.iris_radius, l.eye_y});
    s.set(LandmarkId::im_r, {pu_r - p.iris_radius, l.eye_y});
    s.set(LandmarkId::pu_l, {pu_l, l.eye_y});
    s.set(LandmarkId::pu_r, {pu_r, l.eye_y});
    s.set(LandmarkId::zy_l, {cx - p.half_width, p.center_y});
    s.set(LandmarkId::zy_r, {cx + p.half_width, p.center_y});
    s.set(LandmarkId::al_l, {cx - 0.5 * p.nose_width, l.nose_base - l.wing_height});
    s.set(LandmarkId::al_r, {cx + 0.5 * p.nose_width, l.nose_base - l.wing_height});
    s.set(LandmarkId::go_l, {cx - go, l.mouth_y});
    s.set(LandmarkId::go_r, {cx + go, l.mouth_y});
    s.set(LandmarkId::ch_l, {cx - half_mouth, l.mouth_y});
    s.set(LandmarkId::ch_r, {cx + half_mouth, l.mouth_y});
    s.set(LandmarkId::cph_l, {cx - 0.5 * half_mouth, l.mouth_y - 0.75 * p.upper_lip});
    s.set(LandmarkId::cph_r, {cx + 0.5 * half_mouth, l.mouth_y - 0.75 * p.upper_lip});
    return s;
}

FaceParams sample_params(const FaceDistribution& dist, std::uint64_t seed)
{
    Rng rng(seed);
    std::string last;
    for (int attempt = 0; attempt < 100; ++attempt) {
        FaceParams p;
        p.width = dist.width;
        p.height = dist.height;
        p.center_x = draw(rng, dist.center_x);
        p.center_y = draw(rng, dist.center_y);
        const double scale = draw(rng, dist.scale);
        const auto length = [&](const Range& r) { return scale * draw(rng, r); };
        p.half_width = length(dist.half_width);
        p.upper_height = length(dist.upper_height);
        p.lower_height = length(dist.lower_height);
        p.jaw_exponent = draw(rng, dist.jaw_exponent);
        p.eye_dy = length(dist.eye_dy);
        const double offset = length(dist.eye_offset);
        const double asym = draw(rng, dist.eye_asymmetry);
        p.eye_offset_l = offset * (1.0 - 0.5 * asym);
        p.eye_offset_r = offset * (1.0 + 0.5 * asym);
        p.eye_rx = length(dist.eye_rx);
        p.eye_ry = length(dist.eye_ry);
        p.iris_radius = length(dist.iris_radius);
        p.pupil_radius = length(dist.pupil_radius);
        p.gaze = length(dist.gaze);
        p.brow_thickness = length(dist.brow_thickness);
        p.nose_length = length(dist.nose_length);
        p.nose_width = length(dist.nose_width);
        p.mouth_dy = length(dist.mouth_dy);
        p.mouth_width = length(dist.mouth_width);
        p.upper_lip = length(dist.upper_lip);
        p.lower_lip = length(dist.lower_lip);
        const double shade = draw(rng, dist.shade_offset);
        for (double FaceParams::*field : {&FaceParams::background, &FaceParams::skin, &FaceParams::brow,
                                          &FaceParams::sclera, &FaceParams::iris, &FaceParams::pupil,
                                          &FaceParams::nose, &FaceParams::nostril, &FaceParams::lip}) {
            p.*field = std::clamp(p.*field + shade, 0.0, 255.0);
        }
        p.noise_sigma = draw(rng, dist.noise_sigma);
        p.seed = rng.next();
        try {
            p.validate();
            return p;
        } catch (const Error& e) {
            last = e.what();
        }
    }
    throw Error("face distribution is infeasible after 100 attempts (last: " + last + ")");
}

SyntheticSample render(const FaceParams& p)
{
    p.validate();
    const Layout l = layout(p);
    const double cx = p.center_x;
    Canvas canvas(p.width, p.height, p.background);

    const Box fb = face_box(p);
    canvas.fill(fb.x, fb.y, fb.x + fb.w, fb.y + fb.h, p.skin, [&](double x, double y) {
        return std::abs(x - cx) <= contour_half_width(p, y);
    });

    for (double ex : {l.eye_l, l.eye_r}) {
        const double rx = 1.2 * p.eye_rx;
        const double ry = p.brow_thickness;
        const double by = l.glabella_y + ry;
        canvas.fill(ex - rx, by - ry, ex + rx, by + ry, p.brow,
                    [&](double x, double y) { return in_ellipse(x, y, ex, by, rx, ry); });
    }

    for (double ex : {l.eye_l, l.eye_r}) {
        const double ey = l.eye_y;
        const auto in_eye = [&](double x, double y) { return in_ellipse(x, y, ex, ey, p.eye_rx, p.eye_ry); };
        canvas.fill(ex - p.eye_rx, ey - p.eye_ry, ex + p.eye_rx, ey + p.eye_ry, p.sclera, in_eye);
        const double px = ex + p.gaze;
        const double ir = p.iris_radius;
        canvas.fill(px - ir, ey - ir, px + ir, ey + ir, p.iris, [&](double x, double y) {
            return in_eye(x, y) && in_ellipse(x, y, px, ey, ir, ir);
        });
        const double pr = p.pupil_radius;
        canvas.fill(px - pr, ey - pr, px + pr, ey + pr, p.pupil, [&](double x, double y) {
            return in_eye(x, y) && in_ellipse(x, y, px, ey, pr, pr);
        });
    }

    const double wing_cy = l.nose_base - l.wing_height;
    const double bridge_top = 0.12 * p.nose_width;
    const double bridge_bottom = 0.3 * p.nose_width;
    canvas.fill(cx - bridge_bottom, l.glabella_y, cx + bridge_bottom, wing_cy, p.nose, [&](double x, double y) {
        if (y < l.glabella_y || y > wing_cy) {
            return false;
        }
        const double t = (y - l.glabella_y) / (wing_cy - l.glabella_y);
        return std::abs(x - cx) <= bridge_top + t * (bridge_bottom - bridge_top);
    });
    const double nw = 0.5 * p.nose_width;
    canvas.fill(cx - nw, wing_cy - l.wing_height, cx + nw, l.nose_base, p.nose,
                [&](double x, double y) { return in_ellipse(x, y, cx, wing_cy, nw, l.wing_height); });
    for (double side : {-1.0, 1.0}) {
        const double nx = cx + side * 0.5 * nw;
        const double ny = l.nose_base - 0.6 * l.wing_height;
        const double rx = 0.25 * nw;
        const double ry = l.wing_height / 3.0;
        canvas.fill(nx - rx, ny - ry, nx + rx, ny + ry, p.nostril,
                    [&](double x, double y) { return in_ellipse(x, y, nx, ny, rx, ry); });
    }

    const double hm = 0.5 * p.mouth_width;
    const double my = l.mouth_y;
    canvas.fill(cx - hm, my - p.upper_lip, cx + hm, my + p.lower_lip, p.lip, [&](double x, double y) {
        const double t = (x - cx) / hm;
        if (std::abs(t) > 1.0) {
            return false;
        }
        const double arch = 1.0 - t * t;
        return y >= my - p.upper_lip * arch && y <= my + p.lower_lip * arch;
    });
    canvas.fill(cx - hm, my - 1.0, cx + hm, my + 1.0, 0.5 * p.lip,
                [&](double x, double y) { return std::abs(x - cx) <= hm && std::abs(y - my) <= 0.75; });

    SyntheticSample s;
    s.image = canvas.finish(p.noise_sigma, p.seed);
    s.truth = landmarks(p);
    s.face_box = face_box(p);
    s.params = p;
    return s;
}

nlohmann::ordered_json to_json(const FaceParams& p)
{
    nlohmann::ordered_json j;
    j["width"] = p.width;
    j["height"] = p.height;
    for (const auto& [name, field] : kRealFields) {
        j[name] = p.*field;
    }
    j["seed"] = p.seed;
    return j;
}

FaceParams face_params_from_json(const nlohmann::json& j)
{
    FaceParams p;
    try {
        p.width = j.at("width").get<int>();
        p.height = j.at("height").get<int>();
        for (const auto& [name, field] : kRealFields) {
            p.*field = j.at(name).get<double>();
        }
        p.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("face parameters: ") + e.what());
    }
    return p;
}

DatasetManifest generate_corpus(std::size_t n, const FaceDistribution& dist, std::uint64_t seed,
                                const std::filesystem::path& out_dir, int jobs)
{
    if (n == 0) {
        throw Error("corpus size must be at least 1");
    }
    namespace fs = std::filesystem;
    std::error_code ec;
    for (const char* sub : {"images", "annotations", "params"}) {
        fs::create_directories(out_dir / sub, ec);
        if (ec) {
            throw Error("cannot create " + (out_dir / sub).string() + ": " + ec.message());
        }
    }
    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    manifest.entries.resize(n);
    static const char* const kAgeGroups[] = {"young", "adult", "senior"};
    parallel_for(n, jobs, [&](std::size_t i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "%04zu", i);
        const SyntheticSample s = render(sample_params(dist, derive_seed(seed, i)));
        ManifestEntry& e = manifest.entries[i];
        e.image = std::string("images/") + stem + ".pgm";
        e.annotation = std::string("annotations/") + stem + ".txt";
        e.face_box = s.face_box;
        e.sex = i % 2 == 0 ? "F" : "M";
        e.age_group = kAgeGroups[i % 3];
        imaging::save_pgm(s.image, out_dir / e.image);
        save_annotation(s.truth, out_dir / e.annotation);
        write_text_file(out_dir / "params" / (std::string(stem) + ".json"), to_json(s.params).dump(2) + "\n");
    });
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

} // namespace cephalo::synthgen
