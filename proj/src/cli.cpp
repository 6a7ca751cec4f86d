/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/cli.cpp
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
#include "cephalo/cli.hpp"

#include "cephalo/error.hpp"
#include "cephalo/evaluation.hpp"
#include "cephalo/log.hpp"
#include "cephalo/parallel.hpp"
#include "cephalo/pipeline.hpp"
#include "cephalo/random.hpp"
#include "cephalo/synthgen.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>

namespace cephalo::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using pipeline::DetectorKind;

namespace {

struct Common {
    int jobs = 1;
    bool quiet = false;
};

void echo_config(const fs::path& dir, const std::string& command, ordered_json options)
{
    fs::create_directories(dir);
    ordered_json j;
    j["command"] = command;
    j["options"] = std::move(options);
    write_text_file(dir / "config.json", j.dump(2) + "\n");
}

std::optional<detection::CascadeOptions> cascade_options(const std::string& path, double step, int min_size)
{
    if (path.empty()) {
        return std::nullopt;
    }
    detection::CascadeOptions c;
    c.model = detection::load_cascade(path);
    c.scale_step = step;
    c.min_size = min_size;
    return c;
}

Box parse_box(const std::string& text)
{
    Box b;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf", &b.x, &b.y, &b.w, &b.h) != 4 || !(b.w > 0.0) || !(b.h > 0.0)) {
        throw Error("--box expects x,y,w,h with positive size");
    }
    return b;
}

std::string fold_dir(std::size_t f) { return "fold_" + std::to_string(f); }

// ---------------------------------------------------------------------------

struct SynthOptions {
    std::size_t n = 300;
    std::uint64_t seed = 42;
    std::string out;
};

int cmd_synth(const SynthOptions& o, const Common& c, std::ostream& out)
{
    if (o.n == 0) {
        throw Error("--n must be at least 1");
    }
    const synthgen::FaceDistribution dist;
    const auto manifest = synthgen::generate_corpus(o.n, dist, o.seed, o.out, c.jobs);
    echo_config(o.out, "synth", {{"n", o.n}, {"seed", o.seed}, {"out", o.out}});
    out << "wrote " << manifest.entries.size() << " samples to " << (fs::path(o.out) / "manifest.json").string()
        << "\n";
    return kExitOk;
}

struct ExpertOptions {
    std::size_t images = 20;
    int experts = 12;
    double sigma = 2.0;
    std::uint64_t seed = 7;
    std::string out;
};

int cmd_synth_experts(const ExpertOptions& o, const Common& c, std::ostream& out)
{
    if (o.images == 0 || o.experts < 2 || !(o.sigma >= 0.0)) {
        throw Error("synth-experts needs --images >= 1, --experts >= 2 and --sigma >= 0");
    }
    const auto manifest = synthgen::generate_corpus(o.images, {}, o.seed, o.out, c.jobs);
    ordered_json set;
    set["images"] = ordered_json::array();
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        const Shape truth = load_annotation(manifest.resolve(e.annotation));
        ordered_json img;
        img["id"] = fs::path(e.image).stem().string();
        img["image"] = e.image;
        img["face_box"] = {e.face_box->x, e.face_box->y, e.face_box->w, e.face_box->h};
        img["annotations"] = ordered_json::object();
        for (int x = 1; x <= o.experts; ++x) {
            Rng rng(derive_seed(derive_seed(o.seed, 0x4578ULL + i), static_cast<std::uint64_t>(x)));
            Shape noisy;
            for (LandmarkId id : all_landmarks()) {
                const double dx = o.sigma * rng.normal();
                const double dy = o.sigma * rng.normal();
                noisy.set(id, truth.at(id) + Point2{dx, dy});
            }
            const std::string rel = "experts/" + img["id"].get<std::string>() + "_e" + std::to_string(x) + ".txt";
            fs::create_directories(fs::path(o.out) / "experts");
            save_annotation(noisy, fs::path(o.out) / rel);
            img["annotations"][std::to_string(x)] = rel;
        }
        set["images"].push_back(std::move(img));
    }
    write_text_file(fs::path(o.out) / "experts.json", set.dump(2) + "\n");
    echo_config(o.out, "synth-experts",
                {{"images", o.images}, {"experts", o.experts}, {"sigma", o.sigma}, {"seed", o.seed}, {"out", o.out}});
    out << "wrote " << o.images << " images with " << o.experts << " expert annotations each to "
        << (fs::path(o.out) / "experts.json").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string manifest;
    std::string kind;
    std::size_t folds = 3;
    std::size_t test_size = 100;
    std::optional<std::size_t> train_size;
    std::uint64_t seed = 42;
    std::string config;
    std::string cascade;
    double cascade_step = 1.2;
    int cascade_min = 0;
    std::string fusion = "average";
    std::string out;
};

int cmd_train(const TrainOptions& o, const Common& c, std::ostream& out)
{
    const DetectorKind kind = pipeline::parse_kind(o.kind);
    regressors::TrainConfig cfg;
    if (!o.config.empty()) {
        cfg = regressors::train_config_from_json(json::parse(read_text_file(o.config)));
    }
    pipeline::FusionRule fusion;
    if (o.fusion == "priority") {
        fusion.mode = pipeline::FusionMode::priority;
    } else if (o.fusion != "average") {
        throw Error("--fusion must be average or priority");
    }
    const DatasetManifest manifest = load_manifest(o.manifest);
    const FoldPlan plan = make_fold_plan(manifest.entries.size(), o.folds, o.test_size, o.seed, o.train_size);
    const auto cascade = cascade_options(o.cascade, o.cascade_step, o.cascade_min);
    const auto images = detection::load_labeled_images(manifest, {}, cascade ? &*cascade : nullptr, c.jobs);

    fs::create_directories(o.out);
    save_fold_plan(plan, fs::path(o.out) / "fold_plan.json");
    for (std::size_t f = 0; f < plan.splits.size(); ++f) {
        std::vector<detection::LabeledImage> train;
        for (std::size_t i : plan.splits[f].train) {
            train.push_back(images[i]);
        }
        log_info("training " + std::string(pipeline::kind_name(kind)) + " fold " + std::to_string(f) + " on " +
                 std::to_string(train.size()) + " images");
        const auto detector = pipeline::train_detector(train, cfg, kind, {}, fusion, c.jobs);
        pipeline::save_bundle(detector, fs::path(o.out) / fold_dir(f));
    }
    ordered_json opts;
    opts["manifest"] = o.manifest;
    opts["kind"] = o.kind;
    opts["folds"] = o.folds;
    opts["test_size"] = o.test_size;
    opts["train_size"] = o.train_size ? json(*o.train_size) : json(nullptr);
    opts["seed"] = o.seed;
    opts["cascade"] = o.cascade;
    opts["fusion"] = o.fusion;
    opts["train_config"] = regressors::to_json(cfg);
    echo_config(o.out, "train", std::move(opts));
    out << "trained " << plan.splits.size() << " " << pipeline::kind_name(kind) << " bundles in " << o.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct DetectOptions {
    std::string model;
    std::string image;
    std::string box;
    std::string cascade;
    double cascade_step = 1.2;
    int cascade_min = 0;
    std::string out;
};

int cmd_detect(const DetectOptions& o, const Common&, std::ostream& out)
{
    const pipeline::Detector detector = pipeline::load_bundle(o.model);
    const imaging::GrayImage raw = imaging::load_image(o.image);
    Box face;
    if (!o.box.empty()) {
        face = parse_box(o.box);
    } else if (!o.cascade.empty()) {
        const auto c = cascade_options(o.cascade, o.cascade_step, o.cascade_min);
        const int min_size = c->min_size > 0 ? c->min_size : c->model.window_w;
        face = detection::detect_face(raw, c->model, c->scale_step, min_size).box;
    } else {
        throw NoFaceError("no face box: pass --box or --cascade");
    }
    const Shape shape = detector.detect(imaging::preprocess(raw), {detection::RegionKind::face, face});
    save_annotation(shape, o.out);
    out << "wrote " << shape.size() << " landmarks to " << o.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct CompareOptions {
    std::string manifest;
    std::vector<std::string> runs;
    std::string wilcoxon_input = "ranks";
    std::string cascade;
    double cascade_step = 1.2;
    int cascade_min = 0;
    std::string out;
};

int cmd_compare(const CompareOptions& o, const Common& c, std::ostream& out)
{
    if (o.wilcoxon_input != "ranks" && o.wilcoxon_input != "distances") {
        throw Error("--wilcoxon-input must be ranks or distances");
    }
    std::vector<std::pair<DetectorKind, fs::path>> runs;
    for (const auto& r : o.runs) {
        const auto eq = r.find('=');
        if (eq == std::string::npos) {
            throw Error("--run expects kind=directory, got '" + r + "'");
        }
        const DetectorKind kind = pipeline::parse_kind(r.substr(0, eq));
        for (const auto& [k, dir] : runs) {
            if (k == kind) {
                throw Error("detector kind '" + r.substr(0, eq) + "' given twice");
            }
        }
        runs.emplace_back(kind, r.substr(eq + 1));
    }
    std::optional<FoldPlan> plan;
    for (const auto& [kind, dir] : runs) {
        FoldPlan p = load_fold_plan(dir / "fold_plan.json");
        if (plan && !(p == *plan)) {
            throw Error("fold plans differ between runs; compare needs bundles trained on the same plan (" +
                        dir.string() + ")");
        }
        plan = std::move(p);
    }
    const DatasetManifest manifest = load_manifest(o.manifest);
    if (manifest.entries.size() != plan->n_items) {
        throw Error("manifest has " + std::to_string(manifest.entries.size()) + " entries, fold plan expects " +
                    std::to_string(plan->n_items));
    }
    const auto cascade = cascade_options(o.cascade, o.cascade_step, o.cascade_min);
    const auto images = detection::load_labeled_images(manifest, {}, cascade ? &*cascade : nullptr, c.jobs);

    std::vector<evaluation::FoldDetectors> models;
    for (const auto& [kind, dir] : runs) {
        evaluation::FoldDetectors fd;
        fd.kind = kind;
        for (std::size_t f = 0; f < plan->splits.size(); ++f) {
            fd.folds.push_back(pipeline::load_bundle(dir / fold_dir(f)));
            if (fd.folds.back().kind != kind) {
                throw Error((dir / fold_dir(f)).string() + " holds a " +
                            std::string(pipeline::kind_name(fd.folds.back().kind)) + " bundle");
            }
        }
        models.push_back(std::move(fd));
    }
    const auto records = evaluation::evaluate(models, images, *plan, c.jobs);

    std::optional<evaluation::RankTable> ranks;
    std::vector<evaluation::NamedTest> tests;
    if (runs.size() >= 2) {
        ranks = evaluation::rank(records);
        const DetectorKind ref = runs.front().first;
        const bool use_distances = o.wilcoxon_input == "distances";
        for (std::size_t i = 1; i < runs.size(); ++i) {
            const DetectorKind other = runs[i].first;
            evaluation::NamedTest t;
            t.name = std::string(pipeline::kind_name(ref)) + "_vs_" + std::string(pipeline::kind_name(other));
            t.input = o.wilcoxon_input;
            t.result = evaluation::wilcoxon_signed_rank(evaluation::rank_column(*ranks, ref, use_distances),
                                                        evaluation::rank_column(*ranks, other, use_distances));
            tests.push_back(std::move(t));
        }
    } else {
        out << "single detector: ranking and tests skipped, means only\n";
    }
    evaluation::ReportInput in;
    in.records = records;
    in.ranks = ranks ? &*ranks : nullptr;
    in.tests = tests;
    evaluation::report(in, o.out);

    ordered_json opts;
    opts["manifest"] = o.manifest;
    opts["runs"] = o.runs;
    opts["wilcoxon_input"] = o.wilcoxon_input;
    opts["cascade"] = o.cascade;
    echo_config(o.out, "compare", std::move(opts));
    for (const auto& [kind, dir] : runs) {
        out << pipeline::kind_name(kind) << " mean normalized error "
            << evaluation::format_number(evaluation::mean_distance(records, kind)) << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct DispersionOptions {
    std::string experts;
    std::vector<std::string> models;
    int resolution = 128;
    std::string out;
};

int cmd_dispersion(const DispersionOptions& o, const Common& c, std::ostream& out)
{
    const fs::path set_path(o.experts);
    const json set = json::parse(read_text_file(set_path));
    const fs::path base = set_path.parent_path();
    std::vector<evaluation::ExpertImage> images;
    std::vector<fs::path> image_files;
    std::vector<Box> boxes;
    try {
        for (const auto& img : set.at("images")) {
            evaluation::ExpertImage e;
            e.id = img.at("id").get<std::string>();
            for (const auto& [expert, file] : img.at("annotations").items()) {
                e.experts.emplace(std::stoi(expert), load_annotation(base / file.get<std::string>()));
            }
            images.push_back(std::move(e));
            image_files.push_back(base / img.value("image", std::string()));
            const auto b = img.value("face_box", std::vector<double>{});
            boxes.push_back(b.size() == 4 ? Box{b[0], b[1], b[2], b[3]} : Box{});
        }
    } catch (const json::exception& e) {
        throw SchemaError("expert set " + set_path.string() + ": " + e.what());
    }
    const auto dispersion = evaluation::expert_dispersion(images);

    std::vector<std::pair<std::string, evaluation::KdeSummary>> kde;
    for (LandmarkId id : all_landmarks()) {
        std::vector<Point2> deviations;
        for (std::size_t i = 0; i < images.size(); ++i) {
            for (const auto& [expert, shape] : images[i].experts) {
                deviations.push_back(shape.at(id) - dispersion.centroids[i].at(id));
            }
        }
        kde.emplace_back("experts_" + std::string(landmark_name(id)),
                         evaluation::kde_summary(deviations, o.resolution));
    }

    if (o.models.empty()) {
        evaluation::report_dispersion(dispersion, kde, o.out);
    } else {
        // Algorithms are scored against the expert centroid of each image.
        std::vector<evaluation::EvalRecord> records;
        for (const auto& m : o.models) {
            const auto eq = m.find('=');
            if (eq == std::string::npos) {
                throw Error("--model expects kind=bundle, got '" + m + "'");
            }
            const DetectorKind kind = pipeline::parse_kind(m.substr(0, eq));
            const pipeline::Detector det = pipeline::load_bundle(m.substr(eq + 1));
            std::vector<std::vector<evaluation::EvalRecord>> per(images.size());
            std::vector<std::vector<Point2>> dev(images.size());
            parallel_for(images.size(), c.jobs, [&](std::size_t i) {
                if (!(boxes[i].w > 0.0)) {
                    throw Error("image '" + images[i].id + "' has no face_box");
                }
                const auto img = imaging::preprocess(imaging::load_image(image_files[i]));
                const Shape pred = det.detect(img, {detection::RegionKind::face, boxes[i]});
                for (LandmarkId id : all_landmarks()) {
                    evaluation::EvalRecord r;
                    r.image_id = images[i].id;
                    r.landmark = id;
                    r.algorithm = kind;
                    r.normalized_distance =
                        evaluation::normalized_error(pred.at(id), dispersion.centroids[i].at(id), dispersion.centroids[i]);
                    per[i].push_back(r);
                }
            });
            for (auto& v : per) {
                records.insert(records.end(), v.begin(), v.end());
            }
        }
        evaluation::ReportInput in;
        in.records = records;
        in.dispersion = &dispersion;
        in.kde = kde;
        const auto ranks = o.models.size() >= 2 ? std::optional(evaluation::rank(records)) : std::nullopt;
        in.ranks = ranks ? &*ranks : nullptr;
        evaluation::report(in, o.out);
    }
    echo_config(o.out, "dispersion", {{"experts", o.experts}, {"models", o.models}, {"resolution", o.resolution}});
    out << "experts mean normalized dispersion " << evaluation::format_number(dispersion.mean) << " (pairwise "
        << evaluation::format_number(dispersion.mean_pairwise) << ")\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Region-specialized cephalometric landmark detection"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", common.quiet, "Suppress progress messages");

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic face corpus");
    s->add_option("--n", synth.n, "Number of samples");
    s->add_option("--seed", synth.seed, "Seed");
    s->add_option("--out", synth.out, "Output directory")->required();

    ExpertOptions experts;
    auto* se = app.add_subcommand("synth-experts", "Generate a synthetic multi-expert annotation set");
    se->add_option("--images", experts.images, "Number of images");
    se->add_option("--experts", experts.experts, "Number of experts");
    se->add_option("--sigma", experts.sigma, "Annotation noise in pixels");
    se->add_option("--seed", experts.seed, "Seed");
    se->add_option("--out", experts.out, "Output directory")->required();

    TrainOptions train;
    auto* t = app.add_subcommand("train", "Train one detector kind per fold of a cross-validation plan");
    t->add_option("--manifest", train.manifest, "Dataset manifest")->required();
    t->add_option("--kind", train.kind, "hr, sd or ert")->required()->check(CLI::IsMember({"hr", "sd", "ert"}));
    t->add_option("--folds", train.folds, "Number of folds");
    t->add_option("--test-size", train.test_size, "Test images per fold");
    t->add_option("--train-size", train.train_size, "Truncate training sets");
    t->add_option("--seed", train.seed, "Fold plan seed");
    t->add_option("--config", train.config, "Training configuration JSON");
    t->add_option("--cascade", train.cascade, "Face cascade JSON for entries without a box");
    t->add_option("--cascade-step", train.cascade_step, "Cascade scale step");
    t->add_option("--cascade-min", train.cascade_min, "Smallest cascade window");
    t->add_option("--fusion", train.fusion, "average or priority")->check(CLI::IsMember({"average", "priority"}));
    t->add_option("--out", train.out, "Run directory")->required();

    DetectOptions detect;
    auto* d = app.add_subcommand("detect", "Detect the 28 landmarks on one image");
    d->add_option("--model", detect.model, "Model bundle directory")->required();
    d->add_option("--image", detect.image, "Image (PNG or PGM)")->required();
    d->add_option("--box", detect.box, "Face box x,y,w,h");
    d->add_option("--cascade", detect.cascade, "Face cascade JSON");
    d->add_option("--cascade-step", detect.cascade_step, "Cascade scale step");
    d->add_option("--cascade-min", detect.cascade_min, "Smallest cascade window");
    d->add_option("--out", detect.out, "Annotation file to write")->required();

    CompareOptions compare;
    auto* cm = app.add_subcommand("compare", "Evaluate trained runs on their shared fold plan");
    cm->add_option("--manifest", compare.manifest, "Dataset manifest")->required();
    cm->add_option("--run", compare.runs, "kind=run directory (repeatable)")->required();
    cm->add_option("--wilcoxon-input", compare.wilcoxon_input, "ranks or distances")
        ->check(CLI::IsMember({"ranks", "distances"}));
    cm->add_option("--cascade", compare.cascade, "Face cascade JSON for entries without a box");
    cm->add_option("--cascade-step", compare.cascade_step, "Cascade scale step");
    cm->add_option("--cascade-min", compare.cascade_min, "Smallest cascade window");
    cm->add_option("--out", compare.out, "Report directory")->required();

    DispersionOptions disp;
    auto* ds = app.add_subcommand("dispersion", "Inter-expert dispersion and density maps");
    ds->add_option("--experts", disp.experts, "Expert annotation set JSON")->required();
    ds->add_option("--model", disp.models, "kind=bundle directory scored against the expert centroid");
    ds->add_option("--resolution", disp.resolution, "Density grid cells along the longer side")
        ->check(CLI::Range(2, 4096));
    ds->add_option("--out", disp.out, "Report directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) {
        reversed.pop_back();
    }
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    const bool was_logging = log_enabled();
    log_enabled() = !common.quiet;
    int code = kExitFailure;
    try {
        if (*s) {
            code = cmd_synth(synth, common, out);
        } else if (*se) {
            code = cmd_synth_experts(experts, common, out);
        } else if (*t) {
            code = cmd_train(train, common, out);
        } else if (*d) {
            code = cmd_detect(detect, common, out);
        } else if (*cm) {
            code = cmd_compare(compare, common, out);
        } else if (*ds) {
            code = cmd_dispersion(disp, common, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        code = kExitFailure;
    }
    log_enabled() = was_logging;
    return code;
}

} // namespace cephalo::cli
