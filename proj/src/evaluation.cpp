/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/evaluation.cpp
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
#include "cephalo/evaluation.hpp"

#include "cephalo/error.hpp"
#include "cephalo/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace cephalo::evaluation {

using pipeline::DetectorKind;

double normalized_error(Point2 pred, Point2 gt, const Shape& gt_shape)
{
    if (!gt_shape.has(LandmarkId::ex_l) || !gt_shape.has(LandmarkId::ex_r)) {
        throw Error("normalized error needs both exocanthions in the ground truth");
    }
    const double norm = distance(gt_shape.at(LandmarkId::ex_l), gt_shape.at(LandmarkId::ex_r));
    if (!(norm > 0.0)) {
        throw Error("degenerate normalizer: exocanthions coincide");
    }
    return distance(pred, gt) / norm;
}

std::vector<EvalRecord> evaluate(std::span<const FoldDetectors> models, std::span<const detection::LabeledImage> images,
                                 const FoldPlan& plan, int jobs)
{
    if (images.size() != plan.n_items) {
        throw Error("evaluation images do not match the fold plan (" + std::to_string(images.size()) + " vs " +
                    std::to_string(plan.n_items) + ")");
    }
    for (const auto& m : models) {
        if (m.folds.size() != plan.splits.size()) {
            throw Error("detector '" + std::string(pipeline::kind_name(m.kind)) + "' has " +
                        std::to_string(m.folds.size()) + " folds, plan has " + std::to_string(plan.splits.size()));
        }
    }
    std::vector<EvalRecord> out;
    for (std::size_t f = 0; f < plan.splits.size(); ++f) {
        const auto& test = plan.splits[f].test;
        std::vector<std::vector<EvalRecord>> per_image(test.size());
        parallel_for(test.size(), jobs, [&](std::size_t t) {
            const detection::LabeledImage& li = images[test[t]];
            for (const auto& m : models) {
                std::optional<Shape> pred;
                if (li.face) {
                    pred = m.folds[f].detect(*li.image, {detection::RegionKind::face, *li.face});
                }
                for (LandmarkId id : all_landmarks()) {
                    EvalRecord r;
                    r.image_id = li.id;
                    r.landmark = id;
                    r.algorithm = m.kind;
                    r.fold = static_cast<int>(f);
                    r.box_source = li.source;
                    if (pred) {
                        r.normalized_distance = normalized_error(pred->at(id), li.truth.at(id), li.truth);
                    } else {
                        r.flagged = true;
                    }
                    per_image[t].push_back(std::move(r));
                }
            }
        });
        for (auto& v : per_image) {
            std::move(v.begin(), v.end(), std::back_inserter(out));
        }
    }
    return out;
}

double mean_distance(std::span<const EvalRecord> records, DetectorKind kind)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.algorithm == kind && !r.flagged) {
            sum += r.normalized_distance;
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : std::nan("");
}

std::vector<double> average_ranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

RankTable rank(std::span<const EvalRecord> records)
{
    RankTable table;
    std::map<DetectorKind, std::size_t> column;
    for (const auto& r : records) {
        if (!r.flagged && column.emplace(r.algorithm, table.algorithms.size()).second) {
            table.algorithms.push_back(r.algorithm);
        }
    }
    const std::size_t k = table.algorithms.size();
    if (k == 0) {
        throw Error("nothing to rank: no unflagged records");
    }
    std::map<std::pair<std::string, LandmarkId>, std::size_t> index;
    for (const auto& r : records) {
        if (r.flagged) {
            continue;
        }
        const auto [it, fresh] = index.emplace(std::make_pair(r.image_id, r.landmark), table.instances.size());
        if (fresh) {
            RankInstance inst;
            inst.image_id = r.image_id;
            inst.landmark = r.landmark;
            inst.distances.assign(k, std::nan(""));
            table.instances.push_back(std::move(inst));
        }
        double& slot = table.instances[it->second].distances[column.at(r.algorithm)];
        if (!std::isnan(slot)) {
            throw Error("algorithm '" + std::string(pipeline::kind_name(r.algorithm)) + "' appears twice for " +
                        r.image_id + "/" + std::string(landmark_name(r.landmark)));
        }
        slot = r.normalized_distance;
    }
    table.average.assign(k, 0.0);
    for (auto& inst : table.instances) {
        for (std::size_t a = 0; a < k; ++a) {
            if (std::isnan(inst.distances[a])) {
                throw Error("missing '" + std::string(pipeline::kind_name(table.algorithms[a])) + "' record for " +
                            inst.image_id + "/" + std::string(landmark_name(inst.landmark)));
            }
        }
        inst.ranks = average_ranks(inst.distances);
        for (std::size_t a = 0; a < k; ++a) {
            table.average[a] += inst.ranks[a];
        }
    }
    for (double& v : table.average) {
        v /= static_cast<double>(table.instances.size());
    }
    return table;
}

std::vector<double> rank_column(const RankTable& table, DetectorKind kind, bool distances)
{
    const auto it = std::find(table.algorithms.begin(), table.algorithms.end(), kind);
    if (it == table.algorithms.end()) {
        throw Error("algorithm '" + std::string(pipeline::kind_name(kind)) + "' is not in the rank table");
    }
    const auto a = static_cast<std::size_t>(it - table.algorithms.begin());
    std::vector<double> out;
    out.reserve(table.instances.size());
    for (const auto& inst : table.instances) {
        out.push_back(distances ? inst.distances[a] : inst.ranks[a]);
    }
    return out;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMode mode)
{
    if (a.size() != b.size() || a.empty()) {
        throw Error("signed-rank test needs two non-empty samples of equal length");
    }
    std::vector<double> diff;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) {
            diff.push_back(d);
        }
    }
    if (diff.empty()) {
        throw Error("signed-rank test is undefined: every difference is zero");
    }
    std::vector<double> mag(diff.size());
    std::transform(diff.begin(), diff.end(), mag.begin(), [](double d) { return std::abs(d); });
    const std::vector<double> ranks = average_ranks(mag);

    WilcoxonResult res;
    res.n = diff.size();
    for (std::size_t i = 0; i < diff.size(); ++i) {
        (diff[i] > 0.0 ? res.w_plus : res.w_minus) += ranks[i];
    }
    res.statistic = std::min(res.w_plus, res.w_minus);
    const double n = static_cast<double>(res.n);

    res.exact = mode == WilcoxonMode::exact || (mode == WilcoxonMode::automatic && res.n <= kWilcoxonExactLimit);
    if (res.exact) {
        // Doubled average ranks are integers; count sign assignments by subset sum.
        std::vector<long> doubled(ranks.size());
        long total = 0;
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            doubled[i] = std::lround(2.0 * ranks[i]);
            total += doubled[i];
        }
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        long reach = 0;
        for (long r : doubled) {
            for (long s = reach; s >= 0; --s) {
                count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
            }
            reach += r;
        }
        const long observed = std::lround(2.0 * res.statistic);
        double tail = 0.0;
        for (long s = 0; s <= observed; ++s) {
            tail += count[static_cast<std::size_t>(s)];
        }
        res.p_two_sided = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(res.n)));
        return res;
    }

    std::map<double, double> ties;
    for (double r : ranks) {
        ties[r] += 1.0;
    }
    double tie_term = 0.0;
    for (const auto& [r, t] : ties) {
        tie_term += t * t * t - t;
    }
    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if (!(var > 0.0)) {
        res.p_two_sided = 1.0;
        return res;
    }
    const double z = std::max(0.0, std::abs(res.statistic - mean) - 0.5) / std::sqrt(var);
    res.p_two_sided = std::min(1.0, 2.0 * normal_cdf(-z));
    return res;
}

// ---------------------------------------------------------------------------

Shape centroid_shape(const ExpertImage& image)
{
    if (image.experts.size() < 2) {
        throw Error("image '" + image.id + "': dispersion needs at least two experts");
    }
    Shape c;
    const double inv = 1.0 / static_cast<double>(image.experts.size());
    for (LandmarkId id : all_landmarks()) {
        // Mean offset from the first expert, so identical annotations give an exact centroid.
        const Shape& first = image.experts.begin()->second;
        Point2 offset;
        for (const auto& [expert, shape] : image.experts) {
            if (!shape.has(id)) {
                throw Error("image '" + image.id + "', expert " + std::to_string(expert) + ": missing " +
                            std::string(landmark_name(id)));
            }
            offset = offset + (shape.at(id) - first.at(id));
        }
        c.set(id, first.at(id) + inv * offset);
    }
    return c;
}

DispersionResult expert_dispersion(std::span<const ExpertImage> images)
{
    if (images.empty()) {
        throw Error("dispersion needs at least one image");
    }
    DispersionResult out;
    double pair_sum = 0.0;
    std::size_t pair_count = 0;
    for (const auto& img : images) {
        const Shape c = centroid_shape(img);
        const double norm = distance(c.at(LandmarkId::ex_l), c.at(LandmarkId::ex_r));
        if (!(norm > 0.0)) {
            throw Error("image '" + img.id + "': degenerate centroid exocanthions");
        }
        for (LandmarkId id : all_landmarks()) {
            for (const auto& [expert, shape] : img.experts) {
                const double d = distance(shape.at(id), c.at(id)) / norm;
                out.records.push_back({img.id, id, expert, d});
                out.mean += d;
            }
            for (auto i = img.experts.begin(); i != img.experts.end(); ++i) {
                for (auto j = std::next(i); j != img.experts.end(); ++j) {
                    pair_sum += distance(i->second.at(id), j->second.at(id)) / norm;
                    ++pair_count;
                }
            }
        }
        out.centroids.push_back(c);
    }
    out.mean /= static_cast<double>(out.records.size());
    out.mean_pairwise = pair_sum / static_cast<double>(pair_count);
    return out;
}

// ---------------------------------------------------------------------------

double KdeSummary::mass() const
{
    return std::accumulate(density.begin(), density.end(), 0.0) * cell * cell;
}

double KdeSummary::lookup(Point2 p) const
{
    const long i = std::lround((p.x - x0) / cell);
    const long j = std::lround((p.y - y0) / cell);
    if (i < 0 || j < 0 || i >= nx || j >= ny) {
        return 0.0;
    }
    return at(static_cast<int>(i), static_cast<int>(j));
}

KdeSummary kde_summary(std::span<const Point2> points, int resolution)
{
    if (points.size() < 2) {
        throw Error("density estimate needs at least two points");
    }
    if (resolution < 2) {
        throw Error("density grid resolution must be at least 2");
    }
    const double n = static_cast<double>(points.size());
    Point2 mean;
    double lo_x = points[0].x;
    double hi_x = lo_x;
    double lo_y = points[0].y;
    double hi_y = lo_y;
    for (const auto& p : points) {
        mean = mean + p;
        lo_x = std::min(lo_x, p.x);
        hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y);
        hi_y = std::max(hi_y, p.y);
    }
    mean = (1.0 / n) * mean;
    double ss = 0.0;
    for (const auto& p : points) {
        ss += (p.x - mean.x) * (p.x - mean.x) + (p.y - mean.y) * (p.y - mean.y);
    }
    const double sigma = std::sqrt(ss / (2.0 * (n - 1.0)));

    KdeSummary k;
    // The floor only stands in for a bandwidth that collapsed on coincident points.
    const double silverman = sigma * std::pow(n, -1.0 / 6.0);
    k.bandwidth = silverman > 1e-9 ? silverman : kMinBandwidth;
    const double pad = 5.0 * k.bandwidth;
    const double span_x = hi_x - lo_x + 2.0 * pad;
    const double span_y = hi_y - lo_y + 2.0 * pad;
    k.cell = std::max(span_x, span_y) / resolution;
    k.nx = std::max(1, static_cast<int>(std::ceil(span_x / k.cell - 1e-9)));
    k.ny = std::max(1, static_cast<int>(std::ceil(span_y / k.cell - 1e-9)));
    k.x0 = lo_x - pad + 0.5 * k.cell;
    k.y0 = lo_y - pad + 0.5 * k.cell;
    k.density.assign(static_cast<std::size_t>(k.nx) * k.ny, 0.0);

    const double h2 = k.bandwidth * k.bandwidth;
    const double norm = 1.0 / (2.0 * M_PI * h2 * n);
    // Separable Gaussian: exp(-(dx^2 + dy^2) / 2h^2) = gx * gy.
    std::vector<double> gx(static_cast<std::size_t>(k.nx));
    std::vector<double> gy(static_cast<std::size_t>(k.ny));
    for (const auto& p : points) {
        for (int i = 0; i < k.nx; ++i) {
            const double dx = k.x0 + i * k.cell - p.x;
            gx[static_cast<std::size_t>(i)] = std::exp(-dx * dx / (2.0 * h2));
        }
        for (int j = 0; j < k.ny; ++j) {
            const double dy = k.y0 + j * k.cell - p.y;
            gy[static_cast<std::size_t>(j)] = std::exp(-dy * dy / (2.0 * h2));
        }
        for (int j = 0; j < k.ny; ++j) {
            const double wy = gy[static_cast<std::size_t>(j)] * norm;
            double* row = k.density.data() + static_cast<std::size_t>(j) * k.nx;
            for (int i = 0; i < k.nx; ++i) {
                row[i] += wy * gx[static_cast<std::size_t>(i)];
            }
        }
    }

    std::vector<double> sorted = k.density;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double half = 0.5 * std::accumulate(sorted.begin(), sorted.end(), 0.0);
    double acc = 0.0;
    k.level50 = sorted.front();
    for (double v : sorted) {
        acc += v;
        k.level50 = v;
        if (acc >= half) {
            break;
        }
    }
    return k;
}

double fraction_within(const KdeSummary& kde, std::span<const Point2> points, double level)
{
    if (points.empty()) {
        return 0.0;
    }
    std::size_t inside = 0;
    for (const auto& p : points) {
        inside += kde.lookup(p) >= level ? 1 : 0;
    }
    return static_cast<double>(inside) / static_cast<double>(points.size());
}

// ---------------------------------------------------------------------------

namespace {

double quantile7(const std::vector<double>& sorted, double q)
{
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string fixed(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width)
{
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::vector<DetectorKind> algorithms_of(std::span<const EvalRecord> records)
{
    std::vector<DetectorKind> out;
    for (const auto& r : records) {
        if (std::find(out.begin(), out.end(), r.algorithm) == out.end()) {
            out.push_back(r.algorithm);
        }
    }
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const
    {
        std::string out;
        const auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out += (i ? "," : "") + cells[i];
            }
            out += "\n";
        };
        line(header);
        for (const auto& r : rows) {
            line(r);
        }
        return out;
    }

    std::string text() const
    {
        std::vector<std::size_t> width(header.size(), 0);
        for (std::size_t i = 0; i < header.size(); ++i) {
            width[i] = header[i].size();
            for (const auto& r : rows) {
                width[i] = std::max(width[i], r[i].size());
            }
        }
        std::string out;
        const auto line = [&](const std::vector<std::string>& cells) {
            std::string l;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                l += (i ? "  " : "") + pad(cells[i], width[i]);
            }
            while (!l.empty() && l.back() == ' ') {
                l.pop_back();
            }
            out += l + "\n";
        };
        line(header);
        std::size_t total = 0;
        for (auto w : width) {
            total += w;
        }
        out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
        for (const auto& r : rows) {
            line(r);
        }
        return out;
    }

    void write(const std::filesystem::path& dir, const std::string& stem, bool with_text = true) const
    {
        write_text_file(dir / (stem + ".csv"), csv());
        if (with_text) {
            write_text_file(dir / (stem + ".txt"), text());
        }
    }
};

Table experts_table(const DispersionResult* dispersion, std::span<const EvalRecord> records)
{
    Table t;
    t.header = {"statistic"};
    std::vector<std::string> row{"mean_normalized_distance"};
    if (dispersion) {
        t.header.push_back("experts");
        row.push_back(fixed(dispersion->mean));
    }
    for (DetectorKind k : algorithms_of(records)) {
        t.header.emplace_back(pipeline::kind_name(k));
        row.push_back(fixed(mean_distance(records, k)));
    }
    t.rows.push_back(row);
    if (dispersion) {
        std::vector<std::string> pairwise{"experts_mean_pairwise_distance", fixed(dispersion->mean_pairwise)};
        pairwise.resize(t.header.size(), "");
        t.rows.push_back(pairwise);
    }
    return t;
}

void write_kde(const std::string& name, const KdeSummary& k, const std::filesystem::path& dir)
{
    std::ostringstream os;
    os << "# bandwidth=" << format_number(k.bandwidth) << " x0=" << format_number(k.x0)
       << " y0=" << format_number(k.y0) << " cell=" << format_number(k.cell) << " nx=" << k.nx << " ny=" << k.ny
       << " level50=" << format_number(k.level50) << " level100=" << format_number(k.level100) << "\n";
    for (int j = 0; j < k.ny; ++j) {
        for (int i = 0; i < k.nx; ++i) {
            os << (i ? "," : "") << format_number(k.at(i, j));
        }
        os << "\n";
    }
    write_text_file(dir / ("kde_" + name + ".csv"), os.str());
}

void write_dispersion_records(const DispersionResult& d, const std::filesystem::path& dir)
{
    std::string out = "image,landmark,expert,normalized_distance\n";
    for (const auto& r : d.records) {
        out += r.image_id + "," + std::string(landmark_name(r.landmark)) + "," + std::to_string(r.expert) + "," +
               format_number(r.normalized_distance) + "\n";
    }
    write_text_file(dir / "dispersion.csv", out);
}

} // namespace

BoxStats box_stats(std::vector<double> values)
{
    if (values.empty()) {
        throw Error("box statistics need at least one value");
    }
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.n = values.size();
    b.min = values.front();
    b.max = values.back();
    b.q1 = quantile7(values, 0.25);
    b.median = quantile7(values, 0.5);
    b.q3 = quantile7(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo = b.q1 - 1.5 * iqr;
    const double hi = b.q3 + 1.5 * iqr;
    b.whisker_low = b.max;
    b.whisker_high = b.min;
    for (double v : values) {
        if (v < lo || v > hi) {
            b.outliers.push_back(v);
        } else {
            b.whisker_low = std::min(b.whisker_low, v);
            b.whisker_high = std::max(b.whisker_high, v);
        }
    }
    return b;
}

std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void report(const ReportInput& in, const std::filesystem::path& dir)
{
    if (in.records.empty()) {
        throw Error("report needs at least one evaluation record");
    }
    std::filesystem::create_directories(dir);
    const auto algorithms = algorithms_of(in.records);

    {
        std::string out = "image,landmark,algorithm,fold,normalized_distance,flagged,box_source\n";
        for (const auto& r : in.records) {
            out += r.image_id + "," + std::string(landmark_name(r.landmark)) + "," +
                   std::string(pipeline::kind_name(r.algorithm)) + "," + std::to_string(r.fold) + "," +
                   format_number(r.normalized_distance) + "," + (r.flagged ? "1" : "0") + "," +
                   std::string(detection::box_source_name(r.box_source)) + "\n";
        }
        write_text_file(dir / "records.csv", out);
    }

    if (in.ranks && in.ranks->algorithms.size() >= 2) {
        std::vector<std::size_t> order(in.ranks->algorithms.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return in.ranks->average[a] < in.ranks->average[b]; });
        Table t;
        t.header = {"algorithm", "average_rank", "instances"};
        for (std::size_t a : order) {
            t.rows.push_back({std::string(pipeline::kind_name(in.ranks->algorithms[a])), fixed(in.ranks->average[a], 3),
                              std::to_string(in.ranks->instances.size())});
        }
        t.write(dir, "table2_ranking");
    }

    // Per-landmark means, merged over sides and per side.
    std::map<std::pair<DetectorKind, std::size_t>, std::pair<double, std::size_t>> by_landmark;
    std::map<std::pair<DetectorKind, std::string>, std::pair<double, std::size_t>> by_group;
    std::map<std::pair<DetectorKind, std::size_t>, std::vector<double>> samples;
    std::size_t flagged = 0;
    for (const auto& r : in.records) {
        if (r.flagged) {
            ++flagged;
            continue;
        }
        auto& l = by_landmark[{r.algorithm, index_of(r.landmark)}];
        l.first += r.normalized_distance;
        ++l.second;
        auto& g = by_group[{r.algorithm, std::string(landmark_group(r.landmark))}];
        g.first += r.normalized_distance;
        ++g.second;
        samples[{r.algorithm, index_of(r.landmark)}].push_back(r.normalized_distance);
    }
    const auto mean_of = [](const std::pair<double, std::size_t>& p) {
        return p.second > 0 ? fixed(p.first / static_cast<double>(p.second)) : std::string("n/a");
    };
    {
        Table merged;
        merged.header = {"landmark"};
        for (DetectorKind k : algorithms) {
            merged.header.emplace_back(pipeline::kind_name(k));
        }
        std::vector<std::string> groups;
        for (LandmarkId id : all_landmarks()) {
            const std::string g(landmark_group(id));
            if (std::find(groups.begin(), groups.end(), g) == groups.end()) {
                groups.push_back(g);
            }
        }
        for (const auto& g : groups) {
            std::vector<std::string> row{g};
            for (DetectorKind k : algorithms) {
                row.push_back(mean_of(by_group[{k, g}]));
            }
            merged.rows.push_back(row);
        }
        std::vector<std::string> all{"mean"};
        for (DetectorKind k : algorithms) {
            all.push_back(fixed(mean_distance(in.records, k)));
        }
        merged.rows.push_back(all);
        merged.write(dir, "table3_landmarks");

        Table sides;
        sides.header = merged.header;
        for (LandmarkId id : all_landmarks()) {
            std::vector<std::string> row{std::string(landmark_name(id))};
            for (DetectorKind k : algorithms) {
                row.push_back(mean_of(by_landmark[{k, index_of(id)}]));
            }
            sides.rows.push_back(row);
        }
        sides.write(dir, "table3_sides", false);
    }

    experts_table(in.dispersion, in.records).write(dir, "table4_experts");

    {
        std::string out = "algorithm,landmark,n,min,q1,median,q3,max,whisker_low,whisker_high,n_outliers,outliers\n";
        for (DetectorKind k : algorithms) {
            for (LandmarkId id : all_landmarks()) {
                const auto it = samples.find({k, index_of(id)});
                if (it == samples.end()) {
                    continue;
                }
                const BoxStats b = box_stats(it->second);
                std::string outliers;
                for (std::size_t i = 0; i < b.outliers.size(); ++i) {
                    outliers += (i ? ";" : "") + format_number(b.outliers[i]);
                }
                out += std::string(pipeline::kind_name(k)) + "," + std::string(landmark_name(id)) + "," +
                       std::to_string(b.n) + "," + format_number(b.min) + "," + format_number(b.q1) + "," +
                       format_number(b.median) + "," + format_number(b.q3) + "," + format_number(b.max) + "," +
                       format_number(b.whisker_low) + "," + format_number(b.whisker_high) + "," +
                       std::to_string(b.outliers.size()) + "," + outliers + "\n";
            }
        }
        write_text_file(dir / "boxplot.csv", out);
    }

    if (!in.tests.empty()) {
        std::string out = "comparison,input,n,statistic,w_plus,w_minus,p_two_sided,method\n";
        for (const auto& t : in.tests) {
            const auto& r = t.result;
            out += t.name + "," + t.input + "," + std::to_string(r.n) + "," + format_number(r.statistic) + "," +
                   format_number(r.w_plus) + "," + format_number(r.w_minus) + "," + format_number(r.p_two_sided) +
                   "," + (r.exact ? "exact" : "normal") + "\n";
        }
        write_text_file(dir / "wilcoxon.csv", out);
    }

    if (in.dispersion) {
        write_dispersion_records(*in.dispersion, dir);
    }
    for (const auto& [name, k] : in.kde) {
        write_kde(name, k, dir);
    }

    nlohmann::ordered_json summary;
    summary["records"] = in.records.size();
    summary["flagged_records"] = flagged;
    summary["algorithms"] = nlohmann::ordered_json::array();
    for (DetectorKind k : algorithms) {
        summary["algorithms"].push_back(std::string(pipeline::kind_name(k)));
    }
    summary["ranking"] = in.ranks && in.ranks->algorithms.size() >= 2 ? "written" : "skipped: fewer than two algorithms";
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

void report_dispersion(const DispersionResult& dispersion,
                       std::span<const std::pair<std::string, KdeSummary>> kde, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_dispersion_records(dispersion, dir);
    experts_table(&dispersion, {}).write(dir, "table4_experts");
    for (const auto& [name, k] : kde) {
        write_kde(name, k, dir);
    }
}

} // namespace cephalo::evaluation
