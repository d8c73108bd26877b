#include "dcm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>

#include "dcm/nn/loss.hpp"

namespace dcm {

void CropConfig::validate() const {
    if (!(extent > 0.0)) throw ConfigError("crop extent must be positive");
    if (!(stride > 0.0)) throw ConfigError("crop stride must be positive");
    if (!(reject_threshold >= 0.0 && reject_threshold <= 1.0)) throw ConfigError("crop rejection threshold must lie in [0, 1]");
}

namespace {

std::vector<double> window_starts(double lo, double hi, double stride) {
    std::vector<double> starts{lo};
    for (int k = 1;; ++k) {
        const double s = lo + k * stride;
        if (s >= hi) break;
        starts.push_back(s);
    }
    return starts;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<Mesh> crop_scene(const Mesh& mesh, const CropConfig& config) {
    config.validate();
    std::vector<Mesh> crops;
    if (mesh.vertex_count() == 0) return crops;
    const Eigen::RowVector3d lo = mesh.positions.colwise().minCoeff();
    const Eigen::RowVector3d hi = mesh.positions.colwise().maxCoeff();
    for (double y0 : window_starts(lo.y(), hi.y(), config.stride)) {
        for (double x0 : window_starts(lo.x(), hi.x(), config.stride)) {
            std::vector<bool> keep(mesh.vertex_count());
            bool any = false;
            for (Index i = 0; i < mesh.vertex_count(); ++i) {
                const double x = mesh.positions(i, 0), y = mesh.positions(i, 1);
                keep[i] = x >= x0 && x <= x0 + config.extent && y >= y0 && y <= y0 + config.extent;
                any = any || keep[i];
            }
            if (any) crops.push_back(extract_submesh(mesh, keep));
        }
    }
    return crops;
}

bool reject_crop(const Mesh& crop, double threshold) {
    const Index n = crop.vertex_count();
    if (n == 0) throw ValidationError("cannot judge an empty crop");
    Index unlabeled = n;
    if (crop.labels) unlabeled = static_cast<Index>((crop.labels->array() == kUnlabeled).count());
    return static_cast<double>(unlabeled) > threshold * static_cast<double>(n);
}

AffineDraw draw_affine(std::mt19937_64& rng, const AffineConfig& config) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    AffineDraw d;
    d.angle = config.rotate ? 2.0 * std::numbers::pi * unit(rng) : 0.0;
    d.scale = config.scale_min + (config.scale_max - config.scale_min) * unit(rng);
    for (int a = 0; a < 3; ++a) d.translation[a] = config.jitter * (2.0 * unit(rng) - 1.0);
    return d;
}

Mesh apply_affine(const Mesh& mesh, const AffineDraw& draw) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(draw.angle, Vec3::UnitZ()).toRotationMatrix();
    Mesh out = mesh;
    out.positions = ((draw.scale * mesh.positions * r.transpose()).rowwise() + draw.translation.transpose()).eval();
    if (mesh.normals) {
        Points n = *mesh.normals * r.transpose();
        n.rowwise().normalize();
        out.normals = std::move(n);
    }
    return out;
}

Mesh random_affine(const Mesh& mesh, std::mt19937_64& rng, const AffineConfig& config) {
    return apply_affine(mesh, draw_affine(rng, config));
}

Hierarchy apply_affine(const Hierarchy& hierarchy, const AffineDraw& draw) {
    Hierarchy out = hierarchy;
    for (Mesh& m : out.levels) m = apply_affine(m, draw);
    return out;
}

FeatureMatrix normalize_features(const Mesh& mesh) {
    if (!mesh.colors || !mesh.normals) throw ValidationError("features need vertex colors and normals");
    const Index n = mesh.vertex_count();
    FeatureMatrix f(n, kFeatureWidth);
    if (n == 0) return f;
    const Eigen::RowVector3d lo = mesh.positions.colwise().minCoeff();
    const Eigen::RowVector3d span = mesh.positions.colwise().maxCoeff() - lo;
    for (int a = 0; a < 3; ++a) {
        if (span[a] > 0.0)
            f.col(a) = (mesh.positions.col(a).array() - lo[a]) / span[a];
        else
            f.col(a).setZero();
    }
    f.middleCols(3, 3) = *mesh.colors;
    f.middleCols(6, 3) = *mesh.normals;
    return f;
}

EpochStats train_epoch(nn::Network& net, nn::Adam& adam, std::span<const Sample> samples, const TrainConfig& config,
                       int epoch, std::mt19937_64& rng) {
    if (samples.empty()) throw ValidationError("training set is empty");
    if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
    const Index levels = net.config().levels;
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    EpochStats stats;
    double loss_sum = 0.0;
    std::int64_t correct = 0, labeled = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        const std::uint64_t res_seed = rng();
        std::vector<nn::NetworkGraph> graphs;
        std::vector<FeatureMatrix> features;
        std::vector<const Labels*> labels;
        Index rows = 0;
        for (std::size_t k = start; k < stop; ++k) {
            const Sample& s = samples[order[k]];
            const Mesh& base = s.hierarchy.levels.at(0);
            if (!base.labels) throw ValidationError("training sample " + s.name + " has no labels");
            // Coarse positions never reach the network, so only level 0 is moved.
            features.push_back(normalize_features(config.augment ? apply_affine(base, draw_affine(rng, config.affine)) : base));
            graphs.push_back(nn::make_graph(s.hierarchy, levels, config.res_threshold, res_seed + k));
            labels.push_back(&*base.labels);
            rows += base.vertex_count();
        }
        const nn::NetworkGraph batch = nn::batch_graphs(graphs);
        FeatureMatrix x(rows, kFeatureWidth);
        Labels y(rows);
        Index at = 0;
        for (std::size_t k = 0; k < features.size(); ++k) {
            x.middleRows(at, features[k].rows()) = features[k];
            y.segment(at, features[k].rows()) = *labels[k];
            at += static_cast<Index>(features[k].rows());
        }

        const FeatureMatrix logits = net.forward(batch, x, nn::Mode::Train);
        const nn::LossResult loss = nn::batched_cross_entropy(logits, y, batch.graph_offsets);
        net.zero_grad();
        net.backward(loss.grad);
        adam.step(epoch);

        const Labels pred = argmax(logits);
        for (Index i = 0; i < rows; ++i) {
            if (y[i] == kUnlabeled) continue;
            ++labeled;
            correct += pred[i] == y[i];
        }
        loss_sum += loss.loss;
        ++stats.batches;
    }
    stats.mean_loss = loss_sum / stats.batches;
    stats.accuracy = labeled > 0 ? static_cast<double>(correct) / static_cast<double>(labeled) : 0.0;
    return stats;
}

FeatureMatrix infer_full_scene(nn::Network& net, const Hierarchy& hierarchy, std::optional<Index> res_threshold,
                               std::uint64_t seed, InferenceTiming* timing) {
    auto t0 = std::chrono::steady_clock::now();
    const nn::NetworkGraph graph = nn::make_graph(hierarchy, net.config().levels, res_threshold, seed);
    const FeatureMatrix x = normalize_features(hierarchy.levels.at(0));
    const double graph_seconds = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    FeatureMatrix logits = net.forward(graph, x, nn::Mode::Eval);
    if (timing) {
        timing->graph_seconds = graph_seconds;
        timing->forward_seconds = seconds_since(t0);
    }
    return logits;
}

Labels argmax(const FeatureMatrix& logits) {
    Labels out(logits.rows());
    for (Index i = 0; i < logits.rows(); ++i) {
        Index best = 0;
        for (Index c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        out[i] = best;
    }
    return out;
}

Labels majority_vote(std::span<const FeatureMatrix> runs) {
    if (runs.empty()) throw ValidationError("majority vote needs at least one run");
    const Index n = static_cast<Index>(runs.front().rows()), classes = static_cast<Index>(runs.front().cols());
    for (const auto& r : runs)
        if (r.rows() != n || r.cols() != classes) throw ValidationError("majority vote: runs differ in shape");
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> votes =
        Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(n, classes);
    for (const auto& r : runs) {
        const Labels pred = argmax(r);
        for (Index i = 0; i < n; ++i) ++votes(i, pred[i]);
    }
    Labels out(n);
    for (Index i = 0; i < n; ++i) {
        Index best = 0;
        for (Index c = 1; c < classes; ++c)
            if (votes(i, c) > votes(i, best)) best = c;
        out[i] = best;
    }
    return out;
}

namespace {

constexpr char kLogitsMagic[8] = {'D', 'C', 'M', 'L', 'O', 'G', 'I', 'T'};

}  // namespace

void save_logits(const FeatureMatrix& logits, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(logits.rows()), static_cast<std::uint64_t>(logits.cols())};
    os.write(kLogitsMagic, sizeof(kLogitsMagic));
    os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    os.write(reinterpret_cast<const char*>(logits.data()), static_cast<std::streamsize>(logits.size() * sizeof(double)));
    if (!os) throw IoError("write failed for " + path.string());
}

FeatureMatrix load_logits(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[8];
    std::uint64_t dims[2];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kLogitsMagic, sizeof(magic)) != 0)
        throw IoError(path.string() + ": not a logits file (bad magic)");
    if (!is.read(reinterpret_cast<char*>(dims), sizeof(dims))) throw IoError(path.string() + ": truncated header");
    if (dims[0] > (1ULL << 31) || dims[1] > (1ULL << 20)) throw IoError(path.string() + ": implausible logits shape");
    FeatureMatrix out(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
    if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(double))))
        throw IoError(path.string() + ": truncated data");
    return out;
}

void save_labels(const Labels& labels, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    for (Index i = 0; i < labels.size(); ++i) os << labels[i] << '\n';
    if (!os) throw IoError("write failed for " + path.string());
}

Labels load_labels(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::vector<Index> values;
    std::string line;
    std::size_t number = 0;
    while (std::getline(is, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        Index v;
        std::string rest;
        if (!(ls >> v) || (ls >> rest) || v < kUnlabeled)
            throw ValidationError(path.string() + ":" + std::to_string(number) + ": expected one class index, got '" + line + "'");
        values.push_back(v);
    }
    return Eigen::Map<const Labels>(values.data(), static_cast<Index>(values.size()));
}

EvalResult evaluate(const Labels& predictions, const Labels& truth, Index classes) {
    if (classes < 1) throw ConfigError("class count must be positive");
    if (predictions.size() != truth.size())
        throw ValidationError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                              std::to_string(truth.size()) + " labels");
    EvalResult r;
    r.confusion.setZero(classes, classes);
    for (Index i = 0; i < truth.size(); ++i) {
        const Index t = truth[i];
        if (t == kUnlabeled) continue;
        if (t < 0 || t >= classes) throw ValidationError("label " + std::to_string(t) + " out of range at vertex " + std::to_string(i));
        const Index p = predictions[i];
        if (p < 0 || p >= classes)
            throw ValidationError("prediction " + std::to_string(p) + " out of range at vertex " + std::to_string(i));
        ++r.confusion(t, p);
    }
    r.labeled = r.confusion.sum();
    if (r.labeled == 0) throw ValidationError("evaluate: no labeled vertex");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.iou.assign(classes, nan);
    r.class_accuracy.assign(classes, nan);
    r.present.assign(classes, false);
    double iou_sum = 0.0, acc_sum = 0.0;
    Index present = 0;
    std::int64_t diagonal = 0;
    for (Index c = 0; c < classes; ++c) {
        const std::int64_t tp = r.confusion(c, c);
        const std::int64_t gt = r.confusion.row(c).sum();
        const std::int64_t predicted = r.confusion.col(c).sum();
        diagonal += tp;
        if (gt == 0) continue;
        r.present[c] = true;
        r.iou[c] = static_cast<double>(tp) / static_cast<double>(gt + predicted - tp);
        r.class_accuracy[c] = static_cast<double>(tp) / static_cast<double>(gt);
        iou_sum += r.iou[c];
        acc_sum += r.class_accuracy[c];
        ++present;
    }
    r.miou = iou_sum / present;
    r.macc = acc_sum / present;
    r.accuracy = static_cast<double>(diagonal) / static_cast<double>(r.labeled);
    return r;
}

nlohmann::json to_json(const EvalResult& r) {
    auto nullable = [](const std::vector<double>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (double x : v) a.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
        return a;
    };
    nlohmann::json confusion = nlohmann::json::array();
    for (Index t = 0; t < r.confusion.rows(); ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (Index p = 0; p < r.confusion.cols(); ++p) row.push_back(r.confusion(t, p));
        confusion.push_back(row);
    }
    return {{"miou", r.miou},          {"macc", r.macc},
            {"accuracy", r.accuracy},  {"labeled", r.labeled},
            {"iou", nullable(r.iou)},  {"class_accuracy", nullable(r.class_accuracy)},
            {"present", r.present},    {"confusion", confusion}};
}

std::string to_csv(const EvalResult& r) {
    std::ostringstream os;
    os.precision(6);
    os << "class,present,iou,accuracy\n";
    for (std::size_t c = 0; c < r.iou.size(); ++c) {
        os << c << ',' << (r.present[c] ? 1 : 0) << ',';
        if (r.present[c]) os << r.iou[c] << ',' << r.class_accuracy[c];
        else os << ',';
        os << '\n';
    }
    os << "mean,," << r.miou << ',' << r.macc << '\n';
    return os.str();
}

std::vector<SceneEntry> DatasetManifest::split(const std::string& name) const {
    std::vector<SceneEntry> out;
    for (const auto& s : scenes)
        if (s.split == name) out.push_back(s);
    return out;
}

DatasetManifest load_dataset_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open dataset manifest " + path.string());
    const auto dir = path.parent_path();
    DatasetManifest m;
    try {
        const nlohmann::json j = nlohmann::json::parse(is);
        m.classes = j.at("classes").get<Index>();
        for (const auto& s : j.at("scenes")) {
            SceneEntry e;
            e.name = s.at("name").get<std::string>();
            e.split = s.value("split", "train");
            if (s.contains("mesh")) e.mesh = (dir / s.at("mesh").get<std::string>()).lexically_normal();
            if (s.contains("hierarchy")) e.hierarchy = (dir / s.at("hierarchy").get<std::string>()).lexically_normal();
            if (e.split != "train" && e.split != "val" && e.split != "test")
                throw ConfigError(path.string() + ": scene " + e.name + " has unknown split '" + e.split + "'");
            m.scenes.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": malformed dataset manifest: " + e.what());
    }
    if (m.classes < 1) throw ConfigError(path.string() + ": class count must be positive");
    return m;
}

void save_dataset_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    const auto dir = std::filesystem::absolute(path).parent_path();
    auto relative = [&](const std::filesystem::path& p) {
        return std::filesystem::absolute(p).lexically_normal().lexically_relative(dir).generic_string();
    };
    nlohmann::json j;
    j["classes"] = manifest.classes;
    j["scenes"] = nlohmann::json::array();
    for (const auto& s : manifest.scenes) {
        nlohmann::json e{{"name", s.name}, {"split", s.split}};
        if (!s.mesh.empty()) e["mesh"] = relative(s.mesh);
        if (!s.hierarchy.empty()) e["hierarchy"] = relative(s.hierarchy);
        j["scenes"].push_back(e);
    }
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace dcm
