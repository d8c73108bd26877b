#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "dcm/hierarchy_io.hpp"
#include "dcm/mesh_io.hpp"
#include "dcm/nn/checkpoint.hpp"
#include "dcm/nn/optim.hpp"
#include "dcm/pipeline.hpp"
#include "dcm/toy.hpp"

namespace dcm::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) ensure_dir(file.parent_path());
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

void write_file(const fs::path& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

/// Runs `job(k)` for k in [0, count) on up to `threads` workers. The first
/// exception is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& job) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < count;) {
            try {
                job(k);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

Mesh load_truth(const fs::path& path) {
    if (fs::is_directory(path)) return load_mesh(path / "level_0.ply", MeshFormat::Ply);
    return load_mesh(path);
}

Labels load_predictions(const fs::path& path) {
    if (path.extension() == ".logits") return argmax(load_logits(path));
    return load_labels(path);
}

Hierarchy load_ready_hierarchy(const fs::path& dir) {
    Hierarchy h = deserialize_hierarchy(dir);
    if (h.euclidean_edges.empty()) throw ValidationError(dir.string() + ": hierarchy has no Euclidean edges");
    return h;
}

void print_eval(const EvalResult& r) {
    std::cout << std::fixed << std::setprecision(4) << "mIoU " << r.miou << "  mAcc " << r.macc << "  accuracy " << r.accuracy
              << "  labeled " << r.labeled << '\n';
}

}  // namespace

void write_run_manifest(const std::string& command, const RunRecord& record, const fs::path& path, double total_seconds) {
    nlohmann::json j;
    j["command"] = command;
    j["tool_version"] = kToolVersion;
    j["started_at"] = utc_now();
    j["config"] = record.config;
    j["seeds"] = record.seeds;
    j["inputs"] = record.inputs;
    j["outputs"] = record.outputs;
    nlohmann::json timings = record.timings;
    timings["total_seconds"] = total_seconds;
    j["timings"] = timings;
    write_file(path, j.dump(2) + "\n");
}

RunRecord run_subdivide(const SubdivideOptions& o) {
    if (!(o.min_edge > 0.0)) throw ConfigError("--min-edge must be positive");
    if (o.passes < 1) throw ConfigError("--passes must be at least 1");
    Mesh mesh = load_mesh(o.mesh);
    const Index before = mesh.vertex_count();
    for (int p = 0; p < o.passes; ++p) mesh = midpoint_subdivide(mesh, o.min_edge);
    RunRecord r;
    r.inputs.push_back(o.mesh.string());
    if (!o.cloud.empty()) {
        mesh = interpolate_from_point_cloud(mesh, load_point_cloud(o.cloud));
        r.inputs.push_back(o.cloud.string());
    }
    ensure_parent(o.out);
    save_mesh(mesh, o.out);
    std::cout << "subdivided " << before << " -> " << mesh.vertex_count() << " vertices, " << mesh.face_count() << " faces\n";
    r.config = {{"min_edge", o.min_edge}, {"passes", o.passes}};
    r.outputs.push_back(o.out.string());
    r.manifest = with_suffix(o.out, ".run.json");
    return r;
}

HierarchyConfig HierarchyOptions::config() const {
    HierarchyConfig c;
    c.strategy = parse_strategy(strategy);
    c.cells = cells;
    c.qem_ratio = qem_ratio;
    c.qem_levels = qem_levels;
    c.pair_distance_threshold = pair_threshold;
    c.fps_counts = fps_counts;
    c.seed = seed;
    if (c.strategy != PoolingStrategy::Fps && c.cells.empty()) throw ConfigError("--cells needs at least one value");
    for (double cell : c.cells)
        if (!(cell > 0.0)) throw ConfigError("--cells values must be positive");
    if (c.strategy == PoolingStrategy::VcThenQem && !(qem_ratio > 0.0 && qem_ratio < 1.0))
        throw ConfigError("--qem-ratio must lie in (0, 1)");
    if (c.strategy == PoolingStrategy::Fps && c.fps_counts.empty()) throw ConfigError("--strategy fps needs --fps-counts");
    return c;
}

std::vector<NeighborhoodConfig> HierarchyOptions::neighborhoods(Index levels) const {
    std::vector<NeighborhoodConfig> out;
    if (knn > 0) {
        NeighborhoodConfig n;
        n.kind = NeighborhoodConfig::Kind::Knn;
        n.k = knn;
        out.push_back(n);
    } else {
        for (double r : radius.empty() ? default_radii(levels) : radius) {
            NeighborhoodConfig n;
            n.radius = r;
            out.push_back(n);
        }
    }
    for (const auto& n : out) n.validate();
    return out;
}

nlohmann::json HierarchyOptions::to_json() const {
    nlohmann::json j = config();
    if (knn > 0) j["knn"] = knn;
    else j["radius"] = radius.empty() ? nlohmann::json("default") : nlohmann::json(radius);
    return j;
}

RunRecord run_build_hierarchy(const BuildHierarchyOptions& o) {
    const HierarchyConfig hc = o.hierarchy.config();
    const Index levels = hc.pooling_steps() + 1;
    const auto neighborhoods = o.hierarchy.neighborhoods(levels);
    RunRecord r;
    r.config = o.hierarchy.to_json();
    r.config["threads"] = o.threads;
    r.seeds["hierarchy"] = o.hierarchy.seed;

    nn::NetworkConfig shape;
    shape.euclidean = neighborhoods;
    const nlohmann::json neighborhoods_json = nlohmann::json(shape)["euclidean"];
    auto build = [&](const Mesh& mesh) {
        Hierarchy h = build_hierarchy(mesh, hc);
        attach_euclidean_edges(h, neighborhoods);
        return h;
    };

    if (!o.mesh.empty()) {
        if (!o.dataset.empty()) throw ConfigError("give either --mesh or --dataset, not both");
        if (o.crop) throw ConfigError("--crop applies to --dataset runs");
        const Hierarchy h = build(load_mesh(o.mesh));
        serialize_hierarchy(h, o.out, neighborhoods_json);
        std::cout << "levels:";
        for (const Mesh& m : h.levels) std::cout << ' ' << m.vertex_count();
        std::cout << '\n';
        r.inputs.push_back(o.mesh.string());
        r.outputs.push_back(o.out.string());
        r.manifest = o.out / "run.json";
        return r;
    }
    if (o.dataset.empty()) throw ConfigError("build-hierarchy needs --mesh or --dataset");

    const DatasetManifest in = load_dataset_manifest(o.dataset);
    CropConfig crop{o.crop_extent, o.crop_stride, o.reject_threshold};
    crop.validate();

    struct Job {
        SceneEntry entry;
        Mesh mesh;
    };
    std::vector<Job> jobs;
    Index rejected = 0;
    for (const SceneEntry& s : in.scenes) {
        if (s.mesh.empty()) throw ConfigError(o.dataset.string() + ": scene " + s.name + " has no mesh");
        Mesh mesh = load_mesh(s.mesh);
        if (o.crop && s.split == "train") {
            const auto crops = crop_scene(mesh, crop);
            for (std::size_t k = 0; k < crops.size(); ++k) {
                if (reject_crop(crops[k], crop.reject_threshold)) {
                    ++rejected;
                    continue;
                }
                SceneEntry e = s;
                e.name = s.name + "_c" + std::to_string(k);
                jobs.push_back({e, crops[k]});
            }
        } else {
            jobs.push_back({s, std::move(mesh)});
        }
    }

    std::vector<std::string> skipped(jobs.size());
    parallel_for(jobs.size(), o.threads, [&](std::size_t k) {
        Job& job = jobs[k];
        job.entry.hierarchy = o.out / job.entry.name;
        try {
            serialize_hierarchy(build(job.mesh), job.entry.hierarchy, neighborhoods_json);
        } catch (const ValidationError& e) {
            // Crops can be too small to pool; whole scenes must succeed.
            if (!o.crop || job.entry.split != "train") throw;
            skipped[k] = e.what();
        }
    });

    DatasetManifest out;
    out.classes = in.classes;
    Index dropped = 0;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (!skipped[k].empty()) {
            std::cerr << "skipping crop " << jobs[k].entry.name << ": " << skipped[k] << '\n';
            ++dropped;
            continue;
        }
        out.scenes.push_back(jobs[k].entry);
    }
    const fs::path manifest_path = o.out / "dataset.json";
    ensure_dir(o.out);
    save_dataset_manifest(out, manifest_path);
    std::cout << out.scenes.size() << " hierarchies written, " << rejected << " crops rejected, " << dropped
              << " crops too small\n";
    r.config["crop"] = o.crop ? nlohmann::json{{"extent", crop.extent}, {"stride", crop.stride}, {"reject_threshold", crop.reject_threshold}}
                              : nlohmann::json(nullptr);
    r.inputs.push_back(o.dataset.string());
    r.outputs.push_back(manifest_path.string());
    r.manifest = o.out / "run.json";
    return r;
}

RunRecord run_graph_stats(const GraphStatsOptions& o) {
    const Hierarchy h = deserialize_hierarchy(o.hierarchy);
    nlohmann::json levels = nlohmann::json::array();
    auto row = [](const DegreeStats& s) {
        return nlohmann::json{{"edges", s.edges},           {"min_degree", s.min_degree}, {"max_degree", s.max_degree},
                              {"mean_degree", s.mean_degree}, {"self_loops", s.self_loops}};
    };
    std::cout << "level  vertices  geo_edges  geo_mean  euc_edges  euc_mean  euc_max\n";
    for (Index l = 0; l < h.level_count(); ++l) {
        const DegreeStats geo = degree_stats(h.geodesic_edges[l]);
        nlohmann::json entry{{"level", l}, {"vertices", h.levels[l].vertex_count()}, {"geodesic", row(geo)}};
        std::cout << std::setw(5) << l << std::setw(10) << h.levels[l].vertex_count() << std::setw(11) << geo.edges << std::setw(10)
                  << std::fixed << std::setprecision(2) << geo.mean_degree;
        if (!h.euclidean_edges.empty()) {
            EdgeSet euc = h.euclidean_edges[l];
            if (o.res) euc = res_sample(euc, *o.res, o.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(l));
            const DegreeStats e = degree_stats(euc);
            entry["euclidean"] = row(e);
            std::cout << std::setw(11) << e.edges << std::setw(10) << e.mean_degree << std::setw(9) << e.max_degree;
        }
        std::cout << '\n';
        levels.push_back(entry);
    }
    RunRecord r;
    r.config = {{"res", o.res ? nlohmann::json(*o.res) : nlohmann::json(nullptr)}};
    r.seeds["res"] = o.seed;
    r.inputs.push_back(o.hierarchy.string());
    if (!o.out.empty()) {
        write_file(o.out, nlohmann::json{{"levels", levels}}.dump(2) + "\n");
        r.outputs.push_back(o.out.string());
        r.manifest = with_suffix(o.out, ".run.json");
    } else {
        r.manifest = o.hierarchy / "graph-stats.run.json";
    }
    return r;
}

nn::NetworkConfig NetworkOptions::build(Index classes, std::uint64_t seed) const {
    nn::NetworkConfig c;
    if (!config.empty()) {
        std::ifstream is(config);
        if (!is) throw IoError("cannot open " + config.string());
        try {
            c = nlohmann::json::parse(is).get<nn::NetworkConfig>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(config.string() + ": " + e.what());
        }
    } else if (arch == "dcm") {
        c = nn::NetworkConfig::dcm_default(classes);
    } else if (arch == "scm-geo" || arch == "scm-euc") {
        c = nn::NetworkConfig::scm_default(classes, arch == "scm-geo");
    } else {
        throw ConfigError("unknown --arch '" + arch + "' (dcm, scm-geo, scm-euc)");
    }
    c.classes = classes;
    c.seed = seed;
    if (levels > 0) {
        c.widths.resize(levels, c.widths.empty() ? nn::LevelWidths{} : c.widths.back());
        c.levels = levels;
    }
    if (blocks > 0) c.blocks_per_level = blocks;
    if (width > 0) {
        for (auto& w : c.widths) {
            const bool geo = w.geo_out > 0, euc = w.euc_out > 0;
            if (geo && euc) w = {width, width / 2, width, width / 2};
            else if (geo) w = {2 * width, width, 0, 0};
            else w = {0, 0, 2 * width, width};
        }
    }
    if (head > 0) c.head_hidden = head;
    c.validate();
    return c;
}

RunRecord run_train(const TrainOptions& o) {
    if (o.epochs < 1) throw ConfigError("--epochs must be at least 1");
    if (o.batch_size < 1) throw ConfigError("--batch-size must be at least 1");
    if (o.res_train < 1 || o.res_test < 1) throw ConfigError("RES thresholds must be at least 1");
    const DatasetManifest dataset = load_dataset_manifest(o.dataset);
    const auto t_load = Clock::now();
    std::vector<Sample> train, val;
    for (const SceneEntry& s : dataset.scenes) {
        if (s.split == "test") continue;
        if (s.hierarchy.empty()) throw ConfigError(o.dataset.string() + ": scene " + s.name + " has no hierarchy (run build-hierarchy)");
        (s.split == "train" ? train : val).push_back({s.name, load_ready_hierarchy(s.hierarchy)});
    }
    if (train.empty()) throw ConfigError(o.dataset.string() + ": no training scenes");
    const double load_seconds = seconds_since(t_load);

    nn::NetworkConfig config = o.network.build(dataset.classes, o.seed);
    // Record the neighborhoods the training hierarchies were built with.
    const nlohmann::json built = read_hierarchy_manifest(dataset.split("train").front().hierarchy);
    if (built.contains("neighborhoods")) {
        nlohmann::json j = config;
        j["euclidean"] = built["neighborhoods"];
        config = j.get<nn::NetworkConfig>();
    }
    nn::Network net(config);
    nn::AdamConfig adam_config;
    adam_config.learning_rate = o.lr;
    adam_config.decay = o.lr_decay;
    adam_config.decay_every = o.lr_decay_every;
    nn::Adam adam(net.registry().parameters, adam_config);
    TrainConfig tc;
    tc.batch_size = o.batch_size;
    tc.res_threshold = o.res_train;
    tc.augment = o.augment;

    ensure_dir(o.out);
    std::ofstream log(o.out / "train_log.csv");
    if (!log) throw IoError("cannot write " + (o.out / "train_log.csv").string());
    log << "epoch,learning_rate,loss,accuracy,seconds\n";
    std::cout << "training " << net.parameter_count() << " parameters on " << train.size() << " scenes\n";
    std::mt19937_64 rng(o.seed);
    const auto t_train = Clock::now();
    for (int e = 0; e < o.epochs; ++e) {
        const auto t0 = Clock::now();
        const EpochStats st = train_epoch(net, adam, train, tc, e, rng);
        log << e << ',' << adam_config.rate_at(e) << ',' << st.mean_loss << ',' << st.accuracy << ',' << seconds_since(t0) << '\n';
        if ((e + 1) % 10 == 0 || e + 1 == o.epochs)
            std::cout << "epoch " << e + 1 << "  loss " << st.mean_loss << "  accuracy " << st.accuracy << '\n';
    }
    const double train_seconds = seconds_since(t_train);

    const fs::path ckpt = o.out / "model.ckpt";
    save_checkpoint(net, ckpt, {{"epochs", o.epochs}, {"res_train", o.res_train}, {"seed", o.seed}});
    RunRecord r;
    r.outputs = {ckpt.string(), (o.out / "train_log.csv").string()};

    if (!val.empty()) {
        Labels pred_all, truth_all;
        std::vector<Index> preds, truths;
        for (std::size_t k = 0; k < val.size(); ++k) {
            const Labels p = argmax(infer_full_scene(net, val[k].hierarchy, o.res_test, o.seed + k));
            const Labels& t = *val[k].hierarchy.levels[0].labels;
            preds.insert(preds.end(), p.data(), p.data() + p.size());
            truths.insert(truths.end(), t.data(), t.data() + t.size());
        }
        const EvalResult er = evaluate(Eigen::Map<Labels>(preds.data(), static_cast<Index>(preds.size())),
                                       Eigen::Map<Labels>(truths.data(), static_cast<Index>(truths.size())), dataset.classes);
        std::cout << "validation: ";
        print_eval(er);
        write_file(o.out / "val_metrics.json", to_json(er).dump(2) + "\n");
        write_file(o.out / "val_metrics.csv", to_csv(er));
        r.outputs.push_back((o.out / "val_metrics.json").string());
        r.outputs.push_back((o.out / "val_metrics.csv").string());
    }

    r.config = {{"network", config},
                {"epochs", o.epochs},
                {"batch_size", o.batch_size},
                {"res_train", o.res_train},
                {"res_test", o.res_test},
                {"learning_rate", o.lr},
                {"lr_decay", o.lr_decay},
                {"lr_decay_every", o.lr_decay_every},
                {"augment", o.augment}};
    r.seeds = {{"train", o.seed}};
    r.inputs.push_back(o.dataset.string());
    r.timings = {{"load_seconds", load_seconds}, {"train_seconds", train_seconds}};
    r.manifest = o.out / "run.json";
    return r;
}

RunRecord run_infer(const InferOptions& o) {
    nn::LoadedCheckpoint loaded = nn::load_checkpoint(o.checkpoint);
    nn::Network& net = *loaded.network;
    const std::optional<Index> res = o.no_res ? std::nullopt : std::optional<Index>(o.res_test);
    if (res && *res < 1) throw ConfigError("--res-test must be at least 1");
    RunRecord r;
    r.inputs.push_back(o.checkpoint.string());
    double graph_seconds = 0.0, forward_seconds = 0.0;

    auto infer_one = [&](const fs::path& dir, const fs::path& out, std::uint64_t seed) {
        Hierarchy h = load_ready_hierarchy(dir);
        if (o.augment) {
            std::mt19937_64 rng(seed);
            h = apply_affine(h, draw_affine(rng));
        }
        InferenceTiming timing;
        const FeatureMatrix logits = infer_full_scene(net, h, res, seed, &timing);
        graph_seconds += timing.graph_seconds;
        forward_seconds += timing.forward_seconds;
        ensure_parent(out);
        save_logits(logits, out);
        r.inputs.push_back(dir.string());
        r.outputs.push_back(out.string());
        std::cout << dir.filename().string() << ": " << logits.rows() << " vertices, forward " << std::fixed
                  << std::setprecision(3) << timing.forward_seconds << " s\n";
        return logits;
    };

    if (!o.dataset.empty()) {
        if (!o.hierarchy.empty()) throw ConfigError("give either --hierarchy or --dataset, not both");
        const auto scenes = load_dataset_manifest(o.dataset).split(o.split);
        if (scenes.empty()) throw ConfigError(o.dataset.string() + ": no scenes in split '" + o.split + "'");
        for (std::size_t k = 0; k < scenes.size(); ++k) {
            if (scenes[k].hierarchy.empty()) throw ConfigError("scene " + scenes[k].name + " has no hierarchy");
            infer_one(scenes[k].hierarchy, o.out / (scenes[k].name + ".logits"), o.seed + k);
        }
        r.manifest = o.out / "run.json";
    } else {
        if (o.hierarchy.empty()) throw ConfigError("infer needs --hierarchy or --dataset");
        const FeatureMatrix logits = infer_one(o.hierarchy, o.out, o.seed);
        if (!o.predictions.empty()) {
            ensure_parent(o.predictions);
            save_labels(argmax(logits), o.predictions);
            r.outputs.push_back(o.predictions.string());
        }
        r.manifest = with_suffix(o.out, ".run.json");
    }
    r.config = {{"res_test", res ? nlohmann::json(*res) : nlohmann::json(nullptr)}, {"augment", o.augment}, {"split", o.split}};
    r.seeds = {{"inference", o.seed}};
    r.timings = {{"graph_seconds", graph_seconds}, {"forward_seconds", forward_seconds}};
    return r;
}

RunRecord run_vote(const VoteOptions& o) {
    if (o.logits.empty()) throw ConfigError("vote needs at least one --logits file");
    std::vector<FeatureMatrix> runs;
    RunRecord r;
    for (const auto& p : o.logits) {
        runs.push_back(load_logits(p));
        r.inputs.push_back(p.string());
    }
    ensure_parent(o.out);
    save_labels(majority_vote(runs), o.out);
    std::cout << "voted over " << runs.size() << " runs, " << runs.front().rows() << " vertices\n";
    r.config = {{"runs", runs.size()}};
    r.outputs.push_back(o.out.string());
    r.manifest = with_suffix(o.out, ".run.json");
    return r;
}

RunRecord run_eval(const EvalOptions& o) {
    RunRecord r;
    std::vector<Index> preds, truths;
    Index classes = o.classes;
    auto add = [&](const Labels& p, const Labels& t, const std::string& what) {
        if (p.size() != t.size())
            throw ValidationError(what + ": " + std::to_string(p.size()) + " predictions for " + std::to_string(t.size()) + " vertices");
        preds.insert(preds.end(), p.data(), p.data() + p.size());
        truths.insert(truths.end(), t.data(), t.data() + t.size());
    };
    auto truth_labels = [](const fs::path& path) {
        const Mesh m = load_truth(path);
        if (!m.labels) throw ValidationError(path.string() + ": no ground-truth labels");
        return *m.labels;
    };

    if (!o.dataset.empty()) {
        const DatasetManifest d = load_dataset_manifest(o.dataset);
        if (classes == 0) classes = d.classes;
        if (o.predictions_dir.empty()) throw ConfigError("dataset evaluation needs --predictions-dir");
        const auto scenes = d.split(o.split);
        if (scenes.empty()) throw ConfigError(o.dataset.string() + ": no scenes in split '" + o.split + "'");
        for (const auto& s : scenes) {
            fs::path p = o.predictions_dir / (s.name + ".logits");
            if (!fs::exists(p)) p = o.predictions_dir / (s.name + ".txt");
            const fs::path truth = s.hierarchy.empty() ? s.mesh : s.hierarchy;
            add(load_predictions(p), truth_labels(truth), s.name);
            r.inputs.push_back(p.string());
        }
    } else {
        if (o.predictions.empty() || o.truth.empty()) throw ConfigError("eval needs --predictions and --truth, or --dataset");
        add(load_predictions(o.predictions), truth_labels(o.truth), o.predictions.string());
        r.inputs = {o.predictions.string(), o.truth.string()};
    }
    if (classes < 1) throw ConfigError("eval needs --classes");
    const EvalResult er = evaluate(Eigen::Map<Labels>(preds.data(), static_cast<Index>(preds.size())),
                                   Eigen::Map<Labels>(truths.data(), static_cast<Index>(truths.size())), classes);
    print_eval(er);
    const fs::path json_path = with_suffix(o.out, ".json"), csv_path = with_suffix(o.out, ".csv");
    write_file(json_path, to_json(er).dump(2) + "\n");
    write_file(csv_path, to_csv(er));
    r.config = {{"classes", classes}, {"split", o.split}};
    r.outputs = {json_path.string(), csv_path.string()};
    r.manifest = with_suffix(o.out, ".run.json");
    return r;
}

RunRecord run_make_toy(const MakeToyOptions& o) {
    if (o.train < 1 || o.test < 0) throw ConfigError("--train must be positive and --test non-negative");
    ToySceneConfig tc;
    tc.size_x = tc.size_y = o.size;
    tc.spacing = o.spacing;
    tc.validate();
    ensure_dir(o.out / "meshes");
    DatasetManifest d;
    d.classes = kToyClasses;
    RunRecord r;
    for (Index k = 0; k < o.train + o.test; ++k) {
        SceneEntry e;
        e.name = "toy_" + std::to_string(k);
        e.mesh = o.out / "meshes" / (e.name + ".ply");
        e.split = k < o.train ? "train" : "test";
        save_mesh(make_toy_scene(tc, o.seed * 1000 + static_cast<std::uint64_t>(k)), e.mesh);
        r.outputs.push_back(e.mesh.string());
        d.scenes.push_back(e);
    }
    save_dataset_manifest(d, o.out / "dataset.json");
    std::cout << "wrote " << d.scenes.size() << " toy scenes to " << o.out.string() << '\n';
    r.config = {{"train", o.train}, {"test", o.test}, {"size", o.size}, {"spacing", o.spacing}};
    r.seeds = {{"scenes", o.seed}};
    r.outputs.push_back((o.out / "dataset.json").string());
    r.manifest = o.out / "run.json";
    return r;
}

}  // namespace dcm::cli
