#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <numbers>
#include <set>

#include <Eigen/Geometry>

#include "dcm/neighborhoods.hpp"
#include "dcm/pipeline.hpp"
#include "dcm/toy.hpp"
#include "support.hpp"

using namespace dcm;

namespace {

double distance(const Mesh& m, Index a, Index b) { return (m.positions.row(a) - m.positions.row(b)).norm(); }

Sample small_toy(std::uint64_t seed) {
    ToySceneConfig tc;
    tc.size_x = tc.size_y = 1.2;
    tc.wall_height = 0.5;
    tc.spacing = 0.1;
    tc.box_min = 0.3;
    tc.box_max = 0.4;
    tc.max_boxes = 1;
    HierarchyConfig hc;
    hc.cells = {0.12};
    hc.qem_levels = 1;
    Sample s{"toy" + std::to_string(seed), build_hierarchy(make_toy_scene(tc, seed), hc)};
    NeighborhoodConfig nb;
    nb.radius = 0.25;
    attach_euclidean_edges(s.hierarchy, {nb});
    return s;
}

nn::NetworkConfig small_net(std::uint64_t seed = 1) {
    nn::NetworkConfig c;
    c.levels = 3;
    c.blocks_per_level = 1;
    c.classes = kToyClasses;
    c.widths.assign(3, nn::LevelWidths{8, 4, 8, 4});
    c.head_hidden = 8;
    c.seed = seed;
    return c;
}

std::vector<FeatureMatrix> parameter_values(nn::Network& net) {
    std::vector<FeatureMatrix> out;
    for (auto* p : net.registry().parameters) out.push_back(p->value);
    return out;
}

FeatureMatrix one_hot_logits(const std::vector<Index>& classes, Index width) {
    FeatureMatrix l = FeatureMatrix::Zero(static_cast<Index>(classes.size()), width);
    for (std::size_t i = 0; i < classes.size(); ++i) l(static_cast<Index>(i), classes[i]) = 1.0;
    return l;
}

}  // namespace

TEST_CASE("crop sweep") {
    // 31 x 31 grid over [0,3]^2.
    Mesh scene = test::flat_grid(31, 31, 0.1);
    CropConfig cfg;

    SUBCASE("3 m scene with 3 m windows at stride 1.5 gives offsets {0, 1.5}^2") {
        const auto crops = crop_scene(scene, cfg);
        REQUIRE(crops.size() == 4);
        std::set<std::pair<double, double>> origins;
        for (const auto& c : crops) {
            const Eigen::RowVector3d lo = c.positions.colwise().minCoeff();
            origins.insert({std::round(lo.x() * 10) / 10, std::round(lo.y() * 10) / 10});
        }
        CHECK(origins == std::set<std::pair<double, double>>{{0.0, 0.0}, {1.5, 0.0}, {0.0, 1.5}, {1.5, 1.5}});
    }
    SUBCASE("scene smaller than a window is one crop equal to the scene") {
        Mesh small = test::flat_grid(6, 6, 0.1);
        const auto crops = crop_scene(small, cfg);
        REQUIRE(crops.size() == 1);
        CHECK(crops[0].positions == small.positions);
        CHECK(crops[0].faces == small.faces);
    }
    SUBCASE("windows bound their vertices and the union covers the scene") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 10; ++trial) {
            Mesh soup = test::random_soup(300, 200, rng);
            soup.positions *= 4.0;
            CropConfig c;
            c.extent = 1.0 + trial * 0.2;
            c.stride = c.extent * (0.4 + 0.06 * trial);
            std::set<std::array<double, 3>> seen;
            for (const auto& crop : crop_scene(soup, c)) {
                const Eigen::RowVector3d lo = crop.positions.colwise().minCoeff();
                const Eigen::RowVector3d hi = crop.positions.colwise().maxCoeff();
                CHECK(hi.x() - lo.x() <= c.extent + 1e-12);
                CHECK(hi.y() - lo.y() <= c.extent + 1e-12);
                CHECK(validate_mesh(crop).empty());
                for (Index i = 0; i < crop.vertex_count(); ++i)
                    seen.insert({crop.positions(i, 0), crop.positions(i, 1), crop.positions(i, 2)});
            }
            std::set<std::array<double, 3>> all;
            for (Index i = 0; i < soup.vertex_count(); ++i) all.insert({soup.positions(i, 0), soup.positions(i, 1), soup.positions(i, 2)});
            CHECK(seen == all);
        }
    }
    SUBCASE("bad configs") {
        CropConfig c;
        c.extent = 0;
        CHECK_THROWS_AS(crop_scene(scene, c), ConfigError);
        c = CropConfig{};
        c.reject_threshold = 1.5;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
}

TEST_CASE("crop rejection") {
    Mesh m = test::flat_grid(10, 10, 0.1);
    Labels labels = Labels::Zero(100);
    m.labels = labels;
    CHECK_FALSE(reject_crop(m));
    labels.head(81).setConstant(kUnlabeled);
    m.labels = labels;
    CHECK(reject_crop(m));
    labels[80] = 1;
    m.labels = labels;
    CHECK_FALSE(reject_crop(m));  // exactly 80 % is kept
    m.labels.reset();
    CHECK(reject_crop(m));
}

TEST_CASE("affine augmentation") {
    std::mt19937_64 rng(11);
    Mesh m = test::with_attributes(test::bumpy_grid(8, 8, 0.2, rng), 3, rng);

    SUBCASE("identity draw") {
        const Mesh out = apply_affine(m, AffineDraw{});
        CHECK(out.positions == m.positions);
        CHECK((*out.normals - *m.normals).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("rotation is an isometry, scale multiplies distances") {
        AffineDraw rot;
        rot.angle = 1.234;
        rot.translation = Vec3(0.05, -0.02, 0.07);
        AffineDraw scaled = rot;
        scaled.scale = 1.1;
        const Mesh a = apply_affine(m, rot), b = apply_affine(m, scaled);
        for (Index i = 0; i < m.vertex_count(); i += 3) {
            for (Index j = i + 1; j < m.vertex_count(); j += 5) {
                CHECK(std::abs(distance(a, i, j) - distance(m, i, j)) < 1e-9);
                CHECK(std::abs(distance(b, i, j) - 1.1 * distance(m, i, j)) < 1e-9);
            }
        }
        // Normals follow the rotation only and stay unit length.
        for (Index i = 0; i < m.vertex_count(); ++i) {
            const Vec3 n = m.normals->row(i);
            const Vec3 expect = Eigen::AngleAxisd(1.234, Vec3::UnitZ()) * n;
            CHECK((Vec3(b.normals->row(i)) - expect).norm() < 1e-12);
        }
        CHECK(b.colors == m.colors);
        CHECK(b.labels == m.labels);
    }
    SUBCASE("draws stay in range") {
        AffineConfig cfg;
        for (int k = 0; k < 1000; ++k) {
            const AffineDraw d = draw_affine(rng, cfg);
            CHECK(d.angle >= 0.0);
            CHECK(d.angle < 2 * std::numbers::pi);
            CHECK(d.scale >= 0.9);
            CHECK(d.scale <= 1.1);
            CHECK(d.translation.cwiseAbs().maxCoeff() <= 0.1);
        }
    }
    SUBCASE("hierarchy levels move together") {
        HierarchyConfig hc;
        hc.strategy = PoolingStrategy::VertexClustering;
        hc.cells = {0.5};
        const Hierarchy h = build_hierarchy(m, hc);
        AffineDraw d{0.3, 1.05, Vec3(0.1, 0.0, -0.1)};
        const Hierarchy moved = apply_affine(h, d);
        for (Index l = 0; l < h.level_count(); ++l) CHECK(moved.levels[l].positions == apply_affine(h.levels[l], d).positions);
        CHECK(moved.traces[0].assignment == h.traces[0].assignment);
    }
}

TEST_CASE("feature normalization") {
    Mesh cube;
    cube.positions.resize(8, 3);
    for (Index i = 0; i < 8; ++i) cube.positions.row(i) << 3.0 * (i & 1), 3.0 * ((i >> 1) & 1), 3.0 * ((i >> 2) & 1);
    cube.positions.rowwise() += Eigen::RowVector3d(10, -4, 2);
    cube.faces.resize(0, 3);
    cube.colors = Points::Constant(8, 3, 0.25);
    cube.normals = Points::Zero(8, 3);
    cube.normals->col(2).setOnes();

    const FeatureMatrix f = normalize_features(cube);
    CHECK(f.cols() == 9);
    for (Index i = 0; i < 8; ++i) {
        CHECK(f(i, 0) == (i & 1));
        CHECK(f(i, 1) == ((i >> 1) & 1));
        CHECK(f(i, 2) == ((i >> 2) & 1));
    }
    CHECK(f.middleCols(3, 3) == *cube.colors);
    CHECK(f.middleCols(6, 3) == *cube.normals);

    cube.positions.col(2).setConstant(1.5);
    CHECK(normalize_features(cube).col(2).isZero());

    cube.colors.reset();
    CHECK_THROWS_AS(normalize_features(cube), ValidationError);
}

TEST_CASE("toy scenes") {
    const Mesh a = make_toy_scene(ToySceneConfig{}, 4);
    const Mesh b = make_toy_scene(ToySceneConfig{}, 4);
    CHECK(validate_mesh(a).empty());
    CHECK(a.positions == b.positions);
    CHECK(a.colors == b.colors);
    CHECK(a.vertex_count() > 1500);
    CHECK(a.vertex_count() < 3000);
    std::set<Index> classes(a.labels->data(), a.labels->data() + a.labels->size());
    CHECK(classes == std::set<Index>{kToyFloor, kToyWall, kToyBox});
    // Box vertices sit above the floor, walls rise from the room boundary.
    for (Index i = 0; i < a.vertex_count(); ++i) {
        if ((*a.labels)[i] == kToyFloor) CHECK(a.positions(i, 2) == 0.0);
        if ((*a.labels)[i] == kToyWall) CHECK((a.positions(i, 0) == 0.0 || a.positions(i, 1) == 2.5));
    }
    ToySceneConfig bad;
    bad.box_max = 3.0;
    CHECK_THROWS_AS(make_toy_scene(bad, 1), ConfigError);
}

TEST_CASE("training epochs") {
    const std::vector<Sample> samples{small_toy(5)};

    SUBCASE("zero learning rate leaves parameters unchanged") {
        nn::Network net(small_net());
        nn::AdamConfig ac;
        ac.learning_rate = 0.0;
        nn::Adam adam(net.registry().parameters, ac);
        const auto before = parameter_values(net);
        std::mt19937_64 rng(1);
        const EpochStats st = train_epoch(net, adam, samples, TrainConfig{}, 0, rng);
        CHECK(st.batches == 1);
        CHECK(std::isfinite(st.mean_loss));
        CHECK(parameter_values(net) == before);
    }
    SUBCASE("fixed seeds reproduce the epoch loss") {
        std::vector<Sample> many{small_toy(5), small_toy(6), small_toy(7), small_toy(8), small_toy(9)};
        std::vector<double> losses;
        for (int run = 0; run < 2; ++run) {
            nn::Network net(small_net());
            nn::Adam adam(net.registry().parameters);
            std::mt19937_64 rng(42);
            double total = 0.0;
            for (int e = 0; e < 3; ++e) total += train_epoch(net, adam, many, TrainConfig{}, e, rng).mean_loss;
            losses.push_back(total);
        }
        CHECK(losses[0] == losses[1]);
    }
    SUBCASE("batching splits five samples into 4 + 1") {
        std::vector<Sample> many{small_toy(5), small_toy(6), small_toy(7), small_toy(8), small_toy(9)};
        nn::Network net(small_net());
        nn::Adam adam(net.registry().parameters);
        std::mt19937_64 rng(1);
        CHECK(train_epoch(net, adam, many, TrainConfig{}, 0, rng).batches == 2);
        CHECK(adam.steps() == 2);
    }
    SUBCASE("a single toy batch overfits within 200 epochs") {
        nn::Network net(small_net());
        nn::AdamConfig ac;
        ac.learning_rate = 1e-2;
        nn::Adam adam(net.registry().parameters, ac);
        TrainConfig cfg;
        cfg.augment = false;
        std::mt19937_64 rng(1);
        EpochStats st;
        for (int e = 0; e < 200; ++e) st = train_epoch(net, adam, samples, cfg, e, rng);
        CHECK(st.mean_loss < 0.05);
        CHECK(st.accuracy == 1.0);
    }
    SUBCASE("empty dataset") {
        nn::Network net(small_net());
        nn::Adam adam(net.registry().parameters);
        std::mt19937_64 rng(1);
        CHECK_THROWS_AS(train_epoch(net, adam, {}, TrainConfig{}, 0, rng), ValidationError);
    }
}

TEST_CASE("full-scene inference") {
    const Sample s = small_toy(5);
    nn::Network net(small_net());
    Index max_degree = 0;
    for (const auto& e : s.hierarchy.euclidean_edges) max_degree = std::max(max_degree, degree_stats(e).max_degree);

    InferenceTiming timing;
    const FeatureMatrix a = infer_full_scene(net, s.hierarchy, max_degree, 1, &timing);
    CHECK(a.rows() == s.hierarchy.levels[0].vertex_count());
    CHECK(a.cols() == kToyClasses);
    CHECK(timing.forward_seconds >= 0.0);
    CHECK(infer_full_scene(net, s.hierarchy, max_degree, 2) == a);  // no neighborhood exceeds T
    CHECK(infer_full_scene(net, s.hierarchy, std::nullopt, 3) == a);

    const FeatureMatrix b = infer_full_scene(net, s.hierarchy, 3, 9);
    CHECK(infer_full_scene(net, s.hierarchy, 3, 9) == b);
    CHECK(infer_full_scene(net, s.hierarchy, 3, 10) != b);
}

TEST_CASE("majority vote") {
    const FeatureMatrix single = one_hot_logits({0, 2, 1}, 6);
    CHECK(majority_vote(std::vector<FeatureMatrix>{single}) == argmax(single));

    const std::vector<FeatureMatrix> runs{one_hot_logits({2, 1}, 6), one_hot_logits({2, 3}, 6), one_hot_logits({5, 3}, 6)};
    CHECK(majority_vote(runs) == (Labels(2) << 2, 3).finished());

    const std::vector<FeatureMatrix> tie{one_hot_logits({3}, 6), one_hot_logits({1}, 6)};
    CHECK(majority_vote(tie)[0] == 1);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    FeatureMatrix r(50, 7);
    for (Index k = 0; k < r.size(); ++k) r.data()[k] = g(rng);
    CHECK(majority_vote(std::vector<FeatureMatrix>(5, r)) == argmax(r));

    CHECK_THROWS_AS(majority_vote(std::vector<FeatureMatrix>{}), ValidationError);
    CHECK_THROWS_AS(majority_vote(std::vector<FeatureMatrix>{single, one_hot_logits({0}, 6)}), ValidationError);
}

TEST_CASE("evaluation metrics") {
    SUBCASE("perfect predictions") {
        const Labels y = (Labels(5) << 0, 1, 2, 2, 1).finished();
        const EvalResult r = evaluate(y, y, 3);
        CHECK(r.miou == 1.0);
        CHECK(r.macc == 1.0);
        CHECK(r.accuracy == 1.0);
    }
    SUBCASE("constant prediction on a balanced two-class set") {
        const Labels truth = (Labels(4) << 0, 0, 1, 1).finished();
        const EvalResult r = evaluate(Labels::Zero(4), truth, 2);
        // Confusion [[2, 0], [2, 0]]: IoU_0 = 2 / 4, IoU_1 = 0.
        CHECK(r.confusion(0, 0) == 2);
        CHECK(r.confusion(1, 0) == 2);
        CHECK(r.iou[0] == 0.5);
        CHECK(r.iou[1] == 0.0);
        CHECK(r.miou == 0.25);
        CHECK(r.macc == 0.5);
    }
    SUBCASE("unlabeled vertices do not count") {
        std::mt19937_64 rng(4);
        std::uniform_int_distribution<Index> cls(0, 3);
        Labels truth(200), pred(200);
        for (Index i = 0; i < 200; ++i) {
            truth[i] = i % 7 == 0 ? kUnlabeled : cls(rng);
            pred[i] = cls(rng);
        }
        const EvalResult a = evaluate(pred, truth, 4);
        for (Index i = 0; i < 200; i += 7) pred[i] = (pred[i] + 1) % 4;
        const EvalResult b = evaluate(pred, truth, 4);
        CHECK(a.confusion == b.confusion);
        CHECK(a.miou == b.miou);
    }
    SUBCASE("brute-force oracle") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 50; ++trial) {
            const Index classes = 2 + trial % 6;
            const Index n = 1 + static_cast<Index>(rng() % 10000);
            std::uniform_int_distribution<Index> cls(0, classes - 1), maybe(-1, classes - 1);
            Labels truth(n), pred(n);
            for (Index i = 0; i < n; ++i) {
                truth[i] = maybe(rng);
                pred[i] = cls(rng);
            }
            truth[0] = 0;
            const EvalResult r = evaluate(pred, truth, classes);
            double iou_sum = 0, acc_sum = 0;
            int present = 0;
            for (Index c = 0; c < classes; ++c) {
                std::int64_t tp = 0, fp = 0, fn = 0;
                for (Index i = 0; i < n; ++i) {
                    if (truth[i] < 0) continue;
                    tp += truth[i] == c && pred[i] == c;
                    fp += truth[i] != c && pred[i] == c;
                    fn += truth[i] == c && pred[i] != c;
                }
                if (tp + fn == 0) {
                    CHECK(std::isnan(r.iou[c]));
                    continue;
                }
                ++present;
                const double iou = double(tp) / double(tp + fp + fn), acc = double(tp) / double(tp + fn);
                CHECK(r.iou[c] == doctest::Approx(iou).epsilon(1e-12));
                CHECK(r.class_accuracy[c] == doctest::Approx(acc).epsilon(1e-12));
                iou_sum += iou;
                acc_sum += acc;
            }
            CHECK(r.miou == doctest::Approx(iou_sum / present).epsilon(1e-12));
            CHECK(r.macc == doctest::Approx(acc_sum / present).epsilon(1e-12));
            for (Index t = 0; t < classes; ++t)
                for (Index p = 0; p < classes; ++p) CHECK(r.confusion(t, p) >= 0);
        }
    }
    SUBCASE("errors and serialization") {
        CHECK_THROWS_AS(evaluate(Labels::Zero(3), Labels::Constant(3, kUnlabeled), 2), ValidationError);
        CHECK_THROWS_AS(evaluate(Labels::Zero(3), Labels::Zero(2), 2), ValidationError);
        CHECK_THROWS_AS(evaluate(Labels::Constant(2, 5), Labels::Zero(2), 2), ValidationError);
        const EvalResult r = evaluate(Labels::Zero(4), (Labels(4) << 0, 0, 1, 1).finished(), 3);
        const auto j = to_json(r);
        CHECK(j["miou"] == 0.25);
        CHECK(j["iou"][2].is_null());
        CHECK(j["confusion"][1][0] == 2);
        const std::string csv = to_csv(r);
        CHECK(csv.rfind("class,present,iou,accuracy\n0,1,0.5,1\n1,1,0,0\n2,0,,\n", 0) == 0);
        CHECK(csv.find("mean,,0.25,0.5\n") != std::string::npos);
    }
}

TEST_CASE("dataset manifest") {
    const auto dir = test::temp_dir("manifest");
    DatasetManifest m;
    m.classes = 3;
    m.scenes.push_back({"a", dir / "meshes" / "a.ply", dir / "hier" / "a", "train"});
    m.scenes.push_back({"b", dir / "meshes" / "b.ply", dir / "hier" / "b", "test"});
    save_dataset_manifest(m, dir / "dataset.json");
    const DatasetManifest back = load_dataset_manifest(dir / "dataset.json");
    CHECK(back.classes == 3);
    REQUIRE(back.scenes.size() == 2);
    CHECK(back.scenes[1].hierarchy == (dir / "hier" / "b").lexically_normal());
    CHECK(back.split("test").size() == 1);
    CHECK(back.split("train")[0].name == "a");

    std::ofstream(dir / "bad.json") << R"({"classes": 3, "scenes": [{"name": "x", "split": "holdout"}]})";
    CHECK_THROWS_AS(load_dataset_manifest(dir / "bad.json"), ConfigError);
    std::ofstream(dir / "broken.json") << "{";
    CHECK_THROWS_AS(load_dataset_manifest(dir / "broken.json"), IoError);
    CHECK_THROWS_AS(load_dataset_manifest(dir / "nope.json"), IoError);
}
