#include <chrono>
#include <functional>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "commands.hpp"
#include "dcm/types.hpp"

using namespace dcm;
using namespace dcm::cli;

namespace {

void add_hierarchy_flags(CLI::App& c, HierarchyOptions& h) {
    c.add_option("--strategy", h.strategy, "Pooling strategy: vc, vc+qem or fps")->capture_default_str();
    c.add_option("--cells", h.cells, "Vertex clustering cell sizes in meters; vc+qem uses the first")
        ->delimiter(',')
        ->capture_default_str();
    c.add_option("--qem-ratio", h.qem_ratio, "Vertex ratio kept by each QEM level")->capture_default_str();
    c.add_option("--qem-levels", h.qem_levels, "Number of QEM levels after the first clustering step")->capture_default_str();
    c.add_option("--pair-threshold", h.pair_threshold, "Max distance of non-edge QEM pairs; negative uses the first cell")
        ->capture_default_str();
    c.add_option("--fps-counts", h.fps_counts, "Vertex counts per coarse level for fps")->delimiter(',');
    c.add_option("--radius", h.radius, "Euclidean radius per level in meters; missing levels double the last")
        ->delimiter(',')
        ->default_str("0.05 doubling per level");
    c.add_option("--knn", h.knn, "Use k nearest neighbors instead of a radius graph")->capture_default_str();
    c.add_option("--seed", h.seed, "Seed for fps start points")->capture_default_str();
}

void add_network_flags(CLI::App& c, NetworkOptions& n) {
    c.add_option("--arch", n.arch, "Network preset: dcm, scm-geo or scm-euc")->capture_default_str();
    c.add_option("--network-config", n.config, "NetworkConfig JSON file; replaces the preset");
    c.add_option("--levels", n.levels, "Override the number of mesh levels");
    c.add_option("--blocks", n.blocks, "Override the blocks per level");
    c.add_option("--width", n.width, "Override the level output width");
    c.add_option("--head", n.head, "Override the hidden width of the head");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mesh hierarchies and dual geodesic/Euclidean convolution networks for mesh segmentation"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    std::string manifest_override;
    app.add_option("--run-manifest", manifest_override, "Where to write the run manifest (default: next to the outputs)");

    std::function<RunRecord()> run;

    SubdivideOptions sub;
    auto* c_sub = app.add_subcommand("subdivide", "Midpoint subdivision, optionally transferring colors and labels from a point cloud");
    c_sub->add_option("--mesh", sub.mesh, "Input mesh (.ply or .off)")->required();
    c_sub->add_option("--out", sub.out, "Output mesh")->required();
    c_sub->add_option("--min-edge", sub.min_edge, "Split edges longer than this, in meters")->capture_default_str();
    c_sub->add_option("--passes", sub.passes, "Number of subdivision passes")->capture_default_str();
    c_sub->add_option("--cloud", sub.cloud, "Labeled point cloud (.ply) to interpolate from");
    c_sub->callback([&] { run = [&] { return run_subdivide(sub); }; });

    BuildHierarchyOptions bh;
    bh.threads = std::max(1u, std::thread::hardware_concurrency());
    auto* c_bh = app.add_subcommand("build-hierarchy", "Pool a mesh into levels and attach Euclidean neighborhoods");
    c_bh->add_option("--mesh", bh.mesh, "Input mesh");
    c_bh->add_option("--dataset", bh.dataset, "Dataset manifest; builds one hierarchy per scene");
    c_bh->add_option("--out", bh.out, "Output hierarchy directory, or dataset output directory")->required();
    add_hierarchy_flags(*c_bh, bh.hierarchy);
    c_bh->add_flag("--crop", bh.crop, "Cut training scenes into overlapping crops");
    c_bh->add_option("--crop-extent", bh.crop_extent, "Crop side length in meters")->capture_default_str();
    c_bh->add_option("--crop-stride", bh.crop_stride, "Crop stride in meters")->capture_default_str();
    c_bh->add_option("--reject-threshold", bh.reject_threshold, "Drop crops whose unlabeled fraction exceeds this")
        ->capture_default_str();
    c_bh->add_option("--threads", bh.threads, "Worker threads for dataset runs")->capture_default_str();
    c_bh->callback([&] { run = [&] { return run_build_hierarchy(bh); }; });

    GraphStatsOptions gs;
    Index gs_res = 0;
    auto* c_gs = app.add_subcommand("graph-stats", "Print per-level vertex and degree statistics of a hierarchy");
    c_gs->add_option("--hierarchy", gs.hierarchy, "Hierarchy directory")->required();
    c_gs->add_option("--res", gs_res, "Apply random edge sampling with this threshold first");
    c_gs->add_option("--seed", gs.seed, "Sampling seed")->capture_default_str();
    c_gs->add_option("--out", gs.out, "Also write the statistics as JSON");
    c_gs->callback([&] {
        if (gs_res > 0) gs.res = gs_res;
        run = [&] { return run_graph_stats(gs); };
    });

    TrainOptions tr;
    bool no_augment = false;
    auto* c_tr = app.add_subcommand("train", "Train a network on the training split of a dataset");
    c_tr->add_option("--dataset", tr.dataset, "Dataset manifest with hierarchies")->required();
    c_tr->add_option("--out", tr.out, "Output directory")->required();
    add_network_flags(*c_tr, tr.network);
    c_tr->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
    c_tr->add_option("--batch-size", tr.batch_size, "Scenes per batch")->capture_default_str();
    c_tr->add_option("--res-train", tr.res_train, "Random edge sampling threshold during training")->capture_default_str();
    c_tr->add_option("--res-test", tr.res_test, "Random edge sampling threshold for validation")->capture_default_str();
    c_tr->add_option("--lr", tr.lr, "Initial Adam learning rate")->capture_default_str();
    c_tr->add_option("--lr-decay", tr.lr_decay, "Learning rate factor per decay step")->capture_default_str();
    c_tr->add_option("--lr-decay-every", tr.lr_decay_every, "Epochs per decay step")->capture_default_str();
    c_tr->add_flag("--no-augment", no_augment, "Disable affine augmentation");
    c_tr->add_option("--seed", tr.seed, "Seed for weights, shuffling, augmentation and sampling")->capture_default_str();
    c_tr->callback([&] {
        tr.augment = !no_augment;
        run = [&] { return run_train(tr); };
    });

    InferOptions inf;
    auto* c_inf = app.add_subcommand("infer", "Predict per-vertex logits for full scenes");
    c_inf->add_option("--checkpoint", inf.checkpoint, "Model checkpoint")->required();
    c_inf->add_option("--hierarchy", inf.hierarchy, "Hierarchy directory");
    c_inf->add_option("--dataset", inf.dataset, "Dataset manifest; infers every scene of --split");
    c_inf->add_option("--split", inf.split, "Dataset split")->capture_default_str();
    c_inf->add_option("--out", inf.out, "Logits file, or output directory with --dataset")->required();
    c_inf->add_option("--predictions", inf.predictions, "Also write argmax labels");
    c_inf->add_option("--res-test", inf.res_test, "Random edge sampling threshold")->capture_default_str();
    c_inf->add_flag("--no-res", inf.no_res, "Use the full Euclidean neighborhoods");
    c_inf->add_flag("--augment", inf.augment, "Apply a random affine transform first (for voting)");
    c_inf->add_option("--seed", inf.seed, "Seed for sampling and augmentation")->capture_default_str();
    c_inf->callback([&] { run = [&] { return run_infer(inf); }; });

    VoteOptions vo;
    auto* c_vo = app.add_subcommand("vote", "Majority vote over several logits files");
    c_vo->add_option("--logits", vo.logits, "Logits files")->required();
    c_vo->add_option("--out", vo.out, "Output label file")->required();
    c_vo->callback([&] { run = [&] { return run_vote(vo); }; });

    EvalOptions ev;
    auto* c_ev = app.add_subcommand("eval", "Per-class IoU and accuracy, mIoU and mAcc");
    c_ev->add_option("--predictions", ev.predictions, "Label file or logits file");
    c_ev->add_option("--truth", ev.truth, "Labeled mesh or hierarchy directory");
    c_ev->add_option("--dataset", ev.dataset, "Dataset manifest");
    c_ev->add_option("--split", ev.split, "Dataset split")->capture_default_str();
    c_ev->add_option("--predictions-dir", ev.predictions_dir, "Directory of <scene>.logits or <scene>.txt")
        ;
    c_ev->add_option("--classes", ev.classes, "Number of classes (default: from the dataset)");
    c_ev->add_option("--out", ev.out, "Output prefix; writes <prefix>.json and <prefix>.csv")->required();
    c_ev->callback([&] { run = [&] { return run_eval(ev); }; });

    MakeToyOptions toy;
    auto* c_toy = app.add_subcommand("make-toy", "Write a synthetic labeled room dataset (floor, walls, boxes)");
    c_toy->add_option("--out", toy.out, "Output directory")->required();
    c_toy->add_option("--train", toy.train, "Training scenes")->capture_default_str();
    c_toy->add_option("--test", toy.test, "Test scenes")->capture_default_str();
    c_toy->add_option("--size", toy.size, "Floor side length in meters")->capture_default_str();
    c_toy->add_option("--spacing", toy.spacing, "Grid spacing in meters")->capture_default_str();
    c_toy->add_option("--seed", toy.seed, "Scene seed")->capture_default_str();
    c_toy->callback([&] { run = [&] { return run_make_toy(toy); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }

    try {
        const auto t0 = std::chrono::steady_clock::now();
        const RunRecord record = run();
        const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const fs::path manifest = manifest_override.empty() ? record.manifest : fs::path(manifest_override);
        write_run_manifest(app.get_subcommands().front()->get_name(), record, manifest, total);
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
