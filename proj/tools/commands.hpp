#ifndef DCM_TOOLS_COMMANDS_HPP
#define DCM_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcm/hierarchy.hpp"
#include "dcm/neighborhoods.hpp"
#include "dcm/nn/network.hpp"

namespace dcm::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

/// What a command reports back for its run manifest.
struct RunRecord {
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json seeds = nlohmann::json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    nlohmann::json timings = nlohmann::json::object();
    fs::path manifest;  // default location of the run manifest
};

void write_run_manifest(const std::string& command, const RunRecord& record, const fs::path& path, double total_seconds);

struct SubdivideOptions {
    fs::path mesh;
    fs::path out;
    double min_edge = 0.02;
    int passes = 1;
    fs::path cloud;
};
RunRecord run_subdivide(const SubdivideOptions& o);

struct HierarchyOptions {
    std::string strategy = "vc+qem";
    std::vector<double> cells{0.04, 0.08, 0.16, 0.32};
    double qem_ratio = 0.3;
    int qem_levels = 3;
    double pair_threshold = -1.0;
    std::vector<Index> fps_counts;
    std::vector<double> radius;  // empty: default radii
    Index knn = 0;               // > 0 selects k-nn instead of radius
    std::uint64_t seed = 0;

    HierarchyConfig config() const;
    std::vector<NeighborhoodConfig> neighborhoods(Index levels) const;
    nlohmann::json to_json() const;
};

struct BuildHierarchyOptions {
    HierarchyOptions hierarchy;
    fs::path mesh;
    fs::path dataset;
    fs::path out;
    bool crop = false;
    double crop_extent = 3.0;
    double crop_stride = 1.5;
    double reject_threshold = 0.8;
    unsigned threads = 1;
};
RunRecord run_build_hierarchy(const BuildHierarchyOptions& o);

struct GraphStatsOptions {
    fs::path hierarchy;
    std::optional<Index> res;
    std::uint64_t seed = 0;
    fs::path out;
};
RunRecord run_graph_stats(const GraphStatsOptions& o);

struct NetworkOptions {
    std::string arch = "dcm";  // dcm | scm-geo | scm-euc
    fs::path config;           // NetworkConfig JSON; overrides arch
    Index levels = 0;          // 0 keeps the preset
    Index blocks = 0;
    Index width = 0;
    Index head = 0;

    nn::NetworkConfig build(Index classes, std::uint64_t seed) const;
};

struct TrainOptions {
    NetworkOptions network;
    fs::path dataset;
    fs::path out;
    int epochs = 200;
    Index batch_size = 4;
    Index res_train = 15;
    Index res_test = 25;
    double lr = 1e-3;
    double lr_decay = 0.5;
    int lr_decay_every = 40;
    bool augment = true;
    std::uint64_t seed = 0;
};
RunRecord run_train(const TrainOptions& o);

struct InferOptions {
    fs::path checkpoint;
    fs::path hierarchy;
    fs::path dataset;
    std::string split = "test";
    fs::path out;  // logits file, or directory in dataset mode
    fs::path predictions;
    Index res_test = 25;
    bool no_res = false;
    bool augment = false;
    std::uint64_t seed = 0;
};
RunRecord run_infer(const InferOptions& o);

struct VoteOptions {
    std::vector<fs::path> logits;
    fs::path out;
};
RunRecord run_vote(const VoteOptions& o);

struct EvalOptions {
    fs::path predictions;  // label file or .logits
    fs::path truth;        // mesh file or hierarchy directory
    fs::path dataset;
    std::string split = "test";
    fs::path predictions_dir;
    Index classes = 0;  // 0: from the dataset manifest
    fs::path out;       // prefix; writes .json and .csv
};
RunRecord run_eval(const EvalOptions& o);

struct MakeToyOptions {
    fs::path out;
    Index train = 8;
    Index test = 4;
    std::uint64_t seed = 1;
    double size = 2.5;
    double spacing = 0.08;
};
RunRecord run_make_toy(const MakeToyOptions& o);

}  // namespace dcm::cli

#endif  // DCM_TOOLS_COMMANDS_HPP
