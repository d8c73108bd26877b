#ifndef DCM_PIPELINE_HPP
#define DCM_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcm/hierarchy.hpp"
#include "dcm/mesh.hpp"
#include "dcm/nn/network.hpp"
#include "dcm/nn/optim.hpp"

namespace dcm {

struct CropConfig {
    double extent = 3.0;  // window side in meters
    double stride = 1.5;
    double reject_threshold = 0.8;  // max unlabeled fraction of a training crop

    void validate() const;
};

/// Sweeps an extent x extent window over the xy bounding box: origins are
/// min + k * stride for every k with origin < max (k = 0 always). A crop keeps
/// the vertices inside its window (closed bounds) and the faces whose three
/// vertices are kept; empty crops are dropped.
std::vector<Mesh> crop_scene(const Mesh& mesh, const CropConfig& config);

/// True when more than `threshold` of the vertices are unlabeled.
bool reject_crop(const Mesh& crop, double threshold = 0.8);

struct AffineConfig {
    double scale_min = 0.9;
    double scale_max = 1.1;
    double jitter = 0.1;  // per-axis translation range in meters
    bool rotate = true;   // about z, full circle
};

struct AffineDraw {
    double angle = 0.0;
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();
};

AffineDraw draw_affine(std::mt19937_64& rng, const AffineConfig& config = {});

/// p -> scale * R_z(angle) p + translation; normals are rotated only.
Mesh apply_affine(const Mesh& mesh, const AffineDraw& draw);
Mesh random_affine(const Mesh& mesh, std::mt19937_64& rng, const AffineConfig& config = {});

/// The same transform on every level; edges and traces are reused as cached.
Hierarchy apply_affine(const Hierarchy& hierarchy, const AffineDraw& draw);

inline constexpr Index kFeatureWidth = 9;

/// [position, color, normal] rows. Positions are min-max scaled to [0,1] per
/// axis over this mesh; an axis with zero extent maps to 0.
FeatureMatrix normalize_features(const Mesh& mesh);

/// A precomputed hierarchy with Euclidean edges attached.
struct Sample {
    std::string name;
    Hierarchy hierarchy;
};

struct TrainConfig {
    Index batch_size = 4;
    Index res_threshold = 15;
    bool augment = true;
    AffineConfig affine;
};

struct EpochStats {
    double mean_loss = 0.0;
    Index batches = 0;
    double accuracy = 0.0;  // labeled vertices predicted right, on the augmented batches
};

/// One pass over the samples in shuffled batches. Each batch gets fresh
/// affine draws and a fresh RES draw of the Euclidean edges, then one Adam
/// step at the rate of `epoch`. All randomness comes from `rng`.
EpochStats train_epoch(nn::Network& net, nn::Adam& adam, std::span<const Sample> samples, const TrainConfig& config,
                       int epoch, std::mt19937_64& rng);

struct InferenceTiming {
    double graph_seconds = 0.0;
    double forward_seconds = 0.0;
};

/// Eval-mode forward pass over a whole scene. RES with `res_threshold` draws
/// from `seed`; without a threshold every Euclidean edge is used.
FeatureMatrix infer_full_scene(nn::Network& net, const Hierarchy& hierarchy, std::optional<Index> res_threshold,
                               std::uint64_t seed, InferenceTiming* timing = nullptr);

/// Row-wise argmax, lowest index on ties.
Labels argmax(const FeatureMatrix& logits);

/// Per vertex, the most frequent argmax over runs; ties go to the lowest class.
Labels majority_vote(std::span<const FeatureMatrix> runs);

/// Logits file: magic "DCMLOGIT", uint64 rows, uint64 cols, float64
/// row-major data, little-endian.
void save_logits(const FeatureMatrix& logits, const std::filesystem::path& path);
FeatureMatrix load_logits(const std::filesystem::path& path);

/// One class index per line; kUnlabeled is written as -1.
void save_labels(const Labels& labels, const std::filesystem::path& path);
Labels load_labels(const std::filesystem::path& path);

struct EvalResult {
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> confusion;  // [truth][prediction]
    std::vector<double> iou;             // NaN for classes absent from the ground truth
    std::vector<double> class_accuracy;  // NaN likewise
    std::vector<bool> present;
    double miou = 0.0;
    double macc = 0.0;
    double accuracy = 0.0;  // overall labeled-vertex accuracy
    std::int64_t labeled = 0;
};

/// Unlabeled ground-truth vertices are ignored. Predictions outside
/// [0, classes) throw ValidationError, as does a set with no labeled vertex.
EvalResult evaluate(const Labels& predictions, const Labels& truth, Index classes);

nlohmann::json to_json(const EvalResult& r);
/// class,present,iou,accuracy rows followed by a mean row.
std::string to_csv(const EvalResult& r);

struct SceneEntry {
    std::string name;
    std::filesystem::path mesh;       // optional source mesh
    std::filesystem::path hierarchy;  // serialized hierarchy directory
    std::string split = "train";      // train | val | test
};

struct DatasetManifest {
    Index classes = 0;
    std::vector<SceneEntry> scenes;

    std::vector<SceneEntry> split(const std::string& name) const;
};

/// Relative paths in the file are resolved against its directory.
DatasetManifest load_dataset_manifest(const std::filesystem::path& path);
void save_dataset_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace dcm

#endif  // DCM_PIPELINE_HPP
