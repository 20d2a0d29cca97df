#ifndef NKF_DATA_HPP
#define NKF_DATA_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "model.hpp"

namespace nkf {

/// Three classes of planar polylines: an arc traversed counter-clockwise
/// (bending left), the same arc traversed clockwise (bending right), and an
/// S-curve. The two arcs share their vertex distribution and differ only in
/// direction.
struct PathDatasetSpec {
    int samples_per_class = 100;
    int points = 20;
    double noise = 0.02;       // std-dev of per-point Gaussian jitter
    double translation = 0.1;  // half-width of the uniform per-path shift
    unsigned long long seed = 0;

    void validate() const;
};

/// Noise-free template of class `label` sampled at `points` parameters (rows).
Eigen::MatrixXd path_template(int label, int points);

Dataset gen_paths(const PathDatasetSpec& spec);

/// Triangulated squares over [0, 2pi]^2 lifted to z = sin(x) + noise (class
/// 0) or z = sin(y) + noise (class 1), each shifted by a random xy
/// translation.
struct SurfaceDatasetSpec {
    int grid = 10;
    int samples_per_class = 100;
    double noise = 0.1;
    double translation = 0.5;
    unsigned long long seed = 0;

    void validate() const;
};

/// g x g vertex grid, vertex (i, j) -> j * g + i, each square split along
/// its (i, j)-(i+1, j+1) diagonal.
SimplicialComplex grid_complex(int g);

Dataset gen_surfaces(const SurfaceDatasetSpec& spec);

/// Raw contents of a TU-format dataset directory. Node and graph ids are
/// 1-based as in the files.
struct TuDataset {
    std::string name;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::size_t> graph_indicator; // node -> graph
    std::vector<long> graph_labels;
    std::vector<std::vector<double>> node_attributes; // empty when absent
    std::vector<long> node_labels;                    // empty when absent

    std::size_t num_nodes() const { return graph_indicator.size(); }
    std::size_t num_graphs() const { return graph_labels.size(); }
    bool operator==(const TuDataset&) const = default;
};

/// Reads <dir>/<name>_A.txt, _graph_indicator.txt, _graph_labels.txt and the
/// optional _node_attributes.txt / _node_labels.txt. An empty name is
/// inferred from the single *_A.txt file in `dir`. Errors carry file:line.
TuDataset read_tu(const std::filesystem::path& dir, std::string name = {});

/// Edges deduplicated as undirected pairs and listed in both directions,
/// sorted.
TuDataset canonicalize(TuDataset raw);

void write_tu(const TuDataset& data, const std::filesystem::path& dir);

struct TuFeatureOptions {
    bool use_attributes = true;
    std::vector<int> attribute_columns; // empty: every column
    bool use_node_labels = true;        // one-hot, appended after attributes
    bool standardize = false;           // zero mean, unit variance per column
};

/// One item per graph: vertices and deduplicated undirected edges oriented by
/// increasing node id, node features as coordinates, the standard edge basis
/// as chains (a single empty chain for edgeless graphs). Labels map to
/// 0..C-1 in sorted order of the original values.
Dataset tu_to_dataset(const TuDataset& raw, const TuFeatureOptions& options = {});

Dataset parse_tu(const std::filesystem::path& dir, const std::string& name = {},
                 const TuFeatureOptions& options = {});

/// Self-describing JSON form of a dataset.
nlohmann::json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const nlohmann::json& bundle);

} // namespace nkf

#endif
