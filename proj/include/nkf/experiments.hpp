#ifndef NKF_EXPERIMENTS_HPP
#define NKF_EXPERIMENTS_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "data.hpp"
#include "model.hpp"

namespace nkf {

struct HoldoutOptions {
    double train_fraction = 0.6;
    double val_fraction = 0.2;
};

struct ExperimentReport {
    TrainResult run;
    Split split;
    Evaluation test;
    Eigen::MatrixXd representations; // one readout vector per item
    std::vector<int> labels;
};

/// Trains on a stratified train/val/test split (the dataset's own split when
/// it has one) and evaluates the best model on the test part.
ExperimentReport run_holdout(const TrainConfig& cfg, const Dataset& data, const HoldoutOptions& options = {});

/// Dataset and training settings of the synthetic runs. The dataset and the
/// model share one seed.
struct PathExperiment {
    PathDatasetSpec data;
    TrainConfig train;
    HoldoutOptions holdout;
};

struct SurfaceExperiment {
    SurfaceDatasetSpec data;
    TrainConfig train;
    HoldoutOptions holdout;
};

/// 300 paths, three headless 1-forms with column-sum readout.
PathExperiment default_path_experiment(unsigned long long seed = 0);
/// 200 surfaces on a 10 x 10 grid, two 2-forms, l2 readout and an MLP head.
SurfaceExperiment default_surface_experiment(unsigned long long seed = 0);

/// Writes metrics.jsonl, model.json/.bin, representations.csv and
/// summary.json under `dir`.
void write_holdout_artifacts(const std::filesystem::path& dir, const ExperimentReport& report);

/// Readout vectors of every geometry, one row per item.
Eigen::MatrixXd representations(const KFormClassifier& model, const std::vector<Geometry>& geometries);

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const EpochMetrics& m);
nlohmann::json to_json(const CvReport& report);

/// One JSON object per line.
std::string metrics_jsonl(const std::vector<EpochMetrics>& history);

/// Header r1..rl,label then one row per item.
std::string representations_csv(const Eigen::MatrixXd& reps, const std::vector<int>& labels);

void write_text(const std::filesystem::path& file, const std::string& text);

/// Multinomial logistic regression on standardized features, fitted by
/// full-batch gradient descent on `train` rows; accuracy on `test` rows.
double linear_probe_accuracy(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                             const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                             int num_classes, int iterations = 2000, double lr = 0.5);

/// Fits psi's outputs to `targets` (one column per point) by full-batch Adam on
/// the mean squared coefficient error; returns the final error.
double fit_scalings(NeuralKForm<double>& form, const Eigen::MatrixXd& points, const Eigen::MatrixXd& targets,
                    int iterations, double lr);

double mean_squared_error(const NeuralKForm<double>& form, const Eigen::MatrixXd& points,
                          const Eigen::MatrixXd& targets);

} // namespace nkf

#endif
