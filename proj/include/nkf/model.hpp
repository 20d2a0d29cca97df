#ifndef NKF_MODEL_HPP
#define NKF_MODEL_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "quadrature.hpp"

namespace nkf {

enum class Readout { column_sum, column_l1, column_l2 };

std::string_view to_string(Readout readout);
/// Accepts "sum", "l1", "l2" and the long names.
Readout parse_readout(std::string_view name);

/// Per-column statistic of an integration matrix.
Eigen::VectorXd readout(const Eigen::MatrixXd& integrals, Readout kind);

/// dLoss/dX given dLoss/d(readout). Subgradients: sign(0) = 0 for l1, and a
/// zero column passes zero gradient for l2.
Eigen::MatrixXd readout_backward(const Eigen::MatrixXd& integrals, Readout kind,
                                 const Eigen::VectorXd& upstream);

/// -log softmax(logits)[label], shifted by the max logit.
template <typename Scalar>
Scalar cross_entropy(const Vector<Scalar>& logits, int label)
{
    using std::exp;
    using std::log;
    const Scalar shift = logits.maxCoeff();
    Scalar total(0);
    for (Index i = 0; i < logits.size(); ++i) total += exp(logits(i) - shift);
    return shift + log(total) - logits(label);
}

/// softmax(logits) - onehot(label).
Eigen::VectorXd cross_entropy_gradient(const Eigen::VectorXd& logits, int label);

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 16;
    int hidden_dim = 16;
    int steps = 5;
    int max_epochs = 100;
    int early_stop_patience = 40;
    double plateau_factor = 0.5;
    int plateau_patience = 10;
    double min_lr = 1e-6;
    unsigned long long seed = 0;
    Readout readout = Readout::column_l2;
    int k = 1;
    int num_forms = 16;
    Activation activation = Activation::relu;
    bool use_head = true;
    std::string optimizer = "adam";
    int threads = 1;

    void validate() const;
};

/// Neural k-form, readout and classifier head. Without a head the readout
/// vector is used as logits, which requires num_forms == num_classes.
struct KFormClassifier {
    NeuralKForm<double> form;
    Readout readout = Readout::column_sum;
    std::optional<Mlp<double>> head;
    int num_classes = 2;

    Index parameter_count() const;
    /// psi parameters followed by head parameters.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat);
};

/// psi: n -> H -> H/2 -> C(n,k)*num_forms; head: num_forms -> H -> H/2 -> classes.
KFormClassifier make_classifier(const TrainConfig& cfg, int ambient_dim, int num_classes);

struct Item {
    SimplicialComplex complex;
    Embedding<double> embedding;
    ChainTuple<double> chains;
    int label = 0;
};

struct Split {
    std::vector<std::size_t> train, val, test;
};

struct Dataset {
    std::vector<Item> items;
    int num_classes = 0;
    int ambient_dim = 0;
    Split split;

    std::vector<int> labels() const;
    void validate() const;
};

using Geometry = IntegrationGeometry<double>;

std::vector<Geometry> prepare_dataset(const Dataset& data, int k, int steps);

/// Integration geometry of every item plus labels: everything training reads.
struct PreparedData {
    std::vector<Geometry> geometries;
    std::vector<int> labels;
    int num_classes = 0;
    int ambient_dim = 0;
};

PreparedData prepare(const Dataset& data, int k, int steps);

/// Chains to integrate for an item: the item's own chains when they are of
/// degree k, otherwise the standard basis of k-simplices.
ChainTuple<double> chains_for_degree(const Item& item, int k);

struct ForwardCache {
    Eigen::MatrixXd integrals;
    Eigen::VectorXd features;
    Eigen::VectorXd logits;
};

ForwardCache forward(const KFormClassifier& model, const Geometry& geometry);

double loss(const Eigen::VectorXd& logits, int label);

/// Flat gradient of loss(forward(...), label), in parameters() order.
Eigen::VectorXd backward(const KFormClassifier& model, const Geometry& geometry,
                         const ForwardCache& cache, int label);

struct EpochMetrics {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    KFormClassifier model;
    std::vector<EpochMetrics> history;
    int best_epoch = 0;
    int epochs_run = 0;
};

/// Minibatch training on data.split.train with Adam (or SGD), mean batch
/// loss, plateau LR decay and early stopping on the validation loss (training
/// loss when there is no validation split). Returns the best-validation model.
TrainResult train(const TrainConfig& cfg, const Dataset& data);
TrainResult train(const TrainConfig& cfg, const PreparedData& data, const Split& split);

struct Evaluation {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::vector<std::size_t> correct; // per class
    std::vector<std::size_t> total;   // per class
};

/// Argmax prediction; ties go to the lowest class index.
int predict(const Eigen::VectorXd& logits);

Evaluation evaluate(const KFormClassifier& model, const std::vector<Geometry>& geometries,
                    const std::vector<int>& labels, const std::vector<std::size_t>& indices);

/// Label-stratified partition of all indices into `folds` groups.
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, int folds,
                                                       unsigned long long seed);

/// Stratified split of `indices` by fractions (test gets the remainder).
Split stratified_split(const std::vector<int>& labels, const std::vector<std::size_t>& indices,
                       double train_fraction, double val_fraction, unsigned long long seed);

struct FoldResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    int best_epoch = 0;
    std::size_t test_size = 0;
};

struct CvReport {
    std::vector<FoldResult> folds;
    double mean = 0.0;
    double stddev = 0.0;
};

/// Stratified k-fold cross-validation; each training fold holds out 20% for
/// early stopping. Fold f trains with seed cfg.seed + f.
CvReport kfold_cv(const TrainConfig& cfg, const Dataset& data, int folds);

} // namespace nkf

#endif
