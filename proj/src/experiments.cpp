#include "nkf/experiments.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "nkf/checkpoint.hpp"

namespace nkf {

using nlohmann::json;

ExperimentReport run_holdout(const TrainConfig& cfg, const Dataset& data, const HoldoutOptions& options)
{
    cfg.validate();
    const PreparedData prepared = prepare(data, cfg.k, cfg.steps);
    ExperimentReport report;
    report.labels = prepared.labels;
    if (data.split.train.empty()) {
        std::vector<std::size_t> all(data.items.size());
        std::iota(all.begin(), all.end(), std::size_t(0));
        report.split = stratified_split(prepared.labels, all, options.train_fraction, options.val_fraction, cfg.seed);
    } else {
        report.split = data.split;
    }
    report.run = train(cfg, prepared, report.split);
    report.test = evaluate(report.run.model, prepared.geometries, prepared.labels, report.split.test);
    report.representations = representations(report.run.model, prepared.geometries);
    return report;
}

PathExperiment default_path_experiment(unsigned long long seed)
{
    PathExperiment e;
    e.data.samples_per_class = 100;
    e.data.seed = seed;
    e.train.k = 1;
    e.train.num_forms = 3;
    e.train.use_head = false;
    e.train.readout = Readout::column_sum;
    e.train.lr = 1e-2;
    e.train.max_epochs = 100;
    e.train.seed = seed;
    return e;
}

SurfaceExperiment default_surface_experiment(unsigned long long seed)
{
    SurfaceExperiment e;
    e.data.grid = 10;
    e.data.samples_per_class = 100;
    e.data.seed = seed;
    e.train.k = 2;
    e.train.num_forms = 2;
    e.train.readout = Readout::column_l2;
    e.train.lr = 1e-2;
    e.train.max_epochs = 40;
    e.train.seed = seed;
    return e;
}

void write_holdout_artifacts(const std::filesystem::path& dir, const ExperimentReport& report)
{
    std::filesystem::create_directories(dir);
    write_text(dir / "metrics.jsonl", metrics_jsonl(report.run.history));
    write_text(dir / "representations.csv", representations_csv(report.representations, report.labels));
    save_classifier(dir / "model", report.run.model);
    const json summary{{"test_accuracy", report.test.accuracy},
                       {"test_loss", report.test.mean_loss},
                       {"test_size", report.split.test.size()},
                       {"train_size", report.split.train.size()},
                       {"val_size", report.split.val.size()},
                       {"best_epoch", report.run.best_epoch},
                       {"epochs_run", report.run.epochs_run},
                       {"parameter_count", report.run.model.parameter_count()}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
}

Eigen::MatrixXd representations(const KFormClassifier& model, const std::vector<Geometry>& geometries)
{
    Eigen::MatrixXd out(Index(geometries.size()), model.form.num_forms());
    for (std::size_t i = 0; i < geometries.size(); ++i)
        out.row(Index(i)) = forward(model, geometries[i]).features.transpose();
    return out;
}

json to_json(const TrainConfig& cfg)
{
    return {{"lr", cfg.lr},
            {"batch_size", cfg.batch_size},
            {"hidden_dim", cfg.hidden_dim},
            {"steps", cfg.steps},
            {"max_epochs", cfg.max_epochs},
            {"early_stop_patience", cfg.early_stop_patience},
            {"plateau_factor", cfg.plateau_factor},
            {"plateau_patience", cfg.plateau_patience},
            {"min_lr", cfg.min_lr},
            {"seed", cfg.seed},
            {"readout", std::string(to_string(cfg.readout))},
            {"k", cfg.k},
            {"num_forms", cfg.num_forms},
            {"activation", std::string(to_string(cfg.activation))},
            {"use_head", cfg.use_head},
            {"optimizer", cfg.optimizer},
            {"threads", cfg.threads}};
}

json to_json(const EpochMetrics& m)
{
    return {{"epoch", m.epoch}, {"split", m.split}, {"loss", m.loss}, {"accuracy", m.accuracy}};
}

json to_json(const CvReport& report)
{
    json folds = json::array();
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
        const auto& r = report.folds[f];
        folds.push_back({{"fold", f},
                         {"accuracy", r.accuracy},
                         {"loss", r.mean_loss},
                         {"best_epoch", r.best_epoch},
                         {"test_size", r.test_size}});
    }
    return {{"folds", folds}, {"mean_accuracy", report.mean}, {"std_accuracy", report.stddev}};
}

std::string metrics_jsonl(const std::vector<EpochMetrics>& history)
{
    std::string out;
    for (const auto& m : history) out += to_json(m).dump() + '\n';
    return out;
}

std::string representations_csv(const Eigen::MatrixXd& reps, const std::vector<int>& labels)
{
    std::ostringstream out;
    out.precision(17);
    for (Index j = 0; j < reps.cols(); ++j) out << 'r' << j + 1 << ',';
    out << "label\n";
    for (Index i = 0; i < reps.rows(); ++i) {
        for (Index j = 0; j < reps.cols(); ++j) out << reps(i, j) << ',';
        out << labels[std::size_t(i)] << '\n';
    }
    return out.str();
}

void write_text(const std::filesystem::path& file, const std::string& text)
{
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

double linear_probe_accuracy(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                             const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                             int num_classes, int iterations, double lr)
{
    if (train.empty() || test.empty()) throw InputError("linear probe: empty train or test set");
    const Index d = features.cols();
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
    for (auto i : train) mean += features.row(Index(i));
    mean /= double(train.size());
    Eigen::RowVectorXd scale = Eigen::RowVectorXd::Zero(d);
    for (auto i : train) scale += (features.row(Index(i)) - mean).cwiseAbs2();
    scale = (scale / double(train.size())).cwiseSqrt();
    for (Index c = 0; c < d; ++c)
        if (scale(c) == 0.0) scale(c) = 1.0;
    auto standardized = [&](std::size_t i) {
        return Eigen::VectorXd(((features.row(Index(i)) - mean).array() / scale.array()).transpose());
    };

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(num_classes, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(num_classes);
    for (int it = 0; it < iterations; ++it) {
        Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(num_classes, d);
        Eigen::VectorXd gb = Eigen::VectorXd::Zero(num_classes);
        for (auto i : train) {
            const Eigen::VectorXd x = standardized(i);
            const Eigen::VectorXd g = cross_entropy_gradient(w * x + b, labels[i]);
            gw += g * x.transpose();
            gb += g;
        }
        w -= lr * gw / double(train.size());
        b -= lr * gb / double(train.size());
    }
    std::size_t hits = 0;
    for (auto i : test)
        if (predict(w * standardized(i) + b) == labels[i]) ++hits;
    return double(hits) / double(test.size());
}

double mean_squared_error(const NeuralKForm<double>& form, const Eigen::MatrixXd& points,
                          const Eigen::MatrixXd& targets)
{
    return (form.psi().forward(points) - targets).squaredNorm() / double(targets.size());
}

double fit_scalings(NeuralKForm<double>& form, const Eigen::MatrixXd& points, const Eigen::MatrixXd& targets,
                    int iterations, double lr)
{
    if (targets.rows() != form.psi().output_dim() || targets.cols() != points.cols())
        throw InputError("fit_scalings: target shape mismatch");
    Adam adam(AdamOptions{.lr = lr});
    Eigen::VectorXd params = form.psi().parameters();
    for (int it = 0; it < iterations; ++it) {
        const Eigen::MatrixXd residual = form.psi().forward(points) - targets;
        const Eigen::MatrixXd upstream = residual * (2.0 / double(targets.size()));
        adam.step(params, mlp_backward(form.psi(), points, upstream).params.flatten());
        form.psi().set_parameters(params);
    }
    return mean_squared_error(form, points, targets);
}

} // namespace nkf
