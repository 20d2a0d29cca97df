#include "nkf/model.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <thread>

namespace nkf {

std::string_view to_string(Readout readout)
{
    switch (readout) {
    case Readout::column_sum: return "sum";
    case Readout::column_l1: return "l1";
    case Readout::column_l2: return "l2";
    }
    return "sum";
}

Readout parse_readout(std::string_view name)
{
    if (name == "sum" || name == "column_sum") return Readout::column_sum;
    if (name == "l1" || name == "column_l1") return Readout::column_l1;
    if (name == "l2" || name == "column_l2") return Readout::column_l2;
    throw InputError("unknown readout '" + std::string(name) + "' (expected sum, l1 or l2)");
}

Eigen::VectorXd readout(const Eigen::MatrixXd& integrals, Readout kind)
{
    switch (kind) {
    case Readout::column_sum: return integrals.colwise().sum().transpose();
    case Readout::column_l1: return integrals.cwiseAbs().colwise().sum().transpose();
    case Readout::column_l2: return integrals.colwise().norm().transpose();
    }
    return {};
}

Eigen::MatrixXd readout_backward(const Eigen::MatrixXd& integrals, Readout kind,
                                 const Eigen::VectorXd& upstream)
{
    Eigen::MatrixXd grad(integrals.rows(), integrals.cols());
    for (Index j = 0; j < integrals.cols(); ++j) {
        switch (kind) {
        case Readout::column_sum: grad.col(j).setConstant(upstream(j)); break;
        case Readout::column_l1:
            grad.col(j) = integrals.col(j).unaryExpr([](double x) {
                return double((x > 0.0) - (x < 0.0));
            }) * upstream(j);
            break;
        case Readout::column_l2: {
            const double norm = integrals.col(j).norm();
            if (norm == 0.0)
                grad.col(j).setZero();
            else
                grad.col(j) = integrals.col(j) * (upstream(j) / norm);
            break;
        }
        }
    }
    return grad;
}

Eigen::VectorXd cross_entropy_gradient(const Eigen::VectorXd& logits, int label)
{
    Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
    p /= p.sum();
    p(label) -= 1.0;
    return p;
}

void TrainConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InputError(std::string("config: ") + what);
    };
    require(lr > 0 && std::isfinite(lr), "lr must be positive");
    require(batch_size > 0, "batch_size must be positive");
    require(hidden_dim >= 2, "hidden_dim must be at least 2");
    require(steps > 0, "steps must be positive");
    require(max_epochs >= 0, "max_epochs must be non-negative");
    require(early_stop_patience > 0, "early_stop_patience must be positive");
    require(plateau_factor > 0 && plateau_factor < 1, "plateau_factor must be in (0, 1)");
    require(plateau_patience > 0, "plateau_patience must be positive");
    require(min_lr >= 0, "min_lr must be non-negative");
    require(k >= 0, "k must be non-negative");
    require(num_forms > 0, "num_forms must be positive");
    require(optimizer == "adam" || optimizer == "sgd", "optimizer must be adam or sgd");
    require(threads > 0, "threads must be positive");
}

Index KFormClassifier::parameter_count() const
{
    return form.psi().parameter_count() + (head ? head->parameter_count() : 0);
}

Eigen::VectorXd KFormClassifier::parameters() const
{
    Eigen::VectorXd flat(parameter_count());
    const Index psi_count = form.psi().parameter_count();
    flat.head(psi_count) = form.psi().parameters();
    if (head) flat.tail(head->parameter_count()) = head->parameters();
    return flat;
}

void KFormClassifier::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat)
{
    if (flat.size() != parameter_count()) throw InputError("classifier: parameter count mismatch");
    const Index psi_count = form.psi().parameter_count();
    form.psi().set_parameters(flat.head(psi_count));
    if (head) head->set_parameters(flat.tail(head->parameter_count()));
}

KFormClassifier make_classifier(const TrainConfig& cfg, int ambient_dim, int num_classes)
{
    cfg.validate();
    if (num_classes < 2) throw InputError("classifier: need at least 2 classes");
    if (cfg.k > ambient_dim)
        throw InputError("classifier: k=" + std::to_string(cfg.k) + " exceeds ambient dimension "
                         + std::to_string(ambient_dim));
    if (!cfg.use_head && cfg.num_forms != num_classes)
        throw InputError("classifier: without a head num_forms must equal the number of classes");

    std::mt19937_64 rng(cfg.seed);
    const std::vector<Index> hidden{cfg.hidden_dim, cfg.hidden_dim / 2};
    KFormClassifier model;
    model.form = NeuralKForm<double>::random(ambient_dim, cfg.k, cfg.num_forms, hidden, cfg.activation, rng);
    model.readout = cfg.readout;
    model.num_classes = num_classes;
    if (cfg.use_head) {
        const std::vector<Index> widths{cfg.num_forms, cfg.hidden_dim, cfg.hidden_dim / 2, num_classes};
        model.head = Mlp<double>::random(widths, cfg.activation, rng);
    }
    return model;
}

std::vector<int> Dataset::labels() const
{
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(item.label);
    return out;
}

void Dataset::validate() const
{
    if (num_classes < 1) throw InputError("dataset: no classes");
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        if (item.label < 0 || item.label >= num_classes)
            throw InputError("dataset: item " + std::to_string(i) + " label out of range");
        if (item.embedding.ambient_dim() != ambient_dim)
            throw InputError("dataset: item " + std::to_string(i) + " has ambient dimension "
                             + std::to_string(item.embedding.ambient_dim()));
        item.embedding.check_covers(item.complex);
    }
    for (const auto* part : {&split.train, &split.val, &split.test})
        for (auto idx : *part)
            if (idx >= items.size()) throw InputError("dataset: split index out of range");
}

ChainTuple<double> chains_for_degree(const Item& item, int k)
{
    if (item.chains.size() > 0 && item.chains.dim() == k) return item.chains;
    return standard_basis_chains<double>(item.complex, k);
}

std::vector<Geometry> prepare_dataset(const Dataset& data, int k, int steps)
{
    const QuadraturePlan plan = make_quadrature_plan(k, steps);
    std::vector<Geometry> out;
    out.reserve(data.items.size());
    for (const auto& item : data.items)
        out.push_back(prepare_geometry(item.complex, item.embedding, chains_for_degree(item, k), plan));
    return out;
}

ForwardCache forward(const KFormClassifier& model, const Geometry& geometry)
{
    ForwardCache cache;
    cache.integrals = integration_matrix(model.form, geometry);
    cache.features = readout(cache.integrals, model.readout);
    cache.logits = model.head ? Eigen::VectorXd(model.head->forward(cache.features)) : cache.features;
    return cache;
}

double loss(const Eigen::VectorXd& logits, int label) { return cross_entropy<double>(logits, label); }

Eigen::VectorXd backward(const KFormClassifier& model, const Geometry& geometry,
                         const ForwardCache& cache, int label)
{
    if (cache.logits.size() != model.num_classes) throw InputError("backward: missing forward cache");
    const Eigen::VectorXd d_logits = cross_entropy_gradient(cache.logits, label);
    Eigen::VectorXd d_features = d_logits;
    Eigen::VectorXd head_grad;
    if (model.head) {
        auto back = mlp_backward(*model.head, cache.features, d_logits);
        head_grad = back.params.flatten();
        d_features = back.inputs.col(0);
    }
    const Eigen::MatrixXd d_integrals = readout_backward(cache.integrals, model.readout, d_features);
    const Eigen::VectorXd psi_grad = integration_matrix_backward(model.form, geometry, d_integrals).flatten();

    Eigen::VectorXd flat(model.parameter_count());
    flat.head(psi_grad.size()) = psi_grad;
    if (model.head) flat.tail(head_grad.size()) = head_grad;
    return flat;
}

int predict(const Eigen::VectorXd& logits)
{
    Index best = 0;
    for (Index i = 1; i < logits.size(); ++i)
        if (logits(i) > logits(best)) best = i;
    return static_cast<int>(best);
}

Evaluation evaluate(const KFormClassifier& model, const std::vector<Geometry>& geometries,
                    const std::vector<int>& labels, const std::vector<std::size_t>& indices)
{
    Evaluation ev;
    ev.correct.assign(std::size_t(model.num_classes), 0);
    ev.total.assign(std::size_t(model.num_classes), 0);
    if (indices.empty()) return ev;
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (auto idx : indices) {
        const auto cache = forward(model, geometries[idx]);
        const int label = labels[idx];
        loss_sum += loss(cache.logits, label);
        ++ev.total[std::size_t(label)];
        if (predict(cache.logits) == label) {
            ++ev.correct[std::size_t(label)];
            ++hits;
        }
    }
    ev.accuracy = double(hits) / double(indices.size());
    ev.mean_loss = loss_sum / double(indices.size());
    return ev;
}

namespace {

class PlateauScheduler {
public:
    PlateauScheduler(double factor, int patience, double min_lr)
        : factor_(factor), patience_(patience), min_lr_(min_lr)
    {
    }

    /// Returns the new learning rate.
    double observe(double metric, double lr)
    {
        if (metric < best_ * (1.0 - 1e-4)) {
            best_ = metric;
            bad_epochs_ = 0;
            return lr;
        }
        if (++bad_epochs_ > patience_) {
            bad_epochs_ = 0;
            return std::max(lr * factor_, min_lr_);
        }
        return lr;
    }

private:
    double factor_;
    int patience_;
    double min_lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
};

// Per-item work of one minibatch; results land in slots so the reduction
// order never depends on scheduling.
void run_batch(const KFormClassifier& model, const std::vector<Geometry>& geometries,
               const std::vector<int>& labels, std::span<const std::size_t> batch, int threads,
               std::vector<Eigen::VectorXd>& grads, std::vector<double>& losses,
               std::vector<int>& predictions)
{
    grads.assign(batch.size(), {});
    losses.assign(batch.size(), 0.0);
    predictions.assign(batch.size(), 0);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) {
            const auto idx = batch[b];
            const auto cache = forward(model, geometries[idx]);
            losses[b] = loss(cache.logits, labels[idx]);
            predictions[b] = predict(cache.logits);
            grads[b] = backward(model, geometries[idx], cache, labels[idx]);
        }
    };
    const std::size_t workers = std::min<std::size_t>(std::size_t(threads), batch.size());
    if (workers <= 1) {
        work(0, batch.size());
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (batch.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(batch.size(), begin + chunk);
            if (begin < end)
                pool.emplace_back([&, w, begin, end] {
                    try {
                        work(begin, end);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string format_number(double x)
{
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

} // namespace

PreparedData prepare(const Dataset& data, int k, int steps)
{
    data.validate();
    return {prepare_dataset(data, k, steps), data.labels(), data.num_classes, data.ambient_dim};
}

TrainResult train(const TrainConfig& cfg, const Dataset& data)
{
    cfg.validate();
    return train(cfg, prepare(data, cfg.k, cfg.steps), data.split);
}

TrainResult train(const TrainConfig& cfg, const PreparedData& data, const Split& split)
{
    cfg.validate();
    if (split.train.empty()) throw InputError("train: empty training split");
    if (data.geometries.size() != data.labels.size()) throw InputError("train: geometry count mismatch");
    for (const auto* part : {&split.train, &split.val, &split.test})
        for (auto idx : *part)
            if (idx >= data.labels.size()) throw InputError("train: split index out of range");

    const std::vector<int>& labels = data.labels;
    const std::vector<Geometry>& geometries = data.geometries;
    TrainResult result;
    result.model = make_classifier(cfg, data.ambient_dim, data.num_classes);
    KFormClassifier& model = result.model;

    const bool has_val = !split.val.empty();
    auto record = [&](int epoch, const char* split, double l, double acc) {
        result.history.push_back({epoch, split, l, acc});
    };

    const Evaluation initial_train = evaluate(model, geometries, labels, split.train);
    record(0, "train", initial_train.mean_loss, initial_train.accuracy);
    double best_metric = initial_train.mean_loss;
    if (has_val) {
        const Evaluation v = evaluate(model, geometries, labels, split.val);
        record(0, "val", v.mean_loss, v.accuracy);
        best_metric = v.mean_loss;
    }
    KFormClassifier best = model;

    Adam adam(AdamOptions{.lr = cfg.lr});
    Sgd sgd(SgdOptions{.lr = cfg.lr});
    double lr = cfg.lr;
    PlateauScheduler scheduler(cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr);
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    int stale_epochs = 0;

    std::vector<std::size_t> order = split.train;
    std::vector<Eigen::VectorXd> grads;
    std::vector<double> losses;
    std::vector<int> predictions;
    Eigen::VectorXd params = model.parameters();

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t hits = 0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch_size));
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            run_batch(model, geometries, labels, batch, cfg.threads, grads, losses, predictions);

            Eigen::VectorXd total = Eigen::VectorXd::Zero(params.size());
            for (std::size_t b = 0; b < batch.size(); ++b) {
                if (!std::isfinite(losses[b]))
                    throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch)
                                          + " on item " + std::to_string(batch[b]));
                loss_sum += losses[b];
                hits += predictions[b] == labels[batch[b]] ? 1 : 0;
                total += grads[b];
            }
            total /= double(batch.size());
            if (!total.allFinite())
                throw DivergenceError("train: non-finite gradient at epoch " + std::to_string(epoch)
                                      + " (lr " + format_number(lr) + ")");
            if (cfg.optimizer == "sgd") {
                sgd.set_lr(lr);
                sgd.step(params, total);
            } else {
                adam.set_lr(lr);
                adam.step(params, total);
            }
            model.set_parameters(params);
        }
        record(epoch, "train", loss_sum / double(order.size()), double(hits) / double(order.size()));

        double metric = loss_sum / double(order.size());
        if (has_val) {
            const Evaluation v = evaluate(model, geometries, labels, split.val);
            record(epoch, "val", v.mean_loss, v.accuracy);
            metric = v.mean_loss;
        }
        if (!std::isfinite(metric))
            throw DivergenceError("train: non-finite validation loss at epoch " + std::to_string(epoch));
        result.epochs_run = epoch;

        lr = scheduler.observe(metric, lr);
        if (metric < best_metric) {
            best_metric = metric;
            best = model;
            result.best_epoch = epoch;
            stale_epochs = 0;
        } else if (++stale_epochs >= cfg.early_stop_patience) {
            break;
        }
    }
    result.model = std::move(best);
    return result;
}

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, int folds,
                                                       unsigned long long seed)
{
    if (folds < 2) throw InputError("kfold: need at least 2 folds");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
    std::size_t next = 0;
    for (auto& [label, members] : by_class) {
        if (members.size() < std::size_t(folds))
            throw InputError("kfold: class " + std::to_string(label) + " has "
                             + std::to_string(members.size()) + " items for "
                             + std::to_string(folds) + " folds");
        std::shuffle(members.begin(), members.end(), rng);
        for (auto idx : members) out[next++ % std::size_t(folds)].push_back(idx);
    }
    for (auto& fold : out) std::sort(fold.begin(), fold.end());
    return out;
}

Split stratified_split(const std::vector<int>& labels, const std::vector<std::size_t>& indices,
                       double train_fraction, double val_fraction, unsigned long long seed)
{
    if (train_fraction <= 0 || val_fraction < 0 || train_fraction + val_fraction > 1.0 + 1e-12)
        throw InputError("split: invalid fractions");
    std::map<int, std::vector<std::size_t>> by_class;
    for (auto idx : indices) by_class[labels.at(idx)].push_back(idx);
    std::mt19937_64 rng(seed);
    Split split;
    for (auto& [label, members] : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        const auto n = double(members.size());
        const auto n_train = std::size_t(std::llround(n * train_fraction));
        const auto n_val = std::min(members.size() - n_train, std::size_t(std::llround(n * val_fraction)));
        split.train.insert(split.train.end(), members.begin(), members.begin() + long(n_train));
        split.val.insert(split.val.end(), members.begin() + long(n_train),
                         members.begin() + long(n_train + n_val));
        split.test.insert(split.test.end(), members.begin() + long(n_train + n_val), members.end());
    }
    for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
    return split;
}

CvReport kfold_cv(const TrainConfig& cfg, const Dataset& data, int folds)
{
    cfg.validate();
    const PreparedData prepared = prepare(data, cfg.k, cfg.steps);
    const std::vector<int>& labels = prepared.labels;
    const auto partition = stratified_folds(labels, folds, cfg.seed);

    CvReport report;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> rest;
        for (int g = 0; g < folds; ++g)
            if (g != f) rest.insert(rest.end(), partition[std::size_t(g)].begin(), partition[std::size_t(g)].end());
        std::sort(rest.begin(), rest.end());

        const Split inner = stratified_split(labels, rest, 0.8, 0.2, cfg.seed + std::size_t(f));
        const Split split{inner.train, inner.val, partition[std::size_t(f)]};

        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = cfg.seed + static_cast<unsigned long long>(f);
        const TrainResult run = train(fold_cfg, prepared, split);
        const Evaluation ev = evaluate(run.model, prepared.geometries, labels, split.test);
        report.folds.push_back({ev.accuracy, ev.mean_loss, run.best_epoch, split.test.size()});
    }
    double sum = 0.0;
    for (const auto& f : report.folds) sum += f.accuracy;
    report.mean = sum / double(report.folds.size());
    double sq = 0.0;
    for (const auto& f : report.folds) sq += (f.accuracy - report.mean) * (f.accuracy - report.mean);
    report.stddev = std::sqrt(sq / double(report.folds.size()));
    return report;
}

} // namespace nkf
