#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nkf/checkpoint.hpp"
#include "nkf/data.hpp"
#include "nkf/experiments.hpp"
#include "nkf/gradcheck.hpp"

namespace nkf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> train_keys{
    "lr",       "batch_size", "hidden_dim",       "steps", "max_epochs", "early_stop_patience",
    "plateau_factor", "plateau_patience", "min_lr", "seed", "readout", "k",
    "num_forms", "activation", "use_head", "optimizer", "threads"};

const std::set<std::string> path_keys{"samples_per_class", "points", "noise", "translation"};
const std::set<std::string> surface_keys{"grid", "samples_per_class", "noise", "translation"};
const std::set<std::string> graph_keys{"folds", "dataset_dir", "name", "use_attributes", "use_node_labels",
                                       "standardize"};

// Flag values; unset ones leave the config file or the defaults alone.
struct Flags {
    std::optional<std::string> config;
    std::optional<unsigned long long> seed;
    std::optional<int> epochs, batch_size, hidden_dim, steps, num_forms, k, folds, threads;
    std::optional<int> samples_per_class, grid;
    std::optional<double> lr;
    std::optional<std::string> readout, activation, optimizer, dataset_dir, name;
    std::optional<bool> use_head;
};

template <typename T>
void put(json& j, const char* key, const std::optional<T>& v)
{
    if (v) j[key] = *v;
}

json flags_json(const Flags& f)
{
    json j = json::object();
    put(j, "seed", f.seed);
    put(j, "max_epochs", f.epochs);
    put(j, "batch_size", f.batch_size);
    put(j, "hidden_dim", f.hidden_dim);
    put(j, "steps", f.steps);
    put(j, "num_forms", f.num_forms);
    put(j, "k", f.k);
    put(j, "folds", f.folds);
    put(j, "threads", f.threads);
    put(j, "samples_per_class", f.samples_per_class);
    put(j, "grid", f.grid);
    put(j, "lr", f.lr);
    put(j, "readout", f.readout);
    put(j, "activation", f.activation);
    put(j, "optimizer", f.optimizer);
    put(j, "dataset_dir", f.dataset_dir);
    put(j, "name", f.name);
    put(j, "use_head", f.use_head);
    return j;
}

json read_config(const fs::path& file)
{
    std::ifstream in(file);
    if (!in) throw InputError("cannot open config " + file.string());
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw InputError("config " + file.string() + ": expected a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw InputError("config " + file.string() + ": " + e.what());
    }
}

// Defaults, then the config file, then flags. Keys outside `allowed` are
// rejected wherever they come from.
json resolve(json settings, const Flags& flags, const std::set<std::string>& allowed)
{
    json layers = json::array();
    if (flags.config) layers.push_back(read_config(*flags.config));
    layers.push_back(flags_json(flags));
    for (const auto& layer : layers)
        for (const auto& [key, value] : layer.items()) {
            if (!allowed.count(key)) throw InputError("unknown config key '" + key + "'");
            settings[key] = value;
        }
    return settings;
}

template <typename T>
T get(const json& s, const std::string& key)
{
    try {
        return s.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError("config key '" + key + "' has the wrong type or is missing");
    }
}

TrainConfig train_from(const json& s)
{
    TrainConfig c;
    c.lr = get<double>(s, "lr");
    c.batch_size = get<int>(s, "batch_size");
    c.hidden_dim = get<int>(s, "hidden_dim");
    c.steps = get<int>(s, "steps");
    c.max_epochs = get<int>(s, "max_epochs");
    c.early_stop_patience = get<int>(s, "early_stop_patience");
    c.plateau_factor = get<double>(s, "plateau_factor");
    c.plateau_patience = get<int>(s, "plateau_patience");
    c.min_lr = get<double>(s, "min_lr");
    c.seed = get<unsigned long long>(s, "seed");
    c.readout = parse_readout(get<std::string>(s, "readout"));
    c.k = get<int>(s, "k");
    c.num_forms = get<int>(s, "num_forms");
    c.activation = parse_activation(get<std::string>(s, "activation"));
    c.use_head = get<bool>(s, "use_head");
    c.optimizer = get<std::string>(s, "optimizer");
    c.threads = get<int>(s, "threads");
    c.validate();
    return c;
}

std::set<std::string> keys_with(const std::set<std::string>& extra)
{
    std::set<std::string> all = train_keys;
    all.insert(extra.begin(), extra.end());
    return all;
}

void finish_holdout(const fs::path& dir, const ExperimentReport& report, const json& settings, std::ostream& out)
{
    write_holdout_artifacts(dir, report);
    write_text(dir / "config.json", settings.dump(2) + "\n");
    out << "test accuracy " << report.test.accuracy << " (best epoch " << report.run.best_epoch << " of "
        << report.run.epochs_run << "), wrote " << dir.string() << "\n";
}

int train_paths(const Flags& flags, const fs::path& dir, std::ostream& out)
{
    const auto d = default_path_experiment();
    json defaults = to_json(d.train);
    defaults.update({{"samples_per_class", d.data.samples_per_class},
                     {"points", d.data.points},
                     {"noise", d.data.noise},
                     {"translation", d.data.translation}});
    const json s = resolve(defaults, flags, keys_with(path_keys));
    PathDatasetSpec spec;
    spec.samples_per_class = get<int>(s, "samples_per_class");
    spec.points = get<int>(s, "points");
    spec.noise = get<double>(s, "noise");
    spec.translation = get<double>(s, "translation");
    spec.seed = get<unsigned long long>(s, "seed");
    const TrainConfig cfg = train_from(s);
    finish_holdout(dir, run_holdout(cfg, gen_paths(spec), d.holdout), s, out);
    return 0;
}

int train_surfaces(const Flags& flags, const fs::path& dir, std::ostream& out)
{
    const auto d = default_surface_experiment();
    json defaults = to_json(d.train);
    defaults.update({{"grid", d.data.grid},
                     {"samples_per_class", d.data.samples_per_class},
                     {"noise", d.data.noise},
                     {"translation", d.data.translation}});
    const json s = resolve(defaults, flags, keys_with(surface_keys));
    SurfaceDatasetSpec spec;
    spec.grid = get<int>(s, "grid");
    spec.samples_per_class = get<int>(s, "samples_per_class");
    spec.noise = get<double>(s, "noise");
    spec.translation = get<double>(s, "translation");
    spec.seed = get<unsigned long long>(s, "seed");
    const TrainConfig cfg = train_from(s);
    finish_holdout(dir, run_holdout(cfg, gen_surfaces(spec), d.holdout), s, out);
    return 0;
}

int train_graphs(const Flags& flags, const fs::path& dir, std::ostream& out)
{
    const TuFeatureOptions features;
    json defaults = to_json(TrainConfig{});
    defaults.update({{"folds", 5},
                     {"dataset_dir", nullptr},
                     {"name", ""},
                     {"use_attributes", features.use_attributes},
                     {"use_node_labels", features.use_node_labels},
                     {"standardize", features.standardize}});
    const json s = resolve(defaults, flags, keys_with(graph_keys));
    if (s.at("dataset_dir").is_null()) throw InputError("train-graphs needs --dataset-dir");
    TuFeatureOptions options;
    options.use_attributes = get<bool>(s, "use_attributes");
    options.use_node_labels = get<bool>(s, "use_node_labels");
    options.standardize = get<bool>(s, "standardize");
    const TrainConfig cfg = train_from(s);
    const Dataset data = parse_tu(get<std::string>(s, "dataset_dir"), get<std::string>(s, "name"), options);
    const CvReport report = kfold_cv(cfg, data, get<int>(s, "folds"));
    fs::create_directories(dir);
    write_text(dir / "report.json", to_json(report).dump(2) + "\n");
    write_text(dir / "config.json", s.dump(2) + "\n");
    out << data.items.size() << " graphs, " << report.folds.size() << "-fold accuracy " << report.mean << " +- "
        << report.stddev << ", wrote " << dir.string() << "\n";
    return 0;
}

std::string component_name(const MultiIndexTable& table, Index rank, int form)
{
    std::string name = "w" + std::to_string(form + 1);
    const auto& index = table[rank];
    for (std::size_t i = 0; i < index.size(); ++i)
        name += (i == 0 ? "_dx" : "^dx") + std::to_string(index[i] + 1);
    return name;
}

fs::path sidecar(fs::path file)
{
    return file.replace_extension(".config.json");
}

int export_field(const fs::path& checkpoint, int grid, double lo, double hi, const fs::path& file,
                 std::ostream& out)
{
    if (grid < 2) throw InputError("export-field: --grid must be at least 2");
    if (!(lo < hi)) throw InputError("export-field: need --lo < --hi");
    const auto form = load_any_form(checkpoint);
    const int n = form.n();
    const double rows = std::pow(double(grid), n);
    if (rows > 1e7) throw InputError("export-field: grid^n = " + std::to_string(rows) + " points is too many");

    Eigen::MatrixXd points(n, Index(rows));
    for (Index r = 0; r < points.cols(); ++r) {
        Index rest = r;
        for (int a = n - 1; a >= 0; --a) {
            points(a, r) = lo + (hi - lo) * double(rest % grid) / double(grid - 1);
            rest /= grid;
        }
    }
    const Eigen::MatrixXd values = form.psi().forward(points);

    std::ostringstream csv;
    csv.precision(17);
    for (int a = 0; a < n; ++a) csv << 'p' << a + 1 << ',';
    for (int j = 0; j < form.num_forms(); ++j)
        for (Index I = 0; I < form.num_components(); ++I)
            csv << component_name(form.table(), I, j)
                << (j + 1 == form.num_forms() && I + 1 == form.num_components() ? '\n' : ',');
    for (Index r = 0; r < points.cols(); ++r) {
        for (int a = 0; a < n; ++a) csv << points(a, r) << ',';
        for (Index c = 0; c < values.rows(); ++c) csv << values(c, r) << (c + 1 == values.rows() ? '\n' : ',');
    }
    write_text(file, csv.str());
    const json config{{"command", "export-field"}, {"checkpoint", checkpoint.string()}, {"grid", grid},
                      {"lo", lo}, {"hi", hi}};
    write_text(sidecar(file), config.dump(2) + "\n");
    out << points.cols() << " points x " << values.rows() << " scalings, wrote " << file.string() << "\n";
    return 0;
}

int gradcheck(unsigned long long seed, int instances, bool corrupt, const std::optional<std::string>& report,
              std::ostream& out)
{
    GradcheckOptions options;
    options.seed = seed;
    options.instances = instances;
    if (corrupt) options.corrupt = 1e-2;
    const auto suites = run_gradcheck(options);
    bool ok = true;
    json j = json::array();
    for (const auto& s : suites) {
        out << (s.passed ? "PASS " : "FAIL ") << s.name << ": " << s.checks << " checks, max rel err "
            << std::setprecision(4) << s.max_rel_error << " (tolerance " << options.tolerance << ")\n";
        ok = ok && s.passed;
        j.push_back({{"suite", s.name}, {"checks", s.checks}, {"max_rel_error", s.max_rel_error}, {"passed", s.passed}});
    }
    if (report) {
        write_text(*report, j.dump(2) + "\n");
        const json config{{"command", "gradcheck"}, {"seed", seed}, {"instances", instances},
                          {"tolerance", options.tolerance}, {"corrupt", options.corrupt}};
        write_text(sidecar(*report), config.dump(2) + "\n");
    }
    return ok ? 0 : 1;
}

void add_train_flags(CLI::App* cmd, Flags& f, std::string& out_dir)
{
    cmd->add_option("--config", f.config, "JSON file of settings; flags take precedence")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "seed for data generation, splits and initialisation");
    cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    cmd->add_option("--epochs", f.epochs, "maximum number of epochs");
    cmd->add_option("--lr", f.lr, "initial learning rate");
    cmd->add_option("--batch-size", f.batch_size);
    cmd->add_option("--hidden-dim", f.hidden_dim, "width of the hidden layers of psi and the head");
    cmd->add_option("--steps", f.steps, "quadrature subdivisions per edge");
    cmd->add_option("--readout", f.readout)->check(CLI::IsMember({"sum", "l1", "l2"}));
    cmd->add_option("--num-forms", f.num_forms, "number of learned forms");
    cmd->add_option("--k", f.k, "form degree");
    cmd->add_option("--activation", f.activation)->check(CLI::IsMember({"relu", "tanh", "sigmoid"}));
    cmd->add_option("--optimizer", f.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
    cmd->add_option("--use-head", f.use_head, "put an MLP head after the readout");
    cmd->add_option("--threads", f.threads, "worker threads per batch");
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Neural k-forms on simplicial complexes", "nkf"};
    app.require_subcommand(1);

    Flags flags;
    std::string out_dir = "runs";

    auto* paths = app.add_subcommand("train-paths", "classify synthetic planar paths with 1-forms");
    add_train_flags(paths, flags, out_dir);
    paths->add_option("--samples-per-class", flags.samples_per_class);

    auto* surfaces = app.add_subcommand("train-surfaces", "classify synthetic surfaces in R^3 with 2-forms");
    add_train_flags(surfaces, flags, out_dir);
    surfaces->add_option("--samples-per-class", flags.samples_per_class);
    surfaces->add_option("--grid", flags.grid, "vertices per side of the surface mesh");

    auto* graphs = app.add_subcommand("train-graphs", "k-fold cross-validation on a TU graph dataset");
    add_train_flags(graphs, flags, out_dir);
    graphs->add_option("--dataset-dir", flags.dataset_dir, "directory with <name>_A.txt and friends");
    graphs->add_option("--name", flags.name, "dataset name (inferred when omitted)");
    graphs->add_option("--folds", flags.folds);

    std::string checkpoint, field_file = "field.csv";
    int field_grid = 50;
    double lo = -1.0, hi = 1.0;
    auto* field = app.add_subcommand("export-field", "sample a trained form's scalings on a grid");
    field->add_option("--checkpoint", checkpoint, "checkpoint stem (without .json/.bin)")->required();
    field->add_option("--grid", field_grid, "points per axis")->capture_default_str();
    field->add_option("--lo", lo)->capture_default_str();
    field->add_option("--hi", hi)->capture_default_str();
    field->add_option("--out", field_file, "CSV file")->capture_default_str();

    unsigned long long check_seed = 0;
    int instances = 4;
    bool corrupt = false;
    std::optional<std::string> check_report;
    auto* check = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
    check->add_option("--seed", check_seed)->capture_default_str();
    check->add_option("--instances", instances, "random instances per suite and degree")->capture_default_str();
    check->add_flag("--corrupt", corrupt, "perturb the analytic gradients; the check must fail");
    check->add_option("--out", check_report, "JSON report file");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*paths) return train_paths(flags, out_dir, out);
        if (*surfaces) return train_surfaces(flags, out_dir, out);
        if (*graphs) return train_graphs(flags, out_dir, out);
        if (*field) return export_field(checkpoint, field_grid, lo, hi, field_file, out);
        if (*check) return gradcheck(check_seed, instances, corrupt, check_report, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace nkf::cli
