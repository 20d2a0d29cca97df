#include "nkf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace nkf {

using nlohmann::json;

void PathDatasetSpec::validate() const
{
    if (samples_per_class < 1) throw InputError("paths: samples_per_class must be positive");
    if (points < 2) throw InputError("paths: need at least 2 points per path");
    if (!(noise >= 0)) throw InputError("paths: noise must be non-negative");
    if (!(translation >= 0)) throw InputError("paths: translation must be non-negative");
}

Eigen::MatrixXd path_template(int label, int points)
{
    if (label < 0 || label > 2) throw InputError("paths: template label must be 0, 1 or 2");
    if (points < 2) throw InputError("paths: need at least 2 points per path");
    constexpr double pi = std::numbers::pi;
    Eigen::MatrixXd p(points, 2);
    for (int i = 0; i < points; ++i) {
        const double s = double(i) / double(points - 1);
        switch (label) {
        case 0: p.row(i) << 0.5 + 0.35 * std::cos(pi * s), 0.3 + 0.35 * std::sin(pi * s); break;
        case 1: p.row(i) << 0.5 + 0.35 * std::cos(pi * (1 - s)), 0.3 + 0.35 * std::sin(pi * (1 - s)); break;
        default: p.row(i) << 0.15 + 0.7 * s, 0.45 + 0.2 * std::sin(2 * pi * s); break;
        }
    }
    return p;
}

Dataset gen_paths(const PathDatasetSpec& spec)
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::uniform_real_distribution<double> shift(-1.0, 1.0);

    Dataset data;
    data.num_classes = 3;
    data.ambient_dim = 2;
    for (int s = 0; s < spec.samples_per_class; ++s) {
        for (int label = 0; label < 3; ++label) {
            Eigen::MatrixXd p = path_template(label, spec.points);
            const double tx = spec.translation * shift(rng);
            const double ty = spec.translation * shift(rng);
            for (Index i = 0; i < p.rows(); ++i) {
                p(i, 0) += tx + spec.noise * jitter(rng);
                p(i, 1) += ty + spec.noise * jitter(rng);
            }
            auto path = path_to_complex(p);
            data.items.push_back({std::move(path.complex), std::move(path.embedding),
                                  ChainTuple<double>({std::move(path.chain)}), label});
        }
    }
    return data;
}

void SurfaceDatasetSpec::validate() const
{
    if (grid < 2) throw InputError("surfaces: grid must be at least 2");
    if (samples_per_class < 1) throw InputError("surfaces: samples_per_class must be positive");
    if (!(noise >= 0)) throw InputError("surfaces: noise must be non-negative");
    if (!(translation >= 0)) throw InputError("surfaces: translation must be non-negative");
}

SimplicialComplex grid_complex(int g)
{
    if (g < 2) throw InputError("grid_complex: g must be at least 2");
    std::vector<VertexTuple> triangles;
    auto vid = [g](int i, int j) { return std::size_t(j * g + i); };
    for (int j = 0; j + 1 < g; ++j)
        for (int i = 0; i + 1 < g; ++i) {
            triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            triangles.push_back({vid(i, j), vid(i, j + 1), vid(i + 1, j + 1)});
        }
    return build_complex(triangles, std::size_t(g * g));
}

Dataset gen_surfaces(const SurfaceDatasetSpec& spec)
{
    spec.validate();
    constexpr double two_pi = 2 * std::numbers::pi;
    const int g = spec.grid;
    const SimplicialComplex complex = grid_complex(g);
    const ChainTuple<double> chains = standard_basis_chains<double>(complex, 2);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> shift(-1.0, 1.0);

    Dataset data;
    data.num_classes = 2;
    data.ambient_dim = 3;
    for (int s = 0; s < spec.samples_per_class; ++s) {
        for (int label = 0; label < 2; ++label) {
            const double tx = spec.translation * shift(rng);
            const double ty = spec.translation * shift(rng);
            Eigen::MatrixXd coords(g * g, 3);
            for (int j = 0; j < g; ++j)
                for (int i = 0; i < g; ++i) {
                    const double x = two_pi * i / (g - 1);
                    const double y = two_pi * j / (g - 1);
                    const double z = (label == 0 ? std::sin(x) : std::sin(y)) + spec.noise * noise(rng);
                    coords.row(j * g + i) << x + tx, y + ty, z;
                }
            data.items.push_back({complex, Embedding<double>(std::move(coords)), chains, label});
        }
    }
    return data;
}

namespace {

std::string location(const std::filesystem::path& file, std::size_t line)
{
    return file.filename().string() + ":" + std::to_string(line);
}

/// Comma/whitespace separated numeric fields of every non-blank line.
template <typename T>
std::vector<std::vector<T>> read_rows(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) throw InputError("tu: cannot open " + file.string());
    std::vector<std::vector<T>> rows;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::replace(line.begin(), line.end(), ',', ' ');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        std::vector<T> row;
        std::string token;
        while (fields >> token) {
            std::istringstream parse(token);
            T value{};
            if (!(parse >> value) || !parse.eof())
                throw InputError("tu: " + location(file, number) + ": bad number '" + token + "'");
            row.push_back(value);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

template <typename T>
std::vector<T> read_column(const std::filesystem::path& file)
{
    const auto rows = read_rows<T>(file);
    std::vector<T> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 1)
            throw InputError("tu: " + file.filename().string() + ": row " + std::to_string(i + 1)
                             + " should hold one value");
        out.push_back(rows[i][0]);
    }
    return out;
}

std::string infer_name(const std::filesystem::path& dir)
{
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        const std::string file = entry.path().filename().string();
        const std::string suffix = "_A.txt";
        if (file.size() > suffix.size() && file.ends_with(suffix))
            names.push_back(file.substr(0, file.size() - suffix.size()));
    }
    if (ec) throw InputError("tu: cannot read directory " + dir.string());
    if (names.size() != 1)
        throw InputError("tu: expected exactly one *_A.txt in " + dir.string() + ", found "
                         + std::to_string(names.size()));
    return names.front();
}

} // namespace

TuDataset read_tu(const std::filesystem::path& dir, std::string name)
{
    if (name.empty()) name = infer_name(dir);
    auto file = [&](const char* suffix) { return dir / (name + suffix); };
    for (const char* mandatory : {"_A.txt", "_graph_indicator.txt", "_graph_labels.txt"})
        if (!std::filesystem::exists(file(mandatory)))
            throw InputError("tu: missing required file " + file(mandatory).string());

    TuDataset raw;
    raw.name = name;
    const auto indicator = read_column<long>(file("_graph_indicator.txt"));
    raw.graph_labels = read_column<long>(file("_graph_labels.txt"));
    const std::size_t num_graphs = raw.graph_labels.size();

    std::vector<std::size_t> nodes_per_graph(num_graphs + 1, 0);
    for (std::size_t i = 0; i < indicator.size(); ++i) {
        if (indicator[i] < 1 || std::size_t(indicator[i]) > num_graphs)
            throw InputError("tu: " + location(file("_graph_indicator.txt"), i + 1) + ": graph id "
                             + std::to_string(indicator[i]) + " outside 1.."
                             + std::to_string(num_graphs));
        if (i > 0 && indicator[i] < indicator[i - 1])
            throw InputError("tu: " + location(file("_graph_indicator.txt"), i + 1)
                             + ": nodes of a graph must be contiguous");
        raw.graph_indicator.push_back(std::size_t(indicator[i]));
        ++nodes_per_graph[std::size_t(indicator[i])];
    }
    for (std::size_t g = 1; g <= num_graphs; ++g)
        if (nodes_per_graph[g] == 0)
            throw InputError("tu: graph id " + std::to_string(g) + " has no nodes (non-contiguous ids)");

    const auto edge_rows = read_rows<long>(file("_A.txt"));
    for (std::size_t r = 0; r < edge_rows.size(); ++r) {
        const auto& row = edge_rows[r];
        if (row.size() != 2) throw InputError("tu: " + location(file("_A.txt"), r + 1) + ": expected 'i, j'");
        for (long id : row)
            if (id < 1 || std::size_t(id) > raw.num_nodes())
                throw InputError("tu: " + location(file("_A.txt"), r + 1) + ": node " + std::to_string(id)
                                 + " is not assigned to any graph");
        const auto a = std::size_t(row[0]);
        const auto b = std::size_t(row[1]);
        if (raw.graph_indicator[a - 1] != raw.graph_indicator[b - 1])
            throw InputError("tu: " + location(file("_A.txt"), r + 1) + ": edge joins two graphs");
        raw.edges.emplace_back(a, b);
    }

    if (std::filesystem::exists(file("_node_attributes.txt"))) {
        raw.node_attributes = read_rows<double>(file("_node_attributes.txt"));
        if (raw.node_attributes.size() != raw.num_nodes())
            throw InputError("tu: " + file("_node_attributes.txt").filename().string() + " has "
                             + std::to_string(raw.node_attributes.size()) + " rows for "
                             + std::to_string(raw.num_nodes()) + " nodes");
        for (std::size_t i = 0; i < raw.node_attributes.size(); ++i)
            if (raw.node_attributes[i].size() != raw.node_attributes[0].size())
                throw InputError("tu: " + location(file("_node_attributes.txt"), i + 1)
                                 + ": ragged attribute row");
    }
    if (std::filesystem::exists(file("_node_labels.txt"))) {
        raw.node_labels = read_column<long>(file("_node_labels.txt"));
        if (raw.node_labels.size() != raw.num_nodes())
            throw InputError("tu: node label count does not match node count");
    }
    return raw;
}

TuDataset canonicalize(TuDataset raw)
{
    std::set<std::pair<std::size_t, std::size_t>> undirected;
    for (auto [a, b] : raw.edges)
        if (a != b) undirected.emplace(std::min(a, b), std::max(a, b));
    raw.edges.clear();
    for (auto [a, b] : undirected) {
        raw.edges.emplace_back(a, b);
        raw.edges.emplace_back(b, a);
    }
    std::sort(raw.edges.begin(), raw.edges.end());
    return raw;
}

void write_tu(const TuDataset& data, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto open = [&](const char* suffix) {
        std::ofstream out(dir / (data.name + suffix));
        if (!out) throw std::runtime_error("tu: cannot write " + (dir / (data.name + suffix)).string());
        out.precision(17);
        return out;
    };
    {
        auto out = open("_A.txt");
        for (auto [a, b] : data.edges) out << a << ", " << b << '\n';
    }
    {
        auto out = open("_graph_indicator.txt");
        for (auto g : data.graph_indicator) out << g << '\n';
    }
    {
        auto out = open("_graph_labels.txt");
        for (auto l : data.graph_labels) out << l << '\n';
    }
    if (!data.node_attributes.empty()) {
        auto out = open("_node_attributes.txt");
        for (const auto& row : data.node_attributes) {
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? ", " : "") << row[c];
            out << '\n';
        }
    }
    if (!data.node_labels.empty()) {
        auto out = open("_node_labels.txt");
        for (auto l : data.node_labels) out << l << '\n';
    }
}

Dataset tu_to_dataset(const TuDataset& raw, const TuFeatureOptions& options)
{
    const std::size_t num_nodes = raw.num_nodes();
    const std::size_t num_graphs = raw.num_graphs();
    if (num_graphs == 0) throw InputError("tu: dataset has no graphs");

    std::vector<int> attribute_columns;
    if (options.use_attributes && !raw.node_attributes.empty()) {
        const int available = int(raw.node_attributes.front().size());
        if (options.attribute_columns.empty()) {
            for (int c = 0; c < available; ++c) attribute_columns.push_back(c);
        } else {
            for (int c : options.attribute_columns) {
                if (c < 0 || c >= available)
                    throw InputError("tu: attribute column " + std::to_string(c) + " out of range");
                attribute_columns.push_back(c);
            }
        }
    }
    std::map<long, int> node_label_slot;
    if (options.use_node_labels)
        for (long l : raw.node_labels) node_label_slot.emplace(l, 0);
    int slot = 0;
    for (auto& [label, s] : node_label_slot) s = slot++;

    const int dim = int(attribute_columns.size()) + int(node_label_slot.size());
    if (dim == 0) throw InputError("tu: no node features selected (need attributes or node labels)");

    Eigen::MatrixXd features = Eigen::MatrixXd::Zero(Index(num_nodes), dim);
    for (std::size_t v = 0; v < num_nodes; ++v) {
        for (std::size_t c = 0; c < attribute_columns.size(); ++c)
            features(Index(v), Index(c)) = raw.node_attributes[v][std::size_t(attribute_columns[c])];
        if (!node_label_slot.empty())
            features(Index(v), Index(attribute_columns.size()) + node_label_slot.at(raw.node_labels[v])) = 1.0;
    }
    if (options.standardize) {
        for (Index c = 0; c < features.cols(); ++c) {
            const double mean = features.col(c).mean();
            const double var = (features.col(c).array() - mean).square().mean();
            const double scale = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
            features.col(c) = (features.col(c).array() - mean) * scale;
        }
    }

    std::map<long, int> class_of;
    for (long l : raw.graph_labels) class_of.emplace(l, 0);
    int next_class = 0;
    for (auto& [label, c] : class_of) c = next_class++;

    std::vector<std::size_t> first_node(num_graphs + 1, num_nodes);
    std::vector<std::size_t> count(num_graphs + 1, 0);
    for (std::size_t v = num_nodes; v-- > 0;) {
        first_node[raw.graph_indicator[v]] = v;
        ++count[raw.graph_indicator[v]];
    }
    std::vector<std::set<std::pair<std::size_t, std::size_t>>> edges(num_graphs + 1);
    for (auto [a, b] : raw.edges) {
        if (a == b) continue;
        const std::size_t g = raw.graph_indicator[a - 1];
        const std::size_t base = first_node[g];
        edges[g].emplace(std::min(a, b) - 1 - base, std::max(a, b) - 1 - base);
    }

    Dataset data;
    data.num_classes = next_class;
    data.ambient_dim = dim;
    for (std::size_t g = 1; g <= num_graphs; ++g) {
        std::vector<VertexTuple> simplices;
        for (auto [a, b] : edges[g]) simplices.push_back({a, b});
        SimplicialComplex complex = build_complex(simplices, count[g]);
        Embedding<double> embedding(features.middleRows(Index(first_node[g]), Index(count[g])));
        ChainTuple<double> chains = complex.size(1) > 0
                                        ? standard_basis_chains<double>(complex, 1)
                                        : ChainTuple<double>({Chain<double>(1, {})});
        data.items.push_back({std::move(complex), std::move(embedding), std::move(chains),
                              class_of.at(raw.graph_labels[g - 1])});
    }
    return data;
}

Dataset parse_tu(const std::filesystem::path& dir, const std::string& name, const TuFeatureOptions& options)
{
    return tu_to_dataset(read_tu(dir, name), options);
}

json dataset_to_json(const Dataset& data)
{
    json items = json::array();
    for (const auto& item : data.items) {
        json simplices = json::array();
        for (int k = 1; k <= item.complex.dimension(); ++k)
            for (const auto& s : item.complex.simplices(k)) simplices.push_back(s);
        json coords = json::array();
        for (Index v = 0; v < item.embedding.num_vertices(); ++v) {
            json row = json::array();
            for (Index c = 0; c < item.embedding.ambient_dim(); ++c) row.push_back(item.embedding.coords()(v, c));
            coords.push_back(row);
        }
        json chains = json::array();
        for (const auto& chain : item.chains) {
            json terms = json::array();
            for (const auto& [index, coeff] : chain.terms()) terms.push_back({index, coeff});
            chains.push_back(terms);
        }
        items.push_back({{"label", item.label},
                         {"num_vertices", item.complex.num_vertices()},
                         {"simplices", simplices},
                         {"coords", coords},
                         {"chain_dim", item.chains.dim()},
                         {"chains", chains}});
    }
    return {{"format", "nkf-dataset"},
            {"version", 1},
            {"num_classes", data.num_classes},
            {"ambient_dim", data.ambient_dim},
            {"split", {{"train", data.split.train}, {"val", data.split.val}, {"test", data.split.test}}},
            {"items", items}};
}

Dataset dataset_from_json(const json& bundle)
{
    if (bundle.value("format", "") != "nkf-dataset") throw InputError("bundle: not an nkf-dataset");
    Dataset data;
    try {
        data.num_classes = bundle.at("num_classes").get<int>();
        data.ambient_dim = bundle.at("ambient_dim").get<int>();
        for (const auto& entry : bundle.at("items")) {
            const auto num_vertices = entry.at("num_vertices").get<std::size_t>();
            SimplicialComplex complex =
                build_complex(entry.at("simplices").get<std::vector<VertexTuple>>(), num_vertices);
            const auto rows = entry.at("coords").get<std::vector<std::vector<double>>>();
            Eigen::MatrixXd coords(Index(rows.size()), data.ambient_dim);
            for (std::size_t v = 0; v < rows.size(); ++v) {
                if (rows[v].size() != std::size_t(data.ambient_dim)) throw InputError("bundle: ragged coords");
                for (int c = 0; c < data.ambient_dim; ++c) coords(Index(v), c) = rows[v][std::size_t(c)];
            }
            const int dim = entry.at("chain_dim").get<int>();
            std::vector<Chain<double>> chains;
            for (const auto& terms : entry.at("chains"))
                chains.emplace_back(dim, terms.get<std::vector<std::pair<std::size_t, double>>>());
            data.items.push_back({std::move(complex), Embedding<double>(std::move(coords)),
                                  ChainTuple<double>(std::move(chains)), entry.at("label").get<int>()});
        }
        const auto& split = bundle.at("split");
        data.split.train = split.at("train").get<std::vector<std::size_t>>();
        data.split.val = split.at("val").get<std::vector<std::size_t>>();
        data.split.test = split.at("test").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw InputError(std::string("bundle: ") + e.what());
    }
    data.validate();
    return data;
}

} // namespace nkf
