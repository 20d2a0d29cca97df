#include "nkf/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace nkf {

using nlohmann::json;

void write_le_doubles(std::ostream& out, const Eigen::VectorXd& values)
{
    for (Index i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(values(i));
        char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
        out.write(bytes, 8);
    }
}

Eigen::VectorXd read_le_doubles(std::istream& in, Index count)
{
    Eigen::VectorXd values(count);
    for (Index i = 0; i < count; ++i) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char*>(bytes), 8))
            throw InputError("checkpoint: parameter blob is truncated");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[b]) << (8 * b);
        values(i) = std::bit_cast<double>(bits);
    }
    return values;
}

json mlp_header(const Mlp<double>& mlp)
{
    json widths = json::array({mlp.input_dim()});
    for (const auto& l : mlp.layers()) widths.push_back(l.weight.rows());
    return {{"format", "nkf-mlp"},
            {"version", 1},
            {"activation", std::string(to_string(mlp.activation()))},
            {"widths", widths},
            {"parameter_count", mlp.parameter_count()},
            {"dtype", "float64-le"},
            {"layout", "per layer: weight row-major (out x in), then bias"}};
}

namespace {

void expect_format(const json& header, const char* format)
{
    if (!header.is_object() || header.value("format", "") != format)
        throw InputError(std::string("checkpoint: expected a ") + format + " header");
    if (header.value("version", 0) != 1) throw InputError("checkpoint: unsupported version");
}

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("checkpoint: cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("checkpoint: " + path.string() + ": " + e.what());
    }
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix)
{
    return std::filesystem::path(stem.string() + suffix);
}

void write_pair(const std::filesystem::path& stem, const json& header, const Eigen::VectorXd& params)
{
    std::ofstream meta(with_suffix(stem, ".json"));
    if (!meta) throw std::runtime_error("checkpoint: cannot write " + stem.string() + ".json");
    meta << header.dump(2) << '\n';
    std::ofstream blob(with_suffix(stem, ".bin"), std::ios::binary);
    if (!blob) throw std::runtime_error("checkpoint: cannot write " + stem.string() + ".bin");
    write_le_doubles(blob, params);
}

Eigen::VectorXd read_blob(const std::filesystem::path& stem, Index count)
{
    std::ifstream blob(with_suffix(stem, ".bin"), std::ios::binary);
    if (!blob) throw InputError("checkpoint: cannot open " + stem.string() + ".bin");
    Eigen::VectorXd params = read_le_doubles(blob, count);
    if (blob.peek() != std::char_traits<char>::eof())
        throw InputError("checkpoint: parameter blob has trailing bytes");
    return params;
}

template <typename F>
auto guarded(F&& read)
{
    try {
        return read();
    } catch (const json::exception& e) {
        throw InputError(std::string("checkpoint: malformed header: ") + e.what());
    }
}

} // namespace

Mlp<double> mlp_from_header(const json& header)
{
    return guarded([&] {
        expect_format(header, "nkf-mlp");
        const auto widths = header.at("widths").get<std::vector<Index>>();
        if (widths.size() < 2) throw InputError("checkpoint: mlp needs at least two widths");
        std::vector<DenseLayer<double>> layers;
        for (std::size_t i = 0; i + 1 < widths.size(); ++i)
            layers.push_back({Eigen::MatrixXd::Zero(widths[i + 1], widths[i]), Eigen::VectorXd::Zero(widths[i + 1])});
        Mlp<double> mlp(std::move(layers), parse_activation(header.at("activation").get<std::string>()));
        if (header.contains("parameter_count") && header["parameter_count"].get<Index>() != mlp.parameter_count())
            throw InputError("checkpoint: parameter_count disagrees with widths");
        return mlp;
    });
}

json form_header(const NeuralKForm<double>& form)
{
    return {{"format", "nkf-form"},
            {"version", 1},
            {"n", form.n()},
            {"k", form.k()},
            {"num_forms", form.num_forms()},
            {"index_order", "lexicographic"},
            {"output_layout", "form * C(n,k) + rank(I)"},
            {"psi", mlp_header(form.psi())}};
}

NeuralKForm<double> form_from_header(const json& header)
{
    expect_format(header, "nkf-form");
    return guarded([&] {
        return NeuralKForm<double>(mlp_from_header(header.at("psi")), header.at("n").get<int>(),
                                   header.at("k").get<int>(), header.at("num_forms").get<int>());
    });
}

json classifier_header(const KFormClassifier& model)
{
    return {{"format", "nkf-classifier"},
            {"version", 1},
            {"readout", std::string(to_string(model.readout))},
            {"num_classes", model.num_classes},
            {"form", form_header(model.form)},
            {"head", model.head ? mlp_header(*model.head) : json(nullptr)},
            {"parameter_order", "form psi, then head"}};
}

KFormClassifier classifier_from_header(const json& header)
{
    expect_format(header, "nkf-classifier");
    return guarded([&] {
        KFormClassifier model;
        model.form = form_from_header(header.at("form"));
        model.readout = parse_readout(header.at("readout").get<std::string>());
        model.num_classes = header.at("num_classes").get<int>();
        if (!header.at("head").is_null()) model.head = mlp_from_header(header.at("head"));
        return model;
    });
}

void save_mlp(const std::filesystem::path& stem, const Mlp<double>& mlp)
{
    write_pair(stem, mlp_header(mlp), mlp.parameters());
}

Mlp<double> load_mlp(const std::filesystem::path& stem)
{
    Mlp<double> mlp = mlp_from_header(read_json(with_suffix(stem, ".json")));
    mlp.set_parameters(read_blob(stem, mlp.parameter_count()));
    return mlp;
}

void save_form(const std::filesystem::path& stem, const NeuralKForm<double>& form)
{
    write_pair(stem, form_header(form), form.psi().parameters());
}

NeuralKForm<double> load_form(const std::filesystem::path& stem)
{
    NeuralKForm<double> form = form_from_header(read_json(with_suffix(stem, ".json")));
    form.psi().set_parameters(read_blob(stem, form.psi().parameter_count()));
    return form;
}

void save_classifier(const std::filesystem::path& stem, const KFormClassifier& model)
{
    write_pair(stem, classifier_header(model), model.parameters());
}

KFormClassifier load_classifier(const std::filesystem::path& stem)
{
    KFormClassifier model = classifier_from_header(read_json(with_suffix(stem, ".json")));
    model.set_parameters(read_blob(stem, model.parameter_count()));
    return model;
}

NeuralKForm<double> load_any_form(const std::filesystem::path& stem)
{
    const json header = read_json(with_suffix(stem, ".json"));
    if (header.value("format", "") == "nkf-form") return load_form(stem);
    return load_classifier(stem).form;
}

} // namespace nkf
