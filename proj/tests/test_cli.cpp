#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "nkf/checkpoint.hpp"
#include "nkf/data.hpp"

using namespace nkf;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run nkf_cli(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& tag)
{
    const fs::path dir = fs::temp_directory_path() / "nkf_test_cli" / tag;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::size_t fields(const std::string& line) { return std::size_t(std::count(line.begin(), line.end(), ',')) + 1; }

// Eight small graphs: triangles with label 1, two-edge paths with label 2.
TuDataset tiny_tu()
{
    TuDataset t;
    t.name = "TINY";
    std::size_t node = 1;
    for (std::size_t g = 1; g <= 8; ++g) {
        const bool triangle = g % 2 == 1;
        for (int v = 0; v < 3; ++v) {
            t.graph_indicator.push_back(g);
            t.node_attributes.push_back({double(v) + 0.1 * double(g), triangle ? 1.0 : -1.0});
        }
        t.edges.push_back({node, node + 1});
        t.edges.push_back({node + 1, node + 2});
        if (triangle) t.edges.push_back({node, node + 2});
        t.graph_labels.push_back(triangle ? 1 : 2);
        node += 3;
    }
    return canonicalize(t);
}

} // namespace

TEST_CASE("train-paths writes its artifacts")
{
    const fs::path dir = scratch("paths");
    const auto run = nkf_cli({"train-paths", "--out", dir.string(), "--epochs", "3", "--samples-per-class", "10",
                              "--num-forms", "4", "--use-head", "true", "--seed", "5"});
    REQUIRE_MESSAGE(run.code == 0, run.err);
    for (const char* f : {"metrics.jsonl", "model.json", "model.bin", "representations.csv", "config.json", "summary.json"})
        CHECK(fs::exists(dir / f));

    const auto metrics = lines(slurp(dir / "metrics.jsonl"));
    CHECK(metrics.size() == 8); // epochs 0..3, train and val
    const auto first = nlohmann::json::parse(metrics.front());
    CHECK(first.at("epoch") == 0);

    const auto csv = lines(slurp(dir / "representations.csv"));
    CHECK(csv.front() == "r1,r2,r3,r4,label");
    CHECK(csv.size() == 31);
    for (const auto& l : csv) CHECK(fields(l) == 5);

    const auto config = nlohmann::json::parse(slurp(dir / "config.json"));
    CHECK(config.at("max_epochs") == 3);
    CHECK(config.at("seed") == 5);
    CHECK(config.at("num_forms") == 4);
    CHECK(config.at("k") == 1);

    const auto model = load_classifier(dir / "model");
    CHECK(model.form.num_forms() == 4);
    CHECK(model.head.has_value());

    const auto headless = nkf_cli({"train-paths", "--out", dir.string(), "--num-forms", "4"});
    CHECK(headless.code == 2);
    CHECK(headless.err.find("num_forms") != std::string::npos);
}

TEST_CASE("reruns are byte-identical")
{
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    for (const auto& dir : {a, b})
        REQUIRE(nkf_cli({"train-paths", "--out", dir.string(), "--epochs", "4", "--samples-per-class", "8"}).code == 0);
    CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
    CHECK(slurp(a / "model.bin") == slurp(b / "model.bin"));
}

TEST_CASE("epochs 0 keeps the initial model")
{
    const fs::path dir = scratch("zero");
    REQUIRE(nkf_cli({"train-surfaces", "--out", dir.string(), "--epochs", "0", "--samples-per-class", "3",
                     "--grid", "4"}).code == 0);
    const auto metrics = lines(slurp(dir / "metrics.jsonl"));
    REQUIRE(metrics.size() == 2);
    for (const auto& m : metrics) CHECK(nlohmann::json::parse(m).at("epoch") == 0);
    const auto model = load_classifier(dir / "model");
    CHECK(model.form.k() == 2);
    CHECK(model.form.n() == 3);
    CHECK(model.head.has_value());
}

TEST_CASE("config file and flag precedence")
{
    const fs::path dir = scratch("config");
    {
        std::ofstream(dir / "cfg.json") << R"({"hidden_dim": 5, "max_epochs": 2, "samples_per_class": 6})";
    }
    const auto run = nkf_cli({"train-paths", "--config", (dir / "cfg.json").string(), "--epochs", "1", "--out",
                              (dir / "run").string()});
    REQUIRE_MESSAGE(run.code == 0, run.err);
    const auto config = nlohmann::json::parse(slurp(dir / "run" / "config.json"));
    CHECK(config.at("hidden_dim") == 5);
    CHECK(config.at("max_epochs") == 1);
    CHECK(config.at("samples_per_class") == 6);

    // the sidecar is itself a valid config
    CHECK(nkf_cli({"train-paths", "--config", (dir / "run" / "config.json").string(), "--out",
                   (dir / "again").string()}).code == 0);
    CHECK(slurp(dir / "run" / "metrics.jsonl") == slurp(dir / "again" / "metrics.jsonl"));

    std::ofstream(dir / "bad.json") << R"({"hidden_dim": 5, "learning_rate": 0.1})";
    const auto bad = nkf_cli({"train-paths", "--config", (dir / "bad.json").string(), "--out", dir.string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("learning_rate") != std::string::npos);

    std::ofstream(dir / "typed.json") << R"({"hidden_dim": "wide"})";
    CHECK(nkf_cli({"train-paths", "--config", (dir / "typed.json").string(), "--out", dir.string()}).code == 2);
    // graph-only keys are unknown to the path command
    std::ofstream(dir / "folds.json") << R"({"folds": 3})";
    CHECK(nkf_cli({"train-paths", "--config", (dir / "folds.json").string(), "--out", dir.string()}).code == 2);
}

TEST_CASE("bad arguments exit with 2")
{
    CHECK(nkf_cli({}).code == 2);
    CHECK(nkf_cli({"train-paths", "--readout", "max"}).code == 2);
    CHECK(nkf_cli({"train-paths", "--epochs", "many"}).code == 2);
    CHECK(nkf_cli({"train-paths", "--lr", "-1", "--out", scratch("neg").string()}).code == 2);
    CHECK(nkf_cli({"no-such-command"}).code == 2);
    CHECK(nkf_cli({"train-graphs"}).code == 2);
    CHECK(nkf_cli({"--help"}).code == 0);
}

TEST_CASE("train-graphs on a tiny TU dataset")
{
    const fs::path data = scratch("tu_data");
    write_tu(tiny_tu(), data);
    const fs::path out = scratch("tu_run");
    const auto run = nkf_cli({"train-graphs", "--dataset-dir", data.string(), "--folds", "2", "--epochs", "3",
                              "--num-forms", "2", "--hidden-dim", "4", "--out", out.string()});
    REQUIRE_MESSAGE(run.code == 0, run.err);
    const auto report = nlohmann::json::parse(slurp(out / "report.json"));
    REQUIRE(report.at("folds").size() == 2);
    std::size_t tested = 0;
    for (const auto& f : report.at("folds")) {
        tested += f.at("test_size").get<std::size_t>();
        CHECK(f.at("accuracy").get<double>() >= 0.0);
        CHECK(f.at("accuracy").get<double>() <= 1.0);
    }
    CHECK(tested == 8);
    CHECK(nlohmann::json::parse(slurp(out / "config.json")).at("folds") == 2);

    SUBCASE("missing labels file")
    {
        fs::remove(data / "TINY_graph_labels.txt");
        const auto bad = nkf_cli({"train-graphs", "--dataset-dir", data.string(), "--out", out.string()});
        CHECK(bad.code == 2);
        CHECK(bad.err.find("TINY_graph_labels.txt") != std::string::npos);
    }
}

TEST_CASE("export-field samples the trained scalings")
{
    const fs::path dir = scratch("field");
    REQUIRE(nkf_cli({"train-paths", "--out", dir.string(), "--epochs", "1", "--samples-per-class", "4"}).code == 0);
    const fs::path csv = dir / "field.csv";
    const auto run = nkf_cli({"export-field", "--checkpoint", (dir / "model").string(), "--grid", "10", "--lo", "-2",
                              "--hi", "3", "--out", csv.string()});
    REQUIRE_MESSAGE(run.code == 0, run.err);
    const auto rows = lines(slurp(csv));
    REQUIRE(rows.size() == 101);
    CHECK(nlohmann::json::parse(slurp(dir / "field.config.json")).at("grid") == 10);
    CHECK(rows.front() == "p1,p2,w1_dx1,w1_dx2,w2_dx1,w2_dx2,w3_dx1,w3_dx2");

    const auto form = load_any_form(dir / "model");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        REQUIRE(fields(rows[r]) == 8);
        std::istringstream in(rows[r]);
        std::vector<double> v;
        for (std::string cell; std::getline(in, cell, ',');) v.push_back(std::stod(cell));
        CHECK(v[0] >= -2.0);
        CHECK(v[1] <= 3.0);
        const Eigen::MatrixXd s = eval_scalings(form, Eigen::Vector2d(v[0], v[1]));
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 2; ++i) CHECK(v[std::size_t(2 + 2 * j + i)] == doctest::Approx(s(j, i)).epsilon(1e-15));
    }
    CHECK(rows[1].rfind("-2,-2,", 0) == 0);
    CHECK(rows.back().rfind("3,3,", 0) == 0);
}

TEST_CASE("export-field of a constant form")
{
    const fs::path dir = scratch("constant");
    std::mt19937_64 rng(0);
    const std::vector<Index> widths{3, 4, 3};
    auto psi = Mlp<double>::random(widths, Activation::relu, rng);
    Eigen::VectorXd params = Eigen::VectorXd::Zero(psi.parameter_count());
    params.tail(3) << 0.5, -1.0, 2.0;
    psi.set_parameters(params);
    save_form(dir / "form", NeuralKForm<double>(psi, 3, 2, 1));
    REQUIRE(nkf_cli({"export-field", "--checkpoint", (dir / "form").string(), "--grid", "2", "--out",
                     (dir / "f.csv").string()}).code == 0);
    const auto rows = lines(slurp(dir / "f.csv"));
    REQUIRE(rows.size() == 9);
    CHECK(rows.front() == "p1,p2,p3,w1_dx1^dx2,w1_dx1^dx3,w1_dx2^dx3");
    for (std::size_t r = 1; r < rows.size(); ++r) CHECK(rows[r].substr(rows[r].size() - 9) == ",0.5,-1,2");

    CHECK(nkf_cli({"export-field", "--checkpoint", (dir / "absent").string()}).code == 2);
    CHECK(nkf_cli({"export-field", "--checkpoint", (dir / "form").string(), "--grid", "1"}).code == 2);
    CHECK(nkf_cli({"export-field", "--checkpoint", (dir / "form").string(), "--lo", "1", "--hi", "0"}).code == 2);
}

TEST_CASE("gradcheck and its negative control")
{
    const fs::path dir = scratch("gradcheck");
    const auto good = nkf_cli({"gradcheck", "--seed", "3", "--instances", "2", "--out", (dir / "g.json").string()});
    CHECK(good.code == 0);
    CHECK(good.out.find("FAIL") == std::string::npos);
    const auto report = nlohmann::json::parse(slurp(dir / "g.json"));
    REQUIRE(report.size() == 4);
    for (const auto& s : report) CHECK(s.at("passed") == true);
    CHECK(nlohmann::json::parse(slurp(dir / "g.config.json")).at("instances") == 2);

    const auto bad = nkf_cli({"gradcheck", "--seed", "3", "--instances", "2", "--corrupt"});
    CHECK(bad.code == 1);
    for (const char* suite : {"FAIL mlp", "FAIL integration", "FAIL classifier"})
        CHECK(bad.out.find(suite) != std::string::npos);
    // zero gradients stay zero under corruption
    CHECK(bad.out.find("PASS zero_upstream") != std::string::npos);

    CHECK(nkf_cli({"gradcheck", "--instances", "0"}).code == 2);
}
