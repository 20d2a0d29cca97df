#include <doctest.h>

#include <fstream>

#include "nkf/data.hpp"
#include "support.hpp"

using namespace nkf;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag)
{
    const fs::path dir = fs::temp_directory_path() / ("nkf_test_data_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& file, const std::string& text)
{
    std::ofstream out(file);
    out << text;
}

// Graph 1: triangle on nodes 1-3 (edges listed both ways, one duplicated).
// Graph 2: single edge on nodes 4-5.
fs::path tu_fixture(const std::string& tag)
{
    const fs::path dir = scratch_dir(tag);
    write_file(dir / "FIX_A.txt", "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n1, 2\n4, 5\n5, 4\n");
    write_file(dir / "FIX_graph_indicator.txt", "1\n1\n1\n2\n2\n");
    write_file(dir / "FIX_graph_labels.txt", "7\n-1\n");
    write_file(dir / "FIX_node_attributes.txt", "0.0, 0.0\n1.0, 0.0\n0.0, 1.0\n2.5, 2.5\n3.0, 2.0\n");
    write_file(dir / "FIX_node_labels.txt", "0\n2\n0\n2\n2\n");
    return dir;
}

} // namespace

TEST_CASE("path templates")
{
    for (int label = 0; label < 3; ++label) {
        const Eigen::MatrixXd p = path_template(label, 20);
        CHECK(p.rows() == 20);
        CHECK(p.cols() == 2);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p.maxCoeff() <= 1.0);
    }
    // The two arcs visit the same points in opposite order.
    const Eigen::MatrixXd a = path_template(0, 15);
    const Eigen::MatrixXd b = path_template(1, 15);
    CHECK((a.colwise().reverse() - b).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(path_template(3, 5), InputError);
}

TEST_CASE("gen_paths")
{
    PathDatasetSpec spec;
    spec.samples_per_class = 4;
    spec.seed = 3;

    SUBCASE("shape and labels")
    {
        const Dataset d = gen_paths(spec);
        CHECK(d.items.size() == 12);
        CHECK(d.num_classes == 3);
        CHECK(d.ambient_dim == 2);
        for (std::size_t i = 0; i < d.items.size(); ++i) {
            CHECK(d.items[i].label == int(i % 3));
            CHECK(d.items[i].complex.size(1) == 19);
            CHECK(d.items[i].chains.size() == 1);
        }
        d.validate();
    }
    SUBCASE("noise 0 gives translates of one polyline")
    {
        spec.noise = 0.0;
        const Dataset d = gen_paths(spec);
        for (int label = 0; label < 3; ++label) {
            const Eigen::MatrixXd ref = d.items[std::size_t(label)].embedding.coords();
            for (std::size_t i = std::size_t(label); i < d.items.size(); i += 3) {
                const Eigen::MatrixXd other = d.items[i].embedding.coords();
                const Eigen::RowVector2d offset = other.row(0) - ref.row(0);
                CHECK(((other.rowwise() - offset) - ref).cwiseAbs().maxCoeff() < 1e-12);
                CHECK(d.items[i].chains[0] == d.items[std::size_t(label)].chains[0]);
            }
        }
    }
    SUBCASE("two points give single-edge paths")
    {
        spec.points = 2;
        const Dataset d = gen_paths(spec);
        for (const auto& item : d.items) {
            CHECK(item.complex.size(1) == 1);
            CHECK(item.chains[0].terms().size() == 1);
        }
    }
    SUBCASE("regeneration is bit-identical")
    {
        const Dataset a = gen_paths(spec);
        const Dataset b = gen_paths(spec);
        for (std::size_t i = 0; i < a.items.size(); ++i) {
            CHECK(a.items[i].embedding.coords() == b.items[i].embedding.coords());
            CHECK(a.items[i].complex == b.items[i].complex);
        }
        spec.seed = 4;
        CHECK(gen_paths(spec).items[0].embedding.coords() != a.items[0].embedding.coords());
    }
    SUBCASE("validation")
    {
        spec.points = 1;
        CHECK_THROWS_AS(gen_paths(spec), InputError);
        spec.points = 5;
        spec.noise = -1;
        CHECK_THROWS_AS(gen_paths(spec), InputError);
    }
}

TEST_CASE("gen_surfaces")
{
    SurfaceDatasetSpec spec;
    spec.samples_per_class = 3;
    spec.seed = 2;
    const Dataset d = gen_surfaces(spec);
    CHECK(d.items.size() == 6);
    CHECK(d.ambient_dim == 3);
    for (const auto& item : d.items) {
        CHECK(item.complex.size(2) == 162);
        CHECK(item.complex == d.items[0].complex);
        CHECK(item.chains.size() == 162);
        CHECK(item.chains.dim() == 2);
    }
    CHECK(grid_complex(2).size(2) == 2);
    CHECK(grid_complex(5).size(2) == 32);

    SUBCASE("noise and translation off give two archetypes")
    {
        spec.noise = 0;
        spec.translation = 0;
        const Dataset clean = gen_surfaces(spec);
        for (std::size_t i = 2; i < clean.items.size(); ++i)
            CHECK(clean.items[i].embedding.coords() == clean.items[i % 2].embedding.coords());
        const Eigen::MatrixXd c0 = clean.items[0].embedding.coords();
        const Eigen::MatrixXd c1 = clean.items[1].embedding.coords();
        for (Index v = 0; v < c0.rows(); ++v) {
            CHECK(c0(v, 2) == std::sin(c0(v, 0)));
            CHECK(c1(v, 2) == std::sin(c1(v, 1)));
        }
    }
}

TEST_CASE("TU fixture")
{
    const fs::path dir = tu_fixture("basic");
    const TuDataset raw = read_tu(dir);
    CHECK(raw.name == "FIX");
    CHECK(raw.num_nodes() == 5);
    CHECK(raw.num_graphs() == 2);

    const Dataset d = tu_to_dataset(raw);
    REQUIRE(d.items.size() == 2);
    CHECK(d.items[0].complex.size(1) == 3);
    CHECK(d.items[1].complex.size(1) == 1);
    CHECK(d.items[0].chains.size() == 3);
    CHECK(d.items[1].chains.size() == 1);
    // Labels 7 and -1 map to 1 and 0.
    CHECK(d.items[0].label == 1);
    CHECK(d.items[1].label == 0);
    CHECK(d.num_classes == 2);
    // Two attribute columns plus a one-hot over node labels {0, 2}.
    CHECK(d.ambient_dim == 4);
    CHECK(d.items[0].embedding.coords().row(1) == Eigen::RowVector4d(1, 0, 0, 1));
    CHECK(d.items[1].embedding.coords().row(0) == Eigen::RowVector4d(2.5, 2.5, 0, 1));

    TuFeatureOptions attrs_only;
    attrs_only.use_node_labels = false;
    attrs_only.attribute_columns = {1};
    const Dataset narrow = tu_to_dataset(raw, attrs_only);
    CHECK(narrow.ambient_dim == 1);
    CHECK(narrow.items[1].embedding.coords()(1, 0) == 2.0);

    TuFeatureOptions standard;
    standard.standardize = true;
    const Dataset z = parse_tu(dir, "FIX", standard);
    double mean = 0.0;
    for (const auto& item : z.items) mean += item.embedding.coords().col(0).sum();
    CHECK(std::abs(mean) < 1e-12);
}

TEST_CASE("TU edge count equals deduplicated undirected edges")
{
    const TuDataset raw = read_tu(tu_fixture("count"));
    const TuDataset canon = canonicalize(raw);
    CHECK(canon.edges.size() == 8);
    const Dataset d = tu_to_dataset(raw);
    std::size_t total = 0;
    for (const auto& item : d.items) total += item.chains.size();
    CHECK(total == canon.edges.size() / 2);
}

TEST_CASE("TU round-trip reproduces the canonical form")
{
    const fs::path dir = tu_fixture("roundtrip");
    const TuDataset canon = canonicalize(read_tu(dir));
    const fs::path out = scratch_dir("roundtrip_out");
    write_tu(canon, out);
    CHECK(read_tu(out) == canon);
    CHECK(canonicalize(read_tu(out)) == canon);
}

TEST_CASE("TU errors")
{
    SUBCASE("missing labels file names the file")
    {
        const fs::path dir = tu_fixture("missing");
        fs::remove(dir / "FIX_graph_labels.txt");
        try {
            read_tu(dir, "FIX");
            FAIL("expected an error");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("FIX_graph_labels.txt") != std::string::npos);
        }
    }
    SUBCASE("ragged attributes carry file and line")
    {
        const fs::path dir = tu_fixture("ragged");
        write_file(dir / "FIX_node_attributes.txt", "0, 0\n1, 0\n0\n2, 2\n3, 2\n");
        try {
            read_tu(dir);
            FAIL("expected an error");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("FIX_node_attributes.txt:3") != std::string::npos);
        }
    }
    SUBCASE("node outside every graph")
    {
        const fs::path dir = tu_fixture("outside");
        write_file(dir / "FIX_A.txt", "1, 2\n4, 6\n");
        CHECK_THROWS_AS(read_tu(dir), InputError);
    }
    SUBCASE("non-contiguous graph ids")
    {
        const fs::path dir = tu_fixture("gap");
        write_file(dir / "FIX_graph_indicator.txt", "1\n2\n1\n2\n2\n");
        CHECK_THROWS_AS(read_tu(dir), InputError);
    }
    SUBCASE("bad number")
    {
        const fs::path dir = tu_fixture("nan");
        write_file(dir / "FIX_graph_labels.txt", "1\nx\n");
        CHECK_THROWS_WITH_AS(read_tu(dir), doctest::Contains("FIX_graph_labels.txt:2"), InputError);
    }
}

TEST_CASE("edgeless graphs get an empty chain")
{
    const fs::path dir = scratch_dir("edgeless");
    write_file(dir / "E_A.txt", "1, 2\n");
    write_file(dir / "E_graph_indicator.txt", "1\n1\n2\n");
    write_file(dir / "E_graph_labels.txt", "0\n1\n");
    write_file(dir / "E_node_labels.txt", "0\n1\n1\n");
    const Dataset d = parse_tu(dir);
    REQUIRE(d.items.size() == 2);
    CHECK(d.items[1].chains.size() == 1);
    CHECK(d.items[1].chains[0].terms().empty());
}

TEST_CASE("dataset JSON bundle round-trips")
{
    PathDatasetSpec spec;
    spec.samples_per_class = 2;
    Dataset d = gen_paths(spec);
    d.split.train = {0, 1, 2};
    d.split.test = {3, 4, 5};
    const auto bundle = dataset_to_json(d);
    const Dataset back = dataset_from_json(nlohmann::json::parse(bundle.dump()));
    REQUIRE(back.items.size() == d.items.size());
    for (std::size_t i = 0; i < d.items.size(); ++i) {
        CHECK(back.items[i].complex == d.items[i].complex);
        CHECK(back.items[i].embedding.coords() == d.items[i].embedding.coords());
        CHECK(back.items[i].chains[0] == d.items[i].chains[0]);
        CHECK(back.items[i].label == d.items[i].label);
    }
    CHECK(back.split.train == d.split.train);
    CHECK(back.split.test == d.split.test);
    CHECK_THROWS_AS(dataset_from_json(nlohmann::json{{"format", "other"}}), InputError);
}
