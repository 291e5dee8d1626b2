#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "perdiff/cli.hpp"
#include "perdiff/errors.hpp"
#include "schema_check.hpp"

using nlohmann::json;
using perdiff::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
    json doc;
};

Result invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Result r{run(args, out, err), out.str(), err.str(), json()};
    if (r.code != 2 && r.out.find('{') != std::string::npos) r.doc = json::parse(r.out.substr(r.out.find('{')));
    return r;
}

void require_valid(const json& doc) {
    const auto errors = schema::validate(doc, PERDIFF_SCHEMA_DIR, "output.schema.json");
    for (const auto& e : errors) MESSAGE(e);
    CHECK(errors.empty());
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string temp_path(const std::string& name) { return std::string(PERDIFF_TEST_TMP) + "/" + name; }

}  // namespace

TEST_CASE("deff on the free particle returns D = 1/(beta gamma)") {
    const auto r = invoke({"deff", "--potential", "zero", "--beta", "1", "--gamma", "2"});
    REQUIRE(r.code == 0);
    CHECK(r.doc["D"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.doc["version"] == perdiff::cli::kVersion);
    CHECK(r.doc["config"]["beta"] == 1.0);
    require_valid(r.doc);
}

TEST_CASE("bounds-check on the pendulum holds row by row") {
    const auto r = invoke({"bounds-check", "--potential", "pendulum", "--beta", "1", "--gamma", "0.1,0.5,1,5,10"});
    CHECK(r.code == 0);
    CHECK(r.doc["all_within_bounds"] == true);
    CHECK(r.doc["rows"].size() == 5);
    for (const auto& row : r.doc["rows"]) {
        CHECK(row["lower"].get<double>() <= row["D"].get<double>());
        CHECK(row["D"].get<double>() <= row["upper"].get<double>());
    }
    require_valid(r.doc);
}

TEST_CASE("fw reports the pendulum closed forms") {
    const auto csv = temp_path("fw.csv");
    const auto r = invoke({"fw", "--potential", "pendulum", "--beta", "1", "--csv", csv, "--points", "10"});
    REQUIRE(r.code == 0);
    CHECK(r.doc["T0"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(r.doc["S_E0"].get<double>() == doctest::Approx(4.0 / M_PI).epsilon(1e-8));
    require_valid(r.doc);
    const auto text = slurp(csv);
    CHECK(text.rfind("z,edge_id,T,S\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 10);
    std::remove(csv.c_str());

    const auto free = invoke({"fw", "--potential", "zero"});
    CHECK(free.code == 0);
    CHECK(free.doc["T0"].is_null());
    CHECK(free.doc["dstar"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
    require_valid(free.doc);
}

TEST_CASE("smol and gap outputs") {
    const auto s = invoke({"smol", "--potential", "pendulum", "--gamma", "20"});
    REQUIRE(s.code == 0);
    CHECK(s.doc["Z"].get<double>() == doctest::Approx(s.doc["Zhat"].get<double>()));
    CHECK(s.doc["expansion"]["gamma"] == 20.0);
    require_valid(s.doc);

    const auto g = invoke({"gap", "--potential", "zero", "--gamma", "1"});
    REQUIRE(g.code == 0);
    CHECK(g.doc["rows"][0]["gap"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
    require_valid(g.doc);
}

TEST_CASE("sweep on the free particle: gamma D is constant") {
    const auto csv = temp_path("sweep.csv");
    const auto r = invoke({"sweep", "--potential", "zero", "--beta", "2", "--gamma", "0.5,1,2", "--csv", csv});
    REQUIRE(r.code == 0);
    for (const auto& row : r.doc["rows"]) {
        CHECK(row["gammaD_spectral"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(row["gammaD_mc"].is_null());
    }
    require_valid(r.doc);
    const auto text = slurp(csv);
    CHECK(text.rfind("gamma,gammaD_spectral,gammaD_mc,gammaD_ci,dstar,dbar,expansion\n", 0) == 0);
    std::remove(csv.c_str());
}

TEST_CASE("mc and graph-sim are bit-identical across worker counts") {
    std::string first_csv, first_json;
    for (const char* workers : {"1", "4"}) {
        const auto csv = temp_path(std::string("mc") + workers + ".csv");
        const auto r = invoke({"mc", "--potential", "zero", "--gamma", "2", "--dt", "0.02", "--t-end", "20",
                               "--n-paths", "200", "--record-stride", "10", "--seed", "9", "--workers", workers,
                               "--csv", csv});
        REQUIRE(r.code == 0);
        require_valid(r.doc);
        CHECK(r.doc["seed"] == 9);
        json stripped = r.doc;
        stripped["config"].erase("workers");
        if (first_csv.empty()) {
            first_csv = slurp(csv);
            first_json = stripped.dump();
        } else {
            CHECK(slurp(csv) == first_csv);
            CHECK(stripped.dump() == first_json);
        }
        std::remove(csv.c_str());
    }
    std::string first;
    for (const char* workers : {"1", "4"}) {
        const auto r = invoke({"graph-sim", "--n-paths", "100", "--t-end", "2", "--n-records", "4", "--dt", "0.01",
                               "--workers", workers, "--csv", "-"});
        REQUIRE(r.code == 0);
        require_valid(r.doc);
        const auto csv = r.out.substr(0, r.out.find('{'));
        if (first.empty()) first = csv;
        else CHECK(csv == first);
    }
}

TEST_CASE("config files: flags override, unknown keys and bad values are rejected") {
    const auto path = temp_path("cfg.json");
    {
        std::ofstream f(path);
        f << R"({"potential": {"cos": [0.5]}, "beta": 2, "gamma": "0.5:2:3", "no_l4": true, "no_gap": true})";
    }
    auto r = invoke({"deff", "--config", path, "--beta", "1"});
    REQUIRE(r.code == 0);
    CHECK(r.doc["config"]["beta"] == 1.0);
    CHECK(r.doc["config"]["no_l4"] == true);
    CHECK(r.doc["config"]["potential"]["cos"][0] == 0.5);
    REQUIRE(r.doc["rows"].size() == 3);
    CHECK(r.doc["rows"][1]["gamma"].get<double>() == doctest::Approx(1.0));
    CHECK(r.doc["rows"][0]["l4_norm"].is_null());
    require_valid(r.doc);
    {
        std::ofstream f(path);
        f << R"({"beta": 1, "bogus": 3})";
    }
    CHECK(invoke({"deff", "--config", path}).code == 2);
    {
        std::ofstream f(path);
        f << R"({"beta": "hot"})";
    }
    CHECK(invoke({"deff", "--config", path}).code == 2);
    std::remove(path.c_str());
    CHECK(invoke({"deff", "--config", temp_path("missing.json")}).code == 2);
}

TEST_CASE("usage and validation errors exit with 2") {
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"deff", "--gamma", "-1"}).code == 2);
    CHECK(invoke({"deff", "--beta", "0"}).code == 2);
    CHECK(invoke({"mc", "--gamma", "1", "--t-end", "5"}).code == 2);
    CHECK(invoke({"mc", "--dt", "1"}).code == 2);
    CHECK(invoke({"deff", "--potential", "{\"cos\": [1, 0.2]}", "--nk", "1", "--gamma", "1"}).code == 2);
    CHECK(invoke({"--version"}).code == 0);
}

TEST_CASE("gamma grids") {
    using perdiff::cli::parse_gamma_list;
    const auto g = parse_gamma_list({"0.1:10:3", "20"});
    REQUIRE(g.size() == 4);
    CHECK(g[1] == doctest::Approx(1.0));
    CHECK(g[3] == 20.0);
    CHECK_THROWS_AS(parse_gamma_list({"1:2"}), perdiff::ValidationError);
    CHECK_THROWS_AS(parse_gamma_list({"abc"}), perdiff::ValidationError);
    CHECK_THROWS_AS(parse_gamma_list({}), perdiff::ValidationError);
}
