#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "maglorentz/config.hpp"
#include "maglorentz/experiments.hpp"
#include "maglorentz/io.hpp"

using namespace mlg;

TEST_CASE("defaults and overrides") {
    auto c = Config::parse("[regime]\neps = 0.001\nkind = boltzmann_grad\n[kinetic]\nnphi = 128\n");
    CHECK(c.num("regime.eps") == 0.001);
    CHECK(c.str("regime.kind") == "boltzmann_grad");
    CHECK(c.integer("kinetic.nphi") == 128);
    CHECK(c.explicitly_set("regime.eps"));
    CHECK_FALSE(c.explicitly_set("regime.alpha"));
    CHECK(c.num("regime.alpha") == 0.1);
    CHECK(std::isnan(c.num("kinetic.fixed_theta")));
}

TEST_CASE("unknown keys are rejected by name") {
    try {
        Config::parse("[regime]\nepsilon = 0.1\n");
        FAIL("no error");
    } catch (const ConfigError &e) {
        CHECK(e.key == "regime.epsilon");
        CHECK(std::string(e.what()).find("regime.epsilon") != std::string::npos);
    }
    CHECK_THROWS_AS(Config::parse("[nosuch]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("eps = 1\n"), ConfigError);
    Config c;
    CHECK_THROWS_AS(c.set("run.colour", "red"), ConfigError);
}

TEST_CASE("parameter domains") {
    auto bad = [](const std::string &text, const std::string &key) {
        try {
            Config::parse(text).validate();
        } catch (const ConfigError &e) {
            return e.key == key;
        }
        return false;
    };
    CHECK(bad("[regime]\nalpha = 0.2\n", "regime.alpha"));
    CHECK(bad("[regime]\nkind = long_range\ngamma = 0.8\n", "regime.gamma"));
    CHECK(bad("[regime]\nkind = long_range\ns = 2\n", "regime.s"));
    CHECK(bad("[field]\nB = 0\n", "field.B"));
    CHECK(bad("[regime]\nmu = -1\n", "regime.mu"));
    CHECK(bad("[kinetic]\nnphi = 48\n", "kinetic.nphi"));
    CHECK_NOTHROW(Config::parse("[regime]\nalpha = 0.05\n").validate());
}

TEST_CASE("value parsing") {
    auto c = Config::parse("[regime]\neps_list = 0.1, 0.01 0.001\n[run]\nt_end = 2TL\nseed = 18446744073709551615\n");
    auto l = c.list("regime.eps_list");
    REQUIRE(l.size() == 3);
    CHECK(l[2] == 0.001);
    CHECK(c.time("run.t_end", 3.0) == 6.0);
    CHECK(c.u64("run.seed") == 18446744073709551615ULL);
    CHECK_THROWS_AS(Config::parse("[kinetic]\nnphi = many\n").integer("kinetic.nphi"), ConfigError);
}

TEST_CASE("manifest echoes every key and parses back") {
    auto c = Config::parse("[regime]\neps = 0.003\n[field]\nB = 2.5\n");
    auto m = c.manifest();
    for (const auto &k : c.keys()) {
        auto dot = k.find('.');
        CHECK(m.find("\n" + k.substr(dot + 1) + " = ") != std::string::npos);
    }
    auto back = Config::parse(m);
    for (const auto &k : c.keys()) CHECK(back.str(k) == c.str(k));
}

TEST_CASE("csv formatting keeps full precision") {
    CHECK(fmt17(0.1) == "0.10000000000000001");
    CHECK(fmt17(1.0 / 3.0) == "0.33333333333333331");
    CHECK(fmt17(std::nan("")) == "nan");
    CHECK(std::stod(fmt17(std::exp(1.0))) == std::exp(1.0));
    auto path = (std::filesystem::temp_directory_path() / "maglorentz_csv_test.csv").string();
    {
        CsvWriter w(path, {"a", "b", "c"});
        w.row({2.0 / 3.0, 7LL, std::string("x")});
        CHECK_THROWS(w.row({1.0}));
    }
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "a,b,c\n0.66666666666666663,7,x\n");
    std::filesystem::remove(path);
}

TEST_CASE("runs write a manifest and outputs") {
    auto dir = (std::filesystem::temp_directory_path() / "maglorentz_run_test").string();
    std::filesystem::remove_all(dir);
    auto cfg = Config::parse("[run]\nexperiment = scatter\n[regime]\nkind = boltzmann_grad\n[scatter]\nnodes = 1024\n"
                             "with_field = false\n");
    auto rep = run_experiment(cfg, dir, 1, 3);
    CHECK(rep.ok);
    CHECK(std::filesystem::exists(dir + "/manifest.ini"));
    CHECK(std::filesystem::exists(dir + "/scattering_table.gp"));
    auto man = Config::load(dir + "/manifest.ini");
    CHECK(man.u64("run.seed") == 3);
    CHECK(man.integer("scatter.nodes") == 1024);
    std::ifstream in(dir + "/scattering_table.csv");
    std::string line;
    bool header = false;
    while (std::getline(in, line))
        if (line == "rho,theta,dtheta_drho") header = true;
    CHECK(header);
    std::filesystem::remove_all(dir);
}
