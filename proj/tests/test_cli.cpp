#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::string cli = RESOKAM_CLI_PATH;
const fs::path configs = fs::path(RESOKAM_SOURCE_DIR) / "configs";

struct CliResult {
    int code;
    std::string out, err;
};

class CliTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("resokam_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    CliResult run(const std::string& args, const fs::path& out = {}) const
    {
        const fs::path o = out.empty() ? dir / "out" : out;
        const std::string cmd = cli + " " + args + " --out " + o.string() + " > " + (dir / "stdout").string() + " 2> " +
                                (dir / "stderr").string();
        const int status = std::system(cmd.c_str());
        return {WEXITSTATUS(status), slurp(dir / "stdout"), slurp(dir / "stderr")};
    }

    json report(const std::string& name, const fs::path& out = {}) const
    {
        return json::parse(slurp((out.empty() ? dir / "out" : out) / name));
    }

    static std::string cfg(const std::string& name) { return (configs / name).string(); }
};

} // namespace

TEST_F(CliTest, LatticeEnumerateWritesCsvAndReport)
{
    const auto r = run("lattice enumerate --n 2 --K 3");
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "out" / "generators.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k1,k2,norm1,normInf");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
    const auto rep = report("lattice_enumerate.json");
    EXPECT_EQ(rep["schema_version"], 1);
    EXPECT_EQ(rep["command"], "lattice enumerate");
    EXPECT_EQ(rep["status"], "ok");
    EXPECT_EQ(rep["results"]["count"], 8);
    EXPECT_TRUE(rep["run"].contains("threads"));
    EXPECT_TRUE(rep["run"].contains("timestamp"));
}

TEST_F(CliTest, LatticeCompleteCertifies)
{
    const auto r = run("lattice complete --k 2,3");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = report("lattice_complete.json")["results"];
    EXPECT_EQ(res["det"], 1);
    EXPECT_EQ(res["A"][0], json::array({2, 3}));
    EXPECT_TRUE(res["bounds_ok"].get<bool>());
}

TEST_F(CliTest, NonPrimitiveKIsAnError)
{
    EXPECT_EQ(run("lattice complete --k 2,4").code, 2);
}

TEST_F(CliTest, VerifyAllPassesOnQuadraticDisk)
{
    const auto r = run("verify-all --spec " + cfg("quadratic2d.toml") + " --params " + cfg("params.toml") + " --samples 5000 --potential " +
                       cfg("pendulum2d.txt"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = report("verify-all.json")["results"];
    EXPECT_EQ(res["failed_invariants"], 0);
    bool saw_secular = false;
    for (const auto& c : res["checks"]) {
        EXPECT_TRUE(c["kind"] == "invariant" || c["kind"] == "hypothesis");
        if (c["kind"] == "invariant") {
            EXPECT_TRUE(c["pass"].get<bool>()) << c["name"];
        }
        saw_secular = saw_secular || c["name"].get<std::string>().rfind("secular", 0) == 0;
    }
    EXPECT_TRUE(saw_secular);
}

TEST_F(CliTest, ParameterInequalityIsReported)
{
    const auto r = run("cover classify --spec " + cfg("quadratic2d.toml") + " --eps 1e-6 --K 6 --K0 2 --y 0.3,0.2");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("K >= 6*sHat*K0"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownFlagIsAUsageError)
{
    EXPECT_EQ(run("lattice enumerate --n 2 --K 3 --bogus").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(CliTest, KFromEpsFlag)
{
    const auto r = run("cover classify --spec " + cfg("quadratic2d.toml") + " --eps 1e-6 --K-from-eps --y 0.3,0.2");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto p = report("cover_classify.json")["results"]["params"];
    EXPECT_EQ(p["K"], 191);
    const auto f = run("cover classify --spec " + cfg("quadratic2d.toml") + " --params " + cfg("params_from_eps.toml") + " --y 0.3,0.2");
    ASSERT_EQ(f.code, 0) << f.err;
    EXPECT_EQ(report("cover_classify.json")["results"]["params"]["K"], 191);
}

TEST_F(CliTest, RerunReproducesResults)
{
    const auto r = run("cover measure --spec " + cfg("quadratic2d.toml") + " --eps 1e-26 --K 12 --K0 2 --samples 20000 --seed 5");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto first = report("cover_measure.json");
    const auto again = run("rerun --report " + (dir / "out" / "cover_measure.json").string(), dir / "again");
    ASSERT_EQ(again.code, 0) << again.err;
    const auto second = report("cover_measure.json", dir / "again");
    EXPECT_EQ(first["results"], second["results"]);
    EXPECT_EQ(first["config"], second["config"]);
}

TEST_F(CliTest, RerunRejectsBrokenReports)
{
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_EQ(run("rerun --report " + (dir / "bad.json").string()).code, 2);
    std::ofstream(dir / "empty.json") << "{}";
    EXPECT_EQ(run("rerun --report " + (dir / "empty.json").string()).code, 2);
}

TEST_F(CliTest, Scan2dSvg)
{
    const auto r = run("cover scan2d --spec " + cfg("quadratic2d.toml") + " --params " + cfg("params.toml") + " --grid 40 --svg");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "out" / "zones2d.svg").rfind("<svg", 0), 0u);
    EXPECT_TRUE(fs::exists(dir / "out" / "zones2d.csv"));
    const auto bad = run("cover scan2d --spec " + cfg("quadratic3d.toml") + " --eps 1e-40 --K 12 --K0 2 --grid 10 --svg");
    EXPECT_EQ(bad.code, 2);
}

TEST_F(CliTest, GraphBuildWritesCsvAndSvg)
{
    const auto r = run("graph build --spec " + cfg("quadratic2d.toml") + " --k 0,1 --nvarpi 5 --svg");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "out" / "graph.svg").rfind("<svg", 0), 0u);
    const auto res = report("graph_build.json")["results"];
    EXPECT_LE(res["margins"]["max_residual"].get<double>(), 1e-10);
    EXPECT_GT(res["J"].size(), 0u);
}

TEST_F(CliTest, GraphCertifyOnQuartic)
{
    const auto r = run("graph certify --spec " + cfg("quartic2d.toml") + " --k 1,0");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = report("graph_certify.json")["results"];
    EXPECT_TRUE(res["first"]["pass"].get<bool>());
    EXPECT_TRUE(res["second"]["pass"].get<bool>());
}

TEST_F(CliTest, NonresRequiresSlabInsideGraph)
{
    const auto ok = run("nonres --spec " + cfg("quadratic2d.toml") + " --eps 1e-37 --K 12 --K0 2 --k 0,1 --samples 500");
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_TRUE(fs::exists(dir / "out" / "nonres_samples.csv"));
    const auto bad = run("graph nonres --spec " + cfg("quadratic2d.toml") + " --eps 1e-6 --K 12 --K0 2 --k 0,1 --samples 500");
    EXPECT_EQ(bad.code, 2);
}

TEST_F(CliTest, SecularPendulum)
{
    const auto r = run("secular --spec " + cfg("quadratic2d.toml") + " --potential " + cfg("pendulum2d.txt") + " --k 1,-1 --eps 1e-3 --svg");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = report("secular.json")["results"];
    EXPECT_NEAR(res["m_k"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(res["pendulum_energies"]["separatrix"].get<double>(), 1e-3, 1e-15);
    EXPECT_EQ(res["remainders"].size(), 4u);
    EXPECT_EQ(slurp(dir / "out" / "G0.svg").rfind("<svg", 0), 0u);

    const auto deg = run("secular --spec " + cfg("quadratic2d.toml") + " --potential " + cfg("pendulum2d.txt") + " --k 0,1 --eps 1e-3");
    ASSERT_EQ(deg.code, 0) << deg.err;
    EXPECT_TRUE(report("secular.json")["results"]["degenerate"].get<bool>());
}

TEST_F(CliTest, MalformedConfigNamesTheField)
{
    std::ofstream(dir / "bad.toml") << "family = \"isotropic\"\ndim = 2\nr = 0.25\n[domain]\nkind = \"ball\"\nbounds = [1.0]\n";
    const auto r = run("model validate --spec " + (dir / "bad.toml").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("domain.bounds"), std::string::npos) << r.err;

    std::ofstream(dir / "dup.toml") << "family = \"isotropic\"\nfamily = \"quartic\"\n";
    const auto d = run("model validate --spec " + (dir / "dup.toml").string());
    EXPECT_EQ(d.code, 2);
    EXPECT_NE(d.err.find("family"), std::string::npos) << d.err;

    std::ofstream(dir / "extra.toml") << "family = \"isotropic\"\ndim = 2\nr = 0.25\nradius = 3\n";
    const auto e = run("model validate --spec " + (dir / "extra.toml").string());
    EXPECT_EQ(e.code, 2);
    EXPECT_NE(e.err.find("radius"), std::string::npos) << e.err;
}

TEST_F(CliTest, OverstatedConstantsFailValidation)
{
    std::ofstream(dir / "gamma.toml") << "family = \"isotropic\"\ndim = 2\nr = 0.25\n[domain]\nkind = \"ball\"\nbounds = [[0.0, 0.0], 1.0]\n"
                                         "[declared]\ngamma = 2.0\n";
    const auto r = run("model validate --spec " + (dir / "gamma.toml").string());
    EXPECT_EQ(r.code, 2);
    const auto rep = report("model_validate.json");
    EXPECT_FALSE(rep["results"]["ok"].get<bool>());
    EXPECT_EQ(rep["results"]["violations"][0]["constant"], "gamma");
}
