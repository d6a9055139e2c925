#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zenosim/cli/commands.hpp"

using namespace zenosim;
using namespace zenosim::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("zenosim_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string error_of(const std::string& yaml) {
    try {
        parse_spec_string(yaml);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

const char* kBoundSpec = R"(
drives:
  rabi_mhz: 1.0
protocol:
  bound_table:
    grid_points: 6
    samples: 32
    refine_steps: 8
)";

int run_tool(const std::string& args) {
    const std::string cmd = std::string(ZENOSIM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Spec, EmptyGivesDefaults) {
    const auto s = parse_spec_string("");
    EXPECT_EQ(s.device.chi1_mhz, -4.25);
    EXPECT_EQ(s.device.chi2_mhz, -4.35);
    EXPECT_EQ(s.device.chif_mhz, -10.0);
    EXPECT_EQ(s.device.kappa_mhz, 0.15);
    EXPECT_EQ(s.device.t1_fe_us, 12.9);
    EXPECT_EQ(s.drives.rabi_mhz, 1.0);
    EXPECT_EQ(s.drives.zeno_eps_mhz, 2.0);
    EXPECT_EQ(s.sim.fock, 20u);
    EXPECT_DOUBLE_EQ(s.sim.dt_us, 1e-3);
    EXPECT_EQ(s.stark.mode, "calibrate");
    EXPECT_EQ(s.seed, 1u);
    EXPECT_EQ(spec_hash(s), spec_hash(parse_spec_string("{}")));
}

TEST(Spec, NegativeKappaRejected) {
    const auto msg = error_of("device:\n  kappa_mhz: -1\n");
    EXPECT_NE(msg.find("kappa_mhz must be > 0"), std::string::npos) << msg;
}

TEST(Spec, UnknownKeySuggestsNearest) {
    const auto msg = error_of("device:\n  kapa_mhz: 0.2\n");
    EXPECT_NE(msg.find("unknown key 'spec.device.kapa_mhz'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("did you mean 'kappa_mhz'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(Spec, TypeMismatchRejected) {
    const auto msg = error_of("sim:\n  fock_dim: many\n");
    EXPECT_NE(msg.find("wrong type"), std::string::npos) << msg;
    EXPECT_FALSE(error_of("protocol:\n  gate_evolve:\n    model: exact\n").empty());
    EXPECT_FALSE(error_of("- 1\n- 2\n").empty());
    EXPECT_FALSE(error_of("device: [1, 2\n").empty());
}

TEST(Spec, OverridesAndStarkForms) {
    const auto s = parse_spec_string(R"(
device:
  infinite_coherence: true
drives:
  stark: {g1e1_mhz: 0.1, g2e2_mhz: 0.2, ef_mhz: -0.3}
sim:
  fock_dim: 12
  dt_ns: 0.5
protocol:
  gate_evolve:
    n_cut: 5
)");
    EXPECT_TRUE(std::isinf(s.device.t1_eg_us));
    EXPECT_EQ(s.stark.mode, "explicit");
    EXPECT_EQ(s.stark.values.ef, -0.3);
    EXPECT_EQ(s.sim.fock, 12u);
    EXPECT_DOUBLE_EQ(s.sim.dt_us, 5e-4);
    ASSERT_TRUE(s.gate_evolve.n_cut.has_value());
    EXPECT_EQ(*s.gate_evolve.n_cut, 5);
    EXPECT_EQ(parse_spec_string("drives:\n  stark: zero\n").stark.mode, "zero");
    EXPECT_FALSE(error_of("drives:\n  stark: sometimes\n").empty());
}

TEST(Spec, NearestKey) {
    EXPECT_EQ(levenshtein("kapa_mhz", "kappa_mhz"), 1u);
    EXPECT_EQ(nearest_key("kapa_mhz", {"chi1_mhz", "kappa_mhz"}), "kappa_mhz");
    EXPECT_EQ(nearest_key("zzzzzzzzzzzz", {"ab"}), "");
}

TEST(Commands, UnknownSubcommand) {
    try {
        run_subcommand("bound-tabel", parse_spec_string(""));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bound-table"), std::string::npos);
    }
}

TEST(Commands, BlockSweepSchema) {
    const auto s = parse_spec_string(R"(
protocol:
  block_sweep: {rabi_mhz: [2.0], eps_mhz: [0.0, 1.0], models: [ideal-markovian]}
)");
    const auto out = run_subcommand("block-sweep", s);
    ASSERT_EQ(out.tables.size(), 1u);
    const auto& t = out.tables[0].second;
    EXPECT_EQ(t.columns, (std::vector<std::string>{"rabi_mhz", "eps_mhz", "model", "p_gg"}));
    EXPECT_EQ(t.rows.size(), 2u);
    EXPECT_LT(t.number(0, "p_gg"), t.number(1, "p_gg"));
}

TEST(Commands, BoundTableSandwich) {
    const auto s = parse_spec_string(kBoundSpec);
    const auto t = run_subcommand("bound-table", s).tables.at(0).second;
    EXPECT_EQ(t.columns, (std::vector<std::string>{"ratio", "analytic", "loosened", "lower_estimate"}));
    ASSERT_EQ(t.rows.size(), 6u);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        EXPECT_GT(t.number(i, "ratio"), 0.0);
        EXPECT_LE(t.number(i, "ratio"), 0.06 + 1e-15);
        EXPECT_LE(t.number(i, "lower_estimate"), t.number(i, "analytic"));
        EXPECT_LE(t.number(i, "analytic"), t.number(i, "loosened"));
    }
}

TEST(Commands, TomoRoundTrip) {
    const auto s = parse_spec_string("protocol:\n  tomo_roundtrip: {states: 3}\n");
    const auto t = run_subcommand("tomo-roundtrip", s).tables.at(0).second;
    ASSERT_EQ(t.rows.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(t.number(i, "trace_distance"), 1e-8);
}

TEST(Outputs, ByteIdenticalAndHashed) {
    const auto s = parse_spec_string(kBoundSpec);
    const auto a = scratch("a"), b = scratch("b");
    write_outputs(a, "bound-table", s, run_subcommand("bound-table", s));
    write_outputs(b, "bound-table", s, run_subcommand("bound-table", s));
    EXPECT_EQ(slurp(a / "bound_table.csv"), slurp(b / "bound_table.csv"));
    EXPECT_EQ(slurp(a / "bound_table.json"), slurp(b / "bound_table.json"));

    const auto csv = slurp(a / "bound_table.csv");
    const auto header = csv.substr(0, csv.find('\n'));
    EXPECT_EQ(header, "ratio,analytic,loosened,lower_estimate,spec_hash");
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    const std::string hash = spec_hash(s);
    EXPECT_EQ(hash.size(), 64u);
    std::istringstream rows(csv);
    std::string line;
    std::getline(rows, line);
    std::size_t n = 0;
    while (std::getline(rows, line)) {
        EXPECT_EQ(line.substr(line.rfind(',') + 1), hash);
        ++n;
    }
    EXPECT_EQ(n, 6u);

    const auto meta = nlohmann::json::parse(slurp(a / "bound_table.json"));
    EXPECT_EQ(meta["spec_hash"], hash);
    EXPECT_EQ(sha256_hex(meta["spec"].dump()), hash);
    EXPECT_EQ(meta["version"], ZENOSIM_VERSION);
    EXPECT_EQ(meta["subcommand"], "bound-table");
}

TEST(Outputs, HashTracksSpecChanges) {
    auto s = parse_spec_string(kBoundSpec);
    const auto h0 = spec_hash(s);
    s.seed = 2;
    EXPECT_NE(spec_hash(s), h0);
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Tool, ExitCodes) {
    const auto dir = scratch("tool");
    {
        std::ofstream(dir / "ok.yaml") << kBoundSpec;
        std::ofstream(dir / "bad.yaml") << "device:\n  kappa_mhz: -1\n";
        std::ofstream(dir / "numeric.yaml") << "drives:\n  stark: zero\nsim:\n  refine_dt: false\n  dt_ns: 100\n  fock_dim: 4\n";
    }
    const std::string out = (dir / "out").string();
    EXPECT_EQ(run_tool("bound-table --spec " + (dir / "ok.yaml").string() + " --out " + out + " --seed 3"), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "bound_table.csv"));
    const auto meta = nlohmann::json::parse(slurp(dir / "out" / "bound_table.json"));
    EXPECT_EQ(meta["seed"], 3);
    EXPECT_EQ(run_tool("bound-table --spec " + (dir / "bad.yaml").string() + " --out " + out), 2);
    EXPECT_EQ(run_tool("bound-table --spec " + (dir / "missing.yaml").string() + " --out " + out), 2);
    EXPECT_EQ(run_tool("no-such-command --out " + out), 2);
    EXPECT_EQ(run_tool("gate-evolve --spec " + (dir / "numeric.yaml").string() + " --out " + out), 3);
    EXPECT_EQ(run_tool("bound-table --fock 1 --out " + out), 2);
}
