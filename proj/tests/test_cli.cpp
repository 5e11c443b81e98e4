#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cli.hpp"
#include "sepnet/data.hpp"
#include "sepnet/run_config.hpp"
#include "sepnet/train.hpp"

using namespace sepnet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("sepnet_test_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Value of `key` in the "[metrics]" block.
std::string metric(const std::string& text, const std::string& key) {
  std::istringstream in(text.substr(text.find("[metrics]")));
  std::string line;
  const std::string prefix = key + " = ";
  while (std::getline(in, line)) {
    const auto start = line.find_first_not_of(' ');
    if (start != std::string::npos && line.compare(start, prefix.size(), prefix) == 0)
      return line.substr(start + prefix.size());
  }
  return "";
}

const std::string kConfig = std::string(SEPNET_FIXTURES) + "/run.cfg";

}  // namespace

TEST_CASE("train writes a checkpoint and a report") {
  TempDir dir;
  const auto r = run({"train", "--config", kConfig, "--seed", "1", "--checkpoint", dir / "m.ckpt", "--report",
                      dir / "report.txt"});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  CHECK(fs::exists(dir / "m.ckpt"));
  CHECK(fs::exists(dir / "report.txt"));
  CHECK(slurp(dir / "report.txt") == r.out);
  CHECK(r.out.find("mode RLST") != std::string::npos);
  CHECK(metric(r.out, "epochs") == "3");
  CHECK_FALSE(metric(r.out, "seed.1.na").empty());
  CHECK_FALSE(metric(r.out, "seed.1.layer.1.kappa").empty());
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  CHECK(architecture_of(ck.model) == parse_architecture("3x4,3x4:relu;2x9"));
}

TEST_CASE("zero epochs checkpoint the initialized model") {
  TempDir dir;
  const auto r = run({"train", "--config", kConfig, "--seed", "4", "--epochs", "0", "--checkpoint", dir / "m.ckpt",
                      "--report", dir / "r.txt"});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  CHECK(r.out.find("(no epochs)") != std::string::npos);
  Rng rng(4);
  CHECK(load_checkpoint(dir / "m.ckpt").model == init_model(parse_architecture("3x4,3x4:relu;2x9"), rng));
}

TEST_CASE("PGD flags") {
  TempDir dir;
  const auto r = run({"train", "--config", kConfig, "--epochs", "1", "--attack", "pgd", "--eps", "0.031", "--steps",
                      "10", "--step-size", "0.0078", "--checkpoint", dir / "m.ckpt", "--report", dir / "r.txt"});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  CHECK(r.out.find("mode ARLST") != std::string::npos);
  CHECK(metric(r.out, "attack") == "pgd");
  CHECK(metric(r.out, "eps") == "0.031");
  CHECK(metric(r.out, "steps") == "10");
  CHECK(metric(r.out, "step_size") == "0.0078");
  CHECK(r.err.empty());
  const auto u = run({"train", "--config", kConfig, "--epochs", "0", "--attack", "pgd", "--eps", "0.1", "--steps", "2",
                      "--step-size", "0.01", "--checkpoint", dir / "u.ckpt", "--report", dir / "u.txt"});
  CHECK(u.code == cli::kOk);
  CHECK(u.err.find("warning: PGD steps * step-size < eps") != std::string::npos);
  // The underscore spelling is accepted as well.
  const auto d = run({"train", "--config", kConfig, "--step_size", "0.01", "--dump-config"});
  CHECK(d.out.find("step-size = 0.01\n") != std::string::npos);
}

TEST_CASE("dump-config round trip") {
  TempDir dir;
  const auto d = run({"train", "--config", kConfig, "--mu3", "0.001", "--seeds", "2,3", "--dump-config"});
  REQUIRE(d.code == cli::kOk);
  {
    std::ofstream(dir / "dumped.cfg") << d.out;
  }
  const auto again = run({"train", "--config", dir / "dumped.cfg", "--dump-config"});
  CHECK(again.out == d.out);
  CHECK(parse_config(d.out) == parse_config(again.out));
  CHECK(parse_config(d.out).mu3 == 0.001);
}

TEST_CASE("reports are byte-identical without timestamps") {
  TempDir dir;
  auto args = [&](const std::string& tag) {
    return std::vector<std::string>{"train", "--config", kConfig, "--seeds", "1,2", "--no-timestamp", "--checkpoint",
                                    dir / (tag + ".ckpt"), "--report", dir / (tag + ".txt")};
  };
  const auto a = run(args("a"));
  const auto b = run(args("b"));
  REQUIRE(a.code == cli::kOk);
  CHECK(a.out.find("generated") == std::string::npos);
  // Only the checkpoint paths differ.
  std::string ta = a.out;
  std::string tb = b.out;
  for (const char* seed : {".seed1", ".seed2"}) {
    for (auto* t : {&ta, &tb}) {
      const std::string from = (t == &ta ? "a" : "b") + std::string(seed);
      std::size_t at;
      while ((at = t->find(from)) != std::string::npos) t->replace(at, from.size(), "X" + std::string(seed));
    }
  }
  CHECK(ta == tb);
  CHECK(fs::exists(dir / "a.seed1.ckpt"));
  CHECK(fs::exists(dir / "a.seed2.ckpt"));
  CHECK_FALSE(metric(a.out, "na.var").empty());
  CHECK(load_checkpoint(dir / "a.seed1.ckpt").model == load_checkpoint(dir / "b.seed1.ckpt").model);
  const auto c = run({"train", "--config", kConfig, "--seed", "1", "--checkpoint", dir / "c.ckpt", "--report",
                      dir / "c.txt"});
  CHECK(c.out.find("generated ") != std::string::npos);
}

TEST_CASE("attack") {
  TempDir dir;
  REQUIRE(run({"train", "--config", kConfig, "--checkpoint", dir / "m.ckpt", "--report", dir / "r.txt"}).code ==
          cli::kOk);
  SUBCASE("zero budget: RA equals NA") {
    const auto r = run({"attack", "--config", kConfig, "--checkpoint", dir / "m.ckpt", "--attack", "fgsm", "--eps",
                        "0", "--summary", dir / "s.txt"});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    CHECK(metric(r.out, "na") == metric(r.out, "ra"));
    CHECK(metric(r.out, "linf.max") == "0");
    CHECK(fs::exists(dir / "s.txt"));
  }
  SUBCASE("FGSM 0.015 is echoed in the header") {
    const auto r = run({"attack", "--config", kConfig, "--checkpoint", dir / "m.ckpt", "--attack", "fgsm", "--eps",
                        "0.015", "--no-timestamp"});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    const std::string header = r.out.substr(0, r.out.find("\n\n"));
    CHECK(header.find("fgsm") != std::string::npos);
    CHECK(header.find("0.015") != std::string::npos);
    CHECK(std::stod(metric(r.out, "linf.max")) <= 0.015 + 1e-12);
  }
  SUBCASE("missing checkpoint") {
    const auto r = run({"attack", "--config", kConfig, "--checkpoint", dir / "nope.ckpt"});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find(dir / "nope.ckpt") != std::string::npos);
  }
}

TEST_CASE("inspect") {
  SUBCASE("identity fixture") {
    const auto r = run({"inspect", std::string(SEPNET_FIXTURES) + "/identity_2x2.ckpt"});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    CHECK(metric(r.out, "layer.0.kappa") == "1");
    // T = 1: the factorization saves nothing.
    CHECK(metric(r.out, "cr.structural") == "1");
    CHECK(metric(r.out, "params.separable") == "4");
    CHECK(metric(r.out, "layer.0.factor.0.zeros") == "2");
  }
  SUBCASE("64x49 and 64x64 factors replacing a 3136x1024 map") {
    TempDir dir;
    Rng rng(11);
    Matrix a(64, 49);
    Matrix b(64, 64);
    for (double& v : a.data()) v = rng.uniform(-0.1, 0.1);
    for (double& v : b.data()) v = rng.uniform(-0.1, 0.1);
    const SepMlp m({Layer{SeparableTransform({a, b}), Activation::None}}, 64 * 64);
    save_checkpoint({m, {}, {}}, dir / "fc1.ckpt");
    const auto r = run({"inspect", dir / "fc1.ckpt", "--replaces", "0:3136x1024"});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    CHECK(r.out.find("separable 7,232 vs dense 3,211,264") != std::string::npos);
    CHECK(metric(r.out, "layer.0.replaced.ratio").substr(0, 5) == "444.0");
    CHECK(metric(r.out, "layer.0.params.separable") == "7232");
    CHECK(run({"inspect", dir / "fc1.ckpt", "--replaces", "3:10x10"}).code == cli::kUsage);
    CHECK(run({"inspect", dir / "fc1.ckpt", "--replaces", "bad"}).code == cli::kUsage);
  }
  SUBCASE("pruned model: zero bins match the prune report") {
    TempDir dir;
    const auto t = run({"train", "--config", kConfig, "--mu3", "0.001", "--prune-threshold", "0.05", "--checkpoint",
                        dir / "p.ckpt", "--report", dir / "r.txt"});
    REQUIRE_MESSAGE(t.code == cli::kOk, t.err);
    const std::string pruned = metric(t.out, "seed.1.pruned_entries");
    REQUIRE(std::stoul(pruned) > 0);
    const auto r = run({"inspect", dir / "p.ckpt"});
    REQUIRE(r.code == cli::kOk);
    CHECK(metric(r.out, "zeros.total") == pruned);
    CHECK(metric(r.out, "checkpoint.pruned_entries") == pruned);
  }
  SUBCASE("missing file") { CHECK(run({"inspect", "/nonexistent.ckpt"}).code == cli::kDataError); }
}

TEST_CASE("verify and usage exit codes") {
  const auto ok = run({"verify", "--trials", "20"});
  CHECK(ok.code == cli::kOk);
  CHECK(ok.out.find("PASS kron-associativity (20 trials)") != std::string::npos);
  const auto bad = run({"verify", "--inject-kron-fault"});
  CHECK(bad.code == cli::kVerifyFailed);
  CHECK(bad.out.find("FAIL kron-associativity") != std::string::npos);
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({"train", "--epochs", "many"}).code == cli::kUsage);
  CHECK(run({"verify", "--trials", "0"}).code == cli::kUsage);
  CHECK(run({"train", "--config", "/nonexistent.cfg"}).code == cli::kDataError);
  CHECK(run({"train", "--config", kConfig, "--arch", "3x4,3x4;3x9", "--dump-config"}).code == cli::kOk);
  CHECK(run({"train", "--config", kConfig, "--arch", "3x4,3x4;3x9", "--report", "/dev/null"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kOk);
}
