#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "wsol/formats.hpp"

namespace fs = std::filesystem;
using namespace wsol;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "wsol");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const char* kTinyConfig =
    "synth.n_train = 64\n"
    "synth.n_val = 16\n"
    "synth.n_test = 16\n"
    "train.epochs = 2\n"
    "train.batch_size = 16\n"
    "train.learning_rate = 0.001\n"
    "model.c1 = 4\n"
    "model.c2 = 8\n"
    "model.c3 = 8\n"
    "model.embed_dim = 8\n";

}  // namespace

TEST_CASE("cli argument and config errors exit 2") {
  const fs::path d = fresh_dir("wsol_cli_args");
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"train", "--out", d.string()}).code == 2);
  CHECK(run_cli({"train", "--config", (d / "missing.cfg").string(), "--out", d.string()}).code == 2);
  std::ofstream(d / "bad.cfg") << "train.epochs = 1\nwhat = 2\n";
  const Run r = run_cli({"train", "--config", (d / "bad.cfg").string(), "--out", (d / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);
  std::ofstream(d / "ok.cfg") << kTinyConfig;
  CHECK(run_cli({"train", "--config", (d / "ok.cfg").string(), "--out", (d / "o").string(), "--ablation", "no-x"})
            .code == 2);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("train, score, eval and export end to end") {
  const fs::path d = fresh_dir("wsol_cli_e2e");
  std::ofstream(d / "run.cfg") << kTinyConfig;

  const Run t = run_cli({"train", "--config", (d / "run.cfg").string(), "--out", (d / "run").string()});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("maxboxaccv2=") != std::string::npos);
  for (const char* f : {"config.txt", "checkpoint.wsck", "metrics.csv"}) CHECK(fs::exists(d / "run" / f));
  const std::string csv = slurp(d / "run" / "metrics.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  // A rerun with the same seed is bitwise identical.
  REQUIRE(run_cli({"train", "--config", (d / "run.cfg").string(), "--out", (d / "again").string()}).code == 0);
  CHECK(slurp(d / "run" / "checkpoint.wsck") == slurp(d / "again" / "checkpoint.wsck"));
  CHECK(slurp(d / "run" / "metrics.csv") == csv);

  // Without the contrastive loss its column stays zero.
  REQUIRE(run_cli({"train", "--config", (d / "run.cfg").string(), "--out", (d / "noca").string(), "--ablation",
                   "no-ca"})
              .code == 0);
  std::istringstream rows(slurp(d / "noca" / "metrics.csv"));
  std::string row;
  std::getline(rows, row);
  while (std::getline(rows, row)) {
    std::istringstream cols(row);
    std::string epoch, l_cls, l_ca;
    std::getline(cols, epoch, ',');
    std::getline(cols, l_cls, ',');
    std::getline(cols, l_ca, ',');
    CHECK(l_ca == "0");
  }

  const std::string ckpt = (d / "run" / "checkpoint.wsck").string();
  const Run s = run_cli({"score", "--checkpoint", ckpt, "--data-seed", "3", "--out", (d / "scores").string(), "--set",
                         "synth.n_test=12"});
  REQUIRE(s.code == 0);
  CHECK(s.out == "n_maps=12\n");
  std::size_t n_files = 0;
  for (const auto& e : fs::directory_iterator(d / "scores" / "maps")) n_files += e.path().extension() == ".wsm";
  CHECK(n_files == 12);
  REQUIRE(run_cli({"score", "--checkpoint", ckpt, "--data-seed", "3", "--out", (d / "scores2").string(), "--set",
                   "synth.n_test=12"})
              .code == 0);
  CHECK(slurp(d / "scores" / "maps" / "test_5.wsm") == slurp(d / "scores2" / "maps" / "test_5.wsm"));
  CHECK(slurp(d / "scores" / "predictions.csv") == slurp(d / "scores2" / "predictions.csv"));

  const Run e = run_cli({"eval", "--maps", (d / "scores" / "maps").string(), "--gt", (d / "scores" / "gt.txt").string(),
                         "--out", (d / "report.txt").string()});
  CHECK(e.code == 0);
  const double v = std::stod(e.out);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);
  CHECK(fs::exists(d / "report.txt"));

  const Run h = run_cli({"export-heatmap", "--map", (d / "scores" / "maps" / "test_0.wsm").string(), "--out",
                         (d / "h.pgm").string()});
  CHECK(h.code == 0);
  CHECK(slurp(d / "h.pgm").rfind("P5\n64 64\n255\n", 0) == 0);

  std::ofstream(d / "broken.wsck") << "not a checkpoint";
  CHECK(run_cli({"score", "--checkpoint", (d / "broken.wsck").string(), "--data-seed", "1", "--out",
                 (d / "x").string()})
            .code == 4);
}

TEST_CASE("eval on a plateau fixture and id mismatches") {
  const fs::path d = fresh_dir("wsol_cli_eval");
  fs::create_directories(d / "maps");
  Tensor m({8, 8});
  for (std::size_t y = 2; y < 6; ++y)
    for (std::size_t x = 1; x < 4; ++x) m.at(y, x) = 1.0;
  write_score_map(d / "maps" / "a.wsm", m);
  write_gt_boxes(d / "gt.txt", {{"a", {Box{1, 2, 4, 6}}}});
  const Run ok = run_cli({"eval", "--maps", (d / "maps").string(), "--gt", (d / "gt.txt").string()});
  CHECK(ok.code == 0);
  CHECK(ok.out == "1.000000\n");

  CHECK(run_cli({"eval", "--maps", (d / "maps").string(), "--gt", (d / "gt.txt").string(), "--deltas", "0.5,x"}).code ==
        2);

  write_gt_boxes(d / "gt2.txt", {{"a", {Box{1, 2, 4, 6}}}, {"b", {Box{0, 0, 2, 2}}}});
  const Run miss = run_cli({"eval", "--maps", (d / "maps").string(), "--gt", (d / "gt2.txt").string()});
  CHECK(miss.code == 5);
  CHECK(miss.err.find("missing score map: b") != std::string::npos);

  std::ofstream(d / "maps" / "c.wsm") << "WSMX";
  CHECK(run_cli({"eval", "--maps", (d / "maps").string(), "--gt", (d / "gt.txt").string()}).code == 4);
  CHECK(run_cli({"export-heatmap", "--map", (d / "maps" / "c.wsm").string(), "--out", (d / "c.pgm").string()}).code ==
        4);

  const Run h = run_cli({"export-heatmap", "--map", (d / "maps" / "a.wsm").string(), "--out", (d / "a.pgm").string()});
  REQUIRE(h.code == 0);
  const std::string pgm = slurp(d / "a.pgm");
  const std::string header = "P5\n8 8\n255\n";
  REQUIRE(pgm.size() == header.size() + 64);
  CHECK(static_cast<unsigned char>(pgm[header.size()]) == 0);
  CHECK(static_cast<unsigned char>(pgm[header.size() + 2 * 8 + 1]) == 255);
}
