#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ppgl/case_model.hpp"
#include "ppgl/orchestrator.hpp"
#include "ppgl/png_io.hpp"
#include "ppgl/rng.hpp"
#include "ppgl/stain.hpp"
#include "ppgl/swarm_env.hpp"
#include "ppgl/trainer.hpp"

using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(PPGL_CLI_PATH) + " " + args + " 2>/dev/null";
  std::array<char, 4096> buffer{};
  CliResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buffer.data(), buffer.size(), pipe)) result.out += buffer.data();
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kTmp = "/tmp/ppgl_cli";

struct TmpDir {
  TmpDir() {
    if (std::system(("rm -rf " + kTmp + " && mkdir -p " + kTmp).c_str()) != 0) std::abort();
  }
};
const TmpDir tmp_dir_guard{};

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("gen-corpus --n 5").exit_code == 2);  // missing --seed/--out
  CHECK(run_cli("no-such-subcommand").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("kg-query --help").exit_code == 0);
}

TEST_CASE("runtime errors exit with code 1") {
  CHECK(run_cli("score-case --case-file /nonexistent/case.json").exit_code == 1);
  CHECK(run_cli("evaluate --checkpoint /nonexistent.json --corpus /nonexistent.ldjson").exit_code == 1);
}

TEST_CASE("gen-corpus writes n records deterministically") {
  const std::string out_a = kTmp + "/corpus_a.ldjson";
  const std::string out_b = kTmp + "/corpus_b.ldjson";

  auto empty = run_cli("gen-corpus --n 0 --seed 1 --out " + out_a);
  CHECK(empty.exit_code == 0);
  CHECK(ppgl::load_corpus(out_a).empty());

  auto a = run_cli("gen-corpus --n 268 --seed 1 --out " + out_a);
  CHECK(a.exit_code == 0);
  CHECK(json::parse(a.out).at("cases").get<int>() == 268);
  CHECK(ppgl::load_corpus(out_a).size() == 268);

  auto b = run_cli("gen-corpus --n 268 --seed 1 --out " + out_b);
  CHECK(b.exit_code == 0);
  CHECK(slurp(out_a) == slurp(out_b));  // byte-identical

  auto c = run_cli("gen-corpus --n 268 --seed 2 --out " + out_b);
  CHECK(c.exit_code == 0);
  CHECK(slurp(out_a) != slurp(out_b));
}

TEST_CASE("kg-query surfaces the SDHB risk range and clean not-found") {
  auto hit = run_cli("kg-query --entity SDHB");
  CHECK(hit.exit_code == 0);
  const json j = json::parse(hit.out);
  CHECK(j.at("found").get<bool>());
  CHECK(j.at("node").at("attributes").at("metastatic_risk_range").get<std::string>() == "35-75%");

  auto miss = run_cli("kg-query --entity BRCA1");
  CHECK(miss.exit_code == 0);  // not-found is a result, not an error
  const json mj = json::parse(miss.out);
  CHECK(!mj.at("found").get<bool>());
  CHECK(!mj.contains("node"));
}

TEST_CASE("score-case prints the GAPP score for a case file") {
  const ppgl::CaseRecord rec = ppgl::generate_case(11, ppgl::GeneratorConfig{});
  const std::string path = kTmp + "/case.json";
  std::ofstream(path) << ppgl::to_json(rec).dump() << '\n';

  auto result = run_cli("score-case --case-file " + path);
  CHECK(result.exit_code == 0);
  const json j = json::parse(result.out);
  const ppgl::GappScore expected = ppgl::score_components(rec.truth, ppgl::default_rubric());
  CHECK(j.at("total").get<int>() == expected.total);
  CHECK(j.at("case_id").get<std::string>() == rec.case_id);

  auto with_rubric = run_cli("score-case --case-file " + path + " --rubric " +
                             std::string(PPGL_DATA_DIR) + "/default_rubric.json");
  CHECK(with_rubric.exit_code == 0);
  CHECK(json::parse(with_rubric.out).at("total").get<int>() == expected.total);
}

TEST_CASE("normalize to the source statistics is a pixel-level no-op") {
  // Tissue-plus-background test image.
  ppgl::Rng rng(3);
  ppgl::RasterImage img{16, 16, {}};
  img.pixels.resize(16 * 16 * 3);
  for (int i = 0; i < 16 * 16; ++i) {
    const bool tissue = i % 16 < 8;
    img.pixels[3 * i] = tissue ? rng.uniform(0.3, 0.5) : 0.99;
    img.pixels[3 * i + 1] = tissue ? rng.uniform(0.2, 0.4) : 0.99;
    img.pixels[3 * i + 2] = tissue ? rng.uniform(0.3, 0.5) : 0.99;
  }
  const std::string in_png = kTmp + "/in.png";
  const std::string out_png = kTmp + "/out.png";
  ppgl::write_png(img, in_png);

  // The 8-bit PNG is the ground truth the CLI actually sees.
  const ppgl::RasterImage quantized = ppgl::read_png(in_png);
  const auto lab = ppgl::rgb_to_lab(quantized);
  const auto stats = ppgl::compute_stain_stats(lab, ppgl::tissue_mask(lab, 85.0));
  const std::string stats_path = kTmp + "/stats.json";
  std::ofstream(stats_path) << ppgl::to_json(stats).dump() << '\n';

  auto result = run_cli("normalize --input-png " + in_png + " --target-stats " + stats_path +
                        " --epsilon 0 --out-png " + out_png);
  CHECK(result.exit_code == 0);
  const ppgl::RasterImage out = ppgl::read_png(out_png);
  REQUIRE(out.pixels.size() == quantized.pixels.size());
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    CHECK(std::abs(out.pixels[i] - quantized.pixels[i]) <= 1.0 / 255.0 + 1e-9);
}

TEST_CASE("adapt-bn blends running statistics") {
  const std::string state_path = kTmp + "/bn_state.json";
  const std::string features_path = kTmp + "/bn_features.json";
  std::ofstream(state_path) << R"({"channel_count":1,"running_mean":[0.0],)"
                            << R"("running_var":[1.0],"momentum_alpha":0.1})" << '\n';
  std::ofstream(features_path) << R"({"channel_count":1,"spatial_size":4,)"
                               << R"("values":[10.0,10.0,10.0,10.0]})" << '\n';
  auto result = run_cli("adapt-bn --state " + state_path + " --features " + features_path);
  CHECK(result.exit_code == 0);
  const json j = json::parse(result.out);
  CHECK(j.at("running_mean")[0].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(j.at("running_var")[0].get<double>() == doctest::Approx(0.9).epsilon(1e-12));

  // Alpha override, sequence form.
  std::ofstream(features_path) << R"([{"channel_count":1,"spatial_size":4,)"
                               << R"("values":[10.0,10.0,10.0,10.0]},)"
                               << R"({"channel_count":1,"spatial_size":4,)"
                               << R"("values":[10.0,10.0,10.0,10.0]},)"
                               << R"({"channel_count":1,"spatial_size":4,)"
                               << R"("values":[10.0,10.0,10.0,10.0]}])" << '\n';
  result = run_cli("adapt-bn --state " + state_path + " --features " + features_path +
                   " --alpha 0.1");
  CHECK(result.exit_code == 0);
  CHECK(json::parse(result.out).at("running_mean")[0].get<double>() ==
        doctest::Approx(2.71).epsilon(1e-12));
}

TEST_CASE("train then evaluate round trips through checkpoint files") {
  const std::string corpus_path = kTmp + "/train_corpus.ldjson";
  ppgl::save_corpus(ppgl::generate_corpus(5, 24, ppgl::GeneratorConfig{}), corpus_path);

  const std::string run_a = kTmp + "/run_a";
  const std::string run_b = kTmp + "/run_b";
  auto a = run_cli("train --corpus " + corpus_path + " --iters 5 --seed 9 --out " + run_a);
  CHECK(a.exit_code == 0);
  auto b = run_cli("train --corpus " + corpus_path + " --iters 5 --seed 9 --out " + run_b);
  CHECK(b.exit_code == 0);
  // Identical seeds give byte-identical curves and checkpoints.
  CHECK(slurp(run_a + "/learning_curve.ldjson") == slurp(run_b + "/learning_curve.ldjson"));
  CHECK(slurp(run_a + "/checkpoint.json") == slurp(run_b + "/checkpoint.json"));

  auto ev = run_cli("evaluate --checkpoint " + run_a + "/checkpoint.json --corpus " + corpus_path +
                    " --mode sample --seed 3");
  CHECK(ev.exit_code == 0);
  const json metrics = json::parse(ev.out);
  CHECK(metrics.contains("gapp_total_mae"));
  CHECK(metrics.contains("mutation_f1"));
  CHECK(metrics.at("episodes").get<int>() == 24);
}

TEST_CASE("report-case emits a structured report and audit log") {
  const std::string case_path = kTmp + "/report_case.json";
  std::ofstream(case_path) << ppgl::to_json(ppgl::generate_case(77, ppgl::GeneratorConfig{})).dump()
                           << '\n';
  const std::string checkpoint = kTmp + "/run_a/checkpoint.json";
  const std::string audit_path = kTmp + "/audit.ldjson";
  auto result = run_cli("report-case --checkpoint " + checkpoint + " --case-file " + case_path +
                        " --mode greedy --audit-out " + audit_path);
  CHECK(result.exit_code == 0);
  const json report = json::parse(result.out);
  CHECK(report.contains("gapp_score"));
  CHECK(report.contains("evidence_trail"));
  CHECK(report.at("narrative").get<std::string>().find("== Findings ==") != std::string::npos);
  CHECK(std::ifstream(audit_path).good());
}
