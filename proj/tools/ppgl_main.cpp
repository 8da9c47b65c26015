// ppgl: batch CLI over the PPGL diagnostic pipeline.
// JSON results go to stdout, human-readable notes to stderr; exit codes are
// 0 on success, 1 on runtime errors, 2 on usage errors.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ppgl/adabn.hpp"
#include "ppgl/audit_log.hpp"
#include "ppgl/case_model.hpp"
#include "ppgl/gapp.hpp"
#include "ppgl/knowledge_graph.hpp"
#include "ppgl/orchestrator.hpp"
#include "ppgl/png_io.hpp"
#include "ppgl/stain.hpp"
#include "ppgl/trainer.hpp"

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

struct PipelineOptions {
  std::string config_path;  // optional JSON with noise/reward/train sections
  std::string rubric_path;
  std::string graph_path;
};

struct Pipeline {
  ppgl::NoiseConfig noise;
  ppgl::RewardConfig reward;
  ppgl::TrainConfig train;
  double alert_threshold = 0.5;
  int max_steps = 20;
  ppgl::GappRubric rubric;
  ppgl::KnowledgeGraph graph;
};

Pipeline load_pipeline(const PipelineOptions& options) {
  Pipeline p;
  p.rubric = options.rubric_path.empty() ? ppgl::default_rubric()
                                         : ppgl::load_rubric(options.rubric_path);
  p.graph =
      options.graph_path.empty() ? ppgl::default_graph() : ppgl::load_graph(options.graph_path);
  if (!options.config_path.empty()) {
    const json j = read_json_file(options.config_path);
    if (j.contains("noise")) p.noise = ppgl::noise_config_from_json(j.at("noise"));
    if (j.contains("reward")) p.reward = ppgl::reward_config_from_json(j.at("reward"));
    if (j.contains("train")) {
      const json& t = j.at("train");
      p.train.iterations = t.value("iterations", p.train.iterations);
      p.train.batch_size = t.value("batch_size", p.train.batch_size);
      p.train.learning_rate = t.value("learning_rate", p.train.learning_rate);
      p.train.gae_lambda = t.value("gae_lambda", p.train.gae_lambda);
    }
    p.alert_threshold = j.value("alert_threshold", p.alert_threshold);
    p.max_steps = j.value("max_steps", p.max_steps);
  }
  return p;
}

ppgl::Orchestrator make_orchestrator(const Pipeline& p) {
  ppgl::OrchestratorConfig config;
  config.noise = p.noise;
  config.reward = p.reward;
  config.rubric = p.rubric;
  config.alert_threshold = p.alert_threshold;
  config.max_steps = p.max_steps;
  return ppgl::Orchestrator(std::move(config), p.graph);
}

int run_gen_corpus(int n, std::uint64_t seed, const std::string& config_path,
                   const std::string& out) {
  ppgl::GeneratorConfig config;
  if (!config_path.empty()) {
    const json j = read_json_file(config_path);
    config = ppgl::generator_config_from_json(j.contains("generator") ? j.at("generator") : j);
  }
  const auto cases = ppgl::generate_corpus(seed, n, config);
  ppgl::save_corpus(cases, out);

  int sdhb = 0, vhl = 0, ret = 0;
  for (const auto& rec : cases) {
    sdhb += rec.genotype.sdhb;
    vhl += rec.genotype.vhl;
    ret += rec.genotype.ret;
  }
  const double denom = cases.empty() ? 1.0 : static_cast<double>(cases.size());
  const json summary{{"cases", cases.size()},
                     {"sdhb_rate", sdhb / denom},
                     {"vhl_rate", vhl / denom},
                     {"ret_rate", ret / denom},
                     {"out", out}};
  std::cout << summary.dump(2) << '\n';
  std::cerr << "wrote " << cases.size() << " cases to " << out << '\n';
  return 0;
}

int run_train(const std::string& corpus_path, int iters, std::uint64_t seed,
              const std::string& out_dir, const PipelineOptions& options) {
  Pipeline p = load_pipeline(options);
  p.train.iterations = iters;
  p.train.seed = seed;
  const auto corpus = ppgl::load_corpus(corpus_path);
  const auto orch = make_orchestrator(p);
  const ppgl::TrainResult result = ppgl::train(orch, corpus, p.train);

  std::filesystem::create_directories(out_dir);
  const std::string checkpoint = out_dir + "/checkpoint.json";
  const std::string curve = out_dir + "/learning_curve.ldjson";

  // Checkpoint carries a hash of the full training configuration so runs
  // are attributable to their settings.
  const json train_config{{"iterations", p.train.iterations},
                          {"batch_size", p.train.batch_size},
                          {"learning_rate", p.train.learning_rate},
                          {"gae_lambda", p.train.gae_lambda},
                          {"seed", p.train.seed},
                          {"max_steps", p.max_steps},
                          {"noise", ppgl::to_json(p.noise)},
                          {"reward", ppgl::to_json(p.reward)}};
  const std::string dumped = train_config.dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const char c : dumped) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream hash_hex;
  hash_hex << std::hex << hash;

  json checkpoint_json = ppgl::to_json(result.params);
  checkpoint_json["train_config"] = train_config;
  checkpoint_json["train_config_hash"] = hash_hex.str();
  {
    std::ofstream out(checkpoint);
    if (!out) throw std::runtime_error("cannot open " + checkpoint);
    out << checkpoint_json.dump(2) << '\n';
  }
  ppgl::save_learning_curve(result.curve, curve);

  json summary{{"iterations", result.curve.size()},
               {"checkpoint", checkpoint},
               {"learning_curve", curve}};
  if (!result.curve.empty()) {
    summary["final_mean_return"] = result.curve.back().mean_return;
    summary["final_mean_length"] = result.curve.back().mean_length;
    summary["final_malformed_rate"] = result.curve.back().malformed_rate;
  }
  std::cout << summary.dump(2) << '\n';
  std::cerr << "trained " << result.curve.size() << " iterations on " << corpus.size()
            << " cases\n";
  return 0;
}

int run_score_case(const std::string& case_path, const std::string& rubric_path) {
  const ppgl::GappRubric rubric =
      rubric_path.empty() ? ppgl::default_rubric() : ppgl::load_rubric(rubric_path);
  const ppgl::CaseRecord rec = ppgl::case_from_json(read_json_file(case_path));
  const ppgl::GappScore score = ppgl::score_components(rec.truth, rubric);
  json out = ppgl::to_json(score);
  out["case_id"] = rec.case_id;
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_normalize(const std::string& input_png, const std::string& stats_path, double epsilon,
                  double threshold, const std::string& out_png) {
  const ppgl::RasterImage image = ppgl::read_png(input_png);
  const ppgl::StainStats target = ppgl::stain_stats_from_json(read_json_file(stats_path));
  const ppgl::RasterImage result = ppgl::normalize(image, target, epsilon, threshold);
  ppgl::write_png(result, out_png);

  const auto mask = ppgl::tissue_mask(ppgl::rgb_to_lab(image), threshold);
  json out{{"out", out_png}, {"width", result.width}, {"height", result.height}};
  out["tissue_pixels"] = mask.tissue_count();
  out["output_tissue_stats"] =
      ppgl::to_json(ppgl::compute_stain_stats(ppgl::rgb_to_lab(result), mask));
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_adapt_bn(const std::string& state_path, const std::string& features_path, double alpha) {
  ppgl::BnLayerState state = ppgl::load_bn_state(state_path);
  if (alpha >= 0.0) state.momentum_alpha = alpha;
  const json fj = read_json_file(features_path);
  ppgl::BnLayerState result;
  if (fj.is_array()) {
    std::vector<ppgl::FeatureMap> samples;
    for (const json& item : fj) samples.push_back(ppgl::feature_map_from_json(item));
    result = ppgl::adapt_sequence(state, samples);
  } else {
    result = ppgl::adabn_update(state, ppgl::feature_map_from_json(fj));
  }
  std::cout << ppgl::to_json(result).dump(2) << '\n';
  return 0;
}

int run_kg_query(const std::string& graph_path, const std::string& entity) {
  const ppgl::KnowledgeGraph graph =
      graph_path.empty() ? ppgl::default_graph() : ppgl::load_graph(graph_path);
  const ppgl::RetrievalResult result = graph.retrieve(entity);
  json out{{"query", entity}, {"found", result.found}};
  if (result.found) {
    out["node"] = ppgl::to_json(result.node);
    json ancestors = json::array();
    for (const auto& node : result.ancestors) ancestors.push_back(node.entity);
    out["ancestors"] = ancestors;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_evaluate(const std::string& checkpoint_path, const std::string& corpus_path,
                 const std::string& mode_name, std::uint64_t seed,
                 const PipelineOptions& options) {
  const Pipeline p = load_pipeline(options);
  const auto orch = make_orchestrator(p);
  const auto corpus = ppgl::load_corpus(corpus_path);
  const ppgl::PolicyParams params = ppgl::load_policy(checkpoint_path);
  const ppgl::RunMode mode = mode_name == "greedy" ? ppgl::RunMode::Greedy : ppgl::RunMode::Sample;
  const ppgl::EvalMetrics metrics = orch.evaluate(params, corpus, mode, seed);
  std::cout << ppgl::to_json(metrics).dump(2) << '\n';
  std::cerr << "evaluated " << corpus.size() << " cases in " << mode_name << " mode\n";
  return 0;
}

int run_report_case(const std::string& checkpoint_path, const std::string& case_path,
                    const std::string& mode_name, std::uint64_t seed,
                    const std::string& audit_path, const PipelineOptions& options) {
  const Pipeline p = load_pipeline(options);
  const auto orch = make_orchestrator(p);
  const ppgl::CaseRecord rec = ppgl::case_from_json(read_json_file(case_path));
  const ppgl::PolicyParams params = ppgl::load_policy(checkpoint_path);
  const ppgl::RunMode mode = mode_name == "greedy" ? ppgl::RunMode::Greedy : ppgl::RunMode::Sample;
  const auto [report, trace] = orch.run_case(params, rec, mode, seed);
  if (!audit_path.empty()) {
    ppgl::AuditLog log;
    for (auto& record : ppgl::audit_records_from_trace("ppgl-cli", trace))
      log.append(std::move(record));
    log.save(audit_path);
    std::cerr << "audit log written to " << audit_path << '\n';
  }
  std::cout << ppgl::to_json(report).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPGL swarm diagnostic pipeline"};
  app.require_subcommand(1);

  int gen_n = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_config, gen_out;
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic case corpus");
  gen->add_option("--n", gen_n, "Number of cases")->required();
  gen->add_option("--seed", gen_seed, "Master seed")->required();
  gen->add_option("--config", gen_config, "Generator config JSON");
  gen->add_option("--out", gen_out, "Output corpus path (line-delimited JSON)")->required();

  std::string train_corpus, train_out, train_config;
  int train_iters = 300;
  std::uint64_t train_seed = 0;
  auto* tr = app.add_subcommand("train", "Train the dispatcher policy");
  tr->add_option("--corpus", train_corpus, "Corpus path")->required();
  tr->add_option("--iters", train_iters, "Training iterations");
  tr->add_option("--seed", train_seed, "Training seed")->required();
  tr->add_option("--out", train_out, "Output directory")->required();
  tr->add_option("--config", train_config, "Pipeline config JSON");

  std::string score_case_file, score_rubric;
  auto* sc = app.add_subcommand("score-case", "GAPP-score one case file");
  sc->add_option("--case-file", score_case_file, "Single CaseRecord JSON file")->required();
  sc->add_option("--rubric", score_rubric, "Rubric JSON (default: built-in)");

  std::string norm_in, norm_stats, norm_out;
  double norm_epsilon = ppgl::kDefaultStainEpsilon;
  double norm_threshold = ppgl::kDefaultTissueLuminanceThreshold;
  auto* nm = app.add_subcommand("normalize", "Stain-normalize a PNG to target LAB statistics");
  nm->add_option("--input-png", norm_in, "Input PNG")->required();
  nm->add_option("--target-stats", norm_stats, "Target StainStats JSON")->required();
  nm->add_option("--epsilon", norm_epsilon, "Degeneracy guard epsilon");
  nm->add_option("--threshold", norm_threshold, "Tissue luminance threshold");
  nm->add_option("--out-png", norm_out, "Output PNG")->required();

  std::string bn_state, bn_features;
  double bn_alpha = -1.0;
  auto* bn = app.add_subcommand("adapt-bn", "Update BN running statistics from activations");
  bn->add_option("--state", bn_state, "BN state JSON")->required();
  bn->add_option("--features", bn_features, "Feature map JSON (object or array)")->required();
  bn->add_option("--alpha", bn_alpha, "Momentum override in [0,1]");

  std::string kg_graph, kg_entity;
  auto* kg = app.add_subcommand("kg-query", "Retrieve a knowledge-graph node");
  kg->add_option("--graph", kg_graph, "Graph JSON (default: built-in)");
  kg->add_option("--entity", kg_entity, "Entity name")->required();

  std::string eval_checkpoint, eval_corpus, eval_mode = "greedy", eval_config, eval_rubric;
  std::uint64_t eval_seed = 0;
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a corpus");
  ev->add_option("--checkpoint", eval_checkpoint, "Policy checkpoint JSON")->required();
  ev->add_option("--corpus", eval_corpus, "Corpus path")->required();
  ev->add_option("--mode", eval_mode, "greedy or sample")
      ->check(CLI::IsMember({"greedy", "sample"}));
  ev->add_option("--seed", eval_seed, "Evaluation seed");
  ev->add_option("--config", eval_config, "Pipeline config JSON");
  ev->add_option("--rubric", eval_rubric, "Rubric JSON (default: built-in)");

  std::string rep_checkpoint, rep_case, rep_mode = "greedy", rep_config, rep_audit;
  std::uint64_t rep_seed = 0;
  auto* rp = app.add_subcommand("report-case", "Run one case and print the diagnostic report");
  rp->add_option("--checkpoint", rep_checkpoint, "Policy checkpoint JSON")->required();
  rp->add_option("--case-file", rep_case, "Single CaseRecord JSON file")->required();
  rp->add_option("--mode", rep_mode, "greedy or sample")->check(CLI::IsMember({"greedy", "sample"}));
  rp->add_option("--seed", rep_seed, "Rollout seed");
  rp->add_option("--config", rep_config, "Pipeline config JSON");
  rp->add_option("--audit-out", rep_audit, "Write the episode audit log here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen_corpus(gen_n, gen_seed, gen_config, gen_out);
    if (tr->parsed())
      return run_train(train_corpus, train_iters, train_seed, train_out,
                       PipelineOptions{train_config, "", ""});
    if (sc->parsed()) return run_score_case(score_case_file, score_rubric);
    if (nm->parsed())
      return run_normalize(norm_in, norm_stats, norm_epsilon, norm_threshold, norm_out);
    if (bn->parsed()) return run_adapt_bn(bn_state, bn_features, bn_alpha);
    if (kg->parsed()) return run_kg_query(kg_graph, kg_entity);
    if (ev->parsed())
      return run_evaluate(eval_checkpoint, eval_corpus, eval_mode, eval_seed,
                          PipelineOptions{eval_config, eval_rubric, ""});
    if (rp->parsed())
      return run_report_case(rep_checkpoint, rep_case, rep_mode, rep_seed, rep_audit,
                             PipelineOptions{rep_config, "", ""});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
