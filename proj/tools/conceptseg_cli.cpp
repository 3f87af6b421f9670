#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "conceptseg/checkpoint.hpp"
#include "conceptseg/config.hpp"
#include "conceptseg/dataset_io.hpp"
#include "conceptseg/eval.hpp"
#include "conceptseg/report.hpp"
#include "conceptseg/response.hpp"

namespace cs = conceptseg;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string fixtures_dir() { return std::string(CONCEPTSEG_REPO_DIR) + "/fixtures"; }

struct TraceWriter {
  std::ofstream out;

  explicit TraceWriter(const std::string& path) {
    if (path.empty()) return;
    out.open(path, std::ios::binary | std::ios::trunc);
    if (!out) throw cs::IoError("cannot open trace " + path);
  }
  void line(const ordered_json& j) {
    if (out.is_open()) out << j.dump() << "\n";
  }
};

std::vector<cs::PreparedEpisode> load_or_generate(const cs::RunConfig& cfg,
                                                  std::uint64_t seed_offset, int count) {
  std::vector<cs::Episode> episodes;
  if (!cfg.dataset_dir.empty() && seed_offset == 0)
    episodes = cs::load_dataset(cfg.dataset_dir);
  else
    episodes = cs::generate_dataset(cfg, seed_offset, count);
  return cs::prepare_all(std::move(episodes));
}

int cmd_gen(const cs::RunConfig& cfg, const std::string& out_dir) {
  if (out_dir.empty()) throw cs::ConfigError("gen: --out directory is required");
  std::vector<cs::Episode> episodes = cs::generate_dataset(cfg, 0, cfg.episodes);
  cs::write_dataset(episodes, out_dir, cfg);
  std::map<std::string, int> counts;
  for (const cs::Episode& e : episodes) ++counts[cs::family_name(e.rule.family)];
  std::cout << "wrote " << episodes.size() << " episodes to " << out_dir << "\n";
  for (const auto& [name, n] : counts) std::cout << "  " << name << ": " << n << "\n";
  return 0;
}

int cmd_train(cs::RunConfig cfg, int stage) {
  if (cfg.checkpoint_path.empty()) throw cs::ConfigError("train: --checkpoint is required");
  const cs::TrainConfig tcfg = cs::train_config(cfg);
  std::vector<cs::PreparedEpisode> train = load_or_generate(cfg, 0, cfg.episodes);
  std::vector<cs::PreparedEpisode> holdout =
      cs::prepare_all(cs::generate_dataset(cfg, 0x40000000ULL, cfg.holdout_episodes));

  TraceWriter trace(cfg.trace_path);
  ordered_json header;
  header["event"] = "start";
  header["stage"] = stage;
  header["seed"] = cfg.seed;
  header["episodes"] = train.size();
  header["template"] = cs::load_prompt_template(fixtures_dir());
  trace.line(header);

  if (stage == 1) {
    cs::ParamStore params = cs::init_params(tcfg.model, cfg.seed);
    std::vector<const cs::PreparedEpisode*> batch;
    for (int step = 0; step < cfg.stage1_steps; ++step) {
      batch.clear();
      for (int j = 0; j < cfg.stage1_batch; ++j)
        batch.push_back(&train[static_cast<std::size_t>(
            (static_cast<long>(step) * cfg.stage1_batch + j) % static_cast<long>(train.size()))]);
      const double loss = cs::stage1_step(params, batch, tcfg);
      if (!std::isfinite(loss))
        throw cs::NumericalError("stage 1 loss is not finite at step " + std::to_string(step));
      if (step % 50 == 0 || step + 1 == cfg.stage1_steps) {
        ordered_json j;
        j["event"] = "stage1";
        j["step"] = step;
        j["seg_loss"] = loss;
        trace.line(j);
      }
    }
    cs::save_checkpoint(params, cfg.checkpoint_path);
    ordered_json summary;
    summary["event"] = "summary";
    summary["stage"] = 1;
    summary["train_mask_iou"] = cs::stage1_mask_iou(params, train, tcfg);
    summary["holdout_mask_iou"] = cs::stage1_mask_iou(params, holdout, tcfg);
    trace.line(summary);
    std::cout << "stage 1 done: train IoU " << summary["train_mask_iou"] << ", holdout IoU "
              << summary["holdout_mask_iou"] << "\n";
    return 0;
  }

  // Stage 2 resumes from the stage-1 checkpoint.
  if (cfg.init_checkpoint.empty())
    throw cs::ConfigError("train --stage 2 requires --init with a stage-1 checkpoint");
  cs::ParamStore params = cs::load_checkpoint(cfg.init_checkpoint);
  cs::check_compatible(params, cs::init_params(tcfg.model, cfg.seed));
  const cs::ParamStore ref_params = params;  // frozen reference snapshot

  for (int step = 0; step < cfg.stage2_steps; ++step) {
    const cs::PreparedEpisode& ep = train[static_cast<std::size_t>(step) % train.size()];
    const cs::Stage2Stats s = cs::stage2_step(params, ref_params, ep, tcfg, step);
    if (step % 100 == 0 || step + 1 == cfg.stage2_steps) {
      ordered_json j;
      j["event"] = "stage2";
      j["step"] = step;
      j["policy_term"] = s.policy_term;
      j["kl"] = s.kl_term;
      j["seg"] = s.seg_term;
      j["r_format"] = s.mean_r_format;
      j["r_mask"] = s.mean_r_mask;
      j["r_meta"] = s.mean_r_meta;
      j["r_uni"] = s.mean_r_uni;
      j["adv_std"] = s.adv_std;
      trace.line(j);
    }
  }
  cs::save_checkpoint(params, cfg.checkpoint_path);
  ordered_json summary;
  summary["event"] = "summary";
  summary["stage"] = 2;
  summary["train_accuracy"] = cs::selection_accuracy(params, train);
  summary["holdout_accuracy"] = cs::selection_accuracy(params, holdout);
  summary["meta_reward_active"] = cfg.reward_meta;
  trace.line(summary);
  std::cout << "stage 2 done: train acc " << summary["train_accuracy"] << ", holdout acc "
            << summary["holdout_accuracy"] << "\n";
  return 0;
}

int cmd_eval(const cs::RunConfig& cfg) {
  if (cfg.checkpoint_path.empty()) throw cs::ConfigError("eval: --checkpoint is required");
  if (cfg.report_prefix.empty()) throw cs::ConfigError("eval: --report prefix is required");
  const cs::TrainConfig tcfg = cs::train_config(cfg);
  cs::ParamStore params = cs::load_checkpoint(cfg.checkpoint_path);
  cs::check_compatible(params, cs::init_params(tcfg.model, cfg.seed));

  std::vector<cs::PreparedEpisode> episodes =
      load_or_generate(cfg, 0x60000000ULL, cfg.holdout_episodes);

  std::map<cs::RouterMode, cs::EvalReport> modes;
  for (cs::RouterMode m :
       {cs::RouterMode::Direct, cs::RouterMode::Reason, cs::RouterMode::Adaptive})
    modes[m] = cs::evaluate(params, episodes, m, tcfg);

  const ordered_json report = cs::report_to_json(cfg, modes);
  cs::check_report_schema(report, cs::load_json_file(fixtures_dir() + "/report_schema.json"));
  cs::write_text_file(cfg.report_prefix + ".json", report.dump(2) + "\n");
  cs::write_text_file(cfg.report_prefix + ".csv", cs::report_to_csv(modes));
  std::cout << "report written to " << cfg.report_prefix << ".{json,csv}\n";

  const cs::EvalReport& headline = modes.at(cs::router_mode_from_name(cfg.router_mode));
  std::cout << "mode " << cfg.router_mode << ": mIoU "
            << headline.overall.miou * 100.0 << "%, routing rate "
            << headline.routing_rate * 100.0 << "%\n";
  return 0;
}

// One full train+eval pass for a sweep setting.
cs::EvalReport run_setting(cs::RunConfig cfg) {
  const cs::TrainConfig tcfg = cs::train_config(cfg);
  std::vector<cs::PreparedEpisode> train = load_or_generate(cfg, 0, cfg.episodes);
  std::vector<cs::PreparedEpisode> holdout =
      cs::prepare_all(cs::generate_dataset(cfg, 0x60000000ULL, cfg.holdout_episodes));

  cs::ParamStore params = cs::init_params(tcfg.model, cfg.seed);
  std::vector<const cs::PreparedEpisode*> batch;
  for (int step = 0; step < cfg.stage1_steps; ++step) {
    batch.clear();
    for (int j = 0; j < cfg.stage1_batch; ++j)
      batch.push_back(&train[static_cast<std::size_t>(
          (static_cast<long>(step) * cfg.stage1_batch + j) % static_cast<long>(train.size()))]);
    cs::stage1_step(params, batch, tcfg);
  }
  const cs::ParamStore ref_params = params;
  for (int step = 0; step < cfg.stage2_steps; ++step)
    cs::stage2_step(params, ref_params, train[static_cast<std::size_t>(step) % train.size()],
                    tcfg, step);
  return cs::evaluate(params, holdout, cs::router_mode_from_name(cfg.router_mode), tcfg);
}

int cmd_sweep(const cs::RunConfig& base, const std::string& axis, const std::string& out_dir) {
  if (out_dir.empty()) throw cs::ConfigError("sweep: --out directory is required");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw cs::IoError("sweep: cannot create " + out_dir);

  struct Row {
    std::string key;
    cs::EvalReport report;
  };
  std::vector<Row> rows;

  if (axis == "l2") {
    for (int l2 : cs::parse_int_list(base.sweep_l2)) {
      cs::RunConfig cfg = base;
      cfg.l2 = l2;
      cs::validate(cfg);
      rows.push_back(Row{"l2=" + std::to_string(l2), run_setting(cfg)});
    }
  } else if (axis == "k") {
    for (int k : cs::parse_int_list(base.sweep_k)) {
      cs::RunConfig cfg = base;
      cfg.k = k;
      cs::validate(cfg);
      rows.push_back(Row{"k=" + std::to_string(k), run_setting(cfg)});
    }
  } else if (axis == "rewards") {
    const std::vector<std::pair<std::string, std::pair<bool, bool>>> presets = {
        {"wo_box_meta", {true, false}},  // mask on, meta off
        {"wo_mask", {false, true}},
        {"all_reward", {true, true}},
    };
    for (const auto& [name, flags] : presets) {
      cs::RunConfig cfg = base;
      cfg.reward_mask = flags.first;
      cfg.reward_meta = flags.second;
      cs::validate(cfg);
      rows.push_back(Row{name, run_setting(cfg)});
    }
  } else {
    throw cs::ConfigError("sweep axis '" + axis + "' invalid; allowed values: l2, k, rewards");
  }

  std::ostringstream csv;
  csv << "setting,n,routing_rate,target_accuracy,MAE,BER,Fbw,Sm,mIoU,mDice,gIoU,cIoU\n";
  char line[512];
  for (const Row& r : rows) {
    const cs::DatasetMetrics& m = r.report.overall;
    std::snprintf(line, sizeof(line),
                  "%s,%ld,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f\n", r.key.c_str(),
                  r.report.n, r.report.routing_rate * 100.0, r.report.target_accuracy * 100.0,
                  m.mae * 100.0, m.ber * 100.0, m.wfm * 100.0, m.sm * 100.0, m.miou * 100.0,
                  m.mdice * 100.0, m.giou * 100.0, m.ciou * 100.0);
    csv << line;
  }
  cs::write_text_file(out_dir + "/sweep_" + axis + ".csv", csv.str());
  std::cout << "sweep written to " << out_dir << "/sweep_" << axis << ".csv\n";
  std::cout << csv.str();
  return 0;
}

void add_config_options(CLI::App& app, cs::RunConfig& cfg) {
  app.set_config("--config")->envname("CSR1_CONFIG");
  app.add_option("--seed", cfg.seed)->envname("CSR1_SEED");
  app.add_option("--k", cfg.k)->envname("CSR1_K");
  app.add_option("--l2", cfg.l2)->envname("CSR1_L2");
  app.add_option("--channels", cfg.channels)->envname("CSR1_CHANNELS");
  app.add_option("--pool-hidden", cfg.pool_hidden)->envname("CSR1_POOL_HIDDEN");
  app.add_option("--group-size", cfg.group_size)->envname("CSR1_GROUP_SIZE");
  app.add_option("--beta", cfg.beta)->envname("CSR1_BETA");
  app.add_option("--theta", cfg.theta)->envname("CSR1_THETA");
  app.add_option("--objects-per-scene", cfg.objects_per_scene)->envname("CSR1_OBJECTS");
  app.add_option("--episodes", cfg.episodes)->envname("CSR1_EPISODES");
  app.add_option("--holdout-episodes", cfg.holdout_episodes)->envname("CSR1_HOLDOUT");
  app.add_option("--families", cfg.families)->envname("CSR1_FAMILIES");
  app.add_option("--stage1-steps", cfg.stage1_steps)->envname("CSR1_STAGE1_STEPS");
  app.add_option("--stage1-lr", cfg.stage1_lr)->envname("CSR1_STAGE1_LR");
  app.add_option("--stage1-batch", cfg.stage1_batch)->envname("CSR1_STAGE1_BATCH");
  app.add_option("--stage2-steps", cfg.stage2_steps)->envname("CSR1_STAGE2_STEPS");
  app.add_option("--stage2-lr", cfg.stage2_lr)->envname("CSR1_STAGE2_LR");
  app.add_flag("--reward-format,!--no-reward-format", cfg.reward_format);
  app.add_flag("--reward-mask,!--no-reward-mask", cfg.reward_mask);
  app.add_flag("--reward-meta,!--no-reward-meta", cfg.reward_meta);
  app.add_flag("--seg-all,!--seg-best", cfg.seg_all_trajectories);
  app.add_flag("--reshuffle-per-epoch", cfg.reshuffle_per_epoch);
  app.add_option("--router-mode", cfg.router_mode)->envname("CSR1_ROUTER_MODE");
  app.add_option("--dataset", cfg.dataset_dir)->envname("CSR1_DATASET");
  app.add_option("--checkpoint", cfg.checkpoint_path)->envname("CSR1_CHECKPOINT");
  app.add_option("--init", cfg.init_checkpoint)->envname("CSR1_INIT");
  app.add_option("--report", cfg.report_prefix)->envname("CSR1_REPORT");
  app.add_option("--trace", cfg.trace_path)->envname("CSR1_TRACE");
  app.add_option("--sweep-l2", cfg.sweep_l2);
  app.add_option("--sweep-k", cfg.sweep_k);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic concept-segmentation loop: generation, two-stage training, "
               "routed evaluation and ablation sweeps"};
  app.require_subcommand(1);

  cs::RunConfig cfg;
  add_config_options(app, cfg);

  std::string out_dir, axis;
  int stage = 1;
  CLI::App* gen = app.add_subcommand("gen", "generate a dataset");
  gen->add_option("--out", out_dir, "output directory")->required();
  CLI::App* train = app.add_subcommand("train", "run a training stage");
  train->add_option("--stage", stage, "1 or 2")->required();
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint with routing");
  (void)eval_cmd;
  CLI::App* sweep = app.add_subcommand("sweep", "train/eval across one axis");
  sweep->add_option("--axis", axis, "l2 | k | rewards")->required();
  sweep->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    cs::validate(cfg);
    if (gen->parsed()) return cmd_gen(cfg, out_dir);
    if (train->parsed()) {
      if (stage != 1 && stage != 2)
        throw cs::ConfigError("stage = " + std::to_string(stage) + " invalid; allowed: 1, 2");
      return cmd_train(cfg, stage);
    }
    if (eval_cmd->parsed()) return cmd_eval(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg, axis, out_dir);
  } catch (const cs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cs::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const cs::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
