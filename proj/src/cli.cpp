#include "tcanet/cli.hpp"

#include "tcanet/train.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace tcanet::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

json section(const json& cfg, const char* key) {
  if (!cfg.contains(key)) return json::object();
  const auto& s = cfg.at(key);
  if (!s.is_object()) throw FormatError(std::string("config section '") + key + "' must be an object");
  return s;
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

seqio::SynthConfig synth_config_from_json(const json& j) {
  seqio::SynthConfig c;
  read_if(j, "num_videos", c.num_videos);
  read_if(j, "length", c.length);
  read_if(j, "channels", c.channels);
  read_if(j, "min_actions", c.min_actions);
  read_if(j, "max_actions", c.max_actions);
  read_if(j, "jitter_scale", c.jitter_scale);
  read_if(j, "seed", c.seed);
  read_if(j, "candidates_per_action", c.candidates_per_action);
  read_if(j, "num_classes", c.num_classes);
  read_if(j, "min_action_len", c.min_action_len);
  read_if(j, "max_action_len", c.max_action_len);
  read_if(j, "signal", c.signal);
  read_if(j, "noise_std", c.noise_std);
  read_if(j, "score_noise", c.score_noise);
  read_if(j, "snippet_interval", c.snippet_interval);
  read_if(j, "fps", c.fps);
  return c;
}

json synth_config_to_json(const seqio::SynthConfig& c) {
  return {{"num_videos", c.num_videos},       {"length", c.length},
          {"channels", c.channels},           {"min_actions", c.min_actions},
          {"max_actions", c.max_actions},     {"jitter_scale", c.jitter_scale},
          {"seed", c.seed},                   {"candidates_per_action", c.candidates_per_action},
          {"num_classes", c.num_classes},     {"min_action_len", c.min_action_len},
          {"max_action_len", c.max_action_len}, {"signal", c.signal},
          {"noise_std", c.noise_std},         {"score_noise", c.score_noise},
          {"snippet_interval", c.snippet_interval}, {"fps", c.fps}};
}

evalkit::EvalOptions eval_options_from_json(const json& j) {
  evalkit::EvalOptions o;
  read_if(j, "ar_thresholds", o.ar_thresholds);
  read_if(j, "map_thresholds", o.map_thresholds);
  read_if(j, "max_an", o.max_an);
  if (o.max_an < 1) throw ArgumentError("eval: max_an must be >= 1");
  return o;
}

json eval_options_to_json(const evalkit::EvalOptions& o) {
  return {{"ar_thresholds", o.ar_thresholds}, {"map_thresholds", o.map_thresholds}, {"max_an", o.max_an}};
}

namespace {

RefineSettings refine_settings_from_json(const json& j) {
  RefineSettings s;
  read_if(j, "stages", s.stages);
  read_if(j, "tau", s.tau);
  read_if(j, "soft_nms", s.soft_nms);
  if (j.contains("nms")) {
    const auto& n = j.at("nms");
    read_if(n, "sigma", s.nms.sigma);
    read_if(n, "score_floor", s.nms.score_floor);
    read_if(n, "top_k", s.nms.top_k);
  }
  return s;
}

json refine_settings_to_json(const RefineSettings& s) {
  return {{"stages", s.stages},
          {"tau", s.tau},
          {"soft_nms", s.soft_nms},
          {"nms", {{"sigma", s.nms.sigma}, {"score_floor", s.nms.score_floor}, {"top_k", s.nms.top_k}}}};
}

struct GradCheckSettings {
  std::size_t length = 16;
  std::size_t videos = 1;
  int samples_per_kind = 1;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::size_t max_per_tensor = 0;
};

GradCheckSettings gradcheck_settings_from_json(const json& j) {
  GradCheckSettings g;
  read_if(j, "length", g.length);
  read_if(j, "videos", g.videos);
  read_if(j, "samples_per_kind", g.samples_per_kind);
  read_if(j, "epsilon", g.epsilon);
  read_if(j, "tolerance", g.tolerance);
  read_if(j, "max_per_tensor", g.max_per_tensor);
  return g;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void finish(const std::string& command, const json& resolved, std::uint64_t seed, const fs::path& anchor,
            std::vector<std::string> artifacts, const Stopwatch& clock) {
  RunManifest m;
  m.command = command;
  m.config_digest = config_digest(resolved);
  m.seed = seed;
  m.artifact_paths = std::move(artifacts);
  m.wall_time = clock.seconds();
  write_text(manifest_path(anchor), manifest_to_json(m).dump(2) + "\n");
}

std::uint64_t config_seed(const json& cfg) { return cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0; }

}  // namespace

json manifest_to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config_digest", m.config_digest},
          {"seed", m.seed},
          {"artifact_paths", m.artifact_paths},
          {"wall_time", m.wall_time}};
}

fs::path manifest_path(const fs::path& out) {
  fs::path p = out;
  if (!p.has_filename()) p = p.parent_path();  // "dir/" names the directory itself
  p += ".manifest.json";
  return p;
}

std::string config_digest(const json& resolved) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : resolved.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json proposals_to_json(const std::vector<VideoProposalList>& videos) {
  auto arr = json::array();
  for (const auto& v : videos) {
    auto props = seqio::candidates_to_json(v.proposals);
    for (std::size_t i = 0; i < v.class_ids.size(); ++i) props[i]["class_id"] = v.class_ids[i];
    arr.push_back({{"video_id", v.video_id}, {"proposals", std::move(props)}});
  }
  return {{"videos", std::move(arr)}};
}

std::vector<VideoProposalList> proposals_from_json(const json& j) {
  if (!j.is_object() || !j.contains("videos") || !j.at("videos").is_array()) {
    throw FormatError("proposals: expected an object with a 'videos' array");
  }
  std::vector<VideoProposalList> out;
  for (const auto& v : j.at("videos")) {
    if (!v.is_object() || !v.contains("video_id") || !v.contains("proposals")) {
      throw FormatError("proposals: each video needs video_id and proposals");
    }
    VideoProposalList item;
    item.video_id = v.at("video_id").get<std::string>();
    item.proposals = seqio::candidates_from_json(v.at("proposals"));
    std::size_t classed = 0;
    for (const auto& p : v.at("proposals")) {
      if (p.contains("class_id")) {
        item.class_ids.push_back(p.at("class_id").get<int>());
        ++classed;
      }
    }
    if (classed != 0 && classed != item.proposals.size()) {
      throw FormatError("proposals: class_id must be given for all or none of a video's proposals");
    }
    out.push_back(std::move(item));
  }
  return out;
}

Model apply_refine_settings(Model model, const RefineSettings& s) {
  const auto available = static_cast<int>(model.stages.size());
  if (s.stages != 0) {
    if (s.stages < 1 || s.stages > available) {
      throw ArgumentError("--stages must be in [1, " + std::to_string(available) + "]");
    }
    model.stages.resize(static_cast<std::size_t>(s.stages));
    model.config.num_stages = s.stages;
  }
  if (s.tau >= 0.0) {
    if (s.tau > 1.0) throw ArgumentError("--tau must be in [0, 1]");
    model.config.tbr.tau = s.tau;
    for (auto& st : model.stages) st.tau = s.tau;
  }
  return model;
}

std::vector<VideoProposalList> refine_dataset(const Model& model, const std::vector<seqio::Video>& videos,
                                              const RefineSettings& s) {
  RefineOptions opts;
  opts.apply_soft_nms = s.soft_nms;
  opts.nms = s.nms;
  std::vector<VideoProposalList> out;
  out.reserve(videos.size());
  for (const auto& v : videos) {
    auto r = refine_video(model, v.features, v.annotation.candidates, opts);
    out.push_back({v.annotation.video_id, std::move(r.proposals), {}});
  }
  return out;
}

evalkit::EvalReport evaluate_proposals(const std::vector<seqio::Video>& videos,
                                       const std::vector<VideoProposalList>& proposals,
                                       const evalkit::EvalOptions& opts) {
  std::map<std::string, const VideoProposalList*> by_id;
  bool classed = false;
  for (const auto& p : proposals) {
    if (!by_id.emplace(p.video_id, &p).second) throw DataError("proposals: duplicate video_id " + p.video_id);
    classed = classed || !p.class_ids.empty();
  }
  std::vector<evalkit::VideoDetections> dets;
  dets.reserve(videos.size());
  for (const auto& v : videos) {
    evalkit::VideoDetections d;
    d.video_id = v.annotation.video_id;
    for (const auto& g : v.annotation.ground_truths) d.ground_truths.push_back({g.start, g.end, classed ? g.class_id : 0});
    if (const auto it = by_id.find(d.video_id); it != by_id.end()) {
      const auto& list = *it->second;
      for (std::size_t i = 0; i < list.proposals.size(); ++i) {
        const auto& p = list.proposals[i];
        const int cls = list.class_ids.empty() ? (classed ? -1 : 0) : list.class_ids[i];
        d.detections.push_back({p.start, p.end, cls, p.score});
      }
      by_id.erase(it);
    }
    dets.push_back(std::move(d));
  }
  if (!by_id.empty()) throw DataError("proposals: unknown video_id " + by_id.begin()->first);
  return evalkit::evaluate(dets, opts);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal context aggregation: synthesize, train, refine, evaluate"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_file;
  std::optional<std::uint64_t> seed_flag;

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  std::string synth_out;
  std::optional<std::size_t> synth_videos, synth_t, synth_c;
  std::optional<double> synth_jitter;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--videos", synth_videos, "Number of videos");
  synth->add_option("--t", synth_t, "Snippets per video");
  synth->add_option("--c", synth_c, "Feature channels");
  synth->add_option("--jitter", synth_jitter, "Candidate boundary jitter (fraction of action length)");
  synth->add_option("--seed", seed_flag, "Seed");
  synth->add_option("--config", config_file, "JSON config")->check(CLI::ExistingFile);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train encoder and refinement stages");
  std::string data_dir, train_out;
  std::optional<int> train_epochs;
  std::optional<double> train_lr;
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--config", config_file, "JSON config")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", train_epochs, "Epoch count");
  train_cmd->add_option("--lr", train_lr, "Learning rate");
  train_cmd->add_option("--seed", seed_flag, "Seed");

  // refine / pipeline share most flags
  std::string ckpt_path, refine_out, proposals_path, eval_out, ar_csv_path, map_csv_path, proposals_out;
  std::optional<int> stages_flag;
  std::optional<double> tau_flag;
  bool soft_nms_flag = false;
  auto add_refine_flags = [&](CLI::App* cmd) {
    cmd->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--stages", stages_flag, "Use only the first K stages");
    cmd->add_option("--tau", tau_flag, "Frame/segment fusion weight");
    cmd->add_flag("--soft-nms", soft_nms_flag, "Apply Soft-NMS to the refined proposals");
    cmd->add_option("--config", config_file, "JSON config")->check(CLI::ExistingFile);
  };
  auto* refine_cmd = app.add_subcommand("refine", "Refine each video's candidate proposals");
  add_refine_flags(refine_cmd);
  refine_cmd->add_option("--out", refine_out, "Proposals JSON")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Score proposals against ground truth");
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--proposals", proposals_path, "Proposals JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "Report JSON")->required();
  eval_cmd->add_option("--ar-csv", ar_csv_path, "AR-vs-AN table");
  eval_cmd->add_option("--map-csv", map_csv_path, "mAP-vs-threshold table");
  eval_cmd->add_option("--config", config_file, "JSON config")->check(CLI::ExistingFile);

  auto* pipeline_cmd = app.add_subcommand("pipeline", "refine followed by eval, in one process");
  add_refine_flags(pipeline_cmd);
  pipeline_cmd->add_option("--out", eval_out, "Report JSON")->required();
  pipeline_cmd->add_option("--proposals-out", proposals_out, "Also write the refined proposals");
  pipeline_cmd->add_option("--ar-csv", ar_csv_path, "AR-vs-AN table");
  pipeline_cmd->add_option("--map-csv", map_csv_path, "mAP-vs-threshold table");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the training gradient");
  std::optional<double> eps_flag, tol_flag;
  std::string gradcheck_out;
  gradcheck_cmd->add_option("--config", config_file, "JSON config")->required()->check(CLI::ExistingFile);
  gradcheck_cmd->add_option("--eps", eps_flag, "Central-difference step");
  gradcheck_cmd->add_option("--tol", tol_flag, "Maximum relative error");
  gradcheck_cmd->add_option("--seed", seed_flag, "Seed");
  gradcheck_cmd->add_option("--out", gradcheck_out, "Report JSON");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsage;
  }

  const Stopwatch clock;
  try {
    const json cfg = config_file.empty() ? json::object() : read_json(config_file);
    if (!cfg.is_object()) throw FormatError("config must be a JSON object");
    const std::uint64_t seed = seed_flag.value_or(config_seed(cfg));

    if (synth->parsed()) {
      auto sc = synth_config_from_json(section(cfg, "synth"));
      if (synth_videos) sc.num_videos = *synth_videos;
      if (synth_t) sc.length = *synth_t;
      if (synth_c) sc.channels = *synth_c;
      if (synth_jitter) sc.jitter_scale = *synth_jitter;
      sc.seed = seed;
      const auto videos = seqio::synth_dataset(sc);
      seqio::write_dataset(synth_out, videos);
      std::vector<std::string> artifacts;
      for (const auto& v : videos) {
        artifacts.push_back((fs::path(synth_out) / (v.annotation.video_id + ".tcaf")).string());
        artifacts.push_back((fs::path(synth_out) / (v.annotation.video_id + ".json")).string());
      }
      finish("synth", {{"synth", synth_config_to_json(sc)}}, seed, synth_out, artifacts, clock);
      out << "wrote " << videos.size() << " videos to " << synth_out << "\n";
      return kOk;
    }

    if (train_cmd->parsed()) {
      const auto videos = seqio::load_dataset(data_dir);
      if (videos.empty()) throw DataError("no videos in " + data_dir);
      auto mc = model_config_from_json(section(cfg, "model"));
      auto tc = train::train_config_from_json(section(cfg, "train"));
      if (train_epochs) tc.epochs = *train_epochs;
      if (train_lr) tc.learning_rate = *train_lr;
      tc.seed = seed;
      tc.validate();
      if (mc.channels != static_cast<int>(videos.front().features.channels())) {
        throw ArgumentError("model.channels (" + std::to_string(mc.channels) + ") differs from feature width (" +
                            std::to_string(videos.front().features.channels()) + ")");
      }
      auto result = train::train_model(videos, init_model(mc, seed), tc);
      save_checkpoint(train_out, result.model);
      const std::string history = train_out + ".history.csv";
      write_text(history, train::history_csv(result.history));
      finish("train", {{"model", model_config_to_json(mc)}, {"train", train::train_config_to_json(tc)}}, seed,
             train_out, {train_out, history}, clock);
      if (!result.history.empty()) out << "final mean loss " << result.history.back().mean_total << "\n";
      if (result.empty_kind_events > 0) out << "empty sample kinds: " << result.empty_kind_events << "\n";
      return kOk;
    }

    if (refine_cmd->parsed() || pipeline_cmd->parsed()) {
      auto rs = refine_settings_from_json(section(cfg, "refine"));
      if (stages_flag) rs.stages = *stages_flag;
      if (tau_flag) rs.tau = *tau_flag;
      if (soft_nms_flag) rs.soft_nms = true;
      const Model model = apply_refine_settings(load_checkpoint(ckpt_path), rs);
      const auto videos = seqio::load_dataset(data_dir);
      const auto refined = refine_dataset(model, videos, rs);
      json resolved = {{"refine", refine_settings_to_json(rs)}, {"model", model_config_to_json(model.config)}};
      std::vector<std::string> artifacts;

      if (refine_cmd->parsed()) {
        write_text(refine_out, proposals_to_json(refined).dump(2) + "\n");
        finish("refine", resolved, seed, refine_out, {refine_out}, clock);
        out << "refined " << videos.size() << " videos\n";
        return kOk;
      }
      const auto eo = eval_options_from_json(section(cfg, "eval"));
      resolved["eval"] = eval_options_to_json(eo);
      if (!proposals_out.empty()) {
        write_text(proposals_out, proposals_to_json(refined).dump(2) + "\n");
        artifacts.push_back(proposals_out);
      }
      // Round-trip through JSON so the report matches refine + eval exactly.
      const auto report = evaluate_proposals(videos, proposals_from_json(proposals_to_json(refined)), eo);
      write_text(eval_out, evalkit::report_to_json(report).dump(2) + "\n");
      artifacts.push_back(eval_out);
      if (!ar_csv_path.empty()) {
        write_text(ar_csv_path, evalkit::ar_csv(report));
        artifacts.push_back(ar_csv_path);
      }
      if (!map_csv_path.empty()) {
        write_text(map_csv_path, evalkit::map_csv(report));
        artifacts.push_back(map_csv_path);
      }
      finish("pipeline", resolved, seed, eval_out, artifacts, clock);
      out << "AUC " << report.auc << "\n";
      return kOk;
    }

    if (eval_cmd->parsed()) {
      const auto eo = eval_options_from_json(section(cfg, "eval"));
      const auto videos = seqio::load_dataset(data_dir);
      const auto report = evaluate_proposals(videos, proposals_from_json(read_json(proposals_path)), eo);
      write_text(eval_out, evalkit::report_to_json(report).dump(2) + "\n");
      std::vector<std::string> artifacts{eval_out};
      if (!ar_csv_path.empty()) {
        write_text(ar_csv_path, evalkit::ar_csv(report));
        artifacts.push_back(ar_csv_path);
      }
      if (!map_csv_path.empty()) {
        write_text(map_csv_path, evalkit::map_csv(report));
        artifacts.push_back(map_csv_path);
      }
      finish("eval", {{"eval", eval_options_to_json(eo)}}, seed, eval_out, artifacts, clock);
      out << "AUC " << report.auc << "\n";
      return kOk;
    }

    if (gradcheck_cmd->parsed()) {
      auto gs = gradcheck_settings_from_json(section(cfg, "gradcheck"));
      if (eps_flag) gs.epsilon = *eps_flag;
      if (tol_flag) gs.tolerance = *tol_flag;
      const auto mc = model_config_from_json(section(cfg, "model"));
      auto tc = train::train_config_from_json(section(cfg, "train"));
      tc.seed = seed;

      seqio::SynthConfig sc = synth_config_from_json(section(cfg, "synth"));
      sc.num_videos = gs.videos;
      sc.length = gs.length;
      sc.channels = static_cast<std::size_t>(mc.channels);
      sc.seed = seed;
      const auto videos = seqio::synth_dataset(sc);
      std::vector<train::TrainItem> batch;
      for (std::size_t i = 0; i < videos.size(); ++i) {
        auto pool = train::prepare_candidates(videos[i].annotation, tc);
        auto sampled = train::sample_balanced(pool, gs.samples_per_kind, substream_seed(seed, i));
        batch.push_back({&videos[i].features, videos[i].annotation.gt_intervals(), std::move(sampled.samples)});
      }
      const Model model = init_model(mc, seed);
      std::vector<Matrix> params;
      std::vector<std::string> names;
      for (const auto& [name, m] : model_tensors(model)) {
        params.push_back(*m);
        names.push_back(name);
      }
      const auto result =
          train::grad_check(train::pipeline_objective(model, batch, tc), params, gs.epsilon, names, gs.max_per_tensor);
      const bool ok = result.max_rel_error <= gs.tolerance;
      const json report = {{"max_rel_error", result.max_rel_error},
                           {"checked", result.checked},
                           {"worst_tensor", result.worst_tensor},
                           {"worst_index", result.worst_index},
                           {"worst_analytic", result.worst_analytic},
                           {"worst_numeric", result.worst_numeric},
                           {"epsilon", gs.epsilon},
                           {"tolerance", gs.tolerance},
                           {"passed", ok}};
      const json resolved = {{"model", model_config_to_json(mc)},
                             {"train", train::train_config_to_json(tc)},
                             {"gradcheck",
                              {{"length", gs.length},
                               {"videos", gs.videos},
                               {"samples_per_kind", gs.samples_per_kind},
                               {"epsilon", gs.epsilon},
                               {"tolerance", gs.tolerance},
                               {"max_per_tensor", gs.max_per_tensor}}}};
      std::vector<std::string> artifacts;
      fs::path anchor = fs::path(config_file).concat(".gradcheck");
      if (!gradcheck_out.empty()) {
        write_text(gradcheck_out, report.dump(2) + "\n");
        artifacts.push_back(gradcheck_out);
        anchor = gradcheck_out;
      }
      finish("gradcheck", resolved, seed, anchor, artifacts, clock);
      out << "max relative error " << result.max_rel_error << " over " << result.checked << " entries (worst "
          << result.worst_tensor << "[" << result.worst_index << "])\n";
      return ok ? kOk : kGradCheckFailed;
    }
  } catch (const ArgumentError& e) {
    err << "argument error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kFailure;
  } catch (const train::TrainingError& e) {
    err << "training error: " << e.what() << "\n";
    return kFailure;
  } catch (const json::exception& e) {
    err << "format error: " << e.what() << "\n";
    return kFailure;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace tcanet::cli
