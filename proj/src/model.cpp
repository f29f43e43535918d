#include "tcanet/model.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <map>
#include <random>

namespace tcanet {
namespace {

template <class T>
T enum_from(const nlohmann::json& j, const char* key, T fallback,
            std::initializer_list<std::pair<const char*, T>> names) {
  if (!j.contains(key)) return fallback;
  const auto text = j.at(key).get<std::string>();
  for (const auto& [name, value] : names) {
    if (text == name) return value;
  }
  throw ArgumentError(std::string("unknown value '") + text + "' for " + key);
}

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint: truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void ModelConfig::validate() const {
  if (channels < 1 || num_blocks < 0 || num_stages < 1 || head_hidden < 1 || ffn_hidden < 0) {
    throw ArgumentError("model: channels, stages and head width must be positive");
  }
  if (lgte.num_groups < 1 || channels % lgte.num_groups != 0) {
    throw ArgumentError("model: channels must be divisible by num_groups");
  }
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return {{"channels", cfg.channels},
          {"num_blocks", cfg.num_blocks},
          {"ffn_hidden", cfg.ffn_hidden},
          {"num_groups", cfg.lgte.num_groups},
          {"num_local_groups", cfg.lgte.num_local_groups},
          {"window_size", cfg.lgte.window_size},
          {"scale_mode", cfg.lgte.scale_mode == lgte::ScaleMode::group_dim ? "group_dim" : "full_dim"},
          {"residual_mode", cfg.lgte.residual_mode == lgte::ResidualMode::ln_skip ? "ln_skip" : "standard"},
          {"num_stages", cfg.num_stages},
          {"head_hidden", cfg.head_hidden},
          {"bins", cfg.tbr.bins},
          {"boundary_extent", cfg.tbr.boundary_extent},
          {"tau", cfg.tbr.tau},
          {"frame_kernel", cfg.tbr.frame_kernel},
          {"segment_kernel", cfg.tbr.segment_kernel},
          {"share_frame_head", cfg.tbr.share_frame_head},
          {"conf_mode", cfg.conf_mode == tbr::ConfMode::last ? "last" : "product"}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig cfg) {
  if (!j.is_object()) throw FormatError("model config must be a JSON object");
  read_if(j, "channels", cfg.channels);
  read_if(j, "num_blocks", cfg.num_blocks);
  read_if(j, "ffn_hidden", cfg.ffn_hidden);
  read_if(j, "num_groups", cfg.lgte.num_groups);
  read_if(j, "num_local_groups", cfg.lgte.num_local_groups);
  read_if(j, "window_size", cfg.lgte.window_size);
  cfg.lgte.scale_mode = enum_from(j, "scale_mode", cfg.lgte.scale_mode,
                                  {{"group_dim", lgte::ScaleMode::group_dim}, {"full_dim", lgte::ScaleMode::full_dim}});
  cfg.lgte.residual_mode =
      enum_from(j, "residual_mode", cfg.lgte.residual_mode,
                {{"ln_skip", lgte::ResidualMode::ln_skip}, {"standard", lgte::ResidualMode::standard}});
  read_if(j, "num_stages", cfg.num_stages);
  read_if(j, "head_hidden", cfg.head_hidden);
  read_if(j, "bins", cfg.tbr.bins);
  read_if(j, "boundary_extent", cfg.tbr.boundary_extent);
  read_if(j, "tau", cfg.tbr.tau);
  read_if(j, "frame_kernel", cfg.tbr.frame_kernel);
  read_if(j, "segment_kernel", cfg.tbr.segment_kernel);
  read_if(j, "share_frame_head", cfg.tbr.share_frame_head);
  cfg.conf_mode = enum_from(j, "conf_mode", cfg.conf_mode,
                            {{"last", tbr::ConfMode::last}, {"product", tbr::ConfMode::product}});
  cfg.validate();
  return cfg;
}

Model init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model model;
  model.config = cfg;
  std::mt19937_64 rng(substream_seed(seed, "init"));
  for (int b = 0; b < cfg.num_blocks; ++b) {
    model.encoder.blocks.push_back(lgte::init_block(cfg.channels, cfg.ffn_hidden, cfg.lgte, rng));
  }
  for (int s = 0; s < cfg.num_stages; ++s) {
    model.stages.push_back(tbr::init_stage(cfg.channels, cfg.head_hidden, cfg.tbr, rng));
  }
  return model;
}

namespace {

template <class ModelRef, class Out>
void collect_tensors(ModelRef& model, Out& out) {
  for (std::size_t b = 0; b < model.encoder.blocks.size(); ++b) {
    const std::string prefix = "lgte.block" + std::to_string(b) + ".";
    lgte::LgteTensors<Matrix>::each(model.encoder.blocks[b], [&](const char* name, auto& m) {
      if (m.size() > 0) out.emplace_back(prefix + name, &m);
    });
  }
  for (std::size_t s = 0; s < model.stages.size(); ++s) {
    const std::string prefix = "tbr.stage" + std::to_string(s) + ".";
    tbr::TbrTensors<Matrix>::each(model.stages[s], [&](const char* name, auto& m) {
      if (m.size() > 0) out.emplace_back(prefix + name, &m);
    });
  }
}

}  // namespace

std::vector<std::pair<std::string, Matrix*>> model_tensors(Model& model) {
  std::vector<std::pair<std::string, Matrix*>> out;
  collect_tensors(model, out);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> model_tensors(const Model& model) {
  std::vector<std::pair<std::string, const Matrix*>> out;
  collect_tensors(model, out);
  return out;
}

std::vector<ad::Var> ModelVars::list() const {
  std::vector<ad::Var> out;
  for (const auto& b : blocks) {
    lgte::LgteTensors<ad::Var>::each(b, [&](const char*, const ad::Var& v) {
      if (v.valid()) out.push_back(v);
    });
  }
  for (const auto& s : stages) {
    tbr::TbrTensors<ad::Var>::each(s, [&](const char*, const ad::Var& v) {
      if (v.valid()) out.push_back(v);
    });
  }
  return out;
}

ModelVars bind_model(ad::Tape& tape, const Model& model) {
  ModelVars vars;
  for (const auto& b : model.encoder.blocks) vars.blocks.push_back(lgte::bind_block(tape, b));
  for (const auto& s : model.stages) vars.stages.push_back(tbr::bind_stage(tape, s));
  return vars;
}

ad::Var encode(ad::Var features, Eigen::Index valid_len, const ModelVars& vars, const Model& model) {
  ad::Var x = features;
  for (std::size_t b = 0; b < model.encoder.blocks.size(); ++b) {
    x = lgte::lgte_block(x, vars.blocks[b], model.encoder.blocks[b], valid_len);
  }
  return x;
}

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  std::vector<std::uint8_t> out = {'T', 'C', 'A', 'P'};
  put_u32(out, kCheckpointVersion);
  const std::string config = model_config_to_json(model.config).dump();
  put_u32(out, static_cast<std::uint32_t>(config.size()));
  out.insert(out.end(), config.begin(), config.end());
  const auto tensors = model_tensors(model);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(m->rows()));
    put_u32(out, static_cast<std::uint32_t>(m->cols()));
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>((*m)(r, c))));
      }
    }
  }
  return out;
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (in.text(4) != "TCAP") throw FormatError("checkpoint: bad magic");
  const auto version = in.u32();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(nlohmann::json::parse(in.text(in.u32())));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad config: ") + e.what());
  }
  Model model = init_model(cfg, 0);
  std::map<std::string, Matrix*> slots;
  for (auto& [name, m] : model_tensors(model)) slots.emplace(name, m);

  const auto count = in.u32();
  if (count != slots.size()) throw FormatError("checkpoint: tensor count does not match its config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = in.text(in.u32());
    const auto it = slots.find(name);
    if (it == slots.end()) throw FormatError("checkpoint: unexpected tensor " + name);
    const auto rank = in.u32();
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = in.u32();
    Matrix& m = *it->second;
    if (rank != 2 || dims[0] != m.rows() || dims[1] != m.cols()) {
      throw FormatError("checkpoint: shape mismatch for " + name);
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<float>(in.u32());
    }
    if (!m.allFinite()) throw DataError("checkpoint: non-finite values in " + name);
    slots.erase(it);
  }
  if (!in.done()) throw FormatError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

VideoRefinement refine_video(const Model& model, const seqio::FeatureSequence& seq,
                             const std::vector<Proposal>& candidates, const RefineOptions& opts) {
  if (static_cast<int>(seq.channels()) != model.config.channels) {
    throw ArgumentError("refine: feature width differs from the model's channel count");
  }
  const auto valid = static_cast<Eigen::Index>(seq.valid_len);
  const Matrix fenc = lgte::encoder_forward(seq, model.encoder);
  VideoRefinement result;
  tbr::RefineDiagnostics diag;
  result.stages = tbr::tbr_refine(fenc, valid, candidates, model.stages, &diag);
  result.degenerate = diag.degenerate;
  result.proposals.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& last = result.stages[i].back();
    const double conf = tbr::final_confidence(result.stages[i], model.config.conf_mode);
    result.proposals.push_back({last.start, last.end, postproc::fuse_scores(candidates[i].score, conf)});
  }
  std::stable_sort(result.proposals.begin(), result.proposals.end(),
                   [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
  if (opts.apply_soft_nms) result.proposals = postproc::soft_nms(result.proposals, opts.nms);
  return result;
}

}  // namespace tcanet
