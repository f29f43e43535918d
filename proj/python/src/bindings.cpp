#include "tcanet/cli.hpp"
#include "tcanet/evalkit.hpp"
#include "tcanet/model.hpp"
#include "tcanet/postproc.hpp"
#include "tcanet/seqio.hpp"
#include "tcanet/tbr.hpp"
#include "tcanet/train.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>
#include <tuple>

namespace py = pybind11;
using namespace tcanet;
using json = nlohmann::json;

namespace {

using Triple = std::tuple<double, double, double>;
using Pair = std::pair<double, double>;

// Dicts cross the boundary as JSON text.
json to_json(const py::object& obj) {
  if (obj.is_none()) return json::object();
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object from_json(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<Proposal> to_proposals(const std::vector<Triple>& in) {
  std::vector<Proposal> out;
  out.reserve(in.size());
  for (const auto& [s, e, score] : in) out.push_back({s, e, score});
  return out;
}

std::vector<Triple> from_proposals(const std::vector<Proposal>& in) {
  std::vector<Triple> out;
  out.reserve(in.size());
  for (const auto& p : in) out.emplace_back(p.start, p.end, p.score);
  return out;
}

std::vector<evalkit::VideoProposals> to_video_proposals(
    const std::vector<std::pair<std::vector<Triple>, std::vector<Pair>>>& videos) {
  std::vector<evalkit::VideoProposals> out;
  for (const auto& [props, gts] : videos) {
    evalkit::VideoProposals v;
    v.proposals = to_proposals(props);
    for (const auto& [s, e] : gts) v.ground_truths.push_back({s, e});
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<double> thresholds_or_default(const std::optional<std::vector<double>>& t) {
  return t ? *t : evalkit::threshold_range(0.5, 0.05, 0.95);
}

seqio::FeatureSequence to_sequence(Matrix features, std::uint32_t snippet_interval,
                                   std::optional<std::size_t> valid_len) {
  if (valid_len) return seqio::make_sequence(std::move(features), snippet_interval, *valid_len);
  return seqio::make_sequence(std::move(features), snippet_interval);
}

}  // namespace

PYBIND11_MODULE(_tcanet, m) {
  m.doc() = "Temporal context aggregation and boundary refinement for action proposals";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<train::TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  // ---- sequences and datasets

  py::class_<seqio::FeatureSequence>(m, "FeatureSequence")
      .def(py::init(&to_sequence), py::arg("features"), py::arg("snippet_interval") = 1,
           py::arg("valid_len") = py::none())
      .def_readonly("features", &seqio::FeatureSequence::features)
      .def_readonly("snippet_interval", &seqio::FeatureSequence::snippet_interval)
      .def_readonly("valid_len", &seqio::FeatureSequence::valid_len)
      .def("__len__", &seqio::FeatureSequence::length)
      .def_property_readonly("channels", &seqio::FeatureSequence::channels);

  py::class_<seqio::Video>(m, "Video")
      .def_readonly("features", &seqio::Video::features)
      .def_property_readonly("video_id", [](const seqio::Video& v) { return v.annotation.video_id; })
      .def_property_readonly("annotation",
                             [](const seqio::Video& v) { return from_json(seqio::annotation_to_json(v.annotation)); })
      .def_property_readonly("candidates", [](const seqio::Video& v) { return from_proposals(v.annotation.candidates); })
      .def_property_readonly("ground_truths", [](const seqio::Video& v) {
        std::vector<std::tuple<double, double, int>> out;
        for (const auto& g : v.annotation.ground_truths) out.emplace_back(g.start, g.end, g.class_id);
        return out;
      });

  m.def("load_features", &seqio::load_features, py::arg("path"));
  m.def("write_features", &seqio::write_features, py::arg("path"), py::arg("sequence"));
  m.def("load_dataset", &seqio::load_dataset, py::arg("directory"));
  m.def("write_dataset", &seqio::write_dataset, py::arg("directory"), py::arg("videos"));
  m.def(
      "synth_dataset",
      [](const py::object& config) {
        const auto cfg = cli::synth_config_from_json(to_json(config));
        cfg.validate();
        return seqio::synth_dataset(cfg);
      },
      py::arg("config") = py::none(), "Deterministic synthetic dataset; `config` holds SynthConfig fields.");

  // ---- geometry, post-processing, metrics

  m.def(
      "tiou", [](Pair a, Pair b) { return evalkit::tiou({a.first, a.second}, {b.first, b.second}); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "regression_targets",
      [](Pair p, Pair g) {
        const auto t = train::regression_targets({p.first, p.second}, {g.first, g.second});
        return std::make_tuple(t.start, t.end, t.center, t.width);
      },
      py::arg("proposal"), py::arg("ground_truth"));
  m.def(
      "apply_offsets",
      [](Pair p, double ds, double de, double dx, double dw) {
        const auto o = tbr::apply_offsets({p.first, p.second}, ds, de, dx, dw);
        return std::make_pair(Pair{o.frame.start, o.frame.end}, Pair{o.segment.start, o.segment.end});
      },
      py::arg("proposal"), py::arg("ds"), py::arg("de"), py::arg("dx"), py::arg("dw"),
      "Returns the frame-level and segment-level intervals.");
  m.def(
      "fuse_proposals",
      [](Pair frame, Pair segment, double tau) {
        const auto r = tbr::fuse_proposals({frame.first, frame.second}, {segment.first, segment.second}, tau);
        return Pair{r.start, r.end};
      },
      py::arg("frame"), py::arg("segment"), py::arg("tau") = 0.5);
  m.def("fuse_scores", &postproc::fuse_scores, py::arg("s_ext"), py::arg("s_tcanet"));
  m.def(
      "soft_nms",
      [](const std::vector<Triple>& proposals, double sigma, double score_floor, int top_k) {
        postproc::SoftNmsConfig cfg;
        cfg.sigma = sigma;
        cfg.score_floor = score_floor;
        cfg.top_k = top_k;
        return from_proposals(postproc::soft_nms(to_proposals(proposals), cfg));
      },
      py::arg("proposals"), py::arg("sigma") = 0.4, py::arg("score_floor") = 1e-3, py::arg("top_k") = 100);
  m.def(
      "average_recall",
      [](const std::vector<std::pair<std::vector<Triple>, std::vector<Pair>>>& videos, int an,
         const std::optional<std::vector<double>>& thresholds) {
        return evalkit::average_recall_at_an(to_video_proposals(videos), an, thresholds_or_default(thresholds));
      },
      py::arg("videos"), py::arg("an"), py::arg("thresholds") = py::none(),
      "`videos` is a list of (proposals, ground_truths) pairs.");
  m.def(
      "auc",
      [](const std::vector<std::pair<std::vector<Triple>, std::vector<Pair>>>& videos,
         const std::optional<std::vector<double>>& thresholds, int max_an) {
        return evalkit::auc(to_video_proposals(videos), thresholds_or_default(thresholds), max_an);
      },
      py::arg("videos"), py::arg("thresholds") = py::none(), py::arg("max_an") = 100);
  m.def(
      "evaluate",
      [](const std::vector<seqio::Video>& videos, const std::map<std::string, std::vector<Triple>>& proposals,
         const py::object& options) {
        std::vector<cli::VideoProposalList> lists;
        for (const auto& [id, props] : proposals) lists.push_back({id, to_proposals(props), {}});
        const auto report =
            cli::evaluate_proposals(videos, lists, cli::eval_options_from_json(to_json(options)));
        return from_json(evalkit::report_to_json(report));
      },
      py::arg("videos"), py::arg("proposals"), py::arg("options") = py::none(),
      "Scores {video_id: proposals} against the dataset's ground truths.");

  // ---- model

  py::class_<Model>(m, "Model")
      .def(py::init([](const py::object& config, std::uint64_t seed) {
             return init_model(model_config_from_json(to_json(config)), seed);
           }),
           py::arg("config") = py::none(), py::arg("seed") = 0)
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](const Model& model, const std::filesystem::path& path) { save_checkpoint(path, model); },
           py::arg("path"))
      .def_property_readonly("config", [](const Model& model) { return from_json(model_config_to_json(model.config)); })
      .def("tensors",
           [](const Model& model) {
             std::vector<std::pair<std::string, Matrix>> out;
             for (const auto& [name, t] : model_tensors(model)) out.emplace_back(name, *t);
             return out;
           })
      .def(
          "refine",
          [](const Model& model, const seqio::FeatureSequence& seq, const std::vector<Triple>& candidates,
             bool soft_nms) {
            RefineOptions opts;
            opts.apply_soft_nms = soft_nms;
            const auto r = refine_video(model, seq, to_proposals(candidates), opts);
            return from_proposals(r.proposals);
          },
          py::arg("sequence"), py::arg("candidates"), py::arg("soft_nms") = false,
          "Refined proposals with fused scores, highest first.")
      .def(
          "with_settings",
          [](const Model& model, int stages, double tau) {
            cli::RefineSettings s;
            s.stages = stages;
            s.tau = tau;
            return cli::apply_refine_settings(model, s);
          },
          py::arg("stages") = 0, py::arg("tau") = -1.0, "A copy with fewer stages or another fusion weight.");

  m.def(
      "train",
      [](const std::vector<seqio::Video>& videos, const Model& model, const py::object& config) {
        const auto cfg = train::train_config_from_json(to_json(config));
        auto result = [&] {
          py::gil_scoped_release release;
          return train::train_model(videos, model, cfg);
        }();
        py::list history;
        for (const auto& e : result.history) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["mean_total"] = e.mean_total;
          d["mean_iou"] = e.mean_iou;
          d["mean_reg"] = e.mean_reg;
          history.append(d);
        }
        return py::make_tuple(std::move(result.model), history);
      },
      py::arg("videos"), py::arg("model"), py::arg("config") = py::none(),
      "Returns (trained model, per-epoch loss history).");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation in process; returns (exit code, stdout, stderr).");
}
