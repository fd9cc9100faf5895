// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// ctxnoise._core: the numerics, blending, trace and aggregation entry points
// plus the offline experiment runner.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "ctxnoise/ckplug.hpp"
#include "ctxnoise/error.hpp"
#include "ctxnoise/eval.hpp"
#include "ctxnoise/numerics.hpp"
#include "ctxnoise/pipeline.hpp"
#include "ctxnoise/text.hpp"
#include "ctxnoise/trace.hpp"

namespace py = pybind11;
using namespace ctxnoise;

namespace {

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kUpstream: return "upstream";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

std::vector<std::string> words(const py::object& x) {
  if (py::isinstance<py::str>(x)) return text::tokenize(x.cast<std::string>());
  return x.cast<std::vector<std::string>>();
}

py::dict allocation_dict(const trace::AttentionAllocation& a) {
  py::dict d;
  d["idiom"] = a.idiom_share;
  d["context"] = a.context_share;
  d["other"] = a.other_share;
  d["tokens"] = a.token_count;
  return d;
}

py::object opt(const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::object(py::none()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ctxnoise core bindings";
  m.attr("__version__") = std::string(pipeline::kVersion);

  static py::exception<Error> error_type(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = kind_name(e.kind());
      exc.attr("exit_code") = exit_code_for(e.kind());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def(
      "ter",
      [](const py::object& reference, const py::object& hypothesis) {
        const auto r = words(reference), h = words(hypothesis);
        return numerics::ter(r, h);
      },
      py::arg("reference"), py::arg("hypothesis"),
      "Percent TER. Strings are tokenized; lists are taken as words.");

  m.def(
      "ter_detail",
      [](const py::object& reference, const py::object& hypothesis) {
        const auto r = words(reference), h = words(hypothesis);
        const auto d = numerics::ter_detail(r, h);
        py::dict out;
        out["score"] = d.score;
        out["edits"] = d.edits;
        out["shifts"] = d.shifts;
        out["edit_distance"] = d.edit_distance;
        out["reference_length"] = d.reference_length;
        out["exact"] = d.exact;
        return out;
      },
      py::arg("reference"), py::arg("hypothesis"));

  m.def(
      "entropy", [](const std::vector<double>& p) { return numerics::shannon_entropy(p); }, py::arg("p"),
      "Shannon entropy in nats of a probability vector.");

  m.def(
      "correlations",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto c = numerics::correlations(a, b);
        py::dict out;
        out["pearson"] = opt(c.pearson);
        out["spearman"] = opt(c.spearman);
        out["kendall_tau_b"] = opt(c.kendall_tau_b);
        return out;
      },
      py::arg("a"), py::arg("b"), "Undefined coefficients are None.");

  m.def(
      "confidence_gain",
      [](const std::map<std::string, double>& p_context, const std::map<std::string, double>& p_internal) {
        return ckplug::confidence_gain(gateway::TokenDistribution(p_context), gateway::TokenDistribution(p_internal));
      },
      py::arg("p_context"), py::arg("p_internal"));

  m.def(
      "blend",
      [](const std::map<std::string, double>& p_context, const std::map<std::string, double>& p_internal,
         double alpha) {
        const auto r = ckplug::blend_detail(gateway::TokenDistribution(p_context),
                                            gateway::TokenDistribution(p_internal), {alpha});
        return py::make_tuple(r.distribution.entries(), std::string(ckplug::to_string(r.branch)), r.cg);
      },
      py::arg("p_context"), py::arg("p_internal"), py::arg("alpha") = 0.5,
      "Returns (distribution, branch, cg).");

  m.def(
      "analyze_traces",
      [](const std::string& path) {
        const auto summaries = trace::analyze(trace::load_traces(path));
        py::list out;
        for (const auto& s : summaries) {
          py::dict d;
          d["instance_id"] = s.instance_id;
          d["condition"] = s.condition;
          d["model_id"] = s.model_id;
          d["allocation"] = allocation_dict(s.allocation);
          d["span"] = s.alignment.empty ? py::object(py::none())
                                        : py::object(py::make_tuple(s.alignment.span.begin, s.alignment.span.end));
          d["span_entropy"] = s.confidence ? py::object(py::float_(s.confidence->mean_entropy)) : py::object(py::none());
          out.append(d);
        }
        return out;
      },
      py::arg("path"), "Per-trace attention allocation and idiom span for a trace/v1 JSONL file.");

  m.def(
      "attention_by_condition",
      [](const std::string& path) {
        py::dict out;
        for (const auto& [cond, a] : trace::allocation_by_condition(trace::analyze(trace::load_traces(path))))
          out[py::str(cond)] = allocation_dict(a);
        return out;
      },
      py::arg("path"));

  m.def(
      "load_cell_table",
      [](const std::string& path) {
        eval::CellScores fidelity, aux;
        eval::load_cell_table(path, fidelity, aux);
        return py::make_tuple(fidelity, aux);
      },
      py::arg("path"), "Returns (fidelity, aux) keyed by (condition, pair).");

  m.def(
      "aggregate_cells",
      [](const eval::CellScores& fidelity, const eval::CellScores& aux) {
        py::list out;
        for (const auto& r : eval::aggregate_cells(fidelity, aux)) {
          py::dict d;
          d["condition"] = r.condition;
          d["fidelity"] = r.fidelity;
          d["aux"] = r.aux;
          d["avg_f"] = opt(r.avg_f);
          d["avg_c"] = opt(r.avg_c);
          out.append(d);
        }
        return out;
      },
      py::arg("fidelity"), py::arg("aux") = eval::CellScores{});

  m.def(
      "run",
      [](const std::string& config_path) {
        pipeline::RunSummary s;
        {
          py::gil_scoped_release release;
          s = pipeline::run(pipeline::RunConfig::load(config_path));
        }
        py::dict out;
        out["output_dir"] = s.output_dir;
        out["stages_run"] = s.stages_run;
        out["stages_reused"] = s.stages_reused;
        out["client_calls"] = s.client_calls;
        out["cache_hits"] = s.cache_hits;
        out["cache_misses"] = s.cache_misses;
        return out;
      },
      py::arg("config_path"), "Runs the experiment described by a JSON config file.");
}
