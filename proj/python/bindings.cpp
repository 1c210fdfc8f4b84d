#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cwms/catalog.hpp"
#include "cwms/error.hpp"
#include "cwms/launcher.hpp"
#include "cwms/planner.hpp"
#include "cwms/simulator.hpp"
#include "cwms/workflow.hpp"

namespace py = pybind11;
using namespace cwms;

namespace {

py::dict counts_dict(const std::map<TransferKind, std::size_t>& counts) {
  py::dict d;
  for (auto k : {TransferKind::Data, TransferKind::ContainerImage, TransferKind::Executable}) {
    auto it = counts.find(k);
    d[py::str(std::string(to_string(k)))] = it == counts.end() ? 0 : it->second;
  }
  return d;
}

py::dict sim_dict(const SimResult& r) {
  py::dict d;
  d["makespan_s"] = r.makespan_s;
  d["bin_s"] = r.bin_s;
  d["nodes"] = r.nodes;
  d["workers"] = r.workers;
  d["egress"] = r.per_node_egress;
  d["ingress"] = r.per_node_ingress;
  d["io_wait_ms"] = r.per_node_io_wait_ms;
  d["mean_io_wait_ms"] = r.mean_io_wait_ms;
  d["worker_mean_io_wait_ms"] = r.worker_mean_io_wait_ms();
  d["transfer_count_by_kind"] = counts_dict(r.transfer_count_by_kind);
  d["transferred_bytes"] = r.transferred_bytes();
  d["total_egress_bytes"] = r.total_egress_bytes();
  d["total_ingress_bytes"] = r.total_ingress_bytes();
  d["registry_reads"] = r.registry_reads;
  d["image_loads"] = r.image_loads;
  d["image_cache_hits"] = r.image_cache_hits;
  return d;
}

std::string plan_text(const std::string& workflow, const std::string& catalog, const std::string& sites,
                      int cluster_size, const std::optional<std::string>& placement, bool staging_inside,
                      bool dedup_load) {
  PlanConfig cfg;
  cfg.cluster_size = cluster_size;
  if (placement && *placement != "auto") cfg.placement_override = parse_placement(*placement);
  cfg.staging_inside_container = staging_inside;
  cfg.docker_load_dedup = dedup_load;
  if (cluster_size < 1) throw Error(ErrorCode::InvalidConfig, "cluster_size must be >= 1");
  return serialize_executable(plan(parse_workflow(workflow), parse_catalog(catalog), parse_sites(sites), cfg));
}

}  // namespace

PYBIND11_MODULE(_cwms, m) {
  m.doc() = "Containerized workflow planner, launcher and simulator";
  py::register_exception<Error>(m, "CwmsError", PyExc_RuntimeError);

  m.def(
      "parse_image_url",
      [](const std::string& url) {
        auto ref = parse_image_url(url);
        return py::make_tuple(std::string(to_string(ref.scheme)), ref.locator, ref.tag);
      },
      py::arg("url"));

  m.def(
      "normalize_catalog", [](const std::string& text) { return serialize_catalog(parse_catalog(text)); },
      py::arg("text"), "Parse and validate a catalog, returning its canonical YAML.");

  m.def(
      "topological_levels", [](const std::string& text) { return topological_levels(parse_workflow(text)); },
      py::arg("workflow"), "Validate a workflow and return task -> level.");

  m.def("plan", &plan_text, py::arg("workflow"), py::arg("catalog"), py::arg("sites"), py::arg("cluster_size") = 1,
        py::arg("placement") = std::nullopt, py::arg("staging_inside") = true, py::arg("dedup_load") = true,
        "Plan YAML inputs into an executable workflow (JSON text).");

  m.def(
      "job_counts",
      [](const std::string& executable) {
        std::map<std::string, std::size_t> out;
        for (const auto& [k, n] : job_counts(parse_executable(executable))) out[std::string(to_string(k))] = n;
        return out;
      },
      py::arg("executable"));

  m.def(
      "render_wrappers",
      [](const std::string& executable) {
        std::map<std::string, std::string> out;
        for (const auto& [id, p] : build_wrapper_plans(parse_executable(executable))) out[id] = render_wrapper(p);
        return out;
      },
      py::arg("executable"), "Job id -> wrapper script for every compute job.");

  m.def(
      "run_mock",
      [](const std::string& executable, int slots, int nodes_per_site, const std::optional<std::string>& fail_step,
         const std::string& fail_job) {
        auto ewf = parse_executable(executable);
        auto plans = build_wrapper_plans(ewf);
        ExecuteOptions opts;
        opts.slots = slots;
        opts.nodes_per_site = nodes_per_site;
        if (fail_step) opts.fail = FailureInjection{fail_job, parse_step_kind(*fail_step)};
        py::gil_scoped_release release;
        return execute_local(ewf, plans, opts).to_json();
      },
      py::arg("executable"), py::arg("slots") = 4, py::arg("nodes_per_site") = 1, py::arg("fail_step") = std::nullopt,
      py::arg("fail_job") = "", "Mock execution; returns the report as JSON text.");

  m.def(
      "simulate",
      [](const std::string& executable, const std::string& topology, std::uint64_t seed,
         std::optional<bool> dedup_load, bool fair_share, const std::optional<std::string>& report_dir) {
        auto ewf = parse_executable(executable);
        auto topo = parse_topology(topology);
        SimConfig cfg;
        cfg.seed = seed;
        cfg.docker_load_dedup = dedup_load.value_or(ewf.config.docker_load_dedup);
        cfg.fair_share = fair_share;
        SimResult res;
        {
          py::gil_scoped_release release;
          res = simulate(ewf, build_wrapper_plans(ewf), topo, cfg);
          if (report_dir) report(res, *report_dir);
        }
        return sim_dict(res);
      },
      py::arg("executable"), py::arg("topology"), py::arg("seed") = 0, py::arg("dedup_load") = std::nullopt,
      py::arg("fair_share") = true, py::arg("report_dir") = std::nullopt);

  m.def(
      "sweep",
      [](const std::string& scenarios_path) {
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = sweep(load_scenarios(scenarios_path));
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["label"] = r.label;
          d["makespan_s"] = r.makespan_s;
          d["compute_jobs"] = r.compute_jobs;
          d["transfer_count_by_kind"] = counts_dict(r.transfer_count_by_kind);
          d["image_bytes_from_submit"] = r.image_bytes_from_submit;
          d["worker_mean_io_wait_ms"] = r.worker_mean_io_wait_ms;
          d["image_loads"] = r.image_loads;
          out.append(d);
        }
        return out;
      },
      py::arg("scenarios_path"));
}
