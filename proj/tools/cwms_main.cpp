// cwms command-line entry point.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cwms/catalog.hpp"
#include "cwms/error.hpp"
#include "cwms/launcher.hpp"
#include "cwms/planner.hpp"
#include "cwms/simulator.hpp"
#include "cwms/workflow.hpp"

namespace fs = std::filesystem;
using namespace cwms;

namespace {

constexpr int kInputError = 1;
constexpr int kExecError = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::StepFailed:
    case ErrorCode::MissingRuntime:
    case ErrorCode::UnmappedSite:
    case ErrorCode::MissingSize:
    case ErrorCode::RegistryMiss:
    case ErrorCode::SourceMissing:
    case ErrorCode::DestinationUnwritable:
    case ErrorCode::ChecksumMismatch:
      return kExecError;
    default:
      return kInputError;
  }
}

bool parse_on_off(const std::string& v) { return v == "on"; }

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::DestinationUnwritable, "cannot write '" + path.string() + "'");
  out << text;
}

struct PlanFlags {
  int cluster_size = 0;  // 0 = keep config value
  std::string placement;
  std::string staging_inside;
  std::string dedup_load;
  std::string config;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--cluster-size", cluster_size, "Tasks per clustered job")->check(CLI::PositiveNumber);
    cmd->add_option("--placement", placement, "Image placement")
        ->check(CLI::IsMember({"auto", "copy", "symlink", "bypass"}));
    cmd->add_option("--staging-inside", staging_inside, "Stage data inside the container")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--dedup-load", dedup_load, "Deduplicate docker image loads per node")
        ->check(CLI::IsMember({"on", "off"}));
  }

  PlanConfig apply(PlanConfig cfg) const {
    if (cluster_size > 0) cfg.cluster_size = cluster_size;
    if (placement == "auto") cfg.placement_override.reset();
    else if (!placement.empty()) cfg.placement_override = parse_placement(placement);
    if (!staging_inside.empty()) cfg.staging_inside_container = parse_on_off(staging_inside);
    if (!dedup_load.empty()) cfg.docker_load_dedup = parse_on_off(dedup_load);
    return cfg;
  }
};

void print_counts(const ExecutableWorkflow& ewf) {
  std::cout << "jobs: " << ewf.jobs.size() << "\n";
  for (const auto& [kind, n] : job_counts(ewf)) std::cout << "  " << to_string(kind) << ": " << n << "\n";
}

void print_sim(const SimResult& res) {
  std::cout << "makespan_s: " << res.makespan_s << "\n";
  for (auto k : {TransferKind::Data, TransferKind::ContainerImage, TransferKind::Executable}) {
    auto it = res.transfer_count_by_kind.find(k);
    std::cout << "transfers " << to_string(k) << ": " << (it == res.transfer_count_by_kind.end() ? 0 : it->second)
              << "\n";
  }
  std::cout << "image_loads: " << res.image_loads << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Containerized workflow planner, launcher and simulator"};
  app.require_subcommand(1);

  std::string out_dir = ".";
  std::uint64_t seed = 0;

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "Plan an abstract workflow into an executable workflow");
  std::string wf_path, cat_path, sites_path;
  PlanFlags plan_flags;
  plan_cmd->add_option("--workflow", wf_path, "Abstract workflow (YAML)")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--catalog", cat_path, "Transformation catalog (YAML)")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--sites", sites_path, "Site catalog (YAML)")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--config", plan_flags.config, "Plan config (YAML)")->check(CLI::ExistingFile);
  plan_cmd->add_option("--out", out_dir, "Output directory");
  plan_flags.add_to(plan_cmd);

  // wrappers
  auto* wrap_cmd = app.add_subcommand("wrappers", "Render job wrapper scripts");
  std::string ewf_path;
  wrap_cmd->add_option("executable", ewf_path, "Executable workflow (JSON)")->required()->check(CLI::ExistingFile);
  wrap_cmd->add_option("--out", out_dir, "Output directory");

  // run
  auto* run_cmd = app.add_subcommand("run", "Execute an executable workflow locally");
  std::string mode = "mock", fail_step, fail_job;
  int slots = 4, nodes_per_site = 1;
  run_cmd->add_option("executable", ewf_path, "Executable workflow (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--mode", mode, "Execution mode")->check(CLI::IsMember({"mock", "real"}));
  run_cmd->add_option("--slots", slots, "Concurrent jobs")->check(CLI::PositiveNumber);
  run_cmd->add_option("--nodes-per-site", nodes_per_site, "Mock worker nodes per site")->check(CLI::PositiveNumber);
  run_cmd->add_option("--fail-step", fail_step, "Inject a failure at this step kind");
  run_cmd->add_option("--fail-job", fail_job, "Restrict the injected failure to one job");
  run_cmd->add_option("--out", out_dir, "Output directory");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate an executable workflow on a topology");
  std::string topo_path, sim_dedup, fair_share;
  sim_cmd->add_option("executable", ewf_path, "Executable workflow (JSON)")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--topology", topo_path, "Topology (YAML)")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", seed, "Random seed");
  sim_cmd->add_option("--dedup-load", sim_dedup, "Deduplicate docker image loads per node")
      ->check(CLI::IsMember({"on", "off"}));
  sim_cmd->add_option("--fair-share", fair_share, "Share link bandwidth among flows")
      ->check(CLI::IsMember({"on", "off"}));
  sim_cmd->add_option("--out", out_dir, "Report directory");

  // report
  auto* report_cmd = app.add_subcommand("report", "Plan, simulate and report one scenario file");
  std::string scenario_path;
  report_cmd->add_option("scenario", scenario_path, "Scenario (YAML)")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--seed", seed, "Random seed");
  report_cmd->add_option("--out", out_dir, "Report directory");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Compare scenarios");
  sweep_cmd->add_option("scenarios", scenario_path, "Scenario list (YAML)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kInputError;
  }

  try {
    if (*plan_cmd) {
      auto wf = load_workflow(wf_path);
      auto cat = load_catalog(cat_path);
      auto sites = load_sites(sites_path);
      PlanConfig cfg;
      if (!plan_flags.config.empty()) {
        std::ifstream in(plan_flags.config);
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = parse_plan_config(ss.str(), cfg);
      }
      cfg = plan_flags.apply(cfg);
      auto ewf = plan(wf, cat, sites, cfg);
      auto path = fs::path(out_dir) / "executable.json";
      write_file(path, serialize_executable(ewf));
      print_counts(ewf);
      std::cout << "wrote " << path.string() << "\n";
      return 0;
    }
    if (*wrap_cmd) {
      auto ewf = load_executable(ewf_path);
      auto plans = build_wrapper_plans(ewf);
      for (const auto& [id, p] : plans) write_file(fs::path(out_dir) / (id + ".sh"), render_wrapper(p));
      std::cout << "wrote " << plans.size() << " wrappers to " << out_dir << "\n";
      return 0;
    }
    if (*run_cmd) {
      auto ewf = load_executable(ewf_path);
      auto plans = build_wrapper_plans(ewf);
      ExecuteOptions opts;
      opts.mode = mode == "real" ? ExecMode::Real : ExecMode::Mock;
      opts.slots = slots;
      opts.nodes_per_site = nodes_per_site;
      opts.work_dir = fs::path(out_dir) / "work";
      if (!fail_step.empty()) opts.fail = FailureInjection{fail_job, parse_step_kind(fail_step)};
      auto rep = execute_local(ewf, plans, opts);
      write_file(fs::path(out_dir) / "report.json", rep.to_json());
      for (const auto& j : rep.jobs) {
        std::cout << j.job_id << "\t" << to_string(j.status);
        if (!j.failed_step.empty()) std::cout << "\tstep=" << j.failed_step;
        std::cout << "\n";
      }
      if (!rep.ok()) {
        for (const auto& j : rep.jobs)
          if (j.status == JobStatus::Failed) std::cerr << j.message << "\n";
        return kExecError;
      }
      return 0;
    }
    if (*sim_cmd) {
      auto ewf = load_executable(ewf_path);
      auto topo = load_topology(topo_path);
      SimConfig cfg;
      cfg.seed = seed;
      cfg.docker_load_dedup = sim_dedup.empty() ? ewf.config.docker_load_dedup : parse_on_off(sim_dedup);
      if (!fair_share.empty()) cfg.fair_share = parse_on_off(fair_share);
      auto plans = build_wrapper_plans(ewf);
      auto res = simulate(ewf, plans, topo, cfg);
      report(res, out_dir);
      print_sim(res);
      std::cout << "wrote report to " << out_dir << "\n";
      return 0;
    }
    if (*report_cmd) {
      auto scenarios = load_scenarios(scenario_path);
      for (auto& sc : scenarios) {
        if (report_cmd->count("--seed")) sc.cfg.seed = seed;
        auto plans = build_wrapper_plans(sc.ewf);
        auto res = simulate(sc.ewf, plans, sc.topo, sc.cfg);
        auto dir = scenarios.size() == 1 ? fs::path(out_dir) : fs::path(out_dir) / sc.label;
        report(res, dir);
        std::cout << "[" << sc.label << "]\n";
        print_sim(res);
      }
      return 0;
    }
    if (*sweep_cmd) {
      auto table = format_sweep(sweep(load_scenarios(scenario_path)));
      write_file(fs::path(out_dir) / "sweep.tsv", table);
      std::cout << table;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return 0;
}
