#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cwms/catalog.hpp"
#include "cwms/launcher.hpp"
#include "cwms/planner.hpp"
#include "cwms/simulator.hpp"
#include "cwms/workflow.hpp"

namespace testing {

inline std::string source_path(const std::string& rel) { return std::string(CWMS_SOURCE_DIR) + "/" + rel; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cwms-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// Random valid DAG: each task reads fresh inputs or outputs of earlier tasks,
// plus a few explicit control edges pointing forward.
inline cwms::AbstractWorkflow random_workflow(std::mt19937_64& rng, int max_tasks,
                                              const std::vector<std::string>& transformations) {
  cwms::AbstractWorkflow wf;
  const int n = uniform(rng, 1, max_tasks);
  std::vector<std::string> produced;
  for (int i = 0; i < n; ++i) {
    cwms::Task t;
    t.id = "t" + std::to_string(i);
    t.transformation = transformations[uniform(rng, 0, static_cast<int>(transformations.size()) - 1)];
    t.expected_runtime_s = uniform(rng, 0, 40) / 4.0;
    int reads = uniform(rng, 0, 3);
    std::set<std::string> ins;
    for (int r = 0; r < reads; ++r) {
      if (!produced.empty() && coin(rng, 0.7)) {
        ins.insert(produced[uniform(rng, 0, static_cast<int>(produced.size()) - 1)]);
      } else {
        auto name = "in_" + std::to_string(i) + "_" + std::to_string(r);
        cwms::FileMeta meta;
        meta.name = name;
        meta.size_bytes = static_cast<std::uint64_t>(uniform(rng, 0, 50)) * 100'000;
        meta.initial_location = "file:///local/inputs/" + name;
        wf.files[name] = meta;
        ins.insert(name);
      }
    }
    t.inputs.assign(ins.begin(), ins.end());
    int writes = uniform(rng, 1, 2);
    for (int w = 0; w < writes; ++w) {
      auto name = "out_" + std::to_string(i) + "_" + std::to_string(w);
      cwms::FileMeta meta;
      meta.name = name;
      meta.size_bytes = static_cast<std::uint64_t>(uniform(rng, 0, 30)) * 100'000;
      wf.files[name] = meta;
      t.outputs.push_back(name);
      produced.push_back(name);
    }
    if (i > 0 && coin(rng, 0.15)) wf.edges.emplace_back("t" + std::to_string(uniform(rng, 0, i - 1)), t.id);
    wf.tasks.push_back(std::move(t));
  }
  return wf;
}

// Every dependency (explicit or data flow) as a set of pairs.
inline std::set<std::pair<std::string, std::string>> precedence(const cwms::AbstractWorkflow& wf) {
  std::set<std::pair<std::string, std::string>> out;
  std::map<std::string, std::string> producer;
  for (const auto& t : wf.tasks)
    for (const auto& f : t.outputs) producer[f] = t.id;
  for (const auto& t : wf.tasks)
    for (const auto& f : t.inputs)
      if (auto it = producer.find(f); it != producer.end()) out.emplace(it->second, t.id);
  for (const auto& e : wf.edges) out.insert(e);
  return out;
}

inline cwms::Site make_site(const std::string& name, bool shared, const std::string& staging,
                            std::set<cwms::Runtime> runtimes = {cwms::Runtime::Docker, cwms::Runtime::Singularity,
                                                                cwms::Runtime::Shifter}) {
  cwms::Site s;
  s.name = name;
  s.shared_fs = shared;
  s.staging_site = staging;
  s.worker_count = 2;
  s.slots_per_worker = 4;
  s.runtimes_available = std::move(runtimes);
  return s;
}

inline cwms::TransformationEntry make_tx(const std::string& name, const std::string& site,
                                         std::optional<std::string> container) {
  cwms::TransformationEntry e;
  e.ns = "test";
  e.name = name;
  e.version = "1.0";
  e.site = site;
  e.arch = "x86_64";
  e.os = "linux";
  e.pfn = "/usr/bin/" + name;
  e.container = std::move(container);
  return e;
}

inline cwms::ContainerDef make_container(const std::string& name, cwms::Runtime runtime, std::uint64_t size) {
  cwms::ContainerDef c;
  c.name = name;
  c.runtime = runtime;
  c.image_size_bytes = size;
  switch (runtime) {
    case cwms::Runtime::Docker: c.image = cwms::parse_image_url("docker:///test/" + name + ":1"); break;
    case cwms::Runtime::Singularity:
      c.image = cwms::parse_image_url("shub://singularity-hub.org/test/" + name);
      break;
    case cwms::Runtime::Shifter: c.image = cwms::parse_image_url("shifter:///test/" + name + ":1"); break;
  }
  return c;
}

// Star topology with one storage node per site and `workers` compute nodes
// shared by every site.
inline cwms::Topology make_topology(const std::vector<std::string>& sites, int workers, double submit_bw,
                                    bool with_nfs) {
  cwms::Topology topo;
  topo.submit = cwms::NodeSpec{"submit", 4, submit_bw, 2e8, 5};
  if (with_nfs) topo.nfs = cwms::NodeSpec{"nfs", 1, 1e9, 2e8, 5};
  std::vector<std::string> names;
  for (int i = 0; i < workers; ++i) {
    topo.workers.push_back(cwms::NodeSpec{"w" + std::to_string(i), 4, 1e9, 2e8, 5});
    names.push_back("w" + std::to_string(i));
  }
  for (const auto& s : sites) topo.sites[s] = cwms::SiteMapping{with_nfs && s != "local" ? "nfs" : "submit", names};
  return topo;
}

// Compute job with `tasks` single-input, single-output tasks at site condor.
inline cwms::Job compute_job(const std::string& id, std::optional<std::string> container,
                             std::optional<cwms::PlacementMode> placement, int tasks = 1) {
  using namespace cwms;
  Job j;
  j.id = id;
  j.kind = JobKind::Compute;
  j.site = "condor";
  ComputePayload cp;
  for (int i = 0; i < tasks; ++i) {
    TaskInvocation t;
    t.task_id = id + "_t" + std::to_string(i);
    t.transformation = "test::tx:1.0";
    t.pfn = "/usr/bin/tx";
    t.runtime_s = 2.0;
    t.inputs.push_back(FileTransfer{"in" + std::to_string(i), "http://local/staging/in" + std::to_string(i),
                                    "file://${JOBDIR}/in" + std::to_string(i), 1000});
    t.outputs.push_back(FileTransfer{"out" + std::to_string(i), "file://${JOBDIR}/out" + std::to_string(i),
                                     "http://local/staging/out" + std::to_string(i), 500});
    cp.tasks.push_back(t);
  }
  cp.container = std::move(container);
  cp.placement = placement;
  cp.image_source = "http://local/staging/image.tar";
  j.payload = cp;
  return j;
}

inline cwms::PlanConfig wrapper_config(bool staging_inside, bool dedup) {
  cwms::PlanConfig cfg;
  cfg.staging_inside_container = staging_inside;
  cfg.docker_load_dedup = dedup;
  return cfg;
}

// The plans behind tests/golden/<backend>.sh.
inline cwms::WrapperPlan golden_plan(cwms::Runtime runtime) {
  using namespace cwms;
  auto placement = runtime == Runtime::Docker        ? PlacementMode::StageCopy
                   : runtime == Runtime::Singularity ? PlacementMode::SharedFsSymlink
                                                     : PlacementMode::ShifterLocal;
  auto c = make_container("c1", runtime, 100);
  auto job = compute_job("job1", "c1", placement, 2);
  if (runtime == Runtime::Shifter) job.compute().image_source = "test/c1:1";
  return build_wrapper_plan(job, &c, placement, wrapper_config(true, true));
}

inline std::string golden_name(cwms::Runtime runtime) {
  return std::string(cwms::to_string(runtime)) + ".sh";
}

// `tasks` independent Docker tasks at site condor, staged through local.
inline cwms::ExecutableWorkflow docker_workflow(int tasks, bool dedup, int cluster = 1) {
  using namespace cwms;
  Catalog cat;
  cat.containers["c1"] = make_container("c1", Runtime::Docker, 5'000'000);
  cat.transformations.push_back(make_tx("tx", "condor", "c1"));
  AbstractWorkflow wf;
  for (int i = 0; i < tasks; ++i) {
    Task t;
    t.id = "t" + std::to_string(i);
    t.transformation = "test::tx:1.0";
    t.outputs = {"o" + std::to_string(i)};
    wf.tasks.push_back(t);
  }
  PlanConfig cfg;
  cfg.docker_load_dedup = dedup;
  cfg.cluster_size = cluster;
  return plan(wf, cat, {make_site("local", false, "local"), make_site("condor", false, "local")}, cfg);
}

struct SimCase {
  cwms::ExecutableWorkflow ewf;
  cwms::Topology topo;
  cwms::SimConfig cfg;
};

// Random workflow, container flavour, staging layout, clustering and topology.
inline SimCase random_sim_case(std::mt19937_64& rng) {
  using namespace cwms;
  auto wf = random_workflow(rng, 25, {"test::tx:1.0"});
  int flavour = uniform(rng, 0, 2);
  Catalog cat;
  if (flavour == 0) {
    cat.transformations.push_back(make_tx("tx", "condor", std::nullopt));
  } else {
    auto runtime = flavour == 1 ? Runtime::Docker : Runtime::Singularity;
    cat.containers["c1"] = make_container("c1", runtime, uniform(rng, 1, 50) * 1'000'000ull);
    cat.transformations.push_back(make_tx("tx", "condor", "c1"));
  }
  bool shared = coin(rng);
  std::vector<Site> sites{make_site("local", false, "local"), make_site("condor", shared, shared ? "condor" : "local")};
  PlanConfig pc;
  pc.cluster_size = uniform(rng, 1, 4);
  pc.staging_inside_container = coin(rng);
  pc.docker_load_dedup = coin(rng);
  SimCase sc;
  sc.ewf = plan(wf, cat, sites, pc);
  sc.topo = make_topology({"local", "condor"}, uniform(rng, 1, 3), 1e8 * uniform(rng, 1, 10), shared);
  sc.cfg.seed = rng();
  sc.cfg.fair_share = coin(rng, 0.8);
  sc.cfg.docker_load_dedup = pc.docker_load_dedup;
  sc.cfg.runtime_jitter = coin(rng) ? 0.0 : 0.25;
  return sc;
}

inline std::string resolve_node(const cwms::Topology& topo, const std::string& url) {
  auto loc = cwms::url_location(url);
  if (topo.find(loc)) return loc;
  auto it = topo.sites.find(loc);
  return it == topo.sites.end() ? topo.submit.name : it->second.storage;
}

struct Ledger {
  std::uint64_t bytes = 0;
  std::size_t flows = 0;
  void add(const std::string& a, const std::string& b, std::uint64_t n) {
    if (a == b) return;
    bytes += n;
    ++flows;
  }
};

// Every byte that must cross a link, derived from the plan and the nodes the
// jobs ran on.
inline Ledger ledger_oracle(const SimCase& sc, const std::map<std::string, cwms::WrapperPlan>& plans,
                            const cwms::SimResult& res) {
  using namespace cwms;
  Ledger l;
  std::map<std::string, std::string> ran_on;
  for (const auto& j : res.job_timeline) ran_on[j.job_id] = j.node;
  for (const auto& job : sc.ewf.jobs) {
    const auto& node = ran_on.at(job.id);
    if (job.kind == JobKind::Compute) {
      for (const auto& step : plans.at(job.id).execution_order())
        for (const auto& f : step.files) {
          if (f.link) continue;
          if (step.kind == StepKind::MaterializeImage || step.kind == StepKind::StageIn)
            l.add(resolve_node(sc.topo, f.src), node, f.bytes);
          else if (step.kind == StepKind::StageOut)
            l.add(node, resolve_node(sc.topo, f.dst), f.bytes);
        }
      continue;
    }
    if (job.kind == JobKind::Cleanup) continue;
    for (const auto& f : job.transfers().transfers) {
      auto src = job.transfers().registry_export ? sc.topo.submit.name : resolve_node(sc.topo, f.src);
      l.add(src, resolve_node(sc.topo, f.dst), f.bytes);
    }
  }
  return l;
}

}  // namespace testing
