#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cwms/error.hpp"
#include "cwms/simulator.hpp"
#include "support.hpp"

using namespace cwms;
namespace fs = std::filesystem;

namespace {

// Topology where disks are effectively free, so only the network and task
// runtimes count.
Topology network_only(double submit_bw, double worker_bw) {
  Topology topo;
  topo.submit = NodeSpec{"submit", 4, submit_bw, 1e15, 0};
  topo.workers = {NodeSpec{"w0", 4, worker_bw, 1e15, 0}};
  topo.sites["local"] = SiteMapping{"submit", {"w0"}};
  topo.sites["condor"] = SiteMapping{"submit", {"w0"}};
  return topo;
}

Job single_job(std::uint64_t in_bytes, std::uint64_t out_bytes, double runtime) {
  Job j;
  j.id = "j0";
  j.site = "condor";
  ComputePayload cp;
  TaskInvocation t;
  t.task_id = "t0";
  t.transformation = "test::tx:1.0";
  t.pfn = "/usr/bin/tx";
  t.runtime_s = runtime;
  t.inputs = {FileTransfer{"in", "http://local/staging/in", "file://${JOBDIR}/in", in_bytes}};
  t.outputs = {FileTransfer{"out", "file://${JOBDIR}/out", "http://local/staging/out", out_bytes}};
  cp.tasks = {t};
  j.payload = cp;
  return j;
}

using testing::ledger_oracle;

// Longest path where each compute job costs its runtimes plus its staged
// bytes at the fastest link rate. Without fair share concurrent flows do not
// slow each other, so only the largest file per stage counts.
double critical_path(const ExecutableWorkflow& ewf, const std::map<std::string, WrapperPlan>& plans,
                     const Topology& topo, bool fair_share) {
  double max_bw = 0;
  for (const auto* n : topo.nodes()) max_bw = std::max(max_bw, n->bandwidth);
  auto order = topological_order(job_graph(ewf));
  std::map<std::string, double> weight, finish;
  for (const auto& j : ewf.jobs) {
    double w = 0;
    if (j.kind == JobKind::Compute) {
      for (const auto& t : j.compute().tasks) w += t.runtime_s;
      for (const auto& step : plans.at(j.id).execution_order()) {
        if (step.kind != StepKind::StageIn && step.kind != StepKind::StageOut) continue;
        double sum = 0, largest = 0;
        for (const auto& f : step.files)
          if (!f.link) {
            sum += static_cast<double>(f.bytes);
            largest = std::max(largest, static_cast<double>(f.bytes));
          }
        w += (fair_share ? sum : largest) / max_bw;
      }
    }
    weight[j.id] = w;
  }
  std::map<std::string, std::vector<std::string>> parents;
  for (const auto& [p, c] : ewf.edges) parents[c].push_back(p);
  double best = 0;
  for (const auto& id : order) {
    double start = 0;
    for (const auto& p : parents[id]) start = std::max(start, finish[p]);
    finish[id] = start + weight[id];
    best = std::max(best, finish[id]);
  }
  return best;
}

std::vector<std::vector<double>> read_table(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, '\t')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("single job: stage-in, run, stage-out over one bottleneck link") {
  ExecutableWorkflow ewf;
  ewf.jobs = {single_job(100'000'000, 50'000'000, 10.0)};
  auto plans = build_wrapper_plans(ewf);
  auto res = simulate(ewf, plans, network_only(1e8, 1e9), SimConfig{});
  // 100 MB at 1e8 B/s, 10 s of compute, 50 MB back at 1e8 B/s
  CHECK(res.makespan_s == doctest::Approx(1.0 + 10.0 + 0.5).epsilon(1e-6));
  CHECK(res.transfers.size() == 2);
  CHECK(res.bytes_through("submit", TransferKind::Data) == 150'000'000u);
  REQUIRE(res.per_node_egress.at("submit").size() == 12);
  CHECK(res.per_node_egress.at("submit")[0] == doctest::Approx(1e8));
  CHECK(res.per_node_egress.at("submit")[5] == doctest::Approx(0.0));
}

TEST_CASE("two concurrent flows share the bottleneck fairly") {
  ExecutableWorkflow ewf;
  auto a = single_job(100'000'000, 0, 0.0);
  auto b = single_job(100'000'000, 0, 0.0);
  b.id = "j1";
  b.compute().tasks[0].task_id = "t1";
  b.compute().tasks[0].inputs[0].lfn = "in1";
  ewf.jobs = {a, b};
  auto plans = build_wrapper_plans(ewf);
  auto topo = network_only(1e8, 1e9);
  auto shared = simulate(ewf, plans, topo, SimConfig{});
  CHECK(shared.makespan_s == doctest::Approx(2.0).epsilon(1e-6));
  SimConfig greedy;
  greedy.fair_share = false;
  auto unshared = simulate(ewf, plans, topo, greedy);
  CHECK(unshared.makespan_s == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("empty workflow") {
  auto res = simulate(ExecutableWorkflow{}, {}, network_only(1e8, 1e9), SimConfig{});
  CHECK(res.makespan_s == 0.0);
  CHECK(res.transfers.empty());
  for (const auto& [n, s] : res.per_node_egress) CHECK(s.empty());
}

TEST_CASE("simulation errors") {
  ExecutableWorkflow ewf;
  ewf.jobs = {single_job(1, 1, 1)};
  ewf.jobs[0].site = "elsewhere";
  auto plans = build_wrapper_plans(ewf);
  try {
    simulate(ewf, plans, network_only(1e8, 1e9), SimConfig{});
    FAIL("expected UnmappedSite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnmappedSite);
  }

  Catalog cat;
  cat.containers["c1"] = testing::make_container("c1", Runtime::Docker, 0);
  cat.transformations.push_back(testing::make_tx("tx", "condor", "c1"));
  AbstractWorkflow wf;
  Task t;
  t.id = "t";
  t.transformation = "test::tx:1.0";
  t.outputs = {"o"};
  wf.tasks = {t};
  auto sized = plan(wf, cat, {testing::make_site("local", false, "local"), testing::make_site("condor", false, "local")},
                    PlanConfig{});
  try {
    simulate(sized, build_wrapper_plans(sized), network_only(1e8, 1e9), SimConfig{});
    FAIL("expected MissingSize");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingSize);
  }
}

TEST_CASE("topology validation") {
  auto topo = network_only(1e8, 1e9);
  topo.sites["condor"].compute = {"ghost"};
  CHECK_THROWS_AS(topo.validate(), Error);
  auto bad = network_only(0, 1e9);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("property: byte conservation against the ledger oracle") {
  std::mt19937_64 rng(51);
  for (int iter = 0; iter < 60; ++iter) {
    auto rc = testing::random_sim_case(rng);
    auto plans = build_wrapper_plans(rc.ewf);
    auto res = simulate(rc.ewf, plans, rc.topo, rc.cfg);
    auto oracle = ledger_oracle(rc, plans, res);
    CHECK(res.transfers.size() == oracle.flows);
    CHECK(res.transferred_bytes() == oracle.bytes);
    double tol = 1e-6 * std::max(1.0, static_cast<double>(oracle.bytes));
    CHECK(std::abs(res.total_egress_bytes() - static_cast<double>(oracle.bytes)) <= tol);
    CHECK(std::abs(res.total_ingress_bytes() - static_cast<double>(oracle.bytes)) <= tol);
  }
}

TEST_CASE("property: makespan is bounded below by the critical path") {
  std::mt19937_64 rng(52);
  for (int iter = 0; iter < 60; ++iter) {
    auto rc = testing::random_sim_case(rng);
    rc.cfg.runtime_jitter = 0;
    auto plans = build_wrapper_plans(rc.ewf);
    auto res = simulate(rc.ewf, plans, rc.topo, rc.cfg);
    CHECK(res.makespan_s * (1 + 1e-9) + 1e-9 >= critical_path(rc.ewf, plans, rc.topo, rc.cfg.fair_share));
    std::map<std::string, const JobInterval*> at;
    for (const auto& j : res.job_timeline) {
      CHECK(j.start <= j.end);
      CHECK(j.end <= res.makespan_s + 1e-9);
      at[j.job_id] = &j;
    }
    for (const auto& [p, c] : rc.ewf.edges) CHECK(at.at(p)->end <= at.at(c)->start + 1e-12);
  }
}

TEST_CASE("property: link rates never exceed capacity") {
  std::mt19937_64 rng(53);
  for (int iter = 0; iter < 40; ++iter) {
    auto rc = testing::random_sim_case(rng);
    rc.cfg.fair_share = true;
    auto res = simulate(rc.ewf, build_wrapper_plans(rc.ewf), rc.topo, rc.cfg);
    for (const auto* n : rc.topo.nodes()) {
      for (double v : res.per_node_egress.at(n->name)) CHECK(v <= n->bandwidth * (1 + 1e-9));
      for (double v : res.per_node_ingress.at(n->name)) CHECK(v <= n->bandwidth * (1 + 1e-9));
    }
    std::size_t bins = static_cast<std::size_t>(std::ceil(res.makespan_s / res.bin_s - 1e-9));
    for (const auto& [n, s] : res.per_node_egress) CHECK(s.size() == bins);
  }
}

TEST_CASE("property: same seed, same result; reports byte-identical") {
  std::mt19937_64 rng(54);
  for (int iter = 0; iter < 10; ++iter) {
    auto rc = testing::random_sim_case(rng);
    rc.cfg.runtime_jitter = 0.3;
    auto plans = build_wrapper_plans(rc.ewf);
    auto a = simulate(rc.ewf, plans, rc.topo, rc.cfg);
    auto b = simulate(rc.ewf, plans, rc.topo, rc.cfg);
    CHECK(a == b);
    auto da = testing::scratch_dir("sim-det-a"), db = testing::scratch_dir("sim-det-b");
    report(a, da);
    report(b, db);
    for (auto name : {"summary.tsv", "egress.tsv", "ingress.tsv", "io_wait.tsv", "transfers.tsv", "timeline.tsv"})
      CHECK(testing::slurp(da / name) == testing::slurp(db / name));
  }
}

TEST_CASE("image transfer events per placement and cluster size") {
  auto wf = load_workflow(testing::source_path("data/casa/workflow.yaml"));
  auto cat = load_catalog(testing::source_path("data/casa/catalog-docker.yaml"));
  auto count_images = [](const SimResult& r) {
    auto it = r.transfer_count_by_kind.find(TransferKind::ContainerImage);
    return it == r.transfer_count_by_kind.end() ? std::size_t{0} : it->second;
  };
  std::size_t previous = SIZE_MAX;
  for (int k : {1, 2, 3, 4, 6, 12}) {
    PlanConfig cfg;
    cfg.cluster_size = k;
    auto copy = plan(wf, cat, load_sites(testing::source_path("data/casa/sites-nonshared.yaml")), cfg);
    auto copy_res = simulate(copy, build_wrapper_plans(copy),
                             load_topology(testing::source_path("data/casa/topology-nonshared.yaml")), SimConfig{});
    // the fetch itself runs on the submit node, so only worker pulls cross a link
    CHECK(count_images(copy_res) == copy.count(JobKind::Compute));
    CHECK(count_images(copy_res) <= previous);
    previous = count_images(copy_res);

    auto link = plan(wf, cat, load_sites(testing::source_path("data/casa/sites-shared.yaml")), cfg);
    auto link_res = simulate(link, build_wrapper_plans(link),
                             load_topology(testing::source_path("data/casa/topology-shared.yaml")), SimConfig{});
    CHECK(count_images(link_res) == 1);
  }
}

TEST_CASE("report columns integrate to the totals") {
  std::mt19937_64 rng(55);
  auto rc = testing::random_sim_case(rng);
  auto res = simulate(rc.ewf, build_wrapper_plans(rc.ewf), rc.topo, rc.cfg);
  auto dir = testing::scratch_dir("sim-report");
  report(res, dir);
  auto rows = read_table(dir / "egress.tsv");
  double total = 0;
  for (const auto& r : rows) total += std::accumulate(r.begin() + 1, r.end(), 0.0) * res.bin_s;
  CHECK(total == doctest::Approx(res.total_egress_bytes()).epsilon(1e-6));
  CHECK(rows.size() == res.per_node_egress.begin()->second.size());
}

TEST_CASE("fixture topologies load and validate") {
  for (auto name : {"topology-nonshared.yaml", "topology-shared.yaml"}) {
    auto topo = load_topology(testing::source_path(std::string("data/casa/") + name));
    CHECK_NOTHROW(topo.validate());
    CHECK(topo.workers.size() == 4);
    CHECK(topo.submit.bandwidth == doctest::Approx(1.25e8));
  }
  CHECK_THROWS_AS(parse_topology("submit: {name: s, bandwidth: -1}\n"), Error);
}

TEST_CASE("sweep rows are sorted and match single runs") {
  auto scenarios = load_scenarios(testing::source_path("data/casa/scenarios.yaml"));
  REQUIRE(scenarios.size() == 9);
  auto rows = sweep(scenarios);
  REQUIRE(rows.size() == 9);
  CHECK(std::is_sorted(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.label < b.label; }));
  for (const auto& sc : scenarios)
    if (sc.label == "none-k1") {
      auto res = simulate(sc.ewf, build_wrapper_plans(sc.ewf), sc.topo, sc.cfg);
      auto row = std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.label == "none-k1"; });
      CHECK(row->makespan_s == res.makespan_s);
    }
  CHECK(format_sweep(rows) == format_sweep(sweep(scenarios)));
}
