#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cwms/launcher.hpp"
#include "cwms/planner.hpp"

namespace cwms {

struct NodeSpec {
  std::string name;
  int slots = 1;
  double bandwidth = 1.25e9;  // access link, bytes/s, each direction
  double disk_untar_rate = 2.0e8;  // bytes/s, used for every disk request
  double disk_service_base_ms = 5.0;
};

// Which nodes back a planner site: `storage` serves its staging urls,
// `compute` runs its compute jobs.
struct SiteMapping {
  std::string storage;
  std::vector<std::string> compute;
};

// Star topology: every flow crosses the source's egress and the
// destination's ingress access link.
struct Topology {
  NodeSpec submit;
  std::optional<NodeSpec> nfs;
  std::vector<NodeSpec> workers;
  std::map<std::string, SiteMapping> sites;
  double registry_bandwidth = 1.25e8;  // remote registry export rate, bytes/s

  std::vector<const NodeSpec*> nodes() const;  // submit, nfs, workers
  const NodeSpec* find(std::string_view name) const;
  // Throws InvalidTopology.
  void validate() const;
};

struct SimConfig {
  std::uint64_t seed = 0;
  std::optional<PlacementMode> placement_override;  // applied when planning a scenario
  bool docker_load_dedup = false;
  bool fair_share = true;
  double runtime_jitter = 0.0;  // runtime scaled by U(1 - j, 1 + j)
  double bin_s = 1.0;
};

struct TransferRecord {
  std::string job_id;
  std::string lfn;
  TransferKind kind = TransferKind::Data;
  std::string src;  // node names
  std::string dst;
  std::uint64_t bytes = 0;
  double start = 0.0;
  double end = 0.0;

  friend bool operator==(const TransferRecord&, const TransferRecord&) = default;
};

struct JobInterval {
  std::string job_id;
  std::string node;
  double start = 0.0;
  double end = 0.0;

  friend bool operator==(const JobInterval&, const JobInterval&) = default;
};

struct SimResult {
  double makespan_s = 0.0;
  double bin_s = 1.0;
  std::vector<std::string> nodes;
  std::vector<std::string> workers;
  // bytes/s per bin, one series per node, all of equal length
  std::map<std::string, std::vector<double>> per_node_egress;
  std::map<std::string, std::vector<double>> per_node_ingress;
  // mean await of disk requests completing in each bin, 0 when none
  std::map<std::string, std::vector<double>> per_node_io_wait_ms;
  std::map<std::string, double> mean_io_wait_ms;  // over all requests on the node
  std::map<std::string, std::size_t> disk_requests;
  std::map<TransferKind, std::size_t> transfer_count_by_kind;
  std::vector<TransferRecord> transfers;  // network flows only
  std::vector<JobInterval> job_timeline;  // ewf job order
  std::size_t registry_reads = 0;
  std::size_t image_loads = 0;
  std::size_t image_cache_hits = 0;

  double total_egress_bytes() const;
  double total_ingress_bytes() const;
  std::uint64_t transferred_bytes() const;
  // Bytes of the given kind whose flow starts or ends at `node`.
  std::uint64_t bytes_through(std::string_view node, TransferKind kind) const;
  // Mean await over every disk request on worker nodes.
  double worker_mean_io_wait_ms() const;
  // Longest run of consecutive bins with egress >= threshold, in seconds.
  double longest_egress_run_s(std::string_view node, double threshold) const;

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

// Throws UnmappedSite, MissingSize, InvalidTopology.
SimResult simulate(const ExecutableWorkflow& ewf, const std::map<std::string, WrapperPlan>& plans,
                   const Topology& topo, const SimConfig& cfg);

// Writes summary.tsv, egress.tsv, ingress.tsv, io_wait.tsv, transfers.tsv and
// timeline.tsv into `out`. Throws DestinationUnwritable.
void report(const SimResult& res, const std::filesystem::path& out);

struct Scenario {
  std::string label;
  ExecutableWorkflow ewf;
  Topology topo;
  SimConfig cfg;
};

struct SweepRow {
  std::string label;
  double makespan_s = 0.0;
  std::size_t compute_jobs = 0;
  std::map<TransferKind, std::size_t> transfer_count_by_kind;
  std::uint64_t image_bytes_from_submit = 0;
  double worker_mean_io_wait_ms = 0.0;
  std::size_t image_loads = 0;
};

// Simulates every scenario (in parallel) and returns rows sorted by label.
std::vector<SweepRow> sweep(const std::vector<Scenario>& scenarios);
std::string format_sweep(const std::vector<SweepRow>& rows);

Topology parse_topology(std::string_view yaml_text);
Topology load_topology(const std::string& path);
SimConfig parse_sim_config(std::string_view yaml_text, SimConfig base = {});

// Scenario file: label, workflow, catalog, sites, topology (paths relative to
// the file), optional `plan` and `sim` maps. A file with a `scenarios` list
// yields several.
std::vector<Scenario> load_scenarios(const std::string& path);

}  // namespace cwms
