#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cwms/catalog.hpp"
#include "cwms/transfer.hpp"
#include "cwms/workflow.hpp"

namespace cwms {

enum class PlacementMode { StageCopy, SharedFsSymlink, Bypass, ShifterLocal };
enum class JobKind { ContainerFetch, StageIn, Compute, StageOut, Cleanup };

std::string_view to_string(PlacementMode p) noexcept;
std::string_view to_string(JobKind k) noexcept;
PlacementMode parse_placement(std::string_view s);
JobKind parse_job_kind(std::string_view s);

// Placement modes that need a planner-inserted ContainerFetch job.
inline bool needs_fetch(PlacementMode p) noexcept {
  return p == PlacementMode::StageCopy || p == PlacementMode::SharedFsSymlink;
}

struct Site {
  std::string name;
  bool shared_fs = false;
  std::string staging_site;
  int worker_count = 1;
  int slots_per_worker = 1;
  std::set<Runtime> runtimes_available;
  std::vector<std::string> cvmfs_like_paths;

  friend bool operator==(const Site&, const Site&) = default;
};

struct PlanConfig {
  int cluster_size = 1;
  std::string output_site = "local";
  bool cleanup = true;
  bool staging_inside_container = true;
  bool docker_load_dedup = true;
  // Unset = auto (decide_placement's default rules).
  std::optional<PlacementMode> placement_override;

  friend bool operator==(const PlanConfig&, const PlanConfig&) = default;
};

struct FileTransfer {
  std::string lfn;
  std::string src;
  std::string dst;
  std::uint64_t bytes = 0;
  TransferKind kind = TransferKind::Data;
  bool link = false;  // symlink instead of copy (shared filesystem)

  friend bool operator==(const FileTransfer&, const FileTransfer&) = default;
};

struct TaskInvocation {
  std::string task_id;
  std::string transformation;
  std::string pfn;
  InstallType install_type = InstallType::Installed;
  double runtime_s = kDefaultRuntimeSeconds;
  std::vector<FileTransfer> inputs;   // staging site -> job directory
  std::vector<FileTransfer> outputs;  // job directory -> staging site

  friend bool operator==(const TaskInvocation&, const TaskInvocation&) = default;
};

struct ComputePayload {
  std::vector<TaskInvocation> tasks;  // >= 1, topologically ordered
  std::optional<std::string> container;
  std::optional<PlacementMode> placement;
  // Where the image comes from: staged image url, site-local path, or the
  // shifter registry reference.
  std::string image_source;
  EnvMap env;
  int level = 0;

  friend bool operator==(const ComputePayload&, const ComputePayload&) = default;
};

struct TransferPayload {
  std::vector<FileTransfer> transfers;
  std::optional<std::string> container;  // ContainerFetch only
  bool registry_export = false;          // ContainerFetch of a docker/shub image

  friend bool operator==(const TransferPayload&, const TransferPayload&) = default;
};

struct Job {
  std::string id;
  JobKind kind = JobKind::Compute;
  std::string site;
  std::variant<ComputePayload, TransferPayload> payload;

  const ComputePayload& compute() const { return std::get<ComputePayload>(payload); }
  ComputePayload& compute() { return std::get<ComputePayload>(payload); }
  const TransferPayload& transfers() const { return std::get<TransferPayload>(payload); }
  TransferPayload& transfers() { return std::get<TransferPayload>(payload); }

  friend bool operator==(const Job&, const Job&) = default;
};

struct ExecutableWorkflow {
  std::vector<Job> jobs;
  std::vector<Edge> edges;
  std::map<std::string, ContainerDef> containers;  // containers referenced by jobs
  std::vector<Site> sites;
  PlanConfig config;

  const Job* find_job(std::string_view id) const;
  const Site* find_site(std::string_view name) const;
  std::size_t count(JobKind kind) const;

  friend bool operator==(const ExecutableWorkflow&, const ExecutableWorkflow&) = default;
};

// Staging-site url of a logical file: http://<site>/staging/<lfn>, or
// file:///<site>/staging/<lfn> for shared-filesystem staging sites.
std::string staging_url(const Site& staging, std::string_view lfn);
// File name of a staged image for a container (tar for docker, sif otherwise).
std::string image_file_name(const ContainerDef& c);

PlacementMode decide_placement(const ContainerDef& c, const Site& s,
                               std::optional<PlacementMode> override_mode = std::nullopt);

ExecutableWorkflow plan(const AbstractWorkflow& wf, const Catalog& cat, const std::vector<Site>& sites,
                        const PlanConfig& cfg);

// One ContainerFetch job per (container, staging site) with a transferable
// placement; existing fetch jobs are kept.
ExecutableWorkflow insert_container_fetch_jobs(ExecutableWorkflow ewf, const Catalog& cat,
                                               const std::vector<Site>& sites);

// Horizontal clustering: compute jobs sharing level, site, container and
// placement are merged in chunks of at most k. k == 1 returns ewf unchanged.
ExecutableWorkflow cluster_jobs(ExecutableWorkflow ewf, int k);

// The job graph as an AbstractWorkflow (jobs as tasks, no files), so it can be
// checked with validate_dag.
AbstractWorkflow job_graph(const ExecutableWorkflow& ewf);

std::map<JobKind, std::size_t> job_counts(const ExecutableWorkflow& ewf);

std::vector<Site> parse_sites(std::string_view yaml_text);
std::vector<Site> load_sites(const std::string& path);
PlanConfig parse_plan_config(std::string_view yaml_text, PlanConfig base = {});

std::string serialize_executable(const ExecutableWorkflow& ewf);
ExecutableWorkflow parse_executable(std::string_view json_text);
ExecutableWorkflow load_executable(const std::string& path);

}  // namespace cwms
