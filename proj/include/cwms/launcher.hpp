#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cwms/catalog.hpp"
#include "cwms/planner.hpp"

namespace cwms {

enum class StepKind {
  CreateJobDir,
  MaterializeImage,
  LoadImage,
  EnsureUser,
  StartContainer,
  WorkerSetup,
  EnvSetup,
  StageIn,
  LaunchTask,
  StageOut,
  StopContainer,
  UnloadImage,
  RemoveJobDir,
};

std::string_view to_string(StepKind k) noexcept;
StepKind parse_step_kind(std::string_view s);

struct Step {
  StepKind kind = StepKind::CreateJobDir;
  std::map<std::string, std::string> args;
  std::vector<FileTransfer> files;  // StageIn/StageOut payloads, image file for Materialize/LoadImage
  double runtime_s = 0.0;           // LaunchTask only

  friend bool operator==(const Step&, const Step&) = default;
};

// Job directory mount point inside the container for each backend.
std::string_view job_dir_mount_point(Runtime r) noexcept;

struct WrapperPlan {
  std::string job_id;
  std::string site;
  std::vector<Step> host_steps;
  std::vector<Step> container_steps;  // run inside the container at StartContainer
  std::optional<Runtime> backend;
  std::optional<PlacementMode> placement;
  std::string image;                  // image url, empty without container
  std::vector<MountSpec> mounts;      // job-dir mount first
  EnvMap env;
  bool staging_inside = true;
  bool docker_load_dedup = true;

  // Host steps with container steps spliced in after StartContainer.
  std::vector<Step> execution_order() const;

  friend bool operator==(const WrapperPlan&, const WrapperPlan&) = default;
};

// Throws RuntimeUnavailable (when `site` is given and lacks the runtime) or
// InconsistentPlacement.
WrapperPlan build_wrapper_plan(const Job& job, const ContainerDef* cdef, std::optional<PlacementMode> placement,
                               const PlanConfig& cfg, const Site* site = nullptr);

// Plans for every compute job of an executable workflow.
std::map<std::string, WrapperPlan> build_wrapper_plans(const ExecutableWorkflow& ewf);

// Deterministic bash script: header, then one stanza per step in execution order.
std::string render_wrapper(const WrapperPlan& plan);

enum class ExecMode { Mock, Real };
enum class JobStatus { Succeeded, Failed, NotRun };

std::string_view to_string(JobStatus s) noexcept;

struct FailureInjection {
  std::string job_id;  // empty = any job
  StepKind step = StepKind::StageIn;
};

struct ExecuteOptions {
  ExecMode mode = ExecMode::Mock;
  int slots = 4;              // max concurrently running jobs
  int nodes_per_site = 1;     // mock worker nodes per site, jobs assigned round-robin
  std::optional<FailureInjection> fail;
  std::filesystem::path work_dir;  // scratch area; a temp dir when empty
};

struct StepRecord {
  std::string job_id;
  StepKind kind = StepKind::CreateJobDir;
  std::string node;
  std::string effect;
  double wall_ms = 0.0;
};

struct JobRecord {
  std::string job_id;
  JobKind kind = JobKind::Compute;
  JobStatus status = JobStatus::NotRun;
  std::string node;
  std::string failed_step;
  std::string message;
  int exit_code = 0;
};

struct ExecutionReport {
  std::vector<JobRecord> jobs;                 // ewf job order
  std::vector<StepRecord> steps;               // recording order
  std::vector<std::string> completion_order;   // job ids as they finished
  std::size_t image_loads = 0;
  std::size_t image_cache_hits = 0;
  std::size_t registry_reads = 0;

  bool ok() const;
  const JobRecord* find(std::string_view job_id) const;
  std::string to_json() const;
};

// Runs the workflow in DAG order with at most opts.slots jobs in flight.
// Mock mode records every step; a failing step marks its job Failed and its
// descendants NotRun. Real mode throws MissingRuntime if a backend binary is
// absent from PATH.
ExecutionReport execute_local(const ExecutableWorkflow& ewf, const std::map<std::string, WrapperPlan>& plans,
                              const ExecuteOptions& opts);

}  // namespace cwms
