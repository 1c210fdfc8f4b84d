#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cwms {

inline constexpr double kDefaultRuntimeSeconds = 1.0;
inline constexpr std::uint64_t kDefaultFileSize = 1'000'000;

struct FileMeta {
  std::string name;
  std::uint64_t size_bytes = kDefaultFileSize;
  // Required for workflow inputs (files nobody produces).
  std::optional<std::string> initial_location;

  friend bool operator==(const FileMeta&, const FileMeta&) = default;
};

struct Task {
  std::string id;
  std::string transformation;  // "namespace::name:version"
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double expected_runtime_s = kDefaultRuntimeSeconds;

  friend bool operator==(const Task&, const Task&) = default;
};

using Edge = std::pair<std::string, std::string>;

struct AbstractWorkflow {
  std::vector<Task> tasks;
  std::vector<Edge> edges;  // explicit (parent, child) control edges
  std::map<std::string, FileMeta> files;

  const Task* find_task(std::string_view id) const;
  // Metadata for a logical file, falling back to defaults when undeclared.
  FileMeta file(const std::string& name) const;

  friend bool operator==(const AbstractWorkflow&, const AbstractWorkflow&) = default;
};

// Throws cwms::Error (CycleDetected, DanglingEdge, MultipleProducers, OrphanInput,
// DuplicateName, InvalidTask). Pure; calling it twice gives the same answer.
void validate_dag(const AbstractWorkflow& wf);

// Explicit edges plus producer->consumer data edges, deduplicated, sorted by
// task declaration order. Does not validate.
std::vector<Edge> dependency_edges(const AbstractWorkflow& wf);

// Returns one cycle as a task-id path whose first and last element coincide,
// or an empty vector for an acyclic graph.
std::vector<std::string> find_cycle(const AbstractWorkflow& wf);

// Roots are level 0; level(t) = 1 + max(level(parent)). Throws CycleDetected.
std::map<std::string, int> topological_levels(const AbstractWorkflow& wf);

// Kahn order; ties broken by task declaration order.
std::vector<std::string> topological_order(const AbstractWorkflow& wf);

// Files consumed by some task and produced by none.
std::vector<std::string> workflow_inputs(const AbstractWorkflow& wf);
// Files produced by some task and consumed by none.
std::vector<std::string> workflow_outputs(const AbstractWorkflow& wf);

AbstractWorkflow parse_workflow(std::string_view yaml_text);
AbstractWorkflow load_workflow(const std::string& path);
std::string serialize_workflow(const AbstractWorkflow& wf);

}  // namespace cwms
