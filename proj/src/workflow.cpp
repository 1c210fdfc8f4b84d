#include "cwms/workflow.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include <yaml-cpp/yaml.h>

#include "cwms/error.hpp"

namespace cwms {

namespace {

struct Graph {
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::vector<std::size_t>> parents;
};

std::unordered_map<std::string, std::size_t> index_tasks(const AbstractWorkflow& wf) {
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < wf.tasks.size(); ++i) idx.emplace(wf.tasks[i].id, i);
  return idx;
}

Graph build_graph(const AbstractWorkflow& wf) {
  auto idx = index_tasks(wf);
  Graph g;
  g.children.resize(wf.tasks.size());
  g.parents.resize(wf.tasks.size());
  for (const auto& [p, c] : dependency_edges(wf)) {
    auto a = idx.at(p), b = idx.at(c);
    g.children[a].push_back(b);
    g.parents[b].push_back(a);
  }
  return g;
}

std::string join_path(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += " -> ";
    out += ids[i];
  }
  return out;
}

std::vector<std::string> string_list(const YAML::Node& n, const char* what) {
  std::vector<std::string> out;
  if (!n || n.IsNull()) return out;
  if (!n.IsSequence()) throw Error(ErrorCode::SyntaxError, std::string(what) + " must be a list");
  for (const auto& v : n) out.push_back(v.Scalar());
  return out;
}

}  // namespace

const Task* AbstractWorkflow::find_task(std::string_view id) const {
  for (const auto& t : tasks)
    if (t.id == id) return &t;
  return nullptr;
}

FileMeta AbstractWorkflow::file(const std::string& name) const {
  auto it = files.find(name);
  if (it != files.end()) return it->second;
  return FileMeta{name, kDefaultFileSize, std::nullopt};
}

std::vector<Edge> dependency_edges(const AbstractWorkflow& wf) {
  auto idx = index_tasks(wf);
  std::map<std::string, std::string> producer;
  for (const auto& t : wf.tasks)
    for (const auto& f : t.outputs) producer.emplace(f, t.id);

  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [p, c] : wf.edges) {
    auto a = idx.find(p), b = idx.find(c);
    if (a != idx.end() && b != idx.end()) pairs.emplace(a->second, b->second);
  }
  for (std::size_t i = 0; i < wf.tasks.size(); ++i) {
    for (const auto& f : wf.tasks[i].inputs) {
      auto it = producer.find(f);
      if (it != producer.end()) pairs.emplace(idx.at(it->second), i);
    }
  }
  std::vector<Edge> out;
  out.reserve(pairs.size());
  for (auto [a, b] : pairs) out.emplace_back(wf.tasks[a].id, wf.tasks[b].id);
  return out;
}

std::vector<std::string> find_cycle(const AbstractWorkflow& wf) {
  auto g = build_graph(wf);
  const auto n = wf.tasks.size();
  enum Color : char { White, Grey, Black };
  std::vector<Color> color(n, White);
  std::vector<std::size_t> parent(n, n);

  // Iterative DFS; a grey->grey edge closes a cycle.
  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != White) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    color[root] = Grey;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < g.children[u].size()) {
        auto v = g.children[u][next++];
        if (color[v] == Grey) {
          std::vector<std::string> cycle{wf.tasks[v].id};
          std::vector<std::string> back;
          for (auto w = u; w != v; w = parent[w]) back.push_back(wf.tasks[w].id);
          cycle.insert(cycle.end(), back.rbegin(), back.rend());
          cycle.push_back(wf.tasks[v].id);
          return cycle;
        }
        if (color[v] == White) {
          color[v] = Grey;
          parent[v] = u;
          stack.emplace_back(v, 0);
        }
      } else {
        color[u] = Black;
        stack.pop_back();
      }
    }
  }
  return {};
}

void validate_dag(const AbstractWorkflow& wf) {
  std::set<std::string> ids;
  for (const auto& t : wf.tasks) {
    if (t.id.empty()) throw Error(ErrorCode::InvalidTask, "task with empty id");
    if (!ids.insert(t.id).second) throw Error(ErrorCode::DuplicateName, "task id '" + t.id + "' repeated");
    if (!(t.expected_runtime_s >= 0.0))
      throw Error(ErrorCode::InvalidTask, "task '" + t.id + "' has negative runtime");
    std::set<std::string> in(t.inputs.begin(), t.inputs.end());
    for (const auto& f : t.outputs)
      if (in.count(f)) throw Error(ErrorCode::InvalidTask, "task '" + t.id + "' reads and writes '" + f + "'");
  }
  for (const auto& [p, c] : wf.edges) {
    if (!ids.count(p) || !ids.count(c))
      throw Error(ErrorCode::DanglingEdge, "edge " + p + " -> " + c + " references an unknown task");
  }
  std::map<std::string, std::string> producer;
  for (const auto& t : wf.tasks) {
    for (const auto& f : t.outputs) {
      auto [it, fresh] = producer.emplace(f, t.id);
      if (!fresh)
        throw Error(ErrorCode::MultipleProducers, "file '" + f + "' produced by '" + it->second + "' and '" + t.id + "'");
    }
  }
  for (const auto& t : wf.tasks) {
    for (const auto& f : t.inputs) {
      if (producer.count(f)) continue;
      auto meta = wf.files.find(f);
      if (meta == wf.files.end() || !meta->second.initial_location)
        throw Error(ErrorCode::OrphanInput, "input '" + f + "' of task '" + t.id + "' has no producer or location");
    }
  }
  auto cycle = find_cycle(wf);
  if (!cycle.empty()) throw Error(ErrorCode::CycleDetected, join_path(cycle));
}

std::vector<std::string> topological_order(const AbstractWorkflow& wf) {
  auto g = build_graph(wf);
  const auto n = wf.tasks.size();
  std::vector<std::size_t> indeg(n);
  for (std::size_t i = 0; i < n; ++i) indeg[i] = g.parents[i].size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push(i);
  std::vector<std::string> order;
  order.reserve(n);
  while (!ready.empty()) {
    auto u = ready.top();
    ready.pop();
    order.push_back(wf.tasks[u].id);
    for (auto v : g.children[u])
      if (--indeg[v] == 0) ready.push(v);
  }
  if (order.size() != n) throw Error(ErrorCode::CycleDetected, join_path(find_cycle(wf)));
  return order;
}

std::map<std::string, int> topological_levels(const AbstractWorkflow& wf) {
  auto order = topological_order(wf);
  auto idx = index_tasks(wf);
  auto g = build_graph(wf);
  std::vector<int> level(wf.tasks.size(), 0);
  for (const auto& id : order) {
    auto u = idx.at(id);
    for (auto p : g.parents[u]) level[u] = std::max(level[u], level[p] + 1);
  }
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < wf.tasks.size(); ++i) out[wf.tasks[i].id] = level[i];
  return out;
}

std::vector<std::string> workflow_inputs(const AbstractWorkflow& wf) {
  std::set<std::string> produced;
  for (const auto& t : wf.tasks) produced.insert(t.outputs.begin(), t.outputs.end());
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : wf.tasks)
    for (const auto& f : t.inputs)
      if (!produced.count(f) && seen.insert(f).second) out.push_back(f);
  return out;
}

std::vector<std::string> workflow_outputs(const AbstractWorkflow& wf) {
  std::set<std::string> consumed;
  for (const auto& t : wf.tasks) consumed.insert(t.inputs.begin(), t.inputs.end());
  std::vector<std::string> out;
  for (const auto& t : wf.tasks)
    for (const auto& f : t.outputs)
      if (!consumed.count(f)) out.push_back(f);
  return out;
}

AbstractWorkflow parse_workflow(std::string_view yaml_text) {
  AbstractWorkflow wf;
  try {
    auto root = YAML::Load(std::string(yaml_text));
    if (root.IsNull()) return wf;
    if (!root.IsMap()) throw Error(ErrorCode::SyntaxError, "workflow document must be a map");
    if (auto tasks = root["tasks"]; tasks && !tasks.IsNull()) {
      for (const auto& t : tasks) {
        Task task;
        task.id = t["id"].as<std::string>();
        task.transformation = t["transformation"].as<std::string>();
        task.inputs = string_list(t["inputs"], "inputs");
        task.outputs = string_list(t["outputs"], "outputs");
        if (auto rt = t["runtime"]; rt && !rt.IsNull()) task.expected_runtime_s = rt.as<double>();
        wf.tasks.push_back(std::move(task));
      }
    }
    if (auto edges = root["edges"]; edges && !edges.IsNull()) {
      for (const auto& e : edges) {
        if (e.IsSequence() && e.size() == 2) {
          wf.edges.emplace_back(e[0].as<std::string>(), e[1].as<std::string>());
        } else if (e.IsMap()) {
          wf.edges.emplace_back(e["parent"].as<std::string>(), e["child"].as<std::string>());
        } else {
          throw Error(ErrorCode::SyntaxError, "edge must be [parent, child] or {parent, child}");
        }
      }
    }
    if (auto files = root["files"]; files && !files.IsNull()) {
      for (const auto& f : files) {
        FileMeta meta;
        meta.name = f["name"].as<std::string>();
        if (auto sz = f["size"]; sz && !sz.IsNull()) {
          auto v = sz.as<long long>();
          if (v < 0) throw Error(ErrorCode::SyntaxError, "file '" + meta.name + "' has negative size");
          meta.size_bytes = static_cast<std::uint64_t>(v);
        }
        if (auto loc = f["location"]; loc && !loc.IsNull()) meta.initial_location = loc.as<std::string>();
        auto name = meta.name;
        if (!wf.files.emplace(name, std::move(meta)).second)
          throw Error(ErrorCode::DuplicateName, "file '" + name + "' declared twice");
      }
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  return wf;
}

AbstractWorkflow load_workflow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open workflow '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_workflow(ss.str());
}

std::string serialize_workflow(const AbstractWorkflow& wf) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "tasks" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : wf.tasks) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << t.id;
    out << YAML::Key << "transformation" << YAML::Value << t.transformation;
    out << YAML::Key << "inputs" << YAML::Value << YAML::Flow << t.inputs;
    out << YAML::Key << "outputs" << YAML::Value << YAML::Flow << t.outputs;
    out << YAML::Key << "runtime" << YAML::Value << t.expected_runtime_s;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "edges" << YAML::Value << YAML::BeginSeq;
  for (const auto& [p, c] : wf.edges) out << YAML::Flow << YAML::BeginSeq << p << c << YAML::EndSeq;
  out << YAML::EndSeq;
  out << YAML::Key << "files" << YAML::Value << YAML::BeginSeq;
  for (const auto& [name, f] : wf.files) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << f.name;
    out << YAML::Key << "size" << YAML::Value << f.size_bytes;
    if (f.initial_location) out << YAML::Key << "location" << YAML::Value << *f.initial_location;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace cwms
