#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cwms/error.hpp"
#include "cwms/planner.hpp"

namespace cwms {

using nlohmann::json;

namespace {

json env_json(const EnvMap& env) {
  json j = json::object();
  for (const auto& [k, v] : env) j[k] = v;
  return j;
}

EnvMap env_from(const json& j) {
  EnvMap env;
  for (auto it = j.begin(); it != j.end(); ++it) env[it.key()] = it.value().get<std::string>();
  return env;
}

json transfer_json(const FileTransfer& t) {
  return json{{"lfn", t.lfn}, {"src", t.src}, {"dst", t.dst}, {"bytes", t.bytes},
              {"kind", std::string(to_string(t.kind))}, {"link", t.link}};
}

FileTransfer transfer_from(const json& j) {
  FileTransfer t;
  t.lfn = j.at("lfn").get<std::string>();
  t.src = j.at("src").get<std::string>();
  t.dst = j.at("dst").get<std::string>();
  t.bytes = j.at("bytes").get<std::uint64_t>();
  t.kind = parse_transfer_kind(j.at("kind").get<std::string>());
  t.link = j.at("link").get<bool>();
  return t;
}

json transfers_json(const std::vector<FileTransfer>& ts) {
  json arr = json::array();
  for (const auto& t : ts) arr.push_back(transfer_json(t));
  return arr;
}

std::vector<FileTransfer> transfers_from(const json& j) {
  std::vector<FileTransfer> out;
  for (const auto& t : j) out.push_back(transfer_from(t));
  return out;
}

json container_json(const ContainerDef& c) {
  json mounts = json::array();
  for (const auto& m : c.mounts) mounts.push_back(m.str());
  return json{{"name", c.name},
              {"image", c.image.url()},
              {"type", std::string(to_string(c.runtime))},
              {"mount", mounts},
              {"env", env_json(c.profiles)},
              {"image_size_bytes", c.image_size_bytes},
              {"site_local", c.site_local}};
}

ContainerDef container_from(const json& j) {
  ContainerDef c;
  c.name = j.at("name").get<std::string>();
  c.image = parse_image_url(j.at("image").get<std::string>());
  c.runtime = parse_runtime(j.at("type").get<std::string>());
  for (const auto& m : j.at("mount")) c.mounts.push_back(parse_mount_spec(m.get<std::string>()));
  c.profiles = env_from(j.at("env"));
  c.image_size_bytes = j.at("image_size_bytes").get<std::uint64_t>();
  c.site_local = j.at("site_local").get<bool>();
  return c;
}

json site_json(const Site& s) {
  json runtimes = json::array();
  for (auto r : s.runtimes_available) runtimes.push_back(std::string(to_string(r)));
  return json{{"name", s.name},
              {"shared_fs", s.shared_fs},
              {"staging_site", s.staging_site},
              {"worker_count", s.worker_count},
              {"slots_per_worker", s.slots_per_worker},
              {"runtimes", runtimes},
              {"cvmfs_paths", s.cvmfs_like_paths}};
}

Site site_from(const json& j) {
  Site s;
  s.name = j.at("name").get<std::string>();
  s.shared_fs = j.at("shared_fs").get<bool>();
  s.staging_site = j.at("staging_site").get<std::string>();
  s.worker_count = j.at("worker_count").get<int>();
  s.slots_per_worker = j.at("slots_per_worker").get<int>();
  for (const auto& r : j.at("runtimes")) s.runtimes_available.insert(parse_runtime(r.get<std::string>()));
  s.cvmfs_like_paths = j.at("cvmfs_paths").get<std::vector<std::string>>();
  return s;
}

json config_json(const PlanConfig& c) {
  return json{{"cluster_size", c.cluster_size},
              {"output_site", c.output_site},
              {"cleanup", c.cleanup},
              {"staging_inside_container", c.staging_inside_container},
              {"docker_load_dedup", c.docker_load_dedup},
              {"placement", c.placement_override ? std::string(to_string(*c.placement_override)) : "auto"}};
}

PlanConfig config_from(const json& j) {
  PlanConfig c;
  c.cluster_size = j.at("cluster_size").get<int>();
  c.output_site = j.at("output_site").get<std::string>();
  c.cleanup = j.at("cleanup").get<bool>();
  c.staging_inside_container = j.at("staging_inside_container").get<bool>();
  c.docker_load_dedup = j.at("docker_load_dedup").get<bool>();
  auto p = j.at("placement").get<std::string>();
  if (p != "auto") c.placement_override = parse_placement(p);
  return c;
}

json job_json(const Job& job) {
  json j{{"id", job.id}, {"kind", std::string(to_string(job.kind))}, {"site", job.site}};
  if (job.kind == JobKind::Compute) {
    const auto& cp = job.compute();
    json tasks = json::array();
    for (const auto& t : cp.tasks) {
      tasks.push_back(json{{"task", t.task_id},
                           {"transformation", t.transformation},
                           {"pfn", t.pfn},
                           {"type", std::string(to_string(t.install_type))},
                           {"runtime", t.runtime_s},
                           {"inputs", transfers_json(t.inputs)},
                           {"outputs", transfers_json(t.outputs)}});
    }
    j["tasks"] = tasks;
    j["container"] = cp.container ? json(*cp.container) : json(nullptr);
    j["placement"] = cp.placement ? json(std::string(to_string(*cp.placement))) : json(nullptr);
    j["image_source"] = cp.image_source;
    j["env"] = env_json(cp.env);
    j["level"] = cp.level;
  } else {
    const auto& tp = job.transfers();
    j["transfers"] = transfers_json(tp.transfers);
    j["container"] = tp.container ? json(*tp.container) : json(nullptr);
    j["registry_export"] = tp.registry_export;
  }
  return j;
}

Job job_from(const json& j) {
  Job job;
  job.id = j.at("id").get<std::string>();
  job.kind = parse_job_kind(j.at("kind").get<std::string>());
  job.site = j.at("site").get<std::string>();
  if (job.kind == JobKind::Compute) {
    ComputePayload cp;
    for (const auto& t : j.at("tasks")) {
      TaskInvocation inv;
      inv.task_id = t.at("task").get<std::string>();
      inv.transformation = t.at("transformation").get<std::string>();
      inv.pfn = t.at("pfn").get<std::string>();
      inv.install_type = parse_install_type(t.at("type").get<std::string>());
      inv.runtime_s = t.at("runtime").get<double>();
      inv.inputs = transfers_from(t.at("inputs"));
      inv.outputs = transfers_from(t.at("outputs"));
      cp.tasks.push_back(std::move(inv));
    }
    if (!j.at("container").is_null()) cp.container = j.at("container").get<std::string>();
    if (!j.at("placement").is_null()) cp.placement = parse_placement(j.at("placement").get<std::string>());
    cp.image_source = j.at("image_source").get<std::string>();
    cp.env = env_from(j.at("env"));
    cp.level = j.at("level").get<int>();
    job.payload = std::move(cp);
  } else {
    TransferPayload tp;
    tp.transfers = transfers_from(j.at("transfers"));
    if (!j.at("container").is_null()) tp.container = j.at("container").get<std::string>();
    tp.registry_export = j.at("registry_export").get<bool>();
    job.payload = std::move(tp);
  }
  return job;
}

}  // namespace

std::string serialize_executable(const ExecutableWorkflow& ewf) {
  json jobs = json::array();
  for (const auto& job : ewf.jobs) jobs.push_back(job_json(job));
  json edges = json::array();
  for (const auto& [a, b] : ewf.edges) edges.push_back(json::array({a, b}));
  json containers = json::array();
  for (const auto& [name, c] : ewf.containers) containers.push_back(container_json(c));
  json sites = json::array();
  for (const auto& s : ewf.sites) sites.push_back(site_json(s));
  json root{{"config", config_json(ewf.config)},
            {"sites", sites},
            {"containers", containers},
            {"jobs", jobs},
            {"edges", edges}};
  return root.dump(2) + "\n";
}

ExecutableWorkflow parse_executable(std::string_view json_text) {
  ExecutableWorkflow ewf;
  try {
    auto root = json::parse(json_text);
    ewf.config = config_from(root.at("config"));
    for (const auto& s : root.at("sites")) ewf.sites.push_back(site_from(s));
    for (const auto& c : root.at("containers")) {
      auto def = container_from(c);
      auto name = def.name;
      ewf.containers.emplace(name, std::move(def));
    }
    for (const auto& j : root.at("jobs")) ewf.jobs.push_back(job_from(j));
    for (const auto& e : root.at("edges")) ewf.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  return ewf;
}

ExecutableWorkflow load_executable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open executable workflow '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_executable(ss.str());
}

}  // namespace cwms
