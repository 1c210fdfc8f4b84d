#include "cwms/planner.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <yaml-cpp/yaml.h>

#include "cwms/error.hpp"

namespace cwms {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool path_under(std::string_view path, std::string_view root) {
  while (root.size() > 1 && root.back() == '/') root.remove_suffix(1);
  if (path.size() < root.size() || path.substr(0, root.size()) != root) return false;
  return path.size() == root.size() || path[root.size()] == '/' || root == "/";
}

std::string job_dir_url(std::string_view lfn) { return "file://${JOBDIR}/" + std::string(lfn); }

std::string output_url(std::string_view output_site, std::string_view lfn) {
  return "file:///" + std::string(output_site) + "/outputs/" + std::string(lfn);
}

std::string basename(std::string_view path) {
  auto pos = path.find_last_of('/');
  return std::string(pos == std::string_view::npos ? path : path.substr(pos + 1));
}

void check_sites(const std::vector<Site>& sites) {
  std::map<std::string, const Site*> by_name;
  for (const auto& s : sites) {
    if (s.name.empty()) throw Error(ErrorCode::InvalidConfig, "site with empty name");
    if (!by_name.emplace(s.name, &s).second) throw Error(ErrorCode::DuplicateName, "site '" + s.name + "'");
    if (s.worker_count < 1 || s.slots_per_worker < 1)
      throw Error(ErrorCode::InvalidConfig, "site '" + s.name + "' needs worker_count and slots_per_worker >= 1");
  }
  for (const auto& s : sites)
    if (!by_name.count(s.staging_site))
      throw Error(ErrorCode::InvalidConfig, "site '" + s.name + "' has unknown staging site '" + s.staging_site + "'");
}

void add_edge(std::vector<Edge>& edges, std::set<Edge>& seen, const std::string& a, const std::string& b) {
  if (a != b && seen.emplace(a, b).second) edges.emplace_back(a, b);
}

}  // namespace

std::string_view to_string(PlacementMode p) noexcept {
  switch (p) {
    case PlacementMode::StageCopy: return "StageCopy";
    case PlacementMode::SharedFsSymlink: return "SharedFsSymlink";
    case PlacementMode::Bypass: return "Bypass";
    case PlacementMode::ShifterLocal: return "ShifterLocal";
  }
  return "?";
}

std::string_view to_string(JobKind k) noexcept {
  switch (k) {
    case JobKind::ContainerFetch: return "ContainerFetch";
    case JobKind::StageIn: return "StageIn";
    case JobKind::Compute: return "Compute";
    case JobKind::StageOut: return "StageOut";
    case JobKind::Cleanup: return "Cleanup";
  }
  return "?";
}

PlacementMode parse_placement(std::string_view s) {
  auto v = lower(s);
  if (v == "copy" || v == "stagecopy") return PlacementMode::StageCopy;
  if (v == "symlink" || v == "sharedfssymlink") return PlacementMode::SharedFsSymlink;
  if (v == "bypass") return PlacementMode::Bypass;
  if (v == "shifter" || v == "shifterlocal") return PlacementMode::ShifterLocal;
  throw Error(ErrorCode::InvalidConfig, "unknown placement '" + std::string(s) + "'");
}

JobKind parse_job_kind(std::string_view s) {
  for (auto k : {JobKind::ContainerFetch, JobKind::StageIn, JobKind::Compute, JobKind::StageOut, JobKind::Cleanup})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::SyntaxError, "unknown job kind '" + std::string(s) + "'");
}

const Job* ExecutableWorkflow::find_job(std::string_view id) const {
  for (const auto& j : jobs)
    if (j.id == id) return &j;
  return nullptr;
}

const Site* ExecutableWorkflow::find_site(std::string_view name) const {
  for (const auto& s : sites)
    if (s.name == name) return &s;
  return nullptr;
}

std::size_t ExecutableWorkflow::count(JobKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(jobs.begin(), jobs.end(), [kind](const Job& j) { return j.kind == kind; }));
}

std::string staging_url(const Site& staging, std::string_view lfn) {
  if (staging.shared_fs) return "file:///" + staging.name + "/staging/" + std::string(lfn);
  return "http://" + staging.name + "/staging/" + std::string(lfn);
}

std::string image_file_name(const ContainerDef& c) {
  return c.name + (c.runtime == Runtime::Docker ? ".tar" : ".sif");
}

PlacementMode decide_placement(const ContainerDef& c, const Site& s, std::optional<PlacementMode> override_mode) {
  if (!s.runtimes_available.count(c.runtime))
    throw Error(ErrorCode::RuntimeUnavailable,
                std::string(to_string(c.runtime)) + " is not available at site '" + s.name + "'");
  if (c.runtime == Runtime::Shifter) return PlacementMode::ShifterLocal;
  if (override_mode) {
    switch (*override_mode) {
      case PlacementMode::StageCopy:
        return PlacementMode::StageCopy;
      case PlacementMode::SharedFsSymlink:
        if (!s.shared_fs)
          throw Error(ErrorCode::InconsistentPlacement, "site '" + s.name + "' has no shared filesystem");
        return PlacementMode::SharedFsSymlink;
      case PlacementMode::Bypass:
        if (!c.site_local)
          throw Error(ErrorCode::InconsistentPlacement, "container '" + c.name + "' is not site-local");
        return PlacementMode::Bypass;
      case PlacementMode::ShifterLocal:
        throw Error(ErrorCode::InconsistentPlacement, "container '" + c.name + "' is not a shifter image");
    }
  }
  if (c.site_local && c.image.scheme == ImageScheme::File) {
    for (const auto& root : s.cvmfs_like_paths)
      if (path_under(c.image.locator, root)) return PlacementMode::Bypass;
  }
  if (s.shared_fs) return PlacementMode::SharedFsSymlink;
  return PlacementMode::StageCopy;
}

ExecutableWorkflow insert_container_fetch_jobs(ExecutableWorkflow ewf, const Catalog& cat,
                                               const std::vector<Site>& sites) {
  std::map<std::string, const Site*> site_by_name;
  for (const auto& s : sites) site_by_name[s.name] = &s;

  std::set<Edge> seen(ewf.edges.begin(), ewf.edges.end());
  std::vector<Job> fetches;
  std::set<std::string> existing;
  for (const auto& j : ewf.jobs)
    if (j.kind == JobKind::ContainerFetch) existing.insert(j.id);

  for (const auto& job : ewf.jobs) {
    if (job.kind != JobKind::Compute) continue;
    const auto& cp = job.compute();
    if (!cp.container || !cp.placement || !needs_fetch(*cp.placement)) continue;
    auto site_it = site_by_name.find(job.site);
    if (site_it == site_by_name.end()) throw Error(ErrorCode::InvalidConfig, "unknown site '" + job.site + "'");
    const auto& staging_name = site_it->second->staging_site;
    auto staging_it = site_by_name.find(staging_name);
    if (staging_it == site_by_name.end())
      throw Error(ErrorCode::InvalidConfig, "unknown staging site '" + staging_name + "'");

    auto fetch_id = "fetch_" + *cp.container + "_" + staging_name;
    if (!existing.count(fetch_id)) {
      const ContainerDef* c = nullptr;
      if (auto it = ewf.containers.find(*cp.container); it != ewf.containers.end()) c = &it->second;
      if (!c) c = cat.find_container(*cp.container);
      if (!c) throw Error(ErrorCode::DanglingContainerRef, *cp.container);
      ewf.containers.emplace(c->name, *c);

      Job fetch;
      fetch.id = fetch_id;
      fetch.kind = JobKind::ContainerFetch;
      fetch.site = staging_name;
      TransferPayload tp;
      tp.container = c->name;
      tp.registry_export = c->image.is_registry();
      auto file = image_file_name(*c);
      tp.transfers.push_back(FileTransfer{file, c->image.url(), staging_url(*staging_it->second, file),
                                          c->image_size_bytes, TransferKind::ContainerImage, false});
      fetch.payload = std::move(tp);
      fetches.push_back(std::move(fetch));
      existing.insert(fetch_id);
    }
    add_edge(ewf.edges, seen, fetch_id, job.id);
  }
  ewf.jobs.insert(ewf.jobs.begin(), std::make_move_iterator(fetches.begin()),
                  std::make_move_iterator(fetches.end()));
  return ewf;
}

ExecutableWorkflow cluster_jobs(ExecutableWorkflow ewf, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "cluster size must be >= 1");
  if (k == 1) return ewf;

  using Key = std::tuple<int, std::string, std::string, int>;
  std::vector<Key> group_order;
  std::map<Key, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ewf.jobs.size(); ++i) {
    const auto& j = ewf.jobs[i];
    if (j.kind != JobKind::Compute) continue;
    const auto& cp = j.compute();
    Key key{cp.level, j.site, cp.container.value_or(""), cp.placement ? static_cast<int>(*cp.placement) : -1};
    if (!groups.count(key)) group_order.push_back(key);
    groups[key].push_back(i);
  }

  std::unordered_map<std::string, std::string> rename;
  std::map<std::size_t, Job> merged_at;  // index of first member -> merged job
  std::set<std::size_t> absorbed;
  int serial = 0;
  for (const auto& key : group_order) {
    const auto& members = groups[key];
    for (std::size_t start = 0; start < members.size(); start += static_cast<std::size_t>(k)) {
      auto end = std::min(members.size(), start + static_cast<std::size_t>(k));
      if (end - start == 1) continue;
      const auto& first = ewf.jobs[members[start]];
      Job merged;
      merged.id = "cluster_L" + std::to_string(std::get<0>(key)) + "_" + std::to_string(serial++);
      merged.kind = JobKind::Compute;
      merged.site = first.site;
      ComputePayload cp = first.compute();
      cp.tasks.clear();
      for (auto m = start; m < end; ++m) {
        const auto& member = ewf.jobs[members[m]];
        const auto& mp = member.compute();
        cp.tasks.insert(cp.tasks.end(), mp.tasks.begin(), mp.tasks.end());
        for (const auto& [kv, vv] : mp.env) cp.env.emplace(kv, vv);
        rename[member.id] = merged.id;
        if (m != start) absorbed.insert(members[m]);
      }
      merged.payload = std::move(cp);
      merged_at.emplace(members[start], std::move(merged));
    }
  }

  std::vector<Job> jobs;
  jobs.reserve(ewf.jobs.size() - absorbed.size());
  for (std::size_t i = 0; i < ewf.jobs.size(); ++i) {
    if (absorbed.count(i)) continue;
    if (auto it = merged_at.find(i); it != merged_at.end()) jobs.push_back(std::move(it->second));
    else jobs.push_back(std::move(ewf.jobs[i]));
  }
  ewf.jobs = std::move(jobs);

  auto mapped = [&](const std::string& id) {
    auto it = rename.find(id);
    return it == rename.end() ? id : it->second;
  };
  std::vector<Edge> edges;
  std::set<Edge> seen;
  for (const auto& [a, b] : ewf.edges) add_edge(edges, seen, mapped(a), mapped(b));
  ewf.edges = std::move(edges);
  return ewf;
}

ExecutableWorkflow plan(const AbstractWorkflow& wf, const Catalog& cat, const std::vector<Site>& sites,
                        const PlanConfig& cfg) {
  validate_dag(wf);
  check_sites(sites);
  if (cfg.cluster_size < 1) throw Error(ErrorCode::InvalidConfig, "cluster_size must be >= 1");

  ExecutableWorkflow ewf;
  ewf.config = cfg;
  ewf.sites = sites;
  if (wf.tasks.empty()) return ewf;

  std::map<std::string, const Site*> site_by_name;
  for (const auto& s : sites) site_by_name[s.name] = &s;
  if (!site_by_name.count(cfg.output_site))
    throw Error(ErrorCode::InvalidConfig, "unknown output site '" + cfg.output_site + "'");

  auto order = topological_order(wf);
  auto levels = topological_levels(wf);

  std::map<std::string, std::string> producer;  // lfn -> task id
  for (const auto& t : wf.tasks)
    for (const auto& f : t.outputs) producer[f] = t.id;

  std::map<std::string, std::string> job_of;      // task id -> job id
  std::map<std::string, const Site*> staging_of;  // task id -> staging site
  std::size_t round_robin = 0;

  for (const auto& task_id : order) {
    const auto& task = *wf.find_task(task_id);
    struct Candidate {
      const Site* site;
      ResolvedTransformation rt;
    };
    std::vector<Candidate> eligible;
    bool resolvable = false;
    for (const auto& s : sites) {
      ResolvedTransformation rt;
      try {
        rt = resolve_transformation(cat, task.transformation, s.name);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NotFound) continue;
        throw;
      }
      resolvable = true;
      if (rt.container && !s.runtimes_available.count(rt.container->runtime)) continue;
      eligible.push_back({&s, rt});
    }
    if (!resolvable)
      throw Error(ErrorCode::UnresolvableTransformation,
                  "'" + task.transformation + "' of task '" + task.id + "' is not defined at any site");
    if (eligible.empty())
      throw Error(ErrorCode::RuntimeUnavailable,
                  "no site offers the container runtime needed by task '" + task.id + "'");

    const auto& pick = eligible[round_robin++ % eligible.size()];
    const Site& site = *pick.site;
    const Site& staging = *site_by_name.at(site.staging_site);
    const auto& entry = *pick.rt.entry;

    TaskInvocation inv;
    inv.task_id = task.id;
    inv.transformation = task.transformation;
    inv.pfn = entry.pfn;
    inv.install_type = entry.install_type;
    inv.runtime_s = task.expected_runtime_s;
    for (const auto& f : task.inputs) {
      auto meta = wf.file(f);
      // Produced files live at the producer's staging site.
      const Site* where = &staging;
      if (auto p = producer.find(f); p != producer.end()) where = staging_of.at(p->second);
      bool link = site.shared_fs && where->shared_fs;
      inv.inputs.push_back(FileTransfer{f, staging_url(*where, f), job_dir_url(f), meta.size_bytes,
                                        TransferKind::Data, link});
    }
    if (entry.install_type == InstallType::Stageable) {
      auto exe = basename(entry.pfn);
      inv.inputs.push_back(FileTransfer{exe, entry.pfn, job_dir_url(exe), kDefaultFileSize,
                                        TransferKind::Executable, false});
    }
    for (const auto& f : task.outputs) {
      inv.outputs.push_back(FileTransfer{f, job_dir_url(f), staging_url(staging, f), wf.file(f).size_bytes,
                                         TransferKind::Data, false});
    }

    ComputePayload cp;
    cp.level = levels.at(task.id);
    cp.env = entry.profiles;
    if (const auto* c = pick.rt.container) {
      cp.container = c->name;
      auto placement = decide_placement(*c, site, cfg.placement_override);
      cp.placement = placement;
      switch (placement) {
        case PlacementMode::StageCopy:
        case PlacementMode::SharedFsSymlink: cp.image_source = staging_url(staging, image_file_name(*c)); break;
        case PlacementMode::Bypass: cp.image_source = c->image.locator; break;
        case PlacementMode::ShifterLocal: cp.image_source = c->image.url(); break;
      }
      ewf.containers.emplace(c->name, *c);
    }
    cp.tasks.push_back(std::move(inv));

    Job job;
    job.id = "compute_" + task.id;
    job.kind = JobKind::Compute;
    job.site = site.name;
    job.payload = std::move(cp);
    job_of[task.id] = job.id;
    staging_of[task.id] = &staging;
    ewf.jobs.push_back(std::move(job));
  }

  std::set<Edge> seen;
  for (const auto& [p, c] : dependency_edges(wf)) add_edge(ewf.edges, seen, job_of.at(p), job_of.at(c));

  ewf = insert_container_fetch_jobs(std::move(ewf), cat, sites);
  seen = std::set<Edge>(ewf.edges.begin(), ewf.edges.end());

  // Consumers of every logical file, by job id.
  std::map<std::string, std::vector<std::string>> consumers;
  for (const auto& t : wf.tasks)
    for (const auto& f : t.inputs) consumers[f].push_back(job_of.at(t.id));

  // Stage-in: workflow inputs to each consumer's staging site.
  std::vector<std::string> staging_order;
  std::map<std::string, Job> stage_ins;
  std::map<std::string, std::set<std::string>> staged_files;  // staging site -> lfns
  for (const auto& task_id : order) {
    const auto& task = *wf.find_task(task_id);
    const Site& staging = *staging_of.at(task_id);
    for (const auto& f : task.inputs) {
      if (producer.count(f)) continue;
      auto meta = wf.file(f);
      auto dst = staging_url(staging, f);
      if (!meta.initial_location || *meta.initial_location == dst) continue;
      auto id = "stage_in_" + staging.name;
      auto [it, fresh] = stage_ins.try_emplace(staging.name);
      if (fresh) {
        staging_order.push_back(staging.name);
        it->second.id = id;
        it->second.kind = JobKind::StageIn;
        it->second.site = staging.name;
        it->second.payload = TransferPayload{};
      }
      if (staged_files[staging.name].insert(f).second) {
        it->second.transfers().transfers.push_back(
            FileTransfer{f, *meta.initial_location, dst, meta.size_bytes, TransferKind::Data, false});
      }
      add_edge(ewf.edges, seen, id, job_of.at(task_id));
    }
  }
  std::vector<Job> aux;
  for (const auto& s : staging_order) aux.push_back(std::move(stage_ins.at(s)));
  // Stage-in jobs go right after the fetch jobs.
  auto first_compute = std::find_if(ewf.jobs.begin(), ewf.jobs.end(),
                                    [](const Job& j) { return j.kind == JobKind::Compute; });
  ewf.jobs.insert(first_compute, std::make_move_iterator(aux.begin()), std::make_move_iterator(aux.end()));

  // Stage-out: workflow outputs grouped by (staging site, producer level).
  const auto outputs = workflow_outputs(wf);
  std::set<std::string> output_set(outputs.begin(), outputs.end());
  using GroupKey = std::pair<std::string, int>;
  std::map<GroupKey, Job> stage_outs;
  std::map<GroupKey, std::vector<std::string>> produced_in_group;  // lfns by group
  for (const auto& task_id : order) {
    const auto& task = *wf.find_task(task_id);
    const Site& staging = *staging_of.at(task_id);
    GroupKey key{staging.name, levels.at(task_id)};
    for (const auto& f : task.outputs) {
      produced_in_group[key].push_back(f);
      if (!output_set.count(f)) continue;
      auto id = "stage_out_" + staging.name + "_L" + std::to_string(key.second);
      auto [it, fresh] = stage_outs.try_emplace(key);
      if (fresh) {
        it->second.id = id;
        it->second.kind = JobKind::StageOut;
        it->second.site = staging.name;
        it->second.payload = TransferPayload{};
      }
      it->second.transfers().transfers.push_back(FileTransfer{f, staging_url(staging, f),
                                                              output_url(cfg.output_site, f),
                                                              wf.file(f).size_bytes, TransferKind::Data, false});
      add_edge(ewf.edges, seen, job_of.at(task_id), id);
    }
  }
  for (auto& [key, job] : stage_outs) ewf.jobs.push_back(std::move(job));

  if (cfg.cleanup) {
    auto add_cleanup = [&](const std::string& id, const std::string& site, std::vector<FileTransfer> files,
                           const std::set<std::string>& after) {
      if (files.empty()) return;
      Job job;
      job.id = id;
      job.kind = JobKind::Cleanup;
      job.site = site;
      job.payload = TransferPayload{std::move(files), std::nullopt, false};
      for (const auto& a : after) add_edge(ewf.edges, seen, a, id);
      ewf.jobs.push_back(std::move(job));
    };
    for (const auto& s : staging_order) {
      std::vector<FileTransfer> files;
      std::set<std::string> after{"stage_in_" + s};
      for (const auto& f : staged_files[s]) {
        files.push_back(FileTransfer{f, staging_url(*site_by_name.at(s), f), "", wf.file(f).size_bytes,
                                     TransferKind::Data, false});
        for (const auto& c : consumers[f]) after.insert(c);
      }
      add_cleanup("cleanup_" + s + "_inputs", s, std::move(files), after);
    }
    for (const auto& [key, lfns] : produced_in_group) {
      std::vector<FileTransfer> files;
      std::set<std::string> after;
      for (const auto& f : lfns) {
        files.push_back(FileTransfer{f, staging_url(*site_by_name.at(key.first), f), "", wf.file(f).size_bytes,
                                     TransferKind::Data, false});
        after.insert(job_of.at(producer.at(f)));
        for (const auto& c : consumers[f]) after.insert(c);
      }
      if (auto so = stage_outs.find(key); so != stage_outs.end())
        after.insert("stage_out_" + key.first + "_L" + std::to_string(key.second));
      add_cleanup("cleanup_" + key.first + "_L" + std::to_string(key.second), key.first, std::move(files), after);
    }
    // Staged container images, once all their users are done.
    std::map<std::string, std::vector<FileTransfer>> images;
    std::map<std::string, std::set<std::string>> image_after;
    for (const auto& j : ewf.jobs) {
      if (j.kind != JobKind::ContainerFetch) continue;
      for (const auto& t : j.transfers().transfers) images[j.site].push_back(FileTransfer{
          t.lfn, t.dst, "", t.bytes, TransferKind::ContainerImage, false});
      image_after[j.site].insert(j.id);
    }
    for (const auto& [a, b] : ewf.edges) {
      const auto* from = ewf.find_job(a);
      if (from && from->kind == JobKind::ContainerFetch) image_after[from->site].insert(b);
    }
    for (auto& [site, files] : images) add_cleanup("cleanup_" + site + "_images", site, std::move(files), image_after[site]);
  }

  return cluster_jobs(std::move(ewf), cfg.cluster_size);
}

AbstractWorkflow job_graph(const ExecutableWorkflow& ewf) {
  AbstractWorkflow wf;
  for (const auto& j : ewf.jobs) {
    Task t;
    t.id = j.id;
    t.transformation = std::string(to_string(j.kind));
    wf.tasks.push_back(std::move(t));
  }
  wf.edges = ewf.edges;
  return wf;
}

std::map<JobKind, std::size_t> job_counts(const ExecutableWorkflow& ewf) {
  std::map<JobKind, std::size_t> out;
  for (auto k : {JobKind::ContainerFetch, JobKind::StageIn, JobKind::Compute, JobKind::StageOut, JobKind::Cleanup})
    out[k] = 0;
  for (const auto& j : ewf.jobs) ++out[j.kind];
  return out;
}

std::vector<Site> parse_sites(std::string_view yaml_text) {
  std::vector<Site> sites;
  try {
    auto root = YAML::Load(std::string(yaml_text));
    if (root.IsMap() && root["sites"]) root = root["sites"];
    if (root.IsNull()) return sites;
    if (!root.IsSequence()) throw Error(ErrorCode::SyntaxError, "sites document must be a list");
    for (const auto& n : root) {
      Site s;
      s.name = n["name"].as<std::string>();
      s.shared_fs = n["shared_fs"] ? n["shared_fs"].as<bool>() : false;
      s.staging_site = n["staging_site"] ? n["staging_site"].as<std::string>() : s.name;
      s.worker_count = n["worker_count"] ? n["worker_count"].as<int>() : 1;
      s.slots_per_worker = n["slots_per_worker"] ? n["slots_per_worker"].as<int>() : 1;
      if (auto r = n["runtimes"]; r && !r.IsNull())
        for (const auto& v : r) s.runtimes_available.insert(parse_runtime(v.as<std::string>()));
      if (auto p = n["cvmfs_paths"]; p && !p.IsNull())
        for (const auto& v : p) s.cvmfs_like_paths.push_back(v.as<std::string>());
      sites.push_back(std::move(s));
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  return sites;
}

std::vector<Site> load_sites(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open sites file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sites(ss.str());
}

PlanConfig parse_plan_config(std::string_view yaml_text, PlanConfig cfg) {
  auto on_off = [](const YAML::Node& n) {
    auto v = lower(n.as<std::string>());
    if (v == "on" || v == "true" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "no") return false;
    throw Error(ErrorCode::InvalidConfig, "expected on|off, got '" + v + "'");
  };
  try {
    auto root = YAML::Load(std::string(yaml_text));
    if (root.IsNull()) return cfg;
    if (!root.IsMap()) throw Error(ErrorCode::SyntaxError, "plan config must be a map");
    for (const auto& kv : root) {
      auto key = kv.first.as<std::string>();
      if (key == "cluster_size") cfg.cluster_size = kv.second.as<int>();
      else if (key == "output_site") cfg.output_site = kv.second.as<std::string>();
      else if (key == "cleanup") cfg.cleanup = on_off(kv.second);
      else if (key == "staging_inside_container") cfg.staging_inside_container = on_off(kv.second);
      else if (key == "docker_load_dedup") cfg.docker_load_dedup = on_off(kv.second);
      else if (key == "placement") {
        auto v = lower(kv.second.as<std::string>());
        cfg.placement_override = v == "auto" ? std::nullopt : std::optional(parse_placement(v));
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown plan config key '" + key + "'");
      }
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  return cfg;
}

}  // namespace cwms
