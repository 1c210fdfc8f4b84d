#include "cwms/launcher.hpp"

#include <set>
#include <sstream>

#include "cwms/error.hpp"

namespace cwms {

namespace {

constexpr const char* kJobDir = "${JOBDIR}";

Step make_step(StepKind kind, std::map<std::string, std::string> args = {}) {
  Step s;
  s.kind = kind;
  s.args = std::move(args);
  return s;
}

std::string job_dir_file(std::string_view lfn) { return std::string(kJobDir) + "/" + std::string(lfn); }

// Local path of a file:// url; other urls are returned unchanged.
std::string url_path(std::string_view url) {
  constexpr std::string_view prefix = "file://";
  if (url.substr(0, prefix.size()) == prefix) return std::string(url.substr(prefix.size()));
  return std::string(url);
}

bool is_http(std::string_view url) { return url.substr(0, 7) == "http://"; }

std::string docker_image_name(const std::string& image_url) {
  // Strip the scheme; "docker:///a/b:tag" -> "a/b:tag".
  auto sep = image_url.find("://");
  auto rest = sep == std::string::npos ? image_url : image_url.substr(sep + 3);
  auto first = rest.find_first_not_of('/');
  return first == std::string::npos ? rest : rest.substr(first);
}

std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

}  // namespace

std::string_view to_string(StepKind k) noexcept {
  switch (k) {
    case StepKind::CreateJobDir: return "CreateJobDir";
    case StepKind::MaterializeImage: return "MaterializeImage";
    case StepKind::LoadImage: return "LoadImage";
    case StepKind::EnsureUser: return "EnsureUser";
    case StepKind::StartContainer: return "StartContainer";
    case StepKind::WorkerSetup: return "WorkerSetup";
    case StepKind::EnvSetup: return "EnvSetup";
    case StepKind::StageIn: return "StageIn";
    case StepKind::LaunchTask: return "LaunchTask";
    case StepKind::StageOut: return "StageOut";
    case StepKind::StopContainer: return "StopContainer";
    case StepKind::UnloadImage: return "UnloadImage";
    case StepKind::RemoveJobDir: return "RemoveJobDir";
  }
  return "?";
}

StepKind parse_step_kind(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(StepKind::RemoveJobDir); ++i) {
    auto k = static_cast<StepKind>(i);
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown step kind '" + std::string(s) + "'");
}

std::string_view job_dir_mount_point(Runtime r) noexcept {
  return r == Runtime::Singularity ? "/srv" : "/scratch";
}

std::vector<Step> WrapperPlan::execution_order() const {
  std::vector<Step> out;
  out.reserve(host_steps.size() + container_steps.size());
  for (const auto& s : host_steps) {
    out.push_back(s);
    if (s.kind == StepKind::StartContainer) out.insert(out.end(), container_steps.begin(), container_steps.end());
  }
  return out;
}

WrapperPlan build_wrapper_plan(const Job& job, const ContainerDef* cdef, std::optional<PlacementMode> placement,
                               const PlanConfig& cfg, const Site* site) {
  if (job.kind != JobKind::Compute) throw Error(ErrorCode::InvalidConfig, "job '" + job.id + "' is not a compute job");
  const auto& cp = job.compute();
  if (cp.tasks.empty()) throw Error(ErrorCode::InvalidConfig, "compute job '" + job.id + "' has no tasks");
  if (bool(cdef) != bool(cp.container) || (cdef && cdef->name != *cp.container))
    throw Error(ErrorCode::InconsistentPlacement, "container definition does not match job '" + job.id + "'");

  WrapperPlan plan;
  plan.job_id = job.id;
  plan.site = job.site;
  plan.staging_inside = cfg.staging_inside_container;
  plan.docker_load_dedup = cfg.docker_load_dedup;

  // One stage-in for all member inputs not produced inside the cluster.
  Step stage_in = make_step(StepKind::StageIn);
  Step stage_out = make_step(StepKind::StageOut);
  std::vector<Step> launches;
  std::set<std::string> produced, staged;
  for (const auto& t : cp.tasks) {
    for (const auto& f : t.inputs)
      if (!produced.count(f.lfn) && staged.insert(f.lfn).second) stage_in.files.push_back(f);
    for (const auto& f : t.outputs) {
      produced.insert(f.lfn);
      stage_out.files.push_back(f);
    }
  }

  if (cdef) {
    for (const auto& [k, v] : cdef->profiles) plan.env[k] = v;
  }
  for (const auto& [k, v] : cp.env) plan.env[k] = v;

  std::string env_vars;
  for (const auto& [k, v] : plan.env) env_vars += (env_vars.empty() ? "" : " ") + k + "=" + v;
  Step worker = make_step(StepKind::WorkerSetup, {{"tool", "cwms-worker"}});
  Step env = make_step(StepKind::EnvSetup, {{"vars", env_vars}, {"credentials", "inherited"}});

  if (!cdef) {
    if (placement) throw Error(ErrorCode::InconsistentPlacement, "placement given for job '" + job.id + "' without container");
    for (const auto& t : cp.tasks) {
      Step launch = make_step(StepKind::LaunchTask, {{"task", t.task_id}, {"transformation", t.transformation},
                                                     {"pfn", t.pfn}, {"cwd", kJobDir}});
      launch.runtime_s = t.runtime_s;
      launches.push_back(std::move(launch));
    }
    plan.host_steps.push_back(make_step(StepKind::CreateJobDir, {{"path", kJobDir}}));
    plan.host_steps.push_back(worker);
    plan.host_steps.push_back(env);
    plan.host_steps.push_back(stage_in);
    for (auto& l : launches) plan.host_steps.push_back(std::move(l));
    plan.host_steps.push_back(stage_out);
    plan.host_steps.push_back(make_step(StepKind::RemoveJobDir, {{"path", kJobDir}}));
    return plan;
  }

  if (!placement) throw Error(ErrorCode::InconsistentPlacement, "containerized job '" + job.id + "' has no placement");
  const auto runtime = cdef->runtime;
  if (site && !site->runtimes_available.count(runtime))
    throw Error(ErrorCode::RuntimeUnavailable,
                std::string(to_string(runtime)) + " is not available at site '" + site->name + "'");
  if ((runtime == Runtime::Shifter) != (*placement == PlacementMode::ShifterLocal))
    throw Error(ErrorCode::InconsistentPlacement, "ShifterLocal placement is exclusive to shifter containers");
  if (*placement == PlacementMode::Bypass && !cdef->site_local)
    throw Error(ErrorCode::InconsistentPlacement, "Bypass placement needs a site-local container");

  plan.backend = runtime;
  plan.placement = placement;
  plan.image = cdef->image.url();
  const std::string mount_point(job_dir_mount_point(runtime));
  plan.mounts.push_back(MountSpec{kJobDir, mount_point, {}});
  plan.mounts.insert(plan.mounts.end(), cdef->mounts.begin(), cdef->mounts.end());

  for (const auto& t : cp.tasks) {
    Step launch = make_step(StepKind::LaunchTask, {{"task", t.task_id}, {"transformation", t.transformation},
                                                   {"pfn", t.pfn}, {"cwd", mount_point}});
    launch.runtime_s = t.runtime_s;
    launches.push_back(std::move(launch));
  }

  const auto file = image_file_name(*cdef);
  std::string image_path;  // where the runtime finds the image file on the host
  plan.host_steps.push_back(make_step(StepKind::CreateJobDir, {{"path", kJobDir}}));
  if (needs_fetch(*placement)) {
    bool link = *placement == PlacementMode::SharedFsSymlink;
    Step mat = make_step(StepKind::MaterializeImage,
                         {{"mode", link ? "symlink" : "pull"}, {"source", cp.image_source}, {"image", file}});
    mat.files.push_back(FileTransfer{file, cp.image_source, "file://" + job_dir_file(file), cdef->image_size_bytes,
                                     TransferKind::ContainerImage, link});
    plan.host_steps.push_back(std::move(mat));
    image_path = job_dir_file(file);
  } else if (*placement == PlacementMode::Bypass) {
    image_path = cp.image_source;
  }

  if (runtime == Runtime::Docker) {
    Step load = make_step(StepKind::LoadImage, {{"image", plan.image}, {"source", image_path}});
    load.files.push_back(FileTransfer{file, image_path, "", cdef->image_size_bytes, TransferKind::ContainerImage, false});
    plan.host_steps.push_back(std::move(load));
    plan.host_steps.push_back(make_step(StepKind::EnsureUser, {{"uid", "$(id -u)"}, {"gid", "$(id -g)"},
                                                               {"user", "$(id -un)"}}));
  }
  if (!plan.staging_inside) plan.host_steps.push_back(stage_in);

  std::string mounts;
  for (const auto& m : plan.mounts) mounts += (mounts.empty() ? "" : ",") + m.str();
  std::string run_image = runtime == Runtime::Shifter ? cp.image_source
                          : runtime == Runtime::Docker ? docker_image_name(plan.image)
                                                       : image_path;
  plan.host_steps.push_back(make_step(StepKind::StartContainer, {{"runtime", std::string(to_string(runtime))},
                                                                 {"image", run_image},
                                                                 {"mounts", mounts},
                                                                 {"workdir", mount_point}}));
  if (!plan.staging_inside) plan.host_steps.push_back(stage_out);
  if (runtime == Runtime::Docker) {
    plan.host_steps.push_back(make_step(StepKind::StopContainer, {{"name", "cwms-" + job.id}}));
    plan.host_steps.push_back(make_step(StepKind::UnloadImage, {{"image", docker_image_name(plan.image)}}));
  }
  plan.host_steps.push_back(make_step(StepKind::RemoveJobDir, {{"path", kJobDir}}));

  plan.container_steps.push_back(worker);
  plan.container_steps.push_back(env);
  if (plan.staging_inside) plan.container_steps.push_back(stage_in);
  for (auto& l : launches) plan.container_steps.push_back(std::move(l));
  if (plan.staging_inside) plan.container_steps.push_back(stage_out);
  return plan;
}

std::map<std::string, WrapperPlan> build_wrapper_plans(const ExecutableWorkflow& ewf) {
  std::map<std::string, WrapperPlan> plans;
  for (const auto& job : ewf.jobs) {
    if (job.kind != JobKind::Compute) continue;
    const auto& cp = job.compute();
    const ContainerDef* cdef = nullptr;
    if (cp.container) {
      auto it = ewf.containers.find(*cp.container);
      if (it == ewf.containers.end()) throw Error(ErrorCode::DanglingContainerRef, *cp.container);
      cdef = &it->second;
    }
    plans.emplace(job.id, build_wrapper_plan(job, cdef, cp.placement, ewf.config, ewf.find_site(job.site)));
  }
  return plans;
}

namespace {

void render_stage(std::ostream& out, const Step& step, bool inbound) {
  if (step.files.empty()) {
    out << ":  # nothing to transfer\n";
    return;
  }
  for (const auto& f : step.files) {
    if (inbound) {
      if (f.link) out << "ln -sf \"" << url_path(f.src) << "\" \"" << f.lfn << "\"\n";
      else if (is_http(f.src)) out << "curl -fsS -o \"" << f.lfn << "\" \"" << f.src << "\"\n";
      else out << "cp \"" << url_path(f.src) << "\" \"" << f.lfn << "\"\n";
    } else {
      if (is_http(f.dst)) out << "curl -fsS -T \"" << f.lfn << "\" \"" << f.dst << "\"\n";
      else out << "cp \"" << f.lfn << "\" \"" << url_path(f.dst) << "\"\n";
    }
  }
}

void render_step(std::ostream& out, const WrapperPlan& plan, const Step& step, int index) {
  out << "\n# [" << index << "] " << to_string(step.kind) << "\n";
  const auto arg = [&](const char* key) {
    auto it = step.args.find(key);
    return it == step.args.end() ? std::string{} : it->second;
  };
  switch (step.kind) {
    case StepKind::CreateJobDir:
      out << "mkdir -p \"$JOBDIR\"\ncd \"$JOBDIR\"\n";
      break;
    case StepKind::MaterializeImage: {
      const auto& f = step.files.front();
      auto dst = "$JOBDIR/" + f.lfn;
      if (arg("mode") == "symlink") out << "ln -sf \"" << url_path(f.src) << "\" \"" << dst << "\"\n";
      else if (is_http(f.src)) out << "curl -fsS -o \"" << dst << "\" \"" << f.src << "\"\n";
      else out << "cp \"" << url_path(f.src) << "\" \"" << dst << "\"\n";
      break;
    }
    case StepKind::LoadImage: {
      auto source = arg("source");
      for (auto pos = source.find("${JOBDIR}"); pos != std::string::npos; pos = source.find("${JOBDIR}"))
        source.replace(pos, 9, "$JOBDIR");
      if (plan.docker_load_dedup) {
        auto key = sanitize(docker_image_name(arg("image")));
        out << "mkdir -p \"$CWMS_IMAGE_CACHE\"\n"
            << "(\n"
            << "  flock -x 9\n"
            << "  if [ ! -e \"$CWMS_IMAGE_CACHE/" << key << ".loaded\" ]; then\n"
            << "    docker load -i \"" << source << "\"\n"
            << "    touch \"$CWMS_IMAGE_CACHE/" << key << ".loaded\"\n"
            << "  fi\n"
            << ") 9>\"$CWMS_IMAGE_CACHE/" << key << ".lock\"\n";
      } else {
        out << "docker load -i \"" << source << "\"\n";
      }
      break;
    }
    case StepKind::EnsureUser:
      out << "CWMS_UID=" << arg("uid") << "\nCWMS_GID=" << arg("gid") << "\nCWMS_USER=" << arg("user") << "\n";
      break;
    case StepKind::StartContainer: {
      auto workdir = arg("workdir");
      auto script = plan.job_id + "-cont.sh";
      out << "cat > \"$JOBDIR/" << script << "\" <<'CWMS_CONTAINER_EOF'\n"
          << "#!/bin/bash\nset -e\ncd " << workdir << "\n";
      int inner = index;
      for (const auto& cs : plan.container_steps) render_step(out, plan, cs, ++inner);
      out << "CWMS_CONTAINER_EOF\n";
      std::string binds;
      const auto backend = *plan.backend;
      for (const auto& m : plan.mounts) {
        auto spec = m.str();
        for (auto pos = spec.find("${JOBDIR}"); pos != std::string::npos; pos = spec.find("${JOBDIR}"))
          spec.replace(pos, 9, "$JOBDIR");
        if (backend == Runtime::Docker) binds += " -v \"" + spec + "\"";
        else if (backend == Runtime::Singularity) binds += " --bind \"" + spec + "\"";
        else binds += " --volume=\"" + spec + "\"";
      }
      if (backend == Runtime::Docker) {
        out << "docker run --name cwms-" << plan.job_id << binds << " -w " << workdir << " " << arg("image")
            << " /bin/bash -c \"getent passwd $CWMS_USER >/dev/null || useradd -u $CWMS_UID -g $CWMS_GID -m $CWMS_USER;"
            << " su -s /bin/bash $CWMS_USER -c 'bash " << workdir << "/" << script << "'\"\n";
      } else if (backend == Runtime::Singularity) {
        auto image = arg("image");
        for (auto pos = image.find("${JOBDIR}"); pos != std::string::npos; pos = image.find("${JOBDIR}"))
          image.replace(pos, 9, "$JOBDIR");
        out << "singularity exec" << binds << " --pwd " << workdir << " \"" << image << "\" bash " << workdir << "/"
            << script << "\n";
      } else {
        out << "shifter --image=" << docker_image_name(arg("image")) << binds << " bash " << workdir << "/" << script
            << "\n";
      }
      break;
    }
    case StepKind::WorkerSetup:
      out << "command -v " << arg("tool") << " >/dev/null 2>&1 || export PATH=\"$PWD/worker/bin:$PATH\"\n";
      break;
    case StepKind::EnvSetup: {
      if (!plan.env.empty())
        for (const auto& [k, v] : plan.env) out << "export " << k << "=\"" << v << "\"\n";
      else
        out << ":  # no job environment\n";
      break;
    }
    case StepKind::StageIn:
      render_stage(out, step, true);
      break;
    case StepKind::LaunchTask:
      out << "/usr/bin/time -f \"task " << arg("task") << " wall=%e exit=%x\" \"" << arg("pfn") << "\"\n";
      break;
    case StepKind::StageOut:
      render_stage(out, step, false);
      break;
    case StepKind::StopContainer:
      out << "docker rm -f " << arg("name") << " >/dev/null 2>&1 || true\n";
      break;
    case StepKind::UnloadImage:
      if (plan.docker_load_dedup) out << ":  # " << arg("image") << " stays loaded for later jobs on this node\n";
      else out << "docker rmi " << arg("image") << " >/dev/null 2>&1 || true\n";
      break;
    case StepKind::RemoveJobDir:
      out << "cd /\nrm -rf \"$JOBDIR\"\n";
      break;
  }
}

}  // namespace

std::string render_wrapper(const WrapperPlan& plan) {
  std::ostringstream out;
  out << "#!/bin/bash\n"
      << "# cwms job wrapper\n"
      << "# job: " << plan.job_id << "\n"
      << "# site: " << plan.site << "\n"
      << "# backend: " << (plan.backend ? std::string(to_string(*plan.backend)) : "none") << "\n";
  if (plan.placement) out << "# placement: " << to_string(*plan.placement) << "\n";
  if (!plan.image.empty()) out << "# image: " << plan.image << "\n";
  out << "# staging: " << (plan.staging_inside ? "inside container" : "host") << "\n"
      << "set -e\n"
      << "JOBDIR=\"${CWMS_SCRATCH:-/tmp}/" << plan.job_id << "\"\n";
  if (plan.backend == Runtime::Docker) out << "CWMS_IMAGE_CACHE=\"${CWMS_IMAGE_CACHE:-/tmp/cwms-images}\"\n";

  int index = 0;
  for (const auto& step : plan.host_steps) {
    render_step(out, plan, step, ++index);
    if (step.kind == StepKind::StartContainer) index += static_cast<int>(plan.container_steps.size());
  }
  return out.str();
}

}  // namespace cwms
