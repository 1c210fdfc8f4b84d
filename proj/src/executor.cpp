#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "cwms/error.hpp"
#include "cwms/launcher.hpp"
#include "cwms/transfer.hpp"

namespace cwms {

namespace fs = std::filesystem;

std::string_view to_string(JobStatus s) noexcept {
  switch (s) {
    case JobStatus::Succeeded: return "Succeeded";
    case JobStatus::Failed: return "Failed";
    case JobStatus::NotRun: return "NotRun";
  }
  return "?";
}

bool ExecutionReport::ok() const {
  for (const auto& j : jobs)
    if (j.status != JobStatus::Succeeded) return false;
  return true;
}

const JobRecord* ExecutionReport::find(std::string_view job_id) const {
  for (const auto& j : jobs)
    if (j.job_id == job_id) return &j;
  return nullptr;
}

std::string ExecutionReport::to_json() const {
  nlohmann::json root;
  auto& js = root["jobs"] = nlohmann::json::array();
  for (const auto& j : jobs) {
    js.push_back({{"job", j.job_id},
                  {"kind", std::string(cwms::to_string(j.kind))},
                  {"status", std::string(cwms::to_string(j.status))},
                  {"node", j.node},
                  {"failed_step", j.failed_step},
                  {"message", j.message},
                  {"exit_code", j.exit_code}});
  }
  auto& ss = root["steps"] = nlohmann::json::array();
  for (const auto& s : steps) {
    ss.push_back({{"job", s.job_id},
                  {"step", std::string(cwms::to_string(s.kind))},
                  {"node", s.node},
                  {"effect", s.effect},
                  {"wall_ms", s.wall_ms}});
  }
  root["completion_order"] = completion_order;
  root["image_loads"] = image_loads;
  root["image_cache_hits"] = image_cache_hits;
  root["registry_reads"] = registry_reads;
  root["ok"] = ok();
  return root.dump(2) + "\n";
}

namespace {

bool on_path(const std::string& binary) {
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::string p(path);
  std::size_t start = 0;
  while (start <= p.size()) {
    auto end = p.find(':', start);
    if (end == std::string::npos) end = p.size();
    auto dir = p.substr(start, end - start);
    if (!dir.empty()) {
      std::error_code ec;
      auto st = fs::status(fs::path(dir) / binary, ec);
      if (!ec && fs::is_regular_file(st) && (st.permissions() & fs::perms::owner_exec) != fs::perms::none) return true;
    }
    start = end + 1;
  }
  return false;
}

std::string backend_binary(Runtime r) {
  switch (r) {
    case Runtime::Docker: return "docker";
    case Runtime::Singularity: return "singularity";
    case Runtime::Shifter: return "shifter";
  }
  return "";
}

class Executor {
 public:
  Executor(const ExecutableWorkflow& ewf, const std::map<std::string, WrapperPlan>& plans, const ExecuteOptions& opts)
      : ewf_(ewf), plans_(plans), opts_(opts) {
    work_dir_ = opts.work_dir.empty() ? fs::temp_directory_path() / "cwms-run" : opts.work_dir;
    for (const auto& [name, c] : ewf.containers)
      if (c.image.is_registry()) registry_.add(c.image, c.image_size_bytes);
  }

  ExecutionReport run() {
    const auto n = ewf_.jobs.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[ewf_.jobs[i].id] = i;
    children_.assign(n, {});
    pending_.assign(n, 0);
    for (const auto& [p, c] : ewf_.edges) {
      auto pi = index.find(p), ci = index.find(c);
      if (pi == index.end() || ci == index.end()) throw Error(ErrorCode::DanglingEdge, p + " -> " + c);
      children_[pi->second].push_back(ci->second);
      ++pending_[ci->second];
    }

    // Nodes are fixed up front so mock runs are reproducible.
    std::map<std::string, int> per_site;
    report_.jobs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& job = ewf_.jobs[i];
      auto& rec = report_.jobs[i];
      rec.job_id = job.id;
      rec.kind = job.kind;
      if (job.kind == JobKind::Compute) {
        int slot = per_site[job.site]++ % std::max(1, opts_.nodes_per_site);
        rec.node = job.site + "-node" + std::to_string(slot);
      } else {
        rec.node = "submit";
      }
      if (pending_[i] == 0) ready_.push_back(i);
    }

    if (opts_.mode == ExecMode::Real) {
      for (const auto& [id, plan] : plans_)
        if (plan.backend && !on_path(backend_binary(*plan.backend)))
          throw Error(ErrorCode::MissingRuntime, backend_binary(*plan.backend) + " not found on PATH");
    }

    const int threads = std::max(1, opts_.slots);
    {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back([this] { worker(); });
    }
    report_.registry_reads = registry_.reads();
    return std::move(report_);
  }

 private:
  void worker() {
    for (;;) {
      std::size_t i;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return !ready_.empty() || running_ == 0; });
        if (ready_.empty()) {
          cv_.notify_all();
          return;
        }
        i = ready_.front();
        ready_.pop_front();
        ++running_;
      }
      JobRecord outcome = report_.jobs[i];
      run_job(ewf_.jobs[i], outcome);
      {
        std::lock_guard lk(mu_);
        report_.jobs[i] = outcome;
        report_.completion_order.push_back(outcome.job_id);
        if (outcome.status == JobStatus::Succeeded) {
          for (auto c : children_[i])
            if (--pending_[c] == 0) ready_.push_back(c);
        }
        --running_;
      }
      cv_.notify_all();
    }
  }

  void record(const std::string& job, StepKind kind, const std::string& node, std::string effect,
              std::chrono::steady_clock::time_point start) {
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::lock_guard lk(record_mu_);
    report_.steps.push_back(StepRecord{job, kind, node, std::move(effect), ms});
  }

  bool injected(const std::string& job, StepKind kind) const {
    return opts_.fail && opts_.fail->step == kind && (opts_.fail->job_id.empty() || opts_.fail->job_id == job);
  }

  void run_job(const Job& job, JobRecord& rec) {
    try {
      if (job.kind == JobKind::Compute) {
        auto it = plans_.find(job.id);
        if (it == plans_.end()) throw Error(ErrorCode::InvalidConfig, "no wrapper plan for job '" + job.id + "'");
        if (opts_.mode == ExecMode::Mock) mock_compute(it->second, rec);
        else real_compute(it->second, rec);
      } else {
        run_aux(job, rec);
      }
      if (rec.status == JobStatus::NotRun) rec.status = JobStatus::Succeeded;
    } catch (const Error& e) {
      rec.status = JobStatus::Failed;
      rec.message = e.what();
      rec.exit_code = 1;
    }
  }

  void mock_compute(const WrapperPlan& plan, JobRecord& rec) {
    for (const auto& step : plan.execution_order()) {
      auto start = std::chrono::steady_clock::now();
      if (injected(plan.job_id, step.kind)) {
        record(plan.job_id, step.kind, rec.node, "failed (injected)", start);
        rec.status = JobStatus::Failed;
        rec.failed_step = std::string(to_string(step.kind));
        rec.exit_code = 1;
        rec.message = Error(ErrorCode::StepFailed, plan.job_id + ": " + rec.failed_step).what();
        return;
      }
      record(plan.job_id, step.kind, rec.node, mock_effect(plan, step, rec.node), start);
    }
  }

  std::string mock_effect(const WrapperPlan& plan, const Step& step, const std::string& node) {
    auto arg = [&](const char* k) {
      auto it = step.args.find(k);
      return it == step.args.end() ? std::string{} : it->second;
    };
    switch (step.kind) {
      case StepKind::CreateJobDir: return "created " + node + ":" + plan.job_id;
      case StepKind::MaterializeImage: return arg("mode") + " " + arg("image");
      case StepKind::LoadImage: {
        if (!plan.docker_load_dedup) {
          std::lock_guard lk(record_mu_);
          ++report_.image_loads;
          return "loaded " + plan.image;
        }
        std::shared_ptr<std::mutex> m;
        {
          std::lock_guard lk(load_mu_);
          auto& slot = load_locks_[{node, plan.image}];
          if (!slot) slot = std::make_shared<std::mutex>();
          m = slot;
        }
        std::lock_guard guard(*m);
        bool fresh;
        {
          std::lock_guard lk(load_mu_);
          fresh = loaded_.insert({node, plan.image}).second;
        }
        std::lock_guard lk(record_mu_);
        if (fresh) {
          ++report_.image_loads;
          return "loaded " + plan.image;
        }
        ++report_.image_cache_hits;
        return "cache hit " + plan.image;
      }
      case StepKind::EnsureUser: return "user ready";
      case StepKind::StartContainer: return "started " + arg("runtime");
      case StepKind::WorkerSetup: return "worker tools ready";
      case StepKind::EnvSetup: return "env " + arg("vars");
      case StepKind::StageIn:
      case StepKind::StageOut: {
        std::string files;
        for (const auto& f : step.files) files += (files.empty() ? "" : ",") + f.lfn;
        return std::string(step.kind == StepKind::StageIn ? "in " : "out ") + files;
      }
      case StepKind::LaunchTask: return "ran " + arg("task") + " exit=0";
      case StepKind::StopContainer: return "stopped";
      case StepKind::UnloadImage: return plan.docker_load_dedup ? "retained" : "unloaded";
      case StepKind::RemoveJobDir: return "removed " + node + ":" + plan.job_id;
    }
    return {};
  }

  void real_compute(const WrapperPlan& plan, JobRecord& rec) {
    fs::create_directories(work_dir_);
    auto script = work_dir_ / (plan.job_id + ".sh");
    {
      std::ofstream out(script);
      if (!out) throw Error(ErrorCode::DestinationUnwritable, script.string());
      out << render_wrapper(plan);
    }
    auto start = std::chrono::steady_clock::now();
    std::string cmd = "CWMS_SCRATCH='" + work_dir_.string() + "' bash '" + script.string() + "' > '" +
                      (work_dir_ / (plan.job_id + ".log")).string() + "' 2>&1";
    int rc = std::system(cmd.c_str());
    int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : 128;
    record(plan.job_id, StepKind::LaunchTask, rec.node, "wrapper exit=" + std::to_string(code), start);
    if (code != 0) {
      rec.status = JobStatus::Failed;
      rec.exit_code = code;
      rec.failed_step = "wrapper";
      rec.message = Error(ErrorCode::StepFailed, plan.job_id + " exited " + std::to_string(code)).what();
    }
  }

  void run_aux(const Job& job, JobRecord& rec) {
    auto start = std::chrono::steady_clock::now();
    const auto& tp = job.transfers();
    if (job.kind == JobKind::ContainerFetch && tp.registry_export && tp.container) {
      const auto& cdef = ewf_.containers.at(*tp.container);
      const auto& t = tp.transfers.at(0);
      auto location = url_location(t.dst);
      auto dest = work_dir_ / location / "images" / t.lfn;
      auto img = export_image(cdef.image, dest, registry_, cache_, location);
      record(job.id, StepKind::MaterializeImage, rec.node,
             std::string(img.cache_hit ? "export cache hit " : "exported ") + cdef.image.url(), start);
      return;
    }
    if (opts_.mode == ExecMode::Real) {
      std::vector<TransferRequest> reqs;
      for (const auto& t : tp.transfers) reqs.push_back({t.src, t.dst, t.bytes, t.kind, t.link});
      auto results = batch_transfer(reqs, 4);
      for (std::size_t i = 0; i < results.size(); ++i)
        if (!results[i].ok()) throw Error(*results[i].error, results[i].message);
    }
    std::string files;
    for (const auto& t : tp.transfers) files += (files.empty() ? "" : ",") + t.lfn;
    record(job.id, job.kind == JobKind::StageOut ? StepKind::StageOut : StepKind::StageIn, rec.node,
           std::string(to_string(job.kind)) + " " + files, start);
  }

  const ExecutableWorkflow& ewf_;
  const std::map<std::string, WrapperPlan>& plans_;
  const ExecuteOptions& opts_;
  fs::path work_dir_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::size_t> ready_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<int> pending_;
  int running_ = 0;

  std::mutex record_mu_;
  ExecutionReport report_;

  std::mutex load_mu_;
  std::map<std::pair<std::string, std::string>, std::shared_ptr<std::mutex>> load_locks_;
  std::set<std::pair<std::string, std::string>> loaded_;

  SyntheticRegistry registry_;
  ImageCache cache_;
};

}  // namespace

ExecutionReport execute_local(const ExecutableWorkflow& ewf, const std::map<std::string, WrapperPlan>& plans,
                              const ExecuteOptions& opts) {
  Executor ex(ewf, plans, opts);
  return ex.run();
}

}  // namespace cwms
