#include "cwms/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <variant>

#include "cwms/error.hpp"

namespace cwms {

std::vector<const NodeSpec*> Topology::nodes() const {
  std::vector<const NodeSpec*> out{&submit};
  if (nfs) out.push_back(&*nfs);
  for (const auto& w : workers) out.push_back(&w);
  return out;
}

const NodeSpec* Topology::find(std::string_view name) const {
  for (const auto* n : nodes())
    if (n->name == name) return n;
  return nullptr;
}

void Topology::validate() const {
  std::set<std::string> names;
  for (const auto* n : nodes()) {
    if (n->name.empty()) throw Error(ErrorCode::InvalidTopology, "node without a name");
    if (!names.insert(n->name).second) throw Error(ErrorCode::InvalidTopology, "duplicate node '" + n->name + "'");
    if (n->slots < 1) throw Error(ErrorCode::InvalidTopology, "node '" + n->name + "' needs at least one slot");
    if (!(n->bandwidth > 0)) throw Error(ErrorCode::InvalidTopology, "node '" + n->name + "' bandwidth must be > 0");
    if (!(n->disk_untar_rate > 0) || n->disk_service_base_ms < 0)
      throw Error(ErrorCode::InvalidTopology, "node '" + n->name + "' has an invalid disk model");
  }
  if (!(registry_bandwidth > 0)) throw Error(ErrorCode::InvalidTopology, "registry bandwidth must be > 0");
  for (const auto& [site, m] : sites) {
    if (!names.count(m.storage))
      throw Error(ErrorCode::InvalidTopology, "site '" + site + "' storage node '" + m.storage + "' is undefined");
    for (const auto& c : m.compute)
      if (!names.count(c))
        throw Error(ErrorCode::InvalidTopology, "site '" + site + "' compute node '" + c + "' is undefined");
  }
}

double SimResult::total_egress_bytes() const {
  double total = 0;
  for (const auto& [n, s] : per_node_egress) total += std::accumulate(s.begin(), s.end(), 0.0) * bin_s;
  return total;
}

double SimResult::total_ingress_bytes() const {
  double total = 0;
  for (const auto& [n, s] : per_node_ingress) total += std::accumulate(s.begin(), s.end(), 0.0) * bin_s;
  return total;
}

std::uint64_t SimResult::transferred_bytes() const {
  std::uint64_t total = 0;
  for (const auto& t : transfers) total += t.bytes;
  return total;
}

std::uint64_t SimResult::bytes_through(std::string_view node, TransferKind kind) const {
  std::uint64_t total = 0;
  for (const auto& t : transfers)
    if (t.kind == kind && (t.src == node || t.dst == node)) total += t.bytes;
  return total;
}

double SimResult::worker_mean_io_wait_ms() const {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& w : workers) {
    auto m = mean_io_wait_ms.find(w);
    auto c = disk_requests.find(w);
    if (m == mean_io_wait_ms.end() || c == disk_requests.end()) continue;
    sum += m->second * c->second;
    n += c->second;
  }
  return n ? sum / n : 0.0;
}

double SimResult::longest_egress_run_s(std::string_view node, double threshold) const {
  auto it = per_node_egress.find(std::string(node));
  if (it == per_node_egress.end()) return 0.0;
  std::size_t best = 0, run = 0;
  for (double v : it->second) {
    run = v >= threshold ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best * bin_s;
}

namespace {

constexpr double kEps = 1e-9;

// Deterministic event queue: ties broken by insertion order.
class EventQueue {
 public:
  double now() const { return now_; }
  void at(double t, std::function<void()> fn) { q_.push(Event{std::max(t, now_), seq_++, std::move(fn)}); }
  void run() {
    while (!q_.empty()) {
      auto ev = q_.top();
      q_.pop();
      now_ = ev.time;
      ev.fn();
    }
  }

 private:
  struct Event {
    double time;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<>> q_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
};

// Adds `amount` spread uniformly over [t0, t1] to per-bin totals.
void spread(std::vector<double>& bins, double bin_s, double t0, double t1, double amount) {
  if (amount <= 0) return;
  auto ensure = [&](std::size_t i) {
    if (bins.size() <= i) bins.resize(i + 1, 0.0);
  };
  if (t1 - t0 <= kEps) {
    auto i = static_cast<std::size_t>(t0 / bin_s);
    ensure(i);
    bins[i] += amount;
    return;
  }
  const double rate = amount / (t1 - t0);
  auto first = static_cast<std::size_t>(t0 / bin_s);
  auto last = static_cast<std::size_t>(t1 / bin_s);
  ensure(last);
  for (auto i = first; i <= last; ++i) {
    double lo = std::max(t0, i * bin_s), hi = std::min(t1, (i + 1) * bin_s);
    if (hi > lo) bins[i] += rate * (hi - lo);
  }
}

struct FlowSpec {
  std::string lfn;
  TransferKind kind = TransferKind::Data;
  int src = 0;  // node indices
  int dst = 0;
  std::uint64_t bytes = 0;
};

// Flows over node access links with max-min fair sharing.
class Network {
 public:
  Network(EventQueue& ev, std::vector<double> caps, bool fair_share, double bin_s)
      : ev_(ev), caps_(std::move(caps)), fair_(fair_share), bin_s_(bin_s) {
    egress_.resize(caps_.size());
    ingress_.resize(caps_.size());
  }

  void start(const std::string& job, const FlowSpec& f, std::function<void()> done) {
    advance();
    Flow flow;
    flow.id = next_id_++;
    flow.spec = f;
    flow.job = job;
    flow.remaining = static_cast<double>(f.bytes);
    flow.started = ev_.now();
    flow.done = std::move(done);
    flows_.push_back(std::move(flow));
    reschedule();
  }

  std::vector<TransferRecord> ledger;
  std::vector<std::vector<double>> egress_;  // bytes per bin
  std::vector<std::vector<double>> ingress_;
  std::vector<std::string> names;

 private:
  struct Flow {
    std::uint64_t id = 0;
    FlowSpec spec;
    std::string job;
    double remaining = 0;
    double rate = 0;
    double started = 0;
    std::function<void()> done;
  };

  void advance() {
    const double t = ev_.now();
    if (t > last_) {
      for (auto& f : flows_) {
        double moved = std::min(f.remaining, f.rate * (t - last_));
        spread(egress_[f.spec.src], bin_s_, last_, t, moved);
        spread(ingress_[f.spec.dst], bin_s_, last_, t, moved);
        f.remaining -= moved;
      }
    }
    last_ = t;
  }

  void allocate() {
    if (!fair_) {
      for (auto& f : flows_) f.rate = std::min(caps_[f.spec.src], caps_[f.spec.dst]);
      return;
    }
    // Progressive filling over resources: 2*i = egress of node i, 2*i+1 = ingress.
    const std::size_t nres = caps_.size() * 2;
    std::vector<double> left(nres);
    for (std::size_t i = 0; i < caps_.size(); ++i) left[2 * i] = left[2 * i + 1] = caps_[i];
    std::vector<bool> frozen(flows_.size(), false);
    std::size_t remaining = flows_.size();
    while (remaining > 0) {
      std::vector<int> count(nres, 0);
      for (std::size_t k = 0; k < flows_.size(); ++k) {
        if (frozen[k]) continue;
        ++count[2 * flows_[k].spec.src];
        ++count[2 * flows_[k].spec.dst + 1];
      }
      std::size_t best = nres;
      double share = 0;
      for (std::size_t r = 0; r < nres; ++r) {
        if (!count[r]) continue;
        double s = left[r] / count[r];
        if (best == nres || s < share) {
          best = r;
          share = s;
        }
      }
      for (std::size_t k = 0; k < flows_.size(); ++k) {
        if (frozen[k]) continue;
        auto& f = flows_[k];
        if (2 * static_cast<std::size_t>(f.spec.src) != best && 2 * static_cast<std::size_t>(f.spec.dst) + 1 != best)
          continue;
        f.rate = share;
        frozen[k] = true;
        --remaining;
        left[2 * f.spec.src] -= share;
        left[2 * f.spec.dst + 1] -= share;
      }
    }
  }

  void reschedule() {
    allocate();
    ++version_;
    if (flows_.empty()) return;
    double next = std::numeric_limits<double>::infinity();
    for (const auto& f : flows_) next = std::min(next, f.remaining / f.rate);
    auto v = version_;
    ev_.at(ev_.now() + next, [this, v] {
      if (v == version_) complete();
    });
  }

  void complete() {
    advance();
    const double t = ev_.now();
    std::vector<Flow> finished;
    for (auto it = flows_.begin(); it != flows_.end();) {
      if (it->remaining <= kEps * std::max(1.0, static_cast<double>(it->spec.bytes)) + 1e-6) {
        // Rounding residue is booked at completion so series sum to the exact size.
        spread(egress_[it->spec.src], bin_s_, t, t, it->remaining);
        spread(ingress_[it->spec.dst], bin_s_, t, t, it->remaining);
        finished.push_back(std::move(*it));
        it = flows_.erase(it);
      } else {
        ++it;
      }
    }
    reschedule();
    for (auto& f : finished) {
      ledger.push_back(TransferRecord{f.job, f.spec.lfn, f.spec.kind, names[f.spec.src], names[f.spec.dst],
                                      f.spec.bytes, f.started, t});
      f.done();
    }
  }

  EventQueue& ev_;
  std::vector<double> caps_;
  bool fair_;
  double bin_s_;
  std::vector<Flow> flows_;
  double last_ = 0.0;
  std::uint64_t next_id_ = 0;
  std::uint64_t version_ = 0;
};

struct OpDelay {
  double seconds = 0;
};
struct OpFlows {
  std::vector<FlowSpec> flows;
};
struct OpDisk {
  std::vector<std::uint64_t> bytes;
};
struct OpLoad {
  std::string image;
  std::uint64_t bytes = 0;
};
struct OpRegistry {
  std::uint64_t bytes = 0;
};
using Op = std::variant<OpDelay, OpFlows, OpDisk, OpLoad, OpRegistry>;

struct Run {
  std::size_t job = 0;
  int node = 0;
  std::vector<Op> ops;
  std::size_t pc = 0;
  std::size_t pending = 0;  // outstanding flows of the current op
};

class Simulation {
 public:
  Simulation(const ExecutableWorkflow& ewf, const std::map<std::string, WrapperPlan>& plans, const Topology& topo,
             const SimConfig& cfg)
      : ewf_(ewf), plans_(plans), topo_(topo), cfg_(cfg), rng_(cfg.seed),
        net_(ev_, capacities(topo), cfg.fair_share, cfg.bin_s) {
    for (const auto* n : topo.nodes()) {
      index_[n->name] = static_cast<int>(specs_.size());
      specs_.push_back(n);
      net_.names.push_back(n->name);
    }
    free_slots_.resize(specs_.size());
    for (std::size_t i = 0; i < specs_.size(); ++i) free_slots_[i] = specs_[i]->slots;
    disk_free_at_.assign(specs_.size(), 0.0);
    disk_samples_.resize(specs_.size());
  }

  SimResult run() {
    const auto n = ewf_.jobs.size();
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) idx[ewf_.jobs[i].id] = i;
    children_.assign(n, {});
    pending_.assign(n, 0);
    for (const auto& [p, c] : ewf_.edges) {
      auto pi = idx.find(p), ci = idx.find(c);
      if (pi == idx.end() || ci == idx.end()) throw Error(ErrorCode::DanglingEdge, p + " -> " + c);
      children_[pi->second].push_back(ci->second);
      ++pending_[ci->second];
    }
    for (const auto& job : ewf_.jobs) check_job(job);

    timeline_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      timeline_[i].job_id = ewf_.jobs[i].id;
      if (pending_[i] == 0) ready_.insert({0.0, ewf_.jobs[i].id, i});
    }
    ev_.at(0.0, [this] { dispatch(); });
    ev_.run();
    if (finished_ != n) throw Error(ErrorCode::UnmappedSite, "some jobs could not be placed on any node");
    return collect();
  }

 private:
  static std::vector<double> capacities(const Topology& topo) {
    std::vector<double> caps;
    for (const auto* n : topo.nodes()) caps.push_back(n->bandwidth);
    return caps;
  }

  int node_of_location(const std::string& loc) const {
    if (auto it = index_.find(loc); it != index_.end()) return it->second;
    if (auto it = topo_.sites.find(loc); it != topo_.sites.end()) return index_.at(it->second.storage);
    throw Error(ErrorCode::UnmappedSite, "location '" + loc + "' is not mapped to a node");
  }

  int node_of_url(const std::string& url) const { return node_of_location(url_location(url)); }

  const std::vector<std::string>& compute_nodes(const std::string& site) const {
    auto it = topo_.sites.find(site);
    if (it == topo_.sites.end() || it->second.compute.empty())
      throw Error(ErrorCode::UnmappedSite, "site '" + site + "' has no compute nodes in the topology");
    return it->second.compute;
  }

  // Upfront checks so failures surface before any simulated time passes.
  void check_job(const Job& job) const {
    if (job.kind == JobKind::Compute) {
      compute_nodes(job.site);
      if (!plans_.count(job.id)) throw Error(ErrorCode::InvalidConfig, "no wrapper plan for job '" + job.id + "'");
      const auto& cp = job.compute();
      if (cp.container) {
        auto it = ewf_.containers.find(*cp.container);
        if (it != ewf_.containers.end() && it->second.image_size_bytes == 0 && cp.placement &&
            (needs_fetch(*cp.placement) || it->second.runtime == Runtime::Docker))
          throw Error(ErrorCode::MissingSize, "container '" + *cp.container + "' has no image size");
      }
    } else {
      for (const auto& t : job.transfers().transfers) {
        if (job.kind == JobKind::ContainerFetch && t.bytes == 0)
          throw Error(ErrorCode::MissingSize, "image '" + t.lfn + "' has no size");
        if (job.kind == JobKind::Cleanup) continue;
        if (!(job.kind == JobKind::ContainerFetch && job.transfers().registry_export)) fetch_source(t.src);
        node_of_url(t.dst);
      }
    }
  }

  // Non-registry image sources outside the topology are fetched through the submit node.
  int fetch_source(const std::string& url) const {
    try {
      return node_of_url(url);
    } catch (const Error&) {
      return 0;
    }
  }

  void dispatch() {
    for (auto it = ready_.begin(); it != ready_.end();) {
      const auto i = std::get<2>(*it);
      const auto& job = ewf_.jobs[i];
      int node = -1;
      if (job.kind == JobKind::Compute) {
        int best_free = 0;
        for (const auto& name : compute_nodes(job.site)) {
          int k = index_.at(name);
          if (free_slots_[k] > best_free) {
            best_free = free_slots_[k];
            node = k;
          }
        }
      } else if (free_slots_[0] > 0) {
        node = 0;
      }
      if (node < 0) {
        ++it;
        continue;
      }
      it = ready_.erase(it);
      --free_slots_[node];
      start_job(i, node);
    }
  }

  void start_job(std::size_t i, int node) {
    auto run = std::make_shared<Run>();
    run->job = i;
    run->node = node;
    timeline_[i].node = specs_[node]->name;
    timeline_[i].start = ev_.now();
    const auto& job = ewf_.jobs[i];
    if (job.kind == JobKind::Compute) build_compute_ops(job, *run);
    else build_aux_ops(job, *run);
    ev_.at(ev_.now(), [this, run] { step(run); });
  }

  void build_compute_ops(const Job& job, Run& run) {
    const auto& plan = plans_.at(job.id);
    const auto& cp = job.compute();
    std::map<std::string, const TaskInvocation*> tasks;
    for (const auto& t : cp.tasks) tasks[t.task_id] = &t;
    for (const auto& step : plan.execution_order()) {
      switch (step.kind) {
        case StepKind::MaterializeImage:
          for (const auto& f : step.files) {
            if (f.link) continue;
            run.ops.push_back(OpFlows{{FlowSpec{f.lfn, f.kind, node_of_url(f.src), run.node, f.bytes}}});
            run.ops.push_back(OpDisk{{f.bytes}});
          }
          break;
        case StepKind::LoadImage:
          run.ops.push_back(OpLoad{plan.image, step.files.empty() ? 0 : step.files.front().bytes});
          break;
        case StepKind::StageIn: {
          OpFlows flows;
          OpDisk writes;
          for (const auto& f : step.files) {
            if (f.link) continue;
            flows.flows.push_back(FlowSpec{f.lfn, f.kind, node_of_url(f.src), run.node, f.bytes});
            writes.bytes.push_back(f.bytes);
          }
          if (!flows.flows.empty()) {
            run.ops.push_back(std::move(flows));
            run.ops.push_back(std::move(writes));
          }
          break;
        }
        case StepKind::LaunchTask: {
          double runtime = step.runtime_s;
          if (cfg_.runtime_jitter > 0) {
            std::uniform_real_distribution<double> u(1.0 - cfg_.runtime_jitter, 1.0 + cfg_.runtime_jitter);
            runtime *= u(rng_);
          }
          run.ops.push_back(OpDelay{std::max(0.0, runtime)});
          auto it = tasks.find(step.args.at("task"));
          if (it != tasks.end() && !it->second->outputs.empty()) {
            OpDisk writes;
            for (const auto& f : it->second->outputs) writes.bytes.push_back(f.bytes);
            run.ops.push_back(std::move(writes));
          }
          break;
        }
        case StepKind::StageOut: {
          OpDisk reads;
          OpFlows flows;
          for (const auto& f : step.files) {
            reads.bytes.push_back(f.bytes);
            flows.flows.push_back(FlowSpec{f.lfn, f.kind, run.node, node_of_url(f.dst), f.bytes});
          }
          if (!flows.flows.empty()) {
            run.ops.push_back(std::move(reads));
            run.ops.push_back(std::move(flows));
          }
          break;
        }
        default:
          break;
      }
    }
  }

  void build_aux_ops(const Job& job, Run& run) {
    const auto& tp = job.transfers();
    if (job.kind == JobKind::Cleanup) return;
    OpFlows flows;
    for (const auto& t : tp.transfers) {
      if (t.link) continue;
      int dst = node_of_url(t.dst);
      int src;
      if (job.kind == JobKind::ContainerFetch && tp.registry_export) {
        run.ops.push_back(OpRegistry{t.bytes});
        src = run.node;
      } else {
        src = fetch_source(t.src);
      }
      flows.flows.push_back(FlowSpec{t.lfn, t.kind, src, dst, t.bytes});
    }
    run.ops.push_back(std::move(flows));
  }

  void step(const std::shared_ptr<Run>& run) {
    while (run->pc < run->ops.size()) {
      auto& op = run->ops[run->pc];
      auto next = [this, run] {
        ++run->pc;
        step(run);
      };
      if (auto* d = std::get_if<OpDelay>(&op)) {
        if (d->seconds > 0) {
          ev_.at(ev_.now() + d->seconds, next);
          return;
        }
      } else if (auto* r = std::get_if<OpRegistry>(&op)) {
        ++registry_reads_;
        ev_.at(ev_.now() + r->bytes / topo_.registry_bandwidth, next);
        return;
      } else if (auto* f = std::get_if<OpFlows>(&op)) {
        std::vector<FlowSpec> network;
        for (const auto& spec : f->flows)
          if (spec.src != spec.dst) network.push_back(spec);
        if (!network.empty()) {
          run->pending = network.size();
          for (const auto& spec : network) {
            net_.start(ewf_.jobs[run->job].id, spec, [run, next] {
              if (--run->pending == 0) next();
            });
          }
          return;
        }
      } else if (auto* d = std::get_if<OpDisk>(&op)) {
        if (!d->bytes.empty()) {
          double end = 0;
          for (auto b : d->bytes) end = disk_request(run->node, b);
          ev_.at(end, next);
          return;
        }
      } else if (auto* l = std::get_if<OpLoad>(&op)) {
        if (load_image(run, *l, next)) return;
      }
      ++run->pc;
    }
    finish(run);
  }

  double disk_request(int node, std::uint64_t bytes) {
    const auto* spec = specs_[node];
    const double now = ev_.now();
    const double start = std::max(now, disk_free_at_[node]);
    const double end = start + spec->disk_service_base_ms / 1000.0 + static_cast<double>(bytes) / spec->disk_untar_rate;
    disk_free_at_[node] = end;
    disk_samples_[node].push_back({end, (end - now) * 1000.0});
    return end;
  }

  // Returns true when the continuation was deferred.
  bool load_image(const std::shared_ptr<Run>& run, const OpLoad& op, const std::function<void()>& next) {
    if (!cfg_.docker_load_dedup) {
      ++image_loads_;
      ev_.at(disk_request(run->node, op.bytes), next);
      return true;
    }
    auto& state = loads_[{op.image, run->node}];
    if (state.loaded) {
      ++image_cache_hits_;
      return false;
    }
    if (state.loading) {
      ++image_cache_hits_;
      state.waiters.push_back(next);
      return true;
    }
    state.loading = true;
    ++image_loads_;
    state.waiters.push_back(next);
    auto key = std::make_pair(op.image, run->node);
    ev_.at(disk_request(run->node, op.bytes), [this, key] {
      auto& s = loads_[key];
      s.loading = false;
      s.loaded = true;
      auto waiters = std::move(s.waiters);
      for (auto& w : waiters) w();
    });
    return true;
  }

  void finish(const std::shared_ptr<Run>& run) {
    const auto i = run->job;
    timeline_[i].end = ev_.now();
    makespan_ = std::max(makespan_, ev_.now());
    ++free_slots_[run->node];
    ++finished_;
    for (auto c : children_[i])
      if (--pending_[c] == 0) ready_.insert({ev_.now(), ewf_.jobs[c].id, c});
    dispatch();
  }

  SimResult collect() {
    SimResult res;
    res.makespan_s = makespan_;
    res.bin_s = cfg_.bin_s;
    const auto bins = makespan_ > 0 ? static_cast<std::size_t>(std::ceil(makespan_ / cfg_.bin_s - 1e-12)) : 0;
    for (std::size_t k = 0; k < specs_.size(); ++k) {
      const auto& name = specs_[k]->name;
      res.nodes.push_back(name);
      if (k >= specs_.size() - topo_.workers.size()) res.workers.push_back(name);
      auto to_rate = [&](std::vector<double> v) {
        // Residues booked at t == makespan land one bin past the end.
        if (v.size() > bins) {
          double tail = 0;
          for (std::size_t j = bins; j < v.size(); ++j) tail += v[j];
          v.resize(bins);
          if (bins) v.back() += tail;
        }
        v.resize(bins, 0.0);
        for (auto& x : v) x /= cfg_.bin_s;
        return v;
      };
      res.per_node_egress[name] = to_rate(net_.egress_[k]);
      res.per_node_ingress[name] = to_rate(net_.ingress_[k]);

      std::vector<double> sum(bins, 0.0), cnt(bins, 0.0);
      double total = 0;
      for (const auto& [end, wait] : disk_samples_[k]) {
        auto b = std::min(bins ? bins - 1 : 0, static_cast<std::size_t>(end / cfg_.bin_s));
        if (bins) {
          sum[b] += wait;
          cnt[b] += 1;
        }
        total += wait;
      }
      for (std::size_t b = 0; b < bins; ++b) sum[b] = cnt[b] > 0 ? sum[b] / cnt[b] : 0.0;
      res.per_node_io_wait_ms[name] = std::move(sum);
      res.disk_requests[name] = disk_samples_[k].size();
      res.mean_io_wait_ms[name] = disk_samples_[k].empty() ? 0.0 : total / disk_samples_[k].size();
    }
    res.transfers = std::move(net_.ledger);
    for (const auto& t : res.transfers) ++res.transfer_count_by_kind[t.kind];
    res.job_timeline = timeline_;
    res.registry_reads = registry_reads_;
    res.image_loads = image_loads_;
    res.image_cache_hits = image_cache_hits_;
    return res;
  }

  struct LoadState {
    bool loaded = false;
    bool loading = false;
    std::vector<std::function<void()>> waiters;
  };

  const ExecutableWorkflow& ewf_;
  const std::map<std::string, WrapperPlan>& plans_;
  const Topology& topo_;
  const SimConfig& cfg_;
  std::mt19937_64 rng_;
  EventQueue ev_;
  Network net_;

  std::vector<const NodeSpec*> specs_;
  std::map<std::string, int> index_;
  std::vector<int> free_slots_;
  std::vector<double> disk_free_at_;
  std::vector<std::vector<std::pair<double, double>>> disk_samples_;  // (end, await ms)
  std::map<std::pair<std::string, int>, LoadState> loads_;

  std::vector<std::vector<std::size_t>> children_;
  std::vector<int> pending_;
  std::set<std::tuple<double, std::string, std::size_t>> ready_;
  std::vector<JobInterval> timeline_;
  std::size_t finished_ = 0;
  double makespan_ = 0.0;
  std::size_t registry_reads_ = 0, image_loads_ = 0, image_cache_hits_ = 0;
};

}  // namespace

SimResult simulate(const ExecutableWorkflow& ewf, const std::map<std::string, WrapperPlan>& plans,
                   const Topology& topo, const SimConfig& cfg) {
  topo.validate();
  if (!(cfg.bin_s > 0)) throw Error(ErrorCode::InvalidConfig, "bin width must be > 0");
  Simulation sim(ewf, plans, topo, cfg);
  return sim.run();
}

}  // namespace cwms
