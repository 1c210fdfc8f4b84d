#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cwms/error.hpp"
#include "cwms/simulator.hpp"

namespace cwms {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, std::string("cannot open ") + what + " '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool on_off(const YAML::Node& n) {
  auto v = n.as<std::string>();
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "on" || v == "true" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "no") return false;
  throw Error(ErrorCode::InvalidConfig, "expected on|off, got '" + v + "'");
}

NodeSpec node_from(const YAML::Node& n, const NodeSpec& defaults) {
  if (!n.IsMap()) throw Error(ErrorCode::SyntaxError, "node entry must be a map");
  NodeSpec spec = defaults;
  for (const auto& kv : n) {
    auto key = kv.first.as<std::string>();
    if (key == "name") spec.name = kv.second.as<std::string>();
    else if (key == "slots") spec.slots = kv.second.as<int>();
    else if (key == "bandwidth") spec.bandwidth = kv.second.as<double>();
    else if (key == "disk_untar_rate") spec.disk_untar_rate = kv.second.as<double>();
    else if (key == "disk_service_base_ms") spec.disk_service_base_ms = kv.second.as<double>();
    else throw Error(ErrorCode::SyntaxError, "unknown node key '" + key + "'");
  }
  return spec;
}

// Deterministic text for doubles.
std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::DestinationUnwritable, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::DestinationUnwritable, "short write to '" + path.string() + "'");
}

std::string series_table(const SimResult& res, const std::map<std::string, std::vector<double>>& series) {
  std::ostringstream out;
  out << "time_s";
  for (const auto& n : res.nodes) out << '\t' << n;
  out << '\n';
  std::size_t bins = 0;
  for (const auto& [n, s] : series) bins = std::max(bins, s.size());
  for (std::size_t b = 0; b < bins; ++b) {
    out << num(b * res.bin_s);
    for (const auto& n : res.nodes) {
      auto it = series.find(n);
      out << '\t' << num(it != series.end() && b < it->second.size() ? it->second[b] : 0.0);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

Topology parse_topology(std::string_view yaml_text) {
  Topology topo;
  try {
    auto root = YAML::Load(std::string(yaml_text));
    if (!root.IsMap()) throw Error(ErrorCode::SyntaxError, "topology must be a map");
    NodeSpec defaults;
    if (root["defaults"]) defaults = node_from(root["defaults"], defaults);
    bool have_submit = false;
    for (const auto& kv : root) {
      auto key = kv.first.as<std::string>();
      if (key == "defaults") continue;
      if (key == "submit") {
        topo.submit = node_from(kv.second, defaults);
        have_submit = true;
      } else if (key == "nfs") {
        topo.nfs = node_from(kv.second, defaults);
      } else if (key == "workers") {
        for (const auto& w : kv.second) topo.workers.push_back(node_from(w, defaults));
      } else if (key == "registry_bandwidth") {
        topo.registry_bandwidth = kv.second.as<double>();
      } else if (key == "sites") {
        for (const auto& s : kv.second) {
          SiteMapping m;
          if (s.second["storage"]) m.storage = s.second["storage"].as<std::string>();
          if (s.second["compute"]) m.compute = s.second["compute"].as<std::vector<std::string>>();
          topo.sites[s.first.as<std::string>()] = std::move(m);
        }
      } else {
        throw Error(ErrorCode::SyntaxError, "unknown topology key '" + key + "'");
      }
    }
    if (!have_submit) throw Error(ErrorCode::InvalidTopology, "topology has no submit node");
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  topo.validate();
  return topo;
}

Topology load_topology(const std::string& path) { return parse_topology(read_file(path, "topology")); }

SimConfig parse_sim_config(std::string_view yaml_text, SimConfig cfg) {
  try {
    auto root = YAML::Load(std::string(yaml_text));
    if (root.IsNull()) return cfg;
    if (!root.IsMap()) throw Error(ErrorCode::SyntaxError, "sim config must be a map");
    for (const auto& kv : root) {
      auto key = kv.first.as<std::string>();
      if (key == "seed") cfg.seed = kv.second.as<std::uint64_t>();
      else if (key == "fair_share") cfg.fair_share = on_off(kv.second);
      else if (key == "docker_load_dedup") cfg.docker_load_dedup = on_off(kv.second);
      else if (key == "runtime_jitter") cfg.runtime_jitter = kv.second.as<double>();
      else if (key == "bin_s") cfg.bin_s = kv.second.as<double>();
      else if (key == "placement") {
        auto v = kv.second.as<std::string>();
        cfg.placement_override = v == "auto" ? std::nullopt : std::optional(parse_placement(v));
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown sim config key '" + key + "'");
      }
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  if (cfg.runtime_jitter < 0 || cfg.runtime_jitter >= 1)
    throw Error(ErrorCode::InvalidConfig, "runtime_jitter must be in [0, 1)");
  return cfg;
}

void report(const SimResult& res, const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw Error(ErrorCode::DestinationUnwritable, "cannot create '" + out.string() + "'");

  std::ostringstream summary;
  summary << "metric\tvalue\n"
          << "makespan_s\t" << num(res.makespan_s) << '\n'
          << "bin_s\t" << num(res.bin_s) << '\n'
          << "total_egress_bytes\t" << num(res.total_egress_bytes()) << '\n'
          << "total_ingress_bytes\t" << num(res.total_ingress_bytes()) << '\n'
          << "transferred_bytes\t" << res.transferred_bytes() << '\n';
  for (auto k : {TransferKind::Data, TransferKind::ContainerImage, TransferKind::Executable}) {
    auto it = res.transfer_count_by_kind.find(k);
    summary << "transfers_" << to_string(k) << '\t' << (it == res.transfer_count_by_kind.end() ? 0 : it->second)
            << '\n';
  }
  summary << "registry_reads\t" << res.registry_reads << '\n'
          << "image_loads\t" << res.image_loads << '\n'
          << "image_cache_hits\t" << res.image_cache_hits << '\n'
          << "worker_mean_io_wait_ms\t" << num(res.worker_mean_io_wait_ms()) << '\n';
  write_text(out / "summary.tsv", summary.str());

  write_text(out / "egress.tsv", series_table(res, res.per_node_egress));
  write_text(out / "ingress.tsv", series_table(res, res.per_node_ingress));
  write_text(out / "io_wait.tsv", series_table(res, res.per_node_io_wait_ms));

  std::ostringstream transfers;
  transfers << "job\tlfn\tkind\tsrc\tdst\tbytes\tstart_s\tend_s\n";
  for (const auto& t : res.transfers)
    transfers << t.job_id << '\t' << t.lfn << '\t' << to_string(t.kind) << '\t' << t.src << '\t' << t.dst << '\t'
              << t.bytes << '\t' << num(t.start) << '\t' << num(t.end) << '\n';
  write_text(out / "transfers.tsv", transfers.str());

  std::ostringstream timeline;
  timeline << "job\tnode\tstart_s\tend_s\n";
  for (const auto& j : res.job_timeline)
    timeline << j.job_id << '\t' << j.node << '\t' << num(j.start) << '\t' << num(j.end) << '\n';
  write_text(out / "timeline.tsv", timeline.str());
}

std::vector<SweepRow> sweep(const std::vector<Scenario>& scenarios) {
  if (scenarios.empty()) throw Error(ErrorCode::InvalidConfig, "sweep needs at least one scenario");
  std::vector<std::future<SweepRow>> futures;
  for (const auto& sc : scenarios) {
    futures.push_back(std::async(std::launch::async, [&sc] {
      auto plans = build_wrapper_plans(sc.ewf);
      auto res = simulate(sc.ewf, plans, sc.topo, sc.cfg);
      SweepRow row;
      row.label = sc.label;
      row.makespan_s = res.makespan_s;
      row.compute_jobs = sc.ewf.count(JobKind::Compute);
      row.transfer_count_by_kind = res.transfer_count_by_kind;
      row.image_bytes_from_submit = res.bytes_through(sc.topo.submit.name, TransferKind::ContainerImage);
      row.worker_mean_io_wait_ms = res.worker_mean_io_wait_ms();
      row.image_loads = res.image_loads;
      return row;
    }));
  }
  std::vector<SweepRow> rows;
  for (auto& f : futures) rows.push_back(f.get());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
  return rows;
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "label\tmakespan_s\tcompute_jobs\tdata_transfers\timage_transfers\timage_bytes_from_submit\t"
         "worker_mean_io_wait_ms\timage_loads\n";
  for (const auto& r : rows) {
    auto count = [&](TransferKind k) {
      auto it = r.transfer_count_by_kind.find(k);
      return it == r.transfer_count_by_kind.end() ? std::size_t{0} : it->second;
    };
    out << r.label << '\t' << num(r.makespan_s) << '\t' << r.compute_jobs << '\t' << count(TransferKind::Data) << '\t'
        << count(TransferKind::ContainerImage) << '\t' << r.image_bytes_from_submit << '\t'
        << num(r.worker_mean_io_wait_ms) << '\t' << r.image_loads << '\n';
  }
  return out.str();
}

namespace {

Scenario scenario_from(const YAML::Node& n, const fs::path& base, const YAML::Node& shared) {
  auto get = [&](const char* key) -> YAML::Node {
    if (n[key]) return n[key];
    if (shared && shared[key]) return shared[key];
    return YAML::Node();
  };
  auto path_of = [&](const char* key) {
    auto v = get(key);
    if (!v) throw Error(ErrorCode::InvalidConfig, std::string("scenario is missing '") + key + "'");
    fs::path p = v.as<std::string>();
    return (p.is_absolute() ? p : base / p).string();
  };
  Scenario sc;
  if (!n["label"]) throw Error(ErrorCode::InvalidConfig, "scenario is missing 'label'");
  sc.label = n["label"].as<std::string>();

  PlanConfig pcfg;
  if (shared && shared["plan"]) pcfg = parse_plan_config(YAML::Dump(shared["plan"]), pcfg);
  if (n["plan"]) pcfg = parse_plan_config(YAML::Dump(n["plan"]), pcfg);
  if (shared && shared["sim"]) sc.cfg = parse_sim_config(YAML::Dump(shared["sim"]), sc.cfg);
  if (n["sim"]) sc.cfg = parse_sim_config(YAML::Dump(n["sim"]), sc.cfg);
  if (sc.cfg.placement_override) pcfg.placement_override = sc.cfg.placement_override;
  pcfg.docker_load_dedup = sc.cfg.docker_load_dedup;

  auto wf = load_workflow(path_of("workflow"));
  auto cat = load_catalog(path_of("catalog"));
  auto sites = load_sites(path_of("sites"));
  sc.topo = load_topology(path_of("topology"));
  sc.ewf = plan(wf, cat, sites, pcfg);
  return sc;
}

}  // namespace

std::vector<Scenario> load_scenarios(const std::string& path) {
  auto text = read_file(path, "scenario file");
  auto base = fs::path(path).parent_path();
  std::vector<Scenario> out;
  try {
    auto root = YAML::Load(text);
    if (!root.IsMap()) throw Error(ErrorCode::SyntaxError, "scenario file must be a map");
    if (root["scenarios"]) {
      YAML::Node shared = root["defaults"];
      for (const auto& n : root["scenarios"]) out.push_back(scenario_from(n, base, shared));
    } else {
      out.push_back(scenario_from(root, base, YAML::Node()));
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  return out;
}

}  // namespace cwms
