#include "cwms/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

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

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      return parts;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string scalar(const YAML::Node& node, const char* key, bool required = true) {
  auto v = node[key];
  if (!v || v.IsNull()) {
    if (required) throw Error(ErrorCode::SyntaxError, std::string("missing field '") + key + "'");
    return {};
  }
  if (!v.IsScalar()) throw Error(ErrorCode::SyntaxError, std::string("field '") + key + "' must be a scalar");
  return v.Scalar();
}

// `profile` is a list of single-key maps ({env: {...}}) or one such map.
EnvMap parse_profiles(const YAML::Node& node) {
  EnvMap env;
  if (!node || node.IsNull()) return env;
  auto absorb = [&](const YAML::Node& m) {
    if (!m.IsMap()) throw Error(ErrorCode::SyntaxError, "profile entry must be a map");
    for (const auto& kv : m) {
      auto kind = kv.first.Scalar();
      if (lower(kind) != "env")
        throw Error(ErrorCode::SyntaxError, "unsupported profile kind '" + kind + "' (only env)");
      if (kv.second.IsNull()) continue;
      if (!kv.second.IsMap()) throw Error(ErrorCode::SyntaxError, "env profile must be a map");
      for (const auto& var : kv.second) env[var.first.Scalar()] = var.second.Scalar();
    }
  };
  if (node.IsSequence()) {
    for (const auto& m : node) absorb(m);
  } else {
    absorb(node);
  }
  return env;
}

void parse_transformation(const YAML::Node& t, Catalog& cat) {
  if (!t.IsMap()) throw Error(ErrorCode::SyntaxError, "transformation entry must be a map");
  auto ns = scalar(t, "namespace", false);
  auto name = scalar(t, "name");
  auto version = scalar(t, "version", false);
  auto shared_env = parse_profiles(t["profile"]);
  auto sites = t["site"];
  if (!sites || !sites.IsSequence())
    throw Error(ErrorCode::SyntaxError, "transformation '" + name + "' needs a 'site' list");
  for (const auto& s : sites) {
    TransformationEntry e;
    e.ns = ns;
    e.name = name;
    e.version = version;
    e.site = scalar(s, "name");
    e.arch = scalar(s, "arch", false);
    e.os = scalar(s, "os", false);
    e.pfn = scalar(s, "pfn");
    auto type = scalar(s, "type", false);
    e.install_type = type.empty() ? InstallType::Installed : parse_install_type(type);
    auto container = scalar(s, "container", false);
    if (!container.empty()) e.container = container;
    e.profiles = shared_env;
    for (auto& [k, v] : parse_profiles(s["profile"])) e.profiles[k] = v;
    cat.transformations.push_back(std::move(e));
  }
}

void parse_container(const YAML::Node& c, Catalog& cat) {
  if (!c.IsMap()) throw Error(ErrorCode::SyntaxError, "cont entry must be a map");
  ContainerDef def;
  def.name = scalar(c, "name");
  def.image = parse_image_url(scalar(c, "image"));
  def.runtime = parse_runtime(scalar(c, "type"));
  if (auto m = c["mount"]; m && !m.IsNull()) {
    if (!m.IsSequence()) throw Error(ErrorCode::SyntaxError, "mount must be a list");
    for (const auto& spec : m) def.mounts.push_back(parse_mount_spec(spec.Scalar()));
  }
  def.profiles = parse_profiles(c["profile"]);
  if (auto sz = c["image_size_bytes"]; sz && !sz.IsNull()) {
    try {
      auto v = sz.as<long long>();
      if (v < 0) throw Error(ErrorCode::SyntaxError, "image_size_bytes must be nonnegative");
      def.image_size_bytes = static_cast<std::uint64_t>(v);
    } catch (const YAML::Exception&) {
      throw Error(ErrorCode::SyntaxError, "image_size_bytes must be an integer");
    }
  }
  if (auto sl = c["site_local"]; sl && !sl.IsNull()) {
    try {
      def.site_local = sl.as<bool>();
    } catch (const YAML::Exception&) {
      throw Error(ErrorCode::SyntaxError, "site_local must be a boolean");
    }
  }
  auto name = def.name;
  if (!cat.containers.emplace(name, std::move(def)).second)
    throw Error(ErrorCode::DuplicateName, "container '" + name + "' defined twice");
}

void absorb_section(const std::string& key, const YAML::Node& value, Catalog& cat) {
  if (value.IsNull()) return;
  if (!value.IsSequence()) throw Error(ErrorCode::SyntaxError, "'" + key + "' must be a list");
  if (key == "transformations") {
    for (const auto& t : value) parse_transformation(t, cat);
  } else if (key == "cont") {
    for (const auto& c : value) parse_container(c, cat);
  } else {
    throw Error(ErrorCode::SyntaxError, "unknown catalog section '" + key + "'");
  }
}

}  // namespace

std::string_view to_string(Runtime r) noexcept {
  switch (r) {
    case Runtime::Docker: return "docker";
    case Runtime::Singularity: return "singularity";
    case Runtime::Shifter: return "shifter";
  }
  return "?";
}

std::string_view to_string(ImageScheme s) noexcept {
  switch (s) {
    case ImageScheme::Docker: return "docker";
    case ImageScheme::Shub: return "shub";
    case ImageScheme::Shifter: return "shifter";
    case ImageScheme::File: return "file";
    case ImageScheme::Http: return "http";
  }
  return "?";
}

std::string_view to_string(InstallType t) noexcept {
  return t == InstallType::Installed ? "INSTALLED" : "STAGEABLE";
}

Runtime parse_runtime(std::string_view s) {
  auto v = lower(s);
  if (v == "docker") return Runtime::Docker;
  if (v == "singularity") return Runtime::Singularity;
  if (v == "shifter") return Runtime::Shifter;
  throw Error(ErrorCode::SyntaxError, "unknown container type '" + std::string(s) + "'");
}

InstallType parse_install_type(std::string_view s) {
  auto v = lower(s);
  if (v == "installed") return InstallType::Installed;
  if (v == "stageable") return InstallType::Stageable;
  throw Error(ErrorCode::SyntaxError, "unknown transformation type '" + std::string(s) + "'");
}

std::string ImageRef::url() const {
  std::string out;
  switch (scheme) {
    case ImageScheme::Docker: out = "docker:///" + locator; break;
    case ImageScheme::Shifter: out = "shifter:///" + locator; break;
    case ImageScheme::Shub: out = "shub://" + locator; break;
    case ImageScheme::File: out = "file://" + locator; break;
    case ImageScheme::Http: out = "http://" + locator; break;
  }
  if (tag) out += ":" + *tag;
  return out;
}

std::string MountSpec::str() const {
  std::string out = src + ":" + dst;
  if (!options.empty()) {
    out += ":";
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (i) out += ",";
      out += options[i];
    }
  }
  return out;
}

std::string TransformationEntry::id() const {
  std::string out;
  if (!ns.empty()) out = ns + "::";
  out += name;
  if (!version.empty()) out += ":" + version;
  return out;
}

const ContainerDef* Catalog::find_container(std::string_view name) const {
  auto it = containers.find(std::string(name));
  return it == containers.end() ? nullptr : &it->second;
}

ImageRef parse_image_url(std::string_view url) {
  if (url.empty()) throw Error(ErrorCode::EmptyLocator, "empty image url");
  auto sep = url.find("://");
  if (sep == std::string_view::npos)
    throw Error(ErrorCode::UnknownScheme, "no scheme in '" + std::string(url) + "'");
  auto scheme = lower(url.substr(0, sep));
  auto rest = std::string(url.substr(sep + 3));

  ImageRef ref;
  if (scheme == "docker") ref.scheme = ImageScheme::Docker;
  else if (scheme == "shub") ref.scheme = ImageScheme::Shub;
  else if (scheme == "shifter") ref.scheme = ImageScheme::Shifter;
  else if (scheme == "file") ref.scheme = ImageScheme::File;
  else if (scheme == "http") ref.scheme = ImageScheme::Http;
  else throw Error(ErrorCode::UnknownScheme, "unsupported image scheme '" + scheme + "'");

  if (ref.scheme == ImageScheme::File || ref.scheme == ImageScheme::Http) {
    // Plain file locations: colons are never tags.
    if (rest.empty() || rest == "/")
      throw Error(ErrorCode::EmptyLocator, "empty locator in '" + std::string(url) + "'");
    ref.locator = rest;
    return ref;
  }

  auto first = rest.find_first_not_of('/');
  rest = first == std::string::npos ? std::string{} : rest.substr(first);
  auto last_slash = rest.rfind('/');
  auto colon = rest.rfind(':');
  if (colon != std::string::npos && (last_slash == std::string::npos || colon > last_slash)) {
    auto tag = rest.substr(colon + 1);
    if (tag.empty()) throw Error(ErrorCode::SyntaxError, "empty tag in '" + std::string(url) + "'");
    ref.tag = tag;
    rest.resize(colon);
  }
  if (rest.empty()) throw Error(ErrorCode::EmptyLocator, "empty locator in '" + std::string(url) + "'");
  ref.locator = rest;
  return ref;
}

MountSpec parse_mount_spec(std::string_view spec) {
  auto parts = split(spec, ':');
  if (parts.size() < 2 || parts.size() > 3)
    throw Error(ErrorCode::MalformedMount, "expected src:dst[:options], got '" + std::string(spec) + "'");
  MountSpec m{parts[0], parts[1], {}};
  if (m.src.empty() || m.dst.empty() || m.src.front() != '/' || m.dst.front() != '/')
    throw Error(ErrorCode::MalformedMount, "mount paths must be absolute in '" + std::string(spec) + "'");
  if (parts.size() == 3) {
    for (auto& opt : split(parts[2], ',')) {
      if (opt != "ro" && opt != "rw")
        throw Error(ErrorCode::UnknownOption, "mount option '" + opt + "'");
      m.options.push_back(opt);
    }
  }
  return m;
}

void validate_catalog(const Catalog& cat) {
  for (const auto& [key, c] : cat.containers) {
    if (key != c.name) throw Error(ErrorCode::InvalidContainer, "container key/name mismatch '" + key + "'");
    bool shifter_image = c.image.scheme == ImageScheme::Shifter;
    bool shifter_runtime = c.runtime == Runtime::Shifter;
    if (shifter_image != shifter_runtime)
      throw Error(ErrorCode::InvalidContainer,
                  "container '" + c.name + "': shifter images require the shifter runtime and vice versa");
    if (c.image.locator.empty()) throw Error(ErrorCode::EmptyLocator, "container '" + c.name + "'");
  }
  std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;
  for (const auto& t : cat.transformations) {
    if (!seen.emplace(t.ns, t.name, t.version, t.site).second)
      throw Error(ErrorCode::DuplicateName, "transformation '" + t.id() + "' at site '" + t.site + "' defined twice");
    if (t.container && !cat.containers.count(*t.container))
      throw Error(ErrorCode::DanglingContainerRef,
                  "transformation '" + t.id() + "' references unknown container '" + *t.container + "'");
  }
}

Catalog parse_catalog(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  Catalog cat;
  try {
    if (root.IsNull()) return cat;
    if (root.IsSequence()) {
      for (const auto& item : root) {
        if (!item.IsMap()) throw Error(ErrorCode::SyntaxError, "top-level items must be maps");
        for (const auto& kv : item) absorb_section(kv.first.Scalar(), kv.second, cat);
      }
    } else if (root.IsMap()) {
      for (const auto& kv : root) absorb_section(kv.first.Scalar(), kv.second, cat);
    } else {
      throw Error(ErrorCode::SyntaxError, "catalog must be a map or a list of sections");
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  validate_catalog(cat);
  return cat;
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open catalog '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_catalog(ss.str());
}

std::string serialize_catalog(const Catalog& cat) {
  YAML::Emitter out;
  out << YAML::BeginSeq;

  out << YAML::BeginMap << YAML::Key << "transformations" << YAML::Value << YAML::BeginSeq;
  // Group site entries under their logical transformation, first-seen order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TransformationEntry*>> groups;
  for (const auto& t : cat.transformations) {
    auto key = t.ns + '\x1f' + t.name + '\x1f' + t.version;
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&t);
  }
  for (const auto& key : order) {
    const auto& members = groups[key];
    const auto& head = *members.front();
    out << YAML::BeginMap;
    out << YAML::Key << "namespace" << YAML::Value << YAML::DoubleQuoted << head.ns;
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << head.name;
    out << YAML::Key << "version" << YAML::Value << YAML::DoubleQuoted << head.version;
    out << YAML::Key << "site" << YAML::Value << YAML::BeginSeq;
    for (const auto* t : members) {
      out << YAML::BeginMap;
      out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << t->site;
      out << YAML::Key << "arch" << YAML::Value << YAML::DoubleQuoted << t->arch;
      out << YAML::Key << "os" << YAML::Value << YAML::DoubleQuoted << t->os;
      if (t->container) out << YAML::Key << "container" << YAML::Value << YAML::DoubleQuoted << *t->container;
      out << YAML::Key << "pfn" << YAML::Value << YAML::DoubleQuoted << t->pfn;
      out << YAML::Key << "type" << YAML::Value << YAML::DoubleQuoted << std::string(to_string(t->install_type));
      if (!t->profiles.empty()) {
        out << YAML::Key << "profile" << YAML::Value << YAML::BeginSeq << YAML::BeginMap;
        out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
        for (const auto& [k, v] : t->profiles) out << YAML::Key << k << YAML::Value << YAML::DoubleQuoted << v;
        out << YAML::EndMap << YAML::EndMap << YAML::EndSeq;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::BeginMap << YAML::Key << "cont" << YAML::Value << YAML::BeginSeq;
  for (const auto& [name, c] : cat.containers) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << c.name;
    out << YAML::Key << "image" << YAML::Value << YAML::DoubleQuoted << c.image.url();
    out << YAML::Key << "type" << YAML::Value << YAML::DoubleQuoted << std::string(to_string(c.runtime));
    if (!c.mounts.empty()) {
      out << YAML::Key << "mount" << YAML::Value << YAML::BeginSeq;
      for (const auto& m : c.mounts) out << YAML::DoubleQuoted << m.str();
      out << YAML::EndSeq;
    }
    if (!c.profiles.empty()) {
      out << YAML::Key << "profile" << YAML::Value << YAML::BeginSeq << YAML::BeginMap;
      out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
      for (const auto& [k, v] : c.profiles) out << YAML::Key << k << YAML::Value << YAML::DoubleQuoted << v;
      out << YAML::EndMap << YAML::EndMap << YAML::EndSeq;
    }
    out << YAML::Key << "image_size_bytes" << YAML::Value << c.image_size_bytes;
    out << YAML::Key << "site_local" << YAML::Value << c.site_local;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::EndSeq;
  return std::string(out.c_str()) + "\n";
}

ResolvedTransformation resolve_transformation(const Catalog& cat, std::string_view id,
                                              std::string_view site) {
  for (const auto& t : cat.transformations) {
    if (t.site == site && t.id() == id) {
      const ContainerDef* c = nullptr;
      if (t.container) {
        c = cat.find_container(*t.container);
        if (!c) throw Error(ErrorCode::DanglingContainerRef, *t.container);
      }
      return {&t, c};
    }
  }
  throw Error(ErrorCode::NotFound,
              "no transformation '" + std::string(id) + "' at site '" + std::string(site) + "'");
}

}  // namespace cwms
