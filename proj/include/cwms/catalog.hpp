#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cwms {

enum class Runtime { Docker, Singularity, Shifter };
enum class ImageScheme { Docker, Shub, Shifter, File, Http };
enum class InstallType { Installed, Stageable };

std::string_view to_string(Runtime r) noexcept;
std::string_view to_string(ImageScheme s) noexcept;
std::string_view to_string(InstallType t) noexcept;
Runtime parse_runtime(std::string_view s);
InstallType parse_install_type(std::string_view s);

using EnvMap = std::map<std::string, std::string>;

struct ImageRef {
  ImageScheme scheme = ImageScheme::Docker;
  std::string locator;
  std::optional<std::string> tag;

  // Registry images (docker, shub) can be exported to an image file.
  bool is_registry() const noexcept {
    return scheme == ImageScheme::Docker || scheme == ImageScheme::Shub;
  }
  std::string url() const;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct MountSpec {
  std::string src;
  std::string dst;
  std::vector<std::string> options;

  std::string str() const;
  friend bool operator==(const MountSpec&, const MountSpec&) = default;
};

struct ContainerDef {
  std::string name;
  ImageRef image;
  Runtime runtime = Runtime::Docker;
  std::vector<MountSpec> mounts;
  EnvMap profiles;
  std::uint64_t image_size_bytes = 0;
  bool site_local = false;

  friend bool operator==(const ContainerDef&, const ContainerDef&) = default;
};

struct TransformationEntry {
  std::string ns;
  std::string name;
  std::string version;
  std::string site;
  std::string arch;
  std::string os;
  std::string pfn;
  InstallType install_type = InstallType::Installed;
  std::optional<std::string> container;
  EnvMap profiles;

  // Logical id in the form "namespace::name:version".
  std::string id() const;
  friend bool operator==(const TransformationEntry&, const TransformationEntry&) = default;
};

struct Catalog {
  std::vector<TransformationEntry> transformations;
  std::map<std::string, ContainerDef> containers;

  const ContainerDef* find_container(std::string_view name) const;
  friend bool operator==(const Catalog&, const Catalog&) = default;
};

ImageRef parse_image_url(std::string_view url);
MountSpec parse_mount_spec(std::string_view spec);

// Parses the YAML catalog document (transformations + cont sections).
Catalog parse_catalog(std::string_view text);
Catalog load_catalog(const std::string& path);
std::string serialize_catalog(const Catalog& cat);

// Checks the cross-entry invariants; parse_catalog already calls this.
void validate_catalog(const Catalog& cat);

struct ResolvedTransformation {
  const TransformationEntry* entry = nullptr;
  const ContainerDef* container = nullptr;
};

ResolvedTransformation resolve_transformation(const Catalog& cat, std::string_view id,
                                              std::string_view site);

}  // namespace cwms
