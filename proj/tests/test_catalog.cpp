#include <doctest.h>

#include "cwms/catalog.hpp"
#include "cwms/error.hpp"
#include "support.hpp"

using namespace cwms;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected cwms::Error");
  return ErrorCode::SyntaxError;
}

}  // namespace

TEST_CASE("listing fixture parses into one transformation and one container") {
  auto cat = load_catalog(testing::source_path("tests/fixtures/catalog_listing.yaml"));
  REQUIRE(cat.transformations.size() == 1);
  const auto& t = cat.transformations[0];
  CHECK(t.id() == "example::keg:1.0");
  CHECK(t.site == "isi");
  CHECK(t.arch == "x86");
  CHECK(t.os == "linux");
  CHECK(t.pfn == "/shared/pegasus/bin/pegasus-keg");
  CHECK(t.install_type == InstallType::Installed);
  REQUIRE(t.container);
  CHECK(*t.container == "centos-pegasus");

  REQUIRE(cat.containers.size() == 1);
  const auto& c = cat.containers.at("centos-pegasus");
  CHECK(c.runtime == Runtime::Docker);
  CHECK(c.image == ImageRef{ImageScheme::Docker, "rynge/montage", "latest"});
  CHECK(c.image.url() == "docker:///rynge/montage:latest");
  REQUIRE(c.mounts.size() == 1);
  CHECK(c.mounts[0] == MountSpec{"/Volumes/Work/lfs1", "/shared-data/", {"ro"}});
  CHECK(c.profiles == EnvMap{{"JAVA_HOME", "/bin/java.1.6"}});
  CHECK(c.image_size_bytes == 0);
  CHECK_FALSE(c.site_local);
}

TEST_CASE("empty catalog documents") {
  CHECK(parse_catalog("").transformations.empty());
  auto cat = parse_catalog("transformations: []\ncont: []\n");
  CHECK(cat.transformations.empty());
  CHECK(cat.containers.empty());
}

TEST_CASE("three transformations share one container definition") {
  const char* doc = R"(
- transformations:
  - {namespace: a, name: x, version: "1", site: [{name: s, container: c1, pfn: /x, type: INSTALLED}]}
  - {namespace: a, name: y, version: "1", site: [{name: s, container: c1, pfn: /y, type: INSTALLED}]}
  - {namespace: a, name: z, version: "1", site: [{name: s, container: c1, pfn: /z, type: INSTALLED}]}
- cont:
  - {name: c1, image: "docker:///a/b:2", type: docker}
)";
  auto cat = parse_catalog(doc);
  REQUIRE(cat.containers.size() == 1);
  int resolved = 0;
  for (const auto& t : cat.transformations) {
    auto r = resolve_transformation(cat, t.id(), "s");
    CHECK(r.container == &cat.containers.at("c1"));
    ++resolved;
  }
  // brute-force scan of the entries
  int referencing = 0;
  for (const auto& t : cat.transformations) referencing += t.container == std::optional<std::string>("c1");
  CHECK(resolved == 3);
  CHECK(referencing == 3);
}

TEST_CASE("catalog errors") {
  CHECK(code_of([] { parse_catalog("- transformations: [[[\n"); }) == ErrorCode::SyntaxError);
  CHECK(code_of([] {
          parse_catalog("transformations:\n  - {namespace: a, name: x, version: '1', site: [{name: s, container: nope, "
                        "pfn: /x}]}\n");
        }) == ErrorCode::DanglingContainerRef);
  CHECK(code_of([] {
          parse_catalog("cont:\n  - {name: c, image: 'docker:///a', type: docker}\n  - {name: c, image: "
                        "'docker:///b', type: docker}\n");
        }) == ErrorCode::DuplicateName);
  CHECK(code_of([] {
          parse_catalog("transformations:\n  - {namespace: a, name: x, version: '1', site: [{name: s, pfn: /x}, "
                        "{name: s, pfn: /y, type: STAGEABLE}]}\n");
        }) == ErrorCode::DuplicateName);
  CHECK(code_of([] {
          parse_catalog("cont:\n  - {name: c, image: 'docker:///a', type: docker, profile: [{condor: {a: b}}]}\n");
        }) == ErrorCode::SyntaxError);
  CHECK(code_of([] { parse_catalog("cont:\n  - {name: c, image: 'docker:///a', type: shifter}\n"); }) ==
        ErrorCode::InvalidContainer);
}

TEST_CASE("image url decomposition") {
  CHECK(parse_image_url("docker:///rynge/montage:latest") == ImageRef{ImageScheme::Docker, "rynge/montage", "latest"});
  CHECK(parse_image_url("shub://singularity-hub.org/pegasus-isi/fedora-montage") ==
        ImageRef{ImageScheme::Shub, "singularity-hub.org/pegasus-isi/fedora-montage", std::nullopt});
  CHECK(parse_image_url("shifter:///papajim/namd_image:latest") ==
        ImageRef{ImageScheme::Shifter, "papajim/namd_image", "latest"});
  CHECK(parse_image_url("docker:///registry:5000/img") ==
        ImageRef{ImageScheme::Docker, "registry:5000/img", std::nullopt});
  CHECK(parse_image_url("file:///images/centos.tar").scheme == ImageScheme::File);
  CHECK(parse_image_url("file:///images/centos.tar").url() == "file:///images/centos.tar");
  CHECK(code_of([] { parse_image_url("ftp://x/y"); }) == ErrorCode::UnknownScheme);
  CHECK(code_of([] { parse_image_url("docker:///"); }) == ErrorCode::EmptyLocator);
  for (auto url : {"docker:///rynge/montage:latest", "shub://singularity-hub.org/pegasus-isi/fedora-montage",
                   "shifter:///papajim/namd_image:latest"})
    CHECK(parse_image_url(url).url() == url);
}

TEST_CASE("mount specs") {
  CHECK(parse_mount_spec("/Volumes/Work/lfs1:/shared-data/:ro") ==
        MountSpec{"/Volumes/Work/lfs1", "/shared-data/", {"ro"}});
  CHECK(parse_mount_spec("/a:/b") == MountSpec{"/a", "/b", {}});
  CHECK(parse_mount_spec("/a:/b").str() == "/a:/b");
  CHECK(code_of([] { parse_mount_spec("/a"); }) == ErrorCode::MalformedMount);
  CHECK(code_of([] { parse_mount_spec("a:/b"); }) == ErrorCode::MalformedMount);
  CHECK(code_of([] { parse_mount_spec("/a:/b:exec"); }) == ErrorCode::UnknownOption);
}

TEST_CASE("resolve_transformation") {
  auto cat = load_catalog(testing::source_path("tests/fixtures/catalog_listing.yaml"));
  auto r = resolve_transformation(cat, "example::keg:1.0", "isi");
  REQUIRE(r.entry);
  REQUIRE(r.container);
  CHECK(r.container->name == "centos-pegasus");
  CHECK(code_of([&] { resolve_transformation(cat, "example::keg:1.0", "elsewhere"); }) == ErrorCode::NotFound);

  auto plain = parse_catalog("transformations:\n  - {namespace: a, name: x, version: '1', site: [{name: s, pfn: /x}]}\n");
  auto p = resolve_transformation(plain, "a::x:1", "s");
  CHECK(p.entry->pfn == "/x");
  CHECK(p.container == nullptr);
}

TEST_CASE("property: catalog round trip and reference closure") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    Catalog cat;
    int nc = testing::uniform(rng, 0, 3);
    std::vector<std::string> names;
    for (int c = 0; c < nc; ++c) {
      auto runtime = static_cast<Runtime>(testing::uniform(rng, 0, 2));
      auto def = testing::make_container("c" + std::to_string(c), runtime,
                                         static_cast<std::uint64_t>(testing::uniform(rng, 0, 1000)) * 1000);
      if (testing::coin(rng)) def.mounts.push_back(MountSpec{"/data/" + std::to_string(c), "/mnt", {"ro"}});
      if (testing::coin(rng)) def.profiles["VAR" + std::to_string(c)] = "value " + std::to_string(iter);
      def.site_local = testing::coin(rng, 0.2);
      names.push_back(def.name);
      cat.containers[def.name] = def;
    }
    int nt = testing::uniform(rng, 0, 4);
    for (int t = 0; t < nt; ++t) {
      int sites = testing::uniform(rng, 1, 2);
      for (int s = 0; s < sites; ++s) {
        std::optional<std::string> cont;
        if (!names.empty() && testing::coin(rng)) cont = names[testing::uniform(rng, 0, nc - 1)];
        auto e = testing::make_tx("tx" + std::to_string(t), "site" + std::to_string(s), cont);
        if (testing::coin(rng, 0.3)) e.install_type = InstallType::Stageable;
        if (testing::coin(rng, 0.3)) e.profiles["PATH"] = "/opt/bin";
        cat.transformations.push_back(e);
      }
    }
    auto text = serialize_catalog(cat);
    auto back = parse_catalog(text);
    CHECK(back == cat);
    CHECK(parse_catalog(serialize_catalog(back)) == back);
    for (const auto& t : back.transformations)
      if (t.container) CHECK(back.containers.count(*t.container) == 1);
  }
}
