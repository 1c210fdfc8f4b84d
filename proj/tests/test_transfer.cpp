#include <doctest.h>
#include <httplib.h>

#include <sys/stat.h>

#include <thread>

#include "cwms/error.hpp"
#include "cwms/transfer.hpp"
#include "support.hpp"

using namespace cwms;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& data) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << data;
}

std::string file_url(const fs::path& p) { return "file://" + p.string(); }

// A second filesystem for the cross-device copy case, when the host has one.
std::optional<fs::path> other_filesystem(const fs::path& than) {
  fs::path shm("/dev/shm");
  struct stat a {}, b {};
  if (!fs::is_directory(shm) || ::stat(shm.c_str(), &a) != 0 || ::stat(than.c_str(), &b) != 0) return std::nullopt;
  if (a.st_dev == b.st_dev) return std::nullopt;
  auto dir = shm / "cwms-test-xfs";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("url parsing and location") {
  auto u = Url::parse("http://local:8080/staging/a.txt");
  CHECK(u.scheme == "http");
  CHECK(u.host == "local");
  CHECK(u.port == 8080);
  CHECK(u.path == "/staging/a.txt");
  CHECK(u.str() == "http://local:8080/staging/a.txt");
  CHECK(url_location("http://condor/staging/x") == "condor");
  CHECK(url_location("file:///condor/staging/x") == "condor");
  CHECK_THROWS_AS(Url::parse("file://relative"), Error);
  CHECK_THROWS_AS(Url::parse("gsiftp://x/y"), Error);
}

TEST_CASE("sha256 of known vectors") {
  CHECK(sha256_bytes("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_bytes("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("same-filesystem transfer links when allowed and copies otherwise") {
  auto dir = testing::scratch_dir("xfer-same");
  write(dir / "src/a.dat", std::string(4096, 'x'));

  auto linked = transfer({file_url(dir / "src/a.dat"), file_url(dir / "dst/a.dat"), 4096, TransferKind::Data, true});
  CHECK(linked.mode == TransferMode::Link);
  CHECK(linked.bytes_moved == 0);
  CHECK(fs::is_symlink(dir / "dst/a.dat"));

  auto copied = transfer({file_url(dir / "src/a.dat"), file_url(dir / "dst/b.dat"), 4096, TransferKind::Data, false});
  CHECK(copied.mode == TransferMode::Copy);
  CHECK(copied.bytes_moved == 4096);
  CHECK(copied.checksum == sha256_file(dir / "src/a.dat"));
  CHECK(testing::slurp(dir / "dst/b.dat") == testing::slurp(dir / "src/a.dat"));
}

TEST_CASE("cross-filesystem transfer copies even when linking is allowed") {
  auto dir = testing::scratch_dir("xfer-cross");
  auto other = other_filesystem(dir);
  if (!other) return;
  write(dir / "a.dat", "payload");
  auto r = transfer({file_url(dir / "a.dat"), file_url(*other / "a.dat"), 7, TransferKind::Data, true});
  CHECK(r.mode == TransferMode::Copy);
  CHECK(r.bytes_moved == 7);
  CHECK_FALSE(fs::is_symlink(*other / "a.dat"));
  fs::remove_all(*other);
}

TEST_CASE("http source") {
  httplib::Server server;
  server.Get("/staging/hello.txt", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("hello over http", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto dir = testing::scratch_dir("xfer-http");
  auto base = "http://127.0.0.1:" + std::to_string(port);
  auto r = transfer({base + "/staging/hello.txt", file_url(dir / "hello.txt"), 15, TransferKind::Data, false});
  CHECK(r.bytes_moved == 15);
  CHECK(testing::slurp(dir / "hello.txt") == "hello over http");

  try {
    transfer({base + "/staging/absent", file_url(dir / "absent"), 1, TransferKind::Data, false});
    FAIL("expected SourceMissing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceMissing);
  }
  server.stop();
  th.join();
}

TEST_CASE("missing source and unsized images") {
  auto dir = testing::scratch_dir("xfer-missing");
  try {
    transfer({file_url(dir / "nope"), file_url(dir / "x"), 1, TransferKind::Data, false});
    FAIL("expected SourceMissing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceMissing);
  }
  CHECK_THROWS_AS(transfer({file_url(dir / "nope"), file_url(dir / "x"), 0, TransferKind::ContainerImage, false}),
                  Error);
}

TEST_CASE("batch transfer keeps order and reports per-request errors") {
  auto dir = testing::scratch_dir("xfer-batch");
  std::vector<TransferRequest> reqs;
  for (int i = 0; i < 5; ++i) {
    write(dir / ("s" + std::to_string(i)), std::string(100 + i, 'a' + i));
    reqs.push_back({file_url(dir / ("s" + std::to_string(i))), file_url(dir / "out" / ("d" + std::to_string(i))),
                    static_cast<std::uint64_t>(100 + i), TransferKind::Data, false});
  }
  auto results = batch_transfer(reqs, 3);
  REQUIRE(results.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(results[i].ok());
    CHECK(results[i].bytes_moved == static_cast<std::uint64_t>(100 + i));
  }
  CHECK(batch_transfer({}, 4).empty());

  std::vector<TransferRequest> mixed{reqs[0], {file_url(dir / "ghost"), file_url(dir / "g"), 1}, reqs[2]};
  auto m = batch_transfer(mixed, 2);
  CHECK(m[0].ok());
  CHECK(m[1].error == ErrorCode::SourceMissing);
  CHECK(m[2].ok());
}

TEST_CASE("registry export goes through the cache") {
  DirectoryRegistry registry(testing::source_path("tests/fixtures/registry"));
  ImageCache cache;
  auto dir = testing::scratch_dir("xfer-export");
  auto ref = parse_image_url("docker:///rynge/montage:latest");

  auto first = export_image(ref, dir / "montage.tar", registry, cache);
  CHECK_FALSE(first.cache_hit);
  CHECK(registry.reads() == 1);
  CHECK(first.size == fs::file_size(dir / "montage.tar"));
  CHECK(first.checksum == sha256_file(dir / "montage.tar"));

  auto second = export_image(ref, dir / "other.tar", registry, cache);
  CHECK(second.cache_hit);
  CHECK(registry.reads() == 1);
  CHECK(second.checksum == first.checksum);
  CHECK(sha256_file(dir / "other.tar") == first.checksum);

  export_image(ref, dir / "elsewhere.tar", registry, cache, "condor");
  CHECK(registry.reads() == 2);
  CHECK(cache.size() == 2);

  try {
    export_image(parse_image_url("shifter:///rynge/montage:latest"), dir / "s", registry, cache);
    FAIL("expected SchemeNotExportable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemeNotExportable);
  }
  try {
    export_image(parse_image_url("docker:///nobody/here:1"), dir / "n", registry, cache);
    FAIL("expected RegistryMiss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RegistryMiss);
  }
}

TEST_CASE("concurrent exports of one image pull once") {
  SyntheticRegistry registry;
  auto ref = parse_image_url("docker:///casa/nowcast:latest");
  registry.add(ref, 488'000'000);
  ImageCache cache;
  auto dir = testing::scratch_dir("xfer-concurrent");
  std::atomic<int> hits{0}, wrong_size{0};
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 16; ++i)
      threads.emplace_back([&, i] {
        auto rec = export_image(ref, dir / ("img" + std::to_string(i) + ".tar"), registry, cache);
        hits += rec.cache_hit;
        wrong_size += rec.size != 488'000'000u;
      });
  }
  CHECK(registry.reads() == 1);
  CHECK(hits == 15);
  CHECK(wrong_size == 0);
  CHECK(cache.size() == 1);
}
