#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cwms/catalog.hpp"
#include "cwms/error.hpp"

namespace cwms {

enum class TransferKind { Data, ContainerImage, Executable };
enum class TransferMode { Copy, Link };

std::string_view to_string(TransferKind k) noexcept;
std::string_view to_string(TransferMode m) noexcept;
TransferKind parse_transfer_kind(std::string_view s);

// Supported URLs: file://<abs-path>, http://<host>[:port]/<path>.
struct Url {
  std::string scheme;
  std::string host;  // empty for file://
  int port = 0;
  std::string path;

  static Url parse(std::string_view text);
  std::string str() const;
};

// The first path segment of a file URL, or the host of an http URL. The
// planner names staging locations this way (http://<site>/..., file:///<site>/...).
std::string url_location(std::string_view url);

struct TransferRequest {
  std::string src;
  std::string dst;
  std::uint64_t bytes = 0;
  TransferKind kind = TransferKind::Data;
  bool link_ok = false;
};

struct TransferResult {
  std::uint64_t bytes_moved = 0;
  TransferMode mode = TransferMode::Copy;
  std::string checksum;
  std::optional<ErrorCode> error;
  std::string message;

  bool ok() const noexcept { return !error; }
};

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view data);

// Copies or links src to dst. Links iff link_ok and both ends live on the same
// filesystem; copies are checksum-verified. Throws cwms::Error.
TransferResult transfer(const TransferRequest& req);

// Runs requests on `parallelism` threads. Errors are reported per request;
// results keep input order.
std::vector<TransferResult> batch_transfer(const std::vector<TransferRequest>& reqs, int parallelism);

struct ImageBlob {
  std::string data;
  std::uint64_t size = 0;  // nominal image size recorded by the registry
};

class RegistryClient {
 public:
  virtual ~RegistryClient() = default;
  // Throws RegistryMiss when the image is unknown.
  ImageBlob pull(const ImageRef& ref);
  std::size_t reads() const noexcept { return reads_.load(); }

 protected:
  virtual ImageBlob do_pull(const ImageRef& ref) = 0;

 private:
  std::atomic<std::size_t> reads_{0};
};

// Fixture registry: <root>/<locator>__<tag> image files, each with a
// <locator>__<tag>.size sidecar holding the byte count. Missing tag = latest.
class DirectoryRegistry : public RegistryClient {
 public:
  explicit DirectoryRegistry(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path image_path(const ImageRef& ref) const;

 protected:
  ImageBlob do_pull(const ImageRef& ref) override;

 private:
  std::filesystem::path root_;
};

// In-memory registry for mock runs: returns a short synthetic payload and the
// declared nominal size.
class SyntheticRegistry : public RegistryClient {
 public:
  void add(const ImageRef& ref, std::uint64_t size);

 protected:
  ImageBlob do_pull(const ImageRef& ref) override;

 private:
  std::mutex mu_;
  std::map<std::string, std::uint64_t> images_;
};

struct ImageRecord {
  std::filesystem::path path;
  std::uint64_t size = 0;
  std::string checksum;
  bool cache_hit = false;
};

// At most one entry per (image url, location); entries are immutable.
// Concurrent requests for the same key share one producer.
class ImageCache {
 public:
  struct Entry {
    std::filesystem::path path;
    std::uint64_t size = 0;
    std::string checksum;
  };

  std::optional<Entry> find(const std::string& image, const std::string& location) const;
  Entry get_or_create(const std::string& image, const std::string& location,
                      const std::function<Entry()>& produce, bool* hit = nullptr);
  std::size_t size() const;

 private:
  using Key = std::pair<std::string, std::string>;
  mutable std::mutex mu_;
  std::map<Key, std::shared_future<Entry>> entries_;
};

// Exports a registry image (docker/shub) to an image file at `dest`. The
// (image, location) pair is pulled from the registry once; later calls reuse
// the cached file. Writes go through a temp file and rename.
ImageRecord export_image(const ImageRef& ref, const std::filesystem::path& dest, RegistryClient& registry,
                         ImageCache& cache, const std::string& location = "local");

}  // namespace cwms
