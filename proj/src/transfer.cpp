#include "cwms/transfer.hpp"

#include <sys/stat.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

namespace cwms {

namespace fs = std::filesystem;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return out.str();
  }

 private:
  EVP_MD_CTX* ctx_;
};

fs::path temp_sibling(const fs::path& dest) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream name;
  name << "." << dest.filename().string() << ".tmp." << std::hex << rng();
  return dest.parent_path() / name.str();
}

// Writes bytes next to dest and renames into place.
void atomic_write(const fs::path& dest, std::string_view data) {
  std::error_code ec;
  if (!dest.parent_path().empty()) fs::create_directories(dest.parent_path(), ec);
  auto tmp = temp_sibling(dest);
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::DestinationUnwritable, dest.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::DestinationUnwritable, dest.string());
  }
  fs::rename(tmp, dest, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::DestinationUnwritable, dest.string());
  }
}

void atomic_copy(const fs::path& src, const fs::path& dest) {
  std::error_code ec;
  if (!dest.parent_path().empty()) fs::create_directories(dest.parent_path(), ec);
  auto tmp = temp_sibling(dest);
  if (!fs::copy_file(src, tmp, fs::copy_options::overwrite_existing, ec) || ec)
    throw Error(ErrorCode::DestinationUnwritable, dest.string() + ": " + ec.message());
  fs::rename(tmp, dest, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::DestinationUnwritable, dest.string() + ": " + ec.message());
  }
}

bool same_filesystem(const fs::path& src, const fs::path& dest) {
  struct stat a {}, b {};
  auto dir = dest.parent_path().empty() ? fs::path(".") : dest.parent_path();
  if (::stat(src.c_str(), &a) != 0 || ::stat(dir.c_str(), &b) != 0) return false;
  return a.st_dev == b.st_dev;
}

std::string http_get(const Url& url) {
  httplib::Client client(url.host, url.port ? url.port : 80);
  client.set_connection_timeout(5);
  auto res = client.Get(url.path);
  if (!res || res->status != 200)
    throw Error(ErrorCode::SourceMissing, url.str() + (res ? " (HTTP " + std::to_string(res->status) + ")" : ""));
  return res->body;
}

}  // namespace

std::string_view to_string(TransferKind k) noexcept {
  switch (k) {
    case TransferKind::Data: return "Data";
    case TransferKind::ContainerImage: return "ContainerImage";
    case TransferKind::Executable: return "Executable";
  }
  return "?";
}

std::string_view to_string(TransferMode m) noexcept { return m == TransferMode::Copy ? "copy" : "link"; }

TransferKind parse_transfer_kind(std::string_view s) {
  if (s == "Data") return TransferKind::Data;
  if (s == "ContainerImage") return TransferKind::ContainerImage;
  if (s == "Executable") return TransferKind::Executable;
  throw Error(ErrorCode::SyntaxError, "unknown transfer kind '" + std::string(s) + "'");
}

Url Url::parse(std::string_view text) {
  auto sep = text.find("://");
  if (sep == std::string_view::npos) throw Error(ErrorCode::InvalidRequest, "not a url: '" + std::string(text) + "'");
  Url u;
  u.scheme = std::string(text.substr(0, sep));
  auto rest = text.substr(sep + 3);
  if (u.scheme == "file") {
    if (rest.empty() || rest.front() != '/')
      throw Error(ErrorCode::InvalidRequest, "file url needs an absolute path: '" + std::string(text) + "'");
    u.path = std::string(rest);
  } else if (u.scheme == "http") {
    auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    u.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    auto colon = authority.find(':');
    u.host = std::string(authority.substr(0, colon));
    if (colon != std::string_view::npos) u.port = std::stoi(std::string(authority.substr(colon + 1)));
    if (u.host.empty()) throw Error(ErrorCode::InvalidRequest, "http url without host: '" + std::string(text) + "'");
  } else {
    throw Error(ErrorCode::InvalidRequest, "unsupported url scheme '" + u.scheme + "'");
  }
  return u;
}

std::string Url::str() const {
  if (scheme == "file") return "file://" + path;
  return "http://" + host + (port ? ":" + std::to_string(port) : std::string{}) + path;
}

std::string url_location(std::string_view url) {
  auto sep = url.find("://");
  if (sep == std::string_view::npos) return {};
  auto scheme = url.substr(0, sep);
  auto rest = url.substr(sep + 3);
  if (scheme == "file") {
    auto first = rest.find_first_not_of('/');
    if (first == std::string_view::npos) return {};
    rest = rest.substr(first);
  }
  auto end = rest.find_first_of(scheme == "file" ? "/" : "/:");
  return std::string(rest.substr(0, end));
}

std::string sha256_bytes(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::SourceMissing, path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

TransferResult transfer(const TransferRequest& req) {
  if (req.kind == TransferKind::ContainerImage && req.bytes == 0)
    throw Error(ErrorCode::InvalidRequest, "container image transfer without a size: " + req.src);
  auto src = Url::parse(req.src);
  auto dst = Url::parse(req.dst);
  if (dst.scheme != "file") throw Error(ErrorCode::DestinationUnwritable, "only file:// destinations are writable");
  fs::path dest(dst.path);

  TransferResult result;
  if (src.scheme == "file") {
    fs::path source(src.path);
    std::error_code ec;
    if (!fs::is_regular_file(source, ec)) throw Error(ErrorCode::SourceMissing, req.src);
    if (!dest.parent_path().empty()) fs::create_directories(dest.parent_path(), ec);
    if (!fs::is_directory(dest.parent_path(), ec)) throw Error(ErrorCode::DestinationUnwritable, req.dst);

    if (req.link_ok && same_filesystem(source, dest)) {
      fs::remove(dest, ec);
      fs::create_symlink(fs::absolute(source), dest, ec);
      if (ec) throw Error(ErrorCode::DestinationUnwritable, req.dst + ": " + ec.message());
      result.mode = TransferMode::Link;
      result.bytes_moved = 0;
      result.checksum = sha256_file(source);
      return result;
    }
    auto expected = sha256_file(source);
    atomic_copy(source, dest);
    result.checksum = sha256_file(dest);
    if (result.checksum != expected) throw Error(ErrorCode::ChecksumMismatch, req.dst);
    result.bytes_moved = fs::file_size(dest);
    return result;
  }

  auto body = http_get(src);
  auto expected = sha256_bytes(body);
  atomic_write(dest, body);
  result.checksum = sha256_file(dest);
  if (result.checksum != expected) throw Error(ErrorCode::ChecksumMismatch, req.dst);
  result.bytes_moved = body.size();
  return result;
}

std::vector<TransferResult> batch_transfer(const std::vector<TransferRequest>& reqs, int parallelism) {
  if (parallelism < 1) throw Error(ErrorCode::InvalidRequest, "parallelism must be >= 1");
  std::vector<TransferResult> results(reqs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < reqs.size(); i = next++) {
      try {
        results[i] = transfer(reqs[i]);
      } catch (const Error& e) {
        results[i].error = e.code();
        results[i].message = e.what();
      } catch (const std::exception& e) {
        results[i].error = ErrorCode::InvalidRequest;
        results[i].message = e.what();
      }
    }
  };
  auto n = std::min<std::size_t>(static_cast<std::size_t>(parallelism), reqs.size());
  std::vector<std::jthread> threads;
  for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
  threads.clear();
  return results;
}

ImageBlob RegistryClient::pull(const ImageRef& ref) {
  ++reads_;
  return do_pull(ref);
}

fs::path DirectoryRegistry::image_path(const ImageRef& ref) const {
  return root_ / (ref.locator + "__" + ref.tag.value_or("latest"));
}

ImageBlob DirectoryRegistry::do_pull(const ImageRef& ref) {
  auto path = image_path(ref);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::RegistryMiss, ref.url());
  std::stringstream ss;
  ss << in.rdbuf();
  ImageBlob blob{ss.str(), 0};
  std::ifstream size_in(path.string() + ".size");
  if (!(size_in >> blob.size)) blob.size = blob.data.size();
  if (blob.size != blob.data.size())
    throw Error(ErrorCode::RegistryMiss, ref.url() + ": sidecar size does not match image file");
  return blob;
}

void SyntheticRegistry::add(const ImageRef& ref, std::uint64_t size) {
  std::lock_guard lock(mu_);
  images_[ref.url()] = size;
}

ImageBlob SyntheticRegistry::do_pull(const ImageRef& ref) {
  std::lock_guard lock(mu_);
  auto it = images_.find(ref.url());
  if (it == images_.end()) throw Error(ErrorCode::RegistryMiss, ref.url());
  return ImageBlob{"synthetic image " + ref.url() + " " + std::to_string(it->second) + "\n", it->second};
}

std::optional<ImageCache::Entry> ImageCache::find(const std::string& image, const std::string& location) const {
  std::shared_future<Entry> fut;
  {
    std::lock_guard lock(mu_);
    auto it = entries_.find({image, location});
    if (it == entries_.end()) return std::nullopt;
    fut = it->second;
  }
  return fut.get();
}

ImageCache::Entry ImageCache::get_or_create(const std::string& image, const std::string& location,
                                            const std::function<Entry()>& produce, bool* hit) {
  std::promise<Entry> promise;
  std::shared_future<Entry> fut;
  bool owner = false;
  {
    std::lock_guard lock(mu_);
    auto [it, fresh] = entries_.try_emplace({image, location});
    if (fresh) {
      it->second = promise.get_future().share();
      owner = true;
    }
    fut = it->second;
  }
  if (hit) *hit = !owner;
  if (owner) {
    try {
      promise.set_value(produce());
    } catch (...) {
      {
        std::lock_guard lock(mu_);
        entries_.erase({image, location});
      }
      promise.set_exception(std::current_exception());
    }
  }
  return fut.get();
}

std::size_t ImageCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

ImageRecord export_image(const ImageRef& ref, const fs::path& dest, RegistryClient& registry, ImageCache& cache,
                         const std::string& location) {
  if (!ref.is_registry())
    throw Error(ErrorCode::SchemeNotExportable, ref.url() + " is not a docker/shub registry image");
  bool hit = false;
  auto entry = cache.get_or_create(ref.url(), location, [&] {
    auto blob = registry.pull(ref);
    atomic_write(dest, blob.data);
    return ImageCache::Entry{dest, blob.size, sha256_bytes(blob.data)};
  }, &hit);

  if (hit && fs::weakly_canonical(entry.path) != fs::weakly_canonical(dest)) atomic_copy(entry.path, dest);
  return ImageRecord{dest, entry.size, entry.checksum, hit};
}

}  // namespace cwms
