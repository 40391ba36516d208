#include "pipeline/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <mutex>

#include "core/error.hpp"
#include "core/text.hpp"

namespace needscope {

namespace {

using Digest = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

Digest new_digest() {
  Digest ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kInternal, "cannot initialize SHA-256");
  }
  return ctx;
}

std::string finish(Digest& ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw Error(ErrorCode::kInternal, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::mutex g_command_mutex;
std::vector<std::string> g_command;

std::string display_path(const std::filesystem::path& p, const std::filesystem::path& dir) {
  std::error_code ec;
  auto rel = std::filesystem::relative(p, dir, ec);
  if (!ec && !rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.lexically_normal().generic_string();
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  auto ctx = new_digest();
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return finish(ctx);
}

std::string sha256_hex(std::string_view data) {
  auto ctx = new_digest();
  EVP_DigestUpdate(ctx.get(), data.data(), data.size());
  return finish(ctx);
}

void set_command_line(std::vector<std::string> args) {
  std::lock_guard lock(g_command_mutex);
  g_command = std::move(args);
}

std::vector<std::string> command_line() {
  std::lock_guard lock(g_command_mutex);
  return g_command;
}

std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json stage_json(const StageRecord& record) {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["command_line"] = command_line();
  j["parameters"] = record.parameters;
  j["seeds"] = record.seeds;
  if (!record.taxonomy_version.empty()) j["taxonomy_version"] = record.taxonomy_version;
  j["inputs"] = nlohmann::json::object();
  j["outputs"] = nlohmann::json::object();
  j["started_at"] = record.started_at;
  j["finished_at"] = record.finished_at;
  return j;
}

void record_stage(const std::filesystem::path& dir, const StageRecord& record) {
  const auto path = (dir.empty() ? std::filesystem::path(".") : dir) / kManifestName;
  nlohmann::json manifest;
  std::error_code ec;
  if (std::filesystem::is_regular_file(path, ec)) {
    try {
      manifest = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception&) {
      manifest = nullptr;
    }
  }
  if (!manifest.is_object()) manifest = nlohmann::json::object();
  manifest["tool"] = kToolName;
  manifest["version"] = kToolVersion;
  auto entry = stage_json(record);
  for (const auto& p : record.inputs) {
    entry["inputs"][display_path(p, path.parent_path())] = sha256_file(p);
  }
  for (const auto& p : record.outputs) {
    entry["outputs"][display_path(p, path.parent_path())] = sha256_file(p);
  }
  manifest["stages"][record.stage] = std::move(entry);
  write_file_atomic(path, manifest.dump(2) + "\n");
}

nlohmann::json strip_timestamps(nlohmann::json manifest) {
  if (manifest.is_object()) {
    manifest.erase("started_at");
    manifest.erase("finished_at");
    for (auto& [key, value] : manifest.items()) value = strip_timestamps(std::move(value));
  } else if (manifest.is_array()) {
    for (auto& value : manifest) value = strip_timestamps(std::move(value));
  }
  return manifest;
}

}  // namespace needscope
