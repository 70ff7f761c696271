#include "modewise/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>

#include "modewise/error.hpp"

namespace modewise {
namespace {

std::string hex(const unsigned char* bytes, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kDigits[bytes[i] >> 4]);
    out.push_back(kDigits[bytes[i] & 0xF]);
  }
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const auto day = std::chrono::floor<std::chrono::days>(now);
  const std::chrono::year_month_day ymd(day);
  const std::chrono::hh_mm_ss hms(now - day);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), long(hms.hours().count()),
                long(hms.minutes().count()), long(hms.seconds().count()));
  return buf;
}

}  // namespace

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 init failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  return hex(md, len);
}

std::string RunManifest::config_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& arg : command_line) {
    for (unsigned char c : arg) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    // NUL separator between arguments
    h ^= 0;
    h *= 0x100000001b3ULL;
  }
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(h >> (56 - 8 * i));
  return hex(bytes, 8);
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json inputs_json = nlohmann::json::array();
  for (const auto& p : inputs) {
    inputs_json.push_back({{"path", p.string()}, {"sha256", file_digest(p)}});
  }
  return {{"tool_version", kToolVersion},
          {"command_line", command_line},
          {"config_hash", config_hash()},
          {"seeds", seeds},
          {"inputs", inputs_json},
          {"timestamp_utc", utc_now()}};
}

void write_manifest(const std::filesystem::path& artifact, const RunManifest& manifest) {
  auto path = artifact;
  path += ".manifest.json";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest.to_json().dump(2) << '\n';
}

}  // namespace modewise
