#ifndef WEDGEWAVE_CACHE_HPP
#define WEDGEWAVE_CACHE_HPP

#include "wedgewave/net.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace wedgewave {

// Persisted joint spectral decomposition, keyed by a content hash of the
// grids and caps.  Stored quantities are the exact integer momentum labels,
// so a round trip reproduces the spectrum bit for bit.

inline std::string spectrum_cache_key(const FockSpace& f1, const FockSpace& f2) {
  std::ostringstream key;
  key.precision(17);
  key << "v1;g1=" << f1.grid.spacing << "," << f1.grid.count << "," << f1.per_mode_cap << ","
      << f1.energy_cap << ";g2=" << f2.grid.spacing << "," << f2.grid.count << ","
      << f2.per_mode_cap << "," << f2.energy_cap;
  return key.str();
}

struct LoadedSpectrum {
  std::string key;
  int d1 = 0, d2 = 0;
  double spacing1 = 0.0, spacing2 = 0.0;
  std::vector<int> m1, m2;
};

inline std::filesystem::path spectrum_cache_path(const std::filesystem::path& dir,
                                                 const std::string& key) {
  std::ostringstream name;
  name << "spectrum_" << std::hex << fnv1a64(key) << ".json";
  return dir / name.str();
}

inline std::filesystem::path save_spectrum(const TwoDNet& net, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string key = spectrum_cache_key(net.factor1, net.factor2);

  nlohmann::json payload;
  payload["d1"] = net.d1;
  payload["d2"] = net.d2;
  payload["spacing1"] = net.factor1.grid.spacing;
  payload["spacing2"] = net.factor2.grid.spacing;
  payload["m1"] = net.m1;
  payload["m2"] = net.m2;

  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["key"] = key;
  doc["key_hash"] = fnv1a64(key);
  doc["payload"] = payload;
  doc["checksum"] = fnv1a64(payload.dump());

  const fs::path path = spectrum_cache_path(dir, key);
  std::ofstream out(path);
  if (!out) throw CacheError("save_spectrum: cannot write " + path.string());
  out << doc.dump(2) << "\n";
  return path;
}

inline LoadedSpectrum load_spectrum(const std::filesystem::path& path,
                                    const std::string& expected_key) {
  std::ifstream in(path);
  if (!in) throw CacheError("load_spectrum: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw CacheCorruptError("load_spectrum: unparsable cache file: " + std::string(e.what()));
  }
  try {
    if (doc.at("format_version").get<int>() != 1)
      throw CacheStaleError("load_spectrum: unknown format version");
    const auto& payload = doc.at("payload");
    if (doc.at("checksum").get<std::uint64_t>() != fnv1a64(payload.dump()))
      throw CacheCorruptError("load_spectrum: checksum mismatch in " + path.string());
    const std::string key = doc.at("key").get<std::string>();
    if (key != expected_key || doc.at("key_hash").get<std::uint64_t>() != fnv1a64(key))
      throw CacheStaleError("load_spectrum: cache key does not match current configuration");
    LoadedSpectrum spec;
    spec.key = key;
    spec.d1 = payload.at("d1").get<int>();
    spec.d2 = payload.at("d2").get<int>();
    spec.spacing1 = payload.at("spacing1").get<double>();
    spec.spacing2 = payload.at("spacing2").get<double>();
    spec.m1 = payload.at("m1").get<std::vector<int>>();
    spec.m2 = payload.at("m2").get<std::vector<int>>();
    if (static_cast<int>(spec.m1.size()) != spec.d1 * spec.d2 || spec.m1.size() != spec.m2.size())
      throw CacheCorruptError("load_spectrum: payload sizes inconsistent");
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw CacheCorruptError("load_spectrum: malformed cache document: " + std::string(e.what()));
  }
}

// Stale caches trigger recomputation; corruption is surfaced to the caller
// (the harness records it and rebuilds rather than reusing bad data).
inline bool spectrum_matches(const TwoDNet& net, const LoadedSpectrum& spec) {
  if (spec.d1 != net.d1 || spec.d2 != net.d2) return false;
  if (spec.spacing1 != net.factor1.grid.spacing || spec.spacing2 != net.factor2.grid.spacing)
    return false;
  return spec.m1 == net.m1 && spec.m2 == net.m2;
}

}  // namespace wedgewave

#endif  // WEDGEWAVE_CACHE_HPP
