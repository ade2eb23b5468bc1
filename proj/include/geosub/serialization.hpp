#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "geosub/feature_space.hpp"
#include "geosub/geodesic_model.hpp"
#include "geosub/riemannian_opt.hpp"

// On-disk formats. Binary payloads are raw little-endian IEEE-754 float64 in
// column-major order (row index fastest); every payload has a JSON sidecar.
namespace geosub::io {

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

void write_matrix(const fs::path& path, const Matrix& m);
/// Throws InvalidInput if the file size does not match rows * cols doubles.
Matrix read_matrix(const fs::path& path, Eigen::Index rows, Eigen::Index cols);

/// How the sidecar describes the reference state.
struct ReferenceSpec {
  enum class Kind { kZero, kMean, kExplicit };
  Kind kind = Kind::kZero;
  Vector values;  // kExplicit only

  nlohmann::json to_json() const;
  static ReferenceSpec from_json(const nlohmann::json& j);
  Vector resolve(const Matrix& q) const;
};

/// Writes <dir>/snapshots.bin and <dir>/snapshots.json.
void save_snapshots(const fs::path& dir, const SnapshotSet& snapshots,
                    const ReferenceSpec& reference);

/// Reads a snapshot set from a directory (snapshots.json), a .json sidecar,
/// or a .csv file (header row of times, then one row per state component,
/// one snapshot per column). `reference_override` replaces the sidecar's
/// descriptor when given; CSV input defaults to the zero reference.
SnapshotSet load_snapshots(const fs::path& path,
                           const ReferenceSpec* reference_override = nullptr);

/// Writes <dir>/<stem>.json (dims, theta, time map) and <dir>/<stem>_T.bin.
void save_params(const fs::path& dir, const GeodesicParams& params,
                 const TimeNormalization& time_map, const std::string& stem = "params");
GeodesicParams load_params(const fs::path& dir, TimeNormalization* time_map = nullptr,
                           const std::string& stem = "params");

/// Writes features.json plus the basis, q_ref and training coordinates.
void save_feature_model(const fs::path& dir, const FeatureModel& feature);
FeatureModel load_feature_model(const fs::path& dir);

/// FitReport as JSON. Wall time is excluded so the file is reproducible.
nlohmann::json to_json(const FitReport& report);
nlohmann::json to_json(const SolverConfig& config);

}  // namespace geosub::io
