#include "geosub/serialization.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "geosub/errors.hpp"

namespace geosub::io {
namespace {

using nlohmann::json;

std::uint64_t byteswap64(std::uint64_t v) {
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xFFULL) << (8 * (7 - i));
  return out;
}

std::string encode(const double* data, std::size_t count) {
  std::string bytes(count * sizeof(double), '\0');
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap64(bits);
    std::memcpy(bytes.data() + i * sizeof(double), &bits, sizeof(bits));
  }
  return bytes;
}

void decode(const std::string& bytes, double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes.data() + i * sizeof(double), sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) bits = byteswap64(bits);
    data[i] = std::bit_cast<double>(bits);
  }
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InvalidInput("malformed JSON in " + path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) {
    throw InvalidInput(where.string() + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(where.string() + ": bad field '" + key + "': " + e.what());
  }
}

void check_version(const json& j, const fs::path& where) {
  const int version = field<int>(j, "format_version", where);
  if (version != kFormatVersion) {
    throw InvalidInput(where.string() + ": unsupported format_version " +
                       std::to_string(version));
  }
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SnapshotSet load_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  auto parse_row = [&](const std::string& text, std::size_t row) {
    std::vector<double> values;
    std::stringstream cells(text);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw InvalidInput(path.string() + ": unparsable value '" + cell + "' on row " +
                           std::to_string(row));
      }
    }
    return values;
  };

  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_row(line, row));
  }
  if (rows.size() < 2) {
    throw InvalidInput(path.string() + ": CSV needs a header row of times and state rows");
  }
  const std::size_t k = rows.front().size();
  SnapshotSet out;
  out.times = rows.front();
  out.Q.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(k));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != k) {
      throw InvalidInput(path.string() + ": row " + std::to_string(i + 1) + " has " +
                         std::to_string(rows[i].size()) + " values, expected " +
                         std::to_string(k));
    }
    for (std::size_t j = 0; j < k; ++j) {
      out.Q(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return out;
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw InvalidInput("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_matrix(const fs::path& path, const Matrix& m) {
  write_file_atomic(path, encode(m.data(), static_cast<std::size_t>(m.size())));
}

Matrix read_matrix(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  const std::string bytes = read_file(path);
  const auto expected = static_cast<std::size_t>(rows * cols) * sizeof(double);
  if (bytes.size() != expected) {
    throw InvalidInput(path.string() + ": " + std::to_string(bytes.size()) +
                       " bytes, expected " + std::to_string(expected) + " for " +
                       std::to_string(rows) + "x" + std::to_string(cols) + " float64");
  }
  Matrix m(rows, cols);
  decode(bytes, m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

json ReferenceSpec::to_json() const {
  switch (kind) {
    case Kind::kZero:
      return "zero";
    case Kind::kMean:
      return "mean";
    case Kind::kExplicit:
      return to_std(values);
  }
  return "zero";
}

ReferenceSpec ReferenceSpec::from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "zero") return {Kind::kZero, {}};
    if (s == "mean") return {Kind::kMean, {}};
    throw InvalidInput("unknown q_ref descriptor '" + s + "' (expected zero, mean or an array)");
  }
  if (j.is_array()) {
    try {
      return {Kind::kExplicit, to_eigen(j.get<std::vector<double>>())};
    } catch (const json::exception&) {
      throw InvalidInput("q_ref array must contain numbers");
    }
  }
  throw InvalidInput("q_ref descriptor must be \"zero\", \"mean\" or an array");
}

Vector ReferenceSpec::resolve(const Matrix& q) const {
  switch (kind) {
    case Kind::kZero:
      return reference_state(q, ReferenceKind::kZero);
    case Kind::kMean:
      return reference_state(q, ReferenceKind::kMean);
    case Kind::kExplicit:
      if (values.size() != q.rows()) {
        throw InvalidInput("explicit q_ref has length " + std::to_string(values.size()) +
                           ", expected N = " + std::to_string(q.rows()));
      }
      return values;
  }
  return Vector::Zero(q.rows());
}

void save_snapshots(const fs::path& dir, const SnapshotSet& snapshots,
                    const ReferenceSpec& reference) {
  write_matrix(dir / "snapshots.bin", snapshots.Q);
  json meta = {{"format_version", kFormatVersion},
               {"N", snapshots.state_dim()},
               {"K", snapshots.count()},
               {"times", snapshots.times},
               {"q_ref", reference.to_json()},
               {"data_file", "snapshots.bin"},
               {"encoding", "float64-le"},
               {"layout", "column-major"}};
  write_file_atomic(dir / "snapshots.json", meta.dump(2) + "\n");
}

SnapshotSet load_snapshots(const fs::path& path, const ReferenceSpec* reference_override) {
  if (path.extension() == ".csv") {
    SnapshotSet out = load_csv(path);
    const ReferenceSpec ref = reference_override ? *reference_override : ReferenceSpec{};
    out.q_ref = ref.resolve(out.Q);
    out.validate();
    return out;
  }
  const fs::path sidecar = fs::is_directory(path) ? path / "snapshots.json" : path;
  const json meta = read_json(sidecar);
  check_version(meta, sidecar);
  const auto n = field<Eigen::Index>(meta, "N", sidecar);
  const auto k = field<Eigen::Index>(meta, "K", sidecar);
  if (n < 1 || k < 1) throw InvalidInput(sidecar.string() + ": N and K must be positive");

  SnapshotSet out;
  out.times = field<std::vector<double>>(meta, "times", sidecar);
  if (static_cast<Eigen::Index>(out.times.size()) != k) {
    throw InvalidInput(sidecar.string() + ": times has " + std::to_string(out.times.size()) +
                       " entries, K = " + std::to_string(k));
  }
  const std::string data_file = meta.value("data_file", std::string("snapshots.bin"));
  out.Q = read_matrix(sidecar.parent_path() / data_file, n, k);
  const ReferenceSpec ref = reference_override
                                ? *reference_override
                                : ReferenceSpec::from_json(meta.value("q_ref", json("zero")));
  out.q_ref = ref.resolve(out.Q);
  out.validate();
  return out;
}

void save_params(const fs::path& dir, const GeodesicParams& params,
                 const TimeNormalization& time_map, const std::string& stem) {
  const std::string t_file = stem + "_T.bin";
  write_matrix(dir / t_file, params.T);
  json meta = {{"format_version", kFormatVersion},
               {"n_features", params.features()},
               {"rank", params.rank()},
               {"theta", to_std(params.theta)},
               {"T_file", t_file},
               {"encoding", "float64-le"},
               {"layout", "column-major"},
               {"time_normalization", {{"t0", time_map.t0}, {"tf", time_map.tf}}}};
  write_file_atomic(dir / (stem + ".json"), meta.dump(2) + "\n");
}

GeodesicParams load_params(const fs::path& dir, TimeNormalization* time_map,
                           const std::string& stem) {
  const fs::path sidecar = dir / (stem + ".json");
  const json meta = read_json(sidecar);
  check_version(meta, sidecar);
  const auto n_f = field<Eigen::Index>(meta, "n_features", sidecar);
  const auto r = field<Eigen::Index>(meta, "rank", sidecar);
  const auto theta = field<std::vector<double>>(meta, "theta", sidecar);
  if (static_cast<Eigen::Index>(theta.size()) != r) {
    throw InvalidInput(sidecar.string() + ": theta has " + std::to_string(theta.size()) +
                       " entries, rank = " + std::to_string(r));
  }
  GeodesicParams params;
  params.T = read_matrix(dir / field<std::string>(meta, "T_file", sidecar), n_f, 2 * r);
  params.theta = to_eigen(theta);
  if (time_map && meta.contains("time_normalization")) {
    const json& tn = meta.at("time_normalization");
    time_map->t0 = field<double>(tn, "t0", sidecar);
    time_map->tf = field<double>(tn, "tf", sidecar);
  }
  return params;
}

void save_feature_model(const fs::path& dir, const FeatureModel& feature) {
  write_matrix(dir / "features_basis.bin", feature.basis);
  write_matrix(dir / "features_qref.bin", feature.q_ref);
  write_matrix(dir / "features_coords.bin", feature.coords);
  json meta = {{"format_version", kFormatVersion},
               {"N", feature.state_dim()},
               {"n_features", feature.features()},
               {"K", feature.coords.cols()},
               {"tau", feature.tau},
               {"time_normalization", {{"t0", feature.time_map.t0}, {"tf", feature.time_map.tf}}},
               {"numerical_rank", feature.numerical_rank},
               {"pod_singular_values", to_std(feature.pod_singular_values)},
               {"basis_file", "features_basis.bin"},
               {"q_ref_file", "features_qref.bin"},
               {"coords_file", "features_coords.bin"},
               {"encoding", "float64-le"},
               {"layout", "column-major"}};
  write_file_atomic(dir / "features.json", meta.dump(2) + "\n");
}

FeatureModel load_feature_model(const fs::path& dir) {
  const fs::path sidecar = dir / "features.json";
  const json meta = read_json(sidecar);
  check_version(meta, sidecar);
  const auto n = field<Eigen::Index>(meta, "N", sidecar);
  const auto n_f = field<Eigen::Index>(meta, "n_features", sidecar);
  FeatureModel feature;
  feature.basis = read_matrix(dir / field<std::string>(meta, "basis_file", sidecar), n, n_f);
  feature.q_ref = read_matrix(dir / field<std::string>(meta, "q_ref_file", sidecar), n, 1);
  feature.tau = field<std::vector<double>>(meta, "tau", sidecar);
  const json& tn = meta.at("time_normalization");
  feature.time_map = {field<double>(tn, "t0", sidecar), field<double>(tn, "tf", sidecar)};
  feature.numerical_rank = field<Eigen::Index>(meta, "numerical_rank", sidecar);
  feature.pod_singular_values =
      to_eigen(field<std::vector<double>>(meta, "pod_singular_values", sidecar));
  const auto k = field<Eigen::Index>(meta, "K", sidecar);
  feature.coords = read_matrix(dir / field<std::string>(meta, "coords_file", sidecar), n_f, k);
  if (static_cast<Eigen::Index>(feature.tau.size()) != k) {
    throw InvalidInput(sidecar.string() + ": tau length does not match K");
  }
  return feature;
}

json to_json(const FitReport& report) {
  json restarts = json::array();
  for (const auto& run : report.per_restart) {
    restarts.push_back({{"seed", run.seed},
                        {"final_objective", run.final_objective},
                        {"iterations", run.iterations},
                        {"converged", run.converged},
                        {"final_grad_norm", run.final_grad_norm},
                        {"line_search_failed", run.line_search_failed}});
  }
  return {{"format_version", kFormatVersion},
          {"objective_trace", report.objective_trace},
          {"grad_norm_trace", report.grad_norm_trace},
          {"iterations", report.iterations},
          {"converged", report.converged},
          {"final_objective",
           report.objective_trace.empty() ? 0.0 : report.objective_trace.back()},
          {"best_restart", report.best_restart},
          {"mean_objective", report.mean_objective},
          {"mean_iterations", report.mean_iterations},
          {"per_restart", restarts}};
}

json to_json(const SolverConfig& config) {
  return {{"grad_tol", config.grad_tol},
          {"max_iters", config.max_iters},
          {"restarts", config.restarts},
          {"rng_seed", config.rng_seed},
          {"line_search",
           {{"sufficient_decrease", config.line_search.sufficient_decrease},
            {"contraction", config.line_search.contraction},
            {"max_backtracks", config.line_search.max_backtracks},
            {"max_initial_step", config.line_search.max_initial_step},
            {"expansion", config.line_search.expansion}}}};
}

}  // namespace geosub::io
