#include "gpdtsm/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gpdtsm::io {

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::int64_t get_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::string get_str(std::istream& is) {
  const std::uint64_t len = get_u64(is);
  if (len > (1ull << 30)) throw ValidationError("checkpoint: corrupt string");
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  return s;
}

std::string stream_state(const RngStream& rng) {
  std::ostringstream oss;
  oss << rng;
  return oss.str();
}

RngStream stream_from(const std::string& state) {
  RngStream rng;
  std::istringstream iss(state);
  iss >> rng;
  if (iss.fail()) throw ValidationError("checkpoint: corrupt generator state");
  return rng;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const inference::ParticleSystem& ps,
                     const inference::Model& m,
                     const std::string& data_fingerprint) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ValidationError("cannot open checkpoint for writing: " + path);

  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u64(os, 1);  // format version
  put_str(os, m.spec.id);
  put_str(os, data_fingerprint);
  put_u64(os, static_cast<std::uint64_t>(ps.thetas.rows()));
  put_u64(os, static_cast<std::uint64_t>(ps.thetas.cols()));
  put_u64(os, ps.master_seed);
  put_i64(os, ps.t_current);
  put_f64(os, ps.log_evidence);
  put_i64(os, ps.n_resample_moves);
  put_i64(os, ps.n_bisect_fallbacks);
  for (int j = 0; j < 3; ++j) put_f64(os, m.sigma_k(j));

  for (Eigen::Index i = 0; i < ps.thetas.rows(); ++i)
    for (Eigen::Index j = 0; j < ps.thetas.cols(); ++j)
      put_f64(os, ps.thetas(i, j));
  for (Eigen::Index i = 0; i < ps.logw.size(); ++i) put_f64(os, ps.logw(i));

  put_str(os, stream_state(ps.system_stream));
  put_u64(os, ps.streams.size());
  for (const auto& s : ps.streams) put_str(os, stream_state(s));

  put_u64(os, ps.history.size());
  for (const auto& r : ps.history) {
    put_i64(os, r.t);
    put_f64(os, r.phi);
    put_f64(os, r.ess_before);
    put_f64(os, r.acc_rate);
    put_u64(os, r.resampled ? 1 : 0);
  }
  if (!os) throw ValidationError("checkpoint write failed: " + path);
}

inference::ParticleSystem load_checkpoint(const std::string& path,
                                          const inference::Model& m,
                                          const std::string& data_fingerprint) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint: " + path);

  char magic[8] = {};
  is.read(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw ValidationError("checkpoint: bad magic tag in " + path);
  const std::uint64_t version = get_u64(is);
  if (version != 1)
    throw ValidationError("checkpoint: unsupported format version " +
                          std::to_string(version));
  const std::string id = get_str(is);
  if (id != m.spec.id)
    throw ValidationError("checkpoint: model id '" + id +
                          "' does not match '" + m.spec.id + "'");
  const std::string fp = get_str(is);
  if (fp != data_fingerprint)
    throw ValidationError(
        "checkpoint: data fingerprint mismatch (stored '" + fp +
        "', expected '" + data_fingerprint + "')");

  const auto n = static_cast<Eigen::Index>(get_u64(is));
  const auto dim = static_cast<Eigen::Index>(get_u64(is));
  if (dim != m.layout().dim)
    throw ValidationError("checkpoint: parameter dimension mismatch");

  inference::ParticleSystem ps;
  ps.master_seed = get_u64(is);
  ps.t_current = static_cast<int>(get_i64(is));
  ps.log_evidence = get_f64(is);
  ps.n_resample_moves = get_i64(is);
  ps.n_bisect_fallbacks = get_i64(is);
  for (int j = 0; j < 3; ++j) {
    const double sk = get_f64(is);
    if (sk != m.sigma_k(j))
      throw ValidationError("checkpoint: tuned kernel scales mismatch");
  }

  ps.thetas = Mat(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) ps.thetas(i, j) = get_f64(is);
  ps.logw = Vec(n);
  for (Eigen::Index i = 0; i < n; ++i) ps.logw(i) = get_f64(is);

  ps.system_stream = stream_from(get_str(is));
  const std::uint64_t n_streams = get_u64(is);
  if (n_streams != static_cast<std::uint64_t>(n))
    throw ValidationError("checkpoint: stream count mismatch");
  ps.streams.reserve(n_streams);
  for (std::uint64_t i = 0; i < n_streams; ++i)
    ps.streams.push_back(stream_from(get_str(is)));

  const std::uint64_t n_hist = get_u64(is);
  ps.history.reserve(n_hist);
  for (std::uint64_t i = 0; i < n_hist; ++i) {
    inference::TemperingRound r;
    r.t = static_cast<int>(get_i64(is));
    r.phi = get_f64(is);
    r.ess_before = get_f64(is);
    r.acc_rate = get_f64(is);
    r.resampled = get_u64(is) != 0;
    ps.history.push_back(r);
  }
  if (!is) throw ValidationError("checkpoint: truncated file " + path);
  return ps;
}

}  // namespace gpdtsm::io
