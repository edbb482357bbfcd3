#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cmaf/harness.hpp"

namespace cmaf {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const char* p) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 8;

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    os.flush();
    if (!os) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_snapshot(const FlowState& state, const std::filesystem::path& path) {
  const TorusGeometry& g = state.phi.geometry();
  std::string buf;
  buf.reserve(kHeaderBytes + 8 * g.size());
  buf.append(kSnapshotMagic, 4);
  put_le<std::uint32_t>(buf, kSnapshotVersion);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.n()));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.N()));
  put_le<double>(buf, state.t);
  for (double v : state.phi.values()) put_le<double>(buf, v);
  write_file_atomic(path, buf);
}

namespace {

FlowState read_snapshot_impl(const std::filesystem::path& path, const TorusGeometry* expected,
                             const NonlinearityF* F, double log_c) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SnapshotError("snapshot " + path.string() + ": cannot open");
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::string where = "snapshot " + path.string() + ": ";
  if (buf.size() < 4 || std::memcmp(buf.data(), kSnapshotMagic, 4) != 0) throw SnapshotError(where + "bad magic");
  if (buf.size() < kHeaderBytes) throw SnapshotError(where + "truncated header");
  const auto version = get_le<std::uint32_t>(buf.data() + 4);
  if (version != kSnapshotVersion)
    throw SnapshotError(where + "unsupported version " + std::to_string(version));
  const auto n = get_le<std::uint32_t>(buf.data() + 8);
  const auto N = get_le<std::uint32_t>(buf.data() + 12);
  const double t = get_le<double>(buf.data() + 16);
  std::optional<TorusGeometry> g;
  try {
    g.emplace(static_cast<int>(n), static_cast<int>(N));
  } catch (const Error& e) {
    throw SnapshotError(where + "invalid dimensions: " + e.what());
  }
  if (expected && !(*expected == *g))
    throw SnapshotError(where + "dimension mismatch: file has n = " + std::to_string(n) + ", N = " + std::to_string(N) +
                        ", expected n = " + std::to_string(expected->n()) + ", N = " + std::to_string(expected->N()));
  const std::size_t need = kHeaderBytes + 8 * g->size();
  if (buf.size() < need)
    throw SnapshotError(where + "truncated: " + std::to_string(buf.size()) + " bytes, expected " +
                        std::to_string(need));
  if (buf.size() > need) throw SnapshotError(where + "trailing bytes after " + std::to_string(need));
  std::vector<double> values(g->size());
  for (std::size_t p = 0; p < values.size(); ++p) values[p] = get_le<double>(buf.data() + kHeaderBytes + 8 * p);
  return FlowState::make(t, ScalarField(*g, std::move(values)), F, log_c);
}

}  // namespace

FlowState read_snapshot(const std::filesystem::path& path, const NonlinearityF* F, double log_c) {
  return read_snapshot_impl(path, nullptr, F, log_c);
}

FlowState read_snapshot(const std::filesystem::path& path, const TorusGeometry& expected, const NonlinearityF* F,
                        double log_c) {
  return read_snapshot_impl(path, &expected, F, log_c);
}

std::string CsvTable::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  char buf[40];
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw Error("CsvTable: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (std::isnan(row[i])) {
        out += "nan";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", row[i]);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace cmaf
