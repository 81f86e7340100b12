#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "cadenza/dataio.hpp"
#include "cadenza/error.hpp"
#include "io_util.hpp"

namespace cadenza {

static_assert(std::endian::native == std::endian::little,
              "embedding files are little-endian and written from host memory");

std::string to_string(const SegmentId& id) {
  return id.video_id + "#" + std::to_string(id.segment_index);
}

void EmbeddingTable::validate() const {
  if (dim == 0) throw Error(ErrorKind::Validation, "embedding dim must be positive");
  if (data.size() != ids.size() * dim) {
    throw Error(ErrorKind::Validation, "data length " + std::to_string(data.size()) +
                                           " != count*dim " + std::to_string(ids.size() * dim));
  }
  std::set<SegmentId> seen;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen.insert(ids[i]).second) {
      throw Error(ErrorKind::Validation,
                  "duplicate id " + to_string(ids[i]) + " at row " + std::to_string(i));
    }
    for (float v : row(i)) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::Validation, "non-finite value at row " + std::to_string(i));
      }
    }
  }
}

EmbeddingTable take_rows(const EmbeddingTable& table, std::span<const std::size_t> rows) {
  EmbeddingTable out;
  out.dim = table.dim;
  out.ids.reserve(rows.size());
  out.data.reserve(rows.size() * table.dim);
  for (std::size_t r : rows) {
    out.ids.push_back(table.ids.at(r));
    auto src = table.row(r);
    out.data.insert(out.data.end(), src.begin(), src.end());
  }
  return out;
}

std::filesystem::path ids_sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".ids";
  return p;
}

namespace {

template <typename T>
void put(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

}  // namespace

void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  table.validate();
  std::string bin;
  bin.reserve(kEmbeddingHeaderBytes + table.data.size() * sizeof(float));
  bin.append(kEmbeddingMagic, 4);
  put<std::uint32_t>(bin, kEmbeddingVersion);
  put<std::uint64_t>(bin, table.count());
  put<std::uint32_t>(bin, static_cast<std::uint32_t>(table.dim));
  put<std::uint32_t>(bin, 0);
  bin.append(reinterpret_cast<const char*>(table.data.data()), table.data.size() * sizeof(float));

  std::string ids;
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    const auto& id = table.ids[i];
    if (id.video_id.empty() || id.video_id.find_first_of("\t\n\r") != std::string::npos) {
      throw Error(ErrorKind::Validation, "video id at row " + std::to_string(i) +
                                             " is empty or contains tab/newline");
    }
    ids += id.video_id;
    ids += '\t';
    ids += std::to_string(id.segment_index);
    ids += '\n';
  }
  detail::write_file_atomic(path, bin);
  detail::write_file_atomic(ids_sidecar_path(path), ids);
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  const std::string bin = detail::read_file(path);
  const std::string where = path.string();
  const std::size_t magic_bytes = std::min<std::size_t>(bin.size(), 4);
  if (std::memcmp(bin.data(), kEmbeddingMagic, magic_bytes) != 0) {
    throw Error(ErrorKind::BadMagic, where);
  }
  if (bin.size() < kEmbeddingHeaderBytes) {
    throw Error(ErrorKind::Truncated, where + ": header needs 24 bytes, file has " +
                                          std::to_string(bin.size()));
  }
  const auto version = get<std::uint32_t>(bin, 4);
  if (version != kEmbeddingVersion) {
    throw Error(ErrorKind::VersionMismatch,
                where + ": version " + std::to_string(version) + ", expected 1");
  }
  const auto count = get<std::uint64_t>(bin, 8);
  const auto dim = get<std::uint32_t>(bin, 16);
  const auto reserved = get<std::uint32_t>(bin, 20);
  if (dim == 0) throw Error(ErrorKind::BadHeader, where + ": dim is zero");
  if (reserved != 0) throw Error(ErrorKind::BadHeader, where + ": reserved field is nonzero");

  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  if (count > kMax / dim || count * dim > kMax / sizeof(float) ||
      count * dim * sizeof(float) > std::numeric_limits<std::size_t>::max() - kEmbeddingHeaderBytes) {
    throw Error(ErrorKind::Overflow, where + ": count*dim overflows (count=" +
                                         std::to_string(count) + ", dim=" + std::to_string(dim) + ")");
  }
  const std::size_t payload = static_cast<std::size_t>(count * dim * sizeof(float));
  const std::size_t have = bin.size() - kEmbeddingHeaderBytes;
  if (have < payload) {
    throw Error(ErrorKind::Truncated, where + ": payload has " + std::to_string(have) +
                                          " bytes, header promises " + std::to_string(payload));
  }
  if (have > payload) {
    throw Error(ErrorKind::BadHeader, where + ": " + std::to_string(have - payload) +
                                          " trailing bytes after payload");
  }

  EmbeddingTable table;
  table.dim = dim;
  table.data.resize(static_cast<std::size_t>(count) * dim);
  std::memcpy(table.data.data(), bin.data() + kEmbeddingHeaderBytes, payload);

  const auto sidecar = ids_sidecar_path(path);
  std::istringstream lines(detail::read_file(sidecar));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorKind::Validation,
                  sidecar.string() + ": malformed line " + std::to_string(line_no));
    }
    SegmentId id{line.substr(0, tab), 0};
    try {
      std::size_t used = 0;
      const auto idx = std::stoul(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1 || idx > std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("segment index");
      }
      id.segment_index = static_cast<std::uint32_t>(idx);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Validation,
                  sidecar.string() + ": bad segment index on line " + std::to_string(line_no));
    }
    table.ids.push_back(std::move(id));
  }
  if (table.ids.size() != count) {
    throw Error(ErrorKind::Validation, sidecar.string() + ": lists " +
                                           std::to_string(table.ids.size()) + " ids, table has " +
                                           std::to_string(count) + " rows");
  }
  table.validate();
  return table;
}

}  // namespace cadenza
