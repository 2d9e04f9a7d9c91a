#include "mntp/cvtk.hpp"

#include <cstring>
#include <fstream>

#include "mntp/errors.hpp"

namespace mntp {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'T', 'K'};
constexpr uint32_t kVersion = 1;
// Caps reject absurd headers before any allocation is attempted.
constexpr uint32_t kMaxCount = 100'000'000;
constexpr uint32_t kMaxDim = 10'000'000;

void put_u32(std::string& out, uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
               static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  out.append(b, 4);
}

struct Reader {
  const std::string& buf;
  uint64_t pos = 0;

  uint32_t u32(const char* what) {
    if (pos + 4 > buf.size())
      throw FormatError(std::string("CVTK: truncated while reading ") + what,
                        pos);
    uint32_t v = (static_cast<uint32_t>(static_cast<unsigned char>(buf[pos]))) |
                 (static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + 1])) << 8) |
                 (static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + 2])) << 16) |
                 (static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + 3])) << 24);
    pos += 4;
    return v;
  }

  void floats(std::vector<float>& out, uint64_t n, const char* what) {
    if (pos + n * 4 > buf.size())
      throw FormatError(std::string("CVTK: truncated while reading ") + what,
                        pos);
    out.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
      uint32_t bits =
          (static_cast<uint32_t>(static_cast<unsigned char>(buf[pos]))) |
          (static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + 1])) << 8) |
          (static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + 2])) << 16) |
          (static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + 3])) << 24);
      float f;
      std::memcpy(&f, &bits, 4);
      out[i] = f;
      pos += 4;
    }
  }
};

}  // namespace

void write_cvtk(const std::string& path,
                const std::vector<CvtkRecord>& records) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.cond.size() != static_cast<size_t>(r.cond_len) * r.cond_dim)
      throw DimensionError("CVTK write: condition buffer does not match "
                           "cond_len * cond_dim");
    if (r.tokens.size() != static_cast<size_t>(r.token_count) * r.token_dim)
      throw DimensionError("CVTK write: token buffer does not match "
                           "token_count * token_dim");
    put_u32(out, r.token_count);
    put_u32(out, r.token_dim);
    put_u32(out, r.cond_len);
    put_u32(out, r.cond_dim);
    for (float f : r.cond) {
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
    for (float f : r.tokens) {
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("CVTK: cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("CVTK: short write to '" + path + "'");
}

std::vector<CvtkRecord> read_cvtk(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("CVTK: cannot open '" + path + "' for reading");
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  Reader r{buf};
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError("CVTK: bad magic", 0);
  r.pos = 4;
  uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError("CVTK: unsupported version " + std::to_string(version),
                      4);
  uint32_t count = r.u32("record count");
  if (count > kMaxCount)
    throw FormatError("CVTK: implausible record count " + std::to_string(count),
                      8);
  std::vector<CvtkRecord> records;
  records.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    CvtkRecord rec;
    uint64_t header_at = r.pos;
    rec.token_count = r.u32("token_count");
    rec.token_dim = r.u32("token_dim");
    rec.cond_len = r.u32("cond_len");
    rec.cond_dim = r.u32("cond_dim");
    if (rec.token_count > kMaxCount || rec.token_dim > kMaxDim ||
        rec.cond_len > kMaxDim || rec.cond_dim > kMaxDim)
      throw FormatError("CVTK: implausible record header", header_at);
    r.floats(rec.cond, static_cast<uint64_t>(rec.cond_len) * rec.cond_dim,
             "condition values");
    r.floats(rec.tokens,
             static_cast<uint64_t>(rec.token_count) * rec.token_dim,
             "token values");
    records.push_back(std::move(rec));
  }
  if (r.pos != buf.size())
    throw FormatError("CVTK: trailing bytes after last record", r.pos);
  return records;
}

CvtkDims require_homogeneous(const std::vector<CvtkRecord>& records) {
  if (records.empty()) throw Error("CVTK: dataset is empty");
  CvtkDims d{records[0].token_dim, records[0].cond_len, records[0].cond_dim};
  for (size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.token_dim != d.token_dim || r.cond_len != d.cond_len ||
        r.cond_dim != d.cond_dim)
      throw Error("CVTK: record " + std::to_string(i) +
                  " has mismatched dimensions (token_dim " +
                  std::to_string(r.token_dim) + " vs " +
                  std::to_string(d.token_dim) + ")");
  }
  return d;
}

}  // namespace mntp
