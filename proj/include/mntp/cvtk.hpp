#pragma once

// CVTK container: continuous-valued token records with per-record condition
// embeddings. Little-endian layout:
//   "CVTK" | u32 version (=1) | u32 record count |
//   per record: u32 token_count | u32 token_dim | u32 cond_len | u32 cond_dim
//               | cond_len*cond_dim f32 | token_count*token_dim f32
// Malformed input raises FormatError carrying the offending byte offset.

#include <cstdint>
#include <string>
#include <vector>

namespace mntp {

struct CvtkRecord {
  uint32_t token_count = 0;
  uint32_t token_dim = 0;
  uint32_t cond_len = 0;
  uint32_t cond_dim = 0;
  std::vector<float> cond;    // cond_len * cond_dim
  std::vector<float> tokens;  // token_count * token_dim
};

void write_cvtk(const std::string& path, const std::vector<CvtkRecord>& records);

std::vector<CvtkRecord> read_cvtk(const std::string& path);

// Checks that every record shares token_dim (and cond dims); returns the
// common dims. Training and eval require homogeneous datasets.
struct CvtkDims {
  uint32_t token_dim = 0;
  uint32_t cond_len = 0;
  uint32_t cond_dim = 0;
};
CvtkDims require_homogeneous(const std::vector<CvtkRecord>& records);

}  // namespace mntp
