#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "arbkit/paths.hpp"

namespace arbkit {

// Malformed or truncated path file.
struct PathFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary layout (little-endian):
//   "ARBK", version byte 0x01
//   u32 dim, u32 steps N, u32 n_paths M, f64 horizon T, u64 root_seed
//   u32 aux_count, aux_count x (u32 byte length, UTF-8 name)
//   times: (N+1) f64
//   values: M x (N+1) x dim f64, path-major
//   aux blocks in name-table order: u32 rows_per_path (1 or N+1), M x rows f64
// Sidecar metadata lives next to the file as <file>.meta.json.

std::string sidecar_path(const std::string& file);

// Streaming writer: declares shape up front, accepts chunks in any order
// (chunk.path_offset addresses the slice), writes with positioned I/O.
class PathFileWriter {
  public:
    PathFileWriter(const std::string& file, const TimeGrid& grid, std::size_t n_paths, int dim,
                   std::uint64_t root_seed, std::vector<std::string> aux_series_names,
                   std::vector<std::string> aux_scalar_names);
    void write_chunk(const PathBundle& chunk);
    void finish();   // flushes and validates that every path slot was written

  private:
    std::ofstream out_;
    std::size_t n_paths_;
    int dim_;
    std::size_t npts_;
    std::vector<std::string> series_;
    std::vector<std::string> scalars_;
    std::uint64_t values_offset_ = 0;
    std::vector<std::uint64_t> aux_offsets_;   // data offset per aux block, table order
    std::size_t paths_written_ = 0;
};

void write_path_file(const std::string& file, const PathBundle& bundle);
PathBundle read_path_file(const std::string& file);

}  // namespace arbkit
