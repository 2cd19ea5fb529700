#include "arbkit/pathfile.hpp"

#include <cstring>
#include <limits>

namespace arbkit {

namespace {

constexpr char kMagic[4] = {'A', 'R', 'B', 'K'};
constexpr std::uint8_t kVersion = 0x01;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw PathFileError("path file truncated");
    return v;
}

}  // namespace

std::string sidecar_path(const std::string& file) { return file + ".meta.json"; }

PathFileWriter::PathFileWriter(const std::string& file, const TimeGrid& grid,
                               std::size_t n_paths, int dim, std::uint64_t root_seed,
                               std::vector<std::string> aux_series_names,
                               std::vector<std::string> aux_scalar_names)
    : out_(file, std::ios::binary | std::ios::trunc),
      n_paths_(n_paths),
      dim_(dim),
      npts_(grid.points()),
      series_(std::move(aux_series_names)),
      scalars_(std::move(aux_scalar_names)) {
    if (!out_) throw PathFileError("cannot open for writing: " + file);
    if (n_paths == 0) throw ContractViolation("path file: need at least one path");

    put(out_, kMagic[0]);
    put(out_, kMagic[1]);
    put(out_, kMagic[2]);
    put(out_, kMagic[3]);
    put(out_, kVersion);
    put(out_, static_cast<std::uint32_t>(dim));
    put(out_, static_cast<std::uint32_t>(grid.steps()));
    put(out_, static_cast<std::uint32_t>(n_paths));
    put(out_, grid.horizon());
    put(out_, root_seed);
    const std::uint32_t aux_count =
        static_cast<std::uint32_t>(series_.size() + scalars_.size());
    put(out_, aux_count);
    // series first, then scalars; both alphabetical as handed in
    for (const auto& name : series_) {
        put(out_, static_cast<std::uint32_t>(name.size()));
        out_.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& name : scalars_) {
        put(out_, static_cast<std::uint32_t>(name.size()));
        out_.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (std::size_t i = 0; i < npts_; ++i) put(out_, grid.time(i));

    values_offset_ = static_cast<std::uint64_t>(out_.tellp());
    std::uint64_t off = values_offset_ + n_paths_ * npts_ * static_cast<std::uint64_t>(dim_) * 8;
    for (std::size_t b = 0; b < series_.size() + scalars_.size(); ++b) {
        const std::uint64_t rows = b < series_.size() ? npts_ : 1;
        // block starts with its u32 rows_per_path marker
        out_.seekp(static_cast<std::streamoff>(off));
        put(out_, static_cast<std::uint32_t>(rows));
        aux_offsets_.push_back(off + 4);
        off += 4 + n_paths_ * rows * 8;
    }
}

void PathFileWriter::write_chunk(const PathBundle& chunk) {
    if (chunk.dim != dim_ || chunk.grid->points() != npts_)
        throw ContractViolation("path file: chunk shape mismatch");
    if (chunk.path_offset + chunk.n_paths > n_paths_)
        throw ContractViolation("path file: chunk exceeds declared path count");
    const std::uint64_t stride = npts_ * static_cast<std::uint64_t>(dim_) * 8;
    out_.seekp(static_cast<std::streamoff>(values_offset_ + chunk.path_offset * stride));
    out_.write(reinterpret_cast<const char*>(chunk.values.data()),
               static_cast<std::streamsize>(chunk.values.size() * 8));

    std::size_t block = 0;
    for (const auto& name : series_) {
        const auto it = chunk.aux_series.find(name);
        if (it == chunk.aux_series.end())
            throw ContractViolation("path file: chunk missing aux series " + name);
        out_.seekp(static_cast<std::streamoff>(aux_offsets_[block] +
                                               chunk.path_offset * npts_ * 8));
        out_.write(reinterpret_cast<const char*>(it->second.data()),
                   static_cast<std::streamsize>(it->second.size() * 8));
        ++block;
    }
    for (const auto& name : scalars_) {
        const auto it = chunk.aux_scalars.find(name);
        if (it == chunk.aux_scalars.end())
            throw ContractViolation("path file: chunk missing aux scalar " + name);
        out_.seekp(static_cast<std::streamoff>(aux_offsets_[block] + chunk.path_offset * 8));
        out_.write(reinterpret_cast<const char*>(it->second.data()),
                   static_cast<std::streamsize>(it->second.size() * 8));
        ++block;
    }
    paths_written_ += chunk.n_paths;
}

void PathFileWriter::finish() {
    if (paths_written_ != n_paths_)
        throw ContractViolation("path file: wrote " + std::to_string(paths_written_) +
                                " of " + std::to_string(n_paths_) + " paths");
    out_.flush();
    if (!out_) throw PathFileError("path file: write failed");
    out_.close();
}

void write_path_file(const std::string& file, const PathBundle& bundle) {
    std::vector<std::string> series, scalars;
    for (const auto& [name, _] : bundle.aux_series) series.push_back(name);
    for (const auto& [name, _] : bundle.aux_scalars) scalars.push_back(name);
    PathFileWriter w(file, *bundle.grid, bundle.n_paths, bundle.dim, bundle.root_seed,
                     series, scalars);
    PathBundle view = bundle;
    view.path_offset = 0;
    w.write_chunk(view);
    w.finish();
}

PathBundle read_path_file(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw PathFileError("cannot open: " + file);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw PathFileError("bad magic, not a path file: " + file);
    const auto version = get<std::uint8_t>(in);
    if (version != kVersion)
        throw PathFileError("unsupported path file version " + std::to_string(version));
    const auto dim = get<std::uint32_t>(in);
    const auto steps = get<std::uint32_t>(in);
    const auto n_paths = get<std::uint32_t>(in);
    const auto horizon = get<double>(in);
    const auto root_seed = get<std::uint64_t>(in);
    const auto aux_count = get<std::uint32_t>(in);
    if (dim == 0 || dim > 64 || steps == 0 || n_paths == 0)
        throw PathFileError("path file header out of range");
    std::vector<std::string> names;
    for (std::uint32_t a = 0; a < aux_count; ++a) {
        const auto len = get<std::uint32_t>(in);
        if (len > 4096) throw PathFileError("aux name too long");
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (!in) throw PathFileError("path file truncated in name table");
        names.push_back(std::move(name));
    }
    const std::size_t npts = static_cast<std::size_t>(steps) + 1;
    std::vector<double> times(npts);
    in.read(reinterpret_cast<char*>(times.data()), static_cast<std::streamsize>(npts * 8));
    if (!in) throw PathFileError("path file truncated in times");
    if (times.back() != horizon) throw PathFileError("grid horizon disagrees with header");

    PathBundle b;
    b.grid = std::make_shared<TimeGrid>(std::move(times));
    b.n_paths = n_paths;
    b.dim = static_cast<int>(dim);
    b.root_seed = root_seed;
    b.values.resize(static_cast<std::size_t>(n_paths) * npts * dim);
    in.read(reinterpret_cast<char*>(b.values.data()),
            static_cast<std::streamsize>(b.values.size() * 8));
    if (!in) throw PathFileError("path file truncated in values");

    for (const auto& name : names) {
        const auto rows = get<std::uint32_t>(in);
        if (rows != 1 && rows != npts)
            throw PathFileError("aux block " + name + " has invalid rows_per_path");
        std::vector<double> data(static_cast<std::size_t>(n_paths) * rows);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * 8));
        if (!in) throw PathFileError("path file truncated in aux block " + name);
        if (rows == 1)
            b.aux_scalars.emplace(name, std::move(data));
        else
            b.aux_series.emplace(name, std::move(data));
    }
    return b;
}

}  // namespace arbkit
