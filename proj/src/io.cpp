#include "degen/io.hpp"

#include "degen/core.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace degen {

std::string fmt(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
    }
}

void write_json(const std::filesystem::path& path, const Json& j) { atomic_write(path, j.dump(2) + "\n"); }

std::string csv_matrix(const std::vector<double>& values, int nx, int ny)
{
    std::string out;
    out.reserve(values.size() * 8);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            if (i) out += ',';
            out += fmt(values[std::size_t(j) * nx + i]);
        }
        out += '\n';
    }
    return out;
}

std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows)
{
    std::ostringstream os;
    for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << fmt(row[k]);
        os << '\n';
    }
    return os.str();
}

}  // namespace degen
