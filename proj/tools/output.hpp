#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace swips::cli {

inline constexpr const char* engine_version = "1.0.0";

inline std::string full_precision(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
    return buf;
}

// RFC 4180 field: quoted only when it holds a separator, quote or line break.
inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

class CsvWriter {
public:
    using Cell = std::optional<std::variant<double, long long, std::string>>;

    CsvWriter(std::filesystem::path path, const std::vector<std::string>& header) : path_(std::move(path))
    {
        out_.open(path_, std::ios::binary);
        if (!out_) {
            throw std::runtime_error("cannot write " + path_.string());
        }
        row_strings(header);
    }

    void row(const std::vector<Cell>& cells)
    {
        std::vector<std::string> text;
        text.reserve(cells.size());
        for (const auto& c : cells) {
            if (!c) {
                text.emplace_back();
            } else if (const auto* d = std::get_if<double>(&*c)) {
                text.push_back(full_precision(*d));
            } else if (const auto* i = std::get_if<long long>(&*c)) {
                text.push_back(std::to_string(*i));
            } else {
                text.push_back(std::get<std::string>(*c));
            }
        }
        row_strings(text);
    }

    const std::filesystem::path& path() const { return path_; }

private:
    void row_strings(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out_ << (i ? "," : "") << csv_field(cells[i]);
        }
        out_ << "\r\n";
    }

    std::filesystem::path path_;
    std::ofstream out_;
};

// FNV-1a over the file bytes; identifies artifacts for replay comparison.
inline std::string file_digest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
        h ^= static_cast<unsigned char>(*it);
        h *= 0x100000001b3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

// Collects artifacts of one run and writes <name>.manifest.json next to them.
class Manifest {
public:
    Manifest(std::string subcommand, std::vector<std::string> argv, std::chrono::steady_clock::time_point started,
             std::string started_utc)
        : subcommand_(std::move(subcommand)), argv_(std::move(argv)), started_(started),
          started_utc_(std::move(started_utc))
    {
    }

    nlohmann::json& parameters() { return parameters_; }
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void add(const std::filesystem::path& artifact) { artifacts_.push_back(artifact); }

    std::filesystem::path write(const std::filesystem::path& dir, const std::string& name) const
    {
        nlohmann::json j;
        j["subcommand"] = subcommand_;
        j["argv"] = argv_;
        j["parameters"] = parameters_;
        if (seed_) {
            j["seed"] = *seed_;
        }
        j["artifacts"] = nlohmann::json::array();
        for (const auto& a : artifacts_) {
            j["artifacts"].push_back({{"file", a.filename().string()},
                                      {"bytes", std::filesystem::file_size(a)},
                                      {"fnv1a64", file_digest(a)}});
        }
        j["started_utc"] = started_utc_;
        j["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        j["engine_version"] = engine_version;
        const auto path = dir / (name + ".manifest.json");
        write_text(path, j.dump(2) + "\n");
        return path;
    }

private:
    std::string subcommand_;
    std::vector<std::string> argv_;
    nlohmann::json parameters_ = nlohmann::json::object();
    std::optional<std::uint64_t> seed_;
    std::vector<std::filesystem::path> artifacts_;
    std::chrono::steady_clock::time_point started_;
    std::string started_utc_;
};

// gnuplot script plotting columns of a CSV against its first column.
inline std::string plot_script(const std::string& csv, const std::string& title, const std::string& xlabel,
                               const std::vector<std::pair<int, std::string>>& series, bool log_x = false)
{
    std::ostringstream s;
    s << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set title '" << title << "'\n"
      << "set xlabel '" << xlabel << "'\n";
    if (log_x) {
        s << "set logscale x\n";
    }
    s << "plot ";
    for (std::size_t i = 0; i < series.size(); ++i) {
        s << (i ? ", \\\n     " : "") << "'" << csv << "' using 1:" << series[i].first << " with linespoints title '"
          << series[i].second << "'";
    }
    s << "\npause -1\n";
    return s.str();
}

} // namespace swips::cli
