#include "bench/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <cellpinn/error.hpp>

#include "bench/run_config.hpp"

namespace cellpinn::bench {

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp);
        out << content;
        if (!out) throw ConfigError("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string field_csv(int points_per_side, std::span<const double> values) {
    const auto pts = grid_points(points_per_side);
    if (pts.size() != values.size()) throw ContractViolation("field_csv: size mismatch");
    std::string out = "x,y,value\n";
    out.reserve(values.size() * 64);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        out += format_double(pts[k].x);
        out += ',';
        out += format_double(pts[k].y);
        out += ',';
        out += format_double(values[k]);
        out += '\n';
    }
    return out;
}

ReferenceField parse_field_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "x,y,value") throw ConfigError("field file: bad header");
    ReferenceField f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c2 = line.rfind(',');
        if (c2 == std::string::npos) throw ConfigError("field file: malformed row");
        char* end = nullptr;
        const double v = std::strtod(line.c_str() + c2 + 1, &end);
        if (*end != '\0') throw ConfigError("field file: malformed value");
        f.values.push_back(v);
    }
    const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(f.values.size()))));
    if (n < 2 || static_cast<std::size_t>(n) * n != f.values.size()) {
        throw ConfigError("field file: rows do not form a square grid");
    }
    f.points_per_side = n;
    return f;
}

std::string history_csv(const TrainingHistory& history) {
    std::string out = "step,phase,energy,boundary_loss,lr,nrmse,pbc_gap\n";
    for (const auto& r : history.records) {
        out += std::to_string(r.step) + ',' + std::to_string(r.phase) + ',' + format_double(r.energy) +
               ',' + format_double(r.boundary_loss) + ',' + format_double(r.lr) + ',' +
               format_double(r.nrmse) + ',' + format_double(r.pbc_gap) + '\n';
    }
    return out;
}

std::string format_report(const Report& report) {
    std::string out;
    for (const auto& [k, v] : report) out += k + " = " + v + '\n';
    return out;
}

Report parse_report(const std::string& text) {
    Report r;
    for (auto& [k, v] : parse_key_values(text)) r[k] = v;
    return r;
}

OracleCache::OracleCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path OracleCache::default_dir() {
    if (const char* env = std::getenv("CELLPINN_ORACLE_CACHE"); env && *env) return env;
    return ".cellpinn-cache";
}

std::filesystem::path OracleCache::entry_path(const ProblemSpec& problem, int cells,
                                              double tolerance) const {
    char buf[160];
    if (problem.name == "exp2") {
        std::snprintf(buf, sizeof buf, "%s_eps%.17g_n%d_tol%.3g.csv", problem.name.c_str(),
                      problem.epsilon, cells, tolerance);
    } else {
        std::snprintf(buf, sizeof buf, "%s_n%d_tol%.3g.csv", problem.name.c_str(), cells, tolerance);
    }
    return dir_ / buf;
}

std::optional<ReferenceField> OracleCache::lookup(const ProblemSpec& problem, int cells,
                                                  double tolerance) const {
    const auto path = entry_path(problem, cells, tolerance);
    const auto digest_path = path.string() + ".fnv1a";
    std::error_code ec;
    if (!std::filesystem::exists(path, ec) || !std::filesystem::exists(digest_path, ec)) return std::nullopt;
    const std::string body = read_file(path);
    std::string digest = read_file(digest_path);
    while (!digest.empty() && (digest.back() == '\n' || digest.back() == '\r')) digest.pop_back();
    if (digest != hex64(fnv1a(body))) return std::nullopt;
    ReferenceField f = parse_field_csv(body);
    if (f.points_per_side != cells + 1) return std::nullopt;
    f.source = ReferenceSource::FiniteDifference;
    f.fd_cells = cells;
    f.solver_tolerance = tolerance;
    return f;
}

ReferenceField OracleCache::get_or_solve(const ProblemSpec& problem, int cells, double tolerance,
                                         bool* hit) const {
    if (auto f = lookup(problem, cells, tolerance)) {
        if (hit) *hit = true;
        return *f;
    }
    if (hit) *hit = false;
    ReferenceField f = fd_solve(problem, cells, tolerance);
    const std::string body = field_csv(f.points_per_side, f.values);
    const auto path = entry_path(problem, cells, tolerance);
    write_file(path, body);
    write_file(path.string() + ".fnv1a", hex64(fnv1a(body)) + "\n");
    // Reload so callers see exactly what the file holds.
    ReferenceField stored = parse_field_csv(body);
    stored.source = ReferenceSource::FiniteDifference;
    stored.fd_cells = cells;
    stored.solver_tolerance = tolerance;
    return stored;
}

}  // namespace cellpinn::bench
