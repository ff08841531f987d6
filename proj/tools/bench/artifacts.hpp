#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <cellpinn/problems.hpp>
#include <cellpinn/reference.hpp>
#include <cellpinn/trainer.hpp>

namespace cellpinn::bench {

std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// `x,y,value` rows in storage order of the N x N grid.
std::string field_csv(int points_per_side, std::span<const double> values);
/// Inverse of field_csv; checks the header and that rows form a square grid.
ReferenceField parse_field_csv(const std::string& text);

std::string history_csv(const TrainingHistory& history);

/// Flat `key = value` report; keys are sorted.
using Report = std::map<std::string, std::string>;
std::string format_report(const Report& report);
Report parse_report(const std::string& text);

/// Disk cache of finite-difference reference fields. Each entry is a field CSV
/// with a sidecar holding its FNV-1a digest.
class OracleCache {
public:
    explicit OracleCache(std::filesystem::path dir);

    /// CELLPINN_ORACLE_CACHE when set, else ./.cellpinn-cache.
    static std::filesystem::path default_dir();

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path entry_path(const ProblemSpec& problem, int cells, double tolerance) const;

    /// The cached field when present and its digest matches.
    std::optional<ReferenceField> lookup(const ProblemSpec& problem, int cells, double tolerance) const;
    /// Cached field, or a fresh fd_solve stored for next time. `hit` reports which.
    ReferenceField get_or_solve(const ProblemSpec& problem, int cells, double tolerance,
                                bool* hit = nullptr) const;

private:
    std::filesystem::path dir_;
};

}  // namespace cellpinn::bench
