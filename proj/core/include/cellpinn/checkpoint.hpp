#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "cellpinn/model.hpp"
#include "cellpinn/optim.hpp"

namespace cellpinn {

/// Model, optimizer state and step counter, plus the run configuration as
/// opaque text. Doubles are stored bit-exact.
struct Checkpoint {
    Model model;
    AdamState optimizer;
    std::int64_t step = 0;
    std::string config;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

class ModelSerializer {
public:
    static void write(std::ostream& out, const Model& model);
    static Model read(std::istream& in);
};

void write_checkpoint(std::ostream& out, const Model& model, const AdamState& optimizer,
                      std::int64_t step, const std::string& config);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState& optimizer, std::int64_t step, const std::string& config);
/// Throws ConfigError for a missing, truncated or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cellpinn
