#include "bench/run_config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <cellpinn/error.hpp>

namespace cellpinn::bench {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || errno == ERANGE) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
    return d;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("key '" + key + "': expected true|false, got '" + v + "'");
}

template <class F>
auto wrap(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ContractViolation& e) {
        throw ConfigError("key '" + key + "': " + e.what());
    }
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define CP_DOUBLE(path) \
    Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.path = to_double(k, v); }, \
          [](const RunConfig& c) { return format_double(c.path); }}
#define CP_INT(path)                                                                             \
    Field{[](RunConfig& c, const std::string& k, const std::string& v) {                         \
              c.path = to_int<decltype(c.path)>(k, v);                                            \
          },                                                                                     \
          [](const RunConfig& c) { return std::to_string(c.path); }}

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"problem", {[](RunConfig& c, const std::string&, const std::string& v) { c.problem = v; },
                     [](const RunConfig& c) { return c.problem; }}},
        {"epsilon", CP_DOUBLE(epsilon)},
        {"model", {[](RunConfig& c, const std::string& k, const std::string& v) {
                       c.model.kind = wrap(k, [&] { return parse_model_kind(v); });
                   },
                   [](const RunConfig& c) { return to_string(c.model.kind); }}},
        {"scheme", {[](RunConfig& c, const std::string& k, const std::string& v) {
                        c.training.scheme = wrap(k, [&] { return parse_scheme(v); });
                    },
                    [](const RunConfig& c) { return to_string(c.training.scheme); }}},
        {"levels", CP_INT(model.grid.levels)},
        {"max_resolution", CP_INT(model.grid.max_resolution)},
        {"growth", CP_DOUBLE(model.grid.growth)},
        {"features", CP_INT(model.grid.features)},
        {"single_grid_resolution", CP_INT(model.single_grid_resolution)},
        {"hidden_layers", CP_INT(model.mlp.hidden_layers)},
        {"width", CP_INT(model.mlp.width)},
        {"activation", {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.model.mlp.activation = wrap(k, [&] { return parse_activation(v); });
                        },
                        [](const RunConfig& c) { return to_string(c.model.mlp.activation); }}},
        {"spectral_norm", {[](RunConfig& c, const std::string& k, const std::string& v) {
                               c.model.mlp.spectral_normalization = to_bool(k, v);
                           },
                           [](const RunConfig& c) {
                               return std::string(c.model.mlp.spectral_normalization ? "true" : "false");
                           }}},
        {"lambda", CP_DOUBLE(training.lambda)},
        {"steps", CP_INT(training.steps)},
        {"interior_batch", CP_INT(training.interior_batch)},
        {"boundary_batch", CP_INT(training.boundary_batch)},
        {"phase1_max_steps", CP_INT(training.phase1_max_steps)},
        {"phase1_threshold", CP_DOUBLE(training.phase1_threshold)},
        {"trials", CP_INT(training.trials)},
        {"seed", CP_INT(training.seed)},
        {"eval_n", CP_INT(training.eval_n)},
        {"final_eval_n", CP_INT(training.final_eval_n)},
        {"eval_interval", CP_INT(training.eval_interval)},
        {"monitor_interior", CP_INT(training.monitor_interior)},
        {"monitor_boundary", CP_INT(training.monitor_boundary)},
        {"lr", CP_DOUBLE(training.optimizer.initial_lr)},
        {"lr_decay", CP_DOUBLE(training.optimizer.decay)},
        {"lr_decay_interval", CP_INT(training.optimizer.decay_interval)},
        {"adam_beta1", CP_DOUBLE(training.optimizer.beta1)},
        {"adam_beta2", CP_DOUBLE(training.optimizer.beta2)},
        {"adam_epsilon", CP_DOUBLE(training.optimizer.epsilon)},
        {"phase1_lr", CP_DOUBLE(training.phase1_optimizer.initial_lr)},
        {"phase1_lr_decay", CP_DOUBLE(training.phase1_optimizer.decay)},
        {"phase1_lr_decay_interval", CP_INT(training.phase1_optimizer.decay_interval)},
        {"phase1_adam_beta1", CP_DOUBLE(training.phase1_optimizer.beta1)},
        {"phase1_adam_beta2", CP_DOUBLE(training.phase1_optimizer.beta2)},
        {"phase1_adam_epsilon", CP_DOUBLE(training.phase1_optimizer.epsilon)},
        {"oracle_n", CP_INT(oracle_n)},
        {"oracle_tolerance", CP_DOUBLE(oracle_tolerance)},
        {"jobs", CP_INT(jobs)},
        {"out", {[](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
                 [](const RunConfig& c) { return c.out; }}},
    };
    return table;
}

#undef CP_DOUBLE
#undef CP_INT

const Field* find_field(const std::string& key) {
    for (const auto& [k, f] : fields()) {
        if (k == key) return &f;
    }
    return nullptr;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& kv : fields()) out.push_back(kv.first);
        return out;
    }();
    return keys;
}

MlpConfig default_mlp(ModelKind kind) {
    return kind == ModelKind::PlainMlp ? Model::plain_mlp_config() : MlpConfig{};
}

void RunConfig::validate() const {
    try {
        const ProblemSpec p = make_problem(problem, epsilon);
        if (model.kind != ModelKind::PlainMlp) model.grid.validate();
        if (model.kind != ModelKind::SingleGrid) model.mlp.validate();
        if (model.single_grid_resolution < 1) throw ConfigError("single_grid_resolution must be >= 1");
        training.validate();
        if (p.is_periodic() != (training.scheme == Scheme::Periodic)) {
            throw ConfigError("scheme '" + to_string(training.scheme) + "' does not fit problem " +
                              problem + " (periodic problems use the periodic scheme and only they do)");
        }
        if (training.scheme == Scheme::Decoupled && model.kind == ModelKind::PlainMlp) {
            throw ConfigError("decoupled training needs a grid model");
        }
        if (training.scheme == Scheme::Periodic && model.kind == ModelKind::PlainMlp) {
            throw ConfigError("parameter sharing needs a grid model");
        }
        if (!p.has_analytic()) {
            if (oracle_n < 8) throw ConfigError("oracle_n must be >= 8");
            for (int n : {training.eval_n, training.final_eval_n}) {
                if ((oracle_n % (n - 1)) != 0) {
                    throw ConfigError("evaluation grid of " + std::to_string(n) +
                                      " points does not nest in the oracle grid (oracle_n=" +
                                      std::to_string(oracle_n) + ")");
                }
            }
        }
        if (!(oracle_tolerance > 0.0)) throw ConfigError("oracle_tolerance must be > 0");
        if (jobs < 1) throw ConfigError("jobs must be >= 1");
        if (out.empty()) throw ConfigError("out must not be empty");
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
}

RunConfig apply_overrides(RunConfig base, const KeyValues& values) {
    for (const auto& [k, v] : values) {
        if (!find_field(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    for (const auto& [k, v] : values) {
        if (k == "model") {
            find_field(k)->set(base, k, v);
            base.model.mlp = default_mlp(base.model.kind);
        }
    }
    for (const auto& [k, v] : values) {
        if (k != "model") find_field(k)->set(base, k, v);
    }
    return base;
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

RunConfig parse_run_config(const std::string& text) {
    return apply_overrides(RunConfig{}, parse_key_values(text));
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string serialize(const RunConfig& config) {
    std::ostringstream out;
    for (const auto& [k, f] : fields()) out << k << " = " << f.get(config) << '\n';
    return out.str();
}

void apply_smoke(RunConfig& config) {
    config.training.steps = 600;
    config.training.interior_batch = 3000;
    config.training.optimizer.decay_interval = 80;
}

}  // namespace cellpinn::bench
