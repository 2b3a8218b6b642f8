// ---------------------------------------------------------------------------
// config.cpp
//
// Strict JSON config parsing. The reader rejects unknown keys per block,
// type-checks every value, and qualifies every message with the offending
// key path ("simulation.n_paths must be an integer"), so a config mistake
// is a one-line fix rather than a debugging session. JSON syntax errors are
// reported with line and column computed from the byte offset.
// ---------------------------------------------------------------------------
#include "graphon_lq/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphon_lq/errors.hpp"

namespace glq {
namespace {

using nlohmann::json;

// Converts a byte offset (as reported by the JSON parser, 1-based, pointing
// just past the offending character) into line:column against the raw text.
[[noreturn]] void throw_syntax_error(const std::string& text, const std::string& name,
                                     const json::parse_error& err) {
    std::size_t byte = err.byte > 0 ? err.byte - 1 : 0;
    byte = std::min(byte, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    // The library message carries a bracketed error id; keep only the prose.
    std::string detail = err.what();
    if (const auto close = detail.find("] "); close != std::string::npos)
        detail = detail.substr(close + 2);
    throw config_error(name + ":" + std::to_string(line) + ":" + std::to_string(column) +
                       ": invalid JSON (" + detail + ")");
}

// Strict reader over one JSON object. Construction validates that every key
// present is in the allowed set; getters validate types and report failures
// under the block-qualified key name.
class BlockReader {
public:
    BlockReader(const json& block, std::string block_name, const std::vector<std::string>& allowed)
        : block_(block), name_(std::move(block_name)) {
        if (!block_.is_object())
            throw config_error(name_ + " must be a JSON object");
        for (const auto& item : block_.items()) {
            if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
                throw config_error(name_ + " has unknown key \"" + item.key() + "\"");
        }
    }

    [[nodiscard]] bool has(const std::string& key) const { return block_.contains(key); }

    [[nodiscard]] double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        return require_number(key);
    }

    [[nodiscard]] double require_number(const std::string& key) const {
        const json& value = fetch(key);
        if (!value.is_number())
            throw config_error(path(key) + " must be a number");
        return value.get<double>();
    }

    [[nodiscard]] int integer(const std::string& key, int fallback, int minimum) const {
        if (!has(key)) return fallback;
        const json& value = fetch(key);
        if (!value.is_number_integer())
            throw config_error(path(key) + " must be an integer");
        const auto wide = value.get<std::int64_t>();
        if (wide < minimum || wide > std::numeric_limits<int>::max())
            throw config_error(path(key) + " must be an integer >= " + std::to_string(minimum));
        return static_cast<int>(wide);
    }

    [[nodiscard]] std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const json& value = fetch(key);
        if (!value.is_number_unsigned())
            throw config_error(path(key) + " must be a non-negative integer");
        return value.get<std::uint64_t>();
    }

    [[nodiscard]] bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& value = fetch(key);
        if (!value.is_boolean())
            throw config_error(path(key) + " must be true or false");
        return value.get<bool>();
    }

    [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const json& value = fetch(key);
        if (!value.is_string())
            throw config_error(path(key) + " must be a string");
        return value.get<std::string>();
    }

    // Required rectangular matrix of exactly rows x cols numbers.
    [[nodiscard]] Eigen::MatrixXd matrix(const std::string& key, int rows, int cols) const {
        const Eigen::MatrixXd m = read_matrix(key);
        if (m.rows() != rows || m.cols() != cols)
            throw config_error(path(key) + " must be a " + std::to_string(rows) + "x" +
                               std::to_string(cols) + " matrix");
        return m;
    }

    // Required square matrix of any size >= 1.
    [[nodiscard]] Eigen::MatrixXd square_matrix(const std::string& key) const {
        const Eigen::MatrixXd m = read_matrix(key);
        if (m.rows() != m.cols())
            throw config_error(path(key) + " must be a square matrix");
        return m;
    }

    [[nodiscard]] std::vector<int> int_list(const std::string& key, int minimum) const {
        const json& value = fetch(key);
        if (!value.is_array())
            throw config_error(path(key) + " must be an array of integers");
        std::vector<int> out;
        out.reserve(value.size());
        for (const auto& entry : value) {
            if (!entry.is_number_integer())
                throw config_error(path(key) + " must contain only integers");
            const auto wide = entry.get<std::int64_t>();
            if (wide < minimum || wide > std::numeric_limits<int>::max())
                throw config_error(path(key) + " entries must be integers >= " +
                                   std::to_string(minimum));
            out.push_back(static_cast<int>(wide));
        }
        return out;
    }

    [[nodiscard]] std::vector<double> number_list(const std::string& key) const {
        const json& value = fetch(key);
        if (!value.is_array())
            throw config_error(path(key) + " must be an array of numbers");
        std::vector<double> out;
        out.reserve(value.size());
        for (const auto& entry : value) {
            if (!entry.is_number())
                throw config_error(path(key) + " must contain only numbers");
            out.push_back(entry.get<double>());
        }
        return out;
    }

private:
    [[nodiscard]] std::string path(const std::string& key) const { return name_ + "." + key; }

    [[nodiscard]] const json& fetch(const std::string& key) const {
        if (!has(key))
            throw config_error(path(key) + " is required");
        return block_.at(key);
    }

    [[nodiscard]] Eigen::MatrixXd read_matrix(const std::string& key) const {
        const json& value = fetch(key);
        if (!value.is_array() || value.empty())
            throw config_error(path(key) + " must be a non-empty array of rows");
        const std::size_t cols = value.front().is_array() ? value.front().size() : 0;
        if (cols == 0)
            throw config_error(path(key) + " rows must be non-empty arrays of numbers");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(value.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < value.size(); ++r) {
            const auto& row = value.at(r);
            if (!row.is_array() || row.size() != cols)
                throw config_error(path(key) + " rows must all have " + std::to_string(cols) +
                                   " entries");
            for (std::size_t c = 0; c < cols; ++c) {
                const auto& entry = row.at(c);
                if (!entry.is_number())
                    throw config_error(path(key) + " must contain only numbers");
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = entry.get<double>();
            }
        }
        return m;
    }

    const json& block_;
    std::string name_;
};

const json& block_or_empty(const json& root, const char* key) {
    static const json empty = json::object();
    return root.contains(key) ? root.at(key) : empty;
}

Graphon read_graphon(const json& root, RunConfig& cfg) {
    const BlockReader graphon(block_or_empty(root, "graphon"), "graphon",
                              {"family", "weight", "exponent", "cells", "K_modes", "grid_size"});
    const std::string family = graphon.text("family", "constant");
    cfg.kernel_family = family;

    const auto forbid = [&](const char* key, const char* owner) {
        if (graphon.has(key))
            throw config_error(std::string("graphon.") + key + " only applies to the " + owner +
                               " family");
    };

    if (family == "constant") {
        forbid("exponent", "power_law");
        forbid("cells", "grid");
        return Graphon::constant(graphon.number("weight", 1.0));
    }
    if (family == "power_law") {
        forbid("weight", "constant");
        forbid("cells", "grid");
        return Graphon::power_law(graphon.number("exponent", -0.4));
    }
    if (family == "min_max") {
        forbid("weight", "constant");
        forbid("exponent", "power_law");
        forbid("cells", "grid");
        return Graphon::min_max();
    }
    if (family == "grid") {
        forbid("weight", "constant");
        forbid("exponent", "power_law");
        return Graphon::grid(graphon.square_matrix("cells"));
    }
    throw config_error("graphon.family must be one of constant, power_law, min_max, grid");
}

GameCoefficients read_coefficients(const json& root) {
    if (!root.contains("coefficients"))
        throw config_error("coefficients block is required");
    const BlockReader coeffs(root.at("coefficients"), "coefficients",
                             {"a", "b", "c", "C_f", "C_h", "T", "m0", "v0"});
    GameCoefficients out;
    out.a = coeffs.require_number("a");
    out.b = coeffs.require_number("b");
    out.c = coeffs.require_number("c");
    out.running_cost = coeffs.matrix("C_f", 3, 3);
    out.terminal_cost = coeffs.matrix("C_h", 2, 2);
    out.horizon = coeffs.require_number("T");
    out.initial_mean = coeffs.number("m0", 0.0);
    out.initial_variance = coeffs.number("v0", 0.0);
    return out;
}

void read_solver(const json& root, RunConfig& cfg) {
    const BlockReader solver(block_or_empty(root, "solver"), "solver",
                             {"dt", "M_x", "blowup_cap", "max_truncation_residual",
                              "gamma_z2_literal"});
    const BlockReader graphon(block_or_empty(root, "graphon"), "graphon",
                              {"family", "weight", "exponent", "cells", "K_modes", "grid_size"});
    if (solver.has("M_x") && graphon.has("grid_size"))
        throw config_error("index grid size given twice: solver.M_x and graphon.grid_size");

    cfg.solver.dt = solver.number("dt", 0.0);
    cfg.solver.k_modes = graphon.integer("K_modes", 40, 1);
    cfg.solver.grid_size = solver.has("M_x") ? solver.integer("M_x", 200, 2)
                                             : graphon.integer("grid_size", 200, 2);
    cfg.solver.blowup_cap = solver.number("blowup_cap", 1e8);
    cfg.solver.max_truncation_residual = solver.number("max_truncation_residual", 1e-3);
    cfg.solver.aggregate_costate_literal = solver.flag("gamma_z2_literal", false);

    cfg.nash.blowup_cap = cfg.solver.blowup_cap;
}

void read_simulation(const json& root, RunConfig& cfg) {
    const BlockReader sim(block_or_empty(root, "simulation"), "simulation",
                          {"n_paths", "dt_sim", "seed", "N_list", "indices", "path_chunk",
                           "max_players"});
    cfg.simulation.n_paths = sim.integer("n_paths", 1000, 1);
    cfg.simulation.dt_sim = sim.number("dt_sim", 0.0);
    cfg.simulation.seed = sim.unsigned_integer("seed", 0);
    cfg.simulation.path_chunk = sim.integer("path_chunk", 512, 1);
    cfg.nash.max_players = sim.integer("max_players", cfg.nash.max_players, 1);
    if (sim.has("N_list")) {
        cfg.n_list = sim.int_list("N_list", 1);
        if (cfg.n_list.empty())
            throw config_error("simulation.N_list must not be empty when given");
    }
    if (sim.has("indices")) {
        cfg.indices = sim.number_list("indices");
        if (cfg.indices.empty())
            throw config_error("simulation.indices must not be empty when given");
        for (const double x : cfg.indices)
            if (!(x >= 0.0 && x <= 1.0))
                throw config_error("simulation.indices entries must lie in [0, 1]");
    }
}

void read_output(const json& root, RunConfig& cfg) {
    const BlockReader output(block_or_empty(root, "output"), "output",
                             {"directory", "surfaces", "modes", "surface_stride", "trajectories",
                              "trajectory_paths", "histograms", "histogram_bins"});
    cfg.output.directory = output.text("directory", "out");
    if (cfg.output.directory.empty())
        throw config_error("output.directory must not be empty");
    cfg.output.surfaces = output.flag("surfaces", true);
    cfg.output.modes = output.flag("modes", true);
    cfg.output.surface_stride = output.integer("surface_stride", 10, 1);
    cfg.output.trajectories = output.flag("trajectories", false);
    cfg.output.trajectory_paths = output.integer("trajectory_paths", 16, 1);
    cfg.output.histograms = output.flag("histograms", false);
    cfg.output.histogram_bins = output.integer("histogram_bins", 40, 1);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& name) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& err) {
        throw_syntax_error(text, name, err);
    }
    if (!root.is_object())
        throw config_error(name + ": top level must be a JSON object");

    static const std::vector<std::string> top_level = {"graphon", "coefficients", "solver",
                                                       "simulation", "output"};
    for (const auto& item : root.items()) {
        if (std::find(top_level.begin(), top_level.end(), item.key()) == top_level.end())
            throw config_error(name + " has unknown top-level key \"" + item.key() + "\"");
    }

    RunConfig cfg;
    cfg.kernel = read_graphon(root, cfg);
    cfg.coefficients = read_coefficients(root);
    read_solver(root, cfg);
    read_simulation(root, cfg);
    read_output(root, cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw config_error("cannot read config file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path);
}

}  // namespace glq
