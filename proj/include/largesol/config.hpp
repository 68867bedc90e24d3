#pragma once

#include <optional>
#include <string>

#include "largesol/nonlinearity.hpp"

namespace largesol {

enum class Mode { KoCheck, Solve, Maximal, MinimalAbove, MinimalLarge, Bvp, WholeSpace, Gap, Oracle, Verify };

std::string to_string(Mode m);

struct ExperimentConfig {
    Mode mode = Mode::KoCheck;

    // [g]
    std::string g_family = "power";
    double g_q = 3.0;
    double g_a = 1.0;
    double g_alpha = 1.0;
    double g_shift = 0.0;
    std::string g_table;

    // [domain]
    std::string shape;
    double h = 0.0;
    int dim = 0;  // whole-space runs

    // [f]
    std::string forcing = "0";

    // [run]
    double tol = 1e-4;
    double ko_base = 1.0;
    std::string output_dir = "out";
    std::optional<std::string> V;  // subsolution descriptor
    std::string bdata = "0";       // Dirichlet data descriptor (solve, bvp)
    bool sandwich = false;
    double R0 = 2.0;
    double R_max = 8.0;
    int max_box_levels = 3;
    std::string suite = "fast";

    // [run] keys of the oracle mode
    int N = 1;
    std::string geometry = "ball";      // ball, exterior, halfline, segment
    std::string condition = "large";    // large, dirichlet
    double R = 1.0;
    double L = 10.0;
    double far_value = 0.0;
    double seg_a = 0.0, seg_b = 1.0, ua = 0.0, ub = 0.0;
    double value = 0.0;
    int samples = 101;
    std::optional<double> r_min, r_max;

    std::string base_dir = ".";  // relative paths in descriptors resolve here
};

// Sections [g], [domain], [f], [run]; `key = value`; `#` comments.
// Unknown or duplicate keys and malformed lines raise ParseError with the line.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir = ".");

// Power with q = 1 maps to the linear family so that the KO check, not the
// constructor, refuses it.
Nonlinearity make_nonlinearity(const ExperimentConfig& cfg);

}  // namespace largesol
