#include "largesol/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "largesol/errors.hpp"

namespace largesol {

namespace {

const std::map<std::string, Mode> kModes = {
    {"ko-check", Mode::KoCheck},         {"solve", Mode::Solve}, {"maximal", Mode::Maximal},
    {"minimal-above", Mode::MinimalAbove}, {"minimal-large", Mode::MinimalLarge}, {"bvp", Mode::Bvp},
    {"whole-space", Mode::WholeSpace},   {"gap", Mode::Gap},     {"oracle", Mode::Oracle},
    {"verify", Mode::Verify},
};

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_plain(const std::string& text, int line) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) throw ParseError("malformed number '" + text + "'", line);
    return v;
}

// Accepts plain decimals and powers such as 2^-7.
double parse_number(const std::string& text, int line) {
    auto caret = text.find('^');
    if (caret == std::string::npos) return parse_plain(text, line);
    double base = parse_plain(trim(text.substr(0, caret)), line);
    double expo = parse_plain(trim(text.substr(caret + 1)), line);
    return std::pow(base, expo);
}

int parse_int(const std::string& text, int line) {
    int v = 0;
    const char* end = text.data() + text.size();
    auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) throw ParseError("malformed integer '" + text + "'", line);
    return v;
}

bool parse_bool(const std::string& text, int line) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ParseError("malformed boolean '" + text + "'", line);
}

struct Entry {
    std::string value;
    int line = 0;
};

using Setter = std::function<void(ExperimentConfig&, const Entry&)>;

struct KeySpec {
    Setter set;
    std::set<Mode> modes;  // empty: any mode
};

std::map<std::string, KeySpec> key_table() {
    auto num = [](double ExperimentConfig::*field) {
        return [field](ExperimentConfig& c, const Entry& e) { c.*field = parse_number(e.value, e.line); };
    };
    auto str = [](std::string ExperimentConfig::*field) {
        return [field](ExperimentConfig& c, const Entry& e) { c.*field = e.value; };
    };
    auto integer = [](int ExperimentConfig::*field) {
        return [field](ExperimentConfig& c, const Entry& e) { c.*field = parse_int(e.value, e.line); };
    };
    const std::set<Mode> domain_modes = {Mode::Solve, Mode::Maximal, Mode::MinimalAbove,
                                         Mode::MinimalLarge, Mode::Bvp, Mode::Gap};
    std::set<Mode> grid_modes = domain_modes;
    grid_modes.insert(Mode::WholeSpace);
    const std::set<Mode> oracle = {Mode::Oracle};
    std::map<std::string, KeySpec> t;
    t["g.family"] = {str(&ExperimentConfig::g_family), {}};
    t["g.q"] = {num(&ExperimentConfig::g_q), {}};
    t["g.a"] = {num(&ExperimentConfig::g_a), {}};
    t["g.alpha"] = {num(&ExperimentConfig::g_alpha), {}};
    t["g.shift"] = {num(&ExperimentConfig::g_shift), {}};
    t["g.table"] = {str(&ExperimentConfig::g_table), {}};
    t["domain.shape"] = {str(&ExperimentConfig::shape), domain_modes};
    t["domain.h"] = {num(&ExperimentConfig::h), grid_modes};
    t["domain.dim"] = {integer(&ExperimentConfig::dim), {Mode::WholeSpace}};
    std::set<Mode> forced = grid_modes;
    forced.insert(Mode::Oracle);
    t["f.expr"] = {str(&ExperimentConfig::forcing), forced};
    t["run.mode"] = {[](ExperimentConfig&, const Entry&) {}, {}};
    t["run.tol"] = {num(&ExperimentConfig::tol), {}};
    t["run.ko_base"] = {num(&ExperimentConfig::ko_base), {Mode::KoCheck}};
    t["run.output_dir"] = {str(&ExperimentConfig::output_dir), {}};
    t["run.V"] = {[](ExperimentConfig& c, const Entry& e) { c.V = e.value; },
                  {Mode::Maximal, Mode::MinimalAbove, Mode::MinimalLarge, Mode::Gap}};
    t["run.bdata"] = {str(&ExperimentConfig::bdata), {Mode::Solve, Mode::Bvp}};
    t["run.sandwich"] = {[](ExperimentConfig& c, const Entry& e) { c.sandwich = parse_bool(e.value, e.line); },
                         {Mode::Maximal}};
    t["run.R0"] = {num(&ExperimentConfig::R0), {Mode::WholeSpace}};
    t["run.R_max"] = {num(&ExperimentConfig::R_max), {Mode::WholeSpace}};
    t["run.max_box_levels"] = {integer(&ExperimentConfig::max_box_levels), {Mode::MinimalLarge, Mode::Gap}};
    t["run.suite"] = {str(&ExperimentConfig::suite), {Mode::Verify}};
    t["run.N"] = {integer(&ExperimentConfig::N), oracle};
    t["run.geometry"] = {str(&ExperimentConfig::geometry), oracle};
    t["run.condition"] = {str(&ExperimentConfig::condition), oracle};
    t["run.R"] = {num(&ExperimentConfig::R), oracle};
    t["run.L"] = {num(&ExperimentConfig::L), oracle};
    t["run.far_value"] = {num(&ExperimentConfig::far_value), oracle};
    t["run.a"] = {num(&ExperimentConfig::seg_a), oracle};
    t["run.b"] = {num(&ExperimentConfig::seg_b), oracle};
    t["run.ua"] = {num(&ExperimentConfig::ua), oracle};
    t["run.ub"] = {num(&ExperimentConfig::ub), oracle};
    t["run.value"] = {num(&ExperimentConfig::value), oracle};
    t["run.samples"] = {integer(&ExperimentConfig::samples), oracle};
    t["run.r_min"] = {[](ExperimentConfig& c, const Entry& e) { c.r_min = parse_number(e.value, e.line); }, oracle};
    t["run.r_max"] = {[](ExperimentConfig& c, const Entry& e) { c.r_max = parse_number(e.value, e.line); }, oracle};
    return t;
}

}  // namespace

std::string to_string(Mode m) {
    for (const auto& [name, mode] : kModes)
        if (mode == m) return name;
    return "?";
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir) {
    static const std::set<std::string> sections = {"g", "domain", "f", "run"};
    const auto table = key_table();
    std::map<std::string, Entry> entries;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = trim(raw.substr(0, raw.find('#')));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError("malformed section header '" + s + "'", line);
            section = trim(s.substr(1, s.size() - 2));
            if (!sections.count(section)) throw ParseError("unknown section [" + section + "]", line);
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value', got '" + s + "'", line);
        if (section.empty()) throw ParseError("key outside of any section", line);
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", line);
        if (value.empty()) throw ParseError("empty value for '" + key + "'", line);
        std::string full = section + "." + key;
        if (!table.count(full)) throw ParseError("unknown key '" + key + "' in [" + section + "]", line);
        if (auto it = entries.find(full); it != entries.end())
            throw ParseError("duplicate key '" + key + "' (first set on line " + std::to_string(it->second.line) + ")",
                             line);
        entries[full] = {value, line};
    }

    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    auto mode_it = entries.find("run.mode");
    if (mode_it == entries.end()) throw ParseError("missing [run] mode");
    auto m = kModes.find(mode_it->second.value);
    if (m == kModes.end()) throw ParseError("unknown mode '" + mode_it->second.value + "'", mode_it->second.line);
    cfg.mode = m->second;

    for (const auto& [key, entry] : entries) {
        const KeySpec& spec = table.at(key);
        if (!spec.modes.empty() && !spec.modes.count(cfg.mode))
            throw ParseError("key '" + key + "' does not apply to mode " + to_string(cfg.mode), entry.line);
        spec.set(cfg, entry);
    }

    auto need = [&](const char* key, const char* why) {
        if (!entries.count(key)) throw ParseError(std::string("mode ") + to_string(cfg.mode) + " needs " + why);
    };
    switch (cfg.mode) {
        case Mode::Solve:
        case Mode::Maximal:
        case Mode::MinimalAbove:
        case Mode::MinimalLarge:
        case Mode::Bvp:
        case Mode::Gap:
            need("domain.shape", "[domain] shape");
            need("domain.h", "[domain] h");
            break;
        case Mode::WholeSpace:
            need("domain.dim", "[domain] dim");
            need("domain.h", "[domain] h");
            if (cfg.dim != 1 && cfg.dim != 2) throw ParseError("dim must be 1 or 2", entries["domain.dim"].line);
            break;
        default:
            break;
    }
    if (entries.count("domain.h") && !(cfg.h > 0.0)) throw ParseError("h must be positive", entries["domain.h"].line);
    if (!(cfg.tol > 0.0)) throw ParseError("tol must be positive", entries.count("run.tol") ? entries["run.tol"].line : 0);
    if (cfg.mode == Mode::Verify && cfg.suite != "fast" && cfg.suite != "full")
        throw ParseError("suite must be fast or full", entries["run.suite"].line);
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    auto dir = std::filesystem::path(path).parent_path();
    return parse_config_text(ss.str(), dir.empty() ? "." : dir.string());
}

Nonlinearity make_nonlinearity(const ExperimentConfig& cfg) {
    const std::string& f = cfg.g_family;
    if (f == "power") return cfg.g_q == 1.0 ? Nonlinearity::linear(cfg.g_shift) : Nonlinearity::power(cfg.g_q, cfg.g_shift);
    if (f == "exp") return Nonlinearity::exp(cfg.g_a, cfg.g_shift);
    if (f == "powerlog") return Nonlinearity::power_log(cfg.g_alpha, cfg.g_shift);
    if (f == "linear") return Nonlinearity::linear(cfg.g_shift);
    if (f == "custom") {
        if (cfg.g_table.empty()) throw InvalidArgument("custom g needs a table path");
        std::filesystem::path p(cfg.g_table);
        if (p.is_relative()) p = std::filesystem::path(cfg.base_dir) / p;
        return Nonlinearity::from_csv(p.string());
    }
    throw InvalidArgument("unknown g family '" + f + "'");
}

}  // namespace largesol
