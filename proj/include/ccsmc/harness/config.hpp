#pragma once

// Experiment configuration: TOML or JSON files are read into one JSON
// document, validated key by key, and turned into library objects.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "../baselines.hpp"
#include "../copula.hpp"
#include "../estimators.hpp"
#include "../marginals.hpp"
#include "../quantiles.hpp"
#include "../smc_sampler.hpp"

namespace ccsmc::harness {

/// Invalid or unreadable configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Method { mc, smc, is_ach };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::mc: return "mc";
        case Method::smc: return "smc";
        case Method::is_ach: return "is_ach";
    }
    return "unknown";
}

inline Method method_from_string(const std::string& s) {
    if (s == "mc") return Method::mc;
    if (s == "smc") return Method::smc;
    if (s == "is_ach") return Method::is_ach;
    throw ConfigError("unknown method '" + s + "' (expected mc, smc or is_ach)");
}

struct QuantileSettings {
    std::size_t n_per_run = 1'000'000;
    std::size_t n_runs = 50;
    std::uint64_t seed = 0;
    std::string cache;  ///< empty: <output>/quantiles.json
};

struct CurvatureSettings {
    std::optional<double> threshold;
    std::size_t points = 9;
};

struct ExperimentConfig {
    nlohmann::json model;  ///< canonical {copula, marginals}; fingerprinted
    std::optional<CopulaModel> copula;
    Marginals margins;
    std::vector<double> alphas = standard_alpha_grid();
    std::vector<double> targets{0.999};
    std::vector<Method> methods{Method::mc, Method::smc};
    RiskMeasure measure = RiskMeasure::es;
    double band_fraction = 0.005;
    std::size_t repetitions = 100;
    std::size_t n_mc = 1000;
    std::uint64_t mc_draw_cap = kDefaultDrawCap;
    std::size_t n_smc = 250;
    SmcOptions smc{};
    std::size_t n_is = 1000;
    MixingDistribution mixing = MixingDistribution::dyadic(20);
    std::size_t n_stddev = 100000;
    QuantileSettings quantiles{};
    CurvatureSettings curvature{};
    std::vector<CellGroup> groups;
    std::uint64_t seed = 42;
    std::string output = "out";
    std::size_t threads = 1;

    std::size_t dim() const { return margins.size(); }

    bool has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

    std::string fingerprint() const { return model_fingerprint(model); }

    std::string quantile_cache() const {
        return quantiles.cache.empty() ? (std::filesystem::path(output) / "quantiles.json").string() : quantiles.cache;
    }

    /// Levels of the quantile table: the grid plus every target.
    std::vector<double> table_alphas() const {
        std::vector<double> a = alphas;
        a.insert(a.end(), targets.begin(), targets.end());
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end(), [](double x, double y) { return std::fabs(x - y) <= 1e-12; }), a.end());
        return a;
    }

    /// Options for one SMC run with the given seed.
    SmcOptions smc_options(std::uint64_t run_seed) const {
        SmcOptions o = smc;
        o.n_particles = n_smc;
        o.seed = run_seed;
        return o;
    }
};

namespace detail {

inline nlohmann::json toml_to_json(const toml::node& node) {
    if (const auto* t = node.as_table()) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (const auto* a = node.as_array()) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& v : *a) j.push_back(toml_to_json(v));
        return j;
    }
    if (const auto* v = node.as_string()) return v->get();
    if (const auto* v = node.as_integer()) return v->get();
    if (const auto* v = node.as_floating_point()) return v->get();
    if (const auto* v = node.as_boolean()) return v->get();
    throw ConfigError("unsupported TOML value (dates and times are not used)");
}

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be a table/object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

inline double get_number(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError("missing " + where + "." + key);
    if (!j.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
    return j.at(key).get<double>();
}

inline std::size_t get_count(const nlohmann::json& j, const char* key, std::size_t fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
    const double x = v.get<double>();
    if (!(x >= 1.0) || x != std::floor(x)) throw ConfigError(where + "." + key + " must be a positive integer");
    return static_cast<std::size_t>(x);
}

/// Builds a copula node; leaves are 1-based in the file and 0-based here.
inline CopulaNode parse_node(const nlohmann::json& j, Family family, const std::string& where) {
    check_keys(j, where, {"family", "theta", "leaves", "children"});
    if (j.contains("family") && family_from_string(j.at("family").get<std::string>()) != family)
        throw ConfigError(where + ": nested nodes must share the root family");
    CopulaNode node{ArchimedeanGenerator(family, get_number(j, "theta", where)), {}, {}};
    for (const auto& leaf : get_or<std::vector<long long>>(j, "leaves", {}, where)) {
        if (leaf < 1) throw ConfigError(where + ": leaves are 1-based cell indices");
        node.leaves.push_back(static_cast<std::size_t>(leaf - 1));
    }
    if (j.contains("children")) {
        if (!j.at("children").is_array()) throw ConfigError(where + ".children must be an array");
        std::size_t i = 0;
        for (const auto& c : j.at("children")) {
            const std::string cw = where + ".children[" + std::to_string(i++) + "]";
            if (c.is_object() && c.contains("leaf")) {
                // {leaf = i}: a cell attached directly to this node
                check_keys(c, cw, {"leaf"});
                const long long leaf = get_or<long long>(c, "leaf", 0, cw);
                if (leaf < 1) throw ConfigError(cw + ": leaves are 1-based cell indices");
                node.leaves.push_back(static_cast<std::size_t>(leaf - 1));
            } else {
                node.children.push_back(parse_node(c, family, cw));
            }
        }
    }
    return node;
}

inline nlohmann::json node_json(const CopulaNode& n) {
    nlohmann::json j;
    j["theta"] = n.generator.theta();
    std::vector<std::size_t> leaves;
    for (auto l : n.leaves) leaves.push_back(l + 1);
    j["leaves"] = leaves;
    j["children"] = nlohmann::json::array();
    for (const auto& c : n.children) j["children"].push_back(node_json(c));
    return j;
}

inline CopulaModel parse_copula(const nlohmann::json& j, nlohmann::json& canonical) {
    const std::string where = "copula";
    check_keys(j, where, {"family", "theta", "dim", "leaves", "children"});
    if (!j.contains("family")) throw ConfigError("missing copula.family");
    Family family;
    try {
        family = family_from_string(j.at("family").get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    try {
        if (j.contains("children") || j.contains("leaves")) {
            if (j.contains("dim")) throw ConfigError("copula.dim is implied by the leaves of a nested copula");
            auto model = CopulaModel::nested(parse_node(j, family, where));
            canonical = node_json(model.root());
            canonical["family"] = to_string(family);
            return model;
        }
        const std::size_t d = get_count(j, "dim", 0, where);
        if (d == 0) throw ConfigError("missing copula.dim");
        auto model = CopulaModel::flat(family, get_number(j, "theta", where), d);
        canonical = {{"family", to_string(family)}, {"theta", model.root().generator.theta()}, {"dim", d}};
        return model;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("copula: ") + e.what());
    }
}

inline MarginalPtr parse_marginal(const nlohmann::json& j, const std::string& where) {
    check_keys(j, where, {"family", "mu", "sigma"});
    const auto family = get_or<std::string>(j, "family", "lognormal", where);
    if (family != "lognormal") throw ConfigError(where + ": unsupported marginal family '" + family + "'");
    try {
        return make_lognormal(get_number(j, "mu", where), get_number(j, "sigma", where));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline Marginals parse_marginals(const nlohmann::json& j, std::size_t d, nlohmann::json& canonical) {
    Marginals out;
    if (j.is_object()) {
        check_keys(j, "marginals", {"preset"});
        const auto preset = get_or<std::string>(j, "preset", "", "marginals");
        if (preset != "ladder") throw ConfigError("marginals.preset must be \"ladder\"");
        out = lognormal_ladder(d);
    } else if (j.is_array()) {
        std::size_t i = 0;
        for (const auto& m : j) out.push_back(parse_marginal(m, "marginals[" + std::to_string(i++) + "]"));
    } else {
        throw ConfigError("marginals must be a table with a preset or an array of tables");
    }
    if (out.size() != d)
        throw ConfigError("copula has " + std::to_string(d) + " cells but " + std::to_string(out.size()) + " marginals are given");
    canonical = nlohmann::json::array();
    for (const auto& m : out) {
        const auto* ln = dynamic_cast<const LogNormal*>(m.get());
        canonical.push_back({{"family", "lognormal"}, {"mu", ln->mu()}, {"sigma", ln->sigma()}});
    }
    return out;
}

inline std::vector<double> parse_probabilities(const nlohmann::json& j, const char* key, const std::string& where) {
    const auto v = get_or<std::vector<double>>(j, key, {}, where);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0 && v[i] < 1.0)) throw ConfigError(where + "." + key + " entries must lie in (0,1)");
        if (i > 0 && !(v[i] > v[i - 1])) throw ConfigError(where + "." + key + " must be strictly increasing");
    }
    return v;
}

}  // namespace detail

/// Validates a configuration document and builds the experiment settings.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using namespace detail;
    check_keys(j, "config",
               {"seed", "output", "threads", "methods", "targets", "alphas", "repetitions", "measure", "band_fraction",
                "copula", "marginals", "mc", "smc", "is_ach", "quantiles", "groups", "curvature", "stddev"});
    ExperimentConfig c;
    if (!j.contains("copula")) throw ConfigError("missing [copula] section");
    if (!j.contains("marginals")) throw ConfigError("missing marginals");
    nlohmann::json cop_json;
    c.copula.emplace(parse_copula(j.at("copula"), cop_json));
    nlohmann::json marg_json;
    c.margins = parse_marginals(j.at("marginals"), c.copula->dim(), marg_json);
    c.model = {{"copula", cop_json}, {"marginals", marg_json}};

    c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "config");
    c.output = get_or<std::string>(j, "output", c.output, "config");
    c.threads = get_count(j, "threads", c.threads, "config");
    c.repetitions = get_count(j, "repetitions", c.repetitions, "config");
    if (j.contains("alphas")) c.alphas = parse_probabilities(j, "alphas", "config");
    if (j.contains("targets")) c.targets = parse_probabilities(j, "targets", "config");
    if (c.targets.empty()) throw ConfigError("at least one target probability is required");
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : get_or<std::vector<std::string>>(j, "methods", {}, "config")) {
            const Method mm = method_from_string(m);
            if (!c.has(mm)) c.methods.push_back(mm);
        }
        if (c.methods.empty()) throw ConfigError("methods must not be empty");
    }
    const auto measure = get_or<std::string>(j, "measure", "es", "config");
    if (measure == "es") c.measure = RiskMeasure::es;
    else if (measure == "var") c.measure = RiskMeasure::var;
    else throw ConfigError("measure must be \"es\" or \"var\"");
    c.band_fraction = get_or<double>(j, "band_fraction", c.band_fraction, "config");
    if (!(c.band_fraction > 0.0 && c.band_fraction < 1.0)) throw ConfigError("band_fraction must lie in (0,1)");
    if (c.measure == RiskMeasure::var && c.has(Method::is_ach))
        throw ConfigError("the IS-ACH baseline is implemented for tail (ES) targets only");

    if (j.contains("mc")) {
        const auto& s = j.at("mc");
        check_keys(s, "mc", {"n", "draw_cap"});
        c.n_mc = get_count(s, "n", c.n_mc, "mc");
        c.mc_draw_cap = get_count(s, "draw_cap", c.mc_draw_cap, "mc");
    }
    if (j.contains("smc")) {
        const auto& s = j.at("smc");
        check_keys(s, "smc", {"n", "kernel", "beta_rule", "ess_threshold", "move_sweeps", "resampling", "shrink_cap"});
        c.n_smc = get_count(s, "n", c.n_smc, "smc");
        try {
            c.smc.kernel.kind = kernel_kind_from_string(get_or<std::string>(s, "kernel", "uniform", "smc"));
            c.smc.resampling = resample_scheme_from_string(get_or<std::string>(s, "resampling", "multinomial", "smc"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("smc: ") + e.what());
        }
        const auto rule = get_or<std::string>(s, "beta_rule", "moments", "smc");
        if (rule == "moments") c.smc.kernel.rule = BetaFitRule::moments;
        else if (rule == "closed_form") c.smc.kernel.rule = BetaFitRule::closed_form;
        else throw ConfigError("smc.beta_rule must be \"moments\" or \"closed_form\"");
        c.smc.ess_fraction = get_or<double>(s, "ess_threshold", c.smc.ess_fraction, "smc");
        c.smc.move_sweeps = get_count(s, "move_sweeps", c.smc.move_sweeps, "smc");
        c.smc.shrink_cap = get_count(s, "shrink_cap", c.smc.shrink_cap, "smc");
    }
    c.smc.n_particles = c.n_smc;
    try {
        c.smc.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("smc: ") + e.what());
    }
    if (j.contains("is_ach")) {
        const auto& s = j.at("is_ach");
        check_keys(s, "is_ach", {"n", "lambdas", "probs", "dyadic_levels"});
        c.n_is = get_count(s, "n", c.n_is, "is_ach");
        if (s.contains("lambdas") || s.contains("probs")) {
            if (s.contains("dyadic_levels")) throw ConfigError("is_ach: give either lambdas/probs or dyadic_levels");
            c.mixing = {get_or<std::vector<double>>(s, "lambdas", {}, "is_ach"),
                        get_or<std::vector<double>>(s, "probs", {}, "is_ach")};
        } else {
            c.mixing = MixingDistribution::dyadic(static_cast<unsigned>(get_count(s, "dyadic_levels", 20, "is_ach")));
        }
        try {
            c.mixing.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("is_ach: ") + e.what());
        }
    }
    c.quantiles.seed = c.seed;
    if (j.contains("quantiles")) {
        const auto& s = j.at("quantiles");
        check_keys(s, "quantiles", {"n_per_run", "n_runs", "seed", "cache"});
        c.quantiles.n_per_run = get_count(s, "n_per_run", c.quantiles.n_per_run, "quantiles");
        c.quantiles.n_runs = get_count(s, "n_runs", c.quantiles.n_runs, "quantiles");
        c.quantiles.seed = get_or<std::uint64_t>(s, "seed", c.quantiles.seed, "quantiles");
        c.quantiles.cache = get_or<std::string>(s, "cache", "", "quantiles");
    }
    if (j.contains("stddev")) {
        check_keys(j.at("stddev"), "stddev", {"n"});
        c.n_stddev = get_count(j.at("stddev"), "n", c.n_stddev, "stddev");
        if (c.n_stddev < 2) throw ConfigError("stddev.n must be at least 2");
    }
    if (j.contains("curvature")) {
        const auto& s = j.at("curvature");
        check_keys(s, "curvature", {"B", "points"});
        if (s.contains("B")) c.curvature.threshold = get_number(s, "B", "curvature");
        c.curvature.points = get_count(s, "points", c.curvature.points, "curvature");
    }
    if (j.contains("groups")) {
        if (!j.at("groups").is_array()) throw ConfigError("groups must be an array of tables");
        std::size_t i = 0;
        for (const auto& g : j.at("groups")) {
            const std::string where = "groups[" + std::to_string(i++) + "]";
            check_keys(g, where, {"name", "cells"});
            CellGroup cg;
            cg.name = get_or<std::string>(g, "name", "", where);
            if (cg.name.empty()) throw ConfigError(where + ".name is required");
            for (long long cell : get_or<std::vector<long long>>(g, "cells", {}, where)) {
                if (cell < 1) throw ConfigError(where + ": cells are 1-based");
                cg.cells.push_back(static_cast<std::size_t>(cell - 1));
            }
            c.groups.push_back(std::move(cg));
        }
        try {
            validate_partition(c.groups, c.dim());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    return c;
}

/// Parses TOML (by extension .toml) or JSON text.
inline nlohmann::json read_config_document(const std::string& text, bool toml_syntax, const std::string& origin) {
    if (toml_syntax) {
        try {
            const toml::table t = toml::parse(text, std::string_view(origin));
            return detail::toml_to_json(t);
        } catch (const toml::parse_error& e) {
            std::ostringstream os;
            os << origin << ": " << e.description() << " (line " << e.source().begin.line << ")";
            throw ConfigError(os.str());
        }
    }
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::ostringstream os;
    os << is.rdbuf();
    const bool toml_syntax = std::filesystem::path(path).extension() == ".toml";
    return parse_config(read_config_document(os.str(), toml_syntax, path));
}

}  // namespace ccsmc::harness
