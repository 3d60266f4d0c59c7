#pragma once

// JSON documents for instances, allocations and experiment configs. Parsing
// is strict: unknown keys and wrong types are input errors.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "allocation.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "expfam.hpp"
#include "policies.hpp"
#include "stopping.hpp"

namespace topk {

using Json = nlohmann::ordered_json;

namespace detail {

inline void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) throw InvalidParameter(std::string(where) + " must be an object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || item.key() == a;
        if (!ok) throw InvalidParameter("unknown key '" + item.key() + "' in " + std::string(where));
    }
}

inline const Json& require(const Json& obj, const char* key, std::string_view where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw InvalidParameter("missing key '" + std::string(key) + "' in " + std::string(where));
    return *it;
}

inline double as_real(const Json& v, std::string_view what) {
    if (!v.is_number()) throw InvalidParameter(std::string(what) + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw InvalidParameter(std::string(what) + " must be finite");
    return x;
}

// Accepts integer literals and integral floats such as 1e7.
inline std::uint64_t as_count(const Json& v, std::string_view what) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        if (v.get<std::int64_t>() < 0) throw InvalidParameter(std::string(what) + " must be non-negative");
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (x >= 0.0 && x < 1.8e19 && std::floor(x) == x) return static_cast<std::uint64_t>(x);
    }
    throw InvalidParameter(std::string(what) + " must be a non-negative integer");
}

inline std::string as_string(const Json& v, std::string_view what) {
    if (!v.is_string()) throw InvalidParameter(std::string(what) + " must be a string");
    return v.get<std::string>();
}

inline std::vector<double> as_reals(const Json& v, std::string_view what) {
    if (!v.is_array()) throw InvalidParameter(std::string(what) + " must be an array");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(as_real(x, what));
    return out;
}

inline std::vector<std::size_t> as_counts(const Json& v, std::string_view what) {
    if (!v.is_array()) throw InvalidParameter(std::string(what) + " must be an array");
    std::vector<std::size_t> out;
    for (const auto& x : v) out.push_back(static_cast<std::size_t>(as_count(x, what)));
    return out;
}

}  // namespace detail

inline Json parse_json_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw InvalidParameter(std::string("malformed JSON: ") + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidParameter("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Instance: {"family", "theta", "k", "sigma2"?}
// ---------------------------------------------------------------------------

// Shape errors are InvalidParameter; a well-formed document describing an
// invalid problem (k out of range, tied top set) is InvalidInstance.
inline InstanceSpec instance_from_json(const Json& j) {
    detail::check_keys(j, {"family", "theta", "k", "sigma2"}, "instance");
    const auto kind = family_from_string(detail::as_string(detail::require(j, "family", "instance"), "family"));
    auto theta = detail::as_reals(detail::require(j, "theta", "instance"), "theta");
    const auto k = static_cast<std::size_t>(detail::as_count(detail::require(j, "k", "instance"), "k"));
    RewardFamily family;
    if (kind == FamilyKind::Gaussian) {
        std::vector<double> var(theta.size(), 1.0);
        if (const auto it = j.find("sigma2"); it != j.end()) {
            if (it->is_array()) {
                var = detail::as_reals(*it, "sigma2");
                if (var.size() != theta.size()) throw InvalidInstance("sigma2 needs one entry per arm");
            } else {
                var.assign(theta.size(), detail::as_real(*it, "sigma2"));
            }
        }
        for (double v : var) {
            if (!(v > 0.0)) throw InvalidInstance("variances must be positive");
        }
        family = RewardFamily::gaussian(std::move(var));
    } else {
        if (j.contains("sigma2")) throw InvalidParameter("sigma2 applies to the Gaussian family only");
        family = kind == FamilyKind::Bernoulli ? RewardFamily::bernoulli() : RewardFamily::poisson();
    }
    return InstanceSpec::make(std::move(family), std::move(theta), k);
}

inline Json instance_to_json(const InstanceSpec& inst) {
    Json j;
    j["family"] = std::string(to_string(inst.family.kind));
    j["theta"] = inst.theta;
    j["k"] = inst.k;
    if (inst.family.is_gaussian()) j["sigma2"] = inst.family.variances;
    return j;
}

// ---------------------------------------------------------------------------
// Allocation file: {"psi", "mu"?}
// ---------------------------------------------------------------------------

struct AllocationDocument {
    Allocation psi;
    std::optional<DualWeights> mu;
};

inline AllocationDocument allocation_from_json(const Json& j) {
    detail::check_keys(j, {"psi", "mu"}, "allocation");
    AllocationDocument doc;
    doc.psi.psi = detail::as_reals(detail::require(j, "psi", "allocation"), "psi");
    if (const auto it = j.find("mu"); it != j.end()) doc.mu = DualWeights{detail::as_reals(*it, "mu")};
    return doc;
}

inline Json allocation_to_json(const Allocation& psi, const DualWeights* mu = nullptr) {
    Json j;
    j["psi"] = psi.psi;
    if (mu) j["mu"] = mu->mu;
    return j;
}

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------

inline PolicyParams policy_from_json(const Json& j) {
    PolicyParams p;
    if (j.is_string()) {
        p.kind = policy_from_string(j.get<std::string>());
        return p;
    }
    detail::check_keys(j, {"kind", "dt_solver_iters", "tracking_solver_iters", "ugape_a", "ugape_H", "ocba_delta0",
                           "ocba_batch"},
                       "policy");
    p.kind = policy_from_string(detail::as_string(detail::require(j, "kind", "policy"), "kind"));
    if (j.contains("dt_solver_iters")) p.dt_solver_iters = detail::as_count(j["dt_solver_iters"], "dt_solver_iters");
    if (j.contains("tracking_solver_iters")) {
        p.tracking_solver_iters = detail::as_count(j["tracking_solver_iters"], "tracking_solver_iters");
    }
    if (j.contains("ugape_a")) p.ugape_a = detail::as_real(j["ugape_a"], "ugape_a");
    if (j.contains("ugape_H")) p.ugape_H = detail::as_real(j["ugape_H"], "ugape_H");
    if (j.contains("ocba_delta0")) p.ocba_delta0 = detail::as_count(j["ocba_delta0"], "ocba_delta0");
    if (j.contains("ocba_batch")) p.ocba_batch = detail::as_count(j["ocba_batch"], "ocba_batch");
    return p;
}

// A bare name when every tunable is at its default.
inline Json policy_to_json(const PolicyParams& p) {
    const PolicyParams d;
    Json j;
    j["kind"] = std::string(to_string(p.kind));
    if (p.dt_solver_iters != d.dt_solver_iters) j["dt_solver_iters"] = p.dt_solver_iters;
    if (p.tracking_solver_iters != d.tracking_solver_iters) j["tracking_solver_iters"] = p.tracking_solver_iters;
    if (p.ugape_a != d.ugape_a) j["ugape_a"] = p.ugape_a;
    if (p.ugape_H != d.ugape_H) j["ugape_H"] = p.ugape_H;
    if (p.ocba_delta0 != d.ocba_delta0) j["ocba_delta0"] = p.ocba_delta0;
    if (p.ocba_batch != d.ocba_batch) j["ocba_batch"] = p.ocba_batch;
    if (j.size() == 1) return j["kind"];
    return j;
}

inline std::string_view to_string(ThresholdKind k) { return k == ThresholdKind::Heuristic ? "heuristic" : "theoretical"; }

inline ThresholdKind threshold_from_string(std::string_view s) {
    if (s == "heuristic") return ThresholdKind::Heuristic;
    if (s == "theoretical") return ThresholdKind::Theoretical;
    throw InvalidParameter("unknown threshold '" + std::string(s) + "'");
}

inline SolverConfig solver_from_json(const Json& j) {
    detail::check_keys(j, {"kind", "iters", "tau_scale", "grid_step"}, "solver");
    SolverConfig s;
    if (j.contains("kind")) s.kind = solver_from_string(detail::as_string(j["kind"], "solver kind"));
    if (j.contains("iters")) s.iters = detail::as_count(j["iters"], "iters");
    if (j.contains("tau_scale")) s.tau_scale = detail::as_real(j["tau_scale"], "tau_scale");
    if (j.contains("grid_step")) s.grid_step = detail::as_real(j["grid_step"], "grid_step");
    return s;
}

inline Json solver_to_json(const SolverConfig& s) {
    Json j;
    j["kind"] = std::string(to_string(s.kind));
    j["iters"] = s.iters;
    if (s.tau_scale) j["tau_scale"] = *s.tau_scale;
    j["grid_step"] = s.grid_step;
    return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
    detail::check_keys(j, {"instance", "setting", "policies", "replications", "seed", "solver", "output", "threads",
                           "prior"},
                       "config");
    ExperimentConfig cfg;
    cfg.instance = instance_from_json(detail::require(j, "instance", "config"));

    const Json& s = detail::require(j, "setting", "config");
    if (!s.is_object()) throw InvalidParameter("setting must be an object");
    cfg.setting = setting_from_string(detail::as_string(detail::require(s, "kind", "setting"), "setting kind"));
    switch (cfg.setting) {
        case Setting::FixedConfidence:
            detail::check_keys(s, {"kind", "delta", "threshold", "c", "alpha", "cap"}, "setting");
            if (s.contains("delta")) cfg.stopping.delta = detail::as_real(s["delta"], "delta");
            if (s.contains("threshold")) {
                cfg.stopping.kind = threshold_from_string(detail::as_string(s["threshold"], "threshold"));
            }
            if (s.contains("c")) cfg.stopping.c = detail::as_real(s["c"], "c");
            if (s.contains("alpha")) cfg.stopping.alpha = detail::as_real(s["alpha"], "alpha");
            if (s.contains("cap")) cfg.cap = detail::as_count(s["cap"], "cap");
            break;
        case Setting::FixedBudget:
            detail::check_keys(s, {"kind", "budgets"}, "setting");
            cfg.budgets = detail::as_counts(detail::require(s, "budgets", "setting"), "budgets");
            break;
        case Setting::PosteriorLevel:
            detail::check_keys(s, {"kind", "levels", "cap", "trace_stride"}, "setting");
            cfg.levels = detail::as_reals(detail::require(s, "levels", "setting"), "levels");
            if (s.contains("cap")) cfg.cap = detail::as_count(s["cap"], "cap");
            if (s.contains("trace_stride")) cfg.trace_stride = detail::as_count(s["trace_stride"], "trace_stride");
            break;
        case Setting::AllocationConvergence:
            detail::check_keys(s, {"kind", "iters", "solvers", "stride"}, "setting");
            cfg.iters_list = detail::as_counts(detail::require(s, "iters", "setting"), "iters");
            for (const auto& v : detail::require(s, "solvers", "setting")) {
                cfg.solvers.push_back(solver_from_string(detail::as_string(v, "solver")));
            }
            if (s.contains("stride")) cfg.stride = detail::as_count(s["stride"], "stride");
            break;
    }

    if (const auto it = j.find("policies"); it != j.end()) {
        if (!it->is_array()) throw InvalidParameter("policies must be an array");
        for (const auto& p : *it) cfg.policies.push_back(policy_from_json(p));
    }
    if (j.contains("replications")) cfg.replications = detail::as_count(j["replications"], "replications");
    if (j.contains("seed")) cfg.seed = detail::as_count(j["seed"], "seed");
    if (j.contains("solver")) cfg.solver = solver_from_json(j["solver"]);
    if (j.contains("output")) cfg.output = detail::as_string(j["output"], "output");
    if (j.contains("threads")) cfg.threads = detail::as_count(j["threads"], "threads");
    if (j.contains("prior")) {
        const Json& pr = j["prior"];
        detail::check_keys(pr, {"a", "b"}, "prior");
        if (pr.contains("a")) cfg.prior.a = detail::as_real(pr["a"], "prior a");
        if (pr.contains("b")) cfg.prior.b = detail::as_real(pr["b"], "prior b");
        if (!(cfg.prior.a > 0.0 && cfg.prior.b > 0.0)) throw InvalidParameter("prior parameters must be positive");
    }
    cfg.validate();
    return cfg;
}

inline Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["instance"] = instance_to_json(cfg.instance);
    Json s;
    s["kind"] = std::string(to_string(cfg.setting));
    switch (cfg.setting) {
        case Setting::FixedConfidence:
            s["delta"] = cfg.stopping.delta;
            s["threshold"] = std::string(to_string(cfg.stopping.kind));
            s["c"] = cfg.stopping.c;
            s["alpha"] = cfg.stopping.alpha;
            s["cap"] = cfg.cap;
            break;
        case Setting::FixedBudget: s["budgets"] = cfg.budgets; break;
        case Setting::PosteriorLevel:
            s["levels"] = cfg.levels;
            s["cap"] = cfg.cap;
            s["trace_stride"] = cfg.trace_stride;
            break;
        case Setting::AllocationConvergence: {
            s["iters"] = cfg.iters_list;
            Json names = Json::array();
            for (auto v : cfg.solvers) names.push_back(std::string(to_string(v)));
            s["solvers"] = names;
            s["stride"] = cfg.stride;
            break;
        }
    }
    j["setting"] = s;
    Json pols = Json::array();
    for (const auto& p : cfg.policies) pols.push_back(policy_to_json(p));
    j["policies"] = pols;
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    j["solver"] = solver_to_json(cfg.solver);
    j["output"] = cfg.output;
    j["threads"] = cfg.threads;
    j["prior"] = Json{{"a", cfg.prior.a}, {"b", cfg.prior.b}};
    return j;
}

inline ExperimentConfig parse_config(const std::string& text) { return config_from_json(parse_json_text(text)); }

inline std::string print_config(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

}  // namespace topk
