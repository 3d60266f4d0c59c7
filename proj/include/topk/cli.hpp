#pragma once

// Subcommands behind the topk executable. Each returns a process exit code:
// 0 success, 1 check failed, 2 input error, 3 invalid instance, 4 every
// replication hit the round cap.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "allocation.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "optimality.hpp"
#include "solvers.hpp"

namespace topk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInstance = 3;
inline constexpr int kExitCap = 4;

// 17 significant digits, so every double round-trips.
inline std::string fmt17(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string join17(const std::vector<double>& xs, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += fmt17(xs[i]);
    }
    return out;
}

inline std::string pair_label(ArmPair p) {
    return "(" + std::to_string(p.top + 1) + "," + std::to_string(p.bottom + 1) + ")";
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidParameter("cannot write '" + path + "'");
    out << content;
    if (!out) throw InvalidParameter("write failed for '" + path + "'");
}

inline std::string allocation_document(const std::vector<double>& psi, const std::vector<double>* mu) {
    std::string s = "{\n  \"psi\": [" + join17(psi, ", ") + "]";
    if (mu) s += ",\n  \"mu\": [" + join17(*mu, ", ") + "]";
    return s + "\n}\n";
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const InvalidInstance& e) {
        err << "error: invalid instance: " << e.what() << "\n";
        return kExitInstance;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
}

inline void print_report(std::ostream& out, const OptimalityReport& r) {
    out << "gamma " << fmt17(r.gamma) << "\n";
    out << "argmin_pair " << pair_label(r.argmin) << "\n";
    out << "equality_pairs";
    for (const auto& p : r.equality_pairs) out << " " << pair_label(p);
    out << "\n";
    for (std::size_t c = 0; c < r.components.size(); ++c) {
        const auto& comp = r.components[c];
        out << "component " << c + 1 << " top";
        for (auto a : comp.top) out << " " << a + 1;
        out << " bottom";
        for (auto a : comp.bottom) out << " " << a + 1;
        out << " balance_residual " << fmt17(comp.balance_residual) << "\n";
    }
    out << "rows_columns " << (r.rows_columns_ok ? "pass" : "fail") << "\n";
    out << "overall_balance_residual " << fmt17(r.overall_balance_residual) << "\n";
    out << "balance " << (r.balance_ok ? "pass" : "fail") << "\n";
    out << "monotone_violation " << fmt17(r.monotone_violation) << " " << (r.monotone_ok ? "pass" : "fail") << "\n";
    out << "necessary " << (r.necessary_ok ? "pass" : "fail") << "\n";
    out << "dual_weights " << join17(r.mu.mu) << "\n";
    out << "kkt_stationarity " << fmt17(r.kkt.stationarity) << "\n";
    out << "kkt_slackness " << fmt17(r.kkt.slackness) << "\n";
    out << "kkt " << (r.kkt_ok ? "pass" : "fail") << "\n";
    out << "sufficient " << (r.sufficient.applicable ? (r.sufficient.satisfied ? "pass" : "fail") : "n/a")
        << " assumption_margin " << fmt17(r.sufficient.assumption_margin) << "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

struct SolveOptions {
    std::string instance_path;
    SolverConfig solver;
    double equality_tol = 1e-2;
    std::string out_path;  // optional allocation document
};

inline int cmd_solve(const SolveOptions& opt, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto inst = instance_from_json(parse_json_text(read_text_file(opt.instance_path)));
        SolverResult res;
        switch (opt.solver.kind) {
            case SolverKind::Fwga: {
                FwgaOptions o;
                o.iters = opt.solver.iters;
                o.tau_scale = opt.solver.tau_scale;
                res = fwga_solve(inst, o);
                break;
            }
            case SolverKind::Kkt: {
                KktOptions o;
                o.iters = opt.solver.iters;
                res = kkt_tracking_solve(inst, o);
                break;
            }
            case SolverKind::Grid: {
                const auto g = grid_oracle_solve(inst, {opt.solver.grid_step, true, Objective::Confidence});
                res.psi = g.psi;
                res.gamma = g.gamma;
                break;
            }
        }
        StructureOptions so;
        so.equality_tol = opt.equality_tol;
        const auto report = check_structure(inst, res.psi.psi, so);
        if (res.mu.mu.empty()) res.mu = report.mu;
        out << "solver " << to_string(opt.solver.kind) << "\n";
        if (opt.solver.kind != SolverKind::Grid) out << "iterations " << opt.solver.iters << "\n";
        out << "psi " << join17(res.psi.psi) << "\n";
        out << "mu " << join17(res.mu.mu) << "\n";
        detail::print_report(out, report);
        if (!opt.out_path.empty()) {
            detail::write_file(opt.out_path, detail::allocation_document(res.psi.psi, &res.mu.mu));
        }
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckOptions {
    std::string instance_path;
    std::string allocation_path;
    double equality_tol = 1e-2;
    double sum_tol = 1e-3;  // rounded published allocations are renormalized within this
};

inline int cmd_check(const CheckOptions& opt, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto inst = instance_from_json(parse_json_text(read_text_file(opt.instance_path)));
        auto doc = allocation_from_json(parse_json_text(read_text_file(opt.allocation_path)));
        auto& psi = doc.psi.psi;
        if (psi.size() != inst.arms()) throw InvalidParameter("allocation length differs from the arm count");
        double sum = 0.0;
        for (double p : psi) {
            if (!(p >= 0.0)) throw InvalidParameter("allocation has a negative entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > opt.sum_tol) throw InvalidParameter("allocation does not sum to one");
        for (auto& p : psi) p /= sum;
        StructureOptions so;
        so.equality_tol = opt.equality_tol;
        auto report = check_structure(inst, psi, so);
        if (doc.mu) {
            if (doc.mu->mu.size() != inst.pair_count()) throw InvalidParameter("mu length differs from the pair count");
            report.mu = *doc.mu;
            report.kkt = check_kkt(inst, psi, doc.mu->mu);
            report.kkt_ok = report.kkt.residual <= so.kkt_tol;
        }
        const bool pass = report.necessary_ok && report.kkt_ok;
        detail::print_report(out, report);
        out << "result " << (pass ? "pass" : "fail") << "\n";
        out << "csv: pass,necessary,kkt,sufficient,gamma,stationarity,slackness,balance_residual,monotone_violation\n";
        out << "csv: " << pass << "," << report.necessary_ok << "," << report.kkt_ok << ","
            << (report.sufficient.applicable && report.sufficient.satisfied) << "," << fmt17(report.gamma) << ","
            << fmt17(report.kkt.stationarity) << "," << fmt17(report.kkt.slackness) << ","
            << fmt17(report.overall_balance_residual) << "," << fmt17(report.monotone_violation) << "\n";
        return pass ? kExitOk : kExitCheckFailed;
    });
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<std::size_t> threads;
    std::optional<std::size_t> stride;
    std::optional<std::size_t> iters;  // replaces the allocation-convergence list by one N
    std::optional<double> tau_scale;
    std::string out_path;
};

inline std::string fixed_confidence_csv(const FixedConfidenceResult& r) {
    std::ostringstream s;
    s << "rep,policy,tau,correct,capped,seed\n";
    for (const auto& rec : r.records) {
        s << rec.rep << "," << to_string(rec.policy) << "," << rec.outcome.tau << "," << rec.outcome.correct << ","
          << rec.outcome.capped << "," << rec.outcome.seed << "\n";
    }
    return s.str();
}

inline std::string confidence_summary_csv(const std::vector<ConfidenceSummary>& sums) {
    std::ostringstream s;
    s << "policy,reps,capped,mean_tau,stderr,delta_hat\n";
    for (const auto& x : sums) {
        s << to_string(x.policy) << "," << x.reps << "," << x.capped << "," << fmt17(x.mean_tau) << ","
          << fmt17(x.stderr_tau) << "," << fmt17(x.delta_hat) << "\n";
    }
    return s.str();
}

inline std::string fixed_budget_csv(const std::vector<BudgetRow>& rows, std::size_t arms) {
    std::ostringstream s;
    s << "policy,budget,pfs,stderr,reps";
    for (std::size_t a = 0; a < arms; ++a) s << ",psi_" << a + 1;
    s << "\n";
    for (const auto& r : rows) {
        s << to_string(r.policy) << "," << r.budget << "," << fmt17(r.pfs) << "," << fmt17(r.stderr_pfs) << ","
          << r.reps;
        for (double x : r.mean_alloc) s << "," << fmt17(x);
        s << "\n";
    }
    return s.str();
}

inline std::string posterior_level_csv(const PosteriorLevelResult& r) {
    std::ostringstream s;
    s << "rep,policy,level,hit,capped,seed\n";
    for (const auto& x : r.records) {
        s << x.rep << "," << to_string(x.policy) << "," << fmt17(x.level) << "," << x.hit << "," << x.capped << ","
          << x.seed << "\n";
    }
    return s.str();
}

inline std::string posterior_trace_csv(const std::vector<PosteriorTracePoint>& trace) {
    std::ostringstream s;
    s << "rep,policy,t,neg_log_error\n";
    for (const auto& x : trace) {
        s << x.rep << "," << to_string(x.policy) << "," << x.t << "," << fmt17(x.neg_log_error) << "\n";
    }
    return s.str();
}

inline std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
    std::ostringstream s;
    s << "solver,n,iter,gamma,q\n";
    for (const auto& r : rows) {
        s << to_string(r.solver) << "," << r.n << "," << r.iter << "," << fmt17(r.gamma) << "," << fmt17(r.gap)
          << "\n";
    }
    return s.str();
}

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        auto cfg = parse_config(read_text_file(opt.config_path));
        if (opt.seed) cfg.seed = *opt.seed;
        if (opt.reps) cfg.replications = *opt.reps;
        if (opt.threads) cfg.threads = *opt.threads;
        if (opt.stride) {
            if (cfg.setting == Setting::PosteriorLevel) {
                cfg.trace_stride = *opt.stride;
            } else {
                cfg.stride = *opt.stride;
            }
        }
        if (opt.iters) cfg.iters_list = {*opt.iters};
        if (opt.tau_scale) cfg.solver.tau_scale = *opt.tau_scale;
        if (!opt.out_path.empty()) cfg.output = opt.out_path;
        cfg.validate();
        if (cfg.output.empty()) throw InvalidParameter("no output path (set \"output\" or pass --out)");
        if (cfg.setting == Setting::FixedConfidence && cfg.stopping.kind == ThresholdKind::Theoretical &&
            cfg.stopping.c == 1.0) {
            err << "warning: theoretical threshold with C = 1 is not guaranteed to be delta-correct\n";
        }
        int code = kExitOk;
        switch (cfg.setting) {
            case Setting::FixedConfidence: {
                const auto res = run_fixed_confidence(cfg);
                detail::write_file(cfg.output, fixed_confidence_csv(res));
                const auto summary = confidence_summary_csv(res.summaries);
                detail::write_file(cfg.output + ".summary.csv", summary);
                out << summary;
                std::size_t capped = 0;
                for (const auto& s : res.summaries) {
                    capped += s.capped;
                    if (s.capped > 0) {
                        err << "warning: " << s.capped << " replications of " << to_string(s.policy)
                            << " hit the round cap and are excluded from the summary\n";
                    }
                }
                if (capped == res.records.size()) code = kExitCap;
                break;
            }
            case Setting::FixedBudget: {
                const auto rows = run_fixed_budget(cfg);
                const auto csv = fixed_budget_csv(rows, cfg.instance.arms());
                detail::write_file(cfg.output, csv);
                out << csv;
                break;
            }
            case Setting::PosteriorLevel: {
                const auto res = run_posterior_level(cfg);
                detail::write_file(cfg.output, posterior_level_csv(res));
                if (cfg.trace_stride > 0) detail::write_file(cfg.output + ".trace.csv", posterior_trace_csv(res.trace));
                std::size_t capped = 0;
                for (const auto& r : res.records) capped += r.capped ? 1 : 0;
                if (capped > 0) err << "warning: " << capped << " level records hit the round cap\n";
                if (!res.records.empty() && capped == res.records.size()) code = kExitCap;
                out << "records " << res.records.size() << "\n";
                break;
            }
            case Setting::AllocationConvergence: {
                const auto rows = run_allocation_convergence(cfg);
                detail::write_file(cfg.output, convergence_csv(rows));
                out << "rows " << rows.size() << "\n";
                break;
            }
        }
        out << "wrote " << cfg.output << "\n";
        return code;
    });
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InvalidParameter("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size()) throw InvalidParameter("ragged CSV row");
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

struct ReportOptions {
    std::vector<std::string> inputs;
    std::string out_dir = ".";
};

namespace detail {

inline double to_real(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw InvalidParameter("bad number '" + s + "'");
        return v;
    } catch (const std::invalid_argument&) {
        if (s == "nan") return std::nan("");
        throw InvalidParameter("bad number '" + s + "'");
    } catch (const std::out_of_range&) {
        throw InvalidParameter("number out of range '" + s + "'");
    }
}

inline std::string stem_of(const std::string& path) {
    const auto slash = path.find_last_of('/');
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = name.find('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

using Series = std::vector<std::pair<double, double>>;

inline std::string series_csv(const Series& s) {
    std::string out = "x,y\n";
    for (const auto& [x, y] : s) out += fmt17(x) + "," + fmt17(y) + "\n";
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Summary table on `out` and one x,y series file per curve in out_dir.
inline int cmd_report(const ReportOptions& opt, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        if (opt.inputs.empty()) throw InvalidParameter("no result files given");
        std::vector<std::string> written;
        auto emit = [&](const std::string& name, const detail::Series& s) {
            const std::string path = opt.out_dir + "/" + name + ".csv";
            detail::write_file(path, detail::series_csv(s));
            written.push_back(path);
        };
        for (const auto& path : opt.inputs) {
            const auto table = parse_csv(read_text_file(path));
            if (table.header.empty() || table.rows.empty()) throw InvalidParameter("'" + path + "' has no records");
            const std::string stem = detail::stem_of(path);
            const auto& h = table.header;
            auto has = [&](const char* c) { return std::find(h.begin(), h.end(), c) != h.end(); };
            if (has("tau") && has("correct")) {
                // Fixed-confidence records: recompute the summary.
                const auto cp = table.column("policy"), ct = table.column("tau"), cc = table.column("correct"),
                           ccap = table.column("capped");
                std::map<std::string, std::vector<std::vector<std::string>>> by;
                std::vector<std::string> order;
                for (const auto& r : table.rows) {
                    if (!by.count(r[cp])) order.push_back(r[cp]);
                    by[r[cp]].push_back(r);
                }
                out << "fixed_confidence " << path << "\n";
                out << "policy,reps,capped,mean_tau,stderr,delta_hat\n";
                detail::Series bars;
                double idx = 0;
                for (const auto& name : order) {
                    std::vector<double> taus;
                    std::size_t wrong = 0, capped = 0;
                    for (const auto& r : by[name]) {
                        if (r[ccap] == "1") {
                            ++capped;
                            continue;
                        }
                        taus.push_back(detail::to_real(r[ct]));
                        if (r[cc] != "1") ++wrong;
                    }
                    double mean = 0.0;
                    for (double t : taus) mean += t;
                    if (!taus.empty()) mean /= static_cast<double>(taus.size());
                    const double dhat = taus.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(taus.size());
                    out << name << "," << by[name].size() << "," << capped << "," << fmt17(mean) << ","
                        << fmt17(sample_stderr(taus)) << "," << fmt17(dhat) << "\n";
                    bars.push_back({idx++, mean});
                }
                emit(stem + ".mean_tau", bars);
            } else if (has("pfs")) {
                const auto cp = table.column("policy"), cb = table.column("budget"), cf = table.column("pfs"),
                           cs = table.column("stderr");
                std::map<std::string, detail::Series> curves;
                std::vector<std::string> order;
                out << "fixed_budget " << path << "\npolicy,budget,pfs,stderr\n";
                for (const auto& r : table.rows) {
                    if (!curves.count(r[cp])) order.push_back(r[cp]);
                    auto& c = curves[r[cp]];
                    const double pfs = detail::to_real(r[cf]);
                    out << r[cp] << "," << r[cb] << "," << r[cf] << "," << r[cs] << "\n";
                    if (pfs > 0.0) c.push_back({detail::to_real(r[cb]), std::log10(pfs)});
                }
                for (const auto& name : order) emit(stem + ".log10_pfs." + name, curves[name]);
            } else if (has("level") && has("hit")) {
                const auto cp = table.column("policy"), cl = table.column("level"), chit = table.column("hit"),
                           ccap = table.column("capped");
                std::map<std::pair<std::string, std::string>, std::vector<double>> hits;
                std::vector<std::pair<std::string, std::string>> order;
                for (const auto& r : table.rows) {
                    const auto key = std::make_pair(r[cp], r[cl]);
                    if (!hits.count(key)) order.push_back(key);
                    auto& v = hits[key];
                    if (r[ccap] != "1") v.push_back(detail::to_real(r[chit]));
                }
                out << "posterior_level " << path << "\npolicy,level,median_hit,hits\n";
                std::map<std::string, detail::Series> curves;
                std::vector<std::string> names;
                for (const auto& key : order) {
                    const double m = detail::median(hits[key]);
                    out << key.first << "," << key.second << "," << fmt17(m) << "," << hits[key].size() << "\n";
                    if (!curves.count(key.first)) names.push_back(key.first);
                    curves[key.first].push_back({-std::log10(1.0 - detail::to_real(key.second)), m});
                }
                for (const auto& name : names) emit(stem + ".median_hit." + name, curves[name]);
            } else if (has("neg_log_error")) {
                const auto cp = table.column("policy"), ct = table.column("t"), cv = table.column("neg_log_error");
                std::map<std::string, std::map<double, std::pair<double, std::size_t>>> acc;
                std::vector<std::string> names;
                for (const auto& r : table.rows) {
                    if (!acc.count(r[cp])) names.push_back(r[cp]);
                    auto& cell = acc[r[cp]][detail::to_real(r[ct])];
                    cell.first += detail::to_real(r[cv]);
                    ++cell.second;
                }
                out << "posterior_trace " << path << "\npolicy,points\n";
                for (const auto& name : names) {
                    detail::Series s;
                    for (const auto& [t, cell] : acc[name]) s.push_back({t, cell.first / static_cast<double>(cell.second)});
                    out << name << "," << s.size() << "\n";
                    emit(stem + ".neg_log_error." + name, s);
                }
            } else if (has("q") && has("solver")) {
                const auto cs = table.column("solver"), cn = table.column("n"), ci = table.column("iter"),
                           cg = table.column("gamma"), cq = table.column("q");
                std::map<std::string, detail::Series> curves;
                std::map<std::string, std::pair<std::string, std::string>> last;
                std::vector<std::string> names;
                for (const auto& r : table.rows) {
                    const std::string key = r[cs] + ".n" + r[cn];
                    if (!curves.count(key)) names.push_back(key);
                    auto& c = curves[key];
                    const double q = detail::to_real(r[cq]);
                    if (q > 0.0) c.push_back({std::log10(detail::to_real(r[ci])), std::log10(q)});
                    last[key] = {r[cg], r[cq]};
                }
                out << "allocation_convergence " << path << "\nrun,final_gamma,final_q\n";
                for (const auto& name : names) {
                    out << name << "," << last[name].first << "," << last[name].second << "\n";
                    emit(stem + ".log10_q." + name, curves[name]);
                }
            } else if (has("mean_tau")) {
                out << "confidence_summary " << path << "\n";
                for (const auto& r : table.rows) {
                    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
                    out << "\n";
                }
            } else {
                throw InvalidParameter("'" + path + "' has an unrecognized schema");
            }
        }
        for (const auto& w : written) out << "wrote " << w << "\n";
        return kExitOk;
    });
}

}  // namespace topk
