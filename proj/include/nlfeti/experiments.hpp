#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nlfeti/assembly.hpp"
#include "nlfeti/cg.hpp"
#include "nlfeti/cholesky.hpp"
#include "nlfeti/decomposition.hpp"
#include "nlfeti/error.hpp"
#include "nlfeti/feti.hpp"
#include "nlfeti/kernel.hpp"
#include "nlfeti/lattice.hpp"
#include "nlfeti/runtime.hpp"

namespace nlfeti {

struct RunConfig {
    int L = 24;
    int m = 2;
    int p = 2;
    std::string solver = "dd";         // cg | dd
    std::string precond = "dirichlet"; // none | dirichlet | dirichlet-cg:k
    int inner_cg_iters = 5;
    double tol = 1e-5;
    int maxit = 10000;
    std::string mode = "manufactured"; // manufactured | consistency
    std::string backend = "serial";    // serial | threaded
    int threads = 0;
    std::uint64_t seed = 0; // nonzero: randomized worker delays on the threaded backend
    int repeat = 1;         // timings are the median over repetitions

    bool operator==(const RunConfig&) const = default;
};

inline PreconditionerConfig parse_preconditioner(const std::string& s, int inner_iters) {
    if (s == "none")
        return PreconditionerConfig::none();
    if (s == "dirichlet")
        return PreconditionerConfig::dirichlet();
    if (s == "dirichlet-cg")
        return PreconditionerConfig::dirichlet_cg(inner_iters);
    if (s.rfind("dirichlet-cg:", 0) == 0) {
        try {
            std::size_t used = 0;
            int k = std::stoi(s.substr(13), &used);
            if (used == s.size() - 13 && k > 0)
                return PreconditionerConfig::dirichlet_cg(k);
        } catch (const std::exception&) {
        }
    }
    throw Error(ErrorCode::config_error, "unknown preconditioner '" + s + "'");
}

/// Throws on any invalid combination, including the lattice/partition rules.
inline void validate(const RunConfig& c) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::config_error, msg); };
    if (c.solver != "cg" && c.solver != "dd")
        fail("solver must be cg or dd");
    if (c.mode != "manufactured" && c.mode != "consistency")
        fail("mode must be manufactured or consistency");
    if (c.backend != "serial" && c.backend != "threaded")
        fail("backend must be serial or threaded");
    if (!(c.tol >= 0.0))
        fail("tol must be non-negative");
    if (c.maxit < 0)
        fail("maxit must be non-negative");
    if (c.inner_cg_iters < 1)
        fail("inner-cg-iters must be positive");
    if (c.repeat < 1)
        fail("repeat must be positive");
    parse_preconditioner(c.precond, c.inner_cg_iters);
    partition(build_lattice(c.L, c.m), c.p);
}

/// Discrete problem: source per interior node, Dirichlet data per gamma node,
/// and the nodal reference solution.
struct Problem {
    ParticleLattice lattice;
    Kernel kernel;
    std::vector<double> source;
    std::vector<double> dirichlet;
    std::vector<double> reference;
};

inline double manufactured_solution(Point2 x) { return x.x * x.x + x.y * x.y; }

/// manufactured: f = -4, g = u on gamma. consistency: the source is chosen so
/// that the assembled load equals A u*, making u* the exact discrete solution.
inline Problem make_problem(int L, int m, const std::string& mode) {
    Problem pr{build_lattice(L, m), {}, {}, {}, {}};
    pr.kernel = Kernel::for_horizon(pr.lattice.delta);
    pr.dirichlet = sample_gamma(pr.lattice, manufactured_solution);
    pr.reference = sample_interior(pr.lattice, manufactured_solution);
    if (mode == "consistency") {
        std::vector<double> zero(pr.lattice.num_interior(), 0.0);
        GlobalSystem g = assemble_global(pr.lattice, pr.kernel, zero, pr.dirichlet);
        std::vector<double> Au = g.A * pr.reference;
        const double h2 = pr.lattice.h * pr.lattice.h;
        pr.source.resize(Au.size());
        for (std::size_t i = 0; i < Au.size(); ++i)
            pr.source[i] = (Au[i] - g.f[i]) / h2;
    } else {
        pr.source.assign(pr.lattice.num_interior(), -4.0);
    }
    return pr;
}

struct RunReport {
    RunConfig config;
    std::string status = "error"; // converged | max_iterations | breakdown | error
    std::string message;
    int iterations = 0;
    std::vector<double> residual_history;
    double setup_seconds = 0.0;
    double solve_seconds = 0.0;
    double primal_residual = 0.0; // ||f - A u|| / ||f||
    double error = 0.0;           // ||u - u_ref||_inf
    double reference_norm = 0.0;  // ||u_ref||_inf
    double duplicate_discrepancy = 0.0;
    double compatibility = 0.0; // max_k |G^T lambda_k - g|
    int q = 0;
    int N = 0;
    int floating_count = 0;

    bool operator==(const RunReport&) const = default;
};

/// Extra outputs of run_single not carried in the report.
struct RunArtifacts {
    std::vector<double> u;
    std::vector<std::vector<double>> lambda_history;
    std::vector<double> compatibility_history;
    bool record_lambda = false;
};

inline Runtime make_runtime(const RunConfig& c, int workers) {
    if (c.backend == "threaded")
        return Runtime::threaded(workers, c.threads,
                                 c.seed ? std::optional<std::uint64_t>(c.seed) : std::nullopt);
    return Runtime::serial(workers);
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SolveOutcome {
    std::vector<double> u;
    int iterations = 0;
    bool converged = false;
    bool breakdown = false;
    std::vector<double> history;
    double setup = 0.0;
    double solve = 0.0;
    double discrepancy = 0.0;
    double compatibility = 0.0;
    std::vector<std::vector<double>> lambda_history;
    std::vector<double> compatibility_history;
};

inline SolveOutcome solve_once(const RunConfig& c, const Problem& pr, const Decomposition& d,
                               const ConstraintSet& cs, bool record_lambda) {
    SolveOutcome out;
    if (c.solver == "cg") {
        auto t0 = std::chrono::steady_clock::now();
        GlobalSystem g = assemble_global(pr.lattice, pr.kernel, pr.source, pr.dirichlet);
        out.setup = seconds_since(t0);
        auto t1 = std::chrono::steady_clock::now();
        CgResult r = cg(g.A, g.f, c.tol, c.maxit);
        out.solve = seconds_since(t1);
        out.u = std::move(r.x);
        out.iterations = r.iterations;
        out.converged = r.converged;
        out.history = std::move(r.residual_history);
        return out;
    }
    Runtime rt = make_runtime(c, d.N);
    auto t0 = std::chrono::steady_clock::now();
    std::vector<SubdomainSystem> subs =
        assemble_subdomains(d, cs, pr.kernel, pr.source, pr.dirichlet, rt);
    ReducedSystem rs(d, cs, std::move(subs), rt, parse_preconditioner(c.precond, c.inner_cg_iters));
    out.setup = seconds_since(t0);

    auto t1 = std::chrono::steady_clock::now();
    PcgOptions opt;
    opt.tol = c.tol;
    opt.maxit = c.maxit;
    opt.record_lambda = record_lambda;
    PcgResult r = projected_pcg(rs, opt);
    PrimalSolution sol = recover_primal(rs, r.lambda, pr.lattice);
    out.solve = seconds_since(t1);

    // Diagnostics outside the timed region.
    out.compatibility_history.reserve(r.lambda_history.size());
    for (const auto& lam : r.lambda_history)
        out.compatibility_history.push_back(rs.compatibility(rs.scatter(lam)));
    out.compatibility = rs.compatibility(r.lambda);
    for (double v : out.compatibility_history)
        out.compatibility = std::max(out.compatibility, v);

    out.u = std::move(sol.u);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.breakdown = r.breakdown;
    out.history = std::move(r.residual_history);
    out.discrepancy = sol.duplicate_discrepancy;
    out.lambda_history = std::move(r.lambda_history);
    return out;
}

} // namespace detail

inline RunReport run_single(const RunConfig& c, RunArtifacts* artifacts = nullptr) {
    RunReport rep;
    rep.config = c;
    try {
        validate(c);
        Problem pr = make_problem(c.L, c.m, c.mode);
        Decomposition d = partition(pr.lattice, c.p);
        ConstraintSet cs = enumerate_constraints(d);
        rep.q = static_cast<int>(cs.size());
        rep.N = d.N;
        rep.floating_count = static_cast<int>(d.num_floating());

        std::vector<double> setups, solves;
        detail::SolveOutcome out;
        for (int k = 0; k < c.repeat; ++k) {
            out = detail::solve_once(c, pr, d, cs, artifacts && artifacts->record_lambda);
            setups.push_back(out.setup);
            solves.push_back(out.solve);
        }
        rep.setup_seconds = detail::median(setups);
        rep.solve_seconds = detail::median(solves);
        rep.iterations = out.iterations;
        rep.residual_history = out.history;
        rep.duplicate_discrepancy = out.discrepancy;
        rep.compatibility = out.compatibility;
        rep.status = out.breakdown ? "breakdown" : out.converged ? "converged" : "max_iterations";

        GlobalSystem g = assemble_global(pr.lattice, pr.kernel, pr.source, pr.dirichlet);
        std::vector<double> Au = g.A * out.u;
        for (std::size_t i = 0; i < Au.size(); ++i)
            Au[i] = g.f[i] - Au[i];
        rep.primal_residual = norm2(Au) / norm2(g.f);
        for (std::size_t i = 0; i < out.u.size(); ++i)
            rep.error = std::max(rep.error, std::abs(out.u[i] - pr.reference[i]));
        rep.reference_norm = norm_inf(pr.reference);

        if (artifacts) {
            artifacts->u = std::move(out.u);
            artifacts->lambda_history = std::move(out.lambda_history);
            artifacts->compatibility_history = std::move(out.compatibility_history);
        }
    } catch (const std::exception& e) {
        rep.status = "error";
        rep.message = e.what();
    }
    return rep;
}

struct SeriesReport {
    std::string kind;
    std::vector<RunReport> points;
    std::vector<double> speedup; // strong scaling: solve time of the first point over each point

    bool operator==(const SeriesReport&) const = default;
};

/// Fixed m and fixed block width L/p; L grows with p.
inline SeriesReport run_weak_scaling_const_m(const RunConfig& base, int block, const std::vector<int>& p_list) {
    SeriesReport s{"weak_const_m", {}, {}};
    for (int p : p_list) {
        RunConfig c = base;
        c.p = p;
        c.L = block * p;
        s.points.push_back(run_single(c));
    }
    return s;
}

/// Fixed horizon delta; m = delta * L must come out integral.
inline SeriesReport run_weak_scaling_const_delta(const RunConfig& base, double delta,
                                                 const std::vector<int>& L_list,
                                                 const std::vector<int>& p_list) {
    if (L_list.size() != p_list.size())
        throw Error(ErrorCode::config_error, "L-list and p-list differ in length");
    SeriesReport s{"weak_const_delta", {}, {}};
    for (std::size_t i = 0; i < L_list.size(); ++i) {
        const double mf = delta * L_list[i];
        const int m = static_cast<int>(std::lround(mf));
        if (m < 1 || std::abs(mf - m) > 1e-9)
            throw Error(ErrorCode::config_error,
                        "delta*L is not a positive integer for L=" + std::to_string(L_list[i]));
        RunConfig c = base;
        c.L = L_list[i];
        c.m = m;
        c.p = p_list[i];
        s.points.push_back(run_single(c));
    }
    return s;
}

inline SeriesReport run_strong_scaling(const RunConfig& base, const std::vector<int>& p_list) {
    SeriesReport s{"strong", {}, {}};
    for (int p : p_list) {
        RunConfig c = base;
        c.p = p;
        s.points.push_back(run_single(c));
    }
    for (const RunReport& r : s.points)
        s.speedup.push_back(r.solve_seconds > 0.0 ? s.points.front().solve_seconds / r.solve_seconds : 0.0);
    return s;
}

// Serialization.

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = {{"L", c.L},
         {"m", c.m},
         {"p", c.p},
         {"solver", c.solver},
         {"precond", c.precond},
         {"inner_cg_iters", c.inner_cg_iters},
         {"tol", c.tol},
         {"maxit", c.maxit},
         {"mode", c.mode},
         {"backend", c.backend},
         {"threads", c.threads},
         {"seed", c.seed},
         {"repeat", c.repeat}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
    j.at("L").get_to(c.L);
    j.at("m").get_to(c.m);
    j.at("p").get_to(c.p);
    j.at("solver").get_to(c.solver);
    j.at("precond").get_to(c.precond);
    j.at("inner_cg_iters").get_to(c.inner_cg_iters);
    j.at("tol").get_to(c.tol);
    j.at("maxit").get_to(c.maxit);
    j.at("mode").get_to(c.mode);
    j.at("backend").get_to(c.backend);
    j.at("threads").get_to(c.threads);
    j.at("seed").get_to(c.seed);
    j.at("repeat").get_to(c.repeat);
}

inline void to_json(nlohmann::json& j, const RunReport& r) {
    j = {{"config", r.config},
         {"status", r.status},
         {"message", r.message},
         {"iterations", r.iterations},
         {"residual_history", r.residual_history},
         {"setup_seconds", r.setup_seconds},
         {"solve_seconds", r.solve_seconds},
         {"primal_residual", r.primal_residual},
         {"error", r.error},
         {"reference_norm", r.reference_norm},
         {"duplicate_discrepancy", r.duplicate_discrepancy},
         {"compatibility", r.compatibility},
         {"q", r.q},
         {"N", r.N},
         {"floating_count", r.floating_count}};
}

inline void from_json(const nlohmann::json& j, RunReport& r) {
    j.at("config").get_to(r.config);
    j.at("status").get_to(r.status);
    j.at("message").get_to(r.message);
    j.at("iterations").get_to(r.iterations);
    j.at("residual_history").get_to(r.residual_history);
    j.at("setup_seconds").get_to(r.setup_seconds);
    j.at("solve_seconds").get_to(r.solve_seconds);
    j.at("primal_residual").get_to(r.primal_residual);
    j.at("error").get_to(r.error);
    j.at("reference_norm").get_to(r.reference_norm);
    j.at("duplicate_discrepancy").get_to(r.duplicate_discrepancy);
    j.at("compatibility").get_to(r.compatibility);
    j.at("q").get_to(r.q);
    j.at("N").get_to(r.N);
    j.at("floating_count").get_to(r.floating_count);
}

inline void to_json(nlohmann::json& j, const SeriesReport& s) {
    j = {{"kind", s.kind}, {"points", s.points}, {"speedup", s.speedup}};
}

inline void from_json(const nlohmann::json& j, SeriesReport& s) {
    j.at("kind").get_to(s.kind);
    j.at("points").get_to(s.points);
    j.at("speedup").get_to(s.speedup);
}

inline std::string report_to_json(const RunReport& r) { return nlohmann::json(r).dump(2) + "\n"; }
inline std::string report_to_json(const SeriesReport& s) { return nlohmann::json(s).dump(2) + "\n"; }

inline RunReport parse_report(const std::string& text) { return nlohmann::json::parse(text).get<RunReport>(); }
inline SeriesReport parse_series(const std::string& text) {
    return nlohmann::json::parse(text).get<SeriesReport>();
}

inline const char* csv_header() { return "L,m,p,q,iterations,setup_s,solve_s,primal_residual,error"; }

inline std::string report_to_csv(const std::vector<RunReport>& points) {
    std::ostringstream os;
    os.precision(17);
    os << csv_header() << "\n";
    for (const RunReport& r : points)
        os << r.config.L << ',' << r.config.m << ',' << r.config.p << ',' << r.q << ',' << r.iterations << ','
           << r.setup_seconds << ',' << r.solve_seconds << ',' << r.primal_residual << ',' << r.error << "\n";
    return os.str();
}

inline std::string report_to_csv(const RunReport& r) { return report_to_csv(std::vector<RunReport>{r}); }
inline std::string report_to_csv(const SeriesReport& s) { return report_to_csv(s.points); }

/// Writes `text` to `path`, or to stdout when path is empty or "-".
inline void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::io_error, "cannot open '" + path + "' for writing");
    f << text;
    if (!f)
        throw Error(ErrorCode::io_error, "write to '" + path + "' failed");
}

template <class Report>
void emit_report(const Report& r, const std::string& format, const std::string& path) {
    if (format == "json")
        write_output(path, report_to_json(r));
    else if (format == "csv")
        write_output(path, report_to_csv(r));
    else
        throw Error(ErrorCode::config_error, "format must be json or csv");
}

/// key=value lines; '#' starts a comment. Keys match the CLI flag names.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    auto as_int = [&] {
        try {
            std::size_t used = 0;
            int v = std::stoi(value, &used);
            if (used == value.size())
                return v;
        } catch (const std::exception&) {
        }
        throw Error(ErrorCode::config_error, "bad integer for " + key + ": '" + value + "'");
    };
    if (key == "L")
        c.L = as_int();
    else if (key == "m")
        c.m = as_int();
    else if (key == "p")
        c.p = as_int();
    else if (key == "solver")
        c.solver = value;
    else if (key == "precond")
        c.precond = value;
    else if (key == "inner-cg-iters")
        c.inner_cg_iters = as_int();
    else if (key == "tol") {
        try {
            std::size_t used = 0;
            c.tol = std::stod(value, &used);
            if (used != value.size())
                throw Error(ErrorCode::config_error, "");
        } catch (const std::exception&) {
            throw Error(ErrorCode::config_error, "bad number for tol: '" + value + "'");
        }
    } else if (key == "maxit")
        c.maxit = as_int();
    else if (key == "mode")
        c.mode = value;
    else if (key == "backend")
        c.backend = value;
    else if (key == "threads")
        c.threads = as_int();
    else if (key == "seed") {
        try {
            std::size_t used = 0;
            c.seed = std::stoull(value, &used);
            if (used != value.size())
                throw Error(ErrorCode::config_error, "");
        } catch (const std::exception&) {
            throw Error(ErrorCode::config_error, "bad integer for seed: '" + value + "'");
        }
    }
    else if (key == "repeat")
        c.repeat = as_int();
    else
        throw Error(ErrorCode::config_error, "unknown key '" + key + "'");
}

inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        s.erase(0, s.find_first_not_of(ws));
        s.erase(s.find_last_not_of(ws) + 1);
        return s;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::config_error, "line " + std::to_string(lineno) + ": expected key=value");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

inline RunConfig load_config_file(const std::string& path, RunConfig c = {}) {
    std::ifstream f(path);
    if (!f)
        throw Error(ErrorCode::io_error, "cannot read config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    for (auto& [k, v] : parse_config_text(ss.str()))
        apply_setting(c, k, v);
    return c;
}

} // namespace nlfeti
