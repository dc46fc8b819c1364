// Command-line driver: single runs, scaling series and matrix dumps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlfeti/nlfeti.hpp"

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            int v = std::stoi(item, &used);
            if (used != item.size())
                throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw nlfeti::Error(nlfeti::ErrorCode::config_error, "bad list entry '" + item + "'");
        }
    }
    if (out.empty())
        throw nlfeti::Error(nlfeti::ErrorCode::config_error, "empty list");
    return out;
}

// Coordinate listing of the global matrix, one "i j value" triple per line.
void dump_matrix(const nlfeti::RunConfig& c, const std::string& path) {
    nlfeti::Problem pr = nlfeti::make_problem(c.L, c.m, c.mode);
    nlfeti::GlobalSystem g = nlfeti::assemble_global(pr.lattice, pr.kernel, pr.source, pr.dirichlet);
    std::ostringstream os;
    os.precision(17);
    os << "% " << g.A.rows() << " " << g.A.cols() << " " << g.A.nnz() << "\n";
    for (std::size_t i = 0; i < g.A.rows(); ++i)
        for (std::size_t k = g.A.row_ptr()[i]; k < g.A.row_ptr()[i + 1]; ++k)
            os << i << " " << g.A.col_index()[k] << " " << g.A.values()[k] << "\n";
    nlfeti::write_output(path, os.str());
}

int exit_code(const std::string& status) {
    if (status == "converged")
        return 0;
    if (status == "max_iterations")
        return 2;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal Poisson solver with FETI substructuring"};
    app.option_defaults()->always_capture_default();

    nlfeti::RunConfig flags;
    std::string config_path, out = "-", format = "json", experiment = "single";
    std::string L_list, p_list, dump_path;
    double delta = 0.0;
    int block = 12;

    auto* oL = app.add_option("--L", flags.L, "particles per direction");
    auto* om = app.add_option("--m", flags.m, "horizon in grid cells");
    auto* op = app.add_option("--p", flags.p, "subdomains per direction");
    auto* osolver = app.add_option("--solver", flags.solver, "cg | dd");
    auto* oprec = app.add_option("--precond", flags.precond, "none | dirichlet | dirichlet-cg[:k]");
    auto* oinner = app.add_option("--inner-cg-iters", flags.inner_cg_iters,
                                  "CG steps in dirichlet-cg when no :k suffix is given");
    auto* otol = app.add_option("--tol", flags.tol, "relative tolerance");
    auto* omaxit = app.add_option("--maxit", flags.maxit, "iteration limit");
    auto* omode = app.add_option("--mode", flags.mode, "manufactured | consistency");
    auto* obackend = app.add_option("--backend", flags.backend, "serial | threaded");
    auto* othreads = app.add_option("--threads", flags.threads, "threads for the threaded backend (0: auto)");
    auto* oseed = app.add_option("--seed", flags.seed, "nonzero: randomized worker scheduling delays");
    auto* orepeat = app.add_option("--repeat", flags.repeat, "repetitions; timings are medians");
    app.add_option("--config", config_path, "key=value file; flags override it");
    app.add_option("--out", out, "output path, - for stdout");
    app.add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--experiment", experiment, "single | weak-m | weak-delta | strong")
        ->check(CLI::IsMember({"single", "weak-m", "weak-delta", "strong"}));
    app.add_option("--L-list", L_list, "comma-separated L values (weak-delta)");
    app.add_option("--p-list", p_list, "comma-separated p values (series)");
    app.add_option("--block", block, "L/p for weak-m series");
    app.add_option("--delta", delta, "horizon for weak-delta series");
    app.add_option("--dump-matrix", dump_path, "write the global matrix as i j value triples and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        nlfeti::RunConfig cfg;
        if (!config_path.empty())
            cfg = nlfeti::load_config_file(config_path);
        auto given = [](CLI::Option* o) { return o->count() > 0; };
        if (given(oL)) cfg.L = flags.L;
        if (given(om)) cfg.m = flags.m;
        if (given(op)) cfg.p = flags.p;
        if (given(osolver)) cfg.solver = flags.solver;
        if (given(oprec)) cfg.precond = flags.precond;
        if (given(oinner)) cfg.inner_cg_iters = flags.inner_cg_iters;
        if (given(otol)) cfg.tol = flags.tol;
        if (given(omaxit)) cfg.maxit = flags.maxit;
        if (given(omode)) cfg.mode = flags.mode;
        if (given(obackend)) cfg.backend = flags.backend;
        if (given(othreads)) cfg.threads = flags.threads;
        if (given(oseed)) cfg.seed = flags.seed;
        if (given(orepeat)) cfg.repeat = flags.repeat;

        if (!dump_path.empty()) {
            nlfeti::build_lattice(cfg.L, cfg.m);
            dump_matrix(cfg, dump_path);
            return 0;
        }

        if (experiment == "single") {
            nlfeti::validate(cfg);
            nlfeti::RunReport r = nlfeti::run_single(cfg);
            nlfeti::emit_report(r, format, out);
            if (r.status == "error")
                std::cerr << "error: " << r.message << "\n";
            return exit_code(r.status);
        }

        nlfeti::SeriesReport s;
        if (experiment == "weak-m") {
            s = nlfeti::run_weak_scaling_const_m(cfg, block, parse_int_list(p_list.empty() ? "2,3,4" : p_list));
        } else if (experiment == "weak-delta") {
            if (delta <= 0.0)
                throw nlfeti::Error(nlfeti::ErrorCode::config_error, "weak-delta needs --delta");
            s = nlfeti::run_weak_scaling_const_delta(cfg, delta, parse_int_list(L_list.empty() ? "24,48" : L_list),
                                                     parse_int_list(p_list.empty() ? "2,8" : p_list));
        } else {
            s = nlfeti::run_strong_scaling(cfg, parse_int_list(p_list.empty() ? "2,4,8" : p_list));
        }
        nlfeti::emit_report(s, format, out);
        int rc = 0;
        for (const auto& r : s.points) {
            if (r.status == "error")
                std::cerr << "error (L=" << r.config.L << ", p=" << r.config.p << "): " << r.message << "\n";
            int c = exit_code(r.status);
            if (c == 1 || rc == 0)
                rc = rc == 1 ? 1 : c;
        }
        return rc;
    } catch (const nlfeti::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
