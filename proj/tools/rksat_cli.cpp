#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rksat/bethe.hpp"
#include "rksat/formula.hpp"
#include "rksat/gwtree.hpp"
#include "rksat/moments.hpp"

using nlohmann::json;
using namespace rksat;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitPrecondition = 2;
constexpr int kExitNonConvergence = 3;

struct Common {
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string out;
    bool csv = false;
    bool reproducible = false;
};

struct Args {
    int k = 4, d = 30, n = 12, N = 20000, ell = 2, trials = 500, points = 64, max_iters = 400, max_refinements = 12;
    double beta = 2, tol = 0.1, lambda = 1, theta = 0.5, bad_prob = -1, beta_min = -1, beta_max = -1, damping = 0;
    std::size_t samples = 0;
    long long planted_trials = 0;
    std::vector<int> d_list;
    std::string input, dimacs, candidates = "core", x = "beta", y = "delta", err, title;
    bool quad_boundary = false;
};

std::filesystem::path resolve(const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    if (const char* base = std::getenv("RKSAT_OUTPUT_DIR"); base && *base) return std::filesystem::path(base) / p;
    return p;
}

class Emitter {
  public:
    explicit Emitter(const Common& c) : common_(c) {
        if (!c.out.empty()) {
            auto p = resolve(c.out);
            if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
            file_.open(p);
            if (!file_) throw PreconditionError("cannot open output file " + p.string());
        }
    }
    std::ostream& os() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

    void record(const std::string& command, const json& params, const json& result, double wall) {
        json r;
        r["schema_version"] = kSchemaVersion;
        r["command"] = command;
        r["params"] = params;
        r["seed"] = common_.seed;
        r["result"] = result;
        if (!common_.reproducible) r["wall_time_s"] = wall;
        os() << r.dump() << '\n';
    }

  private:
    const Common& common_;
    std::ofstream file_;
};

json estimate(const Estimate& e) { return {{"value", e.value}, {"stderr", e.stderr_}}; }

json inf_safe(double x) { return std::isfinite(x) ? json(x) : json("inf"); }

formula::Formula instance(const Args& a, const Common& c) {
    if (!a.input.empty()) {
        std::ifstream in(a.input);
        require(static_cast<bool>(in), "cannot open input formula " + a.input);
        return formula::read_dimacs(in);
    }
    return formula::generate(a.n, a.k, a.d, c.seed);
}

json formula_params(const Args& a, const formula::Formula& f) {
    json p = {{"n", f.n}, {"k", f.k}, {"d", f.d}, {"m", f.m()}};
    if (!a.input.empty()) p["input"] = a.input;
    return p;
}

bethe::ScanSpec scan_spec(const Args& a) {
    auto s = bethe::ScanSpec::defaults(a.k);
    if (a.beta_min > 0) s.beta_min = a.beta_min;
    if (a.beta_max > 0) s.beta_max = a.beta_max;
    s.points = a.points;
    s.tol = a.tol;
    s.max_refinements = a.max_refinements;
    s.max_iters = a.max_iters;
    return s;
}

json scan_params(const Args& a, const bethe::ScanSpec& s) {
    return {{"k", a.k},           {"N", a.N},           {"beta_min", s.beta_min}, {"beta_max", s.beta_max},
            {"points", s.points}, {"tol", s.tol},       {"max_refinements", s.max_refinements},
            {"max_iters", s.max_iters}, {"sample_factor", s.sample_factor}};
}

json threshold_json(const bethe::ThresholdResult& t) {
    return {{"beta_c", inf_safe(t.beta_c)}, {"beta_lo", inf_safe(t.beta_lo)}, {"beta_hi", inf_safe(t.beta_hi)},
            {"finite", t.finite()},         {"ambiguous", t.ambiguous},       {"crossing_at_start", t.crossing_at_start},
            {"nonconverged", t.nonconverged}, {"sign_changes", t.sign_changes},           {"trace_points", t.trace.size()},
            {"note", t.note}};
}

// --- plot ------------------------------------------------------------------

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw PreconditionError("plot: no column named " + name);
    }
};

Table read_table(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "plot: cannot open " + path);
    Table t;
    std::string line, cell;
    require(static_cast<bool>(std::getline(in, line)), "plot: empty csv");
    std::stringstream hs(line);
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        t.rows.push_back(row);
    }
    return t;
}

void write_svg(std::ostream& os, const Table& t, const Args& a) {
    const int xi = t.column(a.x), yi = t.column(a.y), ei = a.err.empty() ? -1 : t.column(a.err);
    std::vector<std::array<double, 3>> pts;
    for (const auto& r : t.rows) pts.push_back({r[xi], r[yi], ei >= 0 ? r[ei] : 0.0});
    std::sort(pts.begin(), pts.end());
    require(!pts.empty(), "plot: no data rows");
    double x0 = pts.front()[0], x1 = pts.back()[0], y0 = INFINITY, y1 = -INFINITY;
    for (auto& p : pts) {
        y0 = std::min(y0, p[1] - p[2]);
        y1 = std::max(y1, p[1] + p[2]);
    }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double W = 640, H = 400, m = 50;
    auto sx = [&](double x) { return m + (x - x0) / (x1 - x0) * (W - 2 * m); };
    auto sy = [&](double y) { return H - m - (y - y0) / (y1 - y0) * (H - 2 * m); };
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << W - 2 * m << "\" height=\"" << H - 2 * m
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    if (y0 < 0 && y1 > 0)
        os << "<line x1=\"" << m << "\" x2=\"" << W - m << "\" y1=\"" << sy(0) << "\" y2=\"" << sy(0)
           << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (auto& p : pts) os << sx(p[0]) << ',' << sy(p[1]) << ' ';
    os << "\"/>\n";
    for (auto& p : pts) {
        if (p[2] > 0)
            os << "<line x1=\"" << sx(p[0]) << "\" x2=\"" << sx(p[0]) << "\" y1=\"" << sy(p[1] - p[2]) << "\" y2=\""
               << sy(p[1] + p[2]) << "\" stroke=\"steelblue\"/>\n";
        os << "<circle cx=\"" << sx(p[0]) << "\" cy=\"" << sy(p[1]) << "\" r=\"2\" fill=\"steelblue\"/>\n";
    }
    auto label = [&](double x, double y, const std::string& s, const char* anchor) {
        os << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"12\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
    };
    auto num = [](double v) {
        std::ostringstream s;
        s.precision(4);
        s << v;
        return s.str();
    };
    label(m, H - m + 16, num(x0), "start");
    label(W - m, H - m + 16, num(x1), "end");
    label(m - 4, H - m, num(y0), "end");
    label(m - 4, m + 4, num(y1), "end");
    label(W / 2, H - 10, a.x, "middle");
    label(14, H / 2, a.y, "middle");
    if (!a.title.empty()) label(W / 2, 24, a.title, "middle");
    os << "</svg>\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random regular k-SAT: condensation threshold tools"};
    app.require_subcommand(1);
    Common c;
    Args a;

    auto common = [&](CLI::App* s) {
        s->add_option("--seed", c.seed, "64-bit seed");
        s->add_option("--workers", c.workers, "parallel width")->check(CLI::PositiveNumber);
        s->add_option("--out", c.out, "output file (relative to RKSAT_OUTPUT_DIR when set)");
        s->add_flag("--csv", c.csv, "tabular output where available");
        s->add_flag("--reproducible", c.reproducible, "omit wall time so reruns are byte-identical");
    };
    auto kdb = [&](CLI::App* s) {
        s->add_option("--k", a.k)->required();
        s->add_option("--d", a.d)->required();
        s->add_option("--beta", a.beta)->required();
    };

    auto* q = app.add_subcommand("q", "solve the scalar fixed point q");
    q->add_option("--k", a.k)->required();
    q->add_option("--beta", a.beta)->required();
    common(q);

    auto* fe = app.add_subcommand("free-energy", "closed form and Monte Carlo free energies");
    kdb(fe);
    fe->add_option("--N", a.N);
    fe->add_option("--max-iters", a.max_iters);
    fe->add_option("--samples", a.samples);
    common(fe);

    auto* pd = app.add_subcommand("popdyn", "run population dynamics from the polarized start");
    kdb(pd);
    pd->add_option("--N", a.N);
    pd->add_option("--max-iters", a.max_iters);
    common(pd);

    auto* bc = app.add_subcommand("beta-c", "locate the condensation threshold in beta");
    bc->add_option("--k", a.k)->required();
    bc->add_option("--d", a.d)->required();
    for (auto* s : {bc}) {
        s->add_option("--N", a.N);
        s->add_option("--points", a.points);
        s->add_option("--tol", a.tol);
        s->add_option("--beta-min", a.beta_min);
        s->add_option("--beta-max", a.beta_max);
        s->add_option("--max-refinements", a.max_refinements);
        s->add_option("--max-iters", a.max_iters);
    }
    common(bc);

    auto* dc = app.add_subcommand("d-c", "smallest degree on a grid with a finite threshold");
    dc->add_option("--k", a.k)->required();
    dc->add_option("--d-list", a.d_list, "ascending even degrees")->required()->delimiter(',');
    dc->add_option("--N", a.N);
    dc->add_option("--points", a.points);
    dc->add_option("--tol", a.tol);
    dc->add_option("--max-refinements", a.max_refinements);
    dc->add_option("--max-iters", a.max_iters);
    common(dc);

    auto* ms = app.add_subcommand("moments-scan", "second moment rate on an alpha grid");
    kdb(ms);
    ms->add_option("--points", a.points);
    common(ms);

    auto* te = app.add_subcommand("tree-exp", "BP contraction experiment on Galton-Watson trees");
    kdb(te);
    te->add_option("--ell", a.ell)->required();
    te->add_option("--trials", a.trials);
    te->add_option("--bad-prob", a.bad_prob);
    common(te);

    auto* bl = app.add_subcommand("bethe-level", "finite-depth tree Bethe functional");
    kdb(bl);
    bl->add_option("--ell", a.ell)->required();
    bl->add_option("--samples", a.samples);
    bl->add_flag("--quad-boundary", a.quad_boundary, "leaves from a converged population instead of all-plus");
    bl->add_option("--N", a.N);
    bl->add_option("--max-iters", a.max_iters);
    common(bl);

    auto* fm = app.add_subcommand("formula", "finite instances and exact oracles");
    fm->require_subcommand(1);
    std::map<std::string, CLI::App*> fsub;
    for (const char* name : {"gen", "exact", "cluster", "planted", "bp", "core", "sticky", "annealed"}) {
        auto* s = fm->add_subcommand(name);
        s->add_option("--n", a.n);
        s->add_option("--k", a.k);
        s->add_option("--d", a.d);
        if (std::string(name) != "gen" && std::string(name) != "core" && std::string(name) != "sticky") s->add_option("--beta", a.beta);
        if (std::string(name) != "annealed" && std::string(name) != "planted") s->add_option("--input", a.input, "DIMACS-like formula file");
        common(s);
        fsub[name] = s;
    }
    fsub["gen"]->add_option("--dimacs", a.dimacs, "write the formula here");
    fsub["planted"]->add_option("--trials", a.planted_trials, "report acceptance over this many proposals instead of sampling");
    fsub["planted"]->add_option("--dimacs", a.dimacs);
    fsub["bp"]->add_option("--max-iters", a.max_iters);
    fsub["bp"]->add_option("--damping", a.damping);
    fsub["core"]->add_option("--lambda", a.lambda);
    fsub["core"]->add_option("--beta", a.beta);
    fsub["sticky"]->add_option("--lambda", a.lambda);
    fsub["sticky"]->add_option("--beta", a.beta, "beta for the core used as candidates");
    fsub["sticky"]->add_option("--candidates", a.candidates)->check(CLI::IsMember({"core", "all"}));
    fsub["annealed"]->add_option("--theta", a.theta);

    auto* pl = app.add_subcommand("plot", "render a CSV trace to SVG");
    pl->add_option("--input", a.input)->required();
    pl->add_option("--x", a.x);
    pl->add_option("--y", a.y);
    pl->add_option("--err", a.err);
    pl->add_option("--title", a.title);
    common(pl);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitPrecondition;
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    population::StepOptions opt;
    int status = 0;

    try {
        Emitter em(c);
        opt.workers = c.workers;
        if (*q) {
            auto s = solve_q(a.k, c_of_beta(a.beta));
            em.record("q", {{"k", a.k}, {"beta", a.beta}}, {{"q", s.q}, {"residual", s.residual}, {"c", c_of_beta(a.beta)}}, wall());
        } else if (*fe) {
            auto p = ModelParams::make(a.k, a.d, a.beta);
            auto e = bethe::estimate_bethe(p, a.N, a.max_iters, c.seed, a.samples, opt);
            em.record("free-energy", {{"k", a.k}, {"d", a.d}, {"beta", a.beta}, {"N", a.N}, {"max_iters", a.max_iters}, {"samples", a.samples}},
                      {{"F_closed", e.F_closed}, {"F_mc", estimate(e.F_mc.value)}, {"B", estimate(e.B_mc.value)},
                       {"population_stderr", e.F_mc.population_stderr}, {"iterations", e.iterations}, {"converged", e.converged}},
                      wall());
            if (!e.converged) status = kExitNonConvergence;
        } else if (*pd) {
            auto p = ModelParams::make(a.k, a.d, a.beta);
            auto r = population::run_popdyn(p, a.N, a.max_iters, c.seed, opt);
            auto sk = population::is_skewed(population::mix(r.quad), p);
            if (c.csv) {
                em.os() << "iteration,w1\n";
                for (std::size_t i = 0; i < r.w1_trace.size(); ++i) em.os() << i + 1 << ',' << r.w1_trace[i] << '\n';
            } else {
                em.record("popdyn", {{"k", a.k}, {"d", a.d}, {"beta", a.beta}, {"N", a.N}, {"max_iters", a.max_iters}},
                          {{"q", p.q}, {"iterations", r.iterations}, {"converged", r.converged}, {"final_w1", r.final_w1},
                           {"mix_mean", population::mix_mean(r.quad)}, {"hat_mix_mean", population::hat_mix_mean(r.quad)},
                           {"middle_mass", sk.middle_mass}, {"skewed", sk.skewed}, {"clamp_events", r.quad.clamp_events}},
                          wall());
            }
            if (!r.converged) status = kExitNonConvergence;
        } else if (*bc) {
            auto s = scan_spec(a);
            auto t = bethe::find_beta_c(a.k, a.d, s, a.N, c.seed);
            if (c.csv) {
                bethe::write_trace_csv(em.os(), t);
            } else {
                json params = scan_params(a, s);
                params["d"] = a.d;
                em.record("beta-c", params, threshold_json(t), wall());
            }
            if (t.nonconverged) status = kExitNonConvergence;
        } else if (*dc) {
            auto s = scan_spec(a);
            auto r = bethe::find_d_c(a.k, a.d_list, s, a.N, c.seed);
            json params = scan_params(a, s);
            params["d_list"] = a.d_list;
            json table = json::array();
            for (const auto& t : r.table) {
                json row = threshold_json(t);
                row["d"] = t.d;
                table.push_back(row);
            }
            em.record("d-c", params,
                      {{"d_c", r.d_c ? json(*r.d_c) : json("inf")}, {"monotone", r.monotone}, {"table", table}}, wall());
        } else if (*ms) {
            auto p = ModelParams::make(a.k, a.d, a.beta);
            auto r = moments::scan_second_moment(p, a.points);
            if (c.csv) {
                moments::write_csv(em.os(), r);
            } else {
                em.record("moments-scan", {{"k", a.k}, {"d", a.d}, {"beta", a.beta}, {"points", a.points}},
                          {{"f1", r.f1}, {"f2_half", r.f2_half}, {"first_difference", r.first_difference},
                           {"second_difference", r.second_difference}, {"argmax_alpha", r.argmax_alpha},
                           {"max_f2_minus_bar", r.max_f2_minus_bar}, {"f2_below_bar", r.f2_below_bar}, {"max_at_half", r.max_at_half}},
                          wall());
            }
        } else if (*te) {
            auto p = ModelParams::make(a.k, a.d, a.beta);
            auto r = gwtree::contraction_experiment(p, a.ell, a.trials, c.seed, a.bad_prob);
            if (c.csv) {
                em.os() << "trial,diff,cold,trunk_fraction\n";
                em.os().precision(17);
                for (std::size_t i = 0; i < r.diffs.size(); ++i)
                    em.os() << i << ',' << r.diffs[i] << ',' << int(r.cold[i]) << ',' << r.trunk_fraction[i] << '\n';
            } else {
                auto nan_null = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
                em.record("tree-exp", {{"k", a.k}, {"d", a.d}, {"beta", a.beta}, {"ell", a.ell}, {"trials", a.trials}, {"bad_prob", r.bad_prob}},
                          {{"threshold", r.threshold}, {"exceed_fraction", r.exceed_fraction}, {"cold_fraction", r.cold_fraction},
                           {"median_cold", nan_null(r.median_cold)}, {"median_noncold", nan_null(r.median_noncold)},
                           {"median_diff", gwtree::median(r.diffs)}},
                          wall());
            }
        } else if (*bl) {
            auto p = ModelParams::make(a.k, a.d, a.beta);
            std::size_t samples = a.samples ? a.samples : 20000;
            std::optional<population::PopdynResult> pr;
            if (a.quad_boundary) pr = population::run_popdyn(p, a.N, a.max_iters, mix_key(c.seed, 1), opt);
            auto e = gwtree::estimate_B_level(p, a.ell, samples, pr ? &pr->quad : nullptr, c.seed);
            json params = {{"k", a.k}, {"d", a.d}, {"beta", a.beta}, {"ell", a.ell}, {"samples", samples}, {"quad_boundary", a.quad_boundary}};
            if (a.quad_boundary) params["N"] = a.N;
            em.record("bethe-level", params,
                      {{"B_level", estimate(e.value)}, {"z1", estimate(e.terms.z1)}, {"z2", estimate(e.terms.z2)}, {"z3", estimate(e.terms.z3)},
                       {"method", e.method}, {"F_closed", closed_form_F(p)}},
                      wall());
            if (pr && !pr->converged) status = kExitNonConvergence;
        } else if (*fm) {
            if (*fsub["gen"]) {
                auto f = instance(a, c);
                if (!a.dimacs.empty()) {
                    std::ofstream o(resolve(a.dimacs));
                    require(static_cast<bool>(o), "cannot open " + a.dimacs);
                    formula::write_dimacs(o, f);
                }
                em.record("formula gen", formula_params(a, f),
                          {{"energy_all_ones", formula::energy_all_ones(f)}, {"repeated_variable_clauses", formula::repeated_variable_clauses(f)},
                           {"dimacs", a.dimacs}},
                          wall());
            } else if (*fsub["exact"]) {
                auto f = instance(a, c);
                auto g = formula::exact_gibbs(f, a.beta);
                json params = formula_params(a, f);
                params["beta"] = a.beta;
                em.record("formula exact", params, {{"lnZ", g.lnZ}, {"marginal_plus", g.marginal_plus}, {"energy_hist", g.energy_hist}}, wall());
            } else if (*fsub["cluster"]) {
                auto f = instance(a, c);
                json params = formula_params(a, f);
                params["beta"] = a.beta;
                em.record("formula cluster", params,
                          {{"ln_cluster", formula::cluster_size(f, a.beta)}, {"lnZ", formula::exact_gibbs(f, a.beta).lnZ}}, wall());
            } else if (*fsub["planted"]) {
                json params = {{"n", a.n}, {"k", a.k}, {"d", a.d}, {"beta", a.beta}};
                if (a.planted_trials > 0) {
                    params["trials"] = a.planted_trials;
                    auto s = formula::planted_acceptance(a.n, a.k, a.d, a.beta, a.planted_trials, c.seed);
                    double expect = std::exp(formula::annealed_EZ(a.n, a.k, a.d, a.beta) - a.n * std::log(2.0));
                    em.record("formula planted", params,
                              {{"acceptance_rate", s.rate()}, {"stderr", s.stderr_()}, {"expected_rate", expect},
                               {"mean_energy_accepted", s.mean_energy_accepted}, {"mean_energy_rejected", s.mean_energy_rejected}},
                              wall());
                } else {
                    auto r = formula::planted_sample(a.n, a.k, a.d, a.beta, c.seed);
                    if (!a.dimacs.empty()) {
                        std::ofstream o(resolve(a.dimacs));
                        require(static_cast<bool>(o), "cannot open " + a.dimacs);
                        formula::write_dimacs(o, r.formula);
                    }
                    em.record("formula planted", params, {{"trials", r.trials}, {"energy_all_ones", r.energy}, {"dimacs", a.dimacs}}, wall());
                }
            } else if (*fsub["bp"]) {
                auto f = instance(a, c);
                auto r = formula::loopy_bp(f, a.beta, a.max_iters, a.damping);
                json params = formula_params(a, f);
                params["beta"] = a.beta;
                params["max_iters"] = a.max_iters;
                params["damping"] = a.damping;
                json res = {{"marginal_plus", r.marginal_plus}, {"converged", r.converged}, {"iterations", r.iterations}, {"residual", r.residual}};
                if (r.converged) {
                    std::vector<double> mu = r.marginal_plus;
                    for (double& x : mu) x = std::clamp(x, 1e-15, 1 - 1e-15);
                    res["bethe"] = formula::bethe_free_energy(f, a.beta, mu);
                }
                em.record("formula bp", params, res, wall());
                if (!r.converged) status = kExitNonConvergence;
            } else if (*fsub["core"] || *fsub["sticky"]) {
                auto f = instance(a, c);
                auto core = formula::core(f, a.lambda, a.beta, c.seed);
                json params = formula_params(a, f);
                params["lambda"] = a.lambda;
                params["beta"] = a.beta;
                auto members = [](const std::vector<char>& s) {
                    std::vector<int> v;
                    for (std::size_t i = 0; i < s.size(); ++i)
                        if (s[i]) v.push_back(static_cast<int>(i));
                    return v;
                };
                if (*fsub["core"]) {
                    auto v = members(core);
                    em.record("formula core", params, {{"size", v.size()}, {"members", v}}, wall());
                } else {
                    params["candidates"] = a.candidates;
                    auto cand = a.candidates == "all" ? std::vector<char>(f.n, 1) : core;
                    auto v = members(formula::max_sticky(f, a.lambda, cand, c.seed));
                    em.record("formula sticky", params, {{"size", v.size()}, {"members", v}}, wall());
                }
            } else if (*fsub["annealed"]) {
                double v = formula::annealed_EZ(a.n, a.k, a.d, a.beta, a.theta);
                em.record("formula annealed", {{"n", a.n}, {"k", a.k}, {"d", a.d}, {"beta", a.beta}, {"theta", a.theta}},
                          {{"lnEZ", v}, {"per_variable", v / a.n}}, wall());
            }
        } else if (*pl) {
            auto t = read_table(a.input);
            write_svg(em.os(), t, a);
        }
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPrecondition;
    } catch (const ConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << '\n';
        return kExitNonConvergence;
    }
    return status;
}
