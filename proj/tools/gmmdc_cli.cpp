/*
 *   Copyright 2026 The gmmdc Authors
 *
 *   Licensed under the Apache License, Version 2.0 (the "License");
 *   you may not use this file except in compliance with the License.
 *   You may obtain a copy of the License at
 *
 *       http://www.apache.org/licenses/LICENSE-2.0
 *
 *   Unless required by applicable law or agreed to in writing, software
 *   distributed under the License is distributed on an "AS IS" BASIS,
 *   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *   See the License for the specific language governing permissions and
 *   limitations under the License.
 */
// gmmdc command line front end. Talks to the library only through gmmdc.h.

#include <gmmdc/gmmdc.h>

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using nlohmann::ordered_json;

namespace {

constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;
constexpr const char* kSchema = "gmm-dc/1";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Failure {
    int exit_code;
    std::string message;
};

[[noreturn]] void data_error(const std::string& msg) { throw Failure{kExitData, msg}; }

void check(gmmdc_status s, const char* what) {
    if (s == GMMDC_OK) return;
    std::string msg = std::string(what) + ": " + gmmdc_status_name(s) + ": " + gmmdc_last_error();
    const double cond = gmmdc_last_error_condition();
    if (cond > 0.0) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " (condition number %.3e)", cond);
        msg += buf;
    }
    throw Failure{gmmdc_status_is_numerical(s) ? kExitNumerical : kExitData, msg};
}

struct SystemDeleter {
    void operator()(gmmdc_system* p) const { gmmdc_system_free(p); }
};
struct FitDeleter {
    void operator()(gmmdc_fit* p) const { gmmdc_fit_free(p); }
};
struct ReportDeleter {
    void operator()(gmmdc_report* p) const { gmmdc_report_free(p); }
};
using SystemPtr = std::unique_ptr<gmmdc_system, SystemDeleter>;
using FitPtr = std::unique_ptr<gmmdc_fit, FitDeleter>;
using ReportPtr = std::unique_ptr<gmmdc_report, ReportDeleter>;

int default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && ws(static_cast<unsigned char>(s[b]))) ++b;
    s.erase(0, b);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

// ---- CSV ------------------------------------------------------------------

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

    const std::vector<double>& column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) data_error("column '" + name + "' not found in data");
        return columns[static_cast<std::size_t>(it - header.begin())];
    }
};

double parse_cell(const std::string& cell, std::size_t line, const std::string& col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
        data_error("line " + std::to_string(line) + ", column '" + col + "': non-numeric cell '" + cell + "'");
    return v;
}

Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) data_error("cannot open " + path);
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        if (t.header.empty()) {
            for (auto& c : cells) t.header.push_back(trim(c));
            t.columns.resize(t.header.size());
            continue;
        }
        if (cells.size() != t.header.size())
            data_error("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " cells, found " + std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j)
            t.columns[j].push_back(parse_cell(trim(cells[j]), lineno, t.header[j]));
    }
    if (t.header.empty()) data_error(path + ": missing header row");
    if (t.rows() == 0) data_error(path + ": no data rows");
    return t;
}

// ---- shared helpers ----------------------------------------------------------

gmmdc_estimator parse_estimator(const std::string& s) {
    if (s == "one-step") return GMMDC_ONE_STEP;
    if (s == "two-step") return GMMDC_TWO_STEP;
    if (s == "iterated") return GMMDC_ITERATED;
    data_error("unknown estimator '" + s + "'");
}

const char* estimator_name(int e) {
    static const char* names[] = {"one-step", "two-step", "iterated"};
    return names[e];
}

std::array<int, 3> parse_estimator_set(const std::string& list) {
    std::array<int, 3> on{0, 0, 0};
    for (const auto& s : split(list, ',')) on[static_cast<std::size_t>(parse_estimator(trim(s)))] = 1;
    return on;
}

ordered_json matrix_json(const std::vector<double>& m, std::size_t k) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < k; ++i)
        rows.push_back(std::vector<double>(m.begin() + static_cast<long>(i * k), m.begin() + static_cast<long>((i + 1) * k)));
    return rows;
}

// NaN prints as a blank cell.
std::string cell(double v, int width = 10, int prec = 4) {
    char buf[64];
    if (std::isnan(v))
        std::snprintf(buf, sizeof buf, "%*s", width, "");
    else
        std::snprintf(buf, sizeof buf, "%*.*f", width, prec, v);
    return buf;
}

// ---- estimate ---------------------------------------------------------------

struct EstimateOptions {
    std::string data;
    std::string y, x, z;
    std::string id = "id", time = "time";
    std::string mode = "predetermined";
    std::string estimator = "two-step";
    std::string weight = "data";
    std::string se = "dc";
    bool centered = false;
    double tol = 1e-8;
    int max_iter = 1000;
    std::vector<std::string> bootstrap;
    std::uint64_t seed = 1;
    std::string nulls = "0";
    int threads = 0;
    bool json = false;
};

struct Model {
    SystemPtr sys;
    std::vector<std::string> names;
    std::string kind;
};

Model build_iv(const EstimateOptions& o, const Table& t) {
    if (o.y.empty() || o.x.empty() || o.z.empty()) data_error("iv needs --y, --x and --z");
    const auto xs = split(o.x, ','), zs = split(o.z, ',');
    const std::size_t n = t.rows(), k = xs.size(), q = zs.size();
    std::vector<double> y = t.column(trim(o.y)), X(n * k), Z(n * q);
    for (std::size_t j = 0; j < k; ++j) {
        const auto& c = t.column(trim(xs[j]));
        for (std::size_t i = 0; i < n; ++i) X[i * k + j] = c[i];
    }
    for (std::size_t j = 0; j < q; ++j) {
        const auto& c = t.column(trim(zs[j]));
        for (std::size_t i = 0; i < n; ++i) Z[i * q + j] = c[i];
    }
    gmmdc_system* s = nullptr;
    check(gmmdc_system_iv(y.data(), X.data(), Z.data(), n, k, q, &s), "building IV moments");
    Model m{SystemPtr(s), {}, "iv"};
    for (const auto& x : xs) m.names.push_back(trim(x));
    return m;
}

Model build_panel(const EstimateOptions& o, const Table& t) {
    gmmdc_panel_mode mode;
    if (o.mode == "predetermined" || o.mode == "predetermined-x")
        mode = GMMDC_PANEL_PREDETERMINED;
    else if (o.mode == "ar1")
        mode = GMMDC_PANEL_AR1;
    else
        data_error("unknown panel mode '" + o.mode + "'");
    if (o.y.empty()) data_error("panel needs --y");
    if (mode == GMMDC_PANEL_PREDETERMINED && o.x.empty()) data_error("predetermined panels need --x");

    const auto& ids = t.column(o.id);
    const auto& times = t.column(o.time);
    const auto& yc = t.column(o.y);
    const std::vector<double>* xc = mode == GMMDC_PANEL_PREDETERMINED ? &t.column(o.x) : nullptr;

    std::map<double, std::size_t> id_index, time_index;
    for (double v : ids) id_index.emplace(v, 0);
    for (double v : times) time_index.emplace(v, 0);
    std::size_t c = 0;
    for (auto& [key, idx] : id_index) idx = c++;
    c = 0;
    for (auto& [key, idx] : time_index) idx = c++;
    const std::size_t N = id_index.size(), T = time_index.size();
    if (t.rows() != N * T)
        data_error("unbalanced panel: " + std::to_string(t.rows()) + " rows for " + std::to_string(N) +
                   " individuals and " + std::to_string(T) + " periods");

    std::vector<double> y(N * T, kNaN), x(xc ? N * T : 0, kNaN);
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const std::size_t cellpos = id_index[ids[r]] * T + time_index[times[r]];
        if (!std::isnan(y[cellpos])) data_error("duplicate (id, time) pair in data row " + std::to_string(r + 1));
        y[cellpos] = yc[r];
        if (xc) x[cellpos] = (*xc)[r];
    }
    gmmdc_system* s = nullptr;
    check(gmmdc_system_panel(y.data(), xc ? x.data() : nullptr, N, T, mode, &s), "building panel moments");
    Model m{SystemPtr(s), {}, "panel"};
    m.names.push_back(mode == GMMDC_PANEL_PREDETERMINED ? o.x : "L." + o.y);
    return m;
}

gmmdc_plan make_plan(const EstimateOptions& o) {
    gmmdc_plan plan;
    gmmdc_plan_default(&plan);
    plan.estimator = parse_estimator(o.estimator);
    if (o.weight == "data")
        plan.weight = GMMDC_WEIGHT_DATA_AVERAGE;
    else if (o.weight == "identity")
        plan.weight = GMMDC_WEIGHT_IDENTITY;
    else
        data_error("unknown weight '" + o.weight + "'");
    plan.centered = o.centered ? 1 : 0;
    plan.tol = o.tol;
    plan.max_iter = o.max_iter;
    return plan;
}

gmmdc_se_kind parse_se(const std::string& s) {
    if (s == "conv") return GMMDC_SE_CONV;
    if (s == "w") return GMMDC_SE_W;
    if (s == "dc") return GMMDC_SE_DC;
    data_error("unknown standard error kind '" + s + "' (conv, w, dc)");
}

std::vector<double> null_values(const std::string& spec, std::size_t k) {
    const auto parts = split(spec, ',');
    std::vector<double> out;
    for (const auto& p : parts) out.push_back(parse_cell(trim(p), 0, "--null"));
    if (out.size() == 1) out.assign(k, out.front());
    if (out.size() != k) data_error("--null needs one value or one per coefficient");
    return out;
}

int bootstrap_B(const EstimateOptions& o) {
    if (o.bootstrap.empty() || o.bootstrap.front().empty() || o.bootstrap.front() == "0") return 999;
    return static_cast<int>(parse_cell(o.bootstrap.front(), 0, "--bootstrap"));
}

int cmd_estimate(const EstimateOptions& o, bool panel, bool want_bootstrap) {
    const Table data = read_csv(o.data);
    const Model model = panel ? build_panel(o, data) : build_iv(o, data);
    const gmmdc_plan plan = make_plan(o);
    const gmmdc_se_kind se_kind = parse_se(o.se);

    std::size_t n = 0, q = 0, k = 0;
    check(gmmdc_system_dims(model.sys.get(), &n, &q, &k), "reading dimensions");
    gmmdc_fit* fp = nullptr;
    check(gmmdc_fit_new(model.sys.get(), &plan, &fp), "estimating");
    const FitPtr fit(fp);
    gmmdc_report* rp = nullptr;
    check(gmmdc_report_new(model.sys.get(), fit.get(), &rp), "computing variances");
    const ReportPtr report(rp);

    std::vector<double> theta(k), g_n(q);
    check(gmmdc_fit_theta(fit.get(), theta.data(), k), "reading estimates");
    check(gmmdc_fit_g_n(fit.get(), g_n.data(), q), "reading moments");
    std::vector<double> se_conv(k), se_w(k, kNaN), se_dc(k);
    check(gmmdc_report_se(report.get(), GMMDC_SE_CONV, se_conv.data(), k), "reading standard errors");
    check(gmmdc_report_se(report.get(), GMMDC_SE_DC, se_dc.data(), k), "reading standard errors");
    const bool just_identified = q == k;
    if (gmmdc_report_has(report.get(), GMMDC_V_W))
        check(gmmdc_report_se(report.get(), GMMDC_SE_W, se_w.data(), k), "reading standard errors");
    else if (just_identified)
        se_w = se_conv;
    if (se_kind == GMMDC_SE_W && !gmmdc_report_has(report.get(), GMMDC_V_W) && !just_identified)
        data_error("the Windmeijer variance is not defined for one-step fits");

    const auto nulls = null_values(o.nulls, k);
    std::vector<gmmdc_test_result> tests(k);
    for (std::size_t j = 0; j < k; ++j) {
        const gmmdc_se_kind kind = se_kind == GMMDC_SE_W && just_identified ? GMMDC_SE_CONV : se_kind;
        check(gmmdc_t_test(fit.get(), report.get(), kind, j, nulls[j], &tests[j]), "t test");
    }

    ordered_json out;
    out["schema"] = kSchema;
    out["command"] = "estimate";
    out["model"] = model.kind;
    out["estimator"] = o.estimator;
    out["weight"] = o.weight;
    out["centered"] = o.centered;
    out["n"] = n;
    out["q"] = q;
    out["k"] = k;
    out["converged"] = gmmdc_fit_converged(fit.get()) != 0;
    out["iterations"] = gmmdc_fit_iterations(fit.get());
    out["se_kind"] = o.se;
    ordered_json coefs = ordered_json::array();
    for (std::size_t j = 0; j < k; ++j) {
        ordered_json c;
        c["name"] = model.names[j];
        c["estimate"] = theta[j];
        c["se_conv"] = se_conv[j];
        c["se_w"] = se_w[j];
        c["se_dc"] = se_dc[j];
        c["null"] = nulls[j];
        c["t"] = tests[j].statistic;
        c["p"] = tests[j].p_value;
        c["ci_lower"] = tests[j].ci_lower;
        c["ci_upper"] = tests[j].ci_upper;
        coefs.push_back(c);
    }
    out["coefficients"] = coefs;
    out["g_n"] = g_n;

    ordered_json var;
    const std::pair<gmmdc_matrix_id, const char*> mats[] = {{GMMDC_V_CONV, "V_conv"}, {GMMDC_V_W, "V_w"},
                                                            {GMMDC_V_DC, "V_dc"},     {GMMDC_D_HAT, "D_hat"},
                                                            {GMMDC_SIGMA_N, "Sigma_n"}, {GMMDC_C_HAT, "C_hat"}};
    for (const auto& [id, name] : mats) {
        if (!gmmdc_report_has(report.get(), id)) {
            var[name] = nullptr;
            continue;
        }
        std::vector<double> m(k * k);
        check(gmmdc_report_matrix(report.get(), id, m.data(), m.size()), "reading variance matrices");
        var[name] = matrix_json(m, k);
    }
    out["variance"] = var;

    gmmdc_test_result j{};
    const char* j_note = nullptr;
    if (just_identified) {
        j_note = "model is just identified (q = k); J test not defined";
        out["j_test"] = nullptr;
        out["j_note"] = j_note;
    } else {
        check(gmmdc_j_test(model.sys.get(), fit.get(), &j), "J test");
        out["j_test"] = {{"statistic", j.statistic}, {"df", j.df}, {"p", j.p_value}, {"reject_5pct", j.reject_5pct != 0}};
    }

    ordered_json warnings = ordered_json::array();
    for (std::size_t i = 0; i < gmmdc_report_warning_count(report.get()); ++i)
        warnings.push_back(gmmdc_report_warning(report.get(), i));

    std::vector<gmmdc_bootstrap_result> boots;
    if (want_bootstrap) {
        const int B = bootstrap_B(o);
        const int threads = o.threads > 0 ? o.threads : default_threads();
        ordered_json bj = ordered_json::array();
        for (std::size_t c = 0; c < k; ++c) {
            gmmdc_bootstrap_result b{};
            check(gmmdc_bootstrap(model.sys.get(), &plan, c, B, o.seed, nulls[c], threads, &b, nullptr),
                  "bootstrap");
            boots.push_back(b);
            bj.push_back({{"name", model.names[c]},
                          {"B", b.B},
                          {"seed", o.seed},
                          {"t", b.t_original},
                          {"crit_abs", b.crit_abs},
                          {"reject_5pct", b.reject_5pct != 0},
                          {"failures", b.failures}});
            if (b.reliability_warning) warnings.push_back("bootstrap for " + model.names[c] + ": many resamples failed");
        }
        out["bootstrap"] = bj;
    }
    out["warnings"] = warnings;

    if (o.json) {
        std::cout << out.dump(2) << "\n";
        return 0;
    }

    std::printf("%s GMM (%s), n = %zu, q = %zu, k = %zu%s\n", o.estimator.c_str(), model.kind.c_str(), n, q, k,
                o.centered ? ", centered weight" : "");
    std::printf("%-12s %10s %10s %10s %10s %10s %10s %10s %10s\n", "", "estimate", "se_conv", "se_w", "se_dc",
                ("t_" + o.se).c_str(), "p", "ci_lower", "ci_upper");
    for (std::size_t c = 0; c < k; ++c)
        std::printf("%-12s%s%s%s%s%s%s%s%s\n", model.names[c].c_str(), cell(theta[c], 11).c_str(),
                    cell(se_conv[c]).c_str(), cell(se_w[c]).c_str(), cell(se_dc[c]).c_str(),
                    cell(tests[c].statistic).c_str(), cell(tests[c].p_value).c_str(), cell(tests[c].ci_lower).c_str(),
                    cell(tests[c].ci_upper).c_str());
    if (j_note)
        std::printf("J: %s\n", j_note);
    else
        std::printf("J = %.4f, df = %d, p = %.4f\n", j.statistic, j.df, j.p_value);
    for (std::size_t c = 0; c < boots.size(); ++c)
        std::printf("bootstrap %s: B = %d, |t| = %.4f, 95%% critical value = %.4f, %s, %d failed resamples\n",
                    model.names[c].c_str(), boots[c].B, std::fabs(boots[c].t_original), boots[c].crit_abs,
                    boots[c].reject_5pct ? "reject" : "do not reject", boots[c].failures);
    for (const auto& w : warnings) std::printf("warning: %s\n", w.get<std::string>().c_str());
    return 0;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateOptions {
    std::string config;
    std::string design = "iv";
    std::size_t n = 500;
    std::size_t T = 4;
    double alpha0 = 0.0;
    int reps = 1000;
    std::uint64_t seed = 1;
    int threads = 0;
    int bootstrap_B = 0;
    std::string estimators = "one-step,two-step,iterated";
    std::string bootstrap_estimators = "one-step,two-step";
    bool fixed_misspec = false;
    bool centered = false;
    bool json = false;
    bool quiet = false;
};

gmmdc_design parse_design(const std::string& s) {
    if (s == "iv") return GMMDC_DESIGN_IV;
    if (s == "panel-rc") return GMMDC_DESIGN_PANEL_RC;
    if (s == "panel-lag") return GMMDC_DESIGN_PANEL_LAG;
    data_error("unknown design '" + s + "' (iv, panel-rc, panel-lag)");
}

// Values from a JSON config file fill in options not given on the command line.
void apply_config(SimulateOptions& o, const CLI::App& cmd) {
    if (o.config.empty()) return;
    std::ifstream in(o.config);
    if (!in) data_error("cannot open " + o.config);
    nlohmann::json cfg;
    try {
        in >> cfg;
    } catch (const nlohmann::json::exception& e) {
        data_error(o.config + ": " + e.what());
    }
    if (!cfg.is_object()) data_error(o.config + ": expected a JSON object");
    auto take = [&](const char* key, const char* flag, auto& field) {
        if (!cfg.contains(key) || cmd.count(flag) > 0) return;
        try {
            cfg.at(key).get_to(field);
        } catch (const nlohmann::json::exception&) {
            data_error(o.config + ": bad value for '" + key + "'");
        }
    };
    for (const auto& [key, v] : cfg.items()) {
        static const char* known[] = {"design", "n", "N", "T", "alpha0", "reps", "seed", "threads", "bootstrap_B",
                                      "estimators", "bootstrap_estimators", "fixed_misspec", "centered"};
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
            data_error(o.config + ": unknown key '" + key + "'");
    }
    take("design", "--design", o.design);
    take("n", "--n", o.n);
    take("N", "--n", o.n);
    take("T", "--T", o.T);
    take("alpha0", "--alpha0", o.alpha0);
    take("reps", "--reps", o.reps);
    take("seed", "--seed", o.seed);
    take("threads", "--threads", o.threads);
    take("bootstrap_B", "--bootstrap-B", o.bootstrap_B);
    take("fixed_misspec", "--fixed-misspec", o.fixed_misspec);
    take("centered", "--centered", o.centered);
    if (cfg.contains("estimators") && cmd.count("--estimators") == 0 && cfg["estimators"].is_array()) {
        o.estimators.clear();
        for (const auto& e : cfg["estimators"]) o.estimators += (o.estimators.empty() ? "" : ",") + e.get<std::string>();
    }
    if (cfg.contains("bootstrap_estimators") && cmd.count("--bootstrap-estimators") == 0 &&
        cfg["bootstrap_estimators"].is_array()) {
        o.bootstrap_estimators.clear();
        for (const auto& e : cfg["bootstrap_estimators"])
            o.bootstrap_estimators += (o.bootstrap_estimators.empty() ? "" : ",") + e.get<std::string>();
    }
}

struct Progress {
    bool quiet;
    int last_decile = -1;
};

void report_progress(int done, int total, void* user) {
    auto* p = static_cast<Progress*>(user);
    if (p->quiet || total <= 0) return;
    const int decile = static_cast<int>(10LL * done / total);
    if (decile == p->last_decile) return;
    p->last_decile = decile;
    std::fprintf(stderr, "simulate: %d/%d replications\n", done, total);
}

int cmd_simulate(SimulateOptions& o, const CLI::App& cmd) {
    apply_config(o, cmd);
    gmmdc_study_config cfg;
    gmmdc_study_config_default(&cfg);
    cfg.design = parse_design(o.design);
    cfg.n = o.n;
    cfg.T = o.T;
    cfg.alpha0 = o.alpha0;
    cfg.replications = o.reps;
    cfg.seed = o.seed;
    cfg.bootstrap_B = o.bootstrap_B;
    cfg.fixed_misspec = o.fixed_misspec ? 1 : 0;
    cfg.centered = o.centered ? 1 : 0;
    const auto est = parse_estimator_set(o.estimators);
    const auto best = parse_estimator_set(o.bootstrap_estimators);
    std::copy(est.begin(), est.end(), cfg.estimators);
    std::copy(best.begin(), best.end(), cfg.bootstrap_estimators);

    const int threads = o.threads > 0 ? o.threads : default_threads();
    Progress progress{o.quiet};
    gmmdc_study_summary s{};
    const gmmdc_status st = gmmdc_run_study(&cfg, threads, report_progress, &progress, &s);
    if (st == GMMDC_E_ALL_REPLICATIONS_FAILED) throw Failure{kExitNumerical, gmmdc_last_error()};
    check(st, "simulation");

    const bool panel = cfg.design != GMMDC_DESIGN_IV;
    ordered_json out;
    out["schema"] = kSchema;
    out["command"] = "simulate";
    out["config"] = {{"design", o.design},
                     {panel ? "N" : "n", o.n},
                     {"T", panel ? ordered_json(o.T) : ordered_json(nullptr)},
                     {"alpha0", o.alpha0},
                     {"reps", o.reps},
                     {"seed", o.seed},
                     {"bootstrap_B", o.bootstrap_B},
                     {"fixed_misspec", o.fixed_misspec},
                     {"centered", o.centered}};
    out["truth"] = s.truth;
    out["completed"] = s.completed;
    out["failures"] = s.failures;
    out["sd_defined"] = s.sd_defined != 0;
    out["failure_flag"] = s.failure_flag != 0;
    ordered_json ests = ordered_json::object();
    for (int e = 0; e < 3; ++e) {
        const auto& r = s.estimators[e];
        if (!r.present) continue;
        ests[estimator_name(e)] = {{"mean", r.mean_theta},      {"sd", r.sd_theta},          {"se", r.mean_se_conv},
                                   {"se_w", r.mean_se_w},       {"se_dc", r.mean_se_dc},     {"rej_conv", r.rej_conv},
                                   {"rej_w", r.rej_w},          {"rej_dc", r.rej_dc},        {"rej_boot", r.rej_boot},
                                   {"rej_j", r.rej_j}};
    }
    out["estimators"] = ests;

    if (o.json) {
        std::cout << out.dump(2) << "\n";
        return 0;
    }

    std::printf("design %s, %s = %zu%s, alpha0 = %g%s, seed %llu\n", o.design.c_str(), panel ? "N" : "n", o.n,
                panel ? (", T = " + std::to_string(o.T)).c_str() : "", o.alpha0,
                o.fixed_misspec ? " (fixed misspecification)" : "", static_cast<unsigned long long>(o.seed));
    std::printf("replications %d completed, %d failed%s; true theta = %g\n", s.completed, s.failures,
                s.failure_flag ? " (failure rate above 0.1%)" : "", s.truth);
    std::printf("%-10s", "");
    for (int e = 0; e < 3; ++e)
        if (s.estimators[e].present) std::printf("%11s", estimator_name(e));
    std::printf("\n");
    const std::pair<const char*, double gmmdc_estimator_summary::*> rows[] = {
        {"mean", &gmmdc_estimator_summary::mean_theta}, {"sd", &gmmdc_estimator_summary::sd_theta},
        {"se", &gmmdc_estimator_summary::mean_se_conv}, {"se_w", &gmmdc_estimator_summary::mean_se_w},
        {"se_dc", &gmmdc_estimator_summary::mean_se_dc}, {"rej_conv", &gmmdc_estimator_summary::rej_conv},
        {"rej_w", &gmmdc_estimator_summary::rej_w},     {"rej_dc", &gmmdc_estimator_summary::rej_dc},
        {"rej_boot", &gmmdc_estimator_summary::rej_boot}, {"rej_J", &gmmdc_estimator_summary::rej_j}};
    for (const auto& [label, field] : rows) {
        if (field == &gmmdc_estimator_summary::rej_boot && o.bootstrap_B <= 0) continue;
        std::printf("%-10s", label);
        for (int e = 0; e < 3; ++e)
            if (s.estimators[e].present) std::printf("%s", cell(s.estimators[e].*field, 11).c_str());
        std::printf("\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear GMM estimation with conventional, Windmeijer and doubly corrected standard errors"};
    app.require_subcommand(1);
    app.set_version_flag("--version", gmmdc_version());

    EstimateOptions eo;
    auto* estimate = app.add_subcommand("estimate", "Estimate a model from CSV data");
    estimate->require_subcommand(1);
    auto* iv = estimate->add_subcommand("iv", "Linear IV moments; wide CSV");
    auto* panel = estimate->add_subcommand("panel", "First-differenced dynamic panel; long CSV (id,time,y,x)");
    CLI::Option* boot_opt = nullptr;
    for (auto* sub : {iv, panel}) {
        sub->add_option("--data", eo.data, "CSV file with a header row")->required();
        sub->add_option("--y", eo.y, "Outcome column")->required();
        sub->add_option("--estimator", eo.estimator, "one-step, two-step or iterated")->capture_default_str();
        sub->add_option("--weight", eo.weight, "Initial weight: data or identity")->capture_default_str();
        sub->add_flag("--centered", eo.centered, "Center moments in the efficient weight");
        sub->add_option("--tol", eo.tol, "Iterated GMM tolerance")->capture_default_str();
        sub->add_option("--max-iter", eo.max_iter, "Iterated GMM iteration cap")->capture_default_str();
        sub->add_option("--se", eo.se, "Standard error for t, p and CI: conv, w or dc")->capture_default_str();
        sub->add_option("--null", eo.nulls, "Null value(s), one or comma separated per coefficient")
            ->capture_default_str();
        auto* b = sub->add_option("--bootstrap", eo.bootstrap, "Run the MR bootstrap with B draws (default 999)")
                      ->expected(0, 1);
        if (sub == iv) boot_opt = b;
        sub->add_option("--seed", eo.seed, "Bootstrap seed")->capture_default_str();
        sub->add_option("--threads", eo.threads, "Bootstrap worker threads")->envname("GMMDC_THREADS");
        sub->add_flag("--json", eo.json, "Print JSON instead of a table");
    }
    iv->add_option("--x", eo.x, "Regressor columns, comma separated")->required();
    iv->add_option("--z", eo.z, "Instrument columns, comma separated")->required();
    panel->add_option("--x", eo.x, "Regressor column (predetermined mode)");
    panel->add_option("--id", eo.id, "Individual column")->capture_default_str();
    panel->add_option("--time", eo.time, "Period column")->capture_default_str();
    panel->add_option("--mode", eo.mode, "predetermined or ar1")->capture_default_str();

    SimulateOptions so;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study");
    simulate->add_option("--config", so.config, "JSON file with study settings; flags take precedence");
    simulate->add_option("--design", so.design, "iv, panel-rc or panel-lag")->capture_default_str();
    simulate->add_option("--n,--N", so.n, "Observations (iv) or individuals (panels)")->capture_default_str();
    simulate->add_option("--T", so.T, "Periods (panels)")->capture_default_str();
    simulate->add_option("--alpha0", so.alpha0, "Misspecification strength")->capture_default_str();
    simulate->add_option("--reps", so.reps, "Replications")->capture_default_str();
    simulate->add_option("--seed", so.seed, "Master seed")->capture_default_str();
    simulate->add_option("--threads", so.threads, "Worker threads (default: all cores)")->envname("GMMDC_THREADS");
    simulate->add_option("--bootstrap-B", so.bootstrap_B, "Bootstrap draws per replication (0 = off)")
        ->capture_default_str();
    simulate->add_option("--estimators", so.estimators, "Comma separated estimators")->capture_default_str();
    simulate->add_option("--bootstrap-estimators", so.bootstrap_estimators, "Estimators to bootstrap")
        ->capture_default_str();
    simulate->add_flag("--fixed-misspec", so.fixed_misspec, "Hold misspecification fixed instead of local");
    simulate->add_flag("--centered", so.centered, "Centered efficient weight");
    simulate->add_flag("--json", so.json, "Print JSON instead of a table");
    simulate->add_flag("-q,--quiet", so.quiet, "No progress on standard error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitData;
    }

    try {
        if (*iv || *panel) {
            const bool boot = (*iv ? boot_opt->count() : panel->get_option("--bootstrap")->count()) > 0;
            return cmd_estimate(eo, panel->parsed(), boot);
        }
        return cmd_simulate(so, *simulate);
    } catch (const Failure& f) {
        std::fprintf(stderr, "gmmdc: %s\n", f.message.c_str());
        return f.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "gmmdc: %s\n", e.what());
        return kExitData;
    }
}
