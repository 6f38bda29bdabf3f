// tk — simulation and verification toolkit for the Togashi-Kaneko reaction
// network: exact CTMC simulation, constrained Langevin integration, the 1D
// reduced model with exit-time quadrature, ensemble statistics and the
// identity-verification suites.
//
// Exit codes: 0 success, 1 runtime error, 2 configuration error,
// 3 verification failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tk/cla.hpp"
#include "tk/ensemble.hpp"
#include "tk/export.hpp"
#include "tk/hitting.hpp"
#include "tk/model.hpp"
#include "tk/params.hpp"
#include "tk/ssa.hpp"
#include "tk/stats.hpp"
#include "tk/studies.hpp"
#include "tk/verify.hpp"

using json = nlohmann::ordered_json;
using namespace tk;

namespace {

// ----------------------------------------------------------------------------
// Option handling: `--key value` flags over `key = value` config-file lines;
// flags win. Unknown keys are errors, reported with their source.
// ----------------------------------------------------------------------------

struct Options {
    std::map<std::string, std::string> values;   // resolved key -> value
    std::map<std::string, std::string> sources;  // key -> "flag" or "file:line"
    mutable std::map<std::string, std::string> accessed;  // echoed config

    bool has(const std::string& key) const { return values.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& def) const {
        auto it = values.find(key);
        const std::string v = it == values.end() ? def : it->second;
        accessed[key] = v;
        return v;
    }
    std::string require_str(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw config_error("missing required option --" + key);
        accessed[key] = it->second;
        return it->second;
    }
    double get_double(const std::string& key, double def) const {
        auto it = values.find(key);
        if (it == values.end()) {
            accessed[key] = fmt_short(def);
            return def;
        }
        return parse_double(key, it->second);
    }
    double require_double(const std::string& key) const {
        return parse_double(key, require_str(key));
    }
    long long get_int(const std::string& key, long long def) const {
        auto it = values.find(key);
        if (it == values.end()) {
            accessed[key] = std::to_string(def);
            return def;
        }
        return parse_int(key, it->second);
    }
    bool get_bool(const std::string& key, bool def) const {
        auto it = values.find(key);
        if (it == values.end()) {
            accessed[key] = def ? "true" : "false";
            return def;
        }
        const std::string& v = it->second;
        accessed[key] = v;
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw config_error("option --" + key + " expects a boolean, got '" + v + "' (" +
                           source(key) + ")");
    }
    std::vector<double> get_list(const std::string& key) const {
        std::vector<double> out;
        if (!has(key)) return out;
        const std::string v = require_str(key);
        std::istringstream in(v);
        std::string cell;
        while (std::getline(in, cell, ',')) out.push_back(parse_double(key, cell));
        return out;
    }

    void reject_unknown() const {
        for (const auto& [k, v] : values)
            if (!accessed.count(k))
                throw config_error("unknown option '" + k + "' (" + source(k) + ")");
    }

  private:
    std::string source(const std::string& key) const {
        auto it = sources.find(key);
        return it == sources.end() ? "unknown source" : it->second;
    }
    double parse_double(const std::string& key, const std::string& v) const {
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            accessed[key] = v;
            return d;
        } catch (const std::exception&) {
            throw config_error("option --" + key + " expects a number, got '" + v + "' (" +
                               source(key) + ")");
        }
    }
    long long parse_int(const std::string& key, const std::string& v) const {
        try {
            std::size_t pos = 0;
            const long long i = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            accessed[key] = v;
            return i;
        } catch (const std::exception&) {
            throw config_error("option --" + key + " expects an integer, got '" + v + "' (" +
                               source(key) + ")");
        }
    }
};

void load_config_file(Options& opt, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot read config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
        if (!opt.values.count(key)) {  // flags already present win
            opt.values[key] = val;
            opt.sources[key] = path + ":" + std::to_string(lineno);
        }
    }
}

Options parse_args(int argc, char** argv, int first) {
    Options opt;
    std::string config_file;
    for (int i = first; i < argc; ++i) {
        std::string a = argv[i];
        if (a.rfind("--", 0) != 0)
            throw config_error("expected --option, got '" + a + "'");
        a = a.substr(2);
        std::string val;
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            val = a.substr(eq + 1);
            a = a.substr(0, eq);
        } else if (i + 1 < argc && std::string(argv[i + 1]).rfind("--", 0) != 0) {
            val = argv[++i];
        } else {
            val = "true";  // bare flag
        }
        if (a == "config") {
            config_file = val;
            continue;
        }
        opt.values[a] = val;
        opt.sources[a] = "flag";
    }
    if (!config_file.empty()) load_config_file(opt, config_file);
    return opt;
}

// Experiment keys echoed for reproducibility; execution/output knobs are not.
const std::set<std::string> kNoEcho = {"threads", "out", "events-out", "outdir"};

std::string config_comment_block(const Options& opt, const std::string& sub) {
    std::ostringstream s;
    s << "tk " << sub << "\n";
    for (const auto& [k, v] : opt.accessed)
        if (!kNoEcho.count(k)) s << k << " = " << v << "\n";
    return s.str();
}

json config_json(const Options& opt, const std::string& sub) {
    json c;
    c["subcommand"] = sub;
    for (const auto& [k, v] : opt.accessed)
        if (!kNoEcho.count(k)) c[k] = v;
    return c;
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-")
        std::fwrite(content.data(), 1, content.size(), stdout);
    else
        write_text_file(out_path, content);
}

ModelParams params_from(const Options& opt, int default_d) {
    const auto p = derive_params(static_cast<int>(opt.get_int("d", default_d)),
                                 opt.get_double("V", 64.0), opt.get_double("kappa", 1.0),
                                 opt.require_double("lambda"), opt.require_double("delta"));
    // flags carry the primed rates; the raw jump rates are echoed alongside
    opt.accessed["raw-kappa"] = fmt_short(p.kappa);
    opt.accessed["raw-lambda"] = fmt_short(p.lambda);
    opt.accessed["raw-delta"] = fmt_short(p.delta);
    return p;
}

CountVec initial_counts(const Options& opt, const ModelParams& p) {
    const auto init = opt.get_list("init");
    CountVec n0(p.d, 0);
    if (init.empty()) {
        n0[p.d - 1] = static_cast<std::int64_t>(std::llround(p.d * p.V));
    } else {
        if (static_cast<int>(init.size()) != p.d)
            throw config_error("--init needs exactly d entries");
        for (int i = 0; i < p.d; ++i) {
            if (init[i] < 0) throw config_error("--init entries must be >= 0");
            n0[i] = static_cast<std::int64_t>(std::llround(init[i]));
        }
    }
    return n0;
}

Vec initial_conc(const Options& opt, const ModelParams& p) {
    const auto init = opt.get_list("init");
    Vec x0(p.d, 0.0);
    if (init.empty()) {
        x0[p.d - 1] = static_cast<double>(p.d);
    } else {
        if (static_cast<int>(init.size()) != p.d)
            throw config_error("--init needs exactly d entries");
        for (int i = 0; i < p.d; ++i) {
            if (init[i] < 0) throw config_error("--init entries must be >= 0");
            x0[i] = init[i];
        }
    }
    return x0;
}

// ----------------------------------------------------------------------------
// Subcommands
// ----------------------------------------------------------------------------

int cmd_ctmc(const Options& opt) {
    auto p = params_from(opt, 2);
    const double t_end = opt.require_double("t-end");
    const auto seed = static_cast<std::uint64_t>(opt.get_int("seed", 0));
    const double sample_dt = opt.get_double("sample-dt", t_end / 5000.0);
    auto n0 = initial_counts(opt, p);
    const std::string format = opt.get_str("format", "csv");
    const std::string out = opt.get_str("out", "-");
    opt.reject_unknown();

    PathRecorder rec(p.d, sample_dt);
    simulate_ctmc(p, std::move(n0), t_end, seed, rec);

    if (format == "svg") {
        emit(out, svg_trajectory(rec.path, "ctmc trajectory"));
    } else if (format == "csv") {
        CsvWriter w;
        std::istringstream hdr(config_comment_block(opt, "ctmc"));
        std::string line;
        while (std::getline(hdr, line)) w.comment(line);
        write_path_csv(w, rec.path, false);
        emit(out, w.str());
    } else {
        throw config_error("unsupported format '" + format + "' for ctmc (csv|svg)");
    }
    return 0;
}

int cmd_cla(const Options& opt) {
    auto p = params_from(opt, 2);
    const double t_end = opt.require_double("t-end");
    const double dt = opt.get_double("dt", 1e-3);
    const auto seed = static_cast<std::uint64_t>(opt.get_int("seed", 0));
    const double sample_dt = opt.get_double("sample-dt", t_end / 5000.0);
    auto x0 = initial_conc(opt, p);
    const std::string format = opt.get_str("format", "csv");
    const std::string out = opt.get_str("out", "-");
    opt.reject_unknown();

    PathRecorder rec(p.d, sample_dt);
    simulate_cla(p, std::move(x0), t_end, dt, seed, rec);

    if (format == "svg") {
        emit(out, svg_trajectory(rec.path, "cla trajectory"));
    } else if (format == "csv") {
        CsvWriter w;
        std::istringstream hdr(config_comment_block(opt, "cla"));
        std::string line;
        while (std::getline(hdr, line)) w.comment(line);
        write_path_csv(w, rec.path, true);
        emit(out, w.str());
    } else {
        throw config_error("unsupported format '" + format + "' for cla (csv|svg)");
    }
    return 0;
}

int cmd_cla1d(const Options& opt) {
    Cla1dParams q;
    q.V = opt.get_double("V", 64.0);
    q.kappa_p = opt.get_double("kappa", 1.0);
    q.lambda_p = opt.require_double("lambda");
    q.delta_p = opt.require_double("delta");
    const double n = opt.require_double("n");
    const double s0 = opt.get_double("s0", 0.0);
    const double t_end = opt.require_double("t-end");
    const double dt = opt.get_double("dt", 1e-4);
    const auto seed = static_cast<std::uint64_t>(opt.get_int("seed", 0));
    const bool stop_at_n = opt.get_bool("stop-at-n", false);
    const double sample_dt = opt.get_double("sample-dt", t_end / 5000.0);
    const std::string out = opt.get_str("out", "");
    opt.reject_unknown();

    struct Rec1d {
        SampledPath path;
        double sample_dt;
        double next = 0.0;
        bool on_sample(double t, double s, double L) {
            if (t + 1e-12 >= next) {
                path.push(t, std::span<const double>(&s, 1), L);
                next += sample_dt;
            }
            return true;
        }
    } rec{{}, sample_dt};
    rec.path.dim = 1;

    auto r = simulate_cla1d(q, n, s0, t_end, dt, seed, stop_at_n, rec);

    json j;
    j["config"] = config_json(opt, "cla1d");
    j["hit"] = r.hit_n;
    if (r.hit_n) j["hit_time"] = r.hit_time;
    j["t"] = r.t;
    j["s"] = r.s;
    j["local_time"] = r.local_time;
    std::cout << j.dump(2) << "\n";

    if (!out.empty()) {
        CsvWriter w;
        std::istringstream hdr(config_comment_block(opt, "cla1d"));
        std::string line;
        while (std::getline(hdr, line)) w.comment(line);
        write_path_csv(w, rec.path, true);
        w.write_file(out);
    }
    return 0;
}

int run_event_study(const Options& opt, DetectorKind kind) {
    const bool cycling = kind == DetectorKind::cycling;
    auto p = params_from(opt, cycling ? 3 : 2);
    const Backend backend = parse_backend(opt.get_str("backend", "ctmc"));
    StudyConfig cfg;
    cfg.n_traj = static_cast<int>(opt.get_int("n-traj", 1000));
    cfg.threads = static_cast<int>(opt.get_int("threads", 1));
    cfg.seed = static_cast<std::uint64_t>(opt.get_int("seed", 0));
    cfg.horizon = opt.get_double("t-end", 1e4);
    cfg.dt = opt.get_double("dt", 1e-3);
    if (cycling)
        cfg.theta = opt.get_double("theta", 0.5);
    else
        cfg.eps = opt.get_double("eps", 0.0);
    const std::string out = opt.get_str("out", "-");
    const std::string events_out = opt.get_str("events-out", "");
    opt.reject_unknown();
    if (cfg.n_traj < 1) throw config_error("n-traj must be >= 1");
    if (cfg.threads < 1) throw config_error("threads must be >= 1");

    const EventStudy s = cycling ? cycling_study(p, backend, cfg)
                                 : switching_study(p, backend, cfg);

    json j;
    j["config"] = config_json(opt, cycling ? "cycling" : "switching");
    j["n"] = s.stats.n;
    j["mean"] = s.stats.mean;
    j["variance"] = s.stats.variance;
    j["std_error"] = s.stats.std_error;
    j["horizon_exceeded"] = s.horizon_exceeded;
    j["errors"] = s.errors;
    emit(out, j.dump(2) + "\n");

    if (!events_out.empty()) {
        CsvWriter w;
        std::istringstream hdr(config_comment_block(opt, cycling ? "cycling" : "switching"));
        std::string line;
        while (std::getline(hdr, line)) w.comment(line);
        write_events_csv(w, s.times, s.horizon_exceeded);
        w.write_file(events_out);
    }
    return s.errors.empty() ? 0 : 1;
}

// Occupation histograms of configurable observables under optional conditions.
int cmd_stationary(const Options& opt) {
    auto p = params_from(opt, 2);
    const Backend backend = parse_backend(opt.get_str("backend", "ctmc"));
    if (backend == Backend::cla1d) throw config_error("stationary expects ctmc or cla");
    const double t_end = opt.require_double("t-end");
    const double dt = opt.get_double("dt", 1e-3);
    const auto seed = static_cast<std::uint64_t>(opt.get_int("seed", 0));
    const std::string observable = opt.get_str("observable", "joint:1,2");
    const std::string condition = opt.get_str("condition", "none");
    const int bins = static_cast<int>(opt.get_int("bins", 64));
    const bool counts = backend == Backend::ctmc;
    const double default_hi = counts ? 4.0 * p.V : 4.0;
    const double lo = opt.get_double("lo", 0.0);
    const double hi = opt.get_double("hi", default_hi);
    const std::string format = opt.get_str("format", "csv");
    const std::string out = opt.get_str("out", "-");

    if (bins < 1) throw config_error("bins must be >= 1");
    if (!(hi > lo)) throw config_error("histogram range needs hi > lo");

    auto to_int = [](const std::string& s, const char* what) {
        try {
            std::size_t pos = 0;
            const int v = std::stoi(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw config_error(std::string(what) + ": expected an integer, got '" + s + "'");
        }
    };
    auto to_num = [](const std::string& s, const char* what) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw config_error(std::string(what) + ": expected a number, got '" + s + "'");
        }
    };

    // parse observable
    int sp1 = -1, sp2 = -1;
    enum class Obs { species, joint, disparity, oddfractions } kind;
    if (observable.rfind("species:", 0) == 0) {
        kind = Obs::species;
        sp1 = to_int(observable.substr(8), "observable") - 1;
    } else if (observable.rfind("joint:", 0) == 0) {
        kind = Obs::joint;
        const auto rest = observable.substr(6);
        const auto comma = rest.find(',');
        if (comma == std::string::npos) throw config_error("joint observable needs 'joint:i,j'");
        sp1 = to_int(rest.substr(0, comma), "observable") - 1;
        sp2 = to_int(rest.substr(comma + 1), "observable") - 1;
    } else if (observable == "disparity") {
        kind = Obs::disparity;
        if (p.d % 2 != 0) throw config_error("disparity requires even d");
    } else if (observable == "oddfractions") {
        kind = Obs::oddfractions;
        if (p.d != 6) throw config_error("oddfractions is the d=6 observable");
    } else {
        throw config_error("unknown observable '" + observable + "'");
    }
    if (kind == Obs::species || kind == Obs::joint) {
        if (sp1 < 0 || sp1 >= p.d || (kind == Obs::joint && (sp2 < 0 || sp2 >= p.d)))
            throw config_error("observable species index out of range");
    }

    // parse condition
    double slab_c = 0.0, slab_eps = 0.0, bge_thr = 0.0;
    long long level_n = -1;
    enum class Cond { none, slab, level, bge } cond = Cond::none;
    if (condition == "none") {
    } else if (condition.rfind("slab:", 0) == 0) {
        cond = Cond::slab;
        const auto rest = condition.substr(5);
        const auto comma = rest.find(',');
        slab_c = to_num(rest.substr(0, comma), "condition");
        slab_eps =
            comma == std::string::npos ? 1.0 / 128.0 : to_num(rest.substr(comma + 1), "condition");
    } else if (condition.rfind("level:", 0) == 0) {
        cond = Cond::level;
        level_n = to_int(condition.substr(6), "condition");
    } else if (condition.rfind("bge:", 0) == 0) {
        cond = Cond::bge;
        bge_thr = to_num(condition.substr(4), "condition");
    } else {
        throw config_error("unknown condition '" + condition + "'");
    }

    auto x0 = [&]() -> Vec {
        const auto init = opt.get_list("init");
        Vec x(p.d, 0.0);
        const double per = p.lambda_p / p.delta_p;
        for (int i = 0; i < p.d; ++i) x[i] = counts ? std::llround(per * p.V) : per;
        if (!init.empty()) {
            if (static_cast<int>(init.size()) != p.d)
                throw config_error("--init needs exactly d entries");
            for (int i = 0; i < p.d; ++i) x[i] = init[i];
        }
        return x;
    }();
    opt.reject_unknown();

    const double V = p.V;
    auto pass_cond = [&](std::span<const double> x) {
        switch (cond) {
            case Cond::none:
                return true;
            case Cond::slab: {
                double tot = 0.0;
                for (double v : x) tot += v;
                return std::abs(tot - slab_c) <= slab_eps;
            }
            case Cond::level: {
                double tot = 0.0;
                for (double v : x) tot += v;
                return std::llround(tot) == level_n;
            }
            case Cond::bge:
                return disparity(x, V) >= bge_thr;
        }
        return true;
    };

    WeightedHistogram h = kind == Obs::species || kind == Obs::disparity
                              ? WeightedHistogram::make1d(kind == Obs::disparity ? -1.2 : lo,
                                                          kind == Obs::disparity ? 1.2 : hi, bins)
                              : WeightedHistogram::make2d(
                                    {kind == Obs::oddfractions ? 0.0 : lo,
                                     kind == Obs::oddfractions ? 1.0 : hi, bins},
                                    {kind == Obs::oddfractions ? 0.0 : lo,
                                     kind == Obs::oddfractions ? 1.0 : hi, bins});

    auto accumulate = [&](double t0, double t1, std::span<const double> x) {
        if (!pass_cond(x)) return;
        const double w = t1 - t0;
        switch (kind) {
            case Obs::species:
                h.add(x[sp1], w);
                break;
            case Obs::joint:
                h.add2(x[sp1], x[sp2], w);
                break;
            case Obs::disparity:
                h.add(disparity(x, V), w);
                break;
            case Obs::oddfractions: {
                const double odd = x[0] + x[2] + x[4];
                if (odd <= 0.0) return;
                h.add2(x[0] / odd, x[2] / odd, w);
                break;
            }
        }
    };

    struct AccObserver {
        decltype(accumulate)& acc;
        Vec buf;
        void on_init(double, const CountVec&) {}
        void on_init(double, const Vec&) {}
        void on_interval(double t0, double t1, const CountVec& n) {
            buf.resize(n.size());
            for (std::size_t i = 0; i < n.size(); ++i) buf[i] = static_cast<double>(n[i]);
            acc(t0, t1, buf);
        }
        void on_interval(double t0, double t1, const Vec& x) { acc(t0, t1, x); }
        bool on_event(double, const CountVec&, int) { return true; }
        bool on_event(double, const Vec&, double) { return true; }
    } obs{accumulate, {}};

    if (backend == Backend::ctmc) {
        CountVec n0(p.d);
        for (int i = 0; i < p.d; ++i) n0[i] = static_cast<std::int64_t>(std::llround(x0[i]));
        simulate_ctmc(p, std::move(n0), t_end, seed, obs);
    } else {
        simulate_cla(p, x0, t_end, dt, seed, obs);
    }

    if (h.total_time <= 0.0)
        throw stats_error("condition '" + condition + "' was never satisfied on the path");

    if (format == "svg") {
        const std::string svg =
            h.dims == 1 ? svg_histogram1d(h, observable, "stationary occupation")
                        : svg_histogram2d(h, "x" + std::to_string(sp1 + 1),
                                          "x" + std::to_string(sp2 + 1), "stationary occupation");
        emit(out, svg);
    } else if (format == "csv") {
        CsvWriter w;
        std::istringstream hdr(config_comment_block(opt, "stationary"));
        std::string line;
        while (std::getline(hdr, line)) w.comment(line);
        if (h.dims == 1)
            write_histogram_csv(w, h);
        else
            write_histogram2d_csv(w, h);
        emit(out, w.str());
    } else {
        throw config_error("unsupported format '" + format + "'");
    }
    return 0;
}

int cmd_hitting(const Options& opt) {
    Cla1dParams q;
    q.V = opt.get_double("V", 64.0);
    q.kappa_p = opt.get_double("kappa", 1.0);
    q.lambda_p = opt.require_double("lambda");
    q.delta_p = opt.require_double("delta");
    const double n = opt.require_double("n");
    QuadratureConfig cfg;
    cfg.grid_points = static_cast<int>(opt.get_int("grid", 64));
    cfg.refine_tol = opt.get_double("tol", 1e-6);
    const std::string out = opt.get_str("out", "-");
    opt.reject_unknown();

    const auto r = expected_exit_time(q, n, cfg);
    json j;
    j["config"] = config_json(opt, "hitting");
    j["value"] = r.value;
    j["grid_points_used"] = r.grid_points_used;
    j["est_error"] = r.est_error;
    emit(out, j.dump(2) + "\n");
    return 0;
}

int cmd_verify(const Options& opt) {
    const std::string suites = opt.get_str("suites", "all");
    const auto seed = static_cast<std::uint64_t>(opt.get_int("seed", 2024));
    const double scale = opt.get_double("scale", 1.0);
    const std::string out = opt.get_str("out", "-");
    opt.reject_unknown();

    auto want = [&](const std::string& s) {
        return suites == "all" || suites.find(s) != std::string::npos;
    };

    struct Entry {
        CheckReport report;
        bool expect_pass;
    };
    std::vector<Entry> entries;

    if (want("ellipticity")) {
        for (int d : {2, 3, 6}) {
            auto p = derive_params(d, 64.0, 1.0, 1.0 / 64, 1.0 / 64);
            entries.push_back({check_ellipticity(p, 10000, 100.0, seed + d), true});
        }
    }
    if (want("identities")) {
        int i = 0;
        for (int d : {2, 3, 6}) {
            auto p = derive_params(d, 64.0, 1.3, 0.021, 0.017);
            entries.push_back({check_coefficient_identities(p, 10000, seed + 100 + i++), true});
        }
    }
    if (want("mass")) {
        auto p2 = derive_params(2, 64.0, 1.0, 1.0 / 64, 1.0 / 64);
        entries.push_back({check_total_mass_poisson(p2, 1e5 * scale, seed + 201), true});
        auto p3 = derive_params(3, 64.0, 1.0, 1.0 / 64, 1.0 / 64);
        entries.push_back({check_total_mass_poisson(p3, 1e5 * scale, seed + 202), true});
        auto p6 = derive_params(6, 64.0, 1.0, 1.0 / 256, 1.0 / 256);
        entries.push_back({check_total_mass_poisson(p6, 5e4 * scale, seed + 203), true});
    }
    if (want("bar")) {
        auto p = derive_params(2, 64.0, 1.0, 1.0 / 16, 1.0 / 16);
        BumpC2 bump{{1.0, 1.0}, 0.5, 1.0};
        entries.push_back({bar_residual(p, bump, 2e4 * scale, 1e-3, seed + 301), true});
        entries.push_back({bar_residual(p, bump, 2e3, 1e-3, seed + 302, true), false});
    }
    if (want("levelsets")) {
        auto p = derive_params(2, 64.0, 1.0, 1.0 / 32, 1.0 / 32);
        entries.push_back({check_level_set_uniformity(p, 2e5 * scale, seed + 401), true});
        auto bad = derive_params(2, 64.0, 1.0, 1.0 / 16, 1.0 / 16);
        entries.push_back(
            {check_level_set_uniformity(bad, 2e5 * scale, seed + 402, false), false});
    }

    json arr = json::array();
    bool ok = true;
    for (const auto& e : entries) {
        json r;
        r["name"] = e.report.name;
        r["samples"] = e.report.samples;
        r["worst"] = e.report.worst;
        r["tolerance"] = e.report.tolerance;
        r["pass"] = e.report.pass;
        r["negative_control"] = !e.expect_pass;
        if (!e.report.note.empty()) r["note"] = e.report.note;
        const bool as_expected = e.report.pass == e.expect_pass;
        r["as_expected"] = as_expected;
        ok = ok && as_expected;
        arr.push_back(r);
    }
    json j;
    j["config"] = config_json(opt, "verify");
    j["checks"] = arr;
    j["ok"] = ok;
    emit(out, j.dump(2) + "\n");
    return ok ? 0 : 3;
}

// Replays the simulation protocols behind the source figures at a
// configurable scale; writes CSV (and SVG where it helps eyeballing).
int cmd_figures(const Options& opt) {
    namespace fs = std::filesystem;
    const std::string outdir = opt.get_str("outdir", "figures_out");
    const double scale = opt.get_double("scale", 0.1);
    const int threads = static_cast<int>(opt.get_int("threads", 2));
    const auto seed = static_cast<std::uint64_t>(opt.get_int("seed", 7));
    opt.reject_unknown();
    fs::create_directories(outdir);

    auto save_csv = [&](const std::string& name, const CsvWriter& w) {
        w.write_file(outdir + "/" + name);
        std::cerr << "wrote " << outdir << "/" << name << "\n";
    };
    auto save_txt = [&](const std::string& name, const std::string& text) {
        write_text_file(outdir + "/" + name, text);
        std::cerr << "wrote " << outdir << "/" << name << "\n";
    };

    // sample trajectories, d = 2..6 (V=16 protocol, all mass in species d)
    for (int d = 2; d <= 6; ++d) {
        auto p = derive_params(d, 16.0, 1.0, 1.0 / 64, 1.0 / 64);
        const double T = 10000.0 * scale;
        PathRecorder rec(d, T / 4000.0);
        CountVec n0(d, 0);
        n0[d - 1] = 16 * d;
        simulate_ctmc(p, std::move(n0), T, seed + d, rec);
        CsvWriter w;
        write_path_csv(w, rec.path, false);
        save_csv("traj_ctmc_d" + std::to_string(d) + ".csv", w);
        save_txt("traj_ctmc_d" + std::to_string(d) + ".svg",
                 svg_trajectory(rec.path, "d=" + std::to_string(d)));
    }

    // d=2 stationary joint histograms, CTMC and CLA, three regimes
    for (const auto& [tag, D] : std::vector<std::pair<std::string, double>>{
             {"D16", 1.0 / 16}, {"D32", 1.0 / 32}, {"D64", 1.0 / 64}}) {
        auto p = derive_params(2, 64.0, 1.0, D, D);
        {
            WeightedHistogram h = WeightedHistogram::make2d({0, 256, 64}, {0, 256, 64});
            struct O {
                WeightedHistogram& h;
                void on_init(double, const CountVec&) {}
                void on_interval(double t0, double t1, const CountVec& n) {
                    h.add2(static_cast<double>(n[0]), static_cast<double>(n[1]), t1 - t0);
                }
                bool on_event(double, const CountVec&, int) { return true; }
            } o{h};
            simulate_ctmc(p, CountVec{64, 64}, 1e6 * scale, seed + 31, o);
            CsvWriter w;
            write_histogram2d_csv(w, h);
            save_csv("stationary2d_ctmc_" + tag + ".csv", w);
            save_txt("stationary2d_ctmc_" + tag + ".svg",
                     svg_histogram2d(h, "x1", "x2", "ctmc " + tag));
        }
        {
            WeightedHistogram h = WeightedHistogram::make2d({0, 4, 64}, {0, 4, 64});
            struct O {
                WeightedHistogram& h;
                void on_init(double, const Vec&) {}
                void on_interval(double t0, double t1, const Vec& x) {
                    h.add2(x[0], x[1], t1 - t0);
                }
                bool on_event(double, const Vec&, double) { return true; }
            } o{h};
            simulate_cla(p, Vec{1.0, 1.0}, 1e5 * scale, 1e-3, seed + 32, o);
            CsvWriter w;
            write_histogram2d_csv(w, h);
            save_csv("stationary2d_cla_" + tag + ".csv", w);
            save_txt("stationary2d_cla_" + tag + ".svg",
                     svg_histogram2d(h, "x1", "x2", "cla " + tag));
        }
    }

    // d=3 conditional densities on the total-mass hyperplane
    for (const auto& [tag, D] : std::vector<std::pair<std::string, double>>{
             {"D3_64", 3.0 / 64}, {"D3_128", 3.0 / 128}, {"D1_64", 1.0 / 64}}) {
        auto p = derive_params(3, 64.0, 1.0, D, D);
        WeightedHistogram h = WeightedHistogram::make2d({0, 192, 64}, {0, 192, 64});
        struct O {
            WeightedHistogram& h;
            std::int64_t level;
            void on_init(double, const CountVec&) {}
            void on_interval(double t0, double t1, const CountVec& n) {
                if (total_count(n) == level)
                    h.add2(static_cast<double>(n[0]), static_cast<double>(n[1]), t1 - t0);
            }
            bool on_event(double, const CountVec&, int) { return true; }
        } o{h, 192};
        simulate_ctmc(p, CountVec{64, 64, 64}, 1e6 * scale, seed + 41, o);
        CsvWriter w;
        write_histogram2d_csv(w, h);
        save_csv("conditional3d_ctmc_" + tag + ".csv", w);
    }

    // switching-time histograms and sensitivity sweeps (d=2)
    auto run_switch = [&](double V, double kp, double lp, double dp, Backend b, int ntraj) {
        auto p = derive_params(2, V, kp, lp, dp);
        StudyConfig cfg;
        cfg.n_traj = ntraj;
        cfg.threads = threads;
        cfg.seed = seed + 51;
        cfg.horizon = 1e5;
        cfg.dt = 1e-3;
        return switching_study(p, b, cfg);
    };
    const int ntraj = std::max(50, static_cast<int>(1000 * scale));
    for (const auto& [tag, D] : std::vector<std::pair<std::string, double>>{
             {"D32", 1.0 / 32}, {"D64", 1.0 / 64}}) {
        for (Backend b : {Backend::ctmc, Backend::cla}) {
            auto s = run_switch(64, 1.0, D, D, b, ntraj);
            CsvWriter w;
            w.comment("switching times, volume-scaled units tau/V");
            w.comment("mean_scaled = " + fmt_short(s.stats.mean / 64.0) +
                      "  variance_scaled = " + fmt_short(s.stats.variance / 4096.0));
            write_events_csv(w, s.times, s.horizon_exceeded);
            save_csv(std::string("switching_hist_") + (b == Backend::ctmc ? "ctmc" : "cla") +
                         "_" + tag + ".csv",
                     w);
        }
    }
    for (Backend b : {Backend::ctmc, Backend::cla1d}) {
        auto s = run_switch(64, 1.0, 1.0 / 256, 1.0 / 256, b, ntraj);
        CsvWriter w;
        w.comment("switching times, volume-scaled units tau/V");
        w.comment("mean_scaled = " + fmt_short(s.stats.mean / 64.0) +
                  "  variance_scaled = " + fmt_short(s.stats.variance / 4096.0));
        write_events_csv(w, s.times, s.horizon_exceeded);
        save_csv(std::string("switching_hist_extreme_") +
                     (b == Backend::ctmc ? "ctmc" : "cla1d") + "_D256.csv",
                 w);
    }
    {
        CsvWriter w;
        w.raw("param,value,backend,mean_scaled,std_error_scaled\n");
        auto sweep_row = [&](const std::string& pname, double value, Backend b,
                             const EventStudy& s, double V) {
            w.raw(pname + "," + fmt_short(value) + "," +
                  (b == Backend::ctmc ? "ctmc" : (b == Backend::cla ? "cla" : "cla1d")) + "," +
                  fmt_short(s.stats.mean / V) + "," + fmt_short(s.stats.std_error / V) + "\n");
        };
        for (double V : {16.0, 32.0, 64.0, 128.0}) {
            for (Backend b : {Backend::ctmc, Backend::cla})
                sweep_row("V", V, b, run_switch(V, 1.0, 1.0 / 64, 1.0 / 64, b, ntraj / 2), V);
        }
        for (double kp : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            for (Backend b : {Backend::ctmc, Backend::cla, Backend::cla1d})
                sweep_row("kappa", kp, b, run_switch(64, kp, 1.0 / 64, 1.0 / 64, b, ntraj / 2),
                          64.0);
        }
        for (double lp : {1.0 / 256, 1.0 / 128, 1.0 / 64, 1.0 / 32}) {
            for (Backend b : {Backend::ctmc, Backend::cla})
                sweep_row("lambda", lp, b, run_switch(64, 1.0, lp, 1.0 / 64, b, ntraj / 2), 64.0);
        }
        for (double dp : {1.0 / 256, 1.0 / 128, 1.0 / 64, 1.0 / 32}) {
            for (Backend b : {Backend::ctmc, Backend::cla})
                sweep_row("delta", dp, b, run_switch(64, 1.0, 1.0 / 64, dp, b, ntraj / 2), 64.0);
        }
        save_csv("switching_sensitivity.csv", w);
    }

    // d=3 cycling histograms (V=256) and d-sweep of mean cycling time
    auto run_cycle = [&](int d, double V, double D, Backend b, int nt) {
        auto p = derive_params(d, V, 1.0, D, D);
        StudyConfig cfg;
        cfg.n_traj = nt;
        cfg.threads = threads;
        cfg.seed = seed + 61;
        cfg.horizon = 2e3;
        cfg.dt = 1e-3;
        return cycling_study(p, b, cfg);
    };
    for (const auto& [tag, D] : std::vector<std::pair<std::string, double>>{
             {"D32", 1.0 / 32}, {"D3_512", 3.0 / 512}}) {
        for (Backend b : {Backend::ctmc, Backend::cla}) {
            auto s = run_cycle(3, 256, D, b, ntraj);
            CsvWriter w;
            w.comment("cycling times (model time units)");
            w.comment("mean = " + fmt_short(s.stats.mean) +
                      "  variance = " + fmt_short(s.stats.variance));
            write_events_csv(w, s.times, s.horizon_exceeded);
            save_csv(std::string("cycling_hist_") + (b == Backend::ctmc ? "ctmc" : "cla") + "_" +
                         tag + ".csv",
                     w);
        }
    }
    {
        CsvWriter w;
        w.raw("d,mean,std_error,horizon_exceeded\n");
        for (int d = 3; d <= 10; ++d) {
            auto s = run_cycle(d, 64, 1.0 / 256, Backend::ctmc, std::max(50, ntraj / 2));
            w.raw(std::to_string(d) + "," + fmt_short(s.stats.mean) + "," +
                  fmt_short(s.stats.std_error) + "," + std::to_string(s.horizon_exceeded) + "\n");
        }
        save_csv("cycling_vs_d.csv", w);
    }

    // d=6 disparity trajectory, stationary density and odd-species fractions
    {
        auto p = derive_params(6, 64.0, 1.0, 1.0 / 256, 1.0 / 256);
        WeightedHistogram bh = WeightedHistogram::make1d(-1.2, 1.2, 96);
        WeightedHistogram rho = WeightedHistogram::make2d({0, 1, 64}, {0, 1, 64});
        SampledPath btraj;
        btraj.dim = 1;
        struct O {
            double V;
            WeightedHistogram& bh;
            WeightedHistogram& rho;
            SampledPath& btraj;
            double next = 0.0, stride;
            void on_init(double, const CountVec&) {}
            void on_interval(double t0, double t1, const CountVec& n) {
                const double B = disparity_counts(n, V);
                bh.add(B, t1 - t0);
                if (B >= 0.95) {
                    const double odd = static_cast<double>(n[0] + n[2] + n[4]);
                    if (odd > 0)
                        rho.add2(static_cast<double>(n[0]) / odd,
                                 static_cast<double>(n[2]) / odd, t1 - t0);
                }
                if (t0 >= next) {
                    btraj.push(t0, std::span<const double>(&B, 1), 0.0);
                    next += stride;
                }
            }
            bool on_event(double, const CountVec&, int) { return true; }
        } o{64.0, bh, rho, btraj, 0.0, std::max(1.0, 1e5 * scale / 4000.0)};
        simulate_ctmc(p, CountVec(6, 64), 1e5 * scale, seed + 71, o);
        CsvWriter w1;
        write_histogram_csv(w1, bh);
        save_csv("b_density.csv", w1);
        CsvWriter w2;
        write_path_csv(w2, btraj, false);
        save_csv("b_traj.csv", w2);
        CsvWriter w3;
        write_histogram2d_csv(w3, rho);
        save_csv("rho_joint.csv", w3);
        save_txt("rho_joint.svg", svg_histogram2d(rho, "rho1", "rho3", "odd fractions"));
        save_txt("b_density.svg", svg_histogram1d(bh, "B", "disparity density"));
    }

    return 0;
}

void print_usage() {
    std::cerr <<
        "usage: tk <subcommand> [--key value ...] [--config file]\n"
        "subcommands:\n"
        "  ctmc        exact jump-process trajectory (CSV/SVG export)\n"
        "  cla         constrained Langevin trajectory (CSV/SVG export)\n"
        "  cla1d       1D reduced model trajectory / first-hitting run\n"
        "  switching   ensemble of species-2 extinction times\n"
        "  cycling     ensemble of species-d second-peak times\n"
        "  stationary  time-averaged occupation histograms\n"
        "  hitting     expected exit-time quadrature (JSON)\n"
        "  verify      identity/stationarity check suites (JSON)\n"
        "  figures     replay the figure protocols into an output directory\n"
        "common options: --d --V --kappa --lambda --delta --t-end --dt --seed\n"
        "                --n-traj --threads --out --events-out --format --init\n"
        "config file: UTF-8 'key = value' lines, '#' comments; flags override.\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        print_usage();
        return 2;
    }
    const std::string sub = argv[1];
    try {
        const Options opt = parse_args(argc, argv, 2);
        if (sub == "ctmc") return cmd_ctmc(opt);
        if (sub == "cla") return cmd_cla(opt);
        if (sub == "cla1d") return cmd_cla1d(opt);
        if (sub == "switching") return run_event_study(opt, DetectorKind::switching);
        if (sub == "cycling") return run_event_study(opt, DetectorKind::cycling);
        if (sub == "stationary") return cmd_stationary(opt);
        if (sub == "hitting") return cmd_hitting(opt);
        if (sub == "verify") return cmd_verify(opt);
        if (sub == "figures") return cmd_figures(opt);
        print_usage();
        throw config_error("unknown subcommand '" + sub + "'");
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const model_error& e) {
        // invalid model parameters arriving through flags/config files
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
