#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "boxnorm.hpp"
#include "constellations.hpp"
#include "errors.hpp"
#include "forms.hpp"
#include "io.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "sieve.hpp"
#include "wtrick.hpp"

namespace constlab::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidation = 1, kBudget = 2, kIntegrity = 3 };

using io::json;

struct RunReport {
    std::string command;
    json config = json::object();
    json result = json::object();
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    // CSV commands fill these; the JSON envelope is used otherwise.
    std::vector<std::string> csv_header;
    std::vector<std::vector<std::string>> csv_rows;
    int exit_code = kOk;
};

namespace detail {

inline std::string fmt_double(double v)
{
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

inline std::vector<std::int64_t> parse_int_grid(const std::string& text)
{
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0;
        try {
            v = std::stod(item);
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse grid value '" + item + "'");
        }
        if (v != std::floor(v) || v < 1 || v > 9e15)
            throw ConfigError("grid value '" + item + "' is not a positive integer");
        out.push_back(static_cast<std::int64_t>(v));
    }
    return out;
}

inline std::vector<double> parse_double_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse number '" + item + "'");
        }
    }
    require(!out.empty(), "empty number list '" + text + "'");
    return out;
}

inline std::uint64_t parse_count(const std::string& text, const char* name)
{
    double v = 0;
    try {
        v = std::stod(text);
    } catch (const std::logic_error&) {
        throw ConfigError(std::string("cannot parse --") + name + " '" + text + "'");
    }
    if (v != std::floor(v) || v < 1 || v > 1.8e19)
        throw ConfigError(std::string("--") + name + " must be a positive integer (got '" + text + "')");
    return static_cast<std::uint64_t>(v);
}

struct Prepared {
    PrimeTable table;
    DenseSubset subset;
    ResidueSelection selection;
    std::vector<WeightField> fields;
    std::vector<double> means;
    double nonzero_value = 0.0;
};

// Sieves far enough for the rescaled window, picks residues, and builds the weights.
inline Prepared prepare_weights(std::uint64_t N, std::uint64_t w, Ratio dp, std::size_t d, const std::string& subset_path, unsigned threads)
{
    Prepared p;
    const Primorial pr = primorial(w);
    p.table = sieve_primes(N + pr.W, SieveOptions{.threads = threads});
    p.subset = subset_path.empty() ? prime_grid(p.table, N, d) : io::read_subset_file(subset_path, d, static_cast<std::int64_t>(N));
    p.selection = select_residues(p.table, p.subset, w, dp, N);
    for (auto& pw : build_weights(p.table, p.selection.context)) {
        p.means.push_back(pw.mean);
        p.nonzero_value = pw.nonzero_value;
        p.fields.push_back(std::move(pw.field));
    }
    return p;
}

inline json context_json(const WTrickContext& ctx)
{
    return json{{"W", ctx.W}, {"phi", ctx.totient}, {"residues", ctx.residues}, {"nPrime", ctx.NPrime}, {"offset", ctx.offset}};
}

inline json report_json(const MeasureReport& m)
{
    return json{{"value", m.value}, {"totalMass", m.total_mass}, {"terms", m.terms}, {"conditional", m.conditional}};
}

} // namespace detail

struct SieveArgs {
    std::string limit = "0";
    std::uint64_t segment = std::uint64_t{1} << 16;
    std::string dump;
};

inline RunReport run_sieve(const SieveArgs& a, unsigned threads)
{
    RunReport rep;
    const auto limit = detail::parse_count(a.limit, "limit");
    rep.config = json{{"limit", limit}, {"segment", a.segment}, {"dump", a.dump}};
    const auto table = sieve_primes(limit, SieveOptions{.segment_size = a.segment, .threads = threads});
    if (!a.dump.empty()) {
        std::ofstream os(a.dump, std::ios::binary);
        if (!os)
            throw ConfigError("cannot write '" + a.dump + "'");
        write_prime_table(os, table);
    }
    rep.result = json{{"count", table.count()}, {"largestPrime", table.count() ? table.primes().back() : 0}};
    return rep;
}

struct WTrickArgs {
    std::string n = "0";
    std::uint64_t w = 2;
    std::string delta_prime = "1/2";
    std::size_t dim = 1;
    std::string subset;
};

inline RunReport run_wtrick(const WTrickArgs& a, unsigned threads)
{
    RunReport rep;
    const auto N = detail::parse_count(a.n, "n");
    const Ratio dp = Ratio::parse(a.delta_prime);
    rep.config = json{{"n", N}, {"w", a.w}, {"deltaPrime", dp.str()}, {"dim", a.dim}, {"subset", a.subset}};
    require(a.dim >= 1, "--dim must be at least 1");
    const auto p = detail::prepare_weights(N, a.w, dp, a.dim, a.subset, threads);
    const auto& ctx = p.selection.context;
    rep.result = detail::context_json(ctx);
    rep.result["weightMeans"] = p.means;
    rep.result["nonzeroWeight"] = p.nonzero_value;
    rep.result["attained"] = p.selection.attained;
    rep.result["windowCount"] = p.selection.window_count;
    rep.result["averageBound"] = p.selection.average_bound;
    rep.result["jointSelection"] = p.selection.joint;
    return rep;
}

struct LfArgs {
    std::string forms;
    std::string n = "0";
    std::uint64_t w = 2;
    std::string kappa = "0.01";
    double lambda = 0.5;
    double eps = 0.1;
    std::string delta_prime = "1/2";
};

inline RunReport run_lf_check(const LfArgs& a, unsigned threads)
{
    RunReport rep;
    const auto N = detail::parse_count(a.n, "n");
    const Ratio dp = Ratio::parse(a.delta_prime);
    const auto kappas = detail::parse_double_list(a.kappa);
    const auto sys = io::forms_from_json(io::parse_json(io::read_text(a.forms), "form-system file"));
    rep.config = json{{"forms", io::forms_to_json(sys)}, {"n", N}, {"w", a.w}, {"kappa", kappas}, {"lambda", a.lambda},
                      {"eps", a.eps}, {"deltaPrime", dp.str()}};
    const auto p = detail::prepare_weights(N, a.w, dp, sys.d, "", threads);
    const auto NPrime = static_cast<std::int64_t>(p.selection.context.NPrime);
    const auto rows = lf_condition_scan(sys, p.fields, NPrime, kappas, a.lambda, a.eps, EvalOptions{.threads = threads});
    rep.csv_header = {"kappa", "value", "deviation", "terms", "seconds"};
    json jrows = json::array();
    for (const auto& r : rows) {
        rep.csv_rows.push_back({detail::fmt_double(r.kappa), detail::fmt_double(r.report.value), detail::fmt_double(r.report.deviation),
                                std::to_string(r.report.term_count), detail::fmt_double(r.report.elapsed)});
        jrows.push_back(json{{"kappa", r.kappa}, {"boxLengths", r.box_lengths}, {"value", r.report.value},
                             {"deviation", r.report.deviation}, {"terms", r.report.term_count}, {"withinEps", r.within}});
    }
    rep.result = detail::context_json(p.selection.context);
    rep.result["rows"] = jrows;
    return rep;
}

struct BoxNormArgs {
    std::string instance;
    bool debug = false;
};

inline RunReport run_box_norm(const BoxNormArgs& a)
{
    RunReport rep;
    const auto inst = io::box_instance_from_json(io::parse_json(io::read_text(a.instance), "box instance"));
    rep.config = json{{"instance", io::box_instance_to_json(inst)}, {"debug", a.debug}};
    json norms = json::array();
    for (std::uint32_t mask = 0; mask <= inst.full_mask(); ++mask) {
        json row{{"subset", mask}, {"fNorm", box_norm_of_f(inst, mask)}, {"nuNorm", box_norm_of_nu(inst, mask)}};
        if (a.debug) {
            json table = json::array();
            for (const auto& m : index_map(mask)) {
                json reads = json::array();
                for (const auto& [b, copy] : m.reads)
                    reads.push_back(json{{"b", b}, {"copy", copy}});
                table.push_back(json{{"term", m.term}, {"reads", reads}});
            }
            row["indexMap"] = table;
        }
        norms.push_back(row);
    }
    rep.result["norms"] = norms;
    const auto vn = von_neumann_check(inst);
    rep.result["vonNeumann"] = json{{"lhs", vn.lhs}, {"rhs", vn.rhs}, {"slack", vn.slack()}, {"holds", vn.holds}};
    if (!vn.holds)
        rep.exit_code = kIntegrity;
    return rep;
}

struct FuzzArgs {
    std::size_t count = 500;
    std::uint64_t seed = 0;
    std::size_t max_size = 3;
    std::int64_t max_side = 6;
};

inline RunReport run_fuzz(const FuzzArgs& a)
{
    RunReport rep;
    rep.seed = a.seed;
    rep.config = json{{"count", a.count}, {"seed", a.seed}, {"maxSize", a.max_size}, {"maxSide", a.max_side}};
    require(a.max_size >= 1 && a.max_size <= kMaxBoxSize, "--max-size must lie in [1, 4]");
    require(a.max_side >= 1 && a.max_side <= kMaxBoxSide, "--max-side must lie in [1, 16]");
    const auto s = von_neumann_fuzz(a.count, a.seed, a.max_size, a.max_side);
    rep.result = json{{"count", s.count}, {"passed", s.passed}, {"minSlack", s.min_slack}, {"allHold", s.passed == s.count}};
    if (s.counterexample) {
        rep.result["counterexample"] = io::box_instance_to_json(*s.counterexample);
        rep.result["counterexampleLhs"] = s.counterexample_result->lhs;
        rep.result["counterexampleRhs"] = s.counterexample_result->rhs;
        rep.exit_code = kIntegrity;
    }
    return rep;
}

struct MeasureArgs {
    std::string omega = "0";
    std::string b0;
    std::string mode = "superset";
    std::string n = "0";
    std::uint64_t w = 2;
    double kappa = 0.01;
    std::int64_t m = 0;
    std::string delta_prime = "1/2";
    std::string subset;
};

inline RunReport run_measure(const MeasureArgs& a, unsigned threads)
{
    RunReport rep;
    const auto N = detail::parse_count(a.n, "n");
    const Ratio dp = Ratio::parse(a.delta_prime);
    const CylinderSpec spec = io::parse_omega(a.omega);
    const auto B0 = io::parse_points(a.b0, spec.dim());
    require(a.mode == "superset" || a.mode == "exact", "--mode must be 'superset' or 'exact'");
    require(a.kappa > 0.0 && a.kappa <= 1.0, "--kappa must lie in (0, 1]");
    rep.config = json{{"omega", spec.omega}, {"b0", B0}, {"mode", a.mode}, {"n", N}, {"w", a.w}, {"kappa", a.kappa},
                      {"m", a.m}, {"deltaPrime", dp.str()}, {"subset", a.subset}};
    const auto p = detail::prepare_weights(N, a.w, dp, spec.dim(), a.subset, threads);
    const auto& ctx = p.selection.context;
    const DenseSubset rescaled = rescale_subset(p.subset, ctx);
    const auto NPrime = static_cast<std::int64_t>(ctx.NPrime);
    const std::int64_t M = a.m > 0 ? a.m : std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(a.kappa * static_cast<double>(NPrime))));
    const CylinderEvent ev{spec, B0, a.mode == "exact" ? EventMode::Exact : EventMode::Superset};
    const auto m = measure(ev, rescaled, p.fields, NPrime, M, MeasureOptions{.threads = threads});
    rep.result = detail::report_json(m);
    rep.result["nPrime"] = NPrime;
    rep.result["M"] = M;
    rep.result["residues"] = ctx.residues;
    return rep;
}

struct CountArgs {
    std::string shape;
    std::string limit = "0";
    std::string subset;
    bool list_hits = false;
    bool brute = false;
};

inline RunReport run_count(const CountArgs& a, unsigned threads)
{
    RunReport rep;
    const auto shape = io::shape_from_json(io::parse_json(io::read_text(a.shape), "shape file"));
    const auto N = static_cast<std::int64_t>(detail::parse_count(a.limit, "limit"));
    rep.config = json{{"shape", io::shape_to_json(shape)}, {"limit", N}, {"subset", a.subset}, {"listHits", a.list_hits}, {"brute", a.brute}};
    DenseSubset A;
    if (a.subset.empty()) {
        require(N >= 2, "--limit must be at least 2 for the prime grid");
        A = prime_grid(sieve_primes(static_cast<std::uint64_t>(N)), static_cast<std::uint64_t>(N), shape.d);
    } else {
        A = io::read_subset_file(a.subset, shape.d, N);
    }
    const CountOptions opt{.threads = threads};
    const Count c = a.brute ? count_bruteforce(shape, A, N, opt) : count_fast(shape, A, N, opt);
    rep.result["count"] = to_string(c);
    rep.result["omegaSizeSum"] = shape.omega_size_sum();
    if (a.list_hits) {
        json hits = json::array();
        enumerate_hits(shape, A, N, [&](const ConstellationHit& h) { hits.push_back(json{{"a", h.a}, {"r", h.r}}); });
        rep.result["hits"] = std::move(hits);
    }
    return rep;
}

struct ScalingArgs {
    std::string shape;
    std::string grid;
};

inline RunReport run_scaling(const ScalingArgs& a, unsigned threads)
{
    RunReport rep;
    const auto shape = io::shape_from_json(io::parse_json(io::read_text(a.shape), "shape file"));
    const auto grid = detail::parse_int_grid(a.grid);
    rep.config = json{{"shape", io::shape_to_json(shape)}, {"grid", grid}};
    const auto sr = scaling_report(shape, grid, CountOptions{.threads = threads});
    rep.csv_header = {"N", "count", "normalized", "seconds"};
    json rows = json::array();
    for (const auto& r : sr.rows) {
        rep.csv_rows.push_back({std::to_string(r.N), to_string(r.count), detail::fmt_double(r.normalized), detail::fmt_double(r.seconds)});
        rows.push_back(json{{"N", r.N}, {"count", to_string(r.count)}, {"normalized", r.normalized}});
    }
    rep.result["rows"] = rows;
    rep.result["flatness"] = sr.flatness ? json(*sr.flatness) : json(nullptr);
    return rep;
}

inline void emit(const RunReport& rep, const std::string& format, bool timing, std::ostream& os)
{
    json envelope{{"schema", io::kSchemaVersion}, {"version", kVersion}, {"command", rep.command}, {"seed", rep.seed}, {"config", rep.config}};
    if (timing)
        envelope["wallSeconds"] = rep.wall_seconds;
    if (format == "csv" && !rep.csv_header.empty()) {
        os << "# " << envelope.dump() << "\n";
        for (std::size_t i = 0; i < rep.csv_header.size(); ++i)
            os << (i ? "," : "") << rep.csv_header[i];
        os << "\n";
        for (const auto& row : rep.csv_rows) {
            for (std::size_t i = 0; i < row.size(); ++i)
                os << (i ? "," : "") << row[i];
            os << "\n";
        }
        return;
    }
    envelope["result"] = rep.result;
    os << envelope.dump(2) << "\n";
}

// Parses argv, runs one subcommand, and writes its report. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"constlab: prime constellation and linear-forms laboratory"};
    app.require_subcommand(1);
    unsigned threads = default_threads();
    std::string out_path;
    std::string format;
    bool timing = false;
    auto common = [&](CLI::App* sub, bool report_out = true) {
        sub->add_option("--threads", threads, "worker threads (CONSTLAB_THREADS overrides the default)");
        if (report_out)
            sub->add_option("--out", out_path, "write the report to FILE");
        sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_flag("--timing", timing, "include wall time in the report");
    };

    SieveArgs sieve_args;
    auto* sieve = app.add_subcommand("sieve", "sieve primes up to a limit");
    sieve->add_option("--limit", sieve_args.limit, "upper limit")->required();
    sieve->add_option("--segment", sieve_args.segment, "segment size");
    sieve->add_option("--out,--dump", sieve_args.dump, "write the binary prime table to FILE");
    common(sieve, false);

    WTrickArgs wt_args;
    auto* wtrick = app.add_subcommand("wtrick", "select residues and build W-tricked prime weights");
    wtrick->add_option("--n", wt_args.n, "N")->required();
    wtrick->add_option("--w", wt_args.w, "w (W is the product of primes <= w)")->required();
    wtrick->add_option("--delta-prime", wt_args.delta_prime, "delta' in (0, 1/2], as p/q or decimal");
    wtrick->add_option("--dim", wt_args.dim, "dimension d");
    wtrick->add_option("--subset", wt_args.subset, "subset file (default: the full prime grid)");
    common(wtrick);

    LfArgs lf_args;
    auto* lf = app.add_subcommand("lf-check", "evaluate linear-forms averages of the prime weights");
    lf->add_option("--forms", lf_args.forms, "form-system JSON file")->required();
    lf->add_option("--n", lf_args.n, "N")->required();
    lf->add_option("--w", lf_args.w, "w")->required();
    lf->add_option("--kappa", lf_args.kappa, "kappa, or a comma-separated grid");
    lf->add_option("--lambda", lf_args.lambda, "lambda");
    lf->add_option("--eps", lf_args.eps, "tolerance on |average - 1|");
    lf->add_option("--delta-prime", lf_args.delta_prime, "delta'");
    common(lf);

    BoxNormArgs box_args;
    auto* box = app.add_subcommand("box-norm", "weighted box norms and the von Neumann bound of one instance");
    box->add_option("--instance", box_args.instance, "instance JSON file")->required();
    box->add_flag("--debug", box_args.debug, "emit the h-copy index map of every factor");
    common(box);

    FuzzArgs fuzz_args;
    auto* fuzz = app.add_subcommand("von-neumann-fuzz", "check the weighted von Neumann bound on random instances");
    fuzz->add_option("--count", fuzz_args.count, "number of instances");
    fuzz->add_option("--seed", fuzz_args.seed, "random seed");
    fuzz->add_option("--max-size", fuzz_args.max_size, "largest |B|");
    fuzz->add_option("--max-side", fuzz_args.max_side, "largest H");
    common(fuzz);

    MeasureArgs m_args;
    auto* meas = app.add_subcommand("measure", "finite cylinder measure of an event");
    meas->add_option("--omega", m_args.omega, "Omega, e.g. \"0,1;0\"")->required();
    meas->add_option("--b0", m_args.b0, "B0, e.g. \"(0,0),(1,0)\"");
    meas->add_option("--mode", m_args.mode, "superset or exact");
    meas->add_option("--n", m_args.n, "N")->required();
    meas->add_option("--w", m_args.w, "w")->required();
    meas->add_option("--kappa", m_args.kappa, "M = kappa N'");
    meas->add_option("--m", m_args.m, "explicit M (overrides kappa)");
    meas->add_option("--delta-prime", m_args.delta_prime, "delta'");
    meas->add_option("--subset", m_args.subset, "subset file in [N]^d (default: the full prime grid)");
    common(meas);

    CountArgs c_args;
    auto* count = app.add_subcommand("count", "count constellations of a shape");
    count->add_option("--shape", c_args.shape, "shape JSON file")->required();
    count->add_option("--limit", c_args.limit, "N")->required();
    count->add_option("--subset", c_args.subset, "subset file (default: the full prime grid)");
    count->add_flag("--list-hits", c_args.list_hits, "list every hit (a, r)");
    count->add_flag("--brute", c_args.brute, "use the exhaustive counter");
    common(count);

    ScalingArgs s_args;
    auto* scaling = app.add_subcommand("scaling", "normalized constellation counts over a grid of N");
    scaling->add_option("--shape", s_args.shape, "shape JSON file")->required();
    scaling->add_option("--grid", s_args.grid, "comma-separated N values, e.g. 1e4,3e4,1e5")->required();
    common(scaling);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }

    const auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    std::string default_format = "json";
    try {
        if (threads == 0)
            throw ConfigError("--threads must be positive");
        if (sieve->parsed()) {
            rep = run_sieve(sieve_args, threads);
            rep.command = "sieve";
        } else if (wtrick->parsed()) {
            rep = run_wtrick(wt_args, threads);
            rep.command = "wtrick";
        } else if (lf->parsed()) {
            rep = run_lf_check(lf_args, threads);
            rep.command = "lf-check";
            default_format = "csv";
        } else if (box->parsed()) {
            rep = run_box_norm(box_args);
            rep.command = "box-norm";
        } else if (fuzz->parsed()) {
            rep = run_fuzz(fuzz_args);
            rep.command = "von-neumann-fuzz";
        } else if (meas->parsed()) {
            rep = run_measure(m_args, threads);
            rep.command = "measure";
        } else if (count->parsed()) {
            rep = run_count(c_args, threads);
            rep.command = "count";
        } else if (scaling->parsed()) {
            rep = run_scaling(s_args, threads);
            rep.command = "scaling";
            default_format = "csv";
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const BudgetError& e) {
        err << "budget error: " << e.what() << "\n";
        return kBudget;
    } catch (const IntegrityError& e) {
        err << "numerical integrity error: " << e.what() << "\n";
        return kIntegrity;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string fmt = format.empty() ? default_format : format;
    if (out_path.empty())
        emit(rep, fmt, timing, out);
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        if (!os) {
            err << "error: cannot write '" << out_path << "'\n";
            return kValidation;
        }
        emit(rep, fmt, timing, os);
    }
    if (rep.exit_code == kIntegrity)
        err << "numerical integrity error: von Neumann bound violated\n";
    return rep.exit_code;
}

} // namespace constlab::cli
