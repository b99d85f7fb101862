// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: varexp <experiment> [--config f.ini] [--out dir]
// [--seed n] [--resolution n]. Exit status 0 when every enabled check
// passes, 1 when a check fails, 2 on invalid input.

#include "experiments.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace varexp;
using namespace varexp::cli;

namespace
{
    struct config_error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    /// INI configuration with per-key line numbers for diagnostics. Keys
    /// are addressed as "section.key"; every key in the file must be read
    /// by the selected experiment.
    class Config
    {
    public:
        Config() = default;

        explicit Config(const std::string& path) : path_(path)
        {
            if (!std::filesystem::is_regular_file(path))
            {
                throw config_error(path + ": config file does not exist");
            }
            try
            {
                boost::property_tree::ini_parser::read_ini(path, tree_);
            }
            catch (const boost::property_tree::ini_parser_error& e)
            {
                throw config_error(path + ":" + std::to_string(e.line()) + ": " + e.message());
            }
            std::ifstream is(path);
            std::string line, section;
            for (int no = 1; std::getline(is, line); ++no)
            {
                const auto b = line.find_first_not_of(" \t");
                if (b == std::string::npos || line[b] == ';' || line[b] == '#')
                {
                    continue;
                }
                if (line[b] == '[')
                {
                    section = line.substr(b + 1, line.find(']') - b - 1);
                    continue;
                }
                const auto eq = line.find('=');
                if (eq != std::string::npos)
                {
                    auto key = line.substr(b, eq - b);
                    key.erase(key.find_last_not_of(" \t") + 1);
                    lines_[section.empty() ? key : section + "." + key] = no;
                }
            }
        }

        template <class T>
        T get(const std::string& key, T fallback)
        {
            used_.insert(key);
            const auto node = tree_.get_child_optional(boost::property_tree::ptree::path_type(key, '.'));
            if (!node)
            {
                return fallback;
            }
            const auto v = node->get_value_optional<T>();
            if (!v)
            {
                fail(key, "cannot parse '" + node->data() + "'");
            }
            return *v;
        }

        std::vector<double> list(const std::string& key, std::vector<double> fallback)
        {
            const auto raw = get<std::string>(key, "");
            if (raw.empty())
            {
                return fallback;
            }
            std::vector<double> out;
            std::stringstream ss(raw);
            std::string item;
            while (std::getline(ss, item, ','))
            {
                try
                {
                    std::size_t used = 0;
                    out.push_back(std::stod(item, &used));
                    if (item.find_first_not_of(" \t", used) != std::string::npos)
                    {
                        throw std::invalid_argument(item);
                    }
                }
                catch (const std::exception&)
                {
                    fail(key, "cannot parse list entry '" + item + "'");
                }
            }
            return out;
        }

        void require(bool cond, const std::string& key, const std::string& what) const
        {
            if (!cond)
            {
                fail(key, what);
            }
        }

        [[noreturn]] void fail(const std::string& key, const std::string& what) const
        {
            const auto it = lines_.find(key);
            const std::string where = path_.empty() ? "<defaults>" : path_ + (it == lines_.end() ? "" : ":" + std::to_string(it->second));
            throw config_error(where + ": " + key + ": " + what);
        }

        void reject_unknown() const
        {
            for (const auto& [key, line] : lines_)
            {
                if (!used_.count(key))
                {
                    fail(key, "unknown key for this experiment");
                }
            }
        }

        /// Sorted "key=value" lines; formatting and comments do not matter.
        std::string canonical() const
        {
            std::ostringstream os;
            for (const auto& [key, line] : lines_)
            {
                os << key << '=' << tree_.get<std::string>(boost::property_tree::ptree::path_type(key, '.'), "") << '\n';
            }
            return os.str();
        }

    private:
        std::string path_;
        boost::property_tree::ptree tree_;
        std::map<std::string, int> lines_;
        std::set<std::string> used_;
    };

    std::uint64_t fnv1a(const std::string& s)
    {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : s)
        {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    struct Run
    {
        std::string command;
        Config cfg;
        std::string out;
        std::uint64_t seed = 0;
        std::optional<int> resolution;

        int resolution_or(Config& c, const std::string& key, int fallback)
        {
            const int from_config = c.get<int>(key, fallback);
            const int v = resolution ? *resolution : from_config;
            c.require(v >= 16, resolution ? "--resolution" : key, "resolution must be at least 16 nodes per axis");
            return v;
        }
    };

    int at_least(Config& c, const std::string& key, int fallback, int lo)
    {
        const int v = c.get<int>(key, fallback);
        c.require(v >= lo, key, "must be at least " + std::to_string(lo));
        return v;
    }

    double positive(Config& c, const std::string& key, double fallback)
    {
        const double v = c.get<double>(key, fallback);
        c.require(v > 0.0, key, "must be positive");
        return v;
    }

    ExponentSpec exponent_spec(Config& c, const std::string& section, ExponentSpec e)
    {
        e.kind = c.get<std::string>(section + ".kind", e.kind);
        e.value = c.get<double>(section + ".value", e.value);
        e.inside = c.get<double>(section + ".inside", e.inside);
        e.outside = c.get<double>(section + ".outside", e.outside);
        e.split = c.get<double>(section + ".split", e.split);
        e.path = c.get<std::string>(section + ".path", e.path);
        c.require(e.kind == "constant" || e.kind == "two-region" || e.kind == "file" || e.kind == "smooth", section + ".kind",
                  "expected constant, two-region, file or smooth");
        if (e.kind == "file")
        {
            c.require(std::filesystem::is_regular_file(e.path), section + ".path", "exponent file '" + e.path + "' does not exist");
        }
        for (double v : {e.value, e.inside, e.outside})
        {
            c.require(v > 1.0, section + (e.kind == "constant" ? ".value" : ".inside"), "exponent values must exceed 1");
        }
        return e;
    }

    // ------------------------------------------------------------------

    Report cmd_norms(Run& run, const Sink& sink)
    {
        auto& c = run.cfg;
        NormsOptions o;
        o.resolution = run.resolution_or(c, "norms.resolution", o.resolution);
        o.fields = at_least(c, "norms.fields", o.fields, 1);
        o.exponents = c.list("norms.exponents", o.exponents);
        for (double p : o.exponents)
        {
            c.require(p > 1.0, "norms.exponents", "exponents must exceed 1");
        }
        o.holder_pairs = at_least(c, "norms.holder_pairs", o.holder_pairs, 0);
        o.holder_resolution = at_least(c, "norms.holder_resolution", o.holder_resolution, 16);
        o.tol = positive(c, "norms.tol", o.tol);
        o.variable = exponent_spec(c, "exponent", o.variable);
        c.require(o.variable.kind != "smooth", "exponent.kind", "smooth is only available for rothe-solve");
        c.reject_unknown();
        return run_norms(o, run.seed, sink);
    }

    Report cmd_mollify(Run& run, const Sink& sink)
    {
        auto& c = run.cfg;
        MollifyOptions o;
        o.domination_resolution = run.resolution_or(c, "mollify.domination_resolution", o.domination_resolution);
        o.domination_fields = at_least(c, "mollify.domination_fields", o.domination_fields, 1);
        o.dyadic_levels = at_least(c, "mollify.dyadic_levels", o.dyadic_levels, 1);
        o.smoothing_resolution = at_least(c, "mollify.smoothing_resolution", o.smoothing_resolution, 16);
        o.smoothing_fields = at_least(c, "mollify.smoothing_fields", o.smoothing_fields, 1);
        o.decomposition_resolution = at_least(c, "mollify.decomposition_resolution", o.decomposition_resolution, 16);
        o.decomposition_h = positive(c, "mollify.decomposition_h", o.decomposition_h);
        o.decomposition_T = positive(c, "mollify.decomposition_T", o.decomposition_T);
        c.reject_unknown();
        return run_mollify(o, run.seed, sink);
    }

    Report cmd_korn(Run& run, const Sink& sink)
    {
        auto& c = run.cfg;
        KornOptions o;
        o.cfg.alpha = c.get<double>("korn.alpha", o.cfg.alpha);
        o.cfg.beta = c.get<double>("korn.beta", o.cfg.beta);
        c.require(o.cfg.alpha > 1.0, "korn.alpha", "must exceed 1");
        c.require(o.cfg.beta >= o.cfg.alpha, "korn.beta", "must be at least alpha");
        o.cfg.eps = positive(c, "korn.eps", o.cfg.eps);
        o.cfg.eta_radius = positive(c, "korn.eta_radius", o.cfg.eta_radius);
        o.cfg.eta_moll_eps = positive(c, "korn.eta_moll_eps", o.cfg.eta_moll_eps);
        c.require(o.cfg.eta_moll_eps < o.cfg.eta_radius, "korn.eta_moll_eps", "must be below eta_radius");
        o.space = run.resolution_or(c, "korn.space", o.space);
        o.time = at_least(c, "korn.time", o.time, 16);
        o.n_max = at_least(c, "korn.n_max", o.n_max, 2);
        o.extent = positive(c, "korn.extent", o.extent);
        o.radius = positive(c, "korn.radius", o.radius);
        c.require(o.radius < o.extent, "korn.radius", "disc must fit inside the grid box");
        o.contrast_exponent = c.get<double>("korn.contrast_exponent", o.contrast_exponent);
        o.check_monotone = c.get<bool>("checks.monotone", o.check_monotone);
        o.check_growth = c.get<bool>("checks.growth", o.check_growth);
        o.check_lower_bound = c.get<bool>("checks.lower_bound", o.check_lower_bound);
        o.check_contrast = c.get<bool>("checks.contrast", o.check_contrast);
        c.reject_unknown();
        return run_korn(o, sink);
    }

    Report cmd_poincare(Run& run, const Sink& sink)
    {
        auto& c = run.cfg;
        PoincareOptions o;
        o.coarse = run.resolution_or(c, "poincare.coarse", o.coarse);
        o.fine = c.get<int>("poincare.fine", run.resolution ? 2 * o.coarse : o.fine);
        c.require(o.fine > o.coarse, "poincare.fine", "must exceed the coarse resolution");
        o.samples = at_least(c, "poincare.samples", o.samples, 10);
        o.stability = positive(c, "poincare.stability", o.stability);
        c.reject_unknown();
        return run_poincare(o, sink);
    }

    Report cmd_rothe(Run& run, const Sink& sink)
    {
        auto& c = run.cfg;
        const auto problem = c.get<std::string>("rothe.problem", "manufactured");
        c.require(problem == "manufactured" || problem == "random", "rothe.problem", "expected manufactured or random");
        Report rep;
        if (problem == "manufactured")
        {
            const int cells = run.resolution_or(c, "rothe.cells", 32);
            const double T = positive(c, "rothe.T", 1.0);
            const auto taus = c.list("rothe.taus", {1.0 / 8, 1.0 / 16, 1.0 / 32});
            c.require(taus.size() >= 2, "rothe.taus", "need at least two time steps");
            const bool variable = c.get<bool>("rothe.variable_exponent", false);
            const double delta = c.get<double>("law.delta", 1e-2);
            c.require(delta >= 0.0, "law.delta", "must be non-negative");
            const auto mode = c.get<std::string>("rothe.forcing", "discrete");
            c.require(mode == "discrete" || mode == "continuous", "rothe.forcing", "expected discrete or continuous");
            c.reject_unknown();
            const auto ms = manufactured(false, variable, delta);
            Table t{{"tau", "error", "ratio"}, {}};
            std::vector<double> errors;
            RotheResult<2> last;
            for (std::size_t i = 0; i < taus.size(); ++i)
            {
                const double tau = taus[i];
                const double steps = T / tau;
                c.require(std::abs(steps - std::round(steps)) < 1e-9 * steps, "rothe.taus", "every tau must divide T");
                errors.push_back(mms_run(ms, cells, T, tau, mode == "discrete" ? Forcing::discrete : Forcing::continuous, &last));
                t.rows.push_back({num(tau), num(errors.back()), i ? num(errors[i - 1] / errors[i]) : ""});
            }
            sink.table("mms_errors.csv", t);
            if (sink.enabled())
            {
                std::filesystem::create_directories(sink.path("trajectory"));
                write_trajectory(sink.path("trajectory"), last, sink.comment);
            }
            bool decreasing = true;
            std::ostringstream d;
            for (std::size_t i = 0; i < errors.size(); ++i)
            {
                d << (i ? " " : "") << short_num(errors[i]);
                decreasing = decreasing && (i == 0 || errors[i] < errors[i - 1]);
            }
            rep.add("manufactured-solution error decreases as tau is refined", decreasing, "errors " + d.str());
            return rep;
        }

        const int cells = run.resolution_or(c, "rothe.cells", 24);
        const double T = positive(c, "rothe.T", 0.5);
        const double tau = positive(c, "rothe.tau", 0.05);
        const double amp = c.get<double>("rothe.amplitude", 2.0);
        const auto dkind = c.get<std::string>("domain.kind", "square");
        c.require(dkind == "square" || dkind == "disc", "domain.kind", "expected square or disc");
        const double delta = c.get<double>("law.delta", 0.0);
        c.require(delta >= 0.0, "law.delta", "must be non-negative");
        const double gamma = c.get<double>("law.gamma", 0.0);
        const double r = c.get<double>("law.r", 1.0);
        ExponentSpec espec{"smooth", 2.0, 1.3, 2.6, 0.5, ""};
        espec = exponent_spec(c, "exponent", espec);
        const double p_lo = c.get<double>("exponent.p_lo", 1.4);
        const double p_hi = c.get<double>("exponent.p_hi", 2.8);
        c.require(p_lo > 1.0 && p_hi >= p_lo, "exponent.p_lo", "need 1 < p_lo <= p_hi");
        c.reject_unknown();

        const auto g = Grid<2>::vertex_centered({0.0, 0.0}, {1.0, 1.0}, {cells, cells});
        const auto dom = dkind == "square" ? make_rectangle_domain<2>({0.0, 0.0}, {1.0, 1.0}, g)
                                           : make_disc_domain<2>({0.5, 0.5}, 0.45, g);
        const auto data = random_rothe_data(dom, T, tau, run.seed, amp);
        const auto law = espec.kind == "smooth" ? smooth_exponent_law(data, delta, p_lo, p_hi)
                                                : ConstitutiveLaw<2>::constant_in_time(delta, espec.build(g), data.time_grid());
        const auto low = gamma == 0.0 ? LowerOrderLaw<2>::zero() : LowerOrderLaw<2>::power(gamma, r);
        low.validate(law.exponent.p_minus());
        const auto res = rothe_solve(data, law, low);
        if (sink.enabled())
        {
            std::filesystem::create_directories(sink.path("trajectory"));
            write_trajectory(sink.path("trajectory"), res, sink.comment);
        }
        const auto rows = apriori_check(res, data, law, low);
        Table t{{"k", "lhs", "rhs", "holds"}, {}};
        bool ok = true;
        for (const auto& row : rows)
        {
            ok = ok && row.holds;
            t.rows.push_back({std::to_string(row.k), num(row.lhs), num(row.rhs), row.holds ? "1" : "0"});
        }
        sink.table("apriori.csv", t);
        rep.add("discrete a priori energy bound at every step", ok, std::to_string(rows.size()) + " steps");
        return rep;
    }

    Report cmd_property_suite(Run& run, const Sink& sink)
    {
        auto& c = run.cfg;
        NormsOptions n;
        n.resolution = run.resolution_or(c, "suite.resolution", 32);
        n.fields = at_least(c, "suite.norm_fields", 20, 1);
        n.holder_pairs = at_least(c, "suite.holder_pairs", 200, 0);
        n.holder_resolution = 16;
        const int tuples = at_least(c, "suite.structure_samples", 10000, 1);
        AprioriOptions a;
        a.datasets = at_least(c, "suite.apriori_datasets", 3, 0);
        a.cells = at_least(c, "suite.apriori_cells", 16, 16);
        c.reject_unknown();
        Report rep;
        rep.append(run_norms(n, run.seed, sink));
        rep.append(run_geometry(run.seed, sink));
        rep.append(run_structure(run.seed, tuples, sink));
        if (a.datasets > 0)
        {
            rep.append(run_apriori(a, run.seed, sink));
        }
        rep.append(run_ibp(sink));
        return rep;
    }
}

int main(int argc, char** argv)
{
    CLI::App app{"varexp: experiments for variable-exponent parabolic systems"};
    app.require_subcommand(1, 1);
    Run run;
    std::string config;
    std::uint64_t seed = 0;
    int resolution = 0;
    const std::vector<std::string> commands{"norms", "mollify", "korn-figure", "poincare-verify", "rothe-solve", "property-suite"};
    for (const auto& name : commands)
    {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "INI configuration file");
        sub->add_option("--out", run.out, "output directory");
        sub->add_option("--seed", seed, "seed for randomized inputs");
        sub->add_option("--resolution", resolution, "grid nodes per axis (at least 16)");
    }
    CLI11_PARSE(app, argc, argv);
    run.command = app.get_subcommands().front()->get_name();
    run.seed = seed;
    if (app.get_subcommands().front()->count("--resolution"))
    {
        run.resolution = resolution;
    }

    try
    {
        if (!config.empty())
        {
            run.cfg = Config(config);
        }
        std::ostringstream key;
        key << run.command << '\n' << run.cfg.canonical() << "resolution=" << (run.resolution ? std::to_string(*run.resolution) : "") << '\n';
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(key.str())));
        Sink sink{run.out, "varexp " + run.command + " config_hash=" + hash + " seed=" + std::to_string(run.seed)};
        if (sink.enabled())
        {
            std::filesystem::create_directories(run.out);
        }

        Report rep;
        if (run.command == "norms")
            rep = cmd_norms(run, sink);
        else if (run.command == "mollify")
            rep = cmd_mollify(run, sink);
        else if (run.command == "korn-figure")
            rep = cmd_korn(run, sink);
        else if (run.command == "poincare-verify")
            rep = cmd_poincare(run, sink);
        else if (run.command == "rothe-solve")
            rep = cmd_rothe(run, sink);
        else
            rep = cmd_property_suite(run, sink);

        Table summary{{"check", "pass", "detail"}, {}};
        for (const auto& ch : rep.checks)
        {
            std::cout << (ch.pass ? "ok     " : "FAILED ") << ch.name << ": " << ch.detail << '\n';
            summary.rows.push_back({'"' + ch.name + '"', ch.pass ? "1" : "0", '"' + ch.detail + '"'});
        }
        sink.table("checks.csv", summary);
        if (!rep.pass())
        {
            for (const auto& ch : rep.checks)
            {
                if (!ch.pass)
                {
                    std::cerr << "varexp: check failed: " << ch.name << '\n';
                }
            }
            return 1;
        }
        return 0;
    }
    catch (const config_error& e)
    {
        std::cerr << "varexp: invalid config: " << e.what() << '\n';
        return 2;
    }
    catch (const invalid_input& e)
    {
        std::cerr << "varexp: invalid input: " << e.what() << '\n';
        return 2;
    }
    catch (const convergence_error& e)
    {
        std::cerr << "varexp: solver failed: " << e.what() << '\n';
        return 1;
    }
    catch (const std::exception& e)
    {
        std::cerr << "varexp: " << e.what() << '\n';
        return 1;
    }
}
