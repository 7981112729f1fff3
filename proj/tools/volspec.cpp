// Batch front end: prices from a model config, written as CSV tables plus a
// JSON report carrying the config hash and numerical diagnostics.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "volspec/config.hpp"
#include "volspec/mc_oracle.hpp"
#include "volspec/pricing.hpp"

using nlohmann::json;
using namespace volspec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
    std::string model;
    std::string out;
    std::string report;
    bool timing = false;
    std::size_t threads = 0;
    std::vector<double> maturities;
    std::vector<double> strikes;
    int c_max = 100;
    std::string alpha_rule = "schedule";
    std::size_t paths = 100000;
    std::uint64_t seed = 20240101;
    double t_start = 0.0;
    double t_prime = 0.25;
    double bin = 0.5;
    double cap = 0.0;
    std::vector<double> k_var;
    std::vector<double> k_vol;
    std::size_t vix_strikes = 2001;
    double leakage_error = 1e-4;
};

// Worst-case numerical diagnostics over everything a command computed.
struct Diagnostics {
    double mass_error = 0.0;
    double residue = 0.0;
    double leakage = 0.0;
    double min_entry = 0.0;
    double row_sum_error = 0.0;
    double condition = 0.0;
    std::vector<std::string> warnings;

    void add(const KernelDiagnostics& k) {
        residue = std::max(residue, k.max_imag);
        min_entry = std::min(min_entry, k.min_entry);
        row_sum_error = std::max(row_sum_error, k.max_row_sum_error);
    }
    void add(const VarianceDistribution& vd, double T) {
        const auto& d = vd.joint.diagnostics;
        add(d.underlying);
        mass_error = std::max(mass_error, std::abs(d.mass - 1.0));
        residue = std::max(residue, d.max_imag);
        min_entry = std::min(min_entry, d.min_entry);
        leakage = std::max(leakage, vd.leakage);
        if (vd.leakage_warning) {
            std::ostringstream msg;
            msg << "variance lattice wrap-around probability " << vd.leakage << " at T=" << T;
            warnings.push_back(msg.str());
        }
    }
    json to_json() const {
        return {{"mass_error", mass_error},       {"residue", residue},
                {"leakage", leakage},             {"min_entry", min_entry},
                {"row_sum_error", row_sum_error}, {"condition", condition},
                {"warnings", warnings}};
    }
};

// A command's output: CSV text plus JSON result rows.
struct Output {
    std::string product;
    std::ostringstream csv;
    json inputs = json::object();
    json results = json::array();
    Diagnostics diagnostics;

    Output() { csv << std::setprecision(6); }
};

LiftParams lift_params(const Options& o) {
    LiftParams p;
    p.c_max = o.c_max;
    p.blocks.threads = o.threads;
    p.guard.error = o.leakage_error;
    const std::string& rule = o.alpha_rule;
    if (rule == "schedule") return p;
    if (rule.rfind("fixed:", 0) == 0) {
        try {
            std::size_t used = 0;
            const std::string value = rule.substr(6);
            const double v = std::stod(value, &used);
            if (used != value.size() || !(v > 0.0)) throw std::invalid_argument(rule);
            p.fixed_spacing = v;
            return p;
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("--alpha-rule must be 'schedule' or 'fixed:<positive number>', got '" + rule +
                      "'");
}

json lift_inputs(const Options& o) { return {{"C", o.c_max}, {"alpha_rule", o.alpha_rule}}; }

std::vector<double> or_default(const std::vector<double>& v, std::vector<double> fallback) {
    return v.empty() ? fallback : v;
}

std::vector<double> strike_range(double lo, double hi, double step) {
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double k = lo + step * i;
        if (k > hi + 1e-9) break;
        out.push_back(k);
    }
    return out;
}

void vanilla_smile(const Engine& engine, const Options& o, Output& out) {
    out.product = "vanilla_smile";
    const auto maturities = or_default(o.maturities, {0.5, 1.0, 2.0});
    const double spot = engine.forward();
    const auto strikes = or_default(o.strikes, strike_range(0.6 * spot, 1.4 * spot, 0.05 * spot));
    out.inputs = {{"T", maturities}, {"strikes", strikes}};
    const auto& curve = engine.config().discount;
    const double s0 = curve.spot_from_forward(0.0, spot);
    out.csv << "T,strike,call_price,implied_vol\n";
    for (double T : maturities) {
        const auto row = engine.kernel_row(engine.start_state(), 0.0, T);
        out.diagnostics.add(row.diagnostics);
        const std::span<const double> probs(row.probabilities.data(),
                                            static_cast<std::size_t>(row.probabilities.size()));
        for (double k : strikes) {
            const auto payoff = terminal_payoff(engine.state_levels(), T, curve, [&](double s) {
                return vanilla_payoff(OptionKind::Call, k, s);
            });
            const double price = price_european(probs, payoff, 0.0, T, curve);
            const double r = curve.rate(T);
            const double q = curve.dividend_yield(T);
            const double iv = implied_vol(price, OptionKind::Call, s0, k, T, r, q);
            out.csv << T << ',' << k << ',' << price << ',' << iv << '\n';
            out.results.push_back({{"product", "call"},
                                   {"inputs", {{"T", T}, {"strike", k}}},
                                   {"price", price},
                                   {"vol_terms", 100.0 * iv}});
        }
    }
}

void greeks(const Engine& engine, const Options& o, Output& out) {
    out.product = "greeks";
    const auto maturities = or_default(o.maturities, {0.5, 1.0, 2.0});
    const double strike = o.strikes.empty() ? engine.forward() : o.strikes.front();
    out.inputs = {{"T", maturities}, {"strike", strike}};
    out.csv << "T,node,level,price,delta,gamma,vega\n";
    for (double T : maturities) {
        const auto g = greeks_profile(engine, VanillaSpec{OptionKind::Call, strike, T});
        out.inputs["regime"] = g.regime;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            out.csv << T << ',' << g.nodes[i] << ',' << g.levels[i] << ',' << g.price[i] << ','
                    << g.delta[i] << ',' << g.gamma[i] << ',' << g.vega[i] << '\n';
            out.results.push_back({{"product", "call_greeks"},
                                   {"inputs", {{"T", T}, {"node", g.nodes[i]}, {"level", g.levels[i]}}},
                                   {"price", g.price[i]},
                                   {"delta", g.delta[i]},
                                   {"gamma", g.gamma[i]},
                                   {"vega", g.vega[i]}});
        }
    }
}

void forward_smile(const Engine& engine, const Options& o, Output& out) {
    out.product = "forward_smile";
    const double t_prime = o.t_prime;
    const double maturity = o.maturities.empty() ? t_prime + 1.0 : o.maturities.front();
    const auto strikes = or_default(o.strikes, strike_range(0.7, 1.3, 0.05));
    out.inputs = {{"t_prime", t_prime}, {"T", maturity}, {"forward_strikes", strikes}};
    const auto prices = price_forward_start_strip(engine, t_prime, maturity, strikes);
    const double s0 = engine.config().discount.spot_from_forward(0.0, engine.forward());
    out.csv << "forward_strike,price,forward_implied_vol\n";
    for (std::size_t i = 0; i < strikes.size(); ++i) {
        const ForwardStartSpec spec{t_prime, maturity, strikes[i]};
        const double iv = forward_implied_vol(prices[i], spec, s0);
        out.csv << strikes[i] << ',' << prices[i] << ',' << iv << '\n';
        out.results.push_back({{"product", "forward_start_call"},
                               {"inputs", {{"forward_strike", strikes[i]}}},
                               {"price", prices[i]},
                               {"vol_terms", 100.0 * iv}});
    }
}

void var_derivs(const Engine& engine, const Options& o, Output& out) {
    out.product = "variance_derivatives";
    const double T = o.maturities.empty() ? 1.0 : o.maturities.front();
    const auto params = lift_params(o);
    out.inputs = lift_inputs(o);
    out.inputs["T"] = T;
    const auto vd = variance_distribution(engine, o.t_start, T, params);
    out.diagnostics.add(vd, T);
    const auto& curve = engine.config().discount;
    const auto fair = fair_strikes(vd.pdf);

    struct Item {
        std::string name;
        double strike;
        VariancePayoff payoff;
        bool vol_quote;
    };
    std::vector<Item> items{{"var_swap_fair_strike", 0.0, VariancePayoff::var_swap(), true},
                            {"vol_swap_fair_strike", 0.0, VariancePayoff::vol_swap(), false}};
    const auto k_var = or_default(o.k_var, {0.5 * fair.k_var, fair.k_var, 1.5 * fair.k_var});
    const auto k_vol = or_default(o.k_vol, {0.8 * fair.k_vol, fair.k_vol, 1.2 * fair.k_vol});
    for (double k : k_var) items.push_back({"var_swaption", k, VariancePayoff::var_swaption(k), false});
    for (double k : k_vol) items.push_back({"vol_swaption", k, VariancePayoff::vol_swaption(k), false});
    if (o.cap > 0.0)
        items.push_back({"capped_vol_swap_fair_strike", o.cap,
                         VariancePayoff::capped_vol_swap(0.0, o.cap), false});

    out.csv << "product,strike,price,vol_terms\n";
    for (const auto& item : items) {
        const double price = price_variance_derivative(vd.pdf, item.payoff, o.t_start, T, curve);
        // Fair variance strike quoted as 100 sqrt(K); vol-denominated values as 100 x.
        const double quoted = item.vol_quote ? vol_terms(price) : 100.0 * price;
        out.csv << item.name << ',' << item.strike << ',' << price << ',' << quoted << '\n';
        out.results.push_back({{"product", item.name},
                               {"inputs", {{"strike", item.strike}, {"T", T}}},
                               {"price", price},
                               {"vol_terms", quoted}});
    }
}

void var_term_structure(const Engine& engine, const Options& o, Output& out) {
    out.product = "variance_term_structure";
    const auto maturities = or_default(o.maturities, {0.5, 1.0, 2.0, 3.0, 4.0, 5.0});
    const auto params = lift_params(o);
    VixSpec vix;
    vix.default_strikes = o.vix_strikes;
    out.inputs = lift_inputs(o);
    out.inputs["T"] = maturities;
    out.inputs["vix_strikes"] = o.vix_strikes;
    out.csv << "T,log_contract,portfolio,var_swap,vol_swap\n";
    for (double T : maturities) {
        const auto vd = variance_distribution(engine, 0.0, T, params);
        out.diagnostics.add(vd, T);
        const auto fair = fair_strikes(vd.pdf);
        const double log_c = log_contract(engine, T);
        const double port = vix_portfolio(engine, T, vix);
        const double cols[4] = {vol_terms(log_c), vol_terms(port), vol_terms(fair.k_var),
                                100.0 * fair.k_vol};
        out.csv << T;
        for (double c : cols) out.csv << ',' << c;
        out.csv << '\n';
        out.results.push_back({{"product", "term_structure"},
                               {"inputs", {{"T", T}}},
                               {"price",
                                {{"log_contract", log_c},
                                 {"portfolio", port},
                                 {"var_swap", fair.k_var},
                                 {"vol_swap", fair.k_vol}}},
                               {"vol_terms",
                                {{"log_contract", cols[0]},
                                 {"portfolio", cols[1]},
                                 {"var_swap", cols[2]},
                                 {"vol_swap", cols[3]}}}});
    }
}

void vix_density(const Engine& engine, const Options& o, Output& out) {
    out.product = "vix_pdf";
    const auto horizons = or_default(o.maturities, {0.5, 1.0, 2.0});
    VixSpec vix;
    vix.default_strikes = o.vix_strikes;
    out.inputs = {{"t", horizons}, {"bin_width", o.bin}, {"tenor", vix.tenor}};
    out.csv << "t,vix_lower,probability\n";
    for (double t : horizons) {
        const auto pdf = vix_pdf(engine, t, vix, o.bin);
        out.diagnostics.mass_error = std::max(out.diagnostics.mass_error, std::abs(pdf.mass() - 1.0));
        double mean = 0.0;
        for (std::size_t i = 0; i < pdf.weights.size(); ++i) {
            out.csv << t << ',' << pdf.bin_lower[i] << ',' << pdf.weights[i] << '\n';
            mean += pdf.weights[i] * (pdf.bin_lower[i] + 0.5 * o.bin);
        }
        out.results.push_back({{"product", "vix_pdf"},
                               {"inputs", {{"t", t}}},
                               {"price", {{"mass", pdf.mass()}, {"mean_vix", mean}}},
                               {"vol_terms", mean}});
    }
}

void joint_pdf(const Engine& engine, const Options& o, Output& out) {
    out.product = "joint_pdf";
    const double T = o.maturities.empty() ? 1.0 : o.maturities.front();
    out.inputs = lift_inputs(o);
    out.inputs["t"] = o.t_start;
    out.inputs["T"] = T;
    const auto vd = variance_distribution(engine, o.t_start, T, lift_params(o));
    out.diagnostics.add(vd, T);
    write_joint_csv(out.csv, vd.joint, engine.state_levels(), engine.model().generator.spot_states());
    const auto fair = fair_strikes(vd.pdf);
    out.results.push_back({{"product", "joint_pdf"},
                           {"inputs", {{"T", T}}},
                           {"price", {{"mass", vd.joint.diagnostics.mass}, {"var_swap", fair.k_var}}},
                           {"vol_terms", vol_terms(fair.k_var)}});
}

void mc_compare(const Engine& engine, const Options& o, Output& out) {
    out.product = "mc_compare";
    auto maturities = or_default(o.maturities, {1.0, 3.0, 5.0});
    std::sort(maturities.begin(), maturities.end());
    out.inputs = lift_inputs(o);
    out.inputs["T"] = maturities;
    out.inputs["paths"] = o.paths;
    out.inputs["seed"] = o.seed;
    out.inputs["steps_per_year"] = kTradingDaysPerYear;

    PathConfig pc;
    pc.n_paths = o.paths;
    pc.horizon = maturities.back();
    pc.observations = maturities;
    pc.seed = o.seed;
    pc.threads = o.threads;
    const auto sim = simulate(pc, engine);
    out.diagnostics.add(sim.kernel_diagnostics);

    const auto params = lift_params(o);
    std::vector<ComparisonRow> rows;
    for (std::size_t i = 0; i < maturities.size(); ++i) {
        rows.push_back(summarize_mc(sim.sigma[i], maturities[i]));
        const auto vd = variance_distribution(engine, 0.0, maturities[i], params);
        out.diagnostics.add(vd, maturities[i]);
        rows.push_back(summarize_spectral(vd.pdf, maturities[i]));
    }
    write_comparison_csv(out.csv, rows);
    for (const auto& r : rows)
        out.results.push_back({{"product", "variance_comparison"},
                               {"inputs", {{"method", r.method}, {"paths", r.paths}, {"T", r.maturity}}},
                               {"price", {{"options", r.options}, {"options_se", r.options_se}}},
                               {"vol_terms",
                                {{"var_swap", r.var_swap},
                                 {"var_swap_se", r.var_swap_se},
                                 {"vol_swap", r.vol_swap},
                                 {"vol_swap_se", r.vol_swap_se}}}});
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral pricing of realized-variance and volatility derivatives"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--model", o.model, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", o.out, "CSV output path (default: stdout)");
    app.add_option("--report", o.report, "JSON report path (default: <out>.report.json)");
    app.add_option("--threads", o.threads, "Worker threads (default: VOLSPEC_THREADS or all cores)");
    app.add_flag("--timing", o.timing, "Embed wall time in the JSON report");

    using Command = void (*)(const Engine&, const Options&, Output&);
    std::vector<std::pair<CLI::App*, Command>> commands;
    auto add = [&](const char* name, const char* help, Command fn) {
        auto* sub = app.add_subcommand(name, help);
        commands.emplace_back(sub, fn);
        return sub;
    };
    auto lift_flags = [&](CLI::App* sub) {
        sub->add_option("--C", o.c_max, "Variance lattice half-size C (2C+1 buckets)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--alpha-rule", o.alpha_rule, "schedule | fixed:<spacing>");
        sub->add_option("--leakage-error", o.leakage_error,
                        "Wrap-around probability that aborts the run");
    };

    auto* smile = add("vanilla-smile", "Call prices and implied vols", vanilla_smile);
    smile->add_option("--T", o.maturities, "Maturities");
    smile->add_option("--strikes", o.strikes, "Strikes");

    auto* gk = add("greeks", "Delta/gamma/vega profiles of a call", greeks);
    gk->add_option("--T", o.maturities, "Maturities");
    gk->add_option("--strike", o.strikes, "Strike (default: spot)")->expected(1);

    auto* fwd = add("forward-smile", "Forward-start call prices and forward implied vols",
                    forward_smile);
    fwd->add_option("--t-prime", o.t_prime, "Strike-setting date T'");
    fwd->add_option("--T", o.maturities, "Maturity (default: T' + 1)")->expected(1);
    fwd->add_option("--strikes", o.strikes, "Forward strikes a");

    auto* vd = add("var-derivs", "Variance/volatility swaps and swaptions", var_derivs);
    vd->add_option("--T", o.maturities, "Maturity")->expected(1);
    vd->add_option("--t", o.t_start, "Start of the accrual window");
    vd->add_option("--kvar", o.k_var, "Variance swaption strikes");
    vd->add_option("--kvol", o.k_vol, "Volatility swaption strikes");
    vd->add_option("--cap", o.cap, "Cap for a capped volatility swap");
    lift_flags(vd);

    auto* ts = add("var-term-structure", "Log contract, VIX portfolio, var and vol swaps by maturity",
                   var_term_structure);
    ts->add_option("--T", o.maturities, "Maturities");
    ts->add_option("--vix-strikes", o.vix_strikes, "Strikes in the replication strip");
    lift_flags(ts);

    auto* vp = add("vix-pdf", "Distribution of the one-month VIX at future dates", vix_density);
    vp->add_option("--T", o.maturities, "Horizons");
    vp->add_option("--bin", o.bin, "Bin width in VIX points")->check(CLI::PositiveNumber);
    vp->add_option("--vix-strikes", o.vix_strikes, "Strikes in the replication strip");

    auto* jp = add("joint-pdf", "Joint density of spot and realized variance", joint_pdf);
    jp->add_option("--T", o.maturities, "Maturity")->expected(1);
    jp->add_option("--t", o.t_start, "Start of the accrual window");
    lift_flags(jp);

    auto* mc = add("mc-compare", "Monte Carlo versus spectral variance derivatives", mc_compare);
    mc->add_option("--T", o.maturities, "Maturities (one simulation to the longest)");
    mc->add_option("--paths", o.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    mc->add_option("--seed", o.seed, "Random seed");
    lift_flags(mc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        const auto started = std::chrono::steady_clock::now();
        const ModelConfig config = load_model_config(o.model);
        const Engine engine(config);
        Output out;
        out.diagnostics.condition = engine.decomposition().condition;
        for (const auto& [sub, fn] : commands)
            if (sub->parsed()) fn(engine, o, out);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        for (const auto& w : out.diagnostics.warnings) std::cerr << "warning: " << w << '\n';

        json report = {{"command", app.get_subcommands().front()->get_name()},
                       {"product", out.product},
                       {"model", config.description},
                       {"config_hash", config_hash(config)},
                       {"inputs", out.inputs},
                       {"results", out.results},
                       {"diagnostics", out.diagnostics.to_json()}};
        if (o.timing) report["diagnostics"]["wall_time_seconds"] = elapsed;

        std::string report_path = o.report;
        if (report_path.empty() && !o.out.empty()) report_path = o.out + ".report.json";
        if (o.out.empty())
            std::cout << out.csv.str();
        else
            write_file(o.out, out.csv.str());
        if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
        return kExitOk;
    } catch (const NumericalError& e) {
        std::cerr << "numerical guard: " << e.what() << " (quantity " << e.quantity() << ")\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
