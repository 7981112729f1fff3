#include "volspec/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace volspec {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& source, const std::string& field,
                              const std::string& what) {
    throw ConfigError(source + ": field '" + field + "': " + what);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& source,
                const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            field_error(source, where.empty() ? key : where + "." + key, "unknown field");
}

double number(const json& obj, const std::string& key, const std::string& source,
              const std::string& where) {
    const std::string field = where.empty() ? key : where + "." + key;
    if (!obj.contains(key)) field_error(source, field, "missing");
    const auto& v = obj.at(key);
    if (!v.is_number()) field_error(source, field, "expected a number");
    return v.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback,
                 const std::string& source, const std::string& where) {
    return obj.contains(key) ? number(obj, key, source, where) : fallback;
}

std::vector<std::pair<double, double>> knots(const json& v, const std::string& source,
                                             const std::string& field) {
    if (!v.is_array()) field_error(source, field, "expected an array of [x, y] pairs");
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& k = v[i];
        if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
            field_error(source, field + "[" + std::to_string(i) + "]", "expected [x, y]");
        out.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
    return out;
}

PiecewiseLinear curve(const json& obj, const std::string& key, const std::string& source) {
    const std::string field = "discount." + key;
    if (!obj.contains(key)) return PiecewiseLinear({{0.0, 0.0}});
    const auto& v = obj.at(key);
    if (v.is_number()) return PiecewiseLinear({{0.0, v.get<double>()}});
    auto k = knots(v, source, field);
    if (k.empty()) field_error(source, field, "needs at least one knot");
    return PiecewiseLinear(std::move(k));
}

json curve_json(const PiecewiseLinear& c) {
    if (c.knots().size() == 1) return c.knots().front().second;
    json arr = json::array();
    for (const auto& [x, y] : c.knots()) arr.push_back({x, y});
    return arr;
}

int line_of(std::string_view text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

}  // namespace

ModelConfig parse_model_config(std::string_view text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::ostringstream msg;
        msg << source << ":" << line_of(text, e.byte) << ": JSON syntax error: " << e.what();
        throw ConfigError(msg.str());
    }
    if (!doc.is_object()) throw ConfigError(source + ": top level must be an object");
    check_keys(doc,
               {"grid", "regimes", "switch_generators", "time_change", "discount", "start_regime",
                "cev_reference", "description"},
               source, "");

    ModelConfig cfg;
    if (doc.contains("grid")) {
        const auto& g = doc.at("grid");
        if (!g.is_object()) field_error(source, "grid", "expected an object");
        check_keys(g, {"n", "spot", "top", "bottom", "stretch"}, source, "grid");
        if (g.contains("n")) {
            if (!g.at("n").is_number_integer() || g.at("n").get<long long>() < 0)
                field_error(source, "grid.n", "expected a non-negative integer");
            cfg.grid.n = g.at("n").get<std::size_t>();
        }
        cfg.grid.spot = number_or(g, "spot", cfg.grid.spot, source, "grid");
        cfg.grid.top = number_or(g, "top", cfg.grid.top, source, "grid");
        cfg.grid.bottom = number_or(g, "bottom", cfg.grid.bottom, source, "grid");
        cfg.grid.stretch = number_or(g, "stretch", cfg.grid.stretch, source, "grid");
    }

    if (!doc.contains("regimes")) field_error(source, "regimes", "missing");
    const auto& regimes = doc.at("regimes");
    if (!regimes.is_array() || regimes.empty())
        field_error(source, "regimes", "expected a non-empty array");
    for (std::size_t i = 0; i < regimes.size(); ++i) {
        const std::string where = "regimes[" + std::to_string(i) + "]";
        const auto& r = regimes[i];
        if (!r.is_object()) field_error(source, where, "expected an object");
        check_keys(r, {"sigma", "beta", "sigma_bar", "nu_plus", "nu_minus", "level"}, source, where);
        RegimeParams p;
        p.sigma = number(r, "sigma", source, where);
        p.beta = number(r, "beta", source, where);
        p.sigma_bar = number(r, "sigma_bar", source, where);
        p.nu_plus = number_or(r, "nu_plus", 0.0, source, where);
        p.nu_minus = number_or(r, "nu_minus", 0.0, source, where);
        p.level = number(r, "level", source, where);
        cfg.regimes.push_back(p);
    }

    if (!doc.contains("switch_generators")) field_error(source, "switch_generators", "missing");
    const auto& sw = doc.at("switch_generators");
    if (!sw.is_array()) field_error(source, "switch_generators", "expected an array of matrices");
    for (std::size_t g = 0; g < sw.size(); ++g) {
        const std::string where = "switch_generators[" + std::to_string(g) + "]";
        const auto& m = sw[g];
        if (!m.is_array() || m.empty()) field_error(source, where, "expected a square matrix");
        const auto rows = static_cast<Eigen::Index>(m.size());
        SwitchGenerator s{RMatrix(rows, rows)};
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& row = m[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != rows)
                field_error(source, where + "[" + std::to_string(i) + "]",
                            "expected a row of " + std::to_string(rows) + " numbers");
            for (Eigen::Index j = 0; j < rows; ++j) {
                const auto& v = row[static_cast<std::size_t>(j)];
                if (!v.is_number())
                    field_error(source,
                                where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                                "expected a number");
                s.matrix(i, j) = v.get<double>();
            }
        }
        cfg.switch_generators.push_back(std::move(s));
    }

    if (doc.contains("time_change")) {
        try {
            cfg.time_change = TimeChange(knots(doc.at("time_change"), source, "time_change"));
        } catch (const ConfigError& e) {
            const std::string what = e.what();
            if (what.rfind(source, 0) == 0) throw;
            field_error(source, "time_change", what);
        }
    }
    if (doc.contains("discount")) {
        const auto& d = doc.at("discount");
        if (!d.is_object()) field_error(source, "discount", "expected an object");
        check_keys(d, {"r", "q"}, source, "discount");
        cfg.discount = DiscountCurve(curve(d, "r", source), curve(d, "q", source));
    }
    if (doc.contains("start_regime")) {
        const auto& s = doc.at("start_regime");
        if (!s.is_number_integer() || s.get<long long>() < 0)
            field_error(source, "start_regime", "expected a non-negative integer");
        cfg.start_regime = s.get<std::size_t>();
    }
    cfg.cev_reference = number_or(doc, "cev_reference", 0.0, source, "");
    if (doc.contains("description")) {
        if (!doc.at("description").is_string())
            field_error(source, "description", "expected a string");
        cfg.description = doc.at("description").get<std::string>();
    }

    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model_config(buf.str(), path.string());
}

std::string model_config_json(const ModelConfig& config, int indent) {
    json doc;
    doc["grid"] = {{"n", config.grid.n},
                   {"spot", config.grid.spot},
                   {"top", config.grid.top},
                   {"bottom", config.grid.bottom},
                   {"stretch", config.grid.stretch}};
    doc["regimes"] = json::array();
    for (const auto& p : config.regimes)
        doc["regimes"].push_back({{"sigma", p.sigma},
                                  {"beta", p.beta},
                                  {"sigma_bar", p.sigma_bar},
                                  {"nu_plus", p.nu_plus},
                                  {"nu_minus", p.nu_minus},
                                  {"level", p.level}});
    doc["switch_generators"] = json::array();
    for (const auto& s : config.switch_generators) {
        json m = json::array();
        for (Eigen::Index i = 0; i < s.matrix.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < s.matrix.cols(); ++j) row.push_back(s.matrix(i, j));
            m.push_back(row);
        }
        doc["switch_generators"].push_back(m);
    }
    if (!config.time_change.is_identity()) {
        json tc = json::array();
        for (const auto& [t, f] : config.time_change.knots()) tc.push_back({t, f});
        doc["time_change"] = tc;
    }
    doc["discount"] = {{"r", curve_json(config.discount.rate_curve())},
                       {"q", curve_json(config.discount.dividend_curve())}};
    doc["start_regime"] = config.start_regime;
    if (config.cev_reference > 0.0) doc["cev_reference"] = config.cev_reference;
    if (!config.description.empty()) doc["description"] = config.description;
    return doc.dump(indent);
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const ModelConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(model_config_json(config, -1))));
    return buf;
}

}  // namespace volspec
