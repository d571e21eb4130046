#include "karma_ev/config.hpp"

#include <algorithm>
#include <fstream>

#include "karma_ev/checkpoint.hpp"

namespace karma_ev {

using nlohmann::json;

namespace {

template <class T>
T get_as(const json& obj, const char* key, T fallback)
{
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

std::vector<double> number_list(const json& v, const char* key)
{
    if (!v.is_array()) throw ConfigError(std::string("field '") + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(std::string("field '") + key + "' must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

// {"8": 0.75, "4": 0.25} keyed by physical value, mapped onto a grid.
template <class Lookup>
std::vector<double> keyed_probs(const json& v, const char* key, std::size_t n, Lookup lookup)
{
    if (!v.is_object()) throw ConfigError(std::string("field '") + key + "' must map values to probabilities");
    std::vector<double> out(n, 0.0);
    for (const auto& [k, p] : v.items()) {
        double value = 0.0;
        try {
            value = std::stod(k);
        } catch (const std::exception&) {
            throw ConfigError(std::string("field '") + key + "': key '" + k + "' is not a number");
        }
        if (!p.is_number()) throw ConfigError(std::string("field '") + key + "': probabilities must be numbers");
        try {
            out[static_cast<std::size_t>(lookup(value))] += p.template get<double>();
        } catch (const ModelError& e) {
            throw ConfigError(std::string("field '") + key + "': " + e.what());
        }
    }
    return out;
}

void apply_demand(ModelParams& p, const json& demand)
{
    if (demand.contains("joint")) {
        p.demand.assign(static_cast<std::size_t>(p.n_deadlines() * p.n_desired() * p.n_urgency()), 0.0);
        for (const auto& row : demand.at("joint")) {
            const auto v = number_list(row, "demand.joint");
            if (v.size() != 4) throw ConfigError("demand.joint rows are [deadline_hr, desired_kwh, urgency, p]");
            try {
                const int td = p.deadline_index(v[0]);
                const int sd = p.desired_index(v[1]);
                const int u = p.urgency_index(v[2]);
                p.demand[static_cast<std::size_t>((td * p.n_desired() + sd) * p.n_urgency() + u)] += v[3];
            } catch (const ModelError& e) {
                throw ConfigError(std::string("demand.joint: ") + e.what());
            }
        }
        return;
    }
    for (const char* key : {"deadline_hr", "desired_soc_kwh", "urgency"})
        if (!demand.contains(key)) throw ConfigError(std::string("demand needs 'joint' or '") + key + "'");
    const auto td = keyed_probs(demand.at("deadline_hr"), "demand.deadline_hr", static_cast<std::size_t>(p.n_deadlines()),
                                [&](double v) { return p.deadline_index(v); });
    const auto sd = keyed_probs(demand.at("desired_soc_kwh"), "demand.desired_soc_kwh",
                                static_cast<std::size_t>(p.n_desired()), [&](double v) { return p.desired_index(v); });
    const auto u = keyed_probs(demand.at("urgency"), "demand.urgency", static_cast<std::size_t>(p.n_urgency()),
                               [&](double v) { return p.urgency_index(v); });
    set_product_demand(p, td, sd, u);
}

void apply_model(ModelParams& p, const json& m)
{
    if (!m.is_object()) throw ConfigError("'model' must be an object");
    const std::size_t old_t = static_cast<std::size_t>(std::max(p.n_intervals(), 0));
    const int old_td = p.n_deadlines(), old_sd = p.n_desired(), old_u = p.n_urgency();

    p.delta_t = get_as(m, "delta_t", p.delta_t);
    p.t_start = get_as(m, "t_start", p.t_start);
    p.t_end = get_as(m, "t_end", p.t_end);
    p.e_nom = get_as(m, "e_nom", p.e_nom);
    p.s_max = get_as(m, "s_max", p.s_max);
    p.td_max = get_as(m, "td_max", p.td_max);
    p.k_max = get_as(m, "k_max", p.k_max);
    p.k_bar = get_as(m, "k_bar", p.k_bar);
    p.epsilon = get_as(m, "epsilon", p.epsilon);
    p.delta_end = get_as(m, "delta_end", p.delta_end);
    if (m.contains("urgency_levels")) p.urgency_levels = number_list(m.at("urgency_levels"), "urgency_levels");
    if (m.contains("desired_soc_levels"))
        p.desired_soc_levels = number_list(m.at("desired_soc_levels"), "desired_soc_levels");
    if (p.delta_t <= 0.0 || p.e_nom <= 0.0) throw ConfigError("delta_t and e_nom must be positive");

    const auto nt = static_cast<std::size_t>(std::max(p.n_intervals(), 0));
    if (m.contains("capacity")) {
        const json& c = m.at("capacity");
        if (c.is_number()) p.capacity.assign(nt, c.get<double>());
        else p.capacity = number_list(c, "capacity");
    } else if (nt != old_t && !p.capacity.empty()) {
        const double c = p.capacity.front();
        for (double x : p.capacity)
            if (x != c) throw ConfigError("capacity must be restated when the day length changes");
        p.capacity.assign(nt, c);
    }
    if (m.contains("arrival")) p.arrival = number_list(m.at("arrival"), "arrival");
    else if (nt != old_t) throw ConfigError("arrival must be restated when the day length changes");

    const bool grids_changed = p.n_deadlines() != old_td || p.n_desired() != old_sd || p.n_urgency() != old_u;
    if (m.contains("demand")) apply_demand(p, m.at("demand"));
    else if (grids_changed) throw ConfigError("demand must be restated when a grid changes");

    const std::string carry = get_as<std::string>(m, "carryover", "trip");
    if (carry != "trip") throw ConfigError("unknown carryover rule '" + carry + "' (only 'trip' is supported)");
    try {
        set_trip_carryover(p);
    } catch (const ModelError& e) {
        throw ConfigError(e.what());
    }
}

void apply_solver(SolverOptions& s, const json& j)
{
    if (!j.is_object()) throw ConfigError("'solver' must be an object");
    s.max_iters = get_as(j, "max_iters", s.max_iters);
    s.tol = get_as(j, "tol", s.tol);
    s.eta = get_as(j, "eta", s.eta);
    s.temp_start = get_as(j, "temp_start", s.temp_start);
    s.temp_end = get_as(j, "temp_end", s.temp_end);
    s.anneal_iters = get_as(j, "anneal_iters", s.anneal_iters);
    s.seed = get_as(j, "seed", s.seed);
    s.dist_tol = get_as(j, "dist_tol", s.dist_tol);
    s.value_tol = get_as(j, "value_tol", s.value_tol);
    s.max_cycles = get_as(j, "max_cycles", s.max_cycles);
    const std::string rule = get_as<std::string>(j, "auction", s.rule == AuctionRule::exact ? "exact" : "smoothed");
    if (rule == "exact") s.rule = AuctionRule::exact;
    else if (rule == "smoothed") s.rule = AuctionRule::smoothed;
    else throw ConfigError("solver.auction must be 'exact' or 'smoothed'");
    if (s.max_iters < 0) throw ConfigError("solver.max_iters must be >= 0");
    if (!(s.eta > 0.0 && s.eta <= 1.0)) throw ConfigError("solver.eta must be in (0, 1]");
    if (!(s.temp_start > 0.0 && s.temp_end > 0.0)) throw ConfigError("solver temperatures must be positive");
    if (!(s.tol > 0.0 && s.dist_tol > 0.0 && s.value_tol > 0.0)) throw ConfigError("solver tolerances must be positive");
}

void validate(const RunConfig& c)
{
    try {
        StateSpace space(c.model);
    } catch (const ModelError& e) {
        throw ConfigError(std::string("invalid model: ") + e.what());
    }
    if (c.sim.agents < 1 || c.sim.days < 1 || c.sim.burn_in < 0) throw ConfigError("simulation sizes must be positive");
}

}  // namespace

Scheme parse_scheme(const std::string& name)
{
    if (name == "karma") return Scheme::karma;
    if (name == "fcfs") return Scheme::fcfs;
    if (name == "edf") return Scheme::edf;
    throw ConfigError("unknown scheme '" + name + "'");
}

RunConfig preset_config(const std::string& name)
{
    RunConfig c;
    c.setting = name;
    if (name == "moderate") c.model = moderate_scarcity();
    else if (name == "high") c.model = high_scarcity();
    else if (name == "desk") c.model = desk_scale();
    else throw ConfigError("unknown preset '" + name + "' (moderate, high, desk)");
    return c;
}

RunConfig parse_config(const json& doc)
{
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    static const std::vector<std::string> known{"preset", "setting", "model", "solver", "simulation", "schemes", "out_dir"};
    for (const auto& [k, v] : doc.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown field '" + k + "'");

    RunConfig c = doc.contains("preset") ? preset_config(get_as<std::string>(doc, "preset", "")) : RunConfig{};
    if (!doc.contains("preset")) {
        if (!doc.contains("model")) throw ConfigError("config needs a 'preset' or a full 'model'");
        c.model = ModelParams{};
        c.model.urgency_levels.clear();
        c.model.desired_soc_levels.clear();
    }
    if (doc.contains("model")) {
        if (doc.contains("preset")) c.setting = "custom";
        apply_model(c.model, doc.at("model"));
    }
    c.setting = get_as(doc, "setting", c.setting);
    if (doc.contains("solver")) apply_solver(c.solver, doc.at("solver"));
    if (doc.contains("simulation")) {
        const json& s = doc.at("simulation");
        c.sim.agents = get_as(s, "agents", c.sim.agents);
        c.sim.days = get_as(s, "days", c.sim.days);
        c.sim.burn_in = get_as(s, "burn_in", c.sim.burn_in);
        c.sim.seed = get_as(s, "seed", c.sim.seed);
    }
    if (doc.contains("schemes")) {
        c.schemes.clear();
        for (const auto& s : doc.at("schemes")) {
            if (!s.is_string()) throw ConfigError("schemes must be names");
            c.schemes.push_back(parse_scheme(s.get<std::string>()));
        }
    }
    c.out_dir = get_as(doc, "out_dir", c.out_dir);
    validate(c);
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(doc);
}

json to_json(const RunConfig& c)
{
    const ModelParams& p = c.model;
    json demand = json::array();
    for (int td = 0; td < p.n_deadlines(); ++td)
        for (int sd = 0; sd < p.n_desired(); ++sd)
            for (int u = 0; u < p.n_urgency(); ++u)
                demand.push_back({p.deadline_value(td), p.desired_soc_levels[static_cast<std::size_t>(sd)],
                                  p.urgency_levels[static_cast<std::size_t>(u)], p.demand_prob(td, sd, u)});
    json model = {
        {"delta_t", p.delta_t},
        {"t_start", p.t_start},
        {"t_end", p.t_end},
        {"e_nom", p.e_nom},
        {"capacity", p.capacity},
        {"s_max", p.s_max},
        {"td_max", p.td_max},
        {"k_max", p.k_max},
        {"k_bar", p.k_bar},
        {"urgency_levels", p.urgency_levels},
        {"desired_soc_levels", p.desired_soc_levels},
        {"arrival", p.arrival},
        {"demand", {{"joint", demand}}},
        {"epsilon", p.epsilon},
        {"delta_end", p.delta_end},
        {"carryover", "trip"},
    };
    const SolverOptions& s = c.solver;
    json solver = {
        {"max_iters", s.max_iters},   {"tol", s.tol},
        {"eta", s.eta},               {"temp_start", s.temp_start},
        {"temp_end", s.temp_end},     {"anneal_iters", s.anneal_iters},
        {"seed", s.seed},             {"dist_tol", s.dist_tol},
        {"value_tol", s.value_tol},   {"max_cycles", s.max_cycles},
        {"auction", s.rule == AuctionRule::exact ? "exact" : "smoothed"},
    };
    json schemes = json::array();
    for (Scheme sc : c.schemes) schemes.push_back(scheme_name(sc));
    return {
        {"setting", c.setting},
        {"model", model},
        {"solver", solver},
        {"simulation", {{"agents", c.sim.agents}, {"days", c.sim.days}, {"burn_in", c.sim.burn_in}, {"seed", c.sim.seed}}},
        {"schemes", schemes},
    };
}

std::uint64_t config_hash(const RunConfig& config) { return fnv1a(to_json(config).dump()); }

}  // namespace karma_ev
