#include "adlab/config.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "adlab/errors.hpp"
#include "adlab/serialize.hpp"

namespace adlab {

using nlohmann::json;

std::string tool_version() { return std::string("adlab ") + ADLAB_VERSION; }

namespace {

// Reads keys from one object and remembers which were consumed.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
    }

    template <typename T>
    void opt(const char* key, T& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end() || it->is_null()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("invalid value for '" + name(key) + "': " + e.what());
        }
    }

    const json* sub(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() || it->is_null() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + name(it.key()) + "'");
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1, start = 0;
    for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
            start = k + 1;
        } else {
            ++col;
        }
    }
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::ostringstream os;
    os << "line " << line << ", column " << col << ": " << text.substr(start, end - start);
    return os.str();
}

void read_data(Reader& r, SyntheticConfig& c) {
    r.opt("d", c.d);
    r.opt("N", c.N);
    r.opt("P", c.P);
    r.opt("alpha", c.alpha);
    r.opt("sigma_n", c.sigma_n);
    r.opt("p_un", c.p_un);
    r.opt("seed", c.seed);
}

void read_teacher(Reader& r, TeacherSpec& t) {
    std::string kind = to_string(t.kind);
    r.opt("kind", kind);
    t.kind = teacher_kind_from_string(kind);
    r.opt("gamma", t.gamma);
    r.opt("custom_unlearnable_margin", t.custom_unlearnable_margin);
}

void read_attack(Reader& r, AttackConfig& a) {
    std::optional<double> step;
    r.opt("epsilon", a.epsilon);
    r.opt("steps", a.steps);
    if (const json* s = r.sub("step_size")) {
        try {
            step = s->get<double>();
        } catch (const json::exception& e) {
            throw ConfigError("invalid value for '" + r.name("step_size") + "': " + e.what());
        }
    }
    a.step_size = step ? *step : 2.5 * a.epsilon / std::max(a.steps, 1);
}

void read_train(Reader& r, TrainConfig& t) {
    std::string objective = to_string(t.objective);
    r.opt("eta", t.eta);
    r.opt("epsilon", t.epsilon);
    r.opt("T", t.T);
    r.opt("objective", objective);
    t.objective = objective_from_string(objective);
    r.opt("log_every", t.log_every);
    r.opt("test_count", t.test_count);
    r.opt("seed", t.seed);
    r.opt("C0", t.C0);
    r.opt("C1", t.C1);
}

}  // namespace

void ExperimentConfig::validate() const {
    data.validate();
    if (network.m < 1) throw ConfigError("network.m must be >= 1");
    if (!(network.sigma_0 > 0.0)) throw ConfigError("network.sigma_0 must be positive");
    train.validate();
    if (!(event_check.delta > 0.0 && event_check.delta < 1.0))
        throw ConfigError("event_check.delta must lie in (0, 1)");
    if (entropy.attack_steps < 1) throw ConfigError("entropy.attack_steps must be >= 1");
    if (identify.attack_steps < 1) throw ConfigError("identify.attack_steps must be >= 1");
    if (jobs < 0) throw ConfigError("jobs must be >= 0");
}

ExperimentBase ExperimentConfig::base() const {
    ExperimentBase b;
    b.data = data;
    b.m = network.m;
    b.sigma_0 = network.sigma_0;
    b.train = train;
    b.event_delta = event_check.delta;
    return b;
}

SweepSpec ExperimentConfig::sweep_spec() const {
    SweepSpec s;
    s.base = base();
    s.p_un_values = sweep.p_un_values;
    s.methods = sweep.methods;
    s.seeds = sweep.seeds;
    s.vary_data_seed = sweep.vary_data_seed;
    return s;
}

AttackConfig ExperimentConfig::criterion_attack(int steps) const {
    return AttackConfig::standard(train.eval_attack.epsilon, steps);
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": parse error at " + line_context(text, e.byte > 0 ? e.byte - 1 : 0) +
                          "\n  " + e.what());
    }

    ExperimentConfig c;
    Reader top(doc, "");
    if (const json* s = top.sub("data")) {
        Reader r(*s, "data");
        read_data(r, c.data);
        r.finish();
    }
    if (const json* s = top.sub("network")) {
        Reader r(*s, "network");
        r.opt("m", c.network.m);
        r.opt("sigma_0", c.network.sigma_0);
        r.finish();
    }
    if (const json* s = top.sub("train")) {
        Reader r(*s, "train");
        read_train(r, c.train);
        r.finish();
    }
    if (const json* s = top.sub("teacher")) {
        Reader r(*s, "teacher");
        read_teacher(r, c.train.teacher);
        r.finish();
    }
    // The eval attack defaults to the training budget.
    c.train.eval_attack = AttackConfig::standard(c.train.epsilon, 20);
    if (const json* s = top.sub("eval_attack")) {
        Reader r(*s, "eval_attack");
        read_attack(r, c.train.eval_attack);
        r.finish();
    }
    if (const json* s = top.sub("event_check")) {
        Reader r(*s, "event_check");
        r.opt("delta", c.event_check.delta);
        r.finish();
    }
    if (const json* s = top.sub("sweep")) {
        Reader r(*s, "sweep");
        r.opt("p_un_values", c.sweep.p_un_values);
        std::vector<std::string> methods;
        r.opt("methods", methods);
        if (!methods.empty()) {
            c.sweep.methods.clear();
            for (const auto& m : methods) c.sweep.methods.push_back(Method::parse(m));
        }
        r.opt("seeds", c.sweep.seeds);
        r.opt("vary_data_seed", c.sweep.vary_data_seed);
        r.finish();
    }
    if (const json* s = top.sub("entropy")) {
        Reader r(*s, "entropy");
        r.opt("margins", c.entropy.margins);
        r.opt("attack_steps", c.entropy.attack_steps);
        r.finish();
    }
    if (const json* s = top.sub("identify")) {
        Reader r(*s, "identify");
        r.opt("attack_steps", c.identify.attack_steps);
        r.finish();
    }
    if (const json* s = top.sub("output")) {
        Reader r(*s, "output");
        r.opt("dir", c.output.dir);
        r.opt("overwrite", c.output.overwrite);
        r.finish();
    }
    top.opt("verbosity", c.verbosity);
    top.opt("jobs", c.jobs);
    if (const json* s = top.sub("overrides")) c.overrides = *s;
    top.finish();
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_text_file(path), path.string());
}

void apply_override(json& document, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' must have the form section.key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &document;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        if (!node->contains(part)) (*node)[part] = json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
    if (!document.contains("overrides")) document["overrides"] = json::array();
    document["overrides"].push_back({{"key", key}, {"value", value}, {"source", "command line"}});
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source,
                                         const std::vector<std::string>& assignments) {
    if (assignments.empty()) return parse_experiment_config(text, source);
    json doc;
    try {
        doc = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": parse error at " + line_context(text, e.byte > 0 ? e.byte - 1 : 0) +
                          "\n  " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(source + ": top level must be an object");
    for (const auto& a : assignments) apply_override(doc, a);
    return parse_experiment_config(doc.dump(), source);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& assignments) {
    return parse_experiment_config(read_text_file(path), path.string(), assignments);
}

json to_json(const SyntheticConfig& c) {
    return {{"d", c.d}, {"N", c.N}, {"P", c.P}, {"alpha", c.alpha},
            {"sigma_n", c.sigma_n}, {"p_un", c.p_un}, {"seed", c.seed}};
}

SyntheticConfig synthetic_config_from_json(const json& j) {
    SyntheticConfig c;
    Reader r(j, "data");
    read_data(r, c);
    r.finish();
    c.validate();
    return c;
}

json to_json(const TeacherSpec& t) {
    return {{"kind", to_string(t.kind)}, {"gamma", t.gamma},
            {"custom_unlearnable_margin", t.custom_unlearnable_margin}};
}

json to_json(const AttackConfig& a) {
    return {{"epsilon", a.epsilon}, {"steps", a.steps}, {"step_size", a.step_size}};
}

json to_json(const TrainConfig& t) {
    return {{"eta", t.eta},         {"epsilon", t.epsilon},      {"T", t.T},
            {"objective", to_string(t.objective)},               {"log_every", t.log_every},
            {"test_count", t.test_count},                        {"seed", t.seed},
            {"C0", t.C0},           {"C1", t.C1}};
}

json to_json(const ExperimentConfig& c) {
    std::vector<std::string> methods;
    for (const auto& m : c.sweep.methods) methods.push_back(m.label());
    return {{"data", to_json(c.data)},
            {"network", {{"m", c.network.m}, {"sigma_0", c.network.sigma_0}}},
            {"train", to_json(c.train)},
            {"teacher", to_json(c.train.teacher)},
            {"eval_attack", to_json(c.train.eval_attack)},
            {"event_check", {{"delta", c.event_check.delta}}},
            {"sweep",
             {{"p_un_values", c.sweep.p_un_values},
              {"methods", methods},
              {"seeds", c.sweep.seeds},
              {"vary_data_seed", c.sweep.vary_data_seed}}},
            {"entropy", {{"margins", c.entropy.margins}, {"attack_steps", c.entropy.attack_steps}}},
            {"identify", {{"attack_steps", c.identify.attack_steps}}},
            {"output", {{"dir", c.output.dir}, {"overwrite", c.output.overwrite}}},
            {"verbosity", c.verbosity},
            {"jobs", c.jobs},
            {"overrides", c.overrides}};
}

json to_json(const ExperimentBase& b) {
    return {{"data", to_json(b.data)},
            {"network", {{"m", b.m}, {"sigma_0", b.sigma_0}}},
            {"train", to_json(b.train)},
            {"teacher", to_json(b.train.teacher)},
            {"eval_attack", to_json(b.train.eval_attack)},
            {"event_check", {{"delta", b.event_delta}}}};
}

ExperimentBase experiment_base_from_json(const json& j) {
    json doc = j;
    // A run's JSON metadata nests the base under "config"; accept both shapes.
    if (j.contains("config")) doc = j.at("config");
    json trimmed = json::object();
    for (const char* key : {"data", "network", "train", "teacher", "eval_attack", "event_check"})
        if (doc.contains(key)) trimmed[key] = doc.at(key);
    return parse_experiment_config(trimmed.dump(), "<run metadata>").base();
}

namespace {

json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const EventEReport& rep) {
    json props = json::array();
    for (const auto& p : rep.properties)
        props.push_back({{"name", p.name},
                         {"quantity", p.quantity},
                         {"pass", p.pass},
                         {"measured_min", finite_or_null(p.measured_min)},
                         {"measured_max", finite_or_null(p.measured_max)},
                         {"lower", finite_or_null(p.lower)},
                         {"upper", finite_or_null(p.upper)}});
    return {{"delta", rep.delta}, {"all_pass", rep.all_pass()}, {"properties", props}};
}

json to_json(const HittingTimes& h) {
    return {{"T0", optional_int(h.T0)},
            {"T1", optional_int(h.T1)},
            {"C0", h.C0},
            {"C1", h.C1},
            {"signal_cutoff", h.signal_cutoff},
            {"noise_cutoff", h.noise_cutoff}};
}

json to_json(const InvariantReport& inv) {
    json decomp = json::array();
    for (const auto& [t, c] : inv.decomposition)
        decomp.push_back({{"iteration", t},
                          {"max_abs_residual", c.max_abs_residual},
                          {"max_abs_response", c.max_abs_response},
                          {"relative_residual", c.relative()}});
    return {{"signal_monotone", inv.signal_monotone},
            {"first_monotonicity_violation", optional_int(inv.first_monotonicity_violation)},
            {"monotonicity_checked_steps", inv.monotonicity_checked_steps},
            {"bracket_checked_steps", inv.bracket_checked_steps},
            {"bracket_violations", inv.bracket_violations},
            {"first_bracket_violation", optional_int(inv.first_bracket_violation)},
            {"orthogonal", inv.orthogonal},
            {"rho_nonnegative_nondecreasing", inv.rho_nonnegative_nondecreasing},
            {"signal_cap_ok", inv.signal_cap_ok},
            {"decomposition", decomp}};
}

json to_json(const IdentificationResult& r) {
    return {{"ensemble_size", r.ensemble_size},
            {"estimated_learnable", r.estimated_learnable},
            {"estimated_unlearnable", r.estimated_unlearnable},
            {"unclassified", r.unclassified},
            {"correct_count", r.correct_count},
            {"histogram", r.histogram}};
}

json to_json(const EntropyStudy& s) {
    json rows = json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"margin", r.margin},
                        {"mean_entropy", r.mean_entropy},
                        {"final_robust_test_acc", r.final_robust_test},
                        {"peak_robust_test_acc", r.peak_robust_test},
                        {"degradation", r.degradation},
                        {"ok", r.ok},
                        {"error", r.error}});
    return {{"proxy_unlearnable", s.proxy_unlearnable},
            {"reference_peak_iteration", s.reference_peak_iteration},
            {"rows", rows},
            {"spearman", s.spearman ? json(*s.spearman) : json(nullptr)},
            {"note", s.note}};
}

json run_metadata(const RunOutput& run, const EventEReport& event_report, double delta) {
    const auto& r = run.result;
    const auto& last = r.log.rows.back();
    json summary = {{"final_robust_train_acc", last.robust_train_acc},
                    {"final_robust_test_acc", last.robust_test_acc},
                    {"final_clean_test_acc", last.clean_test_acc},
                    {"peak_robust_test_acc", r.peak.robust_test_acc},
                    {"peak_iteration", r.peak.iteration},
                    {"initial_max_noise_response", r.initial_max_noise_response},
                    {"final_max_noise_response", last.max_noise_response},
                    {"initial_max_unlearnable_response", finite_or_null(r.initial_max_unlearnable_response)},
                    {"final_max_unlearnable_response", finite_or_null(last.max_unlearnable_response)},
                    {"final_max_signal", last.max_signal},
                    {"logged_rows", r.log.rows.size()}};
    return {{"tool_version", tool_version()},
            {"method", run.method.label()},
            {"config", to_json(run.base)},
            {"seeds",
             {{"data", run.base.data.seed},
              {"train", run.base.train.seed},
              {"pgd_random_start", false}}},
            {"event_E", to_json(event_report)},
            {"event_E_delta", delta},
            {"hitting_times", to_json(r.hitting)},
            {"invariants", to_json(r.invariants)},
            {"summary", summary},
            {"unlearnable_indices", run.dataset.unlearnable_indices}};
}

}  // namespace adlab
