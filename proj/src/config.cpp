#include "fractal/config.hpp"

#include <fstream>
#include <sstream>

namespace fractal {

namespace {

std::string trim(std::string s) {
    const char* ws = " \t\r";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

} // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    return parse(is, path);
}

KeyValueFile KeyValueFile::parse(std::istream& is, const std::string& origin) {
    KeyValueFile kv;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        kv.entries_.emplace_back(std::move(key), std::move(val));
    }
    return kv;
}

bool KeyValueFile::has(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return true;
    return false;
}

const std::string& KeyValueFile::get(const std::string& key) const {
    const std::string* found = nullptr;
    for (const auto& [k, v] : entries_)
        if (k == key) found = &v;
    if (!found) throw ConfigError("missing config key '" + key + "'");
    return *found;
}

std::vector<std::string> KeyValueFile::get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
        if (k == key) out.push_back(v);
    return out;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
}

long KeyValueFile::get_long(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    try {
        return std::stol(get(key));
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' is not an integer: '" + get(key) + "'");
    }
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    try {
        return std::stod(get(key));
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' is not a number: '" + get(key) + "'");
    }
}

IteratedFunctionSystem ExperimentConfig::make_ifs() const {
    try {
        return builtin_ifs(fractal);
    } catch (const UnknownName& e) {
        throw ConfigError(e.what());
    }
}

double ExperimentConfig::resolved_gamma(const IteratedFunctionSystem& ifs) const {
    if (gamma > 0.0) return gamma;
    return 0.25 * ifs.margin_cap(n);
}

ApproximationCurve ExperimentConfig::make_curve() const {
    if (curve_spec.rfind("preset:", 0) == 0) {
        int id = 0;
        try {
            id = std::stoi(curve_spec.substr(7));
        } catch (const std::exception&) {
            throw ConfigError("bad curve preset '" + curve_spec + "'");
        }
        if (n != 5)
            throw ConfigError("curve presets are defined at n = 5 only; this config has n = " +
                              std::to_string(n));
        return preset_curve(id, n);
    }
    if (curve_spec == "fine") return fine_curve(n);
    if (curve_spec == "uniform") return uniform_curve(n);
    std::istringstream ws(curve_spec);
    std::vector<double> w;
    double v;
    while (ws >> v) w.push_back(v);
    if (static_cast<int>(w.size()) != n)
        throw ConfigError("curve weights count " + std::to_string(w.size()) +
                          " does not match n = " + std::to_string(n));
    try {
        return ApproximationCurve(std::move(w));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

FractalDistribution ExperimentConfig::make_distribution() const {
    auto ifs = make_ifs();
    const double g = resolved_gamma(ifs);
    try {
        return FractalDistribution(std::move(ifs), n, g, make_curve(), gap_style);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig resolve_config(const KeyValueFile& kv, bool long_run) {
    ExperimentConfig cfg;
    cfg.long_run = long_run;
    if (long_run) {
        cfg.n = 5;
        cfg.train_size = 50000;
        cfg.test_size = 5000;
        cfg.steps = 1000000;
        cfg.depths = {1, 2, 3, 4, 5};
        cfg.widths = {10, 20, 50, 100, 200, 400};
        cfg.lrs = {1e-2, 1e-3, 1e-4};
    }
    cfg.fractal = kv.get_or("fractal", cfg.fractal);
    cfg.n = static_cast<int>(kv.get_long("n", cfg.n));
    if (cfg.n < 1) throw ConfigError("n must be >= 1");
    cfg.gamma = kv.get_double("gamma", cfg.gamma);
    if (kv.has("curve")) cfg.curve_spec = kv.get("curve");
    else if (cfg.n != 5) cfg.curve_spec = "uniform";
    if (kv.has("gap_style")) {
        try {
            cfg.gap_style = gap_style_from_string(kv.get("gap_style"));
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    } else {
        cfg.gap_style = cfg.fractal == "cantor2d" ? GapStyle::CentralGap
                                                  : GapStyle::FullComplement;
    }
    cfg.train_size = static_cast<std::size_t>(kv.get_long("train_size",
                                                          static_cast<long>(cfg.train_size)));
    cfg.test_size = static_cast<std::size_t>(kv.get_long("test_size",
                                                         static_cast<long>(cfg.test_size)));
    if (kv.has("depth")) {
        cfg.depths.clear();
        for (const auto& v : kv.get_all("depth")) cfg.depths.push_back(std::stoi(v));
    }
    if (kv.has("width")) {
        cfg.widths.clear();
        for (const auto& v : kv.get_all("width")) cfg.widths.push_back(std::stoi(v));
    }
    if (kv.has("lr")) {
        cfg.lrs.clear();
        for (const auto& v : kv.get_all("lr")) cfg.lrs.push_back(std::stod(v));
    }
    if (cfg.depths.empty() || cfg.widths.empty() || cfg.lrs.empty())
        throw ConfigError("depth, width and lr grids must be nonempty");
    cfg.optimizer = kv.get_or("optimizer", cfg.optimizer);
    if (cfg.optimizer != "adam" && cfg.optimizer != "sgd")
        throw ConfigError("optimizer must be adam or sgd");
    cfg.batch_size = static_cast<int>(kv.get_long("batch_size", cfg.batch_size));
    cfg.steps = kv.get_long("steps", cfg.steps);
    cfg.eval_every = kv.get_long("eval_every", cfg.eval_every);
    cfg.seeds = static_cast<int>(kv.get_long("seeds", cfg.seeds));
    if (cfg.seeds < 1) throw ConfigError("seeds must be >= 1");
    cfg.master_seed = static_cast<std::uint64_t>(kv.get_long("master_seed",
                                                             static_cast<long>(cfg.master_seed)));
    cfg.probe_t = static_cast<int>(kv.get_long("t", cfg.probe_t));
    cfg.probe_k = static_cast<int>(kv.get_long("k", cfg.probe_k));
    cfg.probe_delta = kv.get_double("delta", cfg.probe_delta);
    cfg.probe_trials = static_cast<int>(kv.get_long("trials", cfg.probe_trials));
    cfg.block_s = static_cast<int>(kv.get_long("s", cfg.block_s));
    cfg.verify_m = static_cast<std::size_t>(kv.get_long("verify_m",
                                                        static_cast<long>(cfg.verify_m)));
    cfg.net_path = kv.get_or("net", cfg.net_path);
    return cfg;
}

void write_resolved_config(std::ostream& os, const ExperimentConfig& cfg) {
    os.precision(17);
    os << "fractal = " << cfg.fractal << "\n";
    os << "n = " << cfg.n << "\n";
    os << "gamma = " << cfg.gamma << "\n";
    os << "curve = " << cfg.curve_spec << "\n";
    os << "gap_style = " << to_string(cfg.gap_style) << "\n";
    os << "train_size = " << cfg.train_size << "\n";
    os << "test_size = " << cfg.test_size << "\n";
    for (int d : cfg.depths) os << "depth = " << d << "\n";
    for (int w : cfg.widths) os << "width = " << w << "\n";
    for (double lr : cfg.lrs) os << "lr = " << lr << "\n";
    os << "optimizer = " << cfg.optimizer << "\n";
    os << "batch_size = " << cfg.batch_size << "\n";
    os << "steps = " << cfg.steps << "\n";
    os << "eval_every = " << cfg.eval_every << "\n";
    os << "seeds = " << cfg.seeds << "\n";
    os << "master_seed = " << cfg.master_seed << "\n";
    os << "t = " << cfg.probe_t << "\n";
    os << "k = " << cfg.probe_k << "\n";
    os << "delta = " << cfg.probe_delta << "\n";
    os << "trials = " << cfg.probe_trials << "\n";
    os << "s = " << cfg.block_s << "\n";
    os << "verify_m = " << cfg.verify_m << "\n";
    if (!cfg.net_path.empty()) os << "net = " << cfg.net_path << "\n";
    os << "long_run = " << (cfg.long_run ? 1 : 0) << "\n";
}

} // namespace fractal
