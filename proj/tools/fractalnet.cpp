// Command-line front end: dataset generation, classifier compilation and
// verification, hardness probes, training sweeps, region counting.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fractal/analysis.hpp"
#include "fractal/build.hpp"
#include "fractal/config.hpp"
#include "fractal/train.hpp"

namespace fs = std::filesystem;
using namespace fractal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitVerification = 3;
constexpr int kExitProbePrecondition = 4;
constexpr int kExitInternal = 5;

struct CliArgs {
    std::string command;
    std::string config_path;
    std::string out_dir = "out";
    std::string net_path;
    int jobs = 0; // 0 -> hardware concurrency
    bool long_run = false;
};

void usage(std::ostream& os) {
    os << "usage: fractalnet <gen|build-verify|probe|sweep|regions> [options]\n"
          "  --config PATH   key=value experiment config\n"
          "  --out DIR       output directory (default: out)\n"
          "  --jobs N        worker threads for sweep (default: hardware)\n"
          "  --long-run      paper-scale defaults instead of desk scale\n"
          "  --net PATH      net file (regions; optional for build-verify)\n";
}

CliArgs parse_args(int argc, char** argv) {
    CliArgs args;
    if (argc < 2) throw ConfigError("missing subcommand");
    args.command = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        auto next = [&](const char* what) -> std::string {
            if (i + 1 >= argc) throw ConfigError(std::string(what) + " needs a value");
            return argv[++i];
        };
        if (a == "--config") args.config_path = next("--config");
        else if (a == "--out") args.out_dir = next("--out");
        else if (a == "--net") args.net_path = next("--net");
        else if (a == "--jobs") args.jobs = std::stoi(next("--jobs"));
        else if (a == "--long-run") args.long_run = true;
        else if (a == "--help" || a == "-h") { usage(std::cout); std::exit(kExitOk); }
        else throw ConfigError("unknown flag '" + a + "'");
    }
    return args;
}

ExperimentConfig load_config(const CliArgs& args) {
    if (args.config_path.empty()) {
        std::istringstream empty;
        return resolve_config(KeyValueFile::parse(empty, "<defaults>"), args.long_run);
    }
    return resolve_config(KeyValueFile::parse_file(args.config_path), args.long_run);
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
}

void dump_resolved(const ExperimentConfig& cfg, const std::string& dir) {
    std::ofstream os(dir + "/resolved_config.txt");
    write_resolved_config(os, cfg);
}

int cmd_gen(const CliArgs& args) {
    ExperimentConfig cfg = load_config(args);
    auto ifs = cfg.make_ifs();
    cfg.gamma = cfg.resolved_gamma(ifs);
    FractalDistribution dist = cfg.make_distribution();
    ensure_out_dir(args.out_dir);
    dump_resolved(cfg, args.out_dir);
    Dataset train = dist.sample_dataset(cfg.train_size, derive_seed(cfg.master_seed, 1));
    Dataset test = dist.sample_dataset(cfg.test_size, derive_seed(cfg.master_seed, 2));
    write_dataset(args.out_dir + "/train.csv", train);
    write_dataset(args.out_dir + "/test.csv", test);
    std::cout << "wrote " << train.size() << " train and " << test.size()
              << " test samples to " << args.out_dir << "\n";
    return kExitOk;
}

int cmd_build_verify(const CliArgs& args) {
    ExperimentConfig cfg = load_config(args);
    auto ifs = cfg.make_ifs();
    cfg.gamma = cfg.resolved_gamma(ifs);
    ensure_out_dir(args.out_dir);
    dump_resolved(cfg, args.out_dir);

    const std::string net_source = !args.net_path.empty() ? args.net_path : cfg.net_path;
    LayeredNet net;
    if (!net_source.empty()) {
        net = load_net(net_source);
    } else if (cfg.block_s >= 1) {
        net = build_blocked_classifier(ifs, cfg.n, cfg.block_s, cfg.gamma);
    } else {
        net = build_exact_classifier(ifs, cfg.n, cfg.gamma);
    }
    save_net(args.out_dir + "/classifier.net", net);

    VerificationReport report =
        verify_classifier(net, ifs, cfg.n, cfg.gamma, cfg.verify_m, cfg.master_seed);
    {
        std::ofstream os(args.out_dir + "/verify_report.txt");
        os << "depth = " << net.depth() << "\n";
        os << "max_width = " << net.max_width() << "\n";
        os << "pos_total = " << report.pos_total << "\n";
        os << "pos_correct = " << report.pos_correct << "\n";
        os << "neg_total = " << report.neg_total << "\n";
        os << "neg_correct = " << report.neg_correct << "\n";
        os << "boundary_skipped = " << report.boundary_skipped << "\n";
        os.precision(17);
        os << "pos_rate = " << report.pos_rate() << "\n";
        os << "neg_rate = " << report.neg_rate() << "\n";
    }
    std::cout << "net: depth " << net.depth() << ", max width " << net.max_width()
              << "; positives " << report.pos_correct << "/" << report.pos_total
              << ", negatives " << report.neg_correct << "/" << report.neg_total
              << ", skipped " << report.boundary_skipped << "\n";
    if (!report.perfect()) {
        std::cerr << "verification below 100%\n";
        return kExitVerification;
    }
    return kExitOk;
}

int cmd_probe(const CliArgs& args) {
    ExperimentConfig cfg = load_config(args);
    ensure_out_dir(args.out_dir);
    dump_resolved(cfg, args.out_dir);
    GradientProbeReport report;
    try {
        report = hardness_probe(cfg.probe_t, cfg.probe_k, cfg.make_curve(), cfg.n,
                                cfg.probe_delta, cfg.probe_trials, cfg.master_seed);
    } catch (const ThresholdViolated& e) {
        std::cerr << e.what() << "\n";
        return kExitProbePrecondition;
    }
    {
        std::ofstream os(args.out_dir + "/probe.csv");
        write_probe_csv(os, report);
    }
    {
        std::ofstream os(args.out_dir + "/probe_summary.txt");
        write_probe_summary(os, report);
    }
    std::cout << "probe: n' = " << report.n_prime << ", P(n') = " << report.p_nprime
              << "; fractions w/b/err/affine = " << report.frac_w << "/" << report.frac_b
              << "/" << report.frac_err << "/" << report.frac_affine << " (target "
              << 1.0 - report.delta << ")\n";
    return kExitOk;
}

struct SweepCell {
    int depth = 0;
    int width = 0;
    double lr = 0.0;
    int seed_idx = 0;
    // results
    double best_accuracy = 0.0;
    long best_step = 0;
    long steps = 0;
    double seconds = 0.0;
    std::string status = "ok";
    std::vector<TrainHistoryRow> history;
};

int cmd_sweep(const CliArgs& args) {
    ExperimentConfig cfg = load_config(args);
    auto ifs = cfg.make_ifs();
    cfg.gamma = cfg.resolved_gamma(ifs);
    FractalDistribution dist = cfg.make_distribution();
    ensure_out_dir(args.out_dir);
    ensure_out_dir(args.out_dir + "/history");
    dump_resolved(cfg, args.out_dir);

    const Dataset train_data = dist.sample_dataset(cfg.train_size, derive_seed(cfg.master_seed, 1));
    const Dataset test_data = dist.sample_dataset(cfg.test_size, derive_seed(cfg.master_seed, 2));

    std::vector<SweepCell> cells;
    for (int depth : cfg.depths)
        for (int width : cfg.widths)
            for (double lr : cfg.lrs)
                for (int s = 0; s < cfg.seeds; ++s)
                    cells.push_back({depth, width, lr, s});

    const int jobs = args.jobs > 0 ? args.jobs
                                   : std::max(1u, std::thread::hardware_concurrency());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= cells.size()) break;
            SweepCell& cell = cells[i];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                TrainConfig tc;
                tc.optimizer = cfg.optimizer == "sgd" ? TrainConfig::Opt::SGD
                                                      : TrainConfig::Opt::Adam;
                tc.lr = cell.lr;
                tc.batch_size = cfg.batch_size;
                tc.steps = cfg.steps;
                tc.eval_every = cfg.eval_every;
                tc.seed = derive_seed(cfg.master_seed, 1000 + i);
                // depth counts hidden layers, matching the experiment tables.
                std::vector<int> widths;
                widths.push_back(ifs.dim());
                for (int h = 0; h < cell.depth; ++h) widths.push_back(cell.width);
                widths.push_back(1);
                TrainResult res = train(train_data, test_data, widths, InitScheme::paper_uniform(0.5), tc);
                cell.best_accuracy = res.best_accuracy;
                cell.best_step = res.best_step;
                cell.steps = cfg.steps;
                cell.history = std::move(res.history);
            } catch (const std::exception& e) {
                cell.status = std::string("error: ") + e.what();
            }
            cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                               .count();
        }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    {
        std::ofstream os(args.out_dir + "/results.csv");
        os << "depth,width,lr,seed,best_accuracy,best_step,steps,seconds,status\n";
        os.precision(17);
        for (const auto& c : cells) {
            os << c.depth << "," << c.width << "," << c.lr << "," << c.seed_idx << ","
               << c.best_accuracy << "," << c.best_step << "," << c.steps << "," << c.seconds
               << "," << c.status << "\n";
        }
    }
    for (const auto& c : cells) {
        if (c.history.empty()) continue;
        std::ostringstream name;
        name << args.out_dir << "/history/d" << c.depth << "_w" << c.width << "_lr" << c.lr
             << "_s" << c.seed_idx << ".csv";
        std::ofstream os(name.str());
        write_history_csv(os, c.history);
    }
    // Aggregate: per (depth, width), max over lr within each seed, then the
    // mean and sd over seeds.
    {
        std::ofstream os(args.out_dir + "/aggregate.csv");
        os << "depth,width,mean_best,sd_best,seeds\n";
        os.precision(17);
        for (int depth : cfg.depths) {
            for (int width : cfg.widths) {
                std::vector<double> per_seed(static_cast<std::size_t>(cfg.seeds), 0.0);
                std::vector<bool> seen(static_cast<std::size_t>(cfg.seeds), false);
                for (const auto& c : cells) {
                    if (c.depth != depth || c.width != width || c.status != "ok") continue;
                    auto& v = per_seed[static_cast<std::size_t>(c.seed_idx)];
                    v = seen[static_cast<std::size_t>(c.seed_idx)] ? std::max(v, c.best_accuracy)
                                                                   : c.best_accuracy;
                    seen[static_cast<std::size_t>(c.seed_idx)] = true;
                }
                double sum = 0.0;
                int cnt = 0;
                for (int s = 0; s < cfg.seeds; ++s)
                    if (seen[static_cast<std::size_t>(s)]) {
                        sum += per_seed[static_cast<std::size_t>(s)];
                        ++cnt;
                    }
                if (cnt == 0) continue;
                const double mean = sum / cnt;
                double ss = 0.0;
                for (int s = 0; s < cfg.seeds; ++s)
                    if (seen[static_cast<std::size_t>(s)])
                        ss += (per_seed[static_cast<std::size_t>(s)] - mean) *
                              (per_seed[static_cast<std::size_t>(s)] - mean);
                const double sd = cnt > 1 ? std::sqrt(ss / (cnt - 1)) : 0.0;
                os << depth << "," << width << "," << mean << "," << sd << "," << cnt << "\n";
            }
        }
    }
    std::cout << "sweep finished: " << cells.size() << " cells -> " << args.out_dir << "\n";
    return kExitOk;
}

int cmd_regions(const CliArgs& args) {
    if (args.net_path.empty()) throw ConfigError("regions needs --net PATH");
    LayeredNet net = load_net(args.net_path);
    PiecewiseLinear1D pwl = extract_pwl_1d(net);
    RegionCount rc = count_regions_and_crossings(pwl);
    std::cout << "breakpoints = " << pwl.breaks.size() << "\n"
              << "regions = " << rc.regions << "\n"
              << "sign_changes = " << rc.sign_changes << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CliArgs args;
    try {
        args = parse_args(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        usage(std::cerr);
        return kExitConfig;
    }
    try {
        if (args.command == "gen") return cmd_gen(args);
        if (args.command == "build-verify") return cmd_build_verify(args);
        if (args.command == "probe") return cmd_probe(args);
        if (args.command == "sweep") return cmd_sweep(args);
        if (args.command == "regions") return cmd_regions(args);
        std::cerr << "unknown subcommand '" << args.command << "'\n";
        usage(std::cerr);
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const ThresholdViolated& e) {
        std::cerr << e.what() << "\n";
        return kExitProbePrecondition;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
