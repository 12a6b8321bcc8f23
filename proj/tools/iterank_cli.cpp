// iterank: command-line front end.
//
//   iterank split     --input u.data --upl 10,30 --repetitions 5 --output splits/
//   iterank recommend --train splits/train_upl30_rep0.tsv --user 196 --top-k 10
//   iterank evaluate  --input u.data --upl 30 --repetitions 5 --output reports/
//   iterank diagnose  --input u.data --upl 30 --max-users 100 --output reports/
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iterank/iterank.hpp"

namespace fs = std::filesystem;
using namespace iterank;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::string flag_name(std::string_view key) {
    std::string s(key);
    std::replace(s.begin(), s.end(), '_', '-');
    return "--" + s;
}

const std::map<std::string_view, std::string_view> kFlagHelp{
    {"alpha", "phase-1 restart probability in [0,1] (default 0.15)"},
    {"beta", "phase-2 restart probability in [0,1] (default 0.15)"},
    {"tol", "L1 convergence tolerance for both walks (default 1e-10)"},
    {"max_iter", "iteration cap for both walks (default 100)"},
    {"upl", "comma-separated training profile lengths (default 10,20,30,40,50)"},
    {"cutoffs", "comma-separated NDCG cutoffs (default 1,3,5,10)"},
    {"repetitions", "random splits per UPL (default 5)"},
    {"min_test", "minimum held-out ratings per kept user (default 10)"},
    {"seed", "64-bit seed for split sampling (default 0)"},
    {"top_k", "length of each recommendation list (default 10)"},
    {"input", "ratings file: user, item, rating[, timestamp] per line"},
    {"format", "ratings file format: tsv or csv (default tsv)"},
    {"output", "output directory (default .)"},
    {"threads", "worker threads for per-user tasks (default: hardware cores)"},
    {"max_users", "evaluate/diagnose at most this many kept users per split, 0 = all (default 0)"},
    {"schedule", "walk update schedule: gauss_seidel or jacobi (default gauss_seidel)"},
    {"start", "walk starting vector: restart or uniform (default restart)"},
    {"candidates", "items ranked during evaluation: test or unseen (default test)"},
};

// Flags registered on a subcommand, kept as raw strings so that only flags actually
// given on the command line override the config file.
struct FlagSet {
    std::string config_path;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> opts;

    void add(CLI::App& app, std::initializer_list<std::string_view> keys) {
        app.add_option("--config", config_path, "flat key=value config file; flags override it");
        for (auto key : keys) {
            auto& slot = raw[std::string(key)];
            opts[std::string(key)] = app.add_option(flag_name(key), slot, std::string(kFlagHelp.at(key)));
        }
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg.apply_file(config_path);
        for (const auto& [key, opt] : opts)
            if (opt->count() > 0) cfg.set(key, raw.at(key));
        cfg.validate();
        return cfg;
    }
};

std::string extension(RatingsFormat f) { return f == RatingsFormat::csv_umr ? ".csv" : ".tsv"; }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

int cmd_split(const RunConfig& cfg) {
    if (cfg.input.empty()) throw UsageError("split needs --input");
    const auto data = load_ratings(cfg.input, cfg.format);
    ensure_dir(cfg.output);
    for (auto upl : cfg.upl) {
        for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
            const auto split = upl_split(data, {upl, cfg.min_test, cfg.seed, cfg.repetitions}, rep);
            const auto stem = "upl" + std::to_string(upl) + "_rep" + std::to_string(rep) + extension(cfg.format);
            save_ratings((fs::path(cfg.output) / ("train_" + stem)).string(), split.train, cfg.format);
            save_ratings((fs::path(cfg.output) / ("test_" + stem)).string(), split.test, cfg.format);
            std::cerr << "upl=" << upl << " rep=" << rep << ": " << split.kept_users.size() << " users, "
                      << split.train.ratings.size() << " train / " << split.test.ratings.size() << " test ratings\n";
        }
    }
    return 0;
}

int cmd_recommend(const RunConfig& cfg, const std::string& train_path, const std::vector<std::string>& users,
                  const std::string& out_file) {
    if (train_path.empty()) throw UsageError("recommend needs --train");
    const auto train = load_ratings(train_path, cfg.format);
    const Engine engine(UPNet::build(derive_preferences(train)), cfg.engine());
    const auto groups = train.by_user();

    std::vector<UserId> targets;
    if (users.empty()) {
        for (UserId u = 0; u < train.n_users; ++u) targets.push_back(u);
    } else {
        for (const auto& raw : users) {
            if (auto id = train.user_ids.find(raw)) targets.push_back(*id);
            else std::cerr << "warning: user " << raw << " not found in training data\n";
        }
    }

    std::vector<std::vector<ItemId>> lists(targets.size());
    std::vector<std::vector<double>> scores(targets.size());
    std::vector<char> ok(targets.size(), 0);
    parallel_for(targets.size(), cfg.threads, [&](std::size_t k) {
        std::vector<ItemId> exclude;
        for (const auto& r : groups[targets[k]]) exclude.push_back(r.item);
        try {
            const auto run = engine.run(targets[k]);
            lists[k] = recommend_topk(run.scores, cfg.top_k, exclude);
            for (auto i : lists[k]) scores[k].push_back(run.scores.score[i]);
            ok[k] = 1;
        } catch (const ColdStartError&) {
        }
    });

    std::ofstream file;
    if (!out_file.empty()) {
        file.open(out_file, std::ios::binary);
        if (!file) throw DataError("cannot write '" + out_file + "'");
    }
    std::ostream& out = out_file.empty() ? std::cout : file;
    std::size_t warm = 0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const auto& raw_user = train.user_ids.raw(targets[k]);
        if (!ok[k]) {
            std::cerr << "warning: user " << raw_user << " has no pairwise preference (cold start), skipped\n";
            continue;
        }
        ++warm;
        for (std::size_t rank = 0; rank < lists[k].size(); ++rank)
            out << raw_user << '\t' << rank + 1 << '\t' << train.item_ids.raw(lists[k][rank]) << '\t'
                << RunConfig::shortest(scores[k][rank]) << '\n';
    }
    if (warm == 0) {
        std::cerr << "error: no requested user could be served\n";
        return kExitData;
    }
    return 0;
}

void write_with_header(const fs::path& path, const RunConfig& cfg, auto&& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << cfg.echo();
    body(out);
}

int cmd_evaluate(const RunConfig& cfg) {
    if (cfg.input.empty()) throw UsageError("evaluate needs --input");
    const auto data = load_ratings(cfg.input, cfg.format);
    const auto report = evaluate_run(data, cfg.eval_options());
    ensure_dir(cfg.output);
    write_with_header(fs::path(cfg.output) / "ndcg_table.txt", cfg, [&](std::ostream& o) { write_report_table(o, report); });
    write_with_header(fs::path(cfg.output) / "ndcg_records.tsv", cfg,
                      [&](std::ostream& o) { write_report_records(o, report); });
    write_report_table(std::cout, report);
    for (std::size_t u = 0; u < cfg.upl.size(); ++u) {
        std::size_t cold = 0;
        for (auto c : report.cold_start[u]) cold += c;
        if (cold) std::cerr << "upl=" << cfg.upl[u] << ": " << cold << " cold-start user runs skipped\n";
    }
    return 0;
}

int cmd_diagnose(const RunConfig& cfg) {
    if (cfg.input.empty()) throw UsageError("diagnose needs --input");
    const auto data = load_ratings(cfg.input, cfg.format);
    ensure_dir(cfg.output);
    for (auto upl : cfg.upl) {
        const auto split = upl_split(data, {upl, cfg.min_test, cfg.seed, cfg.repetitions}, 0);
        const Engine engine(UPNet::build(derive_preferences(split.train)), cfg.engine());
        const auto users = detail::thin(split.kept_users, cfg.max_users);
        const auto report = diagnostics(engine, users, cfg.threads);
        const auto path = fs::path(cfg.output) / ("diagnostics_upl" + std::to_string(upl) + ".txt");
        write_with_header(path, cfg, [&](std::ostream& o) { write_diagnostics(o, report); });
        std::cout << "upl=" << upl << " users=" << report.users.size()
                  << " similarity_nonzero=" << report.mean_similarity_nonzero
                  << " p1_nonzero=" << report.mean_phase1_nonzero << " p2_nonzero=" << report.mean_phase2_nonzero
                  << " p1_levels=" << report.mean_phase1_levels << " p2_levels=" << report.mean_phase2_levels
                  << " connected=" << report.connected_fraction << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IteRank collaborative ranking: two coupled random walks over user/preference graphs"};
    app.require_subcommand(1);

    FlagSet split_flags, rec_flags, eval_flags, diag_flags;
    auto* split = app.add_subcommand("split", "write UPL train/test splits");
    split_flags.add(*split, {"input", "format", "upl", "repetitions", "min_test", "seed", "output"});

    auto* rec = app.add_subcommand("recommend", "print top-k lists as user<TAB>rank<TAB>item<TAB>score");
    rec_flags.add(*rec, {"format", "alpha", "beta", "tol", "max_iter", "top_k", "threads", "schedule", "start"});
    std::string train_path, out_file;
    std::vector<std::string> users;
    rec->add_option("--train", train_path, "training ratings file")->required();
    rec->add_option("--user", users, "raw user id to serve (repeatable; default: every user)");
    rec->add_option("--out-file", out_file, "write recommendations here instead of stdout");

    auto* eval = app.add_subcommand("evaluate", "run the NDCG protocol and write reports");
    eval_flags.add(*eval, {"input", "format", "alpha", "beta", "tol", "max_iter", "upl", "cutoffs", "repetitions",
                           "min_test", "seed", "output", "threads", "max_users", "schedule", "start", "candidates"});

    auto* diag = app.add_subcommand("diagnose", "non-zero fractions and distinct levels of similarities/concordances");
    diag_flags.add(*diag, {"input", "format", "alpha", "beta", "tol", "max_iter", "upl", "min_test", "seed", "output",
                           "threads", "max_users", "schedule", "start"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*split) return cmd_split(split_flags.resolve());
        if (*rec) return cmd_recommend(rec_flags.resolve(), train_path, users, out_file);
        if (*eval) return cmd_evaluate(eval_flags.resolve());
        if (*diag) return cmd_diagnose(diag_flags.resolve());
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::usage: return kExitUsage;
            case ErrorKind::data: return kExitData;
            case ErrorKind::numerical: return kExitNumerical;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
