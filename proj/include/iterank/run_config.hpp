#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iterank/dataset.hpp"
#include "iterank/engine.hpp"
#include "iterank/error.hpp"
#include "iterank/eval.hpp"
#include "iterank/parallel.hpp"

namespace iterank {

/// Every knob of a CLI run. Values come from defaults, then a flat key=value config
/// file, then command-line flags, each layer overriding the previous one.
struct RunConfig {
    double alpha = 0.15;
    double beta = 0.15;
    double tol = 1e-10;
    std::size_t max_iter = 100;
    std::vector<std::size_t> upl{10, 20, 30, 40, 50};
    std::vector<std::size_t> cutoffs{1, 3, 5, 10};
    std::size_t repetitions = 5;
    std::size_t min_test = 10;
    std::uint64_t seed = 0;
    std::size_t top_k = 10;
    std::string input;
    RatingsFormat format = RatingsFormat::tsv_umr;
    std::string output = ".";
    std::size_t threads = default_parallelism();
    std::size_t max_users = 0;
    Schedule schedule = Schedule::gauss_seidel;
    StartVector start = StartVector::restart;
    CandidateSet candidates = CandidateSet::test_items;

    static const std::vector<std::string_view>& keys() {
        static const std::vector<std::string_view> k{
            "alpha",   "beta",   "tol",     "max_iter",  "upl",      "cutoffs", "repetitions",
            "min_test", "seed",  "top_k",   "input",     "format",   "output",  "threads",
            "max_users", "schedule", "start", "candidates"};
        return k;
    }

    void set(std::string_view key, std::string_view value) {
        if (key == "alpha") alpha = parse_real(key, value);
        else if (key == "beta") beta = parse_real(key, value);
        else if (key == "tol") tol = parse_real(key, value);
        else if (key == "max_iter") max_iter = parse_count(key, value);
        else if (key == "upl") upl = parse_list(key, value);
        else if (key == "cutoffs") cutoffs = parse_list(key, value);
        else if (key == "repetitions") repetitions = parse_count(key, value);
        else if (key == "min_test") min_test = parse_count(key, value);
        else if (key == "seed") seed = parse_count(key, value);
        else if (key == "top_k") top_k = parse_count(key, value);
        else if (key == "input") input = std::string(value);
        else if (key == "format") format = parse_format(value);
        else if (key == "output") output = std::string(value);
        else if (key == "threads") threads = parse_count(key, value);
        else if (key == "max_users") max_users = parse_count(key, value);
        else if (key == "schedule") {
            if (value == "jacobi") schedule = Schedule::jacobi;
            else if (value == "gauss_seidel") schedule = Schedule::gauss_seidel;
            else throw UsageError("schedule must be jacobi or gauss_seidel");
        } else if (key == "start") {
            if (value == "uniform") start = StartVector::uniform;
            else if (value == "restart") start = StartVector::restart;
            else throw UsageError("start must be uniform or restart");
        } else if (key == "candidates") {
            if (value == "test") candidates = CandidateSet::test_items;
            else if (value == "unseen") candidates = CandidateSet::unseen_items;
            else throw UsageError("candidates must be test or unseen");
        } else {
            throw UsageError("unknown config key '" + std::string(key) + "'");
        }
    }

    /// Applies a flat `key = value` file; blank lines and lines starting with '#' are ignored.
    void apply_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file '" + path + "'");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto body = trim(line);
            if (body.empty() || body.front() == '#') continue;
            const auto eq = body.find('=');
            if (eq == std::string_view::npos)
                throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
            set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
        }
    }

    void validate() const {
        engine().phase1.validate();
        engine().phase2.validate();
        if (upl.empty()) throw UsageError("upl list is empty");
        if (cutoffs.empty()) throw UsageError("cutoff list is empty");
        for (auto v : upl)
            if (v < 1) throw UsageError("upl values must be >= 1");
        for (auto v : cutoffs)
            if (v < 1) throw UsageError("cutoffs must be >= 1");
        if (repetitions < 1) throw UsageError("repetitions must be >= 1");
        if (min_test < 1) throw UsageError("min_test must be >= 1");
        if (top_k < 1) throw UsageError("top_k must be >= 1");
        if (threads < 1) throw UsageError("threads must be >= 1");
    }

    EngineConfig engine() const {
        EngineConfig e;
        e.phase1 = {alpha, tol, max_iter, schedule, start};
        e.phase2 = {beta, tol, max_iter, schedule, start};
        return e;
    }

    EvalOptions eval_options() const {
        EvalOptions o;
        o.upls = upl;
        o.cutoffs = cutoffs;
        o.repetitions = repetitions;
        o.min_test = min_test;
        o.seed = seed;
        o.engine = engine();
        o.threads = threads;
        o.max_users = max_users;
        o.candidates = candidates;
        return o;
    }

    /// "# key=value" lines describing the run, for report headers. Thread count is left
    /// out because it never changes results.
    std::string echo() const {
        std::ostringstream out;
        auto list = [](const std::vector<std::size_t>& v) {
            std::string s;
            for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
            return s;
        };
        out << "# alpha=" << shortest(alpha) << "\n# beta=" << shortest(beta) << "\n# tol=" << shortest(tol)
            << "\n# max_iter=" << max_iter
            << "\n# upl=" << list(upl) << "\n# cutoffs=" << list(cutoffs) << "\n# repetitions=" << repetitions
            << "\n# min_test=" << min_test << "\n# seed=" << seed << "\n# top_k=" << top_k << "\n# input=" << input
            << "\n# format=" << (format == RatingsFormat::csv_umr ? "csv" : "tsv") << "\n# output=" << output
            << "\n# max_users=" << max_users
            << "\n# schedule=" << (schedule == Schedule::jacobi ? "jacobi" : "gauss_seidel")
            << "\n# start=" << (start == StartVector::uniform ? "uniform" : "restart")
            << "\n# candidates=" << (candidates == CandidateSet::test_items ? "test" : "unseen") << '\n';
        return out.str();
    }

    /// Shortest decimal text that reads back as the same double.
    static std::string shortest(double v) {
        char buf[32];
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, end);
    }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
        return s;
    }

    static double parse_real(std::string_view key, std::string_view v) {
        double out = 0.0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size())
            throw UsageError("invalid number for " + std::string(key) + ": '" + std::string(v) + "'");
        return out;
    }

    static std::uint64_t parse_count(std::string_view key, std::string_view v) {
        std::uint64_t out = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size())
            throw UsageError("invalid integer for " + std::string(key) + ": '" + std::string(v) + "'");
        return out;
    }

    static std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
        std::vector<std::size_t> out;
        for (auto part : detail::split_fields(v, ',')) out.push_back(parse_count(key, trim(part)));
        return out;
    }
};

}  // namespace iterank
