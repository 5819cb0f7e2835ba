#pragma once

#include "hsd/evaluate.hpp"
#include "hsd/experiments.hpp"
#include "hsd/hsd.hpp"
#include "hsd/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace hsd::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,        ///< bad command line
    kBadInput = 2,     ///< an input file is missing, unreadable or malformed
    kInvalid = 3,      ///< parameters or arguments parse but are invalid
    kWriteFailed = 4,  ///< the output could not be written
};

/// Thrown inside commands to leave with a specific exit code.
struct Exit {
    int code;
    std::string message;
};

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// HSD_LOG=quiet|info|debug (default info).
inline LogLevel log_level() {
    const char* env = std::getenv("HSD_LOG");
    const std::string v = env ? env : "info";
    if (v == "quiet" || v == "0") {
        return LogLevel::quiet;
    }
    if (v == "debug" || v == "2") {
        return LogLevel::debug;
    }
    return LogLevel::info;
}

inline void log(LogLevel level, const std::string& message) {
    if (level != LogLevel::quiet && static_cast<int>(level) <= static_cast<int>(log_level())) {
        std::cerr << "hsdinv: " << message << "\n";
    }
}

inline std::string describe(const std::exception& e) { return e.what(); }

inline ExperimentSpec load_spec(const std::string& path) {
    ExperimentSpec spec;
    try {
        spec = spec_from_json(read_json(path));
    } catch (const ParseError& e) {
        throw Exit{kBadInput, e.what()};
    }
    try {
        validate(spec);
    } catch (const std::invalid_argument& e) {
        throw Exit{kInvalid, path + ": " + describe(e)};
    }
    return spec;
}

inline InversionParams load_params(const std::string& path) {
    InversionParams params;
    if (!path.empty()) {
        try {
            params = params_from_json(read_json(path));
        } catch (const ParseError& e) {
            throw Exit{kInvalid, e.what()};
        }
    }
    try {
        validate(params.box);
        validate(params.hsd);
    } catch (const std::invalid_argument& e) {
        throw Exit{kInvalid, (path.empty() ? std::string("default params") : path) + ": " + describe(e)};
    }
    return params;
}

inline Dataset load_data(const std::string& path) {
    try {
        return load_dataset(path);
    } catch (const ParseError& e) {
        throw Exit{kBadInput, e.what()};
    }
}

inline void write_output(const std::string& path, const std::string& contents) {
    try {
        write_atomic(path, contents);
    } catch (const std::exception& e) {
        throw Exit{kWriteFailed, e.what()};
    }
}

/// Parses "a,b[,c]" into exactly `count` numbers.
template <class T>
std::vector<T> parse_list(const std::string& text, std::size_t count, const std::string& flag) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            if constexpr (std::is_integral_v<T>) {
                const long long v = std::stoll(cell, &used);
                if (v < 0) {
                    throw std::invalid_argument(cell);
                }
                out.push_back(static_cast<T>(v));
            } else {
                out.push_back(static_cast<T>(std::stod(cell, &used)));
            }
            if (used != cell.size()) {
                throw std::invalid_argument(cell);
            }
        } catch (const std::exception&) {
            throw Exit{kInvalid, flag + ": not a number: \"" + cell + "\""};
        }
    }
    if (out.size() != count) {
        throw Exit{kInvalid, flag + ": expected " + std::to_string(count) + " comma-separated values"};
    }
    return out;
}

/// Runs the search on one dataset and packages the outcome.
inline ResultRecord invert(const Dataset& data, const InversionParams& params) {
    const Box box = params.box;
    const ObjectiveContext ctx(data.measurement, box, params.hsd.v_max, params.hsd.m_cap);
    const auto started = std::chrono::steady_clock::now();
    HsdResult run = hsd_run(ctx, params.hsd);
    ResultRecord record;
    record.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.found = std::move(run.best);
    record.winner = run.winner;
    record.reports = std::move(run.reports);
    if (data.truth) {
        record.match = match_inclusions(record.found, *data.truth);
    }
    return record;
}

struct ReplicateOptions {
    int experiment{1};
    double noise{0.0};
    std::size_t runs{10};
    std::uint64_t seed{0};
    std::size_t threads{0}; ///< 0: one per hardware thread
};

/// `runs` independent simulate + invert cycles. Run r draws its noise from
/// substream (seed, noise, r) on the noiseless dataset and seeds the search
/// with (seed, run, r).
inline Json replicate(const ReplicateOptions& opts, const InversionParams& base) {
    ExperimentSpec spec = builtin_experiment(opts.experiment);
    spec.noise_delta = opts.noise;
    std::vector<ResultRecord> records(opts.runs);

    auto one_run = [&](std::size_t r) {
        ExperimentSpec run_spec = spec;
        run_spec.seed = derive_seed(opts.seed, StreamTag::noise, r);
        InversionParams params = base;
        params.box = spec.box;
        params.hsd.master_seed = derive_seed(opts.seed, StreamTag::run, r);
        params.hsd.threads = 1;
        Dataset data{simulate(run_spec), spec.truth, spec.box};
        records[r] = invert(data, params);
        log(LogLevel::info, "run " + std::to_string(r) + ": " + std::to_string(records[r].found.size()) +
                                " found, " + std::to_string(records[r].match->matched()) + " matched");
    };

    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::max<std::size_t>(1, std::min(opts.threads ? opts.threads : hw, opts.runs));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t r = w; r < opts.runs; r += workers) {
                one_run(r);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }

    Json runs = Json::array();
    std::map<std::size_t, std::size_t> histogram;
    double fraction_sum = 0.0;
    std::size_t fraction_count = 0;
    for (std::size_t r = 0; r < opts.runs; ++r) {
        const ResultRecord& rec = records[r];
        std::size_t invocations = 0;
        for (const auto& rep : rec.reports) {
            invocations += rep.powell_invocations;
            fraction_sum += rep.powell_time_fraction;
            ++fraction_count;
        }
        ++histogram[rec.match->matched()];
        Json entry = to_json(rec);
        entry["run"] = r;
        entry["matched"] = rec.match->matched();
        entry["powell_invocations_total"] = invocations;
        runs.push_back(std::move(entry));
    }
    Json hist = Json::object();
    for (std::size_t m = 0; m <= spec.truth.size(); ++m) {
        hist[std::to_string(m)] = histogram.count(m) ? histogram[m] : 0;
    }
    return Json{{"format", kSummaryFormat},
                {"experiment", opts.experiment},
                {"noise_delta", opts.noise},
                {"runs", opts.runs},
                {"master_seed", opts.seed},
                {"match_radius", kMatchRadius},
                {"noise_policy", "noise re-drawn per run on the noiseless dataset"},
                {"match_histogram", hist},
                {"mean_powell_time_fraction", fraction_count ? fraction_sum / static_cast<double>(fraction_count) : 0.0},
                {"records", runs}};
}

/// Entry point of the hsdinv tool; returns the process exit code.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Locate small subsurface scatterers from surface data with a hybrid stochastic-deterministic search"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthesize a dataset from an experiment spec");
    int sim_experiment = 0;
    std::string sim_spec;
    std::optional<double> sim_noise;
    std::optional<std::uint64_t> sim_seed;
    std::string sim_out;
    auto* sim_exp_opt = sim->add_option("--experiment", sim_experiment, "built-in experiment (1 or 2)");
    auto* sim_spec_opt = sim->add_option("--spec", sim_spec, "experiment spec file");
    sim_exp_opt->excludes(sim_spec_opt);
    sim->add_option("--noise", sim_noise, "noise level delta (overrides the experiment file)");
    sim->add_option("--seed", sim_seed, "noise seed (overrides the experiment file)");
    sim->add_option("--out", sim_out, "output dataset (.json, or .csv for the bare table)")->required();

    // invert
    auto* inv = app.add_subcommand("invert", "run the search on a dataset");
    std::string inv_data;
    std::string inv_params;
    std::optional<std::uint64_t> inv_seed;
    std::optional<std::size_t> inv_threads;
    std::string inv_out;
    inv->add_option("--data", inv_data, "dataset file")->required();
    inv->add_option("--params", inv_params, "parameter file (default: reference parameters)");
    inv->add_option("--seed", inv_seed, "master seed (overrides the params file)");
    inv->add_option("--threads", inv_threads, "threads for concurrent restarts");
    inv->add_option("--out", inv_out, "result file")->required();

    // replicate
    auto* rep = app.add_subcommand("replicate", "repeat simulate + invert for a built-in experiment");
    ReplicateOptions rep_opts;
    std::string rep_params;
    std::string rep_out;
    rep->add_option("--experiment", rep_opts.experiment, "built-in experiment (1 or 2)")->required();
    rep->add_option("--noise", rep_opts.noise, "noise level delta");
    rep->add_option("--runs", rep_opts.runs, "number of independent runs");
    rep->add_option("--seed", rep_opts.seed, "master seed");
    rep->add_option("--threads", rep_opts.threads, "concurrent runs (0: hardware threads)");
    rep->add_option("--params", rep_params, "parameter file (default: reference parameters)");
    rep->add_option("--out", rep_out, "summary file")->required();

    // landscape
    auto* land = app.add_subcommand("landscape", "reduced objective along one coordinate (CSV)");
    int land_experiment = 1;
    std::string land_spec;
    std::size_t land_index = 0;
    std::size_t land_axis = 0;
    std::string land_range = "-2,2";
    std::size_t land_samples = 401;
    std::string land_out;
    auto* land_exp_opt = land->add_option("--experiment", land_experiment, "built-in experiment (1 or 2)");
    auto* land_spec_opt = land->add_option("--spec", land_spec, "experiment spec file");
    land_exp_opt->excludes(land_spec_opt);
    land->add_option("--index", land_index, "index of the varied point");
    land->add_option("--axis", land_axis, "varied axis (0, 1, 2)");
    land->add_option("--range", land_range, "lo,hi");
    land->add_option("--samples", land_samples, "number of samples");
    land->add_option("--out", land_out, "output CSV")->required();

    // oracle
    auto* orc = app.add_subcommand("oracle", "exhaustive grid search for 1 or 2 scatterers");
    std::string orc_data;
    std::string orc_params;
    std::string orc_grid = "41,21,21";
    int orc_count = 1;
    std::size_t orc_cap = GridSpec{}.cap;
    std::string orc_out;
    orc->add_option("--data", orc_data, "dataset file")->required();
    orc->add_option("--params", orc_params, "parameter file (box, v_max)");
    orc->add_option("--grid", orc_grid, "n1,n2,n3");
    orc->add_option("--count", orc_count, "number of scatterers (1 or 2)");
    orc->add_option("--cap", orc_cap, "maximum number of evaluations");
    orc->add_option("--out", orc_out, "result file")->required();

    // defaults
    auto* def = app.add_subcommand("defaults", "write the built-in spec and reference parameters");
    int def_experiment = 1;
    std::string def_spec_out;
    std::string def_params_out;
    def->add_option("--experiment", def_experiment, "built-in experiment (1 or 2)");
    def->add_option("--spec-out", def_spec_out, "spec file to write");
    def->add_option("--params-out", def_params_out, "params file to write");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    auto experiment_spec = [](int number) {
        if (number != 1 && number != 2) {
            throw Exit{kInvalid, "--experiment must be 1 or 2"};
        }
        return builtin_experiment(number);
    };

    try {
        if (*sim) {
            ExperimentSpec spec = sim_spec.empty() ? experiment_spec(sim_experiment ? sim_experiment : 1)
                                                   : load_spec(sim_spec);
            if (sim_noise) {
                spec.noise_delta = *sim_noise;
            }
            if (sim_seed) {
                spec.seed = *sim_seed;
            }
            try {
                validate(spec);
            } catch (const std::invalid_argument& e) {
                throw Exit{kInvalid, describe(e)};
            }
            const MeasurementSet data = simulate(spec);
            const std::string text = std::filesystem::path(sim_out).extension() == ".csv"
                                         ? dataset_to_csv(data)
                                         : dump(to_json(Dataset{data, spec.truth, spec.box}));
            write_output(sim_out, text);
            log(LogLevel::info, "wrote " + std::to_string(data.size()) + " measurements to " + sim_out);
        } else if (*inv) {
            const Dataset data = load_data(inv_data);
            InversionParams params = load_params(inv_params);
            if (inv_params.empty() && data.box) {
                params.box = *data.box;
            }
            if (inv_seed) {
                params.hsd.master_seed = *inv_seed;
            }
            if (inv_threads) {
                params.hsd.threads = *inv_threads;
            }
            const ResultRecord record = invert(data, params);
            write_output(inv_out, dump(to_json(record)));
            log(LogLevel::info, "found " + std::to_string(record.found.size()) + " scatterers, value " +
                                    format_double(record.found.value));
        } else if (*rep) {
            experiment_spec(rep_opts.experiment);
            if (rep_opts.runs == 0) {
                throw Exit{kInvalid, "--runs must be positive"};
            }
            if (!(rep_opts.noise >= 0.0)) {
                throw Exit{kInvalid, "--noise must be nonnegative"};
            }
            const InversionParams params = load_params(rep_params);
            write_output(rep_out, dump(replicate(rep_opts, params)));
        } else if (*land) {
            const ExperimentSpec spec = land_spec.empty() ? experiment_spec(land_experiment) : load_spec(land_spec);
            const auto range = parse_list<double>(land_range, 2, "--range");
            const std::vector<Point3> base = reference_slice_base(spec.truth);
            if (land_index >= base.size()) {
                throw Exit{kInvalid, "--index " + std::to_string(land_index) + " out of range (" +
                                         std::to_string(base.size()) + " points)"};
            }
            if (land_axis > 2 || land_samples == 0 || !(range[0] <= range[1])) {
                throw Exit{kInvalid, "need --axis in {0,1,2}, --samples >= 1 and lo <= hi"};
            }
            ExperimentSpec clean = spec;
            clean.noise_delta = 0.0;
            const ObjectiveContext ctx(simulate(clean), spec.box, spec.v_max, std::max<std::size_t>(1, base.size()));
            const auto slice = landscape_slice(ctx, base, land_index, land_axis, range[0], range[1], land_samples);
            write_output(land_out, slice_to_csv(slice));
        } else if (*orc) {
            if (orc_count != 1 && orc_count != 2) {
                throw Exit{kInvalid, "--count must be 1 or 2"};
            }
            const Dataset data = load_data(orc_data);
            InversionParams params = load_params(orc_params);
            if (orc_params.empty() && data.box) {
                params.box = *data.box;
            }
            const auto n = parse_list<std::size_t>(orc_grid, 3, "--grid");
            const GridSpec grid{n[0], n[1], n[2], orc_cap};
            const ObjectiveContext ctx(data.measurement, params.box, params.hsd.v_max, 2);
            Configuration best;
            try {
                best = grid_oracle(ctx, grid, orc_count);
            } catch (const ConfigError& e) {
                throw Exit{kInvalid, describe(e)};
            }
            Json out{{"format", "hsd-oracle/1"},
                     {"grid", {grid.n1, grid.n2, grid.n3}},
                     {"cell", {grid_step(grid, params.box, 0), grid_step(grid, params.box, 1),
                               grid_step(grid, params.box, 2)}},
                     {"count", orc_count},
                     {"found", to_json(best)},
                     {"table", format_table(best)}};
            if (data.truth) {
                out["match"] = to_json(match_inclusions(best, *data.truth));
            }
            write_output(orc_out, dump(out));
        } else if (*def) {
            const ExperimentSpec spec = experiment_spec(def_experiment);
            if (!def_spec_out.empty()) {
                write_output(def_spec_out, dump(to_json(spec)));
            }
            if (!def_params_out.empty()) {
                write_output(def_params_out, dump(to_json(InversionParams{})));
            }
        }
    } catch (const Exit& e) {
        if (!e.message.empty()) {
            std::cerr << "hsdinv: error: " << e.message << "\n";
        }
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "hsdinv: error: " << e.what() << "\n";
        return kInvalid;
    }
    return kOk;
}

} // namespace hsd::cli
