#include "hsd/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace hsd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("hsd_io_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

std::string parse_error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

ResultRecord sample_result() {
    const ExperimentSpec spec = experiment1();
    const ObjectiveContext ctx(simulate(spec), spec.box, spec.v_max, 16);
    HsdParams p;
    p.t_max = 40;
    p.n_max = 2;
    const HsdResult run = hsd_run(ctx, p);
    ResultRecord r{run.best, run.winner, run.reports, match_inclusions(run.best, spec.truth), 1.25};
    return r;
}

} // namespace

TEST(SpecFile, RoundTrip) {
    ExperimentSpec spec = experiment2();
    spec.noise_delta = 0.02;
    spec.seed = 18446744073709551557ull;
    const fs::path path = scratch("spec.json");
    write_atomic(path, dump(to_json(spec)));
    EXPECT_EQ(spec_from_json(read_json(path)), spec);
}

TEST(DatasetFile, JsonRoundTrip) {
    ExperimentSpec spec = experiment1();
    spec.noise_delta = 0.05;
    spec.seed = 3;
    const Dataset d{simulate(spec), spec.truth, spec.box};
    const fs::path path = scratch("data.json");
    write_atomic(path, dump(to_json(d)));
    EXPECT_EQ(load_dataset(path), d);
}

TEST(DatasetFile, CsvRoundTrip) {
    const MeasurementSet m = simulate(experiment2());
    const fs::path path = scratch("data.csv");
    write_atomic(path, dataset_to_csv(m));
    const Dataset d = load_dataset(path);
    EXPECT_EQ(d.measurement, m);
    EXPECT_FALSE(d.truth.has_value());
    EXPECT_EQ(dataset_to_csv(d.measurement), read_text(path));
}

TEST(ParamsFile, RoundTripAndDefaults) {
    InversionParams p;
    p.hsd.t_max = 77;
    p.hsd.eps_s = 0.4;
    p.hsd.powell.eval_budget = 1234;
    p.hsd.master_seed = 99;
    p.box = Box{3, 2, 1.5};
    EXPECT_EQ(params_from_json(to_json(p)), p);
    EXPECT_EQ(params_from_json(Json::object()), InversionParams{});
    EXPECT_EQ(params_from_json(Json{{"T_max", 5}}).hsd.t_max, 5u);
}

TEST(ResultFile, RoundTrip) {
    const ResultRecord r = sample_result();
    const ResultRecord back = result_from_json(parse_json(dump(to_json(r)), "result"));
    EXPECT_EQ(back.found, r.found);
    EXPECT_EQ(back.winner, r.winner);
    EXPECT_EQ(back.match, r.match);
    EXPECT_EQ(back.wall_time, r.wall_time);
    ASSERT_EQ(back.reports.size(), r.reports.size());
    for (std::size_t i = 0; i < r.reports.size(); ++i) {
        EXPECT_EQ(back.reports[i].best, r.reports[i].best);
        EXPECT_EQ(back.reports[i].random_tries_used, r.reports[i].random_tries_used);
        EXPECT_EQ(back.reports[i].powell_invocations, r.reports[i].powell_invocations);
        EXPECT_EQ(back.reports[i].powell_evaluations, r.reports[i].powell_evaluations);
        EXPECT_EQ(back.reports[i].powell_time_fraction, r.reports[i].powell_time_fraction);
        EXPECT_EQ(back.reports[i].stop_reason, r.reports[i].stop_reason);
        EXPECT_EQ(back.reports[i].thresholds, r.reports[i].thresholds);
    }
    EXPECT_EQ(dump(to_json(back)), dump(to_json(r)));
}

TEST(SliceCsv, ReemitsIdenticalBytes) {
    const ExperimentSpec spec = experiment1();
    const ObjectiveContext ctx(simulate(spec), spec.box, spec.v_max, 6);
    const auto slice = landscape_slice(ctx, reference_slice_base(spec.truth), 0, 0, -2, 2, 57);
    const std::string text = slice_to_csv(slice);
    const auto back = slice_from_csv(text, "slice");
    ASSERT_EQ(back.size(), slice.size());
    for (std::size_t i = 0; i < slice.size(); ++i) {
        EXPECT_EQ(back[i].r, slice[i].r);
        EXPECT_EQ(back[i].value, slice[i].value);
    }
    EXPECT_EQ(slice_to_csv(back), text);
}

TEST(Table, FixedWidthRows) {
    const Configuration cfg{{{{1.64, -0.51, 0.52}, 1.2}}, 0.0};
    const auto rows = format_table(cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0], "   1.640   -0.510    0.520   1.20000");
}

TEST(ParseErrors, NameTheField) {
    Json spec = to_json(experiment1());
    spec["sources"][3].erase("x2");
    EXPECT_NE(parse_error_of([&] { spec_from_json(spec); }).find("spec.sources[3].x2"), std::string::npos);

    Json wrong = to_json(experiment1());
    wrong["k"] = "five";
    EXPECT_NE(parse_error_of([&] { spec_from_json(wrong); }).find("spec.k: wrong type"), std::string::npos);

    Json params = Json{{"powell", {{"max_sweeps", -3}}}};
    EXPECT_NE(parse_error_of([&] { params_from_json(params); }).find("params.powell.max_sweeps"), std::string::npos);

    EXPECT_NE(parse_error_of([&] { dataset_from_json(Json{{"format", "hsd-spec/1"}}); }).find("dataset.format"),
              std::string::npos);
}

TEST(ParseErrors, BadFiles) {
    const fs::path empty = scratch("empty.json");
    write_atomic(empty, "");
    EXPECT_THROW(load_dataset(empty), ParseError);
    EXPECT_THROW(load_dataset(scratch("missing.json")), ParseError);

    const fs::path bad_csv = scratch("bad.csv");
    write_atomic(bad_csv, std::string("# k=5\n") + kDatasetCsvHeader + "\n0,0,0,1,0,0,abc,0\n");
    EXPECT_NE(parse_error_of([&] { load_dataset(bad_csv); }).find("line 3"), std::string::npos);

    // Structurally valid but inconsistent: a pair off the measurement plane.
    Json d = to_json(Dataset{simulate(experiment1()), {}, {}});
    d["pairs"][0]["source"]["x3"] = 0.5;
    const fs::path off_plane = scratch("off_plane.json");
    write_atomic(off_plane, dump(d));
    EXPECT_THROW(load_dataset(off_plane), ParseError);
}

TEST(WriteAtomic, ReplacesWithoutLeftovers) {
    const fs::path path = scratch("atomic.txt");
    write_atomic(path, "first");
    write_atomic(path, "second");
    EXPECT_EQ(read_text(path), "second");
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(path.parent_path())) {
        files += entry.path().filename().string().rfind("atomic.txt", 0) == 0;
    }
    EXPECT_EQ(files, 1u);
    EXPECT_THROW(write_atomic(path.parent_path() / "no_such_dir" / "x.txt", "x"), std::runtime_error);
}
