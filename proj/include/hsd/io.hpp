#pragma once

#include "hsd/evaluate.hpp"
#include "hsd/experiments.hpp"
#include "hsd/forward.hpp"
#include "hsd/hsd.hpp"
#include "hsd/objective.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <type_traits>
#include <vector>

#include <unistd.h>

namespace hsd {

using Json = nlohmann::ordered_json;

/// A file could not be read or does not have the expected structure.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kSpecFormat = "hsd-spec/1";
inline constexpr const char* kDatasetFormat = "hsd-dataset/1";
inline constexpr const char* kParamsFormat = "hsd-params/1";
inline constexpr const char* kResultFormat = "hsd-result/1";
inline constexpr const char* kSummaryFormat = "hsd-summary/1";

/// Measurements plus optional ground truth and box.
struct Dataset {
    MeasurementSet measurement;
    std::optional<std::vector<Scatterer>> truth;
    std::optional<Box> box;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Search parameters plus the box they search in.
struct InversionParams {
    HsdParams hsd{};
    Box box{};

    friend bool operator==(const InversionParams&, const InversionParams&) = default;
};

struct ResultRecord {
    Configuration found;
    std::size_t winner{0};
    std::vector<RestartReport> reports;
    std::optional<MatchReport> match;
    double wall_time{0.0}; ///< seconds
};

// ---------------------------------------------------------------------------
// JSON conversions.

inline Json to_json(const Point3& p) { return Json{{"x1", p.x1}, {"x2", p.x2}, {"x3", p.x3}}; }

inline Json to_json(const Complex& c) { return Json{{"re", c.real()}, {"im", c.imag()}}; }

inline Json to_json(const Box& b) { return Json{{"a", b.a}, {"b", b.b}, {"c", b.c}}; }

inline Json to_json(const Scatterer& s) { return Json{{"position", to_json(s.position)}, {"intensity", s.intensity}}; }

template <class T>
Json to_json_array(const std::vector<T>& items) {
    Json out = Json::array();
    for (const auto& item : items) {
        out.push_back(to_json(item));
    }
    return out;
}

inline Json to_json(const Configuration& cfg) {
    return Json{{"value", cfg.value}, {"scatterers", to_json_array(cfg.scatterers)}};
}

inline Json to_json(const RestartReport& r) {
    return Json{{"best", to_json(r.best)},
                {"random_tries_used", r.random_tries_used},
                {"powell_invocations", r.powell_invocations},
                {"powell_evaluations", r.powell_evaluations},
                {"powell_time_fraction", r.powell_time_fraction},
                {"stop_reason", to_string(r.stop_reason)},
                {"thresholds", r.thresholds}};
}

inline Json to_json(const MatchReport& m) {
    Json pairs = Json::array();
    for (const auto& p : m.matched_pairs) {
        pairs.push_back(Json{{"truth_index", p.truth_index},
                             {"found_index", p.found_index},
                             {"distance", p.distance},
                             {"intensity_error", p.intensity_error}});
    }
    return Json{{"matched_pairs", pairs}, {"missed_truth", m.missed_truth}, {"spurious_found", m.spurious_found}};
}

inline Json to_json(const ExperimentSpec& s) {
    return Json{{"format", kSpecFormat},
                {"box", to_json(s.box)},
                {"k", s.k},
                {"v_max", s.v_max},
                {"sources", to_json_array(s.sources)},
                {"detectors", to_json_array(s.detectors)},
                {"truth", to_json_array(s.truth)},
                {"noise_delta", s.noise_delta},
                {"seed", s.seed}};
}

inline Json to_json(const Dataset& d) {
    Json pairs = Json::array();
    for (const auto& p : d.measurement.pairs) {
        pairs.push_back(Json{{"source", to_json(p.source)}, {"detector", to_json(p.detector)}});
    }
    Json out{{"format", kDatasetFormat},
             {"k", d.measurement.k},
             {"pairs", pairs},
             {"data", to_json_array(d.measurement.data)}};
    if (d.box) {
        out["box"] = to_json(*d.box);
    }
    if (d.truth) {
        out["truth"] = to_json_array(*d.truth);
    }
    return out;
}

inline Json to_json(const InversionParams& p) {
    const HsdParams& h = p.hsd;
    return Json{{"format", kParamsFormat},
                {"M_cap", h.m_cap},
                {"v_max", h.v_max},
                {"P0", h.p0},
                {"T_max", h.t_max},
                {"eps_s", h.eps_s},
                {"eps_i", h.eps_i},
                {"eps_d", h.eps_d},
                {"eps", h.eps},
                {"n_max", h.n_max},
                {"master_seed", h.master_seed},
                {"threads", h.threads},
                {"box", to_json(p.box)},
                {"powell",
                 Json{{"value_tol", h.powell.value_tol},
                      {"line_tol", h.powell.line_tol},
                      {"max_sweeps", h.powell.max_sweeps},
                      {"eval_budget_per_point", h.powell.eval_budget}}}};
}

/// Fixed-width rows "x1 x2 x3 v" with three and five decimals.
inline std::vector<std::string> format_table(const Configuration& cfg) {
    std::vector<std::string> rows;
    for (const auto& s : cfg.scatterers) {
        char line[96];
        std::snprintf(line, sizeof line, "%8.3f %8.3f %8.3f %9.5f", s.position.x1, s.position.x2, s.position.x3,
                      s.intensity);
        rows.emplace_back(line);
    }
    return rows;
}

inline Json to_json(const ResultRecord& r) {
    Json out{{"format", kResultFormat},
             {"found", to_json(r.found)},
             {"table", format_table(r.found)},
             {"winner", r.winner},
             {"reports", to_json_array(r.reports)},
             {"match", r.match ? to_json(*r.match) : Json(nullptr)},
             {"wall_time", r.wall_time}};
    return out;
}

// ---------------------------------------------------------------------------
// Parsing. Missing or mistyped fields raise ParseError naming the field.

namespace detail {

inline const Json& field(const Json& j, const char* name, const std::string& where) {
    if (!j.is_object()) {
        throw ParseError(where + ": expected an object");
    }
    const auto it = j.find(name);
    if (it == j.end()) {
        throw ParseError(where + "." + name + ": missing");
    }
    return *it;
}

template <class T>
T get(const Json& j, const char* name, const std::string& where) {
    const Json& v = field(j, name, where);
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ParseError(where + "." + name + ": expected a nonnegative integer");
        }
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) {
            throw ParseError(where + "." + name + ": expected an integer");
        }
    }
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(where + "." + name + ": wrong type");
    }
}

template <class T>
T get_or(const Json& j, const char* name, const std::string& where, T fallback) {
    if (!j.is_object()) {
        throw ParseError(where + ": expected an object");
    }
    return j.contains(name) ? get<T>(j, name, where) : fallback;
}

inline const Json& array_field(const Json& j, const char* name, const std::string& where) {
    const Json& v = field(j, name, where);
    if (!v.is_array()) {
        throw ParseError(where + "." + name + ": expected an array");
    }
    return v;
}

inline std::string at_index(const std::string& where, const char* name, std::size_t i) {
    return where + "." + name + "[" + std::to_string(i) + "]";
}

inline void expect_format(const Json& j, const char* format, const std::string& where) {
    const auto found = get<std::string>(j, "format", where);
    if (found != format) {
        throw ParseError(where + ".format: expected \"" + std::string(format) + "\", got \"" + found + "\"");
    }
}

} // namespace detail

inline Point3 point_from_json(const Json& j, const std::string& where) {
    return {detail::get<double>(j, "x1", where), detail::get<double>(j, "x2", where),
            detail::get<double>(j, "x3", where)};
}

inline Complex complex_from_json(const Json& j, const std::string& where) {
    return {detail::get<double>(j, "re", where), detail::get<double>(j, "im", where)};
}

inline Box box_from_json(const Json& j, const std::string& where) {
    return {detail::get<double>(j, "a", where), detail::get<double>(j, "b", where),
            detail::get<double>(j, "c", where)};
}

inline Scatterer scatterer_from_json(const Json& j, const std::string& where) {
    return {point_from_json(detail::field(j, "position", where), where + ".position"),
            detail::get<double>(j, "intensity", where)};
}

template <class T, class F>
std::vector<T> array_from_json(const Json& j, const char* name, const std::string& where, F&& parse) {
    const Json& arr = detail::array_field(j, name, where);
    std::vector<T> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(parse(arr[i], detail::at_index(where, name, i)));
    }
    return out;
}

inline Configuration configuration_from_json(const Json& j, const std::string& where) {
    return {array_from_json<Scatterer>(j, "scatterers", where, scatterer_from_json),
            detail::get<double>(j, "value", where)};
}

inline StopReason stop_reason_from_string(const std::string& s, const std::string& where) {
    if (s == "tolerance_met") {
        return StopReason::tolerance_met;
    }
    if (s == "tries_exhausted") {
        return StopReason::tries_exhausted;
    }
    throw ParseError(where + ": unknown stop reason \"" + s + "\"");
}

inline RestartReport restart_report_from_json(const Json& j, const std::string& where) {
    RestartReport r;
    r.best = configuration_from_json(detail::field(j, "best", where), where + ".best");
    r.random_tries_used = detail::get<std::size_t>(j, "random_tries_used", where);
    r.powell_invocations = detail::get<std::size_t>(j, "powell_invocations", where);
    r.powell_evaluations = detail::get<std::size_t>(j, "powell_evaluations", where);
    r.powell_time_fraction = detail::get<double>(j, "powell_time_fraction", where);
    r.stop_reason = stop_reason_from_string(detail::get<std::string>(j, "stop_reason", where), where + ".stop_reason");
    r.thresholds = detail::get<std::vector<double>>(j, "thresholds", where);
    return r;
}

inline MatchReport match_from_json(const Json& j, const std::string& where) {
    MatchReport m;
    m.matched_pairs = array_from_json<MatchedPair>(j, "matched_pairs", where, [](const Json& p, const std::string& w) {
        return MatchedPair{detail::get<std::size_t>(p, "truth_index", w), detail::get<std::size_t>(p, "found_index", w),
                           detail::get<double>(p, "distance", w), detail::get<double>(p, "intensity_error", w)};
    });
    m.missed_truth = detail::get<std::vector<std::size_t>>(j, "missed_truth", where);
    m.spurious_found = detail::get<std::vector<std::size_t>>(j, "spurious_found", where);
    return m;
}

inline ExperimentSpec spec_from_json(const Json& j) {
    const std::string w = "spec";
    detail::expect_format(j, kSpecFormat, w);
    ExperimentSpec s;
    s.box = box_from_json(detail::field(j, "box", w), w + ".box");
    s.k = detail::get<double>(j, "k", w);
    s.v_max = detail::get<double>(j, "v_max", w);
    s.sources = array_from_json<Point3>(j, "sources", w, point_from_json);
    s.detectors = array_from_json<Point3>(j, "detectors", w, point_from_json);
    s.truth = array_from_json<Scatterer>(j, "truth", w, scatterer_from_json);
    s.noise_delta = detail::get<double>(j, "noise_delta", w);
    s.seed = detail::get<std::uint64_t>(j, "seed", w);
    return s;
}

inline Dataset dataset_from_json(const Json& j) {
    const std::string w = "dataset";
    detail::expect_format(j, kDatasetFormat, w);
    Dataset d;
    d.measurement.k = detail::get<double>(j, "k", w);
    d.measurement.pairs =
        array_from_json<SourceDetectorPair>(j, "pairs", w, [](const Json& p, const std::string& pw) {
            return SourceDetectorPair{point_from_json(detail::field(p, "source", pw), pw + ".source"),
                                      point_from_json(detail::field(p, "detector", pw), pw + ".detector")};
        });
    d.measurement.data = array_from_json<Complex>(j, "data", w, complex_from_json);
    if (j.contains("box")) {
        d.box = box_from_json(j["box"], w + ".box");
    }
    if (j.contains("truth")) {
        d.truth = array_from_json<Scatterer>(j, "truth", w, scatterer_from_json);
    }
    return d;
}

/// Missing fields fall back to the defaults (the reference parameter set).
inline InversionParams params_from_json(const Json& j) {
    const std::string w = "params";
    if (j.contains("format")) {
        detail::expect_format(j, kParamsFormat, w);
    }
    InversionParams p;
    HsdParams& h = p.hsd;
    h.m_cap = detail::get_or<std::size_t>(j, "M_cap", w, h.m_cap);
    h.v_max = detail::get_or<double>(j, "v_max", w, h.v_max);
    h.p0 = detail::get_or<double>(j, "P0", w, h.p0);
    h.t_max = detail::get_or<std::size_t>(j, "T_max", w, h.t_max);
    h.eps_s = detail::get_or<double>(j, "eps_s", w, h.eps_s);
    h.eps_i = detail::get_or<double>(j, "eps_i", w, h.eps_i);
    h.eps_d = detail::get_or<double>(j, "eps_d", w, h.eps_d);
    h.eps = detail::get_or<double>(j, "eps", w, h.eps);
    h.n_max = detail::get_or<std::size_t>(j, "n_max", w, h.n_max);
    h.master_seed = detail::get_or<std::uint64_t>(j, "master_seed", w, h.master_seed);
    h.threads = detail::get_or<std::size_t>(j, "threads", w, h.threads);
    if (j.contains("box")) {
        p.box = box_from_json(j["box"], w + ".box");
    }
    if (j.contains("powell")) {
        const Json& pw = j["powell"];
        const std::string ww = w + ".powell";
        h.powell.value_tol = detail::get_or<double>(pw, "value_tol", ww, h.powell.value_tol);
        h.powell.line_tol = detail::get_or<double>(pw, "line_tol", ww, h.powell.line_tol);
        h.powell.max_sweeps = detail::get_or<std::size_t>(pw, "max_sweeps", ww, h.powell.max_sweeps);
        h.powell.eval_budget = detail::get_or<std::size_t>(pw, "eval_budget_per_point", ww, h.powell.eval_budget);
    }
    return p;
}

inline ResultRecord result_from_json(const Json& j) {
    const std::string w = "result";
    detail::expect_format(j, kResultFormat, w);
    ResultRecord r;
    r.found = configuration_from_json(detail::field(j, "found", w), w + ".found");
    r.winner = detail::get<std::size_t>(j, "winner", w);
    r.reports = array_from_json<RestartReport>(j, "reports", w, restart_report_from_json);
    const Json& m = detail::field(j, "match", w);
    if (!m.is_null()) {
        r.match = match_from_json(m, w + ".match");
    }
    r.wall_time = detail::get<double>(j, "wall_time", w);
    return r;
}

// ---------------------------------------------------------------------------
// Files.

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path.string() + ": cannot open");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline Json parse_json(const std::string& text, const std::string& origin) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

inline Json read_json(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

/// Writes to a sibling temporary file, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error(tmp.string() + ": cannot open for writing");
        }
        out << contents;
        out.flush();
        if (!out) {
            throw std::runtime_error(tmp.string() + ": write failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error(path.string() + ": rename failed: " + ec.message());
    }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// CSV.

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* kDatasetCsvHeader = "source_x1,source_x2,source_x3,detector_x1,detector_x2,detector_x3,re_f,im_f";

/// Dataset as CSV: a "# k=<k>" line, a header, one row per pair.
inline std::string dataset_to_csv(const MeasurementSet& m) {
    std::string out = "# k=" + format_double(m.k) + "\n" + kDatasetCsvHeader + "\n";
    for (std::size_t j = 0; j < m.pairs.size(); ++j) {
        const auto& p = m.pairs[j];
        const double cols[] = {p.source.x1,   p.source.x2,   p.source.x3,       p.detector.x1,
                               p.detector.x2, p.detector.x3, m.data[j].real(), m.data[j].imag()};
        for (std::size_t c = 0; c < 8; ++c) {
            out += format_double(cols[c]);
            out += c + 1 < 8 ? ',' : '\n';
        }
    }
    return out;
}

inline std::vector<double> split_doubles(const std::string& line, const std::string& where) {
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(cell, &used));
            if (used != cell.size()) {
                throw std::invalid_argument(cell);
            }
        } catch (const std::exception&) {
            throw ParseError(where + ": not a number: \"" + cell + "\"");
        }
    }
    return values;
}

inline MeasurementSet dataset_from_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# k=", 0) != 0) {
        throw ParseError(origin + ": line 1: expected \"# k=<wavenumber>\"");
    }
    MeasurementSet m;
    m.k = split_doubles(line.substr(4), origin + ": line 1").at(0);
    if (!std::getline(in, line) || line != kDatasetCsvHeader) {
        throw ParseError(origin + ": line 2: unexpected header");
    }
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto v = split_doubles(line, origin + ": line " + std::to_string(line_no));
        if (v.size() != 8) {
            throw ParseError(origin + ": line " + std::to_string(line_no) + ": expected 8 columns");
        }
        m.pairs.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
        m.data.emplace_back(v[6], v[7]);
    }
    return m;
}

inline std::string slice_to_csv(const std::vector<SlicePoint>& slice) {
    std::string out = "r,phi_tilde\n";
    for (const auto& p : slice) {
        out += format_double(p.r) + "," + format_double(p.value) + "\n";
    }
    return out;
}

inline std::vector<SlicePoint> slice_from_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "r,phi_tilde") {
        throw ParseError(origin + ": expected header \"r,phi_tilde\"");
    }
    std::vector<SlicePoint> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto v = split_doubles(line, origin + ": line " + std::to_string(line_no));
        if (v.size() != 2) {
            throw ParseError(origin + ": line " + std::to_string(line_no) + ": expected 2 columns");
        }
        out.push_back({v[0], v[1]});
    }
    return out;
}

/// Reads a dataset in JSON or (by .csv extension) CSV form and validates it.
inline Dataset load_dataset(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    Dataset d;
    if (path.extension() == ".csv") {
        d.measurement = dataset_from_csv(text, path.string());
    } else {
        d = dataset_from_json(parse_json(text, path.string()));
    }
    try {
        validate(d.measurement);
    } catch (const std::invalid_argument& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return d;
}

} // namespace hsd
