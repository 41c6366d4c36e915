#pragma once

// Trajectory data model, JSONL ingestion/validation and dataset splitting.
//
// File layout: line 1 is a header {"format_version": 1, "k_stat": k}; every
// following line is one trajectory
//   {"question_id", "trajectory_id", "answer", "label"?, "score"?, "steps": [[lp_1..lp_k], ...]}
// where each step holds the k largest token log-probabilities, sorted
// non-increasing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "chronos/error.hpp"

namespace chronos {

inline constexpr int kFormatVersion = 1;

struct Trajectory {
    std::string question_id;
    std::string trajectory_id;
    std::string answer;
    std::optional<bool> label;
    std::optional<double> score;  // present in scored files
    std::size_t k = 0;            // log-probabilities stored per step
    std::vector<double> logprobs;  // num_steps() * k, row-major

    std::size_t num_steps() const { return k == 0 ? 0 : logprobs.size() / k; }

    std::span<const double> step(std::size_t t) const {
        return std::span<const double>(logprobs).subspan(t * k, k);
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Dataset {
    std::size_t k_stat = 0;
    std::vector<Trajectory> trajectories;
};

struct Diagnostic {
    std::size_t line = 0;  // 1-based
    std::string record;    // "question_id/trajectory_id" when known
    std::string message;

    std::string to_string() const {
        std::string s = "line " + std::to_string(line);
        if (!record.empty()) s += " (" + record + ")";
        return s + ": " + message;
    }
};

namespace detail {

inline std::size_t parse_header(const std::string& text) {
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON header: ") + e.what());
    }
    if (!h.is_object() || !h.contains("format_version") || !h.contains("k_stat"))
        throw ValidationError("header must be an object with format_version and k_stat");
    if (!h["format_version"].is_number_integer() || h["format_version"].get<int>() != kFormatVersion)
        throw ValidationError("unsupported format_version (expected " +
                              std::to_string(kFormatVersion) + ")");
    if (!h["k_stat"].is_number_integer() || h["k_stat"].get<long long>() < 1)
        throw ValidationError("k_stat must be a positive integer");
    return h["k_stat"].get<std::size_t>();
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(std::string("missing field \"") + key + "\"");
    return *it;
}

inline std::string require_string(const nlohmann::json& j, const char* key) {
    const auto& v = require(j, key);
    if (!v.is_string()) throw ValidationError(std::string("field \"") + key + "\" must be a string");
    return v.get<std::string>();
}

// Parses and checks one record. `id_out` receives "qid/tid" as soon as both
// ids are known so that later errors can name the record.
inline Trajectory parse_record(const std::string& text, std::size_t k, std::string& id_out) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("record must be a JSON object");

    Trajectory tr;
    tr.question_id = require_string(j, "question_id");
    tr.trajectory_id = require_string(j, "trajectory_id");
    id_out = tr.question_id + "/" + tr.trajectory_id;
    tr.answer = require_string(j, "answer");
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
        if (!it->is_boolean()) throw ValidationError("field \"label\" must be a boolean");
        tr.label = it->get<bool>();
    }
    if (auto it = j.find("score"); it != j.end() && !it->is_null()) {
        if (!it->is_number()) throw ValidationError("field \"score\" must be a number");
        tr.score = it->get<double>();
    }

    const auto& steps = require(j, "steps");
    if (!steps.is_array() || steps.empty())
        throw ValidationError("field \"steps\" must be a non-empty array");
    tr.k = k;
    tr.logprobs.reserve(steps.size() * k);
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto& st = steps[t];
        const std::string where = "step " + std::to_string(t);
        if (!st.is_array()) throw ValidationError(where + " is not an array");
        if (st.size() != k)
            throw ValidationError(where + " has " + std::to_string(st.size()) +
                                  " log-probabilities, header declares k_stat=" + std::to_string(k));
        double prev = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (!st[i].is_number()) throw ValidationError(where + ": non-numeric log-probability");
            double v = st[i].get<double>();
            if (!std::isfinite(v)) throw ValidationError(where + ": non-finite log-probability");
            if (v > 0.0) throw ValidationError(where + ": positive log-probability");
            if (i > 0 && v > prev) throw ValidationError(where + ": unsorted log-probabilities");
            prev = v;
            tr.logprobs.push_back(v);
        }
    }
    return tr;
}

inline nlohmann::ordered_json record_json(const Trajectory& tr) {
    nlohmann::ordered_json j;
    j["question_id"] = tr.question_id;
    j["trajectory_id"] = tr.trajectory_id;
    j["answer"] = tr.answer;
    if (tr.label) j["label"] = *tr.label;
    if (tr.score) j["score"] = *tr.score;
    auto steps = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < tr.num_steps(); ++t) {
        auto row = nlohmann::ordered_json::array();
        for (double v : tr.step(t)) row.push_back(v);
        steps.push_back(std::move(row));
    }
    j["steps"] = std::move(steps);
    return j;
}

}  // namespace detail

/// Streams trajectories from a JSONL file one record at a time.
class JsonlReader {
public:
    explicit JsonlReader(const std::filesystem::path& path) : in_(path) {
        if (!in_) throw IoError("cannot open " + path.string());
        std::string line;
        if (!std::getline(in_, line)) throw ValidationError("line 1: missing header");
        line_no_ = 1;
        try {
            k_ = detail::parse_header(line);
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("line 1: ") + e.what());
        }
    }

    std::size_t k_stat() const { return k_; }
    std::size_t line() const { return line_no_; }

    /// Reads the next record into `out`; returns false at end of file.
    /// Throws ValidationError (with line number) on an invalid record.
    bool next(Trajectory& out) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty()) continue;
            std::string id;
            try {
                out = detail::parse_record(line, k_, id);
            } catch (const ValidationError& e) {
                throw ValidationError(Diagnostic{line_no_, id, e.what()}.to_string());
            }
            return true;
        }
        if (in_.bad()) throw IoError("read failure at line " + std::to_string(line_no_));
        return false;
    }

private:
    std::ifstream in_;
    std::size_t k_ = 0;
    std::size_t line_no_ = 0;
};

/// Writes a header then one record per call.
class JsonlWriter {
public:
    JsonlWriter(const std::filesystem::path& path, std::size_t k_stat)
        : out_(path, std::ios::binary), k_(k_stat) {
        if (!out_) throw IoError("cannot write " + path.string());
        nlohmann::ordered_json h;
        h["format_version"] = kFormatVersion;
        h["k_stat"] = k_stat;
        out_ << h.dump() << '\n';
    }

    void write(const Trajectory& tr) {
        if (tr.k != k_) throw ValidationError("trajectory k does not match file k_stat");
        out_ << detail::record_json(tr).dump() << '\n';
        if (!out_) throw IoError("write failure");
    }

private:
    std::ofstream out_;
    std::size_t k_;
};

/// Loads and fully validates a trajectory file; throws on the first problem.
inline Dataset load_jsonl(const std::filesystem::path& path) {
    JsonlReader reader(path);
    Dataset ds;
    ds.k_stat = reader.k_stat();
    std::set<std::pair<std::string, std::string>> seen;
    Trajectory tr;
    while (reader.next(tr)) {
        if (!seen.emplace(tr.question_id, tr.trajectory_id).second)
            throw ValidationError(Diagnostic{reader.line(), tr.question_id + "/" + tr.trajectory_id,
                                             "duplicate (question_id, trajectory_id)"}
                                      .to_string());
        ds.trajectories.push_back(std::move(tr));
    }
    return ds;
}

inline void save_jsonl(const std::filesystem::path& path, const Dataset& ds) {
    JsonlWriter w(path, ds.k_stat);
    for (const auto& tr : ds.trajectories) w.write(tr);
}

struct ValidationReport {
    std::size_t records = 0;
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return diagnostics.empty(); }
};

/// Checks every record, collecting all diagnostics instead of stopping at
/// the first. Only an unreadable file throws (IoError).
inline ValidationReport validate_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    ValidationReport rep;
    std::string line;
    if (!std::getline(in, line)) {
        rep.diagnostics.push_back({1, "", "missing header"});
        return rep;
    }
    std::size_t k = 0;
    try {
        k = detail::parse_header(line);
    } catch (const ValidationError& e) {
        rep.diagnostics.push_back({1, "", e.what()});
        return rep;
    }
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ++rep.records;
        std::string id;
        try {
            auto tr = detail::parse_record(line, k, id);
            if (!seen.emplace(tr.question_id, tr.trajectory_id).second)
                rep.diagnostics.push_back({line_no, id, "duplicate (question_id, trajectory_id)"});
        } catch (const ValidationError& e) {
            rep.diagnostics.push_back({line_no, id, e.what()});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

struct DatasetSplit {
    std::vector<std::size_t> train;  // indices into the input sequence, ascending
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

namespace detail {
inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }
}  // namespace detail

/// Random trajectory-level partition. Validation and test get
/// round(ratio * N) members each, train takes the remainder. With
/// `group_by_question` whole questions are assigned, so sizes are only
/// approximately on target.
inline DatasetSplit split_dataset(std::span<const Trajectory> trajs, SplitRatios ratios = {},
                                  std::uint64_t seed = 0, bool group_by_question = false) {
    const std::size_t n = trajs.size();
    if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
        throw ValidationError("split ratios must be non-negative and sum to 1");
    if (n < 10)
        throw ValidationError("split needs at least 10 trajectories, got " + std::to_string(n));

    const std::size_t n_val = detail::round_half_up(ratios.validation * static_cast<double>(n));
    const std::size_t n_test = detail::round_half_up(ratios.test * static_cast<double>(n));
    if (n_val + n_test > n) throw ValidationError("split ratios leave no training data");

    DatasetSplit out;
    out.seed = seed;
    std::mt19937_64 rng(seed);

    if (!group_by_question) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        out.validation.assign(idx.begin(), idx.begin() + n_val);
        out.test.assign(idx.begin() + n_val, idx.begin() + n_val + n_test);
        out.train.assign(idx.begin() + n_val + n_test, idx.end());
    } else {
        std::map<std::string, std::vector<std::size_t>> by_q;
        for (std::size_t i = 0; i < n; ++i) by_q[trajs[i].question_id].push_back(i);
        std::vector<const std::vector<std::size_t>*> groups;
        for (const auto& [q, members] : by_q) groups.push_back(&members);
        std::shuffle(groups.begin(), groups.end(), rng);
        for (const auto* g : groups) {
            auto& dst = out.validation.size() < n_val ? out.validation
                        : out.test.size() < n_test    ? out.test
                                                      : out.train;
            dst.insert(dst.end(), g->begin(), g->end());
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace chronos
