#pragma once

// JSON/CSV renderings of votes, evaluation reports, histograms and
// training logs.

#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "chronos/evaluator.hpp"
#include "chronos/trainer.hpp"
#include "chronos/voter.hpp"

namespace chronos {

using ojson = nlohmann::ordered_json;

inline ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }
inline ojson finite_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline ojson vote_json(const std::string& question_id, const VoteOutcome& v,
                       const std::vector<std::string>& trajectory_ids) {
    ojson j;
    j["question_id"] = question_id;
    j["winner"] = v.winner;
    j["eta"] = v.eta;
    auto ids = ojson::array();
    for (auto i : v.retained) ids.push_back(trajectory_ids.at(i));
    j["retained_ids"] = std::move(ids);
    ojson w = ojson::object();
    for (const auto& [a, s] : v.weights) w[a] = s;
    j["weights"] = std::move(w);
    return j;
}

inline ojson method_json(const SubsampleResult& r) {
    ojson j;
    j["mean"] = r.mean;
    j["std"] = r.std;
    j["per_repeat"] = r.per_repeat;
    return j;
}

inline ojson report_json(const EvalReport& rep) {
    ojson j;
    j["k"] = rep.k;
    j["repeats"] = rep.repeats;
    j["eta"] = rep.eta;
    j["seed"] = rep.seed;
    j["questions"] = rep.questions.size();
    j["pass_at_1"] = rep.pass_at_1;
    j["maj_at_k"] = method_json(rep.majority);
    j["chronos_at_k"] = method_json(rep.chronos);
    j["auc"] = optional_json(rep.auc);
    auto rows = ojson::array();
    for (const auto& q : rep.questions) {
        ojson r;
        r["question_id"] = q.question_id;
        r["pass_at_1"] = q.pass_at_1;
        r["maj_at_k"] = q.majority;
        r["chronos_at_k"] = q.chronos;
        rows.push_back(std::move(r));
    }
    j["per_question"] = std::move(rows);
    return j;
}

inline void write_question_csv(std::ostream& os, const EvalReport& rep) {
    os << "question_id,pass_at_1,maj_at_k,chronos_at_k\n";
    for (const auto& q : rep.questions)
        os << q.question_id << ',' << ojson(q.pass_at_1).dump() << ',' << ojson(q.majority).dump() << ','
           << ojson(q.chronos).dump() << '\n';
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h, bool header = true) {
    if (header) os << "benchmark,bin_lo,bin_hi,class,count,degenerate\n";
    for (const auto& r : h.records)
        os << h.benchmark << ',' << ojson(r.bin_lo).dump() << ',' << ojson(r.bin_hi).dump() << ',' << r.cls << ','
           << r.count << ',' << (h.degenerate ? "true" : "false") << '\n';
}

/// One JSON line per epoch: {"member", "epoch", "train_loss", "val_auc"}.
inline void write_epoch_log(std::ostream& os, const TrainReport& r, std::size_t member = 0,
                            const std::string& config_tag = {}) {
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
        ojson j;
        if (!config_tag.empty()) j["config"] = config_tag;
        j["member"] = member;
        j["epoch"] = e + 1;
        j["train_loss"] = r.train_loss[e];
        j["val_auc"] = finite_or_null(r.val_auc[e]);
        os << j.dump() << '\n';
    }
}

inline ojson config_json(const ChronosConfig& c) {
    ojson j;
    j["l_tail"] = c.l_tail;
    j["n_proj"] = c.n_proj;
    j["n_conv"] = c.n_conv;
    j["kernel_lengths"] = c.kernel_lengths;
    j["n_blocks"] = c.n_blocks;
    j["mlp_hidden"] = c.hidden();
    return j;
}

inline std::string config_tag(const ChronosConfig& c) {
    std::ostringstream ss;
    ss << "P" << c.n_proj << "_C" << c.n_conv << "_K";
    for (std::size_t i = 0; i < c.kernel_lengths.size(); ++i) ss << (i ? "-" : "") << c.kernel_lengths[i];
    return ss.str();
}

}  // namespace chronos
