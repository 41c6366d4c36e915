// Train a small scorer on synthetic trajectories, then compare plain majority
// voting with score-weighted top-eta voting on fresh question pools.

#include <cstdio>

#include "chronos/chronos.hpp"

int main() {
    using namespace chronos;

    SynthSpec spec;
    spec.n_questions = 40;
    spec.pool_size = 16;
    spec.min_length = 128;
    spec.max_length = 384;
    spec.l_tail = 256;
    spec.extent = 96;
    spec.k = 4;
    spec.seed = 1;
    const Dataset train_set = generate(spec);

    ChronosConfig model;
    model.l_tail = 256;
    model.n_proj = 4;
    model.n_conv = 2;
    model.kernel_lengths = {5, 10, 20};
    model.n_blocks = 2;

    TrainConfig tc;
    tc.learning_rate = 5e-3;
    tc.max_epochs = 8;
    tc.ensemble_size = 2;
    tc.threads = default_thread_count();

    const auto split = split_dataset(train_set.trajectories, {}, tc.seed);
    const auto data = prepare_split(train_set.trajectories, split, spec.k, model.l_tail);
    const EnsembleResult trained = train_ensemble(data, model, tc, spec.k);
    std::printf("ensemble of %zu, test AUC %.3f\n", trained.ensemble.members.size(), trained.test_auc.value_or(-1));

    // pools where the right answer is a 30% minority
    SynthSpec eval_spec = spec;
    eval_spec.seed = 2;
    eval_spec.n_questions = 20;
    eval_spec.pool_size = 64;
    eval_spec.correct_fraction = 0.3;
    Dataset pool_set = generate(eval_spec);
    for (auto& t : pool_set.trajectories)
        t.score = ensemble_score(trained.ensemble.members, trajectory_signal(t, spec.k, model.l_tail));

    const auto pools = build_pools(pool_set.trajectories);
    const EvalReport rep = compare_report(pools, 32, 8, 0.1, 0, tc.threads);
    std::printf("Pass@1    %.3f\n", rep.pass_at_1);
    std::printf("Maj@32    %.3f +- %.3f\n", rep.majority.mean, rep.majority.std);
    std::printf("Chronos@32 %.3f +- %.3f\n", rep.chronos.mean, rep.chronos.std);

    // a single vote, done by hand
    std::vector<ScoredTrajectory> q0;
    for (const auto& t : pool_set.trajectories)
        if (t.question_id == "q0") q0.push_back({t.trajectory_id, canonicalize_answer(t.answer), *t.score});
    const VoteOutcome v = filtered_vote(q0, 0.1);
    std::printf("q0: kept %zu of %zu, winner %s (gold %s)\n", v.n_retained, q0.size(), v.winner.c_str(),
                synth_gold_answer(0).c_str());
}
