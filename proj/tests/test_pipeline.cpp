#include <gtest/gtest.h>

#include <set>

#include "evocnn/error.hpp"
#include "evocnn/pipeline.hpp"
#include "evocnn/train.hpp"
#include "front_fixture.hpp"
#include "test_util.hpp"

using namespace evocnn;
using namespace evocnn::testing;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const TempDir& dir) {
    RunConfig c;
    c.population_root = dir / "pop";
    c.report_dir = dir / "reports";
    c.classes = 4;
    c.synth.count = 120;
    c.synth.height = c.synth.width = 8;
    c.epochs = 1;
    c.batch_size = 10;
    c.seeds_per_worker = 3;
    c.rounds = 6;
    c.mutation.insert_conv_filters = {4, 8};
    c.mutation.max_filters = 16;
    return c;
}

void run_rounds(Worker& w, std::uint64_t rounds) {
    w.seed();
    while (auto t = w.store().take_ticket(rounds)) {
        while (w.round(*t).status != Worker::Status::Completed) {
        }
    }
}

}  // namespace

TEST(Worker, SingleWorkerConservation) {
    TempDir dir;
    const RunConfig cfg = tiny_config(dir);
    const StepData data = load_step_data(cfg, GenomeKind::Classifier);
    Worker w(cfg, GenomeKind::Classifier, 0, data);
    run_rounds(w, cfg.rounds);
    EXPECT_EQ(w.store().list_live().size(), cfg.seeds_per_worker);
    EXPECT_EQ(w.store().list_dead().size(), cfg.rounds);
    const auto s = summarize(cfg, GenomeKind::Classifier);
    EXPECT_EQ(s.published, cfg.seeds_per_worker + cfg.rounds);
    EXPECT_EQ(s.rounds, cfg.rounds);
    // Seeding twice is a no-op.
    w.seed();
    EXPECT_EQ(w.store().list_live().size(), cfg.seeds_per_worker);
}

TEST(Worker, RestartTopsUpAShrunkenPopulation) {
    TempDir dir;
    const RunConfig cfg = tiny_config(dir);
    const StepData data = load_step_data(cfg, GenomeKind::Classifier);
    {
        Worker w(cfg, GenomeKind::Classifier, 0, data);
        w.seed();
        const auto live = w.store().list_live();
        // As if crashed rounds had removed losers without publishing children.
        for (std::size_t i = 1; i < live.size(); ++i) w.store().kill(live[i]);
    }
    Worker again(cfg, GenomeKind::Classifier, 0, data);
    again.seed();
    EXPECT_EQ(again.store().live_count(), 2u);
    const auto s = summarize(cfg, GenomeKind::Classifier);
    EXPECT_EQ(s.live + s.dead, cfg.seeds_per_worker + 1);
}

TEST(Worker, ExhaustedMutationPublishesIdentityChild) {
    TempDir dir;
    RunConfig cfg = tiny_config(dir);
    cfg.mutation_kinds = {MutationKind::RemovePool};  // never valid on the seed encoder
    cfg.mutation.max_tries = 3;
    cfg.rounds = 2;
    const StepData data = load_step_data(cfg, GenomeKind::Encoder);
    Worker w(cfg, GenomeKind::Encoder, 0, data);
    run_rounds(w, cfg.rounds);
    for (const auto& id : w.store().list_live()) {
        const auto ind = w.store().load_live(id);
        ASSERT_TRUE(ind);
        if (ind->genome.parent_id) {
            EXPECT_EQ(ind->genome.mutation, "Identity");
            EXPECT_EQ(ind->genome.layers, seed_genome(GenomeKind::Encoder, "x", 0.01).layers);
        }
    }
}

TEST(Worker, AutoencoderRecordsCarryPairs) {
    TempDir dir;
    RunConfig cfg = tiny_config(dir);
    cfg.rounds = 4;
    const StepData data = load_step_data(cfg, GenomeKind::Encoder);
    Worker w(cfg, GenomeKind::Encoder, 0, data);
    run_rounds(w, cfg.rounds);
    const std::string csv = export_history(cfg, GenomeKind::Encoder, HistoryOptions{false});
    std::size_t rows = 0;
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
        ++rows;
        const auto first = line.find(",,");  // empty metric column, then compression and accuracy
        EXPECT_NE(first, std::string::npos) << line;
    }
    EXPECT_EQ(rows, cfg.seeds_per_worker + cfg.rounds);
    for (const auto& r : w.store().snapshot().records) {
        ASSERT_TRUE(r.fitness.pair.has_value());
        EXPECT_GT(r.fitness.pair->compression, 0.0);
        EXPECT_LT(r.fitness.pair->compression, 1.0);
    }
}

TEST(Worker, RoundBudgetRunsAreReproducible) {
    std::string exports[2];
    for (auto& out : exports) {
        TempDir dir;
        const RunConfig cfg = tiny_config(dir);
        const StepData data = load_step_data(cfg, GenomeKind::Classifier);
        Worker w(cfg, GenomeKind::Classifier, 0, data);
        run_rounds(w, cfg.rounds);
        out = export_history(cfg, GenomeKind::Classifier, HistoryOptions{false});
    }
    EXPECT_EQ(exports[0], exports[1]);
    EXPECT_GT(exports[0].size(), 100u);
}

TEST(RunStep, WallBudgetWithWorkerProcesses) {
    TempDir dir;
    RunConfig cfg = tiny_config(dir);
    cfg.rounds = 0;
    cfg.wall_seconds = 8;
    cfg.seeds_per_worker = 2;
    const StepSummary s = run_step(cfg, GenomeKind::Classifier, EVOCNN_CLI_PATH);
    EXPECT_EQ(s.failed_workers, 0u);
    EXPECT_GE(s.published, 1u);
    EXPECT_EQ(s.best_so_far.size(), s.published);
    for (std::size_t i = 1; i < s.best_so_far.size(); ++i) EXPECT_GE(s.best_so_far[i], s.best_so_far[i - 1]);
    EXPECT_EQ(s.live, 2u);
}

TEST(CaeSelection, TopsisOverStoredFront) {
    TempDir dir;
    const RunConfig cfg = tiny_config(dir);
    PopulationStore store(population_dir(cfg, GenomeKind::Encoder));
    auto rows = published_front();
    for (const auto& extra : published_extra()) rows.push_back(extra);
    for (const auto& a : rows) {
        Individual ind;
        ind.genome = seed_genome(GenomeKind::Encoder, a.id, 0.01);
        ind.genome.generation = a.generation;
        ind.record.id = a.id;
        ind.record.kind = GenomeKind::Encoder;
        ind.record.fitness = FitnessRecord::of_pair(a.compression, a.accuracy);
        ind.record.generation = a.generation;
        ind.record.worker_id = "w00";
        ind.record.mutation = "Seed";
        store.publish(ind);
    }
    const auto front = cae_front(cfg);
    std::set<std::string> ids;
    for (const auto& a : front) ids.insert(a.id);
    EXPECT_EQ(ids.size(), 9u);
    EXPECT_FALSE(ids.count("cae-130"));
    EXPECT_EQ(select_best(front, TopsisWeights(1, 1)).generation, 507u);
    EXPECT_EQ(select_best(front, TopsisWeights(1, 0)).compression, 1.0);
}

TEST(Compose, MatchesTwoStageForward) {
    TempDir dir;
    RunConfig cfg = tiny_config(dir);
    cfg.rounds = 2;
    {
        const StepData data = load_step_data(cfg, GenomeKind::Encoder);
        Worker w(cfg, GenomeKind::Encoder, 0, data);
        run_rounds(w, cfg.rounds);
    }
    const SelectedEncoder sel = finalize_cae_step(cfg);
    EXPECT_TRUE(fs::exists(sel.encoded_dir / "train.evod"));
    EXPECT_TRUE(fs::exists(sel.encoded_dir / "test.evod"));
    cfg.encoded_dir = sel.encoded_dir;
    {
        const StepData data = load_step_data(cfg, GenomeKind::Classifier);
        EXPECT_EQ(data.input_shape, sel.encoding_shape);
        Worker w(cfg, GenomeKind::Classifier, 0, data);
        run_rounds(w, cfg.rounds);
    }
    const ComposedResult r = compose_final(cfg, sel.id);
    EXPECT_TRUE(fs::exists(r.weights_file));
    EXPECT_NEAR(r.test_accuracy, r.two_stage_test_accuracy, 0.01);

    // Prediction by prediction on the raw test split.
    const Splits raw = split_dataset(load_raw_dataset(cfg), cfg.data_seed);
    PopulationStore caes(population_dir(cfg, GenomeKind::Encoder)), clfs(population_dir(cfg, GenomeKind::Classifier));
    const auto enc = caes.load_any(sel.id);
    const auto clf = clfs.load_any(r.classifier_id);
    Network ae = build_autoencoder(enc->genome, raw.test.shape);
    load_weights(ae, decode_weights(enc->weights));
    Network head = build_classifier(clf->genome, ae.encoding_shape(), cfg.classes);
    load_weights(head, decode_weights(clf->weights));
    EXPECT_EQ(predict(r.net, raw.test), predict(head, encode_dataset(ae, raw.test)));

    // A removed classifier has no weights any more; composing with it must not retrain.
    EXPECT_TRUE(clfs.kill(r.classifier_id));
    EXPECT_THROW(compose_final(cfg, sel.id, r.classifier_id), PreconditionError);
}
