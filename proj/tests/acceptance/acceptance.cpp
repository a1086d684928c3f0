// One PASS/FAIL line per acceptance criterion. Arguments select criteria by number; none runs all.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "../pareto_oracle.hpp"
#include "../front_fixture.hpp"
#include "../test_util.hpp"
#include "evocnn/error.hpp"
#include "evocnn/mutation.hpp"
#include "evocnn/pipeline.hpp"

using namespace evocnn;
using namespace evocnn::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// 1 -------------------------------------------------------------------------------------------

Outcome topsis_fixture() {
    const auto t0 = Clock::now();
    const auto front = published_front();
    const Alternative best = select_best(front, TopsisWeights(1, 1));
    const double dt = seconds_since(t0);
    const bool ok = best.generation == 507 && best.compression == 0.66 && best.accuracy == 0.7028 && dt < 1.0;
    return {ok, "selected generation " + std::to_string(best.generation) + " in " + fmt("%.4fs", dt)};
}

// 2 -------------------------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    Rng rng(90210);
    double worst = 0.0;
    std::size_t checked = 0, resampled = 0;
    for (int i = 0; i < 100; ++i) {
        RandomStack s = random_stack(rng);
        GradCheckResult r = grad_check(s.net, s.x, s.head);
        // A perturbation that flips a ReLU or pooling choice measures a different function.
        while (r.kink_crossed) {
            ++resampled;
            s = random_stack(rng);
            r = grad_check(s.net, s.x, s.head);
        }
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
    }
    const double dt = seconds_since(t0);
    return {worst < 1e-4 && dt < 60.0,
            "100 stacks, " + std::to_string(checked) + " partials, max rel error " + fmt("%.3g", worst) + ", " +
                std::to_string(resampled) + " resampled at kinks, " + fmt("%.1fs", dt)};
}

// 3 -------------------------------------------------------------------------------------------

Outcome pareto_oracle() {
    const auto t0 = Clock::now();
    Rng rng(31337);
    std::size_t mismatches = 0;
    for (int i = 0; i < 500; ++i) {
        const auto pts = random_population(rng, 64);
        auto got = pareto_fronts(pts);
        auto want = brute_force_fronts(pts);
        for (auto& f : got) std::sort(f.begin(), f.end());
        for (auto& f : want) std::sort(f.begin(), f.end());
        if (got != want) ++mismatches;
    }
    const double dt = seconds_since(t0);
    return {mismatches == 0 && dt < 30.0, std::to_string(mismatches) + " mismatches in 500 populations, " + fmt("%.2fs", dt)};
}

// 4 -------------------------------------------------------------------------------------------

Outcome mutation_constraint() {
    const auto t0 = Clock::now();
    Rng rng(4242);
    const Shape3 shape{3, 32, 32};
    std::vector<Genome> pool{seed_genome(GenomeKind::Encoder, "s", 0.01)};
    std::size_t accepted = 0, violations = 0;
    while (accepted < 10000) {
        const Genome& parent = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        const auto out = mutate_valid(parent, shape, encoder_mutations(), rng, {}, "k" + std::to_string(accepted));
        if (!out.child) continue;
        ++accepted;
        // Recomputed independently of the validity check inside mutate_valid.
        const auto trace = infer_shapes(*out.child, shape);
        if (trace.back().size() >= shape.size()) ++violations;
        if (out.child->layers.size() <= 10) pool.push_back(*out.child);
        if (pool.size() > 200) pool.erase(pool.begin());
    }
    const double dt = seconds_since(t0);
    return {violations == 0 && dt < 60.0,
            std::to_string(accepted) + " accepted, " + std::to_string(violations) + " not smaller than input, " +
                fmt("%.1fs", dt)};
}

// 5 -------------------------------------------------------------------------------------------

Outcome mirror_round_trip() {
    const auto t0 = Clock::now();
    Rng rng(555);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    std::size_t valid = 0, mismatches = 0, forwarded = 0;
    while (valid < 1000) {
        const Shape3 s{pick(1, 4), pick(2, 40), pick(2, 40)};
        Genome g = seed_genome(GenomeKind::Encoder, "e", 0.01);
        g.layers.clear();
        const std::size_t depth = pick(1, 6);
        for (std::size_t d = 0; d < depth; ++d) {
            if (pick(0, 2) == 0)
                g.layers.push_back(LayerGene::pool(pick(2, 4), pick(2, 4)));
            else
                g.layers.push_back(LayerGene::conv(pick(1, 16), pick(1, 5), pick(1, 5), pick(1, 3)));
        }
        if (!g.layers.front().is_conv()) continue;
        if (validate_encoder(g, s)) continue;
        ++valid;
        const Network ae = build_autoencoder(g, s);
        if (ae.output_shape() != s) ++mismatches;
        // Run the smaller ones for real as well.
        if (s.size() <= 600) {
            Network net = build_autoencoder(g, s);
            net.init_params(rng);
            const Tensor4 y = net.forward(random_tensor(1, s.c, s.h, s.w, rng, 0.0, 1.0));
            if (y.sample_shape() != s) ++mismatches;
            ++forwarded;
        }
    }
    const double dt = seconds_since(t0);
    return {mismatches == 0, std::to_string(valid) + " encoders (" + std::to_string(forwarded) + " run forward), " +
                                 std::to_string(mismatches) + " shape mismatches, " + fmt("%.1fs", dt)};
}

// shared by 6, 7, 8, 10 -------------------------------------------------------------------------

RunConfig base_config(const TempDir& dir) {
    RunConfig c;
    c.population_root = dir / "pop";
    c.report_dir = dir / "reports";
    c.classes = 4;
    return c;
}

int wait_status(pid_t pid, int options, bool& done) {
    int status = 0;
    done = ::waitpid(pid, &status, options) == pid;
    return status;
}

std::set<std::string> ids_in(const fs::path& dir) {
    std::set<std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
    return out;
}

std::size_t count_lines(const PopulationStore& store, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(store.logs_dir())) {
        const std::string name = e.path().filename().string();
        if (name.rfind(prefix, 0) == 0) n += store.read_log(name).size();
    }
    return n;
}

// 6 -------------------------------------------------------------------------------------------

struct StoreCheck {
    bool ok = true;
    std::string why;
    std::size_t live = 0, dead = 0, claims = 0, orphans = 0, seeds = 0, children = 0, rounds = 0;
};

StoreCheck check_store(const PopulationStore& store, std::size_t workers) {
    StoreCheck r;
    auto fail = [&](const std::string& msg) {
        if (r.ok) r.why = msg;
        r.ok = false;
    };
    const auto live = ids_in(store.live_dir());
    const auto dead = ids_in(store.dead_dir());
    const auto claimed = ids_in(store.claimed_dir());
    r.live = live.size();
    r.dead = dead.size();
    r.orphans = claimed.size();
    r.rounds = count_lines(store, "rounds-");
    for (const auto& id : live)
        if (dead.count(id)) fail("id both live and dead: " + id);

    // Every id was claimed by exactly one worker.
    std::map<std::string, std::string> owner;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::string name = worker_name(w);
        for (const auto& id : store.read_log("claims-" + name + ".log")) {
            ++r.claims;
            if (!owner.emplace(id, name).second) fail("id claimed twice: " + id);
        }
    }
    for (const auto* set : {&live, &dead})
        for (const auto& id : *set)
            if (!owner.count(id)) fail("unclaimed id in store: " + id);
    // A claim ends in live, dead or (if its worker died) an orphaned claim. A worker killed
    // between creating the claim and logging it leaves an unlogged orphan.
    std::size_t logged_orphans = 0;
    for (const auto& id : claimed) logged_orphans += owner.count(id);
    if (r.claims != r.live + r.dead + logged_orphans) fail("claims do not add up");

    for (const auto& id : live) {
        try {
            const auto ind = store.load_live(id);
            if (!ind || ind->genome.id != id || ind->record.id != id) {
                fail("incomplete live individual " + id);
                continue;
            }
            decode_weights(ind->weights);
            if (ind->genome.parent_id) ++r.children; else ++r.seeds;
        } catch (const std::exception& e) {
            fail("corrupt live individual " + id + ": " + e.what());
        }
    }
    for (const auto& id : dead) {
        try {
            const auto ind = store.load_any(id);
            if (!ind || ind->genome.id != id || ind->record.id != id) {
                fail("incomplete dead individual " + id);
                continue;
            }
            if (ind->genome.parent_id) ++r.children; else ++r.seeds;
        } catch (const std::exception& e) {
            fail("corrupt dead individual " + id + ": " + e.what());
        }
    }
    // Conservation: every individual in the store was published as a seed or as a child.
    if (r.live + r.dead != r.seeds + r.children) fail("live + dead != seeds + children");
    return r;
}

RunConfig store_config(const TempDir& dir) {
    RunConfig c = base_config(dir);
    c.synth.count = 120;
    c.synth.height = c.synth.width = 8;
    c.epochs = 1;
    c.batch_size = 10;
    c.workers = 4;
    c.seeds_per_worker = 2;
    c.rounds = 500;
    c.mutation.insert_conv_filters = {4, 8};
    c.mutation.max_filters = 16;
    return c;
}

Outcome store_safety() {
    const auto t0 = Clock::now();
    std::ostringstream detail;
    bool ok = true;

    // Without kills the invariant is exact.
    {
        TempDir dir;
        const RunConfig cfg = store_config(dir);
        const StepSummary s = run_step(cfg, GenomeKind::Classifier, EVOCNN_CLI_PATH);
        const StoreCheck c = check_store(PopulationStore(population_dir(cfg, GenomeKind::Classifier)), cfg.workers);
        const std::size_t seeds = cfg.workers * cfg.seeds_per_worker;
        const bool exact = c.ok && s.failed_workers == 0 && c.live == seeds && c.dead == cfg.rounds &&
                           c.rounds == cfg.rounds && c.orphans == 0;
        ok &= exact;
        detail << "clean: live=" << c.live << " dead=" << c.dead << " rounds=" << c.rounds
               << (exact ? "" : " FAIL " + c.why) << "; ";
    }

    // Random SIGKILLs; killed workers are restarted until the budget is spent.
    {
        TempDir dir;
        const RunConfig cfg = store_config(dir);
        const fs::path conf = write_step_config(cfg, GenomeKind::Classifier);
        PopulationStore store(population_dir(cfg, GenomeKind::Classifier));
        write_run_start(store, std::chrono::system_clock::now());
        std::vector<pid_t> pids(cfg.workers);
        for (std::size_t i = 0; i < cfg.workers; ++i) pids[i] = spawn_worker(EVOCNN_CLI_PATH, conf, GenomeKind::Classifier, i);
        Rng rng(66);
        std::size_t kills = 0, bad_exits = 0;
        const std::size_t max_kills = 40;
        for (;;) {
            std::this_thread::sleep_for(std::chrono::milliseconds(std::uniform_int_distribution<int>(5, 60)(rng)));
            std::size_t running = 0;
            for (auto& pid : pids) {
                if (pid <= 0) continue;
                bool done = false;
                const int st = wait_status(pid, WNOHANG, done);
                if (done) {
                    if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) ++bad_exits;
                    pid = 0;
                } else {
                    ++running;
                }
            }
            if (running == 0) break;
            if (kills >= max_kills) continue;
            const std::size_t victim = std::uniform_int_distribution<std::size_t>(0, cfg.workers - 1)(rng);
            if (pids[victim] <= 0) continue;
            ::kill(pids[victim], SIGKILL);
            bool done = false;
            wait_status(pids[victim], 0, done);
            ++kills;
            pids[victim] = spawn_worker(EVOCNN_CLI_PATH, conf, GenomeKind::Classifier, victim);
        }
        const StoreCheck c = check_store(store, cfg.workers);
        // A killed worker may leave one orphaned claim, and its ticket is lost.
        const bool safe = c.ok && bad_exits == 0 && c.orphans <= kills && c.rounds + kills >= cfg.rounds &&
                          c.rounds <= cfg.rounds;
        ok &= safe;
        detail << "killed " << kills << ": live=" << c.live << " dead=" << c.dead << " rounds=" << c.rounds
               << " orphaned claims=" << c.orphans << (safe ? "" : " FAIL " + c.why);
    }
    const double dt = seconds_since(t0);
    ok &= dt < 600.0;
    detail << ", " << fmt("%.0fs", dt);
    return {ok, detail.str()};
}

// 7 -------------------------------------------------------------------------------------------

Outcome desk_scale_evolution() {
    const auto t0 = Clock::now();
    TempDir dir;
    RunConfig cfg = base_config(dir);
    cfg.synth.count = 960;
    cfg.synth.height = cfg.synth.width = 16;
    cfg.workers = 2;
    cfg.seeds_per_worker = 2;
    cfg.rounds = 150;
    cfg.epochs = 3;
    cfg.mutation.insert_conv_filters = {8, 16};
    cfg.mutation.max_filters = 32;
    const StepSummary s = run_step(cfg, GenomeKind::Classifier, EVOCNN_CLI_PATH);
    bool monotone = !s.best_so_far.empty();
    for (std::size_t i = 1; i < s.best_so_far.size(); ++i) monotone &= s.best_so_far[i] >= s.best_so_far[i - 1];
    const double dt = seconds_since(t0);
    const bool ok = s.failed_workers == 0 && s.rounds == cfg.rounds && s.best_metric >= 0.60 && monotone && dt < 1800.0;
    return {ok, "best validation accuracy " + fmt("%.4f", s.best_metric) + " after " + std::to_string(s.rounds) +
                    " rounds, best-so-far " + (monotone ? "non-decreasing" : "DECREASES") + ", " + fmt("%.0fs", dt)};
}

// 8 -------------------------------------------------------------------------------------------

std::size_t rounds_in_wall_time(const RunConfig& base, const std::optional<fs::path>& encoded, double seconds) {
    TempDir dir;
    RunConfig cfg = base;
    cfg.population_root = dir / "pop";
    cfg.report_dir = dir / "reports";
    cfg.encoded_dir = encoded.value_or(fs::path{});
    cfg.workers = 1;
    cfg.rounds = 0;
    cfg.wall_seconds = seconds;
    return run_step(cfg, GenomeKind::Classifier, EVOCNN_CLI_PATH).rounds;
}

Outcome throughput_gain() {
    const auto t0 = Clock::now();
    TempDir dir;
    RunConfig cfg = base_config(dir);
    cfg.synth.count = 960;
    cfg.synth.height = cfg.synth.width = 16;
    cfg.epochs = 1;
    cfg.seeds_per_worker = 2;
    cfg.mutation.insert_conv_filters = {8, 16};
    cfg.mutation.max_filters = 32;

    // Fixed encoder Conv(4) + Pool(2x2): 3x16x16 -> 4x8x8.
    Genome g = seed_genome(GenomeKind::Encoder, "enc", 0.01);
    g.layers = {LayerGene::conv(4, 3, 3, 1), LayerGene::pool(2, 2)};
    const Shape3 raw_shape{3, 16, 16};
    const double ratio = compression_ratio(g, raw_shape);
    Network ae = build_autoencoder(g, raw_shape);
    Rng rng(8);
    ae.init_params(rng);
    const Splits raw = split_dataset(load_raw_dataset(cfg), cfg.data_seed);
    const fs::path enc_dir = dir / "encoded";
    fs::create_directories(enc_dir);
    write_encoded(enc_dir / "train.evod", encode_dataset(ae, raw.train));
    write_encoded(enc_dir / "val.evod", encode_dataset(ae, raw.val));
    write_encoded(enc_dir / "test.evod", encode_dataset(ae, raw.test));

    const double budget = 20.0;
    std::vector<double> gains;
    std::ostringstream runs;
    for (int rep = 0; rep < 5; ++rep) {
        RunConfig c = cfg;
        c.master_seed = 100 + static_cast<std::uint64_t>(rep);
        const std::size_t r_raw = rounds_in_wall_time(c, std::nullopt, budget);
        const std::size_t r_enc = rounds_in_wall_time(c, enc_dir, budget);
        gains.push_back(r_raw == 0 ? 0.0 : static_cast<double>(r_enc) / static_cast<double>(r_raw) - 1.0);
        runs << (rep ? " " : "") << r_enc << "/" << r_raw;
    }
    std::sort(gains.begin(), gains.end());
    const double median = gains[2];
    const double dt = seconds_since(t0);
    return {median >= 0.10 && dt < 3600.0,
            "compression " + fmt("%.3f", ratio) + ", rounds encoded/raw " + runs.str() + ", median gain " +
                fmt("%+.1f%%", 100 * median) + ", " + fmt("%.0fs", dt)};
}

// 9 -------------------------------------------------------------------------------------------

const char* kBatchFiles[] = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                             "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};

// Standard-format batches with 1000 images per class per file, random pixels.
void write_standard_batches(const fs::path& dir) {
    Rng rng(9);
    std::uniform_int_distribution<int> px(0, 255);
    std::vector<std::uint8_t> bytes(10000 * kCifarRecordBytes);
    for (const char* name : kBatchFiles) {
        std::vector<std::uint8_t> labels(10000);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i % 10);
        std::shuffle(labels.begin(), labels.end(), rng);
        for (std::size_t r = 0; r < 10000; ++r) {
            bytes[r * kCifarRecordBytes] = labels[r];
            for (std::size_t i = 1; i < kCifarRecordBytes; ++i) bytes[r * kCifarRecordBytes + i] = static_cast<std::uint8_t>(px(rng));
        }
        std::ofstream(dir / name, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}

Outcome cifar_loader() {
    TempDir scratch;
    fs::path dir;
    std::string source;
    if (const char* env = std::getenv("EVOCNN_CIFAR10_DIR"); env && *env) {
        dir = env;
        source = "files from " + dir.string();
    } else {
        dir = scratch.path();
        write_standard_batches(dir);
        source = "generated standard-format files (EVOCNN_CIFAR10_DIR unset)";
    }
    const auto t0 = Clock::now();
    std::vector<std::size_t> counts(10, 0);
    std::size_t total = 0, differing = 0;
    for (const char* name : kBatchFiles) {
        std::ifstream in(dir / name, std::ios::binary);
        const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
        const Dataset ds = load_cifar10_batch(dir / name);
        if (serialize_cifar10(ds) != bytes) ++differing;
        total += ds.size();
        const auto h = ds.class_histogram(10);
        for (std::size_t c = 0; c < 10; ++c) counts[c] += h[c];
    }
    const double dt = seconds_since(t0);
    const bool balanced = std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 6000; });
    return {differing == 0 && balanced && total == 60000 && dt < 10.0,
            source + ": " + std::to_string(total) + " images, " + (balanced ? "6000 per class" : "UNBALANCED") + ", " +
                std::to_string(differing) + " batches not byte-identical, " + fmt("%.1fs", dt)};
}

// 10 ------------------------------------------------------------------------------------------

Outcome determinism() {
    std::string exports[2];
    for (auto& out : exports) {
        TempDir dir;
        RunConfig cfg = base_config(dir);
        cfg.synth.count = 240;
        cfg.synth.height = cfg.synth.width = 8;
        cfg.epochs = 1;
        cfg.batch_size = 20;
        cfg.workers = 1;
        cfg.seeds_per_worker = 3;
        cfg.rounds = 20;
        cfg.master_seed = 1234;
        run_step(cfg, GenomeKind::Classifier, EVOCNN_CLI_PATH);
        out = export_history(cfg, GenomeKind::Classifier, HistoryOptions{false});
    }
    const std::size_t rows = static_cast<std::size_t>(std::count(exports[0].begin(), exports[0].end(), '\n'));
    return {exports[0] == exports[1] && rows > 1,
            std::to_string(rows - 1) + " history rows, exports " + (exports[0] == exports[1] ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"topsis fixture", topsis_fixture},     {"gradient suite", gradient_suite},
        {"pareto oracle", pareto_oracle},       {"mutation constraint", mutation_constraint},
        {"mirror round-trip", mirror_round_trip}, {"store safety", store_safety},
        {"desk-scale evolution", desk_scale_evolution}, {"throughput gain", throughput_gain},
        {"cifar-10 loader", cifar_loader},      {"determinism", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(n)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
