#include "evocnn/pipeline.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <system_error>
#include <thread>

#include "evocnn/error.hpp"
#include "evocnn/kernels.hpp"
#include "evocnn/mcdm.hpp"
#include "evocnn/mutation.hpp"
#include "evocnn/train.hpp"

extern char** environ;

namespace evocnn {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRunStart = "run_start";
constexpr std::uint64_t kNoRound = std::numeric_limits<std::uint64_t>::max();

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::uint64_t parse_u64(const std::string& s, std::uint64_t fallback) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size() ? v : fallback;
}

TrainOptions train_options(const RunConfig& cfg, std::size_t classes, std::uint64_t seed) {
    TrainOptions o;
    o.epochs = cfg.epochs;
    o.batch_size = cfg.batch_size;
    o.momentum = cfg.momentum;
    o.classes = classes;
    o.seed = seed;
    return o;
}

struct PublishEntry {
    std::uint64_t round = kNoRound;  // kNoRound for seeds
    std::string offset;
};

// id -> publish log entry across all workers.
std::map<std::string, PublishEntry> read_publish_logs(const PopulationStore& store) {
    std::map<std::string, PublishEntry> out;
    std::error_code ec;
    for (fs::directory_iterator it(store.logs_dir(), ec), end; !ec && it != end; it.increment(ec)) {
        const std::string name = it->path().filename().string();
        if (name.rfind("publish-", 0) != 0) continue;
        for (const auto& line : store.read_log(name)) {
            const auto f = split(line, ',');
            if (f.size() != 3) continue;
            out[f[0]] = PublishEntry{f[1] == "-" ? kNoRound : parse_u64(f[1], kNoRound), f[2]};
        }
    }
    return out;
}

std::size_t count_round_lines(const PopulationStore& store) {
    std::size_t n = 0;
    std::error_code ec;
    for (fs::directory_iterator it(store.logs_dir(), ec), end; !ec && it != end; it.increment(ec)) {
        const std::string name = it->path().filename().string();
        if (name.rfind("rounds-", 0) == 0) n += store.read_log(name).size();
    }
    return n;
}

std::optional<IndividualRecord> read_record(const fs::path& dir) {
    std::ifstream in(dir / PopulationStore::kFitnessFile);
    if (!in) return std::nullopt;
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    return parse_sidecar(line);
}

// Sidecars of every published individual, live and dead.
std::vector<IndividualRecord> all_records(const PopulationStore& store) {
    std::vector<IndividualRecord> out;
    for (const auto& id : store.list_live())
        if (auto r = read_record(store.live_dir() / id)) out.push_back(std::move(*r));
    for (const auto& id : store.list_dead())
        if (auto r = read_record(store.dead_dir() / id)) out.push_back(std::move(*r));
    return out;
}

Network restore(const Individual& ind, const Shape3& shape, std::size_t classes) {
    if (ind.weights.empty()) throw PreconditionError("individual " + ind.genome.id + " has no stored weights");
    Network net = build_network(ind.genome, shape, classes);
    load_weights(net, decode_weights(ind.weights));
    return net;
}

}  // namespace

Dataset load_raw_dataset(const RunConfig& cfg) {
    if (cfg.dataset == "cifar10") {
        if (cfg.cifar10_dir.empty()) throw PreconditionError("dataset = cifar10 needs cifar10_dir");
        return load_cifar10(cfg.cifar10_dir);
    }
    SynthConfig s = cfg.synth;
    s.classes = cfg.classes;
    return synth_dataset(s);
}

StepData load_step_data(const RunConfig& cfg, GenomeKind kind) {
    StepData d;
    d.classes = cfg.classes;
    if (kind == GenomeKind::Classifier && !cfg.encoded_dir.empty()) {
        d.splits.train = read_encoded(cfg.encoded_dir / "train.evod", SplitTag::Train);
        d.splits.val = read_encoded(cfg.encoded_dir / "val.evod", SplitTag::Val);
        d.splits.test = read_encoded(cfg.encoded_dir / "test.evod", SplitTag::Test);
    } else {
        d.splits = split_dataset(load_raw_dataset(cfg), cfg.data_seed);
    }
    d.input_shape = d.splits.train.shape;
    return d;
}

fs::path population_dir(const RunConfig& cfg, GenomeKind kind) {
    return cfg.population_root / (kind == GenomeKind::Encoder ? "cae" : "classify");
}

std::string worker_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%02zu", index);
    return buf;
}

void write_run_start(PopulationStore& store, std::chrono::system_clock::time_point t) {
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(t.time_since_epoch()).count();
    if (store.create_marker(kRunStart)) store.append_log(kRunStart, std::to_string(us));
}

std::chrono::system_clock::time_point read_run_start(const PopulationStore& store) {
    for (int i = 0; i < 100; ++i) {
        const auto lines = store.read_log(kRunStart);
        if (!lines.empty())
            return std::chrono::system_clock::time_point(std::chrono::microseconds(parse_u64(lines.front(), 0)));
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return std::chrono::system_clock::now();
}

Worker::Worker(const RunConfig& cfg, GenomeKind kind, std::size_t index, const StepData& data)
    : cfg_(cfg),
      kind_(kind),
      name_(worker_name(index)),
      data_(data),
      store_(population_dir(cfg, kind)),
      rng_(derive_seed(cfg.master_seed, (kind == GenomeKind::Encoder ? 0x1000u : 0x2000u) + index)),
      start_(std::chrono::system_clock::now()) {}

double Worker::offset_seconds() const {
    return std::chrono::duration<double>(std::chrono::system_clock::now() - start_).count();
}

Individual Worker::train_and_package(const Genome& g, Network net, std::uint64_t train_seed) {
    const TrainData td{data_.splits.train, data_.splits.val};
    TrainResult res = train_individual(g, std::move(net), td, train_options(cfg_, data_.classes, train_seed));
    Individual ind;
    ind.genome = g;
    ind.weights = encode_weights(res.net.layers());
    IndividualRecord& r = ind.record;
    r.id = g.id;
    r.kind = g.kind;
    r.fitness = g.kind == GenomeKind::Encoder
                    ? FitnessRecord::of_pair(compression_ratio(g, data_.input_shape), res.report.metric)
                    : FitnessRecord::of_scalar(res.report.metric);
    r.wall_seconds = res.report.wall_seconds;
    r.worker_id = name_;
    r.generation = g.generation;
    r.parent_id = g.parent_id;
    r.mutation = g.mutation;
    return ind;
}

void Worker::publish_seed() {
    const std::string id = store_.claim_id(name_, counter_, rng_);
    const Genome g = seed_genome(kind_, id, cfg_.learning_rate);
    Network net = build_network(g, data_.input_shape, data_.classes);
    Rng init(rng_());
    net.init_params(init);
    const Individual ind = train_and_package(g, std::move(net), rng_());
    store_.publish(ind);
    store_.append_log("publish-" + name_ + ".csv", id + ",-," + fmt(offset_seconds()));
}

void Worker::seed() {
    const std::string marker = "seeded-" + name_;
    if (store_.has_marker(marker)) {
        // A worker killed between removing a loser and publishing the child shrinks the
        // population; below two individuals no round can ever run again.
        while (store_.live_count() < 2) publish_seed();
        return;
    }
    for (std::size_t k = 0; k < cfg_.seeds_per_worker; ++k) publish_seed();
    store_.create_marker(marker);
}

Worker::RoundResult Worker::round(std::uint64_t round) {
    RoundResult res;
    const auto snap = store_.snapshot();
    if (snap.records.size() < 2) {
        res.status = Status::TooFew;
        return res;
    }
    const auto [ia, ib] = sample_two(snap.records.size(), rng_);
    const bool coin = (rng_() & 1u) != 0;

    std::vector<ObjectivePair> points;
    if (kind_ == GenomeKind::Encoder)
        for (const auto& r : snap.records) points.push_back(r.fitness.pair.value_or(ObjectivePair{}));
    const Contender a{snap.records[ia].id, snap.records[ia].fitness, ia};
    const Contender b{snap.records[ib].id, snap.records[ib].fitness, ib};
    const CompareOutcome cmp = tournament_compare(a, b, points, coin, cfg_.isolation);
    res.winner = cmp.first_wins ? a.id : b.id;
    res.loser = cmp.first_wins ? b.id : a.id;
    res.reason = cmp.reason;

    const auto parent = store_.load_live(res.winner);
    if (!parent) {
        res.status = Status::Abandoned;
        return res;
    }
    if (!store_.kill(res.loser)) {
        res.status = Status::Abandoned;
        return res;
    }

    const std::string child_id = store_.claim_id(name_, counter_, rng_);
    const std::span<const MutationKind> kinds =
        cfg_.mutation_kinds.empty() ? mutations_for(kind_) : std::span<const MutationKind>(cfg_.mutation_kinds);
    MutateOutcome mo = mutate_valid(parent->genome, data_.input_shape, kinds, rng_, cfg_.mutation, child_id);
    const Genome child = mo.child ? std::move(*mo.child) : identity_child(parent->genome, child_id);
    const Network parent_net = restore(*parent, data_.input_shape, data_.classes);
    Network child_net = inherit_weights(parent_net, parent->genome, child, data_.input_shape, data_.classes, rng_);
    const Individual ind = train_and_package(child, std::move(child_net), rng_());
    store_.publish(ind);
    res.child = child_id;

    store_.append_log("publish-" + name_ + ".csv", child_id + "," + std::to_string(round) + "," + fmt(offset_seconds()));
    store_.append_log("rounds-" + name_ + ".csv", std::to_string(round) + "," + name_ + "," + a.id + "," + b.id + "," +
                                                      res.winner + "," + std::string(reason_name(res.reason)) + "," +
                                                      child_id);
    return res;
}

void Worker::run(std::chrono::system_clock::time_point start) {
    start_ = start;
    const bool timed = cfg_.wall_seconds > 0.0;
    auto expired = [&] { return timed && offset_seconds() >= cfg_.wall_seconds; };
    seed();
    const std::uint64_t budget = cfg_.rounds > 0 ? cfg_.rounds : std::numeric_limits<std::uint64_t>::max();
    while (!expired()) {
        const auto ticket = store_.take_ticket(budget);
        if (!ticket) break;
        std::size_t waits = 0;
        for (;;) {
            const RoundResult r = round(*ticket);
            if (r.status == Status::Completed) break;
            if (r.status == Status::TooFew) {
                // Another worker is between a kill and a publish.
                if (expired() || ++waits > 12000) return;
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
            }
        }
    }
}

fs::path write_step_config(const RunConfig& cfg, GenomeKind kind) {
    RunConfig c = cfg;
    c.population_root = fs::absolute(c.population_root);
    c.report_dir = fs::absolute(c.report_dir);
    if (!c.cifar10_dir.empty()) c.cifar10_dir = fs::absolute(c.cifar10_dir);
    if (!c.encoded_dir.empty()) c.encoded_dir = fs::absolute(c.encoded_dir);
    PopulationStore store(population_dir(c, kind));
    const fs::path file = store.root() / "config.txt";
    const fs::path tmp = store.root() / "config.txt.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << to_text(c);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, file);
    return file;
}

int spawn_worker(const fs::path& exe, const fs::path& config_file, GenomeKind kind, std::size_t index) {
    std::vector<std::string> args{exe.string(), "worker", "--config", config_file.string(), "--kind",
                                  kind == GenomeKind::Encoder ? "cae" : "classify", "--index", std::to_string(index)};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    const int rc = ::posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ);
    if (rc != 0) throw std::system_error(rc, std::generic_category(), "spawn " + exe.string());
    return pid;
}

StepSummary run_step(const RunConfig& cfg, GenomeKind kind, const fs::path& exe) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path config_file = write_step_config(cfg, kind);
    PopulationStore store(population_dir(cfg, kind));
    write_run_start(store, std::chrono::system_clock::now());

    std::vector<pid_t> pids;
    for (std::size_t i = 0; i < cfg.workers; ++i) pids.push_back(spawn_worker(exe, config_file, kind, i));
    std::size_t failed = 0;
    for (const pid_t pid : pids) {
        int status = 0;
        while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
        }
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failed;
    }
    StepSummary s = summarize(cfg, kind);
    s.failed_workers = failed;
    s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

StepSummary summarize(const RunConfig& cfg, GenomeKind kind) {
    PopulationStore store(population_dir(cfg, kind));
    StepSummary s;
    auto records = all_records(store);
    const auto publish = read_publish_logs(store);
    auto order = [&](const IndividualRecord& r) {
        const auto it = publish.find(r.id);
        return std::pair<std::uint64_t, std::string>{
            it == publish.end() || it->second.round == kNoRound ? 0 : it->second.round + 1, r.id};
    };
    std::sort(records.begin(), records.end(), [&](const auto& x, const auto& y) { return order(x) < order(y); });

    s.published = records.size();
    s.live = store.list_live().size();
    s.dead = store.list_dead().size();
    s.rounds = count_round_lines(store);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
        const double v = r.fitness.scalar
                             ? *r.fitness.scalar
                             : topsis_score(Alternative{r.id, r.generation, r.fitness.pair->compression,
                                                        r.fitness.pair->accuracy},
                                            cfg.topsis_weights);
        if (v > best) {
            best = v;
            s.best_id = r.id;
        }
        s.best_so_far.push_back(best);
    }
    s.best_metric = records.empty() ? 0.0 : best;
    return s;
}

int worker_main(const RunConfig& cfg, GenomeKind kind, std::size_t index) {
    kernels::set_thread_count(cfg.omp_threads);
    const StepData data = load_step_data(cfg, kind);
    Worker w(cfg, kind, index, data);
    w.run(read_run_start(w.store()));
    return 0;
}

std::vector<Alternative> cae_front(const RunConfig& cfg) {
    PopulationStore store(population_dir(cfg, GenomeKind::Encoder));
    const auto snap = store.snapshot();
    std::vector<ObjectivePair> points;
    for (const auto& r : snap.records) points.push_back(r.fitness.pair.value_or(ObjectivePair{}));
    std::vector<Alternative> out;
    if (points.empty()) return out;
    const auto fronts = pareto_fronts(points);
    for (const std::size_t i : fronts.front()) {
        const auto& r = snap.records[i];
        out.push_back(Alternative{r.id, r.generation, points[i].compression, points[i].accuracy});
    }
    return out;
}

SelectedEncoder finalize_cae_step(const RunConfig& cfg, const std::optional<std::string>& forced_id) {
    PopulationStore store(population_dir(cfg, GenomeKind::Encoder));
    SelectedEncoder sel;
    const auto front = cae_front(cfg);
    if (forced_id) {
        sel.id = *forced_id;
    } else {
        if (front.empty()) throw PreconditionError("autoencoder population is empty");
        const auto ranked = topsis_rank(front, cfg.topsis_weights);
        sel.id = ranked.front().alt.id;
        sel.score = ranked.front().score;
        fs::create_directories(cfg.report_dir);
        std::ofstream out(cfg.report_dir / "cae_selection.csv", std::ios::trunc);
        out << "rank,id,generation,compression,accuracy,score\n";
        for (std::size_t i = 0; i < ranked.size(); ++i)
            out << i + 1 << "," << ranked[i].alt.id << "," << ranked[i].alt.generation << ","
                << fmt(ranked[i].alt.compression) << "," << fmt(ranked[i].alt.accuracy) << ","
                << fmt(ranked[i].score) << "\n";
    }
    const auto ind = store.load_any(sel.id);
    if (!ind) throw PreconditionError("no autoencoder named " + sel.id);

    const Splits raw = split_dataset(load_raw_dataset(cfg), cfg.data_seed);
    const Network ae = restore(*ind, raw.train.shape, cfg.classes);
    if (forced_id)
        sel.score = topsis_score(Alternative{sel.id, ind->record.generation, ind->record.fitness.pair->compression,
                                             ind->record.fitness.pair->accuracy},
                                 cfg.topsis_weights);
    sel.encoding_shape = ae.encoding_shape();
    sel.encoded_dir = cfg.report_dir / ("encoded-" + sel.id);
    fs::create_directories(sel.encoded_dir);
    write_encoded(sel.encoded_dir / "train.evod", encode_dataset(ae, raw.train));
    write_encoded(sel.encoded_dir / "val.evod", encode_dataset(ae, raw.val));
    write_encoded(sel.encoded_dir / "test.evod", encode_dataset(ae, raw.test));
    std::ofstream(sel.encoded_dir / "encoder.txt", std::ios::trunc) << sel.id << "\n";
    return sel;
}

ComposedResult compose_final(const RunConfig& cfg, const std::string& encoder_id,
                             const std::optional<std::string>& classifier_id) {
    PopulationStore caes(population_dir(cfg, GenomeKind::Encoder));
    PopulationStore clfs(population_dir(cfg, GenomeKind::Classifier));
    ComposedResult out;
    out.encoder_id = encoder_id;
    if (classifier_id) {
        out.classifier_id = *classifier_id;
    } else {
        const auto snap = clfs.snapshot();
        if (snap.records.empty()) throw PreconditionError("classifier population is empty");
        const IndividualRecord* best = &snap.records.front();
        for (const auto& r : snap.records) {
            if (*r.fitness.scalar > *best->fitness.scalar ||
                (*r.fitness.scalar == *best->fitness.scalar && r.generation < best->generation))
                best = &r;
        }
        out.classifier_id = best->id;
    }
    const auto enc = caes.load_any(encoder_id);
    if (!enc) throw PreconditionError("no autoencoder named " + encoder_id);
    const auto clf = clfs.load_any(out.classifier_id);
    if (!clf) throw PreconditionError("no classifier named " + out.classifier_id);

    const Splits raw = split_dataset(load_raw_dataset(cfg), cfg.data_seed);
    const Network ae = restore(*enc, raw.train.shape, cfg.classes);
    const Network head = restore(*clf, ae.encoding_shape(), cfg.classes);

    std::vector<LayerState> layers(ae.layers().begin(), ae.layers().begin() + static_cast<std::ptrdiff_t>(ae.encoder_layers()));
    layers.insert(layers.end(), head.layers().begin(), head.layers().end());
    out.net = Network(raw.train.shape, std::move(layers), ae.encoder_layers());
    out.test_accuracy = evaluate_accuracy(out.net, raw.test);
    out.two_stage_test_accuracy = evaluate_accuracy(head, encode_dataset(ae, raw.test));

    fs::create_directories(cfg.report_dir);
    out.weights_file = cfg.report_dir / ("composed-" + encoder_id + "-" + out.classifier_id + ".evow");
    const auto blob = encode_weights(out.net.layers());
    std::ofstream(out.weights_file, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    return out;
}

std::string export_history(const RunConfig& cfg, GenomeKind kind, const HistoryOptions& opt) {
    PopulationStore store(population_dir(cfg, kind));
    auto records = all_records(store);
    const auto publish = read_publish_logs(store);
    auto entry = [&](const std::string& id) {
        const auto it = publish.find(id);
        return it == publish.end() ? PublishEntry{} : it->second;
    };
    std::sort(records.begin(), records.end(), [&](const auto& x, const auto& y) {
        const auto ex = entry(x.id), ey = entry(y.id);
        const std::uint64_t rx = ex.round == kNoRound ? 0 : ex.round + 1;
        const std::uint64_t ry = ey.round == kNoRound ? 0 : ey.round + 1;
        return std::tie(x.generation, rx, x.id) < std::tie(y.generation, ry, y.id);
    });
    std::ostringstream os;
    os << "id,worker,round,time_offset_s,metric,compression,accuracy,generation,mutation,parent_id\n";
    for (const auto& r : records) {
        const auto e = entry(r.id);
        os << r.id << "," << r.worker_id << "," << (e.round == kNoRound ? "" : std::to_string(e.round)) << ","
           << (opt.include_wall_time ? e.offset : "") << ",";
        if (r.fitness.scalar)
            os << fmt(*r.fitness.scalar) << ",,";
        else
            os << "," << fmt(r.fitness.pair->compression) << "," << fmt(r.fitness.pair->accuracy);
        os << "," << r.generation << "," << r.mutation << "," << r.parent_id.value_or("") << "\n";
    }
    return os.str();
}

}  // namespace evocnn
