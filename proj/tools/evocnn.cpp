// Command-line driver for the evolutionary autoencoder + classifier pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "evocnn/config.hpp"
#include "evocnn/error.hpp"
#include "evocnn/kernels.hpp"
#include "evocnn/mcdm.hpp"
#include "evocnn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace evocnn;

namespace {

fs::path self_exe() {
    std::error_code ec;
    fs::path p = fs::read_symlink("/proc/self/exe", ec);
    if (ec) throw std::runtime_error("cannot resolve own executable");
    return p;
}

RunConfig load(const std::string& file) {
    RunConfig c = load_config(file);
    apply_env_overrides(c);
    kernels::set_thread_count(c.omp_threads);
    return c;
}

GenomeKind kind_of(const std::string& s) {
    if (s == "cae") return GenomeKind::Encoder;
    if (s == "classify") return GenomeKind::Classifier;
    throw PreconditionError("kind must be cae or classify");
}

void print_summary(const char* what, const StepSummary& s) {
    std::printf("%s: published=%zu rounds=%zu live=%zu dead=%zu best=%.6f (%s) wall=%.1fs failed_workers=%zu\n", what,
                s.published, s.rounds, s.live, s.dead, s.best_metric, s.best_id.c_str(), s.wall_seconds,
                s.failed_workers);
}

std::vector<Alternative> read_front_csv(const std::string& file) {
    // id,generation,compression,accuracy per line; a header line is skipped.
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read " + file);
    std::vector<Alternative> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.rfind("id,", 0) == 0) continue;
        std::istringstream is(line);
        Alternative a;
        std::string gen, c, acc;
        std::getline(is, a.id, ',');
        std::getline(is, gen, ',');
        std::getline(is, c, ',');
        std::getline(is, acc, ',');
        a.generation = std::stoull(gen);
        a.compression = std::stod(c);
        a.accuracy = std::stod(acc);
        out.push_back(a);
    }
    return out;
}

void print_ranked(const std::vector<RankedAlternative>& ranked) {
    std::printf("rank,id,generation,compression,accuracy,score\n");
    for (std::size_t i = 0; i < ranked.size(); ++i)
        std::printf("%zu,%s,%llu,%.6f,%.6f,%.6f\n", i + 1, ranked[i].alt.id.c_str(),
                    static_cast<unsigned long long>(ranked[i].alt.generation), ranked[i].alt.compression,
                    ranked[i].alt.accuracy, ranked[i].score);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evocnn: evolve convolutional autoencoders and classifiers"};
    app.require_subcommand(1);
    std::string config = "evocnn.conf";

    auto* seed = app.add_subcommand("seed", "train and publish the seed individuals of a population");
    std::string seed_kind = "cae";
    seed->add_option("--config", config)->required();
    seed->add_option("--kind", seed_kind, "cae or classify");

    auto* evolve_cae = app.add_subcommand("evolve-cae", "run the autoencoder tournament");
    evolve_cae->add_option("--config", config)->required();

    auto* select_cae = app.add_subcommand("select-cae", "rank the first Pareto front with TOPSIS");
    std::string weights, front_csv;
    select_cae->add_option("--config", config);
    select_cae->add_option("--weights", weights, "compression,accuracy weights");
    select_cae->add_option("--front", front_csv, "CSV of id,generation,compression,accuracy");

    auto* encode = app.add_subcommand("encode", "encode the dataset splits with the selected encoder");
    std::string encoder_id;
    encode->add_option("--config", config)->required();
    encode->add_option("--encoder", encoder_id, "encoder id (default: TOPSIS choice)");

    auto* evolve_clf = app.add_subcommand("evolve-clf", "run the classifier tournament on encoded data");
    std::string encoded_dir;
    evolve_clf->add_option("--config", config)->required();
    evolve_clf->add_option("--encoded-dir", encoded_dir);

    auto* compose = app.add_subcommand("compose", "join encoder and classifier and evaluate on the test split");
    std::string classifier_id;
    compose->add_option("--config", config)->required();
    compose->add_option("--encoder", encoder_id)->required();
    compose->add_option("--classifier", classifier_id, "default: best live classifier");

    auto* report = app.add_subcommand("report", "summary and history CSV of a population");
    std::string report_kind = "classify", out_file;
    bool no_time = false;
    report->add_option("--config", config)->required();
    report->add_option("--kind", report_kind, "cae or classify");
    report->add_option("--out", out_file, "history CSV path (default: report_dir/history-<kind>.csv)");
    report->add_flag("--no-time", no_time, "leave the time column empty");

    auto* run = app.add_subcommand("run", "full pipeline as set by `step` in the config");
    run->add_option("--config", config)->required();

    auto* worker = app.add_subcommand("worker");
    worker->group("");
    std::string worker_kind;
    std::size_t worker_index = 0;
    worker->add_option("--config", config)->required();
    worker->add_option("--kind", worker_kind)->required();
    worker->add_option("--index", worker_index)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*worker) {
            RunConfig c = load_config(config);  // already resolved by the orchestrator
            kernels::set_thread_count(c.omp_threads);
            return worker_main(c, kind_of(worker_kind), worker_index);
        }
        if (*select_cae) {
            TopsisWeights w;
            RunConfig c;
            if (!config.empty() && fs::exists(config)) {
                c = load(config);
                w = c.topsis_weights;
            }
            if (!weights.empty()) {
                const auto comma = weights.find(',');
                if (comma == std::string::npos) throw PreconditionError("--weights needs wc,wa");
                w = TopsisWeights(std::stod(weights.substr(0, comma)), std::stod(weights.substr(comma + 1)));
            }
            const auto alts = front_csv.empty() ? cae_front(c) : read_front_csv(front_csv);
            print_ranked(topsis_rank(alts, w));
            return 0;
        }
        RunConfig c = load(config);
        if (*seed) {
            c.validate();
            const GenomeKind k = kind_of(seed_kind);
            const StepData data = load_step_data(c, k);
            PopulationStore store(population_dir(c, k));
            write_run_start(store, std::chrono::system_clock::now());
            for (std::size_t i = 0; i < c.workers; ++i) Worker(c, k, i, data).seed();
            print_summary("seed", summarize(c, k));
        } else if (*evolve_cae) {
            print_summary("cae", run_step(c, GenomeKind::Encoder, self_exe()));
        } else if (*encode) {
            const auto sel = finalize_cae_step(c, encoder_id.empty() ? std::nullopt : std::optional(encoder_id));
            std::printf("encoder %s score=%.6f encoding=%s dir=%s\n", sel.id.c_str(), sel.score,
                        to_string(sel.encoding_shape).c_str(), sel.encoded_dir.c_str());
        } else if (*evolve_clf) {
            if (!encoded_dir.empty()) c.encoded_dir = encoded_dir;
            print_summary("classify", run_step(c, GenomeKind::Classifier, self_exe()));
        } else if (*compose) {
            const auto r =
                compose_final(c, encoder_id, classifier_id.empty() ? std::nullopt : std::optional(classifier_id));
            std::printf("composed %s + %s: test_accuracy=%.4f two_stage=%.4f weights=%s\n", r.encoder_id.c_str(),
                        r.classifier_id.c_str(), r.test_accuracy, r.two_stage_test_accuracy,
                        r.weights_file.c_str());
        } else if (*report) {
            const GenomeKind k = kind_of(report_kind);
            print_summary(report_kind.c_str(), summarize(c, k));
            const fs::path out = out_file.empty() ? c.report_dir / ("history-" + report_kind + ".csv") : fs::path(out_file);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            std::ofstream(out, std::ios::trunc) << export_history(c, k, HistoryOptions{!no_time});
            std::printf("history: %s\n", out.c_str());
        } else if (*run) {
            const fs::path exe = self_exe();
            std::string enc = "";
            if (c.step == Step::Cae || c.step == Step::Full) {
                print_summary("cae", run_step(c, GenomeKind::Encoder, exe));
                const auto sel = finalize_cae_step(c);
                std::printf("encoder %s score=%.6f encoding=%s\n", sel.id.c_str(), sel.score,
                            to_string(sel.encoding_shape).c_str());
                c.encoded_dir = sel.encoded_dir;
                enc = sel.id;
            }
            if (c.step == Step::Classify || c.step == Step::Full) {
                print_summary("classify", run_step(c, GenomeKind::Classifier, exe));
                if (enc.empty() && !c.encoded_dir.empty()) {
                    std::ifstream in(c.encoded_dir / "encoder.txt");
                    std::getline(in, enc);
                }
                if (!enc.empty()) {
                    const auto r = compose_final(c, enc);
                    std::printf("composed %s + %s: test_accuracy=%.4f\n", r.encoder_id.c_str(),
                                r.classifier_id.c_str(), r.test_accuracy);
                }
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "evocnn: %s\n", e.what());
        return 1;
    }
    return 0;
}
