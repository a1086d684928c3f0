#include "evocnn/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "evocnn/error.hpp"

namespace evocnn {

std::string_view step_name(Step s) {
    switch (s) {
        case Step::Cae: return "cae";
        case Step::Classify: return "classify";
        case Step::Full: return "full";
    }
    return "?";
}

Step parse_step(std::string_view s) {
    if (s == "cae") return Step::Cae;
    if (s == "classify") return Step::Classify;
    if (s == "full") return Step::Full;
    throw PreconditionError("unknown step '" + std::string(s) + "' (expected cae, classify or full)");
}

void RunConfig::validate() const {
    if (workers < 1 || seeds_per_worker < 1 || epochs < 1 || batch_size < 1 || classes < 2)
        throw PreconditionError("workers, seeds_per_worker, epochs, batch_size must be positive and classes >= 2");
    if (workers * seeds_per_worker < 2) throw PreconditionError("population needs at least two seeds");
    if (rounds == 0 && !(wall_seconds > 0.0)) throw PreconditionError("set rounds or wall_seconds");
    if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be positive");
    if (mutation.max_tries < 1) throw PreconditionError("max_mutation_tries must be >= 1");
    if (dataset != "synth" && dataset != "cifar10") throw PreconditionError("dataset must be synth or cifar10");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
T number(std::string_view key, std::string_view v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw PreconditionError("config key '" + std::string(key) + "': bad number '" + std::string(v) + "'");
    return out;
}

std::vector<std::string_view> split_commas(std::string_view v) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= v.size(); ++i) {
        if (i == v.size() || v[i] == ',') {
            out.push_back(trim(v.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void set_key(RunConfig& c, std::string_view key, std::string_view v) {
    if (key == "population_root") c.population_root = std::string(v);
    else if (key == "report_dir") c.report_dir = std::string(v);
    else if (key == "dataset") c.dataset = std::string(v);
    else if (key == "cifar10_dir") c.cifar10_dir = std::string(v);
    else if (key == "encoded_dir") c.encoded_dir = std::string(v);
    else if (key == "step") c.step = parse_step(v);
    else if (key == "workers") c.workers = number<std::size_t>(key, v);
    else if (key == "seeds_per_worker") c.seeds_per_worker = number<std::size_t>(key, v);
    else if (key == "epochs") c.epochs = number<std::size_t>(key, v);
    else if (key == "batch_size") c.batch_size = number<std::size_t>(key, v);
    else if (key == "learning_rate") c.learning_rate = number<double>(key, v);
    else if (key == "momentum") c.momentum = number<double>(key, v);
    else if (key == "classes") c.classes = number<std::size_t>(key, v);
    else if (key == "topsis_weights") {
        const auto parts = split_commas(v);
        if (parts.size() != 2) throw PreconditionError("topsis_weights needs two comma-separated values");
        c.topsis_weights = TopsisWeights(number<double>(key, parts[0]), number<double>(key, parts[1]));
    } else if (key == "isolation") {
        if (v == "mean") c.isolation = IsolationMode::MeanDistance;
        else if (v == "nearest") c.isolation = IsolationMode::NearestNeighbor;
        else throw PreconditionError("isolation must be mean or nearest");
    } else if (key == "insert_conv_filters") {
        c.mutation.insert_conv_filters.clear();
        for (auto p : split_commas(v)) c.mutation.insert_conv_filters.push_back(number<std::size_t>(key, p));
    } else if (key == "mutations") {
        c.mutation_kinds.clear();
        for (auto p : split_commas(v)) {
            const auto k = parse_mutation(p);
            if (!k) throw PreconditionError("unknown mutation '" + std::string(p) + "'");
            c.mutation_kinds.push_back(*k);
        }
    } else if (key == "max_filters") c.mutation.max_filters = number<std::size_t>(key, v);
    else if (key == "max_mutation_tries") c.mutation.max_tries = number<std::size_t>(key, v);
    else if (key == "master_seed") c.master_seed = number<std::uint64_t>(key, v);
    else if (key == "data_seed") c.data_seed = number<std::uint64_t>(key, v);
    else if (key == "rounds") c.rounds = number<std::uint64_t>(key, v);
    else if (key == "wall_seconds") c.wall_seconds = number<double>(key, v);
    else if (key == "synth_count") c.synth.count = number<std::size_t>(key, v);
    else if (key == "synth_channels") c.synth.channels = number<std::size_t>(key, v);
    else if (key == "synth_height") c.synth.height = number<std::size_t>(key, v);
    else if (key == "synth_width") c.synth.width = number<std::size_t>(key, v);
    else if (key == "synth_noise") c.synth.noise = number<double>(key, v);
    else if (key == "synth_seed") c.synth.seed = number<std::uint64_t>(key, v);
    else if (key == "omp_threads") c.omp_threads = number<int>(key, v);
    else throw PreconditionError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

RunConfig parse_config(std::string_view text) {
    RunConfig c;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw PreconditionError("config line " + std::to_string(line_no) + ": expected key = value");
        set_key(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        if (end == text.size()) break;
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read config " + file.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

std::string to_text(const RunConfig& c) {
    std::ostringstream os;
    os << "population_root = " << c.population_root.string() << "\n"
       << "report_dir = " << c.report_dir.string() << "\n"
       << "dataset = " << c.dataset << "\n";
    if (!c.cifar10_dir.empty()) os << "cifar10_dir = " << c.cifar10_dir.string() << "\n";
    if (!c.encoded_dir.empty()) os << "encoded_dir = " << c.encoded_dir.string() << "\n";
    os << "step = " << step_name(c.step) << "\n"
       << "workers = " << c.workers << "\n"
       << "seeds_per_worker = " << c.seeds_per_worker << "\n"
       << "epochs = " << c.epochs << "\n"
       << "batch_size = " << c.batch_size << "\n"
       << "learning_rate = " << fmt(c.learning_rate) << "\n"
       << "momentum = " << fmt(c.momentum) << "\n"
       << "classes = " << c.classes << "\n"
       << "topsis_weights = " << fmt(c.topsis_weights.compression()) << "," << fmt(c.topsis_weights.accuracy())
       << "\n"
       << "isolation = " << (c.isolation == IsolationMode::MeanDistance ? "mean" : "nearest") << "\n"
       << "insert_conv_filters = ";
    for (std::size_t i = 0; i < c.mutation.insert_conv_filters.size(); ++i)
        os << (i ? "," : "") << c.mutation.insert_conv_filters[i];
    os << "\n";
    if (!c.mutation_kinds.empty()) {
        os << "mutations = ";
        for (std::size_t i = 0; i < c.mutation_kinds.size(); ++i)
            os << (i ? "," : "") << mutation_name(c.mutation_kinds[i]);
        os << "\n";
    }
    os << "max_filters = " << c.mutation.max_filters << "\n"
       << "max_mutation_tries = " << c.mutation.max_tries << "\n"
       << "master_seed = " << c.master_seed << "\n"
       << "data_seed = " << c.data_seed << "\n"
       << "rounds = " << c.rounds << "\n"
       << "wall_seconds = " << fmt(c.wall_seconds) << "\n"
       << "synth_count = " << c.synth.count << "\n"
       << "synth_channels = " << c.synth.channels << "\n"
       << "synth_height = " << c.synth.height << "\n"
       << "synth_width = " << c.synth.width << "\n"
       << "synth_noise = " << fmt(c.synth.noise) << "\n"
       << "synth_seed = " << c.synth.seed << "\n"
       << "omp_threads = " << c.omp_threads << "\n";
    return os.str();
}

void apply_env_overrides(RunConfig& c) {
    if (const char* v = std::getenv("EVOCNN_POPULATION_ROOT"); v && *v) c.population_root = v;
    if (const char* v = std::getenv("EVOCNN_REPORT_DIR"); v && *v) c.report_dir = v;
    if (const char* v = std::getenv("EVOCNN_CIFAR10_DIR"); v && *v) c.cifar10_dir = v;
    if (const char* v = std::getenv("EVOCNN_ENCODED_DIR"); v && *v) c.encoded_dir = v;
}

}  // namespace evocnn
