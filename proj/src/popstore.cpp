#include "evocnn/popstore.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "evocnn/error.hpp"

namespace evocnn {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(std::string_view s, const char* what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "' in fitness sidecar", 0);
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

void write_file(const fs::path& p, std::string_view data) {
    const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw std::system_error(errno, std::generic_category(), "open " + p.string());
    std::size_t done = 0;
    while (done < data.size()) {
        const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            throw std::system_error(err, std::generic_category(), "write " + p.string());
        }
        done += static_cast<std::size_t>(n);
    }
    ::close(fd);
}

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) return std::nullopt;
    return os.str();
}

std::vector<std::string> list_dir(const fs::path& dir) {
    std::vector<std::string> out;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        const std::string name = it->path().filename().string();
        if (!name.empty() && name[0] != '.') out.push_back(name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool exclusive_create(const fs::path& p) {
    const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) {
        if (errno == EEXIST) return false;
        throw std::system_error(errno, std::generic_category(), "create " + p.string());
    }
    ::close(fd);
    return true;
}

}  // namespace

std::string format_sidecar(const IndividualRecord& r) {
    std::string metric;
    if (r.fitness.pair)
        metric = fmt_double(r.fitness.pair->compression) + ";" + fmt_double(r.fitness.pair->accuracy);
    else if (r.fitness.scalar)
        metric = fmt_double(*r.fitness.scalar);
    else
        throw PreconditionError("sidecar needs a fitness value");
    std::ostringstream os;
    os << r.id << "," << genome_kind_name(r.kind) << "," << metric << "," << fmt_double(r.wall_seconds) << ","
       << r.worker_id << "," << r.generation << "," << r.parent_id.value_or("-") << "," << r.mutation << "\n";
    return os.str();
}

IndividualRecord parse_sidecar(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    const auto f = split(line, ',');
    if (f.size() != 8) throw ParseError("fitness sidecar needs 8 fields, got " + std::to_string(f.size()), 0);
    IndividualRecord r;
    r.id = std::string(f[0]);
    r.kind = parse_genome_kind(f[1]);
    if (r.kind == GenomeKind::Encoder) {
        const auto pair = split(f[2], ';');
        if (pair.size() != 2) throw ParseError("autoencoder fitness must be compression;accuracy", 0);
        r.fitness = FitnessRecord::of_pair(parse_double(pair[0], "compression"), parse_double(pair[1], "accuracy"));
    } else {
        r.fitness = FitnessRecord::of_scalar(parse_double(f[2], "metric"));
    }
    r.wall_seconds = parse_double(f[3], "wall_seconds");
    r.worker_id = std::string(f[4]);
    {
        std::uint64_t g = 0;
        auto [p, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), g);
        if (ec != std::errc() || p != f[5].data() + f[5].size()) throw ParseError("bad generation in sidecar", 0);
        r.generation = g;
    }
    if (f[6] != "-") r.parent_id = std::string(f[6]);
    r.mutation = std::string(f[7]);
    return r;
}

PopulationStore::PopulationStore(fs::path root) : root_(std::move(root)) {
    for (const auto& d : {live_dir(), claimed_dir(), dead_dir(), logs_dir(), tickets_dir()}) fs::create_directories(d);
}

std::string PopulationStore::claim_id(const std::string& worker_id, std::uint64_t& counter, Rng& rng) {
    std::uniform_int_distribution<std::uint32_t> suffix(0, 0xFFFFFF);
    for (;;) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s-%06llu-%06x", worker_id.c_str(),
                      static_cast<unsigned long long>(counter++), suffix(rng));
        const std::string id = buf;
        std::error_code ec;
        if (fs::exists(live_dir() / id) || fs::exists(dead_dir() / id)) continue;
        if (::mkdir((claimed_dir() / id).c_str(), 0755) != 0) {
            if (errno == EEXIST) continue;
            throw std::system_error(errno, std::generic_category(), "claim " + id);
        }
        append_log("claims-" + worker_id + ".log", id);
        return id;
    }
}

void PopulationStore::publish(const Individual& ind, const PublishHooks& hooks) {
    const std::string& id = ind.genome.id;
    if (id.empty() || ind.record.id != id) throw PreconditionError("individual id mismatch");
    const fs::path staging = claimed_dir() / id;
    fs::create_directories(staging);
    write_file(staging / kGenomeFile, serialize_genome(ind.genome));
    write_file(staging / kWeightsFile,
               std::string_view(reinterpret_cast<const char*>(ind.weights.data()), ind.weights.size()));
    write_file(staging / kFitnessFile, format_sidecar(ind.record));
    if (hooks.before_rename) hooks.before_rename();
    if (::rename(staging.c_str(), (live_dir() / id).c_str()) != 0)
        throw std::system_error(errno, std::generic_category(), "publish " + id);
}

std::vector<std::string> PopulationStore::list_live() const { return list_dir(live_dir()); }
std::vector<std::string> PopulationStore::list_dead() const { return list_dir(dead_dir()); }

std::pair<std::size_t, std::size_t> sample_two(std::size_t n, Rng& rng) {
    if (n < 2) throw PreconditionError("need two individuals to sample a pair");
    const std::size_t a = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::size_t b = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
    if (b >= a) ++b;
    return {a, b};
}

std::optional<std::pair<std::string, std::string>> PopulationStore::sample_pair(Rng& rng) const {
    for (int attempt = 0; attempt < 64; ++attempt) {
        const auto ids = list_live();
        if (ids.size() < 2) return std::nullopt;
        const auto [a, b] = sample_two(ids.size(), rng);
        if (!read_live_record(ids[a]) || !read_live_record(ids[b])) continue;
        return std::pair{ids[a], ids[b]};
    }
    return std::nullopt;
}

bool PopulationStore::kill(const std::string& id) {
    const fs::path from = live_dir() / id;
    const fs::path to = dead_dir() / id;
    if (::rename(from.c_str(), to.c_str()) != 0) {
        if (errno == ENOENT) return false;
        throw std::system_error(errno, std::generic_category(), "kill " + id);
    }
    std::error_code ec;
    fs::remove(to / kWeightsFile, ec);
    return true;
}

std::optional<IndividualRecord> PopulationStore::read_live_record(const std::string& id) const {
    const auto text = read_file(live_dir() / id / kFitnessFile);
    if (!text) return std::nullopt;
    return parse_sidecar(*text);
}

std::optional<Individual> PopulationStore::load_from(const fs::path& dir, bool need_weights) const {
    const auto genome = read_file(dir / kGenomeFile);
    const auto fitness = read_file(dir / kFitnessFile);
    if (!genome || !fitness) return std::nullopt;
    Individual ind;
    ind.genome = deserialize_genome(*genome);
    ind.record = parse_sidecar(*fitness);
    const auto weights = read_file(dir / kWeightsFile);
    if (weights) {
        ind.weights.assign(weights->begin(), weights->end());
    } else if (need_weights) {
        return std::nullopt;
    }
    return ind;
}

std::optional<Individual> PopulationStore::load_live(const std::string& id) const {
    return load_from(live_dir() / id, true);
}

std::optional<Individual> PopulationStore::load_any(const std::string& id) const {
    if (auto ind = load_from(live_dir() / id, true)) return ind;
    return load_from(dead_dir() / id, false);
}

PopulationStore::Snapshot PopulationStore::snapshot() const {
    Snapshot s;
    for (const auto& id : list_live())
        if (auto r = read_live_record(id)) s.records.push_back(std::move(*r));
    return s;
}

std::optional<std::uint64_t> PopulationStore::take_ticket(std::uint64_t budget) {
    for (std::uint64_t k = ticket_hint_; k < budget; ++k) {
        if (exclusive_create(tickets_dir() / std::to_string(k))) {
            ticket_hint_ = k + 1;
            return k;
        }
    }
    ticket_hint_ = budget;
    return std::nullopt;
}

std::uint64_t PopulationStore::tickets_taken() const { return list_dir(tickets_dir()).size(); }

bool PopulationStore::create_marker(const std::string& name) { return exclusive_create(logs_dir() / name); }

bool PopulationStore::has_marker(const std::string& name) const { return fs::exists(logs_dir() / name); }

void PopulationStore::append_log(const std::string& name, const std::string& line) const {
    const fs::path p = logs_dir() / name;
    const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw std::system_error(errno, std::generic_category(), "open " + p.string());
    const std::string data = line + "\n";
    ssize_t n;
    do {
        n = ::write(fd, data.data(), data.size());
    } while (n < 0 && errno == EINTR);
    const int err = errno;
    ::close(fd);
    if (n != static_cast<ssize_t>(data.size())) throw std::system_error(err, std::generic_category(), "append " + p.string());
}

std::vector<std::string> PopulationStore::read_log(const std::string& name) const {
    std::vector<std::string> lines;
    std::ifstream in(logs_dir() / name);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

}  // namespace evocnn
