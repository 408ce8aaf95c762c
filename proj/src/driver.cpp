#include "ktune/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include "ktune/util.hpp"

namespace ktune {

std::string to_string(SampleStatus s) {
    switch (s) {
        case SampleStatus::Ok: return "ok";
        case SampleStatus::Failed: return "failed";
        case SampleStatus::Timeout: return "timeout";
        case SampleStatus::Clipped: return "clipped";
    }
    return "?";
}

SampleStatus status_from_string(const std::string& s) {
    if (s == "ok") return SampleStatus::Ok;
    if (s == "failed") return SampleStatus::Failed;
    if (s == "timeout") return SampleStatus::Timeout;
    if (s == "clipped") return SampleStatus::Clipped;
    throw ConfigError("unknown sample status '" + s + "'");
}

SubprocessKernel::SubprocessKernel(KernelCommand cmd) : cmd_(std::move(cmd)) {
    if (cmd_.executable.empty()) throw ConfigError("kernel command: empty executable path");
    if (!(cmd_.timeout_sec > 0)) throw ConfigError("kernel command: timeout must be > 0");
    if (cmd_.repeats < 1) throw ConfigError("kernel command: repeats must be >= 1");
}

namespace {

std::vector<std::string> param_args(const ParameterSpace& space, const Configuration& config,
                                    ArgStyle style) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < space.size(); ++i) {
        const std::string value = value_to_string(config.values[i]);
        switch (style) {
            case ArgStyle::NamedFlags:
                out.push_back("--" + space.param(i).name + "=" + value);
                break;
            case ArgStyle::Positional:
                out.push_back(value);
                break;
            case ArgStyle::EnvVars:
                out.push_back(space.param(i).name + "=" + value);
                break;
        }
    }
    return out;
}

// Last non-empty line of the captured stdout, parsed as a decimal real.
std::optional<double> parse_objective(const std::string& output) {
    std::size_t end = output.size();
    while (end > 0) {
        std::size_t begin = output.rfind('\n', end - 1);
        std::size_t start = (begin == std::string::npos) ? 0 : begin + 1;
        std::string line = output.substr(start, end - start);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) {
            char* parse_end = nullptr;
            double v = std::strtod(line.c_str(), &parse_end);
            if (parse_end != line.c_str() && *parse_end == '\0' && std::isfinite(v)) return v;
            return std::nullopt;
        }
        if (begin == std::string::npos) break;
        end = begin;
    }
    return std::nullopt;
}

} // namespace

Kernel::RunResult SubprocessKernel::run_once(const ParameterSpace& space,
                                             const Configuration& config) const {
    if (access(cmd_.executable.c_str(), X_OK) != 0)
        throw std::runtime_error("kernel executable not found or not executable: " +
                                 cmd_.executable);

    std::vector<std::string> args = param_args(space, config, cmd_.arg_style);

    std::vector<std::string> argv_store;
    argv_store.push_back(cmd_.executable);
    for (const auto& a : cmd_.base_args) argv_store.push_back(a);
    if (cmd_.arg_style != ArgStyle::EnvVars)
        for (const auto& a : args) argv_store.push_back(a);
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    argv.push_back(nullptr);

    // Environment assembled before fork; the child only runs
    // async-signal-safe calls (we may be forking from a worker thread).
    std::vector<std::string> envp_store;
    std::vector<char*> envp;
    if (cmd_.arg_style == ArgStyle::EnvVars) {
        for (char** e = environ; *e; ++e) envp_store.emplace_back(*e);
        for (const auto& kv : args) envp_store.push_back(kv);
        for (auto& s : envp_store) envp.push_back(s.data());
        envp.push_back(nullptr);
    }

    int pipefd[2];
    if (pipe(pipefd) != 0) throw std::runtime_error("driver: pipe() failed");

    pid_t pid = fork();
    if (pid < 0) {
        close(pipefd[0]);
        close(pipefd[1]);
        throw std::runtime_error("driver: fork() failed");
    }
    if (pid == 0) {
        close(pipefd[0]);
        dup2(pipefd[1], STDOUT_FILENO);
        close(pipefd[1]);
        if (cmd_.arg_style == ArgStyle::EnvVars)
            execve(cmd_.executable.c_str(), argv.data(), envp.data());
        else
            execv(cmd_.executable.c_str(), argv.data());
        _exit(127);
    }

    close(pipefd[1]);
    std::string output;
    bool timed_out = false;
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(cmd_.timeout_sec);
    char buf[4096];
    for (;;) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                             deadline - std::chrono::steady_clock::now())
                             .count();
        if (remaining <= 0) {
            timed_out = true;
            break;
        }
        struct pollfd pfd{pipefd[0], POLLIN, 0};
        int pr = poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1000)));
        if (pr < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (pr == 0) continue;
        ssize_t got = read(pipefd[0], buf, sizeof(buf));
        if (got < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (got == 0) break; // child closed stdout
        output.append(buf, static_cast<std::size_t>(got));
    }
    close(pipefd[0]);

    if (timed_out) {
        kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
        return {0.0, SampleStatus::Timeout};
    }

    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {0.0, SampleStatus::Failed};

    auto value = parse_objective(output);
    if (!value) return {0.0, SampleStatus::Failed};
    return {*value, SampleStatus::Ok};
}

SampleRecord evaluate(const Kernel& kernel, const ParameterSpace& space,
                      const Configuration& config, const EvalOptions& opts) {
    if (auto err = space.check(config)) throw ConfigError("evaluate: " + *err);
    if (opts.repeats < 1) throw ConfigError("evaluate: repeats must be >= 1");

    SampleRecord record;
    record.config = config;

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> values;
    SampleStatus failure = SampleStatus::Ok;
    bool self_timed = true;
    double reported_time = 0.0;
    for (int r = 0; r < opts.repeats; ++r) {
        auto res = kernel.run_once(space, config);
        if (res.wall_time >= 0.0)
            reported_time += res.wall_time;
        else
            self_timed = false;
        if (res.status != SampleStatus::Ok) {
            failure = res.status;
            break;
        }
        values.push_back(res.value);
    }
    record.wall_time =
        self_timed ? reported_time
                   : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (failure != SampleStatus::Ok) {
        record.status = failure;
        record.objective = opts.clip ? *opts.clip : opts.penalty;
        return record;
    }

    double agg = 0.0;
    switch (opts.aggregate) {
        case Aggregate::Min:
            agg = *std::min_element(values.begin(), values.end());
            break;
        case Aggregate::Mean: {
            for (double v : values) agg += v;
            agg /= static_cast<double>(values.size());
            break;
        }
        case Aggregate::Median: {
            std::sort(values.begin(), values.end());
            std::size_t n = values.size();
            agg = (n % 2) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
            break;
        }
    }

    if (opts.clip && agg > *opts.clip) {
        record.status = SampleStatus::Clipped;
        record.objective = *opts.clip;
    } else {
        record.status = SampleStatus::Ok;
        record.objective = agg;
    }
    return record;
}

SampleRecord evaluate(const KernelCommand& cmd, const ParameterSpace& space,
                      const Configuration& config, std::optional<double> clip) {
    SubprocessKernel kernel(cmd);
    EvalOptions opts;
    opts.repeats = cmd.repeats;
    opts.aggregate = cmd.aggregate;
    opts.clip = clip;
    return evaluate(kernel, space, config, opts);
}

std::vector<SampleRecord> evaluate_batch(const Kernel& kernel, const ParameterSpace& space,
                                         const std::vector<Configuration>& configs,
                                         unsigned parallelism, const EvalOptions& opts) {
    if (parallelism < 1) throw ConfigError("evaluate_batch: parallelism must be >= 1");
    std::vector<SampleRecord> out(configs.size());
    parallel_for(configs.size(), parallelism,
                 [&](std::size_t i) { out[i] = evaluate(kernel, space, configs[i], opts); });
    return out;
}

// -----------------------------------------------------------------------------
// SampleStore
// -----------------------------------------------------------------------------

SampleStore::SampleStore(const ParameterSpace& space)
    : space_(space), fingerprint_(space.fingerprint()) {}

void SampleStore::append(SampleRecord record) {
    if (auto err = space_.check(record.config))
        throw ConfigError("sample store: " + *err);
    if ((record.status == SampleStatus::Ok || record.status == SampleStatus::Clipped) &&
        !std::isfinite(record.objective))
        throw ConfigError("sample store: non-finite objective on an ok/clipped record");
    records_.push_back(std::move(record));
}

void SampleStore::append(const std::vector<SampleRecord>& records) {
    for (const auto& r : records) append(r);
}

std::size_t SampleStore::count_with_status(SampleStatus a, SampleStatus b) const {
    std::size_t n = 0;
    for (const auto& r : records_)
        if (r.status == a || r.status == b) ++n;
    return n;
}

bool SampleStore::operator==(const SampleStore& other) const {
    if (fingerprint_ != other.fingerprint_ || records_.size() != other.records_.size())
        return false;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& a = records_[i];
        const auto& b = other.records_[i];
        if (!(a.config == b.config) || a.status != b.status) return false;
        // bit-exact comparison, NaN never stored
        if (a.objective != b.objective || a.wall_time != b.wall_time) return false;
    }
    return true;
}

namespace {

char hex_digit(unsigned v) { return v < 10 ? char('0' + v) : char('a' + v - 10); }

std::string to_hex(std::uint64_t v) {
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = hex_digit(v & 0xf);
        v >>= 4;
    }
    return s;
}

} // namespace

void persist(const SampleStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const auto& space = store.space();
    out << "# space_fingerprint=" << to_hex(store.fingerprint()) << "\n";
    std::vector<std::string> header;
    for (const auto& p : space.params()) header.push_back(p.name);
    header.push_back("objective");
    header.push_back("status");
    header.push_back("wall_time");
    out << join_csv(header) << "\n";
    for (const auto& r : store.records()) {
        std::vector<std::string> fields;
        for (const auto& v : r.config.values) fields.push_back(value_to_string(v));
        fields.push_back(format_g17(r.objective));
        fields.push_back(to_string(r.status));
        fields.push_back(format_g17(r.wall_time));
        out << join_csv(fields) << "\n";
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

SampleStore load_store(const std::string& path, const ParameterSpace& space) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sample store '" + path + "'");

    std::string line;
    std::size_t line_no = 0;

    auto fail = [&](const std::string& msg) -> void {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": " + msg);
    };

    ++line_no;
    if (!std::getline(in, line)) fail("empty file");
    const std::string prefix = "# space_fingerprint=";
    if (line.rfind(prefix, 0) != 0) fail("missing space_fingerprint comment");
    std::string stored_fp = line.substr(prefix.size());
    while (!stored_fp.empty() && (stored_fp.back() == '\r' || stored_fp.back() == ' '))
        stored_fp.pop_back();
    if (stored_fp != to_hex(space.fingerprint()))
        fail("space fingerprint mismatch: store has " + stored_fp + ", space is " +
             to_hex(space.fingerprint()));

    ++line_no;
    if (!std::getline(in, line)) fail("missing header row");
    auto header = split_csv_line(line);
    const std::size_t ncols = space.size() + 3;
    if (header.size() != ncols) fail("header has " + std::to_string(header.size()) +
                                     " columns, expected " + std::to_string(ncols));
    for (std::size_t i = 0; i < space.size(); ++i)
        if (header[i] != space.param(i).name)
            fail("header column " + std::to_string(i + 1) + " is '" + header[i] +
                 "', expected '" + space.param(i).name + "'");

    SampleStore store(space);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != ncols)
            fail("row has " + std::to_string(fields.size()) + " fields, expected " +
                 std::to_string(ncols));
        SampleRecord r;
        r.config.values.resize(space.size());
        for (std::size_t i = 0; i < space.size(); ++i) {
            const auto& p = space.param(i);
            try {
                switch (p.kind) {
                    case ParamKind::Real:
                        r.config.values[i] = parse_double(fields[i], p.name);
                        break;
                    case ParamKind::Integer:
                        r.config.values[i] = parse_int(fields[i], p.name);
                        break;
                    default:
                        r.config.values[i] = fields[i];
                }
            } catch (const ConfigError& e) {
                fail(e.what());
            }
        }
        try {
            r.objective = parse_double(fields[space.size()], "objective");
            r.status = status_from_string(fields[space.size() + 1]);
            r.wall_time = parse_double(fields[space.size() + 2], "wall_time");
        } catch (const ConfigError& e) {
            fail(e.what());
        }
        try {
            store.append(std::move(r));
        } catch (const ConfigError& e) {
            fail(e.what());
        }
    }
    return store;
}

} // namespace ktune
