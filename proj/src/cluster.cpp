#include "easey/cluster.hpp"

#include "easey/batchgen.hpp"
#include "easey/error.hpp"
#include "easey/process.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace easey {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && ws(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && ws(s.back()))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos)
            nl = text.size();
        out.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

void copy_local(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    if (!fs::is_regular_file(from, ec))
        throw Error("no such file: " + from.string());
    if (to.has_parent_path())
        fs::create_directories(to.parent_path(), ec);
    fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
    if (ec)
        throw Error("copy " + from.string() + " -> " + to.string() + ": " + ec.message());
}

} // namespace

// ---------------------------------------------------------------------------

LocalSession::LocalSession(Scheduler dialect, fs::path workdir_root)
    : dialect_(dialect), root_(std::move(workdir_root)) {}

void LocalSession::ensure_live() const {
    if (!live_)
        throw SessionLost("session to " + identity() + " is closed");
}

ExecResult LocalSession::exec(std::string_view command) {
    ensure_live();
    auto r = run_shell(command);
    return {r.exit_code, std::move(r.out), std::move(r.err)};
}

void LocalSession::put(const fs::path& local, const std::string& remote) {
    ensure_live();
    copy_local(local, remote);
}

void LocalSession::get(const std::string& remote, const fs::path& local) {
    ensure_live();
    copy_local(remote, local);
}

std::string LocalSession::identity() const {
    const char* user = std::getenv("USER");
    return std::string(user ? user : "user") + "@localhost";
}

// ---------------------------------------------------------------------------

SshSession::SshSession(std::string host, fs::path key, Scheduler dialect, std::string workdir_root)
    : host_(std::move(host)), key_(std::move(key)), dialect_(dialect), root_(std::move(workdir_root)) {
    std::ifstream probe(key_);
    if (!probe)
        throw AuthFailed("ssh key '" + key_.string() + "' is not readable");
}

std::vector<std::string> SshSession::exec_argv(std::string_view command) const {
    return {"ssh", "-o", "BatchMode=yes", "-o", "StrictHostKeyChecking=accept-new",
            "-i",  key_.string(), host_, std::string(command)};
}

std::vector<std::string> SshSession::copy_argv(const std::string& from, const std::string& to) const {
    return {"scp", "-B", "-q", "-o", "StrictHostKeyChecking=accept-new", "-i", key_.string(), from, to};
}

namespace {

void check_ssh(const ProcessResult& r, const std::string& host) {
    if (r.exit_code != 255)
        return;
    if (r.err.find("Permission denied") != std::string::npos)
        throw AuthFailed(host + ": " + std::string(trim(r.err)));
    throw SessionLost(host + ": " + std::string(trim(r.err)));
}

} // namespace

ExecResult SshSession::exec(std::string_view command) {
    if (!live_)
        throw SessionLost("session to " + host_ + " is closed");
    auto r = run_process(exec_argv(command));
    check_ssh(r, host_);
    return {r.exit_code, std::move(r.out), std::move(r.err)};
}

void SshSession::put(const fs::path& local, const std::string& remote) {
    if (!live_)
        throw SessionLost("session to " + host_ + " is closed");
    auto r = run_process(copy_argv(local.string(), host_ + ":" + remote));
    check_ssh(r, host_);
    if (r.exit_code != 0)
        throw Error("scp to " + host_ + ":" + remote + " failed: " + r.err);
}

void SshSession::get(const std::string& remote, const fs::path& local) {
    if (!live_)
        throw SessionLost("session to " + host_ + " is closed");
    auto r = run_process(copy_argv(host_ + ":" + remote, local.string()));
    check_ssh(r, host_);
    if (r.exit_code != 0)
        throw Error("scp from " + host_ + ":" + remote + " failed: " + r.err);
}

// ---------------------------------------------------------------------------

namespace dialect {

std::string submit_command(Scheduler s, const std::string& script_path) {
    return (s == Scheduler::slurm ? "sbatch " : "qsub ") + shell_quote(script_path);
}

std::optional<std::string> parse_submit(Scheduler s, std::string_view out) {
    for (auto line : lines_of(out)) {
        line = trim(line);
        if (line.empty())
            continue;
        if (s == Scheduler::slurm) {
            constexpr std::string_view prefix = "Submitted batch job ";
            if (line.rfind(prefix, 0) == 0)
                line.remove_prefix(prefix.size());
            auto semi = line.find(';');
            line = trim(line.substr(0, semi));
            if (!line.empty() && std::all_of(line.begin(), line.end(), ::isdigit))
                return std::string(line);
        } else if (line.find(' ') == std::string_view::npos) {
            return std::string(line);
        }
    }
    return std::nullopt;
}

std::vector<std::string> status_commands(Scheduler s, const std::string& job_id) {
    auto id = shell_quote(job_id);
    if (s == Scheduler::slurm)
        return {"squeue -h -j " + id + " -o %T", "sacct -n -X -P -j " + id + " -o State"};
    return {"qstat -x -f " + id};
}

namespace {

std::optional<JobState> slurm_state(std::string_view word) {
    auto starts = [&](std::string_view p) { return word.rfind(p, 0) == 0; };
    if (starts("PENDING") || starts("CONFIGURING") || starts("REQUEUED") || starts("RESV_DEL_HOLD"))
        return JobState::pending;
    if (starts("RUNNING") || starts("COMPLETING") || starts("SUSPENDED") || starts("STAGE_OUT") ||
        starts("SIGNALING") || starts("RESIZING"))
        return JobState::running;
    if (starts("COMPLETED"))
        return JobState::finished;
    if (starts("FAILED") || starts("CANCELLED") || starts("TIMEOUT") || starts("NODE_FAIL") ||
        starts("OUT_OF_MEMORY") || starts("PREEMPTED") || starts("BOOT_FAIL") || starts("DEADLINE") ||
        starts("REVOKED"))
        return JobState::failed;
    return std::nullopt;
}

std::optional<std::string> pbs_attr(std::string_view block, std::string_view attr) {
    for (auto line : lines_of(block)) {
        line = trim(line);
        if (line.rfind(attr, 0) != 0)
            continue;
        auto rest = trim(line.substr(attr.size()));
        if (rest.empty() || rest.front() != '=')
            continue;
        return std::string(trim(rest.substr(1)));
    }
    return std::nullopt;
}

} // namespace

std::optional<JobState> parse_status(Scheduler s, std::string_view out) {
    if (s == Scheduler::slurm) {
        for (auto line : lines_of(out)) {
            line = trim(line);
            if (!line.empty())
                return slurm_state(line);
        }
        return std::nullopt;
    }
    auto state = pbs_attr(out, "job_state");
    if (!state || state->empty())
        return std::nullopt;
    switch ((*state)[0]) {
    case 'Q': case 'H': case 'W': case 'T': case 'S': case 'U':
        return JobState::pending;
    case 'R': case 'E': case 'B':
        return JobState::running;
    case 'F': case 'X': {
        auto exit_status = pbs_attr(out, "Exit_status");
        return exit_status && *exit_status == "0" ? JobState::finished : JobState::failed;
    }
    default:
        return std::nullopt;
    }
}

std::vector<std::string> lookup_commands(Scheduler s) {
    if (s == Scheduler::slurm)
        return {"squeue -h -o '%i|%k'", "sacct -n -X -P -o JobID,Comment"};
    return {"qstat -x -f"};
}

std::optional<std::string> parse_lookup(Scheduler s, std::string_view out, std::string_view tag) {
    if (s == Scheduler::slurm) {
        for (auto line : lines_of(out)) {
            auto bar = line.find('|');
            if (bar == std::string_view::npos)
                continue;
            if (trim(line.substr(bar + 1)) == tag)
                return std::string(trim(line.substr(0, bar)));
        }
        return std::nullopt;
    }
    std::string current;
    const std::string needle = "EASEY_JOB_TAG=" + std::string(tag);
    for (auto line : lines_of(out)) {
        auto t = trim(line);
        if (t.rfind("Job Id:", 0) == 0) {
            current = std::string(trim(t.substr(7)));
            continue;
        }
        auto pos = t.find(needle);
        if (!current.empty() && pos != std::string_view::npos) {
            auto end = pos + needle.size();
            if (end == t.size() || t[end] == ',')
                return current;
        }
    }
    return std::nullopt;
}

} // namespace dialect

// ---------------------------------------------------------------------------
// Simulator

namespace {

struct ParsedScript {
    SimJob job;
    std::vector<std::string> prolog;
    std::vector<std::string> commands;
};

std::optional<std::int64_t> to_int(std::string_view s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        return std::nullopt;
    return v;
}

void apply_slurm_directive(SimJob& job, const std::vector<std::string>& words) {
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::string key = words[i];
        std::string value;
        if (auto eq = key.find('='); key.rfind("--", 0) == 0 && eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else if (i + 1 < words.size()) {
            value = words[++i];
        }
        if (key == "--nodes" || key == "-N")
            job.nodes = to_int(value).value_or(0);
        else if (key == "--ntasks-per-node")
            job.tasks_per_node = to_int(value).value_or(0);
        else if (key == "--time" || key == "-t")
            job.time = value;
        else if (key == "--chdir" || key == "-D")
            job.workdir = value;
        else if (key == "--output" || key == "-o")
            job.stdout_path = value;
        else if (key == "--error" || key == "-e")
            job.stderr_path = value;
        else if (key == "--comment")
            job.tag = value;
    }
}

void apply_pbs_directive(SimJob& job, const std::vector<std::string>& words) {
    for (std::size_t i = 0; i + 1 < words.size(); i += 2) {
        const auto& flag = words[i];
        const auto& value = words[i + 1];
        if (flag == "-l") {
            std::stringstream resources(value);
            std::string res;
            while (std::getline(resources, res, ',')) {
                if (res.rfind("walltime=", 0) == 0) {
                    job.time = res.substr(9);
                } else if (res.rfind("select=", 0) == 0) {
                    std::stringstream chunks(res.substr(7));
                    std::string part;
                    bool first = true;
                    while (std::getline(chunks, part, ':')) {
                        if (first)
                            job.nodes = to_int(part).value_or(0);
                        else if (part.rfind("ncpus=", 0) == 0)
                            job.tasks_per_node = to_int(part.substr(6)).value_or(0);
                        first = false;
                    }
                }
            }
        } else if (flag == "-o") {
            job.stdout_path = value;
        } else if (flag == "-e") {
            job.stderr_path = value;
        } else if (flag == "-v") {
            std::stringstream vars(value);
            std::string var;
            while (std::getline(vars, var, ',')) {
                if (var.rfind("EASEY_JOB_TAG=", 0) == 0)
                    job.tag = var.substr(14);
            }
        }
    }
}

ParsedScript parse_script(Scheduler dialect, std::string_view script) {
    ParsedScript p;
    p.job.script = std::string(script);
    auto lines = lines_of(script);
    if (lines.empty() || lines.front().rfind("#!", 0) != 0)
        throw ScriptRejected("not a batch script: the first line must start with #!");

    const std::string prefix = dialect == Scheduler::slurm ? "#SBATCH" : "#PBS";
    const std::string other = dialect == Scheduler::slurm ? "#PBS" : "#SBATCH";
    bool saw_directive = false;
    enum { head, prolog, body } section = head;
    bool markers = std::find(lines.begin(), lines.end(), kExecutionMarker) != lines.end();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto line = lines[i];
        auto t = trim(line);
        if (t == kPrologMarker) {
            section = prolog;
            continue;
        }
        if (t == kExecutionMarker) {
            section = body;
            continue;
        }
        if (t.rfind(prefix + " ", 0) == 0) {
            saw_directive = true;
            auto words = split_words(t.substr(prefix.size()));
            if (dialect == Scheduler::slurm)
                apply_slurm_directive(p.job, words);
            else
                apply_pbs_directive(p.job, words);
            continue;
        }
        if (t.rfind(other + " ", 0) == 0)
            throw ScriptRejected("script carries " + other + " directives; this scheduler expects " + prefix);
        if (t.empty() || t.front() == '#')
            continue;
        if (section == prolog) {
            p.prolog.emplace_back(line);
        } else if (section == body || !markers) {
            p.commands.emplace_back(line);
        }
    }
    if (!saw_directive)
        throw ScriptRejected("script has no " + prefix + " directives");
    if (p.job.time.empty())
        throw ScriptRejected(std::string("missing mandatory time directive (") +
                             (dialect == Scheduler::slurm ? "--time" : "-l walltime") + ")");
    if (p.job.workdir.empty()) {
        for (const auto& l : p.prolog) {
            auto words = split_words(l);
            if (words.size() == 2 && words[0] == "cd") {
                p.job.workdir = words[1];
                break;
            }
        }
    }
    return p;
}

bool is_mpi_launch(std::string_view line) {
    auto words = split_words(line);
    if (words.empty())
        return false;
    return words[0] == "srun" || words[0] == "mpiexec" || words[0] == "mpirun" || words[0] == "aprun";
}

std::string slurm_state_word(JobState s) {
    switch (s) {
    case JobState::pending: return "PENDING";
    case JobState::running: return "RUNNING";
    case JobState::finished: return "COMPLETED";
    case JobState::failed: return "FAILED";
    default: return "PENDING";
    }
}

char pbs_state_letter(JobState s) {
    switch (s) {
    case JobState::running: return 'R';
    case JobState::finished:
    case JobState::failed: return 'F';
    default: return 'Q';
    }
}

std::string flag_value(const std::vector<std::string>& argv, std::string_view flag) {
    for (std::size_t i = 1; i + 1 < argv.size(); ++i) {
        if (argv[i] == flag)
            return argv[i + 1];
    }
    return {};
}

std::string last_operand(const std::vector<std::string>& argv) {
    if (argv.size() < 2 || argv.back().front() == '-')
        return {};
    return argv.back();
}

json outcome_to_json(const SimOutcome& o) {
    json files = json::array();
    for (const auto& [path, content] : o.files)
        files.push_back({path, content});
    return {{"terminal", std::string(to_string(o.terminal))}, {"stderr", o.stderr_text}, {"files", files}};
}

SimOutcome outcome_from_json(const json& j) {
    SimOutcome o;
    auto terminal = job_state_from_string(j.at("terminal").get<std::string>());
    if (!terminal || !is_terminal(*terminal))
        throw StoreCorrupt("simulator state: bad terminal state");
    o.terminal = *terminal;
    o.stderr_text = j.at("stderr").get<std::string>();
    for (const auto& f : j.at("files"))
        o.files.emplace_back(f.at(0).get<std::string>(), f.at(1).get<std::string>());
    return o;
}

} // namespace

Simulator::Simulator(Scheduler dialect, SimOptions options) : dialect_(dialect), options_(options) {}

Simulator::Simulator(Simulator&& other) noexcept : dialect_(other.dialect_), options_(other.options_) {
    std::lock_guard lock(other.mu_);
    next_id_ = other.next_id_;
    next_seq_ = other.next_seq_;
    jobs_ = std::move(other.jobs_);
    events_ = std::move(other.events_);
    next_outcome_ = std::move(other.next_outcome_);
}

Simulator& Simulator::operator=(Simulator&& other) noexcept {
    if (this == &other)
        return *this;
    std::scoped_lock lock(mu_, other.mu_);
    dialect_ = other.dialect_;
    options_ = other.options_;
    next_id_ = other.next_id_;
    next_seq_ = other.next_seq_;
    jobs_ = std::move(other.jobs_);
    events_ = std::move(other.events_);
    next_outcome_ = std::move(other.next_outcome_);
    return *this;
}

std::string Simulator::submit(std::string_view script) {
    auto parsed = parse_script(dialect_, script);
    std::lock_guard lock(mu_);
    SimJob job = std::move(parsed.job);
    job.sim_id = std::to_string(next_id_);
    job.state = JobState::pending;
    if (next_outcome_) {
        job.outcome = std::move(*next_outcome_);
        next_outcome_.reset();
    }
    jobs_.emplace(next_id_++, std::move(job));
    return std::to_string(next_id_ - 1);
}

void Simulator::record(SimJob& job, JobState to, std::vector<SimEvent>& out) {
    SimEvent ev{next_seq_++, job.sim_id, job.state, to};
    job.state = to;
    events_.push_back(ev);
    out.push_back(ev);
}

void Simulator::write_logs(const SimJob& job) const {
    auto write = [&](const std::string& path, const std::string& body) {
        if (path.empty())
            return;
        fs::path p(path);
        if (p.is_relative() && !job.workdir.empty())
            p = fs::path(job.workdir) / p;
        std::error_code ec;
        if (!p.has_parent_path() || !fs::is_directory(p.parent_path(), ec))
            return;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << body;
    };
    write(job.stdout_path, job.stdout_buf);
    write(job.stderr_path, job.stderr_buf);
}

void Simulator::run_chunk(SimJob& job, bool first) {
    auto parsed = parse_script(dialect_, job.script);
    std::vector<std::string> chunk;
    if (first) {
        if (!parsed.commands.empty())
            chunk.push_back(parsed.commands.front());
    } else if (parsed.commands.size() > 1) {
        chunk.assign(parsed.commands.begin() + 1, parsed.commands.end());
    }
    if (chunk.empty())
        return;

    if (!options_.run_commands) {
        for (const auto& c : chunk)
            job.stdout_buf += "[sim] " + c + "\n";
        return;
    }
    std::string text;
    for (const auto& l : parsed.prolog)
        text += l + "\n";
    for (const auto& c : chunk) {
        if (is_mpi_launch(c))
            text += "printf '%s\\n' " + shell_quote("[sim] " + c) + "\n";
        else
            text += c + "\n";
    }
    std::optional<fs::path> cwd;
    std::error_code ec;
    if (!job.workdir.empty() && fs::is_directory(job.workdir, ec))
        cwd = fs::path(job.workdir);
    auto r = run_process({"/bin/bash", "-c", text}, cwd);
    job.stdout_buf += r.out;
    job.stderr_buf += r.err;
    if (r.exit_code != 0)
        job.command_failed = true;
}

std::vector<SimEvent> Simulator::tick() {
    std::lock_guard lock(mu_);
    std::vector<SimEvent> out;
    for (auto& [_, job] : jobs_) {
        if (job.state == JobState::pending) {
            record(job, JobState::running, out);
            run_chunk(job, true);
            write_logs(job);
        } else if (job.state == JobState::running) {
            if (job.outcome.terminal == JobState::failed) {
                job.stderr_buf += job.outcome.stderr_text;
                record(job, JobState::failed, out);
            } else {
                run_chunk(job, false);
                if (!job.workdir.empty()) {
                    for (const auto& [rel, content] : job.outcome.files) {
                        fs::path p = fs::path(job.workdir) / rel;
                        std::error_code ec;
                        fs::create_directories(p.parent_path(), ec);
                        std::ofstream f(p, std::ios::binary | std::ios::trunc);
                        f << content;
                    }
                }
                record(job, job.command_failed ? JobState::failed : JobState::finished, out);
            }
            write_logs(job);
        }
    }
    return out;
}

void Simulator::set_outcome(const std::string& sim_id, SimOutcome outcome) {
    std::lock_guard lock(mu_);
    auto id = to_int(sim_id);
    auto it = id ? jobs_.find(static_cast<std::uint64_t>(*id)) : jobs_.end();
    if (it == jobs_.end())
        throw UnknownJob("simulator has no job " + sim_id);
    it->second.outcome = std::move(outcome);
}

void Simulator::set_next_outcome(SimOutcome outcome) {
    std::lock_guard lock(mu_);
    next_outcome_ = std::move(outcome);
}

std::optional<SimJob> Simulator::job(const std::string& sim_id) const {
    std::string_view id = sim_id;
    if (auto dot = id.find('.'); dot != std::string_view::npos)
        id = id.substr(0, dot);
    auto n = to_int(id);
    std::lock_guard lock(mu_);
    if (!n)
        return std::nullopt;
    auto it = jobs_.find(static_cast<std::uint64_t>(*n));
    if (it == jobs_.end())
        return std::nullopt;
    return it->second;
}

std::vector<SimJob> Simulator::jobs() const {
    std::lock_guard lock(mu_);
    std::vector<SimJob> out;
    for (const auto& [_, j] : jobs_)
        out.push_back(j);
    return out;
}

std::vector<SimEvent> Simulator::events() const {
    std::lock_guard lock(mu_);
    return events_;
}

ExecResult Simulator::status_output(const std::vector<std::string>& argv) const {
    // caller holds no lock; job() takes it
    const std::string& verb = argv[0];
    if (verb == "squeue" || verb == "sacct") {
        auto id = flag_value(argv, "-j");
        if (!id.empty()) {
            auto j = job(id);
            if (!j)
                return {1, "", "slurm_load_jobs error: Invalid job id specified\n"};
            return {0, slurm_state_word(j->state) + "\n", ""};
        }
        std::string out;
        for (const auto& j : jobs())
            out += j.sim_id + "|" + j.tag + "\n";
        return {0, out, ""};
    }
    // qstat
    auto block = [](const SimJob& j) {
        std::string b = "Job Id: " + j.sim_id + ".sim\n";
        b += "    job_state = ";
        b += pbs_state_letter(j.state);
        b += "\n";
        if (is_terminal(j.state))
            b += "    Exit_status = " + std::string(j.state == JobState::finished ? "0" : "1") + "\n";
        if (!j.tag.empty())
            b += "    Variable_List = PBS_O_WORKDIR=" + j.workdir + ",EASEY_JOB_TAG=" + j.tag + "\n";
        return b + "\n";
    };
    auto id = last_operand(argv);
    if (!id.empty()) {
        auto j = job(id);
        if (!j)
            return {153, "", "qstat: Unknown Job Id " + id + "\n"};
        return {0, block(*j), ""};
    }
    std::string out;
    for (const auto& j : jobs())
        out += block(j);
    return {0, out, ""};
}

std::optional<ExecResult> Simulator::handle_command(const std::vector<std::string>& argv,
                                                    const fs::path& cwd) {
    if (argv.empty())
        return std::nullopt;
    const std::string& verb = argv[0];
    const bool slurm = dialect_ == Scheduler::slurm;
    bool ours = slurm ? (verb == "sbatch" || verb == "squeue" || verb == "sacct")
                      : (verb == "qsub" || verb == "qstat");
    if (!ours)
        return std::nullopt;

    if (verb == "sbatch" || verb == "qsub") {
        auto operand = last_operand(argv);
        if (operand.empty())
            return ExecResult{1, "", verb + ": error: no batch script given\n"};
        fs::path path(operand);
        if (path.is_relative())
            path = cwd / path;
        std::ifstream in(path);
        if (!in)
            return ExecResult{1, "", verb + ": error: unable to open file " + operand + "\n"};
        std::stringstream buf;
        buf << in.rdbuf();
        try {
            auto id = submit(buf.str());
            if (slurm)
                return ExecResult{0, "Submitted batch job " + id + "\n", ""};
            return ExecResult{0, id + ".sim\n", ""};
        } catch (const ScriptRejected& ex) {
            return ExecResult{1, "", verb + ": error: " + ex.what() + "\n"};
        }
    }
    return status_output(argv);
}

std::string Simulator::to_json() const {
    std::lock_guard lock(mu_);
    json doc;
    doc["dialect"] = std::string(to_string(dialect_));
    doc["run_commands"] = options_.run_commands;
    doc["next_id"] = next_id_;
    doc["next_seq"] = next_seq_;
    json jobs = json::array();
    for (const auto& [_, j] : jobs_) {
        jobs.push_back({{"sim_id", j.sim_id},
                        {"script", j.script},
                        {"state", std::string(to_string(j.state))},
                        {"stdout", j.stdout_buf},
                        {"stderr", j.stderr_buf},
                        {"outcome", outcome_to_json(j.outcome)},
                        {"command_failed", j.command_failed}});
    }
    doc["jobs"] = std::move(jobs);
    json events = json::array();
    for (const auto& e : events_)
        events.push_back({e.seq, e.sim_id, std::string(to_string(e.from)), std::string(to_string(e.to))});
    doc["events"] = std::move(events);
    doc["next_outcome"] = next_outcome_ ? outcome_to_json(*next_outcome_) : json(nullptr);
    return doc.dump(2);
}

Simulator Simulator::from_json(std::string_view text) {
    try {
        auto doc = json::parse(text);
        auto dialect = scheduler_from_string(doc.at("dialect").get<std::string>());
        if (!dialect)
            throw StoreCorrupt("simulator state: bad dialect");
        Simulator sim(*dialect, SimOptions{doc.at("run_commands").get<bool>()});
        sim.next_id_ = doc.at("next_id").get<std::uint64_t>();
        sim.next_seq_ = doc.at("next_seq").get<std::uint64_t>();
        for (const auto& j : doc.at("jobs")) {
            auto parsed = parse_script(*dialect, j.at("script").get<std::string>());
            SimJob job = std::move(parsed.job);
            job.sim_id = j.at("sim_id").get<std::string>();
            auto state = job_state_from_string(j.at("state").get<std::string>());
            if (!state)
                throw StoreCorrupt("simulator state: bad job state");
            job.state = *state;
            job.stdout_buf = j.at("stdout").get<std::string>();
            job.stderr_buf = j.at("stderr").get<std::string>();
            job.outcome = outcome_from_json(j.at("outcome"));
            job.command_failed = j.at("command_failed").get<bool>();
            auto id = to_int(job.sim_id);
            if (!id)
                throw StoreCorrupt("simulator state: bad job id");
            sim.jobs_.emplace(static_cast<std::uint64_t>(*id), std::move(job));
        }
        for (const auto& e : doc.at("events")) {
            auto from = job_state_from_string(e.at(2).get<std::string>());
            auto to = job_state_from_string(e.at(3).get<std::string>());
            if (!from || !to)
                throw StoreCorrupt("simulator state: bad event");
            sim.events_.push_back({e.at(0).get<std::uint64_t>(), e.at(1).get<std::string>(), *from, *to});
        }
        if (!doc.at("next_outcome").is_null())
            sim.next_outcome_ = outcome_from_json(doc.at("next_outcome"));
        return sim;
    } catch (const json::exception& ex) {
        throw StoreCorrupt(std::string("simulator state: ") + ex.what());
    } catch (const ScriptRejected& ex) {
        throw StoreCorrupt(std::string("simulator state: ") + ex.what());
    }
}

std::string sim_submit(Simulator& sim, std::string_view script) {
    return sim.submit(script);
}

std::vector<SimEvent> sim_tick(Simulator& sim) {
    return sim.tick();
}

// ---------------------------------------------------------------------------

SimSession::SimSession(Simulator& sim, fs::path root)
    : LocalSession(sim.dialect(), std::move(root)), sim_(sim) {}

ExecResult SimSession::exec(std::string_view command) {
    ensure_live();
    auto words = split_words(command);
    if (auto handled = sim_.handle_command(words, root_))
        return *handled;
    std::error_code ec;
    fs::create_directories(root_, ec);
    auto r = run_shell(command, root_);
    return {r.exit_code, std::move(r.out), std::move(r.err)};
}

std::string SimSession::identity() const {
    return "sim@" + std::string(to_string(dialect_));
}

std::string SimSession::default_workdir_root() const {
    return (root_ / "jobs").string();
}

} // namespace easey
