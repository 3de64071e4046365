#include "easey/engine.hpp"

#include "easey/batchgen.hpp"
#include "easey/error.hpp"
#include "easey/process.hpp"
#include "easey/timeutil.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace easey {

namespace fs = std::filesystem;
using nlohmann::json;

const StepMark* JobRecord::mark(std::string_view step_name) const {
    for (const auto& m : steps) {
        if (m.step == step_name)
            return &m;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json endpoint_json(const TransferEndpoint& ep) {
    return {{"location", ep.location}, {"protocol", std::string(to_string(ep.protocol))},
            {"user", ep.user}, {"auth", ep.auth}};
}

TransferEndpoint endpoint_from(const json& j) {
    TransferEndpoint ep;
    ep.location = j.at("location").get<std::string>();
    auto proto = protocol_from_string(j.at("protocol").get<std::string>());
    if (!proto)
        throw StoreCorrupt("unknown protocol in record");
    ep.protocol = *proto;
    ep.user = j.at("user").get<std::string>();
    ep.auth = j.at("auth").get<std::string>();
    return ep;
}

json transfer_json(const TransferResult& r) {
    return {{"direction", std::string(to_string(r.task.direction))},
            {"endpoint", endpoint_json(r.task.endpoint)},
            {"local_path", r.task.local_path.string()},
            {"order_index", r.task.order_index},
            {"bytes", r.bytes},
            {"duration", r.duration},
            {"status", std::string(to_string(r.status))},
            {"detail", r.detail},
            {"attempts", r.attempts}};
}

TransferResult transfer_from(const json& j) {
    TransferResult r;
    r.task.direction = j.at("direction").get<std::string>() == "out" ? Direction::out : Direction::in;
    r.task.endpoint = endpoint_from(j.at("endpoint"));
    r.task.local_path = j.at("local_path").get<std::string>();
    r.task.order_index = j.at("order_index").get<int>();
    r.bytes = j.at("bytes").get<std::uint64_t>();
    r.duration = j.at("duration").get<double>();
    r.status = j.at("status").get<std::string>() == "ok" ? TransferStatus::ok : TransferStatus::failed;
    r.detail = j.at("detail").get<std::string>();
    r.attempts = j.at("attempts").get<int>();
    return r;
}

JobState state_from(const json& j) {
    auto s = job_state_from_string(j.get<std::string>());
    if (!s)
        throw StoreCorrupt("unknown job state '" + j.get<std::string>() + "'");
    return *s;
}

} // namespace

std::string record_to_json(const JobRecord& r) {
    json doc;
    doc["id"] = r.id.str();
    doc["config"] = json::parse(serialize_config(r.config));
    doc["archive"] = {{"path", r.archive.path.string()},
                      {"image_name", r.archive.image_name},
                      {"checksum", r.archive.checksum},
                      {"created_at", r.archive.created_at}};
    doc["target"] = r.target;
    doc["identity"] = r.identity;
    doc["state"] = std::string(to_string(r.state));
    doc["scheduler_job_id"] = r.scheduler_job_id ? json(*r.scheduler_job_id) : json(nullptr);
    doc["workdir"] = r.workdir;
    doc["submitted_at"] = r.submitted_at;
    doc["finished_at"] = r.finished_at;
    doc["staging_ledger"] = json::array();
    for (const auto& t : r.staging_ledger)
        doc["staging_ledger"].push_back(transfer_json(t));
    doc["logs"] = {{"stdout", r.stdout_path}, {"stderr", r.stderr_path}};
    doc["steps"] = json::array();
    for (const auto& m : r.steps)
        doc["steps"].push_back({{"step", m.step}, {"at_us", m.at_us}, {"ok", m.ok}, {"detail", m.detail}});
    doc["history"] = json::array();
    for (const auto& t : r.history)
        doc["history"].push_back({std::string(to_string(t.from)), std::string(to_string(t.to)), t.at});
    doc["failed_step"] = r.failed_step;
    doc["failure"] = r.failure;
    doc["stale"] = r.stale;
    return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

JobRecord record_from_json(std::string_view text) {
    try {
        auto doc = json::parse(text);
        JobRecord r;
        if (!JobId::is_valid(doc.at("id").get<std::string>()))
            throw StoreCorrupt("record has an invalid job id");
        r.id = JobId(doc.at("id").get<std::string>());
        try {
            r.config = parse_config(doc.at("config").dump());
        } catch (const Error& ex) {
            throw StoreCorrupt(std::string("record config: ") + ex.what());
        }
        r.config.job.id = r.id.str();
        const auto& a = doc.at("archive");
        r.archive.path = a.at("path").get<std::string>();
        r.archive.image_name = a.at("image_name").get<std::string>();
        r.archive.checksum = a.at("checksum").get<std::string>();
        r.archive.created_at = a.at("created_at").get<std::string>();
        r.target = doc.at("target").get<std::string>();
        r.identity = doc.at("identity").get<std::string>();
        r.state = state_from(doc.at("state"));
        if (!doc.at("scheduler_job_id").is_null())
            r.scheduler_job_id = doc.at("scheduler_job_id").get<std::string>();
        r.workdir = doc.at("workdir").get<std::string>();
        r.submitted_at = doc.at("submitted_at").get<std::string>();
        r.finished_at = doc.at("finished_at").get<std::string>();
        for (const auto& t : doc.at("staging_ledger"))
            r.staging_ledger.push_back(transfer_from(t));
        r.stdout_path = doc.at("logs").at("stdout").get<std::string>();
        r.stderr_path = doc.at("logs").at("stderr").get<std::string>();
        for (const auto& m : doc.at("steps"))
            r.steps.push_back({m.at("step").get<std::string>(), m.at("at_us").get<std::int64_t>(),
                               m.at("ok").get<bool>(), m.at("detail").get<std::string>()});
        for (const auto& t : doc.at("history"))
            r.history.push_back({state_from(t.at(0)), state_from(t.at(1)), t.at(2).get<std::string>()});
        r.failed_step = doc.at("failed_step").get<std::string>();
        r.failure = doc.at("failure").get<std::string>();
        r.stale = doc.at("stale").get<bool>();
        return r;
    } catch (const json::exception& ex) {
        throw StoreCorrupt(std::string("malformed job record: ") + ex.what());
    }
}

RecordStore::RecordStore(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
        throw Error("cannot create record store " + dir_.string());
}

fs::path RecordStore::path_for(const JobId& id) const {
    return dir_ / (id.str() + ".json");
}

void RecordStore::save(const JobRecord& record) {
    const auto text = record_to_json(record);
    std::lock_guard lock(write_mu_);
    const auto final_path = path_for(record.id);
    auto tmp = final_path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        out.flush();
        if (!out)
            throw Error("cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, final_path, ec);
    if (ec)
        throw Error("cannot replace " + final_path.string() + ": " + ec.message());
}

namespace {

JobRecord read_record(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw StoreCorrupt("cannot read " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return record_from_json(buf.str());
    } catch (const StoreCorrupt& ex) {
        throw StoreCorrupt(p.string() + ": " + ex.what());
    }
}

} // namespace

std::optional<JobRecord> RecordStore::load(const JobId& id) const {
    const auto p = path_for(id);
    std::error_code ec;
    if (!fs::exists(p, ec))
        return std::nullopt;
    auto rec = read_record(p);
    if (rec.id != id)
        throw StoreCorrupt(p.string() + ": holds record " + rec.id.str());
    return rec;
}

std::vector<JobRecord> RecordStore::load_all() const {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.is_regular_file() && e.path().extension() == ".json")
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<JobRecord> out;
    for (const auto& f : files)
        out.push_back(read_record(f));
    return out;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(RecordStore& store, TransferAgent agent, EngineOptions options)
    : store_(store), agent_(std::move(agent)), options_(std::move(options)) {
    if (options_.staging_root.empty())
        options_.staging_root = store_.dir().parent_path() / "staging";
    if (!options_.clock)
        options_.clock = std::chrono::system_clock::now;
}

fs::path Engine::local_dir(const JobId& id) const {
    return options_.staging_root / id.str();
}

std::string Engine::now_iso() {
    return format_utc(options_.clock(), true);
}

void Engine::advance(JobRecord& rec, JobState to) {
    if (rec.state == to)
        return;
    if (!is_legal_transition(rec.state, to))
        throw std::logic_error("illegal transition " + std::string(to_string(rec.state)) + " -> " +
                               std::string(to_string(to)));
    rec.history.push_back({rec.state, to, now_iso()});
    rec.state = to;
    if (is_terminal(to) && rec.finished_at.empty())
        rec.finished_at = rec.history.back().at;
}

void Engine::mark(JobRecord& rec, std::string_view step_name, bool ok, std::string detail) {
    auto us = std::chrono::duration_cast<std::chrono::microseconds>(options_.clock().time_since_epoch()).count();
    if (!rec.steps.empty() && us <= rec.steps.back().at_us)
        us = rec.steps.back().at_us + 1;
    rec.steps.push_back({std::string(step_name), us, ok, std::move(detail)});
}

void Engine::hook(std::string_view step_name, const JobRecord& rec) {
    if (options_.step_hook)
        options_.step_hook(step_name, rec);
}

JobRecord Engine::load_or_throw(const JobId& id) const {
    auto rec = store_.load(id);
    if (!rec)
        throw UnknownJob("no job with id " + id.str());
    return *rec;
}

JobRecord Engine::record(const JobId& id) const {
    return load_or_throw(id);
}

namespace {

struct InflightGuard {
    std::mutex& mu;
    std::set<JobId>& set;
    JobId id;
    ~InflightGuard() {
        std::lock_guard lock(mu);
        set.erase(id);
    }
};

std::string last_lines(std::string_view log, std::size_t n = 20) {
    std::size_t pos = log.size();
    for (std::size_t seen = 0; pos > 0 && seen <= n; --pos) {
        if (log[pos - 1] == '\n' && ++seen > n)
            break;
    }
    return std::string(log.substr(pos));
}

} // namespace

JobRecord Engine::submit(const EaseyConfig& cfg, const ContainerArchive& archive,
                         const TargetProfile& profile, ClusterSession& session) {
    auto report = validate(cfg);
    if (!report.submittable()) {
        std::string msg = "configuration is not submittable:";
        for (const auto& v : report.violations) {
            if (severity(v.code) == Severity::error)
                msg += " " + std::string(to_string(v.code)) + " at " + v.path + ";";
        }
        throw ValueError(msg);
    }
    if (!verify_archive(archive))
        throw SubmitFailed("archive " + archive.path.string() + " does not match its checksum", "", "");
    if (session.dialect() != profile.scheduler)
        throw SubmitFailed("session speaks " + std::string(to_string(session.dialect())) + " but target " +
                               profile.name + " uses " + std::string(to_string(profile.scheduler)),
                           "", "");

    JobRecord rec;
    rec.config = cfg;
    for (int bump = 0;; ++bump) {
        auto stamp = now_iso() + (bump ? "#" + std::to_string(bump) : "");
        rec.id = assign_job_id(cfg, stamp);
        std::lock_guard lock(inflight_mu_);
        if (!inflight_.count(rec.id) && !store_.load(rec.id)) {
            inflight_.insert(rec.id);
            break;
        }
    }
    InflightGuard guard{inflight_mu_, inflight_, rec.id};
    rec.config.job.id = rec.id.str();
    rec.archive = archive;
    rec.target = profile.name;
    rec.identity = session.identity();
    std::string root = options_.workdir_root;
    if (root.empty())
        root = profile.workdir_root;
    if (root.empty())
        root = session.default_workdir_root();
    while (root.size() > 1 && root.back() == '/')
        root.pop_back();
    rec.workdir = root + "/" + rec.id.str();
    rec.stdout_path = rec.workdir + "/easey-" + rec.id.str() + ".out";
    rec.stderr_path = rec.workdir + "/easey-" + rec.id.str() + ".err";
    mark(rec, step::created);
    store_.save(rec);
    hook(step::created, rec);

    std::string log;
    auto fail = [&](std::string_view step_name, const std::string& what, auto error_tag) -> JobRecord {
        using E = decltype(error_tag);
        mark(rec, step_name, false, what);
        rec.failed_step = std::string(step_name);
        rec.failure = what;
        advance(rec, JobState::failed);
        store_.save(rec);
        throw E(std::string(step_name) + ": " + what, rec.id.str(), log);
    };
    auto run = [&](const std::string& cmd) {
        log += "$ " + cmd + "\n";
        auto r = session.exec(cmd);
        log += r.out + r.err;
        return r;
    };
    const std::string wd = shell_quote(rec.workdir);

    advance(rec, JobState::staging);
    store_.save(rec);

    // (1) move the archive next to the job
    const std::string remote_archive = rec.workdir + "/" + archive.path.filename().string();
    try {
        auto r = run("mkdir -p " + wd);
        if (r.exit_code != 0)
            return fail(step::move_archive, "cannot create " + rec.workdir + ": " + last_lines(r.err),
                        SubmitFailed("", "", ""));
        session.put(archive.path, remote_archive);
    } catch (const SessionLost&) {
        throw;
    } catch (const StepError&) {
        throw;
    } catch (const Error& ex) {
        return fail(step::move_archive, ex.what(), SubmitFailed("", "", ""));
    }
    mark(rec, step::move_archive);
    store_.save(rec);
    hook(step::move_archive, rec);

    // (2) unpack into <workdir>/<image name>
    {
        const std::string image_dir = shell_quote(rec.workdir + "/" + archive.image_name);
        auto r = run("mkdir -p " + image_dir + " && tar -xzf " + shell_quote(remote_archive) + " -C " +
                     image_dir);
        if (r.exit_code != 0)
            return fail(step::extract, "tar exited with " + std::to_string(r.exit_code) + ": " + last_lines(r.err),
                        ExtractFailed("", "", ""));
    }
    mark(rec, step::extract);
    store_.save(rec);
    hook(step::extract, rec);

    // (3) data folder iff there is data to move
    const bool has_data = cfg.data && (!cfg.data->input.empty() || !cfg.data->output.empty());
    std::vector<TransferTask> plan;
    const fs::path local = local_dir(rec.id);
    try {
        plan = plan_stage_in(cfg.data, local);
    } catch (const Error& ex) {
        return fail(step::mkdir_data, ex.what(), StagingFailed("", "", ""));
    }
    if (has_data) {
        auto r = run("mkdir -p " + shell_quote(rec.workdir + "/" + std::string(kDataFolderName)));
        if (r.exit_code != 0)
            return fail(step::mkdir_data, "cannot create data folder: " + last_lines(r.err),
                        StagingFailed("", "", ""));
    }
    mark(rec, step::mkdir_data, true, has_data ? "created" : "skipped");
    store_.save(rec);
    hook(step::mkdir_data, rec);

    // (4) inputs, one after the other
    std::vector<TransferResult> results;
    try {
        results = agent_.stage_in(plan);
    } catch (const Error& ex) {
        return fail(step::stage_in, ex.what(), StagingFailed("", "", ""));
    }
    rec.staging_ledger.insert(rec.staging_ledger.end(), results.begin(), results.end());
    for (const auto& res : results) {
        log += "stage-in " + res.task.endpoint.location + ": " + std::string(to_string(res.status)) +
               (res.detail.empty() ? "" : " (" + res.detail + ")") + "\n";
    }
    if (!results.empty() && results.back().status != TransferStatus::ok)
        return fail(step::stage_in, results.back().detail, StagingFailed("", "", ""));
    try {
        for (const auto& res : results) {
            auto rel = res.task.local_path.lexically_relative(local).generic_string();
            auto remote = rec.workdir + "/" + rel;
            auto parent = fs::path(remote).parent_path().generic_string();
            if (parent != rec.workdir + "/" + std::string(kDataFolderName))
                run("mkdir -p " + shell_quote(parent));
            session.put(res.task.local_path, remote);
        }
    } catch (const SessionLost&) {
        throw;
    } catch (const Error& ex) {
        return fail(step::stage_in, ex.what(), StagingFailed("", "", ""));
    }
    mark(rec, step::stage_in);
    store_.save(rec);
    hook(step::stage_in, rec);

    // (5) batch file
    const std::string remote_script = rec.workdir + "/easey-job.sh";
    try {
        BatchScript script = render_batch(rec.config, profile,
                                          JobRefs{rec.id.str(), rec.workdir, rec.stdout_path, rec.stderr_path});
        fs::create_directories(local);
        auto local_script = local / "easey-job.sh";
        {
            std::ofstream out(local_script, std::ios::binary | std::ios::trunc);
            out << script.full_text;
            if (!out)
                throw Error("cannot write " + local_script.string());
        }
        session.put(local_script, remote_script);
    } catch (const SessionLost&) {
        throw;
    } catch (const Error& ex) {
        return fail(step::render, ex.what(), SubmitFailed("", "", ""));
    }
    mark(rec, step::render);
    store_.save(rec);
    hook(step::render, rec);

    // (6) hand it to the scheduler
    auto r = run(dialect::submit_command(session.dialect(), remote_script));
    auto sched_id = r.exit_code == 0 ? dialect::parse_submit(session.dialect(), r.out) : std::nullopt;
    if (!sched_id)
        return fail(step::submit,
                    "scheduler refused the job (exit " + std::to_string(r.exit_code) + "): " +
                        std::string(last_lines(r.err.empty() ? r.out : r.err)),
                    SubmitFailed("", "", ""));
    hook(step::submit, rec);

    // (7) remember the scheduler id
    rec.scheduler_job_id = *sched_id;
    rec.submitted_at = now_iso();
    mark(rec, step::submit, true, *sched_id);
    advance(rec, JobState::submitted);
    advance(rec, JobState::pending);
    mark(rec, step::record);
    store_.save(rec);
    hook(step::record, rec);
    return rec;
}

JobRecord Engine::recover(const JobId& id, ClusterSession& session) {
    auto rec = load_or_throw(id);
    if (rec.scheduler_job_id || is_terminal(rec.state))
        return rec;

    std::optional<std::string> found;
    for (const auto& cmd : dialect::lookup_commands(session.dialect())) {
        auto r = session.exec(cmd);
        if (r.exit_code != 0)
            continue;
        found = dialect::parse_lookup(session.dialect(), r.out, job_tag(rec.id.str()));
        if (found)
            break;
    }
    if (found) {
        rec.scheduler_job_id = *found;
        rec.submitted_at = now_iso();
        if (!rec.mark(step::submit))
            mark(rec, step::submit, true, *found + " (recovered)");
        advance(rec, JobState::staging);
        advance(rec, JobState::submitted);
        advance(rec, JobState::pending);
    } else {
        rec.failed_step = rec.steps.empty() ? std::string(step::created) : rec.steps.back().step;
        rec.failure = "interrupted before submission";
        advance(rec, JobState::failed);
    }
    store_.save(rec);
    return rec;
}

std::string Engine::tail(ClusterSession& session, const std::string& path) {
    if (path.empty())
        return {};
    auto r = session.exec("tail -c " + std::to_string(options_.excerpt_bytes) + " " + shell_quote(path) +
                          " 2>/dev/null");
    return r.exit_code == 0 ? r.out : std::string();
}

StatusReport Engine::poll_status(const JobId& id, ClusterSession& session) {
    auto rec = load_or_throw(id);
    bool owned;
    {
        std::lock_guard lock(inflight_mu_);
        owned = inflight_.count(id) > 0;
    }
    try {
        if (!owned && !rec.scheduler_job_id && !is_terminal(rec.state))
            rec = recover(id, session);

        if (rec.scheduler_job_id && !is_terminal(rec.state)) {
            std::optional<JobState> observed;
            for (const auto& cmd : dialect::status_commands(session.dialect(), *rec.scheduler_job_id)) {
                auto r = session.exec(cmd);
                if (r.exit_code != 0)
                    continue;
                observed = dialect::parse_status(session.dialect(), r.out);
                if (observed)
                    break;
            }
            if (observed) {
                if (*observed == JobState::failed) {
                    advance(rec, JobState::failed);
                } else {
                    auto want = path_rank(*observed);
                    while (path_rank(rec.state) && want && *path_rank(rec.state) < *want) {
                        auto next = static_cast<JobState>(static_cast<int>(rec.state) + 1);
                        advance(rec, next);
                    }
                }
            }
        }
        StatusReport out;
        if (rec.state != JobState::created && rec.state != JobState::staging) {
            out.stdout_excerpt = tail(session, rec.stdout_path);
            out.stderr_excerpt = tail(session, rec.stderr_path);
        }
        rec.stale = false;
        store_.save(rec);
        out.state = rec.state;
        return out;
    } catch (const SessionLost&) {
        rec.stale = true;
        store_.save(rec);
        throw;
    }
}

std::vector<TransferResult> Engine::finalize(const JobId& id, ClusterSession& session) {
    return finalize(id, session, agent_);
}

std::vector<TransferResult> Engine::finalize(const JobId& id, ClusterSession& session,
                                             const TransferAgent& agent) {
    auto rec = load_or_throw(id);
    if (!is_terminal(rec.state))
        throw NotTerminal("job " + id.str() + " is " + std::string(to_string(rec.state)));

    const fs::path local = local_dir(id);
    std::error_code ec;
    fs::create_directories(local, ec);
    for (const auto& p : {rec.stdout_path, rec.stderr_path}) {
        if (p.empty() || !rec.scheduler_job_id)
            continue;
        try {
            session.get(p, local / fs::path(p).filename());
        } catch (const SessionLost&) {
            throw;
        } catch (const Error&) {
            // the job may have died before writing a log
        }
    }
    if (rec.state != JobState::finished || !rec.config.data || rec.config.data->output.empty())
        return {};

    const fs::path data_dir = local / kDataFolderName;
    fs::create_directories(data_dir, ec);
    for (const auto& out : rec.config.data->output) {
        auto name = fs::path(local_name_for(out)).filename();
        if (name.empty())
            continue;
        fs::remove(data_dir / name, ec);
        try {
            session.get(rec.workdir + "/" + std::string(kDataFolderName) + "/" + name.string(), data_dir / name);
        } catch (const SessionLost&) {
            throw;
        } catch (const Error&) {
            // reported as missing by stage_out
        }
    }
    auto results = agent.stage_out(*rec.config.data, local);
    rec.staging_ledger.insert(rec.staging_ledger.end(), results.begin(), results.end());
    store_.save(rec);
    return results;
}

} // namespace easey
