#include "easey/staging.hpp"

#include "easey/process.hpp"

#include <curl/curl.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

namespace easey {

namespace fs = std::filesystem;

std::string_view to_string(Direction d) {
    return d == Direction::in ? "in" : "out";
}

std::string_view to_string(TransferStatus s) {
    return s == TransferStatus::ok ? "ok" : "failed";
}

namespace {

bool is_url(std::string_view loc) {
    return loc.find("://") != std::string_view::npos;
}

// "[user@]host:path" with no slash before the colon.
bool is_remote_host_path(std::string_view loc) {
    if (loc.empty() || loc.front() == '/' || loc.front() == '.' || is_url(loc))
        return false;
    auto colon = loc.find(':');
    auto slash = loc.find('/');
    return colon != std::string_view::npos && colon > 0 &&
           (slash == std::string_view::npos || colon < slash);
}

std::string_view url_path(std::string_view url) {
    auto scheme_end = url.find("://");
    auto rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    if (slash == std::string_view::npos)
        return {};
    rest = rest.substr(slash);
    auto cut = rest.find_first_of("?#");
    return rest.substr(0, cut);
}

std::string last_component(std::string_view path) {
    auto slash = path.rfind('/');
    return std::string(slash == std::string_view::npos ? path : path.substr(slash + 1));
}

std::string url_scheme(std::string_view url) {
    auto end = url.find("://");
    std::string s(url.substr(0, end));
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

fs::path checked_local_path(const fs::path& data_dir, const std::string& name) {
    if (name.empty() || name == "." || name == "..")
        throw PathEscape("transfer has no usable file name ('" + name + "')");
    fs::path rel = fs::path(name).lexically_normal();
    if (rel.is_absolute() || rel.empty() || *rel.begin() == ".." || rel == ".")
        throw PathEscape("'" + name + "' would leave the data folder");
    return data_dir / rel;
}

std::uint64_t file_size_or_zero(const fs::path& p) {
    std::error_code ec;
    auto n = fs::file_size(p, ec);
    return ec ? 0 : n;
}

} // namespace

std::string local_name_for(const TransferEndpoint& endpoint) {
    const auto& loc = endpoint.location;
    if (is_url(loc))
        return last_component(url_path(loc));
    if (is_remote_host_path(loc))
        return last_component(std::string_view(loc).substr(loc.find(':') + 1));
    if (!loc.empty() && loc.front() == '/')
        return last_component(loc);
    return loc;
}

std::vector<TransferTask> plan_stage_in(const std::optional<DataSpec>& data,
                                        const fs::path& job_workdir) {
    std::vector<TransferTask> plan;
    if (!data || (data->input.empty() && data->output.empty()))
        return plan;

    const fs::path data_dir = job_workdir / kDataFolderName;
    for (std::size_t i = 0; i < data->input.size(); ++i) {
        TransferTask task;
        task.direction = Direction::in;
        task.endpoint = data->input[i];
        task.local_path = checked_local_path(data_dir, local_name_for(data->input[i]));
        task.order_index = static_cast<int>(i);
        plan.push_back(std::move(task));
    }
    for (const auto& out : data->output)
        checked_local_path(data_dir, last_component(local_name_for(out)));

    std::error_code ec;
    fs::create_directories(data_dir, ec);
    if (ec)
        throw Error("cannot create data folder " + data_dir.string() + ": " + ec.message());
    return plan;
}

std::optional<fs::path> CredentialStore::resolve(const TransferEndpoint& endpoint) const {
    if (endpoint.auth.empty() || endpoint.auth == "none") {
        if (!endpoint.auth.empty())
            return std::nullopt;
        return default_key_;
    }
    fs::path key(endpoint.auth);
    std::ifstream probe(key);
    if (!probe)
        throw AuthFailed("credential key '" + endpoint.auth + "' is not readable");
    return key;
}

// ---------------------------------------------------------------------------

std::vector<std::string> ScpTransport::command(const std::string& from, const std::string& to,
                                               const std::optional<fs::path>& key) {
    std::vector<std::string> argv = {"scp", "-B", "-q", "-o", "StrictHostKeyChecking=accept-new"};
    if (key) {
        argv.push_back("-i");
        argv.push_back(key->string());
    }
    argv.push_back(from);
    argv.push_back(to);
    return argv;
}

namespace {

std::string remote_spec(const TransferEndpoint& ep) {
    if (!ep.user.empty() && ep.location.find('@') == std::string::npos)
        return ep.user + "@" + ep.location;
    return ep.location;
}

void local_copy(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    if (!fs::is_regular_file(from, ec))
        throw Error("source " + from.string() + " does not exist");
    if (to.has_parent_path())
        fs::create_directories(to.parent_path(), ec);
    fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
    if (ec)
        throw Error("copy " + from.string() + " -> " + to.string() + ": " + ec.message());
}

} // namespace

std::uint64_t ScpTransport::fetch(const TransferEndpoint& src, const fs::path& dest,
                                  const std::optional<fs::path>& key) {
    std::error_code ec;
    if (dest.has_parent_path())
        fs::create_directories(dest.parent_path(), ec);
    if (is_remote_host_path(src.location)) {
        auto res = run_process(command(remote_spec(src), dest.string(), key));
        if (res.exit_code != 0)
            throw Error("scp exited with " + std::to_string(res.exit_code) + ": " + res.err);
    } else {
        local_copy(src.location, dest);
    }
    return file_size_or_zero(dest);
}

std::uint64_t ScpTransport::push(const fs::path& src, const TransferEndpoint& dest,
                                 const std::optional<fs::path>& key) {
    if (is_remote_host_path(dest.location)) {
        auto res = run_process(command(src.string(), remote_spec(dest), key));
        if (res.exit_code != 0)
            throw Error("scp exited with " + std::to_string(res.exit_code) + ": " + res.err);
    } else {
        local_copy(src, dest.location);
    }
    return file_size_or_zero(src);
}

// ---------------------------------------------------------------------------

namespace {

void curl_global() {
    static std::once_flag once;
    std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

struct CurlDeleter {
    void operator()(CURL* c) const { curl_easy_cleanup(c); }
};
struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};

std::unique_ptr<CURL, CurlDeleter> curl_handle(const TransferEndpoint& ep,
                                               const std::optional<fs::path>& key) {
    if (!is_url(ep.location))
        throw Error("'" + ep.location + "' is not a URL");
    auto scheme = url_scheme(ep.location);
    bool ok_scheme = ep.protocol == Protocol::https ? (scheme == "https" || scheme == "http")
                                                    : (scheme == "ftp" || scheme == "ftps");
    if (!ok_scheme)
        throw Error("URL scheme '" + scheme + "' does not match protocol " +
                    std::string(to_string(ep.protocol)));
    curl_global();
    std::unique_ptr<CURL, CurlDeleter> c(curl_easy_init());
    if (!c)
        throw Error("curl_easy_init failed");
    curl_easy_setopt(c.get(), CURLOPT_URL, ep.location.c_str());
    curl_easy_setopt(c.get(), CURLOPT_NOSIGNAL, 1L);
    curl_easy_setopt(c.get(), CURLOPT_CONNECTTIMEOUT, 30L);
    curl_easy_setopt(c.get(), CURLOPT_FOLLOWLOCATION, 1L);
    if (!ep.user.empty())
        curl_easy_setopt(c.get(), CURLOPT_USERNAME, ep.user.c_str());
    if (key) {
        curl_easy_setopt(c.get(), CURLOPT_SSLKEY, key->c_str());
        curl_easy_setopt(c.get(), CURLOPT_SSLCERT, key->c_str());
    }
    return c;
}

void check_curl(CURL* c, CURLcode rc, const char* verb) {
    long status = 0;
    curl_easy_getinfo(c, CURLINFO_RESPONSE_CODE, &status);
    if (rc != CURLE_OK) {
        std::string msg = std::string(verb) + " failed: " + curl_easy_strerror(rc);
        if (status > 0)
            msg += " (status " + std::to_string(status) + ")";
        throw Error(msg);
    }
    char* scheme = nullptr;
    curl_easy_getinfo(c, CURLINFO_EFFECTIVE_URL, &scheme);
    if (scheme && std::string_view(scheme).rfind("http", 0) == 0 && status >= 400)
        throw Error(std::string(verb) + " failed: HTTP status " + std::to_string(status));
}

std::size_t write_to_file(char* ptr, std::size_t size, std::size_t n, void* file) {
    return std::fwrite(ptr, size, n, static_cast<std::FILE*>(file)) * size;
}

std::size_t read_from_file(char* ptr, std::size_t size, std::size_t n, void* file) {
    return std::fread(ptr, size, n, static_cast<std::FILE*>(file)) * size;
}

} // namespace

std::uint64_t CurlTransport::fetch(const TransferEndpoint& src, const fs::path& dest,
                                   const std::optional<fs::path>& key) {
    auto c = curl_handle(src, key);
    std::error_code ec;
    if (dest.has_parent_path())
        fs::create_directories(dest.parent_path(), ec);
    fs::path partial = dest.string() + ".part";
    CURLcode rc;
    {
        std::unique_ptr<std::FILE, FileCloser> f(std::fopen(partial.c_str(), "wb"));
        if (!f)
            throw Error("cannot write " + partial.string());
        curl_easy_setopt(c.get(), CURLOPT_WRITEFUNCTION, write_to_file);
        curl_easy_setopt(c.get(), CURLOPT_WRITEDATA, f.get());
        rc = curl_easy_perform(c.get());
    }
    try {
        check_curl(c.get(), rc, "GET");
    } catch (...) {
        fs::remove(partial, ec);
        throw;
    }
    fs::rename(partial, dest, ec);
    if (ec)
        throw Error("cannot move download into place: " + ec.message());
    return file_size_or_zero(dest);
}

std::uint64_t CurlTransport::push(const fs::path& src, const TransferEndpoint& dest,
                                  const std::optional<fs::path>& key) {
    auto c = curl_handle(dest, key);
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(src.c_str(), "rb"));
    if (!f)
        throw Error("cannot read " + src.string());
    auto size = file_size_or_zero(src);
    curl_easy_setopt(c.get(), CURLOPT_UPLOAD, 1L);
    curl_easy_setopt(c.get(), CURLOPT_READFUNCTION, read_from_file);
    curl_easy_setopt(c.get(), CURLOPT_READDATA, f.get());
    curl_easy_setopt(c.get(), CURLOPT_INFILESIZE_LARGE, static_cast<curl_off_t>(size));
    check_curl(c.get(), curl_easy_perform(c.get()), "PUT");
    return size;
}

// ---------------------------------------------------------------------------

TransferAgent::TransferAgent(CredentialStore creds, RetryPolicy retry)
    : creds_(std::move(creds)), retry_(retry) {
    auto scp = std::make_shared<ScpTransport>();
    auto curl = std::make_shared<CurlTransport>();
    transports_[Protocol::scp] = scp;
    transports_[Protocol::https] = curl;
    transports_[Protocol::ftp] = curl;
}

void TransferAgent::set_transport(Protocol protocol, std::shared_ptr<Transport> transport) {
    transports_[protocol] = std::move(transport);
}

TransferResult TransferAgent::execute(const TransferTask& task) const {
    const auto& ep = task.endpoint;
    auto it = transports_.find(ep.protocol);
    if (ep.protocol == Protocol::gridftp || it == transports_.end())
        throw ProtocolUnsupported(std::string(to_string(ep.protocol)) + " transfers are not supported");
    auto key = creds_.resolve(ep);

    TransferResult result;
    result.task = task;
    const auto started = std::chrono::steady_clock::now();
    const int attempts = std::max(1, retry_.attempts);
    auto backoff = retry_.base_backoff;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        result.attempts = attempt;
        try {
            result.bytes = task.direction == Direction::in
                               ? it->second->fetch(ep, task.local_path, key)
                               : it->second->push(task.local_path, ep, key);
            result.status = TransferStatus::ok;
            result.detail.clear();
            break;
        } catch (const Error& ex) {
            result.detail = ex.what();
        }
        if (attempt < attempts && backoff.count() > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    result.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (result.status != TransferStatus::ok) {
        result.detail = ep.location + ": " + result.detail + " (after " +
                        std::to_string(result.attempts) + " attempts)";
        throw TransferFailed(std::move(result));
    }
    return result;
}

std::vector<TransferResult> TransferAgent::stage_in(const std::vector<TransferTask>& plan) const {
    std::vector<const TransferTask*> ordered;
    for (const auto& t : plan)
        ordered.push_back(&t);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto* a, const auto* b) { return a->order_index < b->order_index; });

    std::vector<TransferResult> results;
    for (const auto* task : ordered) {
        try {
            results.push_back(execute(*task));
        } catch (const TransferFailed& ex) {
            results.push_back(ex.result());
            break;
        } catch (const Error& ex) {
            TransferResult r;
            r.task = *task;
            r.detail = ex.what();
            results.push_back(std::move(r));
            break;
        }
    }
    return results;
}

std::vector<TransferResult> TransferAgent::stage_out(const DataSpec& data,
                                                     const fs::path& job_workdir) const {
    std::vector<TransferResult> results;
    const fs::path data_dir = job_workdir / kDataFolderName;
    for (std::size_t i = 0; i < data.output.size(); ++i) {
        TransferTask task;
        task.direction = Direction::out;
        task.endpoint = data.output[i];
        task.order_index = static_cast<int>(i);
        TransferResult r;
        try {
            task.local_path = checked_local_path(data_dir, last_component(local_name_for(task.endpoint)));
            r.task = task;
            std::error_code ec;
            if (!fs::is_regular_file(task.local_path, ec)) {
                r.detail = "output file not found in data folder";
                results.push_back(std::move(r));
                continue;
            }
            results.push_back(execute(task));
        } catch (const TransferFailed& ex) {
            results.push_back(ex.result());
        } catch (const Error& ex) {
            r.task = task;
            r.detail = ex.what();
            results.push_back(std::move(r));
        }
    }
    return results;
}

TransferResult execute_transfer(const TransferTask& task, const CredentialStore& creds,
                                RetryPolicy retry) {
    return TransferAgent(creds, retry).execute(task);
}

std::vector<TransferResult> stage_out(const DataSpec& data, const fs::path& job_workdir,
                                      const CredentialStore& creds, RetryPolicy retry) {
    return TransferAgent(creds, retry).stage_out(data, job_workdir);
}

} // namespace easey
