#pragma once

#include "easey/config.hpp"
#include "easey/error.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace easey {

enum class Direction { in, out };
enum class TransferStatus { ok, failed };

std::string_view to_string(Direction d);
std::string_view to_string(TransferStatus s);

struct TransferTask {
    Direction direction = Direction::in;
    TransferEndpoint endpoint;
    std::filesystem::path local_path; // inside the job data folder
    int order_index = 0;
};

struct TransferResult {
    TransferTask task;
    std::uint64_t bytes = 0;
    double duration = 0; // seconds
    TransferStatus status = TransferStatus::failed;
    std::string detail;
    int attempts = 0;
};

/// A transfer that failed after all retries. Carries the failed result.
class TransferFailed : public Error {
public:
    explicit TransferFailed(TransferResult result)
        : Error(result.detail), result_(std::move(result)) {}
    std::string_view kind() const noexcept override { return "TransferFailed"; }
    const TransferResult& result() const noexcept { return result_; }

private:
    TransferResult result_;
};

inline constexpr std::string_view kDataFolderName = "data";

/// Name of the file a transfer location maps to inside the data folder.
/// URLs and remote `host:path` locations use the last path component;
/// relative host paths keep their relative form.
std::string local_name_for(const TransferEndpoint& endpoint);

/// One input task per `data.input` entry, in config order. Creates
/// `<job_workdir>/data` iff the data section has at least one input or output entry.
/// Throws PathEscape when a local path would leave the data folder.
std::vector<TransferTask> plan_stage_in(const std::optional<DataSpec>& data,
                                        const std::filesystem::path& job_workdir);

/// Resolves `auth` references to key files. References are paths; an empty
/// reference falls back to the default key, if any.
class CredentialStore {
public:
    CredentialStore() = default;
    explicit CredentialStore(std::optional<std::filesystem::path> default_key)
        : default_key_(std::move(default_key)) {}

    /// Returns the key file for `endpoint`, or nullopt when no credential
    /// applies. Throws AuthFailed when a referenced key is unreadable.
    std::optional<std::filesystem::path> resolve(const TransferEndpoint& endpoint) const;

private:
    std::optional<std::filesystem::path> default_key_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_backoff{1000}; // doubles after each failure
};

/// Moves bytes for one protocol. Implementations throw easey::Error on
/// failure; the agent decides about retries.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::uint64_t fetch(const TransferEndpoint& src, const std::filesystem::path& dest,
                                const std::optional<std::filesystem::path>& key) = 0;
    virtual std::uint64_t push(const std::filesystem::path& src, const TransferEndpoint& dest,
                               const std::optional<std::filesystem::path>& key) = 0;
};

/// scp semantics: `[user@]host:path` goes through the system scp client with
/// the key file; a plain path is a local copy.
class ScpTransport final : public Transport {
public:
    std::uint64_t fetch(const TransferEndpoint& src, const std::filesystem::path& dest,
                        const std::optional<std::filesystem::path>& key) override;
    std::uint64_t push(const std::filesystem::path& src, const TransferEndpoint& dest,
                       const std::optional<std::filesystem::path>& key) override;

    /// argv used for a remote copy; exposed for tests.
    static std::vector<std::string> command(const std::string& from, const std::string& to,
                                            const std::optional<std::filesystem::path>& key);
};

/// HTTP(S) GET/PUT and FTP RETR/STOR through libcurl. Key files are used as
/// TLS client keys.
class CurlTransport final : public Transport {
public:
    std::uint64_t fetch(const TransferEndpoint& src, const std::filesystem::path& dest,
                        const std::optional<std::filesystem::path>& key) override;
    std::uint64_t push(const std::filesystem::path& src, const TransferEndpoint& dest,
                       const std::optional<std::filesystem::path>& key) override;
};

/// Executes transfer tasks with credentials and the retry policy.
class TransferAgent {
public:
    explicit TransferAgent(CredentialStore creds = {}, RetryPolicy retry = {});

    void set_transport(Protocol protocol, std::shared_ptr<Transport> transport);

    /// Throws ProtocolUnsupported, AuthFailed, or TransferFailed after the
    /// last attempt.
    TransferResult execute(const TransferTask& task) const;

    /// Runs input tasks in order_index order and stops at the first failure.
    /// The failed entry is the last element of the returned list.
    std::vector<TransferResult> stage_in(const std::vector<TransferTask>& plan) const;

    /// Pushes every output entry from `<job_workdir>/data`. Never throws for a
    /// single entry; failures are reported per result.
    std::vector<TransferResult> stage_out(const DataSpec& data,
                                          const std::filesystem::path& job_workdir) const;

private:
    CredentialStore creds_;
    RetryPolicy retry_;
    std::map<Protocol, std::shared_ptr<Transport>> transports_;
};

TransferResult execute_transfer(const TransferTask& task, const CredentialStore& creds,
                                RetryPolicy retry = {});

std::vector<TransferResult> stage_out(const DataSpec& data, const std::filesystem::path& job_workdir,
                                      const CredentialStore& creds, RetryPolicy retry = {});

} // namespace easey
