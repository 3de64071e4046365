#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace easey {

enum class Protocol { https, scp, ftp, gridftp };

std::string_view to_string(Protocol p);
std::optional<Protocol> protocol_from_string(std::string_view s);

/// One side of a stage-in or stage-out transfer. For inputs `location` is the
/// source, for outputs the destination. An empty `auth` means no credential.
struct TransferEndpoint {
    std::string location;
    Protocol protocol = Protocol::scp;
    std::string user;
    std::string auth;

    bool operator==(const TransferEndpoint&) const = default;
};

struct DataSpec {
    std::vector<TransferEndpoint> input;
    std::vector<TransferEndpoint> output;
    std::string mount; // absolute path inside the container

    bool operator==(const DataSpec&) const = default;
};

struct JobMeta {
    std::string name;
    std::string id; // assigned at submission; ignored on input
    std::string mail;

    bool operator==(const JobMeta&) const = default;
};

/// Wall-clock limit in HH:MM:SS form.
struct Clocktime {
    int hours = 0;
    int minutes = 0;
    int seconds = 0;

    /// Accepts exactly `H+:MM:SS` with at least two hour digits and
    /// minutes/seconds below 60.
    static std::optional<Clocktime> parse(std::string_view text);
    std::string str() const;
    long total_seconds() const { return hours * 3600L + minutes * 60L + seconds; }

    bool operator==(const Clocktime&) const = default;
};

struct DeploymentSpec {
    std::int64_t nodes = 1;
    std::optional<std::int64_t> ram_mb;
    std::int64_t cores_per_task = 1;
    std::int64_t tasks_per_node = 1;
    Clocktime clocktime;

    bool operator==(const DeploymentSpec&) const = default;
};

struct SerialStep {
    std::string command;
    bool operator==(const SerialStep&) const = default;
};

struct MpiStep {
    std::string command;
    std::int64_t mpi_tasks = 1;
    bool operator==(const MpiStep&) const = default;
};

using ExecutionStep = std::variant<SerialStep, MpiStep>;

struct ExecutionSpec {
    std::vector<ExecutionStep> steps;
    bool operator==(const ExecutionSpec&) const = default;
};

struct EaseyConfig {
    JobMeta job;
    std::optional<DataSpec> data;
    DeploymentSpec deployment;
    ExecutionSpec execution;

    bool operator==(const EaseyConfig&) const = default;
};

/// 16 lowercase hex characters.
class JobId {
public:
    JobId() = default;
    /// Throws ValueError unless `value` is 16 lowercase hex characters.
    explicit JobId(std::string value);

    static bool is_valid(std::string_view value);

    const std::string& str() const noexcept { return value_; }
    bool empty() const noexcept { return value_.empty(); }

    auto operator<=>(const JobId&) const = default;

private:
    std::string value_;
};

// ---------------------------------------------------------------------------
// Validation

enum class ErrorClass { syntax, schema, value, policy };
enum class Severity { error, warning };

enum class ViolationCode {
    SYNTAX_ERROR,
    // schema
    SECTION_MISSING,
    UNKNOWN_KEY,
    DUPLICATE_KEY,
    FIELD_MISSING,
    TYPE_MISMATCH,
    PROTOCOL_UNKNOWN,
    STEP_KIND_INVALID,
    // value
    NAME_EMPTY,
    MAIL_INVALID,
    INTEGER_INVALID,
    NODES_NONPOSITIVE,
    CORES_PER_TASK_NONPOSITIVE,
    TASKS_PER_NODE_NONPOSITIVE,
    RAM_INVALID,
    CLOCKTIME_INVALID,
    MPI_TASKS_NONPOSITIVE,
    COMMAND_EMPTY,
    EXECUTION_EMPTY,
    LOCATION_EMPTY,
    MOUNT_NOT_ABSOLUTE,
    // policy (reported by validate, never raised by the parser)
    PROTOCOL_UNSUPPORTED_GRIDFTP,
    NODES_MISMATCH,
};

std::string_view to_string(ViolationCode code);
ErrorClass error_class(ViolationCode code);
Severity severity(ViolationCode code);

struct Violation {
    ViolationCode code;
    std::string path; // JSON-pointer-like location, e.g. "/deployment/nodes"
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    /// No violations at all.
    bool empty() const noexcept { return violations.empty(); }
    /// No error-severity violations; warnings are allowed.
    bool submittable() const noexcept;
    bool has(ViolationCode code) const noexcept;
    std::size_t count(ViolationCode code) const noexcept;
};

// ---------------------------------------------------------------------------
// Parsing

struct ParseOptions {
    /// Accept the historical form: sections nested inside "job", an
    /// "execution" object with repeated "serial"/"mpi" keys (linearized in
    /// document order), trailing commas and brackets left open at the end.
    bool lax = false;
};

/// Result of a parse that records every problem instead of stopping at the
/// first one. `config` is present whenever the document was well-formed;
/// fields with problems hold defaults.
struct RelaxedParse {
    std::optional<EaseyConfig> config;
    std::vector<Violation> violations;
};

RelaxedParse parse_config_relaxed(std::string_view text, ParseOptions opts = {});

/// Throws SyntaxError, SchemaError or ValueError for the first parse-time
/// violation. Policy violations (gridftp, node mismatch) do not throw.
EaseyConfig parse_config(std::string_view text, ParseOptions opts = {});

/// Canonical JSON: keys sorted, no insignificant whitespace, UTF-8; empty
/// optional fields are omitted and `job.id` is never written.
std::string serialize_config(const EaseyConfig& cfg);

ValidationReport validate(const EaseyConfig& cfg);

/// First 16 hex chars of SHA-256(serialize_config(cfg) + timestamp).
JobId assign_job_id(const EaseyConfig& cfg, std::string_view timestamp);

} // namespace easey
