#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace easey {

/// Base of every error the orchestrator raises. `kind()` is the stable
/// machine-readable class name used by the CLI exit-code table.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual std::string_view kind() const noexcept { return "Error"; }
};

#define EASEY_DECLARE_ERROR(Name)                                             \
    class Name : public Error {                                               \
    public:                                                                   \
        using Error::Error;                                                   \
        std::string_view kind() const noexcept override { return #Name; }     \
    }

// config
EASEY_DECLARE_ERROR(SyntaxError);
EASEY_DECLARE_ERROR(SchemaError);
EASEY_DECLARE_ERROR(ValueError);

// targets
EASEY_DECLARE_ERROR(UnknownTarget);
EASEY_DECLARE_ERROR(DuplicateTarget);
EASEY_DECLARE_ERROR(ProfileParseError);

// imageprep
EASEY_DECLARE_ERROR(MultipleMarkers);
EASEY_DECLARE_ERROR(MisplacedMarker);
EASEY_DECLARE_ERROR(BuilderUnavailable);
EASEY_DECLARE_ERROR(PackFailed);
EASEY_DECLARE_ERROR(OutDirUnwritable);

// staging
EASEY_DECLARE_ERROR(PathEscape);
EASEY_DECLARE_ERROR(ProtocolUnsupported);
EASEY_DECLARE_ERROR(AuthFailed);

// batchgen
EASEY_DECLARE_ERROR(UnsupportedScheduler);
EASEY_DECLARE_ERROR(EmptyExecution);

// cluster
EASEY_DECLARE_ERROR(SessionLost);
EASEY_DECLARE_ERROR(ScriptRejected);

// engine
EASEY_DECLARE_ERROR(UnknownJob);
EASEY_DECLARE_ERROR(NotTerminal);
EASEY_DECLARE_ERROR(StoreCorrupt);

// metrics
EASEY_DECLARE_ERROR(NonPositiveFom);
EASEY_DECLARE_ERROR(ParseError);

#undef EASEY_DECLARE_ERROR

/// Image build failure. Carries the builder log.
class BuildFailed : public Error {
public:
    BuildFailed(const std::string& what, std::string log)
        : Error(what), log_(std::move(log)) {}
    std::string_view kind() const noexcept override { return "BuildFailed"; }
    const std::string& log() const noexcept { return log_; }

private:
    std::string log_;
};

/// Failure of one submission step. Carries the easey job id so the caller
/// can load the persisted (failed) record, plus the step log.
class StepError : public Error {
public:
    StepError(const std::string& what, std::string job_id, std::string log)
        : Error(what), job_id_(std::move(job_id)), log_(std::move(log)) {}
    const std::string& job_id() const noexcept { return job_id_; }
    const std::string& log() const noexcept { return log_; }

private:
    std::string job_id_;
    std::string log_;
};

class StagingFailed : public StepError {
public:
    using StepError::StepError;
    std::string_view kind() const noexcept override { return "StagingFailed"; }
};

class ExtractFailed : public StepError {
public:
    using StepError::StepError;
    std::string_view kind() const noexcept override { return "ExtractFailed"; }
};

class SubmitFailed : public StepError {
public:
    using StepError::StepError;
    std::string_view kind() const noexcept override { return "SubmitFailed"; }
};

} // namespace easey
