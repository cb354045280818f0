#pragma once

#include <stdexcept>
#include <string>

namespace planex {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define PLANEX_DEFINE_ERROR(Name)                                      \
    class Name : public Error {                                        \
    public:                                                            \
        using Error::Error;                                            \
        const char* kind() const noexcept override { return #Name; }   \
    }

// orchestrator
PLANEX_DEFINE_ERROR(PlanValidationError);
PLANEX_DEFINE_ERROR(EmptyPlanError);
PLANEX_DEFINE_ERROR(DeadlockError);
PLANEX_DEFINE_ERROR(NotAListError);
PLANEX_DEFINE_ERROR(UnknownSubtaskError);
PLANEX_DEFINE_ERROR(VariableCollisionError);
PLANEX_DEFINE_ERROR(ReplanBudgetExhausted);

// reasoner gateway
PLANEX_DEFINE_ERROR(SchemaViolationError);
PLANEX_DEFINE_ERROR(ScriptMissError);
PLANEX_DEFINE_ERROR(TransportError);
PLANEX_DEFINE_ERROR(ConfigError);

// registry
PLANEX_DEFINE_ERROR(SpecParseError);
PLANEX_DEFINE_ERROR(DuplicateAppError);
PLANEX_DEFINE_ERROR(UnresolvableRefError);
PLANEX_DEFINE_ERROR(EmptyRegistryError);
PLANEX_DEFINE_ERROR(UnknownToolError);

// api sub-agent
PLANEX_DEFINE_ERROR(NoCandidateError);
PLANEX_DEFINE_ERROR(ProgramParseError);
PLANEX_DEFINE_ERROR(StaticCheckError);
PLANEX_DEFINE_ERROR(StepCapExceeded);

// browser sub-agent
PLANEX_DEFINE_ERROR(AmbiguousTargetError);
PLANEX_DEFINE_ERROR(TargetNotFoundError);
PLANEX_DEFINE_ERROR(NotOnPageError);
PLANEX_DEFINE_ERROR(SessionClosedError);
PLANEX_DEFINE_ERROR(FixtureError);

// context enrichment
PLANEX_DEFINE_ERROR(EmptyUtteranceError);

// evaluation
PLANEX_DEFINE_ERROR(ManifestTooSmallError);
PLANEX_DEFINE_ERROR(EmptyRunError);
PLANEX_DEFINE_ERROR(SequenceGapError);
PLANEX_DEFINE_ERROR(UnknownTrajectoryError);
PLANEX_DEFINE_ERROR(UnknownTaskError);
PLANEX_DEFINE_ERROR(UnknownRunError);

#undef PLANEX_DEFINE_ERROR

class ArgValidationError : public Error {
public:
    ArgValidationError(std::string param, const std::string& what)
        : Error(what), param_(std::move(param)) {}
    const char* kind() const noexcept override { return "ArgValidationError"; }
    const std::string& param() const noexcept { return param_; }

private:
    std::string param_;
};

class ActionFailedError : public Error {
public:
    ActionFailedError(std::string feedback, int attempts)
        : Error("action failed after " + std::to_string(attempts) + " attempts: " + feedback),
          feedback_(std::move(feedback)), attempts_(attempts) {}
    const char* kind() const noexcept override { return "ActionFailedError"; }
    const std::string& feedback() const noexcept { return feedback_; }
    int attempts() const noexcept { return attempts_; }

private:
    std::string feedback_;
    int attempts_;
};

}  // namespace planex
