#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdfog {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// core-model
class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class CycleError : public ValidationError {
public:
    CycleError(std::size_t vertex, const std::string& name)
        : ValidationError("task graph has a cycle through vertex " + std::to_string(vertex) +
                          " (" + name + ")"),
          vertex_(vertex) {}

    std::size_t vertex() const { return vertex_; }

private:
    std::size_t vertex_;
};

class DanglingEdgeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// som
class DuplicateRegistration : public Error {
public:
    using Error::Error;
};

class UnknownService : public Error {
public:
    using Error::Error;
};

class NoFlowToSubscriber : public Error {
public:
    using Error::Error;
};

// discovery
class UnknownOrigin : public Error {
public:
    using Error::Error;
};

class NoSuchAppTemplate : public Error {
public:
    using Error::Error;
};

class NoFeasibleNode : public Error {
public:
    using Error::Error;
};

// controller
class NoPath : public Error {
public:
    using Error::Error;
};

class LatencyBudgetExceeded : public Error {
public:
    using Error::Error;
};

class StaleReservation : public Error {
public:
    using Error::Error;
};

class AgentFailure : public Error {
public:
    using Error::Error;
};

class UnknownFlow : public Error {
public:
    using Error::Error;
};

// Thrown with the original error nested (std::rethrow_if_nested).
class OrchestrationError : public Error {
public:
    enum class Stage { Discovery, Creation, Installation };

    OrchestrationError(Stage stage, std::size_t index, const std::string& what)
        : Error(what), stage_(stage), index_(index) {}

    Stage stage() const { return stage_; }
    // Vertex index for Discovery, edge index otherwise.
    std::size_t index() const { return index_; }

private:
    Stage stage_;
    std::size_t index_;
};

// netsim
class FlowNotInstalled : public Error {
public:
    using Error::Error;
};

// scenarios
class ScenarioFailure : public Error {
public:
    using Error::Error;
};

}  // namespace sdfog
