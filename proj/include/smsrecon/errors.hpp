#ifndef SMSRECON_ERRORS_HPP
#define SMSRECON_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace smsrecon {

/// Shape or dimensionality mismatch between arrays.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid argument value (out-of-range index, bad parameter).
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input that is structurally valid but numerically degenerate (all-zero reference, empty support).
class DegenerateInputError : public std::runtime_error {
public:
    explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values or a diverging iteration; carries the step index when known.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, long step = -1)
        : std::runtime_error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

class DivergenceError : public NumericalError {
public:
    explicit DivergenceError(const std::string& what, long step = -1) : NumericalError(what, step) {}
};

class TrainingDivergedError : public NumericalError {
public:
    explicit TrainingDivergedError(const std::string& what, long step = -1) : NumericalError(what, step) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace smsrecon

#endif
