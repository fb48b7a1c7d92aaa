#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dras {

/// Broad failure classes. The CLI maps each class to its own exit code.
enum class ErrorClass {
    Input,        // malformed data, shape mismatch, identity violations
    Infeasible,   // zero structure rules out any solution
    Numerical,    // singular systems
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what)
        : std::runtime_error(what), class_(cls) {}

    ErrorClass error_class() const noexcept { return class_; }

private:
    ErrorClass class_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error(ErrorClass::Input, what) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& what) : Error(ErrorClass::Input, what) {}
};

class IndexOutOfRange : public Error {
public:
    explicit IndexOutOfRange(const std::string& what) : Error(ErrorClass::Input, what) {}
};

class NegativeValue : public Error {
public:
    explicit NegativeValue(const std::string& what) : Error(ErrorClass::Input, what) {}
};

class IncompatibleMargins : public Error {
public:
    explicit IncompatibleMargins(const std::string& what) : Error(ErrorClass::Input, what) {}
};

/// A fiber sums to zero while its target margin is positive.
class ZeroFiberPositiveMargin : public Error {
public:
    ZeroFiberPositiveMargin(std::size_t dimension, std::size_t margin_cell, double target,
                            const std::string& what)
        : Error(ErrorClass::Infeasible, what),
          dimension_(dimension), margin_cell_(margin_cell), target_(target) {}

    std::size_t dimension() const noexcept { return dimension_; }
    /// Flat row-major offset into the margin tensor of that dimension.
    std::size_t margin_cell() const noexcept { return margin_cell_; }
    double target() const noexcept { return target_; }

private:
    std::size_t dimension_;
    std::size_t margin_cell_;
    double target_;
};

class ZeroDenominator : public Error {
public:
    explicit ZeroDenominator(const std::string& what) : Error(ErrorClass::Input, what) {}
};

class SingularMatrix : public Error {
public:
    explicit SingularMatrix(const std::string& what) : Error(ErrorClass::Numerical, what) {}
};

/// Accounting identity of an input-output table broken beyond tolerance.
class IdentityViolation : public Error {
public:
    IdentityViolation(std::size_t industry, double lhs, double rhs, const std::string& what)
        : Error(ErrorClass::Input, what), industry_(industry), lhs_(lhs), rhs_(rhs) {}

    std::size_t industry() const noexcept { return industry_; }
    double lhs() const noexcept { return lhs_; }
    double rhs() const noexcept { return rhs_; }

private:
    std::size_t industry_;
    double lhs_;
    double rhs_;
};

/// Malformed file content. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& message)
        : Error(ErrorClass::Input, format(file, line, message)),
          file_(std::move(file)), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& file, std::size_t line,
                              const std::string& message) {
        std::string out = file;
        if (line > 0) out += ":" + std::to_string(line);
        if (!out.empty()) out += ": ";
        return out + message;
    }

    std::string file_;
    std::size_t line_;
};

class MissingCell : public ParseError {
public:
    using ParseError::ParseError;
};

class DuplicateCell : public ParseError {
public:
    using ParseError::ParseError;
};

}  // namespace dras
