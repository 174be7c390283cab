#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seqdi {

// Base for every failure raised by the library. Callers that only need a
// message can catch this; the derived types name the failure mode.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// numerics
class NotPositiveDefinite : public Error { public: using Error::Error; };
class Separation : public Error { public: using Error::Error; };
class NoConvergence : public Error { public: using Error::Error; };

// population
class InvalidParams : public Error { public: using Error::Error; };
class OutOfBracket : public Error { public: using Error::Error; };
class DegeneratePartition : public Error { public: using Error::Error; };
class MissingColumn : public Error { public: using Error::Error; };

class ParseError : public Error {
public:
    ParseError(std::size_t row, std::size_t column, const std::string& what)
        : Error("parse error at row " + std::to_string(row) + ", column " +
                std::to_string(column) + ": " + what),
          row_(row), column_(column) {}

    // 1-based data row (header excluded) and 1-based column.
    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

// pilot
class Unidentifiable : public Error { public: using Error::Error; };

// design
class Infeasible : public Error { public: using Error::Error; };
class NonpositiveSize : public Error { public: using Error::Error; };
class EmptySample : public Error { public: using Error::Error; };

// homogeneity
class SingularVariance : public Error { public: using Error::Error; };

// harness
class DegenerateMetrics : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

}  // namespace seqdi
