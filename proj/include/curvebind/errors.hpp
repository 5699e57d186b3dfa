#pragma once

#include <stdexcept>
#include <string>

namespace curvebind {

// Exit codes used by the CLI: 0 success, 2 validation, 3 numeric, 4 I/O.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input document (bad JSON, bad PDB record, ragged table row).
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally well-formed input that violates an invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Tensor/parameter shape disagreement.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Divergence, infeasible transport, non-finite loss.
class NumericError : public Error {
public:
    using Error::Error;
};

// Filesystem and stream failures.
class IoError : public Error {
public:
    using Error::Error;
};

// Lookup of a residue-embedding key that is not in the table.
class MissingEmbeddingError : public Error {
public:
    using Error::Error;
};

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e)) return 3;
    if (dynamic_cast<const IoError*>(&e)) return 4;
    return 2;
}

} // namespace curvebind
