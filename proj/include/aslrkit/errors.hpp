#pragma once

#include <stdexcept>
#include <string>

namespace aslrkit {

// Error taxonomy shared by all modules. Everything derives from Error so
// callers can catch the whole family at the CLI boundary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedName : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct InvariantError : Error { using Error::Error; };
struct AlignmentError : Error { using Error::Error; };
struct PolicyError : Error { using Error::Error; };
struct UnknownObject : Error { using Error::Error; };
struct EmptySeries : Error { using Error::Error; };
struct AlphabetTooSmall : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct DegenerateRange : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct AllocationFailure : Error { using Error::Error; };
struct SpawnFailure : Error { using Error::Error; };

} // namespace aslrkit
