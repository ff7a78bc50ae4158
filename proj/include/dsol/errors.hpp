#pragma once

#include <stdexcept>
#include <string>

namespace dsol {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

// Parameter outside the sampled range of a worldline or table.
struct RangeError : Error {
    using Error::Error;
};

// Finite-difference stencil would read beyond the worldline samples.
struct StencilError : Error {
    using Error::Error;
};

// Cone of the field point leaves the sampled worldline segment.
struct WorldlineTooShort : Error {
    double f_first, f_last;
    WorldlineTooShort(const std::string& msg, double f0, double f1)
        : Error(msg), f_first(f0), f_last(f1) {}
};

struct NearSingularity : Error {
    double rho;
    NearSingularity(const std::string& msg, double r) : Error(msg), rho(r) {}
};

struct GeometryError : Error {
    using Error::Error;
};

// |psi| below the node threshold where the phase is undefined.
struct NodeError : Error {
    double amplitude;
    NodeError(const std::string& msg, double a) : Error(msg), amplitude(a) {}
};

// m^2 + Q <= 0, i.e. the guidance law would be superluminal.
struct SuperluminalRegime : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

}  // namespace dsol
