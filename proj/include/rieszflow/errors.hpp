#pragma once

#include <stdexcept>
#include <string>

namespace rieszflow {

/// Invalid user-supplied parameter (bad exponent range, q < 1, ...).
class parameter_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Parameters outside the mathematical domain of an operation (Gamma pole, regime mismatch).
class domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested regime does not match the supplied parameters (m vs m_c, sign conditions).
class regime_error : public domain_error {
public:
    using domain_error::domain_error;
};

/// Mass left the resolvable part of the grid (dilation past R_dom, unresolvable support).
class truncation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operator construction failed to reach the requested quadrature tolerance.
class build_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two objects built on different grids were combined.
class grid_mismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Solver configuration cannot produce the requested state (mass unreachable at D = 0).
class configuration_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Explicit time step above the stability bound.
class stability_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Config file rejected; carries the full list of violations.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rieszflow
