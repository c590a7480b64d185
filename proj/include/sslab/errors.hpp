#pragma once

#include <stdexcept>
#include <string>

namespace sslab {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input outside a declared support (prices, income, shares, images).
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed argument: i == j, n == 0, level outside (0,1), ...
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Operation not valid for the object's state (e.g. exogenous dataset).
class StateError : public Error {
public:
    using Error::Error;
};

// A density denominator fell below the configured floor.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

// Kernel estimate with too few effective observations.
class SparseRegionError : public Error {
public:
    using Error::Error;
};

// Quantile/CDF round trip failed beyond the provider tolerance.
class ProviderInconsistencyError : public Error {
public:
    using Error::Error;
};

class BracketError : public Error {
public:
    using Error::Error;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

class UnreliableBootstrapError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace sslab
