#pragma once

#include <stdexcept>
#include <string>

namespace singfit {

/// Data-dependent failure (bad CSV row, non-positive price, gap in years).
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

/// Model evaluated at or past its finite-time singularity t_c.
class singularity_error : public std::domain_error {
public:
    explicit singularity_error(const std::string& what) : std::domain_error(what) {}
};

/// Denominator of a derived-rate expression vanished away from t_c.
class pole_error : public std::domain_error {
public:
    explicit pole_error(const std::string& what) : std::domain_error(what) {}
};

/// Requested a critical time in a regime that has none (beta = 0).
class no_singularity_error : public std::domain_error {
public:
    explicit no_singularity_error(const std::string& what) : std::domain_error(what) {}
};

/// beta outside the 0 < beta < 1 branch of the log-CPI solution.
class unsupported_branch_error : public std::domain_error {
public:
    explicit unsupported_branch_error(const std::string& what) : std::domain_error(what) {}
};

}  // namespace singfit
