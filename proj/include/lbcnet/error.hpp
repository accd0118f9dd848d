#pragma once

#include <stdexcept>
#include <string>

namespace lbcnet {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// exit codes and machine-readable error identifiers, so codes must stay
// stable.
enum class errc {
    domain_error,
    dimension_mismatch,
    degenerate_data,
    degenerate_neighborhood,
    numeric_error,
    csv_malformed,
    csv_missing_value,
    csv_non_binary_treatment,
    csv_missing_column,
    csv_constant_covariate,
    io_error,
    config_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::domain_error: return "domain-error";
        case errc::dimension_mismatch: return "dimension-mismatch";
        case errc::degenerate_data: return "degenerate-data";
        case errc::degenerate_neighborhood: return "degenerate-neighborhood";
        case errc::numeric_error: return "numeric-error";
        case errc::csv_malformed: return "csv-malformed";
        case errc::csv_missing_value: return "csv-missing-value";
        case errc::csv_non_binary_treatment: return "csv-non-binary-treatment";
        case errc::csv_missing_column: return "csv-missing-column";
        case errc::csv_constant_covariate: return "csv-constant-covariate";
        case errc::io_error: return "io-error";
        case errc::config_error: return "config-error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

}  // namespace lbcnet
