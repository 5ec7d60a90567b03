#pragma once

#include <stdexcept>
#include <string>

namespace auglab {

// ---------------------------------------------------------------------------
// Error taxonomy shared across the library. The CLI maps these onto its
// stable exit codes (see cli.hpp).
// ---------------------------------------------------------------------------

// Malformed external data (dataset files, policy files, metrics files).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or key. Carries the source line when known
// (0 = not tied to a file line, e.g. a command-line override).
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& message, int line_no = 0, std::string field_name = "")
        : std::runtime_error(compose(message, line_no, field_name)),
          line(line_no),
          field(std::move(field_name)) {}

    int line;
    std::string field;

private:
    static std::string compose(const std::string& message, int line_no, const std::string& field_name) {
        std::string out;
        if (line_no > 0) out += "line " + std::to_string(line_no) + ": ";
        if (!field_name.empty()) out += field_name + ": ";
        out += message;
        return out;
    }
};

// Non-finite values where finite ones are required (losses, logits).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable, version-mismatched or corrupt checkpoint file.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem failures on output paths.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A training epoch hit a non-finite loss. Carries the diagnostic context.
struct TrainingAbort : std::runtime_error {
    TrainingAbort(double lr_value, int batch, const std::string& message)
        : std::runtime_error("training aborted (lr=" + std::to_string(lr_value) +
                             ", batch " + std::to_string(batch) + "): " + message),
          lr(lr_value),
          batch_index(batch) {}

    double lr;
    int batch_index;
};

}  // namespace auglab
