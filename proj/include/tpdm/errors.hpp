#pragma once

#include <stdexcept>
#include <string>

namespace tpdm {

// Invalid or inconsistent run configuration (bad JSON, unknown keys,
// out-of-range values).  Mapped to exit code 2 by the CLI.
class config_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Filesystem-level failure: missing file, unreadable path, short write.
// Mapped to exit code 3 by the CLI.
class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A file was read but its contents are not a valid TPDMVOL1/TPDMCKPT1
// payload (bad magic, header/payload size mismatch, invalid shape).
class corrupt_file_error : public io_error {
  public:
    using io_error::io_error;
};

// Shape or extent mismatch between containers that must be congruent.
// Mapped to exit code 5 by the CLI.
class dim_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Non-finite values appeared during sampling; carries the step index at
// which they were detected.  Mapped to exit code 4 by the CLI.
class divergence_error : public std::runtime_error {
  public:
    divergence_error(const std::string& what, int step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
          step_(step) {}

    int step() const { return step_; }

  private:
    int step_;
};

// A requested construction cannot be satisfied, e.g. a sampling mask
// whose acceleration target is unreachable on the given grid.
class feasibility_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace tpdm
