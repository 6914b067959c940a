#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spectex {

/// Runs `spectex synth ...` or `spectex analyze ...`. `args` excludes the
/// program name. Returns 0 on success, 1 on I/O or validation failure and 2
/// on bad flags.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Resolves the thread cap: the `--threads` value if positive, else
/// SPECTEX_THREADS, else 0 (library default).
int resolve_thread_count(int flag_value);

} // namespace spectex
