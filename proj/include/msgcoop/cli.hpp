#pragma once

#include <stdexcept>

namespace msgcoop {

// Flag-level misuse (unknown verbs/flags, invalid flag values): exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exit codes: 0 success, 1 domain error (bad config file, missing file,
// failed check), 2 usage error. Results go to stdout, logs to stderr.
int run_cli(int argc, char** argv);

}  // namespace msgcoop
