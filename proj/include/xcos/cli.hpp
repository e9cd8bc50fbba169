#pragma once

#include <string>
#include <vector>

namespace xcos {

// Command-line entry point. Returns 0 on success, 1 on usage errors, 2 on
// runtime failures. Subcommands: synth-data, train-teacher, train-xcos,
// calibrate, verify, explain, eval, occlusion-eval.
int cmd_dispatch(const std::vector<std::string>& args);

}  // namespace xcos
