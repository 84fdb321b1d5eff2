#pragma once

namespace bitesim {

/// Command-line entry point. Returns 0 on success, 1 on usage or
/// validation errors and 2 on solver failure.
int run_cli(int argc, char** argv);

}  // namespace bitesim
