#pragma once

namespace sslab {

// Exit codes: 0 success, 1 verification threshold missed (oracle-verify),
// 2 configuration or usage error, 3 runtime error.
int run(int argc, const char* const* argv);

} // namespace sslab
