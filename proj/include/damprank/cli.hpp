#pragma once

namespace damprank::cli {

// Exit codes: 0 ok, 1 usage/validation, 2 data, 3 numerical failure.
int dispatch(int argc, const char* const* argv);

} // namespace damprank::cli
