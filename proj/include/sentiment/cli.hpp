#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sentiment {

/// Environment variables read by the CLI (never by the library) to configure
/// the HTTP translation backend.
inline constexpr const char* kTranslateEndpointEnv = "SENTIMENT_TRANSLATE_ENDPOINT";
inline constexpr const char* kTranslateApiKeyEnv = "SENTIMENT_TRANSLATE_API_KEY";

/// Entry point of the `sentiment` tool. `args[0]` is the program name.
/// Returns 0 on success, 1 on runtime/I-O failure, 2 on usage errors.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(const std::vector<std::string>& args);

}  // namespace sentiment
