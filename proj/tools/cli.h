#ifndef SCENE2OBJ_TOOLS_CLI_H_
#define SCENE2OBJ_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace scene2obj::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name. Reports go to `out`, logs and usage
// errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scene2obj::cli

#endif  // SCENE2OBJ_TOOLS_CLI_H_
