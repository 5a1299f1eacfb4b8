#ifndef LAEO_APP_HPP_
#define LAEO_APP_HPP_

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace laeo {

// Environment variable naming the feature cache directory used by `train`.
inline constexpr const char* kCacheDirEnv = "LAEO_CACHE_DIR";

// Runs one CLI invocation; args exclude the program name. Returns the exit
// status. Errors go to `err` as a single "error: ..." line.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

// Calls fn(i) for i in [0, n) on up to `workers` threads (0: hardware
// concurrency). The first exception is rethrown after all threads finish.
void ParallelFor(size_t n, int workers, const std::function<void(size_t)>& fn);

}  // namespace laeo

#endif  // LAEO_APP_HPP_
