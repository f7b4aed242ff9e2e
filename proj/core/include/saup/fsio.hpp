#ifndef SAUP_FSIO_HPP
#define SAUP_FSIO_HPP

#include <string>

namespace saup {

// Write-temp-then-rename (creating parent directories), so failures never
// leave partial files behind.
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace saup

#endif  // SAUP_FSIO_HPP
