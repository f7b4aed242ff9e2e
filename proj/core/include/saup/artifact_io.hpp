#ifndef SAUP_ARTIFACT_IO_HPP
#define SAUP_ARTIFACT_IO_HPP

#include <string>

#include "saup/evalkit.hpp"
#include "saup/fsio.hpp"
#include "saup/sort.hpp"

namespace saup {

// Versioned JSON container: config snapshot + hash, normalization, mask spec,
// target map, model reference, loss trace, raw normalized delta, and the
// 8-bit pixel delta. Canonical key order; doubles round-trip exactly.
void save_artifact(const PerturbationArtifact& artifact,
                   const std::string& path);
PerturbationArtifact load_artifact(const std::string& path);

// Canonical JSON bytes of the artifact (what save_artifact writes); used by
// determinism checks.
std::string artifact_to_json(const PerturbationArtifact& artifact);

void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);
std::string report_to_json(const EvalReport& report);

}  // namespace saup

#endif  // SAUP_ARTIFACT_IO_HPP
