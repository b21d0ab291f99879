#pragma once

#include <string>

namespace drp {

// Versioned prompt-template assets. The texts are frozen: any change must bump
// the version string, which is recorded in every run report so that persisted
// responses can be replayed against the template that produced them.

// Stage 1 — subgoal decomposition request. Ends with the line
// "Input Theorem:"; callers append the problem source after it.
const std::string& stage1_template();
const char* stage1_template_version(); // "stage1/v1"

// Stage 3 — final proof request over verified helper lemmas. Ends with the
// line "Goal:"; callers append the assembled context / main theorem after it.
const std::string& stage3_header_template();
const char* stage3_template_version(); // "stage3/v1"

// Refinement rounds — re-decomposition of statements that resisted proof.
// Ends with the line "Unproven statements:"; callers append the declarations.
const std::string& refine_header_template();
const char* refine_template_version(); // "refine/v1"

} // namespace drp
