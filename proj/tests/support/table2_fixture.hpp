#pragma once

#include <filesystem>

#include "dyad/corpus.hpp"

namespace dyad::testsupport {

// Builds a corpus whose per-attribute class counts reproduce the reference
// sample-count table exactly:
//   None:            Constructive 13450, Hostile 176, Positive 1369
//   Gender  Male:    6673 / 72 / 715     Female:    6777 / 104 / 654
//   Role    Patient: 6670 / 76 / 728     Caregiver: 6780 / 100 / 641
//   Content Neutral: 7584 / 54 / 467     Stress:    5866 / 122 / 902
// The table pins only 1-D marginals; the 3-way allocation is a deterministic
// integer construction (proportional rounding, residual absorbed by the
// Constructive class), realized with 40 male-patient and 40 female-patient
// couples whose sessions alternate speakers strictly.
Corpus build_table2_corpus();

// Writes the corpus to dir and returns the manifest path.
std::filesystem::path write_table2_corpus(const std::filesystem::path& dir);

}  // namespace dyad::testsupport
