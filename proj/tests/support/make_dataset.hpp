#pragma once

#include <array>

#include "dyad/corpus.hpp"
#include "dyad/rng.hpp"

namespace dyad::testsupport {

// In-memory labeled dataset with Gaussian class clusters, for experiment
// tests that do not need the file pipeline. Two sessions per couple
// (Neutral + Stress), strict speaker alternation, features on an equilateral
// simplex with side mean_shift in the first two dims.
inline LabeledDataset make_synthetic_dataset(int n_couples, int turns_per_session,
                                             double mean_shift, uint64_t seed,
                                             std::array<double, 3> priors = {0.2, 0.5, 0.3},
                                             int dim = 4) {
    static constexpr double kSimplex[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.5, 0.8660254037844386}};
    Rng rng(seed);
    LabeledDataset ds;
    for (int c = 0; c < n_couples; ++c) {
        std::string couple = "c" + std::to_string(c);
        Gender patient_gender = rng.uniform01() < 0.5 ? Gender::Male : Gender::Female;
        for (int s = 0; s < 2; ++s) {
            std::string session = couple + "_s" + std::to_string(s);
            for (int t = 0; t < turns_per_session; ++t) {
                Sample sample;
                sample.couple_id = couple;
                sample.session_id = session;
                sample.turn_index = t;
                bool patient_turn = t % 2 == 0;
                sample.speaker_id = couple + (patient_turn ? "_p" : "_g");
                sample.role = patient_turn ? Role::Patient : Role::Caregiver;
                sample.gender = patient_turn
                                    ? patient_gender
                                    : (patient_gender == Gender::Male ? Gender::Female
                                                                      : Gender::Male);
                sample.content = s == 0 ? Content::Neutral : Content::Stress;
                sample.start_ms = t * 1000;
                sample.end_ms = (t + 1) * 1000;
                int cls = static_cast<int>(rng.pick_weighted(priors));
                sample.label = static_cast<BehaviorClass>(cls);
                sample.code = cls == 0 ? BehaviorCode::LowHostile
                              : cls == 1 ? BehaviorCode::ConstructiveProblemDiscussion
                                         : BehaviorCode::LowPositive;
                sample.text = "turn " + std::to_string(t);
                std::vector<double> features(dim);
                for (int d = 0; d < dim; ++d)
                    features[d] = rng.gaussian() +
                                  (d < 2 ? mean_shift * kSimplex[cls][d] : 0.0);
                sample.features = std::move(features);
                ds.samples.push_back(std::move(sample));
            }
        }
    }
    return ds;
}

}  // namespace dyad::testsupport
