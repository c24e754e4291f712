// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flags lockstep-botted broadcasts in a pair of log files and prints how many
// views of each one look botted.
//
//   minimal_detect data/views.csv data/broadcasts.csv

#include <iostream>

#include <flock/flock.hpp>

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: minimal_detect VIEWS.csv BROADCASTS.csv\n";
        return 2;
    }
    try {
        const int H = 20;
        const flock::Workload w = flock::load_workload(argv[1], argv[2]);
        const auto features = flock::extract_features(w, H);
        const auto index = flock::build_bracket_index(w.broadcasts, 30.0);
        const auto models = flock::build_bracket_models(features, index, H, flock::kDefaultBracketPseudocount, 100);

        const auto scores = flock::score_broadcasts(features, index, models);
        const auto fence = flock::fit_fence(scores.points, flock::kDefaultFenceK, flock::kDefaultBinsPerDecade,
                                            flock::kDefaultMinBinSamples, flock::kDefaultMinViewcount);
        for (const std::string& id : flock::classify_broadcasts(scores.points, fence)) {
            const auto& views = features.at(id);
            const auto& bracket = models.find(index.at(id))->distribution;
            const auto partition = flock::partition_views(views, {}, flock::stable_hash(id));
            const auto outcome =
                flock::prune_broadcast(partition, views, bracket, flock::Heuristic::iterative, {});
            std::cout << id << ": " << outcome.botted_view_ids.size() << " of " << views.size()
                      << " views botted\n";
        }
    } catch (const flock::Error& e) {
        std::cerr << "minimal_detect: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
