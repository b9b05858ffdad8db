#pragma once

#include <algorithm>
#include <string_view>
#include <vector>

namespace mailrank::queryexp {

/// Unit-cost Levenshtein distance, single-row DP.
inline int levenshtein(std::string_view a, std::string_view b) {
    if (a.size() > b.size()) std::swap(a, b);
    std::vector<int> row(a.size() + 1);
    for (size_t i = 0; i <= a.size(); ++i) row[i] = static_cast<int>(i);
    for (size_t jb = 1; jb <= b.size(); ++jb) {
        int diag = row[0];
        row[0] = static_cast<int>(jb);
        for (size_t ia = 1; ia <= a.size(); ++ia) {
            int save = row[ia];
            if (a[ia - 1] == b[jb - 1]) {
                row[ia] = diag;
            } else {
                row[ia] = 1 + std::min({row[ia], row[ia - 1], diag});
            }
            diag = save;
        }
    }
    return row[a.size()];
}

/// True when distance(a, b) <= max_dist. Prunes on length difference and
/// bails out as soon as a full DP row exceeds the bound.
inline bool levenshtein_at_most(std::string_view a, std::string_view b, int max_dist) {
    auto diff = static_cast<int>(a.size() > b.size() ? a.size() - b.size()
                                                     : b.size() - a.size());
    if (diff > max_dist) return false;
    if (a.size() > b.size()) std::swap(a, b);
    std::vector<int> row(a.size() + 1);
    for (size_t i = 0; i <= a.size(); ++i) row[i] = static_cast<int>(i);
    for (size_t jb = 1; jb <= b.size(); ++jb) {
        int diag = row[0];
        row[0] = static_cast<int>(jb);
        int best = row[0];
        for (size_t ia = 1; ia <= a.size(); ++ia) {
            int save = row[ia];
            row[ia] = a[ia - 1] == b[jb - 1]
                          ? diag
                          : 1 + std::min({row[ia], row[ia - 1], diag});
            diag = save;
            best = std::min(best, row[ia]);
        }
        if (best > max_dist) return false;
    }
    return row[a.size()] <= max_dist;
}

}  // namespace mailrank::queryexp
