#pragma once

#include "docqa/corpus.hpp"

#include <algorithm>
#include <vector>

namespace docqa {

struct RankedPage {
    PageRef ref;
    double score = 0.0;

    friend bool operator==(const RankedPage&, const RankedPage&) = default;
};

/// Score descending, then PageRef ascending.
inline bool ranks_before(const RankedPage& a, const RankedPage& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.ref < b.ref;
}

inline void sort_ranked(std::vector<RankedPage>& pages)
{
    std::sort(pages.begin(), pages.end(), ranks_before);
}

}  // namespace docqa
