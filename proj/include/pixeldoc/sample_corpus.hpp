#pragma once

#include <string_view>

namespace pixeldoc {

/// Small newspaper-style corpus bundled with the library (data/sample_corpus.txt).
std::string_view sample_corpus_text();

}  // namespace pixeldoc
