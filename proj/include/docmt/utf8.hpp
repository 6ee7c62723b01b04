#pragma once

#include <string>
#include <vector>

namespace docmt::utf8 {

/// Splits a UTF-8 string into one std::string per code point. Invalid bytes
/// are passed through as single-byte units rather than rejected; corpora are
/// expected to be valid UTF-8.
std::vector<std::string> codepoints(const std::string& s);

/// Lowercases ASCII A-Z and the Latin-1 supplement uppercase range
/// (À..Þ except ×), which covers the German and Portuguese corpora handled
/// here. Other code points are left untouched.
std::string fold_case(const std::string& s);

}  // namespace docmt::utf8
