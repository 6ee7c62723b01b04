#include "docmt/utf8.hpp"

namespace docmt::utf8 {

static int seq_len(unsigned char b) {
  if (b < 0x80) return 1;
  if ((b >> 5) == 0x6) return 2;
  if ((b >> 4) == 0xe) return 3;
  if ((b >> 3) == 0x1e) return 4;
  return 1;  // invalid lead byte, treat as a single unit
}

std::vector<std::string> codepoints(const std::string& s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    size_t n = static_cast<size_t>(seq_len(static_cast<unsigned char>(s[i])));
    if (i + n > s.size()) n = 1;
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

std::string fold_case(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 32)
                                         : static_cast<char>(c));
      ++i;
      continue;
    }
    // Latin-1 supplement uppercase letters live at U+00C0..U+00DE and encode
    // as 0xC3 0x80..0x9E; lowercase forms are +0x20 away. U+00D7 (×) is not
    // a letter.
    if (c == 0xc3 && i + 1 < s.size()) {
      unsigned char c2 = static_cast<unsigned char>(s[i + 1]);
      if (c2 >= 0x80 && c2 <= 0x9e && c2 != 0x97) {
        out.push_back(static_cast<char>(0xc3));
        out.push_back(static_cast<char>(c2 + 0x20));
        i += 2;
        continue;
      }
    }
    out.push_back(static_cast<char>(c));
    ++i;
  }
  return out;
}

}  // namespace docmt::utf8
