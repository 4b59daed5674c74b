#pragma once

#include <string>
#include <string_view>

namespace alseg::utf8 {

// Throws FormatError on malformed input.
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view chars);
std::string encode(char32_t c);

bool is_space(char32_t c);

}  // namespace alseg::utf8
