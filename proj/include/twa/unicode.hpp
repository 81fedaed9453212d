#pragma once

#include <string>
#include <string_view>

namespace twa {

// UTF-8 <-> Unicode scalar values. Character offsets throughout the
// toolkit count scalar values, never bytes.
std::u32string utf8_decode(std::string_view bytes);
std::string utf8_encode(std::u32string_view text);
std::size_t utf8_length(std::string_view bytes);

}  // namespace twa
