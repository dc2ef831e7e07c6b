#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace semgeom {

using WordId = std::uint32_t;

enum class Paradigm : std::uint8_t { fc, fa };

// Prompt context a word vector was read out in. Values are the on-disk codes.
enum class Strategy : std::uint8_t { averaged = 0, meaning = 1, task_fc = 2, task_fa = 3 };

enum class CenteringMode : std::uint8_t { centered, raw };

std::string_view to_string(Paradigm p);
std::string_view to_string(Strategy s);
std::string_view to_string(CenteringMode m);

Paradigm parse_paradigm(std::string_view text);
Strategy parse_strategy(std::string_view text);
CenteringMode parse_centering(std::string_view text);

}  // namespace semgeom
