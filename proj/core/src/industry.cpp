#include "vaxho/error.hpp"
#include "vaxho/panel.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace vaxho::panel {

const std::vector<std::string>& wiod_industry_codes() {
  static const std::vector<std::string> codes = {
      "A01",     "A02",     "A03",   "B",       "C10-C12", "C13-C15", "C16",     "C17",
      "C18",     "C19",     "C20",   "C21",     "C22",     "C23",     "C24",     "C25",
      "C26",     "C27",     "C28",   "C29",     "C30",     "C31_C32", "C33",     "D35",
      "E36",     "E37-E39", "F",     "G45",     "G46",     "G47",     "H49",     "H50",
      "H51",     "H52",     "H53",   "I",       "J58",     "J59_J60", "J61",     "J62_J63",
      "K64",     "K65",     "K66",   "L68",     "M69_M70", "M71",     "M72",     "M73",
      "M74_M75", "N",       "O84",   "P85",     "Q",       "R_S",     "T",       "U"};
  return codes;
}

std::string assign_broad_industry(std::string_view code) {
  const auto& codes = wiod_industry_codes();
  if (std::find(codes.begin(), codes.end(), code) == codes.end()) {
    throw DataError(fmt::format("unknown industry code '{}'", code));
  }
  const char section = code.front();
  if (section == 'D' || section == 'E') return "D+E";
  if (section >= 'A' && section <= 'M') return std::string(1, section);
  return "other";
}

std::uint8_t broad_industry_index(std::string_view label) {
  for (std::size_t k = 0; k < kBroadIndustries.size(); ++k) {
    if (kBroadIndustries[k] == label) return static_cast<std::uint8_t>(k);
  }
  throw DataError(fmt::format("unknown broad industry label '{}'", label));
}

}  // namespace vaxho::panel
