#include "fakeidet/types.hpp"

#include <array>
#include <utility>

#include "fakeidet/errors.hpp"

namespace fakeidet {

namespace {

template <class E, std::size_t N>
E lookup(const std::array<std::pair<std::string_view, E>, N>& table, std::string_view s,
         const char* what) {
  for (const auto& [name, value] : table)
    if (name == s) return value;
  throw Error(ErrorKind::format, "types", std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, FieldKind>, 8> kFieldKinds{{
    {"face", FieldKind::face},
    {"name", FieldKind::name},
    {"surname", FieldKind::surname},
    {"id_number", FieldKind::id_number},
    {"expiry", FieldKind::expiry},
    {"support_number", FieldKind::support_number},
    {"signature", FieldKind::signature},
    {"other_sensitive", FieldKind::other_sensitive},
}};

// Short names are canonical; the long forms are accepted on input.
constexpr std::array<std::pair<std::string_view, AnonymizationLevel>, 6> kLevels{{
    {"non", AnonymizationLevel::non_anonymized},
    {"pseudo", AnonymizationLevel::pseudo_anonymized},
    {"fully", AnonymizationLevel::fully_anonymized},
    {"non_anonymized", AnonymizationLevel::non_anonymized},
    {"pseudo_anonymized", AnonymizationLevel::pseudo_anonymized},
    {"fully_anonymized", AnonymizationLevel::fully_anonymized},
}};

constexpr std::array<std::pair<std::string_view, PaiClass>, 6> kPais{{
    {"bonafide", PaiClass::bonafide},
    {"print", PaiClass::print},
    {"screen", PaiClass::screen},
    {"glossy_print", PaiClass::glossy_print},
    {"color_print", PaiClass::color_print},
    {"gray_print", PaiClass::gray_print},
}};

constexpr std::array<std::pair<std::string_view, Label>, 2> kLabels{{
    {"real", Label::real},
    {"attack", Label::attack},
}};

constexpr std::array<std::pair<std::string_view, Split>, 3> kSplits{{
    {"dev", Split::dev},
    {"eval", Split::eval},
    {"external", Split::external},
}};

template <class E, std::size_t N>
std::string_view name_of(const std::array<std::pair<std::string_view, E>, N>& table, E v) {
  for (const auto& [name, value] : table)
    if (value == v) return name;
  return "?";
}

}  // namespace

std::string_view to_string(FieldKind v) { return name_of(kFieldKinds, v); }
std::string_view to_string(AnonymizationLevel v) { return name_of(kLevels, v); }
std::string_view to_string(PaiClass v) { return name_of(kPais, v); }
std::string_view to_string(Label v) { return name_of(kLabels, v); }
std::string_view to_string(Split v) { return name_of(kSplits, v); }

FieldKind parse_field_kind(std::string_view s) { return lookup(kFieldKinds, s, "field type"); }
AnonymizationLevel parse_level(std::string_view s) { return lookup(kLevels, s, "anonymization level"); }
PaiClass parse_pai(std::string_view s) { return lookup(kPais, s, "PAI class"); }
Label parse_label(std::string_view s) { return lookup(kLabels, s, "label"); }
Split parse_split(std::string_view s) { return lookup(kSplits, s, "split"); }

}  // namespace fakeidet
