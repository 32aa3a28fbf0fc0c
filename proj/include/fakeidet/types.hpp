#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace fakeidet {

enum class FieldKind { face, name, surname, id_number, expiry, support_number, signature, other_sensitive };

enum class AnonymizationLevel { non_anonymized, pseudo_anonymized, fully_anonymized };

enum class PaiClass { bonafide, print, screen, glossy_print, color_print, gray_print };

enum class Label { real, attack };

enum class Split { dev, eval, external };

std::string_view to_string(FieldKind v);
std::string_view to_string(AnonymizationLevel v);
std::string_view to_string(PaiClass v);
std::string_view to_string(Label v);
std::string_view to_string(Split v);

// Parsers throw Error{format} naming the offending token.
FieldKind parse_field_kind(std::string_view s);
AnonymizationLevel parse_level(std::string_view s);
PaiClass parse_pai(std::string_view s);
Label parse_label(std::string_view s);
Split parse_split(std::string_view s);

inline Label label_for(PaiClass pai) {
  return pai == PaiClass::bonafide ? Label::real : Label::attack;
}

}  // namespace fakeidet
