#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace shopsim {

enum class Role { seller, buyer };
enum class Gender { male, female };

std::string_view role_name(Role r);
std::string_view gender_name(Gender g);
std::optional<Gender> parse_gender(std::string_view s);

// Behavioral traits; each is binary. Value 0 is the first-listed pole
// (assertive, friendly, rational, picky, price-sensitive, rational).
enum class Trait {
  assertiveness,
  friendliness,
  seller_rationality,
  pickiness,
  price_consciousness,
  buyer_rationality,
};

std::array<Trait, 3> traits_of(Role role);
Role role_of(Trait t);
// "assertiveness", "price_consciousness", "seller_rationality"
std::string_view trait_id(Trait t);
std::optional<Trait> parse_trait(std::string_view s);
// "assertive" / "passive" etc.
std::string_view trait_value_name(Trait t, int value);
std::optional<int> parse_trait_value(Trait t, std::string_view s);
// Definition sentence of a trait value as shown in the persona block.
std::string_view trait_value_definition(Trait t, int value);

struct Persona {
  Role role = Role::buyer;
  Gender gender = Gender::male;
  std::array<int, 3> traits{0, 0, 0};  // indexed in traits_of(role) order

  int trait(Trait t) const;
  void set_trait(Trait t, int value);
  std::string str() const;  // "buyer/male/picky/price-sensitive/rational"

  bool operator==(const Persona&) const = default;
};

// Explicit persona or the model's inherent tendencies.
struct PersonaMode {
  std::optional<Persona> persona;

  static PersonaMode inherent() { return {}; }
  static PersonaMode explicit_persona(Persona p) { return PersonaMode{p}; }
  bool is_inherent() const { return !persona.has_value(); }

  bool operator==(const PersonaMode&) const = default;
};

void to_json(nlohmann::json& j, const Persona& p);
void from_json(const nlohmann::json& j, Persona& p);
void to_json(nlohmann::json& j, const PersonaMode& m);
void from_json(const nlohmann::json& j, PersonaMode& m);

inline constexpr std::string_view kInherentInstruction =
    "IMPORTANT: THINK, BEHAVE and DECIDE according to the personality that is INHERENT to you.";

// 16 personas: gender outermost, then traits in declaration order, value
// 0 before 1.
std::vector<Persona> enumerate_personas(Role role);

// Persona block text for prompts. Throws ConfigError when an explicit
// persona's role does not match.
std::string render_persona_block(const PersonaMode& mode, Role role);

struct AbPair {
  std::string backend;
  std::string product_id;
  Trait target;
  Persona a;  // target trait = 0
  Persona b;  // target trait = 1
};

// Four pairs per (backend, product): one per combination of the two
// non-target traits. Gender is held at `gender` for both sides.
std::vector<AbPair> ab_pairs(Role role, Trait target, const std::vector<std::string>& product_ids,
                             const std::vector<std::string>& backends, Gender gender = Gender::male);
// Every trait of both roles.
std::vector<AbPair> ab_pairs_all(const std::vector<std::string>& product_ids,
                                 const std::vector<std::string>& backends,
                                 Gender gender = Gender::male);

int hamming_distance(const Persona& a, const Persona& b);

}  // namespace shopsim
