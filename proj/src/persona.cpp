#include "shopsim/persona.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "shopsim/error.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

struct TraitInfo {
  Trait trait;
  std::string_view id;
  std::string_view label;  // heading in the persona block
  std::string_view placeholder;
  std::array<std::string_view, 2> values;
  std::array<std::string_view, 2> definitions;
};

constexpr std::array<TraitInfo, 6> kTraits{{
    {Trait::assertiveness,
     "assertiveness",
     "Assertiveness",
     "seller_assertiveness",
     {"assertive", "passive"},
     {"You're confident, direct, bold in claims, and push hard on urgency and closing. You "
      "frequently attempt to close the sale and use strong calls-to-action.",
      "You're gentle, suggestive, focus on building trust, and let buyers decide at their pace. "
      "You provide information without pressuring."}},
    {Trait::friendliness,
     "friendliness",
     "Friendliness",
     "seller_friendliness",
     {"friendly", "reserved"},
     {"You use casual, warm language with humor, empathy, and personal anecdotes. You treat the "
      "buyer like a friend.",
      "You maintain formal, professional distance with business-like tone. You keep interactions "
      "efficient and polished."}},
    {Trait::seller_rationality,
     "seller_rationality",
     "Rationality",
     "seller_rationality",
     {"rational", "emotional"},
     {"You focus on what the product is and does. You anchor every claim to specs, comparisons, "
      "and measurable outcomes. Do not appeal to emotions or lifestyle imagery.",
      "You focus on who the buyer become and feels. You anchor every claim to desires, "
      "transformation, and aspirational stories. Do not cite specs, numbers, or technical "
      "details."}},
    {Trait::pickiness,
     "pickiness",
     "Pickiness",
     "buyer_pickiness",
     {"picky", "easygoing"},
     {"You hold high standards for quality, performance, and details. You scrutinize every aspect "
      "and raise specific concerns about materials, durability, and craftsmanship.",
      "You're not particular about quality. Rough information is good enough for you, and minor "
      "imperfections don't bother you."}},
    {Trait::price_consciousness,
     "price_consciousness",
     "Price Consciousness",
     "buyer_price_consciousness",
     {"price-sensitive", "price-indifferent"},
     {"You care deeply about price, value-for-money, discounts, and hidden costs. You compare "
      "prices, ask about deals, and evaluate whether the cost is justified.",
      "You don't focus on price. If you want it, cost is secondary. You rarely mention or ask "
      "about pricing."}},
    {Trait::buyer_rationality,
     "buyer_rationality",
     "Rationality",
     "buyer_rationality",
     {"rational", "emotional"},
     {"You make decisions based on facts, specs, logic, and evidence. You evaluate claims "
      "critically, ask for data or comparisons, and weigh pros and cons systematically.",
      "You make decisions based on feelings, impressions, and stories. You respond to how "
      "something makes you feel, value personal connection, and trust your gut instinct."}},
}};

const TraitInfo& info(Trait t) { return kTraits[static_cast<std::size_t>(t)]; }

std::size_t slot(Trait t) { return static_cast<std::size_t>(t) % 3; }

constexpr std::string_view kSellerClosing =
    "CRITICAL: Your tone, word choice, persuasion style, and interpersonal manner MUST strictly "
    "reflect ALL THREE personality traits above throughout your entire response.";
constexpr std::string_view kBuyerClosing =
    "CRITICAL: Your inquiry style, concerns raised, decision reasoning, and overall behavior MUST "
    "strictly reflect ALL THREE personality traits above throughout your entire response.";

}  // namespace

std::string_view role_name(Role r) { return r == Role::seller ? "seller" : "buyer"; }
std::string_view gender_name(Gender g) { return g == Gender::male ? "male" : "female"; }

std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "male" || s == "m" || s == "M") return Gender::male;
  if (s == "female" || s == "f" || s == "F") return Gender::female;
  return std::nullopt;
}

std::array<Trait, 3> traits_of(Role role) {
  if (role == Role::seller) {
    return {Trait::assertiveness, Trait::friendliness, Trait::seller_rationality};
  }
  return {Trait::pickiness, Trait::price_consciousness, Trait::buyer_rationality};
}

Role role_of(Trait t) { return static_cast<int>(t) < 3 ? Role::seller : Role::buyer; }

std::string_view trait_id(Trait t) { return info(t).id; }

std::optional<Trait> parse_trait(std::string_view s) {
  for (const auto& ti : kTraits) {
    if (ti.id == s) return ti.trait;
  }
  return std::nullopt;
}

std::string_view trait_value_name(Trait t, int value) { return info(t).values.at(value); }
std::string_view trait_value_definition(Trait t, int value) {
  return info(t).definitions.at(value);
}

std::optional<int> parse_trait_value(Trait t, std::string_view s) {
  const auto& v = info(t).values;
  if (s == v[0]) return 0;
  if (s == v[1]) return 1;
  return std::nullopt;
}

int Persona::trait(Trait t) const {
  if (role_of(t) != role) throw ConfigError("trait " + std::string(trait_id(t)) + " is not a " +
                                            std::string(role_name(role)) + " trait");
  return traits[slot(t)];
}

void Persona::set_trait(Trait t, int value) {
  if (role_of(t) != role) throw ConfigError("trait " + std::string(trait_id(t)) + " is not a " +
                                            std::string(role_name(role)) + " trait");
  traits[slot(t)] = value;
}

std::string Persona::str() const {
  std::string s = std::string(role_name(role)) + "/" + std::string(gender_name(gender));
  for (Trait t : traits_of(role)) s += "/" + std::string(trait_value_name(t, trait(t)));
  return s;
}

void to_json(json& j, const Persona& p) {
  j = json{{"role", role_name(p.role)}, {"gender", gender_name(p.gender)}};
  for (Trait t : traits_of(p.role)) {
    // json keys mirror the prompt-facing names
    std::string key(trait_id(t));
    if (key == "seller_rationality" || key == "buyer_rationality") key = "rationality";
    j[key] = trait_value_name(t, p.trait(t));
  }
}

void from_json(const json& j, Persona& p) {
  const auto role = j.at("role").get<std::string>();
  if (role != "seller" && role != "buyer") throw ConfigError("unknown persona role: " + role);
  p.role = role == "seller" ? Role::seller : Role::buyer;
  auto g = parse_gender(j.at("gender").get<std::string>());
  if (!g) throw ConfigError("unknown gender: " + j.at("gender").dump());
  p.gender = *g;
  for (Trait t : traits_of(p.role)) {
    std::string key(trait_id(t));
    if (key == "seller_rationality" || key == "buyer_rationality") key = "rationality";
    const auto value = j.at(key).get<std::string>();
    auto v = parse_trait_value(t, value);
    if (!v) throw ConfigError("invalid value \"" + value + "\" for trait " + key);
    p.set_trait(t, *v);
  }
}

void to_json(json& j, const PersonaMode& m) {
  if (m.is_inherent()) {
    j = json{{"mode", "inherent"}};
  } else {
    j = json{{"mode", "explicit"}, {"persona", *m.persona}};
  }
}

void from_json(const json& j, PersonaMode& m) {
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "inherent") {
    m.persona.reset();
  } else if (mode == "explicit") {
    m.persona = j.at("persona").get<Persona>();
  } else {
    throw ConfigError("unknown persona mode: " + mode);
  }
}

std::vector<Persona> enumerate_personas(Role role) {
  std::vector<Persona> out;
  out.reserve(16);
  for (Gender g : {Gender::male, Gender::female}) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int c = 0; c < 2; ++c) {
          out.push_back(Persona{role, g, {a, b, c}});
        }
      }
    }
  }
  return out;
}

std::string render_persona_block(const PersonaMode& mode, Role role) {
  if (mode.is_inherent()) return std::string(kInherentInstruction);
  const Persona& p = *mode.persona;
  if (p.role != role) {
    throw ConfigError("persona for role " + std::string(role_name(p.role)) + " used as " +
                      std::string(role_name(role)));
  }
  std::string out = "[Your Persona]\n";
  out += "Gender: " + std::string(gender_name(p.gender)) + "\n\n";
  for (Trait t : traits_of(role)) {
    const auto& ti = info(t);
    out += std::string(ti.label) + ": " + std::string(ti.values[p.trait(t)]) + "\n";
    for (int v = 0; v < 2; ++v) {
      out += "\"" + std::string(ti.values[v]) + "\": " + std::string(ti.definitions[v]) + "\n";
    }
    out += "\n";
  }
  out += role == Role::seller ? kSellerClosing : kBuyerClosing;
  return out;
}

std::vector<AbPair> ab_pairs(Role role, Trait target, const std::vector<std::string>& product_ids,
                             const std::vector<std::string>& backends, Gender gender) {
  if (role_of(target) != role) {
    throw ConfigError("trait " + std::string(trait_id(target)) + " does not belong to role " +
                      std::string(role_name(role)));
  }
  std::vector<Trait> others;
  for (Trait t : traits_of(role)) {
    if (t != target) others.push_back(t);
  }
  std::vector<AbPair> out;
  out.reserve(backends.size() * product_ids.size() * 4);
  for (const auto& backend : backends) {
    for (const auto& product : product_ids) {
      for (int x = 0; x < 2; ++x) {
        for (int y = 0; y < 2; ++y) {
          Persona base{role, gender, {0, 0, 0}};
          base.set_trait(others[0], x);
          base.set_trait(others[1], y);
          AbPair pair{backend, product, target, base, base};
          pair.a.set_trait(target, 0);
          pair.b.set_trait(target, 1);
          out.push_back(std::move(pair));
        }
      }
    }
  }
  return out;
}

std::vector<AbPair> ab_pairs_all(const std::vector<std::string>& product_ids,
                                 const std::vector<std::string>& backends, Gender gender) {
  std::vector<AbPair> out;
  for (Role role : {Role::seller, Role::buyer}) {
    for (Trait t : traits_of(role)) {
      auto part = ab_pairs(role, t, product_ids, backends, gender);
      out.insert(out.end(), part.begin(), part.end());
    }
  }
  return out;
}

int hamming_distance(const Persona& a, const Persona& b) {
  int d = 0;
  if (a.role != b.role) return 4;
  if (a.gender != b.gender) ++d;
  for (std::size_t i = 0; i < 3; ++i) d += a.traits[i] != b.traits[i] ? 1 : 0;
  return d;
}

}  // namespace shopsim
