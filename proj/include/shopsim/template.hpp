#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace shopsim {

// Values for `{name}` placeholders and on/off flags for `{{#name}}...{{/name}}`
// sections. A section marker alone on its line takes the line with it.
struct TemplateContext {
  std::map<std::string, std::string, std::less<>> values;
  std::map<std::string, bool, std::less<>> sections;

  TemplateContext& set(std::string key, std::string value) {
    values.insert_or_assign(std::move(key), std::move(value));
    return *this;
  }
  TemplateContext& flag(std::string key, bool on) {
    sections.insert_or_assign(std::move(key), on);
    return *this;
  }
};

// Placeholder names are [a-z_][a-z0-9_]*, so literal JSON braces pass
// through. Substituted text is not rescanned. Throws TemplateError on a
// missing value, an unknown section flag, or unbalanced sections.
std::string render_template(std::string_view tmpl, const TemplateContext& ctx);

// Distinct placeholder names in order of first appearance, including those
// inside sections.
std::vector<std::string> template_placeholders(std::string_view tmpl);
std::vector<std::string> template_sections(std::string_view tmpl);

}  // namespace shopsim
