#include "shopsim/template.hpp"

#include <algorithm>
#include <optional>

#include "shopsim/error.hpp"
#include "shopsim/prompts.hpp"

namespace shopsim {

namespace {

bool name_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool name_char(char c) { return name_start(c) || (c >= '0' && c <= '9'); }

// Length of a `{name}` token at pos, or 0.
std::size_t placeholder_at(std::string_view s, std::size_t pos, std::string_view* name) {
  if (s[pos] != '{' || pos + 1 >= s.size() || !name_start(s[pos + 1])) return 0;
  std::size_t end = pos + 1;
  while (end < s.size() && name_char(s[end])) ++end;
  if (end >= s.size() || s[end] != '}') return 0;
  if (name) *name = s.substr(pos + 1, end - pos - 1);
  return end - pos + 1;
}

struct Marker {
  bool open;
  std::string_view name;
  std::size_t length;
};

std::optional<Marker> marker_at(std::string_view s, std::size_t pos) {
  if (s.compare(pos, 3, "{{#") != 0 && s.compare(pos, 3, "{{/") != 0) return std::nullopt;
  const std::size_t close = s.find("}}", pos + 3);
  if (close == std::string_view::npos) return std::nullopt;
  auto name = s.substr(pos + 3, close - pos - 3);
  if (name.empty() || !std::all_of(name.begin(), name.end(), name_char)) return std::nullopt;
  return Marker{s[pos + 2] == '#', name, close - pos + 2};
}

bool at_line_start(std::string_view s, std::size_t pos) { return pos == 0 || s[pos - 1] == '\n'; }

}  // namespace

std::string render_template(std::string_view tmpl, const TemplateContext& ctx) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::vector<std::pair<std::string_view, bool>> stack;  // name, active
  auto active = [&] { return stack.empty() || stack.back().second; };

  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      if (auto m = marker_at(tmpl, i)) {
        std::size_t next = i + m->length;
        const bool own_line =
            at_line_start(tmpl, i) && (next == tmpl.size() || tmpl[next] == '\n');
        if (own_line && next < tmpl.size()) ++next;
        if (m->open) {
          auto it = ctx.sections.find(m->name);
          if (it == ctx.sections.end()) {
            throw TemplateError("no flag for template section '" + std::string(m->name) + "'");
          }
          stack.emplace_back(m->name, active() && it->second);
        } else {
          if (stack.empty() || stack.back().first != m->name) {
            throw TemplateError("unbalanced template section '" + std::string(m->name) + "'");
          }
          stack.pop_back();
        }
        i = next;
        continue;
      }
      std::string_view name;
      if (std::size_t len = placeholder_at(tmpl, i, &name)) {
        if (active()) {
          auto it = ctx.values.find(name);
          if (it == ctx.values.end()) {
            throw TemplateError("missing value for placeholder {" + std::string(name) + "}");
          }
          out += it->second;
        }
        i += len;
        continue;
      }
    }
    if (active()) out += tmpl[i];
    ++i;
  }
  if (!stack.empty()) {
    throw TemplateError("unterminated template section '" + std::string(stack.back().first) + "'");
  }
  return out;
}

std::vector<std::string> template_placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto m = marker_at(tmpl, i)) {
      i += m->length - 1;
      continue;
    }
    std::string_view name;
    if (std::size_t len = placeholder_at(tmpl, i, &name)) {
      if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
      i += len - 1;
    }
  }
  return names;
}

std::vector<std::string> template_sections(std::string_view tmpl) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto m = marker_at(tmpl, i)) {
      if (m->open && std::find(names.begin(), names.end(), m->name) == names.end()) {
        names.emplace_back(m->name);
      }
      i += m->length - 1;
    }
  }
  return names;
}

const PromptTemplate& prompt_template(std::string_view name) {
  for (const auto& p : detail::embedded_prompts()) {
    if (p.name == name) return p;
  }
  throw TemplateError("unknown prompt template: " + std::string(name));
}

std::vector<std::string_view> prompt_names() {
  std::vector<std::string_view> names;
  for (const auto& p : detail::embedded_prompts()) names.push_back(p.name);
  return names;
}

std::string_view prompt_version() { return detail::embedded_prompt_version(); }

}  // namespace shopsim
