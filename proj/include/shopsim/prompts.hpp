#pragma once

#include <string_view>
#include <vector>

namespace shopsim {

struct PromptTemplate {
  std::string_view name;
  std::string_view system;
  std::string_view user;
};

// Throws TemplateError for an unknown name.
const PromptTemplate& prompt_template(std::string_view name);
std::vector<std::string_view> prompt_names();
std::string_view prompt_version();

namespace detail {
const std::vector<PromptTemplate>& embedded_prompts();
std::string_view embedded_prompt_version();
}  // namespace detail

}  // namespace shopsim
