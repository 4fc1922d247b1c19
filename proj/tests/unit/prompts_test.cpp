#include <gtest/gtest.h>

#include <set>

#include "graphsearch/errors.hpp"
#include "graphsearch/prompts.hpp"

using namespace graphsearch;

namespace {

Bindings all_bindings(TemplateId id, const std::string& value) {
  Bindings b;
  for (const auto& name : prompt_template(id).required_bindings) b[name] = value + "<" + name + ">";
  return b;
}

}  // namespace

TEST(Prompts, RenderContainsQuestionVerbatim) {
  const std::string q = "Who founded {{the}} \"X\" company?";
  const auto msgs = render_prompt(TemplateId::qd_semantic, {{"question", q}});
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].role, Role::system);
  EXPECT_EQ(msgs[1].role, Role::user);
  EXPECT_NE(msgs[1].content.find(q), std::string::npos);
}

TEST(Prompts, MissingBindingNamed) {
  try {
    render_prompt(TemplateId::qd_semantic, {});
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("question"), std::string::npos);
  }
}

TEST(Prompts, VerifyIncludesDraft) {
  auto b = all_bindings(TemplateId::evidence_verify, "v");
  b["draft"] = "1. Springfield is the town [refs: s1]";
  const auto msgs = render_prompt(TemplateId::evidence_verify, b);
  EXPECT_NE(msgs[1].content.find("1. Springfield is the town [refs: s1]"), std::string::npos);
}

TEST(Prompts, EveryTemplateRendersAndNamesRoundTrip) {
  std::set<std::string> names;
  for (TemplateId id : kAllTemplates) {
    EXPECT_NO_THROW(render_prompt(id, all_bindings(id, "x")));
    const std::string name(to_string(id));
    EXPECT_TRUE(names.insert(name).second);
    EXPECT_EQ(template_from_string(name), id);
  }
  EXPECT_FALSE(template_from_string("nope").has_value());
}

TEST(Prompts, InjectiveInBindings) {
  for (TemplateId id : kAllTemplates) {
    EXPECT_NE(render_prompt(id, all_bindings(id, "a")), render_prompt(id, all_bindings(id, "b"))) << to_string(id);
  }
}

TEST(ListParse, Numbered) {
  const auto r = parse_list_response("1. a\n2. b");
  EXPECT_EQ(r.items, (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(r.fallback);
}

TEST(ListParse, Bulleted) {
  EXPECT_EQ(parse_list_response("- a\n- b\n- c").items, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(ListParse, NoMarkersFallsBack) {
  const auto r = parse_list_response("  no list here ");
  EXPECT_EQ(r.items, std::vector<std::string>{"no list here"});
  EXPECT_TRUE(r.fallback);
}

TEST(ListParse, PreambleAndContinuation) {
  const auto r = parse_list_response("Here are the questions:\n\n1) first\n   continued\n\n2) second");
  EXPECT_EQ(r.items, (std::vector<std::string>{"first continued", "second"}));
}

TEST(ListParse, EmptyTextHasNoItems) { EXPECT_TRUE(parse_list_response("   ").items.empty()); }
