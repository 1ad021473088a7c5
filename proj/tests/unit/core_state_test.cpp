#include <gtest/gtest.h>

#include "qpass/digest.hpp"
#include "qpass/encoder.hpp"
#include "qpass/errors.hpp"
#include "qpass/ir.hpp"
#include "qpass/state.hpp"

using namespace qpass;

namespace {

ActionSpec pass_action(int id, const std::string& pass, std::vector<std::string> params = {}) {
  ActionSpec a;
  a.id = id;
  a.level = params.empty() ? Level::M : Level::L;
  a.kind = ActionSpec::Kind::single_pass;
  a.passes = {pass};
  a.parameters = std::move(params);
  return a;
}

ActionSpec value_action(int id, const std::string& pass, const std::string& param, const std::string& value) {
  ActionSpec a;
  a.id = id;
  a.level = Level::L;
  a.kind = ActionSpec::Kind::parameter_value;
  a.passes = {pass};
  a.parameter = param;
  a.value = value;
  return a;
}

}  // namespace

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256("").hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256("abc").hex(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Digest, BuilderMatchesOneShot) {
  Sha256Builder b;
  b.update("ab").update("c");
  EXPECT_EQ(b.finish(), sha256("abc"));
}

TEST(Digest, HexRoundTrip) {
  const auto d = sha256("round trip");
  EXPECT_EQ(Digest::from_hex(d.hex()), d);
  EXPECT_ANY_THROW(Digest::from_hex("zz"));
}

TEST(Ir, CanonicalFormIgnoresCommentsAndSpacing) {
  const std::string a = "define i32 @f() {\n  ret i32 0 ; done\n}\n";
  const std::string b = "; header comment\ndefine   i32 @f() {\n\n ret i32 0\n}";
  EXPECT_EQ(canonicalize_ir(a), canonicalize_ir(b));
  EXPECT_EQ(ir_id(a), ir_id(b));
}

TEST(Ir, SemicolonInsideStringIsKept) {
  const std::string a = "@s = constant [3 x i8] c\"a;b\"";
  EXPECT_NE(canonicalize_ir(a).find("a;b"), std::string::npos);
  EXPECT_NE(ir_id(a), ir_id("@s = constant [3 x i8] c\"a"));
}

TEST(Ir, DifferentProgramsDiffer) { EXPECT_NE(ir_id("ret i32 0"), ir_id("ret i32 1")); }

TEST(History, PassActionsConsumeBudget) {
  ActionHistory h;
  h = append_action(h, pass_action(0, "licm"), 2);
  h = append_action(h, pass_action(1, "gvn"), 2);
  EXPECT_EQ(h.pass_count, 2);
  EXPECT_EQ(h.entries, (std::vector<int>{0, 1}));
  EXPECT_THROW(append_action(h, pass_action(0, "licm"), 2), BudgetExhausted);
}

TEST(History, ParameterChainBindsInOrder) {
  ActionHistory h = append_action({}, pass_action(0, "pp", {"a", "b"}), 4);
  ASSERT_TRUE(h.pending);
  EXPECT_EQ(h.pending->remaining, (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(append_action(h, value_action(5, "pp", "b", "1"), 4), IllegalAction);
  EXPECT_THROW(append_action(h, pass_action(1, "gvn"), 4), IllegalAction);
  h = append_action(h, value_action(3, "pp", "a", "0"), 4);
  h = append_action(h, value_action(6, "pp", "b", "1"), 4);
  EXPECT_FALSE(h.pending);
  EXPECT_EQ(h.pass_count, 1);
  EXPECT_EQ(h.entries.size(), 3u);
}

TEST(History, ValueWithoutPendingIsIllegal) {
  EXPECT_THROW(append_action({}, value_action(3, "pp", "a", "0"), 4), IllegalAction);
}

TEST(History, PendingChainCompletesAtBudget) {
  // The last unit of budget can still open a chain; its values do not consume budget.
  ActionHistory h = append_action({}, pass_action(0, "pp", {"a"}), 1);
  EXPECT_EQ(h.pass_count, 1);
  h = append_action(h, value_action(3, "pp", "a", "0"), 1);
  EXPECT_FALSE(h.pending);
}

TEST(Fingerprint, ExcludesProgramButIncludesHistory) {
  const IrId ir = ir_id("x");
  AgentState a = AgentState::base(ir, "p1");
  AgentState b = AgentState::base(ir, "p2");
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  b.history = append_action(b.history, pass_action(0, "licm"), 4);
  EXPECT_NE(fingerprint(a), fingerprint(b));
  AgentState c = a;
  c.ir = ir_id("y");
  EXPECT_NE(fingerprint(a), fingerprint(c));
}

TEST(Fingerprint, PendingSelectionMatters) {
  const IrId ir = ir_id("x");
  AgentState a = AgentState::base(ir, "p");
  a.history = append_action(a.history, pass_action(0, "pp", {"a", "b"}), 4);
  AgentState b = a;
  b.history.pending->chosen.push_back({"a", "0"});
  b.history.pending->remaining = {"b"};
  EXPECT_NE(fingerprint(a), fingerprint(b));
}

TEST(State, SerializationRoundTrip) {
  AgentState s = AgentState::base(ir_id("body"), "prog");
  s.history = append_action(s.history, pass_action(2, "pp", {"a", "b"}), 4);
  s.history = append_action(s.history, value_action(7, "pp", "a", "1"), 4);
  const auto back = deserialize_state(serialize_state(s));
  EXPECT_EQ(back, s);
  EXPECT_EQ(fingerprint(back), fingerprint(s));
}

TEST(Encoder, HistogramIsNormalizedAndHistoryOneHot) {
  OpcodeHistogramEncoder enc(synthetic_vocabulary(4), 3, 2, TokenKind::csv_tokens);
  EXPECT_EQ(enc.dim(), 5u + 2u * 4u);
  AgentState s = AgentState::base(ir_id("0,1,1,9"), "p");
  s.history.entries = {2};
  s.history.pass_count = 1;
  const auto v = enc.encode(s, "0,1,1,9");
  ASSERT_EQ(v.size(), enc.dim());
  // "0" once, "1" twice, "9" falls into the other bucket.
  EXPECT_DOUBLE_EQ(v[0], 0.25);
  EXPECT_DOUBLE_EQ(v[1], 0.5);
  EXPECT_DOUBLE_EQ(v[4], 0.25);
  double hist = 0.0;
  for (int i = 0; i < 5; ++i) hist += v[static_cast<std::size_t>(i)];
  EXPECT_NEAR(hist, 1.0, 1e-12);
  // Slot 0 holds action 2; slot 1 is padding (index 3).
  EXPECT_DOUBLE_EQ(v[5 + 2], 1.0);
  EXPECT_DOUBLE_EQ(v[5 + 4 + 3], 1.0);
  double ones = 0.0;
  for (std::size_t i = 5; i < v.size(); ++i) ones += v[i];
  EXPECT_DOUBLE_EQ(ones, 2.0);
}

TEST(Encoder, LongHistoryKeepsMostRecent) {
  OpcodeHistogramEncoder enc(synthetic_vocabulary(2), 3, 2, TokenKind::csv_tokens);
  AgentState s = AgentState::base(ir_id("0"), "p");
  s.history.entries = {0, 1, 2};
  const auto v = enc.encode(s, "0");
  const std::size_t h = 3;  // vocabulary "0", "1", "other"
  EXPECT_DOUBLE_EQ(v[h + 1], 1.0);
  EXPECT_DOUBLE_EQ(v[h + 4 + 2], 1.0);
}

TEST(Encoder, LlvmOpcodes) {
  const std::string ir =
      "define i32 @f(i32 %x) {\nentry:\n  %a = add i32 %x, 1\n  %b = mul i32 %a, 2\n  store i32 %b, ptr @g\n  ret i32 %b\n}\n";
  const auto ops = extract_llvm_opcodes(ir);
  EXPECT_EQ(ops, (std::vector<std::string>{"add", "mul", "store", "ret"}));
}
