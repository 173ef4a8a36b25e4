#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "unidial/errors.hpp"
#include "unidial/ingest.hpp"
#include "unidial/linearize.hpp"
#include "unidial/ssl.hpp"

#include "support/synthetic.hpp"

using namespace unidial;

namespace {

UnifiedRecord chat_record(std::vector<std::pair<std::string, std::string>> turns,
                          Split split = Split::train) {
  UnifiedRecord r;
  r.task = TaskToken::chat;
  r.dataset = "daily";
  r.split = split;
  for (auto& [speaker, text] : turns) {
    r.dialogue.push_back(Turn::make(Speaker::from_label(speaker), text));
  }
  r.knowledge = KnowledgeForm::none();
  r.task_definition = std::string(default_task_definition(TaskToken::chat));
  r.target = "fine thanks";
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entity extraction

TEST_CASE("plain lowercase text has no entities") {
  CHECK(extract_entities("hello there").empty());
  CHECK(extract_entities("").empty());
  CHECK(extract_entities("   ").empty());
}

TEST_CASE("capitalized runs away from the sentence start are entities") {
  const auto spans = extract_entities("i want to fly to New York on Friday");
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == EntitySpan{17, 25, "New York"});
  CHECK(spans[1] == EntitySpan{29, 35, "Friday"});
}

TEST_CASE("all-digit tokens are entities") {
  const auto spans = extract_entities("the table costs 42 dollars");
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == EntitySpan{16, 18, "42"});
  // Mixed tokens are not numeric.
  CHECK(extract_entities("pay 5:30 now").empty());
}

TEST_CASE("runs and digits mix in order of appearance") {
  const auto spans = extract_entities("meet Anna Smith at 5");
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == EntitySpan{5, 15, "Anna Smith"});
  CHECK(spans[1] == EntitySpan{19, 20, "5"});
}

TEST_CASE("sentence-initial single capitals are not entities") {
  CHECK(extract_entities("Hello there").empty());
  CHECK(extract_entities("I am here").empty());
}

TEST_CASE("sentence-initial runs of two or more still count") {
  const auto spans = extract_entities("New York is nice");
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == EntitySpan{0, 8, "New York"});
}

TEST_CASE("weekday and month names match in any case") {
  const auto lower = extract_entities("see you friday");
  REQUIRE(lower.size() == 1);
  CHECK(lower[0] == EntitySpan{8, 14, "friday"});
  const auto month = extract_entities("come in may");
  REQUIRE(month.size() == 1);
  CHECK(month[0] == EntitySpan{8, 11, "may"});
}

TEST_CASE("sentence-initial lexicon words are still entities") {
  const auto spans = extract_entities("Nice. Monday works");
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == EntitySpan{6, 12, "Monday"});
}

TEST_CASE("spans exclude edge punctuation") {
  const auto spans = extract_entities("we leave on Monday, right?");
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == EntitySpan{12, 18, "Monday"});
  const auto hash = extract_entities("the #42 option");
  REQUIRE(hash.size() == 1);
  CHECK(hash[0] == EntitySpan{5, 7, "42"});
}

TEST_CASE("capitalized runs stop at sentence boundaries") {
  const auto spans = extract_entities("we met Anna. Smith arrived");
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == EntitySpan{7, 11, "Anna"});
}

TEST_CASE("spans are sorted and non-overlapping") {
  synth::Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const std::string text = synth::entity_sentence(rng);
    const auto spans = extract_entities(text);
    REQUIRE_FALSE(spans.empty());
    std::size_t prev_end = 0;
    for (const auto& s : spans) {
      CHECK(s.start >= prev_end);
      CHECK(s.start < s.end);
      CHECK(s.end <= text.size());
      CHECK(text.substr(s.start, s.end - s.start) == s.surface);
      prev_end = s.end;
    }
  }
}

// ---------------------------------------------------------------------------
// Turn reordering

TEST_CASE("reo on two turns swaps them") {
  const UnifiedRecord src = chat_record({{"user", "hi there"}, {"system", "hello friend"}});
  Rng rng(3);
  const SslOutcome out = make_reo(src, rng);
  REQUIRE(out.skip == SslSkip::none);
  REQUIRE(out.record.has_value());
  const UnifiedRecord& r = *out.record;
  CHECK(r.task == TaskToken::reo);
  CHECK(r.dataset == "daily");
  CHECK(r.split == Split::train);
  CHECK(out.provenance.kind == SslKind::reo);
  CHECK(out.provenance.permutation == std::vector<std::size_t>{1, 0});
  REQUIRE(r.dialogue.size() == 2);
  CHECK(r.dialogue[0].text == "hello friend");
  CHECK(r.dialogue[1].text == "hi there");
  CHECK(r.knowledge.kind == KnowledgeForm::Kind::none);
  CHECK(r.target == "user: hi there [sep] system: hello friend");
  CHECK(r.task_definition == default_task_definition(TaskToken::reo));
  CHECK(r.meta["source_task"] == "[chat]");
  CHECK(verify_ssl(r, out.provenance));
  CHECK(validate_record(r).ok());
}

TEST_CASE("reo skips ineligible sources") {
  Rng rng(1);
  CHECK(make_reo(chat_record({{"user", "a"}, {"system", "b"}}, Split::dev), rng).skip ==
        SslSkip::not_train);
  CHECK(make_reo(chat_record({{"user", "only one"}}), rng).skip == SslSkip::too_few_turns);
  UnifiedRecord noised = chat_record({{"user", "a"}, {"system", "b"}});
  noised.task = TaskToken::reo;
  CHECK(make_reo(noised, rng).skip == SslSkip::unsupported_source);
  noised.task = TaskToken::clo;
  CHECK(make_reo(noised, rng).skip == SslSkip::unsupported_source);
  CHECK_FALSE(make_reo(noised, rng).record.has_value());
}

TEST_CASE("reo permutations are never the identity and always verify") {
  synth::Rng gen(21);
  for (int i = 0; i < 200; ++i) {
    const auto src = synth::record_for(gen, TaskToken::tod, "mw", Split::train);
    Rng rng(1000 + static_cast<std::uint64_t>(i));
    const SslOutcome out = make_reo(src, rng);
    REQUIRE(out.skip == SslSkip::none);
    std::vector<std::size_t> identity(out.provenance.permutation.size());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    CHECK(out.provenance.permutation != identity);
    CHECK(verify_ssl(*out.record, out.provenance));
    CHECK(validate_record(*out.record).ok());
  }
}

TEST_CASE("reo verification rejects tampering") {
  const UnifiedRecord src =
      chat_record({{"user", "first turn"}, {"system", "second turn"}, {"user", "third turn"}});
  Rng rng(8);
  const SslOutcome out = make_reo(src, rng);
  REQUIRE(out.skip == SslSkip::none);

  SslProvenance bad = out.provenance;
  bad.permutation = {0, 1, 2};  // identity does not undo the shuffle
  CHECK_FALSE(verify_ssl(*out.record, bad));
  bad.permutation = {0, 0, 1};  // not a bijection
  CHECK_FALSE(verify_ssl(*out.record, bad));
  bad.permutation = {0, 1, 3};  // out of range
  CHECK_FALSE(verify_ssl(*out.record, bad));
  bad.permutation = {0, 1};  // wrong size
  CHECK_FALSE(verify_ssl(*out.record, bad));

  UnifiedRecord tampered = *out.record;
  tampered.target += " extra";
  CHECK_FALSE(verify_ssl(tampered, out.provenance));
  tampered = *out.record;
  tampered.task = TaskToken::chat;
  CHECK_FALSE(verify_ssl(tampered, out.provenance));
}

TEST_CASE("reo is deterministic in the seed") {
  const UnifiedRecord src = chat_record(
      {{"user", "turn a"}, {"system", "turn b"}, {"user", "turn c"}, {"system", "turn d"}});
  Rng r1(99), r2(99);
  const SslOutcome a = make_reo(src, r1);
  const SslOutcome b = make_reo(src, r2);
  CHECK(a.provenance == b.provenance);
  CHECK(serialize_record(*a.record) == serialize_record(*b.record));

  std::set<std::vector<std::size_t>> perms;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    perms.insert(make_reo(src, rng).provenance.permutation);
  }
  CHECK(perms.size() > 1);
}

// ---------------------------------------------------------------------------
// Entity cloze

TEST_CASE("clo masks every entity and lists them under one key") {
  const UnifiedRecord src =
      chat_record({{"user", "meet Anna Smith at 5"}, {"system", "see you friday"}});
  Rng rng(5);
  const SslOutcome out = make_clo(src, rng);
  REQUIRE(out.skip == SslSkip::none);
  const UnifiedRecord& r = *out.record;
  CHECK(r.task == TaskToken::clo);
  REQUIRE(r.dialogue.size() == 2);
  CHECK(r.dialogue[0].text == "meet [mask] at [mask]");
  CHECK(r.dialogue[1].text == "see you [mask]");
  CHECK(r.target == "user: meet Anna Smith at 5 [sep] system: see you friday");
  CHECK(r.meta["source_task"] == "[chat]");

  REQUIRE(r.knowledge.kind == KnowledgeForm::Kind::pairs);
  REQUIRE(r.knowledge.pairs.size() == 3);
  std::multiset<std::string> surfaces;
  for (const auto& [key, value] : r.knowledge.pairs) {
    CHECK(key == "entity");
    surfaces.insert(value);
  }
  CHECK(surfaces == std::multiset<std::string>{"5", "Anna Smith", "friday"});

  // Alignments are in dialogue order and point at their knowledge slot.
  const auto& aligns = out.provenance.alignments;
  REQUIRE(aligns.size() == 3);
  CHECK(aligns[0].span == EntitySpan{5, 15, "Anna Smith"});
  CHECK(aligns[0].turn_index == 0);
  CHECK(aligns[1].span == EntitySpan{19, 20, "5"});
  CHECK(aligns[1].turn_index == 0);
  CHECK(aligns[2].span == EntitySpan{8, 14, "friday"});
  CHECK(aligns[2].turn_index == 1);
  std::set<std::size_t> positions;
  for (const auto& a : aligns) {
    positions.insert(a.knowledge_position);
    CHECK(r.knowledge.pairs[a.knowledge_position].second == a.span.surface);
  }
  CHECK(positions == std::set<std::size_t>{0, 1, 2});

  CHECK(verify_ssl(r, out.provenance));
  CHECK(validate_record(r).ok());
}

TEST_CASE("clo verification ignores the knowledge list order") {
  const UnifiedRecord src =
      chat_record({{"user", "meet Anna Smith at 5"}, {"system", "see you friday"}});
  Rng rng(5);
  const SslOutcome out = make_clo(src, rng);
  REQUIRE(out.skip == SslSkip::none);
  UnifiedRecord reshuffled = *out.record;
  std::reverse(reshuffled.knowledge.pairs.begin(), reshuffled.knowledge.pairs.end());
  CHECK(verify_ssl(reshuffled, out.provenance));
  reshuffled.knowledge.pairs.clear();
  CHECK(verify_ssl(reshuffled, out.provenance));
}

TEST_CASE("clo verification rejects tampering") {
  const UnifiedRecord src =
      chat_record({{"user", "meet Anna Smith at 5"}, {"system", "see you friday"}});
  Rng rng(5);
  const SslOutcome out = make_clo(src, rng);
  REQUIRE(out.skip == SslSkip::none);

  SslProvenance bad = out.provenance;
  bad.alignments[0].span.surface = "Anna Smyth";  // same length, wrong text
  CHECK_FALSE(verify_ssl(*out.record, bad));
  bad = out.provenance;
  bad.alignments[0].span.start += 1;
  CHECK_FALSE(verify_ssl(*out.record, bad));
  bad = out.provenance;
  bad.alignments[0].turn_index = 1;
  CHECK_FALSE(verify_ssl(*out.record, bad));
  bad = out.provenance;
  bad.alignments.pop_back();
  CHECK_FALSE(verify_ssl(*out.record, bad));
  bad = out.provenance;
  bad.alignments.push_back(bad.alignments.back());
  CHECK_FALSE(verify_ssl(*out.record, bad));
}

TEST_CASE("clo skips ineligible sources") {
  Rng rng(2);
  CHECK(make_clo(chat_record({{"user", "see Anna Smith"}}, Split::test), rng).skip ==
        SslSkip::not_train);
  UnifiedRecord noised = chat_record({{"user", "see Anna Smith"}});
  noised.task = TaskToken::clo;
  CHECK(make_clo(noised, rng).skip == SslSkip::unsupported_source);
  CHECK(make_clo(chat_record({{"user", "nothing to find here"}}), rng).skip ==
        SslSkip::no_entities);
  CHECK(make_clo(chat_record({{"user", "already [mask] here"}}), rng).skip ==
        SslSkip::preexisting_mask);
  UnifiedRecord empty;
  empty.task = TaskToken::nlg;
  empty.dataset = "d";
  empty.split = Split::train;
  empty.knowledge = KnowledgeForm::semi_structured({{"a", "b"}});
  empty.target = "t";
  CHECK(make_clo(empty, rng).skip == SslSkip::too_few_turns);
}

TEST_CASE("clo accepts pre-annotated spans") {
  const UnifiedRecord src = chat_record({{"user", "the blue cab waits"}});
  std::vector<std::vector<EntitySpan>> spans = {{{4, 8, ""}, {9, 12, "cab"}}};
  Rng rng(7);
  const SslOutcome out = make_clo(src, rng, &spans);
  REQUIRE(out.skip == SslSkip::none);
  CHECK(out.record->dialogue[0].text == "the [mask] [mask] waits");
  CHECK(out.provenance.alignments[0].span.surface == "blue");  // autofilled
  CHECK(out.provenance.alignments[1].span.surface == "cab");
  CHECK(verify_ssl(*out.record, out.provenance));

  std::vector<std::vector<EntitySpan>> wrong_size = {{}, {}};
  CHECK_THROWS_AS(make_clo(src, rng, &wrong_size), DataError);
  std::vector<std::vector<EntitySpan>> oob = {{{4, 99, ""}}};
  CHECK_THROWS_AS(make_clo(src, rng, &oob), DataError);
  std::vector<std::vector<EntitySpan>> overlap = {{{4, 8, ""}, {6, 12, ""}}};
  CHECK_THROWS_AS(make_clo(src, rng, &overlap), DataError);
  std::vector<std::vector<EntitySpan>> mismatch = {{{4, 8, "pink"}}};
  CHECK_THROWS_AS(make_clo(src, rng, &mismatch), DataError);
  std::vector<std::vector<EntitySpan>> none = {{}};
  CHECK(make_clo(src, rng, &none).skip == SslSkip::no_entities);
}

TEST_CASE("clo handles masks at turn edges") {
  const UnifiedRecord src = chat_record({{"user", "Anna Smith"}, {"system", "price is 42"}});
  Rng rng(13);
  const SslOutcome out = make_clo(src, rng);
  REQUIRE(out.skip == SslSkip::none);
  CHECK(out.record->dialogue[0].text == "[mask]");
  CHECK(out.record->dialogue[1].text == "price is [mask]");
  CHECK(verify_ssl(*out.record, out.provenance));
}

// ---------------------------------------------------------------------------
// Seeds and provenance records

TEST_CASE("record seeds separate datasets, ordinals and kinds") {
  const std::uint64_t base = record_seed(1, "daily", 0, SslKind::reo);
  CHECK(base == record_seed(1, "daily", 0, SslKind::reo));
  CHECK(base != record_seed(1, "daily", 0, SslKind::clo));
  CHECK(base != record_seed(1, "daily", 1, SslKind::reo));
  CHECK(base != record_seed(1, "other", 0, SslKind::reo));
  CHECK(base != record_seed(2, "daily", 0, SslKind::reo));
  CHECK(base == derive_seed(1, "daily", 0, "reo"));
}

TEST_CASE("provenance sidecar lines round-trip") {
  SslProvenance reo;
  reo.kind = SslKind::reo;
  reo.permutation = {2, 0, 1};
  const ojson jr = provenance_to_json("daily", 7, reo);
  CHECK(jr["kind"] == "reo");
  CHECK(jr["permutation"] == ojson::array({2, 0, 1}));
  const auto er = provenance_from_json(jr);
  REQUIRE(er.has_value());
  CHECK(er->dataset == "daily");
  CHECK(er->ordinal == 7);
  CHECK(er->provenance == reo);

  SslProvenance clo;
  clo.kind = SslKind::clo;
  clo.alignments = {{0, {5, 15, "Anna Smith"}, 1}, {1, {8, 14, "friday"}, 0}};
  const ojson jc = provenance_to_json("daily", 8, clo);
  const auto ec = provenance_from_json(jc);
  REQUIRE(ec.has_value());
  CHECK(ec->provenance == clo);

  CHECK_FALSE(provenance_from_json(ojson::array()).has_value());
  ojson bad = jr;
  bad["kind"] = "mask";
  CHECK_FALSE(provenance_from_json(bad).has_value());
  bad = jr;
  bad.erase("permutation");
  CHECK_FALSE(provenance_from_json(bad).has_value());
  bad = jc;
  bad["alignments"][0].erase("knowledge_position");
  CHECK_FALSE(provenance_from_json(bad).has_value());
}

// ---------------------------------------------------------------------------
// Corpus-level generation

namespace {

struct SslCapture {
  UnifiedRecord record;
  SslProvenance prov;
  std::string dataset;
  std::uint64_t ordinal;
};

std::vector<SslCapture> run_gen(const std::string& corpus, SslKind kind, std::uint64_t seed,
                                SslGenStats* stats = nullptr) {
  std::istringstream in(corpus);
  std::vector<SslCapture> out;
  const SslGenStats s = generate_ssl(in, kind, seed,
                                     [&](const UnifiedRecord& r, const SslProvenance& p,
                                         std::string_view dataset, std::uint64_t ordinal) {
                                       out.push_back({r, p, std::string(dataset), ordinal});
                                     });
  if (stats) *stats = s;
  return out;
}

}  // namespace

TEST_CASE("generate_ssl numbers records per dataset in file order") {
  synth::Rng gen(31);
  std::vector<std::string> alpha, beta;
  for (int i = 0; i < 4; ++i) {
    alpha.push_back(serialize_record(synth::record_for(gen, TaskToken::tod, "alpha", Split::train, true)));
  }
  for (int i = 0; i < 3; ++i) {
    beta.push_back(serialize_record(synth::record_for(gen, TaskToken::sum, "beta", Split::train, true)));
  }
  const std::string interleaved = alpha[0] + "\n" + beta[0] + "\n" + alpha[1] + "\n" + alpha[2] +
                                  "\n" + beta[1] + "\n" + alpha[3] + "\n" + beta[2] + "\n";

  SslGenStats stats;
  const auto caps = run_gen(interleaved, SslKind::reo, 17, &stats);
  CHECK(stats.read == 7);
  CHECK(stats.emitted == caps.size());
  CHECK(stats.read == stats.emitted + stats.skipped_total());
  std::map<std::string, std::vector<std::uint64_t>> ordinals;
  for (const auto& c : caps) {
    ordinals[c.dataset].push_back(c.ordinal);
    CHECK(verify_ssl(c.record, c.prov));
  }
  CHECK(ordinals["alpha"] == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(ordinals["beta"] == std::vector<std::uint64_t>{0, 1, 2});

  // Regrouping the files keeps every (dataset, ordinal) output identical.
  const std::string grouped = alpha[0] + "\n" + alpha[1] + "\n" + alpha[2] + "\n" + alpha[3] +
                              "\n" + beta[0] + "\n" + beta[1] + "\n" + beta[2] + "\n";
  for (SslKind kind : {SslKind::reo, SslKind::clo}) {
    const auto first = run_gen(interleaved, kind, 17);
    const auto second = run_gen(grouped, kind, 17);
    REQUIRE(first.size() == second.size());
    std::map<std::pair<std::string, std::uint64_t>, std::pair<std::string, SslProvenance>> by_id;
    for (const auto& c : second) {
      by_id[{c.dataset, c.ordinal}] = {serialize_record(c.record), c.prov};
    }
    for (const auto& c : first) {
      const auto it = by_id.find({c.dataset, c.ordinal});
      REQUIRE(it != by_id.end());
      CHECK(it->second.first == serialize_record(c.record));
      CHECK(it->second.second == c.prov);
    }
  }
}

TEST_CASE("generate_ssl counts skips by reason") {
  synth::Rng gen(37);
  std::string corpus;
  corpus += serialize_record(synth::record_for(gen, TaskToken::tod, "a", Split::train)) + "\n";
  corpus += serialize_record(synth::record_for(gen, TaskToken::tod, "a", Split::dev)) + "\n";
  UnifiedRecord single = chat_record({{"user", "lonely words"}});
  single.dataset = "a";
  corpus += serialize_record(single) + "\n";
  UnifiedRecord noised = chat_record({{"user", "x y"}, {"system", "z w"}});
  Rng tmp(1);
  const SslOutcome reo_out = make_reo(noised, tmp);
  corpus += serialize_record(*reo_out.record) + "\n";

  SslGenStats stats;
  const auto caps = run_gen(corpus, SslKind::reo, 5, &stats);
  CHECK(stats.read == 4);
  CHECK(stats.emitted == 1);
  CHECK(stats.skipped[static_cast<std::size_t>(SslSkip::not_train)] == 1);
  CHECK(stats.skipped[static_cast<std::size_t>(SslSkip::too_few_turns)] == 1);
  CHECK(stats.skipped[static_cast<std::size_t>(SslSkip::unsupported_source)] == 1);
  CHECK(stats.skipped_total() == 3);
  CHECK(caps.size() == 1);

  // Cloze-specific skip: entity-free dialogue.
  SslGenStats cstats;
  std::string centity = serialize_record(chat_record({{"user", "no names at all"},
                                                      {"system", "none indeed"}})) +
                        "\n";
  run_gen(centity, SslKind::clo, 5, &cstats);
  CHECK(cstats.skipped[static_cast<std::size_t>(SslSkip::no_entities)] == 1);

  CHECK_THROWS_WITH_AS(run_gen("{}\nnot json\n", SslKind::reo, 1),
                       doctest::Contains("line 1"), DataError);
}
