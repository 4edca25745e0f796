#include <doctest.h>

#include <string>
#include <vector>

#include "forge/dataset.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::eval;

TEST_CASE("csv rows load with synthesized ids") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path,
                   "prompt\n"
                   "how do magnets work\n"
                   "what is in soap\n"
                   "why is the sky blue\n");
  auto ds = load_dataset(path, "custom");
  CHECK(ds.dataset_id == "custom");
  REQUIRE(ds.prompts.size() == 3);
  CHECK(ds.prompts[0].id == "row-0");
  CHECK(ds.prompts[1].id == "row-1");
  CHECK(ds.prompts[2].id == "row-2");
  CHECK(ds.prompts[0].text == "how do magnets work");
  CHECK(ds.prompts[2].text == "why is the sky blue");
  CHECK(ds.prompts[0].topic.empty());
  CHECK(ds.source_hash.size() == 64);
}

TEST_CASE("explicit id and topic columns are honored") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path,
                   "id,topic,prompt\n"
                   "q-1,physics,how do magnets work\n"
                   "q-2,chemistry,what is in soap\n");
  auto ds = load_dataset(path, "custom");
  REQUIRE(ds.prompts.size() == 2);
  CHECK(ds.prompts[0].id == "q-1");
  CHECK(ds.prompts[0].topic == "physics");
  CHECK(ds.prompts[1].id == "q-2");
  CHECK(ds.prompts[1].topic == "chemistry");
}

TEST_CASE("text column autodetection covers common benchmark headers") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path, "goal,category\nexplain tides,nature\n");
  auto ds = load_dataset(path, "custom");
  REQUIRE(ds.prompts.size() == 1);
  CHECK(ds.prompts[0].text == "explain tides");

  auto explicit_col = tmp.file("e.csv");
  test::write_file(explicit_col, "alpha,beta\nx,y\n");
  CHECK_THROWS_AS(load_dataset(explicit_col, "custom"), IngestError);
  auto ds2 = load_dataset(explicit_col, "custom", "beta");
  CHECK(ds2.prompts[0].text == "y");
  CHECK_THROWS_AS(load_dataset(explicit_col, "custom", "gamma"), IngestError);
}

TEST_CASE("json arrays of strings and objects both normalize") {
  test::TempDir tmp;
  auto strings = tmp.file("s.json");
  test::write_file(strings, R"(["first question", "second question"])");
  auto ds = load_dataset(strings, "custom");
  REQUIRE(ds.prompts.size() == 2);
  CHECK(ds.prompts[0].id == "row-0");
  CHECK(ds.prompts[0].text == "first question");

  auto objects = tmp.file("o.json");
  test::write_file(objects, R"([
    {"id": "a", "prompt": "first question", "topic": "misc"},
    {"id": 7, "prompt": "second question"}
  ])");
  auto ds2 = load_dataset(objects, "custom");
  REQUIRE(ds2.prompts.size() == 2);
  CHECK(ds2.prompts[0].id == "a");
  CHECK(ds2.prompts[0].topic == "misc");
  CHECK(ds2.prompts[1].id == "7");
}

TEST_CASE("csv and json sources normalize identically") {
  test::TempDir tmp;
  auto csv = tmp.file("d.csv");
  test::write_file(csv, "prompt\nalpha beta\ngamma delta\n");
  auto json = tmp.file("d.json");
  test::write_file(json, R"(["alpha beta", "gamma delta"])");

  auto a = load_dataset(csv, "custom");
  auto b = load_dataset(json, "custom");
  REQUIRE(a.prompts.size() == b.prompts.size());
  for (std::size_t i = 0; i < a.prompts.size(); ++i) {
    CHECK(a.prompts[i].id == b.prompts[i].id);
    CHECK(a.prompts[i].text == b.prompts[i].text);
  }
  CHECK(a.source_hash != b.source_hash);  // bytes differ even if rows agree
}

TEST_CASE("format is sniffed when the extension is unhelpful") {
  test::TempDir tmp;
  auto path = tmp.file("data");
  test::write_file(path, "  [\"leading whitespace json\"]");
  auto ds = load_dataset(path, "custom");
  CHECK(ds.prompts[0].text == "leading whitespace json");
}

TEST_CASE("duplicate ids are an ingest error") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path, "id,prompt\nx,first\nx,second\n");
  CHECK_THROWS_AS(load_dataset(path, "custom"), IngestError);
}

TEST_CASE("empty text rows are reported by row number") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path, "prompt\nfine\n\nfine too\n,\n");
  try {
    load_dataset(path, "custom");
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(std::string(e.what()).find("malformed rows") != std::string::npos);
  }
}

TEST_CASE("rfc 4180 quoting is fully supported") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path,
                   "id,prompt\n"
                   "a,\"contains, a comma\"\n"
                   "b,\"has \"\"inner quotes\"\"\"\n"
                   "c,\"spans\ntwo lines\"\n");
  auto ds = load_dataset(path, "custom");
  REQUIRE(ds.prompts.size() == 3);
  CHECK(ds.prompts[0].text == "contains, a comma");
  CHECK(ds.prompts[1].text == "has \"inner quotes\"");
  CHECK(ds.prompts[2].text == "spans\ntwo lines");
}

TEST_CASE("broken csv quoting is rejected") {
  test::TempDir tmp;
  auto stray = tmp.file("stray.csv");
  test::write_file(stray, "prompt\nab\"cd\n");
  CHECK_THROWS_AS(load_dataset(stray, "custom"), IngestError);

  auto unterminated = tmp.file("open.csv");
  test::write_file(unterminated, "prompt\n\"never closed\n");
  CHECK_THROWS_AS(load_dataset(unterminated, "custom"), IngestError);
}

TEST_CASE("dataset ids come from a known registry") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path, "prompt\nok\n");
  CHECK_THROWS_AS(load_dataset(path, "not-a-benchmark"), ConfigError);
  for (const auto& id : SafetyDataset::known_ids()) {
    CHECK_NOTHROW(load_dataset(path, id));
  }
  CHECK_THROWS_AS(load_dataset(tmp.file("missing.csv"), "custom"), IngestError);
  auto empty = tmp.file("empty.csv");
  test::write_file(empty, "");
  CHECK_THROWS_AS(load_dataset(empty, "custom"), IngestError);
}

TEST_CASE("sampling preserves order and the full-size sample is the identity") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path, "prompt\none\ntwo\nthree\nfour\n");
  auto ds = load_dataset(path, "custom");

  auto all = sample_prompts(ds, 4, 9);
  REQUIRE(all.prompts.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(all.prompts[i].id == ds.prompts[i].id);

  auto half = sample_prompts(ds, 2, 9);
  REQUIRE(half.prompts.size() == 2);
  // order preserved: the two survivors appear in source order
  CHECK(half.prompts[0].id < half.prompts[1].id);

  auto again = sample_prompts(ds, 2, 9);
  CHECK(again.prompts[0].id == half.prompts[0].id);
  CHECK(again.prompts[1].id == half.prompts[1].id);

  auto different = sample_prompts(ds, 2, 10);
  // either a different subset or (rarely) the same; determinism is the claim
  CHECK(different.prompts.size() == 2);

  CHECK_THROWS_AS(sample_prompts(ds, 5, 9), RangeError);
  CHECK(sample_prompts(ds, 0, 9).prompts.empty());
}

TEST_CASE("single-row samples are uniform across seeds") {
  test::TempDir tmp;
  auto path = tmp.file("d.csv");
  test::write_file(path, "prompt\none\ntwo\nthree\nfour\n");
  auto ds = load_dataset(path, "custom");

  int counts[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto pick = sample_prompts(ds, 1, seed);
    REQUIRE(pick.prompts.size() == 1);
    for (std::size_t i = 0; i < 4; ++i) {
      if (pick.prompts[0].id == ds.prompts[i].id) ++counts[i];
    }
  }
  // binomial(1000, 1/4): mean 250, sigma ~13.7; allow 3 sigma
  for (int c : counts) {
    CHECK(c > 250 - 42);
    CHECK(c < 250 + 42);
  }
}
