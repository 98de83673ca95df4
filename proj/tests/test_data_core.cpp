#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gapscore/csv.hpp"
#include "gapscore/errors.hpp"
#include "gapscore/masked_matrix.hpp"
#include "gapscore/rng.hpp"

using namespace gapscore;

namespace {

LabeledDataset parse(const std::string& text, CsvReadOptions opts = {}) {
  std::istringstream in(text);
  return read_csv(in, opts);
}

std::string render(const CsvTable& t) {
  std::ostringstream out;
  write_csv(t, out);
  return out.str();
}

}  // namespace

TEST(Csv, NaCellIsMissing) {
  const auto ds = parse("a,b\n1.0,NA\n2.0,3.0\n");
  ASSERT_EQ(ds.features.rows(), 2u);
  ASSERT_EQ(ds.features.cols(), 2u);
  EXPECT_TRUE(ds.features.observed(0, 0));
  EXPECT_FALSE(ds.features.observed(0, 1));
  EXPECT_EQ(ds.features.value(1, 1), 3.0);
  EXPECT_EQ(ds.names, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(ds.labels.empty());
}

TEST(Csv, NoTrailingNewline) {
  const auto ds = parse("a,b\n1.0,NA\n2.0,3.0");
  EXPECT_EQ(ds.features.rows(), 2u);
}

TEST(Csv, LabelColumnIsSplitOff) {
  CsvReadOptions opts;
  opts.label_column = "label";
  const auto ds = parse("a,label\n5,1\n6,0\n", opts);
  EXPECT_EQ(ds.features.cols(), 1u);
  EXPECT_EQ(ds.labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(ds.features.value(1, 0), 6.0);
  EXPECT_EQ(ds.anomaly_count(), 1u);
}

TEST(Csv, BadNumberReportsRowAndColumn) {
  try {
    parse("a\nxyz\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 1u);
    EXPECT_EQ(e.column(), "a");
  }
}

TEST(Csv, MissingLabelColumnIsConfigError) {
  CsvReadOptions opts;
  opts.label_column = "y";
  EXPECT_THROW(parse("a,b\n1,2\n", opts), ConfigError);
}

TEST(Csv, RaggedRowIsFormatError) {
  EXPECT_THROW(parse("a,b\n1,2\n3\n"), FormatError);
  EXPECT_THROW(parse(""), FormatError);
}

TEST(Csv, SentinelMapsToMissing) {
  CsvReadOptions opts;
  opts.sentinel = -999.0;
  const auto ds = parse("a,b\n-999,1\n2,-999.0\n", opts);
  EXPECT_FALSE(ds.features.observed(0, 0));
  EXPECT_FALSE(ds.features.observed(1, 1));
  EXPECT_EQ(ds.features.missing_count(), 2u);
}

TEST(Csv, WriteSingleCell) {
  CsvTable t;
  t.add_column("x", {1.0});
  EXPECT_EQ(render(t), "x\n1.0\n");
}

TEST(Csv, WriteNaToken) {
  CsvTable t;
  t.add_column("x", {1.5, std::monostate{}});
  t.add_column("n", {std::int64_t{3}, std::string("b")});
  EXPECT_EQ(render(t), "x,n\n1.5,3\nNA,b\n");
}

TEST(Csv, RoundTripKeepsValuesAndMask) {
  MaskedMatrix m(3, 2);
  m.set(0, 0, 0.1);
  m.set(0, 1, -1e-300);
  m.set_missing(1, 0);
  m.set(1, 1, 1.0 / 3.0);
  m.set(2, 0, 12345.678);
  m.set_missing(2, 1);
  LabeledDataset ds{m, {0, 1, 0}, {"p", "q"}};
  const std::string text = render(to_table(ds));
  CsvReadOptions opts;
  opts.label_column = "label";
  const auto back = parse(text, opts);
  EXPECT_TRUE(equivalent(back.features, m));
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.names, ds.names);
}

TEST(Csv, UnwritablePathIsIoError) {
  CsvTable t;
  t.add_column("x", {1.0});
  EXPECT_THROW(write_csv(t, std::filesystem::path("/nonexistent-dir/x.csv")), IoError);
}

TEST(Csv, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02e23, 3.0}) {
    const std::string s = format_number(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(format_number(2.0), "2.0");
}

TEST(MaskedMatrix, RowViewAndEigen) {
  const auto m = MaskedMatrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_TRUE(m.fully_observed());
  EXPECT_EQ(m.to_eigen()(1, 0), 3.0);
  MaskedMatrix g = m;
  g.set_missing(0, 1);
  EXPECT_FALSE(g.row(0).complete());
  EXPECT_EQ(g.row(0).observed_count(), 1u);
  EXPECT_THROW(g.to_eigen("x"), UnsupportedInputError);
  const std::vector<std::size_t> idx{1, 1};
  const auto s = g.select_rows(idx);
  EXPECT_EQ(s.rows(), 2u);
  EXPECT_EQ(s.value(1, 1), 4.0);
}

TEST(Rng, SameForkSameStream) {
  SeededRng a = SeededRng(7).fork({0});
  SeededRng b = SeededRng(7).fork({0});
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, DifferentLabelOrSeedDiffers) {
  auto prefix = [](SeededRng r) {
    std::vector<std::uint64_t> v(100);
    for (auto& x : v) x = r();
    return v;
  };
  EXPECT_NE(prefix(SeededRng(7).fork({0})), prefix(SeededRng(7).fork({1})));
  EXPECT_NE(prefix(SeededRng(8).fork({0})), prefix(SeededRng(7).fork({0})));
  EXPECT_NE(prefix(SeededRng(7).fork({0, 1})), prefix(SeededRng(7).fork({1, 0})));
}

TEST(Rng, ForkIgnoresParentPosition) {
  SeededRng a(3);
  SeededRng b(3);
  for (int i = 0; i < 10; ++i) b();
  EXPECT_EQ(a.fork({5}).seed(), b.fork({5}).seed());
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  SeededRng r(11);
  for (int t = 0; t < 50; ++t) {
    auto s = r.sample_without_replacement(10, 4);
    ASSERT_EQ(s.size(), 4u);
    std::sort(s.begin(), s.end());
    EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
    EXPECT_LT(s.back(), 10u);
  }
  const double u = r.uniform_open(0.0, 1.0);
  EXPECT_GT(u, 0.0);
  EXPECT_LT(u, 1.0);
}
