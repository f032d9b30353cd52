#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "gridrisk/config.hpp"
#include "gridrisk/dataset.hpp"
#include "gridrisk/errors.hpp"

using namespace gridrisk;
namespace fs = std::filesystem;

namespace {

const Setup& smoke() {
  static const Setup s = build_setup(RunConfig::load(std::string(GRIDRISK_CONFIG_DIR) + "/case14_smoke.json"));
  return s;
}

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("gridrisk_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Dataset, GeneratesRequestedCountWithProvenance) {
  const auto& s = smoke();
  const Dataset ds = generate_dataset(s.grid, s.training, 12, 99);
  ASSERT_EQ(ds.records.size(), 12u);
  for (int k = 0; k < 12; ++k) EXPECT_EQ(ds.records[k].index, k);
  EXPECT_EQ(ds.provenance.count, 12);
  EXPECT_EQ(ds.provenance.seed, 99u);
  EXPECT_EQ(ds.provenance.grid_name, s.grid.name);
  EXPECT_EQ(ds.provenance.grid_hash, grid_hash(s.grid));
  EXPECT_EQ(ds.provenance.sampler, s.training.to_json());
}

TEST(Dataset, SameSeedSameRecords) {
  const auto& s = smoke();
  EXPECT_EQ(generate_dataset(s.grid, s.forecast, 8, 5), generate_dataset(s.grid, s.forecast, 8, 5));
  EXPECT_NE(generate_dataset(s.grid, s.forecast, 8, 5).records, generate_dataset(s.grid, s.forecast, 8, 6).records);
}

TEST(Dataset, ZeroSamplesIsEmpty) {
  const auto& s = smoke();
  const Dataset ds = generate_dataset(s.grid, s.training, 0, 1);
  EXPECT_TRUE(ds.records.empty());
  EXPECT_EQ(ds.failures(), 0);
}

TEST(Dataset, TrainingScenariosStayInsideTheBox) {
  const auto& s = smoke();
  const auto& b = s.training.bounds;
  for (const auto& sc : draw_scenarios(s.grid, s.training, 50, 3)) {
    for (std::size_t i = 0; i < sc.load.size(); ++i) {
      EXPECT_GE(sc.load[i], b.load[i].lo);
      EXPECT_LE(sc.load[i], b.load[i].hi);
    }
    for (std::size_t k = 0; k < sc.wind.size(); ++k) {
      EXPECT_GE(sc.wind[k], b.wind[k].lo);
      EXPECT_LE(sc.wind[k], b.wind[k].hi);
    }
  }
}

TEST(Dataset, CopulaNeedsZones) {
  Grid g = fixtures::three_bus();
  SamplerSpec sp;
  sp.kind = SamplerSpec::Kind::Copula;
  EXPECT_THROW(draw_scenarios(g, sp, 3, 1), ValidationError);
}

TEST(Dataset, FailedSolvesAreKept) {
  // the 50 MW load cannot be reached through a 40 MW line and there is no local unit
  Grid g = fixtures::two_bus();
  g.branches[0].flow_limit = 40.0;
  const auto recs = label_scenarios(g, {base_scenario(g), base_scenario(g)});
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& r : recs) EXPECT_FALSE(r.ok());
  Dataset ds;
  ds.records = recs;
  EXPECT_EQ(ds.failures(), 2);
}

TEST(Dataset, JsonLinesRoundTrip) {
  const auto& s = smoke();
  const fs::path dir = temp_dir("dataset_rt");
  const std::string path = (dir / "d.jsonl").string();
  Dataset ds = generate_dataset(s.grid, s.forecast, 10, 17);
  write_dataset(ds, path);
  EXPECT_TRUE(fs::exists(dir / "d.manifest.json"));
  const Dataset back = read_dataset(path);
  EXPECT_EQ(back, ds);

  std::ifstream in(path);
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 10);
}

TEST(Dataset, CorruptLineNamesItsNumber) {
  const auto& s = smoke();
  const fs::path dir = temp_dir("dataset_corrupt");
  const std::string path = (dir / "d.jsonl").string();
  write_dataset(generate_dataset(s.grid, s.training, 4, 2), path);
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  in.close();
  lines[2] = lines[2].substr(0, lines[2].size() / 2);
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
  out.close();
  try {
    read_dataset(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Dataset, MissingFilesAreIoErrors) {
  const fs::path dir = temp_dir("dataset_missing");
  EXPECT_THROW(read_dataset((dir / "nope.jsonl").string()), IoError);
  EXPECT_THROW(write_dataset(Dataset{}, (dir / "no" / "such" / "d.jsonl").string()), IoError);
}

TEST(Dataset, ManifestPath) {
  EXPECT_EQ(manifest_path("runs/x.jsonl"), "runs/x.manifest.json");
  EXPECT_EQ(manifest_path("runs/x.dat"), "runs/x.dat.manifest.json");
}

TEST(Dataset, SplitTakesTheLeadingFraction) {
  const Split s = split_indices(1000, 0.7);
  ASSERT_EQ(s.train.size(), 700u);
  ASSERT_EQ(s.test.size(), 300u);
  EXPECT_EQ(s.train.front(), 0);
  EXPECT_EQ(s.train.back(), 699);
  EXPECT_EQ(s.test.front(), 700);
  EXPECT_EQ(split_indices(0, 0.5).train.size(), 0u);
  EXPECT_EQ(split_indices(3, 1.0).test.size(), 0u);
  EXPECT_THROW(split_indices(10, 1.5), ValidationError);
  EXPECT_THROW(split_indices(-1, 0.5), ValidationError);
}

TEST(Dataset, SamplerJsonRoundTrip) {
  const auto& s = smoke();
  for (const auto* sp : {&s.training, &s.forecast}) {
    const SamplerSpec back = SamplerSpec::from_json(sp->to_json());
    EXPECT_EQ(back.to_json(), sp->to_json());
    EXPECT_EQ(draw_scenarios(s.grid, back, 5, 4), draw_scenarios(s.grid, *sp, 5, 4));
  }
  EXPECT_THROW(SamplerSpec::from_json({{"kind", "bogus"}}), ValidationError);
}
