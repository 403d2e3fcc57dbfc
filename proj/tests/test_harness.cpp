#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "support/fixtures.hpp"
#include "verbgen/error.hpp"
#include "verbgen/harness.hpp"

using namespace verbgen;

namespace {

struct Proc {
  int status = -1;
  std::string output;
};

// Runs the CLI with stderr folded into the captured output.
Proc run_cli(const std::string& args) {
  Proc p;
  FILE* pipe = popen((std::string(VERBGEN_CLI) + " " + args + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) p.output.append(buf.data(), n);
  p.status = pclose(pipe);
  return p;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ExperimentConfig tiny_config(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.dataset.categories = {"box-with-lid", "cabinet-drawer", "laptop-like"};
  c.dataset.instances_per_category = 2;
  c.dataset.size = {16, 16};
  c.frames = 3;
  c.arch.conv1 = 4;
  c.arch.conv2 = 4;
  c.arch.dense1 = 8;
  c.arch.dense2 = 8;
  c.training.epochs = 2;
  c.training.batch_size = 8;
  c.seeds = {1};
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("verb groups and their column names") {
  CHECK(group_of(Verb::Push) == VerbGroup::Translate);
  CHECK(group_of(Verb::TranslateRight) == VerbGroup::Translate);
  CHECK(group_of(Verb::Close) == VerbGroup::OpenClose);
  CHECK(group_of(Verb::InsertPart) == VerbGroup::RemoveInsertPart);
  CHECK(group_of(Verb::RemoveWhole) == VerbGroup::RemoveWhole);
  CHECK(group_of(Verb::Flip) == VerbGroup::Rotate);
  CHECK(group_of(Verb::Turn) == VerbGroup::Rotate);
  CHECK(group_of(Verb::None) == VerbGroup::None);
  std::vector<std::string> names;
  for (VerbGroup g : all_groups()) names.emplace_back(to_string(g));
  CHECK(names == std::vector<std::string>{"Translate", "Open/Close", "Remove/Insert Part", "RemoveWhole", "Rotate", "None"});
}

TEST_CASE("confusion counts and group scores") {
  ConfusionMatrix cm;
  cm.add(class_index(Verb::Push), class_index(Verb::Push));
  cm.add(class_index(Verb::Pull), class_index(Verb::Push));
  cm.add(class_index(Verb::Open), class_index(Verb::Open));
  cm.add(class_index(Verb::Open), class_index(Verb::Open));
  cm.add(class_index(Verb::RemoveWhole), class_index(Verb::None));
  CHECK(cm.total() == 5);
  CHECK(cm.correct() == 3);
  int rows = 0;
  for (int i = 0; i < kNumVerbs; ++i) rows += cm.row_total(i);
  CHECK(rows == cm.total());
  CHECK(ConfusionMatrix::from_json(cm.to_json()) == cm);

  const GroupScores s = score_groups(cm);
  CHECK(s.accuracy[0] == doctest::Approx(50.0));
  CHECK(s.accuracy[1] == doctest::Approx(100.0));
  CHECK(s.accuracy[3] == doctest::Approx(0.0));
  CHECK(std::isnan(s.accuracy[4]));
  CHECK(s.count[0] == 2);
  CHECK(s.overall == doctest::Approx(60.0));
  CHECK(s.total == 5);

  const auto csv = lines_of(cm.to_csv());
  REQUIRE(csv.size() == 1 + kNumVerbs);
  CHECK(csv[1].rfind("Push,1,", 0) == 0);
}

TEST_CASE("summaries use the sample standard deviation") {
  const std::vector<double> one{42.0};
  CHECK(summarize(one).mean == 42.0);
  CHECK(summarize(one).stddev == 0.0);
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(summarize(v).mean == doctest::Approx(2.5));
  CHECK(summarize(v).stddev == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
  const std::vector<double> with_nan{1.0, std::nan(""), 3.0};
  CHECK(summarize(with_nan).n == 2);
  CHECK(summarize(with_nan).mean == 2.0);
}

TEST_CASE("results table columns and rows") {
  ResultsTable t;
  GroupScores a;
  a.accuracy = {100, 50, 0, 100, 75, 25};
  a.overall = 60.0;
  t.add("laptop-like", a);
  GroupScores b = a;
  b.overall = 80.0;
  t.add("safe-like", b);
  t.add("safe-like", a);
  const auto rows = lines_of(t.to_csv());
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "category,Translate,Open/Close,Remove/Insert Part,RemoveWhole,Rotate,None,Overall");
  CHECK(rows[1].rfind("laptop-like,", 0) == 0);
  CHECK(rows[3].rfind("Mean,", 0) == 0);
  CHECK(t.overall("laptop-like").stddev == 0.0);
  CHECK(t.overall("safe-like").mean == 70.0);
  CHECK(t.overall("safe-like").stddev == doctest::Approx(std::sqrt(200.0)));
  CHECK(t.overall_mean() == doctest::Approx(65.0));
  CHECK_FALSE(t.plot_data().is_null());
}

TEST_CASE("config: round trip, unknown keys, invalid values") {
  ExperimentConfig c;
  c.training.epochs = 7;
  c.seeds = {4, 5};
  c.train_categories = {"safe-like"};
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  nlohmann::json doc = c.to_json();
  doc["dataset"]["colour"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(doc), Error);
  doc = c.to_json();
  doc["surprise"] = true;
  CHECK_THROWS_AS(ExperimentConfig::from_json(doc), Error);

  ExperimentConfig bad;
  bad.dataset.categories = {"spaceship"};
  try {
    bad.validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownCategory);
    CHECK(std::string(e.what()).find("spaceship") != std::string::npos);
  }
  bad = ExperimentConfig{};
  bad.frames = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ExperimentConfig{};
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), Error);

  const std::filesystem::path shipped = std::filesystem::path(VERBGEN_FIXTURES) / ".." / ".." / "config";
  CHECK(ExperimentConfig::load(shipped / "kfold.json").to_json() == ExperimentConfig{}.to_json());
  const ExperimentConfig cmp = ExperimentConfig::load(shipped / "compare.json");
  CHECK(cmp.protocol == "fixed");
  CHECK_NOTHROW(cmp.validate());
}

TEST_CASE("tiny k-fold: artifacts, no leakage, determinism") {
  const auto dir = fixtures::temp_dir("harness_kfold");
  ExperimentConfig c = tiny_config(dir / "out");
  const DatasetManifest m = build_dataset(c.dataset, dir / "data");
  const ResultsTable t = run_kfold(m, c);
  CHECK(t.categories() == c.dataset.categories);
  const auto rows = lines_of(fixtures::read_bytes(dir / "out" / "results_table.csv"));
  CHECK(rows.size() == 1 + 3 + 1);
  CHECK(std::filesystem::exists(dir / "out" / "plot_data.json"));

  for (const auto& cat : c.dataset.categories) {
    const auto fold = dir / "out" / "kfold" / cat / "seed1";
    CAPTURE(cat);
    CHECK(std::filesystem::exists(fold / "model.bin"));
    CHECK(std::filesystem::exists(fold / "result.json"));
    CHECK(std::filesystem::exists(fold / ("confusion_" + cat + ".csv")));
    CHECK(lines_of(fixtures::read_bytes(fold / "metrics.jsonl")).size() == 2);
    std::ifstream in(fold / "split.json");
    const nlohmann::json split = nlohmann::json::parse(in);
    std::set<std::string> train_ids;
    for (const auto& part : {"train", "val"})
      for (const auto& id : split.at(part)) train_ids.insert(id.get<std::string>());
    for (const auto& id : split.at("test")) CHECK(train_ids.count(id.get<std::string>()) == 0);
    for (std::size_t i = 0; i < m.entries.size(); ++i)
      if (train_ids.count(m.entries[i].id)) CHECK(m.entries[i].category != cat);
  }

  // A fold that leaks is refused.
  const SampleCache cache(m, c.frames);
  Split leaky = split_kfold(m, "laptop-like", 0.2, 1);
  leaky.train.push_back(leaky.test.front());
  CHECK_THROWS_AS(run_fold(cache, leaky, "leak", c, 1, dir / "leak"), Error);

  // Same inputs, same model bytes and same scores.
  ExperimentConfig again = c;
  again.output_dir = dir / "out2";
  run_kfold(m, again);
  for (const auto& cat : c.dataset.categories) {
    const auto a = dir / "out" / "kfold" / cat / "seed1";
    const auto b = dir / "out2" / "kfold" / cat / "seed1";
    CHECK(fixtures::read_bytes(a / "model.bin") == fixtures::read_bytes(b / "model.bin"));
    CHECK(fixtures::read_bytes(a / ("confusion_" + cat + ".csv")) ==
          fixtures::read_bytes(b / ("confusion_" + cat + ".csv")));
  }
  CHECK(fixtures::read_bytes(dir / "out" / "results_table.csv") == fixtures::read_bytes(dir / "out2" / "results_table.csv"));

  const nn::CnnModel model = nn::load_model((dir / "out" / "kfold" / "laptop-like" / "seed1" / "model.bin").string());
  const Split s = split_kfold(m, "laptop-like", 0.2, 1);
  const EvalReport e1 = evaluate_entries(model, cache, s.test);
  const EvalReport e2 = evaluate_entries(model, cache, s.test);
  CHECK(e1.confusion == e2.confusion);
  CHECK(e1.confusion.total() == static_cast<int>(s.test.size()));
}

TEST_CASE("compare validates its category lists") {
  const auto dir = fixtures::temp_dir("harness_compare");
  ExperimentConfig c = tiny_config(dir / "out");
  const DatasetManifest m = build_dataset(c.dataset, dir / "data");
  c.protocol = "fixed";
  c.train_categories = {"box-with-lid"};
  c.similar_categories = {};
  c.farther_categories = {"laptop-like"};
  CHECK_THROWS_AS(run_compare(m, c), Error);
  c.similar_categories = {"box-with-lid"};
  CHECK_THROWS_AS(run_compare(m, c), Error);

  // The same category in both test lists gives the same mean on both sides.
  c.similar_categories = {"cabinet-drawer", "laptop-like"};
  c.farther_categories = {"laptop-like", "cabinet-drawer"};
  const CompareResult r = run_compare(m, c);
  CHECK(r.similar_mean == r.farther_mean);
  CHECK(r.per_category.size() == 2);
  CHECK(std::filesystem::exists(dir / "out" / "compare.json"));
}

TEST_CASE("cli: gen-data entry count and category errors") {
  const auto dir = fixtures::temp_dir("harness_cli");
  const Proc ok = run_cli("gen-data --categories box-with-lid,cabinet-drawer,laptop-like,safe-like --instances 5 "
                          "--size 16 --seed 3 --out " + (dir / "d").string());
  CAPTURE(ok.output);
  CHECK(ok.status == 0);
  CHECK(ok.output.find("entries 300") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "d" / "manifest.json"));

  const Proc bad = run_cli("gen-data --categories box-with-lid,spaceship --instances 1 --size 16 --out " +
                           (dir / "e").string());
  CAPTURE(bad.output);
  CHECK(bad.status != 0);
  CHECK(bad.output.find("spaceship") != std::string::npos);
}

TEST_CASE("cli: unknown verb lists the valid ones") {
  const auto dir = fixtures::temp_dir("harness_cli_verb");
  nn::Architecture a;
  a.frames = 3;
  a.height = a.width = 16;
  a.conv1 = a.conv2 = 2;
  a.dense1 = a.dense2 = 4;
  nn::save_model(nn::CnnModel(a), (dir / "m.bin").string());
  const Proc p = run_cli("optimize --model " + (dir / "m.bin").string() +
                         " --category safe-like --verb Jump --out " + (dir / "o").string());
  CAPTURE(p.output);
  CHECK(p.status != 0);
  CHECK(p.output.find("Jump") != std::string::npos);
  for (const char* v : {"Push", "Open", "RemoveWhole", "Flip"}) CHECK(p.output.find(v) != std::string::npos);
}

TEST_CASE("cli: optimize then export replays the trajectory") {
  const auto dir = fixtures::temp_dir("harness_cli_opt");
  nn::Architecture a;
  a.frames = 3;
  a.height = a.width = 16;
  a.conv1 = a.conv2 = 2;
  a.dense1 = a.dense2 = 4;
  nn::save_model(nn::init_model(a, 3), (dir / "m.bin").string());
  const std::string common = "optimize --model " + (dir / "m.bin").string() +
                             " --urdf " + std::string(VERBGEN_FIXTURES) + "/cabinet.urdf --verb Open --generations 3 --population 6 --seed 2";
  const Proc p1 = run_cli(common + " --out " + (dir / "o1").string());
  const Proc p2 = run_cli(common + " --out " + (dir / "o2").string());
  CAPTURE(p1.output);
  REQUIRE(p1.status == 0);
  CHECK(fixtures::read_bytes(dir / "o1" / "trajectory.json") == fixtures::read_bytes(dir / "o2" / "trajectory.json"));
  CHECK(lines_of(fixtures::read_bytes(dir / "o1" / "trace.jsonl")).size() == 3);
  CHECK(std::filesystem::exists(dir / "o1" / "frame_02.png"));

  const Proc e = run_cli("export --trajectory " + (dir / "o1" / "trajectory.json").string() + " --render-size 24 --out " +
                         (dir / "x").string());
  CAPTURE(e.output);
  REQUIRE(e.status == 0);
  const auto csv = lines_of(fixtures::read_bytes(dir / "x" / "states.csv"));
  REQUIRE(csv.size() == 4);
  CHECK(csv[0] == "t,x,y,z,roll,pitch,yaw,hinge");
  CHECK(read_png((dir / "x" / "frame_00.png").string()).width == 24);
}

}  // TEST_SUITE
