#include <filesystem>
#include <fstream>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "smattack/attack.hpp"
#include "smattack/cli.hpp"
#include "smattack/def_io.hpp"
#include "smattack/synth.hpp"

using namespace smattack;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("smattack_test_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("the generator is deterministic and produces valid layouts") {
  SynthSpec spec;
  spec.num_nets = 15;
  spec.seed = 8;
  spec.fanout_max = 3;
  const SynthResult a = generate_layout(spec);
  const SynthResult b = generate_layout(spec);
  CHECK(emit_def(a.layout) == emit_def(b.layout));

  spec.seed = 9;
  CHECK(emit_def(generate_layout(spec).layout) != emit_def(a.layout));

  CHECK_NOTHROW(a.layout.validate());
  CHECK(a.layout.nets.size() == 15);

  const SplitResult r = split_layout(a.layout, 3);
  int sink_fragments = 0;
  for (const Fragment& f : r.fragments.fragments)
    if (f.kind == FragmentKind::sink) ++sink_fragments;
  CHECK(static_cast<int>(r.truth.pairs.size()) == sink_fragments);
  CHECK(r.truth.total_sink_pins == sink_fragments);  // one pin per sink fragment

  SynthSpec bad = spec;
  bad.num_nets = 0;
  CHECK_THROWS_AS(generate_layout(bad), InputError);
  bad = spec;
  bad.fanout_min = 3;
  bad.fanout_max = 1;
  CHECK_THROWS_AS(generate_layout(bad), InputError);
  bad = spec;
  bad.grid_um = 5.0;
  CHECK_THROWS_AS(generate_layout(bad), InputError);
}

TEST_CASE("full proximity bias makes the nearest-pin baseline perfect") {
  SynthSpec spec;
  spec.num_nets = 20;
  spec.seed = 17;
  spec.bias = 1.0;
  spec.noise = 0.0;
  const SplitResult r = split_layout(generate_layout(spec).layout, 3);
  const std::vector<CandidateGroup> groups =
      select_all_candidates(r.fragments, r.layout, 31, &r.truth);

  const std::map<int, int> picks = baseline_proximity(groups);
  for (const CandidateGroup& g : groups) {
    if (g.candidates.empty()) continue;
    CHECK(picks.at(g.sink_fragment) == oracles::proximity_naive(g, r.layout));
  }
  CHECK(compute_ccr(picks, r.truth) == 1.0);
}

TEST_CASE("with low bias the baseline is beatable") {
  SynthSpec spec;
  spec.num_nets = 40;
  spec.seed = 23;
  spec.bias = 0.2;
  const SplitResult r = split_layout(generate_layout(spec).layout, 3);
  const std::vector<CandidateGroup> groups =
      select_all_candidates(r.fragments, r.layout, 31, &r.truth);
  const double ccr = compute_ccr(baseline_proximity(groups), r.truth);
  CHECK(ccr < 1.0);
  // the true source always survives candidate selection, so learning has a
  // path to beating proximity
  for (const CandidateGroup& g : groups)
    if (r.truth.pairs.count(g.sink_fragment)) CHECK(g.contains_positive);
}

TEST_CASE("command pipeline runs end to end") {
  const TempDir tmp("pipeline");
  auto p = [&](const std::string& n) { return tmp / n; };

  REQUIRE(cli::run({"gen", "--nets", "14", "--seed", "3", "--bias", "0.9",
                    "--emit-def", "--out", p("train")}) == 0);
  REQUIRE(cli::run({"gen", "--nets", "8", "--seed", "4", "--bias", "0.9", "--out",
                    p("val")}) == 0);
  CHECK(fs::exists(p("train.layout.json")));
  CHECK(fs::exists(p("train.lib.json")));
  CHECK(fs::exists(p("train.layout.def")));

  REQUIRE(cli::run({"split", "--layout", p("train.layout.json"), "--layer", "3",
                    "--out", p("train")}) == 0);
  REQUIRE(cli::run({"split", "--layout", p("val.layout.json"), "--layer", "3",
                    "--out", p("val")}) == 0);
  CHECK(fs::exists(p("train.split.json")));
  CHECK(fs::exists(p("train.truth.json")));

  // DEF and native JSON inputs describe the same design
  {
    const CellLibrary lib = library_from_json(parse_json_file(p("train.lib.json")));
    const FullLayout from_def =
        parse_def_subset(slurp(p("train.layout.def")), lib);
    const FullLayout from_json =
        full_layout_from_json(parse_json_file(p("train.layout.json")));
    CHECK(emit_def(from_def) == emit_def(from_json));
  }

  const std::vector<std::string> extract_common = {
      "--candidates", "5", "--scales", "0.2,0.4", "--image-px", "9"};
  std::vector<std::string> ex1 = {"extract", "--layout", p("train.split.json"),
                                  "--lib",   p("train.lib.json"),
                                  "--truth", p("train.truth.json"),
                                  "--out",   p("train.feat")};
  ex1.insert(ex1.end(), extract_common.begin(), extract_common.end());
  REQUIRE(cli::run(ex1) == 0);
  std::vector<std::string> ex2 = {"extract", "--layout", p("val.split.json"),
                                  "--lib",   p("val.lib.json"),
                                  "--truth", p("val.truth.json"),
                                  "--out",   p("val.feat")};
  ex2.insert(ex2.end(), extract_common.begin(), extract_common.end());
  REQUIRE(cli::run(ex2) == 0);
  CHECK(fs::exists(p("train.feat")));

  REQUIRE(cli::run({"train", "--features", p("train.feat"), "--val-features",
                    p("val.feat"), "--val-truth", p("val.truth.json"), "--model",
                    p("model.bin"), "--history", p("history.csv"), "--preset",
                    "reduced", "--epochs", "2", "--seed", "1"}) == 0);
  CHECK(fs::exists(p("model.bin")));
  const std::string hist = slurp(p("history.csv"));
  CHECK(hist.rfind("epoch,loss,val_ccr,lr\n", 0) == 0);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 3);

  const std::vector<std::string> attack_args = {
      "attack", "--layout", p("val.split.json"), "--lib", p("val.lib.json"),
      "--truth", p("val.truth.json"), "--model", p("model.bin")};
  std::vector<std::string> at1 = attack_args;
  at1.insert(at1.end(), {"--out", p("att1")});
  REQUIRE(cli::run(at1) == 0);
  std::vector<std::string> at2 = attack_args;
  at2.insert(at2.end(), {"--out", p("att2")});
  REQUIRE(cli::run(at2) == 0);

  const json report = parse_json_file(p("att1.report.json"));
  CHECK(report.at("num_sinks").get<int>() > 0);
  CHECK(!report.at("predictions").empty());
  CHECK(report.contains("ccr_percent"));
  CHECK(fs::exists(p("att1.summary.csv")));
  // identical runs give byte-identical reports
  CHECK(slurp(p("att1.report.json")) == slurp(p("att2.report.json")));

  CHECK(cli::run({"eval", "--pred", p("att1.report.json"), "--truth",
                  p("val.truth.json")}) == 0);
  CHECK(cli::run({"baseline", "--layout", p("val.split.json"), "--truth",
                  p("val.truth.json"), "--out", p("baseline.json")}) == 0);
  CHECK(parse_json_file(p("baseline.json")).contains("ccr_percent"));
}

TEST_CASE("bad command input exits with code 2") {
  const TempDir tmp("badinput");
  CHECK(cli::run({"frobnicate"}) == cli::kExitInput);
  CHECK(cli::run({"split", "--layout", tmp / "missing.json", "--out",
                  tmp / "x"}) == cli::kExitInput);
  CHECK(cli::run({"gen", "--nets", "0", "--out", tmp / "g"}) == cli::kExitInput);
  CHECK(cli::run({"gen"}) == cli::kExitInput);  // missing required --out
  CHECK(cli::run({"train", "--features", tmp / "none.feat", "--model",
                  tmp / "m.bin"}) == cli::kExitInput);
  CHECK(cli::run({"--help"}) == 0);
}
