#include <filesystem>
#include <functional>
#include <random>

#include "doctest.h"
#include "laeo/io.hpp"

using namespace laeo;
namespace fs = std::filesystem;

namespace {

fs::path TempDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("laeo_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string ErrorOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

LaeoNetConfig SmallModel() {
  LaeoNetConfig c;
  c.K = 4;
  c.head_pose_layers = {{4, 5, 5, 2, 4, 4, 1}, {4, 3, 3, 2, 2, 2, 1}};
  c.head_map_layers = {{4, 5, 5, 1, 4, 4, 1}, {4, 3, 3, 1, 2, 2, 1}};
  c.fusion_hidden_units = 8;
  return c;
}

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(Sha256Hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256Hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("records round-trip every kind") {
  const std::string text =
      R"({"video_id":"v","frame":3,"kind":"detection","box":[1,2,11,12],"score":0.75}
{"video_id":"v","frame":3,"kind":"head_box","id":"h1","box":[1,2,11,12]}
{"video_id":"v","frame":3,"kind":"head_box","id":"h2","box":[40,2,50,12]}
{"video_id":"v","frame":3,"kind":"body_box","id":"b1","box":[0,0,20,60]}
{"video_id":"v","frame":3,"kind":"pair_label","a":"h1","b":"h2","label":"laeo"}
{"video_id":"v","frame":3,"kind":"pose","id":"h1","pose":[0.5,-0.1,0.0]}
{"video_id":"v","frame":0,"kind":"shot_boundary","shot_id":"s0","end_frame":9,"label":"not_laeo"}
{"video_id":"v","frame":2,"kind":"track","track_id":4,"boxes":[[0,0,5,5],[1,1,6,6]],"scores":[0.9,0.0],"interpolated":[false,true]}
{"video_id":"v","frame":2,"kind":"window_score","left_track":1,"right_track":4,"K":10,"score":0.25}
{"video_id":"v","frame":7,"kind":"frame_score","left_track":1,"right_track":4,"left_box":[0,0,5,5],"right_box":[9,0,14,5],"score":0.5}
)";
  const auto rs = ParseAnnotations(text, "t");
  REQUIRE(rs.size() == 10);
  CHECK(SerializeAnnotations(rs) == text);
  CHECK(ParseAnnotations(SerializeAnnotations(rs), "t") == rs);
  ValidateAnnotationSet(rs);

  const auto gt = GroundTruthFromRecords(rs);
  REQUIRE(gt.pairs.size() == 1);
  CHECK(gt.pairs[0].box_b.x1() == 40);
  CHECK(gt.pairs[0].label == PairLabel::kLaeo);
  REQUIRE(gt.shots.size() == 1);
  CHECK(gt.shots[0].end_frame == 9);

  const HeadTrack t = TrackFromRecord(rs[7]);
  CHECK(t.track_id == 4);
  CHECK(t.start_frame == 2);
  CHECK(t.interpolated_mask == std::vector<bool>{false, true});
  CHECK(ParseRecord(SerializeRecord(TrackToRecord("v", t))) ==
        TrackToRecord("v", t));

  const WindowScore w = WindowScoreFromRecord(rs[8]);
  CHECK(w.K == 10);
  CHECK(WindowScoreToRecord(w).fields == rs[8].fields);
  const BoxedFrameScore f = FrameScoreFromRecord(rs[9]);
  CHECK(f.right_box.x1() == 9);
  CHECK(FrameScoreToRecord(f).fields["score"] == 0.5);
}

TEST_CASE("schema violations cite the line") {
  const std::string good =
      R"({"video_id":"v","frame":0,"kind":"detection","box":[0,0,1,1],"score":0.5})";
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"{not json", "malformed"},
      {R"({"video_id":"v","frame":0,"kind":"detection","box":[0,0,1,1]})",
       "score"},
      {R"({"video_id":"v","frame":-1,"kind":"detection","box":[0,0,1,1],"score":0.5})",
       "frame"},
      {R"({"video_id":"v","frame":0,"kind":"bogus"})", "bogus"},
      {R"({"video_id":"v","frame":0,"kind":"detection","box":[5,0,1,1],"score":0.5})",
       ""},
      {R"({"video_id":"v","frame":0,"kind":"detection","box":[0,0,1,1],"score":1.5})",
       "score"},
      {R"({"video_id":"v","frame":0,"kind":"detection","box":[0,0,1,1],"score":0.5,"x":1})",
       "x"},
      {R"({"video_id":"v","frame":0,"kind":"pair_label","a":"h","b":"h","label":"laeo"})",
       "same box"},
      {R"({"video_id":"v","frame":0,"kind":"pair_label","a":"h","b":"g","label":"maybe"})",
       ""},
      {R"({"video_id":"v","frame":5,"kind":"shot_boundary","shot_id":"s","end_frame":2})",
       "ends before"},
      {R"({"video_id":"v","frame":0,"kind":"track","track_id":1,"boxes":[[0,0,1,1]],"scores":[],"interpolated":[false]})",
       "length"},
      {R"({"video_id":"v","frame":0,"kind":"pose","id":"h","pose":[9,0,0]})",
       ""},
  };
  for (const auto& [line, needle] : bad) {
    CAPTURE(line);
    const std::string text = good + "\n\n" + good + "\n" + line + "\n";
    const std::string msg = ErrorOf([&] { ParseAnnotations(text, "a.jsonl"); });
    CHECK(msg.rfind("a.jsonl:4: ", 0) == 0);
    CHECK(msg.find(needle) != std::string::npos);
  }
  CHECK(ParseAnnotations("", "e").empty());
  CHECK(ParseAnnotations("\n  \n", "e").empty());
}

TEST_CASE("annotation set validation") {
  auto parse = [](const std::string& s) { return ParseAnnotations(s, "s"); };
  CHECK_THROWS(ValidateAnnotationSet(parse(
      R"({"video_id":"v","frame":0,"kind":"head_box","id":"h","box":[0,0,1,1]}
{"video_id":"v","frame":0,"kind":"head_box","id":"h","box":[2,0,3,1]})")));
  // same id in another frame is fine
  CHECK_NOTHROW(ValidateAnnotationSet(parse(
      R"({"video_id":"v","frame":0,"kind":"head_box","id":"h","box":[0,0,1,1]}
{"video_id":"v","frame":1,"kind":"head_box","id":"h","box":[2,0,3,1]})")));
  CHECK_THROWS(ValidateAnnotationSet(parse(
      R"({"video_id":"v","frame":0,"kind":"head_box","id":"h","box":[0,0,1,1]}
{"video_id":"v","frame":1,"kind":"pair_label","a":"h","b":"g","label":"laeo"})")));
  CHECK_THROWS(ValidateAnnotationSet(
      parse(R"({"video_id":"v","frame":0,"kind":"pose","id":"q","pose":[0,0,0]})")));
}

TEST_CASE("scores csv layout") {
  BoxedFrameScore s;
  s.score = {"vid", 1, 2, 7, 0.25};
  s.left_box = {0, 1, 10, 11};
  s.right_box = {20, 1, 30, 11.5};
  CHECK(ScoresCsv({s}) ==
        "video_id,frame,left_box,right_box,score\nvid,7,0 1 10 11,20 1 30 "
        "11.5,0.25\n");
}

TEST_CASE("run config defaults, unknown keys and overrides") {
  const RunConfig d;
  const Json j = ToJson(d);
  CHECK(RunConfigFromJson(j).seed == d.seed);
  CHECK(ToJson(RunConfigFromJson(j)) == j);
  CHECK(ToJson(RunConfigFromJson(Json::object())) == j);

  const std::string msg = ErrorOf(
      [] { RunConfigFromJson(Json::parse(R"({"train":{"lr_int":1}})")); });
  CHECK(msg.find("train.lr_int") != std::string::npos);
  CHECK_THROWS(RunConfigFromJson(Json::parse(R"({"bogus":1})")));
  CHECK_THROWS(RunConfigFromJson(Json::parse(R"({"train":{"lr_init":"x"}})")));
  CHECK_THROWS(RunConfigFromJson(Json::parse(R"({"model":{"K":4}})")));

  RunConfig c;
  ApplyOverride(c, "train.lr_init=0.001");
  CHECK(c.train.lr_init == 0.001);
  ApplyOverride(c, "seed=42");
  CHECK(c.seed == 42);
  ApplyOverride(c, "io.frames=123");
  CHECK(c.io.frames == "123");
  ApplyOverride(c, "eval.match_mode=ioha_bodies");
  CHECK(c.eval.match_mode == MatchMode::kIohaBodies);
  ApplyOverride(c, "model.K=4");
  CHECK_THROWS(c.Validate());
  ApplyOverride(c, "synth.K=4");
  CHECK(c.model.K == 4);
  CHECK_THROWS(ApplyOverride(c, "train.nope=1"));
  CHECK_THROWS(ApplyOverride(c, "train.lr_init"));
  c.Validate();
  ApplyOverride(c, "score.stride=0");
  CHECK_THROWS(c.Validate());

  CHECK(ConfigDigest(RunConfig{}) == ConfigDigest(RunConfig{}));
  CHECK(ConfigDigest(c) != ConfigDigest(RunConfig{}));
  CHECK(ConfigDigest(SmallModel()) != ConfigDigest(LaeoNetConfig{}));
  CHECK(LaeoNetConfigFromJson(ToJson(SmallModel())) == SmallModel());
}

TEST_CASE("checkpoint round-trip and digest checks") {
  const fs::path dir = TempDir("ckpt");
  Checkpoint c;
  c.config = SmallModel();
  c.params = LaeoNet(c.config).InitParams(3);
  c.params.frozen.insert(ParamGroup::kHeadPose);
  c.pose_head = PoseHead{{{"pose.w", ParamGroup::kPoseOutput, {3, 2},
                           {1, 2, 3, 4, 5, -6.5}},
                          {"pose.b", ParamGroup::kPoseOutput, {3}, {0, 0, 1e-300}}}};
  c.metadata = {{"epochs", 2}};
  SaveCheckpoint(dir / "a.ckpt", c);
  const Checkpoint back = LoadCheckpoint(dir / "a.ckpt", c.config);
  CHECK(back.config == c.config);
  CHECK(back.params.frozen == c.params.frozen);
  REQUIRE(back.params.arrays.size() == c.params.arrays.size());
  for (size_t i = 0; i < c.params.arrays.size(); ++i) {
    CHECK(back.params.arrays[i].name == c.params.arrays[i].name);
    CHECK(back.params.arrays[i].values == c.params.arrays[i].values);
  }
  REQUIRE(back.pose_head);
  CHECK(back.pose_head->arrays[1].values[2] == 1e-300);
  CHECK(back.metadata == c.metadata);

  LaeoNetConfig other = c.config;
  other.fusion_hidden_units = 16;
  CHECK_THROWS(LoadCheckpoint(dir / "a.ckpt", other));

  // stored digest disagreeing with the stored config
  Json raw = Json::from_cbor(ReadFile(dir / "a.ckpt"));
  raw["config_digest"] = std::string(64, '0');
  const auto bytes = Json::to_cbor(raw);
  WriteFile(dir / "b.ckpt", std::string(bytes.begin(), bytes.end()));
  CHECK(ErrorOf([&] { LoadCheckpoint(dir / "b.ckpt"); }).find("digest") !=
        std::string::npos);

  std::string truncated = ReadFile(dir / "a.ckpt");
  truncated.resize(truncated.size() / 2);
  WriteFile(dir / "c.ckpt", truncated);
  CHECK_THROWS_AS(LoadCheckpoint(dir / "c.ckpt"), std::runtime_error);
  CHECK_THROWS(LoadCheckpoint(dir / "missing.ckpt"));
}

TEST_CASE("sample archives are byte-deterministic and lossless") {
  const auto heads = ProceduralHeadSet(8, 2);
  SynthConfig cfg;
  const auto corpus = GenerateSyntheticCorpus(heads, 2, 3, cfg, 5);
  SampleArchive a{corpus.samples, corpus.provenance};
  const std::string bytes = SerializeSamples(a);
  CHECK(bytes == SerializeSamples(a));
  CHECK(bytes == SerializeSamples(SampleArchive{
                     GenerateSyntheticCorpus(heads, 2, 3, cfg, 5).samples,
                     corpus.provenance}));
  const SampleArchive back = DeserializeSamples(bytes);
  REQUIRE(back.samples.size() == 5);
  CHECK(back.provenance == a.provenance);
  for (size_t i = 0; i < 5; ++i) {
    const auto& x = a.samples[i];
    const auto& y = back.samples[i];
    CHECK(y.label == x.label);
    CHECK(y.geometry.dx == x.geometry.dx);
    CHECK(y.geometry.scale_ratio == x.geometry.scale_ratio);
    REQUIRE(y.K() == x.K());
    for (int k = 0; k < x.K(); ++k) {
      CHECK(std::equal(x.left_crops[k].data().begin(), x.left_crops[k].data().end(),
                       y.left_crops[k].data().begin()));
      CHECK(std::equal(x.right_crops[k].data().begin(),
                       x.right_crops[k].data().end(),
                       y.right_crops[k].data().begin()));
    }
    CHECK(std::equal(x.head_map.data().begin(), x.head_map.data().end(),
                     y.head_map.data().begin()));
  }
  CHECK(SerializeSamples(back) == bytes);
  CHECK_THROWS(DeserializeSamples(bytes.substr(0, bytes.size() - 10)));
  CHECK_THROWS(SerializeSamples(SampleArchive{a.samples, {"one"}}));
}

TEST_CASE("directory frame provider") {
  const fs::path dir = TempDir("frames");
  fs::create_directories(dir / "v");
  Image im(2, 3, 3, 0.0f);
  im.at(1, 2, 0) = 200.0f;
  WritePpm(dir / "v" / "000004.ppm", im);
  WritePpm(dir / "v" / "7.ppm", im);
  DirectoryFrameProvider p(dir);
  CHECK(p.Frame("v", 4).at(1, 2, 0) == 200.0f);
  CHECK(p.Frame("v", 7).width() == 3);
  CHECK_THROWS(p.Frame("v", 5));
  CHECK_THROWS(DirectoryFrameProvider(dir / "nope"));
}
