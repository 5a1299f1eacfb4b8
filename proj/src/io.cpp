#include "laeo/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace laeo {
namespace {

using OJson = nlohmann::ordered_json;

[[noreturn]] void Bad(const std::string& what) {
  throw std::invalid_argument(what);
}

const Json& Field(const Json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) Bad(std::string("missing field '") + name + "'");
  return *it;
}

int IntField(const Json& j, const char* name) {
  const Json& v = Field(j, name);
  if (!v.is_number_integer()) Bad(std::string("'") + name + "' must be an integer");
  return v.get<int>();
}

double NumberField(const Json& j, const char* name) {
  const Json& v = Field(j, name);
  if (!v.is_number()) Bad(std::string("'") + name + "' must be a number");
  return v.get<double>();
}

std::string StringField(const Json& j, const char* name) {
  const Json& v = Field(j, name);
  if (!v.is_string()) Bad(std::string("'") + name + "' must be a string");
  return v.get<std::string>();
}

double Score01(const Json& j, const char* name) {
  const double s = NumberField(j, name);
  if (!(s >= 0.0 && s <= 1.0)) Bad(std::string("'") + name + "' outside [0,1]");
  return s;
}

void OnlyFields(const Json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      Bad("unexpected field '" + key + "'");
    }
  }
}

void ValidateFields(RecordKind kind, int frame, const Json& f) {
  switch (kind) {
    case RecordKind::kDetection:
      OnlyFields(f, {"box", "score"});
      BoxFromJson(Field(f, "box"));
      Score01(f, "score");
      break;
    case RecordKind::kHeadBox:
    case RecordKind::kBodyBox:
      OnlyFields(f, {"id", "box"});
      StringField(f, "id");
      BoxFromJson(Field(f, "box"));
      break;
    case RecordKind::kPairLabel:
      OnlyFields(f, {"a", "b", "label"});
      if (StringField(f, "a") == StringField(f, "b")) {
        Bad("pair label references the same box twice");
      }
      PairLabelFromString(StringField(f, "label"));
      break;
    case RecordKind::kPose: {
      OnlyFields(f, {"id", "pose"});
      StringField(f, "id");
      const Json& p = Field(f, "pose");
      if (!p.is_array() || p.size() != 3) Bad("'pose' must be [yaw,pitch,roll]");
      for (const auto& a : p) {
        if (!a.is_number()) Bad("pose angles must be numbers");
      }
      PoseAngles(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      break;
    }
    case RecordKind::kShotBoundary:
      OnlyFields(f, {"shot_id", "end_frame", "label"});
      StringField(f, "shot_id");
      if (IntField(f, "end_frame") < frame) Bad("shot ends before it starts");
      if (f.contains("label")) PairLabelFromString(StringField(f, "label"));
      break;
    case RecordKind::kTrack: {
      OnlyFields(f, {"track_id", "boxes", "scores", "interpolated"});
      IntField(f, "track_id");
      const Json& boxes = Field(f, "boxes");
      const Json& scores = Field(f, "scores");
      const Json& interp = Field(f, "interpolated");
      if (!boxes.is_array() || boxes.empty()) Bad("'boxes' must be non-empty");
      if (!scores.is_array() || scores.size() != boxes.size() ||
          !interp.is_array() || interp.size() != boxes.size()) {
        Bad("track arrays disagree in length");
      }
      for (const auto& b : boxes) BoxFromJson(b);
      for (const auto& s : scores) {
        if (!s.is_number()) Bad("track scores must be numbers");
      }
      for (const auto& m : interp) {
        if (!m.is_boolean()) Bad("'interpolated' entries must be booleans");
      }
      break;
    }
    case RecordKind::kWindowScore:
      OnlyFields(f, {"left_track", "right_track", "K", "score"});
      IntField(f, "left_track");
      IntField(f, "right_track");
      if (IntField(f, "K") < 1) Bad("'K' must be >= 1");
      Score01(f, "score");
      break;
    case RecordKind::kFrameScore:
      OnlyFields(f, {"left_track", "right_track", "left_box", "right_box",
                     "score"});
      IntField(f, "left_track");
      IntField(f, "right_track");
      BoxFromJson(Field(f, "left_box"));
      BoxFromJson(Field(f, "right_box"));
      Score01(f, "score");
      break;
  }
}

std::string BoxText(const BoundingBox& b) {
  std::ostringstream s;
  s.precision(17);
  s << b.x1() << ' ' << b.y1() << ' ' << b.x2() << ' ' << b.y2();
  return s.str();
}

}  // namespace

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string Sha256File(const std::filesystem::path& path) {
  return Sha256Hex(ReadFile(path));
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string_view ToString(RecordKind k) {
  switch (k) {
    case RecordKind::kDetection: return "detection";
    case RecordKind::kHeadBox: return "head_box";
    case RecordKind::kBodyBox: return "body_box";
    case RecordKind::kPairLabel: return "pair_label";
    case RecordKind::kPose: return "pose";
    case RecordKind::kShotBoundary: return "shot_boundary";
    case RecordKind::kTrack: return "track";
    case RecordKind::kWindowScore: return "window_score";
    case RecordKind::kFrameScore: return "frame_score";
  }
  return "unknown";
}

RecordKind RecordKindFromString(std::string_view s) {
  for (int k = 0; k <= static_cast<int>(RecordKind::kFrameScore); ++k) {
    if (ToString(static_cast<RecordKind>(k)) == s) {
      return static_cast<RecordKind>(k);
    }
  }
  Bad("unknown record kind '" + std::string(s) + "'");
}

BoundingBox BoxFromJson(const Json& j) {
  if (!j.is_array() || j.size() != 4) Bad("box must be [x1,y1,x2,y2]");
  for (const auto& v : j) {
    if (!v.is_number()) Bad("box coordinates must be numbers");
  }
  return BoundingBox(j[0].get<double>(), j[1].get<double>(),
                     j[2].get<double>(), j[3].get<double>());
}

Json BoxToJson(const BoundingBox& b) {
  return Json::array({b.x1(), b.y1(), b.x2(), b.y2()});
}

AnnotationRecord ParseRecord(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    Bad(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) Bad("record must be a JSON object");
  AnnotationRecord r;
  r.video_id = StringField(j, "video_id");
  if (r.video_id.empty()) Bad("empty video_id");
  r.frame = IntField(j, "frame");
  if (r.frame < 0) Bad("frame must be >= 0");
  r.kind = RecordKindFromString(StringField(j, "kind"));
  j.erase("video_id");
  j.erase("frame");
  j.erase("kind");
  ValidateFields(r.kind, r.frame, j);
  r.fields = std::move(j);
  return r;
}

std::string SerializeRecord(const AnnotationRecord& r) {
  OJson o;
  o["video_id"] = r.video_id;
  o["frame"] = r.frame;
  o["kind"] = ToString(r.kind);
  for (const auto& [k, v] : r.fields.items()) o[k] = v;
  return o.dump();
}

std::vector<AnnotationRecord> ParseAnnotations(std::string_view text,
                                               std::string_view source) {
  std::vector<AnnotationRecord> out;
  size_t start = 0;
  int lineno = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++lineno;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(ParseRecord(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(source) + ":" +
                               std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotationRecord> ReadAnnotations(const std::filesystem::path& p) {
  return ParseAnnotations(ReadFile(p), p.string());
}

std::string SerializeAnnotations(const std::vector<AnnotationRecord>& rs) {
  std::string out;
  for (const auto& r : rs) {
    out += SerializeRecord(r);
    out += '\n';
  }
  return out;
}

void ValidateAnnotationSet(const std::vector<AnnotationRecord>& rs) {
  std::map<std::pair<std::string, int>, std::set<std::string>> boxes;
  for (const auto& r : rs) {
    if (r.kind != RecordKind::kHeadBox && r.kind != RecordKind::kBodyBox) {
      continue;
    }
    const std::string id = r.fields.at("id").get<std::string>();
    if (!boxes[{r.video_id, r.frame}].insert(id).second) {
      Bad("duplicate box id '" + id + "' in " + r.video_id + " frame " +
          std::to_string(r.frame));
    }
  }
  auto require = [&](const AnnotationRecord& r, const std::string& id) {
    const auto it = boxes.find({r.video_id, r.frame});
    if (it == boxes.end() || !it->second.contains(id)) {
      Bad("unknown box id '" + id + "' in " + r.video_id + " frame " +
          std::to_string(r.frame));
    }
  };
  for (const auto& r : rs) {
    if (r.kind == RecordKind::kPairLabel) {
      require(r, r.fields.at("a").get<std::string>());
      require(r, r.fields.at("b").get<std::string>());
    } else if (r.kind == RecordKind::kPose) {
      require(r, r.fields.at("id").get<std::string>());
    }
  }
}

std::map<std::string, DetectionSequence> DetectionsByVideo(
    const std::vector<AnnotationRecord>& rs) {
  std::map<std::string, std::vector<const AnnotationRecord*>> grouped;
  for (const auto& r : rs) {
    if (r.kind == RecordKind::kDetection) grouped[r.video_id].push_back(&r);
  }
  std::map<std::string, DetectionSequence> out;
  for (const auto& [video, recs] : grouped) {
    int lo = recs.front()->frame, hi = lo;
    for (const auto* r : recs) {
      lo = std::min(lo, r->frame);
      hi = std::max(hi, r->frame);
    }
    DetectionSequence seq;
    seq.first_frame = lo;
    seq.frames.resize(hi - lo + 1);
    for (const auto* r : recs) {
      seq.frames[r->frame - lo].emplace_back(
          r->frame, BoxFromJson(r->fields.at("box")),
          r->fields.at("score").get<double>());
    }
    out.emplace(video, std::move(seq));
  }
  return out;
}

AnnotationRecord TrackToRecord(const std::string& video_id,
                               const HeadTrack& t) {
  t.Validate();
  AnnotationRecord r;
  r.video_id = video_id;
  r.frame = t.start_frame;
  r.kind = RecordKind::kTrack;
  Json boxes = Json::array(), scores = Json::array(), interp = Json::array();
  for (int i = 0; i < t.length(); ++i) {
    boxes.push_back(BoxToJson(t.boxes[i]));
    scores.push_back(t.per_frame_scores[i]);
    interp.push_back(static_cast<bool>(t.interpolated_mask[i]));
  }
  r.fields = {{"track_id", t.track_id},
              {"boxes", boxes},
              {"scores", scores},
              {"interpolated", interp}};
  return r;
}

HeadTrack TrackFromRecord(const AnnotationRecord& r) {
  if (r.kind != RecordKind::kTrack) Bad("not a track record");
  HeadTrack t;
  t.track_id = r.fields.at("track_id").get<int>();
  t.start_frame = r.frame;
  for (const auto& b : r.fields.at("boxes")) t.boxes.push_back(BoxFromJson(b));
  for (const auto& s : r.fields.at("scores")) {
    t.per_frame_scores.push_back(s.get<double>());
  }
  for (const auto& m : r.fields.at("interpolated")) {
    t.interpolated_mask.push_back(m.get<bool>());
  }
  t.source_detection.assign(t.boxes.size(), -1);
  t.Validate();
  return t;
}

std::map<std::string, std::vector<HeadTrack>> TracksByVideo(
    const std::vector<AnnotationRecord>& rs) {
  std::map<std::string, std::vector<HeadTrack>> out;
  for (const auto& r : rs) {
    if (r.kind != RecordKind::kTrack) continue;
    auto& v = out[r.video_id];
    v.push_back(TrackFromRecord(r));
    for (size_t i = 0; i + 1 < v.size(); ++i) {
      if (v[i].track_id == v.back().track_id) {
        Bad("duplicate track id " + std::to_string(v.back().track_id) +
            " in " + r.video_id);
      }
    }
  }
  return out;
}

AnnotationRecord WindowScoreToRecord(const WindowScore& w) {
  AnnotationRecord r;
  r.video_id = w.video_id;
  r.frame = w.start_frame;
  r.kind = RecordKind::kWindowScore;
  r.fields = {{"left_track", w.left_track},
              {"right_track", w.right_track},
              {"K", w.K},
              {"score", w.score}};
  return r;
}

WindowScore WindowScoreFromRecord(const AnnotationRecord& r) {
  if (r.kind != RecordKind::kWindowScore) Bad("not a window_score record");
  WindowScore w;
  w.video_id = r.video_id;
  w.start_frame = r.frame;
  w.left_track = r.fields.at("left_track").get<int>();
  w.right_track = r.fields.at("right_track").get<int>();
  w.K = r.fields.at("K").get<int>();
  w.score = r.fields.at("score").get<double>();
  return w;
}

AnnotationRecord FrameScoreToRecord(const BoxedFrameScore& s) {
  AnnotationRecord r;
  r.video_id = s.score.video_id;
  r.frame = s.score.frame;
  r.kind = RecordKind::kFrameScore;
  r.fields = {{"left_track", s.score.left_track},
              {"right_track", s.score.right_track},
              {"left_box", BoxToJson(s.left_box)},
              {"right_box", BoxToJson(s.right_box)},
              {"score", s.score.score}};
  return r;
}

BoxedFrameScore FrameScoreFromRecord(const AnnotationRecord& r) {
  if (r.kind != RecordKind::kFrameScore) Bad("not a frame_score record");
  BoxedFrameScore s;
  s.score.video_id = r.video_id;
  s.score.frame = r.frame;
  s.score.left_track = r.fields.at("left_track").get<int>();
  s.score.right_track = r.fields.at("right_track").get<int>();
  s.score.score = r.fields.at("score").get<double>();
  s.left_box = BoxFromJson(r.fields.at("left_box"));
  s.right_box = BoxFromJson(r.fields.at("right_box"));
  return s;
}

GroundTruth GroundTruthFromRecords(const std::vector<AnnotationRecord>& rs) {
  ValidateAnnotationSet(rs);
  std::map<std::tuple<std::string, int, std::string>, BoundingBox> boxes;
  for (const auto& r : rs) {
    if (r.kind == RecordKind::kHeadBox || r.kind == RecordKind::kBodyBox) {
      boxes.emplace(std::tuple{r.video_id, r.frame,
                               r.fields.at("id").get<std::string>()},
                    BoxFromJson(r.fields.at("box")));
    }
  }
  GroundTruth gt;
  for (const auto& r : rs) {
    if (r.kind == RecordKind::kPairLabel) {
      GroundTruthPair p;
      p.video_id = r.video_id;
      p.frame = r.frame;
      p.box_a = boxes.at({r.video_id, r.frame, r.fields.at("a")});
      p.box_b = boxes.at({r.video_id, r.frame, r.fields.at("b")});
      p.label = PairLabelFromString(r.fields.at("label").get<std::string>());
      gt.pairs.push_back(p);
    } else if (r.kind == RecordKind::kShotBoundary && r.fields.contains("label")) {
      Shot s;
      s.video_id = r.video_id;
      s.shot_id = r.fields.at("shot_id").get<std::string>();
      s.start_frame = r.frame;
      s.end_frame = r.fields.at("end_frame").get<int>();
      s.label = PairLabelFromString(r.fields.at("label").get<std::string>());
      gt.shots.push_back(s);
    }
  }
  return gt;
}

std::string ScoresCsv(const std::vector<BoxedFrameScore>& scores) {
  std::ostringstream out;
  out.precision(17);
  out << "video_id,frame,left_box,right_box,score\n";
  for (const auto& s : scores) {
    out << s.score.video_id << ',' << s.score.frame << ','
        << BoxText(s.left_box) << ',' << BoxText(s.right_box) << ','
        << s.score.score << '\n';
  }
  return out.str();
}

DirectoryFrameProvider::DirectoryFrameProvider(std::filesystem::path root)
    : root_(std::move(root)) {
  if (!std::filesystem::is_directory(root_)) {
    throw std::runtime_error("frame directory " + root_.string() +
                             " does not exist");
  }
}

std::filesystem::path DirectoryFrameProvider::FramePath(
    const std::string& video_id, int frame) const {
  char padded[32];
  std::snprintf(padded, sizeof padded, "%06d.ppm", frame);
  auto p = root_ / video_id / padded;
  if (std::filesystem::exists(p)) return p;
  return root_ / video_id / (std::to_string(frame) + ".ppm");
}

Image DirectoryFrameProvider::Frame(const std::string& video_id, int frame) {
  if (video_id != cached_video_ || frame != cached_frame_) {
    const auto p = FramePath(video_id, frame);
    if (!std::filesystem::exists(p)) {
      throw std::runtime_error("missing frame " + std::to_string(frame) +
                               " of video " + video_id + " under " +
                               root_.string());
    }
    cached_ = ReadPpm(p);
    cached_video_ = video_id;
    cached_frame_ = frame;
  }
  return cached_;
}

}  // namespace laeo
