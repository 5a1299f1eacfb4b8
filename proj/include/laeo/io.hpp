#ifndef LAEO_IO_HPP_
#define LAEO_IO_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "laeo/eval.hpp"
#include "laeo/model.hpp"
#include "laeo/pipeline.hpp"
#include "laeo/social.hpp"
#include "laeo/synthgen.hpp"
#include "laeo/tracker.hpp"

namespace laeo {

using Json = nlohmann::ordered_json;  // keeps key order so records round-trip

std::string Sha256Hex(std::string_view bytes);
std::string Sha256File(const std::filesystem::path& path);

std::string ReadFile(const std::filesystem::path& path);
// Writes through a temporary file and renames it into place.
void WriteFile(const std::filesystem::path& path, std::string_view bytes);

// ---- JSON-lines annotation container -------------------------------------

enum class RecordKind {
  kDetection,
  kHeadBox,
  kBodyBox,
  kPairLabel,
  kPose,
  kShotBoundary,
  kTrack,
  kWindowScore,
  kFrameScore,
};

std::string_view ToString(RecordKind k);
RecordKind RecordKindFromString(std::string_view s);

// One line: {"video_id", "frame", "kind", ...kind-specific fields}.
//   detection      box [x1,y1,x2,y2], score
//   head_box       id, box
//   body_box       id, box
//   pair_label     a, b (box ids of the same frame), label laeo|not_laeo|ambiguous
//   pose           id (box id), pose [yaw,pitch,roll] radians
//   shot_boundary  shot_id, end_frame, optional label (frame is the first frame)
//   track          track_id, boxes, scores, interpolated (frame is the start)
//   window_score   left_track, right_track, K, score (frame is the start)
//   frame_score    left_track, right_track, left_box, right_box, score
struct AnnotationRecord {
  std::string video_id;
  int frame = 0;
  RecordKind kind = RecordKind::kDetection;
  Json fields = Json::object();  // everything except video_id/frame/kind

  bool operator==(const AnnotationRecord&) const = default;
};

// Throws std::invalid_argument describing the first schema violation.
AnnotationRecord ParseRecord(std::string_view line);
std::string SerializeRecord(const AnnotationRecord& r);

// Blank lines are skipped. Errors are std::runtime_error("path:line: ...").
std::vector<AnnotationRecord> ReadAnnotations(const std::filesystem::path& p);
std::vector<AnnotationRecord> ParseAnnotations(std::string_view text,
                                               std::string_view source);
std::string SerializeAnnotations(const std::vector<AnnotationRecord>& rs);

// Box ids unique per (video, frame); pair labels and poses reference boxes of
// their frame. Throws std::invalid_argument.
void ValidateAnnotationSet(const std::vector<AnnotationRecord>& rs);

BoundingBox BoxFromJson(const Json& j);
Json BoxToJson(const BoundingBox& b);

// Detection records grouped per video, in video-name order.
std::map<std::string, DetectionSequence> DetectionsByVideo(
    const std::vector<AnnotationRecord>& rs);

AnnotationRecord TrackToRecord(const std::string& video_id,
                               const HeadTrack& t);
HeadTrack TrackFromRecord(const AnnotationRecord& r);
std::map<std::string, std::vector<HeadTrack>> TracksByVideo(
    const std::vector<AnnotationRecord>& rs);

AnnotationRecord WindowScoreToRecord(const WindowScore& w);
WindowScore WindowScoreFromRecord(const AnnotationRecord& r);

// Frame score with the two head boxes of that frame.
struct BoxedFrameScore {
  FramePairScore score;
  BoundingBox left_box{0, 0, 1, 1};
  BoundingBox right_box{0, 0, 1, 1};
};
AnnotationRecord FrameScoreToRecord(const BoxedFrameScore& s);
BoxedFrameScore FrameScoreFromRecord(const AnnotationRecord& r);

struct GroundTruth {
  std::vector<GroundTruthPair> pairs;
  std::vector<Shot> shots;
};
// Pairs come from pair_label records, shots from shot_boundary records.
GroundTruth GroundTruthFromRecords(const std::vector<AnnotationRecord>& rs);

// Scores CSV: video_id,frame,left_box,right_box,score with boxes written as
// "x1 y1 x2 y2".
std::string ScoresCsv(const std::vector<BoxedFrameScore>& scores);

// ---- run configuration ----------------------------------------------------

struct ScoreOptions {
  int stride = 1;
  double crop_scale = 1.0;  // box growth about its center before cropping
  int workers = 0;          // 0: hardware concurrency
};

struct EvalOptions {
  std::string level = "frame";  // frame | shot
  MatchMode match_mode = MatchMode::kIouHeads;
};

struct DataOptions {
  int num_heads = 24;        // procedural heads when no pose list is given
  int num_positives = 16;
  int num_negatives = 16;
  int pretrain_heads = 64;
};

struct RenderOptions {
  std::string video_id;
  int frame = 0;
  int left_track = 0;
  int right_track = 1;
  double frame_width = 0.0;  // 0: from io.frames
  double frame_height = 0.0;
};

struct SocialOptions {
  double laeo_threshold = 0.5;
};

struct IoPaths {
  std::string detections;
  std::string tracks;
  std::string frames;
  std::string checkpoint;
  std::string scores;
  std::string ground_truth;
  std::string labels;
  std::string pose_list;
  std::string train_samples;
  std::string real_samples;
  std::string val_samples;
};

struct RunConfig {
  uint64_t seed = 0;
  LaeoNetConfig model;
  PretrainConfig pretrain;
  TrainConfig train;
  LinkerConfig linker;
  SynthConfig synth;
  ScoreOptions score;
  EvalOptions eval;
  DataOptions data;
  RenderOptions render;
  SocialOptions social;
  IoPaths io;

  void Validate() const;
};

// Every field, defaults included.
Json ToJson(const RunConfig& c);
// Missing keys keep their defaults; unknown keys throw std::invalid_argument
// naming the dotted path.
RunConfig RunConfigFromJson(const Json& j);
RunConfig LoadRunConfig(const std::filesystem::path& path);

// "train.lr_init=1e-3". The value is parsed as JSON when possible and taken as
// a string otherwise. The key must exist. Cross-field checks are left to
// RunConfig::Validate so that coupled keys can be changed one at a time.
void ApplyOverride(RunConfig& c, std::string_view assignment);

Json ToJson(const LaeoNetConfig& c);
LaeoNetConfig LaeoNetConfigFromJson(const Json& j);
// Digest of the canonical architecture description.
std::string ConfigDigest(const LaeoNetConfig& c);
std::string ConfigDigest(const RunConfig& c);

// ---- checkpoints -----------------------------------------------------------

struct Checkpoint {
  LaeoNetConfig config;
  LaeoNetParams params;
  std::optional<PoseHead> pose_head;
  Json metadata = Json::object();
};

// CBOR container: format tag, version, config digest, config, named arrays
// (raw float64), frozen groups, optional pose head.
void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& c);
// Throws std::runtime_error when the file is damaged or its stored digest
// does not match the stored config.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);
// Additionally refuses a checkpoint whose digest differs from `expected`.
Checkpoint LoadCheckpoint(const std::filesystem::path& path,
                          const LaeoNetConfig& expected);

// ---- sample archives -------------------------------------------------------

struct SampleArchive {
  std::vector<TrackPairSample> samples;
  std::vector<std::string> provenance;  // empty or one per sample
};

// CBOR with float32 pixel blocks; identical inputs give identical bytes.
std::string SerializeSamples(const SampleArchive& a);
SampleArchive DeserializeSamples(std::string_view bytes);
void SaveSamples(const std::filesystem::path& path, const SampleArchive& a);
SampleArchive LoadSamples(const std::filesystem::path& path);

// ---- frames -----------------------------------------------------------------

class FrameProvider {
 public:
  virtual ~FrameProvider() = default;
  // Pixel values in [0,255]. Throws std::runtime_error when missing.
  virtual Image Frame(const std::string& video_id, int frame) = 0;
};

// root/<video_id>/<frame>.ppm with the frame number zero-padded to 6 digits
// (unpadded names are accepted too).
class DirectoryFrameProvider : public FrameProvider {
 public:
  explicit DirectoryFrameProvider(std::filesystem::path root);
  Image Frame(const std::string& video_id, int frame) override;
  std::filesystem::path FramePath(const std::string& video_id,
                                  int frame) const;

 private:
  std::filesystem::path root_;
  std::string cached_video_;
  int cached_frame_ = -1;
  Image cached_;
};

}  // namespace laeo

#endif  // LAEO_IO_HPP_
