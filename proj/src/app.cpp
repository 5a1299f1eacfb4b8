#include "laeo/app.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "laeo/headmap.hpp"
#include "laeo/io.hpp"

namespace laeo {

void ParallelFor(size_t n, int workers,
                 const std::function<void(size_t)>& fn) {
  size_t threads = workers > 0 ? static_cast<size_t>(workers)
                               : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

namespace fs = std::filesystem;

// seed streams
enum : uint64_t {
  kHeadsStream = 1,
  kPoseSeqStream = 2,
  kInitStream = 3,
  kPoseHeadStream = 4,
  kPretrainStream = 5,
  kTrainStream = 6,
  kSynthStream = 7,
};

std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

// One command invocation: collects inputs and outputs for the manifest.
class Run {
 public:
  Run(std::string command, RunConfig config, fs::path output)
      : command_(std::move(command)),
        config_(std::move(config)),
        output_(std::move(output)) {
    fs::create_directories(output_);
  }

  const RunConfig& config() const { return config_; }
  const fs::path& dir() const { return output_; }

  // Returns the path after checking it was given.
  fs::path Input(const std::string& role, const std::string& path) {
    if (path.empty()) {
      throw std::invalid_argument("missing input '" + role + "'");
    }
    const fs::path p(path);
    if (fs::is_directory(p)) {
      inputs_.push_back({{"role", role}, {"path", p.string()}});
    } else {
      inputs_.push_back(
          {{"role", role}, {"path", p.string()}, {"sha256", Sha256File(p)}});
    }
    return p;
  }

  void Output(const std::string& name, std::string_view bytes) {
    WriteFile(output_ / name, bytes);
    Record(name);
  }

  // For files written by other means.
  void Record(const std::string& name) {
    outputs_.push_back({{"path", (output_ / name).string()},
                        {"sha256", Sha256File(output_ / name)}});
  }

  void WriteManifest() const {
    Json m = {{"command", command_},
              {"seed", config_.seed},
              {"config_digest", ConfigDigest(config_)},
              {"model_digest", ConfigDigest(config_.model)},
              {"config", ToJson(config_)},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"timestamp", UtcTimestamp()}};
    WriteFile(output_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  RunConfig config_;
  fs::path output_;
  Json inputs_ = Json::array();
  Json outputs_ = Json::array();
};

std::vector<AnnotationRecord> OfKind(std::vector<AnnotationRecord> rs,
                                     RecordKind kind) {
  std::erase_if(rs, [&](const AnnotationRecord& r) { return r.kind != kind; });
  return rs;
}

std::vector<BoxedFrameScore> ReadFrameScores(const fs::path& p) {
  std::vector<BoxedFrameScore> out;
  for (const auto& r : OfKind(ReadAnnotations(p), RecordKind::kFrameScore)) {
    out.push_back(FrameScoreFromRecord(r));
  }
  return out;
}

// ---- track ------------------------------------------------------------------

void CmdTrack(Run& run, std::ostream& out) {
  const RunConfig& cfg = run.config();
  const auto by_video =
      DetectionsByVideo(ReadAnnotations(run.Input("detections", cfg.io.detections)));
  std::vector<const std::pair<const std::string, DetectionSequence>*> videos;
  for (const auto& v : by_video) videos.push_back(&v);
  std::vector<std::vector<HeadTrack>> tracks(videos.size());
  ParallelFor(videos.size(), cfg.score.workers, [&](size_t i) {
    tracks[i] = RunLinker(videos[i]->second, cfg.linker);
  });
  std::vector<AnnotationRecord> records;
  for (size_t i = 0; i < videos.size(); ++i) {
    for (const auto& t : tracks[i]) {
      records.push_back(TrackToRecord(videos[i]->first, t));
    }
  }
  run.Output("tracks.jsonl", SerializeAnnotations(records));
  out << "tracks: " << records.size() << " over " << videos.size()
      << " videos\n";
}

// ---- score ------------------------------------------------------------------

struct VideoScores {
  std::vector<WindowScore> windows;
  std::vector<BoxedFrameScore> frames;
};

VideoScores ScoreVideo(const std::string& video,
                       const std::vector<HeadTrack>& tracks,
                       const fs::path& frames_dir, const LaeoNet& net,
                       const LaeoNetParams& params, const RunConfig& cfg) {
  VideoScores result;
  const int K = cfg.model.K;
  const auto windows = ExtractPairWindows(tracks, K, cfg.score.stride);
  if (windows.empty()) return result;

  // every frame a window touches, read once
  std::set<int> needed;
  for (const auto& w : windows) {
    for (int f = w.start_frame; f <= w.end_frame(); ++f) needed.insert(f);
  }
  DirectoryFrameProvider provider(frames_dir);
  std::map<std::pair<size_t, int>, Image> crops;
  std::map<int, FrameRect> rects;
  for (int f : needed) {
    const Image frame = provider.Frame(video, f);
    rects[f] = FrameRect{0.0, 0.0, static_cast<double>(frame.width()),
                         static_cast<double>(frame.height())};
    for (size_t t = 0; t < tracks.size(); ++t) {
      if (!tracks[t].covers(f)) continue;
      const BoundingBox box = tracks[t].box_at(f).Scaled(cfg.score.crop_scale);
      crops[{t, f}] = NormalizeCrop(CropAndResize(frame, box));
    }
  }

  for (const auto& w : windows) {
    TrackPairSample s;
    for (int f = w.start_frame; f <= w.end_frame(); ++f) {
      s.left_crops.push_back(crops.at({w.left_track, f}));
      s.right_crops.push_back(crops.at({w.right_track, f}));
    }
    const int c = w.center_frame();
    std::vector<BoundingBox> heads;
    size_t li = 0, ri = 0;
    for (size_t t = 0; t < tracks.size(); ++t) {
      if (!tracks[t].covers(c)) continue;
      if (t == w.left_track) li = heads.size();
      if (t == w.right_track) ri = heads.size();
      heads.push_back(tracks[t].box_at(c));
    }
    const auto& lbox = tracks[w.left_track].box_at(c);
    const auto& rbox = tracks[w.right_track].box_at(c);
    s.head_map = RenderHeadMap(heads, li, ri, rects.at(c), cfg.synth.head_map);
    s.geometry = ComputeGeometryTuple(lbox, rbox, rects.at(c));
    WindowScore ws;
    ws.video_id = video;
    ws.left_track = tracks[w.left_track].track_id;
    ws.right_track = tracks[w.right_track].track_id;
    ws.start_frame = w.start_frame;
    ws.K = K;
    ws.score = ScoreTrackPair(net, s, params);
    result.windows.push_back(ws);
  }

  std::map<int, const HeadTrack*> by_id;
  for (const auto& t : tracks) by_id[t.track_id] = &t;
  for (const auto& f : FrameLevelScores(result.windows)) {
    BoxedFrameScore b;
    b.score = f;
    b.left_box = by_id.at(f.left_track)->box_at(f.frame);
    b.right_box = by_id.at(f.right_track)->box_at(f.frame);
    result.frames.push_back(b);
  }
  return result;
}

void CmdScore(Run& run, std::ostream& out) {
  const RunConfig& cfg = run.config();
  const auto tracks =
      TracksByVideo(ReadAnnotations(run.Input("tracks", cfg.io.tracks)));
  const fs::path frames = run.Input("frames", cfg.io.frames);
  const Checkpoint ckpt =
      LoadCheckpoint(run.Input("checkpoint", cfg.io.checkpoint), cfg.model);
  const LaeoNet net(cfg.model);
  net.CheckParams(ckpt.params);

  std::vector<const std::pair<const std::string, std::vector<HeadTrack>>*>
      videos;
  for (const auto& v : tracks) videos.push_back(&v);
  std::vector<VideoScores> per_video(videos.size());
  ParallelFor(videos.size(), cfg.score.workers, [&](size_t i) {
    per_video[i] = ScoreVideo(videos[i]->first, videos[i]->second, frames, net,
                              ckpt.params, cfg);
  });

  std::vector<AnnotationRecord> window_records, frame_records;
  std::vector<BoxedFrameScore> all_frames;
  for (const auto& v : per_video) {
    for (const auto& w : v.windows) window_records.push_back(WindowScoreToRecord(w));
    for (const auto& f : v.frames) {
      frame_records.push_back(FrameScoreToRecord(f));
      all_frames.push_back(f);
    }
  }
  run.Output("window_scores.jsonl", SerializeAnnotations(window_records));
  run.Output("frame_scores.jsonl", SerializeAnnotations(frame_records));
  run.Output("scores.csv", ScoresCsv(all_frames));
  out << "windows: " << window_records.size()
      << " frame scores: " << frame_records.size() << "\n";
}

// ---- eval -------------------------------------------------------------------

void CmdEval(Run& run, std::ostream& out) {
  const RunConfig& cfg = run.config();
  const auto scores = ReadFrameScores(run.Input("scores", cfg.io.scores));
  const auto gt_records =
      ReadAnnotations(run.Input("ground_truth", cfg.io.ground_truth));
  const GroundTruth gt = GroundTruthFromRecords(gt_records);

  std::set<std::string> gt_videos;
  for (const auto& r : gt_records) gt_videos.insert(r.video_id);
  for (const auto& s : scores) {
    if (!gt_videos.contains(s.score.video_id)) {
      throw std::invalid_argument("scored video '" + s.score.video_id +
                                  "' has no ground truth");
    }
  }

  EvalReport report;
  if (cfg.eval.level == "frame") {
    std::vector<ScoredPair> preds;
    for (const auto& s : scores) {
      preds.push_back(ScoredPair{s.score.video_id, s.score.frame, s.left_box,
                                 s.right_box, s.score.score});
    }
    report = EvaluateFrameLevel(preds, gt.pairs, cfg.eval.match_mode);
  } else {
    std::vector<FramePairScore> fps;
    for (const auto& s : scores) fps.push_back(s.score);
    report = EvaluateShotLevel(fps, gt.shots);
  }

  std::ostringstream curve;
  curve << std::setprecision(17) << "threshold,recall,precision\n";
  for (const auto& p : report.curve) {
    curve << p.threshold << ',' << p.recall << ',' << p.precision << '\n';
  }
  run.Output("pr_curve.csv", curve.str());

  Json j = {{"level", cfg.eval.level},
            {"match_mode", ToString(cfg.eval.match_mode)},
            {"ap", nullptr},
            {"num_positives", report.num_positives},
            {"num_predictions", report.num_predictions},
            {"true_positives", report.true_positives},
            {"pr_curve", "pr_curve.csv"}};
  if (report.ap) j["ap"] = *report.ap;
  if (!report.ap) j["note"] = "no positives in ground truth; AP undefined";
  run.Output("eval_report.json", j.dump(2) + "\n");
  out << "AP: " << (report.ap ? Num(*report.ap) : std::string("undefined"))
      << " (" << report.num_positives << " positives)\n";
}

// ---- synth / pretrain -------------------------------------------------------

std::vector<LabeledHeadImage> Heads(Run& run, int procedural_count) {
  const RunConfig& cfg = run.config();
  if (!cfg.io.pose_list.empty()) {
    return LoadPoseList(run.Input("pose_list", cfg.io.pose_list));
  }
  return ProceduralHeadSet(procedural_count,
                           DeriveSeed(cfg.seed, kHeadsStream));
}

void CmdSynth(Run& run, std::ostream& out) {
  const RunConfig& cfg = run.config();
  const auto heads = Heads(run, cfg.data.num_heads);
  const auto corpus =
      GenerateSyntheticCorpus(heads, cfg.data.num_positives,
                              cfg.data.num_negatives, cfg.synth,
                              DeriveSeed(cfg.seed, kSynthStream));
  run.Output("samples.cbor",
             SerializeSamples(SampleArchive{corpus.samples, corpus.provenance}));
  out << "samples: " << corpus.samples.size() << "\n";
}

void CmdPretrain(Run& run, std::ostream& out) {
  const RunConfig& cfg = run.config();
  const LaeoNet net(cfg.model);
  const auto heads = Heads(run, cfg.data.pretrain_heads);
  const auto seqs = MakePoseSequences(heads, cfg.model.K, cfg.synth.augment,
                                      DeriveSeed(cfg.seed, kPoseSeqStream));
  LaeoNetParams params;
  std::optional<PoseHead> head;
  if (!cfg.io.checkpoint.empty()) {
    Checkpoint c =
        LoadCheckpoint(run.Input("checkpoint", cfg.io.checkpoint), cfg.model);
    params = std::move(c.params);
    head = std::move(c.pose_head);
    params.frozen.erase(ParamGroup::kHeadPose);
  } else {
    params = net.InitParams(DeriveSeed(cfg.seed, kInitStream));
  }
  if (!head) head = net.InitPoseHead(DeriveSeed(cfg.seed, kPoseHeadStream));

  const auto result = PretrainHeadPose(net, std::move(params), *head, seqs, {},
                                       cfg.pretrain,
                                       DeriveSeed(cfg.seed, kPretrainStream));
  std::ostringstream log;
  log << "epoch,step,train_loss,eval_loss,val_loss,lr\n";
  for (const auto& e : result.log) {
    log << e.epoch << ',' << e.step << ',' << Num(e.train_loss) << ','
        << Num(e.eval_loss) << ',' << Num(e.val_loss) << ',' << Num(e.lr)
        << '\n';
  }
  Checkpoint c{cfg.model, result.params, result.head,
               {{"command", "pretrain"}, {"sequences", seqs.size()}}};
  SaveCheckpoint(run.dir() / "checkpoint.ckpt", c);
  run.Record("checkpoint.ckpt");
  run.Output("pretrain_log.csv", log.str());
  if (!result.log.empty()) {
    out << "final train_loss " << Num(result.log.back().train_loss) << "\n";
  }
}

// ---- train ------------------------------------------------------------------

Json VolumeToJson(const nn::Volume& v) {
  std::vector<uint8_t> bytes(v.data.size() * sizeof(double));
  if (!bytes.empty()) std::memcpy(bytes.data(), v.data.data(), bytes.size());
  return {{"dims", {v.c_dim, v.t_dim, v.h_dim, v.w_dim}},
          {"data", Json::binary_t(std::move(bytes))}};
}

nn::Volume VolumeFromJson(const Json& j) {
  const auto d = j.at("dims").get<std::vector<int>>();
  if (d.size() != 4) throw std::runtime_error("volume needs 4 dims");
  nn::Volume v(d[0], d[1], d[2], d[3]);
  const auto& bytes = j.at("data").get_binary();
  if (bytes.size() != v.data.size() * sizeof(double)) {
    throw std::runtime_error("volume size mismatch");
  }
  if (!bytes.empty()) std::memcpy(v.data.data(), bytes.data(), bytes.size());
  return v;
}

std::string SerializeCached(const std::vector<CachedSample>& samples) {
  Json arr = Json::array();
  for (const auto& s : samples) {
    arr.push_back({{"left", VolumeToJson(s.left)},
                   {"right", VolumeToJson(s.right)},
                   {"features", s.features},
                   {"head_map", VolumeToJson(s.head_map)},
                   {"geometry",
                    {s.geometry.dx, s.geometry.dy, s.geometry.scale_ratio}},
                   {"label", s.label}});
  }
  const auto bytes = Json::to_cbor(arr);
  return std::string(bytes.begin(), bytes.end());
}

std::vector<CachedSample> DeserializeCached(const std::string& bytes) {
  std::vector<CachedSample> out;
  for (const auto& e : Json::from_cbor(bytes)) {
    CachedSample s;
    s.left = VolumeFromJson(e.at("left"));
    s.right = VolumeFromJson(e.at("right"));
    s.features = e.at("features").get<bool>();
    s.head_map = VolumeFromJson(e.at("head_map"));
    const auto g = e.at("geometry").get<std::vector<double>>();
    s.geometry = {g.at(0), g.at(1), g.at(2)};
    s.label = e.at("label").get<int>();
    out.push_back(std::move(s));
  }
  return out;
}

std::string HeadPoseDigest(const LaeoNetParams& params) {
  std::string bytes;
  for (const auto& a : params.arrays) {
    if (a.group != ParamGroup::kHeadPose) continue;
    bytes += a.name;
    bytes.append(reinterpret_cast<const char*>(a.values.data()),
                 a.values.size() * sizeof(double));
  }
  return Sha256Hex(bytes);
}

// Network inputs for one archive, reused across runs through the cache
// directory when one is configured.
std::vector<CachedSample> LoadCached(Run& run, const std::string& role,
                                     const std::string& path,
                                     const LaeoNet& net,
                                     const LaeoNetParams& params,
                                     bool features, std::ostream& out) {
  const fs::path p = run.Input(role, path);
  const char* env = std::getenv(kCacheDirEnv);
  fs::path cache_file;
  if (env != nullptr && *env != '\0') {
    const std::string key =
        Sha256Hex(Sha256File(p) + ConfigDigest(net.config()) +
                  (features ? HeadPoseDigest(params) : "pixels"));
    cache_file = fs::path(env) / ("features-" + key + ".cbor");
    if (fs::exists(cache_file)) {
      try {
        auto cached = DeserializeCached(ReadFile(cache_file));
        out << role << ": " << cached.size() << " samples from cache\n";
        return cached;
      } catch (const std::exception&) {
        // damaged entry, rebuild it below
      }
    }
  }
  const SampleArchive archive = LoadSamples(p);
  auto cached = CacheSamples(net, params, archive.samples, features);
  if (!cache_file.empty()) {
    fs::create_directories(cache_file.parent_path());
    WriteFile(cache_file, SerializeCached(cached));
  }
  return cached;
}

void CmdTrain(Run& run, std::ostream& out) {
  const RunConfig& cfg = run.config();
  const LaeoNet net(cfg.model);
  LaeoNetParams params;
  std::optional<PoseHead> head;
  if (!cfg.io.checkpoint.empty()) {
    Checkpoint c =
        LoadCheckpoint(run.Input("checkpoint", cfg.io.checkpoint), cfg.model);
    params = std::move(c.params);
    head = std::move(c.pose_head);
  } else {
    params = net.InitParams(DeriveSeed(cfg.seed, kInitStream));
  }
  if (cfg.train.freeze_head_pose) {
    params.frozen.insert(ParamGroup::kHeadPose);
  } else {
    params.frozen.erase(ParamGroup::kHeadPose);
  }
  const bool features = cfg.train.freeze_head_pose;

  TrainData data;
  data.synthetic = LoadCached(run, "train_samples", cfg.io.train_samples, net,
                              params, features, out);
  if (!cfg.io.real_samples.empty()) {
    data.real = LoadCached(run, "real_samples", cfg.io.real_samples, net,
                           params, features, out);
  }
  if (!cfg.io.val_samples.empty()) {
    data.validation = LoadCached(run, "val_samples", cfg.io.val_samples, net,
                                 params, features, out);
  }

  const auto result = TrainLaeo(net, std::move(params), data, cfg.train,
                                DeriveSeed(cfg.seed, kTrainStream));
  std::ostringstream log;
  log << "epoch,step,loss,val_AP,lr,train_acc\n";
  for (const auto& e : result.log) {
    log << e.epoch << ',' << e.step << ',' << Num(e.loss) << ','
        << Num(e.val_ap) << ',' << Num(e.lr) << ',' << Num(e.train_acc)
        << '\n';
  }
  Checkpoint c{cfg.model, result.params, head,
               {{"command", "train"}, {"epochs", result.log.size()}}};
  SaveCheckpoint(run.dir() / "checkpoint.ckpt", c);
  run.Record("checkpoint.ckpt");
  run.Output("train_log.csv", log.str());
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    out << "epoch " << last.epoch << " loss " << Num(last.loss)
        << " train_acc " << Num(last.train_acc) << " val_AP "
        << Num(last.val_ap) << "\n";
  }
}

// ---- social -----------------------------------------------------------------

void CmdSocial(Run& run, std::ostream& out) {
  const RunConfig& cfg = run.config();
  const auto tracks =
      TracksByVideo(ReadAnnotations(run.Input("tracks", cfg.io.tracks)));
  const CharacterLabels labels =
      ReadCharacterLabels(run.Input("labels", cfg.io.labels));
  std::vector<FramePairScore> scores;
  if (!cfg.io.scores.empty()) {
    for (const auto& s : ReadFrameScores(run.Input("scores", cfg.io.scores))) {
      scores.push_back(s.score);
    }
  }
  std::vector<TrackSpan> spans;
  std::set<std::string> characters;
  for (const auto& [video, ts] : tracks) {
    for (const auto& t : ts) {
      spans.push_back({video, t.track_id, t.start_frame, t.end_frame()});
      const std::string* who = labels.Find(video, t.track_id);
      if (who != nullptr) characters.insert(*who);
    }
  }
  const auto edges =
      Friendsness(spans, labels, scores, cfg.social.laeo_threshold);
  const SocialGraph graph = BuildGraph(
      std::vector<std::string>(characters.begin(), characters.end()), edges);
  run.Output("graph.json", GraphToJson(graph));
  run.Output("edges.csv", EdgeTableCsv(graph));
  run.Output("graph.svg", GraphToSvg(graph));
  out << "characters: " << graph.nodes.size() << " edges: "
      << graph.edges.size() << "\n";
}

// ---- render-headmap ---------------------------------------------------------

void CmdRenderHeadMap(Run& run, std::ostream& out) {
  const RunConfig& cfg = run.config();
  const auto tracks =
      TracksByVideo(ReadAnnotations(run.Input("tracks", cfg.io.tracks)));
  std::string video = cfg.render.video_id;
  if (video.empty()) {
    if (tracks.size() != 1) {
      throw std::invalid_argument(
          "render.video_id is required when tracks span several videos");
    }
    video = tracks.begin()->first;
  }
  const auto it = tracks.find(video);
  if (it == tracks.end()) {
    throw std::invalid_argument("no tracks for video '" + video + "'");
  }
  const int f = cfg.render.frame;
  std::vector<BoundingBox> heads;
  std::optional<size_t> li, ri;
  for (const auto& t : it->second) {
    if (!t.covers(f)) continue;
    if (t.track_id == cfg.render.left_track) li = heads.size();
    if (t.track_id == cfg.render.right_track) ri = heads.size();
    heads.push_back(t.box_at(f));
  }
  if (!li || !ri) {
    throw std::invalid_argument("tracks " + std::to_string(cfg.render.left_track) +
                                " and " + std::to_string(cfg.render.right_track) +
                                " are not both present at frame " +
                                std::to_string(f));
  }
  FrameRect rect{0.0, 0.0, cfg.render.frame_width, cfg.render.frame_height};
  if (rect.width <= 0.0 || rect.height <= 0.0) {
    DirectoryFrameProvider provider(run.Input("frames", cfg.io.frames));
    const Image frame = provider.Frame(video, f);
    rect.width = frame.width();
    rect.height = frame.height();
  }
  const Image map = RenderHeadMap(heads, *li, *ri, rect, cfg.synth.head_map);
  WritePpm(run.dir() / "headmap.ppm", HeadMapToRgb(map));
  run.Record("headmap.ppm");
  out << "head map with " << heads.size() << " heads\n";
}

// ---- argument handling ------------------------------------------------------

struct Args {
  std::string config;
  std::optional<uint64_t> seed;
  std::string output = ".";
  std::vector<std::string> overrides;
  // config key -> value from the named convenience flags
  std::map<std::string, std::string> named;
};

RunConfig MaterializeConfig(const Args& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : LoadRunConfig(a.config);
  for (const auto& o : a.overrides) ApplyOverride(cfg, o);
  for (const auto& [key, value] : a.named) {
    if (!value.empty()) ApplyOverride(cfg, key + "=" + value);
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.Validate();
  return cfg;
}

using Handler = void (*)(Run&, std::ostream&);

struct Command {
  const char* name;
  const char* help;
  Handler handler;
  std::vector<std::pair<const char*, const char*>> flags;  // flag, config key
};

const std::vector<Command>& Commands() {
  static const std::vector<Command> commands = {
      {"track", "link head detections into tracks", CmdTrack,
       {{"--detections", "io.detections"}}},
      {"score", "score track pairs with a trained checkpoint", CmdScore,
       {{"--tracks", "io.tracks"},
        {"--frames", "io.frames"},
        {"--checkpoint", "io.checkpoint"}}},
      {"eval", "average precision of frame scores against ground truth",
       CmdEval,
       {{"--scores", "io.scores"},
        {"--ground-truth", "io.ground_truth"},
        {"--level", "eval.level"},
        {"--mode", "eval.match_mode"}}},
      {"pretrain", "fit the head-pose branch to pose labels", CmdPretrain,
       {{"--pose-list", "io.pose_list"}, {"--checkpoint", "io.checkpoint"}}},
      {"train", "train the pair classifier", CmdTrain,
       {{"--train-samples", "io.train_samples"},
        {"--real-samples", "io.real_samples"},
        {"--val-samples", "io.val_samples"},
        {"--checkpoint", "io.checkpoint"}}},
      {"synth", "generate a synthetic pair archive", CmdSynth,
       {{"--pose-list", "io.pose_list"}}},
      {"social", "character graph from tracks, labels and frame scores",
       CmdSocial,
       {{"--tracks", "io.tracks"},
        {"--labels", "io.labels"},
        {"--scores", "io.scores"},
        {"--threshold", "social.laeo_threshold"}}},
      {"render-headmap", "render the head map of one pair", CmdRenderHeadMap,
       {{"--tracks", "io.tracks"},
        {"--frames", "io.frames"},
        {"--video", "render.video_id"},
        {"--frame", "render.frame"},
        {"--left", "render.left_track"},
        {"--right", "render.right_track"}}},
  };
  return commands;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"laeo: mutual gaze detection in video"};
  app.name("laeo");
  app.require_subcommand(1);
  Args a;
  uint64_t seed = 0;
  std::map<CLI::App*, const Command*> handlers;
  for (const Command& c : Commands()) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", a.config, "run configuration (JSON)");
    sub->add_option("--seed", seed, "overrides the configured seed");
    sub->add_option("--output", a.output, "output directory");
    sub->add_option("--override", a.overrides, "key=value, repeatable")
        ->take_all();
    for (const auto& [flag, key] : c.flags) {
      sub->add_option(flag, a.named[key], std::string("sets ") + key);
    }
    handlers[sub] = &c;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  for (const auto& [sub, command] : handlers) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed") > 0) a.seed = seed;
    try {
      Run run(command->name, MaterializeConfig(a), a.output);
      command->handler(run, out);
      run.WriteManifest();
      return 0;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}

}  // namespace laeo
