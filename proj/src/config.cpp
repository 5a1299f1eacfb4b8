#include <stdexcept>

#include "laeo/io.hpp"

namespace laeo {
namespace {


// Rejects keys of `given` that the defaults do not have. Arrays are leaves.
void CheckKeys(const Json& given, const Json& defaults,
               const std::string& path) {
  if (!given.is_object()) {
    throw std::invalid_argument("'" + (path.empty() ? "<root>" : path) +
                                "' must be an object");
  }
  for (const auto& [key, value] : given.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    const auto it = defaults.find(key);
    if (it == defaults.end()) {
      throw std::invalid_argument("unknown config key '" + here + "'");
    }
    if (it->is_object()) CheckKeys(value, *it, here);
  }
}

void Merge(Json& base, const Json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (base[key].is_object() && value.is_object()) {
      Merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

Json LayerToJson(const ConvLayerSpec& l) {
  return {{"filters", l.filters},
          {"kernel", {l.kh, l.kw, l.kt}},
          {"stride", {l.sh, l.sw, l.st}},
          {"padding", ToString(l.padding)}};
}

ConvLayerSpec LayerFromJson(const Json& j) {
  ConvLayerSpec l;
  l.filters = j.at("filters").get<int>();
  const auto k = j.at("kernel").get<std::vector<int>>();
  const auto s = j.at("stride").get<std::vector<int>>();
  if (k.size() != 3 || s.size() != 3) {
    throw std::invalid_argument("kernel and stride take [h, w, t]");
  }
  l.kh = k[0], l.kw = k[1], l.kt = k[2];
  l.sh = s[0], l.sw = s[1], l.st = s[2];
  l.padding = nn::PaddingFromString(j.value("padding", std::string("same")));
  return l;
}

std::vector<ConvLayerSpec> LayersFromJson(const Json& j) {
  std::vector<ConvLayerSpec> out;
  for (const auto& l : j) {
    CheckKeys(l, LayerToJson(ConvLayerSpec{}), "layer");
    out.push_back(LayerFromJson(l));
  }
  return out;
}

Json LayersToJson(const std::vector<ConvLayerSpec>& ls) {
  Json out = Json::array();
  for (const auto& l : ls) out.push_back(LayerToJson(l));
  return out;
}

}  // namespace

Json ToJson(const LaeoNetConfig& c) {
  return {{"K", c.K},
          {"head_pose_layers", LayersToJson(c.head_pose_layers)},
          {"head_map_layers", LayersToJson(c.head_map_layers)},
          {"fusion_hidden_units", c.fusion_hidden_units},
          {"dropout_rate", c.dropout_rate},
          {"use_geometry_branch", c.use_geometry_branch},
          {"geometry_hidden", c.geometry_hidden},
          {"share_head_pose_weights", c.share_head_pose_weights}};
}

LaeoNetConfig LaeoNetConfigFromJson(const Json& j) {
  CheckKeys(j, ToJson(LaeoNetConfig{}), "model");
  LaeoNetConfig c;
  c.K = j.value("K", c.K);
  if (j.contains("head_pose_layers")) {
    c.head_pose_layers = LayersFromJson(j.at("head_pose_layers"));
  }
  if (j.contains("head_map_layers")) {
    c.head_map_layers = LayersFromJson(j.at("head_map_layers"));
  }
  c.fusion_hidden_units = j.value("fusion_hidden_units", c.fusion_hidden_units);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.use_geometry_branch = j.value("use_geometry_branch", c.use_geometry_branch);
  c.geometry_hidden = j.value("geometry_hidden", c.geometry_hidden);
  c.share_head_pose_weights =
      j.value("share_head_pose_weights", c.share_head_pose_weights);
  c.Validate();
  return c;
}

std::string ConfigDigest(const LaeoNetConfig& c) {
  return Sha256Hex(ToJson(c).dump());
}

std::string ConfigDigest(const RunConfig& c) {
  return Sha256Hex(ToJson(c).dump());
}

Json ToJson(const RunConfig& c) {
  const auto& p = c.pretrain;
  const auto& t = c.train;
  const auto& s = c.synth;
  return {
      {"seed", c.seed},
      {"model", ToJson(c.model)},
      {"pretrain",
       {{"epochs", p.epochs},
        {"batch_size", p.batch_size},
        {"lr", p.lr},
        {"weights",
         {{"yaw", p.weights.yaw},
          {"pitch", p.weights.pitch},
          {"roll", p.weights.roll},
          {"sign", p.weights.sign}}},
        {"adam_beta1", p.adam_beta1},
        {"adam_beta2", p.adam_beta2},
        {"adam_epsilon", p.adam_epsilon}}},
      {"train",
       {{"batch_positives", t.batch_positives},
        {"batch_negatives", t.batch_negatives},
        {"batch_hard", t.batch_hard},
        {"lr_init", t.lr_init},
        {"lr_factor", t.lr_factor},
        {"lr_patience", t.lr_patience},
        {"lr_min", t.lr_min},
        {"synthetic_only_epochs", t.synthetic_only_epochs},
        {"curriculum_step_epochs", t.curriculum_step_epochs},
        {"tau_start", t.tau_start},
        {"tau_step", t.tau_step},
        {"freeze_head_pose", t.freeze_head_pose},
        {"epochs", t.epochs},
        {"steps_per_epoch", t.steps_per_epoch},
        {"refine_epochs", t.refine_epochs},
        {"adam_beta1", t.adam_beta1},
        {"adam_beta2", t.adam_beta2},
        {"adam_epsilon", t.adam_epsilon}}},
      {"linker",
       {{"top_n", c.linker.top_n},
        {"overlap_threshold", c.linker.overlap_threshold},
        {"max_gap", c.linker.max_gap},
        {"direction", ToString(c.linker.direction)}}},
      {"synth",
       {{"K", s.K},
        {"frame_width", s.frame_width},
        {"frame_height", s.frame_height},
        {"min_head_width", s.min_head_width},
        {"max_head_width", s.max_head_width},
        {"max_bystanders", s.max_bystanders},
        {"compatibility",
         {{"yaw_margin", s.compatibility.yaw_margin},
          {"max_pitch_diff", s.compatibility.max_pitch_diff}}},
        {"augment",
         {{"max_shift", s.augment.max_shift},
          {"max_zoom", s.augment.max_zoom},
          {"max_brightness_delta", s.augment.max_brightness_delta},
          {"mirror", s.augment.mirror}}},
        {"head_map",
         {{"map_size", s.head_map.map_size},
          {"sigma_factor", s.head_map.sigma_factor}}}}},
      {"score",
       {{"stride", c.score.stride},
        {"crop_scale", c.score.crop_scale},
        {"workers", c.score.workers}}},
      {"eval",
       {{"level", c.eval.level}, {"match_mode", ToString(c.eval.match_mode)}}},
      {"data",
       {{"num_heads", c.data.num_heads},
        {"num_positives", c.data.num_positives},
        {"num_negatives", c.data.num_negatives},
        {"pretrain_heads", c.data.pretrain_heads}}},
      {"render",
       {{"video_id", c.render.video_id},
        {"frame", c.render.frame},
        {"left_track", c.render.left_track},
        {"right_track", c.render.right_track},
        {"frame_width", c.render.frame_width},
        {"frame_height", c.render.frame_height}}},
      {"social", {{"laeo_threshold", c.social.laeo_threshold}}},
      {"io",
       {{"detections", c.io.detections},
        {"tracks", c.io.tracks},
        {"frames", c.io.frames},
        {"checkpoint", c.io.checkpoint},
        {"scores", c.io.scores},
        {"ground_truth", c.io.ground_truth},
        {"labels", c.io.labels},
        {"pose_list", c.io.pose_list},
        {"train_samples", c.io.train_samples},
        {"real_samples", c.io.real_samples},
        {"val_samples", c.io.val_samples}}},
  };
}

namespace {

RunConfig ParseRunConfig(const Json& given) {
  Json j = ToJson(RunConfig{});
  CheckKeys(given, j, "");
  // layer lists are replaced wholesale
  Merge(j, given);

  RunConfig c;
  try {
    c.seed = j.at("seed").get<uint64_t>();
    c.model = LaeoNetConfigFromJson(j.at("model"));

    const Json& p = j.at("pretrain");
    c.pretrain.epochs = p.at("epochs").get<int>();
    c.pretrain.batch_size = p.at("batch_size").get<int>();
    c.pretrain.lr = p.at("lr").get<double>();
    const Json& w = p.at("weights");
    c.pretrain.weights.yaw = w.at("yaw").get<double>();
    c.pretrain.weights.pitch = w.at("pitch").get<double>();
    c.pretrain.weights.roll = w.at("roll").get<double>();
    c.pretrain.weights.sign = w.at("sign").get<double>();
    c.pretrain.adam_beta1 = p.at("adam_beta1").get<double>();
    c.pretrain.adam_beta2 = p.at("adam_beta2").get<double>();
    c.pretrain.adam_epsilon = p.at("adam_epsilon").get<double>();

    const Json& t = j.at("train");
    auto& tc = c.train;
    tc.batch_positives = t.at("batch_positives").get<int>();
    tc.batch_negatives = t.at("batch_negatives").get<int>();
    tc.batch_hard = t.at("batch_hard").get<int>();
    tc.lr_init = t.at("lr_init").get<double>();
    tc.lr_factor = t.at("lr_factor").get<double>();
    tc.lr_patience = t.at("lr_patience").get<int>();
    tc.lr_min = t.at("lr_min").get<double>();
    tc.synthetic_only_epochs = t.at("synthetic_only_epochs").get<int>();
    tc.curriculum_step_epochs = t.at("curriculum_step_epochs").get<int>();
    tc.tau_start = t.at("tau_start").get<double>();
    tc.tau_step = t.at("tau_step").get<double>();
    tc.freeze_head_pose = t.at("freeze_head_pose").get<bool>();
    tc.epochs = t.at("epochs").get<int>();
    tc.steps_per_epoch = t.at("steps_per_epoch").get<int>();
    tc.refine_epochs = t.at("refine_epochs").get<int>();
    tc.adam_beta1 = t.at("adam_beta1").get<double>();
    tc.adam_beta2 = t.at("adam_beta2").get<double>();
    tc.adam_epsilon = t.at("adam_epsilon").get<double>();

    const Json& l = j.at("linker");
    c.linker.top_n = l.at("top_n").get<int>();
    c.linker.overlap_threshold = l.at("overlap_threshold").get<double>();
    c.linker.max_gap = l.at("max_gap").get<int>();
    c.linker.direction =
        LinkDirectionFromString(l.at("direction").get<std::string>());

    const Json& s = j.at("synth");
    auto& sc = c.synth;
    sc.K = s.at("K").get<int>();
    sc.frame_width = s.at("frame_width").get<double>();
    sc.frame_height = s.at("frame_height").get<double>();
    sc.min_head_width = s.at("min_head_width").get<double>();
    sc.max_head_width = s.at("max_head_width").get<double>();
    sc.max_bystanders = s.at("max_bystanders").get<int>();
    sc.compatibility.yaw_margin =
        s.at("compatibility").at("yaw_margin").get<double>();
    sc.compatibility.max_pitch_diff =
        s.at("compatibility").at("max_pitch_diff").get<double>();
    const Json& a = s.at("augment");
    sc.augment.max_shift = a.at("max_shift").get<double>();
    sc.augment.max_zoom = a.at("max_zoom").get<double>();
    sc.augment.max_brightness_delta = a.at("max_brightness_delta").get<double>();
    sc.augment.mirror = a.at("mirror").get<bool>();
    sc.head_map.map_size = s.at("head_map").at("map_size").get<int>();
    sc.head_map.sigma_factor = s.at("head_map").at("sigma_factor").get<double>();

    const Json& sco = j.at("score");
    c.score.stride = sco.at("stride").get<int>();
    c.score.crop_scale = sco.at("crop_scale").get<double>();
    c.score.workers = sco.at("workers").get<int>();

    c.eval.level = j.at("eval").at("level").get<std::string>();
    c.eval.match_mode =
        MatchModeFromString(j.at("eval").at("match_mode").get<std::string>());

    const Json& d = j.at("data");
    c.data.num_heads = d.at("num_heads").get<int>();
    c.data.num_positives = d.at("num_positives").get<int>();
    c.data.num_negatives = d.at("num_negatives").get<int>();
    c.data.pretrain_heads = d.at("pretrain_heads").get<int>();

    const Json& r = j.at("render");
    c.render.video_id = r.at("video_id").get<std::string>();
    c.render.frame = r.at("frame").get<int>();
    c.render.left_track = r.at("left_track").get<int>();
    c.render.right_track = r.at("right_track").get<int>();
    c.render.frame_width = r.at("frame_width").get<double>();
    c.render.frame_height = r.at("frame_height").get<double>();

    c.social.laeo_threshold = j.at("social").at("laeo_threshold").get<double>();

    const Json& io = j.at("io");
    c.io.detections = io.at("detections").get<std::string>();
    c.io.tracks = io.at("tracks").get<std::string>();
    c.io.frames = io.at("frames").get<std::string>();
    c.io.checkpoint = io.at("checkpoint").get<std::string>();
    c.io.scores = io.at("scores").get<std::string>();
    c.io.ground_truth = io.at("ground_truth").get<std::string>();
    c.io.labels = io.at("labels").get<std::string>();
    c.io.pose_list = io.at("pose_list").get<std::string>();
    c.io.train_samples = io.at("train_samples").get<std::string>();
    c.io.real_samples = io.at("real_samples").get<std::string>();
    c.io.val_samples = io.at("val_samples").get<std::string>();
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  return c;
}

}  // namespace

RunConfig RunConfigFromJson(const Json& given) {
  RunConfig c = ParseRunConfig(given);
  c.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(ReadFile(path));
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return RunConfigFromJson(j);
}

void RunConfig::Validate() const {
  model.Validate();
  pretrain.Validate();
  train.Validate();
  linker.Validate();
  synth.Validate();
  if (synth.K != model.K) {
    throw std::invalid_argument("synth.K must equal model.K");
  }
  if (score.stride < 1) throw std::invalid_argument("score.stride must be >= 1");
  if (!(score.crop_scale > 0.0)) {
    throw std::invalid_argument("score.crop_scale must be positive");
  }
  if (score.workers < 0) throw std::invalid_argument("score.workers must be >= 0");
  if (eval.level != "frame" && eval.level != "shot") {
    throw std::invalid_argument("eval.level must be 'frame' or 'shot'");
  }
  if (data.num_heads < 2 || data.pretrain_heads < 1 ||
      data.num_positives < 0 || data.num_negatives < 0) {
    throw std::invalid_argument("bad data sizes");
  }
  if (!(social.laeo_threshold >= 0.0 && social.laeo_threshold <= 1.0)) {
    throw std::invalid_argument("social.laeo_threshold must lie in [0,1]");
  }
  if (render.frame_width < 0.0 || render.frame_height < 0.0) {
    throw std::invalid_argument("render frame size must be >= 0");
  }
}

void ApplyOverride(RunConfig& c, std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw std::invalid_argument("override must look like key=value, got '" +
                                std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json j = ToJson(c);
  Json* node = &j;
  size_t start = 0;
  for (;;) {
    const size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  // "io.frames=123" should stay a path, not become a number
  if (node->is_string() && !value.is_string()) value = text;
  *node = value;
  c = ParseRunConfig(j);
}

}  // namespace laeo
