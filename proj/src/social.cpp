#include "laeo/social.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace laeo {
namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> SplitCsv(std::string_view line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    const size_t comma = line.find(',', start);
    out.push_back(Trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool Dropped(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return up == "WRONG" || up == "IGNORED";
}

CharacterPair Ordered(const std::string& x, const std::string& y) {
  return x < y ? CharacterPair{x, y} : CharacterPair{y, x};
}

struct FrameKey {
  std::string video;
  int frame;
  auto operator<=>(const FrameKey&) const = default;
};

// Characters present per (video, frame).
std::map<FrameKey, std::set<std::string>> Presence(
    std::span<const TrackSpan> tracks, const CharacterLabels& labels) {
  std::map<FrameKey, std::set<std::string>> present;
  for (const auto& t : tracks) {
    if (t.end_frame < t.start_frame) {
      throw std::invalid_argument("track " + std::to_string(t.track_id) +
                                  " ends before it starts");
    }
    const std::string* who = labels.Find(t.video_id, t.track_id);
    if (who == nullptr) continue;
    for (int f = t.start_frame; f <= t.end_frame; ++f) {
      present[{t.video_id, f}].insert(*who);
    }
  }
  return present;
}

std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

const std::string* CharacterLabels::Find(const std::string& video_id,
                                         int track_id) const {
  if (auto it = by_track.find({video_id, track_id}); it != by_track.end()) {
    return it->second.empty() ? nullptr : &it->second;
  }
  if (auto it = any_video.find(track_id); it != any_video.end()) {
    return &it->second;
  }
  return nullptr;
}

CharacterLabels ParseCharacterLabels(std::string_view csv,
                                     std::string_view source) {
  CharacterLabels labels;
  std::set<int> dropped_any;
  std::istringstream in{std::string(csv)};
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(std::string(source) + ":" +
                             std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (Trim(line).empty() || Trim(line).starts_with('#')) continue;
    const auto f = SplitCsv(line);
    if (f.size() != 2 && f.size() != 3) fail("expected 2 or 3 fields");
    const std::string& id_field = f[f.size() - 2];
    if (id_field == "track_id") continue;  // header
    int id = 0;
    try {
      size_t used = 0;
      id = std::stoi(id_field, &used);
      if (used != id_field.size()) throw std::invalid_argument(id_field);
    } catch (const std::exception&) {
      fail("bad track id '" + id_field + "'");
    }
    const std::string& name = f.back();
    if (name.empty()) fail("empty character name");
    const bool drop = Dropped(name);
    if (f.size() == 3) {
      const TrackKey key{f[0], id};
      if (labels.by_track.contains(key)) fail("track labeled twice");
      labels.by_track[key] = drop ? "" : name;
    } else {
      if (labels.any_video.contains(id) || dropped_any.contains(id)) {
        fail("track labeled twice");
      }
      if (drop) dropped_any.insert(id);
      else labels.any_video[id] = name;
    }
  }
  return labels;
}

CharacterLabels ReadCharacterLabels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseCharacterLabels(ss.str(), path.string());
}

std::map<CharacterPair, int> CoOccurrence(std::span<const TrackSpan> tracks,
                                          const CharacterLabels& labels) {
  std::map<CharacterPair, int> counts;
  for (const auto& [frame, who] : Presence(tracks, labels)) {
    for (auto i = who.begin(); i != who.end(); ++i) {
      for (auto j = std::next(i); j != who.end(); ++j) ++counts[{*i, *j}];
    }
  }
  return counts;
}

std::vector<SocialEdge> Friendsness(std::span<const TrackSpan> tracks,
                                    const CharacterLabels& labels,
                                    std::span<const FramePairScore> scores,
                                    double laeo_threshold) {
  const auto present = Presence(tracks, labels);

  // best score per (video, frame, character pair)
  std::map<std::pair<FrameKey, CharacterPair>, double> best;
  for (const auto& s : scores) {
    const std::string* a = labels.Find(s.video_id, s.left_track);
    const std::string* b = labels.Find(s.video_id, s.right_track);
    if (a == nullptr || b == nullptr || *a == *b) {
      continue;
    }
    const auto key = std::pair{FrameKey{s.video_id, s.frame}, Ordered(*a, *b)};
    auto it = best.find(key);
    if (it == best.end()) best.emplace(key, s.score);
    else it->second = std::max(it->second, s.score);
  }

  std::map<CharacterPair, SocialEdge> edges;
  std::map<CharacterPair, double> sums;
  for (const auto& [frame, who] : present) {
    for (auto i = who.begin(); i != who.end(); ++i) {
      for (auto j = std::next(i); j != who.end(); ++j) {
        const CharacterPair pair{*i, *j};
        SocialEdge& e = edges[pair];
        e.a = *i;
        e.b = *j;
        ++e.cooccur_frames;
        const auto it = best.find({frame, pair});
        const double score = it == best.end() ? 0.0 : it->second;
        sums[pair] += score;
        e.laeo_frames += score >= laeo_threshold;
      }
    }
  }
  std::vector<SocialEdge> out;
  for (auto& [pair, e] : edges) {
    e.ratio = static_cast<double>(e.laeo_frames) / e.cooccur_frames;
    e.mean_laeo_score = sums[pair] / e.cooccur_frames;
    out.push_back(e);
  }
  return out;
}

SocialGraph BuildGraph(std::vector<std::string> characters,
                       std::vector<SocialEdge> edges) {
  SocialGraph g;
  std::set<std::string> nodes(characters.begin(), characters.end());
  std::set<CharacterPair> seen;
  for (auto& e : edges) {
    if (e.a == e.b) throw std::invalid_argument("self edge for " + e.a);
    if (e.b < e.a) std::swap(e.a, e.b);
    if (!seen.insert({e.a, e.b}).second) {
      throw std::invalid_argument("duplicate edge " + e.a + " - " + e.b);
    }
    nodes.insert(e.a);
    nodes.insert(e.b);
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const SocialEdge& x, const SocialEdge& y) {
                     if (x.mean_laeo_score != y.mean_laeo_score) {
                       return x.mean_laeo_score > y.mean_laeo_score;
                     }
                     return std::tie(x.a, x.b) < std::tie(y.a, y.b);
                   });
  g.nodes.assign(nodes.begin(), nodes.end());
  g.edges = std::move(edges);
  return g;
}

std::string GraphToJson(const SocialGraph& g) {
  nlohmann::ordered_json j;
  j["nodes"] = g.nodes;
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges) {
    j["edges"].push_back({{"a", e.a},
                          {"b", e.b},
                          {"weight", e.mean_laeo_score},
                          {"ratio", e.ratio},
                          {"frames", e.cooccur_frames},
                          {"laeo_frames", e.laeo_frames}});
  }
  return j.dump(2) + "\n";
}

SocialGraph GraphFromJson(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  SocialGraph g;
  g.nodes = j.at("nodes").get<std::vector<std::string>>();
  for (const auto& je : j.at("edges")) {
    SocialEdge e;
    e.a = je.at("a").get<std::string>();
    e.b = je.at("b").get<std::string>();
    e.mean_laeo_score = je.at("weight").get<double>();
    e.ratio = je.at("ratio").get<double>();
    e.cooccur_frames = je.at("frames").get<int>();
    e.laeo_frames = je.value("laeo_frames", 0);
    g.edges.push_back(std::move(e));
  }
  return g;
}

std::string EdgeTableCsv(const SocialGraph& g) {
  std::ostringstream out;
  out.precision(17);
  out << "rank,a,b,weight,ratio,frames,laeo_frames\n";
  int rank = 1;
  for (const auto& e : g.edges) {
    out << rank++ << ',' << e.a << ',' << e.b << ',' << e.mean_laeo_score
        << ',' << e.ratio << ',' << e.cooccur_frames << ',' << e.laeo_frames
        << '\n';
  }
  return out.str();
}

std::string GraphToSvg(const SocialGraph& g, int size) {
  std::ostringstream out;
  out.precision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
      << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << ' ' << size
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double c = size / 2.0;
  const double r = size * 0.38;
  std::map<std::string, std::pair<double, double>> pos;
  const size_t n = g.nodes.size();
  for (size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / n -
                     std::numbers::pi / 2.0;
    pos[g.nodes[i]] = {c + r * std::cos(a), c + r * std::sin(a)};
  }
  for (const auto& e : g.edges) {
    const auto [x1, y1] = pos.at(e.a);
    const auto [x2, y2] = pos.at(e.b);
    out << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2
        << "\" y2=\"" << y2 << "\" stroke=\"steelblue\" stroke-width=\""
        << 0.5 + 12.0 * e.mean_laeo_score << "\" stroke-opacity=\"0.8\"/>\n";
  }
  for (const auto& name : g.nodes) {
    const auto [x, y] = pos.at(name);
    out << "<circle cx=\"" << x << "\" cy=\"" << y
        << "\" r=\"18\" fill=\"#f4a261\" stroke=\"black\"/>\n"
        << "<text x=\"" << x << "\" y=\"" << y - 24
        << "\" font-family=\"sans-serif\" font-size=\"14\" "
           "text-anchor=\"middle\">"
        << XmlEscape(name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace laeo
