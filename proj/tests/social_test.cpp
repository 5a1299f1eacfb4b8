#include <algorithm>
#include <numeric>
#include <set>
#include <random>

#include "doctest.h"
#include "laeo/social.hpp"

using namespace laeo;

namespace {

CharacterLabels Labels(std::initializer_list<std::pair<int, std::string>> l) {
  CharacterLabels labels;
  for (const auto& [id, name] : l) labels.any_video[id] = name;
  return labels;
}

struct OracleEdge {
  int cooccur = 0;
  int laeo = 0;
  double sum = 0.0;
};

// Frame-by-frame recount straight from the definitions.
std::map<CharacterPair, OracleEdge> Oracle(
    const std::vector<TrackSpan>& tracks, const std::map<int, std::string>& who,
    const std::vector<FramePairScore>& scores, double threshold, int frames) {
  std::set<std::string> names;
  for (const auto& [id, n] : who) names.insert(n);
  std::map<CharacterPair, OracleEdge> out;
  for (const std::string& a : names) {
    for (const std::string& b : names) {
      if (!(a < b)) continue;
      for (int f = 0; f < frames; ++f) {
        bool has_a = false, has_b = false;
        for (const auto& t : tracks) {
          if (f < t.start_frame || f > t.end_frame || !who.contains(t.track_id))
            continue;
          has_a |= who.at(t.track_id) == a;
          has_b |= who.at(t.track_id) == b;
        }
        if (!has_a || !has_b) continue;
        double s = 0.0;
        for (const auto& p : scores) {
          if (p.frame != f) continue;
          if (!who.contains(p.left_track) || !who.contains(p.right_track))
            continue;
          const auto& x = who.at(p.left_track);
          const auto& y = who.at(p.right_track);
          if ((x == a && y == b) || (x == b && y == a)) s = std::max(s, p.score);
        }
        auto& e = out[{a, b}];
        ++e.cooccur;
        e.laeo += s >= threshold;
        e.sum += s;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("co-occurrence examples") {
  const auto labels = Labels({{1, "Ross"}, {2, "Rachel"}, {3, "Ross"}});
  SUBCASE("disjoint spans") {
    std::vector<TrackSpan> t{{"v", 1, 0, 4}, {"v", 2, 5, 9}};
    CHECK(CoOccurrence(t, labels).empty());
  }
  SUBCASE("overlapping spans") {
    std::vector<TrackSpan> t{{"v", 1, 0, 9}, {"v", 2, 5, 14}};
    const auto c = CoOccurrence(t, labels);
    REQUIRE(c.size() == 1);
    CHECK(c.at({"Rachel", "Ross"}) == 5);
  }
  SUBCASE("same character twice has no self pair") {
    std::vector<TrackSpan> t{{"v", 1, 0, 9}, {"v", 3, 0, 9}};
    CHECK(CoOccurrence(t, labels).empty());
  }
  SUBCASE("different videos never co-occur") {
    std::vector<TrackSpan> t{{"a", 1, 0, 9}, {"b", 2, 0, 9}};
    CHECK(CoOccurrence(t, labels).empty());
  }
  SUBCASE("two tracks of one character count each frame once") {
    std::vector<TrackSpan> t{{"v", 1, 0, 9}, {"v", 3, 0, 9}, {"v", 2, 0, 9}};
    CHECK(CoOccurrence(t, labels).at({"Rachel", "Ross"}) == 10);
  }
}

TEST_CASE("friendsness worked example") {
  const auto labels = Labels({{1, "Joey"}, {2, "Chandler"}});
  std::vector<TrackSpan> t{{"v", 1, 0, 9}, {"v", 2, 0, 9}};
  std::vector<FramePairScore> s;
  for (int f = 0; f < 10; ++f) s.push_back({"v", 1, 2, f, f < 4 ? 0.9 : 0.1});
  const auto edges = Friendsness(t, labels, s, 0.5);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].a == "Chandler");
  CHECK(edges[0].b == "Joey");
  CHECK(edges[0].cooccur_frames == 10);
  CHECK(edges[0].laeo_frames == 4);
  CHECK(edges[0].ratio == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(edges[0].mean_laeo_score == doctest::Approx(0.42).epsilon(1e-12));

  SUBCASE("all ones and never") {
    for (auto& x : s) x.score = 1.0;
    auto e = Friendsness(t, labels, s);
    CHECK(e[0].ratio == 1.0);
    CHECK(e[0].mean_laeo_score == 1.0);
    e = Friendsness(t, labels, {});
    CHECK(e[0].ratio == 0.0);
    CHECK(e[0].mean_laeo_score == 0.0);
  }
  SUBCASE("missing scores count as zero") {
    s.resize(4);
    const auto e = Friendsness(t, labels, s);
    CHECK(e[0].ratio == doctest::Approx(0.4));
    CHECK(e[0].mean_laeo_score == doctest::Approx(0.36));
  }
}

TEST_CASE("friendsness against a recount oracle") {
  std::mt19937_64 rng(12);
  const std::vector<std::string> cast{"A", "B", "C", "D"};
  for (int trial = 0; trial < 200; ++trial) {
    const int frames = 20;
    std::vector<TrackSpan> tracks;
    std::map<int, std::string> who;
    const int n = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      const int a = static_cast<int>(rng() % frames);
      const int b = static_cast<int>(rng() % frames);
      tracks.push_back({"v", i, std::min(a, b), std::max(a, b)});
      if (rng() % 5) who[i] = cast[rng() % cast.size()];
    }
    std::vector<FramePairScore> scores;
    for (int k = 0; k < 40; ++k) {
      const int i = static_cast<int>(rng() % n), j = static_cast<int>(rng() % n);
      if (i == j) continue;
      scores.push_back({"v", i, j, static_cast<int>(rng() % frames),
                        std::uniform_real_distribution<double>(0, 1)(rng)});
    }
    CharacterLabels labels;
    labels.any_video = who;
    const double threshold = 0.2 + 0.6 * (trial % 4) / 3.0;
    const auto edges = Friendsness(tracks, labels, scores, threshold);
    const auto expected = Oracle(tracks, who, scores, threshold, frames);
    REQUIRE(edges.size() == expected.size());
    for (const auto& e : edges) {
      CHECK(e.a < e.b);
      const auto& o = expected.at({e.a, e.b});
      CHECK(e.cooccur_frames == o.cooccur);
      CHECK(e.laeo_frames == o.laeo);
      CHECK(e.mean_laeo_score == doctest::Approx(o.sum / o.cooccur).epsilon(1e-12));
    }
    CHECK(CoOccurrence(tracks, labels).size() == expected.size());

    // relabeling track ids while keeping characters changes nothing
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 100);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto tracks2 = tracks;
    for (auto& t : tracks2) t.track_id = perm[t.track_id];
    CharacterLabels labels2;
    for (const auto& [id, name] : who) labels2.any_video[perm[id]] = name;
    auto scores2 = scores;
    for (auto& s : scores2) {
      s.left_track = perm[s.left_track];
      s.right_track = perm[s.right_track];
      std::swap(s.left_track, s.right_track);
    }
    const auto edges2 = Friendsness(tracks2, labels2, scores2, threshold);
    REQUIRE(edges2.size() == edges.size());
    for (size_t k = 0; k < edges.size(); ++k) {
      CHECK(edges2[k].ratio == edges[k].ratio);
      CHECK(edges2[k].mean_laeo_score == edges[k].mean_laeo_score);
    }

    // raising the threshold never raises a ratio
    const auto stricter = Friendsness(tracks, labels, scores, threshold + 0.1);
    for (size_t k = 0; k < edges.size(); ++k) {
      CHECK(stricter[k].ratio <= edges[k].ratio);
    }
  }
}

TEST_CASE("character label CSV") {
  const auto l = ParseCharacterLabels(
      "track_id,name\n1,Monica\n2,WRONG\n3, Phoebe \n4,ignored\n");
  CHECK(*l.Find("x", 1) == "Monica");
  CHECK(*l.Find("x", 3) == "Phoebe");
  CHECK(l.Find("x", 2) == nullptr);
  CHECK(l.Find("x", 4) == nullptr);
  CHECK(l.Find("x", 5) == nullptr);

  const auto v = ParseCharacterLabels(
      "video_id,track_id,name\ns01,1,Monica\ns02,1,IGNORED\n3,2,Ross\n");
  CHECK(*v.Find("s01", 1) == "Monica");
  CHECK(v.Find("s02", 1) == nullptr);
  CHECK(v.Find("s01", 2) == nullptr);
  CHECK(*v.Find("3", 2) == "Ross");

  const auto both = ParseCharacterLabels("1,Monica\nep2,1,WRONG\n");
  CHECK(*both.Find("ep1", 1) == "Monica");
  CHECK(both.Find("ep2", 1) == nullptr);

  try {
    ParseCharacterLabels("1,A\n2,B\nx,C\n", "cast.csv");
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).starts_with("cast.csv:3:"));
  }
  CHECK_THROWS_AS(ParseCharacterLabels("1,A\n1,B\n"), std::runtime_error);
  CHECK_THROWS_AS(ParseCharacterLabels("1,A,b,c\n"), std::runtime_error);
}

TEST_CASE("graph building and serialization") {
  SUBCASE("empty graph is a valid file") {
    const auto g = BuildGraph({}, {});
    const auto back = GraphFromJson(GraphToJson(g));
    CHECK(back.nodes.empty());
    CHECK(back.edges.empty());
    CHECK(EdgeTableCsv(g) == "rank,a,b,weight,ratio,frames,laeo_frames\n");
    CHECK(GraphToSvg(g).find("<svg") == 0);
  }
  SUBCASE("ranking and round trip") {
    std::vector<SocialEdge> edges{{"Ross", "Emily", 4, 1, 0.25, 0.3},
                                  {"Joey", "Chandler", 9, 8, 0.9, 0.8},
                                  {"Monica", "Chandler", 6, 2, 1.0 / 3, 0.3},
                                  {"Ross", "Rachel", 10, 9, 0.9, 0.1 + 0.2}};
    const auto g = BuildGraph({"Gunther"}, edges);
    CHECK(g.nodes == std::vector<std::string>{"Chandler", "Emily", "Gunther",
                                              "Joey", "Monica", "Rachel",
                                              "Ross"});
    REQUIRE(g.edges.size() == 4);
    CHECK(g.edges[0].b == "Joey");
    // 0.1 + 0.2 is above 0.3 in binary, so Rachel-Ross ranks next
    CHECK(g.edges[1].a == "Rachel");
    CHECK(g.edges[2].a == "Chandler");
    CHECK(g.edges[2].b == "Monica");
    CHECK(g.edges[3].a == "Emily");
    for (const auto& e : g.edges) CHECK(e.a < e.b);

    const auto back = GraphFromJson(GraphToJson(g));
    CHECK(back.nodes == g.nodes);
    REQUIRE(back.edges.size() == g.edges.size());
    for (size_t i = 0; i < g.edges.size(); ++i) {
      CHECK(back.edges[i].mean_laeo_score == g.edges[i].mean_laeo_score);
      CHECK(back.edges[i].ratio == g.edges[i].ratio);
      CHECK(back.edges[i].cooccur_frames == g.edges[i].cooccur_frames);
      CHECK(back.edges[i].laeo_frames == g.edges[i].laeo_frames);
    }
    CHECK(EdgeTableCsv(g).find("\n1,Chandler,Joey,") != std::string::npos);
    const std::string svg = GraphToSvg(g);
    CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
    CHECK(svg.find("<line") != std::string::npos);
  }
  SUBCASE("self and duplicate edges are rejected") {
    CHECK_THROWS_AS(BuildGraph({}, {{"A", "A", 1, 1, 1, 1}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        BuildGraph({}, {{"A", "B", 1, 1, 1, 1}, {"B", "A", 1, 1, 1, 1}}),
        std::invalid_argument);
  }
}
