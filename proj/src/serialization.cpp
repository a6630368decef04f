#include "trade/serialization.hpp"

#include <istream>
#include <ostream>

namespace trade {

Json to_json(const Vec& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw DomainError("expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json to_json(const QuadraticUtility& f) {
  Json q = Json::array();
  for (Eigen::Index r = 0; r < f.q().rows(); ++r)
    for (Eigen::Index c = 0; c < f.q().cols(); ++c) q.push_back(f.q()(r, c));
  return Json{{"n", f.dim()}, {"Q", q}, {"u", to_json(f.u())}};
}

QuadraticUtility utility_from_json(const Json& j) {
  const int n = j.at("n").get<int>();
  const auto& q = j.at("Q");
  if (static_cast<int>(q.size()) != n * n) throw DomainError("utility JSON: Q must hold n*n entries");
  Mat m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = q[static_cast<std::size_t>(r * n + c)].get<double>();
  return QuadraticUtility(m, vec_from_json(j.at("u")));
}

Json to_json(const OfferLimits& l) {
  Json j{{"norm_cap", l.norm_cap}};
  j["per_category_cap"] = l.per_category_cap ? Json(*l.per_category_cap) : Json(nullptr);
  return j;
}

OfferLimits limits_from_json(const Json& j) {
  OfferLimits l;
  l.norm_cap = j.at("norm_cap").get<double>();
  if (j.contains("per_category_cap") && !j["per_category_cap"].is_null()) l.per_category_cap = j["per_category_cap"].get<double>();
  return l;
}

Json to_json(const TranscriptEvent& e, const std::string& algorithm) {
  Json j{{"step", e.step},
         {"algorithm", algorithm},
         {"stage", to_string(e.stage)},
         {"offer", to_json(e.offer)},
         {"response", to_string(e.response)},
         {"S_A", to_json(e.s_a)},
         {"S_B", to_json(e.s_b)},
         {"offering_benefit", e.benefit.offering}};
  j["responding_benefit"] = e.responding_known ? Json(e.benefit.responding) : Json(nullptr);
  j["theta"] = e.cone ? Json(e.cone->theta) : Json(nullptr);
  j["tau"] = e.cone ? to_json(e.cone->tau) : Json(nullptr);
  if (e.discrete) {
    j["corner_count"] = e.discrete->corner_count;
    j["sphere_radius"] = e.discrete->sphere_radius;
    j["adopted"] = e.discrete->adopted;
  }
  if (!e.tag.empty()) j["tag"] = e.tag;
  return j;
}

TranscriptEvent event_from_json(const Json& j) {
  TranscriptEvent e;
  e.step = j.at("step").get<int>();
  e.stage = stage_from_string(j.at("stage").get<std::string>());
  e.offer = vec_from_json(j.at("offer"));
  e.response = response_from_string(j.at("response").get<std::string>());
  e.s_a = vec_from_json(j.at("S_A"));
  e.s_b = vec_from_json(j.at("S_B"));
  e.benefit.offering = j.at("offering_benefit").get<double>();
  if (j.at("responding_benefit").is_null()) {
    e.responding_known = false;
  } else {
    e.benefit.responding = j["responding_benefit"].get<double>();
  }
  if (!j.at("theta").is_null()) e.cone = ConeSnapshot{vec_from_json(j.at("tau")), j["theta"].get<double>()};
  if (j.contains("corner_count"))
    e.discrete = DiscreteDiagnostics{j["corner_count"].get<int>(), j["sphere_radius"].get<double>(), j["adopted"].get<bool>()};
  if (j.contains("tag")) e.tag = j["tag"].get<std::string>();
  return e;
}

Json to_json(const ConeUpdate& u) {
  return Json{{"kind", to_string(u.kind)},     {"step", u.step},
              {"active", u.active},            {"tau_before", to_json(u.tau_before)},
              {"theta_before", u.theta_before}, {"tau_after", to_json(u.tau_after)},
              {"theta_after", u.theta_after}};
}

void write_transcript_jsonl(std::ostream& out, const NegotiationTranscript& t, const Json& header) {
  Json h = header;
  h["algorithm"] = t.algorithm;
  out << Json{{"header", h}}.dump() << '\n';
  for (const auto& e : t.events) out << to_json(e, t.algorithm).dump() << '\n';
  out << Json{{"terminal", to_string(t.terminal)}}.dump() << '\n';
}

LoadedTranscript read_transcript_jsonl(std::istream& in) {
  LoadedTranscript out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    if (j.contains("header")) {
      out.header = j["header"];
      if (out.header.contains("algorithm")) out.transcript.algorithm = out.header["algorithm"].get<std::string>();
    } else if (j.contains("terminal")) {
      out.transcript.terminal = terminal_from_string(j["terminal"].get<std::string>());
    } else {
      out.transcript.events.push_back(event_from_json(j));
    }
  }
  return out;
}

}  // namespace trade
