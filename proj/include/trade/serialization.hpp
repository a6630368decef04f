#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "trade/negotiation.hpp"

namespace trade {

using Json = nlohmann::json;

Json to_json(const Vec& v);
Vec vec_from_json(const Json& j);
Json to_json(const QuadraticUtility& f);
QuadraticUtility utility_from_json(const Json& j);
Json to_json(const OfferLimits& l);
OfferLimits limits_from_json(const Json& j);

Json to_json(const TranscriptEvent& e, const std::string& algorithm);
TranscriptEvent event_from_json(const Json& j);
Json to_json(const ConeUpdate& u);

// Header line, one line per event, then a terminal line.
void write_transcript_jsonl(std::ostream& out, const NegotiationTranscript& t, const Json& header = Json::object());

struct LoadedTranscript {
  Json header;
  NegotiationTranscript transcript;
};
LoadedTranscript read_transcript_jsonl(std::istream& in);

}  // namespace trade
