#include "sketchsearch/codebook.hpp"

#include <algorithm>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

const char* answer_name(HumanAnswer a) {
  switch (a) {
    case HumanAnswer::Yes: return "Yes";
    case HumanAnswer::No: return "No";
    case HumanAnswer::Null: return "Null";
  }
  return "?";
}

std::optional<HumanAnswer> parse_answer(const std::string& s) {
  if (s == "Yes") return HumanAnswer::Yes;
  if (s == "No") return HumanAnswer::No;
  if (s == "Null" || s == "IDontKnow") return HumanAnswer::Null;
  return std::nullopt;
}

Codebook::Codebook(bool mode_query) : mode_query_(mode_query) {
  queries_.push_back({});
  if (mode_query_) queries_.push_back({Query::Kind::Mode, Relation::Near, -1});
}

int Codebook::add(SketchRecord sketch) {
  if (find(sketch.label)) throw DuplicateLabel("sketch label already registered: " + sketch.label);
  const int index = static_cast<int>(sketches_.size());
  sketches_.push_back(std::make_shared<const SketchRecord>(std::move(sketch)));
  for (Relation r : kQueryRelations) queries_.push_back({Query::Kind::Relation, r, index});
  return index;
}

std::optional<int> Codebook::find(const std::string& label) const {
  for (std::size_t i = 0; i < sketches_.size(); ++i) {
    if (sketches_[i]->label == label) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::string Codebook::describe(const Query& q) const {
  switch (q.kind) {
    case Query::Kind::Null: return "Null";
    case Query::Kind::Mode: return "OffRoad?";
    case Query::Kind::Relation:
      return std::string(relation_name(q.relation)) + ":" + sketch(q.sketch).label;
  }
  return "?";
}

double query_truth(const Codebook& book, const Query& q, const TargetState& s) {
  switch (q.kind) {
    case Query::Kind::Null: return 0.0;
    case Query::Kind::Mode: return s.mode == Mode::OffRoad ? 1.0 : 0.0;
    case Query::Kind::Relation:
      if (q.sketch < 0 || static_cast<std::size_t>(q.sketch) >= book.sketches().size()) {
        throw UnknownSketch("query references sketch #" + std::to_string(q.sketch));
      }
      return relation_likelihood(book.sketch(q.sketch), q.relation, s.position);
  }
  return 0.0;
}

double corrupt_yes(double p_yes, double eta) { return eta * p_yes + (1.0 - eta) * (1.0 - p_yes); }

double answer_likelihood(const Codebook& book, const Query& q, HumanAnswer a, const TargetState& s,
                         const AnswerModel& model) {
  if (q.is_null()) return a == HumanAnswer::Null ? 1.0 : 0.0;
  if (a == HumanAnswer::Null) return 1.0 - model.xi;
  const double yes = corrupt_yes(query_truth(book, q, s), model.eta);
  return model.xi * (a == HumanAnswer::Yes ? yes : 1.0 - yes);
}

double statement_likelihood(const Codebook& book, const Statement& st, Point2 s, double eta) {
  const auto idx = book.find(st.label);
  if (!idx) throw UnknownReference("no sketch labelled '" + st.label + "'");
  const double l = relation_likelihood(book.sketch(*idx), st.relation, s);
  return corrupt_yes(st.positive ? l : 1.0 - l, eta);
}

}  // namespace sketchsearch
