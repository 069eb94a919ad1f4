#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sketchsearch/autolabel.hpp"
#include "sketchsearch/world.hpp"

namespace sketchsearch {

enum class HumanAnswer : std::uint8_t { Yes = 0, No = 1, Null = 2 };
inline constexpr std::size_t kHumanAnswerCount = 3;
const char* answer_name(HumanAnswer a);
std::optional<HumanAnswer> parse_answer(const std::string& s);  // "IDontKnow" maps to Null

/// A robot query: none, "is the target <relation> <sketch>?", or "has the
/// target gone off-road?".
struct Query {
  enum class Kind : std::uint8_t { Null, Relation, Mode };
  Kind kind = Kind::Null;
  Relation relation = Relation::Near;
  int sketch = -1;  // index into the codebook's sketches

  bool is_null() const { return kind == Kind::Null; }
  friend bool operator==(const Query&, const Query&) = default;
};

/// "Target is / is not <relation> <label>".
struct Statement {
  bool positive = true;
  Relation relation = Relation::Near;
  std::string label;
};

/// Relations the robot may ask about for each sketch.
inline constexpr std::array<Relation, 5> kQueryRelations{Relation::Near, Relation::E, Relation::W, Relation::N,
                                                         Relation::S};

/// Registered sketches and the query space derived from them. Only ever grows.
class Codebook {
 public:
  explicit Codebook(bool mode_query = false);

  /// Adds five queries for the sketch. Throws DuplicateLabel (codebook unchanged).
  int add(SketchRecord sketch);
  std::optional<int> find(const std::string& label) const;

  const std::vector<std::shared_ptr<const SketchRecord>>& sketches() const { return sketches_; }
  const SketchRecord& sketch(int i) const { return *sketches_.at(static_cast<std::size_t>(i)); }
  const std::vector<Query>& queries() const { return queries_; }
  bool mode_query() const { return mode_query_; }
  std::string describe(const Query& q) const;

 private:
  bool mode_query_;
  std::vector<std::shared_ptr<const SketchRecord>> sketches_;
  std::vector<Query> queries_;
};

/// Assumed or true human characteristics that shape answers.
struct AnswerModel {
  double eta = 1.0;  // accuracy
  double xi = 1.0;   // availability
};

/// Truthful p(Yes | s) for a non-null query.
double query_truth(const Codebook& book, const Query& q, const TargetState& s);

/// Accuracy corruption over binary answers: truthful mass scaled by eta, the
/// rest handed to the other answer.
double corrupt_yes(double p_yes, double eta);

/// p̄(o_h | s, a_q) including accuracy and availability.
double answer_likelihood(const Codebook& book, const Query& q, HumanAnswer a, const TargetState& s,
                         const AnswerModel& model);

/// Likelihood of a statement given the state, with accuracy `eta` on polarity.
double statement_likelihood(const Codebook& book, const Statement& st, Point2 s, double eta = 1.0);

}  // namespace sketchsearch
