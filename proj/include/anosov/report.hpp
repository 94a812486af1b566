#pragma once
// Verification reports: per-family worst margins, parameters, canonical text.
//
// Margins are logarithmic: margin >= -slack means the inequality holds up to
// the configured slack.  Reports print deterministically (sorted params,
// insertion-ordered families, 17 significant digits) so a digest of the text
// identifies a run.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace anosov {

struct MarginRecord {
  std::string family;  // which inequality
  double margin = 0.0; // worst (minimal) log-margin seen
  std::string where;   // short descriptor of the minimizing sample
  double t = 0.0;      // flow time of the minimizer
};

struct VerificationReport {
  std::string suite;
  std::string model_id;
  double slack = 1e-6;
  bool pass = false;

  std::vector<MarginRecord> records;
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::string> notes;

  // Keeps the minimum margin per family; first call inserts the family.
  void add_margin(const std::string& family, double margin,
                  const std::string& where, double t);
  void set_param(const std::string& name, double value);
  void note(const std::string& text);

  double worst_margin() const;
  const MarginRecord* find(const std::string& family) const;
  // pass = (all margins >= -slack); call after the last add_margin.
  void finalize();

  std::string to_text() const;
  uint64_t digest() const;
};

}  // namespace anosov
