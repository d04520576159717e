// Copyright 2026 The qfv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QFV_REPORT_HPP_
#define QFV_REPORT_HPP_

#include <string>
#include <vector>

namespace qfv {

// One named check with its measured value.  value_text/expected_text, when
// nonempty, carry an exact rational ("p/q") that replaces the double in
// serialized output.
struct CheckEntry {
  std::string name;
  std::string status;  // "pass", "fail" or "warn"
  double value = 0;
  double expected = 0;
  double tolerance = 0;
  std::string value_text;
  std::string expected_text;
};

struct CheckReport {
  std::vector<CheckEntry> entries;

  void add(const std::string& name, bool pass, double value, double expected,
           double tolerance) {
    entries.push_back({name, pass ? "pass" : "fail", value, expected,
                       tolerance, "", ""});
  }
  void add_text(const std::string& name, bool pass, const std::string& value,
                const std::string& expected) {
    entries.push_back({name, pass ? "pass" : "fail", 0, 0, 0, value, expected});
  }
  void warn(const std::string& name, double value, double expected,
            double tolerance) {
    entries.push_back({name, "warn", value, expected, tolerance, "", ""});
  }
  bool all_pass() const {
    for (const auto& e : entries)
      if (e.status == "fail") return false;
    return true;
  }
};

}  // namespace qfv

#endif  // QFV_REPORT_HPP_
