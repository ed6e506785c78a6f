#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace ccd {

/// Accuracy bookkeeping for the encoder classification head.
struct ClassificationReport {
  int num_classes = 0;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  double accuracy = 0.0;
  std::vector<double> precision;  // per class; 0 when a class is never predicted
  std::vector<double> recall;     // per class; 0 when a class never occurs
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double subject_accuracy = 0.0;
  long subjects = 0;
};

/// Subject-wise accuracy takes a majority vote over each subject's
/// predictions, ties going to the lowest class index. An empty subject name
/// makes the image its own subject.
ClassificationReport evaluate_classification(const std::vector<int>& labels,
                                             const std::vector<int>& predictions,
                                             const std::vector<std::string>& subjects,
                                             int num_classes);

nlohmann::json to_json(const ClassificationReport& report);
std::string format_classification(const ClassificationReport& report);

}  // namespace ccd
