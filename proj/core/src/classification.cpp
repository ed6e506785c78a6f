#include "ccd/classification.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "ccd/error.hpp"

namespace ccd {

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ClassificationReport evaluate_classification(const std::vector<int>& labels,
                                             const std::vector<int>& predictions,
                                             const std::vector<std::string>& subjects,
                                             int num_classes) {
  if (num_classes < 1) throw Error("num_classes must be positive");
  if (labels.empty()) throw Error("no classification samples");
  if (predictions.size() != labels.size() || subjects.size() != labels.size()) {
    throw Error("labels, predictions and subjects differ in length");
  }
  ClassificationReport r;
  r.num_classes = num_classes;
  r.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
  long correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes) {
      throw Error("class index out of range");
    }
    ++r.confusion[labels[i]][predictions[i]];
    correct += labels[i] == predictions[i];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  for (int k = 0; k < num_classes; ++k) {
    long predicted = 0;
    long actual = 0;
    for (int j = 0; j < num_classes; ++j) {
      predicted += r.confusion[j][k];
      actual += r.confusion[k][j];
    }
    const double tp = static_cast<double>(r.confusion[k][k]);
    r.precision.push_back(predicted > 0 ? tp / predicted : 0.0);
    r.recall.push_back(actual > 0 ? tp / actual : 0.0);
  }
  r.macro_precision = mean_of(r.precision);
  r.macro_recall = mean_of(r.recall);

  struct Votes {
    std::vector<long> counts;
    int label = -1;
  };
  std::map<std::string, Votes> by_subject;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string key = subjects[i].empty() ? "#" + std::to_string(i) : subjects[i];
    Votes& v = by_subject[key];
    if (v.counts.empty()) v.counts.assign(num_classes, 0);
    if (v.label >= 0 && v.label != labels[i]) throw Error("subject '" + key + "' carries two labels");
    v.label = labels[i];
    ++v.counts[predictions[i]];
  }
  long subject_correct = 0;
  for (const auto& [key, v] : by_subject) {
    const int vote = static_cast<int>(std::max_element(v.counts.begin(), v.counts.end()) - v.counts.begin());
    subject_correct += vote == v.label;
  }
  r.subjects = static_cast<long>(by_subject.size());
  r.subject_accuracy = static_cast<double>(subject_correct) / static_cast<double>(r.subjects);
  return r;
}

nlohmann::json to_json(const ClassificationReport& r) {
  return nlohmann::json{{"accuracy", r.accuracy},
                        {"subject_accuracy", r.subject_accuracy},
                        {"subjects", r.subjects},
                        {"precision", r.precision},
                        {"recall", r.recall},
                        {"macro_precision", r.macro_precision},
                        {"macro_recall", r.macro_recall},
                        {"confusion", r.confusion}};
}

std::string format_classification(const ClassificationReport& r) {
  std::ostringstream out;
  char buf[128];
  long total = 0;
  for (const auto& row : r.confusion) {
    for (long v : row) total += v;
  }
  std::snprintf(buf, sizeof buf, "image-wise accuracy    %.4f  (%ld images)\n", r.accuracy, total);
  out << buf;
  std::snprintf(buf, sizeof buf, "subject-wise accuracy  %.4f  (%ld subjects, majority vote)\n",
                r.subject_accuracy, r.subjects);
  out << buf;
  std::snprintf(buf, sizeof buf, "macro precision        %.4f\nmacro recall           %.4f\n",
                r.macro_precision, r.macro_recall);
  out << buf;
  out << "class  precision  recall  confusion (true row, predicted columns)\n";
  for (int k = 0; k < r.num_classes; ++k) {
    std::snprintf(buf, sizeof buf, "%5d  %9.4f  %6.4f ", k, r.precision[k], r.recall[k]);
    out << buf;
    for (long v : r.confusion[k]) out << " " << v;
    out << "\n";
  }
  return out.str();
}

}  // namespace ccd
