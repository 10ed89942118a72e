// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/dataset.hpp"

#include "fedtopo/error.hpp"

namespace fedtopo {

Dataset::Dataset(std::size_t dim, std::size_t num_classes, std::string source_tag)
    : dim_(dim), num_classes_(num_classes), source_tag_(std::move(source_tag)) {}

void Dataset::push_back(std::span<const double> row, std::uint32_t label) {
  if (row.size() != dim_) {
    throw Error(Errc::configuration, "row width " + std::to_string(row.size()) +
                                         " does not match dimension " + std::to_string(dim_));
  }
  if (label >= num_classes_) {
    throw Error(Errc::configuration, "label " + std::to_string(label) + " out of range");
  }
  features_.insert(features_.end(), row.begin(), row.end());
  labels_.push_back(label);
}

void Dataset::set_label(std::size_t i, std::uint32_t label) {
  if (label >= num_classes_) {
    throw Error(Errc::configuration, "label " + std::to_string(label) + " out of range");
  }
  labels_.at(i) = label;
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out(dim_, num_classes_, source_tag_);
  out.features_.reserve(indices.size() * dim_);
  out.labels_.reserve(indices.size());
  for (std::size_t i : indices) {
    auto row = features(i);
    out.features_.insert(out.features_.end(), row.begin(), row.end());
    out.labels_.push_back(labels_[i]);
  }
  return out;
}

}  // namespace fedtopo
