// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedtopo {

/// Labelled samples with a fixed feature dimension, stored row-major.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::size_t num_classes, std::string source_tag = {});

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const std::string& source_tag() const noexcept { return source_tag_; }
  void set_source_tag(std::string tag) { source_tag_ = std::move(tag); }

  std::span<const double> features(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  std::uint32_t label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }

  // Throws configuration error on a wrong-width row or out-of-range label.
  void push_back(std::span<const double> row, std::uint32_t label);
  void set_label(std::size_t i, std::uint32_t label);

  // New dataset holding the given rows in the given order.
  Dataset select(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t dim_ = 0;
  std::size_t num_classes_ = 0;
  std::string source_tag_;
  std::vector<double> features_;
  std::vector<std::uint32_t> labels_;
};

}  // namespace fedtopo
