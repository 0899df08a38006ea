// Copyright 2026 The ecsim Authors
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

#include "ecsim/tensor.hpp"

#include <cmath>
#include <utility>

#include "ecsim/textio.hpp"

namespace ecsim {

namespace {

void check_dims(int height, int width, const char* what) {
  if (height < 1 || width < 1) {
    throw Error(std::string(what) + ": dimensions must be at least 1x1");
  }
}

}  // namespace

int argmax_index(const Eigen::Ref<const Eigen::VectorXd>& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

Image::Image(int height, int width) : height_(height), width_(width) {
  check_dims(height, width, "Image");
  for (auto& ch : channels_) ch = Grid::Zero(height, width);
}

Image::Image(std::array<Grid, kChannels> channels)
    : channels_(std::move(channels)) {
  height_ = static_cast<int>(channels_[0].rows());
  width_ = static_cast<int>(channels_[0].cols());
  check_dims(height_, width_, "Image");
  for (const auto& ch : channels_) {
    if (ch.rows() != height_ || ch.cols() != width_) {
      throw Error("Image: channel dimensions disagree");
    }
    if ((ch < 0.0).any() || (ch > 255.0).any()) {
      throw Error("Image: intensity outside [0, 255]");
    }
  }
}

bool Image::operator==(const Image& other) const {
  if (height_ != other.height_ || width_ != other.width_) return false;
  for (int c = 0; c < kChannels; ++c) {
    if (!(channels_[c] == other.channels_[c]).all()) return false;
  }
  return true;
}

SemanticMask::SemanticMask(LabelGrid labels, int class_count)
    : labels_(std::move(labels)), class_count_(class_count) {
  check_dims(height(), width(), "SemanticMask");
  if (class_count_ < 1) throw Error("SemanticMask: class_count must be >= 1");
  if ((labels_ < 0).any() || (labels_ >= class_count_).any()) {
    throw Error("SemanticMask: label outside [0, class_count)");
  }
}

bool SemanticMask::operator==(const SemanticMask& other) const {
  return class_count_ == other.class_count_ &&
         labels_.rows() == other.labels_.rows() &&
         labels_.cols() == other.labels_.cols() &&
         (labels_ == other.labels_).all();
}

ProbMap::ProbMap(int class_count, int height, int width, Eigen::MatrixXd probs)
    : class_count_(class_count),
      height_(height),
      width_(width),
      probs_(std::move(probs)) {
  check_dims(height_, width_, "ProbMap");
  if (class_count_ < 1) throw Error("ProbMap: class_count must be >= 1");
  if (probs_.rows() != class_count_ ||
      probs_.cols() != static_cast<Eigen::Index>(height_) * width_) {
    throw Error("ProbMap: storage shape mismatch");
  }
  if ((probs_.array() < 0.0).any() ||
      (probs_.array() > 1.0 + kProbSumTolerance).any()) {
    throw Error("ProbMap: probability outside [0, 1]");
  }
  for (Eigen::Index p = 0; p < probs_.cols(); ++p) {
    const double sum = probs_.col(p).sum();
    if (std::abs(sum - 1.0) > kProbSumTolerance) {
      throw Error("ProbMap: pixel distribution does not sum to 1");
    }
    // Skip the division when the sum is already exact so that
    // serialize/parse cycles reproduce the stored values bit for bit.
    if (std::abs(sum - 1.0) > 1e-12) probs_.col(p) /= sum;
  }
  probs_ = probs_.cwiseMin(1.0).cwiseMax(0.0);
}

bool ProbMap::operator==(const ProbMap& other) const {
  return class_count_ == other.class_count_ && height_ == other.height_ &&
         width_ == other.width_ && probs_ == other.probs_;
}

RegionMaskSet::RegionMaskSet(int height, int width)
    : height_(height), width_(width) {
  check_dims(height, width, "RegionMaskSet");
}

void RegionMaskSet::add(MaskGrid mask) {
  if (mask.rows() != height_ || mask.cols() != width_) {
    throw Error("RegionMaskSet: mask dimensions disagree");
  }
  if (!mask.any()) throw Error("RegionMaskSet: empty mask");
  masks_.push_back(std::move(mask));
}

bool RegionMaskSet::operator==(const RegionMaskSet& other) const {
  if (height_ != other.height_ || width_ != other.width_ ||
      masks_.size() != other.masks_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < masks_.size(); ++i) {
    if (!(masks_[i] == other.masks_[i]).all()) return false;
  }
  return true;
}

SemanticMask argmax_labels(const ProbMap& p) {
  LabelGrid labels(p.height(), p.width());
  for (int r = 0; r < p.height(); ++r) {
    for (int c = 0; c < p.width(); ++c) {
      labels(r, c) = argmax_index(p.matrix().col(p.pixel_index(r, c)));
    }
  }
  return SemanticMask(std::move(labels), p.class_count());
}

Grid top1_map(const ProbMap& p) {
  Grid out(p.height(), p.width());
  for (int r = 0; r < p.height(); ++r) {
    for (int c = 0; c < p.width(); ++c) {
      out(r, c) = p.matrix().col(p.pixel_index(r, c)).maxCoeff();
    }
  }
  return out;
}

Grid top2_margin_map(const ProbMap& p) {
  if (p.class_count() < 2) {
    throw Error("top2_margin_map: needs at least two classes");
  }
  Grid out(p.height(), p.width());
  for (int r = 0; r < p.height(); ++r) {
    for (int c = 0; c < p.width(); ++c) {
      const auto col = p.matrix().col(p.pixel_index(r, c));
      double top1 = -1.0, top2 = -1.0;
      for (Eigen::Index i = 0; i < col.size(); ++i) {
        const double v = col(i);
        if (v > top1) {
          top2 = top1;
          top1 = v;
        } else if (v > top2) {
          top2 = v;
        }
      }
      out(r, c) = top1 - top2;
    }
  }
  return out;
}

namespace {

void append_values(std::string& out, const char* header,
                   const std::vector<double>& values) {
  out += header;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i % 16 == 0) ? '\n' : ' ';
    out += format_double(values[i]);
  }
  out += '\n';
}

std::string header_line(const char* tag, long a, long b, long c) {
  return std::string(tag) + " " + std::to_string(a) + " " + std::to_string(b) +
         " " + std::to_string(c);
}

}  // namespace

std::string to_text(const ProbMap& p) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(p.class_count()) * p.pixel_count());
  for (int cls = 0; cls < p.class_count(); ++cls) {
    for (int px = 0; px < p.pixel_count(); ++px) {
      values.push_back(p.matrix()(cls, px));
    }
  }
  std::string out;
  append_values(out, header_line("PM", p.class_count(), p.height(), p.width()).c_str(),
                values);
  return out;
}

std::string to_text(const SemanticMask& m) {
  std::string out = header_line("SM", m.class_count(), m.height(), m.width());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      const int idx = r * m.width() + c;
      out += (idx % 16 == 0) ? '\n' : ' ';
      out += std::to_string(m.label(r, c));
    }
  }
  out += '\n';
  return out;
}

std::string to_text(const RegionMaskSet& rm) {
  std::string out = header_line("RM", static_cast<long>(rm.size()),
                                rm.height(), rm.width());
  long idx = 0;
  for (const auto& mask : rm.masks()) {
    for (int r = 0; r < rm.height(); ++r) {
      for (int c = 0; c < rm.width(); ++c) {
        out += (idx++ % 16 == 0) ? '\n' : ' ';
        out += mask(r, c) ? '1' : '0';
      }
    }
  }
  out += '\n';
  return out;
}

std::string to_text(const Image& img) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(Image::kChannels) * img.height() *
                 img.width());
  for (int ch = 0; ch < Image::kChannels; ++ch) {
    for (int r = 0; r < img.height(); ++r) {
      for (int c = 0; c < img.width(); ++c) {
        values.push_back(img.value(ch, r, c));
      }
    }
  }
  std::string out;
  append_values(out,
                header_line("IM", Image::kChannels, img.height(), img.width()).c_str(),
                values);
  return out;
}

namespace {

void expect_tag(TokenStream& ts, std::string_view tag) {
  const auto tok = ts.next_token();
  if (tok != tag) {
    throw ParseError("expected '" + std::string(tag) + "' header, got '" +
                     std::string(tok) + "'");
  }
}

int parse_dim(TokenStream& ts, const char* what, long max = 1 << 20) {
  const long long v = ts.next_int();
  if (v < 1 || v > max) {
    throw ParseError(std::string(what) + " out of range");
  }
  return static_cast<int>(v);
}

void expect_done(TokenStream& ts, const char* what) {
  if (!ts.done()) {
    throw ParseError(std::string(what) + ": trailing tokens in payload");
  }
}

}  // namespace

ProbMap prob_map_from_text(std::string_view text) {
  TokenStream ts(text);
  expect_tag(ts, "PM");
  const int m = parse_dim(ts, "class count", 4096);
  const int h = parse_dim(ts, "height");
  const int w = parse_dim(ts, "width");
  Eigen::MatrixXd probs(m, static_cast<Eigen::Index>(h) * w);
  for (int cls = 0; cls < m; ++cls) {
    for (Eigen::Index px = 0; px < probs.cols(); ++px) {
      probs(cls, px) = ts.next_double();
    }
  }
  expect_done(ts, "ProbMap");
  return ProbMap(m, h, w, std::move(probs));
}

SemanticMask semantic_mask_from_text(std::string_view text) {
  TokenStream ts(text);
  expect_tag(ts, "SM");
  const int m = parse_dim(ts, "class count", 4096);
  const int h = parse_dim(ts, "height");
  const int w = parse_dim(ts, "width");
  LabelGrid labels(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      labels(r, c) = static_cast<int>(ts.next_int());
    }
  }
  expect_done(ts, "SemanticMask");
  return SemanticMask(std::move(labels), m);
}

RegionMaskSet region_masks_from_text(std::string_view text) {
  TokenStream ts(text);
  expect_tag(ts, "RM");
  const long long count = ts.next_int();
  if (count < 0 || count > (1 << 20)) throw ParseError("mask count out of range");
  const int h = parse_dim(ts, "height");
  const int w = parse_dim(ts, "width");
  RegionMaskSet out(h, w);
  for (long long i = 0; i < count; ++i) {
    MaskGrid mask(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const long long v = ts.next_int();
        if (v != 0 && v != 1) throw ParseError("mask value must be 0 or 1");
        mask(r, c) = v == 1;
      }
    }
    out.add(std::move(mask));
  }
  expect_done(ts, "RegionMaskSet");
  return out;
}

Image image_from_text(std::string_view text) {
  TokenStream ts(text);
  expect_tag(ts, "IM");
  const int channels = parse_dim(ts, "channel count", 3);
  if (channels != Image::kChannels) {
    throw ParseError("Image: channel count must be 3");
  }
  const int h = parse_dim(ts, "height");
  const int w = parse_dim(ts, "width");
  std::array<Grid, Image::kChannels> data;
  for (auto& ch : data) {
    ch.resize(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        ch(r, c) = ts.next_double();
      }
    }
  }
  expect_done(ts, "Image");
  return Image(std::move(data));
}

}  // namespace ecsim
