#pragma once

#include "freenoise/array.hpp"

namespace freenoise {

/// Supplies the cross-attention conditioning tokens for a given
/// (timestep, cross-attention layer index, frame). The returned reference
/// must stay valid for the duration of the forward pass.
class ConditionSource {
 public:
  virtual ~ConditionSource() = default;
  virtual const Array& resolve(int t, int layer, int frame) = 0;
};

/// One embedding for every (t, layer, frame).
class FixedCondition final : public ConditionSource {
 public:
  explicit FixedCondition(Array tokens) : tokens_(std::move(tokens)) {}
  const Array& resolve(int, int, int) override { return tokens_; }
  const Array& tokens() const { return tokens_; }

 private:
  Array tokens_;
};

/// Shifts the frame index before delegating; used when a sub-segment of a
/// longer video is pushed through the model but conditioning is defined on
/// global frame numbers.
class OffsetCondition final : public ConditionSource {
 public:
  OffsetCondition(ConditionSource& inner, int frame_offset)
      : inner_(inner), offset_(frame_offset) {}
  const Array& resolve(int t, int layer, int frame) override {
    return inner_.resolve(t, layer, frame + offset_);
  }

 private:
  ConditionSource& inner_;
  int offset_;
};

}  // namespace freenoise
