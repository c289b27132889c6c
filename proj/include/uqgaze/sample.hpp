#ifndef UQGAZE_SAMPLE_HPP
#define UQGAZE_SAMPLE_HPP

#include <cstdint>

#include "image.hpp"

namespace uqgaze {

/// One network input/label pair. Patches are the nominal center crops of the
/// canvases; the canvases are kept so off-crop corruptions can slide the window.
struct EyeSample {
    ImageF32 left;
    ImageF32 right;
    ImageF32 left_canvas;
    ImageF32 right_canvas;
    double head_pitch = 0.0;
    double head_yaw = 0.0;
    double gaze_pitch = 0.0;
    double gaze_yaw = 0.0;
    std::uint64_t sample_id = 0;

    bool operator==(const EyeSample&) const = default;
};

} // namespace uqgaze

#endif
